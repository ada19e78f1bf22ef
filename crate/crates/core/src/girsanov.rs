//! Girsanov log-densities of the low-mode process against the Wiener
//! reference measure with covariance `γ` (see [`crate::forcing`] for the
//! sampling convention).
//!
//! Per step, with predictable drift `f_i` and increment `Δs_i`, the log-density
//! increment is
//!
//! `Σ_{half-lattice k} [Re(conj(f_k) Δs_k) - ½ |f_k|² dt] / γ_k
//!   = ½ [(f, γ⁻¹ Δs) - ½ (f, γ⁻¹ f) dt]`,
//!
//! the factor `½` coming from the per-component variance `γ_k dt` of the
//! complex increments. All stochastic integrals are Itô (left point).

use rand::Rng;

use crate::dynamics::{Dynamics, NonlinearMode};
use crate::error::{Error, Result};
use crate::forcing::ForcingSpec;
use crate::integrator::{step_count, Propagator, Trajectory};
use crate::parallel::Parallelism;
use crate::rng::stream_rng;
use crate::spectral::VorticityField;
use crate::stats::{CompensatedSum, MeanEstimate};

/// Per-step log-density increments and their compensated total.
#[derive(Clone, Debug, PartialEq)]
pub struct GirsanovLog {
    pub t0: f64,
    pub t1: f64,
    pub increments: Vec<f64>,
    pub total: f64,
}

impl GirsanovLog {
    pub fn from_increments(t0: f64, t1: f64, increments: Vec<f64>) -> Self {
        let mut acc = CompensatedSum::new();
        for &x in &increments {
            acc.add(x);
        }
        Self {
            t0,
            t1,
            total: acc.value(),
            increments,
        }
    }

    pub fn weight(&self) -> f64 {
        self.total.exp()
    }
}

/// Log-density increment of one step.
pub fn log_increment(spec: &ForcingSpec, f: &VorticityField, ds: &VorticityField, dt: f64) -> f64 {
    0.5 * (spec.gamma_inv_inner_unchecked(f, ds) - 0.5 * spec.gamma_inv_inner_unchecked(f, f) * dt)
}

/// Log-density from given drifts and increments (`drifts[i]` acts on `ds[i]`).
pub fn log_density_from_parts(
    spec: &ForcingSpec,
    drifts: &[VorticityField],
    ds: &[VorticityField],
    dt: f64,
    t0: f64,
) -> Result<GirsanovLog> {
    if drifts.len() != ds.len() {
        return Err(Error::Precondition("one drift per increment required".into()));
    }
    for v in drifts.iter().chain(ds) {
        if !v.is_low_supported() {
            return Err(Error::SupportViolation("low"));
        }
    }
    let inc = drifts
        .iter()
        .zip(ds)
        .map(|(f, d)| log_increment(spec, f, d, dt))
        .collect();
    Ok(GirsanovLog::from_increments(t0, t0 + dt * ds.len() as f64, inc))
}

/// Log-density of the recorded low-mode path with `f = P F(ω(t_i))` and
/// `Δs = s(t_{i+1}) - s(t_i)`. Step `i` only reads states up to `t_i` for the
/// drift.
pub fn log_density(traj: &Trajectory, spec: &ForcingSpec) -> Result<GirsanovLog> {
    if !traj.is_dense() {
        return Err(Error::SamplingTooCoarse { stride: traj.stride });
    }
    if traj.noise_log.is_none() {
        return Err(Error::MissingNoiseLog);
    }
    let mut dynamics = Dynamics::new(traj.grid(), NonlinearMode::Fast)?;
    let mut inc = Vec::with_capacity(traj.len().saturating_sub(1));
    for i in 0..traj.len() - 1 {
        let prefix = &traj.states[..=i];
        let f = dynamics.reduced_drift(&prefix[i]);
        let ds = &traj.states[i + 1].project_low() - &traj.states[i].project_low();
        inc.push(log_increment(spec, &f, &ds, traj.dt));
    }
    Ok(GirsanovLog::from_increments(traj.times[0], traj.t_end(), inc))
}

/// Path of the reduced system: the low modes follow either a Wiener path
/// (`drifted = false`) or the Euler scheme `s' = s + f dt + db`; the high
/// modes always follow the exponential step driven by `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedPath {
    pub final_state: VorticityField,
    pub log: GirsanovLog,
    /// Steps at which the drift was clipped.
    pub clipped_steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReducedPathSettings {
    pub dt: f64,
    pub t_end: f64,
    /// Cap on `‖f‖`; `None` disables clipping.
    pub clip: Option<f64>,
    pub drifted: bool,
}

pub fn sample_reduced_path<R: Rng + ?Sized>(
    w0: &VorticityField,
    spec: &ForcingSpec,
    settings: ReducedPathSettings,
    rng: &mut R,
) -> Result<ReducedPath> {
    let steps = step_count(settings.t_end, settings.dt)?;
    let dt = settings.dt;
    let grid = w0.grid();
    let mut prop = Propagator::new(grid, dt, NonlinearMode::Fast)?;
    let mut s = w0.project_low();
    let mut l = w0.project_high();
    let mut db = VorticityField::zeros(grid);
    let mut inc = Vec::with_capacity(steps);
    let mut clipped = 0;
    for i in 0..steps {
        // one advection evaluation serves the drift and the high-mode update
        prop.advance_high(&s, &mut l);
        let b = prop.last_nonlinear().project_low();
        let mut f = &b + &crate::dynamics::linear_part(&s);
        if let Some(cap) = settings.clip {
            let n = f.l2_norm();
            if n > cap {
                f = f.scaled(cap / n);
                clipped += 1;
            }
        }
        spec.sample_increment_into(dt, rng, &mut db);
        inc.push(log_increment(spec, &f, &db, dt));
        s += &db;
        if settings.drifted {
            s.axpy(dt, &f);
        }
        if !s.is_finite() || !l.is_finite() {
            return Err(Error::NonFiniteState {
                time: (i + 1) as f64 * dt,
            });
        }
    }
    Ok(ReducedPath {
        final_state: &s + &l,
        log: GirsanovLog::from_increments(0.0, steps as f64 * dt, inc),
        clipped_steps: clipped,
    })
}

/// Importance-sampling estimate `n⁻¹ Σ w_i F(ω_i(t))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReweightedEstimate {
    pub estimate: f64,
    pub se: f64,
    pub n: usize,
    /// `(Σw)² / Σw²`.
    pub ess: f64,
    pub mean_weight: f64,
    /// Set when `ess < 0.01 n`.
    pub low_ess: bool,
}

pub fn reweighted_expectation<F: Fn(&VorticityField) -> f64>(paths: &[ReducedPath], observable: F) -> ReweightedEstimate {
    let weights: Vec<f64> = paths.iter().map(|p| p.log.weight()).collect();
    let values: Vec<f64> = paths
        .iter()
        .zip(&weights)
        .map(|(p, w)| w * observable(&p.final_state))
        .collect();
    let est = MeanEstimate::from_samples(&values);
    let sw: f64 = crate::stats::pairwise_sum(&weights);
    let sq: Vec<f64> = weights.iter().map(|w| w * w).collect();
    let sw2 = crate::stats::pairwise_sum(&sq);
    let ess = if sw2 > 0.0 { sw * sw / sw2 } else { 0.0 };
    let n = paths.len();
    ReweightedEstimate {
        estimate: est.mean,
        se: if n > 1 { est.se } else { 0.0 },
        n,
        ess,
        mean_weight: sw / n as f64,
        low_ess: ess < 0.01 * n as f64,
    }
}

/// `n` independent reduced paths; path `i` uses stream `(seed, component, i)`.
pub fn sample_reduced_ensemble(
    w0: &VorticityField,
    spec: &ForcingSpec,
    settings: ReducedPathSettings,
    n: usize,
    seed: u64,
    component: &str,
    par: &Parallelism,
) -> Result<Vec<ReducedPath>> {
    par.try_map(n, |i| {
        let mut rng = stream_rng(seed, component, i as u64);
        sample_reduced_path(w0, spec, settings, &mut rng)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::uniform_spec;
    use crate::integrator::{simulate, RecordPolicy};
    use crate::spectral::SpectralGrid;

    #[test]
    fn zero_path_has_zero_log_density() {
        let g = SpectralGrid::new(4, 2).unwrap();
        let spec = uniform_spec(&g, 1.0).unwrap();
        let tr = crate::integrator::simulate_with(
            &VorticityField::zeros(&g),
            crate::integrator::RunSettings::new(0.01, 0.5),
            &mut crate::integrator::NoNoise,
            false,
            RecordPolicy::Dense { noise_log: true },
        )
        .unwrap();
        assert_eq!(log_density(&tr, &spec).unwrap().total, 0.0);
    }

    #[test]
    fn needs_noise_log() {
        let g = SpectralGrid::new(4, 2).unwrap();
        let spec = uniform_spec(&g, 1.0).unwrap();
        let mut rng = stream_rng(1, "girsanov-test", 0);
        let tr = simulate(&VorticityField::zeros(&g), &spec, 0.1, 0.01, &mut rng, RecordPolicy::Dense { noise_log: false }).unwrap();
        assert!(matches!(log_density(&tr, &spec), Err(Error::MissingNoiseLog)));
    }

    #[test]
    fn zero_horizon_weights_are_one() {
        let g = SpectralGrid::new(4, 2).unwrap();
        let spec = uniform_spec(&g, 1.0).unwrap();
        let mut rng = stream_rng(1, "girsanov-test", 1);
        let w0 = crate::spectral::sample_gaussian_field(&g, 0.5, &mut rng);
        let settings = ReducedPathSettings {
            dt: 0.01,
            t_end: 0.0,
            clip: None,
            drifted: false,
        };
        let paths: Vec<_> = (0..5)
            .map(|_| sample_reduced_path(&w0, &spec, settings, &mut rng).unwrap())
            .collect();
        let est = reweighted_expectation(&paths, |w| w.l2_norm_sq());
        assert_eq!(est.estimate, w0.l2_norm_sq());
    }
}
