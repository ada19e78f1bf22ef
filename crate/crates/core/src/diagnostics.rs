//! Path functionals on unit time intervals and the enstrophy checks.
//!
//! For the unit interval `n = [n-1, n]`:
//!
//! * `D_n = ½ sup ‖ω‖² + ∫ ‖∇ω‖²`, with the sup taken over the recorded
//!   instants (both endpoints included) and the integral by a left Riemann
//!   sum. The max under-estimates the sup by `O(dt)`.
//! * the balance residual of `D_t = D_{n-1} + R (t - (n-1)) + ∫ (ω, db)` at
//!   `t = n`, i.e. `½‖ω(n)‖² + ∫‖∇ω‖² - ½‖ω(n-1)‖² - R - Σ (ω_i, db_i)`.
//!   It is zero in continuous time and `O(dt)` for the discrete scheme.

use rand::Rng;

use crate::error::{Error, Result};
use crate::forcing::ForcingSpec;
use crate::integrator::{run_observed, steps_per_unit, GaussianNoise, NoNoise, RunSettings, Trajectory};
use crate::parallel::Parallelism;
use crate::rng::stream_rng;
use crate::spectral::VorticityField;
use crate::stats::{bootstrap, fit_line, mean, percentile_interval, LineFit};

/// Per-unit-interval functionals; index `n - 1` holds interval `n`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiagnosticSeries {
    pub dn: Vec<f64>,
    /// `½ max ‖ω‖²` over the interval.
    pub sup_half_enstrophy: Vec<f64>,
    /// Left Riemann sum of `‖∇ω‖²` over the interval.
    pub dissipation: Vec<f64>,
    /// Enstrophy-balance residual; empty when no increments were available.
    pub balance_residual: Vec<f64>,
    /// `‖ω(n)‖²` at integer times `n = 0, 1, ...`.
    pub enstrophy_at_units: Vec<f64>,
}

/// Streaming accumulator fed one instant at a time.
#[derive(Clone, Debug)]
pub struct UnitIntervalAccumulator {
    steps_per_unit: usize,
    dt: f64,
    /// `R` if the run is forced, else 0.
    rate: f64,
    track_balance: bool,
    start_half: f64,
    sup: f64,
    diss: f64,
    mart: f64,
    out: DiagnosticSeries,
}

impl UnitIntervalAccumulator {
    /// `rate` is the injected enstrophy rate (`R`, or 0 when unforced);
    /// `track_balance` requires every forced instant to supply its increment.
    pub fn new(dt: f64, rate: f64, track_balance: bool) -> Result<Self> {
        Ok(Self {
            steps_per_unit: steps_per_unit(dt)?,
            dt,
            rate,
            track_balance,
            start_half: 0.0,
            sup: 0.0,
            diss: 0.0,
            mart: 0.0,
            out: DiagnosticSeries::default(),
        })
    }

    /// Instant `i` (time `i dt`) with state `w` and the increment `db`
    /// applied on the following step, if any.
    pub fn observe(&mut self, i: usize, w: &VorticityField, db: Option<&VorticityField>) {
        let half = 0.5 * w.l2_norm_sq();
        if i % self.steps_per_unit == 0 {
            if i > 0 {
                self.close_interval(half);
            }
            self.out.enstrophy_at_units.push(2.0 * half);
            self.start_half = half;
            self.sup = half;
            self.diss = 0.0;
            self.mart = 0.0;
        }
        self.sup = self.sup.max(half);
        self.diss += w.h1_seminorm_sq() * self.dt;
        if let Some(db) = db {
            self.mart += w.inner(db);
        }
    }

    fn close_interval(&mut self, end_half: f64) {
        // the end instant counts for the sup; its dissipation belongs to the next step
        let sup = self.sup.max(end_half);
        self.out.sup_half_enstrophy.push(sup);
        self.out.dissipation.push(self.diss);
        self.out.dn.push(sup + self.diss);
        if self.track_balance {
            self.out
                .balance_residual
                .push(end_half + self.diss - self.start_half - self.rate - self.mart);
        }
    }

    pub fn finish(self) -> DiagnosticSeries {
        self.out
    }
}

/// `D_n` (and, if available, the balance residual) of a dense trajectory.
/// Only complete unit intervals are reported.
pub fn compute_dn(traj: &Trajectory, spec: Option<&ForcingSpec>) -> Result<DiagnosticSeries> {
    if !traj.is_dense() {
        return Err(Error::SamplingTooCoarse { stride: traj.stride });
    }
    let rate = if traj.forcing_on {
        spec.map(|s| s.r())
    } else {
        Some(0.0)
    };
    let track = rate.is_some() && (!traj.forcing_on || traj.noise_log.is_some());
    let mut acc = UnitIntervalAccumulator::new(traj.dt, rate.unwrap_or(0.0), track)?;
    let spu = acc.steps_per_unit;
    let complete = (traj.len() - 1) / spu * spu;
    for i in 0..=complete {
        let db = traj.noise_log.as_ref().and_then(|log| log.get(i)).filter(|_| i < complete);
        acc.observe(i, &traj.states[i], db);
    }
    Ok(acc.finish())
}

/// Balance residual per unit interval. Requires the increments of a forced
/// run.
pub fn balance_residual(traj: &Trajectory, spec: &ForcingSpec) -> Result<Vec<f64>> {
    if traj.forcing_on && traj.noise_log.is_none() {
        return Err(Error::MissingNoiseLog);
    }
    Ok(compute_dn(traj, Some(spec))?.balance_residual)
}

/// Streams a forced (or unforced) run through the unit-interval accumulator
/// without storing states.
pub fn run_diagnostics<R: Rng + ?Sized>(
    w0: &VorticityField,
    spec: &ForcingSpec,
    settings: RunSettings,
    forcing_on: bool,
    rng: &mut R,
) -> Result<DiagnosticSeries> {
    let rate = if forcing_on { spec.r() } else { 0.0 };
    let mut acc = UnitIntervalAccumulator::new(settings.dt, rate, true)?;
    let observe = |i: usize, _t: f64, w: &VorticityField, db: Option<&VorticityField>| acc.observe(i, w, db);
    if forcing_on {
        let mut noise = GaussianNoise::new(spec, settings.dt, rng);
        run_observed(w0, settings, &mut noise, observe)?;
    } else {
        run_observed(w0, settings, &mut NoNoise, observe)?;
    }
    Ok(acc.finish())
}

/// Independent diagnostic runs from a common initial state; member `i`
/// uses stream `(seed, component, i)`.
pub fn ensemble_diagnostics(
    w0: &VorticityField,
    spec: &ForcingSpec,
    settings: RunSettings,
    members: usize,
    seed: u64,
    component: &str,
    par: &Parallelism,
) -> Result<Vec<DiagnosticSeries>> {
    par.try_map(members, |i| {
        let mut rng = stream_rng(seed, component, i as u64);
        run_diagnostics(w0, spec, settings, true, &mut rng)
    })
}

/// Empirical check of `E exp(‖ω(t)‖²/4R) <= 3 exp(e^{-t} ‖ω(0)‖²/4R)` and of the
/// tail bounds `P(‖ω(t)‖² >= D) <= 3 e^{-D/4R} exp(e^{-t} ‖ω(0)‖²/4R)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpMomentReport {
    pub t: f64,
    pub estimate: f64,
    pub ci: (f64, f64),
    pub bound: f64,
    pub pass: bool,
    pub tails: Vec<TailRow>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailRow {
    pub level: f64,
    pub frequency: f64,
    /// Lower end of the 95% normal-approximation interval.
    pub lower: f64,
    pub bound: f64,
    pub pass: bool,
}

impl ExpMomentReport {
    pub fn all_pass(&self) -> bool {
        self.pass && self.tails.iter().all(|r| r.pass)
    }
}

/// `enstrophy` holds `‖ω(t)‖²` for each ensemble member; `initial` is
/// `‖ω(0)‖²`. The moment passes when the lower end of the 95% bootstrap
/// interval lies below the bound; tails use the binomial normal approximation.
pub fn exp_moment_check<R: Rng + ?Sized>(
    enstrophy: &[f64],
    initial: f64,
    r: f64,
    t: f64,
    levels: &[f64],
    resamples: usize,
    rng: &mut R,
) -> ExpMomentReport {
    let prefactor = ((-t).exp() * initial / (4.0 * r)).exp();
    let values: Vec<f64> = enstrophy.iter().map(|e| (e / (4.0 * r)).exp()).collect();
    let estimate = mean(&values);
    let ci = if values.len() > 1 {
        percentile_interval(bootstrap(&values, resamples, rng, mean), 0.95)
    } else {
        (estimate, estimate)
    };
    let bound = 3.0 * prefactor;
    let n = enstrophy.len() as f64;
    let tails = levels
        .iter()
        .map(|&d| {
            let hits = enstrophy.iter().filter(|&&e| e >= d).count() as f64;
            let p = hits / n;
            let lower = (p - 1.96 * (p * (1.0 - p) / n).sqrt()).max(0.0);
            let bound = 3.0 * (-d / (4.0 * r)).exp() * prefactor;
            TailRow {
                level: d,
                frequency: p,
                lower,
                bound,
                pass: lower <= bound,
            }
        })
        .collect();
    ExpMomentReport {
        t,
        estimate,
        ci,
        bound,
        pass: ci.0 <= bound,
        tails,
    }
}

/// Tail frequencies of `Σ_{n=t}^{t'-1} D_n` against `β R (t' - t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TailSumReport {
    pub t: usize,
    pub t_prime: usize,
    /// `(β, hits, frequency)`.
    pub rows: Vec<(f64, usize, f64)>,
    /// Fit of `ln frequency` against `β` over the resolvable rows.
    pub fit: Option<LineFit>,
    pub fitted_rows: usize,
    pub pass: bool,
}

impl TailSumReport {
    /// Fitted decay constant `c` in `exp(-c β (t' - t))`.
    pub fn decay_constant(&self) -> Option<f64> {
        self.fit.map(|f| -f.slope / (self.t_prime - self.t) as f64)
    }
}

/// `dn[m][n-1]` is `D_n` of member `m`. Rows with at least `min_hits` hits and
/// frequency at most one half form the resolvable range; the check passes
/// when the fitted slope over at least three such rows is negative.
pub fn tail_sum_check(dn: &[Vec<f64>], r: f64, t: usize, t_prime: usize, betas: &[f64], min_hits: usize) -> Result<TailSumReport> {
    if !(t_prime > t && t >= 1) {
        return Err(Error::Precondition(format!("need t' > t >= 1, got t = {t}, t' = {t_prime}")));
    }
    let span = (t_prime - t) as f64;
    let sums: Vec<f64> = dn
        .iter()
        .map(|d| {
            if d.len() < t_prime - 1 {
                return Err(Error::Precondition("D_n series shorter than the window".into()));
            }
            Ok(d[t - 1..t_prime - 1].iter().sum())
        })
        .collect::<Result<_>>()?;
    let n = sums.len() as f64;
    let rows: Vec<(f64, usize, f64)> = betas
        .iter()
        .map(|&b| {
            let hits = sums.iter().filter(|&&s| s >= b * r * span).count();
            (b, hits, hits as f64 / n)
        })
        .collect();
    let usable: Vec<&(f64, usize, f64)> = rows
        .iter()
        .filter(|(_, h, f)| *h >= min_hits && *f <= 0.5)
        .collect();
    let xs: Vec<f64> = usable.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = usable.iter().map(|r| r.2.ln()).collect();
    let fit = if usable.len() >= 3 { fit_line(&xs, &ys) } else { None };
    Ok(TailSumReport {
        t,
        t_prime,
        pass: fit.is_some_and(|f| f.slope < 0.0),
        fitted_rows: usable.len(),
        rows,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::NonlinearMode;
    use crate::forcing::uniform_spec;
    use crate::integrator::{simulate_with, NoNoise, RecordPolicy};
    use crate::spectral::SpectralGrid;
    use num_complex::Complex64;

    #[test]
    fn zero_path_has_zero_dn() {
        let g = SpectralGrid::new(4, 2).unwrap();
        let tr = simulate_with(
            &VorticityField::zeros(&g),
            RunSettings::new(0.01, 3.0),
            &mut NoNoise,
            false,
            RecordPolicy::Dense { noise_log: false },
        )
        .unwrap();
        let d = compute_dn(&tr, None).unwrap();
        assert_eq!(d.dn, vec![0.0; 3]);
        assert_eq!(d.balance_residual, vec![0.0; 3]);
    }

    #[test]
    fn single_decaying_pair_closed_form() {
        // ω = e^{-t} on ±(1,0): ‖ω‖² = 2e^{-2t} = ‖∇ω‖², so
        // D_1 = 1 + ∫_0^1 2 e^{-2t} dt = 1 + (1 - e^{-2}).
        let g = SpectralGrid::new(4, 2).unwrap();
        let w0 = VorticityField::from_modes(&g, &[((1, 0), Complex64::new(1.0, 0.0))]).unwrap();
        let dt = 1e-4;
        let tr = simulate_with(&w0, RunSettings::new(dt, 1.0), &mut NoNoise, false, RecordPolicy::Dense { noise_log: false }).unwrap();
        let d = compute_dn(&tr, None).unwrap();
        let exact = 1.0 + (1.0 - (-2.0f64).exp());
        assert!((d.dn[0] - exact).abs() < 1e-4, "{} vs {exact}", d.dn[0]);
        // the discrete left sum is a geometric series
        let q = (-2.0 * dt).exp();
        let left = 2.0 * dt * (1.0 - q.powi(10_000)) / (1.0 - q);
        assert!((d.dissipation[0] - left).abs() < 1e-12);
    }

    #[test]
    fn unforced_balance_residual_is_first_order() {
        let g = SpectralGrid::new(6, 2).unwrap();
        let spec = uniform_spec(&g, 1.0).unwrap();
        let mut rng = stream_rng(2, "diagnostics-test", 0);
        let w0 = crate::spectral::sample_gaussian_field(&g, 0.2, &mut rng);
        let worst = |dt: f64| {
            let settings = RunSettings {
                dt,
                t_end: 2.0,
                nonlinear: NonlinearMode::Fast,
            };
            let d = run_diagnostics(&w0, &spec, settings, false, &mut stream_rng(0, "unused", 0)).unwrap();
            for (n, dn) in d.dn.iter().enumerate() {
                assert!(*dn >= 0.5 * d.enstrophy_at_units[n]);
            }
            d.balance_residual.iter().fold(0.0f64, |m, r| m.max(r.abs()))
        };
        let coarse = worst(2e-3);
        let fine = worst(1e-3);
        let ratio = coarse / fine;
        assert!((1.6..2.4).contains(&ratio), "{coarse} {fine}");
    }

    #[test]
    fn tail_sum_needs_ordered_window() {
        assert!(tail_sum_check(&[vec![1.0; 4]], 1.0, 2, 2, &[1.0], 1).is_err());
    }
}
