//! Exponential Euler-Maruyama time stepping.
//!
//! One step of size `dt` maps
//!
//! `ω'_k = e^{-|k|² dt} (ω_k + db_k) + φ₁(-|k|² dt) dt B(ω)_k`, `φ₁(z) = (e^z - 1)/z`,
//!
//! so the linear part is integrated exactly and the advection and the noise are
//! evaluated at the left end of the step (Itô).

use rand::Rng;

use crate::dynamics::{Dynamics, NonlinearMode};
use crate::error::{invalid, Error, Result};
use crate::forcing::ForcingSpec;
use crate::spectral::{SpectralGrid, VorticityField};

/// Number of steps per unit time; errors unless `1/dt` is an integer.
pub fn steps_per_unit(dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite() && dt <= 1.0) {
        return Err(Error::Misaligned { dt });
    }
    let n = (1.0 / dt).round();
    if ((n * dt) - 1.0).abs() > 1e-12 {
        return Err(Error::Misaligned { dt });
    }
    Ok(n as usize)
}

/// Number of steps to reach `t_end`; errors unless `t_end` is a multiple of `dt`.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(invalid("t_end", "must be finite and non-negative"));
    }
    let n = (t_end / dt).round();
    if (n * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(invalid("t_end", format!("{t_end} is not a multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

/// Precomputed step factors plus a drift evaluator. Shared by the full
/// integrator and the high-mode solver so both perform identical arithmetic.
#[derive(Debug, Clone)]
pub struct Propagator {
    dt: f64,
    decay: Vec<f64>,
    phi: Vec<f64>,
    dynamics: Dynamics,
    b: VorticityField,
    b2: VorticityField,
}

impl Propagator {
    pub fn new(grid: &SpectralGrid, dt: f64, mode: NonlinearMode) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", "must be positive and finite"));
        }
        let ksq = grid.ksq_table();
        let decay = ksq.iter().map(|&q| (-q * dt).exp()).collect();
        // φ₁(-q dt) dt = (1 - e^{-q dt}) / q
        let phi = ksq.iter().map(|&q| -(-q * dt).exp_m1() / q).collect();
        Ok(Self {
            dt,
            decay,
            phi,
            dynamics: Dynamics::new(grid, mode)?,
            b: VorticityField::zeros(grid),
            b2: VorticityField::zeros(grid),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &SpectralGrid {
        self.dynamics.grid()
    }

    pub fn dynamics(&mut self) -> &mut Dynamics {
        &mut self.dynamics
    }

    /// Advection term evaluated at the last step's left endpoint.
    pub fn last_nonlinear(&self) -> &VorticityField {
        &self.b
    }

    /// One full step in place.
    pub fn advance(&mut self, w: &mut VorticityField, db: Option<&VorticityField>) {
        self.dynamics.nonlinear_into(w, &mut self.b);
        let b = self.b.coeffs();
        let c = w.coeffs_mut();
        match db {
            Some(db) => {
                for (i, (x, n)) in c.iter_mut().zip(db.coeffs()).enumerate() {
                    *x = (*x + n) * self.decay[i] + b[i] * self.phi[i];
                }
            }
            None => {
                for (i, x) in c.iter_mut().enumerate() {
                    *x = *x * self.decay[i] + b[i] * self.phi[i];
                }
            }
        }
    }

    /// One step of the high-mode equation `dl/dt = (1-P) F(s + l)` with `s`
    /// frozen over the step. The low part of `l` stays zero.
    pub fn advance_high(&mut self, s: &VorticityField, l: &mut VorticityField) {
        let w = s + l;
        self.dynamics.nonlinear_into(&w, &mut self.b);
        let grid = self.dynamics.grid().clone();
        let b = self.b.coeffs();
        for (i, x) in l.coeffs_mut().iter_mut().enumerate() {
            if !grid.is_low(i) {
                *x = *x * self.decay[i] + b[i] * self.phi[i];
            }
        }
    }

    /// Advances the pair `(ω, ω + δ)` under common noise, stepping `ω` and
    /// the difference `δ` directly so that tiny differences keep full
    /// relative precision.
    pub fn advance_pair(&mut self, w: &mut VorticityField, delta: &mut VorticityField, db: Option<&VorticityField>) {
        self.dynamics.nonlinear_difference_into(w, delta, &mut self.b2);
        let b2 = self.b2.coeffs();
        for (i, x) in delta.coeffs_mut().iter_mut().enumerate() {
            *x = *x * self.decay[i] + b2[i] * self.phi[i];
        }
        self.advance(w, db);
    }
}

/// One exponential Euler-Maruyama step with Gaussian forcing.
pub fn step<R: Rng + ?Sized>(w: &VorticityField, spec: &ForcingSpec, dt: f64, rng: &mut R) -> Result<VorticityField> {
    let mut p = Propagator::new(w.grid(), dt, NonlinearMode::Fast)?;
    let db = spec.sample_increment(dt, rng)?;
    let mut out = w.clone();
    p.advance(&mut out, Some(&db));
    if !out.is_finite() {
        return Err(Error::NonFiniteState { time: dt });
    }
    Ok(out)
}

/// Supplier of forcing increments, one per step.
pub trait NoiseSource {
    /// Writes the increment for step `index` into `out`; returns `false` when
    /// the step is unforced (then `out` is ignored).
    fn next_increment(&mut self, index: usize, out: &mut VorticityField) -> bool;
}

/// Fresh Gaussian increments drawn from `rng`.
pub struct GaussianNoise<'a, R: Rng + ?Sized> {
    spec: &'a ForcingSpec,
    dt: f64,
    rng: &'a mut R,
}

impl<'a, R: Rng + ?Sized> GaussianNoise<'a, R> {
    pub fn new(spec: &'a ForcingSpec, dt: f64, rng: &'a mut R) -> Self {
        Self { spec, dt, rng }
    }
}

impl<R: Rng + ?Sized> NoiseSource for GaussianNoise<'_, R> {
    fn next_increment(&mut self, _index: usize, out: &mut VorticityField) -> bool {
        self.spec.sample_increment_into(self.dt, self.rng, out);
        true
    }
}

/// Unforced dynamics.
pub struct NoNoise;

impl NoiseSource for NoNoise {
    fn next_increment(&mut self, _index: usize, _out: &mut VorticityField) -> bool {
        false
    }
}

/// Replays previously recorded increments.
pub struct ReplayNoise<'a> {
    log: &'a [VorticityField],
}

impl<'a> ReplayNoise<'a> {
    pub fn new(log: &'a [VorticityField]) -> Self {
        Self { log }
    }
}

impl NoiseSource for ReplayNoise<'_> {
    fn next_increment(&mut self, index: usize, out: &mut VorticityField) -> bool {
        out.coeffs_mut().copy_from_slice(self.log[index].coeffs());
        true
    }
}

/// Which states are stored in a [`Trajectory`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordPolicy {
    /// Every step, optionally with the forcing increments.
    Dense { noise_log: bool },
    /// Every `n`-th step.
    Every(usize),
    /// Integer times only.
    UnitTimes,
}

/// Uniformly sampled solution history.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    /// Steps between consecutive recorded states.
    pub stride: usize,
    pub times: Vec<f64>,
    pub states: Vec<VorticityField>,
    /// Increment applied during step `i` (from `t_i` to `t_{i+1}`); dense runs only.
    pub noise_log: Option<Vec<VorticityField>>,
    pub forcing_on: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn is_dense(&self) -> bool {
        self.stride == 1
    }

    pub fn grid(&self) -> &SpectralGrid {
        self.states[0].grid()
    }

    pub fn final_state(&self) -> &VorticityField {
        self.states.last().expect("trajectories hold at least the initial state")
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    /// Recorded states per unit time (errors if unit times are not recorded).
    pub fn samples_per_unit(&self) -> Result<usize> {
        let n = steps_per_unit(self.dt)?;
        if n % self.stride != 0 {
            return Err(Error::Misaligned { dt: self.dt });
        }
        Ok(n / self.stride)
    }

    /// Sub-trajectory covering recorded samples `from..=to`.
    pub fn slice(&self, from: usize, to: usize) -> Trajectory {
        let noise_log = self.noise_log.as_ref().map(|log| log[from * self.stride..to * self.stride].to_vec());
        Trajectory {
            dt: self.dt,
            stride: self.stride,
            times: self.times[from..=to].to_vec(),
            states: self.states[from..=to].to_vec(),
            noise_log,
            forcing_on: self.forcing_on,
        }
    }
}

/// Integration settings shared by the simulation entry points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunSettings {
    pub dt: f64,
    pub t_end: f64,
    pub nonlinear: NonlinearMode,
}

impl RunSettings {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            nonlinear: NonlinearMode::Fast,
        }
    }
}

/// Integrates from `w0` and calls `observe(i, t_i, ω(t_i), db_i)` for every
/// step index `i = 0..=steps`; `db_i` is the increment about to be applied
/// (absent at the final instant or when unforced). Stops with the time of
/// the first non-finite state.
pub fn run_observed<N, F>(w0: &VorticityField, settings: RunSettings, noise: &mut N, mut observe: F) -> Result<VorticityField>
where
    N: NoiseSource + ?Sized,
    F: FnMut(usize, f64, &VorticityField, Option<&VorticityField>),
{
    steps_per_unit(settings.dt)?;
    let steps = step_count(settings.t_end, settings.dt)?;
    let mut prop = Propagator::new(w0.grid(), settings.dt, settings.nonlinear)?;
    let mut w = w0.clone();
    let mut db = VorticityField::zeros(w0.grid());
    for i in 0..steps {
        let forced = noise.next_increment(i, &mut db);
        let inc = forced.then_some(&db);
        observe(i, i as f64 * settings.dt, &w, inc);
        prop.advance(&mut w, inc);
        if !w.is_finite() {
            return Err(Error::NonFiniteState {
                time: (i + 1) as f64 * settings.dt,
            });
        }
    }
    observe(steps, steps as f64 * settings.dt, &w, None);
    Ok(w)
}

/// Integrates and records according to `policy`.
pub fn simulate_with<N: NoiseSource + ?Sized>(
    w0: &VorticityField,
    settings: RunSettings,
    noise: &mut N,
    forcing_on: bool,
    policy: RecordPolicy,
) -> Result<Trajectory> {
    let spu = steps_per_unit(settings.dt)?;
    let (stride, keep_noise) = match policy {
        RecordPolicy::Dense { noise_log } => (1, noise_log),
        RecordPolicy::Every(n) if n >= 1 => (n, false),
        RecordPolicy::Every(_) => return Err(invalid("record", "stride must be at least 1")),
        RecordPolicy::UnitTimes => (spu, false),
    };
    let steps = step_count(settings.t_end, settings.dt)?;
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut log = Vec::new();
    run_observed(w0, settings, noise, |i, t, w, db| {
        if i % stride == 0 {
            times.push(t);
            states.push(w.clone());
        }
        if keep_noise && i < steps {
            log.push(db.cloned().unwrap_or_else(|| VorticityField::zeros(w.grid())));
        }
    })?;
    Ok(Trajectory {
        dt: settings.dt,
        stride,
        times,
        states,
        noise_log: keep_noise.then_some(log),
        forcing_on,
    })
}

/// Forced simulation with Gaussian increments from `rng`.
pub fn simulate<R: Rng + ?Sized>(
    w0: &VorticityField,
    spec: &ForcingSpec,
    t_end: f64,
    dt: f64,
    rng: &mut R,
    policy: RecordPolicy,
) -> Result<Trajectory> {
    let mut noise = GaussianNoise::new(spec, dt, rng);
    simulate_with(w0, RunSettings::new(dt, t_end), &mut noise, true, policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::uniform_spec;
    use crate::rng::stream_rng;
    use crate::spectral::sample_gaussian_field;

    #[test]
    fn alignment_checks() {
        assert_eq!(steps_per_unit(1e-3).unwrap(), 1000);
        assert_eq!(steps_per_unit(0.01).unwrap(), 100);
        assert!(steps_per_unit(0.3).is_err());
        assert!(steps_per_unit(0.0).is_err());
        assert_eq!(step_count(2.0, 0.01).unwrap(), 200);
        assert!(step_count(2.005, 0.01).is_err());
    }

    #[test]
    fn linear_flow_is_exact() {
        let g = SpectralGrid::new(4, 2).unwrap();
        let mut rng = stream_rng(5, "integrator-test", 0);
        let w0 = sample_gaussian_field(&g, 1.0, &mut rng);
        let settings = RunSettings {
            dt: 0.01,
            t_end: 1.0,
            nonlinear: NonlinearMode::Off,
        };
        let tr = simulate_with(&w0, settings, &mut NoNoise, false, RecordPolicy::UnitTimes).unwrap();
        assert_eq!(tr.len(), 2);
        for (i, c) in tr.final_state().coeffs().iter().enumerate() {
            let expect = w0.coeffs()[i] * (-g.ksq(i)).exp();
            assert!((c - expect).norm() <= 1e-13 * expect.norm().max(1e-300));
        }
    }

    #[test]
    fn zero_horizon_keeps_initial_state() {
        let g = SpectralGrid::new(4, 2).unwrap();
        let spec = uniform_spec(&g, 1.0).unwrap();
        let mut rng = stream_rng(5, "integrator-test", 1);
        let w0 = sample_gaussian_field(&g, 1.0, &mut rng);
        let tr = simulate(&w0, &spec, 0.0, 1e-3, &mut rng, RecordPolicy::Dense { noise_log: true }).unwrap();
        assert_eq!(tr.states, vec![w0]);
        assert_eq!(tr.noise_log.unwrap().len(), 0);
    }

    #[test]
    fn dense_record_has_matching_noise_log() {
        let g = SpectralGrid::new(4, 2).unwrap();
        let spec = uniform_spec(&g, 1.0).unwrap();
        let mut rng = stream_rng(5, "integrator-test", 2);
        let w0 = VorticityField::zeros(&g);
        let tr = simulate(&w0, &spec, 0.1, 0.01, &mut rng, RecordPolicy::Dense { noise_log: true }).unwrap();
        assert_eq!(tr.len(), 11);
        assert_eq!(tr.noise_log.as_ref().unwrap().len(), 10);
        // replaying the log reproduces the path bit for bit
        let log = tr.noise_log.clone().unwrap();
        let again = simulate_with(
            &w0,
            RunSettings::new(0.01, 0.1),
            &mut ReplayNoise::new(&log),
            true,
            RecordPolicy::Dense { noise_log: false },
        )
        .unwrap();
        assert_eq!(again.states, tr.states);
    }

    #[test]
    fn blow_up_reports_time() {
        let g = SpectralGrid::new(4, 2).unwrap();
        let w0 = VorticityField::from_modes(&g, &[((1, 0), num_complex::Complex64::new(1e200, 0.0)), ((0, 1), num_complex::Complex64::new(1e200, 0.0)), ((1, 1), num_complex::Complex64::new(1e200, 1e200))]).unwrap();
        let err = simulate_with(&w0, RunSettings::new(0.5, 10.0), &mut NoNoise, false, RecordPolicy::UnitTimes).unwrap_err();
        assert!(matches!(err, Error::NonFiniteState { .. }), "{err}");
    }
}
