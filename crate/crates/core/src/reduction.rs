//! Low/high splitting `ω = s + l`: the high modes as a deterministic
//! functional of the low-mode history,
//!
//! `dl/dt = (1-P) F(s + l)`,
//!
//! solved with the same exponential step as the full system (`s` frozen at
//! the left end of every step).

use crate::dynamics::NonlinearMode;
use crate::error::{Error, Result};
use crate::integrator::{Propagator, Trajectory};
use crate::spectral::{SpectralGrid, VorticityField};

/// Uniformly sampled low-mode history.
#[derive(Clone, Debug, PartialEq)]
pub struct SPath {
    pub dt: f64,
    pub times: Vec<f64>,
    pub values: Vec<VorticityField>,
}

/// Uniformly sampled high-mode history.
#[derive(Clone, Debug, PartialEq)]
pub struct LPath {
    pub dt: f64,
    pub times: Vec<f64>,
    pub values: Vec<VorticityField>,
}

impl SPath {
    pub fn new(dt: f64, t0: f64, values: Vec<VorticityField>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Precondition("empty s-path".into()));
        }
        if values.iter().any(|v| !v.is_low_supported()) {
            return Err(Error::SupportViolation("low"));
        }
        let times = (0..values.len()).map(|i| t0 + i as f64 * dt).collect();
        Ok(Self { dt, times, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn grid(&self) -> &SpectralGrid {
        self.values[0].grid()
    }

    /// Samples `from..=to`.
    pub fn slice(&self, from: usize, to: usize) -> SPath {
        SPath {
            dt: self.dt,
            times: self.times[from..=to].to_vec(),
            values: self.values[from..=to].to_vec(),
        }
    }

    /// Every `stride`-th sample, with step `stride * dt`.
    pub fn coarsen(&self, stride: usize) -> SPath {
        SPath {
            dt: self.dt * stride as f64,
            times: self.times.iter().step_by(stride).copied().collect(),
            values: self.values.iter().step_by(stride).cloned().collect(),
        }
    }
}

impl LPath {
    pub fn last(&self) -> &VorticityField {
        self.values.last().expect("non-empty")
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|v| v.l2_norm()).fold(0.0, f64::max)
    }
}

/// Pointwise low projection of a densely recorded trajectory.
pub fn extract_s_path(traj: &Trajectory) -> Result<SPath> {
    if !traj.is_dense() {
        return Err(Error::SamplingTooCoarse { stride: traj.stride });
    }
    Ok(SPath {
        dt: traj.dt,
        times: traj.times.clone(),
        values: traj.states.iter().map(|w| w.project_low()).collect(),
    })
}

/// `l(t, s([t0, t]), l0)` on the sample instants of `s`.
pub fn solve_l(s: &SPath, l0: &VorticityField) -> Result<LPath> {
    solve_l_with(s, l0, NonlinearMode::Fast)
}

pub fn solve_l_with(s: &SPath, l0: &VorticityField, mode: NonlinearMode) -> Result<LPath> {
    if !l0.is_high_supported() {
        return Err(Error::SupportViolation("high"));
    }
    if l0.grid() != s.grid() {
        return Err(Error::GridMismatch("s-path vs l0".into()));
    }
    let mut prop = Propagator::new(s.grid(), s.dt, mode)?;
    let mut l = l0.clone();
    let mut values = Vec::with_capacity(s.len());
    values.push(l.clone());
    for i in 0..s.len() - 1 {
        prop.advance_high(&s.values[i], &mut l);
        if !l.is_finite() {
            return Err(Error::NonFiniteState { time: s.times[i + 1] });
        }
        values.push(l.clone());
    }
    Ok(LPath {
        dt: s.dt,
        times: s.times.clone(),
        values,
    })
}

/// `‖l(t1, s[t0,t1], l0) - l(t1, s[tm,t1], l(tm, s[t0,tm], l0))‖` with the split at
/// sample index `mid`.
pub fn semigroup_check(s: &SPath, l0: &VorticityField, mid: usize) -> Result<f64> {
    if mid >= s.len() {
        return Err(Error::Precondition(format!("split index {mid} outside the path")));
    }
    let last = s.len() - 1;
    let whole = solve_l(s, l0)?;
    let first = solve_l(&s.slice(0, mid), l0)?;
    let second = solve_l(&s.slice(mid, last), first.last())?;
    Ok((whole.last() - second.last()).l2_norm())
}

/// One row of a contraction report.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContractionRow {
    pub t: f64,
    /// `‖l(t, s, l1) - l(t, s, l2)‖`.
    pub lhs: f64,
    /// `exp(-κR t + a ∫‖∇ω₁‖²) ‖l1 - l2‖` with `κR = N`.
    pub rhs: f64,
    /// Same bound with the spectral-gap rate `N + 1`.
    pub rhs_gap: f64,
}

impl ContractionRow {
    pub fn ratio(&self) -> f64 {
        if self.rhs == 0.0 {
            0.0
        } else {
            self.lhs / self.rhs
        }
    }

    pub fn holds(&self, slack: f64) -> bool {
        self.lhs <= self.rhs * (1.0 + slack)
    }
}

/// Distance between two high-mode solutions driven by the same `s`, against
/// the exponential bound. The integral of `‖∇ω₁‖²`, `ω₁ = s + l(·, s, l1)`,
/// is a left Riemann sum on the sample instants.
pub fn contraction_report(s: &SPath, l1: &VorticityField, l2: &VorticityField, a: f64) -> Result<Vec<ContractionRow>> {
    let p1 = solve_l(s, l1)?;
    let p2 = solve_l(s, l2)?;
    let n = s.grid().n_force() as f64;
    let d0 = (l1 - l2).l2_norm();
    let t0 = s.times[0];
    let mut integral = 0.0;
    let mut rows = Vec::with_capacity(s.len());
    for i in 0..s.len() {
        let t = s.times[i] - t0;
        let lhs = (&p1.values[i] - &p2.values[i]).l2_norm();
        rows.push(ContractionRow {
            t: s.times[i],
            lhs,
            rhs: (-n * t + a * integral).exp() * d0,
            rhs_gap: (-(n + 1.0) * t + a * integral).exp() * d0,
        });
        let w1 = &s.values[i] + &p1.values[i];
        integral += w1.h1_seminorm_sq() * s.dt;
    }
    Ok(rows)
}

/// Maximum over common instants of `‖l_traj - l_rebuilt‖` when the high modes
/// are rebuilt from the low modes sampled every `stride` steps.
pub fn reconstruction_error(traj: &Trajectory, stride: usize) -> Result<f64> {
    let s = extract_s_path(traj)?.coarsen(stride.max(1));
    let l0 = traj.states[0].project_high();
    let l = solve_l(&s, &l0)?;
    let mut err: f64 = 0.0;
    for (j, lj) in l.values.iter().enumerate() {
        let truth = traj.states[j * stride.max(1)].project_high();
        err = err.max((&truth - lj).l2_norm());
    }
    Ok(err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::uniform_spec;
    use crate::integrator::{simulate, RecordPolicy};
    use crate::rng::stream_rng;
    use crate::spectral::sample_gaussian_field;
    use num_complex::Complex64;

    #[test]
    fn zero_s_single_high_pair_decays_exactly() {
        let g = SpectralGrid::new(4, 4).unwrap();
        let s = SPath::new(0.01, 0.0, vec![VorticityField::zeros(&g); 101]).unwrap();
        let l0 = VorticityField::from_modes(&g, &[((2, 1), Complex64::new(0.5, -0.2))]).unwrap();
        let l = solve_l(&s, &l0).unwrap();
        let expect = l0.get(2, 1) * (-5.0f64).exp();
        assert!((l.last().get(2, 1) - expect).norm() < 1e-14);
    }

    #[test]
    fn dense_reconstruction_reproduces_simulation() {
        let g = SpectralGrid::new(6, 2).unwrap();
        let spec = uniform_spec(&g, 1.0).unwrap();
        let mut rng = stream_rng(11, "reduction-test", 0);
        let w0 = sample_gaussian_field(&g, 0.3, &mut rng);
        let tr = simulate(&w0, &spec, 0.5, 0.01, &mut rng, RecordPolicy::Dense { noise_log: false }).unwrap();
        assert_eq!(reconstruction_error(&tr, 1).unwrap(), 0.0);
    }

    #[test]
    fn semigroup_degenerate_splits() {
        let g = SpectralGrid::new(4, 2).unwrap();
        let mut rng = stream_rng(11, "reduction-test", 1);
        let vals = (0..21).map(|_| sample_gaussian_field(&g, 0.5, &mut rng).project_low()).collect();
        let s = SPath::new(0.05, 0.0, vals).unwrap();
        let l0 = sample_gaussian_field(&g, 0.5, &mut rng).project_high();
        assert_eq!(semigroup_check(&s, &l0, 0).unwrap(), 0.0);
        assert_eq!(semigroup_check(&s, &l0, 20).unwrap(), 0.0);
        assert_eq!(semigroup_check(&s, &l0, 7).unwrap(), 0.0);
    }

    #[test]
    fn extract_requires_dense_record() {
        let g = SpectralGrid::new(4, 2).unwrap();
        let spec = uniform_spec(&g, 1.0).unwrap();
        let mut rng = stream_rng(11, "reduction-test", 2);
        let tr = simulate(&VorticityField::zeros(&g), &spec, 1.0, 0.1, &mut rng, RecordPolicy::UnitTimes).unwrap();
        assert!(matches!(extract_s_path(&tr), Err(Error::SamplingTooCoarse { .. })));
    }

    #[test]
    fn equal_initial_conditions_give_zero_distance() {
        let g = SpectralGrid::new(4, 2).unwrap();
        let s = SPath::new(0.01, 0.0, vec![VorticityField::zeros(&g); 11]).unwrap();
        let l0 = VorticityField::from_modes(&g, &[((2, 1), Complex64::new(0.5, -0.2))]).unwrap();
        let rows = contraction_report(&s, &l0, &l0, 0.15).unwrap();
        assert!(rows.iter().all(|r| r.lhs == 0.0 && r.holds(0.0)));
    }
}
