//! Drift of the vorticity equation: dissipation `-|k|² ω_k` plus the
//! quadratic advection term
//!
//! `B(ω)_k = (2π)⁻¹ Σ_l ((k1 l2 - l1 k2) / |l|²) ω_{k-l} ω_l`,
//!
//! which equals the Fourier coefficient of `-(u·∇ω)`. The sum formally excludes
//! `l = k`, but that term carries `ω_0 = 0` and vanishes anyway.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{SpectralGrid, VorticityField};
use crate::transform::SpectralWorkspace;

/// Largest `kmax` accepted by the direct double sum.
pub const DIRECT_KMAX_LIMIT: usize = 12;

/// How the advection term is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NonlinearMode {
    /// Dealiased transform path.
    #[default]
    Fast,
    /// Direct double sum (small grids only).
    Direct,
    /// Advection switched off (pure Stokes flow).
    Off,
}

/// Drift split into its parts; `total = linear + nonlinear`.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftEval {
    pub linear: VorticityField,
    pub nonlinear: VorticityField,
    pub total: VorticityField,
}

/// Direct evaluation of the truncated convolution, `O(kmax⁴)`.
pub fn nonlinear_direct(w: &VorticityField) -> Result<VorticityField> {
    let grid = w.grid();
    let kmax = grid.kmax();
    if kmax > DIRECT_KMAX_LIMIT {
        return Err(Error::GridTooLarge {
            kmax,
            limit: DIRECT_KMAX_LIMIT,
        });
    }
    let k = kmax as i32;
    let side = 2 * kmax + 1;
    let at = |k1: i32, k2: i32| (k1 + k) as usize * side + (k2 + k) as usize;
    let mut full = vec![Complex64::new(0.0, 0.0); side * side];
    for (k1, k2, c) in w.signed_modes() {
        full[at(k1, k2)] = c;
    }
    let mut out = VorticityField::zeros(grid);
    let scale = 1.0 / (2.0 * PI);
    for (i, c) in out.coeffs_mut().iter_mut().enumerate() {
        let (k1, k2) = grid.mode(i);
        let mut acc = Complex64::new(0.0, 0.0);
        for l1 in -k..=k {
            let m1 = k1 - l1;
            if m1.abs() > k {
                continue;
            }
            for l2 in -k..=k {
                let m2 = k2 - l2;
                if m2.abs() > k || (l1 == 0 && l2 == 0) || (m1 == 0 && m2 == 0) {
                    continue;
                }
                let cross = (k1 * l2 - l1 * k2) as f64;
                if cross == 0.0 {
                    continue;
                }
                let lsq = (l1 * l1 + l2 * l2) as f64;
                acc += full[at(m1, m2)] * full[at(l1, l2)] * (cross / lsq);
            }
        }
        *c = acc * scale;
    }
    Ok(out)
}

/// Transform-based evaluation of the same sum (allocates a workspace; use
/// [`Dynamics`] in loops).
pub fn nonlinear_fast(w: &VorticityField) -> VorticityField {
    let mut ws = SpectralWorkspace::new(w.grid());
    let mut out = VorticityField::zeros(w.grid());
    ws.nonlinear(w, &mut out);
    out
}

pub fn drift(w: &VorticityField) -> DriftEval {
    Dynamics::new(w.grid(), NonlinearMode::Fast)
        .expect("fast mode accepts every grid")
        .drift(w)
}

/// `f(ω) = P F(ω)`.
pub fn reduced_drift(w: &VorticityField) -> VorticityField {
    drift(w).total.project_low()
}

/// `-|k|² ω_k`.
pub fn linear_part(w: &VorticityField) -> VorticityField {
    let grid = w.grid();
    let coeffs = w
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| -c * grid.ksq(i))
        .collect();
    VorticityField::from_coeffs(grid, coeffs).expect("same grid")
}

/// Drift evaluator owning its transform scratch; one per worker.
#[derive(Debug, Clone)]
pub struct Dynamics {
    mode: NonlinearMode,
    workspace: SpectralWorkspace,
}

impl Dynamics {
    pub fn new(grid: &SpectralGrid, mode: NonlinearMode) -> Result<Self> {
        if mode == NonlinearMode::Direct && grid.kmax() > DIRECT_KMAX_LIMIT {
            return Err(Error::GridTooLarge {
                kmax: grid.kmax(),
                limit: DIRECT_KMAX_LIMIT,
            });
        }
        Ok(Self {
            mode,
            workspace: SpectralWorkspace::new(grid),
        })
    }

    pub fn mode(&self) -> NonlinearMode {
        self.mode
    }

    pub fn grid(&self) -> &SpectralGrid {
        self.workspace.grid()
    }

    pub fn nonlinear_into(&mut self, w: &VorticityField, out: &mut VorticityField) {
        match self.mode {
            NonlinearMode::Fast => self.workspace.nonlinear(w, out),
            NonlinearMode::Direct => {
                *out = nonlinear_direct(w).expect("grid size checked at construction")
            }
            NonlinearMode::Off => out.coeffs_mut().fill(Complex64::new(0.0, 0.0)),
        }
    }

    pub fn nonlinear(&mut self, w: &VorticityField) -> VorticityField {
        let mut out = VorticityField::zeros(w.grid());
        self.nonlinear_into(w, &mut out);
        out
    }

    /// `B(base + delta) - B(base)`.
    pub fn nonlinear_difference_into(
        &mut self,
        base: &VorticityField,
        delta: &VorticityField,
        out: &mut VorticityField,
    ) {
        match self.mode {
            NonlinearMode::Fast => self.workspace.nonlinear_difference(base, delta, out),
            NonlinearMode::Direct => {
                let a = nonlinear_direct(&(base + delta)).expect("grid size checked");
                let b = nonlinear_direct(base).expect("grid size checked");
                *out = &a - &b;
            }
            NonlinearMode::Off => out.coeffs_mut().fill(Complex64::new(0.0, 0.0)),
        }
    }

    pub fn drift(&mut self, w: &VorticityField) -> DriftEval {
        let linear = linear_part(w);
        let nonlinear = self.nonlinear(w);
        let total = &linear + &nonlinear;
        DriftEval {
            linear,
            nonlinear,
            total,
        }
    }

    pub fn reduced_drift(&mut self, w: &VorticityField) -> VorticityField {
        self.drift(w).total.project_low()
    }
}

/// Ratio `‖f(ω + δl) - f(ω)‖ / (2‖ω‖‖δl‖ + ‖δl‖²)` for a high-mode
/// perturbation `δl`; bounded uniformly when `‖ω‖` is bounded.
pub fn reduced_drift_lipschitz_ratio(
    dynamics: &mut Dynamics,
    w: &VorticityField,
    dl: &VorticityField,
) -> Result<f64> {
    if !dl.is_high_supported() {
        return Err(Error::SupportViolation("high"));
    }
    let a = dynamics.reduced_drift(&(w + dl));
    let b = dynamics.reduced_drift(w);
    let n = dl.l2_norm();
    let denom = 2.0 * w.l2_norm() * n + n * n;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((&a - &b).l2_norm() / denom)
}

/// Ratio `‖f(ω)‖ / (‖ω‖ + ‖ω‖²)`.
pub fn reduced_drift_growth_ratio(dynamics: &mut Dynamics, w: &VorticityField) -> f64 {
    let n = w.l2_norm();
    if n == 0.0 {
        return 0.0;
    }
    dynamics.reduced_drift(w).l2_norm() / (n + n * n)
}

/// Per-shell bounds: with `S(m) = Σ_{max(|k1|,|k2|) = m} |k|⁻⁴`, trapezoidal
/// comparison with `∫_{-1}^{1} (1+x²)⁻² dx = 1/2 + π/4` gives
/// `|S(m) - 8 c0 / m³| <= (8/3) / m⁵` with `c0 = π/8 + 1/4`.
const SHELL_C0: f64 = PI / 8.0 + 0.25;
const SHELL_ERR: f64 = 3.0;
const ZETA3: f64 = 1.202_056_903_159_594_3;

fn lattice_sum_bounds(cut: usize) -> (f64, f64) {
    let c = cut as i64;
    let mut terms = Vec::with_capacity(((2 * c + 1) * (2 * c + 1)) as usize);
    for k1 in -c..=c {
        for k2 in -c..=c {
            if k1 == 0 && k2 == 0 {
                continue;
            }
            let sq = (k1 * k1 + k2 * k2) as f64;
            terms.push(1.0 / (sq * sq));
        }
    }
    // small terms first
    terms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let boxed = crate::stats::compensated_sum(&terms);
    let partial3: f64 = (1..=cut).rev().map(|m| 1.0 / (m as f64).powi(3)).sum();
    let tail3 = ZETA3 - partial3;
    // Σ_{m>c} m⁻⁵ <= ∫_c^∞ x⁻⁵ dx
    let tail5 = 1.0 / (4.0 * (cut as f64).powi(4));
    let main = 8.0 * SHELL_C0 * tail3;
    let err = SHELL_ERR * tail5;
    (boxed + main - err, boxed + main + err)
}

/// `a = (2π)⁻² Σ_{k≠0} |k|⁻⁴`: direct summation over the box `|k1|,|k2| <= cut`
/// plus certified bounds on the remaining shells. The cut starts at
/// `tail_cut` and grows until the certified interval is narrower than
/// `10⁻⁶`; the lower end of the interval is returned, so the value is
/// nondecreasing in `tail_cut`.
pub fn constant_a(tail_cut: usize) -> f64 {
    constant_a_bounds(tail_cut).0
}

/// Certified `(lower, upper)` enclosure of `a`.
pub fn constant_a_bounds(tail_cut: usize) -> (f64, f64) {
    let norm = 1.0 / (4.0 * PI * PI);
    let mut cut = tail_cut.max(1);
    loop {
        let (lo, hi) = lattice_sum_bounds(cut);
        if (hi - lo) * norm < 1e-6 {
            return (lo * norm, hi * norm);
        }
        cut += cut / 2 + 1;
    }
}
