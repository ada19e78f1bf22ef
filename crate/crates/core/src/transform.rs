//! Transform workspace for the pseudo-spectral evaluation of the advection term.
//!
//! Physical grids exist only inside this module. The padded size `m` is the
//! smallest 5-smooth integer with `m >= 3 kmax + 1`, which makes the retained
//! part of every quadratic product alias-free: the transform path reproduces
//! the truncated convolution exactly up to roundoff.
//!
//! Physical arrays are stored transposed, `p[x2 * m + x1]`, because the last
//! transform pass runs along `x1`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::spectral::{SpectralGrid, VorticityField};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn padded_size(kmax: usize) -> usize {
    let mut m = 3 * kmax + 1;
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Reusable FFT plans and scratch buffers; one per worker.
pub struct SpectralWorkspace {
    grid: SpectralGrid,
    m: usize,
    to_phys: Arc<dyn Fft<f64>>,
    to_spec: Arc<dyn Fft<f64>>,
    spec: Vec<Complex64>,
    trans: Vec<Complex64>,
    phys_u: Vec<Complex64>,
    acc: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for SpectralWorkspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralWorkspace")
            .field("grid", &self.grid)
            .field("m", &self.m)
            .finish()
    }
}

impl Clone for SpectralWorkspace {
    fn clone(&self) -> Self {
        Self::new(&self.grid)
    }
}

impl SpectralWorkspace {
    pub fn new(grid: &SpectralGrid) -> Self {
        let m = padded_size(grid.kmax());
        let mut planner = FftPlanner::new();
        let to_phys = planner.plan_fft_forward(m);
        let to_spec = planner.plan_fft_inverse(m);
        let scratch_len = to_phys
            .get_inplace_scratch_len()
            .max(to_spec.get_inplace_scratch_len());
        Self {
            grid: grid.clone(),
            m,
            to_phys,
            to_spec,
            spec: vec![ZERO; m * m],
            trans: vec![ZERO; m * m],
            phys_u: vec![ZERO; m * m],
            acc: vec![ZERO; m * m],
            scratch: vec![ZERO; scratch_len],
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn padded_size(&self) -> usize {
        self.m
    }

    #[inline]
    fn wrap(&self, k: i32) -> usize {
        k.rem_euclid(self.m as i32) as usize
    }

    /// Loads the spectrum of the complex field `X + iY`, where `pair(i)`
    /// returns `(x_k, y_k)` for half-lattice mode `i` of two real fields.
    /// The `(2π)⁻¹` synthesis factor is folded in here.
    fn load_packed(&mut self, pair: impl Fn(usize) -> (Complex64, Complex64)) {
        self.spec.fill(ZERO);
        let scale = 1.0 / (2.0 * PI);
        for i in 0..self.grid.len() {
            let (k1, k2) = self.grid.mode(i);
            let (x, y) = pair(i);
            let plus = (x + I * y) * scale;
            let minus = (x.conj() + I * y.conj()) * scale;
            let ip = self.wrap(k1) * self.m + self.wrap(k2);
            let im = self.wrap(-k1) * self.m + self.wrap(-k2);
            self.spec[ip] = plus;
            self.spec[im] = minus;
        }
    }

    /// Spectral buffer -> physical values in `out` (`[x2][x1]` layout).
    fn synthesize(&mut self, out_is_u: bool) {
        let m = self.m;
        let kmax = self.grid.kmax();
        // rows k1 in 0..=kmax and m-kmax..m carry data; transform along k2
        let (head, tail) = self.spec.split_at_mut((kmax + 1) * m);
        self.to_phys.process_with_scratch(head, &mut self.scratch);
        let tail_start = (m - kmax - (kmax + 1)) * m;
        self.to_phys
            .process_with_scratch(&mut tail[tail_start..], &mut self.scratch);
        for r in 0..m {
            for c in 0..m {
                self.trans[c * m + r] = self.spec[r * m + c];
            }
        }
        self.to_phys
            .process_with_scratch(&mut self.trans, &mut self.scratch);
        if out_is_u {
            self.phys_u.copy_from_slice(&self.trans);
        }
    }

    /// Analyses the real field held in `acc` and writes `factor * coefficient`
    /// for every half-lattice mode into `out`.
    fn analyse_acc(&mut self, factor: f64, out: &mut VorticityField) {
        let m = self.m;
        let kmax = self.grid.kmax();
        // along x1 for every x2 row
        self.to_spec.process_with_scratch(&mut self.acc, &mut self.scratch);
        // gather k1 = 0..=kmax columns into rows of `trans`
        for k1 in 0..=kmax {
            for x2 in 0..m {
                self.trans[k1 * m + x2] = self.acc[x2 * m + k1];
            }
        }
        self.to_spec
            .process_with_scratch(&mut self.trans[..(kmax + 1) * m], &mut self.scratch);
        let scale = factor * 2.0 * PI / (m * m) as f64;
        let grid = self.grid.clone();
        for (i, c) in out.coeffs_mut().iter_mut().enumerate() {
            let (k1, k2) = grid.mode(i);
            *c = self.trans[k1 as usize * m + self.wrap(k2)] * scale;
        }
    }

    fn load_velocity(&mut self, w: &VorticityField) {
        let grid = self.grid.clone();
        let c = w.coeffs();
        self.load_packed(|i| {
            let (k1, k2) = grid.mode(i);
            let f = I * c[i] / grid.ksq(i);
            (f * (-k2 as f64), f * (k1 as f64))
        });
    }

    fn load_gradient(&mut self, w: &VorticityField) {
        let grid = self.grid.clone();
        let c = w.coeffs();
        self.load_packed(|i| {
            let (k1, k2) = grid.mode(i);
            let f = -I * c[i];
            (f * k1 as f64, f * k2 as f64)
        });
    }

    /// `acc += u(vel) · ∇grad` in physical space.
    fn accumulate_advection(&mut self, vel: &VorticityField, grad: &VorticityField) {
        self.load_velocity(vel);
        self.synthesize(true);
        self.load_gradient(grad);
        self.synthesize(false);
        for ((a, u), g) in self.acc.iter_mut().zip(&self.phys_u).zip(&self.trans) {
            a.re += u.re * g.re + u.im * g.im;
        }
    }

    /// `out = -(u(vel) · ∇grad)`, the bilinear advection form.
    pub fn advection(&mut self, vel: &VorticityField, grad: &VorticityField, out: &mut VorticityField) {
        debug_assert_eq!(vel.grid(), &self.grid);
        debug_assert_eq!(grad.grid(), &self.grid);
        self.acc.fill(ZERO);
        self.accumulate_advection(vel, grad);
        self.analyse_acc(-1.0, out);
    }

    /// `out = B(ω) = -(u·∇ω)`.
    pub fn nonlinear(&mut self, w: &VorticityField, out: &mut VorticityField) {
        self.advection(w, w, out);
    }

    /// `out = B(base + delta) - B(base)` evaluated without cancellation:
    /// `-(u(base + delta) · ∇delta) - (u(delta) · ∇base)`.
    pub fn nonlinear_difference(
        &mut self,
        base: &VorticityField,
        delta: &VorticityField,
        out: &mut VorticityField,
    ) {
        let other = base + delta;
        self.acc.fill(ZERO);
        self.accumulate_advection(&other, delta);
        self.accumulate_advection(delta, base);
        self.analyse_acc(-1.0, out);
    }

    /// Physical values `ω(x)` on the padded grid, `[x2][x1]` layout with
    /// `x_j = 2π j / m`. The imaginary parts vanish up to roundoff.
    pub fn to_physical(&mut self, w: &VorticityField) -> Vec<Complex64> {
        let c = w.coeffs();
        self.load_packed(|i| (c[i], ZERO));
        self.synthesize(false);
        self.trans.clone()
    }

    /// `∫ ω(x)² dx` by the trapezoidal (spectrally exact) rule on the padded grid.
    pub fn quadrature_l2_sq(&mut self, w: &VorticityField) -> f64 {
        let p = self.to_physical(w);
        let h = 2.0 * PI / self.m as f64;
        h * h * p.iter().map(|z| z.re * z.re).sum::<f64>()
    }
}
