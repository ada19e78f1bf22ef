//! Truncated Fourier representation of real scalar fields on the 2-torus.
//!
//! Coefficients follow `ω_k = (2π)⁻¹ ∫ e^{ik·x} ω(x) dx`, so the physical field
//! is `ω(x) = (2π)⁻¹ Σ_k ω_k e^{-ik·x}` and Parseval reads `∫ ω² = Σ_k |ω_k|²`
//! with no extra factors. All norms below are plain coefficient sums over the
//! full (both-signs) lattice.
//!
//! Only the canonical half-lattice (`k1 > 0`, or `k1 = 0` and `k2 > 0`) is
//! stored; `ω_{-k}` is the conjugate of `ω_k` by construction and `ω_0 = 0`
//! is never stored.

use std::io::{Read, Write};
use std::ops::{Add, AddAssign, Mul, Sub, SubAssign};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Lattice cutoff `kmax` (retain `|k1|, |k2| <= kmax`) and forced-mode
/// threshold `N` (modes with `|k|² <= N` are low).
#[derive(Clone)]
pub struct SpectralGrid {
    kmax: usize,
    n_force: u32,
    table: Arc<ModeTable>,
}

struct ModeTable {
    k1: Vec<i32>,
    k2: Vec<i32>,
    ksq: Vec<f64>,
    low: Vec<bool>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("kmax", &self.kmax)
            .field("n_force", &self.n_force)
            .finish()
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.kmax == other.kmax && self.n_force == other.n_force
    }
}

impl Eq for SpectralGrid {}

impl SpectralGrid {
    pub fn new(kmax: usize, n_force: u32) -> Result<Self> {
        if kmax < 1 {
            return Err(Error::InvalidGrid("kmax must be >= 1".into()));
        }
        if kmax > 1024 {
            return Err(Error::InvalidGrid(format!("kmax = {kmax} is unreasonably large")));
        }
        if n_force < 1 {
            return Err(Error::InvalidGrid("n_force must be >= 1".into()));
        }
        if (n_force as u64) > 2 * (kmax as u64) * (kmax as u64) {
            return Err(Error::InvalidGrid(format!(
                "n_force = {n_force} exceeds 2*kmax^2 = {}",
                2 * kmax * kmax
            )));
        }
        let k = kmax as i32;
        let mut table = ModeTable {
            k1: Vec::new(),
            k2: Vec::new(),
            ksq: Vec::new(),
            low: Vec::new(),
        };
        for k1 in 0..=k {
            let start = if k1 == 0 { 1 } else { -k };
            for k2 in start..=k {
                let sq = (k1 * k1 + k2 * k2) as u32;
                table.k1.push(k1);
                table.k2.push(k2);
                table.ksq.push(sq as f64);
                table.low.push(sq <= n_force);
            }
        }
        Ok(Self {
            kmax,
            n_force,
            table: Arc::new(table),
        })
    }

    /// Grid whose forced cutoff is `N = round(kappa * r)` (at least 1).
    pub fn from_kappa(kmax: usize, kappa: f64, r: f64) -> Result<Self> {
        if !(kappa > 0.0 && r > 0.0) {
            return Err(Error::InvalidGrid("kappa and R must be positive".into()));
        }
        let n = (kappa * r).round().max(1.0) as u32;
        Self::new(kmax, n)
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn n_force(&self) -> u32 {
        self.n_force
    }

    /// `κ = N / R`.
    pub fn kappa(&self, r: f64) -> f64 {
        self.n_force as f64 / r
    }

    /// Number of stored (half-lattice) modes.
    pub fn len(&self) -> usize {
        self.table.k1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mode(&self, idx: usize) -> (i32, i32) {
        (self.table.k1[idx], self.table.k2[idx])
    }

    pub fn ksq(&self, idx: usize) -> f64 {
        self.table.ksq[idx]
    }

    pub fn ksq_table(&self) -> &[f64] {
        &self.table.ksq
    }

    pub fn is_low(&self, idx: usize) -> bool {
        self.table.low[idx]
    }

    pub fn low_mask(&self) -> &[bool] {
        &self.table.low
    }

    /// Half-lattice indices of the low modes.
    pub fn low_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_low(i)).collect()
    }

    /// Number of low modes counting both signs.
    pub fn low_mode_count_signed(&self) -> usize {
        2 * self.table.low.iter().filter(|&&l| l).count()
    }

    /// Storage index of `k` together with whether the stored value must be
    /// conjugated. `None` for `k = 0` or outside the box.
    pub fn lookup(&self, k1: i32, k2: i32) -> Option<(usize, bool)> {
        let k = self.kmax as i32;
        if k1.abs() > k || k2.abs() > k || (k1 == 0 && k2 == 0) {
            return None;
        }
        let (c1, c2, conj) = if k1 > 0 || (k1 == 0 && k2 > 0) {
            (k1, k2, false)
        } else {
            (-k1, -k2, true)
        };
        let idx = if c1 == 0 {
            (c2 - 1) as usize
        } else {
            self.kmax + (c1 as usize - 1) * (2 * self.kmax + 1) + (c2 + k) as usize
        };
        Some((idx, conj))
    }

    fn check_same(&self, other: &SpectralGrid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Vorticity coefficients on the canonical half-lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct VorticityField {
    grid: SpectralGrid,
    coeffs: Vec<Complex64>,
}

impl VorticityField {
    pub fn zeros(grid: &SpectralGrid) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_coeffs(grid: &SpectralGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Field with `ω_k = value` (and `ω_{-k} = conj(value)`) for each listed mode.
    pub fn from_modes(grid: &SpectralGrid, modes: &[((i32, i32), Complex64)]) -> Result<Self> {
        let mut f = Self::zeros(grid);
        for &((k1, k2), v) in modes {
            f.set(k1, k2, v)?;
        }
        Ok(f)
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// `ω_k` for any lattice vector; zero outside the box and at `k = 0`.
    pub fn get(&self, k1: i32, k2: i32) -> Complex64 {
        match self.grid.lookup(k1, k2) {
            Some((i, false)) => self.coeffs[i],
            Some((i, true)) => self.coeffs[i].conj(),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Sets `ω_k`; the conjugate partner follows automatically.
    pub fn set(&mut self, k1: i32, k2: i32, value: Complex64) -> Result<()> {
        match self.grid.lookup(k1, k2) {
            Some((i, conj)) => {
                self.coeffs[i] = if conj { value.conj() } else { value };
                Ok(())
            }
            None => Err(Error::InvalidParameter {
                name: "k",
                reason: format!("({k1},{k2}) is the zero mode or outside the box"),
            }),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// `s = Pω`: keeps `|k|² <= N`.
    pub fn project_low(&self) -> Self {
        let mut out = self.clone();
        for (c, &low) in out.coeffs.iter_mut().zip(self.grid.low_mask()) {
            if !low {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        out
    }

    /// `l = (1 - P)ω`.
    pub fn project_high(&self) -> Self {
        let mut out = self.clone();
        for (c, &low) in out.coeffs.iter_mut().zip(self.grid.low_mask()) {
            if low {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        out
    }

    pub fn is_low_supported(&self) -> bool {
        self.coeffs
            .iter()
            .zip(self.grid.low_mask())
            .all(|(c, &low)| low || (c.re == 0.0 && c.im == 0.0))
    }

    pub fn is_high_supported(&self) -> bool {
        self.coeffs
            .iter()
            .zip(self.grid.low_mask())
            .all(|(c, &low)| !low || (c.re == 0.0 && c.im == 0.0))
    }

    /// `Σ_k |ω_k|²` over both signs.
    pub fn l2_norm_sq(&self) -> f64 {
        2.0 * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// `‖∇ω‖² = Σ_k |k|² |ω_k|²` over both signs.
    pub fn h1_seminorm_sq(&self) -> f64 {
        2.0 * self
            .coeffs
            .iter()
            .zip(self.grid.ksq_table())
            .map(|(c, k)| k * c.norm_sqr())
            .sum::<f64>()
    }

    /// Real inner product `Σ_k conj(a_k) b_k` over both signs.
    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        2.0 * self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum::<f64>()
    }

    /// Weighted inner product `Σ_k w(|k|²) conj(a_k) b_k` over both signs.
    pub fn weighted_inner(&self, other: &Self, weight: impl Fn(f64) -> f64) -> f64 {
        2.0 * self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .zip(self.grid.ksq_table())
            .map(|((a, b), &k)| weight(k) * (a.re * b.re + a.im * b.im))
            .sum::<f64>()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= alpha);
        out
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b * alpha;
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(self + other)
    }

    /// Iterator over every retained signed mode `(k1, k2, ω_k)`.
    pub fn signed_modes(&self) -> impl Iterator<Item = (i32, i32, Complex64)> + '_ {
        (0..self.grid.len()).flat_map(move |i| {
            let (k1, k2) = self.grid.mode(i);
            let c = self.coeffs[i];
            [(k1, k2, c), (-k1, -k2, c.conj())]
        })
    }

    /// Maps vorticity to velocity, `u_k = i (-k2, k1) |k|⁻² ω_k`.
    pub fn velocity(&self) -> VelocitySpectrum {
        let u = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let (k1, k2) = self.grid.mode(i);
                let c = Complex64::new(0.0, 1.0) * w / self.grid.ksq(i);
                [c * (-k2 as f64), c * (k1 as f64)]
            })
            .collect();
        VelocitySpectrum {
            grid: self.grid.clone(),
            u,
        }
    }
}

impl Add for &VorticityField {
    type Output = VorticityField;
    fn add(self, rhs: &VorticityField) -> VorticityField {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &VorticityField {
    type Output = VorticityField;
    fn sub(self, rhs: &VorticityField) -> VorticityField {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl AddAssign<&VorticityField> for VorticityField {
    fn add_assign(&mut self, rhs: &VorticityField) {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

impl SubAssign<&VorticityField> for VorticityField {
    fn sub_assign(&mut self, rhs: &VorticityField) {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
    }
}

impl Mul<f64> for &VorticityField {
    type Output = VorticityField;
    fn mul(self, rhs: f64) -> VorticityField {
        self.scaled(rhs)
    }
}

pub fn project_low(w: &VorticityField) -> VorticityField {
    w.project_low()
}

pub fn project_high(w: &VorticityField) -> VorticityField {
    w.project_high()
}

pub fn velocity_from_vorticity(w: &VorticityField) -> VelocitySpectrum {
    w.velocity()
}

pub fn l2_norm_sq(w: &VorticityField) -> f64 {
    w.l2_norm_sq()
}

pub fn h1_seminorm_sq(w: &VorticityField) -> f64 {
    w.h1_seminorm_sq()
}

/// Vector-valued coefficients `u_k ∈ ℂ²`, same half-lattice layout.
#[derive(Clone, Debug)]
pub struct VelocitySpectrum {
    grid: SpectralGrid,
    u: Vec<[Complex64; 2]>,
}

impl VelocitySpectrum {
    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[[Complex64; 2]] {
        &self.u
    }

    pub fn get(&self, k1: i32, k2: i32) -> [Complex64; 2] {
        match self.grid.lookup(k1, k2) {
            Some((i, false)) => self.u[i],
            Some((i, true)) => [self.u[i][0].conj(), self.u[i][1].conj()],
            None => [Complex64::new(0.0, 0.0); 2],
        }
    }

    /// `max_k |k · u_k|`.
    pub fn max_divergence(&self) -> f64 {
        self.u
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let (k1, k2) = self.grid.mode(i);
                (u[0] * k1 as f64 + u[1] * k2 as f64).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// Independent complex Gaussian coefficients with `E|ω_k|² = amplitude²` per
/// signed mode (real and imaginary parts each of variance `amplitude²/2`).
pub fn sample_gaussian_field<R: Rng + ?Sized>(
    grid: &SpectralGrid,
    amplitude: f64,
    rng: &mut R,
) -> VorticityField {
    assert!(amplitude >= 0.0, "amplitude must be non-negative");
    let sd = amplitude / std::f64::consts::SQRT_2;
    let coeffs = (0..grid.len())
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(sd * re, sd * im)
        })
        .collect();
    VorticityField {
        grid: grid.clone(),
        coeffs,
    }
}

/// Gaussian field restricted to the high modes and rescaled to `‖l‖ = norm`.
pub fn sample_high_field<R: Rng + ?Sized>(grid: &SpectralGrid, norm: f64, rng: &mut R) -> VorticityField {
    let f = sample_gaussian_field(grid, 1.0, rng).project_high();
    let n = f.l2_norm();
    if n == 0.0 {
        f
    } else {
        f.scaled(norm / n)
    }
}

/// Gaussian field restricted to the low modes and rescaled to `‖s‖ = norm`.
pub fn sample_low_field<R: Rng + ?Sized>(grid: &SpectralGrid, norm: f64, rng: &mut R) -> VorticityField {
    let f = sample_gaussian_field(grid, 1.0, rng).project_low();
    let n = f.l2_norm();
    if n == 0.0 {
        f
    } else {
        f.scaled(norm / n)
    }
}

pub const SNAPSHOT_MAGIC: [u8; 8] = *b"VORT1\0\0\0";

/// Writes a `VORT1` snapshot: magic, `u32` kmax, `u32` n_force, then
/// `(re, im)` as little-endian `f64` for every half-lattice mode in
/// lexicographic `(k1, k2)` order.
pub fn write_snapshot<W: Write>(w: &mut W, field: &VorticityField) -> Result<()> {
    w.write_all(&SNAPSHOT_MAGIC)?;
    w.write_all(&(field.grid.kmax as u32).to_le_bytes())?;
    w.write_all(&field.grid.n_force.to_le_bytes())?;
    for c in &field.coeffs {
        w.write_all(&c.re.to_le_bytes())?;
        w.write_all(&c.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(r: &mut R) -> Result<VorticityField> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if magic != SNAPSHOT_MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let kmax = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let n_force = u32::from_le_bytes(b4);
    let grid = SpectralGrid::new(kmax, n_force)?;
    let mut b8 = [0u8; 8];
    let mut coeffs = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        r.read_exact(&mut b8)?;
        let re = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let im = f64::from_le_bytes(b8);
        coeffs.push(Complex64::new(re, im));
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Snapshot("trailing bytes".into()));
    }
    VorticityField::from_coeffs(&grid, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn grid_invariants() {
        assert!(SpectralGrid::new(0, 1).is_err());
        assert!(SpectralGrid::new(2, 0).is_err());
        assert!(SpectralGrid::new(2, 9).is_err());
        assert!(SpectralGrid::new(2, 8).is_ok());
        let g = SpectralGrid::new(4, 4).unwrap();
        assert_eq!(g.len(), 4 + 4 * 9);
        for i in 0..g.len() {
            let (k1, k2) = g.mode(i);
            assert_eq!(g.lookup(k1, k2), Some((i, false)));
            assert_eq!(g.lookup(-k1, -k2), Some((i, true)));
        }
        assert_eq!(g.lookup(0, 0), None);
        assert_eq!(g.lookup(5, 0), None);
    }

    #[test]
    fn lexicographic_order() {
        let g = SpectralGrid::new(2, 1).unwrap();
        let modes: Vec<_> = (0..g.len()).map(|i| g.mode(i)).collect();
        let mut sorted = modes.clone();
        sorted.sort();
        assert_eq!(modes, sorted);
        assert_eq!(modes[0], (0, 1));
        assert_eq!(modes[2], (1, -2));
    }

    #[test]
    fn kappa_round_trip() {
        let g = SpectralGrid::from_kappa(8, 2.0, 1.0).unwrap();
        assert_eq!(g.n_force(), 2);
        assert_eq!(g.kappa(1.0), 2.0);
    }

    #[test]
    fn projections_boundary_and_complement() {
        let g = SpectralGrid::new(4, 4).unwrap();
        let zero = VorticityField::zeros(&g);
        assert!(zero.project_low().is_zero());
        assert!(zero.project_high().is_zero());
        // |k|² = N is low
        let on = VorticityField::from_modes(&g, &[((2, 0), c(1.0, 0.5))]).unwrap();
        assert_eq!(on.project_low(), on);
        assert!(on.project_high().is_zero());
        // |k|² = N + 1 is high
        let off = VorticityField::from_modes(&g, &[((2, 1), c(1.0, 0.5))]).unwrap();
        assert!(off.project_low().is_zero());
    }

    #[test]
    fn direct_sum_is_exact_and_orthogonal() {
        let g = SpectralGrid::new(4, 4).unwrap();
        let mut rng = stream_rng(3, "spectral-test", 0);
        for _ in 0..20 {
            let w = sample_gaussian_field(&g, 1.3, &mut rng);
            let s = w.project_low();
            let l = w.project_high();
            assert_eq!(&s + &l, w);
            assert!(l.project_low().is_zero());
            assert_eq!(s.inner(&l), 0.0);
        }
    }

    #[test]
    fn norms_of_single_pairs() {
        let g = SpectralGrid::new(3, 1).unwrap();
        let w = VorticityField::from_modes(&g, &[((1, 0), c(1.0, 0.0))]).unwrap();
        assert_eq!(w.l2_norm_sq(), 2.0);
        assert_eq!(w.h1_seminorm_sq(), 2.0);
        let w = VorticityField::from_modes(&g, &[((1, 1), c(1.0, 0.0))]).unwrap();
        assert_eq!(w.h1_seminorm_sq() / w.l2_norm_sq(), 2.0);
        assert_eq!(VorticityField::zeros(&g).l2_norm_sq(), 0.0);
    }

    #[test]
    fn velocity_examples() {
        let g = SpectralGrid::new(3, 1).unwrap();
        let w = VorticityField::from_modes(&g, &[((1, 0), c(1.0, 0.0))]).unwrap();
        let u = w.velocity();
        assert_eq!(u.get(1, 0), [c(0.0, 0.0), c(0.0, 1.0)]);
        assert_eq!(u.get(-1, 0), [c(0.0, 0.0), c(0.0, -1.0)]);
        let zero = VorticityField::zeros(&g).velocity();
        assert!(zero.coeffs().iter().all(|u| u[0].norm() == 0.0 && u[1].norm() == 0.0));

        let mut rng = stream_rng(3, "spectral-test", 1);
        let w = sample_gaussian_field(&g, 1.0, &mut rng);
        let u = w.velocity();
        assert_eq!(u.max_divergence(), 0.0);
        for i in 0..g.len() {
            let (k1, k2) = g.mode(i);
            let uk = u.get(k1, k2);
            let mag = (uk[0].norm_sqr() + uk[1].norm_sqr()).sqrt();
            let expect = w.get(k1, k2).norm() / g.ksq(i).sqrt();
            assert!((mag - expect).abs() <= 1e-15 * expect.max(1.0));
        }
    }

    #[test]
    fn zero_amplitude_sample_is_zero() {
        let g = SpectralGrid::new(3, 2).unwrap();
        let mut rng = stream_rng(3, "spectral-test", 2);
        assert!(sample_gaussian_field(&g, 0.0, &mut rng).is_zero());
    }

    #[test]
    fn snapshot_round_trip_and_layout() {
        let g = SpectralGrid::new(2, 2).unwrap();
        let mut rng = stream_rng(3, "spectral-test", 3);
        let w = sample_gaussian_field(&g, 1.0, &mut rng);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &w).unwrap();
        assert_eq!(buf.len(), 8 + 4 + 4 + 16 * g.len());
        assert_eq!(&buf[..8], b"VORT1\0\0\0");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 2);
        let first_re = f64::from_le_bytes(buf[16..24].try_into().unwrap());
        assert_eq!(first_re, w.get(0, 1).re);
        let back = read_snapshot(&mut buf.as_slice()).unwrap();
        assert_eq!(back, w);
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_snapshot(&mut bad.as_slice()).is_err());
    }
}
