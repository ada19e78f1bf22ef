//! Low-mode Wiener forcing.
//!
//! Sampling convention: for every stored half-lattice low mode `k`, the real
//! and imaginary parts of the increment `db_k` over a step `dt` are independent
//! `N(0, γ_k dt)`. Hence `E|db_k|² = 2 γ_k dt` for each signed mode and
//! `E‖db‖² = Σ_{signed} 2γ_k dt = 2R dt`. With this convention Itô's formula
//! gives `d(½‖ω‖²) = (-‖∇ω‖² + R) dt + (ω, db)`, the enstrophy balance with
//! `R = Σ_k γ_k` over the full lattice. The reference Wiener measure of the
//! low modes therefore has covariance `2γ` per real degree of freedom pair,
//! which is what the Girsanov weights use.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::spectral::{SpectralGrid, VorticityField};

/// Per-mode variances `γ_k > 0` on the low modes.
#[derive(Clone, Debug, PartialEq)]
pub struct ForcingSpec {
    grid: SpectralGrid,
    /// Indexed like the half-lattice storage; zero on high modes.
    gamma: Vec<f64>,
    r: f64,
    rho: f64,
}

impl ForcingSpec {
    /// Builds a spec from half-lattice variances (zero outside the low modes).
    pub fn from_gamma(grid: &SpectralGrid, gamma: Vec<f64>) -> Result<Self> {
        if gamma.len() != grid.len() {
            return Err(invalid("gamma", "length does not match the grid"));
        }
        for (i, &g) in gamma.iter().enumerate() {
            let (k1, k2) = grid.mode(i);
            if grid.is_low(i) {
                if !(g > 0.0 && g.is_finite()) {
                    return Err(invalid("gamma", format!("mode ({k1}, {k2}) needs a positive finite variance")));
                }
            } else if g != 0.0 {
                return Err(invalid("gamma", format!("mode ({k1}, {k2}) is not a forced mode")));
            }
        }
        let r = total_rate(grid, &gamma);
        let rho = grid
            .low_indices()
            .into_iter()
            .map(|i| gamma[i])
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            grid: grid.clone(),
            gamma,
            r,
            rho,
        })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    /// `R = Σ γ_k` over the full lattice.
    pub fn r(&self) -> f64 {
        self.r
    }

    /// `ρ = min γ_k`.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// `κ = N / R`.
    pub fn kappa(&self) -> f64 {
        self.grid.kappa(self.r)
    }

    pub fn gamma(&self, k1: i32, k2: i32) -> f64 {
        self.grid.lookup(k1, k2).map_or(0.0, |(i, _)| self.gamma[i])
    }

    pub fn gamma_table(&self) -> &[f64] {
        &self.gamma
    }

    pub fn max_gamma(&self) -> f64 {
        self.gamma.iter().copied().fold(0.0, f64::max)
    }

    /// Fills `out` with one increment over `dt` (see the module docs for the
    /// convention). High modes are left at zero.
    pub fn sample_increment_into<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R, out: &mut VorticityField) {
        let c = out.coeffs_mut();
        for (i, &g) in self.gamma.iter().enumerate() {
            if g > 0.0 {
                let sd = (g * dt).sqrt();
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                c[i] = Complex64::new(sd * re, sd * im);
            } else {
                c[i] = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Result<VorticityField> {
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(invalid("dt", "must be finite and non-negative"));
        }
        let mut out = VorticityField::zeros(&self.grid);
        self.sample_increment_into(dt, rng, &mut out);
        Ok(out)
    }

    /// `(f, γ⁻¹ g) = Σ_k Re(conj(f_k) g_k) / γ_k` over the full lattice.
    pub fn gamma_inv_inner(&self, f: &VorticityField, g: &VorticityField) -> Result<f64> {
        if !f.is_low_supported() || !g.is_low_supported() {
            return Err(Error::SupportViolation("low"));
        }
        Ok(self.gamma_inv_inner_unchecked(f, g))
    }

    pub(crate) fn gamma_inv_inner_unchecked(&self, f: &VorticityField, g: &VorticityField) -> f64 {
        let mut acc = 0.0;
        for ((a, b), &gam) in f.coeffs().iter().zip(g.coeffs()).zip(&self.gamma) {
            if gam > 0.0 {
                acc += (a.re * b.re + a.im * b.im) / gam;
            }
        }
        2.0 * acc
    }
}

fn total_rate(grid: &SpectralGrid, gamma: &[f64]) -> f64 {
    let mut r = 0.0;
    for i in grid.low_indices() {
        r += 2.0 * gamma[i];
    }
    r
}

/// Equal variance `R / #(signed low modes)` on every forced mode; the last
/// mode absorbs rounding so that `Σ γ_k` reproduces `R` bit for bit.
pub fn uniform_spec(grid: &SpectralGrid, r: f64) -> Result<ForcingSpec> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid("R", "must be positive and finite"));
    }
    let low = grid.low_indices();
    let each = r / grid.low_mode_count_signed() as f64;
    let mut gamma = vec![0.0; grid.len()];
    let (last, rest) = low.split_last().expect("n_force >= 1 gives at least one low mode");
    let mut partial = 0.0;
    for &i in rest {
        gamma[i] = each;
        partial += 2.0 * each;
    }
    gamma[*last] = (r - partial) / 2.0;
    ForcingSpec::from_gamma(grid, gamma)
}

/// Parses `k1 k2 gamma` lines (blank lines and `#` comments allowed). Listed
/// modes override `base`; without a base every forced mode must be listed.
/// A mode may be given by either of `±k`.
pub fn parse_overrides(grid: &SpectralGrid, base: Option<&ForcingSpec>, text: &str) -> Result<ForcingSpec> {
    let mut gamma = match base {
        Some(b) => {
            if b.grid() != grid {
                return Err(Error::GridMismatch("override base spec".into()));
            }
            b.gamma.clone()
        }
        None => vec![0.0; grid.len()],
    };
    let mut seen = vec![false; grid.len()];
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |reason: String| Error::Parse { line: n + 1, reason };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(format!("expected `k1 k2 gamma`, got {line:?}")));
        }
        let k1: i32 = fields[0].parse().map_err(|e| parse_err(format!("k1: {e}")))?;
        let k2: i32 = fields[1].parse().map_err(|e| parse_err(format!("k2: {e}")))?;
        let g: f64 = fields[2].parse().map_err(|e| parse_err(format!("gamma: {e}")))?;
        let sq = (k1 as i64).pow(2) + (k2 as i64).pow(2);
        if sq == 0 || sq > grid.n_force() as i64 {
            return Err(parse_err(format!("({k1}, {k2}) is not a forced mode (|k|^2 <= {})", grid.n_force())));
        }
        if !(g > 0.0 && g.is_finite()) {
            return Err(parse_err(format!("gamma must be positive, got {g}")));
        }
        let (i, _) = grid.lookup(k1, k2).expect("forced modes lie in the box");
        if seen[i] {
            return Err(parse_err(format!("mode ({k1}, {k2}) listed twice")));
        }
        seen[i] = true;
        gamma[i] = g;
    }
    if let Some(i) = grid.low_indices().into_iter().find(|&i| gamma[i] == 0.0) {
        let (k1, k2) = grid.mode(i);
        return Err(invalid("gamma", format!("forced mode ({k1}, {k2}) has no variance")));
    }
    ForcingSpec::from_gamma(grid, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::spectral::sample_low_field;

    #[test]
    fn uniform_split_over_two_pairs() {
        let g = SpectralGrid::new(3, 1).unwrap();
        let s = uniform_spec(&g, 1.0).unwrap();
        assert_eq!(s.gamma(1, 0), 0.25);
        assert_eq!(s.gamma(0, -1), 0.25);
        assert_eq!(s.rho(), 0.25);
        assert_eq!(s.r(), 1.0);
    }

    #[test]
    fn uniform_total_is_exact() {
        for n in 1..20 {
            let g = SpectralGrid::new(6, n).unwrap();
            for r in [0.1, 1.0, 1.7, 3.3, 10.0, 1e-3] {
                assert_eq!(uniform_spec(&g, r).unwrap().r(), r, "n {n}, r {r}");
            }
        }
    }

    #[test]
    fn overrides_validate_support() {
        let g = SpectralGrid::new(4, 2).unwrap();
        let base = uniform_spec(&g, 1.0).unwrap();
        let s = parse_overrides(&g, Some(&base), "# comment\n-1 -1 0.5\n").unwrap();
        assert_eq!(s.gamma(1, 1), 0.5);
        assert!(parse_overrides(&g, Some(&base), "2 0 0.1").is_err());
        assert!(parse_overrides(&g, Some(&base), "1 0 -1").is_err());
        assert!(parse_overrides(&g, Some(&base), "1 0 1\n-1 0 1").is_err());
        assert!(parse_overrides(&g, None, "1 0 1").is_err());
    }

    #[test]
    fn gamma_inner_rejects_high_support() {
        let g = SpectralGrid::new(4, 2).unwrap();
        let s = uniform_spec(&g, 1.0).unwrap();
        let f = VorticityField::from_modes(&g, &[((2, 1), Complex64::new(1.0, 0.0))]).unwrap();
        assert!(matches!(s.gamma_inv_inner(&f, &f), Err(Error::SupportViolation(_))));
    }

    #[test]
    fn gamma_inner_bounds() {
        let g = SpectralGrid::new(4, 5).unwrap();
        let gamma: Vec<f64> = (0..g.len())
            .map(|i| if g.is_low(i) { 0.1 + i as f64 * 0.01 } else { 0.0 })
            .collect();
        let s = ForcingSpec::from_gamma(&g, gamma).unwrap();
        let mut rng = stream_rng(4, "forcing-test", 0);
        for _ in 0..100 {
            let f = sample_low_field(&g, 1.3, &mut rng);
            let q = s.gamma_inv_inner(&f, &f).unwrap();
            let n2 = f.l2_norm_sq();
            assert!(q >= n2 / s.max_gamma() * (1.0 - 1e-12));
            assert!(q <= n2 / s.rho() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn zero_step_gives_zero_increment() {
        let g = SpectralGrid::new(4, 2).unwrap();
        let s = uniform_spec(&g, 1.0).unwrap();
        let mut rng = stream_rng(4, "forcing-test", 1);
        assert!(s.sample_increment(0.0, &mut rng).unwrap().is_zero());
        assert!(s.sample_increment(0.1, &mut rng).unwrap().project_high().is_zero());
    }
}
