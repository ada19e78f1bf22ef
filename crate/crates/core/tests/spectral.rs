use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vortmix_core::dynamics::{nonlinear_direct, nonlinear_fast};
use vortmix_core::spectral::{read_snapshot, sample_gaussian_field, write_snapshot, SpectralGrid, VorticityField};
use vortmix_core::transform::SpectralWorkspace;

fn field(kmax: usize, seed: u64, amp: f64) -> VorticityField {
    let g = SpectralGrid::new(kmax, 2).unwrap();
    sample_gaussian_field(&g, amp, &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval_on_padded_grid(kmax in 2usize..9, seed in any::<u64>(), amp in 0.01f64..10.0) {
        let w = field(kmax, seed, amp);
        let mut ws = SpectralWorkspace::new(w.grid());
        let q = ws.quadrature_l2_sq(&w);
        prop_assert!((q - w.l2_norm_sq()).abs() <= 1e-12 * w.l2_norm_sq().max(1.0));
    }

    #[test]
    fn physical_field_is_real(kmax in 2usize..9, seed in any::<u64>()) {
        let w = field(kmax, seed, 1.0);
        let mut ws = SpectralWorkspace::new(w.grid());
        let p = ws.to_physical(&w);
        let scale = p.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        let imag = p.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        prop_assert!(imag <= 1e-13 * scale.max(1.0));
    }

    #[test]
    fn projections_split_orthogonally(kmax in 2usize..9, seed in any::<u64>()) {
        let w = field(kmax, seed, 1.0);
        let (s, l) = (w.project_low(), w.project_high());
        prop_assert_eq!(&(&s + &l), &w);
        prop_assert_eq!(s.inner(&l), 0.0);
    }

    #[test]
    fn nonlinearity_is_quadratic(seed in any::<u64>(), alpha in -5.0f64..5.0) {
        let w = field(5, seed, 1.0);
        let b = nonlinear_fast(&w);
        let scaled = nonlinear_fast(&w.scaled(alpha));
        let err = (&scaled - &b.scaled(alpha * alpha)).l2_norm();
        prop_assert!(err <= 1e-12 * (alpha * alpha * b.l2_norm()).max(1e-300) + 1e-14);
    }

    #[test]
    fn fast_matches_direct(kmax in 2usize..6, seed in any::<u64>()) {
        let w = field(kmax, seed, 1.0);
        let d = nonlinear_direct(&w).unwrap();
        let f = nonlinear_fast(&w);
        prop_assert!((&f - &d).l2_norm() <= 1e-10 * d.l2_norm().max(1e-300));
    }

    #[test]
    fn snapshot_round_trips(kmax in 1usize..9, seed in any::<u64>()) {
        let w = field(kmax, seed, 3.0);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &w).unwrap();
        let back = read_snapshot(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back, w);
    }
}

#[test]
fn single_mode_has_closed_form_energy() {
    let g = SpectralGrid::new(4, 2).unwrap();
    let w = VorticityField::from_modes(&g, &[((1, 2), Complex64::new(0.5, -1.5))]).unwrap();
    // the conjugate mode (-1,-2) doubles the half-lattice weight
    assert!((w.l2_norm_sq() - 2.0 * 2.5).abs() < 1e-15);
    assert!((w.h1_seminorm_sq() - 5.0 * 2.0 * 2.5).abs() < 1e-13);
    assert!(nonlinear_fast(&w).l2_norm() < 1e-14);
}
