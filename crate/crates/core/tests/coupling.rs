use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vortmix_core::forcing::uniform_spec;
use vortmix_core::integrator::{simulate, RecordPolicy};
use vortmix_core::mixing::couple;
use vortmix_core::parallel::Parallelism;
use vortmix_core::diagnostics::ensemble_diagnostics;
use vortmix_core::integrator::RunSettings;
use vortmix_core::rng::stream_rng;
use vortmix_core::spectral::{sample_gaussian_field, SpectralGrid, VorticityField};

fn setup() -> (SpectralGrid, vortmix_core::forcing::ForcingSpec) {
    let g = SpectralGrid::new(4, 2).unwrap();
    let spec = uniform_spec(&g, 1.0).unwrap();
    (g, spec)
}

#[test]
fn coupled_distances_obey_pythagoras() {
    let (g, spec) = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w1 = sample_gaussian_field(&g, 0.5, &mut rng);
    let w2 = sample_gaussian_field(&g, 0.5, &mut rng);
    let rep = couple(&w1, &w2, &spec, 12.0, 1e-2, 9).unwrap();
    assert!(rep.pythagoras_defect() < 1e-12);
    assert_eq!(rep.times.len(), 13);
    let fit = rep.fitted_rate.unwrap();
    assert!(fit.rate < 0.0);
}

#[test]
fn identical_states_stay_identical() {
    let (g, spec) = setup();
    let w = sample_gaussian_field(&g, 1.0, &mut ChaCha8Rng::seed_from_u64(4));
    let rep = couple(&w, &w, &spec, 3.0, 1e-2, 1).unwrap();
    assert!(rep.d_full.iter().all(|&d| d == 0.0));
    assert!(rep.fitted_rate.is_none());
}

#[test]
fn same_seed_same_path() {
    let (g, spec) = setup();
    let w0 = VorticityField::zeros(&g);
    let a = simulate(&w0, &spec, 1.0, 1e-2, &mut stream_rng(5, "path", 0), RecordPolicy::UnitTimes).unwrap();
    let b = simulate(&w0, &spec, 1.0, 1e-2, &mut stream_rng(5, "path", 0), RecordPolicy::UnitTimes).unwrap();
    let c = simulate(&w0, &spec, 1.0, 1e-2, &mut stream_rng(5, "path", 1), RecordPolicy::UnitTimes).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.final_state(), c.final_state());
}

#[test]
fn ensembles_ignore_worker_count() {
    let (g, spec) = setup();
    let w0 = VorticityField::zeros(&g);
    let run = |workers| {
        let par = Parallelism::with_workers(workers).unwrap();
        ensemble_diagnostics(&w0, &spec, RunSettings::new(1e-2, 2.0), 12, 17, "ens", &par).unwrap()
    };
    assert_eq!(run(1), run(4));
}
