//! One function per subcommand. Each writes the manifest first, then its
//! reports into the output directory.

use std::path::Path;

use rand::Rng;
use vortmix_core::diagnostics::{ensemble_diagnostics, exp_moment_check, run_diagnostics, tail_sum_check};
use vortmix_core::dynamics::constant_a;
use vortmix_core::forcing::{parse_overrides, uniform_spec, ForcingSpec};
use vortmix_core::girsanov::{reweighted_expectation, sample_reduced_ensemble, GirsanovLog, ReducedPathSettings};
use vortmix_core::integrator::{run_observed, simulate as simulate_traj, step_count, steps_per_unit, GaussianNoise, RecordPolicy, RunSettings};
use vortmix_core::mixing::{correlation_decay, couple as couple_pair, stationary_sample, StationarySettings};
use vortmix_core::parallel::Parallelism;
use vortmix_core::partition::{
    chi_weight, classify, kvector_from_dn, phi, scan_lemma42, verify_lemma41, KVector, Label, PartitionParams,
};
use vortmix_core::reduction::{contraction_report, extract_s_path, reconstruction_error, semigroup_check};
use vortmix_core::rng::stream_rng;
use vortmix_core::spectral::{read_snapshot, sample_gaussian_field, sample_high_field, write_snapshot, SpectralGrid, VorticityField};
use vortmix_core::stats::MeanEstimate;

use crate::config::{InitialKind, Perturbation, RunConfig};
use crate::output::{flag, real, OutputDir};
use crate::CliError;

/// Tail cut of the lattice sum behind the constant `a`.
const CONSTANT_A_CUT: usize = 64;

pub struct Context {
    pub cfg: RunConfig,
    pub out: OutputDir,
    pub par: Parallelism,
    pub grid: SpectralGrid,
    pub spec: ForcingSpec,
}

impl Context {
    pub fn new(cfg: RunConfig, subcommand: &str, par: Parallelism) -> Result<Self, CliError> {
        cfg.validate()?;
        let grid = SpectralGrid::new(cfg.grid.kmax, cfg.grid.n_force)?;
        let base = uniform_spec(&grid, cfg.forcing.r)?;
        let spec = match &cfg.forcing.gamma_file {
            None => base,
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("forcing.gamma_file: {}: {e}", p.display())))?;
                parse_overrides(&grid, Some(&base), &text).map_err(|e| CliError::Config(format!("forcing.gamma_file: {e}")))?
            }
        };
        let out = OutputDir::create(&cfg.output_dir)?;
        out.manifest(subcommand, &cfg)?;
        Ok(Self { cfg, out, par, grid, spec })
    }

    fn seed(&self) -> u64 {
        self.cfg.master_seed
    }

    fn dt(&self) -> f64 {
        self.cfg.integrator.dt
    }

    /// Initial state from the `initial` block (stream `(seed, "initial", 0)`).
    pub fn initial_field(&self) -> Result<VorticityField, CliError> {
        let ic = &self.cfg.initial;
        match ic.kind {
            InitialKind::Zero => Ok(VorticityField::zeros(&self.grid)),
            InitialKind::Gaussian => Ok(gaussian_with_norm(&self.grid, ic.norm, &mut stream_rng(self.seed(), "initial", 0))),
            InitialKind::Snapshot => {
                let path = ic.snapshot.as_ref().expect("validated");
                let mut f = std::fs::File::open(path).map_err(|e| CliError::Config(format!("initial.snapshot: {}: {e}", path.display())))?;
                let w = read_snapshot(&mut f).map_err(|e| CliError::Config(format!("initial.snapshot: {e}")))?;
                if w.grid() != &self.grid {
                    return Err(CliError::Config("initial.snapshot: grid differs from the configured grid".into()));
                }
                Ok(w)
            }
        }
    }
}

fn gaussian_with_norm<R: Rng + ?Sized>(grid: &SpectralGrid, norm: f64, rng: &mut R) -> VorticityField {
    let w = sample_gaussian_field(grid, 1.0, rng);
    let n = w.l2_norm();
    if n == 0.0 {
        w
    } else {
        w.scaled(norm / n)
    }
}

fn energy(w: &VorticityField) -> f64 {
    w.weighted_inner(w, |k| 1.0 / k)
}

fn kv(pairs: &[(&str, String)]) -> Vec<(String, String)> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

pub fn simulate(ctx: &Context) -> Result<(), CliError> {
    let dt = ctx.dt();
    let t_end = ctx.cfg.integrator.t_end;
    let steps = step_count(t_end, dt)?;
    let spu = steps_per_unit(dt)?;
    let record = match ctx.cfg.simulate.record_every {
        0 => spu,
        n => n,
    };
    let snap_every = match ctx.cfg.simulate.snapshot_interval {
        Some(iv) => Some(step_count(iv, dt)?),
        None => None,
    };
    let w0 = ctx.initial_field()?;
    let mut rows = Vec::new();
    let mut snaps: Vec<(usize, VorticityField)> = Vec::new();
    let mut rng = stream_rng(ctx.seed(), "simulate", 0);
    let mut noise = GaussianNoise::new(&ctx.spec, dt, &mut rng);
    let result = run_observed(&w0, RunSettings::new(dt, t_end), &mut noise, |i, t, w, _| {
        if i % record == 0 || i == steps {
            let low = w.project_low().l2_norm_sq();
            let total = w.l2_norm_sq();
            rows.push(vec![
                i.to_string(),
                real(t),
                real(total),
                real(energy(w)),
                real(w.h1_seminorm_sq()),
                real(low),
                real(total - low),
            ]);
        }
        if let Some(every) = snap_every {
            if i % every == 0 {
                snaps.push((i, w.clone()));
            }
        }
    });
    ctx.out.csv(
        "trajectory.csv",
        &["step", "t", "enstrophy", "energy", "palinstrophy", "low_enstrophy", "high_enstrophy"],
        &rows,
    )?;
    let final_state = result?;
    let write = |name: String, w: &VorticityField| -> Result<(), CliError> {
        let mut buf = Vec::new();
        write_snapshot(&mut buf, w)?;
        ctx.out.bytes(&name, &buf)
    };
    if snap_every.is_some() {
        for (i, w) in &snaps {
            write(format!("snapshot_{i:09}.vort"), w)?;
        }
    } else {
        write("snapshot_final.vort".into(), &final_state)?;
    }
    Ok(())
}

pub fn couple(ctx: &Context) -> Result<(), CliError> {
    let c = &ctx.cfg.couple;
    let t_end = c.t_end.unwrap_or(ctx.cfg.integrator.t_end);
    let mut rng = stream_rng(ctx.seed(), "couple-initial", 0);
    let w1 = gaussian_with_norm(&ctx.grid, c.initial_norm, &mut rng);
    let w2 = match c.perturbation {
        Perturbation::Full => gaussian_with_norm(&ctx.grid, c.initial_norm, &mut rng),
        Perturbation::High => &w1.project_low() + &sample_high_field(&ctx.grid, c.initial_norm, &mut rng),
    };
    let rep = couple_pair(&w1, &w2, &ctx.spec, t_end, ctx.dt(), ctx.seed())?;
    let rows: Vec<Vec<String>> = (0..rep.times.len())
        .map(|i| vec![real(rep.times[i]), real(rep.d_full[i]), real(rep.d_low[i]), real(rep.d_high[i])])
        .collect();
    ctx.out.csv("coupling.csv", &["t", "d_full", "d_low", "d_high"], &rows)?;
    let mut summary = kv(&[("pythagoras_defect", real(rep.pythagoras_defect()))]);
    match rep.fitted_rate {
        Some(f) => summary.extend(kv(&[
            ("fitted_rate", real(f.rate)),
            ("ci_low", real(f.ci.0)),
            ("ci_high", real(f.ci.1)),
            ("fit_points", f.points.to_string()),
            ("ci_excludes_zero", f.excludes_zero().to_string()),
            ("result", flag(f.rate < 0.0 && f.excludes_zero())),
        ])),
        None => summary.extend(kv(&[("fitted_rate", "undefined".into())])),
    }
    ctx.out.key_values("summary.txt", &summary)
}

pub fn reduce_check(ctx: &Context) -> Result<(), CliError> {
    let rc = &ctx.cfg.reduce_check;
    let dt = ctx.dt();
    let w0 = ctx.initial_field()?;
    let mut rng = stream_rng(ctx.seed(), "reduce-path", 0);
    let traj = simulate_traj(&w0, &ctx.spec, rc.t_end, dt, &mut rng, RecordPolicy::Dense { noise_log: false })?;
    let s = extract_s_path(&traj)?;

    let mut split_rng = stream_rng(ctx.seed(), "reduce-split", 0);
    let mut rows = Vec::new();
    let mut worst_semigroup: f64 = 0.0;
    let mut semigroup_ok = true;
    for j in 0..rc.splits {
        let mid = split_rng.random_range(0..s.len());
        let l0 = sample_high_field(&ctx.grid, rc.l0_norm, &mut split_rng);
        let res = semigroup_check(&s, &l0, mid)?;
        let tol = 1e-12 * l0.l2_norm().max(1.0);
        worst_semigroup = worst_semigroup.max(res);
        semigroup_ok &= res <= tol;
        rows.push(vec![j.to_string(), real(s.times[mid]), real(l0.l2_norm()), real(res), real(tol), flag(res <= tol)]);
    }
    ctx.out.csv("semigroup.csv", &["split", "split_time", "l0_norm", "residual", "tolerance", "result"], &rows)?;

    let a = constant_a(CONSTANT_A_CUT);
    let every = (steps_per_unit(dt)? / 100).max(1);
    let reports = ctx.par.try_map(rc.configurations, |c| {
        let mut rng = stream_rng(ctx.seed(), "reduce-contraction", c as u64);
        let tr = simulate_traj(&w0, &ctx.spec, rc.t_end, dt, &mut rng, RecordPolicy::Dense { noise_log: false })?;
        let s = extract_s_path(&tr)?;
        let l1 = sample_high_field(&ctx.grid, rc.l0_norm, &mut rng);
        let l2 = sample_high_field(&ctx.grid, rc.l0_norm, &mut rng);
        contraction_report(&s, &l1, &l2, a)
    })?;
    let mut rows = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    let mut contraction_ok = true;
    for (c, rep) in reports.iter().enumerate() {
        for (i, r) in rep.iter().enumerate() {
            let ok = r.holds(1e-3);
            contraction_ok &= ok;
            worst_ratio = worst_ratio.max(r.ratio());
            if i % every == 0 || i + 1 == rep.len() {
                rows.push(vec![c.to_string(), real(r.t), real(r.lhs), real(r.rhs), real(r.rhs_gap), flag(ok)]);
            }
        }
    }
    ctx.out.csv("contraction.csv", &["configuration", "t", "lhs", "rhs", "rhs_gap", "result"], &rows)?;

    let mut rows = Vec::new();
    for &stride in &rc.strides {
        let err = reconstruction_error(&traj, stride)?;
        rows.push(vec![stride.to_string(), real(dt * stride as f64), real(err)]);
    }
    ctx.out.csv("reconstruction.csv", &["stride", "dt_coarse", "error"], &rows)?;

    ctx.out.key_values(
        "summary.txt",
        &kv(&[
            ("semigroup_max_residual", real(worst_semigroup)),
            ("semigroup_result", flag(semigroup_ok)),
            ("constant_a", real(a)),
            ("contraction_worst_ratio", real(worst_ratio)),
            ("contraction_result", flag(contraction_ok)),
        ]),
    )
}

pub fn girsanov_check(ctx: &Context) -> Result<(), CliError> {
    let g = &ctx.cfg.girsanov_check;
    let w0 = ctx.initial_field()?;
    let mut settings = ReducedPathSettings {
        dt: g.dt,
        t_end: g.t_end,
        clip: g.clip,
        drifted: false,
    };
    let paths = sample_reduced_ensemble(&w0, &ctx.spec, settings, g.paths, ctx.seed(), "girsanov", &ctx.par)?;
    let mut rows = Vec::with_capacity(paths.len());
    let mut additivity: f64 = 0.0;
    for (i, p) in paths.iter().enumerate() {
        let half = p.log.increments.len() / 2;
        let tm = p.log.t0 + half as f64 * g.dt;
        let first = GirsanovLog::from_increments(p.log.t0, tm, p.log.increments[..half].to_vec());
        let second = GirsanovLog::from_increments(tm, p.log.t1, p.log.increments[half..].to_vec());
        additivity = additivity.max((p.log.total - (first.total + second.total)).abs());
        rows.push(vec![i.to_string(), real(p.log.total), real(p.log.weight()), p.clipped_steps.to_string()]);
    }
    ctx.out.csv("weights.csv", &["path", "log_density", "weight", "clipped_steps"], &rows)?;
    let norm = reweighted_expectation(&paths, |_| 1.0);
    let z = (norm.estimate - 1.0) / norm.se;
    let reweighted = reweighted_expectation(&paths, |w| w.l2_norm_sq());
    settings.drifted = true;
    let direct_paths = sample_reduced_ensemble(&w0, &ctx.spec, settings, g.paths, ctx.seed(), "girsanov-direct", &ctx.par)?;
    let direct: Vec<f64> = direct_paths.iter().map(|p| p.final_state.l2_norm_sq()).collect();
    let direct = MeanEstimate::from_samples(&direct);
    let agreement = (reweighted.estimate - direct.mean).abs() / (reweighted.se.powi(2) + direct.se.powi(2)).sqrt();
    ctx.out.key_values(
        "summary.txt",
        &kv(&[
            ("mean_weight", real(norm.estimate)),
            ("mean_weight_se", real(norm.se)),
            ("mean_weight_z", real(z)),
            ("ess", real(norm.ess)),
            ("low_ess", norm.low_ess.to_string()),
            ("normalization_result", flag(z.abs() <= 3.0)),
            ("additivity_max_defect", real(additivity)),
            ("reweighted_enstrophy", real(reweighted.estimate)),
            ("reweighted_enstrophy_se", real(reweighted.se)),
            ("direct_enstrophy", real(direct.mean)),
            ("direct_enstrophy_se", real(direct.se)),
            ("agreement_z", real(agreement)),
        ]),
    )
}

pub fn diagnostics(ctx: &Context) -> Result<(), CliError> {
    let d = &ctx.cfg.diagnostics;
    let horizon = d.t_end.unwrap_or(ctx.cfg.integrator.t_end);
    let r = ctx.spec.r();
    let w0 = ctx.initial_field()?;
    let ens = ensemble_diagnostics(&w0, &ctx.spec, RunSettings::new(ctx.dt(), horizon), d.members, ctx.seed(), "diagnostics", &ctx.par)?;

    let mut rows = Vec::new();
    let mut residuals = Vec::new();
    for (m, s) in ens.iter().enumerate() {
        for n in 0..s.dn.len() {
            rows.push(vec![
                m.to_string(),
                (n + 1).to_string(),
                real(s.dn[n]),
                real(s.sup_half_enstrophy[n]),
                real(s.dissipation[n]),
                real(s.balance_residual[n]),
            ]);
            residuals.push(s.balance_residual[n]);
        }
    }
    ctx.out.csv("series.csv", &["member", "n", "dn", "sup_half_enstrophy", "dissipation", "balance_residual"], &rows)?;
    let balance = MeanEstimate::from_samples(&residuals);

    let levels: Vec<f64> = d.tail_levels.iter().map(|l| l * r).collect();
    let mut moment_rows = Vec::new();
    let mut tail_rows = Vec::new();
    let mut moments_ok = true;
    for &t in &d.moment_times {
        let enstrophy: Vec<f64> = ens.iter().map(|s| s.enstrophy_at_units[t]).collect();
        let mut rng = stream_rng(ctx.seed(), "diagnostics-bootstrap", t as u64);
        let rep = exp_moment_check(&enstrophy, w0.l2_norm_sq(), r, t as f64, &levels, d.resamples, &mut rng);
        moments_ok &= rep.all_pass();
        moment_rows.push(vec![t.to_string(), real(rep.estimate), real(rep.ci.0), real(rep.ci.1), real(rep.bound), flag(rep.pass)]);
        for row in &rep.tails {
            tail_rows.push(vec![t.to_string(), real(row.level), real(row.frequency), real(row.lower), real(row.bound), flag(row.pass)]);
        }
    }
    ctx.out.csv("exp_moment.csv", &["t", "estimate", "ci_low", "ci_high", "bound", "result"], &moment_rows)?;
    ctx.out.csv("tails.csv", &["t", "level", "frequency", "lower", "bound", "result"], &tail_rows)?;

    let dn: Vec<Vec<f64>> = ens.iter().map(|s| s.dn.clone()).collect();
    let (a, b) = d.tail_window;
    let tails = tail_sum_check(&dn, r, a, b, &d.betas, d.min_hits)?;
    let rows: Vec<Vec<String>> = tails
        .rows
        .iter()
        .map(|(beta, hits, freq)| vec![real(*beta), hits.to_string(), real(*freq)])
        .collect();
    ctx.out.csv("tail_sum.csv", &["beta", "hits", "frequency"], &rows)?;

    let mut summary = kv(&[
        ("balance_mean", real(balance.mean)),
        ("balance_se", real(balance.se)),
        ("balance_z", real(balance.mean / balance.se)),
        ("exp_moment_result", flag(moments_ok)),
        ("tail_sum_fitted_rows", tails.fitted_rows.to_string()),
        ("tail_sum_result", flag(tails.pass)),
    ]);
    if let Some(f) = tails.fit {
        summary.extend(kv(&[("tail_sum_slope", real(f.slope))]));
    }
    if let Some(c) = tails.decay_constant() {
        summary.extend(kv(&[("tail_sum_decay_constant", real(c))]));
    }
    ctx.out.key_values("summary.txt", &summary)
}

pub fn partition(ctx: &Context, kvector_path: Option<&Path>) -> Result<(), CliError> {
    let p = &ctx.cfg.partition;
    let r = p.r.unwrap_or(ctx.spec.r());
    let params = PartitionParams::new(p.t_block, p.beta, p.beta_prime, r).map_err(|e| CliError::Config(format!("partition: {e}")))?;
    let read_kv = |path: &Path| -> Result<KVector, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        KVector::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    };
    let mut dn = None;
    let kvec = if let Some(path) = kvector_path {
        read_kv(path)?
    } else if let Some(path) = &p.kvector_file {
        read_kv(path)?
    } else if let Some(v) = &p.kvector {
        KVector::new(v.clone()).map_err(|e| CliError::Config(format!("partition.kvector: {e}")))?
    } else {
        let w0 = ctx.initial_field()?;
        let mut rng = stream_rng(ctx.seed(), "partition", 0);
        let settings = RunSettings::new(ctx.dt(), ctx.cfg.integrator.t_end);
        let series = run_diagnostics(&w0, &ctx.spec, settings, true, &mut rng)?;
        let k = kvector_from_dn(&series.dn, r);
        dn = Some(series.dn);
        k
    };
    if kvec.is_empty() || kvec.len() % p.t_block != 0 {
        return Err(CliError::Config(format!(
            "partition: window length {} is not a positive multiple of t_block = {}",
            kvec.len(),
            p.t_block
        )));
    }
    let part = classify(&kvec, &params)?;
    ctx.out.bytes("partition.txt", part.to_text().as_bytes())?;
    let rows: Vec<Vec<String>> = (0..kvec.len())
        .map(|i| {
            let k = kvec.values()[i];
            let (d, w) = match &dn {
                Some(d) => (real(d[i]), real(phi(k, d[i], r))),
                None => (String::new(), String::new()),
            };
            vec![(i + 1).to_string(), k.to_string(), d, w]
        })
        .collect();
    ctx.out.csv("kvector.csv", &["n", "k", "dn", "phi"], &rows)?;
    let lemma41 = verify_lemma41(&part, &kvec, &params);
    let mut summary = kv(&[
        ("window", kvec.len().to_string()),
        ("blocks", part.blocks.len().to_string()),
        ("large_blocks", part.blocks.iter().filter(|b| b.label == Label::Large).count().to_string()),
        ("invariants", flag(part.check_invariants().is_ok())),
        ("lemma41_violations", lemma41.violations.len().to_string()),
        ("lemma41_result", flag(lemma41.holds())),
    ]);
    if let Some(d) = &dn {
        summary.extend(kv(&[("chi_weight", real(chi_weight(&kvec, d, r)))]));
    }
    if p.scan_max_class > 0 {
        let scan = scan_lemma42(2 * p.t_block, p.scan_max_class, &params, true)?;
        summary.extend(kv(&[
            ("lemma42_cases", scan.cases.to_string()),
            ("lemma42_glued", scan.glued.to_string()),
            ("lemma42_counterexamples", scan.counterexamples.len().to_string()),
            ("lemma42_result", flag(scan.counterexamples.is_empty())),
        ]));
        let rows: Vec<Vec<String>> = scan
            .counterexamples
            .iter()
            .map(|(k, blocks)| {
                let ks: Vec<String> = k.iter().map(|x| x.to_string()).collect();
                let bs: Vec<String> = blocks.iter().map(|b| format!("{}-{}:{}", b.start, b.end, b.label)).collect();
                vec![ks.join(" "), bs.join(" ")]
            })
            .collect();
        ctx.out.csv("lemma42_counterexamples.csv", &["kvector", "blocks"], &rows)?;
    }
    ctx.out.key_values("summary.txt", &summary)
}

pub fn mixing(ctx: &Context) -> Result<(), CliError> {
    let m = &ctx.cfg.mixing;
    let w0 = ctx.initial_field()?;
    let settings = StationarySettings {
        dt: ctx.dt(),
        burn_in: m.burn_in,
        gap: m.gap,
        n_samples: m.n_samples,
    };
    let runs = ctx
        .par
        .try_map(m.runs, |i| stationary_sample(&w0, &ctx.spec, settings, ctx.seed(), i as u64))?;
    let mut rows = Vec::new();
    let mut means = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        let xs: Vec<f64> = run.iter().map(|w| w.l2_norm_sq()).collect();
        for (j, x) in xs.iter().enumerate() {
            rows.push(vec![i.to_string(), j.to_string(), real(m.burn_in + j as f64 * m.gap), real(*x)]);
        }
        means.push(MeanEstimate::batch_means(&xs, m.batches));
    }
    ctx.out.csv("stationary.csv", &["run", "sample", "t", "enstrophy"], &rows)?;
    let rows: Vec<Vec<String>> = means
        .iter()
        .enumerate()
        .map(|(i, e)| vec![i.to_string(), real(e.mean), real(e.se)])
        .collect();
    ctx.out.csv("stationary_means.csv", &["run", "mean_enstrophy", "se"], &rows)?;
    let mut worst_z: f64 = 0.0;
    for i in 0..means.len() {
        for j in i + 1..means.len() {
            worst_z = worst_z.max(means[i].z_distance(&means[j]));
        }
    }
    let corr = correlation_decay(&w0, &ctx.spec, settings, |w| w.get(1, 0).re, &m.lags, ctx.seed())?;
    let rows: Vec<Vec<String>> = (0..corr.lags.len())
        .map(|i| vec![real(corr.lags[i]), real(corr.autocovariance[i]), real(corr.se[i])])
        .collect();
    ctx.out.csv("correlation.csv", &["lag", "autocovariance", "se"], &rows)?;
    let mut summary = kv(&[
        ("max_pairwise_z", real(worst_z)),
        ("stationary_agreement", flag(worst_z <= 3.0)),
    ]);
    if let Some(f) = corr.fit {
        summary.extend(kv(&[
            ("decay_rate", real(-f.rate)),
            ("decay_ci_low", real(-f.ci.1)),
            ("decay_ci_high", real(-f.ci.0)),
            ("decay_result", flag(-f.rate > 0.0 && f.excludes_zero())),
        ]));
    } else {
        summary.extend(kv(&[("decay_rate", "undefined".into())]));
    }
    ctx.out.key_values("summary.txt", &summary)
}
