//! Empirical probes of mixing: synchronous coupling of two solutions,
//! sampling of the stationary state and autocovariance decay of observables.

use rand::Rng;

use crate::dynamics::NonlinearMode;
use crate::error::{invalid, Error, Result};
use crate::forcing::ForcingSpec;
use crate::integrator::{step_count, steps_per_unit, Propagator};
use crate::rng::{stream_rng, StreamRng};
use crate::spectral::VorticityField;
use crate::stats::{block_indices, fit_line, mean, percentile_interval, MeanEstimate};

/// Bootstrap replicates behind every confidence interval of this module.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Exponential fit `log y ≈ c + rate · t` with a 95% block-bootstrap interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    pub rate: f64,
    pub ci: (f64, f64),
    pub points: usize,
}

impl RateFit {
    pub fn excludes_zero(&self) -> bool {
        self.ci.0 > 0.0 || self.ci.1 < 0.0
    }
}

/// Distances between two solutions driven by the same noise, at unit times.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingReport {
    pub times: Vec<f64>,
    pub d_full: Vec<f64>,
    pub d_low: Vec<f64>,
    pub d_high: Vec<f64>,
    /// Fit of `log d_full` on the second half of the horizon; `None` when the
    /// distances vanish or too few points remain.
    pub fitted_rate: Option<RateFit>,
}

impl CouplingReport {
    /// Largest `|d_full² - d_low² - d_high²| / d_full²`.
    pub fn pythagoras_defect(&self) -> f64 {
        self.d_full
            .iter()
            .zip(self.d_low.iter().zip(&self.d_high))
            .filter(|(f, _)| **f > 0.0)
            .map(|(f, (l, h))| ((f * f - l * l - h * h) / (f * f)).abs())
            .fold(0.0, f64::max)
    }
}

fn fit_rate<R: Rng>(ts: &[f64], ys: &[f64], rng: &mut R) -> Option<RateFit> {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(ys)
        .filter(|(_, y)| **y > 0.0 && y.is_finite())
        .map(|(t, y)| (*t, y.ln()))
        .collect();
    if pts.len() < 4 {
        return None;
    }
    let (xs, ls): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
    let rate = fit_line(&xs, &ls)?.slope;
    let block = (pts.len() as f64).sqrt().ceil() as usize;
    let mut reps = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let idx = block_indices(pts.len(), block, rng);
        let bx: Vec<f64> = idx.iter().map(|&i| xs[i]).collect();
        let by: Vec<f64> = idx.iter().map(|&i| ls[i]).collect();
        if let Some(f) = fit_line(&bx, &by) {
            reps.push(f.slope);
        }
    }
    Some(RateFit {
        rate,
        ci: percentile_interval(reps, 0.95),
        points: pts.len(),
    })
}

/// Runs `ω1` and `ω2` with one noise realization (stream `(seed, "coupling", 0)`)
/// and records their distance at unit times. The difference is stepped
/// directly so it keeps full relative precision as it shrinks.
pub fn couple(
    w1: &VorticityField,
    w2: &VorticityField,
    spec: &ForcingSpec,
    t_end: f64,
    dt: f64,
    seed: u64,
) -> Result<CouplingReport> {
    if w1.grid() != w2.grid() || w1.grid() != spec.grid() {
        return Err(Error::GridMismatch("coupled fields and forcing".into()));
    }
    let steps = step_count(t_end, dt)?;
    let spu = steps_per_unit(dt)?;
    let mut prop = Propagator::new(w1.grid(), dt, NonlinearMode::Fast)?;
    let mut rng = stream_rng(seed, "coupling", 0);
    let mut w = w1.clone();
    let mut delta = w2 - w1;
    let mut db = VorticityField::zeros(w1.grid());
    let mut rep = CouplingReport {
        times: Vec::new(),
        d_full: Vec::new(),
        d_low: Vec::new(),
        d_high: Vec::new(),
        fitted_rate: None,
    };
    let record = |t: f64, d: &VorticityField, rep: &mut CouplingReport| {
        rep.times.push(t);
        rep.d_full.push(d.l2_norm());
        rep.d_low.push(d.project_low().l2_norm());
        rep.d_high.push(d.project_high().l2_norm());
    };
    record(0.0, &delta, &mut rep);
    for i in 0..steps {
        spec.sample_increment_into(dt, &mut rng, &mut db);
        prop.advance_pair(&mut w, &mut delta, Some(&db));
        if !w.is_finite() || !delta.is_finite() {
            return Err(Error::NonFiniteState {
                time: (i + 1) as f64 * dt,
            });
        }
        if (i + 1) % spu == 0 {
            record(((i + 1) / spu) as f64, &delta, &mut rep);
        }
    }
    let half = rep.times.len() / 2;
    let mut boot = stream_rng(seed, "coupling-bootstrap", 0);
    rep.fitted_rate = fit_rate(&rep.times[half..], &rep.d_full[half..], &mut boot);
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StationarySettings {
    pub dt: f64,
    /// Time discarded before the first sample.
    pub burn_in: f64,
    /// Time between samples (a multiple of `dt`).
    pub gap: f64,
    pub n_samples: usize,
}

fn stationary_run<F: FnMut(&VorticityField)>(
    w0: &VorticityField,
    spec: &ForcingSpec,
    settings: StationarySettings,
    rng: &mut StreamRng,
    mut visit: F,
) -> Result<()> {
    let burn = step_count(settings.burn_in, settings.dt)?;
    let gap = step_count(settings.gap, settings.dt)?;
    if gap == 0 && settings.n_samples > 1 {
        return Err(invalid("gap", "must be at least one step"));
    }
    let mut prop = Propagator::new(spec.grid(), settings.dt, NonlinearMode::Fast)?;
    let mut w = w0.clone();
    let mut db = VorticityField::zeros(spec.grid());
    let mut t = 0usize;
    let mut advance = |n: usize, w: &mut VorticityField, t: &mut usize| -> Result<()> {
        for _ in 0..n {
            spec.sample_increment_into(settings.dt, rng, &mut db);
            prop.advance(w, Some(&db));
            *t += 1;
        }
        if w.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFiniteState {
                time: *t as f64 * settings.dt,
            })
        }
    };
    advance(burn, &mut w, &mut t)?;
    for j in 0..settings.n_samples {
        if j > 0 {
            advance(gap, &mut w, &mut t)?;
        }
        visit(&w);
    }
    Ok(())
}

/// States of one long trajectory from `w0` after `burn_in`, every `gap`;
/// the noise is stream `(seed, "stationary", stream)`.
pub fn stationary_sample(
    w0: &VorticityField,
    spec: &ForcingSpec,
    settings: StationarySettings,
    seed: u64,
    stream: u64,
) -> Result<Vec<VorticityField>> {
    let mut rng = stream_rng(seed, "stationary", stream);
    let mut out = Vec::with_capacity(settings.n_samples);
    stationary_run(w0, spec, settings, &mut rng, |w| out.push(w.clone()))?;
    Ok(out)
}

/// Mean of an observable over a stationary sample, with a batch-means error.
pub fn stationary_mean<F: Fn(&VorticityField) -> f64>(samples: &[VorticityField], observable: F, batches: usize) -> MeanEstimate {
    let xs: Vec<f64> = samples.iter().map(observable).collect();
    MeanEstimate::batch_means(&xs, batches)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationSeries {
    /// Lags in time units.
    pub lags: Vec<f64>,
    pub autocovariance: Vec<f64>,
    /// Block-bootstrap standard errors.
    pub se: Vec<f64>,
    /// Fit of `log C(lag)` over the lags where `C > 2 SE`; the decay rate is
    /// `-rate`.
    pub fit: Option<RateFit>,
}

impl CorrelationSeries {
    pub fn decay_rate(&self) -> Option<f64> {
        self.fit.map(|f| -f.rate)
    }
}

fn autocov(xs: &[f64], idx: &[usize], lag: usize) -> f64 {
    let m = mean(&idx.iter().map(|&i| xs[i]).collect::<Vec<_>>());
    let s: f64 = idx.iter().map(|&i| (xs[i] - m) * (xs[i + lag] - m)).sum();
    s / idx.len() as f64
}

/// Stationary autocovariance of `observable` at `lags` (multiples of
/// `settings.gap`), estimated from a single run of `settings.n_samples` samples.
pub fn correlation_decay<F: Fn(&VorticityField) -> f64>(
    w0: &VorticityField,
    spec: &ForcingSpec,
    settings: StationarySettings,
    observable: F,
    lags: &[usize],
    seed: u64,
) -> Result<CorrelationSeries> {
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    if settings.n_samples < max_lag + 8 {
        return Err(invalid("n_samples", "too short for the requested lags"));
    }
    let mut rng = stream_rng(seed, "correlation", 0);
    let mut xs = Vec::with_capacity(settings.n_samples);
    stationary_run(w0, spec, settings, &mut rng, |w| xs.push(observable(w)))?;
    let starts = settings.n_samples - max_lag;
    let all: Vec<usize> = (0..starts).collect();
    let cov: Vec<f64> = lags.iter().map(|&l| autocov(&xs, &all, l)).collect();
    let block = (starts as f64).sqrt().ceil() as usize;
    let mut boot = stream_rng(seed, "correlation-bootstrap", 0);
    let lag_t: Vec<f64> = lags.iter().map(|&l| l as f64 * settings.gap).collect();
    let mut reps = vec![Vec::with_capacity(BOOTSTRAP_RESAMPLES); lags.len()];
    let mut slopes = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    let mut boot_cov = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let idx = block_indices(starts, block, &mut boot);
        let c: Vec<f64> = lags.iter().map(|&l| autocov(&xs, &idx, l)).collect();
        for (r, v) in reps.iter_mut().zip(&c) {
            r.push(*v);
        }
        boot_cov.push(c);
    }
    let se: Vec<f64> = reps
        .iter()
        .map(|r| crate::stats::variance(r).sqrt())
        .collect();
    let keep: Vec<usize> = (0..lags.len()).filter(|&j| cov[j] > 2.0 * se[j]).collect();
    let fit = if keep.len() >= 2 {
        let x: Vec<f64> = keep.iter().map(|&j| lag_t[j]).collect();
        let y: Vec<f64> = keep.iter().map(|&j| cov[j].ln()).collect();
        fit_line(&x, &y).map(|f| {
            for c in &boot_cov {
                let y: Vec<f64> = keep.iter().map(|&j| c[j].max(f64::MIN_POSITIVE).ln()).collect();
                if let Some(b) = fit_line(&x, &y) {
                    slopes.push(b.slope);
                }
            }
            RateFit {
                rate: f.slope,
                ci: percentile_interval(slopes.clone(), 0.95),
                points: keep.len(),
            }
        })
    } else {
        None
    };
    Ok(CorrelationSeries {
        lags: lag_t,
        autocovariance: cov,
        se,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::uniform_spec;
    use crate::spectral::{sample_gaussian_field, SpectralGrid};

    #[test]
    fn identical_fields_stay_identical() {
        let g = SpectralGrid::new(4, 2).unwrap();
        let spec = uniform_spec(&g, 1.0).unwrap();
        let mut rng = stream_rng(3, "mixing-test", 0);
        let w = sample_gaussian_field(&g, 0.5, &mut rng);
        let rep = couple(&w, &w, &spec, 5.0, 0.01, 1).unwrap();
        assert!(rep.d_full.iter().all(|&d| d == 0.0));
        assert!(rep.fitted_rate.is_none());
    }

    #[test]
    fn coupled_distance_shrinks_and_splits_orthogonally() {
        let g = SpectralGrid::new(4, 2).unwrap();
        let spec = uniform_spec(&g, 1.0).unwrap();
        let mut rng = stream_rng(3, "mixing-test", 1);
        let a = sample_gaussian_field(&g, 0.5, &mut rng);
        let b = sample_gaussian_field(&g, 0.5, &mut rng);
        let rep = couple(&a, &b, &spec, 20.0, 0.01, 2).unwrap();
        assert!(rep.pythagoras_defect() < 1e-10);
        let fit = rep.fitted_rate.unwrap();
        assert!(fit.rate < 0.0 && fit.excludes_zero(), "{fit:?}");
    }

    #[test]
    fn empty_stationary_sample() {
        let g = SpectralGrid::new(4, 2).unwrap();
        let spec = uniform_spec(&g, 1.0).unwrap();
        let s = StationarySettings {
            dt: 0.01,
            burn_in: 1.0,
            gap: 0.5,
            n_samples: 0,
        };
        assert!(stationary_sample(&VorticityField::zeros(&g), &spec, s, 1, 0).unwrap().is_empty());
    }

    #[test]
    fn constant_observable_has_zero_autocovariance() {
        let g = SpectralGrid::new(4, 2).unwrap();
        let spec = uniform_spec(&g, 1.0).unwrap();
        let s = StationarySettings {
            dt: 0.01,
            burn_in: 0.0,
            gap: 0.1,
            n_samples: 50,
        };
        let c = correlation_decay(&VorticityField::zeros(&g), &spec, s, |_| 2.5, &[0, 1, 2], 4).unwrap();
        assert!(c.autocovariance.iter().all(|&v| v == 0.0));
        assert!(c.fit.is_none());
    }
}
