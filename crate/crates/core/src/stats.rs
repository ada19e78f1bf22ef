//! Small statistics toolkit shared by the verification routines.

use rand::Rng;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn compensated_sum(xs: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Pairwise (tree) summation in index order; the result depends only on the
/// input order, never on how the inputs were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&sq) / (n - 1) as f64
}

/// Mean and its standard error for independent samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let se = if n > 1 {
            (variance(xs) / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Self {
            mean: mean(xs),
            se,
            n,
        }
    }

    /// Batch-means estimate for a correlated series: the series is cut into
    /// `batches` contiguous blocks and the block means are treated as independent.
    pub fn batch_means(xs: &[f64], batches: usize) -> Self {
        let batches = batches.max(2).min(xs.len().max(2));
        let size = xs.len() / batches;
        if size == 0 {
            return Self::from_samples(xs);
        }
        let means: Vec<f64> = (0..batches)
            .map(|b| mean(&xs[b * size..(b + 1) * size]))
            .collect();
        let est = Self::from_samples(&means);
        Self {
            mean: mean(xs),
            se: est.se,
            n: xs.len(),
        }
    }

    /// |a - b| measured in combined standard errors.
    pub fn z_distance(&self, other: &Self) -> f64 {
        (self.mean - other.mean).abs() / (self.se * self.se + other.se * other.se).sqrt()
    }
}

/// Ordinary least squares fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return None;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Percentile of an already sorted slice (linear interpolation).
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Two-sided percentile interval of a set of bootstrap replicates.
pub fn percentile_interval(mut reps: Vec<f64>, level: f64) -> (f64, f64) {
    reps.retain(|x| x.is_finite());
    reps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let alpha = (1.0 - level) / 2.0;
    (
        percentile_sorted(&reps, alpha),
        percentile_sorted(&reps, 1.0 - alpha),
    )
}

/// Nonparametric bootstrap of a statistic over i.i.d. samples.
pub fn bootstrap<R: Rng + ?Sized, F: Fn(&[f64]) -> f64>(
    xs: &[f64],
    resamples: usize,
    rng: &mut R,
    stat: F,
) -> Vec<f64> {
    let n = xs.len();
    let mut buf = vec![0.0; n];
    (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = xs[rng.random_range(0..n)];
            }
            stat(&buf)
        })
        .collect()
}

/// Moving-block bootstrap index set of length `n` built from blocks of
/// `block` consecutive indices.
pub fn block_indices<R: Rng>(n: usize, block: usize, rng: &mut R) -> Vec<usize> {
    let block = block.clamp(1, n.max(1));
    let mut idx = Vec::with_capacity(n);
    while idx.len() < n {
        let start = rng.random_range(0..=n - block);
        for j in start..start + block {
            if idx.len() == n {
                break;
            }
            idx.push(j);
        }
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut xs = vec![1.0e16];
        xs.extend(std::iter::repeat(1.0).take(1000));
        xs.push(-1.0e16);
        assert_eq!(compensated_sum(&xs), 1000.0);
    }

    #[test]
    fn line_fit_exact() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!((f.intercept - 2.0).abs() < 1e-14);
    }

    #[test]
    fn batch_means_of_iid_close_to_naive() {
        let mut rng = stream_rng(1, "stats-test", 0);
        let xs: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
        let a = MeanEstimate::from_samples(&xs);
        let b = MeanEstimate::batch_means(&xs, 40);
        assert!((a.se / b.se - 1.0).abs() < 0.5);
    }

    #[test]
    fn block_indices_cover_length() {
        let mut rng = stream_rng(1, "stats-test", 1);
        let idx = block_indices(103, 10, &mut rng);
        assert_eq!(idx.len(), 103);
        assert!(idx.iter().all(|&i| i < 103));
    }
}
