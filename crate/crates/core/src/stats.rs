//! Running moments and small statistical helpers.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sum-based accumulator; merging in a fixed order is deterministic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    pub fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    pub fn from_iter<I: IntoIterator<Item = f64>>(xs: I) -> Moments {
        let mut m = Moments::default();
        for x in xs {
            m.push(x);
        }
        m
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    /// Unbiased sample variance.
    pub fn var(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.var() / self.n as f64).sqrt()
        }
    }
}

/// Normalized histogram of nonnegative integer samples.
pub fn empirical_pmf(samples: &[u64], support: usize) -> Vec<f64> {
    let mut counts = vec![0u64; support];
    for &s in samples {
        let i = (s as usize).min(support - 1);
        counts[i] += 1;
    }
    let n = samples.len().max(1) as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(b.len());
    let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    0.5 * (0..n).map(|i| (get(a, i) - get(b, i)).abs()).sum::<f64>()
}

/// Chi-square test of homogeneity for two samples of counts.
///
/// Values are binned so each pooled bin has at least `min_expected` expected
/// observations per sample; the last bin absorbs the tail. Returns
/// `(statistic, degrees_of_freedom, p_value)`.
pub fn two_sample_chi2(x: &[u64], y: &[u64], min_expected: f64) -> (f64, usize, f64) {
    let max = x.iter().chain(y).copied().max().unwrap_or(0) as usize;
    let mut cx = vec![0f64; max + 1];
    let mut cy = vec![0f64; max + 1];
    for &v in x {
        cx[v as usize] += 1.0;
    }
    for &v in y {
        cy[v as usize] += 1.0;
    }
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let n = nx + ny;
    // Greedy left-to-right binning.
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut ax, mut ay) = (0.0, 0.0);
    for v in 0..=max {
        ax += cx[v];
        ay += cy[v];
        let pooled = ax + ay;
        if pooled * nx.min(ny) / n >= min_expected {
            bins.push((ax, ay));
            ax = 0.0;
            ay = 0.0;
        }
    }
    if ax + ay > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += ax;
                last.1 += ay;
            }
            None => bins.push((ax, ay)),
        }
    }
    if bins.len() < 2 {
        return (0.0, 0, 1.0);
    }
    let mut stat = 0.0;
    for &(a, b) in &bins {
        let tot = a + b;
        let ea = tot * nx / n;
        let eb = tot * ny / n;
        stat += (a - ea).powi(2) / ea + (b - eb).powi(2) / eb;
    }
    let dof = bins.len() - 1;
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    (stat, dof, 1.0 - dist.cdf(stat))
}
