//! Mergeable Monte Carlo accumulators and simple test statistics.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Count, sum and sum of squares of a scalar stream.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl Moments {
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn merge(mut self, other: Moments) -> Moments {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    pub fn variance(&self) -> f64 {
        let n = self.count as f64;
        if self.count < 2 {
            return f64::NAN;
        }
        ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0)
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }

    pub fn estimate(&self) -> Estimate {
        Estimate {
            value: self.mean(),
            se: self.std_error(),
        }
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn z_score(&self, target: f64) -> f64 {
        if self.se == 0.0 {
            if self.value == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.value - target) / self.se
        }
    }

    pub fn within(&self, target: f64, n_se: f64) -> bool {
        self.z_score(target).abs() <= n_se
    }
}

/// Second moments `E[v_i v_j]` of a zero-mean vector stream, with per-entry
/// standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMoments {
    dim: usize,
    entries: Vec<Moments>,
}

impl ProductMoments {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![Moments::default(); dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn push(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                self.entries[i * self.dim + j].push(v[i] * v[j]);
            }
        }
    }

    pub fn merge(mut self, other: ProductMoments) -> ProductMoments {
        for (a, b) in self.entries.iter_mut().zip(other.entries) {
            *a = a.merge(b);
        }
        self
    }

    pub fn get(&self, i: usize, j: usize) -> Estimate {
        self.entries[i * self.dim + j].estimate()
    }

    pub fn count(&self) -> u64 {
        self.entries.first().map_or(0, |m| m.count)
    }
}

/// Per-entry comparison of estimates against analytic targets.
#[derive(Debug, Clone, Serialize)]
pub struct ZSummary {
    pub entries: usize,
    pub within: usize,
    pub max_abs_z: f64,
}

impl ZSummary {
    pub fn from_pairs<I: IntoIterator<Item = (Estimate, f64)>>(pairs: I, n_se: f64) -> Self {
        let mut s = ZSummary {
            entries: 0,
            within: 0,
            max_abs_z: 0.0,
        };
        for (est, target) in pairs {
            let z = est.z_score(target).abs();
            s.entries += 1;
            if z <= n_se {
                s.within += 1;
            }
            s.max_abs_z = s.max_abs_z.max(z);
        }
        s
    }

    pub fn fraction_within(&self) -> f64 {
        self.within as f64 / self.entries.max(1) as f64
    }
}

/// Sample covariance of paired draws, with the standard error of its
/// influence terms `(x − x̄)(y − ȳ)`.
pub fn covariance_estimate(pairs: &[(f64, f64)]) -> Estimate {
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mut m = Moments::default();
    for (x, y) in pairs {
        m.push((x - mx) * (y - my));
    }
    m.estimate()
}

/// Pearson chi-square statistic of observed counts against expected
/// probabilities, pooling adjacent cells until each expected count reaches
/// `min_expected`. Returns `(statistic, degrees_of_freedom)`.
pub fn chi_square(observed: &[u64], probs: &[f64], min_expected: f64) -> (f64, usize) {
    let total: u64 = observed.iter().sum();
    let total = total as f64;
    let mut stat = 0.0;
    let mut cells = 0usize;
    let (mut obs_acc, mut exp_acc) = (0.0, 0.0);
    for (o, p) in observed.iter().zip(probs) {
        obs_acc += *o as f64;
        exp_acc += p * total;
        if exp_acc >= min_expected {
            stat += (obs_acc - exp_acc).powi(2) / exp_acc;
            cells += 1;
            obs_acc = 0.0;
            exp_acc = 0.0;
        }
    }
    if exp_acc > 0.0 || obs_acc > 0.0 {
        // leftover tail cell
        stat += (obs_acc - exp_acc).powi(2) / exp_acc.max(f64::MIN_POSITIVE);
        cells += 1;
    }
    (stat, cells.saturating_sub(1))
}

/// Upper critical value of the chi-square distribution.
pub fn chi_square_critical(dof: usize, level: f64) -> f64 {
    ChiSquared::new(dof.max(1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(level)
}
