//! Krawtchouk polynomials `Q_k(w; N, 1/2)` normalized so that `Q_k(0) = 1`,
//! and probabilists' Hermite polynomials `H_k(t)`.
//!
//! Internally the Krawtchouk table stores the integers
//! `K_k(w) = C(N,k) Q_k(w) = Σ_j (−1)^j C(w,j) C(N−w,k−j)`,
//! the coefficient of `φ^k` in `(1−φ)^w (1+φ)^{N−w}`.

use crate::bits::{binomial, binomial_i128};
use crate::error::{ensure, Result};
use num_rational::Ratio;

/// Largest dimension with exact integer Krawtchouk values.
pub const MAX_EXACT_N: usize = 64;

/// `K_k(w)` for all `0 ≤ k, w ≤ N`, exact.
#[derive(Debug, Clone, PartialEq)]
pub struct KrawtchoukBasis {
    n: usize,
    table: Vec<i128>,
}

impl KrawtchoukBasis {
    pub fn new(n: usize) -> Result<Self> {
        ensure!(
            n <= MAX_EXACT_N,
            Resource,
            "exact Krawtchouk table limited to N <= {MAX_EXACT_N}, got {n}"
        );
        let m = n + 1;
        let mut table = vec![0i128; m * m];
        // Expand (1−φ)^w (1+φ)^{N−w} column by column.
        for w in 0..=n {
            let mut poly = vec![0i128; m];
            poly[0] = 1;
            let mut deg = 0;
            for factor in 0..n {
                let s: i128 = if factor < w { -1 } else { 1 };
                deg += 1;
                for j in (1..=deg).rev() {
                    poly[j] += s * poly[j - 1];
                }
            }
            for k in 0..=n {
                table[k * m + w] = poly[k];
            }
        }
        Ok(Self { n, table })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `C(N,k) Q_k(w)`.
    pub fn scaled(&self, k: usize, w: usize) -> i128 {
        self.table[k * (self.n + 1) + w]
    }

    pub fn exact(&self, k: usize, w: usize) -> Ratio<i128> {
        let c = binomial_i128(self.n, k).expect("C(N,k) fits for N <= 64");
        Ratio::new(self.scaled(k, w), c)
    }

    pub fn value(&self, k: usize, w: usize) -> f64 {
        self.scaled(k, w) as f64 / binomial(self.n, k)
    }

    /// `sqrt(C(N,k)) Q_k(w)`.
    pub fn normalized(&self, k: usize, w: usize) -> f64 {
        self.scaled(k, w) as f64 / binomial(self.n, k).sqrt()
    }
}

fn check_args(k: usize, w: usize, n: usize) -> Result<()> {
    ensure!(k <= n, Domain, "degree {k} exceeds N = {n}");
    ensure!(w <= n, Domain, "argument {w} exceeds N = {n}");
    Ok(())
}

/// Exact `K_k(w) = C(N,k) Q_k(w; N, 1/2)` (N ≤ 64).
pub fn krawtchouk_scaled(k: usize, w: usize, n: usize) -> Result<i128> {
    check_args(k, w, n)?;
    ensure!(
        n <= MAX_EXACT_N,
        Resource,
        "exact Krawtchouk values limited to N <= {MAX_EXACT_N}"
    );
    let mut sum: i128 = 0;
    for j in 0..=k.min(w) {
        if k - j > n - w {
            continue;
        }
        let term = binomial_i128(w, j).unwrap() * binomial_i128(n - w, k - j).unwrap();
        if j % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    Ok(sum)
}

/// Exact `Q_k(w; N, 1/2)` as a rational number (N ≤ 64).
pub fn krawtchouk_exact(k: usize, w: usize, n: usize) -> Result<Ratio<i128>> {
    let scaled = krawtchouk_scaled(k, w, n)?;
    Ok(Ratio::new(scaled, binomial_i128(n, k).unwrap()))
}

/// `Q_k(w; N, 1/2)` in floating point. Exact (then rounded) for N ≤ 64,
/// the normalized three-term recurrence beyond.
pub fn krawtchouk_eval(k: usize, w: usize, n: usize) -> Result<f64> {
    check_args(k, w, n)?;
    if n <= MAX_EXACT_N {
        let r = krawtchouk_exact(k, w, n)?;
        return Ok(*r.numer() as f64 / *r.denom() as f64);
    }
    let q = krawtchouk_normalized_column(w, n)?;
    Ok(q[k] / (0.5 * crate::bits::ln_binomial(n, k)).exp())
}

/// `q_k = sqrt(C(N,k)) Q_k(w)` for `k = 0..=N` at fixed `w`.
///
/// Uses `sqrt((k+1)(N−k)) q_{k+1} = (N−2w) q_k − sqrt(k(N−k+1)) q_{k−1}`,
/// which keeps the values O(2^{N/2}) instead of O(C(N,k)). The recurrence
/// runs forward only up to `N/2`, where it follows the growing solution;
/// the upper half comes from `q_{N−k}(w) = (−1)^w q_k(w)`.
pub fn krawtchouk_normalized_column(w: usize, n: usize) -> Result<Vec<f64>> {
    ensure!(w <= n, Domain, "argument {w} exceeds N = {n}");
    ensure!(n >= 1, Domain, "dimension must be positive");
    let nf = n as f64;
    let x = nf - 2.0 * w as f64;
    let half = n / 2;
    let mut q = vec![0.0; n + 1];
    q[0] = 1.0;
    q[1] = x / nf.sqrt();
    for k in 1..half {
        let kf = k as f64;
        let a = ((kf + 1.0) * (nf - kf)).sqrt();
        let b = (kf * (nf - kf + 1.0)).sqrt();
        q[k + 1] = (x * q[k] - b * q[k - 1]) / a;
    }
    let sign = if w % 2 == 1 { -1.0 } else { 1.0 };
    for k in (half + 1)..=n {
        q[k] = sign * q[n - k];
    }
    Ok(q)
}

/// `H_0(t), …, H_K(t)` by `H_{k+1} = t H_k − k H_{k−1}`.
pub fn hermite_prefix(order: usize, t: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(order + 1);
    h.push(1.0);
    if order >= 1 {
        h.push(t);
    }
    for k in 1..order {
        let next = t * h[k] - k as f64 * h[k - 1];
        h.push(next);
    }
    h
}

/// `H_k(t) / sqrt(k!)` for `k = 0..=K`, stable for large `k`.
pub fn hermite_normalized_prefix(order: usize, t: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(order + 1);
    h.push(1.0);
    if order >= 1 {
        h.push(t);
    }
    for k in 1..order {
        let kf = k as f64;
        let next = (t * h[k] - kf.sqrt() * h[k - 1]) / (kf + 1.0).sqrt();
        h.push(next);
    }
    h
}

pub fn hermite_eval(k: usize, t: f64) -> f64 {
    hermite_prefix(k, t)[k]
}

/// Evaluator carrying a truncation order, returning whole prefixes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermiteEvaluator {
    pub order: usize,
}

impl HermiteEvaluator {
    pub fn new(order: usize) -> Self {
        Self { order }
    }

    pub fn prefix(&self, t: f64) -> Vec<f64> {
        hermite_prefix(self.order, t)
    }

    pub fn normalized(&self, t: f64) -> Vec<f64> {
        hermite_normalized_prefix(self.order, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::{character, full_mask, submasks_of_size, weight};

    #[test]
    fn spec_values() {
        assert_eq!(krawtchouk_exact(3, 0, 7).unwrap(), Ratio::from_integer(1));
        assert_eq!(krawtchouk_exact(1, 1, 4).unwrap(), Ratio::new(1, 2));
        assert_eq!(krawtchouk_exact(2, 1, 4).unwrap(), Ratio::from_integer(0));
        assert_eq!(krawtchouk_exact(1, 2, 4).unwrap(), Ratio::from_integer(0));
        assert!(krawtchouk_exact(5, 0, 4).is_err());
        assert_eq!(hermite_eval(0, 3.3), 1.0);
        assert_eq!(hermite_eval(2, 0.0), -1.0);
        assert_eq!(hermite_eval(3, 1.0), -2.0);
    }

    #[test]
    fn table_matches_direct_sum() {
        for n in [1, 5, 13, 40, 64] {
            let b = KrawtchoukBasis::new(n).unwrap();
            for k in 0..=n {
                for w in (0..=n).step_by(1 + n / 9) {
                    assert_eq!(b.exact(k, w), krawtchouk_exact(k, w, n).unwrap());
                }
            }
        }
    }

    #[test]
    fn exact_orthogonality_and_duality() {
        for n in 1..=12usize {
            let b = KrawtchoukBasis::new(n).unwrap();
            let two_n = Ratio::from_integer(1i128 << n);
            for j in 0..=n {
                for k in 0..=n {
                    assert_eq!(b.exact(j, k), b.exact(k, j));
                    let mut s = Ratio::from_integer(0i128);
                    for w in 0..=n {
                        s += Ratio::from_integer(binomial_i128(n, w).unwrap())
                            * b.exact(j, w)
                            * b.exact(k, w);
                    }
                    s /= two_n;
                    let want = if j == k {
                        Ratio::new(1, binomial_i128(n, k).unwrap())
                    } else {
                        Ratio::from_integer(0)
                    };
                    assert_eq!(s, want, "N={n} j={j} k={k}");
                }
            }
        }
    }

    #[test]
    fn spin_identity() {
        for n in 1..=10usize {
            let b = KrawtchoukBasis::new(n).unwrap();
            for k in 0..=n {
                for x in 0..(1u64 << n) {
                    let s: f64 = submasks_of_size(full_mask(n), k)
                        .map(|a| character(x, a))
                        .sum();
                    assert_eq!(s as i128, b.scaled(k, weight(x)));
                }
            }
        }
    }

    #[test]
    fn normalized_recurrence_matches_exact() {
        for n in [1, 2, 3, 20, 63, 64] {
            let b = KrawtchoukBasis::new(n).unwrap();
            for w in 0..=n {
                let q = krawtchouk_normalized_column(w, n).unwrap();
                // Σ_k q_k² = 2^N / C(N,w)
                let norm = (2f64.powi(n as i32) / binomial(n, w)).sqrt();
                for (k, qk) in q.iter().enumerate() {
                    let want = b.normalized(k, w);
                    assert!((qk - want).abs() <= 1e-14 * norm, "N={n} k={k} w={w}");
                }
            }
        }
    }

    #[test]
    fn large_n_float_path_is_consistent() {
        // Q_k(0) = 1 and duality on the float path
        let n = 100;
        for k in [0, 1, 7, 50] {
            assert!((krawtchouk_eval(k, 0, n).unwrap() - 1.0).abs() < 1e-9);
        }
        let a = krawtchouk_eval(3, 48, n).unwrap();
        let b = krawtchouk_eval(48, 3, n).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn hermite_matches_generating_function() {
        // coefficients of exp(wt − w²/2) = Σ H_k(t) w^k / k!
        for &t in &[-1.7, 0.0, 0.4, 2.5] {
            let order = 12;
            // series of exp(wt) times exp(−w²/2), truncated
            let mut a = vec![0.0; order + 1];
            let mut b = vec![0.0; order + 1];
            let mut fact = 1.0;
            for k in 0..=order {
                if k > 0 {
                    fact *= k as f64;
                }
                a[k] = f64::powi(t, k as i32) / fact;
                if k % 2 == 0 {
                    let m = k / 2;
                    let mf: f64 = (1..=m).map(|i| i as f64).product();
                    b[k] = (-0.5f64).powi(m as i32) / mf;
                }
            }
            let h = hermite_prefix(order, t);
            let mut fact = 1.0;
            for k in 0..=order {
                if k > 0 {
                    fact *= k as f64;
                }
                let c: f64 = (0..=k).map(|j| a[j] * b[k - j]).sum();
                let want = c * fact;
                assert!(
                    (h[k] - want).abs() <= 1e-12 * want.abs().max(1.0),
                    "k={k} t={t}"
                );
            }
        }
    }

    #[test]
    fn normalized_hermite_matches_plain() {
        let h = hermite_prefix(30, 1.3);
        let g = hermite_normalized_prefix(30, 1.3);
        let mut lf = 0.0;
        for k in 0..=30 {
            if k > 0 {
                lf += (k as f64).ln();
            }
            assert!((h[k] / (0.5 * lf).exp() - g[k]).abs() < 1e-10 * (1.0 + g[k].abs()));
        }
    }
}
