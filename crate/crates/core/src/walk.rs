//! The walk `X_{t+1} = X_t XOR Z_t`, its t-step and killed kernels, and a
//! dense resolvent oracle.

use crate::bits::{
    character, check_enumeration_dim, check_in_cube, full_mask, ln_binomial, weight, VertexIndex,
    MAX_ENUMERATION_BITS,
};
use crate::error::{ensure, Error, Result};
use crate::increments::{
    check_alpha, killing_ratio, rho_subset, rho_table, sample_z_unchecked, z_law, IncrementModel,
};
use crate::polynomials::{krawtchouk_normalized_column, MAX_EXACT_N};
use crate::wht::fwht;
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Largest dimension for dense `2^N × 2^N` matrices.
pub const MAX_ORACLE_BITS: usize = 12;

/// Dimension, increment law and killing parameter of a killed walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenSpec {
    pub n: usize,
    pub model: IncrementModel,
    pub alpha: f64,
}

impl GreenSpec {
    pub fn new(n: usize, model: IncrementModel, alpha: f64) -> Result<Self> {
        let spec = Self { n, model, alpha };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate_for(self.n)?;
        ensure!(
            !self.model.is_limit(),
            Unsupported,
            "a finite walk needs a non-limit increment model, got {}",
            self.model.name()
        );
        check_alpha(self.alpha)
    }

    /// `c = α/(1−α)`.
    pub fn c(&self) -> f64 {
        killing_ratio(self.alpha)
    }

    /// Spectral weight `(1 + c(1 − ρ))^{-1}`.
    pub fn weight_of(&self, rho: f64) -> f64 {
        1.0 / (1.0 + self.c() * (1.0 - rho))
    }

    /// Weights `w_k` by subset size (exchangeable models).
    pub fn weights_by_order(&self) -> Result<Vec<f64>> {
        ensure!(
            self.model.is_exchangeable(),
            Unsupported,
            "{} is not exchangeable",
            self.model.name()
        );
        Ok(rho_table(&self.model, self.n)?
            .into_iter()
            .map(|r| self.weight_of(r))
            .collect())
    }

    /// Weights `w_A` for every subset `A ⊆ [N]`, indexed by bitmask.
    pub fn weights_by_subset(&self) -> Result<Vec<f64>> {
        check_enumeration_dim(self.n, MAX_ENUMERATION_BITS)?;
        let size = 1usize << self.n;
        if self.model.is_exchangeable() {
            let wk = self.weights_by_order()?;
            Ok((0..size as u64).map(|a| wk[weight(a)]).collect())
        } else {
            (0..size as u64)
                .map(|a| Ok(self.weight_of(rho_subset(&self.model, a, self.n)?)))
                .collect()
        }
    }
}

/// One step of the walk.
pub fn step<R: Rng + ?Sized>(
    x: VertexIndex,
    model: &IncrementModel,
    n: usize,
    rng: &mut R,
) -> Result<VertexIndex> {
    Ok(x ^ crate::increments::sample_z(model, n, rng)?)
}

/// `2^{-N} Σ_k C(N,k) Q_k(d) f_k` for `d = ‖x ⊕ y‖`, with the binomial
/// weight folded into the normalized Krawtchouk values.
fn krawtchouk_sum(n: usize, d: usize, f: &[f64]) -> Result<f64> {
    if n <= MAX_EXACT_N {
        let scale = 0.5f64.powi(n as i32);
        let mut s = 0.0;
        for (k, fk) in f.iter().enumerate() {
            s += fk * crate::polynomials::krawtchouk_scaled(k, d, n)? as f64;
        }
        return Ok(s * scale);
    }
    let q = krawtchouk_normalized_column(d, n)?;
    let ln2n = n as f64 * std::f64::consts::LN_2;
    Ok(f.iter()
        .zip(&q)
        .enumerate()
        .map(|(k, (fk, qk))| fk * qk * (0.5 * ln_binomial(n, k) - ln2n).exp())
        .sum())
}

/// `P_t(y | x)`: the probability of moving from `x` to `y` in `t` steps.
pub fn t_step_prob(
    model: &IncrementModel,
    n: usize,
    t: u32,
    x: VertexIndex,
    y: VertexIndex,
) -> Result<f64> {
    model.validate_for(n)?;
    check_in_cube(x, n)?;
    check_in_cube(y, n)?;
    let d = x ^ y;
    if model.is_exchangeable() {
        let rho = rho_table(model, n)?;
        let f: Vec<f64> = rho.iter().map(|r| r.powi(t as i32)).collect();
        return krawtchouk_sum(n, weight(d), &f);
    }
    check_enumeration_dim(n, MAX_ENUMERATION_BITS)?;
    let mut s = 0.0;
    for a in 0..=full_mask(n) {
        s += rho_subset(model, a, n)?.powi(t as i32) * character(d, a);
    }
    Ok(s * 0.5f64.powi(n as i32))
}

/// `(1−α) G(x, y; α)`.
pub fn green_spectral(spec: &GreenSpec, x: VertexIndex, y: VertexIndex) -> Result<f64> {
    spec.validate()?;
    check_in_cube(x, spec.n)?;
    check_in_cube(y, spec.n)?;
    let d = x ^ y;
    if spec.model.is_exchangeable() {
        return krawtchouk_sum(spec.n, weight(d), &spec.weights_by_order()?);
    }
    check_enumeration_dim(spec.n, MAX_ENUMERATION_BITS)?;
    let mut s = 0.0;
    for a in 0..=full_mask(spec.n) {
        s += spec.weight_of(rho_subset(&spec.model, a, spec.n)?) * character(d, a);
    }
    Ok(s * 0.5f64.powi(spec.n as i32))
}

/// `(1−α) G(x ⊕ d, x)` for every difference `d`, i.e. one Green row,
/// by a single Walsh–Hadamard transform of the weights.
pub fn green_kernel(spec: &GreenSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut w = spec.weights_by_subset()?;
    fwht(&mut w);
    let scale = 0.5f64.powi(spec.n as i32);
    w.iter_mut().for_each(|v| *v *= scale);
    Ok(w)
}

/// The row `(1−α) G(x, ·; α)`.
pub fn green_row(spec: &GreenSpec, x: VertexIndex) -> Result<Vec<f64>> {
    check_in_cube(x, spec.n)?;
    let k = green_kernel(spec)?;
    Ok((0..k.len() as u64).map(|y| k[(x ^ y) as usize]).collect())
}

/// Dense `2^N × 2^N` Green matrix from the spectral kernel.
pub fn green_matrix_spectral(spec: &GreenSpec) -> Result<DMatrix<f64>> {
    check_enumeration_dim(spec.n, MAX_ORACLE_BITS)?;
    let k = green_kernel(spec)?;
    let size = k.len();
    Ok(DMatrix::from_fn(size, size, |x, y| k[x ^ y]))
}

/// Dense transition matrix `P(y | x) = P(Z = x ⊕ y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub n: usize,
    pub matrix: DMatrix<f64>,
}

impl TransitionMatrix {
    /// Built from the enumerated law of `Z`, independent of the spectral data.
    pub fn from_model(model: &IncrementModel, n: usize) -> Result<Self> {
        check_enumeration_dim(n, MAX_ORACLE_BITS)?;
        let law = z_law(model, n)?;
        let size = 1usize << n;
        let mut matrix = DMatrix::zeros(size, size);
        for x in 0..size {
            for &(z, p) in &law {
                matrix[(x, x ^ z as usize)] += p;
            }
        }
        Ok(Self { n, matrix })
    }

    pub fn max_row_defect(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_column_defect(&self) -> f64 {
        self.matrix
            .column_iter()
            .map(|c| (c.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// `(1−α)(I − αP)^{-1}` by a dense LU solve.
pub fn green_matrix_oracle(spec: &GreenSpec) -> Result<DMatrix<f64>> {
    spec.validate()?;
    ensure!(
        spec.n <= MAX_ORACLE_BITS,
        Resource,
        "dense oracle limited to N <= {MAX_ORACLE_BITS}, got {}",
        spec.n
    );
    let p = TransitionMatrix::from_model(&spec.model, spec.n)?;
    let size = p.matrix.nrows();
    let a = DMatrix::identity(size, size) - p.matrix * spec.alpha;
    let rhs = DMatrix::identity(size, size) * (1.0 - spec.alpha);
    a.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("I − αP is singular".into()))
}

/// `(1−α) G_H(u, v; α)`: killed mass on the level `‖y‖ = v` from a start at
/// level `u`.
///
/// Above N = 64 the sum runs over normalized Krawtchouk values and is
/// accurate for levels within a few `sqrt(N)` of `N/2`; far from the middle
/// it cancels catastrophically.
pub fn green_hamming(spec: &GreenSpec, u: usize, v: usize) -> Result<f64> {
    spec.validate()?;
    ensure!(
        spec.model.is_exchangeable(),
        Unsupported,
        "{} is not exchangeable",
        spec.model.name()
    );
    let n = spec.n;
    ensure!(u <= n && v <= n, Domain, "levels must lie in 0..={n}");
    let w = spec.weights_by_order()?;
    let qu = krawtchouk_normalized_column(u, n)?;
    let qv = krawtchouk_normalized_column(v, n)?;
    let s: f64 = (0..=n).map(|k| w[k] * qu[k] * qv[k]).sum();
    Ok(s * (ln_binomial(n, v) - n as f64 * std::f64::consts::LN_2).exp())
}

/// Draws `T ~ Geometric` with `P(T = t) = (1−α) α^t` by CDF inversion.
pub fn sample_geometric<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> u64 {
    if alpha <= 0.0 {
        return 0;
    }
    // U in (0, 1]; P(T >= t) = α^t
    let u = 1.0 - rng.random::<f64>();
    (u.ln() / alpha.ln()).floor() as u64
}

/// Runs the walk for a geometric number of steps from `x0`.
pub fn sample_killed_endpoint<R: Rng + ?Sized>(
    spec: &GreenSpec,
    x0: VertexIndex,
    rng: &mut R,
) -> Result<VertexIndex> {
    spec.validate()?;
    check_in_cube(x0, spec.n)?;
    let t = sample_geometric(spec.alpha, rng);
    let mut x = x0;
    for _ in 0..t {
        x ^= sample_z_unchecked(&spec.model, spec.n, rng)?;
    }
    Ok(x)
}

/// Probability that `N` coupons are first all collected at draw `t`:
/// `Stirling2(t−1, N−1) N! / N^t`, via the alternating sum
/// `Σ_j (−1)^j C(N−1, j) ((N−1−j)/N)^{t−1}`.
pub fn coupon_collector_prob(t: u64, n: usize) -> Result<f64> {
    ensure!(t >= 1, Domain, "t must be at least 1");
    ensure!(n >= 1, Domain, "N must be at least 1");
    let nf = n as f64;
    let mut s = 0.0;
    for j in 0..n {
        let c = crate::bits::binomial(n - 1, j);
        let term = c * ((n - 1 - j) as f64 / nf).powf((t - 1) as f64);
        s += if j % 2 == 0 { term } else { -term };
    }
    Ok(s.max(0.0))
}

/// Exact aggregation check helper: `Σ_{‖y‖=v} (1−α)G(x0, y)` for a vertex `x0`
/// by enumeration.
pub fn green_level_sum(spec: &GreenSpec, x0: VertexIndex, v: usize) -> Result<f64> {
    let row = green_row(spec, x0)?;
    Ok(row
        .iter()
        .enumerate()
        .filter(|(y, _)| weight(*y as u64) == v)
        .map(|(_, g)| g)
        .sum())
}
