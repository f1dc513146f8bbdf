//! The Gaussian free field `(g_x)` with covariance `(1−α)G`, built from one
//! shared family of independent normals `(g_A)` indexed by subsets.

use crate::bits::{
    binomial, character, check_enumeration_dim, check_in_cube, full_mask, ln_binomial, submasks,
    submasks_of_size, weight, VertexIndex, MAX_ENUMERATION_BITS,
};
use crate::error::{ensure, Error, Result};
use crate::increments::IncrementModel;
use crate::walk::{green_matrix_oracle, green_spectral, GreenSpec, TransitionMatrix};
use crate::wht::fwht;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

/// Cap on the number of points handed to the Cholesky sampler.
pub const MAX_CHOLESKY_POINTS: usize = 4096;

/// I.i.d. standard normals `g_A`, one per subset `A ⊆ [N]`, indexed by
/// bitmask. Every coupled construction takes one of these as input.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralNoise {
    n: usize,
    values: Vec<f64>,
}

impl SpectralNoise {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        check_enumeration_dim(n, MAX_ENUMERATION_BITS)?;
        ensure!(
            values.len() == 1usize << n,
            Domain,
            "noise for N = {n} needs {} values, got {}",
            1usize << n,
            values.len()
        );
        Ok(Self { n, values })
    }

    pub fn sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        check_enumeration_dim(n, MAX_ENUMERATION_BITS)?;
        let values = (0..1usize << n)
            .map(|_| StandardNormal.sample(rng))
            .collect();
        Ok(Self { n, values })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(n, vec![0.0; 1usize << n])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, a: VertexIndex) -> f64 {
        self.values[a as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The same noise with `g_∅` set to zero.
    pub fn without_empty(&self) -> Self {
        let mut values = self.values.clone();
        values[0] = 0.0;
        Self { n: self.n, values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Spectral,
    Naive,
    Centered,
    Cholesky { regularized: bool },
    KSpin,
}

/// Field values on the whole cube (`points == None`, indexed by vertex) or
/// on a listed set of points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSample {
    pub n: usize,
    pub points: Option<Vec<VertexIndex>>,
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl FieldSample {
    pub fn is_full(&self) -> bool {
        self.points.is_none()
    }

    /// Value at vertex `x` of a full-cube sample.
    pub fn at(&self, x: VertexIndex) -> f64 {
        debug_assert!(self.is_full());
        self.values[x as usize]
    }
}

fn spec_for_field(spec: &GreenSpec, noise: &SpectralNoise) -> Result<()> {
    spec.validate()?;
    ensure!(
        noise.dim() == spec.n,
        Domain,
        "noise dimension {} does not match N = {}",
        noise.dim(),
        spec.n
    );
    Ok(())
}

/// Coefficient of `g_A` in `g_x`, for all `A`:
/// `2^{-N/2} (1 + c(1−ρ_A))^{-1/2} Π_{j∈A} (−1)^{x[j]}`.
pub fn field_coefficients(spec: &GreenSpec, x: VertexIndex) -> Result<Vec<f64>> {
    check_in_cube(x, spec.n)?;
    let scale = 0.5f64.powf(spec.n as f64 / 2.0);
    Ok(spec
        .weights_by_subset()?
        .iter()
        .enumerate()
        .map(|(a, w)| scale * w.sqrt() * character(x, a as u64))
        .collect())
}

/// `g_x = 2^{-N/2} Σ_A (1 + c(1−ρ_A))^{-1/2} Π_{j∈A}(−1)^{x[j]} g_A` for all
/// `x` at once, by one fast Walsh–Hadamard transform.
pub fn sample_field_spectral(spec: &GreenSpec, noise: &SpectralNoise) -> Result<FieldSample> {
    spec_for_field(spec, noise)?;
    let mut v = spec.weights_by_subset()?;
    for (vi, g) in v.iter_mut().zip(noise.values()) {
        *vi = vi.sqrt() * g;
    }
    fwht(&mut v);
    let scale = 0.5f64.powf(spec.n as f64 / 2.0);
    v.iter_mut().for_each(|x| *x *= scale);
    Ok(FieldSample {
        n: spec.n,
        points: None,
        values: v,
        provenance: Provenance::Spectral,
    })
}

/// The same field by the direct double loop, `O(4^N)`.
pub fn sample_field_naive(spec: &GreenSpec, noise: &SpectralNoise) -> Result<FieldSample> {
    spec_for_field(spec, noise)?;
    let w: Vec<f64> = spec.weights_by_subset()?.iter().map(|w| w.sqrt()).collect();
    let scale = 0.5f64.powf(spec.n as f64 / 2.0);
    let size = 1u64 << spec.n;
    let values = (0..size)
        .map(|x| {
            (0..size)
                .map(|a| w[a as usize] * character(x, a) * noise.get(a))
                .sum::<f64>()
                * scale
        })
        .collect();
    Ok(FieldSample {
        n: spec.n,
        points: None,
        values,
        provenance: Provenance::Naive,
    })
}

/// Exchangeable form `g_x = 2^{-N/2}[g_∅ + Σ_k (1+c(1−ρ_k))^{-1/2} S_k(x; [N])]`.
pub fn sample_field_grouped(spec: &GreenSpec, noise: &SpectralNoise) -> Result<FieldSample> {
    spec_for_field(spec, noise)?;
    let wk = spec.weights_by_order()?;
    let n = spec.n;
    let all = full_mask(n);
    let scale = 0.5f64.powf(n as f64 / 2.0);
    let values = (0..=all)
        .map(|x| {
            let s: f64 = (0..=n)
                .map(|k| wk[k].sqrt() * spin_sum(x, all, k, noise))
                .sum();
            s * scale
        })
        .collect();
    Ok(FieldSample {
        n,
        points: None,
        values,
        provenance: Provenance::Naive,
    })
}

/// `(1−α)G` restricted to `points`.
pub fn field_covariance(spec: &GreenSpec, points: &[VertexIndex]) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let m = points.len();
    let mut cov = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let g = green_spectral(spec, points[i], points[j])?;
            cov[(i, j)] = g;
            cov[(j, i)] = g;
        }
    }
    Ok(cov)
}

/// Multivariate normal sampler over a fixed point list via a Cholesky
/// factor of `(1−α)G`. Repeated points share one coordinate, so duplicates
/// come out perfectly correlated.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    n: usize,
    points: Vec<VertexIndex>,
    slot: Vec<usize>,
    factor: DMatrix<f64>,
    regularized: bool,
}

impl CholeskySampler {
    pub fn new(spec: &GreenSpec, points: &[VertexIndex]) -> Result<Self> {
        ensure!(!points.is_empty(), Domain, "point list is empty");
        ensure!(
            points.len() <= MAX_CHOLESKY_POINTS,
            Resource,
            "at most {MAX_CHOLESKY_POINTS} points, got {}",
            points.len()
        );
        for &x in points {
            check_in_cube(x, spec.n)?;
        }
        let mut unique: Vec<VertexIndex> = Vec::new();
        let mut slot = Vec::with_capacity(points.len());
        for &x in points {
            let i = match unique.iter().position(|&u| u == x) {
                Some(i) => i,
                None => {
                    unique.push(x);
                    unique.len() - 1
                }
            };
            slot.push(i);
        }
        let cov = field_covariance(spec, &unique)?;
        let (factor, regularized) = match cov.clone().cholesky() {
            Some(c) => (c.l(), false),
            None => {
                let m = unique.len() as f64;
                let jitter = 1e-12 * cov.trace() / m;
                let reg = cov + DMatrix::identity(unique.len(), unique.len()) * jitter;
                let c = reg.cholesky().ok_or_else(|| {
                    Error::Numeric(
                        "covariance is not positive definite after 1e-12 regularization".into(),
                    )
                })?;
                (c.l(), true)
            }
        };
        Ok(Self {
            n: spec.n,
            points: points.to_vec(),
            slot,
            factor,
            regularized,
        })
    }

    pub fn regularized(&self) -> bool {
        self.regularized
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldSample {
        let m = self.factor.nrows();
        let z = DVector::from_fn(m, |_, _| StandardNormal.sample(rng));
        let v = &self.factor * z;
        FieldSample {
            n: self.n,
            points: Some(self.points.clone()),
            values: self.slot.iter().map(|&i| v[i]).collect(),
            provenance: Provenance::Cholesky {
                regularized: self.regularized,
            },
        }
    }
}

/// One draw of the field at `points` by a Cholesky factorization.
pub fn sample_field_cholesky<R: Rng + ?Sized>(
    spec: &GreenSpec,
    points: &[VertexIndex],
    rng: &mut R,
) -> Result<FieldSample> {
    Ok(CholeskySampler::new(spec, points)?.sample(rng))
}

/// The k-spin sum `S_k(x; C) = Σ_{A⊆C, |A|=k} Π_{j∈A}(−1)^{x[j]} g_A`.
pub fn spin_sum(x: VertexIndex, c: VertexIndex, k: usize, noise: &SpectralNoise) -> f64 {
    submasks_of_size(c, k)
        .map(|a| character(x, a) * noise.get(a))
        .sum()
}

/// `g°_x = g_x − 2^{-N} Σ_y g_y`.
pub fn centered_field(sample: &FieldSample) -> Result<FieldSample> {
    ensure!(
        sample.is_full(),
        Unsupported,
        "centering needs the field on the whole cube"
    );
    let mean = sample.values.iter().sum::<f64>() / sample.values.len() as f64;
    Ok(FieldSample {
        n: sample.n,
        points: None,
        values: sample.values.iter().map(|v| v - mean).collect(),
        provenance: Provenance::Centered,
    })
}

fn check_subset(c: VertexIndex, n: usize) -> Result<()> {
    check_in_cube(c, n)?;
    ensure!(c != 0, Domain, "the coordinate set C must be nonempty");
    Ok(())
}

/// `g°_{x(C)} = 2^{-|C|/2} Σ_{∅≠A⊆C} Π_{j∈A}(−1)^{x[j]} (1+c(1−ρ_A))^{-1/2} g_A`.
pub fn marginal_average(
    noise: &SpectralNoise,
    spec: &GreenSpec,
    x: VertexIndex,
    c: VertexIndex,
) -> Result<f64> {
    spec_for_field(spec, noise)?;
    check_in_cube(x, spec.n)?;
    check_subset(c, spec.n)?;
    let mut s = 0.0;
    for a in submasks(c).filter(|&a| a != 0) {
        let rho = crate::increments::rho_subset(&spec.model, a, spec.n)?;
        s += character(x, a) * spec.weight_of(rho).sqrt() * noise.get(a);
    }
    Ok(s * 0.5f64.powf(weight(c) as f64 / 2.0))
}

/// The marginal average computed from a centered field by summing out the
/// coordinates outside `C`: `2^{-(N−|C|)/2} Σ_{x[k], k∉C} g°_x`.
pub fn marginal_from_field(centered: &FieldSample, x: VertexIndex, c: VertexIndex) -> Result<f64> {
    ensure!(
        centered.is_full(),
        Unsupported,
        "needs the field on the whole cube"
    );
    let n = centered.n;
    check_in_cube(x, n)?;
    check_subset(c, n)?;
    let outside = full_mask(n) & !c;
    let base = x & c;
    let s: f64 = submasks(outside).map(|o| centered.at(base | o)).sum();
    Ok(s * 0.5f64.powf((n - weight(c)) as f64 / 2.0))
}

/// Analytic covariance of two marginal averages.
pub fn marginal_cov(
    spec: &GreenSpec,
    x: VertexIndex,
    cx: VertexIndex,
    y: VertexIndex,
    cy: VertexIndex,
) -> Result<f64> {
    spec.validate()?;
    check_subset(cx, spec.n)?;
    check_subset(cy, spec.n)?;
    check_in_cube(x, spec.n)?;
    check_in_cube(y, spec.n)?;
    let mut s = 0.0;
    for a in submasks(cx & cy).filter(|&a| a != 0) {
        let rho = crate::increments::rho_subset(&spec.model, a, spec.n)?;
        s += character(x ^ y, a) * spec.weight_of(rho);
    }
    Ok(s * 0.5f64.powf((weight(cx) + weight(cy)) as f64 / 2.0))
}

/// Fields for `N = 1..=N_max` built from the first `2^N` entries of one
/// noise vector. Requires a model whose `ρ_A` does not depend on `N`.
pub fn nested_fields(
    noise: &SpectralNoise,
    model: &IncrementModel,
    alpha: f64,
) -> Result<Vec<FieldSample>> {
    ensure!(
        model.is_consistent_in_n(),
        Unsupported,
        "{} depends on N; nesting needs a law consistent across dimensions",
        model.name()
    );
    let n_max = noise.dim();
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let spec = GreenSpec::new(n, model.clone(), alpha)?;
        let sub = SpectralNoise::new(n, noise.values()[..1usize << n].to_vec())?;
        out.push(sample_field_spectral(&spec, &sub)?);
    }
    Ok(out)
}

/// The `N + 1` parts of `g_x` grouped by the largest element of `A`
/// (part 0 is the `g_∅` term); they sum to `g_x` and are independent.
pub fn triangular_parts(
    spec: &GreenSpec,
    noise: &SpectralNoise,
    x: VertexIndex,
) -> Result<Vec<f64>> {
    spec_for_field(spec, noise)?;
    let coef = field_coefficients(spec, x)?;
    let mut parts = vec![0.0; spec.n + 1];
    for (a, c) in coef.iter().enumerate() {
        let j = crate::bits::max_element(a as u64).unwrap_or(0);
        parts[j] += c * noise.get(a as u64);
    }
    Ok(parts)
}

/// `g^∞_{x(C)} = 2^{-|C|/2} Σ_{∅≠A⊆C} Π_{j∈A}(−1)^{x[j]} (1+b_A)^{-1/2} g_A`
/// for any `b_A` provider.
pub fn infinite_field_marginal<B>(
    b: B,
    x: VertexIndex,
    c: VertexIndex,
    noise: &SpectralNoise,
) -> Result<f64>
where
    B: Fn(VertexIndex) -> Result<f64>,
{
    check_subset(c, noise.dim())?;
    check_in_cube(x, noise.dim())?;
    let mut s = 0.0;
    for a in submasks(c).filter(|&a| a != 0) {
        let ba = b(a)?;
        ensure!(
            ba.is_finite() && ba >= 0.0,
            Domain,
            "b_A must be finite and nonnegative, got {ba}"
        );
        s += character(x, a) / (1.0 + ba).sqrt() * noise.get(a);
    }
    Ok(s * 0.5f64.powf(weight(c) as f64 / 2.0))
}

/// The exponent identity of the field density. Returns `(lhs, rhs)` with
/// the Dirichlet form over the cube plus a cemetery state on the left and
/// `−(1/(2(1−α))) gᵀ G^{-1} g` on the right.
pub fn gff_log_density_check(spec: &GreenSpec, g: &[f64]) -> Result<(f64, f64)> {
    spec.validate()?;
    ensure!(spec.n <= 8, Resource, "density check limited to N <= 8");
    let size = 1usize << spec.n;
    ensure!(
        g.len() == size,
        Domain,
        "need {size} field values, got {}",
        g.len()
    );
    let alpha = spec.alpha;
    let p = TransitionMatrix::from_model(&spec.model, spec.n)?.matrix;

    // V⁺ = V ∪ {Δ}: P⁺(y|x) = αP(y|x), P⁺(Δ|x) = 1−α, Δ absorbing, g_Δ = 0.
    let mut energy = 0.0;
    for x in 0..size {
        for y in 0..size {
            energy += alpha * p[(x, y)] * (g[x] - g[y]).powi(2);
        }
        energy += (1.0 - alpha) * g[x] * g[x];
    }
    let sq: f64 = g.iter().map(|v| v * v).sum();
    let lhs = -energy / (4.0 * (1.0 - alpha)) - 0.25 * sq;

    // the oracle is (1−α)G, so G^{-1} = (1−α) · oracle^{-1}
    let oracle = green_matrix_oracle(spec)?;
    let lu = oracle.lu();
    let det = lu.determinant();
    ensure!(
        det.abs() >= 1e-300,
        Numeric,
        "Green matrix is numerically singular (det {det:e})"
    );
    let inv = lu
        .try_inverse()
        .ok_or_else(|| Error::Numeric("Green matrix is singular".into()))?
        * (1.0 - alpha);
    let gv = DVector::from_column_slice(g);
    let quad = gv.dot(&(&inv * &gv));
    let rhs = -quad / (2.0 * (1.0 - alpha));
    Ok((lhs, rhs))
}

/// One draw of the random-K-spin construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KSpinDraw {
    pub k: usize,
    pub scale: f64,
    pub field: FieldSample,
}

/// The law of `K` and the normalizer of the random-K-spin construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KSpinLaw {
    pub n: usize,
    /// `E[Y_{1/2}^k]`.
    pub half_moments: Vec<f64>,
    /// `E[(1 + Y_{1/2})^N]`.
    pub normalizer: f64,
    /// `p_k^{(N)}`.
    pub probabilities: Vec<f64>,
}

impl KSpinLaw {
    pub fn new(spec: &GreenSpec) -> Result<Self> {
        spec.validate()?;
        ensure!(
            spec.model.is_de_finetti(),
            Unsupported,
            "random-K-spin needs a de Finetti model, got {}",
            spec.model.name()
        );
        let atom_at_one = match &spec.model {
            IncrementModel::IidBernoulli { p } => *p == 1.0,
            IncrementModel::DeFinettiDiscrete { atoms, weights } => atoms
                .iter()
                .zip(weights)
                .any(|(a, w)| *a == 1.0 && *w > 0.0),
            _ => false,
        };
        ensure!(!atom_at_one, Domain, "the mixing measure has an atom at 1");
        let n = spec.n;
        let half_moments: Vec<f64> = spec.weights_by_order()?.iter().map(|w| w.sqrt()).collect();
        let terms: Vec<f64> = (0..=n).map(|k| binomial(n, k) * half_moments[k]).collect();
        let normalizer: f64 = terms.iter().sum();
        ensure!(normalizer > 0.0, Domain, "E[(1 + Y_1/2)^N] vanishes");
        let probabilities = terms.iter().map(|t| t / normalizer).collect();
        Ok(Self {
            n,
            half_moments,
            normalizer,
            probabilities,
        })
    }

    pub fn sample_k<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (k, p) in self.probabilities.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        self.n
    }

    /// `2^{-N/2} E[(1+Y_{1/2})^N] / C(N,k)`.
    pub fn scale(&self, k: usize) -> f64 {
        (self.normalizer.ln()
            - ln_binomial(self.n, k)
            - 0.5 * self.n as f64 * std::f64::consts::LN_2)
            .exp()
    }

    /// Covariance of the construction when `K` is redrawn with the noise:
    /// `2^{-N} E[(1+Y_{1/2})^N] Σ_k E[Y_{1/2}^k] Q_k(‖x⊕y‖)`.
    pub fn covariance(&self, x: VertexIndex, y: VertexIndex) -> Result<f64> {
        check_in_cube(x, self.n)?;
        check_in_cube(y, self.n)?;
        let d = weight(x ^ y);
        let mut s = 0.0;
        for k in 0..=self.n {
            s += self.half_moments[k] * crate::polynomials::krawtchouk_eval(k, d, self.n)?;
        }
        Ok(s * self.normalizer * 0.5f64.powi(self.n as i32))
    }
}

/// Draws `K ~ p^{(N)}` and returns the scaled `K`-spin field
/// `2^{-N/2} E[(1+Y_{1/2})^N] C(N,K)^{-1} S_K(x; [N])`.
pub fn sample_random_kspin<R: Rng + ?Sized>(
    spec: &GreenSpec,
    noise: &SpectralNoise,
    rng: &mut R,
) -> Result<KSpinDraw> {
    spec_for_field(spec, noise)?;
    let law = KSpinLaw::new(spec)?;
    let k = law.sample_k(rng);
    Ok(kspin_field(&law, k, noise))
}

/// The `K = k` field of the construction on given noise.
pub fn kspin_field(law: &KSpinLaw, k: usize, noise: &SpectralNoise) -> KSpinDraw {
    let scale = law.scale(k);
    let all = full_mask(law.n);
    let values = (0..=all)
        .map(|x| scale * spin_sum(x, all, k, noise))
        .collect();
    KSpinDraw {
        k,
        scale,
        field: FieldSample {
            n: law.n,
            points: None,
            values,
            provenance: Provenance::KSpin,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::root_rng;
    use crate::stats::{Moments, ProductMoments};

    fn single_flip(n: usize, alpha: f64) -> GreenSpec {
        GreenSpec::new(n, IncrementModel::SingleFlip, alpha).unwrap()
    }

    #[test]
    fn zero_noise_gives_zero_field() {
        let spec = single_flip(5, 0.5);
        let f = sample_field_spectral(&spec, &SpectralNoise::zeros(5).unwrap()).unwrap();
        assert!(f.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fast_naive_and_grouped_agree() {
        let mut rng = root_rng(3);
        for n in 1..=8 {
            let spec = GreenSpec::new(n, IncrementModel::MFlip { m: 1.min(n) }, 0.6).unwrap();
            let noise = SpectralNoise::sample(n, &mut rng).unwrap();
            let a = sample_field_spectral(&spec, &noise).unwrap();
            let b = sample_field_naive(&spec, &noise).unwrap();
            let c = sample_field_grouped(&spec, &noise).unwrap();
            for i in 0..a.values.len() {
                assert!((a.values[i] - b.values[i]).abs() < 1e-12);
                assert!((a.values[i] - c.values[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coefficients_reproduce_covariance() {
        let spec = GreenSpec::new(
            4,
            IncrementModel::MarkovEntries {
                initial: [0.5, 0.5],
                transition: [[0.8, 0.2], [0.4, 0.6]],
            },
            0.45,
        )
        .unwrap();
        let pts: Vec<u64> = (0..16).collect();
        let cov = field_covariance(&spec, &pts).unwrap();
        for &x in &pts {
            let cx = field_coefficients(&spec, x).unwrap();
            for &y in &pts {
                let cy = field_coefficients(&spec, y).unwrap();
                let dot: f64 = cx.iter().zip(&cy).map(|(a, b)| a * b).sum();
                assert!((dot - cov[(x as usize, y as usize)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_duplicates_are_identical() {
        let spec = single_flip(6, 0.5);
        let mut rng = root_rng(9);
        let f = sample_field_cholesky(&spec, &[3, 17, 3, 40], &mut rng).unwrap();
        assert_eq!(f.values[0], f.values[2]);
        assert_eq!(f.values.len(), 4);
    }

    #[test]
    fn centered_field_drops_empty_term() {
        let spec = single_flip(6, 0.3);
        let noise = SpectralNoise::sample(6, &mut root_rng(4)).unwrap();
        let f = sample_field_spectral(&spec, &noise).unwrap();
        let c = centered_field(&f).unwrap();
        let g0 = sample_field_spectral(&spec, &noise.without_empty()).unwrap();
        let mean: f64 = c.values.iter().sum::<f64>() / 64.0;
        assert!(mean.abs() < 1e-12);
        for x in 0..64 {
            assert!((c.values[x] - g0.values[x]).abs() < 1e-12);
        }
        let part = FieldSample {
            points: Some(vec![1]),
            values: vec![0.0],
            ..f
        };
        assert!(centered_field(&part).is_err());
    }

    #[test]
    fn marginal_routes_agree() {
        let spec = GreenSpec::new(5, IncrementModel::IidBernoulli { p: 0.2 }, 0.7).unwrap();
        let noise = SpectralNoise::sample(5, &mut root_rng(8)).unwrap();
        let centered = centered_field(&sample_field_spectral(&spec, &noise).unwrap()).unwrap();
        for x in [0u64, 0b10110, 0b11111] {
            for c in [0b00001u64, 0b01110, 0b11111] {
                let direct = marginal_average(&noise, &spec, x, c).unwrap();
                let summed = marginal_from_field(&centered, x, c).unwrap();
                assert!((direct - summed).abs() < 1e-12);
            }
            let full = marginal_average(&noise, &spec, x, 0b11111).unwrap();
            assert!((full - centered.at(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn disjoint_marginals_have_zero_analytic_covariance() {
        let spec = single_flip(6, 0.4);
        for cx in 1u64..64 {
            let rest = 63 & !cx;
            for cy in submasks(rest).filter(|&c| c != 0) {
                assert_eq!(marginal_cov(&spec, 5, cx, 9, cy).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn nested_difference_uses_only_new_subsets() {
        let model = IncrementModel::IidBernoulli { p: 0.3 };
        let alpha = 0.6;
        for n in 2..=6usize {
            let big = GreenSpec::new(n, model.clone(), alpha).unwrap();
            let small = GreenSpec::new(n - 1, model.clone(), alpha).unwrap();
            for x in 0..(1u64 << n) {
                let cb = field_coefficients(&big, x).unwrap();
                let cs = field_coefficients(&small, x & full_mask(n - 1)).unwrap();
                for a in 0..(1usize << (n - 1)) {
                    let d = cb[a] - std::f64::consts::FRAC_1_SQRT_2 * cs[a];
                    assert!(d.abs() < 1e-14);
                }
            }
        }
        let noise = SpectralNoise::sample(5, &mut root_rng(1)).unwrap();
        let fields = nested_fields(&noise, &model, alpha).unwrap();
        assert_eq!(fields.len(), 5);
        assert!(nested_fields(&noise, &IncrementModel::SingleFlip, alpha).is_err());
    }

    #[test]
    fn triangular_parts_sum_to_field() {
        let spec =
            GreenSpec::new(5, IncrementModel::DeFinettiBeta { a: 1.0, b: 2.0 }, 0.5).unwrap();
        let noise = SpectralNoise::sample(5, &mut root_rng(12)).unwrap();
        let f = sample_field_spectral(&spec, &noise).unwrap();
        for x in 0..32u64 {
            let parts = triangular_parts(&spec, &noise, x).unwrap();
            assert!((parts.iter().sum::<f64>() - f.at(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn infinite_marginal_coefficients() {
        let mut ones = vec![0.0; 16];
        ones[0b0101] = 1.0;
        let noise = SpectralNoise::new(4, ones).unwrap();
        let v = infinite_field_marginal(|_| Ok(0.0), 0, 0b0101, &noise).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let gamma = 2.0;
        let lim = IncrementModel::LimitLinear { gamma };
        let v = infinite_field_marginal(
            |a| crate::increments::b_subset(&lim, a, 4, 0.5),
            0,
            0b0101,
            &noise,
        )
        .unwrap();
        assert!((v - 0.5 / (1.0 + 4.0 / gamma).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn finite_n_coefficients_approach_limit() {
        let gamma = 2.0;
        let n = 100_000usize;
        let alpha = 1.0 - gamma / n as f64;
        let c = alpha / (1.0 - alpha);
        let mut gap: f64 = 0.0;
        for k in 1..=20usize {
            let rho = 1.0 - 2.0 * k as f64 / n as f64;
            let finite = (1.0 + c * (1.0 - rho)).powf(-0.5);
            let limit = (1.0 + 2.0 * k as f64 / gamma).powf(-0.5);
            gap = gap.max((finite - limit).abs());
        }
        assert!(gap < 1e-3);
    }

    #[test]
    fn density_identity() {
        let mut rng = root_rng(21);
        for (n, model) in [
            (2usize, IncrementModel::SingleFlip),
            (3, IncrementModel::IidBernoulli { p: 0.5 }),
        ] {
            let spec = GreenSpec::new(n, model, 0.5).unwrap();
            let (l0, r0) = gff_log_density_check(&spec, &vec![0.0; 1 << n]).unwrap();
            assert_eq!((l0, r0), (0.0, 0.0));
            for _ in 0..100 {
                let g: Vec<f64> = (0..1 << n)
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect();
                let (l, r) = gff_log_density_check(&spec, &g).unwrap();
                assert!((l - r).abs() < 1e-9, "{l} vs {r}");
            }
        }
    }

    #[test]
    fn kspin_law_normalization_and_degenerate_case() {
        let spec = GreenSpec::new(
            6,
            IncrementModel::DeFinettiDiscrete {
                atoms: vec![0.2, 0.7],
                weights: vec![0.4, 0.6],
            },
            0.5,
        )
        .unwrap();
        let law = KSpinLaw::new(&spec).unwrap();
        assert!((law.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let delta0 = GreenSpec::new(
            6,
            IncrementModel::DeFinettiDiscrete {
                atoms: vec![0.0],
                weights: vec![1.0],
            },
            0.5,
        )
        .unwrap();
        let law = KSpinLaw::new(&delta0).unwrap();
        for k in 0..=6 {
            assert!((law.half_moments[k] - 1.0).abs() < 1e-15);
            assert!((law.probabilities[k] - binomial(6, k) / 64.0).abs() < 1e-15);
        }
        let bad = GreenSpec::new(
            3,
            IncrementModel::DeFinettiDiscrete {
                atoms: vec![1.0],
                weights: vec![1.0],
            },
            0.5,
        )
        .unwrap();
        assert!(matches!(KSpinLaw::new(&bad), Err(Error::Domain(_))));
    }

    #[test]
    fn kspin_mean_over_k_is_the_field() {
        // averaging the construction over K with the noise fixed gives g_x
        let spec =
            GreenSpec::new(5, IncrementModel::DeFinettiBeta { a: 2.0, b: 1.5 }, 0.6).unwrap();
        let law = KSpinLaw::new(&spec).unwrap();
        let noise = SpectralNoise::sample(5, &mut root_rng(2)).unwrap();
        let f = sample_field_spectral(&spec, &noise).unwrap();
        let mut mean = vec![0.0; 32];
        for k in 0..=5 {
            let d = kspin_field(&law, k, &noise);
            for x in 0..32 {
                mean[x] += law.probabilities[k] * d.field.values[x];
            }
        }
        for x in 0..32 {
            assert!((mean[x] - f.values[x]).abs() < 1e-12);
        }
    }

    #[test]
    fn spin_sum_single_term_and_variance() {
        let noise = SpectralNoise::sample(4, &mut root_rng(6)).unwrap();
        let c = 0b1011;
        let s = spin_sum(0b0010, c, 3, &noise);
        assert!((s - character(0b0010, c) * noise.get(c)).abs() < 1e-15);

        let mut rng = root_rng(7);
        let mut var2 = Moments::default();
        let mut cross = Moments::default();
        for _ in 0..20_000 {
            let noise = SpectralNoise::sample(6, &mut rng).unwrap();
            let s2 = spin_sum(0b101, 63, 2, &noise);
            let s1 = spin_sum(0b101, 63, 1, &noise);
            var2.push(s2 * s2);
            cross.push(s1 * s2);
        }
        assert!(var2.estimate().within(15.0, 3.0));
        assert!(cross.estimate().within(0.0, 3.0));
    }

    #[test]
    fn spectral_covariance_small_mc() {
        let spec = single_flip(3, 0.5);
        let pts: Vec<u64> = (0..8).collect();
        let cov = field_covariance(&spec, &pts).unwrap();
        let mut acc = ProductMoments::new(8);
        let mut rng = root_rng(10);
        for _ in 0..40_000 {
            let noise = SpectralNoise::sample(3, &mut rng).unwrap();
            acc.push(&sample_field_spectral(&spec, &noise).unwrap().values);
        }
        let summary = crate::stats::ZSummary::from_pairs(
            (0..8)
                .flat_map(|i| (0..8).map(move |j| (i, j)))
                .map(|(i, j)| (acc.get(i, j), cov[(i, j)])),
            3.0,
        );
        assert!(summary.fraction_within() >= 0.95, "{summary:?}");
    }
}
