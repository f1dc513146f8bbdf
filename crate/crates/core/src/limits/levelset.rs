//! Sums of the field over Hamming levels around the origin and their
//! central-limit scaling.

use super::kappa::{kappa_cov_mixture, MixingLaw};
use crate::bits::{binomial, ln_binomial, weight};
use crate::error::{ensure, Result};
use crate::field::FieldSample;
use crate::increments::IncrementModel;
use crate::polynomials::{krawtchouk_normalized_column, KrawtchoukBasis, MAX_EXACT_N};
use crate::walk::GreenSpec;
use nalgebra::DMatrix;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LevelSetProvenance {
    Direct,
    Representation,
}

/// `θ_v = Σ_{|y| = v} g_y` for `v = 0..=N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSetSample {
    pub n: usize,
    pub values: Vec<f64>,
    pub provenance: LevelSetProvenance,
}

pub fn levelset_direct(field: &FieldSample) -> Result<LevelSetSample> {
    ensure!(field.is_full(), Domain, "level sets need a full-cube field");
    let mut values = vec![0.0; field.n + 1];
    for (x, g) in field.values.iter().enumerate() {
        values[weight(x as u64)] += g;
    }
    Ok(LevelSetSample {
        n: field.n,
        values,
        provenance: LevelSetProvenance::Direct,
    })
}

/// `R[v][k] = C(N,v) 2^{-N/2} w_k^{1/2} sqrt(C(N,k)) Q_k(v)`, so that
/// `θ = R ζ` for i.i.d. standard normals `ζ_0..ζ_N`.
pub fn representation_matrix(spec: &GreenSpec) -> Result<DMatrix<f64>> {
    let n = spec.n;
    let w = spec.weights_by_order()?;
    let mut r = DMatrix::zeros(n + 1, n + 1);
    if n <= MAX_EXACT_N {
        let basis = KrawtchoukBasis::new(n)?;
        let half = 0.5f64.powf(0.5 * n as f64);
        for v in 0..=n {
            for k in 0..=n {
                r[(v, k)] = binomial(n, v) * half * w[k].sqrt() * basis.scaled(k, v) as f64
                    / binomial(n, k).sqrt();
            }
        }
        return Ok(r);
    }
    for v in 0..=n {
        let q = krawtchouk_normalized_column(v, n)?;
        let lead = (ln_binomial(n, v) - 0.5 * n as f64 * std::f64::consts::LN_2).exp();
        for k in 0..=n {
            r[(v, k)] = lead * w[k].sqrt() * q[k];
        }
    }
    Ok(r)
}

pub fn levelset_representation(spec: &GreenSpec, zeta: &[f64]) -> Result<LevelSetSample> {
    ensure!(
        zeta.len() == spec.n + 1,
        Domain,
        "need {} normals, got {}",
        spec.n + 1,
        zeta.len()
    );
    let r = representation_matrix(spec)?;
    let theta = &r * nalgebra::DVector::from_column_slice(zeta);
    Ok(LevelSetSample {
        n: spec.n,
        values: theta.iter().copied().collect(),
        provenance: LevelSetProvenance::Representation,
    })
}

/// `Cov(θ_u, θ_v) = C(N,u) C(N,v) 2^{-N} Σ_k w_k C(N,k) Q_k(u) Q_k(v)`.
///
/// Exact Krawtchouk values for `N ≤ 64`; beyond that the normalized
/// recurrence with the binomial prefactor applied in log space.
pub fn levelset_cov(spec: &GreenSpec, u: usize, v: usize) -> Result<f64> {
    let n = spec.n;
    ensure!(u <= n && v <= n, Domain, "levels ({u}, {v}) exceed N = {n}");
    let w = spec.weights_by_order()?;
    if n <= MAX_EXACT_N {
        let basis = KrawtchoukBasis::new(n)?;
        let s: f64 = w
            .iter()
            .enumerate()
            .map(|(k, wk)| {
                wk * basis.scaled(k, u) as f64 * basis.scaled(k, v) as f64 / binomial(n, k)
            })
            .sum();
        return Ok(s * binomial(n, u) * binomial(n, v) * 0.5f64.powi(n as i32));
    }
    log_scaled_cov(n, &w, u, v, 0.0)
}

fn log_scaled_cov(n: usize, w: &[f64], u: usize, v: usize, ln_extra: f64) -> Result<f64> {
    let qu = krawtchouk_normalized_column(u, n)?;
    let qv = krawtchouk_normalized_column(v, n)?;
    let s: f64 = (0..=n).map(|k| w[k] * qu[k] * qv[k]).sum();
    let ln_pref =
        ln_binomial(n, u) + ln_binomial(n, v) - n as f64 * std::f64::consts::LN_2 + ln_extra;
    Ok(s * ln_pref.exp())
}

pub fn levelset_cov_matrix(spec: &GreenSpec) -> Result<DMatrix<f64>> {
    let n = spec.n;
    let mut m = DMatrix::zeros(n + 1, n + 1);
    for u in 0..=n {
        for v in u..=n {
            let c = levelset_cov(spec, u, v)?;
            m[(u, v)] = c;
            m[(v, u)] = c;
        }
    }
    Ok(m)
}

/// Level `⌊N/2 + (√N/2) t⌋`, clamped to `[0, N]`.
pub fn clt_level(n: usize, t: f64) -> usize {
    let nf = n as f64;
    (0.5 * nf + 0.5 * nf.sqrt() * t).floor().clamp(0.0, nf) as usize
}

/// Covariance of `(1/2) sqrt(N/2^N) θ_u` and the same at level `v`.
pub fn scaled_levelset_cov(spec: &GreenSpec, u: usize, v: usize) -> Result<f64> {
    let n = spec.n;
    ensure!(u <= n && v <= n, Domain, "levels ({u}, {v}) exceed N = {n}");
    let w = spec.weights_by_order()?;
    let ln_extra = (n as f64 / 4.0).ln() - n as f64 * std::f64::consts::LN_2;
    log_scaled_cov(n, &w, u, v, ln_extra)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltGap {
    pub n: usize,
    pub alpha: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CltReport {
    pub gamma: f64,
    pub grid: Vec<f64>,
    pub gaps: Vec<CltGap>,
    /// Each gap is at most 1.1 times the previous one.
    pub decreasing: bool,
}

/// Single-flip walks with `α_N = 1 − γ/N`, whose level-set covariance
/// converges to that of `κ` with `Y` of density `(γ/2) y^{γ/2 − 1}`.
pub fn levelset_clt_check(gamma: f64, dims: &[usize], grid: &[f64]) -> Result<CltReport> {
    ensure!(gamma > 0.0, Domain, "gamma must be positive");
    ensure!(!grid.is_empty(), Domain, "empty t-grid");
    let law = MixingLaw::PowerDensity { a: 0.5 * gamma };
    let mut target = Vec::with_capacity(grid.len() * grid.len());
    for &t in grid {
        for &s in grid {
            target.push(kappa_cov_mixture(&law, t, s)?);
        }
    }
    let mut gaps = Vec::with_capacity(dims.len());
    for &n in dims {
        let alpha = 1.0 - gamma / n as f64;
        ensure!(alpha > 0.0, Domain, "N = {n} too small for gamma = {gamma}");
        let spec = GreenSpec::new(n, IncrementModel::SingleFlip, alpha)?;
        let w = spec.weights_by_order()?;
        let levels: Vec<usize> = grid.iter().map(|&t| clt_level(n, t)).collect();
        let columns: Vec<Vec<f64>> = levels
            .iter()
            .map(|&u| krawtchouk_normalized_column(u, n))
            .collect::<Result<_>>()?;
        let nf = n as f64;
        let ln_base = (nf / 4.0).ln() - 2.0 * nf * std::f64::consts::LN_2;
        let mut gap: f64 = 0.0;
        for i in 0..grid.len() {
            for j in 0..grid.len() {
                let s: f64 = (0..=n).map(|k| w[k] * columns[i][k] * columns[j][k]).sum();
                let pref = ln_base + ln_binomial(n, levels[i]) + ln_binomial(n, levels[j]);
                let finite = s * pref.exp();
                gap = gap.max((finite - target[i * grid.len() + j]).abs());
            }
        }
        gaps.push(CltGap { n, alpha, gap });
    }
    let decreasing = gaps.windows(2).all(|p| p[1].gap <= 1.1 * p[0].gap);
    Ok(CltReport {
        gamma,
        grid: grid.to_vec(),
        gaps,
        decreasing,
    })
}
