//! Fourier transform `κ̂_θ = U_θ + i V_θ` of the limiting process, its
//! covariance, inversion and Parseval identities.

use super::kappa::{kappa_at, kappa_cov_mixture, ln_beta_half, KappaSpec, MixingLaw};
use crate::bits::ln_factorial;
use crate::error::{ensure, Error, Result};
use crate::quadrature::integrate_to_infinity;
use serde::Serialize;
use std::f64::consts::PI;

const OUTER_TOL: f64 = 1e-11;
const INNER_TOL: f64 = 1e-13;

/// `E[κ̂_θ κ̂_φ]` and its parts from even and odd orders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformCov {
    /// `e^{-(θ²+φ²)/2} E[e^{θφY}]`.
    pub full: f64,
    /// `e^{-(θ²+φ²)/2} E[cosh(θφY)] = E[U_θ U_φ]`.
    pub even: f64,
    /// `e^{-(θ²+φ²)/2} E[sinh(θφY)] = E[V_θ V_φ]`.
    pub odd: f64,
}

pub fn transform_cov(law: &MixingLaw, theta: f64, phi: f64) -> Result<TransformCov> {
    let tp = theta * phi;
    if let MixingLaw::Moments { full } = law {
        let base = -0.5 * (theta * theta + phi * phi);
        let (mut even, mut odd) = (0.0, 0.0);
        for (k, m) in full.iter().enumerate() {
            let term = log_power_term(tp, k, base) * m;
            if k % 2 == 0 {
                even += term;
            } else {
                odd += term;
            }
        }
        return Ok(TransformCov {
            full: even + odd,
            even,
            odd,
        });
    }
    // e^{θφY − (θ²+φ²)/2} = e^{−(θ−φ)²/2 − θφ(1−Y)}, and similarly for −θφ
    let plus = |omy: f64| (-0.5 * (theta - phi).powi(2) - tp * omy).exp();
    let minus = |omy: f64| (-0.5 * (theta + phi).powi(2) + tp * omy).exp();
    let e_plus = law.expect(|_, omy| plus(omy), INNER_TOL)?;
    let e_minus = law.expect(|_, omy| minus(omy), INNER_TOL)?;
    Ok(TransformCov {
        full: e_plus,
        even: 0.5 * (e_plus + e_minus),
        odd: 0.5 * (e_plus - e_minus),
    })
}

// x^k / k! · e^{base}, sign-aware, in log space
fn log_power_term(x: f64, k: usize, base: f64) -> f64 {
    if k == 0 {
        return base.exp();
    }
    if x == 0.0 {
        return 0.0;
    }
    let mag = (k as f64 * x.abs().ln() - ln_factorial(k) + base).exp();
    if x < 0.0 && k % 2 == 1 {
        -mag
    } else {
        mag
    }
}

/// Coefficient of `m_k ζ_k` in `κ̂_θ`: `(iθ)^k e^{-θ²/2} / sqrt(k!)`, returned
/// as the real part (even `k`) or imaginary part (odd `k`).
fn transform_coefficient(theta: f64, k: usize) -> f64 {
    let gauss = -0.5 * theta * theta;
    if k == 0 {
        return gauss.exp();
    }
    if theta == 0.0 {
        return 0.0;
    }
    let mag = (k as f64 * theta.abs().ln() - 0.5 * ln_factorial(k) + gauss).exp();
    let i_sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
    let theta_sign = if theta < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
    i_sign * theta_sign * mag
}

/// `(U_θ, V_θ)` on the same `ζ` used by [`kappa_at`]:
/// `U_θ = e^{-θ²/2} Σ_j (−1)^j θ^{2j} m_{2j} ζ_{2j} / sqrt((2j)!)` and
/// `V_θ = e^{-θ²/2} Σ_j (−1)^j θ^{2j+1} m_{2j+1} ζ_{2j+1} / sqrt((2j+1)!)`.
pub fn transform_at(spec: &KappaSpec, zeta: &[f64], theta: f64) -> Result<(f64, f64)> {
    let k = spec.order();
    ensure!(
        zeta.len() > k,
        Domain,
        "need {} normals, got {}",
        k + 1,
        zeta.len()
    );
    let (mut u, mut v) = (0.0, 0.0);
    for (j, z) in zeta.iter().enumerate().take(k + 1) {
        let term = transform_coefficient(theta, j) * spec.half_moments[j] * z;
        if j % 2 == 0 {
            u += term;
        } else {
            v += term;
        }
    }
    Ok((u, v))
}

pub fn transform_sample(spec: &KappaSpec, zeta: &[f64], thetas: &[f64]) -> Result<Vec<(f64, f64)>> {
    thetas
        .iter()
        .map(|&th| transform_at(spec, zeta, th))
        .collect()
}

/// Trapezoid grid on `[−L, L]` for the inversion integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InversionGrid {
    pub half_width: f64,
    pub nodes: usize,
}

impl InversionGrid {
    /// `κ̂_θ` truncated at order `K` is negligible beyond `|θ| ≈ 1.85 sqrt(K)`.
    pub fn for_order(order: usize) -> Self {
        let half_width = (1.85 * (order as f64).sqrt()).max(8.0);
        let nodes = if order <= 64 { 2048 } else { 4096 };
        Self { half_width, nodes }
    }
}

/// `|(1/2π) ∫ e^{-iθt} κ̂_θ dθ − κ_t|` for each `t`, with both sides built
/// from the same `ζ`.
pub fn inversion_residuals(
    spec: &KappaSpec,
    zeta: &[f64],
    ts: &[f64],
    grid: InversionGrid,
) -> Result<Vec<f64>> {
    ensure!(
        grid.nodes >= 2 && grid.half_width > 0.0,
        Domain,
        "degenerate inversion grid"
    );
    let h = 2.0 * grid.half_width / (grid.nodes - 1) as f64;
    let samples: Vec<(f64, f64, f64)> = (0..grid.nodes)
        .map(|i| {
            let th = -grid.half_width + i as f64 * h;
            let (u, v) = transform_at(spec, zeta, th)?;
            let w = if i == 0 || i == grid.nodes - 1 {
                0.5 * h
            } else {
                h
            };
            Ok((th, u * w, v * w))
        })
        .collect::<Result<_>>()?;
    ts.iter()
        .map(|&t| {
            // real part of e^{-iθt}(U + iV)
            let integral: f64 = samples
                .iter()
                .map(|(th, u, v)| (th * t).cos() * u + (th * t).sin() * v)
                .sum();
            Ok((integral / (2.0 * PI) - kappa_at(spec, zeta, t)?).abs())
        })
        .collect()
}

pub fn inversion_check(spec: &KappaSpec, zeta: &[f64], t: f64) -> Result<f64> {
    Ok(inversion_residuals(spec, zeta, &[t], InversionGrid::for_order(spec.order()))?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParsevalReport {
    /// `∫ E|κ̂_θ|² dθ = ∫ e^{-θ²} E[e^{θ²Y}] dθ`, by quadrature.
    pub lhs: f64,
    /// `E[sqrt(π/(1−Y))]`, in closed form.
    pub rhs: f64,
    /// `∫ Var(κ_t) dt` by quadrature of the mixture covariance; equals
    /// `rhs / 2π`.
    pub t_side: f64,
}

pub fn parseval_rhs(law: &MixingLaw) -> Result<f64> {
    match law {
        MixingLaw::Degenerate { y } => Ok((PI / (1.0 - y)).sqrt()),
        MixingLaw::Discrete { points, weights } => Ok(points
            .iter()
            .zip(weights)
            .map(|(p, w)| w * (PI / (1.0 - p)).sqrt())
            .sum()),
        MixingLaw::PowerDensity { a } => Ok(PI.sqrt() * a * ln_beta_half(*a).exp()),
        MixingLaw::Moments { .. } => Err(Error::Unsupported(
            "Parseval check needs the law of Y".into(),
        )),
    }
}

pub fn parseval_check(law: &MixingLaw) -> Result<ParsevalReport> {
    law.validate()?;
    let rhs = parseval_rhs(law)?;
    ensure!(rhs.is_finite(), Domain, "E[(1-Y)^(-1/2)] diverges");
    let lhs = 2.0
        * integrate_to_infinity(
            |th| {
                transform_cov(law, th, th)
                    .map(|c| c.full)
                    .unwrap_or(f64::NAN)
            },
            0.0,
            OUTER_TOL,
        )?;
    let t_side = 2.0
        * integrate_to_infinity(
            |t| kappa_cov_mixture(law, t, t).unwrap_or(f64::NAN),
            0.0,
            OUTER_TOL,
        )?;
    Ok(ParsevalReport { lhs, rhs, t_side })
}
