//! The limiting Gaussian process `κ_t`: Hermite series, truncation, and its
//! covariance as a mixture of bivariate normal densities over `Y`.

use crate::error::{ensure, Error, Result};
use crate::increments::{poisson_dirichlet_b, IncrementModel};
use crate::polynomials::hermite_normalized_prefix;
use crate::quadrature::{integrate, integrate_to_infinity};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};
use std::f64::consts::PI;

pub const TRUNCATION_STEP: usize = 8;
pub const TRUNCATION_CAP: usize = 512;
pub const TRUNCATION_REL_TOL: f64 = 1e-10;

const MIX_TOL: f64 = 1e-13;
// sup_t |H_k(t)| e^{-t²/4} / sqrt(k!), squared
const CRAMER_SQ: f64 = 1.086_435 * 1.086_435;

/// Law of `Y` (equivalently its moments `M_k = E[Y^k]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MixingLaw {
    /// `Y ≡ y`.
    Degenerate { y: f64 },
    /// Atoms in `(−1, 1)`.
    Discrete { points: Vec<f64>, weights: Vec<f64> },
    /// Density `a y^{a−1}` on `(0, 1)`, so `M_k = a/(a+k)`.
    PowerDensity { a: f64 },
    /// Moments only; the covariance is available through the series.
    Moments { full: Vec<f64> },
}

impl MixingLaw {
    /// The limit-regime law of `Y` for a limit increment model.
    pub fn from_model(model: &IncrementModel) -> Result<Self> {
        match model {
            IncrementModel::LimitLinear { gamma } => {
                ensure!(*gamma > 0.0, Domain, "gamma must be positive");
                Ok(Self::PowerDensity { a: 0.5 * gamma })
            }
            IncrementModel::LimitPoissonDirichlet { kappa } => {
                ensure!(*kappa > 0.0, Domain, "kappa must be positive");
                Ok(Self::Moments {
                    full: (0..=TRUNCATION_CAP)
                        .map(|k| 1.0 / (1.0 + poisson_dirichlet_b(*kappa, k)))
                        .collect(),
                })
            }
            other if other.is_de_finetti() => Err(Error::Domain(format!(
                "{} at fixed alpha gives Y an atom at 1 and M_k does not tend to 0; \
                 use limit-linear or limit-poisson-dirichlet",
                other.name()
            ))),
            other => Err(Error::Unsupported(format!(
                "{} has no limit law for Y",
                other.name()
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Degenerate { y } => {
                ensure!((0.0..1.0).contains(y), Domain, "Y ≡ {y} needs 0 <= y < 1");
            }
            Self::Discrete { points, weights } => {
                ensure!(
                    !points.is_empty() && points.len() == weights.len(),
                    Domain,
                    "malformed atoms"
                );
                ensure!(
                    points.iter().all(|p| p.abs() < 1.0),
                    Domain,
                    "atoms must lie in (-1, 1)"
                );
                ensure!(weights.iter().all(|w| *w >= 0.0), Domain, "negative weight");
                let t: f64 = weights.iter().sum();
                ensure!((t - 1.0).abs() < 1e-12, Domain, "weights sum to {t}");
            }
            Self::PowerDensity { a } => ensure!(*a > 0.0, Domain, "a must be positive"),
            Self::Moments { full } => {
                ensure!(!full.is_empty() && full[0] == 1.0, Domain, "M_0 must be 1");
            }
        }
        for k in 0..=self.max_order() {
            let m = self.moment(k)?;
            ensure!(
                (0.0..=1.0).contains(&m),
                Domain,
                "M_{k} = {m} is outside [0, 1]; no real half-moment sequence"
            );
        }
        Ok(())
    }

    fn max_order(&self) -> usize {
        match self {
            Self::Moments { full } => full.len() - 1,
            _ => TRUNCATION_CAP,
        }
    }

    pub fn moment(&self, k: usize) -> Result<f64> {
        Ok(match self {
            Self::Degenerate { y } => y.powi(k as i32),
            Self::Discrete { points, weights } => points
                .iter()
                .zip(weights)
                .map(|(p, w)| w * p.powi(k as i32))
                .sum(),
            Self::PowerDensity { a } => a / (a + k as f64),
            Self::Moments { full } => *full.get(k).ok_or_else(|| {
                Error::Resource(format!("moment {k} beyond the {} supplied", full.len() - 1))
            })?,
        })
    }

    pub fn has_density_route(&self) -> bool {
        !matches!(self, Self::Moments { .. })
    }

    /// `E f(Y, 1−Y)`. The power density uses `Y = (1−u²)^{1/a}`, under which
    /// `E f(Y) = ∫_0^1 2u f(Y(u)) du` and `1 − Y` stays accurate near `u = 0`.
    pub fn expect<F: Fn(f64, f64) -> f64>(&self, f: F, tol: f64) -> Result<f64> {
        match self {
            Self::Degenerate { y } => Ok(f(*y, 1.0 - y)),
            Self::Discrete { points, weights } => Ok(points
                .iter()
                .zip(weights)
                .map(|(p, w)| w * f(*p, 1.0 - p))
                .sum()),
            Self::PowerDensity { a } => integrate(
                |u| {
                    if u == 0.0 {
                        return 0.0;
                    }
                    let ln_y = (-u * u).ln_1p() / a;
                    2.0 * u * f(ln_y.exp(), -ln_y.exp_m1())
                },
                0.0,
                1.0,
                tol,
            ),
            Self::Moments { .. } => Err(Error::Unsupported(
                "expectation over Y needs a law, not only moments".into(),
            )),
        }
    }

    /// Largest `|y|` in the support, when below 1.
    fn support_radius(&self) -> Option<f64> {
        match self {
            Self::Degenerate { y } => Some(y.abs()),
            Self::Discrete { points, .. } => Some(points.iter().fold(0.0, |m, p| m.max(p.abs()))),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationReport {
    pub order: usize,
    pub converged: bool,
    /// Largest relative variance increment over the grid at the last step.
    pub last_increment: f64,
    /// Bound on the omitted variance `Var(κ_t) − Var_K(κ_t)` over the grid.
    pub tail_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaSpec {
    pub law: MixingLaw,
    pub half_moments: Vec<f64>,
    pub full_moments: Vec<f64>,
    pub grid: Vec<f64>,
    pub truncation: TruncationReport,
}

impl KappaSpec {
    /// Chooses the order by the truncation rule: grow `K` in steps of 8 until
    /// the variance increment on the grid is below `1e-10` relative, capped
    /// at 512.
    pub fn new(law: MixingLaw, grid: Vec<f64>) -> Result<Self> {
        law.validate()?;
        ensure!(!grid.is_empty(), Domain, "empty t-grid");
        let cap = TRUNCATION_CAP.min(law.max_order());
        let full: Vec<f64> = (0..=cap).map(|k| law.moment(k)).collect::<Result<_>>()?;
        let herm: Vec<Vec<f64>> = grid
            .iter()
            .map(|&t| hermite_normalized_prefix(cap, t))
            .collect();
        let partial = |t_idx: usize, upto: usize| -> f64 {
            (0..=upto).map(|k| full[k] * herm[t_idx][k].powi(2)).sum()
        };
        let mut order = TRUNCATION_STEP.min(cap);
        let mut prev: Vec<f64> = (0..grid.len()).map(|i| partial(i, 0)).collect();
        let (converged, last_increment) = loop {
            let cur: Vec<f64> = (0..grid.len()).map(|i| partial(i, order)).collect();
            let inc = cur
                .iter()
                .zip(&prev)
                .map(|(c, p)| (c - p) / c)
                .fold(0.0, f64::max);
            ensure!(
                inc.is_finite(),
                Numeric,
                "non-finite series variance at K = {order}"
            );
            if inc < TRUNCATION_REL_TOL {
                break (true, inc);
            }
            if order >= cap {
                break (false, inc);
            }
            prev = cur;
            order = (order + TRUNCATION_STEP).min(cap);
        };
        let mut spec = Self {
            half_moments: full[..=order].iter().map(|m| m.sqrt()).collect(),
            full_moments: full[..=order].to_vec(),
            law,
            grid,
            truncation: TruncationReport {
                order,
                converged,
                last_increment,
                tail_bound: None,
            },
        };
        spec.truncation.tail_bound = spec.tail_bound()?;
        Ok(spec)
    }

    pub fn from_model(model: &IncrementModel, grid: Vec<f64>) -> Result<Self> {
        Self::new(MixingLaw::from_model(model)?, grid)
    }

    pub fn order(&self) -> usize {
        self.truncation.order
    }

    fn tail_bound(&self) -> Result<Option<f64>> {
        let k = self.order();
        let tmax = self.grid.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        match &self.law {
            MixingLaw::PowerDensity { .. } => {
                let mut worst: f64 = 0.0;
                for &t in &self.grid {
                    let exact = kappa_cov_resolvent(&self.law, t, t)?;
                    worst = worst.max(exact - kappa_cov_series(self, t, t));
                }
                Ok(Some(worst.max(0.0)))
            }
            law => Ok(law.support_radius().map(|r| {
                let tail = if r == 0.0 {
                    0.0
                } else {
                    r.powi(k as i32 + 1) / (1.0 - r)
                };
                CRAMER_SQ * (-0.5 * tmax * tmax).exp() * tail / (2.0 * PI)
            })),
        }
    }
}

/// `κ_t = (2π)^{-1/2} e^{-t²/2} Σ_{k≤K} m_k H_k(t) ζ_k / sqrt(k!)`.
pub fn kappa_at(spec: &KappaSpec, zeta: &[f64], t: f64) -> Result<f64> {
    let k = spec.order();
    ensure!(
        zeta.len() > k,
        Domain,
        "need {} normals, got {}",
        k + 1,
        zeta.len()
    );
    let h = hermite_normalized_prefix(k, t);
    let s: f64 = (0..=k).map(|j| spec.half_moments[j] * h[j] * zeta[j]).sum();
    Ok(s * (-0.5 * t * t).exp() / (2.0 * PI).sqrt())
}

pub fn kappa_sample(spec: &KappaSpec, zeta: &[f64]) -> Result<Vec<f64>> {
    spec.grid.iter().map(|&t| kappa_at(spec, zeta, t)).collect()
}

/// Even and odd parts of the series at `t`: the `k` even and `k` odd terms.
pub fn kappa_parity_parts(spec: &KappaSpec, zeta: &[f64], t: f64) -> Result<(f64, f64)> {
    let k = spec.order();
    ensure!(
        zeta.len() > k,
        Domain,
        "need {} normals, got {}",
        k + 1,
        zeta.len()
    );
    let h = hermite_normalized_prefix(k, t);
    let pref = (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
    let (mut even, mut odd) = (0.0, 0.0);
    for j in 0..=k {
        let term = spec.half_moments[j] * h[j] * zeta[j];
        if j % 2 == 0 {
            even += term;
        } else {
            odd += term;
        }
    }
    Ok((pref * even, pref * odd))
}

/// Standard bivariate normal density with correlation `ρ`, given `1 − ρ`.
pub fn bivariate_normal_density(t: f64, s: f64, rho: f64, one_minus_rho: f64) -> f64 {
    let one_minus_sq = one_minus_rho * (1.0 + rho);
    let q = (t * t - 2.0 * rho * t * s + s * s) / (2.0 * one_minus_sq);
    (-q).exp() / (2.0 * PI * one_minus_sq.sqrt())
}

/// `E[n(t, s; Y)]`.
pub fn kappa_cov_mixture(law: &MixingLaw, t: f64, s: f64) -> Result<f64> {
    ensure!(
        law.has_density_route(),
        Unsupported,
        "mixture covariance needs the law of Y; use the series"
    );
    law.expect(|y, omy| bivariate_normal_density(t, s, y, omy), MIX_TOL)
}

/// `(1/2π) e^{-(t²+s²)/2} Σ_{k≤K} M_k H_k(t) H_k(s) / k!`.
pub fn kappa_cov_series(spec: &KappaSpec, t: f64, s: f64) -> f64 {
    series_cov(&spec.full_moments, t, s)
}

fn series_cov(full: &[f64], t: f64, s: f64) -> f64 {
    let k = full.len() - 1;
    let ht = hermite_normalized_prefix(k, t);
    let hs = hermite_normalized_prefix(k, s);
    let sum: f64 = (0..=k).map(|j| full[j] * ht[j] * hs[j]).sum();
    sum * (-0.5 * (t * t + s * s)).exp() / (2.0 * PI)
}

// u(t) = ∫_0^∞ exp(−v²/2 − vt) v^{a−1} dv, with v = w^{1/a}.
fn resolvent_solution(a: f64, t: f64) -> Result<f64> {
    let inner = integrate_to_infinity(
        |w| {
            let v = w.powf(1.0 / a);
            (-0.5 * v * v - v * t).exp()
        },
        0.0,
        1e-14,
    )?;
    Ok(inner / a)
}

/// The full series `Σ_{k≥0} M_k H_k(t)H_k(s)/k!` summed in closed form.
///
/// For `M_k = a/(a+k)` the sum is `a` times the Green function of the
/// Hermite operator `−f'' + t f' + a f`, built from `u(±t)` with
/// `u(t) = ∫_0^∞ exp(−v²/2 − vt) v^{a−1} dv`. Fixed `Y` reduces to Mehler.
pub fn kappa_cov_resolvent(law: &MixingLaw, t: f64, s: f64) -> Result<f64> {
    match law {
        MixingLaw::PowerDensity { a } => {
            let (lo, hi) = if t <= s { (t, s) } else { (s, t) };
            let u0 = 2f64.powf(0.5 * a - 1.0) * gamma(0.5 * a);
            let du0 = 2f64.powf(0.5 * (a - 1.0)) * gamma(0.5 * (a + 1.0));
            let wronskian = 2.0 * u0 * du0;
            let f =
                a * (2.0 * PI).sqrt() * resolvent_solution(*a, -lo)? * resolvent_solution(*a, hi)?
                    / wronskian;
            Ok(f * (-0.5 * (t * t + s * s)).exp() / (2.0 * PI))
        }
        MixingLaw::Degenerate { .. } | MixingLaw::Discrete { .. } => kappa_cov_mixture(law, t, s),
        MixingLaw::Moments { .. } => Err(Error::Unsupported(
            "no closed-form resummation for bare moments".into(),
        )),
    }
}

/// `Cov(κ_t, κ_s)`: the mixture when the law of `Y` is known, otherwise the
/// truncated series.
pub fn kappa_cov(spec: &KappaSpec, t: f64, s: f64) -> Result<f64> {
    if spec.law.has_density_route() {
        kappa_cov_mixture(&spec.law, t, s)
    } else {
        Ok(kappa_cov_series(spec, t, s))
    }
}

/// `E[(1 − Y²)^{-1/2}]`, finite for every admissible law here.
pub fn mixture_singularity(law: &MixingLaw) -> Result<f64> {
    law.expect(|y, omy| 1.0 / (omy * (1.0 + y)).sqrt(), 1e-12)
}

pub(crate) fn ln_beta_half(a: f64) -> f64 {
    ln_gamma(a) + ln_gamma(0.5) - ln_gamma(a + 0.5)
}
