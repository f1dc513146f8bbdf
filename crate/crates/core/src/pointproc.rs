//! Products of points of the killed de Finetti point process: the random
//! variables `Y` and `Y_φ`, their moments and samplers, transforms of
//! `−log|Y|`, sign probabilities, and the symmetric Beta example.

use crate::error::{ensure, Error, Result};
use crate::increments::{
    beta_raw_moment, beta_spin_moments, check_alpha, killing_ratio, IncrementModel,
};
use crate::quadrature::integrate;
use crate::stats::{Estimate, Moments};
use crate::walk::sample_geometric;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

const SPIN_QUAD_TOL: f64 = 1e-12;

/// A probability measure on `[−1, 1]` for one spin `ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpinMeasure {
    /// Finitely many atoms `ξ_i` with weights.
    Discrete { points: Vec<f64>, weights: Vec<f64> },
    /// `ξ = 1 − 2ω` with `ω ~ Beta(a, b)`.
    Jacobi { a: f64, b: f64 },
    /// `ξ = ±B` with a fair sign and `B ~ Beta(a, b)`.
    SymmetricBeta { a: f64, b: f64 },
}

impl SpinMeasure {
    pub fn delta(xi: f64) -> Self {
        Self::Discrete {
            points: vec![xi],
            weights: vec![1.0],
        }
    }

    /// The spin measure of a de Finetti increment model.
    pub fn from_model(model: &IncrementModel) -> Result<Self> {
        model.validate()?;
        Ok(match model {
            IncrementModel::IidBernoulli { p } => Self::delta(1.0 - 2.0 * p),
            IncrementModel::DeFinettiDiscrete { atoms, weights } => Self::Discrete {
                points: atoms.iter().map(|w| 1.0 - 2.0 * w).collect(),
                weights: weights.clone(),
            },
            IncrementModel::DeFinettiBeta { a, b } => Self::Jacobi { a: *a, b: *b },
            IncrementModel::SymmetricBetaSpin { a, b } => Self::SymmetricBeta { a: *a, b: *b },
            other => {
                return Err(Error::Unsupported(format!(
                    "{} has no mixing measure",
                    other.name()
                )))
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Discrete { points, weights } => {
                ensure!(!points.is_empty(), Domain, "empty spin measure");
                ensure!(
                    points.len() == weights.len(),
                    Domain,
                    "points and weights differ in length"
                );
                for &p in points {
                    ensure!(
                        (-1.0..=1.0).contains(&p),
                        Domain,
                        "spin {p} outside [-1, 1]"
                    );
                }
                ensure!(weights.iter().all(|w| *w >= 0.0), Domain, "negative weight");
                let t: f64 = weights.iter().sum();
                ensure!((t - 1.0).abs() < 1e-12, Domain, "weights sum to {t}");
            }
            Self::Jacobi { a, b } | Self::SymmetricBeta { a, b } => {
                ensure!(
                    *a > 0.0 && *b > 0.0,
                    Domain,
                    "Beta parameters must be positive"
                );
            }
        }
        Ok(())
    }

    /// `∫ ξ^k`.
    pub fn moment(&self, k: usize) -> f64 {
        match self {
            Self::Discrete { points, weights } => points
                .iter()
                .zip(weights)
                .map(|(x, w)| w * x.powi(k as i32))
                .sum(),
            Self::Jacobi { a, b } => beta_spin_moments(*a, *b, k)[k],
            Self::SymmetricBeta { a, b } => {
                if k % 2 == 1 {
                    0.0
                } else {
                    beta_raw_moment(*a, *b, k)
                }
            }
        }
    }

    pub fn atom_at_zero(&self) -> f64 {
        match self {
            Self::Discrete { points, weights } => points
                .iter()
                .zip(weights)
                .filter(|(x, _)| **x == 0.0)
                .map(|(_, w)| w)
                .sum(),
            _ => 0.0,
        }
    }

    /// `(∫_{ξ>0} |ξ|^θ, ∫_{ξ<0} |ξ|^θ)`.
    pub fn abs_power_split(&self, theta: f64) -> Result<(f64, f64)> {
        match self {
            Self::Discrete { points, weights } => {
                let mut pos = 0.0;
                let mut neg = 0.0;
                for (x, w) in points.iter().zip(weights) {
                    if *x > 0.0 {
                        pos += w * x.powf(theta);
                    } else if *x < 0.0 {
                        neg += w * (-x).powf(theta);
                    }
                }
                Ok((pos, neg))
            }
            Self::SymmetricBeta { a, b } => {
                let half = 0.5 * beta_power_factor(*a, *b, theta);
                Ok((half, half))
            }
            Self::Jacobi { a, b } => Ok((jacobi_half(*a, *b, theta)?, jacobi_half(*b, *a, theta)?)),
        }
    }

    /// `∫ |ξ|^θ`.
    pub fn abs_power(&self, theta: f64) -> Result<f64> {
        let (p, n) = self.abs_power_split(theta)?;
        Ok(p + n)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Discrete { points, weights } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (x, w) in points.iter().zip(weights) {
                    acc += w;
                    if u < acc {
                        return *x;
                    }
                }
                points[points.len() - 1]
            }
            Self::Jacobi { a, b } => 1.0 - 2.0 * Beta::new(*a, *b).expect("validated").sample(rng),
            Self::SymmetricBeta { a, b } => {
                let m = Beta::new(*a, *b).expect("validated").sample(rng);
                if rng.random::<bool>() {
                    m
                } else {
                    -m
                }
            }
        }
    }
}

/// `E[B^θ] = Γ(a+θ)Γ(a+b) / (Γ(a+b+θ)Γ(a))` for `B ~ Beta(a, b)`.
pub fn beta_power_factor(a: f64, b: f64, theta: f64) -> f64 {
    (ln_gamma(a + theta) + ln_gamma(a + b) - ln_gamma(a + b + theta) - ln_gamma(a)).exp()
}

// ∫_{ω<1/2} (1−2ω)^θ Beta(a,b)(dω), with ω = u^{1/a}/2 to absorb ω^{a−1}.
fn jacobi_half(a: f64, b: f64, theta: f64) -> Result<f64> {
    let pref = (-a * std::f64::consts::LN_2 - a.ln() - ln_beta(a, b)).exp();
    let v = integrate(
        |u| {
            let w = 0.5 * u.powf(1.0 / a);
            let base = 1.0 - 2.0 * w;
            let f = if theta == 0.0 {
                1.0
            } else {
                base.max(0.0).powf(theta)
            };
            f * (1.0 - w).powf(b - 1.0)
        },
        0.0,
        1.0,
        SPIN_QUAD_TOL,
    )?;
    Ok(pref * v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    fn factor(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

/// A product of spins carried as sign and `log|·|` to avoid underflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub negative: bool,
    /// `−∞` for an exact zero.
    pub log_abs: f64,
}

impl SignedLog {
    pub const ONE: Self = Self {
        negative: false,
        log_abs: 0.0,
    };

    pub fn times(self, xi: f64) -> Self {
        Self {
            negative: self.negative ^ (xi < 0.0),
            log_abs: self.log_abs + xi.abs().ln(),
        }
    }

    pub fn value(self) -> f64 {
        let m = self.log_abs.exp();
        if self.negative {
            -m
        } else {
            m
        }
    }

    pub fn is_zero(self) -> bool {
        self.log_abs == f64::NEG_INFINITY
    }
}

/// The law of `Y_φ = ξ_0 Π_{j=1}^{T} ξ_j` with `T` a mixed Poisson
/// (geometric for `φ = 1`) number of spins and `ξ_0 ~ φ_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YLaw {
    pub spin: SpinMeasure,
    pub alpha: f64,
    pub phi: f64,
    pub initial: SpinMeasure,
}

impl YLaw {
    pub fn new(spin: SpinMeasure, alpha: f64) -> Result<Self> {
        let law = Self {
            spin,
            alpha,
            phi: 1.0,
            initial: SpinMeasure::delta(1.0),
        };
        law.validate()?;
        Ok(law)
    }

    pub fn from_model(model: &IncrementModel, alpha: f64) -> Result<Self> {
        Self::new(SpinMeasure::from_model(model)?, alpha)
    }

    pub fn with_phi(mut self, phi: f64) -> Result<Self> {
        self.phi = phi;
        self.validate()?;
        Ok(self)
    }

    pub fn with_initial(mut self, initial: SpinMeasure) -> Result<Self> {
        self.initial = initial;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        ensure!(
            self.phi > 0.0 && self.phi.is_finite(),
            Domain,
            "phi must be positive"
        );
        self.spin.validate()?;
        self.initial.validate()
    }

    pub fn c(&self) -> f64 {
        killing_ratio(self.alpha)
    }

    /// `E[Y_φ^k] = (1 + c(1 − ρ_k))^{-φ} ∫ ξ^k φ_0(dξ)`.
    pub fn moment(&self, k: usize) -> f64 {
        let rho = self.spin.moment(k);
        (1.0 + self.c() * (1.0 - rho)).powf(-self.phi) * self.initial.moment(k)
    }

    pub fn moments(&self, kmax: usize) -> Vec<f64> {
        (0..=kmax).map(|k| self.moment(k)).collect()
    }

    /// One draw of `Y` (`φ = 1`): a geometric number of spins.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SignedLog> {
        Ok(self.sample_with_count(rng)?.1)
    }

    /// A draw of `Y` together with its number of spins `T`.
    pub fn sample_with_count<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(u64, SignedLog)> {
        ensure!(
            self.phi == 1.0,
            Domain,
            "the geometric construction is for phi = 1; use sample_phi"
        );
        let t = sample_geometric(self.alpha, rng);
        Ok((t, self.product(t, rng)))
    }

    /// One draw of `Y_φ`: `λ ~ Gamma(φ, 1)`, `M ~ Poisson(λc)` spins.
    pub fn sample_phi<R: Rng + ?Sized>(&self, rng: &mut R) -> SignedLog {
        let lambda: f64 = Gamma::new(self.phi, 1.0).expect("validated").sample(rng);
        let mean = lambda * self.c();
        let m = if mean > 0.0 {
            Poisson::new(mean).expect("positive mean").sample(rng) as u64
        } else {
            0
        };
        self.product(m, rng)
    }

    fn product<R: Rng + ?Sized>(&self, count: u64, rng: &mut R) -> SignedLog {
        let mut y = SignedLog::ONE.times(self.initial.sample(rng));
        for _ in 0..count {
            if y.is_zero() {
                break;
            }
            y = y.times(self.spin.sample(rng));
        }
        y
    }

    fn check_no_zero_atoms(&self) -> Result<()> {
        ensure!(
            self.spin.atom_at_zero() == 0.0 && self.initial.atom_at_zero() == 0.0,
            Domain,
            "spin measures must not have an atom at zero"
        );
        Ok(())
    }

    // H(s) = E[Π f_s(ξ_j)] with f_s = |ξ|^θ on ξ > 0 and s|ξ|^θ on ξ < 0.
    fn h(&self, theta: f64, s: f64) -> Result<f64> {
        let (ap, an) = self.spin.abs_power_split(theta)?;
        let (bp, bn) = self.initial.abs_power_split(theta)?;
        Ok((1.0 + self.c() * (1.0 - (ap + s * an))).powf(-self.phi) * (bp + s * bn))
    }

    /// `E[|Y_φ|^θ] = E[exp(−θ(−log|Y_φ|))]`.
    pub fn laplace_neg_log_abs(&self, theta: f64) -> Result<f64> {
        ensure!(theta >= 0.0, Domain, "theta must be nonnegative");
        self.check_no_zero_atoms()?;
        self.h(theta, 1.0)
    }

    /// `E[1{sign(Y_φ) = s} |Y_φ|^θ] = (H(1) ± H(−1)) / 2`.
    pub fn joint_sign_laplace(&self, theta: f64, sign: Sign) -> Result<f64> {
        ensure!(theta >= 0.0, Domain, "theta must be nonnegative");
        self.check_no_zero_atoms()?;
        Ok(0.5 * self.h(theta, 1.0)? + 0.5 * sign.factor() * self.h(theta, -1.0)?)
    }

    /// `P(sign(Y_φ) = s)`.
    pub fn sign_probability(&self, sign: Sign) -> Result<f64> {
        self.joint_sign_laplace(0.0, sign)
    }
}

/// Law of `ψ_t = ξ_0 Π_{j=1}^t ξ_j` after `t` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolvedMeasure {
    pub spin: SpinMeasure,
    pub initial: SpinMeasure,
    pub t: u64,
}

impl EvolvedMeasure {
    /// `E[ψ_t^k] = (∫ξ^k ν)^t ∫ξ^k φ_0`.
    pub fn moment(&self, k: usize) -> f64 {
        self.spin.moment(k).powf(self.t as f64) * self.initial.moment(k)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut y = self.initial.sample(rng);
        for _ in 0..self.t {
            y *= self.spin.sample(rng);
        }
        y
    }
}

pub fn evolve_measure(spin: &SpinMeasure, initial: &SpinMeasure, t: u64) -> Result<EvolvedMeasure> {
    spin.validate()?;
    initial.validate()?;
    Ok(EvolvedMeasure {
        spin: spin.clone(),
        initial: initial.clone(),
        t,
    })
}

/// `E[V^n (1−V)^{N−n}]` with `V = (1 − Y)/2`, expanded as
/// `2^{-N} Σ_k C(N,k) Q_k(n) E[Y^k]`.
pub fn killed_measure_moments(law: &YLaw, n: usize, big_n: usize) -> Result<f64> {
    ensure!(
        law.phi == 1.0,
        Domain,
        "killed measure is defined for phi = 1"
    );
    ensure!(n <= big_n, Domain, "n = {n} exceeds N = {big_n}");
    let mut s = 0.0;
    for k in 0..=big_n {
        s += crate::polynomials::krawtchouk_scaled(k, n, big_n)? as f64 * law.moment(k);
    }
    Ok(s * 0.5f64.powi(big_n as i32))
}

/// Monte Carlo estimate of the same quantity from draws of `Y`.
pub fn killed_measure_moments_mc<R: Rng + ?Sized>(
    law: &YLaw,
    n: usize,
    big_n: usize,
    draws: usize,
    rng: &mut R,
) -> Result<Estimate> {
    ensure!(n <= big_n, Domain, "n = {n} exceeds N = {big_n}");
    let mut m = Moments::default();
    for _ in 0..draws {
        let v = 0.5 * (1.0 - law.sample(rng)?.value());
        m.push(v.powi(n as i32) * (1.0 - v).powi((big_n - n) as i32));
    }
    Ok(m.estimate())
}

/// Density of the `t`-fold product of symmetric spins with `|ξ| ~ Beta(a, 1)`:
/// `g_t(ζ) = (a/2)|ζ|^{a−1}(−a log|ζ|)^{t−1} / Γ(t)`.
pub fn beta_example_g(a: f64, t: u32, zeta: f64) -> Result<f64> {
    ensure!(t >= 1, Domain, "t must be at least 1");
    ensure!(a > 0.0, Domain, "a must be positive");
    let z = zeta.abs();
    if z == 0.0 || z > 1.0 {
        return Ok(0.0);
    }
    let l = -a * z.ln();
    let tf = t as f64;
    Ok(0.5 * a * ((a - 1.0) * z.ln() + (tf - 1.0) * l.ln() - ln_gamma(tf)).exp())
}

/// Continuous part of the killed product for `|ξ| ~ Beta(a, 1)`:
/// `α(1−α)(a/2)|ζ|^{a(1−α)−1}` on `[−1, 1]`, total mass `α`. The remaining
/// mass `1−α` is an atom at `ζ = 1` (no spins drawn).
pub fn beta_example_density(a: f64, b: f64, alpha: f64, zeta: f64) -> Result<f64> {
    ensure!(
        b == 1.0,
        Unsupported,
        "closed-form density only for b = 1; use the sampler"
    );
    ensure!(a > 0.0, Domain, "a must be positive");
    check_alpha(alpha)?;
    let z = zeta.abs();
    if z == 0.0 || z > 1.0 {
        return Ok(if z == 0.0 && a * (1.0 - alpha) < 1.0 {
            f64::INFINITY
        } else {
            0.0
        });
    }
    Ok(alpha * (1.0 - alpha) * 0.5 * a * z.powf(a * (1.0 - alpha) - 1.0))
}

pub fn beta_example_atom(alpha: f64) -> f64 {
    1.0 - alpha
}

/// Mass of the continuous part on `lo < ζ ≤ hi` (`−1 ≤ lo < hi ≤ 1`).
pub fn beta_example_interval(a: f64, alpha: f64, lo: f64, hi: f64) -> f64 {
    let s = a * (1.0 - alpha);
    // P(0 < ζ ≤ r) = (α/2) r^s for the continuous part
    let half = |r: f64| 0.5 * alpha * r.abs().powf(s) * r.signum();
    half(hi) - half(lo)
}

/// Draws the killed product for `|ξ| ~ Beta(a, b)` with integer `b`, using
/// `−log B = Σ_{j<b} E_j/(a+j)`: a `T`-fold product needs `b` Gamma(T) draws.
pub fn sample_beta_example<R: Rng + ?Sized>(
    a: f64,
    b: u32,
    alpha: f64,
    rng: &mut R,
) -> Result<SignedLog> {
    ensure!(a > 0.0 && b >= 1, Domain, "need a > 0 and integer b >= 1");
    check_alpha(alpha)?;
    let t = sample_geometric(alpha, rng);
    if t == 0 {
        return Ok(SignedLog::ONE);
    }
    let shape = Gamma::new(t as f64, 1.0).map_err(|e| Error::Numeric(e.to_string()))?;
    let mut log_abs = 0.0;
    for j in 0..b {
        log_abs -= shape.sample(rng) / (a + j as f64);
    }
    Ok(SignedLog {
        negative: rng.random::<bool>(),
        log_abs,
    })
}
