//! Laws of the increment `Z` and the eigenvalue functionals `ρ_A`, `ρ_k`, `b_A`.

use crate::bits::{check_in_cube, check_vertex_dim, full_mask, weight, VertexIndex};
use crate::error::{ensure, Error, Result};
use crate::polynomials::{krawtchouk_eval, KrawtchoukBasis};
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

/// Law of one increment of the walk.
///
/// Serialized with an internal `model` tag, e.g. `{"model": "mflip", "M": 2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case", deny_unknown_fields)]
pub enum IncrementModel {
    /// Entries i.i.d. Bernoulli(p).
    IidBernoulli { p: f64 },
    /// Mixing measure with finitely many atoms `ω_i`.
    DeFinettiDiscrete { atoms: Vec<f64>, weights: Vec<f64> },
    /// Mixing measure Beta(a, b).
    DeFinettiBeta { a: f64, b: f64 },
    /// One uniformly placed flip.
    SingleFlip,
    /// Exactly `M` flips, uniformly placed.
    #[serde(rename = "mflip", alias = "m-flip")]
    MFlip {
        #[serde(rename = "M")]
        m: usize,
    },
    /// One uniformly chosen entry set to a fair bit.
    RandomSiteHalf,
    /// Entries form a two-state Markov chain along the coordinates.
    MarkovEntries {
        initial: [f64; 2],
        transition: [[f64; 2]; 2],
    },
    /// Spin `ξ = 1 − 2ω` symmetric about 0 with `|ξ| ~ Beta(a, b)`.
    SymmetricBetaSpin { a: f64, b: f64 },
    /// Limit regime with `b_A = 2|A|/γ`.
    LimitLinear { gamma: f64 },
    /// Poisson–Dirichlet limit regime.
    LimitPoissonDirichlet { kappa: f64 },
}

fn finite_pos(x: f64, name: &str) -> Result<()> {
    ensure!(
        x.is_finite() && x > 0.0,
        Domain,
        "{name} must be finite and positive, got {x}"
    );
    Ok(())
}

fn probability(x: f64, name: &str) -> Result<()> {
    ensure!(
        (0.0..=1.0).contains(&x),
        Domain,
        "{name} must lie in [0, 1], got {x}"
    );
    Ok(())
}

impl IncrementModel {
    pub fn name(&self) -> &'static str {
        match self {
            Self::IidBernoulli { .. } => "iid-bernoulli",
            Self::DeFinettiDiscrete { .. } => "de-finetti-discrete",
            Self::DeFinettiBeta { .. } => "de-finetti-beta",
            Self::SingleFlip => "single-flip",
            Self::MFlip { .. } => "mflip",
            Self::RandomSiteHalf => "random-site-half",
            Self::MarkovEntries { .. } => "markov-entries",
            Self::SymmetricBetaSpin { .. } => "symmetric-beta-spin",
            Self::LimitLinear { .. } => "limit-linear",
            Self::LimitPoissonDirichlet { .. } => "limit-poisson-dirichlet",
        }
    }

    /// Checks parameter ranges independent of `N`.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::IidBernoulli { p } => probability(*p, "p"),
            Self::DeFinettiDiscrete { atoms, weights } => {
                ensure!(
                    !atoms.is_empty(),
                    Domain,
                    "discrete mixing measure needs at least one atom"
                );
                ensure!(
                    atoms.len() == weights.len(),
                    Domain,
                    "{} atoms but {} weights",
                    atoms.len(),
                    weights.len()
                );
                for &w in atoms {
                    probability(w, "atom")?;
                }
                for &w in weights {
                    ensure!(
                        w >= 0.0 && w.is_finite(),
                        Domain,
                        "weights must be nonnegative, got {w}"
                    );
                }
                let total: f64 = weights.iter().sum();
                ensure!(
                    (total - 1.0).abs() < 1e-12,
                    Domain,
                    "weights sum to {total}, not 1"
                );
                Ok(())
            }
            Self::DeFinettiBeta { a, b } | Self::SymmetricBetaSpin { a, b } => {
                finite_pos(*a, "a")?;
                finite_pos(*b, "b")
            }
            Self::SingleFlip | Self::RandomSiteHalf => Ok(()),
            Self::MFlip { .. } => Ok(()),
            Self::MarkovEntries {
                initial,
                transition,
            } => {
                for &v in initial.iter().chain(transition.iter().flatten()) {
                    probability(v, "Markov probability")?;
                }
                ensure!(
                    (initial[0] + initial[1] - 1.0).abs() < 1e-12,
                    Domain,
                    "initial distribution must sum to 1"
                );
                for row in transition {
                    ensure!(
                        (row[0] + row[1] - 1.0).abs() < 1e-12,
                        Domain,
                        "transition rows must sum to 1"
                    );
                }
                Ok(())
            }
            Self::LimitLinear { gamma } => finite_pos(*gamma, "gamma"),
            Self::LimitPoissonDirichlet { kappa } => finite_pos(*kappa, "kappa"),
        }
    }

    /// Checks parameters together with the dimension `N`.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        self.validate()?;
        ensure!(n >= 1, Domain, "dimension must be positive, got {n}");
        if let Self::MFlip { m } = self {
            ensure!(*m <= n, Domain, "M = {m} exceeds N = {n}");
        }
        Ok(())
    }

    pub fn is_limit(&self) -> bool {
        matches!(
            self,
            Self::LimitLinear { .. } | Self::LimitPoissonDirichlet { .. }
        )
    }

    pub fn is_exchangeable(&self) -> bool {
        !matches!(self, Self::MarkovEntries { .. })
    }

    /// Variants described by a mixing measure on `[0, 1]` (i.e. infinitely
    /// extendable exchangeable laws).
    pub fn is_de_finetti(&self) -> bool {
        matches!(
            self,
            Self::IidBernoulli { .. }
                | Self::DeFinettiDiscrete { .. }
                | Self::DeFinettiBeta { .. }
                | Self::SymmetricBetaSpin { .. }
        )
    }

    /// Whether the law of the first `n` entries is the same for every `N ≥ n`.
    pub fn is_consistent_in_n(&self) -> bool {
        self.is_de_finetti() || matches!(self, Self::MarkovEntries { .. })
    }

    fn reject_limit(&self, what: &str) -> Result<()> {
        ensure!(
            !self.is_limit(),
            Unsupported,
            "{what} is not defined for the limit regime {}",
            self.name()
        );
        Ok(())
    }
}

/// `E[(1−2ω)^k]` for `ω ~ Beta(a, b)`, by the three-term recurrence
/// `(k+a+b) m_{k+1} = k m_{k−1} + (b−a) m_k`.
pub fn beta_spin_moments(a: f64, b: f64, kmax: usize) -> Vec<f64> {
    let mut m = Vec::with_capacity(kmax + 1);
    m.push(1.0);
    if kmax >= 1 {
        m.push((b - a) / (a + b));
    }
    for k in 1..kmax {
        let kf = k as f64;
        let next = (kf * m[k - 1] + (b - a) * m[k]) / (kf + a + b);
        m.push(next);
    }
    m
}

/// `E[B^k]` for `B ~ Beta(a, b)`.
pub fn beta_raw_moment(a: f64, b: f64, k: usize) -> f64 {
    (0..k)
        .map(|j| (a + j as f64) / (a + b + j as f64))
        .product()
}

/// `b_k` of the Poisson–Dirichlet limit, `κ ∫ (1−(1−2ω)^k) ω^{−1}(1−ω)^{κ−1} dω`.
///
/// Evaluated as `2κ Σ_{m<k} I_m` with `I_m = ∫(1−2ω)^m (1−ω)^{κ−1} dω`,
/// `(m+κ) I_m = 1 − m I_{m−1}`; the closed alternating sum cancels badly
/// for large `k`.
pub fn poisson_dirichlet_b(kappa: f64, k: usize) -> f64 {
    let mut sum = 0.0;
    let mut prev = 0.0;
    for m in 0..k {
        let i_m = (1.0 - m as f64 * prev) / (m as f64 + kappa);
        sum += i_m;
        prev = i_m;
    }
    2.0 * kappa * sum
}

/// The alternating falling/rising factorial form of [`poisson_dirichlet_b`];
/// only accurate for small `k`.
pub fn poisson_dirichlet_b_alternating(kappa: f64, k: usize) -> f64 {
    let mut sum = 0.0;
    let mut ratio = 1.0;
    let mut pow2 = 1.0;
    for j in 1..=k {
        ratio *= (k - j + 1) as f64 / (kappa + (j - 1) as f64);
        pow2 *= 2.0;
        let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * pow2 / j as f64 * ratio;
    }
    kappa * sum
}

/// `ρ_k`: the value of `ρ_A` for any `|A| = k`.
pub fn rho_k(model: &IncrementModel, k: usize, n: usize) -> Result<f64> {
    model.validate_for(n)?;
    model.reject_limit("rho")?;
    ensure!(k <= n, Domain, "k = {k} exceeds N = {n}");
    rho_k_unchecked(model, k, n)
}

fn rho_k_unchecked(model: &IncrementModel, k: usize, n: usize) -> Result<f64> {
    let nf = n as f64;
    let kf = k as f64;
    Ok(match model {
        IncrementModel::IidBernoulli { p } => (1.0 - 2.0 * p).powi(k as i32),
        IncrementModel::DeFinettiDiscrete { atoms, weights } => atoms
            .iter()
            .zip(weights)
            .map(|(w, p)| p * (1.0 - 2.0 * w).powi(k as i32))
            .sum(),
        IncrementModel::DeFinettiBeta { a, b } => beta_spin_moments(*a, *b, k)[k],
        IncrementModel::SymmetricBetaSpin { a, b } => {
            if k % 2 == 1 {
                0.0
            } else {
                beta_raw_moment(*a, *b, k)
            }
        }
        IncrementModel::SingleFlip => 1.0 - 2.0 * kf / nf,
        IncrementModel::MFlip { m } => krawtchouk_eval(*m, k, n)?,
        // P(flip lands in A) = k/N and the flip is then a fair bit.
        IncrementModel::RandomSiteHalf => 1.0 - kf / nf,
        IncrementModel::MarkovEntries { .. } => {
            return Err(Error::Unsupported(
                "markov-entries is not exchangeable; use rho_subset".into(),
            ))
        }
        IncrementModel::LimitLinear { .. } | IncrementModel::LimitPoissonDirichlet { .. } => {
            return Err(Error::Unsupported("limit regimes define only b_A".into()))
        }
    })
}

/// `ρ_k` for `k = 0..=N`. MFlip uses one exact Krawtchouk table.
pub fn rho_table(model: &IncrementModel, n: usize) -> Result<Vec<f64>> {
    model.validate_for(n)?;
    model.reject_limit("rho")?;
    match model {
        IncrementModel::DeFinettiBeta { a, b } => Ok(beta_spin_moments(*a, *b, n)),
        IncrementModel::MFlip { m } if n <= crate::polynomials::MAX_EXACT_N => {
            let basis = KrawtchoukBasis::new(n)?;
            Ok((0..=n).map(|k| basis.value(*m, k)).collect())
        }
        _ => (0..=n).map(|k| rho_k_unchecked(model, k, n)).collect(),
    }
}

/// `ρ_A = E[Π_{k∈A} (−1)^{Z[k]}]`.
pub fn rho_subset(model: &IncrementModel, a: VertexIndex, n: usize) -> Result<f64> {
    model.validate_for(n)?;
    model.reject_limit("rho")?;
    check_in_cube(a, n)?;
    match model {
        IncrementModel::MarkovEntries {
            initial,
            transition,
        } => Ok(markov_rho(initial, transition, a)),
        _ => rho_k_unchecked(model, weight(a), n),
    }
}

// Row vector π D_1 T D_2 … T D_m, summed; D_j flips the sign of state 1 when j ∈ A.
fn markov_rho(initial: &[f64; 2], transition: &[[f64; 2]; 2], a: VertexIndex) -> f64 {
    let Some(m) = crate::bits::max_element(a) else {
        return 1.0;
    };
    let mut v = *initial;
    for j in 1..=m {
        if j > 1 {
            v = [
                v[0] * transition[0][0] + v[1] * transition[1][0],
                v[0] * transition[0][1] + v[1] * transition[1][1],
            ];
        }
        if a >> (j - 1) & 1 == 1 {
            v[1] = -v[1];
        }
    }
    v[0] + v[1]
}

/// `b_A = c (1 − ρ_A)` with `c = α/(1−α)`; limit regimes use their own
/// closed forms and ignore `α`.
pub fn b_subset(model: &IncrementModel, a: VertexIndex, n: usize, alpha: f64) -> Result<f64> {
    check_in_cube(a, n)?;
    match model {
        IncrementModel::LimitLinear { .. } | IncrementModel::LimitPoissonDirichlet { .. } => {
            model.validate()?;
            b_k(model, weight(a), n, alpha)
        }
        _ => {
            check_alpha(alpha)?;
            Ok(killing_ratio(alpha) * (1.0 - rho_subset(model, a, n)?))
        }
    }
}

/// `b_A` for `|A| = k` (exchangeable models and limit regimes).
pub fn b_k(model: &IncrementModel, k: usize, n: usize, alpha: f64) -> Result<f64> {
    match model {
        IncrementModel::LimitLinear { gamma } => {
            model.validate()?;
            Ok(2.0 * k as f64 / gamma)
        }
        IncrementModel::LimitPoissonDirichlet { kappa } => {
            model.validate()?;
            Ok(poisson_dirichlet_b(*kappa, k))
        }
        _ => {
            check_alpha(alpha)?;
            Ok(killing_ratio(alpha) * (1.0 - rho_k(model, k, n)?))
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    ensure!(
        alpha > 0.0 && alpha < 1.0,
        Domain,
        "killing parameter alpha must lie in (0, 1), got {alpha}"
    );
    Ok(())
}

/// `c = α / (1 − α)`.
#[inline]
pub fn killing_ratio(alpha: f64) -> f64 {
    alpha / (1.0 - alpha)
}

fn draw_omega<R: Rng + ?Sized>(model: &IncrementModel, rng: &mut R) -> Result<f64> {
    Ok(match model {
        IncrementModel::IidBernoulli { p } => *p,
        IncrementModel::DeFinettiDiscrete { atoms, weights } => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = atoms[atoms.len() - 1];
            for (w, p) in atoms.iter().zip(weights) {
                acc += p;
                if u < acc {
                    pick = *w;
                    break;
                }
            }
            pick
        }
        IncrementModel::DeFinettiBeta { a, b } => Beta::new(*a, *b)
            .map_err(|e| Error::Domain(e.to_string()))?
            .sample(rng),
        IncrementModel::SymmetricBetaSpin { .. } => 0.5 * (1.0 - draw_spin(model, rng)?),
        _ => {
            return Err(Error::Unsupported(format!(
                "{} has no mixing measure",
                model.name()
            )))
        }
    })
}

fn draw_spin<R: Rng + ?Sized>(model: &IncrementModel, rng: &mut R) -> Result<f64> {
    match model {
        IncrementModel::SymmetricBetaSpin { a, b } => {
            let m = Beta::new(*a, *b)
                .map_err(|e| Error::Domain(e.to_string()))?
                .sample(rng);
            Ok(if rng.random::<bool>() { m } else { -m })
        }
        _ => Ok(1.0 - 2.0 * draw_omega(model, rng)?),
    }
}

/// One draw of the spin `ξ = 1 − 2ω`, `ω ~ ν`.
pub fn sample_spin_xi<R: Rng + ?Sized>(model: &IncrementModel, rng: &mut R) -> Result<f64> {
    model.validate()?;
    ensure!(
        model.is_de_finetti(),
        Unsupported,
        "{} has no spin measure",
        model.name()
    );
    draw_spin(model, rng)
}

/// One draw of `Z` as an `N`-bit word.
pub fn sample_z<R: Rng + ?Sized>(
    model: &IncrementModel,
    n: usize,
    rng: &mut R,
) -> Result<VertexIndex> {
    model.validate_for(n)?;
    check_vertex_dim(n)?;
    model.reject_limit("sampling Z")?;
    sample_z_unchecked(model, n, rng)
}

pub(crate) fn sample_z_unchecked<R: Rng + ?Sized>(
    model: &IncrementModel,
    n: usize,
    rng: &mut R,
) -> Result<VertexIndex> {
    Ok(match model {
        IncrementModel::SingleFlip => 1u64 << rng.random_range(0..n),
        IncrementModel::MFlip { m } => rand::seq::index::sample(rng, n, *m)
            .iter()
            .fold(0u64, |z, j| z | 1u64 << j),
        IncrementModel::RandomSiteHalf => {
            let j = rng.random_range(0..n);
            if rng.random::<bool>() {
                1u64 << j
            } else {
                0
            }
        }
        IncrementModel::MarkovEntries {
            initial,
            transition,
        } => {
            let mut z = 0u64;
            let mut state = usize::from(rng.random::<f64>() >= initial[0]);
            for j in 0..n {
                if j > 0 {
                    state = usize::from(rng.random::<f64>() >= transition[state][0]);
                }
                z |= (state as u64) << j;
            }
            z
        }
        _ => {
            let w = draw_omega(model, rng)?;
            (0..n).fold(0u64, |z, j| {
                if rng.random::<f64>() < w {
                    z | 1u64 << j
                } else {
                    z
                }
            })
        }
    })
}

/// The law of `Z` on `{0,1}^N`, listed as `(z, P(Z = z))` over all `z`
/// with positive probability. Computed from the model definition, not from
/// `ρ`, so it serves as an independent oracle.
pub fn z_law(model: &IncrementModel, n: usize) -> Result<Vec<(VertexIndex, f64)>> {
    model.validate_for(n)?;
    model.reject_limit("the law of Z")?;
    crate::bits::check_enumeration_dim(n, crate::bits::MAX_ENUMERATION_BITS)?;
    let nf = n as f64;
    let all = full_mask(n);
    let mut out = Vec::new();
    let weight_law = |f: &dyn Fn(usize) -> f64, out: &mut Vec<(VertexIndex, f64)>| {
        let table: Vec<f64> = (0..=n).map(f).collect();
        for z in 0..=all {
            let p = table[weight(z)];
            if p > 0.0 {
                out.push((z, p));
            }
        }
    };
    match model {
        IncrementModel::SingleFlip => {
            for j in 0..n {
                out.push((1u64 << j, 1.0 / nf));
            }
        }
        IncrementModel::MFlip { m } => {
            let p = 1.0 / crate::bits::binomial(n, *m);
            weight_law(&|w| if w == *m { p } else { 0.0 }, &mut out);
        }
        IncrementModel::RandomSiteHalf => {
            out.push((0, 0.5));
            for j in 0..n {
                out.push((1u64 << j, 0.5 / nf));
            }
        }
        IncrementModel::IidBernoulli { p } => {
            weight_law(
                &|w| p.powi(w as i32) * (1.0 - p).powi((n - w) as i32),
                &mut out,
            );
        }
        IncrementModel::DeFinettiDiscrete { atoms, weights } => {
            weight_law(
                &|w| {
                    atoms
                        .iter()
                        .zip(weights)
                        .map(|(o, q)| q * o.powi(w as i32) * (1.0 - o).powi((n - w) as i32))
                        .sum()
                },
                &mut out,
            );
        }
        IncrementModel::DeFinettiBeta { a, b } => {
            weight_law(
                &|w| (ln_beta(a + w as f64, b + (n - w) as f64) - ln_beta(*a, *b)).exp(),
                &mut out,
            );
        }
        IncrementModel::SymmetricBetaSpin { a, b } => {
            // E[ω^w (1−ω)^{N−w}] with ω = (1−ξ)/2: expand (1−ξ)^w (1+ξ)^{N−w}
            // in powers of ξ; odd powers vanish by symmetry.
            let basis = KrawtchoukBasis::new(n)?;
            let scale = 0.5f64.powi(n as i32);
            weight_law(
                &|w| {
                    (0..=n)
                        .step_by(2)
                        .map(|i| basis.scaled(i, w) as f64 * beta_raw_moment(*a, *b, i))
                        .sum::<f64>()
                        * scale
                },
                &mut out,
            );
        }
        IncrementModel::MarkovEntries {
            initial,
            transition,
        } => {
            for z in 0..=all {
                let mut p = initial[(z & 1) as usize];
                for j in 1..n {
                    p *= transition[(z >> (j - 1) & 1) as usize][(z >> j & 1) as usize];
                }
                if p > 0.0 {
                    out.push((z, p));
                }
            }
        }
        IncrementModel::LimitLinear { .. } | IncrementModel::LimitPoissonDirichlet { .. } => {
            unreachable!("rejected above")
        }
    }
    Ok(out)
}

/// `ρ_A` by summing the character over the enumerated law of `Z`.
pub fn rho_subset_brute(model: &IncrementModel, a: VertexIndex, n: usize) -> Result<f64> {
    check_in_cube(a, n)?;
    Ok(z_law(model, n)?
        .iter()
        .map(|&(z, p)| p * crate::bits::character(z, a))
        .sum())
}
