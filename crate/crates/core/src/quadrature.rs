//! Adaptive Gauss–Legendre quadrature on finite intervals.

use crate::error::{Error, Result};
use std::sync::OnceLock;

const ORDER: usize = 20;
const MAX_PIECES: usize = 4000;

fn rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| legendre_rule(ORDER))
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [−1, 1].
pub fn legendre_rule(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn fixed<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule()
        .iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl Piece {
    fn new<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Self {
        let m = 0.5 * (a + b);
        let whole = fixed(f, a, b);
        let value = fixed(f, a, m) + fixed(f, m, b);
        Piece {
            a,
            b,
            value,
            err: (value - whole).abs(),
        }
    }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Globally adaptive: the piece with the largest error estimate is bisected
/// until the summed estimate drops below `tol`. Integrable power
/// singularities at the endpoints converge, if slowly.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut pieces = vec![Piece::new(&f, a, b)];
    for _ in 0..MAX_PIECES {
        let total_err: f64 = pieces.iter().map(|p| p.err).sum();
        if total_err <= tol {
            break;
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .map(|(i, _)| i)
            .unwrap();
        let p = pieces.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            // interval exhausted at machine precision; keep its estimate
            pieces.push(Piece { err: 0.0, ..p });
            continue;
        }
        pieces.push(Piece::new(&f, p.a, m));
        pieces.push(Piece::new(&f, m, p.b));
    }
    let total_err: f64 = pieces.iter().map(|p| p.err).sum();
    let value: f64 = pieces.iter().map(|p| p.value).sum();
    if !value.is_finite() {
        return Err(Error::Numeric(format!("non-finite integral on [{a}, {b}]")));
    }
    if total_err > tol.max(1e-14 * value.abs()) {
        return Err(Error::Numeric(format!(
            "quadrature on [{a}, {b}] stalled with error estimate {total_err:.3e}"
        )));
    }
    Ok(value)
}

/// Integrates over `[a, ∞)` with the substitution `x = a + u/(1−u)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> Result<f64> {
    integrate(
        |u| {
            if u >= 1.0 {
                return 0.0;
            }
            let d = 1.0 - u;
            f(a + u / d) / (d * d)
        },
        0.0,
        1.0,
        tol,
    )
}
