//! Bit-level helpers for vertices of `{0,1}^N` and subsets of `[N]`.
//!
//! Coordinate `j` (1-based) is stored in bit `j - 1`, so a vertex and a
//! subset share one 64-bit encoding.

use crate::error::{ensure, Result};

/// A vertex of the hypercube, or equivalently a subset of `[N]`.
pub type VertexIndex = u64;

/// Largest dimension whose vertices fit in a [`VertexIndex`].
pub const MAX_VERTEX_BITS: usize = 64;

/// Largest dimension for routines that touch all `2^N` vertices or subsets.
pub const MAX_ENUMERATION_BITS: usize = 24;

#[inline]
pub fn weight(x: VertexIndex) -> usize {
    x.count_ones() as usize
}

/// The Walsh character `prod_{j in A} (-1)^{x[j]}`.
#[inline]
pub fn character(x: VertexIndex, a: VertexIndex) -> f64 {
    if (x & a).count_ones() & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

#[inline]
pub fn full_mask(n: usize) -> VertexIndex {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

pub(crate) fn check_vertex_dim(n: usize) -> Result<()> {
    ensure!(n >= 1, Domain, "dimension must be positive, got {n}");
    ensure!(
        n <= MAX_VERTEX_BITS,
        Resource,
        "dimension {n} exceeds the {MAX_VERTEX_BITS}-bit vertex encoding"
    );
    Ok(())
}

pub(crate) fn check_enumeration_dim(n: usize, cap: usize) -> Result<()> {
    ensure!(n >= 1, Domain, "dimension must be positive, got {n}");
    ensure!(
        n <= cap,
        Resource,
        "dimension {n} exceeds the enumeration cap {cap}"
    );
    Ok(())
}

pub(crate) fn check_in_cube(x: VertexIndex, n: usize) -> Result<()> {
    check_vertex_dim(n)?;
    ensure!(
        x & !full_mask(n) == 0,
        Domain,
        "vertex/subset {x:#x} has bits outside [{n}]"
    );
    Ok(())
}

/// All submasks of `c`, including the empty set and `c` itself.
pub fn submasks(c: VertexIndex) -> impl Iterator<Item = VertexIndex> {
    let mut next = Some(c);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 { None } else { Some((cur - 1) & c) };
        Some(cur)
    })
}

/// Submasks of `c` with exactly `k` elements.
pub fn submasks_of_size(c: VertexIndex, k: usize) -> impl Iterator<Item = VertexIndex> {
    submasks(c).filter(move |a| weight(*a) == k)
}

/// Highest set bit as a 1-based coordinate; `None` for the empty set.
#[inline]
pub fn max_element(a: VertexIndex) -> Option<usize> {
    if a == 0 {
        None
    } else {
        Some(64 - a.leading_zeros() as usize)
    }
}

/// Binomial coefficient as `f64`, exact while the value fits in 53 bits.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for j in 0..k {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc.round_if_small()
}

/// `ln C(n, k)`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

pub fn ln_factorial(n: usize) -> f64 {
    statrs::function::factorial::ln_factorial(n as u64)
}

/// Exact binomial coefficient; `None` on overflow.
pub fn binomial_i128(n: usize, k: usize) -> Option<i128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for j in 0..k {
        acc = acc.checked_mul((n - j) as i128)? / (j as i128 + 1);
    }
    Some(acc)
}

trait RoundIfSmall {
    fn round_if_small(self) -> Self;
}

impl RoundIfSmall for f64 {
    fn round_if_small(self) -> f64 {
        if self < 9.0e15 {
            self.round()
        } else {
            self
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn submask_enumeration_counts() {
        let c = 0b1011_0010;
        assert_eq!(submasks(c).count(), 16);
        assert_eq!(submasks_of_size(c, 2).count(), 6);
        assert!(submasks(c).all(|a| a & !c == 0));
        assert_eq!(submasks(0).collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn character_is_parity() {
        assert_eq!(character(0b101, 0b111), 1.0);
        assert_eq!(character(0b100, 0b111), -1.0);
        assert_eq!(character(0b100, 0), 1.0);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(10, 3), 120.0);
        assert!((binomial(64, 32) / 1832624140942590534.0 - 1.0).abs() < 1e-14);
        assert_eq!(binomial_i128(64, 32), Some(1832624140942590534));
        assert!((ln_binomial(400, 200) - binomial(400, 200).ln()).abs() < 1e-9);
        assert_eq!(max_element(0b1000), Some(4));
        assert_eq!(max_element(0), None);
    }
}
