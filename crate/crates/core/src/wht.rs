//! In-place fast Walsh–Hadamard transform.
//!
//! `out[x] = Σ_a (−1)^{popcount(a & x)} v[a]`, unnormalized.

use rayon::prelude::*;

const PAR_THRESHOLD: usize = 1 << 14;

/// Transforms `v` in place; `v.len()` must be a power of two.
pub fn fwht(v: &mut [f64]) {
    let n = v.len();
    assert!(n.is_power_of_two(), "length must be a power of two");
    if n >= PAR_THRESHOLD {
        fwht_par(v);
    } else {
        fwht_serial(v);
    }
}

fn fwht_serial(v: &mut [f64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for chunk in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h <<= 1;
    }
}

// Transform each cache-sized block independently, then do the wide
// butterflies across blocks. Every output entry is produced by the same
// sequence of additions as the serial path, so results are bit-identical.
fn fwht_par(v: &mut [f64]) {
    let n = v.len();
    let block = PAR_THRESHOLD.min(n);
    v.par_chunks_mut(block).for_each(fwht_serial);
    let mut h = block;
    while h < n {
        v.par_chunks_mut(2 * h).for_each(|chunk| {
            let (lo, hi) = chunk.split_at_mut(h);
            lo.par_chunks_mut(4096)
                .zip(hi.par_chunks_mut(4096))
                .for_each(|(l, r)| {
                    for (a, b) in l.iter_mut().zip(r.iter_mut()) {
                        let (x, y) = (*a, *b);
                        *a = x + y;
                        *b = x - y;
                    }
                });
        });
        h <<= 1;
    }
}

/// Quadratic-time reference transform.
pub fn wht_naive(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|x| {
            v.iter()
                .enumerate()
                .map(|(a, &va)| {
                    if ((a & x).count_ones() & 1) == 1 {
                        -va
                    } else {
                        va
                    }
                })
                .sum()
        })
        .collect()
}
