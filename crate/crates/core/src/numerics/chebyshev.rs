//! Chebyshev expansion of the propagator `exp(-i H t)`.

use super::bessel::bessel_j_all;
use super::C64;
use crate::error::{Error, Result};
use crate::par;

/// Replaces `psi` with `exp(-i H t) psi`.
///
/// `apply(input, output)` must write `H·input` into `output`, and
/// `spectral_bound` must satisfy `‖H‖ <= spectral_bound`. The series is
/// truncated once the neglected Bessel tail drops below `tol`; the returned
/// value is that tail (an upper bound on the truncation error in norm).
pub fn propagate<F>(psi: &mut [C64], spectral_bound: f64, time: f64, tol: f64, apply: F) -> Result<f64>
where
    F: Fn(&[C64], &mut [C64]),
{
    if time == 0.0 || spectral_bound == 0.0 {
        return Ok(0.0);
    }
    let bound = spectral_bound * 1.01;
    let x = bound * time.abs();
    let kmax = (x.ceil() as usize) + 40 + (10.0 * x.cbrt()) as usize;
    let j = bessel_j_all(kmax, x);
    // smallest K with sum_{k>K} 2|J_k| < tol
    let mut tail = 0.0;
    let mut n_terms = kmax + 1;
    for k in (0..=kmax).rev() {
        let t = tail + 2.0 * j[k].abs();
        if t >= tol {
            n_terms = k + 1;
            break;
        }
        tail = t;
    }
    if n_terms > kmax {
        return Err(Error::Propagator { estimate: tail.max(2.0 * j[kmax].abs()) });
    }
    // (-i sgn t)^k
    let unit = if time > 0.0 { C64::new(0.0, -1.0) } else { C64::new(0.0, 1.0) };
    let inv = 1.0 / bound;
    let dim = psi.len();

    let mut prev: Vec<C64> = psi.to_vec();
    let mut cur = vec![C64::new(0.0, 0.0); dim];
    apply(&prev, &mut cur);
    scale(&mut cur, inv);
    let mut acc: Vec<C64> = prev.iter().map(|v| v * j[0]).collect();
    let mut phase = unit;
    if n_terms > 1 {
        axpy(&mut acc, phase * (2.0 * j[1]), &cur);
    }
    let mut next = vec![C64::new(0.0, 0.0); dim];
    for jk in j.iter().take(n_terms).skip(2) {
        apply(&cur, &mut next);
        // next = 2 h cur - prev
        let two_inv = 2.0 * inv;
        par::for_each_chunk_mut(&mut next, par::REDUCE_CHUNK, |c, chunk| {
            let off = c * par::REDUCE_CHUNK;
            for (i, v) in chunk.iter_mut().enumerate() {
                *v = *v * two_inv - prev[off + i];
            }
        });
        phase *= unit;
        axpy(&mut acc, phase * (2.0 * jk), &next);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    psi.copy_from_slice(&acc);
    Ok(tail)
}

fn scale(v: &mut [C64], s: f64) {
    par::for_each_chunk_mut(v, par::REDUCE_CHUNK, |_, chunk| {
        for x in chunk {
            *x *= s;
        }
    });
}

fn axpy(acc: &mut [C64], a: C64, x: &[C64]) {
    par::for_each_chunk_mut(acc, par::REDUCE_CHUNK, |c, chunk| {
        let off = c * par::REDUCE_CHUNK;
        for (i, v) in chunk.iter_mut().enumerate() {
            *v += a * x[off + i];
        }
    });
}
