//! Integer-order Bessel functions of the first kind.

/// Returns `J_0(x) ..= J_kmax(x)` for `x >= 0`, computed with Miller's
/// backward recurrence normalised by `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_all(kmax: usize, x: f64) -> Vec<f64> {
    assert!(x >= 0.0 && x.is_finite(), "bessel_j_all needs finite x >= 0");
    let mut out = vec![0.0; kmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    // Start well above both the requested order and the turning point.
    let start = kmax.max(x.ceil() as usize) + 30 + (12.0 * x.cbrt()) as usize;
    let start = start + (start % 2);
    let mut vals = vec![0.0f64; start + 2];
    vals[start] = 1e-300;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let next = 2.0 * k as f64 / x * vals[k] - vals[k + 1];
        vals[k - 1] = next;
        if next.abs() > 1e250 {
            for v in vals.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
            norm *= 1e-250;
        }
        if k % 2 == 1 {
            // k-1 is even
            norm += if k - 1 == 0 { vals[0] } else { 2.0 * vals[k - 1] };
        }
    }
    for (o, v) in out.iter_mut().zip(vals.iter()) {
        *o = v / norm;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_reference_values() {
        // (k, x, J_k(x)) from an independent library.
        let cases: [(usize, f64, f64); 8] = [
            (0, 1.0, 0.7651976865579666),
            (1, 10.0, 0.0434727461688616),
            (0, 100.0, 0.01998585030422312),
            (50, 100.0, -0.03869833972852563),
            (99, 100.0, 0.11524392532303798),
            (130, 100.0, 1.0175357511179037e-08),
            (5, 0.3, 6.304432633771069e-07),
            (20, 3.0, 1.2275946737992997e-15),
        ];
        for (k, x, want) in cases {
            let got = bessel_j_all(k, x)[k];
            let scale = want.abs().max(1e-300);
            assert!(((got - want) / scale).abs() < 1e-9, "J_{k}({x}) = {got}, want {want}");
        }
    }

    #[test]
    fn zero_argument() {
        let v = bessel_j_all(4, 0.0);
        assert_eq!(v, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
