//! Dormand–Prince 5(4) with adaptive step control, for autonomous systems.

/// Per-step tolerance (absolute and relative).
pub const STEP_TOL: f64 = 1e-8;
const MAX_STEPS: usize = 200_000;

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights (equal to the last row of `A`, FSAL).
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Why an integration was abandoned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepFailure {
    Underflow,
    TooManySteps,
    NonFinite,
}

/// Integrates `dy/dt = f(y, dy)` from 0 to `duration` in place.
/// Returns the number of accepted steps.
pub fn integrate<F>(y: &mut [f64], duration: f64, tol: f64, f: F) -> Result<usize, StepFailure>
where
    F: Fn(&[f64], &mut [f64]),
{
    if duration == 0.0 {
        return Ok(0);
    }
    let n = y.len();
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    let mut t = 0.0;
    f(y, &mut k[0]);
    // initial step from the derivative scale
    let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    let dnorm = k[0].iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut h = if dnorm > 0.0 { (0.01 * scale / dnorm).min(duration) } else { duration };
    let h_min = 1e-12 * duration;
    let mut accepted = 0;
    for _ in 0..MAX_STEPS {
        if t >= duration {
            return Ok(accepted);
        }
        let last = t + h >= duration;
        if last {
            h = duration - t;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += h * A[s][j] * kj[i];
                }
                tmp[i] = acc;
            }
            f(&tmp, &mut k[s]);
        }
        // y5 is tmp after stage 6 (FSAL row); error from B5 − B4
        y5.copy_from_slice(&tmp);
        let mut err = 0.0f64;
        for i in 0..n {
            let mut e = 0.0;
            for s in 0..7 {
                e += (B5[s] - B4[s]) * k[s][i];
            }
            let sc = tol + tol * y[i].abs().max(y5[i].abs());
            err = err.max((h * e).abs() / sc);
        }
        if !err.is_finite() {
            return Err(StepFailure::NonFinite);
        }
        if err <= 1.0 {
            t = if last { duration } else { t + h };
            y.copy_from_slice(&y5);
            k.swap(0, 6);
            accepted += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if t < duration && h < h_min {
            return Err(StepFailure::Underflow);
        }
    }
    Err(StepFailure::TooManySteps)
}
