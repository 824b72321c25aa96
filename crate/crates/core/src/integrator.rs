//! Dormand–Prince 5(4) embedded Runge–Kutta pair with adaptive step control.

use std::ops::ControlFlow;

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th-order weights minus embedded 4th-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Step-size control settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            rtol: 1e-9,
            atol: 1e-11,
            h_init: 1e-3,
            h_min: 1e-14,
            h_max: 0.1,
            max_steps: 10_000_000,
        }
    }
}

/// Counters from one integration call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Where an integration call ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    /// True when the observer asked to stop before `t_end`.
    pub stopped: bool,
    pub stats: Stats,
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrates `dy/dt = rhs(t, y)` from `t0` to `t_end` (which may lie below
/// `t0`), landing exactly on `t_end`.
///
/// `observer` sees every accepted step and may break early. A step that
/// produces a non-finite error estimate is rejected and retried smaller.
pub fn integrate<const N: usize, F, O>(
    mut rhs: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    control: &StepControl,
    mut observer: O,
) -> Result<Outcome<N>>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    O: FnMut(f64, &[f64; N]) -> ControlFlow<()>,
{
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();
    let mut stats = Stats::default();
    let mut t = t0;
    let mut y = y0;
    if span == 0.0 {
        return Ok(Outcome {
            t,
            y,
            stopped: false,
            stats,
        });
    }
    let mut h = control.h_init.min(control.h_max).min(span);
    let mut k1 = rhs(t, &y);
    stats.rhs_evals += 1;

    loop {
        if stats.accepted + stats.rejected >= control.max_steps {
            return Err(Error::Integrator {
                t,
                reason: format!("exceeded {} steps", control.max_steps),
            });
        }
        let remaining = (t_end - t).abs();
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        let hs = dir * h;

        let k2 = rhs(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
        let k3 = rhs(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(
            t + C4 * hs,
            &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = rhs(
            t + C5 * hs,
            &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = rhs(
            t + hs,
            &axpy(
                &y,
                hs,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y_new = axpy(
            &y,
            hs,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = rhs(t + hs, &y_new);
        stats.rhs_evals += 6;

        let mut err = 0.0;
        for i in 0..N {
            let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = control.atol + control.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / scale) * (e / scale);
        }
        let err = (err / N as f64).sqrt();

        if err.is_finite() && err <= 1.0 {
            stats.accepted += 1;
            t = if last { t_end } else { t + hs };
            y = y_new;
            k1 = k7;
            if observer(t, &y).is_break() {
                return Ok(Outcome {
                    t,
                    y,
                    stopped: true,
                    stats,
                });
            }
            if last {
                return Ok(Outcome {
                    t,
                    y,
                    stopped: false,
                    stats,
                });
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * factor).min(control.h_max);
        } else {
            stats.rejected += 1;
            let factor = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= factor;
            if h < control.h_min {
                return Err(Error::Integrator {
                    t,
                    reason: format!("step size underflow (h = {h:e})"),
                });
            }
        }
    }
}
