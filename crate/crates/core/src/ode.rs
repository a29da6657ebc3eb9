//! Adaptive Dormand-Prince 5(4) integration for small autonomous or
//! non-autonomous systems, with exact landing on output abscissae and
//! sign-change event location.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-14,
            h_init: 1e-3,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

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
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Difference between the 5th and embedded 4th order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// One Dormand-Prince step. Returns the 5th-order solution and the scaled
/// error norm (<= 1 means accepted).
fn dopri_step<F>(f: &F, t: f64, y: &[f64], h: f64, opts: &OdeOptions) -> (Vec<f64>, f64)
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let n = y.len();
    let lin = |coef: &[(f64, &Vec<f64>)]| -> Vec<f64> {
        (0..n)
            .map(|i| y[i] + h * coef.iter().map(|(c, k)| c * k[i]).sum::<f64>())
            .collect()
    };
    let k1 = f(t, y);
    let k2 = f(t + C2 * h, &lin(&[(A21, &k1)]));
    let k3 = f(t + C3 * h, &lin(&[(A31, &k1), (A32, &k2)]));
    let k4 = f(t + C4 * h, &lin(&[(A41, &k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(t + C5 * h, &lin(&[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = f(
        t + h,
        &lin(&[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    );
    let y_new = lin(&[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(t + h, &y_new);
    let mut err2 = 0.0;
    for i in 0..n {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let scale = opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs());
        err2 += (e / scale).powi(2);
    }
    (y_new, (err2 / n as f64).sqrt())
}

fn next_h(h: f64, err: f64) -> f64 {
    let factor = if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    };
    h * factor
}

/// Integrates from `t0` and returns the state at each of the `outputs`
/// abscissae, which must be sorted in the direction of integration.
pub fn integrate_to<F>(f: F, t0: f64, y0: &[f64], outputs: &[f64], opts: &OdeOptions) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let mut result = Vec::with_capacity(outputs.len());
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = opts.h_init;
    let mut steps = 0usize;
    for &target in outputs {
        let dir = if target >= t { 1.0 } else { -1.0 };
        while (target - t) * dir > 0.0 {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::OdeFailure {
                    t,
                    reason: "step budget exhausted".into(),
                });
            }
            let remaining = (target - t).abs();
            let mut hs = h.abs().min(opts.h_max).min(remaining);
            let last = hs >= remaining;
            if last {
                hs = remaining;
            }
            let (y_new, err) = dopri_step(&f, t, &y, dir * hs, opts);
            if !err.is_finite() {
                return Err(Error::OdeFailure {
                    t,
                    reason: "non-finite state".into(),
                });
            }
            if err <= 1.0 {
                t = if last { target } else { t + dir * hs };
                y = y_new;
                if !last {
                    h = next_h(hs, err);
                }
            } else {
                h = next_h(hs, err);
                if h < 1e-14 * (1.0 + t.abs()) {
                    return Err(Error::OdeFailure {
                        t,
                        reason: "step size underflow".into(),
                    });
                }
            }
        }
        result.push(y.clone());
    }
    Ok(result)
}

/// Outcome of [`integrate_until_event`].
#[derive(Debug, Clone)]
pub struct EventHit {
    pub t: f64,
    pub y: Vec<f64>,
}

/// Integrates forward until `event(t, y)` changes sign, locating the root to
/// near machine precision by re-stepping from the bracketing step start.
/// `guard` may abort the integration after any accepted step.
pub fn integrate_until_event<F, E, G>(
    f: F,
    t0: f64,
    y0: &[f64],
    t_max: f64,
    event: E,
    guard: G,
    opts: &OdeOptions,
) -> Result<EventHit>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
    E: Fn(f64, &[f64]) -> f64,
    G: Fn(f64, &[f64]) -> Option<Error>,
{
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut g = event(t, &y);
    let mut h = opts.h_init;
    let mut steps = 0usize;
    while t < t_max {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::OdeFailure {
                t,
                reason: "step budget exhausted".into(),
            });
        }
        let hs = h.min(opts.h_max).min(t_max - t);
        let (y_new, err) = dopri_step(&f, t, &y, hs, opts);
        if !err.is_finite() {
            return Err(Error::OdeFailure {
                t,
                reason: "non-finite state".into(),
            });
        }
        if err > 1.0 {
            h = next_h(hs, err);
            continue;
        }
        let g_new = event(t + hs, &y_new);
        if g_new == 0.0 || g.signum() != g_new.signum() {
            // Illinois false position on the step length.
            let (mut lo, mut hi) = (0.0, hs);
            let (mut glo, mut ghi) = (g, g_new);
            let mut side = 0i32;
            let mut best = (hs, y_new.clone());
            for _ in 0..200 {
                let theta = if ghi != glo {
                    (lo * ghi - hi * glo) / (ghi - glo)
                } else {
                    0.5 * (lo + hi)
                };
                let theta = if theta <= lo || theta >= hi {
                    0.5 * (lo + hi)
                } else {
                    theta
                };
                let (ym, _) = dopri_step(&f, t, &y, theta, opts);
                let gm = event(t + theta, &ym);
                best = (theta, ym);
                if gm == 0.0 || (hi - lo) < 1e-15 * (1.0 + t.abs()) {
                    break;
                }
                if gm.signum() == glo.signum() {
                    lo = theta;
                    glo = gm;
                    if side == -1 {
                        ghi *= 0.5;
                    }
                    side = -1;
                } else {
                    hi = theta;
                    ghi = gm;
                    if side == 1 {
                        glo *= 0.5;
                    }
                    side = 1;
                }
                if gm.abs() < 1e-16 {
                    break;
                }
            }
            return Ok(EventHit {
                t: t + best.0,
                y: best.1,
            });
        }
        t += hs;
        y = y_new;
        g = g_new;
        if let Some(e) = guard(t, &y) {
            return Err(e);
        }
        h = next_h(hs, err);
    }
    Err(Error::OdeFailure {
        t,
        reason: "event not reached before t_max".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_hits_outputs() {
        let outs = [0.5, 1.0, 2.0];
        let ys = integrate_to(|_, y| vec![-y[0]], 0.0, &[1.0], &outs, &OdeOptions::default()).unwrap();
        for (t, y) in outs.iter().zip(&ys) {
            assert!((y[0] - (-t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_integration() {
        let ys = integrate_to(|_, y| vec![y[0]], 0.0, &[1.0], &[-1.0], &OdeOptions::default()).unwrap();
        assert!((ys[0][0] - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn locates_event_on_harmonic_oscillator() {
        // x = cos t crosses zero at pi/2.
        let hit = integrate_until_event(
            |_, y| vec![y[1], -y[0]],
            0.0,
            &[1.0, 0.0],
            10.0,
            |_, y| y[0],
            |_, _| None,
            &OdeOptions::default(),
        )
        .unwrap();
        assert!((hit.t - std::f64::consts::FRAC_PI_2).abs() < 1e-11);
        assert!((hit.y[1] + 1.0).abs() < 1e-11);
    }

    #[test]
    fn guard_aborts() {
        let r = integrate_until_event(
            |_, y| vec![y[0]],
            0.0,
            &[1.0],
            100.0,
            |_, y| y[0] + 1.0,
            |_, y| (y[0] > 10.0).then_some(Error::NoHeteroclinic { x: y[0], y: 0.0 }),
            &OdeOptions::default(),
        );
        assert!(matches!(r, Err(Error::NoHeteroclinic { .. })));
    }
}
