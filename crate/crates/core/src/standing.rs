//! Standing wave of the symmetric reduced equation
//!
//! ```text
//! u'' + S f(u) + (2/r) S (2u - 1) u'^2 = 0,   u(-inf) = 1, u(+inf) = 0,
//! ```
//!
//! normalised by `u(0) = 1/2`. Two independent constructions are provided:
//! integration of `u' = -sqrt(P(u))` using the closed-form first integral
//! `P`, and shooting along the unstable manifold of the saddle `(1, 0)` in
//! the phase plane. Both produce a [`WaveProfile`] on the same uniform grid
//! so they can be compared node by node.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{integrate_to, integrate_until_event, OdeOptions};
use crate::{bistable, logistic};

/// How a profile was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileMethod {
    Shooting,
    Quadrature,
    Bvp,
}

/// Monotone front on a uniform grid symmetric about `x = 0`.
///
/// `complement` stores `1 - u` computed without cancellation so that the
/// left tail keeps full relative precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveProfile {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    pub complement: Vec<f64>,
    pub method: ProfileMethod,
    /// Heterozygote cost `S` used to build the profile.
    pub s_cost: f64,
    pub r: f64,
}

/// `exp(x) - 1 - x` without cancellation for small `|x|`.
pub(crate) fn exp_rem2(x: f64) -> f64 {
    if x.abs() < 0.1 {
        // Taylor series; 12 terms exceed double precision at |x| < 0.1.
        let mut term = x * x / 2.0;
        let mut sum = term;
        for k in 3..16 {
            term *= x / k as f64;
            sum += term;
        }
        sum
    } else {
        x.exp_m1() - x
    }
}

/// `P(u) = (r^2/8S) e^{(4S/r)(u-u^2)} - (r/2)(u-u^2) - r^2/(8S)`, the value
/// of `u0'^2` at the point where the standing wave equals `u`.
pub fn first_integral_p(u: f64, s_cost: f64, r: f64) -> f64 {
    let k = 4.0 * s_cost / r;
    let m = u - u * u;
    r * r / (8.0 * s_cost) * exp_rem2(k * m)
}

/// `dP/du`, equal to `2 u0''` along the standing wave.
pub fn first_integral_p_prime(u: f64, s_cost: f64, r: f64) -> f64 {
    let k = 4.0 * s_cost / r;
    let m = u - u * u;
    // d/du [ (r^2/8S)(e^{km} - 1 - km) ] = (r^2/8S) k (e^{km} - 1) (1 - 2u)
    r * r / (8.0 * s_cost) * k * (k * m).exp_m1() * (1.0 - 2.0 * u)
}

/// `S < 4r`, the regime in which existence of the heteroclinic is proven.
pub fn barrier_condition_holds(s_cost: f64, r: f64) -> bool {
    s_cost < 4.0 * r
}

fn check_sr(s_cost: f64, r: f64) -> Result<()> {
    if !(s_cost > 0.0 && s_cost.is_finite()) {
        return Err(Error::param("S", format!("need S > 0, got {s_cost}")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::param("r", format!("need r > 0, got {r}")));
    }
    Ok(())
}

fn half_grid(x_max: f64, dx: f64) -> Result<usize> {
    if !(dx > 0.0 && x_max > dx) {
        return Err(Error::param(
            "dx",
            format!("need 0 < dx < x_max, got dx = {dx}, x_max = {x_max}"),
        ));
    }
    Ok((x_max / dx).round() as usize)
}

/// Assembles a full profile from the right half (`x >= 0`) using the
/// symmetry `u(-x) = 1 - u(x)`, `u'(-x) = u'(x)`.
fn mirror(dx: f64, right_u: &[f64], right_du: &[f64], method: ProfileMethod, s_cost: f64, r: f64) -> WaveProfile {
    let half = right_u.len() - 1;
    let n = 2 * half + 1;
    let mut x = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut du = Vec::with_capacity(n);
    let mut complement = Vec::with_capacity(n);
    for i in (1..=half).rev() {
        x.push(-(i as f64) * dx);
        u.push(1.0 - right_u[i]);
        du.push(right_du[i]);
        complement.push(right_u[i]);
    }
    for i in 0..=half {
        x.push(i as f64 * dx);
        u.push(right_u[i]);
        du.push(right_du[i]);
        complement.push(1.0 - right_u[i]);
    }
    WaveProfile {
        x,
        u,
        du,
        complement,
        method,
        s_cost,
        r,
    }
}

/// Builds the standing wave by integrating `u' = -sqrt(P(u))` from
/// `u(0) = 1/2` out to `x_max`, on nodes spaced `dx`.
///
/// The right half is integrated in the variable `ln u`, whose equation
/// `(ln u)' = -sqrt(P(u)) / u` is regular down to underflow and tends to
/// `-sqrt(S)`; the left half follows by symmetry.
pub fn profile_from_quadrature(s_cost: f64, r: f64, x_max: f64, dx: f64) -> Result<WaveProfile> {
    check_sr(s_cost, r)?;
    let half = half_grid(x_max, dx)?;
    let rhs = |_: f64, y: &[f64]| {
        let u = y[0].exp();
        let p = first_integral_p(u, s_cost, r);
        if p < 0.0 {
            return vec![f64::NAN];
        }
        vec![-p.sqrt() / u]
    };
    let outputs: Vec<f64> = (1..=half).map(|i| i as f64 * dx).collect();
    let opts = OdeOptions {
        rel_tol: 1e-13,
        abs_tol: 1e-14,
        h_init: dx.min(0.01),
        h_max: dx,
        ..OdeOptions::default()
    };
    let states = integrate_to(rhs, 0.0, &[0.5f64.ln()], &outputs, &opts)?;
    let mut right_u = Vec::with_capacity(half + 1);
    right_u.push(0.5);
    right_u.extend(states.iter().map(|s| s[0].exp()));
    let right_du: Vec<f64> = right_u
        .iter()
        .map(|&u| -first_integral_p(u, s_cost, r).sqrt())
        .collect();
    Ok(mirror(dx, &right_u, &right_du, ProfileMethod::Quadrature, s_cost, r))
}

/// Result of the phase-plane shooting construction.
#[derive(Debug, Clone)]
pub struct ShootingOutcome {
    pub profile: WaveProfile,
    /// Slope `-beta` at which the orbit meets `u = 1/2`.
    pub crossing_slope: f64,
    /// True when `S >= 4r`, outside the regime covered by the existence
    /// argument; the construction is still attempted.
    pub condition_violated: bool,
}

/// Offset from the saddle `(1, 0)` along its unstable manifold.
pub const SHOOTING_OFFSET: f64 = 1e-8;

/// Shoots from `(1 - delta, -sqrt(S) delta)` along the unstable manifold of
/// `(1, 0)` until the orbit crosses `u = 1/2`, recentres the crossing to
/// `x = 0`, and completes the right half by symmetry.
///
/// The system is integrated in `(w, y) = (1 - u, u')` to keep relative
/// precision near the saddle. Fails with [`Error::NoHeteroclinic`] if
/// `y < -10 sqrt(S)` before the crossing.
pub fn profile_from_shooting(s_cost: f64, r: f64, x_max: f64, dx: f64) -> Result<ShootingOutcome> {
    check_sr(s_cost, r)?;
    let half = half_grid(x_max, dx)?;
    let root_s = s_cost.sqrt();
    let delta = SHOOTING_OFFSET;
    let y_max = 10.0 * root_s;
    let rhs = move |_: f64, st: &[f64]| {
        let (w, y) = (st[0], st[1]);
        let u = 1.0 - w;
        // f(1 - w) = (1 - w)(1 - 2w) w, exact for small w
        let f = u * (1.0 - 2.0 * w) * w;
        vec![-y, -s_cost * f - 2.0 / r * s_cost * (1.0 - 2.0 * w) * y * y]
    };
    let opts = OdeOptions {
        rel_tol: 1e-13,
        abs_tol: 1e-22,
        h_init: 1e-3,
        h_max: 0.5 * dx.max(0.01),
        ..OdeOptions::default()
    };
    let start = [delta, -root_s * delta];
    let hit = integrate_until_event(
        rhs,
        0.0,
        &start,
        1e6,
        |_, st| st[0] - 0.5,
        |_, st| {
            (st[1] < -y_max).then_some(Error::NoHeteroclinic {
                x: 1.0 - st[0],
                y: st[1],
            })
        },
        &opts,
    )?;
    let crossing = hit.t;

    // Left half: node x_i = -i dx sits at shooting time crossing - i dx.
    let mut times: Vec<(usize, f64)> = (1..=half).map(|i| (i, crossing - i as f64 * dx)).collect();
    times.sort_by(|a, b| a.1.total_cmp(&b.1));
    let positive: Vec<f64> = times.iter().filter(|(_, t)| *t > 0.0).map(|(_, t)| *t).collect();
    let states = integrate_to(rhs, 0.0, &start, &positive, &opts)?;
    let mut w_left = vec![0.0; half + 1];
    let mut y_left = vec![0.0; half + 1];
    w_left[0] = 0.5;
    y_left[0] = hit.y[1];
    let mut k = 0;
    for &(i, t) in &times {
        if t > 0.0 {
            w_left[i] = states[k][0];
            y_left[i] = states[k][1];
            k += 1;
        } else {
            // before the shooting start: linear unstable manifold
            let w = delta * (root_s * t).exp();
            w_left[i] = w;
            y_left[i] = -root_s * w;
        }
    }
    // u(x_i) on the right half equals w at the mirrored left node.
    let profile = mirror(dx, &w_left, &y_left, ProfileMethod::Shooting, s_cost, r);
    Ok(ShootingOutcome {
        profile,
        crossing_slope: hit.y[1],
        condition_violated: !barrier_condition_holds(s_cost, r),
    })
}

impl WaveProfile {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dx(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.x.last().expect("non-empty profile")
    }

    /// Index of the node at `x = 0`.
    pub fn centre(&self) -> usize {
        self.len() / 2
    }

    /// `max |u(-x) + u(x) - 1|` over mirrored node pairs.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| (self.u[i] + self.u[n - 1 - i] - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max |u'(x)^2 - P(u(x))|` over all nodes.
    pub fn slope_law_defect(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.du)
            .map(|(&u, &du)| (du * du - first_integral_p(u, self.s_cost, self.r)).abs())
            .fold(0.0, f64::max)
    }

    /// Sup norm over interior nodes of `u'' + S f(u) + (2/r) S (2u - 1) u'^2`,
    /// with `u''` from the five-point fourth-order stencil on the values and
    /// `u'` from the stored slopes.
    pub fn ode_residual(&self) -> f64 {
        let n = self.len();
        let h2 = self.dx() * self.dx();
        let (s, r) = (self.s_cost, self.r);
        (2..n - 2)
            .map(|i| {
                let u = &self.u;
                let upp = (-u[i - 2] + 16.0 * u[i - 1] - 30.0 * u[i] + 16.0 * u[i + 1] - u[i + 2]) / (12.0 * h2);
                let du = self.du[i];
                (upp + s * bistable(u[i]) + 2.0 / r * s * (2.0 * u[i] - 1.0) * du * du).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Interpolated value with cubic Hermite on the stored slopes; outside
    /// the grid the exponential tails `1 - C e^{sqrt(S) x}` and
    /// `C e^{-sqrt(S) x}` are continued from the end nodes.
    pub fn value_at(&self, x: f64) -> f64 {
        let n = self.len();
        let root_s = self.s_cost.sqrt();
        if x <= self.x[0] {
            return 1.0 - self.complement[0] * (root_s * (x - self.x[0])).exp();
        }
        if x >= self.x[n - 1] {
            return self.u[n - 1] * (-root_s * (x - self.x[n - 1])).exp();
        }
        let h = self.dx();
        let i = (((x - self.x[0]) / h).floor() as usize).min(n - 2);
        let t = (x - self.x[i]) / h;
        let (h00, h10, h01, h11) = hermite_basis(t);
        h00 * self.u[i] + h10 * h * self.du[i] + h01 * self.u[i + 1] + h11 * h * self.du[i + 1]
    }

    /// Slope at `x`, from the first integral at the interpolated value.
    pub fn slope_at(&self, x: f64) -> f64 {
        -first_integral_p(self.value_at(x), self.s_cost, self.r).sqrt()
    }

    /// Samples the profile translated by `shift` (`u(x - shift)`) on `xs`.
    pub fn sample_shifted(&self, xs: &[f64], shift: f64) -> Vec<f64> {
        xs.iter().map(|&x| self.value_at(x - shift)).collect()
    }

    /// CSV with columns `x,u,du` at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,u,du")?;
        for i in 0..self.len() {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", self.x[i], self.u[i], self.du[i])?;
        }
        Ok(())
    }

    /// Weight `exp((4S/r)(u^2 - u))` at every node.
    pub fn adjoint_weight(&self) -> Vec<f64> {
        let k = 4.0 * self.s_cost / self.r;
        self.u.iter().map(|&u| (-k * logistic(u)).exp()).collect()
    }
}

fn hermite_basis(t: f64) -> (f64, f64, f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    (
        2.0 * t3 - 3.0 * t2 + 1.0,
        t3 - 2.0 * t2 + t,
        -2.0 * t3 + 3.0 * t2,
        t3 - t2,
    )
}

/// Tail decay rate of a profile.
///
/// Least-squares slope of `ln u` against `x` over the last quarter of the
/// nodes; the standing wave gives `-sqrt(S)`.
pub fn decay_rate(profile: &WaveProfile) -> Result<f64> {
    let n = profile.len();
    let edge = profile.u[n - 1];
    if !(edge < 1e-3 && edge > 0.0) {
        return Err(Error::InsufficientTail(format!(
            "u at right edge is {edge}, need 0 < u < 1e-3"
        )));
    }
    let start = n - n / 4;
    let pts: Vec<(f64, f64)> = (start..n).map(|i| (profile.x[i], profile.u[i].ln())).collect();
    least_squares_slope(&pts).ok_or(Error::InsufficientSamples {
        needed: 2,
        got: pts.len(),
    })
}

/// Rate of `ln(1 - u)` over the first quarter of the nodes (`+sqrt(S)`).
pub fn left_decay_rate(profile: &WaveProfile) -> Result<f64> {
    let n = profile.len();
    let edge = profile.complement[0];
    if !(edge < 1e-3 && edge > 0.0) {
        return Err(Error::InsufficientTail(format!(
            "1 - u at left edge is {edge}, need 0 < 1 - u < 1e-3"
        )));
    }
    let pts: Vec<(f64, f64)> = (0..n / 4).map(|i| (profile.x[i], profile.complement[i].ln())).collect();
    least_squares_slope(&pts).ok_or(Error::InsufficientSamples {
        needed: 2,
        got: pts.len(),
    })
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Default half-width `40 / sqrt(S)` of the domain used for profiles.
pub fn default_x_max(s_cost: f64) -> f64 {
    40.0 / s_cost.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_vanishes_at_endpoints() {
        for &(s, r) in &[(0.1, 0.1), (0.6, 0.25), (2.0, 0.01)] {
            assert_eq!(first_integral_p(0.0, s, r), 0.0);
            assert_eq!(first_integral_p(1.0, s, r), 0.0);
        }
    }

    #[test]
    fn p_at_centre_by_direct_formula() {
        // 0.0125 e - 0.0125 - 0.0125 for S = r = 0.1
        let expected = 0.0125 * (std::f64::consts::E - 2.0);
        let p = first_integral_p(0.5, 0.1, 0.1);
        assert!((p - expected).abs() < 1e-17);
        assert!((p.sqrt() - 0.094_755).abs() < 1e-5);
        // literal evaluation of the displayed formula
        let (s, r, u) = (0.1f64, 0.1f64, 0.5f64);
        let literal = r * r / (8.0 * s) * (4.0 * s / r * (u - u * u)).exp() - r / 2.0 * (u - u * u) - r * r / (8.0 * s);
        assert!((p - literal).abs() < 1e-16);
    }

    #[test]
    fn p_small_coupling_limit() {
        let (s, r) = (1e-3, 0.5);
        for i in 1..100 {
            let u = i as f64 / 100.0;
            let m = u - u * u;
            // next series term: (r^2/8S) (4S m / r)^3 / 6 = (4/3) S^2 m^3 / r
            assert!((first_integral_p(u, s, r) - s * m * m).abs() <= 2.0 * s * s / r * m.powi(3) + 1e-20);
        }
    }

    #[test]
    fn p_prime_matches_finite_difference() {
        let (s, r) = (0.6, 0.25);
        for &u in &[0.1, 0.3, 0.5, 0.77] {
            let h = 1e-6;
            let fd = (first_integral_p(u + h, s, r) - first_integral_p(u - h, s, r)) / (2.0 * h);
            assert!((fd - first_integral_p_prime(u, s, r)).abs() < 1e-8);
        }
    }

    #[test]
    fn p_positive_inside_unit_interval() {
        for &(s, r) in &[(0.6, 0.25), (0.1, 0.1), (0.25, 0.25), (0.02, 0.5), (0.85, 0.15)] {
            for i in 1..=98 {
                let u = 0.01 * i as f64;
                assert!(first_integral_p(u, s, r) > 0.0);
            }
        }
    }

    #[test]
    fn exp_rem2_branches_agree() {
        for &x in &[0.099_999f64, 0.1, -0.1, 0.05] {
            let direct = x.exp_m1() - x;
            // the direct form loses about two digits near |x| = 0.1
            assert!((exp_rem2(x) - direct).abs() <= 1e-13 * x * x);
        }
        let x = 1e-8;
        assert!((exp_rem2(x) - 0.5 * x * x * (1.0 + x / 3.0)).abs() <= 1e-16 * x * x);
    }

    #[test]
    fn quadrature_profile_is_symmetric_and_normalised() {
        let p = profile_from_quadrature(0.6, 0.25, default_x_max(0.6), 0.05).unwrap();
        assert_eq!(p.u[p.centre()], 0.5);
        assert_eq!(p.x[p.centre()], 0.0);
        assert!(p.symmetry_defect() < 1e-9);
        // u rounds to 1 far left, so check each half in its accurate variable
        let c = p.centre();
        assert!(p.u[c..].windows(2).all(|w| w[1] < w[0]));
        assert!(p.complement[..=c].windows(2).all(|w| w[1] > w[0]));
        assert!(p.du.iter().all(|&d| d < 0.0));
    }

    #[test]
    fn weak_coupling_profile_is_logistic() {
        let s = 1e-3;
        let p = profile_from_quadrature(s, 0.5, 600.0, 0.5).unwrap();
        let err =
            p.x.iter()
                .zip(&p.u)
                .map(|(&x, &u)| (u - (0.5 - 0.5 * (s.sqrt() * x / 2.0).tanh())).abs())
                .fold(0.0, f64::max);
        assert!(err < 5e-3, "err {err}");
    }

    #[test]
    fn decay_rate_exact_exponential() {
        let s: f64 = 0.3;
        let dx = 0.1;
        let x: Vec<f64> = (0..201).map(|i| -10.0 + i as f64 * dx).collect();
        let u: Vec<f64> = x.iter().map(|&x| 1e-4 * (-s.sqrt() * x).exp()).collect();
        let prof = WaveProfile {
            complement: u.iter().map(|v| 1.0 - v).collect(),
            du: u.iter().map(|v| -s.sqrt() * v).collect(),
            x,
            u,
            method: ProfileMethod::Quadrature,
            s_cost: s,
            r: 1.0,
        };
        assert!((decay_rate(&prof).unwrap() + s.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn decay_rates_from_quadrature_profile() {
        // Domain short enough that the fitted tail is ODE-integrated data.
        let p = profile_from_quadrature(0.25, 0.25, 30.0, 0.05).unwrap();
        let right = decay_rate(&p).unwrap();
        assert!((right + 0.5).abs() < 0.005, "right {right}");
        let left = left_decay_rate(&p).unwrap();
        assert!((left - 0.5).abs() < 0.005, "left {left}");
    }

    #[test]
    fn short_domain_has_insufficient_tail() {
        let p = profile_from_quadrature(0.1, 0.1, 5.0, 0.05).unwrap();
        assert!(matches!(decay_rate(&p), Err(Error::InsufficientTail(_))));
    }

    #[test]
    fn shooting_agrees_with_quadrature() {
        let (s, r) = (0.1, 0.1);
        let xm = default_x_max(s);
        let q = profile_from_quadrature(s, r, xm, 0.05).unwrap();
        let sh = profile_from_shooting(s, r, xm, 0.05).unwrap();
        assert!(!sh.condition_violated);
        let diff =
            q.u.iter()
                .zip(&sh.profile.u)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
        assert!(diff < 1e-6, "diff {diff}");
        assert!((sh.crossing_slope + first_integral_p(0.5, s, r).sqrt()).abs() < 1e-8);
    }

    #[test]
    fn shooting_beyond_barrier_condition() {
        let sh = profile_from_shooting(0.85, 0.15, 30.0, 0.05).unwrap();
        assert!(sh.condition_violated);
        assert!(sh.crossing_slope < 0.0);
        assert!(sh.profile.slope_law_defect() < 1e-8);
    }

    #[test]
    fn shooting_reaches_half_for_fig2_left() {
        let sh = profile_from_shooting(0.6, 0.25, 30.0, 0.05).unwrap();
        assert!(!sh.condition_violated);
        assert!(sh.crossing_slope < 0.0);
    }

    #[test]
    fn hermite_interpolation_reproduces_nodes_and_tails() {
        let p = profile_from_quadrature(0.1, 0.1, 60.0, 0.1).unwrap();
        let i = 123;
        assert!((p.value_at(p.x[i]) - p.u[i]).abs() < 1e-15);
        let mid = 0.5 * (p.x[i] + p.x[i + 1]);
        let fine = profile_from_quadrature(0.1, 0.1, 60.0, 0.05).unwrap();
        let j = fine.x.iter().position(|&x| (x - mid).abs() < 1e-9).unwrap();
        assert!((p.value_at(mid) - fine.u[j]).abs() < 1e-7);
        assert!(p.value_at(1e3) < 1e-30);
        assert!((p.value_at(-1e3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_arguments() {
        assert!(profile_from_quadrature(-0.1, 0.1, 10.0, 0.1).is_err());
        assert!(profile_from_quadrature(0.1, 0.0, 10.0, 0.1).is_err());
        assert!(profile_from_quadrature(0.1, 0.1, 0.05, 0.1).is_err());
    }
}
