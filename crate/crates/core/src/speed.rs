//! Wave speeds.
//!
//! For `s_A = s_B = eps` small, the stacked front moves at
//! `c = c1 eps + o(eps)` in the rescaled frame, with
//!
//! ```text
//!        int_0^1 (r/4S)(1 - e^{-k m}) du
//! c1 = -----------------------------------,   k = 4S/r,  m = u - u^2.
//!       int_0^1 sqrt(P(u)) e^{-k m} du
//! ```
//!
//! This module evaluates `c1` by quadrature, by its expansion in `S/r`, and
//! from a sampled standing wave; solves the travelling-wave boundary value
//! problem directly; and compares all of these with simulated fronts.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genetics::FitnessParams;
use crate::linalg::solve_bordered;
use crate::pde::{qle_disequilibrium, simulate_pqd, to_original_frame, Grid1D, QleMode, Quantity, SimConfig};
use crate::quad::{integrate_with_breaks, QuadOptions};
use crate::stability::linearization;
use crate::standing::{first_integral_p, profile_from_quadrature, ProfileMethod, WaveProfile};
use crate::{bistable, logistic};

/// First-order speed coefficient by adaptive quadrature with relative
/// tolerance `quad_tol`. Both integrands are symmetric about `u = 1/2`, so
/// only `[0, 1/2]` is integrated.
pub fn c1_exact(s_cost: f64, r: f64, quad_tol: f64) -> Result<f64> {
    if !(s_cost > 0.0 && r > 0.0) {
        return Err(Error::param(
            "S, r",
            format!("need S, r > 0, got S = {s_cost}, r = {r}"),
        ));
    }
    let k = 4.0 * s_cost / r;
    let opts = QuadOptions::with_rel_tol(quad_tol);
    let breaks = [0.0, 0.125, 0.25, 0.5];
    let num = integrate_with_breaks(|u| -r / (4.0 * s_cost) * (-k * logistic(u)).exp_m1(), &breaks, &opts)?;
    let den = integrate_with_breaks(
        |u| first_integral_p(u, s_cost, r).sqrt() * (-k * logistic(u)).exp(),
        &breaks,
        &opts,
    )?;
    Ok(num.value / den.value)
}

/// Default relative tolerance for [`c1_exact`].
pub const C1_QUAD_TOL: f64 = 1e-10;

/// `(1/sqrt S)(1 + (4/15) x + (2/45) x^2)` with `x = S/r`, truncated after
/// the term of the given order (0, 1 or 2).
pub fn c1_series(s_cost: f64, r: f64, order: u8) -> f64 {
    let x = s_cost / r;
    let terms = [1.0, 4.0 / 15.0 * x, 2.0 / 45.0 * x * x];
    let kept = (order as usize).min(2) + 1;
    terms[..kept].iter().sum::<f64>() / s_cost.sqrt()
}

/// First-order truncation of [`c1_series`].
pub fn c1_star(s_cost: f64, r: f64) -> f64 {
    c1_series(s_cost, r, 1)
}

/// Coefficient of the single-cline speed, `1/sqrt(S)`.
pub fn single_cline_coefficient(s_cost: f64) -> f64 {
    1.0 / s_cost.sqrt()
}

/// Coefficient of the no-recombination speed, `sqrt(2/S)`.
pub fn zero_recombination_coefficient(s_cost: f64) -> f64 {
    (2.0 / s_cost).sqrt()
}

/// Weighted integrals `(N, M)` with `N = -int (g + (2/r) u'^2) u' w dx` and
/// `M = int u'^2 w dx`, `w = exp((4S/r)(u^2 - u))`, on the profile grid by
/// the trapezoid rule plus exponential tail corrections.
pub(crate) fn weighted_speed_integrals(u0: &WaveProfile) -> Result<(f64, f64)> {
    let (s, r) = (u0.s_cost, u0.r);
    let k = 4.0 * s / r;
    let n = u0.len();
    let dx = u0.dx();
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    for i in 0..n {
        let g = u0.u[i] * u0.complement[i];
        let du = u0.du[i];
        let w = (-k * g).exp();
        num[i] = -(g + 2.0 / r * du * du) * du * w;
        den[i] = du * du * w;
    }
    let trap = |v: &[f64]| crate::quad::trapezoid(v, dx);
    // Both integrands decay like exp(-2 sqrt(S) |x|) in the tails.
    let tail = |v: &[f64]| (v[0] + v[n - 1]) / (2.0 * s.sqrt());
    let (tn, td) = (tail(&num), tail(&den));
    let (n_int, d_int) = (trap(&num) + tn, trap(&den) + td);
    if tn > 1e-8 * n_int || td > 1e-8 * d_int {
        return Err(Error::InsufficientTail(format!(
            "tail weight {:.3e} of the speed integrals exceeds 1e-8",
            (tn / n_int).max(td / d_int)
        )));
    }
    Ok((n_int, d_int))
}

/// Speed per unit `eps` from a sampled standing wave (the x-space form of
/// the first-order speed).
pub fn c_eps_from_profile(u0: &WaveProfile) -> Result<f64> {
    let (num, den) = weighted_speed_integrals(u0)?;
    Ok(num / den)
}

/// Travelling wave of `u_t = u_xx + S u(1-u)(2u - 1 + s/S)` in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleClineWave {
    pub s: f64,
    pub s_cost: f64,
}

impl SingleClineWave {
    pub fn new(s: f64, s_cost: f64) -> Result<Self> {
        check_bistable(s, s_cost)?;
        Ok(Self { s, s_cost })
    }

    pub fn speed(&self) -> f64 {
        self.s / self.s_cost.sqrt()
    }

    /// `1/2 - 1/2 tanh(sqrt(S)(x - c t)/2)`.
    pub fn profile(&self, x: f64, t: f64) -> f64 {
        0.5 - 0.5 * (0.5 * self.s_cost.sqrt() * (x - self.speed() * t)).tanh()
    }
}

fn check_bistable(s: f64, s_cost: f64) -> Result<()> {
    if !(s_cost > 0.0 && s > 0.0 && s < s_cost) {
        return Err(Error::param("s", format!("need 0 < s < S, got s = {s}, S = {s_cost}")));
    }
    Ok(())
}

/// Speed `s / sqrt(S)` of one cline alone.
pub fn single_cline_speed(s: f64, s_cost: f64) -> Result<f64> {
    Ok(SingleClineWave::new(s, s_cost)?.speed())
}

/// Speed `2s / sqrt(2S)` of the stacked pair without recombination.
pub fn zero_recombination_speed(s: f64, s_cost: f64) -> Result<f64> {
    check_bistable(s, s_cost)?;
    Ok(2.0 * s / (2.0 * s_cost).sqrt())
}

/// Converged travelling wave.
#[derive(Debug, Clone)]
pub struct BvpSolution {
    pub c: f64,
    pub eps: f64,
    pub profile: WaveProfile,
    pub iterations: usize,
    pub residual: f64,
    /// `int (u - u0) u0' dx` on the final iterate.
    pub phase: f64,
}

/// Options for [`solve_traveling_bvp`].
#[derive(Debug, Clone, Copy)]
pub struct BvpOptions {
    pub half_width: f64,
    pub dx: f64,
    pub newton_tol: f64,
    pub max_iterations: usize,
}

impl BvpOptions {
    pub fn new(s_cost: f64) -> Self {
        Self {
            half_width: 40.0 / s_cost.sqrt(),
            dx: 0.05,
            newton_tol: 1e-11,
            max_iterations: 30,
        }
    }
}

struct BvpProblem<'a> {
    s: f64,
    r: f64,
    dx: f64,
    u0: &'a WaveProfile,
}

impl BvpProblem<'_> {
    /// Residual at interior nodes plus the phase condition.
    fn residual(&self, u: &[f64], c: f64, eps: f64) -> (Vec<f64>, f64) {
        let n = u.len();
        let (s, r, h) = (self.s, self.r, self.dx);
        let mut res = vec![0.0; n - 2];
        for i in 1..n - 1 {
            let ux = (u[i + 1] - u[i - 1]) / (2.0 * h);
            let uxx = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);
            res[i - 1] = uxx
                + c * ux
                + s * bistable(u[i])
                + eps * logistic(u[i])
                + 2.0 / r * (s * (2.0 * u[i] - 1.0) + eps) * ux * ux;
        }
        let phase = (1..n - 1).map(|i| (u[i] - self.u0.u[i]) * self.u0.du[i]).sum::<f64>() * h;
        (res, phase)
    }

    fn newton(&self, u: &mut [f64], c: &mut f64, eps: f64, opts: &BvpOptions) -> Result<(usize, f64)> {
        let n = u.len();
        let h = self.dx;
        let phase_row: Vec<f64> = (1..n - 1).map(|i| self.u0.du[i] * h).collect();
        let mut last = f64::INFINITY;
        for it in 0..=opts.max_iterations {
            let (res, phase) = self.residual(u, *c, eps);
            let norm = res.iter().fold(phase.abs(), |m, v| m.max(v.abs()));
            if !norm.is_finite() {
                break;
            }
            if norm < opts.newton_tol {
                return Ok((it, norm));
            }
            if it == opts.max_iterations || (it > 3 && norm > 0.5 * last && norm > 1e3 * opts.newton_tol) {
                return Err(Error::NewtonDivergence {
                    residual: norm,
                    iterations: it,
                });
            }
            last = norm;
            let ux: Vec<f64> = (0..n)
                .map(|i| {
                    if i == 0 || i == n - 1 {
                        0.0
                    } else {
                        (u[i + 1] - u[i - 1]) / (2.0 * h)
                    }
                })
                .collect();
            let jac = linearization(&u[1..n - 1], &ux[1..n - 1], self.s, self.r, eps, *c, h);
            let col = &ux[1..n - 1];
            let rhs: Vec<f64> = res.iter().map(|v| -v).collect();
            let (du, dc) = solve_bordered(&jac, col, &phase_row, 0.0, &rhs, -phase)?;
            for i in 1..n - 1 {
                u[i] += du[i - 1];
            }
            *c += dc;
        }
        Err(Error::NewtonDivergence {
            residual: last,
            iterations: opts.max_iterations,
        })
    }
}

/// Solves `u'' + c u' + S f(u) + eps g(u) + (2/r)(S(2u-1) + eps) u'^2 = 0`
/// with `u = 1, 0` pinned at the ends and the phase condition
/// `int (u - u0) u0' dx = 0`, continuing in `eps` from the standing wave.
pub fn solve_traveling_bvp(s_cost: f64, r: f64, eps: f64, opts: &BvpOptions) -> Result<BvpSolution> {
    if !(eps >= 0.0 && eps <= 0.1 * s_cost) {
        return Err(Error::param("eps", format!("need 0 <= eps <= S/10, got {eps}")));
    }
    let u0 = profile_from_quadrature(s_cost, r, opts.half_width, opts.dx)?;
    let n = u0.len();
    let problem = BvpProblem {
        s: s_cost,
        r,
        dx: u0.dx(),
        u0: &u0,
    };
    let mut u = u0.u.clone();
    u[0] = 1.0;
    u[n - 1] = 0.0;
    let mut c = 0.0;
    let (mut iterations, mut residual) = problem.newton(&mut u, &mut c, 0.0, opts)?;

    let mut current = 0.0;
    let mut step = eps;
    while current < eps {
        let target = (current + step).min(eps);
        let (mut u_try, mut c_try) = (u.clone(), c);
        match problem.newton(&mut u_try, &mut c_try, target, opts) {
            Ok((it, res)) => {
                u = u_try;
                c = c_try;
                current = target;
                iterations += it;
                residual = res;
                step *= 2.0;
            }
            Err(e) => {
                step *= 0.25;
                if step < 1e-6 * eps {
                    return Err(e);
                }
            }
        }
    }
    let (_, phase) = problem.residual(&u, c, eps);
    let du: Vec<f64> = (0..n)
        .map(|i| match i {
            0 => (u[1] - u[0]) / problem.dx,
            i if i == n - 1 => (u[n - 1] - u[n - 2]) / problem.dx,
            i => (u[i + 1] - u[i - 1]) / (2.0 * problem.dx),
        })
        .collect();
    let complement = u.iter().map(|v| 1.0 - v).collect();
    let profile = WaveProfile {
        x: u0.x.clone(),
        u,
        du,
        complement,
        method: ProfileMethod::Bvp,
        s_cost,
        r,
    };
    Ok(BvpSolution {
        c,
        eps,
        profile,
        iterations,
        residual,
        phase,
    })
}

/// Richardson extrapolation of `c(eps)/eps` to `eps = 0` from two solves.
/// `c` is odd in `eps`, so the leading error of `c/eps` is `O(eps^2)`.
pub fn bvp_coefficient_extrapolated(s_cost: f64, r: f64, eps: (f64, f64), opts: &BvpOptions) -> Result<f64> {
    let a = solve_traveling_bvp(s_cost, r, eps.0, opts)?;
    let b = solve_traveling_bvp(s_cost, r, eps.1, opts)?;
    let (ra, rb) = (a.c / eps.0, b.c / eps.1);
    let (e0, e1) = (eps.0 * eps.0, eps.1 * eps.1);
    Ok((e0 * rb - e1 * ra) / (e0 - e1))
}

/// One row of the simulation comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedCase {
    pub s_cost: f64,
    pub r: f64,
    pub s: f64,
    pub sigma2: f64,
}

/// Numerical settings for [`compare_speeds`], in original-frame units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    /// Domain half-width in units of the rescaled-frame length `1/sqrt(S)`.
    pub width_factor: f64,
    pub dx: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Fit window starts here.
    pub transient: f64,
    pub record_every: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            width_factor: 40.0,
            dx: 0.1,
            dt: 0.1,
            t_end: 600.0,
            transient: 150.0,
            record_every: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Rescaled,
    Original,
}

/// Predicted and measured speeds for one parameter set.
///
/// Coefficients are per unit `s` in the rescaled frame; speeds are in the
/// frame named by `frame`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedReport {
    pub case: SpeedCase,
    pub c1_exact: f64,
    pub c1_series: f64,
    pub c1_star: f64,
    pub frame: Frame,
    pub predicted_star: f64,
    pub predicted_exact: f64,
    pub measured_speed: f64,
    /// `(measured - predicted_star) / predicted_star`; zero when both vanish.
    pub relative_gap: f64,
}

/// Runs the full `(p, q, D)` system from stacked clines and reports the
/// fitted front speed against the first-order predictions.
pub fn compare_speed_case(case: &SpeedCase, cfg: &CompareConfig) -> Result<SpeedReport> {
    let fp = FitnessParams::symmetric(case.s, case.s_cost, case.r, case.sigma2)?;
    let scale = (0.5 * case.sigma2).sqrt();
    let half_width = cfg.width_factor / case.s_cost.sqrt() * scale;
    let grid = Grid1D::symmetric(half_width, cfg.dx)?;
    // Standing wave in the rescaled frame, stretched to original units.
    let u0 = profile_from_quadrature(case.s_cost, case.r, half_width / scale + 1.0, 0.05)?;
    let p = grid.sample(|x| u0.value_at(x / scale));
    let d = qle_disequilibrium(&p, &p, grid.dx(), case.sigma2, case.r, QleMode::Local);
    let sim = SimConfig {
        dt: cfg.dt,
        t_end: cfg.t_end,
        record_every: cfg.record_every,
        ..SimConfig::default()
    };
    let traj = simulate_pqd([p.clone(), p, d], &fp, &grid, &sim)?;
    let measured = traj.speed(Quantity::P, (cfg.transient, cfg.t_end))?.fitted;

    let c1 = c1_exact(case.s_cost, case.r, C1_QUAD_TOL)?;
    let star = c1_star(case.s_cost, case.r);
    let predicted_star = to_original_frame(case.s * star, case.sigma2);
    let predicted_exact = to_original_frame(case.s * c1, case.sigma2);
    let relative_gap = if predicted_star == 0.0 {
        0.0
    } else {
        (measured - predicted_star) / predicted_star
    };
    Ok(SpeedReport {
        case: *case,
        c1_exact: c1,
        c1_series: c1_series(case.s_cost, case.r, 2),
        c1_star: star,
        frame: Frame::Original,
        predicted_star,
        predicted_exact,
        measured_speed: measured,
        relative_gap,
    })
}

/// [`compare_speed_case`] over a sweep, fanned out over `threads` workers.
/// Output order matches input order.
pub fn compare_speeds(cases: &[SpeedCase], cfg: &CompareConfig, threads: usize) -> Result<Vec<SpeedReport>> {
    let threads = threads.clamp(1, cases.len().max(1));
    let mut slots: Vec<Option<Result<SpeedReport>>> = vec![None; cases.len()];
    std::thread::scope(|scope| {
        let chunk = cases.len().div_ceil(threads).max(1);
        for (cs, out) in cases.chunks(chunk).zip(slots.chunks_mut(chunk)) {
            scope.spawn(move || {
                for (case, slot) in cs.iter().zip(out.iter_mut()) {
                    *slot = Some(compare_speed_case(case, cfg));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every slot filled")).collect()
}

/// CSV of reports, one row per case.
pub fn write_reports_csv<W: Write>(reports: &[SpeedReport], mut out: W) -> Result<()> {
    writeln!(
        out,
        "S,r,s,sigma2,c1_exact,c1_series,c1_star,frame,predicted_star,predicted_exact,measured_speed,relative_gap"
    )?;
    for rep in reports {
        let c = &rep.case;
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            c.s_cost,
            c.r,
            c.s,
            c.sigma2,
            rep.c1_exact,
            rep.c1_series,
            rep.c1_star,
            match rep.frame {
                Frame::Rescaled => "rescaled",
                Frame::Original => "original",
            },
            rep.predicted_star,
            rep.predicted_exact,
            rep.measured_speed,
            rep.relative_gap
        )?;
    }
    Ok(())
}

/// Coefficient curves against `r` at fixed `S`: `(r, c1_exact, c1_star,
/// c1_series)` per row.
pub fn c1_curve(s_cost: f64, rs: &[f64]) -> Result<Vec<[f64; 4]>> {
    rs.iter()
        .map(|&r| {
            Ok([
                r,
                c1_exact(s_cost, r, C1_QUAD_TOL)?,
                c1_star(s_cost, r),
                c1_series(s_cost, r, 2),
            ])
        })
        .collect()
}

/// Plot data with `r` on the horizontal axis: theoretical speeds and
/// measured speeds, all in the original frame.
pub fn write_plot_data<W: Write>(reports: &[SpeedReport], mut out: W) -> Result<()> {
    writeln!(out, "r,theory_star,theory_exact,measured")?;
    let mut rows: Vec<&SpeedReport> = reports.iter().collect();
    rows.sort_by(|a, b| a.case.r.total_cmp(&b.case.r));
    for rep in rows {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            rep.case.r, rep.predicted_star, rep.predicted_exact, rep.measured_speed
        )?;
    }
    Ok(())
}
