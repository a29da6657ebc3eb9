//! Linear stability of the standing wave.
//!
//! Around `u0` the reduced equation linearises to
//!
//! ```text
//! L h = h'' + (4S/r)(2u0 - 1) u0' h' + S (f'(u0) + (4/r) u0'^2) h.
//! ```
//!
//! Conjugating by `exp((2S/r)(u0^2 - u0))` removes the first-order term and
//! gives the self-adjoint `M k = k'' + c(x) k` with
//! `c = (2S^2/r)(2u0 - 1) f(u0) + S f'(u0)`. Both are discretised with
//! second-order central stencils on the interior nodes of a profile grid,
//! with zero (pinned) boundary values.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{normalize, SymTridiagonal, Tridiagonal};
use crate::pde::{front_position, Grid1D, Integrator, ReducedParams, SimConfig, System};
use crate::speed::weighted_speed_integrals;
use crate::standing::{least_squares_slope, WaveProfile};
use crate::{bistable, bistable_prime, logistic};

/// Central-difference matrix of
/// `h'' + (c + (4/r)(S(2u-1) + eps) u') h' + (S f'(u) + eps g'(u) + (4S/r) u'^2) h`,
/// the linearisation of the travelling-wave operator at `(u, c)`. Values and
/// slopes are given at the interior nodes; outside nodes are zero.
pub fn linearization(u: &[f64], du: &[f64], s: f64, r: f64, eps: f64, c: f64, dx: f64) -> Tridiagonal {
    let n = u.len();
    let mut t = Tridiagonal::zeros(n);
    let inv2 = 1.0 / (dx * dx);
    for i in 0..n {
        let a1 = c + 4.0 / r * (s * (2.0 * u[i] - 1.0) + eps) * du[i];
        let a0 = s * bistable_prime(u[i]) + eps * (1.0 - 2.0 * u[i]) + 4.0 * s / r * du[i] * du[i];
        t.diag[i] = -2.0 * inv2 + a0;
        if i > 0 {
            t.lower[i - 1] = inv2 - a1 / (2.0 * dx);
        }
        if i + 1 < n {
            t.upper[i] = inv2 + a1 / (2.0 * dx);
        }
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OperatorKind {
    L,
    M,
    LAdjoint,
}

/// Discretised operator on the interior nodes of a profile grid.
#[derive(Debug, Clone)]
pub struct DiscretizedOperator {
    pub kind: OperatorKind,
    pub matrix: Tridiagonal,
    /// Interior abscissae.
    pub x: Vec<f64>,
    pub dx: f64,
    /// Boundary treatment: zero values at the two outer nodes.
    pub boundary: &'static str,
}

fn check_resolution(u0: &WaveProfile) -> Result<()> {
    let max_dx = 0.1 / u0.s_cost.sqrt();
    if u0.dx() > max_dx + 1e-12 {
        return Err(Error::GridTooCoarse { dx: u0.dx(), max_dx });
    }
    Ok(())
}

fn interior(v: &[f64]) -> &[f64] {
    &v[1..v.len() - 1]
}

pub fn assemble_l(u0: &WaveProfile) -> Result<DiscretizedOperator> {
    check_resolution(u0)?;
    let matrix = linearization(interior(&u0.u), interior(&u0.du), u0.s_cost, u0.r, 0.0, 0.0, u0.dx());
    Ok(DiscretizedOperator {
        kind: OperatorKind::L,
        matrix,
        x: interior(&u0.x).to_vec(),
        dx: u0.dx(),
        boundary: "pinned-zero",
    })
}

pub fn assemble_l_adjoint(u0: &WaveProfile) -> Result<DiscretizedOperator> {
    let mut op = assemble_l(u0)?;
    op.matrix = op.matrix.transpose();
    op.kind = OperatorKind::LAdjoint;
    Ok(op)
}

/// Potential `c(x) = (2S^2/r)(2u0 - 1) f(u0) + S f'(u0)` of `M`.
pub fn m_potential(u: f64, s: f64, r: f64) -> f64 {
    2.0 * s * s / r * (2.0 * u - 1.0) * bistable(u) + s * bistable_prime(u)
}

pub fn assemble_m(u0: &WaveProfile) -> Result<DiscretizedOperator> {
    check_resolution(u0)?;
    let dx = u0.dx();
    let inv2 = 1.0 / (dx * dx);
    let u = interior(&u0.u);
    let n = u.len();
    let diag = u
        .iter()
        .map(|&v| -2.0 * inv2 + m_potential(v, u0.s_cost, u0.r))
        .collect();
    let off = vec![inv2; n - 1];
    Ok(DiscretizedOperator {
        kind: OperatorKind::M,
        matrix: Tridiagonal::new(off.clone(), diag, off),
        x: interior(&u0.x).to_vec(),
        dx,
        boundary: "pinned-zero",
    })
}

/// Leading eigenpairs, largest first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// Unit-norm eigenvectors of the operator itself (mapped back through
    /// the symmetrising weight for `L` and its adjoint).
    pub vectors: Vec<Vec<f64>>,
}

/// Diagonal similarity `D A D^{-1}` that symmetrises a tridiagonal matrix
/// with positive off-diagonal products. Returns the symmetric matrix and `D`.
fn symmetrize(a: &Tridiagonal) -> Result<(SymTridiagonal, Vec<f64>)> {
    let n = a.len();
    let mut d = vec![1.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    for i in 0..n.saturating_sub(1) {
        let prod = a.lower[i] * a.upper[i];
        if !(prod > 0.0) {
            return Err(Error::param(
                "operator",
                format!("off-diagonal product {prod} at row {i} is not positive"),
            ));
        }
        // (D A D^-1)_{i,i+1} = d_i u_i / d_{i+1} must equal d_{i+1} l_i / d_i
        d[i + 1] = d[i] * (a.upper[i] / a.lower[i]).sqrt();
        off[i] = prod.sqrt() * a.upper[i].signum();
    }
    Ok((SymTridiagonal::new(a.diag.clone(), off), d))
}

/// The `k` largest eigenvalues with eigenvectors.
pub fn spectrum(op: &DiscretizedOperator, k: usize) -> Result<Spectrum> {
    let (sym, d) = match op.kind {
        OperatorKind::M => {
            let n = op.matrix.len();
            (
                SymTridiagonal::new(op.matrix.diag.clone(), op.matrix.upper.clone()),
                vec![1.0; n],
            )
        }
        _ => symmetrize(&op.matrix)?,
    };
    let n = sym.len();
    let k = k.min(n);
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for j in 0..k {
        let lambda = sym.eigenvalue(n - 1 - j);
        let v = sym.eigenvector(lambda)?;
        // sym = D A D^-1 with D built from the matrix itself (already
        // transposed for the adjoint), so the eigenvector is D^-1 v.
        let mut w: Vec<f64> = v.iter().zip(&d).map(|(a, b)| a / b).collect();
        normalize(&mut w);
        values.push(lambda);
        vectors.push(w);
    }
    Ok(Spectrum { values, vectors })
}

/// `|cos|` of the angle between two vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).abs()
}

/// `||L u0'|| / ||u0'||` (Euclidean), the defect of the translation mode.
pub fn kernel_residual(u0: &WaveProfile) -> Result<f64> {
    let op = assemble_l(u0)?;
    let v = interior(&u0.du);
    Ok(norm(&op.matrix.apply(v)) / norm(v))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Adjoint kernel candidate `u0' exp((4S/r)(u0^2 - u0))`, or `u0'` alone
/// when `weighted` is false.
pub fn adjoint_kernel(u0: &WaveProfile, weighted: bool) -> Vec<f64> {
    let k = 4.0 * u0.s_cost / u0.r;
    (0..u0.len())
        .map(|i| {
            let w = if weighted {
                (-k * u0.u[i] * u0.complement[i]).exp()
            } else {
                1.0
            };
            u0.du[i] * w
        })
        .collect()
}

/// `||L^T psi|| / ||psi||` for the adjoint kernel candidate. On a uniform
/// grid the trapezoid weights of the interior are equal, so the weighted
/// transpose is the plain transpose.
pub fn adjoint_kernel_residual(u0: &WaveProfile, weighted: bool) -> Result<f64> {
    let op = assemble_l_adjoint(u0)?;
    let psi = adjoint_kernel(u0, weighted);
    let psi = interior(&psi);
    Ok(norm(&op.matrix.apply(psi)) / norm(psi))
}

/// `<psi, g(u0) + (2/r) u0'^2> / <psi, -u0'>`, the solvability condition for
/// the first-order correction; equals the speed coefficient.
pub fn solvability_quotient(u0: &WaveProfile) -> Result<f64> {
    let (num, den) = weighted_speed_integrals(u0)?;
    Ok(num / den)
}

/// The unbounded second solution of `L v = 0`,
/// `v0 = u0' int_0^x u0'^{-2} exp(-(4S/r)(u0^2 - u0))`, on the right half of
/// the grid (trapezoid cumulative integral from the centre node).
pub fn second_kernel_solution(u0: &WaveProfile) -> (Vec<f64>, Vec<f64>) {
    let k = 4.0 * u0.s_cost / u0.r;
    let c = u0.centre();
    let dx = u0.dx();
    let integrand: Vec<f64> = (c..u0.len())
        .map(|i| (k * logistic(u0.u[i])).exp() / (u0.du[i] * u0.du[i]))
        .collect();
    let mut acc = 0.0;
    let mut v = vec![0.0];
    for j in 1..integrand.len() {
        acc += 0.5 * dx * (integrand[j - 1] + integrand[j]);
        v.push(u0.du[c + j] * acc);
    }
    (u0.x[c..].to_vec(), v)
}

/// Growth rate of `|v0|` fitted over the outer half of the right half-line.
pub fn second_kernel_growth_rate(u0: &WaveProfile) -> Result<f64> {
    let (x, v) = second_kernel_solution(u0);
    let start = x.len() / 2;
    let pts: Vec<(f64, f64)> = (start..x.len()).map(|i| (x[i], v[i].abs().ln())).collect();
    least_squares_slope(&pts).ok_or(Error::InsufficientSamples {
        needed: 2,
        got: pts.len(),
    })
}

/// Outcome of a relaxation experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationReport {
    pub eps_amp: f64,
    /// Final front displacement relative to the unperturbed run.
    pub shift: f64,
    /// `shift / eps_amp`.
    pub measured: f64,
    /// `int h u0' exp((4S/r)(u0^2 - u0)) dx`, unnormalised.
    pub predicted_raw: f64,
    /// `-<psi, h> / <psi, u0'>`, the projection onto the translation mode.
    pub predicted_normalized: f64,
    pub settle_time: f64,
}

/// Weighted inner product `<psi, h>` by the trapezoid rule.
fn psi_dot(u0: &WaveProfile, h: &[f64]) -> f64 {
    let psi = adjoint_kernel(u0, true);
    crate::quad::trapezoid(&psi.iter().zip(h).map(|(a, b)| a * b).collect::<Vec<_>>(), u0.dx())
}

/// Sup-norm change over one check interval at which a relaxation run is
/// considered settled.
pub const SETTLE_TOL: f64 = 1e-8;

/// Perturbs `u0` by `eps_amp * h` (sampled on the profile grid), evolves the
/// reduced equation with `eps = 0`, and measures the asymptotic shift
/// against an unperturbed reference run. Stops once the sup-norm change of
/// the state over a check interval of 10 time units is below [`SETTLE_TOL`].
pub fn relaxation_shift(u0: &WaveProfile, h: &[f64], eps_amp: f64, dt: f64, horizon: f64) -> Result<RelaxationReport> {
    if h.len() != u0.len() {
        return Err(Error::param(
            "h",
            format!("expected {} values, got {}", u0.len(), h.len()),
        ));
    }
    if !(eps_amp.abs() <= 0.05) {
        return Err(Error::param(
            "eps_amp",
            format!("need |eps_amp| <= 0.05, got {eps_amp}"),
        ));
    }
    let grid = Grid1D::new(u0.x[0], u0.x_max(), u0.len())?;
    let params = ReducedParams::new(u0.s_cost, 0.0, Some(u0.r))?;
    let cfg = SimConfig {
        dt,
        t_end: horizon,
        ..SimConfig::default()
    };
    let perturbed: Vec<f64> = u0.u.iter().zip(h).map(|(u, h)| u + eps_amp * h).collect();
    let mut run = Integrator::new(System::Reduced(params), grid, cfg, vec![perturbed])?;
    let mut reference = Integrator::new(System::Reduced(params), grid, cfg, vec![u0.u.clone()])?;
    let check = 10.0;
    let steps_per_check = (check / dt).round().max(1.0) as usize;
    let mut previous = run.fields()[0].clone();
    let mut t = 0.0;
    while t < horizon {
        for _ in 0..steps_per_check {
            run.step()?;
            reference.step()?;
        }
        t += steps_per_check as f64 * dt;
        let now = &run.fields()[0];
        let change = now
            .iter()
            .zip(&previous)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if change < SETTLE_TOL {
            let shift = front_position(now, &grid, 0.5)? - front_position(&reference.fields()[0], &grid, 0.5)?;
            let raw = psi_dot(u0, h);
            let normalized = -raw / psi_dot(u0, &u0.du);
            return Ok(RelaxationReport {
                eps_amp,
                shift,
                measured: shift / eps_amp,
                predicted_raw: raw,
                predicted_normalized: normalized,
                settle_time: t,
            });
        }
        previous = now.clone();
    }
    Err(Error::RelaxationNonConvergence { horizon })
}

/// Residual diagnostics collected for export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub s_cost: f64,
    pub r: f64,
    pub dx: f64,
    pub nodes: usize,
    pub leading_eigenvalues: Vec<f64>,
    pub translation_cosine: f64,
    pub kernel_residual: f64,
    pub adjoint_residual: f64,
    pub adjoint_residual_unweighted: f64,
    pub solvability_quotient: f64,
    pub second_solution_rate: f64,
}

/// Spectrum and kernel checks for one profile.
pub fn stability_report(u0: &WaveProfile, k: usize) -> Result<(StabilityReport, Spectrum)> {
    let op = assemble_l(u0)?;
    let spec = spectrum(&op, k)?;
    let report = StabilityReport {
        s_cost: u0.s_cost,
        r: u0.r,
        dx: u0.dx(),
        nodes: u0.len(),
        leading_eigenvalues: spec.values.clone(),
        translation_cosine: cosine(&spec.vectors[0], interior(&u0.du)),
        kernel_residual: kernel_residual(u0)?,
        adjoint_residual: adjoint_kernel_residual(u0, true)?,
        adjoint_residual_unweighted: adjoint_kernel_residual(u0, false)?,
        solvability_quotient: solvability_quotient(u0)?,
        second_solution_rate: second_kernel_growth_rate(u0)?,
    };
    Ok((report, spec))
}

/// Eigenvalues and eigenvectors as CSV: a header row of eigenvalues, then
/// one row per interior node.
pub fn write_spectrum_csv<W: Write>(op: &DiscretizedOperator, spec: &Spectrum, mut out: W) -> Result<()> {
    write!(out, "x")?;
    for j in 0..spec.values.len() {
        write!(out, ",v{j}")?;
    }
    writeln!(out)?;
    write!(out, "eigenvalue")?;
    for v in &spec.values {
        write!(out, ",{v:.16e}")?;
    }
    writeln!(out)?;
    for (i, x) in op.x.iter().enumerate() {
        write!(out, "{x:.16e}")?;
        for v in &spec.vectors {
            write!(out, ",{:.16e}", v[i])?;
        }
        writeln!(out)?;
    }
    Ok(())
}
