//! One-dimensional reaction-diffusion integrators.
//!
//! Three systems share one Strang-split stepping engine:
//!
//! - `(p, q, D)` allele frequencies and disequilibrium, diffusivity `sigma^2/2`;
//! - the four gamete frequencies `(u, v, w, z)`, same diffusivity;
//! - the reduced scalar equation for `u = p = q` in the rescaled frame, unit
//!   diffusivity.
//!
//! Each step is `R(dt/2) D(dt) R(dt/2)`. The reaction substep is one classic
//! RK4 step on the semi-discrete system; gradient-dependent terms are
//! re-evaluated from central differences at every RK stage so the substep is
//! a consistent fourth-order solve and the splitting keeps second order. The
//! diffusion substep is Crank-Nicolson (default) or forward Euler.

mod qle;
mod tracking;

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::genetics::{gamete_reaction, FitnessParams, GameteFreqs};
use crate::{bistable, logistic};

pub use qle::{qle_disequilibrium, QleMode};
pub use tracking::{argmax_abs, front_position, instantaneous_speed, SpeedFit};

/// Tolerance on field ranges before a run is aborted.
pub const RANGE_TOL: f64 = 1e-6;

/// Uniform grid on `[x_min, x_max]` with `n` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::param(
                "grid",
                format!("need x_min < x_max, got [{x_min}, {x_max}]"),
            ));
        }
        if n < 3 {
            return Err(Error::param("n", format!("need at least 3 nodes, got {n}")));
        }
        Ok(Self { x_min, x_max, n })
    }

    /// Grid on `[-half_width, half_width]` with spacing as close to `dx` as
    /// the node count allows (exactly `dx` when `half_width / dx` is whole).
    pub fn symmetric(half_width: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(Error::param("dx", format!("need dx > 0, got {dx}")));
        }
        let half = (half_width / dx).round() as usize;
        let w = half as f64 * dx;
        Self::new(-w, w, 2 * half + 1)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Samples `f` at every node.
    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.n).map(|i| f(self.x(i))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Reflecting ends (ghost node mirror).
    NoFlux,
    /// Dirichlet ends held at their initial values.
    Pinned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiffusionScheme {
    CrankNicolson,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Splitting {
    /// `R(dt/2) D(dt) R(dt/2)`, second order.
    Strang,
    /// `D(dt) R(dt)`, first order; kept for order comparisons.
    Lie,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Record a snapshot every this many steps (the final state is always
    /// recorded).
    pub record_every: usize,
    pub boundary: Boundary,
    pub diffusion: DiffusionScheme,
    pub splitting: Splitting,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            t_end: 100.0,
            record_every: 20,
            boundary: Boundary::NoFlux,
            diffusion: DiffusionScheme::CrankNicolson,
            splitting: Splitting::Strang,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, grid: &Grid1D, diffusivity: f64) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("dt", format!("need dt > 0, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::param("t_end", format!("need t_end >= 0, got {}", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(Error::param("record_every", "must be at least 1"));
        }
        if self.diffusion == DiffusionScheme::Explicit {
            let limit = grid.dx().powi(2) / (2.0 * diffusivity);
            if self.dt > limit {
                return Err(Error::CflViolation { dt: self.dt, limit });
            }
        }
        Ok(())
    }
}

/// Field identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    P,
    Q,
    D,
    U,
    V,
    W,
    Z,
    UReduced,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::P => "p",
            Quantity::Q => "q",
            Quantity::D => "D",
            Quantity::U => "u",
            Quantity::V => "v",
            Quantity::W => "w",
            Quantity::Z => "z",
            Quantity::UReduced => "u_reduced",
        }
    }

    /// Admissible closed range.
    pub fn range(self) -> (f64, f64) {
        match self {
            Quantity::D => (-0.25, 0.25),
            _ => (0.0, 1.0),
        }
    }

    /// Whether the front of this field is located by a level crossing
    /// (otherwise by the extremum of `|values|`).
    pub fn has_level_front(self) -> bool {
        !matches!(self, Quantity::D)
    }
}

/// Field values on a grid, tagged with their meaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field1D {
    pub quantity: Quantity,
    pub values: Vec<f64>,
}

impl Field1D {
    pub fn new(quantity: Quantity, values: Vec<f64>) -> Self {
        Self { quantity, values }
    }

    /// Largest excursion outside the admissible range (0 when inside).
    pub fn range_excess(&self) -> f64 {
        let (lo, hi) = self.quantity.range();
        self.values
            .iter()
            .map(|&v| (lo - v).max(v - hi).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Recorded run: times, snapshots and per-field front positions.
///
/// `fronts[k][j]` is the front of field `j` at `times[k]`; it is NaN where
/// the field has no single crossing (transient bumps, uniform states).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: Grid1D,
    pub quantities: Vec<Quantity>,
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<Field1D>>,
    pub fronts: Vec<Vec<f64>>,
}

impl Trajectory {
    fn index_of(&self, q: Quantity) -> Result<usize> {
        self.quantities
            .iter()
            .position(|&x| x == q)
            .ok_or_else(|| Error::param("quantity", format!("field {} not in trajectory", q.name())))
    }

    /// Front positions of one field over time.
    pub fn front_series(&self, q: Quantity) -> Result<Vec<f64>> {
        let j = self.index_of(q)?;
        Ok(self.fronts.iter().map(|f| f[j]).collect())
    }

    pub fn final_field(&self, q: Quantity) -> Result<&Field1D> {
        let j = self.index_of(q)?;
        Ok(&self.snapshots.last().expect("at least the initial snapshot")[j])
    }

    pub fn field_at(&self, k: usize, q: Quantity) -> Result<&Field1D> {
        let j = self.index_of(q)?;
        Ok(&self.snapshots[k][j])
    }

    /// Fitted speed of one field's front over `[t0, t1]`.
    pub fn speed(&self, q: Quantity, window: (f64, f64)) -> Result<SpeedFit> {
        instantaneous_speed(&self.times, &self.front_series(q)?, window)
    }

    /// CSV with one row per `(t, x)` and one column per field.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "t,x")?;
        for q in &self.quantities {
            write!(out, ",{}", q.name())?;
        }
        writeln!(out)?;
        for (t, snap) in self.times.iter().zip(&self.snapshots) {
            for i in 0..self.grid.n {
                write!(out, "{:.16e},{:.16e}", t, self.grid.x(i))?;
                for f in snap {
                    write!(out, ",{:.16e}", f.values[i])?;
                }
                writeln!(out)?;
            }
        }
        Ok(())
    }

    /// CSV of front positions over time.
    pub fn write_fronts_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "t")?;
        for q in &self.quantities {
            write!(out, ",{}", q.name())?;
        }
        writeln!(out)?;
        for (t, row) in self.times.iter().zip(&self.fronts) {
            write!(out, "{t:.16e}")?;
            for v in row {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Manifest describing a run: parameters, grid, scheme and a content
/// derived run id.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub model: String,
    pub params: serde_json::Value,
    pub grid: Grid1D,
    pub config: SimConfig,
    pub run_id: String,
}

impl RunManifest {
    pub fn new(model: &str, params: serde_json::Value, grid: Grid1D, config: SimConfig) -> Self {
        let canonical = serde_json::json!({
            "model": model,
            "params": params,
            "grid": grid,
            "config": config,
        });
        Self {
            model: model.to_string(),
            run_id: run_id(&canonical),
            params,
            grid,
            config,
        }
    }
}

/// First 16 hex digits of the SHA-256 of the compact JSON encoding.
pub fn run_id(value: &serde_json::Value) -> String {
    let digest = Sha256::digest(value.to_string().as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Parameters of the reduced equation
/// `u_t = u_xx + S f(u) + eps g(u) + (2/r)(S(2u-1) + eps) u_x^2`.
///
/// `r = None` drops the gradient term, leaving the single-cline bistable
/// equation `u_t = u_xx + S u(1-u)(2u - 1 + eps/S)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedParams {
    pub s_cost: f64,
    pub eps: f64,
    pub r: Option<f64>,
}

impl ReducedParams {
    pub fn new(s_cost: f64, eps: f64, r: Option<f64>) -> Result<Self> {
        if !(s_cost > 0.0 && s_cost.is_finite()) {
            return Err(Error::param("S", format!("need S > 0, got {s_cost}")));
        }
        if !eps.is_finite() || eps.abs() >= s_cost {
            return Err(Error::param("eps", format!("need |eps| < S, got {eps}")));
        }
        if let Some(r) = r {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::param("r", format!("need r > 0, got {r}")));
            }
        }
        Ok(Self { s_cost, eps, r })
    }
}

/// Which system an [`Integrator`] advances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum System {
    Pqd(FitnessParams),
    Gametes(FitnessParams),
    Reduced(ReducedParams),
}

impl System {
    pub fn quantities(&self) -> Vec<Quantity> {
        match self {
            System::Pqd(_) => vec![Quantity::P, Quantity::Q, Quantity::D],
            System::Gametes(_) => vec![Quantity::U, Quantity::V, Quantity::W, Quantity::Z],
            System::Reduced(_) => vec![Quantity::UReduced],
        }
    }

    pub fn diffusivity(&self) -> f64 {
        match self {
            System::Pqd(fp) | System::Gametes(fp) => fp.diffusivity(),
            System::Reduced(_) => 1.0,
        }
    }

    /// Reaction rates including gradient terms, for all fields at all nodes.
    fn rates(&self, y: &[Vec<f64>], dx: f64, out: &mut [Vec<f64>]) {
        let n = y[0].len();
        let grad = |f: &[f64], i: usize| -> f64 {
            if i == 0 || i + 1 == n {
                0.0
            } else {
                (f[i + 1] - f[i - 1]) / (2.0 * dx)
            }
        };
        match *self {
            System::Pqd(fp) => {
                let (p, q, d) = (&y[0], &y[1], &y[2]);
                for i in 0..n {
                    let sel_a = fp.cost_a * (2.0 * p[i] - 1.0) + fp.s_a;
                    let sel_b = fp.cost_b * (2.0 * q[i] - 1.0) + fp.s_b;
                    out[0][i] = sel_a * p[i] * (1.0 - p[i]) + sel_b * d[i];
                    out[1][i] = sel_b * q[i] * (1.0 - q[i]) + sel_a * d[i];
                    out[2][i] = fp.sigma2 * grad(p, i) * grad(q, i)
                        - (fp.r + (2.0 * p[i] - 1.0) * sel_a + (2.0 * q[i] - 1.0) * sel_b) * d[i];
                }
            }
            System::Gametes(fp) => {
                for i in 0..n {
                    let g = GameteFreqs::new(y[0][i], y[1][i], y[2][i], y[3][i]);
                    let rate = gamete_reaction(&g, &fp);
                    for k in 0..4 {
                        out[k][i] = rate[k];
                    }
                }
            }
            System::Reduced(rp) => {
                let u = &y[0];
                for i in 0..n {
                    let mut rate = rp.s_cost * bistable(u[i]) + rp.eps * logistic(u[i]);
                    if let Some(r) = rp.r {
                        let ux = grad(u, i);
                        rate += 2.0 / r * (rp.s_cost * (2.0 * u[i] - 1.0) + rp.eps) * ux * ux;
                    }
                    out[0][i] = rate;
                }
            }
        }
    }
}

/// Thomas factorisation of the constant Crank-Nicolson matrix
/// `I - (k dt / 2) A`, which is diagonally dominant so no pivoting is needed.
#[derive(Debug, Clone)]
struct CnFactor {
    lower: Vec<f64>,
    upper_mod: Vec<f64>,
    inv_denom: Vec<f64>,
    /// `lam = k dt / dx^2`.
    lam: f64,
}

impl CnFactor {
    fn new(n: usize, lam: f64, boundary: Boundary) -> Self {
        let half = 0.5 * lam;
        let mut lower = vec![-half; n - 1];
        let mut diag = vec![1.0 + lam; n];
        let mut upper = vec![-half; n - 1];
        match boundary {
            Boundary::NoFlux => {
                upper[0] = -lam;
                lower[n - 2] = -lam;
            }
            Boundary::Pinned => {
                diag[0] = 1.0;
                upper[0] = 0.0;
                diag[n - 1] = 1.0;
                lower[n - 2] = 0.0;
            }
        }
        let mut upper_mod = vec![0.0; n - 1];
        let mut inv_denom = vec![0.0; n];
        inv_denom[0] = 1.0 / diag[0];
        upper_mod[0] = upper[0] * inv_denom[0];
        for i in 1..n {
            let denom = diag[i] - lower[i - 1] * upper_mod[i - 1];
            inv_denom[i] = 1.0 / denom;
            if i < n - 1 {
                upper_mod[i] = upper[i] * inv_denom[i];
            }
        }
        Self {
            lower,
            upper_mod,
            inv_denom,
            lam,
        }
    }

    /// One Crank-Nicolson step in place.
    fn apply(&self, y: &mut [f64], rhs: &mut [f64], boundary: Boundary) {
        let n = y.len();
        let half = 0.5 * self.lam;
        laplacian_into(y, boundary, rhs);
        for i in 0..n {
            rhs[i] = y[i] + half * rhs[i];
        }
        // forward sweep
        rhs[0] *= self.inv_denom[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i - 1] * rhs[i - 1]) * self.inv_denom[i];
        }
        y[n - 1] = rhs[n - 1];
        for i in (0..n - 1).rev() {
            y[i] = rhs[i] - self.upper_mod[i] * y[i + 1];
        }
    }
}

/// Unscaled second difference `y[i-1] - 2 y[i] + y[i+1]` with the boundary
/// closure.
fn laplacian_into(y: &[f64], boundary: Boundary, out: &mut [f64]) {
    let n = y.len();
    for i in 1..n - 1 {
        out[i] = y[i - 1] - 2.0 * y[i] + y[i + 1];
    }
    match boundary {
        Boundary::NoFlux => {
            out[0] = 2.0 * (y[1] - y[0]);
            out[n - 1] = 2.0 * (y[n - 2] - y[n - 1]);
        }
        Boundary::Pinned => {
            out[0] = 0.0;
            out[n - 1] = 0.0;
        }
    }
}

/// Stepping engine holding the current state of one run.
#[derive(Debug, Clone)]
pub struct Integrator {
    pub system: System,
    pub grid: Grid1D,
    pub config: SimConfig,
    pub time: f64,
    fields: Vec<Vec<f64>>,
    cn_full: Option<CnFactor>,
    scratch: Vec<Vec<f64>>,
}

impl Integrator {
    /// Validates parameters, configuration and initial data.
    pub fn new(system: System, grid: Grid1D, config: SimConfig, init: Vec<Vec<f64>>) -> Result<Self> {
        match &system {
            System::Pqd(fp) | System::Gametes(fp) => fp.validate()?,
            System::Reduced(rp) => {
                ReducedParams::new(rp.s_cost, rp.eps, rp.r)?;
            }
        }
        config.validate(&grid, system.diffusivity())?;
        let quantities = system.quantities();
        if init.len() != quantities.len() {
            return Err(Error::param(
                "init",
                format!("expected {} fields, got {}", quantities.len(), init.len()),
            ));
        }
        for (f, q) in init.iter().zip(&quantities) {
            if f.len() != grid.n {
                return Err(Error::param(
                    "init",
                    format!("field {} has {} values, grid has {}", q.name(), f.len(), grid.n),
                ));
            }
            let (lo, hi) = q.range();
            if let Some((i, &v)) = f
                .iter()
                .enumerate()
                .find(|(_, &v)| !(v >= lo - RANGE_TOL && v <= hi + RANGE_TOL))
            {
                return Err(Error::FieldOutOfRange {
                    field: q.name(),
                    time: 0.0,
                    x: grid.x(i),
                    value: v,
                });
            }
            for &v in [f[0], f[grid.n - 1]].iter() {
                let dist = if *q == Quantity::D {
                    v.abs()
                } else {
                    v.abs().min((1.0 - v).abs())
                };
                if dist > RANGE_TOL {
                    return Err(Error::DomainTooNarrow {
                        field: q.name(),
                        value: v,
                    });
                }
            }
        }
        let lam = system.diffusivity() * config.dt / grid.dx().powi(2);
        let cn_full =
            (config.diffusion == DiffusionScheme::CrankNicolson).then(|| CnFactor::new(grid.n, lam, config.boundary));
        let scratch = vec![vec![0.0; grid.n]; 4 * init.len() + 1];
        Ok(Self {
            system,
            grid,
            config,
            time: 0.0,
            fields: init,
            cn_full,
            scratch,
        })
    }

    pub fn fields(&self) -> &[Vec<f64>] {
        &self.fields
    }

    pub fn snapshot(&self) -> Vec<Field1D> {
        self.system
            .quantities()
            .into_iter()
            .zip(&self.fields)
            .map(|(q, v)| Field1D::new(q, v.clone()))
            .collect()
    }

    /// One RK4 step of length `h` on the reaction system.
    fn react(&mut self, h: f64) {
        let m = self.fields.len();
        let n = self.grid.n;
        let dx = self.grid.dx();
        let pinned = self.config.boundary == Boundary::Pinned;
        let y0 = self.fields.clone();
        let mut k: Vec<Vec<Vec<f64>>> = Vec::with_capacity(4);
        let mut stage = y0.clone();
        for s in 0..4 {
            let mut rate = vec![vec![0.0; n]; m];
            self.system.rates(&stage, dx, &mut rate);
            if pinned {
                for f in rate.iter_mut() {
                    f[0] = 0.0;
                    f[n - 1] = 0.0;
                }
            }
            k.push(rate);
            if s < 3 {
                let c = if s < 2 { 0.5 * h } else { h };
                for j in 0..m {
                    for i in 0..n {
                        stage[j][i] = y0[j][i] + c * k[s][j][i];
                    }
                }
            }
        }
        for j in 0..m {
            for i in 0..n {
                self.fields[j][i] =
                    y0[j][i] + h / 6.0 * (k[0][j][i] + 2.0 * k[1][j][i] + 2.0 * k[2][j][i] + k[3][j][i]);
            }
        }
    }

    fn diffuse(&mut self, h: f64) {
        let boundary = self.config.boundary;
        let rhs = &mut self.scratch[0];
        match &self.cn_full {
            Some(cn) if (h - self.config.dt).abs() <= 1e-14 * self.config.dt => {
                for f in self.fields.iter_mut() {
                    cn.apply(f, rhs, boundary);
                }
            }
            Some(_) => {
                // shortened final step
                let lam = self.system.diffusivity() * h / self.grid.dx().powi(2);
                let cn = CnFactor::new(self.grid.n, lam, boundary);
                for f in self.fields.iter_mut() {
                    cn.apply(f, rhs, boundary);
                }
            }
            None => {
                let lam = self.system.diffusivity() * h / self.grid.dx().powi(2);
                for f in self.fields.iter_mut() {
                    laplacian_into(f, boundary, rhs);
                    for (y, l) in f.iter_mut().zip(rhs.iter()) {
                        *y += lam * l;
                    }
                }
            }
        }
    }

    /// Advances by `h` (normally `config.dt`) and checks field ranges.
    pub fn step_by(&mut self, h: f64) -> Result<()> {
        match self.config.splitting {
            Splitting::Strang => {
                self.react(0.5 * h);
                self.diffuse(h);
                self.react(0.5 * h);
            }
            Splitting::Lie => {
                self.diffuse(h);
                self.react(h);
            }
        }
        self.time += h;
        self.check_ranges()
    }

    pub fn step(&mut self) -> Result<()> {
        self.step_by(self.config.dt)
    }

    fn check_ranges(&self) -> Result<()> {
        for (f, q) in self.fields.iter().zip(self.system.quantities()) {
            let (lo, hi) = q.range();
            for (i, &v) in f.iter().enumerate() {
                if !(v >= lo - RANGE_TOL && v <= hi + RANGE_TOL) {
                    return Err(Error::FieldOutOfRange {
                        field: q.name(),
                        time: self.time,
                        x: self.grid.x(i),
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }

    /// Front positions of the current state (NaN where undefined).
    pub fn fronts(&self) -> Vec<f64> {
        self.fields
            .iter()
            .zip(self.system.quantities())
            .map(|(f, q)| {
                if q.has_level_front() {
                    front_position(f, &self.grid, 0.5).unwrap_or(f64::NAN)
                } else {
                    argmax_abs(f, &self.grid).unwrap_or(f64::NAN)
                }
            })
            .collect()
    }

    /// Runs to `config.t_end`, recording every `record_every` steps.
    pub fn run(mut self) -> Result<Trajectory> {
        let quantities = self.system.quantities();
        let mut traj = Trajectory {
            grid: self.grid,
            quantities,
            times: vec![self.time],
            snapshots: vec![self.snapshot()],
            fronts: vec![self.fronts()],
        };
        let dt = self.config.dt;
        let t_end = self.config.t_end;
        let full = ((t_end / dt) * (1.0 + 1e-12)).floor() as usize;
        for k in 1..=full {
            self.step()?;
            // Avoid accumulated round-off in the clock.
            self.time = k as f64 * dt;
            if k % self.config.record_every == 0 {
                self.record(&mut traj);
            }
        }
        let rest = t_end - full as f64 * dt;
        if rest > 1e-12 * dt.max(t_end) {
            self.step_by(rest)?;
            self.time = t_end;
        }
        if *traj.times.last().unwrap() < self.time {
            self.record(&mut traj);
        }
        Ok(traj)
    }

    fn record(&self, traj: &mut Trajectory) {
        traj.times.push(self.time);
        traj.snapshots.push(self.snapshot());
        traj.fronts.push(self.fronts());
    }
}

/// Integrates the `(p, q, D)` system from `init = [p, q, D]`.
pub fn simulate_pqd(init: [Vec<f64>; 3], fp: &FitnessParams, grid: &Grid1D, cfg: &SimConfig) -> Result<Trajectory> {
    Integrator::new(System::Pqd(*fp), *grid, *cfg, init.to_vec())?.run()
}

/// Integrates the four-gamete system from `init = [u, v, w, z]`.
pub fn simulate_gametes(init: [Vec<f64>; 4], fp: &FitnessParams, grid: &Grid1D, cfg: &SimConfig) -> Result<Trajectory> {
    Integrator::new(System::Gametes(*fp), *grid, *cfg, init.to_vec())?.run()
}

/// Integrates the reduced equation in the rescaled frame.
pub fn simulate_reduced(init: Vec<f64>, params: &ReducedParams, grid: &Grid1D, cfg: &SimConfig) -> Result<Trajectory> {
    Integrator::new(System::Reduced(*params), *grid, *cfg, vec![init])?.run()
}

/// Converts a rescaled-frame speed to the original frame (factor `sigma/sqrt 2`).
pub fn to_original_frame(speed: f64, sigma2: f64) -> f64 {
    speed * (0.5 * sigma2).sqrt()
}

/// Decreasing logistic front `1/2 - 1/2 tanh(k (x - centre) / 2)`.
pub fn tanh_front(x: f64, centre: f64, k: f64) -> f64 {
    0.5 - 0.5 * (0.5 * k * (x - centre)).tanh()
}

/// Gamete fields with linkage equilibrium (`D = 0`) for the given allele
/// frequency profiles.
pub fn gametes_from_pq(p: &[f64], q: &[f64]) -> [Vec<f64>; 4] {
    let u = p.iter().zip(q).map(|(p, q)| p * q).collect();
    let v = p.iter().zip(q).map(|(p, q)| p * (1.0 - q)).collect();
    let w = p.iter().zip(q).map(|(p, q)| (1.0 - p) * q).collect();
    let z = p.iter().zip(q).map(|(p, q)| (1.0 - p) * (1.0 - q)).collect();
    [u, v, w, z]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> Grid1D {
        Grid1D::symmetric(20.0, 0.2).unwrap()
    }

    #[test]
    fn grid_spacing() {
        let g = Grid1D::symmetric(10.0, 0.1).unwrap();
        assert_eq!(g.n, 201);
        assert!((g.dx() - 0.1).abs() < 1e-15);
        assert_eq!(g.x(100), 0.0);
        assert!(Grid1D::new(1.0, 0.0, 10).is_err());
        assert!(Grid1D::new(0.0, 1.0, 2).is_err());
    }

    #[test]
    fn cn_preserves_constants_and_mass() {
        let g = small_grid();
        let cn = CnFactor::new(g.n, 3.0, Boundary::NoFlux);
        let mut y = vec![0.3; g.n];
        let mut rhs = vec![0.0; g.n];
        cn.apply(&mut y, &mut rhs, Boundary::NoFlux);
        assert!(y.iter().all(|v| (v - 0.3).abs() < 1e-15));
        // trapezoid-weighted mass is conserved by the reflecting closure
        let mut y = g.sample(|x| (-x * x).exp());
        let mass = |y: &[f64]| y.iter().sum::<f64>() - 0.5 * (y[0] + y[y.len() - 1]);
        let before = mass(&y);
        for _ in 0..50 {
            cn.apply(&mut y, &mut rhs, Boundary::NoFlux);
        }
        assert!((mass(&y) - before).abs() < 1e-12);
    }

    #[test]
    fn explicit_cfl_guard() {
        let g = small_grid();
        let cfg = SimConfig {
            dt: 0.05,
            diffusion: DiffusionScheme::Explicit,
            ..SimConfig::default()
        };
        let fp = FitnessParams::symmetric(0.0, 0.1, 0.1, 2.0).unwrap();
        let init = [
            g.sample(|x| tanh_front(x, 0.0, 1.0)),
            g.sample(|x| tanh_front(x, 0.0, 1.0)),
            vec![0.0; g.n],
        ];
        assert!(matches!(
            simulate_pqd(init, &fp, &g, &cfg),
            Err(Error::CflViolation { .. })
        ));
    }

    #[test]
    fn uniform_half_has_zero_rates() {
        // The boundary check rejects 1/2 at the ends, so test the rates.
        let g = small_grid();
        let fp = FitnessParams::symmetric(0.0, 0.1, 0.1, 2.0).unwrap();
        let y = vec![vec![0.5; g.n], vec![0.5; g.n], vec![0.0; g.n]];
        let mut out = vec![vec![1.0; g.n]; 3];
        System::Pqd(fp).rates(&y, g.dx(), &mut out);
        assert!(out.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn narrow_domain_is_rejected() {
        let g = Grid1D::symmetric(5.0, 0.1).unwrap();
        let rp = ReducedParams::new(0.1, 0.0, Some(0.1)).unwrap();
        let init = g.sample(|x| tanh_front(x, 0.0, 0.1f64.sqrt()));
        assert!(matches!(
            simulate_reduced(init, &rp, &g, &SimConfig::default()),
            Err(Error::DomainTooNarrow { .. })
        ));
    }

    #[test]
    fn run_records_endpoints() {
        let g = Grid1D::symmetric(60.0, 0.2).unwrap();
        let rp = ReducedParams::new(0.1, 0.0, Some(0.1)).unwrap();
        let init = g.sample(|x| tanh_front(x, 0.0, 0.1f64.sqrt()));
        let cfg = SimConfig {
            dt: 0.1,
            t_end: 1.05,
            record_every: 3,
            ..SimConfig::default()
        };
        let traj = simulate_reduced(init, &rp, &g, &cfg).unwrap();
        assert_eq!(traj.times.first(), Some(&0.0));
        assert!((traj.times.last().unwrap() - 1.05).abs() < 1e-12);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(traj.times.len(), traj.snapshots.len());
        assert_eq!(traj.fronts.len(), traj.times.len());
    }

    #[test]
    fn run_id_is_stable() {
        let g = small_grid();
        let a = RunManifest::new("reduced", serde_json::json!({"S": 0.1}), g, SimConfig::default());
        let b = RunManifest::new("reduced", serde_json::json!({"S": 0.1}), g, SimConfig::default());
        let c = RunManifest::new("reduced", serde_json::json!({"S": 0.2}), g, SimConfig::default());
        assert_eq!(a.run_id, b.run_id);
        assert_ne!(a.run_id, c.run_id);
        assert_eq!(a.run_id.len(), 16);
    }

    #[test]
    fn frame_conversion() {
        assert_eq!(to_original_frame(0.3, 2.0), 0.3);
        assert!((to_original_frame(1.0, 8.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn linkage_equilibrium_gametes() {
        let p = [0.2, 0.7];
        let q = [0.9, 0.4];
        let g = gametes_from_pq(&p, &q);
        let [u, v, w, z] = &g;
        for i in 0..p.len() {
            assert!((u[i] + v[i] + w[i] + z[i] - 1.0).abs() < 1e-15);
            assert!((u[i] * z[i] - v[i] * w[i]).abs() < 1e-15);
        }
    }
}
