//! Browser bindings: standing-wave profiles, the speed coefficient against
//! `r`, and a steppable run of the reduced equation.
//!
//! Everything crossing the boundary is a number or a `Vec<f64>`; errors
//! come back as strings.

use clines_core::pde::{Grid1D, Integrator, ReducedParams, SimConfig, System};
use clines_core::speed::{c1_exact, c1_series, c1_star, C1_QUAD_TOL};
use clines_core::standing::{default_x_max, profile_from_quadrature};
use wasm_bindgen::prelude::*;

fn msg(e: clines_core::Error) -> String {
    e.to_string()
}

/// Standing wave on `[-x_max, x_max]` with `x_max` chosen from `S`:
/// `[x_0..x_n, u_0..u_n]`.
#[wasm_bindgen]
pub fn standing_profile(s_cost: f64, r: f64, dx: f64) -> Result<Vec<f64>, String> {
    let x_max = default_x_max(s_cost.max(1e-6)).min(200.0);
    let p = profile_from_quadrature(s_cost, r, x_max, dx).map_err(msg)?;
    let mut out = p.x.clone();
    out.extend_from_slice(&p.u);
    Ok(out)
}

/// Rows `[r, c1, series, c1*]` for `n` values of `r` spread evenly over
/// `[r_min, r_max]`, flattened.
#[wasm_bindgen]
pub fn c1_curve(s_cost: f64, r_min: f64, r_max: f64, n: usize) -> Result<Vec<f64>, String> {
    if n < 2 || !(r_max > r_min) {
        return Err(format!(
            "need n >= 2 and r_max > r_min, got n = {n}, [{r_min}, {r_max}]"
        ));
    }
    let mut out = Vec::with_capacity(4 * n);
    for i in 0..n {
        let r = r_min + (r_max - r_min) * i as f64 / (n - 1) as f64;
        out.extend_from_slice(&[
            r,
            c1_exact(s_cost, r, C1_QUAD_TOL).map_err(msg)?,
            c1_series(s_cost, r, 2),
            c1_star(s_cost, r),
        ]);
    }
    Ok(out)
}

/// The reduced equation started from the standing wave, advanced on demand.
#[wasm_bindgen]
pub struct Simulation {
    inner: Integrator,
    grid: Grid1D,
    dt: f64,
    steps: usize,
}

#[wasm_bindgen]
impl Simulation {
    /// Starts from the `eps = 0` standing wave so that the drift seen on
    /// screen is the bias `eps` alone.
    #[wasm_bindgen(constructor)]
    pub fn new(s_cost: f64, r: f64, eps: f64, dx: f64) -> Result<Simulation, String> {
        let half = default_x_max(s_cost.max(1e-6)).min(200.0);
        let grid = Grid1D::symmetric(half, dx).map_err(msg)?;
        let u0 = profile_from_quadrature(s_cost, r, half, dx).map_err(msg)?;
        let params = ReducedParams::new(s_cost, eps, Some(r)).map_err(msg)?;
        let dt = dx.min(0.1);
        // the page drives step() itself; t_end is never reached
        let cfg = SimConfig {
            dt,
            t_end: 0.0,
            ..SimConfig::default()
        };
        let init = grid.sample(|x| u0.value_at(x));
        let inner = Integrator::new(System::Reduced(params), grid, cfg, vec![init]).map_err(msg)?;
        Ok(Simulation {
            inner,
            grid,
            dt,
            steps: 0,
        })
    }

    /// Advances `n` steps.
    pub fn step(&mut self, n: usize) -> Result<(), String> {
        for _ in 0..n {
            self.inner.step().map_err(msg)?;
            self.steps += 1;
        }
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    /// Position of the `u = 1/2` crossing, NaN if there is none.
    pub fn front(&self) -> f64 {
        self.inner.fronts()[0]
    }

    pub fn values(&self) -> Vec<f64> {
        self.inner.fields()[0].clone()
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.grid.nodes()
    }
}
