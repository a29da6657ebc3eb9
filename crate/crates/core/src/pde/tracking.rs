//! Front location and speed estimation.

use serde::{Deserialize, Serialize};

use super::Grid1D;
use crate::error::{Error, Result};
use crate::standing::least_squares_slope;

/// Abscissa where a decreasing field crosses `level`, by linear
/// interpolation between the bracketing nodes.
///
/// A node exactly at `level` counts as lying above it, so a unit step
/// `1, ..., 1, 0, ...` with the last `1` at node `k` gives `x_k + dx/2`.
/// Crossings in either direction are counted; more than one is an error.
pub fn front_position(values: &[f64], grid: &Grid1D, level: f64) -> Result<f64> {
    let mut found = None;
    let mut count = 0;
    for i in 0..values.len().saturating_sub(1) {
        let above_here = values[i] >= level;
        let above_next = values[i + 1] >= level;
        if above_here != above_next {
            count += 1;
            if above_here {
                let t = (values[i] - level) / (values[i] - values[i + 1]);
                found = Some(grid.x(i) + t * grid.dx());
            }
        }
    }
    match (count, found) {
        (0, _) => Err(Error::NoCrossing),
        (1, Some(x)) => Ok(x),
        (1, None) => Err(Error::NoCrossing),
        (count, _) => Err(Error::MultipleCrossings { count }),
    }
}

/// Location of the extremum of `|values|`, refined by the parabola through
/// the maximal node and its neighbours.
pub fn argmax_abs(values: &[f64], grid: &Grid1D) -> Result<f64> {
    let (k, &peak) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .ok_or(Error::NoCrossing)?;
    if peak == 0.0 {
        return Err(Error::NoCrossing);
    }
    if k == 0 || k + 1 == values.len() {
        return Ok(grid.x(k));
    }
    let (a, b, c) = (values[k - 1].abs(), peak.abs(), values[k + 1].abs());
    let denom = a - 2.0 * b + c;
    let offset = if denom < 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    Ok(grid.x(k) + offset.clamp(-0.5, 0.5) * grid.dx())
}

/// Front speed estimates over a time window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedFit {
    /// `(t, c)` pairs from central differences of the positions.
    pub series: Vec<(f64, f64)>,
    /// Least-squares slope of position against time over the window.
    pub fitted: f64,
    pub samples: usize,
}

/// Central-difference speeds and fitted slope of `positions(times)` using
/// samples with `t` in `[window.0, window.1]`. NaN positions are skipped.
pub fn instantaneous_speed(times: &[f64], positions: &[f64], window: (f64, f64)) -> Result<SpeedFit> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(positions)
        .filter(|(t, x)| **t >= window.0 && **t <= window.1 && x.is_finite())
        .map(|(t, x)| (*t, *x))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            got: pts.len(),
        });
    }
    let series = pts
        .windows(3)
        .map(|w| (w[1].0, (w[2].1 - w[0].1) / (w[2].0 - w[0].0)))
        .collect();
    let fitted = least_squares_slope(&pts).ok_or(Error::InsufficientSamples {
        needed: 3,
        got: pts.len(),
    })?;
    Ok(SpeedFit {
        series,
        fitted,
        samples: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::tanh_front;

    #[test]
    fn step_convention() {
        let g = Grid1D::new(0.0, 10.0, 11).unwrap();
        let v: Vec<f64> = (0..11).map(|i| if i <= 4 { 1.0 } else { 0.0 }).collect();
        assert_eq!(front_position(&v, &g, 0.5).unwrap(), 4.5);
    }

    #[test]
    fn tanh_root() {
        let s: f64 = 0.1;
        let g = Grid1D::symmetric(60.0, 0.01).unwrap();
        let v = g.sample(|x| tanh_front(x, 3.0, s.sqrt()));
        let x = front_position(&v, &g, 0.5).unwrap();
        // curvature vanishes at the centre; interpolation error is far below dx^2
        assert!((x - 3.0).abs() < g.dx().powi(2));
    }

    #[test]
    fn translation_equivariance() {
        let g = Grid1D::symmetric(40.0, 0.1).unwrap();
        let a = 1.2345;
        let base = front_position(&g.sample(|x| tanh_front(x, 0.3, 0.8)), &g, 0.5).unwrap();
        let moved = front_position(&g.sample(|x| tanh_front(x - a, 0.3, 0.8)), &g, 0.5).unwrap();
        assert!((moved - base - a).abs() < g.dx().powi(2));
    }

    #[test]
    fn crossing_errors() {
        let g = Grid1D::new(0.0, 4.0, 5).unwrap();
        assert_eq!(front_position(&[0.1; 5], &g, 0.5), Err(Error::NoCrossing));
        assert_eq!(
            front_position(&[1.0, 0.0, 1.0, 0.0, 0.0], &g, 0.5),
            Err(Error::MultipleCrossings { count: 3 })
        );
    }

    #[test]
    fn parabolic_peak() {
        let g = Grid1D::new(-5.0, 5.0, 101).unwrap();
        let v = g.sample(|x| -0.2 * (-(x - 0.537f64).powi(2)).exp());
        let x = argmax_abs(&v, &g).unwrap();
        assert!((x - 0.537).abs() < 1e-3);
    }

    #[test]
    fn linear_positions_give_exact_speed() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.7).collect();
        let x: Vec<f64> = t.iter().map(|t| 2.0 + 0.0315 * t).collect();
        let fit = instantaneous_speed(&t, &x, (0.0, 100.0)).unwrap();
        assert!((fit.fitted - 0.0315).abs() < 1e-15);
        assert!(fit.series.iter().all(|(_, c)| (c - 0.0315).abs() < 1e-13));
    }

    #[test]
    fn too_few_samples() {
        let r = instantaneous_speed(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0], (0.5, 2.0));
        assert_eq!(r, Err(Error::InsufficientSamples { needed: 3, got: 2 }));
    }
}
