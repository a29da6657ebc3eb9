//! Tridiagonal kernels: pivoted solves, bordered systems, and symmetric
//! tridiagonal eigenpairs by Sturm bisection plus inverse iteration.

use crate::error::{Error, Result};

/// General tridiagonal matrix. `lower[i]` couples row `i + 1` to column `i`,
/// `upper[i]` couples row `i` to column `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len() + 1, diag.len());
        assert_eq!(upper.len() + 1, diag.len());
        Self { lower, diag, upper }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(
            vec![0.0; n.saturating_sub(1)],
            vec![0.0; n],
            vec![0.0; n.saturating_sub(1)],
        )
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.upper.clone(), self.diag.clone(), self.lower.clone())
    }

    pub fn shifted(&self, shift: f64) -> Self {
        let mut t = self.clone();
        t.diag.iter_mut().for_each(|d| *d -= shift);
        t
    }

    /// Dense copy, row-major. Test and export helper.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = self.diag[i];
            if i + 1 < n {
                m[i][i + 1] = self.upper[i];
                m[i + 1][i] = self.lower[i];
            }
        }
        m
    }

    /// Solves `A x = rhs` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut d = self.diag.clone();
        let mut du = self.upper.clone();
        let mut dl = self.lower.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut b = rhs.to_vec();
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    return Err(Error::SingularSystem(i));
                }
                let fact = dl[i] / d[i];
                d[i + 1] -= fact * du[i];
                b[i + 1] -= fact * b[i];
                dl[i] = 0.0;
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                let temp = d[i + 1];
                d[i + 1] = du[i] - fact * temp;
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du2[i];
                }
                du[i] = temp;
                b.swap(i, i + 1);
                b[i + 1] -= fact * b[i];
            }
        }
        if d[n - 1] == 0.0 {
            return Err(Error::SingularSystem(n - 1));
        }
        b[n - 1] /= d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
        }
        Ok(b)
    }
}

/// Solves the bordered system
///
/// ```text
/// [ T  col ] [x]   [rhs]
/// [ row' corner ] [s] = [rhs_last]
/// ```
pub fn solve_bordered(
    t: &Tridiagonal,
    col: &[f64],
    row: &[f64],
    corner: f64,
    rhs: &[f64],
    rhs_last: f64,
) -> Result<(Vec<f64>, f64)> {
    let y1 = t.solve(rhs)?;
    let y2 = t.solve(col)?;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let denom = corner - dot(row, &y2);
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::SingularSystem(t.len()));
    }
    let s = (rhs_last - dot(row, &y1)) / denom;
    let x = y1.iter().zip(&y2).map(|(a, b)| a - s * b).collect();
    Ok((x, s))
}

/// Symmetric tridiagonal matrix with diagonal `diag` and off-diagonal `off`.
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len());
        Self { diag, off }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn as_tridiagonal(&self) -> Tridiagonal {
        Tridiagonal::new(self.off.clone(), self.diag.clone(), self.off.clone())
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.len() {
            let e2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            q = self.diag[i] - x - if i == 0 { 0.0 } else { e2 / q };
            if q == 0.0 {
                q = -f64::EPSILON * (1.0 + x.abs());
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `index`-th smallest eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, index: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let scale = lo.abs().max(hi.abs()).max(1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * scale {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Unit eigenvector for an (accurately known) eigenvalue by inverse
    /// iteration.
    pub fn eigenvector(&self, lambda: f64) -> Result<Vec<f64>> {
        let n = self.len();
        let scale = self.gershgorin().1.abs().max(1.0);
        let shift = lambda + 1e-12 * scale;
        let shifted = self.as_tridiagonal().shifted(shift);
        // Deterministic, non-symmetric start vector.
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.618).sin()).collect();
        normalize(&mut v);
        let mut last = v.clone();
        for _ in 0..8 {
            v = shifted.solve(&v)?;
            normalize(&mut v);
            let diff = v
                .iter()
                .zip(&last)
                .map(|(a, b)| (a - b).abs().min((a + b).abs()))
                .fold(0.0, f64::max);
            last = v.clone();
            if diff < 1e-13 {
                break;
            }
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::EigenNonConvergence { shift });
        }
        Ok(v)
    }
}

pub fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiagonal {
        SymTridiagonal::new(vec![-2.0; n], vec![1.0; n - 1])
    }

    #[test]
    fn solve_matches_apply() {
        let t = Tridiagonal::new(vec![1.0, 3.0, -2.0], vec![0.5, -1.0, 4.0, 2.0], vec![2.0, 1.0, 0.25]);
        let x = vec![1.0, -2.0, 0.5, 3.0];
        let b = t.apply(&x);
        let y = t.solve(&b).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_leading_pivot_needs_interchange() {
        let t = Tridiagonal::new(vec![1.0, 1.0], vec![0.0, 1.0, 1.0], vec![1.0, 1.0]);
        let x = vec![1.0, 2.0, 3.0];
        let y = t.solve(&t.apply(&x)).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn singular_is_reported() {
        let t = Tridiagonal::new(vec![0.0], vec![0.0, 1.0], vec![0.0]);
        assert!(t.solve(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn bordered_system() {
        let t = Tridiagonal::new(vec![1.0, 1.0], vec![4.0, 4.0, 4.0], vec![1.0, 1.0]);
        let col = [1.0, 0.0, -1.0];
        let row = [0.5, 0.5, 0.5];
        let (x_true, s_true) = (vec![1.0, -1.0, 2.0], 3.0);
        let mut rhs = t.apply(&x_true);
        for i in 0..3 {
            rhs[i] += col[i] * s_true;
        }
        let last = row.iter().zip(&x_true).map(|(a, b)| a * b).sum::<f64>() + 2.0 * s_true;
        let (x, s) = solve_bordered(&t, &col, &row, 2.0, &rhs, last).unwrap();
        assert!((s - s_true).abs() < 1e-13);
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn laplacian_spectrum_is_analytic() {
        let n = 50;
        let m = laplacian(n);
        for k in 0..n {
            let exact = -2.0 + 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            let idx = n - 1 - k;
            assert!((m.eigenvalue(idx) - exact).abs() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn inverse_iteration_recovers_sine_mode() {
        let n = 40;
        let m = laplacian(n);
        let lambda = m.eigenvalue(n - 1);
        let v = m.eigenvector(lambda).unwrap();
        let mut exact: Vec<f64> = (0..n)
            .map(|i| ((i + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).sin())
            .collect();
        normalize(&mut exact);
        let cos: f64 = v.iter().zip(&exact).map(|(a, b)| a * b).sum();
        assert!(cos.abs() > 1.0 - 1e-12);
    }
}
