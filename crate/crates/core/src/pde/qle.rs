//! Quasi-linkage-equilibrium estimates of `D` from allele-frequency
//! gradients.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QleMode {
    /// `D = (sigma^2 / r) p_x q_x`.
    Local,
    /// The local value smoothed by `rho(x) = (a/2) exp(-a |x|)` with
    /// `a = sqrt(2r / sigma^2)`.
    Kernel,
}

/// QLE disequilibrium on a uniform grid with spacing `dx`. Gradients are
/// central differences (one-sided at the ends).
pub fn qle_disequilibrium(p: &[f64], q: &[f64], dx: f64, sigma2: f64, r: f64, mode: QleMode) -> Vec<f64> {
    assert_eq!(p.len(), q.len());
    let px = gradient(p, dx);
    let qx = gradient(q, dx);
    let local: Vec<f64> = px.iter().zip(&qx).map(|(a, b)| sigma2 / r * a * b).collect();
    match mode {
        QleMode::Local => local,
        QleMode::Kernel => convolve_exponential(&local, dx, (2.0 * r / sigma2).sqrt()),
    }
}

fn gradient(f: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    (0..n)
        .map(|i| match i {
            0 => (f[1] - f[0]) / dx,
            i if i + 1 == n => (f[n - 1] - f[n - 2]) / dx,
            i => (f[i + 1] - f[i - 1]) / (2.0 * dx),
        })
        .collect()
}

/// Discrete convolution with the unit-mass exponential kernel of rate `a`,
/// truncated where the kernel drops below `1e-17` of its peak.
fn convolve_exponential(f: &[f64], dx: f64, a: f64) -> Vec<f64> {
    let n = f.len();
    let reach = ((39.0 / (a * dx)).ceil() as usize).min(n);
    let mut kernel: Vec<f64> = (0..=reach).map(|j| (-a * j as f64 * dx).exp()).collect();
    let mass: f64 = dx * (kernel[0] + 2.0 * kernel[1..].iter().sum::<f64>());
    kernel.iter_mut().for_each(|k| *k /= mass);
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(reach);
            let hi = (i + reach).min(n - 1);
            dx * (lo..=hi).map(|j| kernel[i.abs_diff(j)] * f[j]).sum::<f64>()
        })
        .collect()
}
