//! Two-locus, two-allele gamete dynamics with underdominant selection at
//! each locus and multiplicative fitness across loci.
//!
//! Locus A genotypes have fitness `AA: 1 + 2 s_a`, `Aa: 1 + s_a - S_a`,
//! `aa: 1`, and likewise for locus B. Gametes are ordered `AB, Ab, aB, ab`
//! and written `(u, v, w, z)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Selection, recombination and dispersal constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessParams {
    /// Directional advantage of `A` (`s_A`).
    pub s_a: f64,
    /// Directional advantage of `B` (`s_B`).
    pub s_b: f64,
    /// Heterozygote cost at locus A (`S_A`).
    pub cost_a: f64,
    /// Heterozygote cost at locus B (`S_B`).
    pub cost_b: f64,
    /// Recombination probability between the loci.
    pub r: f64,
    /// Dispersal variance per generation.
    pub sigma2: f64,
}

impl FitnessParams {
    pub fn new(s_a: f64, s_b: f64, cost_a: f64, cost_b: f64, r: f64, sigma2: f64) -> Result<Self> {
        let fp = Self {
            s_a,
            s_b,
            cost_a,
            cost_b,
            r,
            sigma2,
        };
        fp.validate()?;
        Ok(fp)
    }

    /// Symmetric loci: `s_a = s_b = s`, `S_a = S_b = cost`.
    pub fn symmetric(s: f64, cost: f64, r: f64, sigma2: f64) -> Result<Self> {
        Self::new(s, s, cost, cost, r, sigma2)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.s_a, self.s_b, self.cost_a, self.cost_b, self.r, self.sigma2]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::param("fitness", "non-finite coefficient"));
        }
        if !(self.cost_a > 0.0 && self.s_a >= 0.0 && self.s_a < self.cost_a) {
            return Err(Error::param(
                "s_a",
                format!("need 0 <= s_a < S_a, got s_a = {}, S_a = {}", self.s_a, self.cost_a),
            ));
        }
        if !(self.cost_b > 0.0 && self.s_b >= 0.0 && self.s_b < self.cost_b) {
            return Err(Error::param(
                "s_b",
                format!("need 0 <= s_b < S_b, got s_b = {}, S_b = {}", self.s_b, self.cost_b),
            ));
        }
        if !(0.0..=0.5).contains(&self.r) {
            return Err(Error::param("r", format!("need 0 <= r <= 1/2, got {}", self.r)));
        }
        if self.sigma2 <= 0.0 {
            return Err(Error::param("sigma2", format!("need sigma2 > 0, got {}", self.sigma2)));
        }
        Ok(())
    }

    /// All selection and recombination coefficients multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            s_a: self.s_a * alpha,
            s_b: self.s_b * alpha,
            cost_a: self.cost_a * alpha,
            cost_b: self.cost_b * alpha,
            r: self.r * alpha,
            sigma2: self.sigma2,
        }
    }

    /// Diffusion coefficient `sigma^2 / 2`.
    pub fn diffusivity(&self) -> f64 {
        0.5 * self.sigma2
    }

    /// Heterozygote fitness factors `(AA, Aa, aa)` for locus A.
    fn locus_a(&self) -> (f64, f64, f64) {
        (1.0 + 2.0 * self.s_a, 1.0 + self.s_a - self.cost_a, 1.0)
    }

    fn locus_b(&self) -> (f64, f64, f64) {
        (1.0 + 2.0 * self.s_b, 1.0 + self.s_b - self.cost_b, 1.0)
    }
}

/// Gamete frequencies `(u, v, w, z)` for `AB, Ab, aB, ab`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameteFreqs {
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub z: f64,
}

impl GameteFreqs {
    pub const fn new(u: f64, v: f64, w: f64, z: f64) -> Self {
        Self { u, v, w, z }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.u, self.v, self.w, self.z]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn sum(&self) -> f64 {
        self.u + self.v + self.w + self.z
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.as_array().iter().all(|&y| (-tol..=1.0 + tol).contains(&y)) && (self.sum() - 1.0).abs() <= tol
    }

    /// Linkage disequilibrium `uz - vw`.
    pub fn disequilibrium(&self) -> f64 {
        self.u * self.z - self.v * self.w
    }

    /// Relabelling `A <-> a`, `B <-> b`.
    pub fn swapped(&self) -> Self {
        Self::new(self.z, self.w, self.v, self.u)
    }
}

/// Allele frequencies and linkage disequilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pqd {
    pub p: f64,
    pub q: f64,
    pub d: f64,
}

impl Pqd {
    pub const fn new(p: f64, q: f64, d: f64) -> Self {
        Self { p, q, d }
    }
}

const FEASIBILITY_TOL: f64 = 1e-12;

/// `(p, q, D) = (u + v, u + w, uz - vw)`.
pub fn to_pqd(g: &GameteFreqs) -> Pqd {
    Pqd::new(g.u + g.v, g.u + g.w, g.disequilibrium())
}

/// Inverse of [`to_pqd`]. Reconstructed gametes slightly outside `[0, 1]`
/// (by at most 1e-12) are clamped; larger violations are rejected.
pub fn from_pqd(s: &Pqd) -> Result<GameteFreqs> {
    let (p, q, d) = (s.p, s.q, s.d);
    let raw = [
        p * q + d,
        p * (1.0 - q) - d,
        (1.0 - p) * q - d,
        (1.0 - p) * (1.0 - q) + d,
    ];
    let mut out = [0.0; 4];
    for (i, &y) in raw.iter().enumerate() {
        if !(-FEASIBILITY_TOL..=1.0 + FEASIBILITY_TOL).contains(&y) {
            return Err(Error::InfeasibleState { index: i, value: y });
        }
        out[i] = y.clamp(0.0, 1.0);
    }
    Ok(GameteFreqs::from_array(out))
}

/// Mean fitness of the diploid population formed by random union of gametes.
pub fn mean_fitness(g: &GameteFreqs, fp: &FitnessParams) -> f64 {
    let (aa_hom, aa_het, _) = fp.locus_a();
    let (bb_hom, bb_het, _) = fp.locus_b();
    let GameteFreqs { u, v, w, z } = *g;
    aa_hom * bb_hom * u * u
        + aa_hom * v * v
        + bb_hom * w * w
        + z * z
        + 2.0 * aa_hom * bb_het * u * v
        + 2.0 * aa_het * bb_hom * u * w
        + 2.0 * aa_het * bb_het * u * z
        + 2.0 * aa_het * bb_het * v * w
        + 2.0 * aa_het * v * z
        + 2.0 * bb_het * w * z
}

/// Selection-weighted gamete output before normalisation by mean fitness.
fn gamete_numerators(g: &GameteFreqs, fp: &FitnessParams) -> [f64; 4] {
    let (aa_hom, aa_het, _) = fp.locus_a();
    let (bb_hom, bb_het, _) = fp.locus_b();
    let r = fp.r;
    let GameteFreqs { u, v, w, z } = *g;
    let double_het = aa_het * bb_het;
    [
        aa_hom * bb_hom * u * u
            + aa_hom * bb_het * u * v
            + aa_het * bb_hom * u * w
            + (1.0 - r) * double_het * u * z
            + r * double_het * w * v,
        aa_hom * v * v
            + aa_hom * bb_het * v * u
            + aa_het * v * z
            + (1.0 - r) * double_het * v * w
            + r * double_het * u * z,
        bb_hom * w * w
            + bb_het * w * z
            + aa_het * bb_hom * w * u
            + (1.0 - r) * double_het * w * v
            + r * double_het * u * z,
        z * z + aa_het * z * v + bb_het * z * w + (1.0 - r) * double_het * z * u + r * double_het * w * v,
    ]
}

/// One generation of selection, random union and recombination.
///
/// The result is renormalised by its exact sum so that round-off does not
/// accumulate over many generations.
pub fn recursion_step_exact(g: &GameteFreqs, fp: &FitnessParams) -> GameteFreqs {
    let num = gamete_numerators(g, fp);
    let wbar = mean_fitness(g, fp);
    let next = num.map(|y| y / wbar);
    let total: f64 = next.iter().sum();
    GameteFreqs::from_array(next.map(|y| y / total))
}

/// First-order-in-`alpha` recursion on `(p, q, D)`.
pub fn recursion_step_first_order(s: &Pqd, fp: &FitnessParams, alpha: f64) -> Pqd {
    let sel_a = fp.cost_a * (2.0 * s.p - 1.0) + fp.s_a;
    let sel_b = fp.cost_b * (2.0 * s.q - 1.0) + fp.s_b;
    let p = s.p + alpha * (sel_a * s.p * (1.0 - s.p) + sel_b * s.d);
    let q = s.q + alpha * (sel_b * s.q * (1.0 - s.q) + sel_a * s.d);
    let d = s.d - alpha * (fp.r + (2.0 * s.p - 1.0) * sel_a + (2.0 * s.q - 1.0) * sel_b) * s.d;
    Pqd::new(p, q, d)
}

/// Per-generation net change `exact_step(y) - y`, the reaction term of the
/// continuous-time gamete system. Components sum to `1 - sum(y)`, which is
/// zero on the simplex and pulls round-off drift back towards it.
pub fn gamete_reaction(g: &GameteFreqs, fp: &FitnessParams) -> [f64; 4] {
    let num = gamete_numerators(g, fp);
    let wbar = mean_fitness(g, fp);
    let y = g.as_array();
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = num[i] / wbar - y[i];
    }
    out
}
