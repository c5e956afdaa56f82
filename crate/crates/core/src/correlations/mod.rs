//! Two-photon coincidence matrices.
//!
//! `Γ[i][j]` is the probability of one photon in mode `i` and the other in
//! mode `j`. The matrix is stored symmetrically and normalized so that each
//! unordered outcome counts once: `Σ_{i≤j} Γ[i][j] = 1`. Bunched outcomes on
//! the diagonal carry the bosonic factor 2.

mod oracle;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::matrix_csv;
use crate::lattice::{enumerate_modes, Mode, ModeIndexing};
use crate::walk::SingleParticleUnitary;

pub use oracle::{two_particle_oracle, ORACLE_MAX_STEPS};

const UNITARITY_TOLERANCE: f64 = 1e-6;

/// A photon pair injected into two input modes. `q` is the probability of
/// the pair behaving as distinguishable particles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiphotonInput {
    pub mode_a: Mode,
    pub mode_b: Mode,
    q: f64,
}

impl BiphotonInput {
    pub fn new(mode_a: Mode, mode_b: Mode, q: f64) -> Result<Self> {
        if mode_a == mode_b {
            return Err(Error::DuplicateInput(mode_a));
        }
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::OutOfUnitInterval { name: "q", value: q });
        }
        Ok(Self { mode_a, mode_b, q })
    }

    pub fn with_q(self, q: f64) -> Result<Self> {
        Self::new(self.mode_a, self.mode_b, q)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn indistinguishability(&self) -> f64 {
        1.0 - self.q
    }

    pub fn swapped(&self) -> Self {
        Self {
            mode_a: self.mode_b,
            mode_b: self.mode_a,
            q: self.q,
        }
    }
}

impl Default for BiphotonInput {
    fn default() -> Self {
        Self {
            mode_a: Mode::left(0),
            mode_b: Mode::right(0),
            q: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoincidenceMatrix {
    step: usize,
    gamma: Array2<f64>,
}

impl CoincidenceMatrix {
    /// Wraps a symmetric matrix; the caller guarantees shape and symmetry.
    pub(crate) fn from_raw(step: usize, gamma: Array2<f64>) -> Self {
        debug_assert_eq!(
            gamma.dim(),
            (crate::lattice::mode_count(step), crate::lattice::mode_count(step))
        );
        Self { step, gamma }
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn gamma(&self) -> &Array2<f64> {
        &self.gamma
    }

    pub fn dim(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn indexing(&self) -> ModeIndexing {
        enumerate_modes(self.step)
    }

    pub fn get(&self, i: Mode, j: Mode) -> Result<f64> {
        let ix = self.indexing();
        Ok(self.gamma[[ix.index_of(i)?, ix.index_of(j)?]])
    }

    /// `Σ_{i≤j} Γ[i][j]`.
    pub fn total(&self) -> f64 {
        let n = self.dim();
        (0..n).map(|i| (i..n).map(|j| self.gamma[[i, j]]).sum::<f64>()).sum()
    }

    /// Mean photon number per mode divided by two: the single-photon
    /// distribution averaged over both photons.
    pub fn marginal(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let off: f64 = (0..n).filter(|&j| j != i).map(|j| self.gamma[[i, j]]).sum();
                (2.0 * self.gamma[[i, i]] + off) / 2.0
            })
            .collect()
    }

    /// Scales every entry; used by homogeneity checks.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            step: self.step,
            gamma: &self.gamma * factor,
        }
    }

    /// CSV with a header row and column of `x_σ` labels, 12 significant digits.
    pub fn to_csv(&self) -> String {
        matrix_csv(&self.indexing(), |i, j| Some(self.gamma[[i, j]]))
    }
}

struct PairColumns<'a> {
    u: &'a SingleParticleUnitary,
    a: usize,
    b: usize,
}

fn columns<'a>(u: &'a SingleParticleUnitary, input: &BiphotonInput) -> Result<PairColumns<'a>> {
    let a = u.column_of(input.mode_a)?;
    let b = u.column_of(input.mode_b)?;
    if a == b {
        return Err(Error::DuplicateInput(input.mode_a));
    }
    for (col, mode) in [(a, input.mode_a), (b, input.mode_b)] {
        let norm = u.matrix().column(col).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNITARITY_TOLERANCE {
            return Err(Error::NonUnitary { mode, norm });
        }
    }
    Ok(PairColumns { u, a, b })
}

pub fn gamma_indistinguishable(u: &SingleParticleUnitary, input: &BiphotonInput) -> Result<CoincidenceMatrix> {
    let cols = columns(u, input)?;
    Ok(indistinguishable_unchecked(&cols))
}

fn indistinguishable_unchecked(cols: &PairColumns) -> CoincidenceMatrix {
    let m = cols.u.matrix();
    let ua = m.column(cols.a);
    let ub = m.column(cols.b);
    let n = m.nrows();
    let mut gamma = Array2::zeros((n, n));
    for i in 0..n {
        let (ai, bi) = (ua[i], ub[i]);
        if ai.norm_sqr() == 0.0 && bi.norm_sqr() == 0.0 {
            continue;
        }
        gamma[[i, i]] = 2.0 * (ai * bi).norm_sqr();
        for j in i + 1..n {
            let g = (ai * ub[j] + ua[j] * bi).norm_sqr();
            gamma[[i, j]] = g;
            gamma[[j, i]] = g;
        }
    }
    CoincidenceMatrix::from_raw(cols.u.step(), gamma)
}

pub fn gamma_distinguishable(u: &SingleParticleUnitary, input: &BiphotonInput) -> Result<CoincidenceMatrix> {
    let cols = columns(u, input)?;
    Ok(distinguishable_unchecked(&cols))
}

fn distinguishable_unchecked(cols: &PairColumns) -> CoincidenceMatrix {
    let m = cols.u.matrix();
    let pa: Vec<f64> = m.column(cols.a).iter().map(|z| z.norm_sqr()).collect();
    let pb: Vec<f64> = m.column(cols.b).iter().map(|z| z.norm_sqr()).collect();
    let n = pa.len();
    let mut gamma = Array2::zeros((n, n));
    for i in 0..n {
        gamma[[i, i]] = pa[i] * pb[i];
        for j in i + 1..n {
            let g = pa[i] * pb[j] + pa[j] * pb[i];
            gamma[[i, j]] = g;
            gamma[[j, i]] = g;
        }
    }
    CoincidenceMatrix::from_raw(cols.u.step(), gamma)
}

/// `Γ(q) = (1 − q) Γ_indistinguishable + q Γ_distinguishable`.
pub fn gamma_partial(u: &SingleParticleUnitary, input: &BiphotonInput) -> Result<CoincidenceMatrix> {
    let q = input.q();
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::OutOfUnitInterval { name: "q", value: q });
    }
    let cols = columns(u, input)?;
    if q == 0.0 {
        return Ok(indistinguishable_unchecked(&cols));
    }
    if q == 1.0 {
        return Ok(distinguishable_unchecked(&cols));
    }
    let ind = indistinguishable_unchecked(&cols);
    let dist = distinguishable_unchecked(&cols);
    let gamma = &ind.gamma * (1.0 - q) + &dist.gamma * q;
    Ok(CoincidenceMatrix::from_raw(u.step(), gamma))
}
