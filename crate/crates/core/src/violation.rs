//! Cauchy–Schwarz violation analysis of coincidence matrices.
//!
//! For every pair of distinct modes `V_ij = (2/3)√(Γ_ii Γ_jj) − Γ_ij`; positive
//! values witness nonclassical correlations. The diagonal is undefined.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::correlations::CoincidenceMatrix;
use crate::error::{Error, Result};
use crate::export::matrix_csv;
use crate::lattice::{enumerate_modes, mode_at, Mode, ModeIndexing};

const TWO_THIRDS: f64 = 2.0 / 3.0;

#[inline]
pub(crate) fn pair_violation(gii: f64, gjj: f64, gij: f64) -> f64 {
    TWO_THIRDS * (gii * gjj).sqrt() - gij
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViolationMatrix {
    pub step: usize,
    /// Symmetric; diagonal entries are NaN.
    pub v: Array2<f64>,
    /// Largest `V_ij` over unordered pairs, ties to the lowest index pair.
    pub mav: f64,
    pub mav_pair: (Mode, Mode),
    /// Sum of the positive `V_ij` over unordered pairs.
    pub total_violation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationSummary {
    pub mav: f64,
    pub mav_pair: (Mode, Mode),
    pub total_violation: f64,
}

impl ViolationMatrix {
    pub fn indexing(&self) -> ModeIndexing {
        enumerate_modes(self.step)
    }

    pub fn get(&self, i: Mode, j: Mode) -> Result<f64> {
        if i == j {
            return Err(Error::SameMode(i));
        }
        let ix = self.indexing();
        Ok(self.v[[ix.index_of(i)?, ix.index_of(j)?]])
    }

    pub fn summary(&self) -> ViolationSummary {
        ViolationSummary {
            mav: self.mav,
            mav_pair: self.mav_pair,
            total_violation: self.total_violation,
        }
    }

    /// Same layout as the coincidence CSV; diagonal cells are empty.
    pub fn to_csv(&self) -> String {
        matrix_csv(&self.indexing(), |i, j| (i != j).then(|| self.v[[i, j]]))
    }
}

/// Builds the summaries for a filled violation matrix.
pub(crate) fn summarize(step: usize, v: Array2<f64>) -> ViolationMatrix {
    let n = v.nrows();
    let mut mav = f64::NEG_INFINITY;
    let mut best = (0, 1.min(n.saturating_sub(1)));
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let x = v[[i, j]];
            if x > mav {
                mav = x;
                best = (i, j);
            }
            if x > 0.0 {
                total += x;
            }
        }
    }
    ViolationMatrix {
        step,
        v,
        mav,
        mav_pair: (mode_at(step, best.0), mode_at(step, best.1)),
        total_violation: total,
    }
}

pub fn violation_matrix(gamma: &CoincidenceMatrix) -> Result<ViolationMatrix> {
    let g = gamma.gamma();
    let n = gamma.dim();
    if let Some(((i, j), _)) = g.indexed_iter().find(|(_, &x)| x < 0.0) {
        return Err(Error::NegativeProbability(
            mode_at(gamma.step(), i),
            mode_at(gamma.step(), j),
        ));
    }
    let mut v = Array2::from_elem((n, n), f64::NAN);
    for i in 0..n {
        for j in i + 1..n {
            let x = pair_violation(g[[i, i]], g[[j, j]], g[[i, j]]);
            v[[i, j]] = x;
            v[[j, i]] = x;
        }
    }
    Ok(summarize(gamma.step(), v))
}

/// Squared magnitudes of the post-selected two-mode amplitudes. Phases are
/// not recoverable from coincidence probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairWeights {
    pub aa: f64,
    pub ab: f64,
    pub bb: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDecomposition {
    /// Probability of both photons landing in the selected pair of modes.
    pub pi: f64,
    /// `None` when `pi == 0` and the normalized amplitudes are undefined.
    pub weights: Option<PairWeights>,
    pub v: f64,
}

impl PairDecomposition {
    /// `Π · ((2/3)√(|α_aa|²|α_bb|²) − |α_ab|²)`.
    pub fn reconstruct(&self) -> f64 {
        match self.weights {
            Some(w) => self.pi * pair_violation(w.aa, w.bb, w.ab),
            None => 0.0,
        }
    }
}

pub fn pair_decomposition(gamma: &CoincidenceMatrix, i: Mode, j: Mode) -> Result<PairDecomposition> {
    if i == j {
        return Err(Error::SameMode(i));
    }
    let (gii, gjj, gij) = (gamma.get(i, i)?, gamma.get(j, j)?, gamma.get(i, j)?);
    let pi = gii + gij + gjj;
    if pi == 0.0 {
        return Ok(PairDecomposition {
            pi: 0.0,
            weights: None,
            v: 0.0,
        });
    }
    let weights = PairWeights {
        aa: gii / pi,
        ab: gij / pi,
        bb: gjj / pi,
    };
    Ok(PairDecomposition {
        pi,
        weights: Some(weights),
        v: pi * pair_violation(weights.aa, weights.bb, weights.ab),
    })
}

/// Classical fidelity `(Σ_{i≤j} √(a_ij b_ij))² / (Σ a · Σ b)`.
pub fn similarity(a: &CoincidenceMatrix, b: &CoincidenceMatrix) -> Result<f64> {
    if a.step() != b.step() {
        return Err(Error::StepMismatch(a.step(), b.step()));
    }
    let (ga, gb) = (a.gamma(), b.gamma());
    let n = a.dim();
    let (mut overlap, mut sa, mut sb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i..n {
            let (x, y) = (ga[[i, j]], gb[[i, j]]);
            overlap += (x * y).sqrt();
            sa += x;
            sb += y;
        }
    }
    if sa <= 0.0 || sb <= 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok((overlap * overlap / (sa * sb)).min(1.0))
}
