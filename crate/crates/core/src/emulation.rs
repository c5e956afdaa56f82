//! Emulated coincidence counting.
//!
//! Each unordered mode pair is counted independently as Poisson with mean
//! `total_counts · Γ_ij`. Violations are recomputed from the normalized counts
//! and carry first-order `√N` error bars. A zero-count entry contributes no
//! error under that rule; pairs where this happens are flagged rather than
//! patched.

use std::ops::Range;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlations::{gamma_partial, BiphotonInput, CoincidenceMatrix};
use crate::error::{Error, Result};
use crate::export::{matrix_csv, LabeledMatrix};
use crate::lattice::{enumerate_modes, mode_count, Mode, ModeIndexing};
use crate::violation::{similarity, violation_matrix, ViolationMatrix};
use crate::walk::{build_unitary, CoinSpec, PhaseMap};

/// Experimental parameters of an emulated run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPreset {
    pub coin: CoinSpec,
    pub q: f64,
    pub total_counts: u64,
}

impl ExperimentPreset {
    /// The bulk-optics setup: a 55/45 beam splitter and an 89% HOM
    /// visibility, 10⁴ expected coincidences per matrix.
    pub fn laboratory() -> Self {
        Self::from_visibility(CoinSpec::new(0.55).expect("valid transmissivity"), 0.89, 10_000)
            .expect("valid visibility")
    }

    /// Balanced coin, perfectly indistinguishable photons.
    pub fn ideal(total_counts: u64) -> Self {
        Self {
            coin: CoinSpec::balanced(),
            q: 0.0,
            total_counts,
        }
    }

    /// Maps a HOM dip visibility to the mixture weight `q = 1 − visibility`.
    pub fn from_visibility(coin: CoinSpec, visibility: f64, total_counts: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&visibility) {
            return Err(Error::OutOfUnitInterval {
                name: "visibility",
                value: visibility,
            });
        }
        Ok(Self {
            coin,
            q: 1.0 - visibility,
            total_counts,
        })
    }

    pub fn input(&self) -> Result<BiphotonInput> {
        BiphotonInput::default().with_q(self.q)
    }
}

/// Coincidence counts over unordered mode pairs, upper triangle stored once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountMatrix {
    step: usize,
    dim: usize,
    packed: Vec<u64>,
}

fn packed_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * dim - i * (i + 1) / 2 + j
}

impl CountMatrix {
    /// Builds from a full matrix; only the upper triangle is read.
    pub fn from_matrix(step: usize, counts: &Array2<u64>) -> Result<Self> {
        let dim = mode_count(step);
        if counts.dim() != (dim, dim) {
            return Err(Error::DimensionMismatch {
                step,
                expected: dim,
                actual: counts.nrows(),
            });
        }
        let mut packed = Vec::with_capacity(dim * (dim + 1) / 2);
        for i in 0..dim {
            for j in i..dim {
                packed.push(counts[[i, j]]);
            }
        }
        Ok(Self { step, dim, packed })
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn indexing(&self) -> ModeIndexing {
        enumerate_modes(self.step)
    }

    /// Count at index pair `(i, j)`; symmetric.
    pub fn at(&self, i: usize, j: usize) -> u64 {
        self.packed[packed_index(self.dim, i, j)]
    }

    pub fn get(&self, a: Mode, b: Mode) -> Result<u64> {
        let ix = self.indexing();
        Ok(self.at(ix.index_of(a)?, ix.index_of(b)?))
    }

    pub fn total(&self) -> u64 {
        self.packed.iter().sum()
    }

    pub fn to_array(&self) -> Array2<u64> {
        Array2::from_shape_fn((self.dim, self.dim), |(i, j)| self.at(i, j))
    }

    pub fn to_csv(&self) -> String {
        matrix_csv(&self.indexing(), |i, j| Some(self.at(i, j) as f64))
    }
}

/// Draws Poisson counts with mean `total_counts · Γ_ij` per unordered pair.
pub fn sample_counts(gamma: &CoincidenceMatrix, total_counts: u64, seed: u64) -> Result<CountMatrix> {
    if total_counts == 0 {
        return Err(Error::Empty("total_counts"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gamma.gamma();
    let dim = gamma.dim();
    let scale = total_counts as f64;
    let mut packed = Vec::with_capacity(dim * (dim + 1) / 2);
    for i in 0..dim {
        for j in i..dim {
            let mean = scale * g[[i, j]];
            let n = if mean > 0.0 {
                Poisson::new(mean).expect("finite positive mean").sample(&mut rng) as u64
            } else {
                0
            };
            packed.push(n);
        }
    }
    Ok(CountMatrix {
        step: gamma.step(),
        dim,
        packed,
    })
}

/// Violation matrix of normalized counts with propagated 1σ errors.
#[derive(Clone, Debug, PartialEq)]
pub struct ViolationWithErrors {
    pub observed_total: u64,
    pub empirical: CoincidenceMatrix,
    /// `√N_ij` over the observed total.
    pub gamma_sigma: Array2<f64>,
    pub violation: ViolationMatrix,
    /// Diagonal entries are NaN.
    pub sigma: Array2<f64>,
    /// Pairs `(i, j)` whose error involves a zero-count entry and is
    /// therefore underestimated.
    pub zero_count: Array2<bool>,
}

impl ViolationWithErrors {
    pub fn sigma_at(&self, a: Mode, b: Mode) -> Result<f64> {
        if a == b {
            return Err(Error::SameMode(a));
        }
        let ix = self.violation.indexing();
        Ok(self.sigma[[ix.index_of(a)?, ix.index_of(b)?]])
    }

    pub fn zero_count_pairs(&self) -> usize {
        let n = self.zero_count.nrows();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.zero_count[[i, j]])
            .count()
    }

    pub fn sigma_csv(&self) -> String {
        matrix_csv(&self.violation.indexing(), |i, j| (i != j).then(|| self.sigma[[i, j]]))
    }
}

pub fn violation_from_counts(counts: &CountMatrix) -> Result<ViolationWithErrors> {
    let observed = counts.total();
    if observed == 0 {
        return Err(Error::ZeroCounts);
    }
    let n = counts.dim();
    let total = observed as f64;
    let raw = counts.to_array();
    let gamma = raw.mapv(|c| c as f64 / total);
    let var = raw.mapv(|c| c as f64 / (total * total));
    let empirical = CoincidenceMatrix::from_raw(counts.step(), gamma);
    let violation = violation_matrix(&empirical)?;
    let g = empirical.gamma();

    let mut sigma = Array2::from_elem((n, n), f64::NAN);
    let mut zero_count = Array2::from_elem((n, n), false);
    for i in 0..n {
        for j in i + 1..n {
            let (gii, gjj) = (g[[i, i]], g[[j, j]]);
            let mut s2 = var[[i, j]];
            if gii > 0.0 && gjj > 0.0 {
                s2 += (gjj / gii * var[[i, i]] + gii / gjj * var[[j, j]]) / 9.0;
            }
            let s = s2.sqrt();
            let flagged = raw[[i, i]] == 0 || raw[[j, j]] == 0 || raw[[i, j]] == 0;
            sigma[[i, j]] = s;
            sigma[[j, i]] = s;
            zero_count[[i, j]] = flagged;
            zero_count[[j, i]] = flagged;
        }
    }
    Ok(ViolationWithErrors {
        observed_total: observed,
        empirical,
        gamma_sigma: var.mapv(f64::sqrt),
        violation,
        sigma,
        zero_count,
    })
}

/// Output of one emulated measurement run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRun {
    pub preset: ExperimentPreset,
    pub step: usize,
    pub seed: u64,
    pub gamma_theory: CoincidenceMatrix,
    pub violation_theory: ViolationMatrix,
    pub counts: CountMatrix,
    pub measured: ViolationWithErrors,
    /// Overlap of measured and theoretical coincidence matrices.
    pub similarity: f64,
}

#[derive(Serialize)]
struct ExperimentRunJson<'a> {
    preset: &'a ExperimentPreset,
    step: usize,
    seed: u64,
    similarity: f64,
    observed_total: u64,
    theory_mav: f64,
    theory_mav_pair: (Mode, Mode),
    measured_mav: f64,
    measured_mav_pair: (Mode, Mode),
    measured_mav_sigma: f64,
    zero_count_pairs: usize,
    gamma_theory: LabeledMatrix,
    violation_theory: LabeledMatrix,
    counts: LabeledMatrix,
    gamma_measured: LabeledMatrix,
    violation_measured: LabeledMatrix,
    violation_sigma: LabeledMatrix,
}

impl ExperimentRun {
    pub fn to_json_value(&self) -> serde_json::Value {
        let ix = enumerate_modes(self.step);
        let (a, b) = self.measured.violation.mav_pair;
        let json = ExperimentRunJson {
            preset: &self.preset,
            step: self.step,
            seed: self.seed,
            similarity: self.similarity,
            observed_total: self.measured.observed_total,
            theory_mav: self.violation_theory.mav,
            theory_mav_pair: self.violation_theory.mav_pair,
            measured_mav: self.measured.violation.mav,
            measured_mav_pair: (a, b),
            measured_mav_sigma: self.measured.sigma_at(a, b).unwrap_or(f64::NAN),
            zero_count_pairs: self.measured.zero_count_pairs(),
            gamma_theory: LabeledMatrix::new(&ix, self.gamma_theory.gamma()),
            violation_theory: LabeledMatrix::new(&ix, &self.violation_theory.v),
            counts: LabeledMatrix::new(&ix, &self.counts.to_array().mapv(|c| c as f64)),
            gamma_measured: LabeledMatrix::new(&ix, self.measured.empirical.gamma()),
            violation_measured: LabeledMatrix::new(&ix, &self.measured.violation.v),
            violation_sigma: LabeledMatrix::new(&ix, &self.measured.sigma),
        };
        serde_json::to_value(json).expect("experiment run serializes")
    }
}

pub fn theory(preset: &ExperimentPreset, t: usize, phase_map: &PhaseMap) -> Result<CoincidenceMatrix> {
    let input = preset.input()?;
    let u = build_unitary(t, phase_map, &preset.coin, &[input.mode_a, input.mode_b])?;
    gamma_partial(&u, &input)
}

pub fn reproduce_experiment(
    preset: &ExperimentPreset,
    t: usize,
    phase_map: &PhaseMap,
    seed: u64,
) -> Result<ExperimentRun> {
    let gamma_theory = theory(preset, t, phase_map)?;
    let violation_theory = violation_matrix(&gamma_theory)?;
    let counts = sample_counts(&gamma_theory, preset.total_counts, seed)?;
    let measured = violation_from_counts(&counts)?;
    let similarity = similarity(&measured.empirical, &gamma_theory)?;
    Ok(ExperimentRun {
        preset: *preset,
        step: t,
        seed,
        gamma_theory,
        violation_theory,
        counts,
        measured,
        similarity,
    })
}

/// Repeated emulation of one theoretical matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarlo {
    pub seeds: Range<u64>,
    /// Per-seed similarity to the theory, in seed order.
    pub similarity: Vec<f64>,
    /// Sample mean and standard deviation of each `V_ij` across seeds.
    pub v_mean: Array2<f64>,
    pub v_std: Array2<f64>,
    /// Mean propagated σ of each `V_ij`.
    pub sigma_mean: Array2<f64>,
}

impl MonteCarlo {
    pub fn fraction_with_similarity_at_least(&self, threshold: f64) -> f64 {
        let hits = self.similarity.iter().filter(|&&s| s >= threshold).count();
        hits as f64 / self.similarity.len() as f64
    }
}

pub fn monte_carlo(gamma: &CoincidenceMatrix, total_counts: u64, seeds: Range<u64>) -> Result<MonteCarlo> {
    if seeds.is_empty() {
        return Err(Error::Empty("seeds"));
    }
    let runs = seeds
        .clone()
        .into_par_iter()
        .map(|seed| -> Result<(f64, ViolationWithErrors)> {
            let measured = violation_from_counts(&sample_counts(gamma, total_counts, seed)?)?;
            Ok((similarity(&measured.empirical, gamma)?, measured))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = gamma.dim();
    let k = runs.len() as f64;
    let mut v_mean = Array2::zeros((n, n));
    let mut sigma_mean = Array2::zeros((n, n));
    for (_, m) in &runs {
        v_mean += &m.violation.v;
        sigma_mean += &m.sigma;
    }
    v_mean /= k;
    sigma_mean /= k;
    let mut v_std = Array2::zeros((n, n));
    for (_, m) in &runs {
        v_std += &(&m.violation.v - &v_mean).mapv(|d| d * d);
    }
    let v_std = if runs.len() > 1 {
        (v_std / (k - 1.0)).mapv(f64::sqrt)
    } else {
        v_std
    };
    Ok(MonteCarlo {
        seeds,
        similarity: runs.iter().map(|(s, _)| *s).collect(),
        v_mean,
        v_std,
        sigma_mean,
    })
}
