//! Search for phase maps that enhance two-mode nonclassical correlations.
//!
//! Candidates are scored by their violation matrix. The search tracks the
//! best MAV, the best Total Violation and, per mode pair, the best `V_ij`
//! seen over all candidates. Candidate `0` of a random search is always the
//! ordered (all-zero) map; candidate `k ≥ 1` is drawn uniformly from stream
//! `k` of the base seed, so any winner can be rebuilt from `(seed, index)`.
//!
//! Partial results from parallel workers are merged by maximum with ties
//! going to the lower candidate index, which makes the outcome independent
//! of scheduling.

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::correlations::{gamma_partial, BiphotonInput};
use crate::disorder::{enumerate_phase_maps, realization_rng, sample_with, PhaseMapEnumeration};
use crate::error::{Error, Result};
use crate::export::{matrix_csv, LabeledMatrix};
use crate::lattice::{enumerate_modes, mode_count, Mode};
use crate::numeric::sig12;
use crate::violation::{violation_matrix, ViolationMatrix};
use crate::walk::{build_unitary, CoinSpec, PhaseMap};

/// Candidates evaluated sequentially per parallel task.
const CHUNK: u64 = 512;

/// Called after each finished chunk with `(candidates done, best MAV so far)`.
pub type Progress<'a> = &'a (dyn Fn(u64, f64) + Sync);

/// Scores one phase map.
pub fn evaluate(t: usize, map: &PhaseMap, spec: &CoinSpec, input: &BiphotonInput) -> Result<ViolationMatrix> {
    let u = build_unitary(t, map, spec, &[input.mode_a, input.mode_b])?;
    violation_matrix(&gamma_partial(&u, input)?)
}

/// Best `V_ij` per mode pair over a set of maps. Diagonal entries are NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct Landscape {
    pub step: usize,
    pub best: Array2<f64>,
}

impl Landscape {
    pub fn to_csv(&self) -> String {
        matrix_csv(&enumerate_modes(self.step), |i, j| (i != j).then(|| self.best[[i, j]]))
    }

    pub fn max(&self) -> f64 {
        self.best
            .iter()
            .copied()
            .filter(|x| !x.is_nan())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchResult {
    pub step: usize,
    pub maps_evaluated: u64,
    pub best_mav: f64,
    pub best_mav_index: u64,
    pub best_mav_map: PhaseMap,
    pub best_mav_pair: (Mode, Mode),
    pub best_total: f64,
    pub best_total_index: u64,
    pub best_total_map: PhaseMap,
    pub per_pair_best: Landscape,
}

#[derive(Serialize)]
struct SearchResultJson<'a> {
    step: usize,
    maps_evaluated: u64,
    best_mav: f64,
    best_mav_index: u64,
    best_mav_pair: (Mode, Mode),
    best_mav_map: &'a PhaseMap,
    best_total: f64,
    best_total_index: u64,
    best_total_map: &'a PhaseMap,
    per_pair_best: LabeledMatrix,
}

impl SearchResult {
    pub fn to_json_value(&self) -> serde_json::Value {
        let json = SearchResultJson {
            step: self.step,
            maps_evaluated: self.maps_evaluated,
            best_mav: self.best_mav,
            best_mav_index: self.best_mav_index,
            best_mav_pair: self.best_mav_pair,
            best_mav_map: &self.best_mav_map,
            best_total: self.best_total,
            best_total_index: self.best_total_index,
            best_total_map: &self.best_total_map,
            per_pair_best: LabeledMatrix::new(&enumerate_modes(self.step), &self.per_pair_best.best),
        };
        serde_json::to_value(json).expect("search result serializes")
    }
}

#[derive(Clone, Debug)]
struct Partial {
    count: u64,
    mav: (f64, u64, (Mode, Mode)),
    total: (f64, u64),
    per_pair: Array2<f64>,
}

fn better(a: (f64, u64), b: (f64, u64)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

impl Partial {
    fn empty(step: usize) -> Self {
        let n = mode_count(step);
        Self {
            count: 0,
            mav: (f64::NEG_INFINITY, u64::MAX, (Mode::left(0), Mode::right(0))),
            total: (f64::NEG_INFINITY, u64::MAX),
            per_pair: Array2::from_elem((n, n), f64::NEG_INFINITY),
        }
    }

    fn record(&mut self, index: u64, v: &ViolationMatrix) {
        self.count += 1;
        if better((v.mav, index), (self.mav.0, self.mav.1)) {
            self.mav = (v.mav, index, v.mav_pair);
        }
        if better((v.total_violation, index), self.total) {
            self.total = (v.total_violation, index);
        }
        for (best, &x) in self.per_pair.iter_mut().zip(v.v.iter()) {
            if x > *best {
                *best = x;
            }
        }
    }

    fn merge(mut self, other: Partial) -> Partial {
        self.count += other.count;
        if better((other.mav.0, other.mav.1), (self.mav.0, self.mav.1)) {
            self.mav = other.mav;
        }
        if better(other.total, self.total) {
            self.total = other.total;
        }
        for (best, &x) in self.per_pair.iter_mut().zip(other.per_pair.iter()) {
            if x > *best {
                *best = x;
            }
        }
        self
    }
}

fn scan<F>(
    t: usize,
    count: u64,
    candidate: &F,
    spec: &CoinSpec,
    input: &BiphotonInput,
    progress: Option<Progress>,
) -> Result<SearchResult>
where
    F: Fn(u64) -> PhaseMap + Sync,
{
    if count == 0 {
        return Err(Error::Empty("n_maps"));
    }
    let done = AtomicU64::new(0);
    let chunks = count.div_ceil(CHUNK);
    let partial = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<Partial> {
            let mut part = Partial::empty(t);
            for k in c * CHUNK..((c + 1) * CHUNK).min(count) {
                part.record(k, &evaluate(t, &candidate(k), spec, input)?);
            }
            if let Some(report) = progress {
                let n = done.fetch_add(part.count, Ordering::Relaxed) + part.count;
                report(n, part.mav.0);
            }
            Ok(part)
        })
        .try_reduce(|| Partial::empty(t), |a, b| Ok(a.merge(b)))?;

    let mut per_pair = partial.per_pair;
    for i in 0..per_pair.nrows() {
        per_pair[[i, i]] = f64::NAN;
    }
    Ok(SearchResult {
        step: t,
        maps_evaluated: partial.count,
        best_mav: partial.mav.0,
        best_mav_index: partial.mav.1,
        best_mav_map: candidate(partial.mav.1),
        best_mav_pair: partial.mav.2,
        best_total: partial.total.0,
        best_total_index: partial.total.1,
        best_total_map: candidate(partial.total.1),
        per_pair_best: Landscape {
            step: t,
            best: per_pair,
        },
    })
}

/// Candidate `index` of a random search of depth `t`.
pub fn random_candidate(t: usize, base_seed: u64, index: u64) -> PhaseMap {
    if index == 0 {
        PhaseMap::zeros(t)
    } else {
        sample_with(&mut realization_rng(base_seed, index), 0.5, t)
    }
}

pub fn random_search(
    t: usize,
    n_maps: u64,
    base_seed: u64,
    spec: &CoinSpec,
    input: &BiphotonInput,
) -> Result<SearchResult> {
    random_search_with_progress(t, n_maps, base_seed, spec, input, None)
}

pub fn random_search_with_progress(
    t: usize,
    n_maps: u64,
    base_seed: u64,
    spec: &CoinSpec,
    input: &BiphotonInput,
    progress: Option<Progress>,
) -> Result<SearchResult> {
    scan(t, n_maps, &|k| random_candidate(t, base_seed, k), spec, input, progress)
}

/// Evaluates every gauge class of depth-`t` maps.
pub fn exhaustive_search(t: usize, spec: &CoinSpec, input: &BiphotonInput) -> Result<SearchResult> {
    exhaustive_search_with(t, true, spec, input, None)
}

pub fn exhaustive_search_with(
    t: usize,
    gauge_fixed: bool,
    spec: &CoinSpec,
    input: &BiphotonInput,
    progress: Option<Progress>,
) -> Result<SearchResult> {
    let maps: PhaseMapEnumeration = enumerate_phase_maps(t, gauge_fixed)?;
    scan(t, maps.len(), &|k| maps.map_at(k), spec, input, progress)
}

pub fn violation_landscape(
    t: usize,
    n_maps: u64,
    base_seed: u64,
    spec: &CoinSpec,
    input: &BiphotonInput,
) -> Result<Landscape> {
    Ok(random_search(t, n_maps, base_seed, spec, input)?.per_pair_best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Mav,
    TotalViolation,
}

impl Objective {
    fn score(self, v: &ViolationMatrix) -> f64 {
        match self {
            Objective::Mav => v.mav,
            Objective::TotalViolation => v.total_violation,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Refinement {
    pub map: PhaseMap,
    pub score: f64,
    pub evaluations: u64,
}

/// Steepest-ascent single-site flips until no flip improves the objective.
/// Ties go to the lowest site index.
pub fn hill_climb(
    t: usize,
    start: &PhaseMap,
    objective: Objective,
    spec: &CoinSpec,
    input: &BiphotonInput,
) -> Result<Refinement> {
    let mut map = start.with_depth(t);
    let mut score = objective.score(&evaluate(t, &map, spec, input)?);
    let mut evaluations = 1;
    loop {
        let sites = map.bits().len();
        let scores: Vec<f64> = (0..sites)
            .into_par_iter()
            .map(|k| {
                let mut cand = map.clone();
                cand.bits_mut()[k] ^= true;
                evaluate(t, &cand, spec, input).map(|v| objective.score(&v))
            })
            .collect::<Result<_>>()?;
        evaluations += sites as u64;
        let step =
            scores
                .iter()
                .enumerate()
                .filter(|(_, &s)| s > score)
                .fold(None, |acc: Option<(usize, f64)>, (k, &s)| match acc {
                    Some((_, b)) if b >= s => acc,
                    _ => Some((k, s)),
                });
        match step {
            Some((k, s)) => {
                map.bits_mut()[k] ^= true;
                score = s;
            }
            None => break,
        }
    }
    Ok(Refinement {
        map,
        score,
        evaluations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendRecord {
    pub step: usize,
    pub ordered_mav: f64,
    pub ordered_total: f64,
    pub best_mav: f64,
    pub best_total: f64,
    pub best_mav_pair: (Mode, Mode),
}

/// Ordered-walk values next to random-search bests, one record per step.
pub fn mav_trend(
    t_range: &[usize],
    n_maps: u64,
    base_seed: u64,
    spec: &CoinSpec,
    input: &BiphotonInput,
) -> Result<Vec<TrendRecord>> {
    t_range
        .iter()
        .map(|&t| {
            let ordered = evaluate(t, &PhaseMap::zeros(t), spec, input)?;
            let found = random_search(t, n_maps, base_seed, spec, input)?;
            Ok(TrendRecord {
                step: t,
                ordered_mav: ordered.mav,
                ordered_total: ordered.total_violation,
                best_mav: found.best_mav,
                best_total: found.best_total,
                best_mav_pair: found.best_mav_pair,
            })
        })
        .collect()
}

pub const TREND_CSV_HEADER: &str = "step,ordered_mav,ordered_total,best_mav,best_total,best_mav_pair_a,best_mav_pair_b";

pub fn trend_csv(records: &[TrendRecord]) -> String {
    let mut out = String::from(TREND_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.step,
            sig12(r.ordered_mav),
            sig12(r.ordered_total),
            sig12(r.best_mav),
            sig12(r.best_total),
            r.best_mav_pair.0,
            r.best_mav_pair.1
        ));
    }
    out
}
