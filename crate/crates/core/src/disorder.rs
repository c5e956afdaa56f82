//! p-diluted phase disorder.
//!
//! Every phase site independently takes `π` with probability `p/2`. Random
//! streams are counter-based: realization `k` of a run seeded with `s` comes
//! from ChaCha8 seeded with `s` on stream `k`, so any single realization can
//! be regenerated in isolation.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlations::{gamma_partial, BiphotonInput, CoincidenceMatrix};
use crate::error::{Error, Result};
use crate::lattice::mode_count;
use crate::numeric::{sig12, CompensatedSum};
use crate::violation::{violation_matrix, ViolationMatrix};
use crate::walk::{build_unitary, step_offset, CoinSpec, PhaseMap};

/// Largest site count `enumerate_phase_maps` accepts.
pub const MAX_ENUMERATION_SITES: usize = 24;

/// Realizations folded sequentially before partial sums are merged. Fixed so
/// the reduction order does not depend on the worker count.
const CHUNK: u64 = 64;

/// The random stream for one realization or candidate of a seeded run.
pub fn realization_rng(base_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderModel {
    p: f64,
    pub seed: u64,
}

impl DisorderModel {
    pub fn new(p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfUnitInterval { name: "p", value: p });
        }
        Ok(Self { p, seed })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Probability of a single site carrying `π`.
    pub fn flip_probability(&self) -> f64 {
        self.p / 2.0
    }

    /// Realization `index` of this model.
    pub fn realization(&self, t_max: usize, index: u64) -> PhaseMap {
        sample_with(&mut realization_rng(self.seed, index), self.flip_probability(), t_max)
    }
}

pub(crate) fn sample_with(rng: &mut impl Rng, flip: f64, t_max: usize) -> PhaseMap {
    let bits = (0..PhaseMap::site_count(t_max))
        .map(|_| rng.random_bool(flip))
        .collect();
    PhaseMap::from_bits(t_max, bits).expect("site count matches depth")
}

/// Realization 0 of `model`.
pub fn sample_phase_map(model: &DisorderModel, t_max: usize) -> PhaseMap {
    model.realization(t_max, 0)
}

/// Every phase map of a given depth, in a canonical order.
///
/// Bit `k` of the map index sets the `k`-th free site, counting step-major.
/// With `gauge_fixed`, the first site of each step is pinned to 0: flipping a
/// whole step only changes the state by a global sign, so this keeps one
/// representative per equivalence class.
#[derive(Clone, Debug)]
pub struct PhaseMapEnumeration {
    t_max: usize,
    free_sites: Vec<usize>,
}

pub fn enumerate_phase_maps(t_max: usize, gauge_fixed: bool) -> Result<PhaseMapEnumeration> {
    let sites = PhaseMap::site_count(t_max);
    if sites > MAX_ENUMERATION_SITES {
        return Err(Error::TooManySites {
            sites,
            limit: MAX_ENUMERATION_SITES,
        });
    }
    let free_sites = (0..sites)
        .filter(|&k| !(gauge_fixed && (0..t_max).any(|s| step_offset(s) == k)))
        .collect();
    Ok(PhaseMapEnumeration { t_max, free_sites })
}

impl PhaseMapEnumeration {
    pub fn t_max(&self) -> usize {
        self.t_max
    }

    pub fn len(&self) -> u64 {
        1u64 << self.free_sites.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn map_at(&self, index: u64) -> PhaseMap {
        let mut map = PhaseMap::zeros(self.t_max);
        let bits = map.bits_mut();
        for (k, &site) in self.free_sites.iter().enumerate() {
            bits[site] = (index >> k) & 1 == 1;
        }
        map
    }

    pub fn iter(&self) -> impl Iterator<Item = PhaseMap> + '_ {
        (0..self.len()).map(|i| self.map_at(i))
    }
}

#[derive(Clone, Debug)]
pub struct DisorderAverage {
    pub p: f64,
    pub step: usize,
    pub realizations: u64,
    /// Elementwise mean of the per-realization coincidence matrices.
    pub mean_gamma: CoincidenceMatrix,
    /// Violation matrix of `mean_gamma`.
    pub mean_violation: ViolationMatrix,
    /// Total Violation of `mean_violation`.
    pub mean_total_violation: f64,
    /// Delete-one-chunk jackknife error of `mean_total_violation`.
    pub std_error: f64,
    /// Mean over realizations of each realization's own Total Violation.
    pub realization_total_violation: f64,
    pub realization_std_error: f64,
}

#[derive(Clone)]
struct Accumulator {
    count: u64,
    gamma: Vec<CompensatedSum>,
    tv: CompensatedSum,
    tv_sq: CompensatedSum,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Self {
            count: 0,
            gamma: vec![CompensatedSum::default(); n * n],
            tv: CompensatedSum::default(),
            tv_sq: CompensatedSum::default(),
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        self.count += other.count;
        for (a, b) in self.gamma.iter_mut().zip(&other.gamma) {
            a.merge(b);
        }
        self.tv.merge(&other.tv);
        self.tv_sq.merge(&other.tv_sq);
    }

    fn mean_gamma(&self, step: usize, dim: usize) -> CoincidenceMatrix {
        let count = self.count as f64;
        let mean = Array2::from_shape_vec((dim, dim), self.gamma.iter().map(|s| s.value() / count).collect())
            .expect("accumulator has dim² entries");
        CoincidenceMatrix::from_raw(step, mean)
    }

    /// Mean Γ with the realizations of `part` left out.
    fn mean_gamma_without(&self, part: &Accumulator, step: usize, dim: usize) -> CoincidenceMatrix {
        let count = (self.count - part.count) as f64;
        let mean = Array2::from_shape_vec(
            (dim, dim),
            self.gamma
                .iter()
                .zip(&part.gamma)
                .map(|(s, x)| (s.value() - x.value()) / count)
                .collect(),
        )
        .expect("accumulator has dim² entries");
        CoincidenceMatrix::from_raw(step, mean)
    }
}

pub fn average_over_disorder(
    p: f64,
    t: usize,
    n: u64,
    base_seed: u64,
    spec: &CoinSpec,
    input: &BiphotonInput,
) -> Result<DisorderAverage> {
    if n == 0 {
        return Err(Error::Empty("realizations"));
    }
    let model = DisorderModel::new(p, base_seed)?;
    let dim = mode_count(t);
    let inputs = [input.mode_a, input.mode_b];
    let chunks = n.div_ceil(CHUNK);

    let partials: Vec<Accumulator> = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<Accumulator> {
            let mut acc = Accumulator::new(dim);
            for k in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let map = model.realization(t, k);
                let u = build_unitary(t, &map, spec, &inputs)?;
                let g = gamma_partial(&u, input)?;
                for (a, &x) in acc.gamma.iter_mut().zip(g.gamma().iter()) {
                    a.add(x);
                }
                let tv = violation_matrix(&g)?.total_violation;
                acc.count += 1;
                acc.tv.add(tv);
                acc.tv_sq.add(tv * tv);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let mut total = Accumulator::new(dim);
    for part in &partials {
        total.merge(part);
    }

    let mean_gamma = total.mean_gamma(t, dim);
    let mean_violation = violation_matrix(&mean_gamma)?;
    let mean_total_violation = mean_violation.total_violation;

    // jackknife over the fixed chunks keeps the error deterministic
    let std_error = if partials.len() > 1 {
        let loo: Vec<f64> = partials
            .par_iter()
            .map(|part| violation_matrix(&total.mean_gamma_without(part, t, dim)).map(|v| v.total_violation))
            .collect::<Result<_>>()?;
        let b = loo.len() as f64;
        let centre = loo.iter().sum::<f64>() / b;
        let spread: f64 = loo.iter().map(|x| (x - centre).powi(2)).sum();
        ((b - 1.0) / b * spread).sqrt()
    } else {
        0.0
    };

    let count = n as f64;
    let realization_total_violation = total.tv.value() / count;
    let realization_std_error = if n > 1 {
        let m = realization_total_violation;
        let var = ((total.tv_sq.value() - count * m * m) / (count - 1.0)).max(0.0);
        (var / count).sqrt()
    } else {
        0.0
    };
    Ok(DisorderAverage {
        p,
        step: t,
        realizations: n,
        mean_gamma,
        mean_violation,
        mean_total_violation,
        std_error,
        realization_total_violation,
        realization_std_error,
    })
}

/// One row of a disorder sweep. The headline value is the Total Violation of
/// the disorder-averaged Γ; normalized columns are relative to the ordered
/// walk at the same step. The `realization_*` columns hold the mean of each
/// realization's own Total Violation for comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: f64,
    pub mean_total_violation: f64,
    pub std_error: f64,
    pub n: u64,
    pub step: usize,
    pub normalized_total_violation: f64,
    pub normalized_std_error: f64,
    pub realization_total_violation: f64,
    pub realization_std_error: f64,
}

pub fn sweep_p(
    ps: &[f64],
    steps: &[usize],
    n: u64,
    base_seed: u64,
    spec: &CoinSpec,
    input: &BiphotonInput,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(ps.len() * steps.len());
    for &t in steps {
        let ordered = average_over_disorder(0.0, t, n, base_seed, spec, input)?.mean_total_violation;
        for &p in ps {
            let avg = average_over_disorder(p, t, n, base_seed, spec, input)?;
            let scale = if ordered > 0.0 { 1.0 / ordered } else { f64::NAN };
            rows.push(SweepRow {
                p,
                mean_total_violation: avg.mean_total_violation,
                std_error: avg.std_error,
                n,
                step: t,
                normalized_total_violation: avg.mean_total_violation * scale,
                normalized_std_error: avg.std_error * scale,
                realization_total_violation: avg.realization_total_violation,
                realization_std_error: avg.realization_std_error,
            });
        }
    }
    Ok(rows)
}

pub const SWEEP_CSV_HEADER: &str = "p,mean_total_violation,std_error,n,step,normalized_total_violation,\
normalized_std_error,realization_total_violation,realization_std_error";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.p,
            sig12(r.mean_total_violation),
            sig12(r.std_error),
            r.n,
            r.step,
            sig12(r.normalized_total_violation),
            sig12(r.normalized_std_error),
            sig12(r.realization_total_violation),
            sig12(r.realization_std_error)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlations::gamma_indistinguishable;
    use crate::walk::origin_inputs;
    use approx::assert_abs_diff_eq;
    use std::collections::HashSet;

    #[test]
    fn p_zero_is_ordered() {
        let model = DisorderModel::new(0.0, 99).unwrap();
        assert_eq!(sample_phase_map(&model, 10), PhaseMap::zeros(10));
    }

    #[test]
    fn full_disorder_flips_half_the_sites() {
        let model = DisorderModel::new(1.0, 5).unwrap();
        let samples = 10_000u64;
        let sites = PhaseMap::site_count(15) as f64;
        let flipped: usize = (0..samples).map(|k| model.realization(15, k).pi_count()).sum();
        let trials = samples as f64 * sites;
        let frac = flipped as f64 / trials;
        let sigma = (0.25 / trials).sqrt();
        assert!((frac - 0.5).abs() < 3.0 * sigma, "fraction {frac}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = DisorderModel::new(0.5, 1234).unwrap();
        assert_eq!(sample_phase_map(&a, 8), sample_phase_map(&a, 8));
        assert_eq!(a.realization(8, 17), a.realization(8, 17));
        let maps: HashSet<PhaseMap> = (0..10)
            .map(|s| sample_phase_map(&DisorderModel::new(0.5, s).unwrap(), 8))
            .collect();
        assert_eq!(maps.len(), 10);
    }

    #[test]
    fn invalid_p() {
        assert!(DisorderModel::new(1.5, 0).is_err());
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_phase_maps(1, false).unwrap().len(), 4);
        assert_eq!(enumerate_phase_maps(2, false).unwrap().len(), 256);
        assert_eq!(enumerate_phase_maps(1, true).unwrap().len(), 2);
        assert_eq!(enumerate_phase_maps(3, false).unwrap().len(), 1 << 18);
        assert_eq!(enumerate_phase_maps(3, true).unwrap().len(), 1 << 15);
        match enumerate_phase_maps(4, false) {
            Err(Error::TooManySites { sites: 32, limit: 24 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn enumeration_is_exhaustive_and_distinct() {
        let maps: HashSet<PhaseMap> = enumerate_phase_maps(2, false).unwrap().iter().collect();
        assert_eq!(maps.len(), 256);
        let e = enumerate_phase_maps(2, false).unwrap();
        assert_eq!(e.map_at(0), PhaseMap::zeros(2));
    }

    #[test]
    fn gauge_classes_cover_every_map() {
        // every map is a representative or a step-flip of one
        let reps: HashSet<PhaseMap> = enumerate_phase_maps(2, true).unwrap().iter().collect();
        for map in enumerate_phase_maps(2, false).unwrap().iter() {
            let mut canon = map.clone();
            for s in 0..2 {
                if canon.bits()[step_offset(s)] {
                    canon.flip_step(s);
                }
            }
            assert!(reps.contains(&canon));
        }
    }

    #[test]
    fn ordered_average_equals_ordered_walk() {
        let spec = CoinSpec::balanced();
        let input = BiphotonInput::default();
        let avg = average_over_disorder(0.0, 5, 7, 1, &spec, &input).unwrap();
        let u = build_unitary(5, &PhaseMap::zeros(5), &spec, &origin_inputs()).unwrap();
        let g = gamma_indistinguishable(&u, &input).unwrap();
        for (a, b) in avg.mean_gamma.gamma().iter().zip(g.gamma()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
        let tv = violation_matrix(&g).unwrap().total_violation;
        assert_abs_diff_eq!(avg.mean_total_violation, tv, epsilon = 1e-15);
        assert_abs_diff_eq!(avg.std_error, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(avg.realization_total_violation, tv, epsilon = 1e-15);
    }

    #[test]
    fn jackknife_error_tracks_seed_scatter() {
        let (spec, input) = (CoinSpec::balanced(), BiphotonInput::default());
        let runs: Vec<DisorderAverage> = (0..40)
            .map(|seed| average_over_disorder(0.5, 6, 640, seed, &spec, &input).unwrap())
            .collect();
        let k = runs.len() as f64;
        let mean = runs.iter().map(|r| r.mean_total_violation).sum::<f64>() / k;
        let scatter = (runs
            .iter()
            .map(|r| (r.mean_total_violation - mean).powi(2))
            .sum::<f64>()
            / (k - 1.0))
            .sqrt();
        let jack = runs.iter().map(|r| r.std_error).sum::<f64>() / k;
        let ratio = jack / scatter;
        assert!((0.6..1.6).contains(&ratio), "jackknife {jack} vs scatter {scatter}");
    }

    #[test]
    fn averaged_gamma_is_a_valid_coincidence_matrix() {
        let avg = average_over_disorder(0.7, 6, 300, 3, &CoinSpec::balanced(), &BiphotonInput::default()).unwrap();
        let g = avg.mean_gamma.gamma();
        assert_abs_diff_eq!(avg.mean_gamma.total(), 1.0, epsilon = 1e-9);
        for i in 0..avg.mean_gamma.dim() {
            for j in 0..i {
                assert_abs_diff_eq!(g[[i, j]], g[[j, i]], epsilon = 1e-12);
            }
        }
        assert_eq!(avg.mean_violation.step, 6);
    }

    #[test]
    fn average_is_independent_of_worker_count() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    average_over_disorder(1.0, 7, 500, 11, &CoinSpec::balanced(), &BiphotonInput::default()).unwrap()
                })
        };
        let (a, b) = (run(1), run(4));
        assert_eq!(a.mean_gamma, b.mean_gamma);
        assert_eq!(a.mean_total_violation.to_bits(), b.mean_total_violation.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn sweep_normalizes_to_the_ordered_walk() {
        let rows = sweep_p(
            &[0.0, 1.0],
            &[4],
            50,
            2,
            &CoinSpec::balanced(),
            &BiphotonInput::default(),
        )
        .unwrap();
        assert_eq!(rows[0].normalized_total_violation, 1.0);
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with(SWEEP_CSV_HEADER));
        assert_eq!(csv.lines().count(), 3);
    }
}
