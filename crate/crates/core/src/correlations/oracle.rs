//! Brute-force two-particle evolution used to cross-check the
//! closed-form coincidence formulas.
//!
//! The full amplitude tensor `ψ[k₁][k₂]` of the symmetrized biphoton state is
//! pushed through `Û⊗Û` one step at a time, with the step operator assembled
//! here from the lattice lookup and coin entries rather than the walk engine.

use ndarray::Array2;
use num_complex::Complex64;

use super::{BiphotonInput, CoincidenceMatrix};
use crate::error::{Error, Result};
use crate::lattice::{enumerate_modes, mode_index, Coin, Mode};
use crate::walk::{coin_matrix, CoinSpec, PhaseMap};

pub const ORACLE_MAX_STEPS: usize = 8;

/// Sparse one-step operator: for each source mode, its (destination, amplitude) pairs.
fn step_operator(step: usize, phase_map: &PhaseMap, spec: &CoinSpec) -> Result<Vec<[(usize, Complex64); 2]>> {
    let coin = coin_matrix(spec);
    let here = enumerate_modes(step);
    let next = enumerate_modes(step + 1);
    here.modes()
        .iter()
        .map(|&src| {
            let sign = if phase_map.is_pi(step, src)? { -1.0 } else { 1.0 };
            let col = match src.coin {
                Coin::L => 0,
                Coin::R => 1,
            };
            let to_l = mode_index(&next, Mode::left(src.position + 1))?;
            let to_r = mode_index(&next, Mode::right(src.position - 1))?;
            Ok([(to_l, coin[0][col] * sign), (to_r, coin[1][col] * sign)])
        })
        .collect()
}

pub fn two_particle_oracle(
    t: usize,
    phase_map: &PhaseMap,
    spec: &CoinSpec,
    input: &BiphotonInput,
) -> Result<CoincidenceMatrix> {
    if t > ORACLE_MAX_STEPS {
        return Err(Error::OracleTooDeep {
            t,
            limit: ORACLE_MAX_STEPS,
        });
    }
    if t > phase_map.t_max() {
        return Err(Error::StepBeyondMap {
            requested: t,
            t_max: phase_map.t_max(),
        });
    }
    let start = enumerate_modes(0);
    let a = mode_index(&start, input.mode_a).map_err(|_| Error::InputNotAtOrigin(input.mode_a))?;
    let b = mode_index(&start, input.mode_b).map_err(|_| Error::InputNotAtOrigin(input.mode_b))?;
    if a == b {
        return Err(Error::DuplicateInput(input.mode_a));
    }

    let amp = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut psi = Array2::<Complex64>::zeros((2, 2));
    psi[[a, b]] += amp;
    psi[[b, a]] += amp;

    for s in 0..t {
        let op = step_operator(s, phase_map, spec)?;
        let n = enumerate_modes(s + 1).len();
        let mut next = Array2::<Complex64>::zeros((n, n));
        for ((k1, k2), &val) in psi.indexed_iter() {
            if val.norm_sqr() == 0.0 {
                continue;
            }
            for &(d1, c1) in &op[k1] {
                for &(d2, c2) in &op[k2] {
                    next[[d1, d2]] += c1 * c2 * val;
                }
            }
        }
        psi = next;
    }

    let n = psi.nrows();
    let mut gamma = Array2::zeros((n, n));
    for i in 0..n {
        gamma[[i, i]] = psi[[i, i]].norm_sqr();
        for j in i + 1..n {
            let g = psi[[i, j]].norm_sqr() + psi[[j, i]].norm_sqr();
            gamma[[i, j]] = g;
            gamma[[j, i]] = g;
        }
    }
    Ok(CoincidenceMatrix::from_raw(t, gamma))
}
