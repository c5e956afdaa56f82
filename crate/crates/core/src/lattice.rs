//! Mode space of the walk and the canonical dense indexing shared by every
//! matrix in the crate.
//!
//! At step `t` the lattice holds positions `-t..=t`, each with both coin
//! values, giving `2(2t+1)` slots ordered by ascending position with `L`
//! before `R`. Sites of the wrong parity stay in the index with zero
//! amplitude so that matrix shapes only depend on the step.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Internal coin state. `L` moves to `x + 1` under the shift, `R` to `x - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Coin {
    L,
    R,
}

impl Coin {
    pub fn offset(self) -> usize {
        match self {
            Coin::L => 0,
            Coin::R => 1,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Coin::L => 'L',
            Coin::R => 'R',
        }
    }
}

/// A walk mode `|x⟩|σ⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mode {
    pub position: i64,
    pub coin: Coin,
}

impl Mode {
    pub const fn new(position: i64, coin: Coin) -> Self {
        Self { position, coin }
    }

    pub const fn left(position: i64) -> Self {
        Self::new(position, Coin::L)
    }

    pub const fn right(position: i64) -> Self {
        Self::new(position, Coin::R)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.position, self.coin.symbol())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidLabel(s.to_string());
        let (pos, coin) = s.trim().rsplit_once('_').ok_or_else(bad)?;
        let coin = match coin {
            "L" => Coin::L,
            "R" => Coin::R,
            _ => return Err(bad()),
        };
        let position = pos.parse::<i64>().map_err(|_| bad())?;
        Ok(Mode::new(position, coin))
    }
}

impl Serialize for Mode {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Mode {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Number of mode slots at a given step.
pub const fn mode_count(step: usize) -> usize {
    2 * (2 * step + 1)
}

/// Dense index of `mode` at `step`, without range checking.
#[inline]
pub(crate) fn raw_index(step: usize, mode: Mode) -> usize {
    2 * (mode.position + step as i64) as usize + mode.coin.offset()
}

/// Mode stored at dense index `index` for `step`.
#[inline]
pub fn mode_at(step: usize, index: usize) -> Mode {
    let position = (index / 2) as i64 - step as i64;
    let coin = if index.is_multiple_of(2) { Coin::L } else { Coin::R };
    Mode::new(position, coin)
}

/// Ordered mode list for one step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeIndexing {
    step: usize,
    modes: Vec<Mode>,
}

impl ModeIndexing {
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<Mode> {
        self.modes.get(index).copied()
    }

    pub fn index_of(&self, mode: Mode) -> Result<usize> {
        mode_index(self, mode)
    }

    pub fn labels(&self) -> Vec<String> {
        self.modes.iter().map(Mode::to_string).collect()
    }

    /// Whether a mode can carry amplitude for a walker started at `x = 0`.
    pub fn is_reachable(&self, mode: Mode) -> bool {
        (mode.position - self.step as i64).rem_euclid(2) == 0
    }
}

pub fn enumerate_modes(step: usize) -> ModeIndexing {
    let modes = (0..mode_count(step)).map(|i| mode_at(step, i)).collect();
    ModeIndexing { step, modes }
}

pub fn mode_index(indexing: &ModeIndexing, mode: Mode) -> Result<usize> {
    if mode.position.unsigned_abs() as usize > indexing.step {
        return Err(Error::PositionOutOfRange {
            position: mode.position,
            step: indexing.step,
        });
    }
    Ok(raw_index(indexing.step, mode))
}
