//! Single-particle evolution of the phase-disordered walk.
//!
//! One step acts on the state living on the step-`s` lattice as
//!
//! 1. a diagonal phase `e^{iφ_k(s)}` with `φ ∈ {0, π}` per mode,
//! 2. the coin on every position's `(L, R)` pair,
//! 3. the shift `|x+1⟩⟨x|⊗|L⟩⟨L| + |x−1⟩⟨x|⊗|R⟩⟨R|`,
//!
//! and leaves a state on the step-`s+1` lattice.

use std::fmt;

use ndarray::Array2;
use num_complex::Complex64;
use serde::de::{self, DeserializeSeed, MapAccess, SeqAccess, Visitor};
use serde::ser::SerializeStruct;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice::{self, mode_at, mode_count, raw_index, Coin, Mode};

/// Beam-splitter coin given by its intensity splitting ratios.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoinSpec {
    transmissivity: f64,
}

impl CoinSpec {
    pub fn new(transmissivity: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&transmissivity) {
            return Err(Error::OutOfUnitInterval {
                name: "transmissivity",
                value: transmissivity,
            });
        }
        Ok(Self { transmissivity })
    }

    pub fn balanced() -> Self {
        Self { transmissivity: 0.5 }
    }

    pub fn transmissivity(&self) -> f64 {
        self.transmissivity
    }

    pub fn reflectivity(&self) -> f64 {
        1.0 - self.transmissivity
    }
}

impl Default for CoinSpec {
    fn default() -> Self {
        Self::balanced()
    }
}

impl<'de> Deserialize<'de> for CoinSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            transmissivity: f64,
        }
        let raw = Raw::deserialize(d)?;
        CoinSpec::new(raw.transmissivity).map_err(de::Error::custom)
    }
}

/// 2×2 coin in the `(L, R)` basis, indexed `[row][column]`.
pub type CoinMatrix = [[Complex64; 2]; 2];

/// `[[√T, i√R], [i√R, √T]]`; amplitudes are square roots of the intensity ratios.
pub fn coin_matrix(spec: &CoinSpec) -> CoinMatrix {
    let t = Complex64::new(spec.transmissivity().sqrt(), 0.0);
    let r = Complex64::new(0.0, spec.reflectivity().sqrt());
    [[t, r], [r, t]]
}

/// Binary phase assignment per `(step, mode)` for steps `0..t_max`.
///
/// Sites are stored flat, step-major: step `s` occupies `2s²..2(s+1)²`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PhaseMap {
    t_max: usize,
    bits: Vec<bool>,
}

/// Offset of step `s` in the flat site layout.
pub(crate) const fn step_offset(step: usize) -> usize {
    2 * step * step
}

impl PhaseMap {
    pub fn zeros(t_max: usize) -> Self {
        Self {
            t_max,
            bits: vec![false; Self::site_count(t_max)],
        }
    }

    /// Total number of phase sites for a map of depth `t_max`.
    pub const fn site_count(t_max: usize) -> usize {
        step_offset(t_max)
    }

    /// Builds a map from its flat site bits.
    pub fn from_bits(t_max: usize, bits: Vec<bool>) -> Result<Self> {
        let expected = Self::site_count(t_max);
        if bits.len() != expected {
            return Err(Error::DimensionMismatch {
                step: t_max,
                expected,
                actual: bits.len(),
            });
        }
        Ok(Self { t_max, bits })
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub(crate) fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub(crate) fn step_bits(&self, step: usize) -> &[bool] {
        &self.bits[step_offset(step)..step_offset(step + 1)]
    }

    fn check(&self, step: usize, mode: Mode) -> Result<usize> {
        if step >= self.t_max {
            return Err(Error::StepBeyondMap {
                requested: step,
                t_max: self.t_max,
            });
        }
        if mode.position.unsigned_abs() as usize > step {
            return Err(Error::PositionOutOfRange {
                position: mode.position,
                step,
            });
        }
        Ok(step_offset(step) + raw_index(step, mode))
    }

    pub fn is_pi(&self, step: usize, mode: Mode) -> Result<bool> {
        Ok(self.bits[self.check(step, mode)?])
    }

    pub fn set(&mut self, step: usize, mode: Mode, pi: bool) -> Result<()> {
        let i = self.check(step, mode)?;
        self.bits[i] = pi;
        Ok(())
    }

    /// Adds π to every site of one step.
    pub fn flip_step(&mut self, step: usize) {
        let range = step_offset(step)..step_offset(step + 1);
        for b in &mut self.bits[range] {
            *b = !*b;
        }
    }

    pub fn pi_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// `(step, mode)` of every π site in storage order.
    pub fn pi_sites(&self) -> Vec<(usize, Mode)> {
        (0..self.t_max)
            .flat_map(|s| {
                self.step_bits(s)
                    .iter()
                    .enumerate()
                    .filter(|(_, &b)| b)
                    .map(move |(i, _)| (s, mode_at(s, i)))
            })
            .collect()
    }

    /// Copy of this map truncated or zero-extended to `t_max` steps.
    pub fn with_depth(&self, t_max: usize) -> Self {
        let mut out = Self::zeros(t_max);
        let n = Self::site_count(t_max.min(self.t_max));
        out.bits[..n].copy_from_slice(&self.bits[..n]);
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("phase map serialization is infallible")
    }

    /// Parses the wire format; error messages carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// One `[step, x, "L"|"R"]` entry of the wire format.
struct PiSite {
    step: usize,
    mode: Mode,
}

/// Reads one entry, validating it while the parser still points at it so
/// errors carry the entry's own line.
struct SiteSeed {
    t_max: Option<usize>,
}

impl<'de> DeserializeSeed<'de> for SiteSeed {
    type Value = PiSite;

    fn deserialize<D: Deserializer<'de>>(self, d: D) -> std::result::Result<PiSite, D::Error> {
        d.deserialize_seq(self)
    }
}

impl<'de> Visitor<'de> for SiteSeed {
    type Value = PiSite;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a [step, x, \"L\"|\"R\"] entry")
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<PiSite, A::Error> {
        let step: usize = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
        let position: i64 = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
        let coin: Coin = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(2, &self))?;
        if seq.next_element::<de::IgnoredAny>()?.is_some() {
            return Err(de::Error::invalid_length(4, &self));
        }
        if position.unsigned_abs() as usize > step {
            return Err(de::Error::custom(format_args!(
                "position {position} is outside the step-{step} lattice"
            )));
        }
        if let Some(t_max) = self.t_max {
            if step >= t_max {
                return Err(de::Error::custom(format_args!(
                    "step {step} is not below t_max {t_max}"
                )));
            }
        }
        Ok(PiSite {
            step,
            mode: Mode::new(position, coin),
        })
    }
}

struct SitesSeed {
    t_max: Option<usize>,
}

impl<'de> DeserializeSeed<'de> for SitesSeed {
    type Value = Vec<PiSite>;

    fn deserialize<D: Deserializer<'de>>(self, d: D) -> std::result::Result<Self::Value, D::Error> {
        d.deserialize_seq(self)
    }
}

impl<'de> Visitor<'de> for SitesSeed {
    type Value = Vec<PiSite>;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a list of [step, x, \"L\"|\"R\"] entries")
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Self::Value, A::Error> {
        let mut out = Vec::new();
        while let Some(site) = seq.next_element_seed(SiteSeed { t_max: self.t_max })? {
            out.push(site);
        }
        Ok(out)
    }
}

impl Serialize for PhaseMap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let sites: Vec<(usize, i64, Coin)> = self
            .pi_sites()
            .into_iter()
            .map(|(step, m)| (step, m.position, m.coin))
            .collect();
        let mut st = s.serialize_struct("PhaseMap", 2)?;
        st.serialize_field("t_max", &self.t_max)?;
        st.serialize_field("pi_sites", &sites)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for PhaseMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct MapVisitor;

        impl<'de> Visitor<'de> for MapVisitor {
            type Value = PhaseMap;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object with \"t_max\" and \"pi_sites\"")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<PhaseMap, A::Error> {
                let mut t_max: Option<usize> = None;
                let mut sites: Option<Vec<PiSite>> = None;
                while let Some(key) = map.next_key::<String>()? {
                    match key.as_str() {
                        "t_max" if t_max.is_none() => t_max = Some(map.next_value()?),
                        "pi_sites" if sites.is_none() => sites = Some(map.next_value_seed(SitesSeed { t_max })?),
                        "t_max" | "pi_sites" => return Err(de::Error::custom(format_args!("duplicate field `{key}`"))),
                        other => return Err(de::Error::unknown_field(other, &["t_max", "pi_sites"])),
                    }
                }
                let t_max = t_max.ok_or_else(|| de::Error::missing_field("t_max"))?;
                let sites = sites.ok_or_else(|| de::Error::missing_field("pi_sites"))?;
                let mut out = PhaseMap::zeros(t_max);
                for (k, site) in sites.iter().enumerate() {
                    // only reached when pi_sites preceded t_max in the document
                    if site.step >= t_max {
                        return Err(de::Error::custom(format_args!(
                            "pi_sites entry {k}: step {} is not below t_max {t_max}",
                            site.step
                        )));
                    }
                    out.set(site.step, site.mode, true).map_err(de::Error::custom)?;
                }
                Ok(out)
            }
        }

        d.deserialize_map(MapVisitor)
    }
}

/// Columns are the step-`t` states evolved from each input mode.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleParticleUnitary {
    step: usize,
    inputs: Vec<Mode>,
    matrix: Array2<Complex64>,
}

impl SingleParticleUnitary {
    pub fn step(&self) -> usize {
        self.step
    }

    pub fn inputs(&self) -> &[Mode] {
        &self.inputs
    }

    /// `U[out_mode, input_column]`.
    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn column_of(&self, mode: Mode) -> Result<usize> {
        self.inputs
            .iter()
            .position(|&m| m == mode)
            .ok_or(Error::MissingInput(mode))
    }

    #[cfg(test)]
    pub(crate) fn scaled_for_test(u: &Self, factor: f64) -> Self {
        Self {
            matrix: u.matrix.mapv(|z| z * factor),
            ..u.clone()
        }
    }

    pub fn amplitude(&self, output: Mode, input: Mode) -> Result<Complex64> {
        let col = self.column_of(input)?;
        let ix = lattice::enumerate_modes(self.step);
        Ok(self.matrix[[ix.index_of(output)?, col]])
    }
}

/// The default experiment injects one photon into each coin port at the origin.
pub fn origin_inputs() -> Vec<Mode> {
    vec![Mode::left(0), Mode::right(0)]
}

/// Evolves `state` from the step-`step` lattice to the next one. `phases`
/// holds that step's sites, if any.
pub(crate) fn step_into(
    state: &[Complex64],
    step: usize,
    phases: Option<&[bool]>,
    coin: &CoinMatrix,
    out: &mut Vec<Complex64>,
) {
    out.clear();
    out.resize(mode_count(step + 1), Complex64::new(0.0, 0.0));
    for p in 0..=2 * step {
        let (mut l, mut r) = (state[2 * p], state[2 * p + 1]);
        if let Some(ph) = phases {
            if ph[2 * p] {
                l = -l;
            }
            if ph[2 * p + 1] {
                r = -r;
            }
        }
        // position p - step moves to p - step ± 1, i.e. index p + 2 (L) or p (R) on the larger lattice
        out[2 * (p + 2)] = coin[0][0] * l + coin[0][1] * r;
        out[2 * p + 1] = coin[1][0] * l + coin[1][1] * r;
    }
}

pub fn apply_step(
    state: &[Complex64],
    step_index: usize,
    phase_map: &PhaseMap,
    spec: &CoinSpec,
) -> Result<Vec<Complex64>> {
    let expected = mode_count(step_index);
    if state.len() != expected {
        return Err(Error::DimensionMismatch {
            step: step_index,
            expected,
            actual: state.len(),
        });
    }
    if step_index >= phase_map.t_max() {
        return Err(Error::StepBeyondMap {
            requested: step_index + 1,
            t_max: phase_map.t_max(),
        });
    }
    let mut out = Vec::new();
    step_into(
        state,
        step_index,
        Some(phase_map.step_bits(step_index)),
        &coin_matrix(spec),
        &mut out,
    );
    Ok(out)
}

pub fn build_unitary(
    t: usize,
    phase_map: &PhaseMap,
    spec: &CoinSpec,
    inputs: &[Mode],
) -> Result<SingleParticleUnitary> {
    if t > phase_map.t_max() {
        return Err(Error::StepBeyondMap {
            requested: t,
            t_max: phase_map.t_max(),
        });
    }
    if let Some(&bad) = inputs.iter().find(|m| m.position != 0) {
        return Err(Error::InputNotAtOrigin(bad));
    }
    let coin = coin_matrix(spec);
    let rows = mode_count(t);
    let mut matrix = Array2::zeros((rows, inputs.len()));
    let mut cur = Vec::with_capacity(rows);
    let mut next = Vec::with_capacity(rows);
    for (col, &input) in inputs.iter().enumerate() {
        cur.clear();
        cur.resize(2, Complex64::new(0.0, 0.0));
        cur[input.coin.offset()] = Complex64::new(1.0, 0.0);
        for s in 0..t {
            step_into(&cur, s, Some(phase_map.step_bits(s)), &coin, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        for (row, &a) in cur.iter().enumerate() {
            matrix[[row, col]] = a;
        }
    }
    Ok(SingleParticleUnitary {
        step: t,
        inputs: inputs.to_vec(),
        matrix,
    })
}
