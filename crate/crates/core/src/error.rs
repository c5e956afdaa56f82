use thiserror::Error;

use crate::lattice::Mode;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("position {position} lies outside the step-{step} lattice")]
    PositionOutOfRange { position: i64, step: usize },

    #[error("{name} = {value} is outside [0, 1]")]
    OutOfUnitInterval { name: &'static str, value: f64 },

    #[error("state has {actual} amplitudes but step {step} expects {expected}")]
    DimensionMismatch {
        step: usize,
        expected: usize,
        actual: usize,
    },

    #[error("input mode {0} is not at the origin")]
    InputNotAtOrigin(Mode),

    #[error("mode {0} is not an input column of the unitary")]
    MissingInput(Mode),

    #[error("input modes must differ, got {0} twice")]
    DuplicateInput(Mode),

    #[error("a mode pair needs two distinct modes, got {0} twice")]
    SameMode(Mode),

    #[error("column for input {mode} has norm {norm}, expected 1")]
    NonUnitary { mode: Mode, norm: f64 },

    #[error("step {requested} exceeds the phase map depth {t_max}")]
    StepBeyondMap { requested: usize, t_max: usize },

    #[error("coincidence entry ({0}, {1}) is negative")]
    NegativeProbability(Mode, Mode),

    #[error("enumeration over {sites} phase sites exceeds the limit of {limit}")]
    TooManySites { sites: usize, limit: usize },

    #[error("matrices live on different steps ({0} and {1})")]
    StepMismatch(usize, usize),

    #[error("coincidence matrix is identically zero")]
    ZeroMatrix,

    #[error("count matrix has zero total")]
    ZeroCounts,

    #[error("two-particle oracle is limited to t <= {limit}, got {t}")]
    OracleTooDeep { t: usize, limit: usize },

    #[error("invalid mode label {0:?}, expected e.g. \"-2_R\"")]
    InvalidLabel(String),

    #[error("{0} must be at least 1")]
    Empty(&'static str),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
