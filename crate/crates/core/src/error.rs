use thiserror::Error;

pub type Result<T> = std::result::Result<T, DipError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DipError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("probability {0} is outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),

    #[error("privacy factor must be positive and finite, got {0}")]
    InvalidEpsilon(f64),

    #[error("value {value} is not in the declared support")]
    OutsideSupport { value: f64 },

    #[error("value {value} exceeds the largest support point {max}")]
    AboveSupport { value: f64, max: f64 },

    #[error("support points must be strictly increasing")]
    NonMonotoneSupport,

    #[error("probability masses must be strictly positive")]
    NonPositiveMass,

    #[error("probability masses sum to {0}, expected 1")]
    MassNotNormalized(f64),

    #[error("overlapping mass specification: {0}")]
    OverlappingMass(String),

    #[error("need at least {needed} hold-out values, got {got}")]
    HoldoutTooSmall { needed: usize, got: usize },

    #[error("degenerate split: ratio {ratio} of {rows} rows gives {holdout} hold-out and {released} released rows")]
    DegenerateSplit {
        ratio: f64,
        rows: usize,
        holdout: usize,
        released: usize,
    },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("column `{column}`: {source}")]
    Column {
        column: String,
        #[source]
        source: Box<DipError>,
    },

    #[error("quadrature did not converge: delta {delta:e} between node counts")]
    QuadratureNotConverged { delta: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),
}

impl DipError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        DipError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn in_column(self, column: &str) -> Self {
        DipError::Column {
            column: column.to_string(),
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_finite() && epsilon > 0.0 {
        Ok(())
    } else {
        Err(DipError::InvalidEpsilon(epsilon))
    }
}
