use thiserror::Error;

pub type Result<T> = std::result::Result<T, SrmError>;

#[derive(Debug, Error)]
pub enum SrmError {
    #[error("failed to parse motor spec: {0}")]
    Parse(String),

    /// A spec field broke one of its invariants.
    #[error("invalid `{field}`: {constraint} (got {actual})")]
    InvalidSpec {
        field: &'static str,
        constraint: String,
        actual: String,
    },

    #[error("unknown preset `{0}` (expected table1-motor1 .. table1-motor4)")]
    UnknownPreset(String),

    #[error("unknown material `{0}`")]
    UnknownMaterial(String),

    #[error("inconsistent radial dimensions: bore diameter would be {0} mm")]
    InconsistentRadialDimensions(f64),

    #[error("invalid phase `{0}` (expected A or B)")]
    InvalidPhase(String),

    #[error("disconnected or degenerate network")]
    DegenerateNetwork,

    #[error("nonlinear solve did not converge after {iterations} iterations (last relative flux change {last_change:.3e})")]
    NonConvergence { iterations: usize, last_change: f64 },

    #[error("closed-form fluxes require a linear network")]
    ClosedFormNeedsLinear,

    #[error("curve has no zero crossing")]
    NoZeroCrossing,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("solver failed at theta = {theta} deg, i = {current} A: {source}")]
    AtGridPoint {
        theta: f64,
        current: f64,
        #[source]
        source: Box<SrmError>,
    },

    #[error("time step too large for hysteresis band containment: phase {phase} current {current:.4} A left [{lower:.4}, {upper:.4}] A at t = {time:.6} s; use a smaller dt")]
    BandViolation {
        phase: char,
        current: f64,
        lower: f64,
        upper: f64,
        time: f64,
    },

    #[error("trace too short: need {needed} samples, have {available}")]
    TraceTooShort { needed: usize, available: usize },

    #[error("no net positive torque (mean torque {0:.6} N.m)")]
    NoPositiveTorque(f64),

    #[error("empty averaging window")]
    EmptyWindow,

    #[error("baseline must be positive (got {0})")]
    NonPositiveBaseline(f64),

    #[error("comparison needs at least two entries (got {0})")]
    TooFewEntries(usize),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl SrmError {
    pub(crate) fn invalid(field: &'static str, constraint: impl Into<String>, actual: impl ToString) -> Self {
        SrmError::InvalidSpec {
            field,
            constraint: constraint.into(),
            actual: actual.to_string(),
        }
    }
}
