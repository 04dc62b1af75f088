use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("integration stopped at t = {t}: step limit of {max_steps} reached")]
    StepLimit { t: f64, max_steps: usize },

    #[error("integration stopped at t = {t}: step size underflow")]
    StepUnderflow { t: f64 },

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("requested time {t} outside interpolant span [0, {span}]")]
    OutsideSpan { t: f64, span: f64 },

    #[error("newton iteration did not converge after {iterations} steps (last correction {correction:e})")]
    NewtonFailed { iterations: usize, correction: f64 },

    #[error("degenerate section: |X(x*)| = {speed:e}")]
    DegenerateSection { speed: f64 },

    #[error("no return to the section within {horizon} time units")]
    NoReturn { horizon: f64 },

    #[error("cycle is not attracting: |mu_{index}| = {modulus}")]
    NotAttracting { index: usize, modulus: f64 },

    #[error("trivial multiplier off by {deviation:e}")]
    TrivialMultiplier { deviation: f64 },

    #[error("monodromy matrix is defective (eigenvector condition number {condition:e})")]
    Defective { condition: f64 },

    #[error("eigen solve failed: {0}")]
    Eigen(String),

    #[error("frame singular at grid point {index} (condition number {condition:e})")]
    SingularFrame { index: usize, condition: f64 },

    #[error("small divisor {magnitude:e} at k = {k}, component {component}, order {order}")]
    SmallDivisor {
        k: i64,
        component: usize,
        order: usize,
        magnitude: f64,
    },

    #[error("solvability violated at order {order}: |h| = {residual:e}")]
    Solvability { order: usize, residual: f64 },

    #[error("resonance {multi_index:?} -> {target} (|residual| = {residual:e})")]
    Resonance {
        multi_index: Vec<usize>,
        target: usize,
        residual: f64,
    },

    #[error("slow exponent must be real and simple, found class {0}")]
    SlowDirection(String),

    #[error("config: {0}")]
    Config(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn in_stage(self, stage: &str) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage: stage.to_string(),
                source: Box::new(e),
            },
        }
    }

    /// Innermost error, skipping stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}
