use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("internal consistency violated: {0}")]
    Consistency(String),

    #[error("degenerate collision: {0}")]
    DegenerateCollision(String),

    #[error("kernel {kernel} cannot be used in the {expected} regime")]
    WrongRegime {
        kernel: &'static str,
        expected: &'static str,
    },

    #[error("relativistic collision map violates conservation (residual {residual:e})")]
    FormulaConsistency { residual: f64 },

    #[error(
        "lower-bound estimate failed: delta = {delta:e} at lambda = {lambda} \
         (lambda too large or resolution too coarse)"
    )]
    Estimation { delta: f64, lambda: f64 },

    #[error("time {t} lies outside the comparison solution's domain [0, {blowup_time})")]
    Domain { t: f64, blowup_time: f64 },

    #[error("inconclusive run: step size {dt:e} underflowed at t = {t} without crossing the threshold")]
    Inconclusive { t: f64, dt: f64 },

    #[error("iterate depth {k} exceeds the evaluator limit {k_max}")]
    Depth { k: usize, k_max: usize },

    #[error("representation mismatch: {0}")]
    RepresentationMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
