use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("solver failed to converge after {iterations} iterations (residual {residual:e})")]
    SolverFailure { residual: f64, iterations: usize },
    #[error("no admissible lambda on the grid")]
    NoAdmissibleLambda,
    #[error("calibration failed: {0}")]
    CalibrationFailure(String),
    #[error("inconclusive verdict: {0}")]
    InconclusiveVerdict(String),
    #[error("evolution blew up at step {step}")]
    EvolutionBlowup { step: usize },
    #[error("inadmissible datum: tail flux {flux:e} exceeds cap {cap:e}")]
    InadmissibleDatum { flux: f64, cap: f64 },
    #[error("no candidate passed the tameness check")]
    NoTameContinuation,
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("quorum not met: {survivors} of {total} members survived (need {quorum})")]
    Quorum {
        survivors: usize,
        total: usize,
        quorum: usize,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
