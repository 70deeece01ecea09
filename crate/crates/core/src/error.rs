use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of the model or a closed form.
    #[error("domain error: {0}")]
    Domain(String),

    /// The integrator could not continue (step underflow, non-finite state).
    #[error("integration failed at t = {t}: {reason} (state {state:?})")]
    Integration {
        t: f64,
        reason: String,
        state: [f64; 4],
    },

    /// The pendulum momentum changed sign before the target was reached.
    #[error("orbit turned back at t = {t} before reaching the target (state {state:?})")]
    TurnedBack { t: f64, state: [f64; 4] },

    /// The time budget ran out before the target was reached.
    #[error("time budget exhausted at t = {t} (state {state:?})")]
    Timeout { t: f64, state: [f64; 4] },

    /// A shot ended in a way the caller did not allow for.
    #[error("shot did not reach the section: {0}")]
    Shot(String),

    /// A tolerance could not be met within the work budget.
    #[error("accuracy target {target:e} not met, achieved {achieved:e}: {what}")]
    Accuracy {
        what: String,
        target: f64,
        achieved: f64,
    },

    /// A root finder was handed a bracket without a sign change.
    #[error("no sign change on [{lo:e}, {hi:e}] (indicators {ind_lo} / {ind_hi}): {what}")]
    Bracketing {
        what: String,
        lo: f64,
        hi: f64,
        ind_lo: String,
        ind_hi: String,
    },

    /// A geometric routine received a curve it cannot work with.
    #[error("degenerate curve: {0}")]
    Degenerate(String),

    /// A result contradicts an earlier measurement.
    #[error("inconsistent data: {0}")]
    Inconsistent(String),

    /// Not enough data for a requested fit.
    #[error("under-determined fit: {0}")]
    Fit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
