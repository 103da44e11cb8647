use thiserror::Error;

/// Domain errors. I/O and parse failures are handled at the CLI layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("no interior equilibrium (washout regime): mu(S_in)*<k,r> = {0} <= 1")]
    Washout(f64),

    #[error("no finite R exists: q vanishes at a = {age} while k(a) = {k_value} > 0")]
    NoFiniteRatio { age: f64, k_value: f64 },

    #[error("h or p not non-negative: assumption (B) violated at a = {age} (residual {residual})")]
    NegativeResidual { age: f64, residual: f64 },

    #[error("a_max too small: moment tail estimate {estimate} exceeds tolerance {tol}")]
    TailTooLarge { estimate: f64, tol: f64 },

    #[error("scheme instability: reduce dt (S = {0} left (0, S_in))")]
    SchemeInstability(f64),

    #[error("grid too coarse for boundary closure: mu(S)*k(0)*da/2 = {0} >= 1")]
    BoundaryClosure(f64),

    #[error("state outside X: {0}")]
    OutsideStateSpace(String),

    #[error("decay inequality not asserted outside trapping region: {0}")]
    OutsideTrapping(String),

    #[error("requested time {t} outside recorded history [0, {t_max}]")]
    HistoryRange { t: f64, t_max: f64 },

    #[error("inconclusive: extend horizon (predicted entry time {t_bound} exceeds horizon {horizon})")]
    Inconclusive { t_bound: f64, horizon: f64 },

    #[error("increase sigma infeasible for this h: weighted norm integrand does not decay (tail rate {rate} <= sigma {sigma})")]
    DivergentNorm { rate: f64, sigma: f64 },

    #[error("{0}")]
    Invalid(String),
}
