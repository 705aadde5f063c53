use thiserror::Error;

/// Errors raised by the peakon-antipeakon toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PeakonError {
    #[error("sign convention violated: need c1 > 0 > c2, got c1 = {c1}, c2 = {c2}")]
    Sign { c1: f64, c2: f64 },

    #[error("parameter `{name}` = {value} out of range: {expected}")]
    Range {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("symmetric collision c1 + c2 = {sum:e} is not supported")]
    SymmetricCase { sum: f64 },

    #[error("t = {t} is within {guard:e} of the breaking time t0 = {t0}; peakon parameters are unbounded there")]
    AtBreaking { t: f64, t0: f64, guard: f64 },

    #[error("branch mismatch: {0}")]
    Branch(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("logarithm argument {value:e} is not positive at t = {t}, xi = {xi}")]
    BranchArgument { t: f64, xi: f64, value: f64 },

    #[error("bisection failed to converge: {0}")]
    Convergence(String),

    #[error("relabeling map is not strictly increasing near xi = {xi}")]
    Monotonicity { xi: f64 },

    #[error("integration blew up at t = {t}: |{field}| = {value:e}")]
    Blowup {
        t: f64,
        field: &'static str,
        value: f64,
    },

    #[error("no plateau nodes found; profile is not a breaking-time state")]
    NoBreaking,

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, PeakonError>;
