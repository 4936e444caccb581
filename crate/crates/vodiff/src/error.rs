use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("order {0} outside (0, 1]")]
    OrderDomain(f64),
    #[error("Mittag-Leffler overflow: E_{beta}({z}) exceeds the representable range")]
    Overflow { beta: f64, z: f64 },
    #[error("argument not finite: {0}")]
    NotFinite(f64),
    #[error("invalid order function: {0}")]
    OrderFunction(String),
    #[error("(mu, nu) = ({mu}, {nu}) outside the causality parallelogram")]
    Parallelogram { mu: f64, nu: f64 },
    #[error("mu = nu = 0 gives a degenerate operator")]
    DegenerateOperator,
    #[error("long memory (mu = {mu}, nu = {nu}): the old mode never leaves the kernel")]
    LongMemory { mu: f64, nu: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("time {t} outside the supported range [{lo}, {hi}]")]
    TimeRange { t: f64, lo: f64, hi: f64 },
    #[error("closed form requires nu = 0 (got nu = {0}); use the hybrid solver")]
    NeedsHybrid(f64),
    #[error("quadrature produced a non-finite value at mode {k}, t = {t}, lambda = {lambda}")]
    Quadrature { k: usize, t: f64, lambda: f64 },
    #[error("{0}")]
    Scenario(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
