use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter `{name}` must be strictly positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("correlation strength `{name}` must be nonnegative, got {value}")]
    NegativeCorrelation { name: &'static str, value: f64 },

    #[error("gamma = {gamma} outside the admissible interval [-{bound}, {bound}]")]
    GammaOutOfRange { gamma: f64, bound: f64 },

    #[error("{what} must be {expected}, got {value}")]
    Domain {
        what: &'static str,
        expected: &'static str,
        value: f64,
    },

    #[error("density is singular at the boundary (shape {shape} < 1)")]
    SingularBoundary { shape: f64 },

    #[error("time {t} is not on the simulation grid")]
    OffGrid { t: f64 },

    #[error("simpson rule needs an even interval count, got {intervals}")]
    OddIntervals { intervals: usize },

    #[error("{0}")]
    InvalidConfig(String),

    #[error("tenor grids differ")]
    GridMismatch,

    #[error("maturities must be strictly increasing; {maturity} follows {previous}")]
    NonMonotoneMaturities { previous: f64, maturity: f64 },

    #[error("duplicate maturity {0}")]
    DuplicateMaturity(f64),

    #[error("tenor {tenor} outside the curve range [{lo}, {hi}]")]
    Extrapolation { tenor: f64, lo: f64, hi: f64 },

    #[error("inconsistent swap quotes: discount factor {discount} at {maturity}y")]
    InconsistentSwaps { maturity: f64, discount: f64 },

    #[error("comparison process needs equal mean-reversion speeds")]
    UnequalKappas,

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Stable short code used by the command-line error line.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonPositiveParameter { .. } => "nonpositive_parameter",
            Error::NegativeCorrelation { .. } => "negative_correlation",
            Error::GammaOutOfRange { .. } => "gamma_out_of_range",
            Error::Domain { .. } => "domain",
            Error::SingularBoundary { .. } => "singular_boundary",
            Error::OffGrid { .. } => "off_grid",
            Error::OddIntervals { .. } => "odd_intervals",
            Error::InvalidConfig(_) => "invalid_config",
            Error::GridMismatch => "grid_mismatch",
            Error::NonMonotoneMaturities { .. } => "non_monotone_maturities",
            Error::DuplicateMaturity(_) => "duplicate_maturity",
            Error::Extrapolation { .. } => "extrapolation",
            Error::InconsistentSwaps { .. } => "inconsistent_swaps",
            Error::UnequalKappas => "unequal_kappas",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_domain(ok: bool, what: &'static str, expected: &'static str, value: f64) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            expected,
            value,
        })
    }
}
