use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two distinct vectors both carry a component outside the localized
    /// subspace; their relative angle there is unknown.
    #[error("both vectors carry an excess component; their inner product is undefined")]
    BothExcess,

    #[error("vector is not localized (excess = {excess})")]
    NonLocalized { excess: f64 },

    #[error("vector must be nonzero")]
    ZeroVector,

    #[error("matrix is not Hermitian (max asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix is not unitary (max deviation of U*U from I is {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("mode {0} is not part of the Fock context")]
    UnsupportedMode(i64),

    #[error("second quantization needs a contraction, got |q| = {modulus}")]
    Contraction { modulus: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sample {index} is invalid: {reason}")]
    InvalidSample { index: usize, reason: String },

    #[error("syntax error at {line}:{column} near `{token}`: {message}")]
    Syntax {
        line: usize,
        column: usize,
        token: String,
        message: String,
    },

    #[error("arity error at {line}:{column}: `{constructor}` expects {expected}, got {found}")]
    Arity {
        line: usize,
        column: usize,
        constructor: String,
        expected: String,
        found: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable name used in JSON error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::BothExcess => "BothExcessError",
            Error::NonLocalized { .. } => "NonLocalizedError",
            Error::ZeroVector => "ZeroVectorError",
            Error::NotHermitian { .. } => "NotHermitianError",
            Error::NotUnitary { .. } => "NotUnitaryError",
            Error::InvalidMap(_) => "InvalidMapError",
            Error::UnsupportedMode(_) => "UnsupportedModeError",
            Error::Contraction { .. } => "ContractError",
            Error::Domain(_) => "DomainError",
            Error::InvalidSample { .. } => "InvalidSample",
            Error::Syntax { .. } => "SyntaxError",
            Error::Arity { .. } => "ArityError",
            Error::Io(_) => "IoError",
            Error::Json(_) => "JsonError",
            Error::Csv(_) => "CsvError",
        }
    }
}
