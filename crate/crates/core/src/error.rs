use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("set elements must be positive integers (found 0)")]
    ZeroElement,

    #[error("cannot parse set element {0:?}")]
    Parse(String),

    #[error("invalid window [{lo}, {hi}): need 1 <= lo < hi")]
    InvalidWindow { lo: u64, hi: u64 },

    #[error("window bound {0} exceeds 2^63")]
    RangeTooLarge(u64),

    #[error("progression level {0} overflows a 64-bit modulus")]
    LevelOverflow(u32),

    #[error("lcm exceeds cap {cap}")]
    LcmOverflow { cap: u64 },

    #[error(
        "inclusion-exclusion needs {size} elements but the subset cap is {cap}; \
         use exact_density_period or natural_partial instead"
    )]
    SubsetCapExceeded { size: usize, cap: usize },

    #[error("{a} divides {b}: set is not primitive")]
    NotPrimitive { a: u64, b: u64 },

    #[error("gcd({a}, {b}) = {gcd}: set is not pairwise coprime")]
    NotCoprime { a: u64, b: u64, gcd: u64 },

    #[error("1 belongs to the set (Behrend sets exclude 1)")]
    ContainsOne,

    #[error("invalid family spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by exhausting a size, time or calibration budget.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::Budget(_) | Error::SubsetCapExceeded { .. } | Error::LcmOverflow { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
