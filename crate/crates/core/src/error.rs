use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sieve covers n <= {have}, but n = {need} was requested")]
    SieveTooSmall { have: u64, need: u64 },

    #[error("cannot allocate a table of {0} entries")]
    Allocation(u64),

    #[error("working precision exhausted after {certified} partial quotients")]
    PrecisionExhausted { certified: usize },

    #[error("integer overflow while {0}")]
    Overflow(&'static str),

    #[error("band membership of m = {m} is undecidable: largest computed denominator is {q_max}")]
    UndecidableBand { m: i64, q_max: u128 },

    #[error("small divisor at m = {m}: |m alpha| = {dist:e} is below the floor {floor:e}")]
    SmallDivisor { m: i64, dist: f64, floor: f64 },

    #[error("budget exceeded: {what} needs {need}, budget is {budget}")]
    Budget { what: &'static str, need: u128, budget: u128 },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
