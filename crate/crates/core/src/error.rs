use thiserror::Error;

/// Errors raised by configuration checks and the simulation kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("underdetermined system: {antennas} BS antennas < {users} users per cell")]
    Underdetermined { antennas: usize, users: usize },

    #[error("modulation order {0} is not a perfect square >= 4")]
    BadModulation(u32),

    #[error("exclusion radius {exclusion_m} m must be smaller than cell radius {radius_m} m")]
    BadGeometry { radius_m: f64, exclusion_m: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("zero distance between BS {bs} and user {user} of cell {cell}")]
    DegenerateDistance { bs: usize, user: usize, cell: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("channel estimate is identically zero")]
    ZeroChannel,

    #[error("channel Gram matrix is rank deficient")]
    RankDeficient,

    #[error("bad length: expected {expected}, got {actual}")]
    BadLength { expected: usize, actual: usize },

    #[error("receiver gain is zero")]
    ZeroGain,

    #[error("config line {line}: {reason}")]
    ConfigParse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
