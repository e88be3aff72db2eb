use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e} > {tolerance:.1e})")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("non-finite entry in matrix")]
    NonFinite,

    #[error(
        "eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {residual:.3e})"
    )]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("vectors are not orthonormal (deviation {0:.3e})")]
    NotOrthonormal(f64),

    #[error("empty basis")]
    EmptyBasis,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Hamiltonian has resonant gaps (min gap {min_gap:.3e}, min gap difference {min_gap_difference:.3e})")]
    Resonant {
        min_gap: f64,
        min_gap_difference: f64,
    },

    #[error("could not reach non-resonant spectrum after {0} jitter rounds")]
    JitterExhausted(usize),

    #[error("energy {energy} outside the admissible window ({lower}, {upper})")]
    EnergyOutOfRange { energy: f64, lower: f64, upper: f64 },

    #[error("missing bound context field `{0}`")]
    MissingContext(&'static str),

    #[error(
        "analytic rate {direct:.6e} disagrees with correlation-operator form {correlated:.6e}"
    )]
    RateMismatch { direct: f64, correlated: f64 },
}
