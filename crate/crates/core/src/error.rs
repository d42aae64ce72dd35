use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {dim} exceeds the exact-enumeration cap of {cap}")]
    DimensionTooLarge { dim: usize, cap: usize },

    #[error("degree {degree} exceeds dimension {dim}")]
    DegreeTooLarge { degree: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("entry {value} at position {index} is not +1 or -1")]
    NotOnHypercube { index: usize, value: f64 },

    #[error("latent dimension {r} exceeds ambient dimension {d}")]
    RankTooLarge { r: usize, d: usize },

    #[error("cannot place {r} disjoint supports of size {support} in dimension {d}")]
    InfeasibleSupport { d: usize, r: usize, support: usize },

    #[error("rows are not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("invalid bandwidth {0}")]
    InvalidBandwidth(f64),

    #[error("kernel profile has no derivative of order {0} at zero")]
    MissingDerivative(usize),

    #[error("kernel matrix is singular even after jitter {jitter:e}")]
    SingularKernel { jitter: f64 },

    #[error("spectral gap s_p = {0:e} is not positive; the perturbation bound is undefined")]
    UndefinedBound(f64),

    #[error("Walsh design needs {columns} columns, over the budget of {budget}")]
    BudgetExceeded { columns: usize, budget: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("{path}: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
