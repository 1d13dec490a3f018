use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operand lives on the wrong space: {0}")]
    WrongSpace(String),

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("operator is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("evolution is not unitary (defect {defect:e})")]
    NotUnitary { defect: f64 },

    #[error("eigendecomposition failed")]
    Eigendecomposition,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("estimator diverges: zero phase per photon (g = 0)")]
    ErrorDiverges,

    #[error("empty sweep: no parameter values supplied")]
    EmptySweep,

    #[error("infeasible design: {0}")]
    Infeasible(String),
}

impl Error {
    /// True for failures of the numerical core (non-Hermitian matrices,
    /// lost normalization or unitarity), as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotNormalized { .. }
                | Error::NotHermitian { .. }
                | Error::NotUnitary { .. }
                | Error::Eigendecomposition
        )
    }
}
