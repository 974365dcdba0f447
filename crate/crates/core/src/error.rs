use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} is outside the function domain")]
    Domain { point: Vec<f64> },

    #[error("function returned a non-finite value at {point:?}")]
    NonFinite { point: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate shift: {0}")]
    DegenerateShift(String),

    #[error("singular coefficient: sin(omega * epsilon) vanishes for omega={omega}, epsilon={epsilon}")]
    SingularCoefficient { omega: f64, epsilon: f64 },

    #[error("unknown closed-form family `{0}`")]
    UnknownFamily(String),

    #[error("unknown function `{0}`")]
    UnknownFunction(String),

    #[error("unknown circuit template `{0}`")]
    UnknownTemplate(String),

    #[error("calibration grid has no usable points")]
    EmptyGrid,

    #[error("anchor +/- epsilon leaves the domain for every epsilon on the grid")]
    NoValidColumns,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("matrix is not unitary (deviation {0:e})")]
    NonUnitary(f64),

    #[error("observable is not Hermitian (deviation {0:e})")]
    NonHermitian(f64),

    #[error("wire {wire} out of range for a {qubits}-qubit register")]
    WireOutOfRange { wire: usize, qubits: usize },

    #[error("circuit template must have exactly one free parameter, found {0}")]
    FreeParameterCount(usize),

    #[error("expectation value has imaginary residue {0:e}")]
    ComplexExpectation(f64),

    #[error("could not draw an in-domain sample after {attempts} attempts")]
    InfeasibleDomain { attempts: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Domain and numeric failures, as opposed to malformed requests.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::NonFinite { .. }
                | Error::SingularCoefficient { .. }
                | Error::DegenerateShift(_)
                | Error::EmptyGrid
                | Error::NoValidColumns
                | Error::NonUnitary(_)
                | Error::NonHermitian(_)
                | Error::ComplexExpectation(_)
                | Error::InfeasibleDomain { .. }
                | Error::Io(_)
        )
    }
}
