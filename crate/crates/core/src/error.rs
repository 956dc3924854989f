use thiserror::Error;

/// Everything that can go wrong between reading a system file and
/// producing a series, certificate, or reduced model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpsError {
    #[error("malformed system document: {0}")]
    Parse(String),

    #[error("ragged matrix: row {row} has {len} entries, expected {expected}")]
    RaggedMatrix {
        row: usize,
        len: usize,
        expected: usize,
    },

    #[error("dimension mismatch: {what} has length {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("interaction matrix is singular or nearly so (reciprocal condition {rcond:e}); the equilibrium requires A invertible")]
    SingularMatrix { rcond: f64 },

    #[error("linearization has a complex eigenvalue pair (imaginary part {imag:e}); the exponential basis requires a real spectrum")]
    ComplexEigenvalues { imag: f64 },

    #[error("linearization has a non-negative eigenvalue {value:e}; the expansion requires a stable equilibrium with strictly negative eigenvalues")]
    NonNegativeEigenvalue { value: f64 },

    #[error("eigenvalues {first:e} and {second:e} coincide within tolerance; the spectrum must be simple")]
    RepeatedEigenvalue { first: f64, second: f64 },

    #[error("eigenvalue iteration failed to converge")]
    EigenNoConvergence,

    #[error("kernel of (lambda I - J) has dimension {dim}, expected exactly 1")]
    KernelDimension { dim: usize },

    #[error("integer resonance z = {z:?} with |z . lambda| = {residual:e}; the spectrum must avoid the integer lattice")]
    LatticeResonance { z: Vec<i64>, residual: f64 },

    #[error("resonant shift at multi-index {index:?}: n . lambda = {shift:e} is an eigenvalue of the linearization")]
    Resonance { index: Vec<u32>, shift: f64 },

    #[error("coefficient for multi-index {0:?} is missing")]
    MissingCoefficient(Vec<u32>),

    #[error("truncation needs {entries} entries, above the budget of {budget}")]
    TruncationTooLarge { entries: u128, budget: u128 },

    #[error("exponent {exponent:e} at t = {t:e} would overflow")]
    Overflow { exponent: f64, t: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("Newton Jacobian is singular at iteration {iteration}")]
    SingularJacobian { iteration: usize },

    #[error("tail limit for mode {mode} drifts by {drift:e} (tolerance {tolerance:e}); window too short or modes out of order")]
    TailDrift {
        mode: usize,
        drift: f64,
        tolerance: f64,
    },

    #[error("numerical solution diverged at t = {t:e} (state norm {norm:e})")]
    Divergence { t: f64, norm: f64 },

    #[error("no real eigenvalue-matching correction exists: {0}")]
    NoCorrection(String),

    #[error("operation requires an initial condition x0")]
    MissingInitialCondition,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o failure: {0}")]
    Io(String),
}

impl SpsError {
    /// Stable machine-readable code, used by the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            SpsError::Parse(_) => "E_PARSE",
            SpsError::RaggedMatrix { .. } => "E_RAGGED",
            SpsError::DimensionMismatch { .. } => "E_DIMENSION",
            SpsError::NonFinite(_) => "E_NONFINITE",
            SpsError::SingularMatrix { .. } => "E_SINGULAR_A",
            SpsError::ComplexEigenvalues { .. } => "E_COMPLEX_SPECTRUM",
            SpsError::NonNegativeEigenvalue { .. } => "E_UNSTABLE_SPECTRUM",
            SpsError::RepeatedEigenvalue { .. } => "E_REPEATED_EIGENVALUE",
            SpsError::EigenNoConvergence => "E_EIGEN_NO_CONVERGENCE",
            SpsError::KernelDimension { .. } => "E_KERNEL_DIMENSION",
            SpsError::LatticeResonance { .. } => "E_LATTICE_RESONANCE",
            SpsError::Resonance { .. } => "E_RESONANCE",
            SpsError::MissingCoefficient(_) => "E_MISSING_COEFFICIENT",
            SpsError::TruncationTooLarge { .. } => "E_TRUNCATION_BUDGET",
            SpsError::Overflow { .. } => "E_OVERFLOW",
            SpsError::NewtonDiverged { .. } => "E_FIT_NO_CONVERGENCE",
            SpsError::SingularJacobian { .. } => "E_FIT_SINGULAR_JACOBIAN",
            SpsError::TailDrift { .. } => "E_TAIL_DRIFT",
            SpsError::Divergence { .. } => "E_ORACLE_DIVERGENCE",
            SpsError::NoCorrection(_) => "E_NO_CORRECTION",
            SpsError::MissingInitialCondition => "E_MISSING_X0",
            SpsError::InvalidArgument(_) => "E_INVALID_ARGUMENT",
            SpsError::Io(_) => "E_IO",
        }
    }

    /// True for errors meaning the system violates a structural assumption
    /// of the expansion (as opposed to bad input or a numerical failure).
    pub fn is_assumption_violation(&self) -> bool {
        matches!(
            self,
            SpsError::SingularMatrix { .. }
                | SpsError::ComplexEigenvalues { .. }
                | SpsError::NonNegativeEigenvalue { .. }
                | SpsError::RepeatedEigenvalue { .. }
                | SpsError::KernelDimension { .. }
                | SpsError::LatticeResonance { .. }
                | SpsError::Resonance { .. }
        )
    }
}

pub type Result<T, E = SpsError> = std::result::Result<T, E>;
