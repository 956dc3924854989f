//! Closed-form spectral power series (SPS) solutions of quadratic ODE
//! systems `ẋ = diag(x)(b + A x)`.
//!
//! Near a stable equilibrium `c = -A⁻¹b` with real, negative, rationally
//! independent eigenvalues `λ` of `diag(c) A`, each state variable expands as
//!
//! ```text
//! xᵢ(t) = Σₙ αᵢⁿ e^{(n·λ) t}
//! ```
//!
//! over multi-indices `n ∈ ℕ^M`. The coefficients follow from a linear
//! recursion in total degree, and all of them are monomials in the `M`
//! first-order free parameters fixed by the initial condition.
//!
//! The library is generic over the scalar type ([`Scalar`], implemented for
//! `f32` and `f64`); the aliases at the crate root fix binary64.
//!
//! ```
//! use sps::{build_coefficients, fit_sum, Spectral, System, TruncationSpec};
//!
//! let system = System::from_rows(
//!     &[vec![-2.0, -1.0], vec![-1.0, -1.0]],
//!     &[4.0, 3.0],
//! ).unwrap();
//! let spectral = Spectral::analyze(&system).unwrap();
//! let unit = build_coefficients(&system, &spectral, TruncationSpec::PerIndex(3)).unwrap();
//! let fit = fit_sum(&unit, &[1.0, 1.0], 0.0).unwrap();
//! let series = unit.scale_free_parameters(&fit.p);
//! let x = series.evaluate(20.0).unwrap();
//! assert!((x[0] - 1.0).abs() < 1e-4 && (x[1] - 2.0).abs() < 1e-4);
//! ```

pub mod bounds;
pub mod error;
pub mod fit;
pub mod format;
pub mod linalg;
pub mod logistic;
pub mod model;
pub mod oracle;
pub mod reduce;
pub mod scalar;
pub mod series;
pub mod spectral;

pub use bounds::{certificate, compute_k, compute_n0, compute_n1, CertificateOptions, ConvergenceCertificate};
pub use error::{Result, SpsError};
pub use fit::{fit_sum, fit_tail_limits, FitMethod, FitResult, TailOptions};
pub use linalg::Matrix;
pub use logistic::LogisticParams;
pub use model::{emit_system, parse_system, validate, QuadraticSystem, SystemFile, TruncationSpec};
pub use oracle::{integrate, integrate_deviation, step_count, sup_error, Trajectory};
pub use reduce::{correct_delta, correct_gamma, corrected_system, partial, ReducedModel};
pub use scalar::Scalar;
pub use series::{
    build_coefficients, build_coefficients_with, convolution_s, enumerate_indices, next_coefficient,
    residual_spectrum, CoefficientTensor, MultiIndex,
};
pub use spectral::{
    equilibrium, kernel_direction, linearization, resonance_check, spectrum, SpectralData, SpectralOptions,
};

/// Binary64 system.
pub type System = QuadraticSystem<f64>;
/// Binary64 spectral data.
pub type Spectral = SpectralData<f64>;
/// Binary64 coefficient tensor.
pub type Coefficients = CoefficientTensor<f64>;
/// Binary64 certificate.
pub type Certificate = ConvergenceCertificate<f64>;
/// Binary64 reduced model.
pub type Reduced = ReducedModel<f64>;
/// Binary64 trajectory.
pub type Samples = Trajectory<f64>;
/// Binary64 fit result.
pub type Fit = FitResult<f64>;

/// Binary32 system.
pub type System32 = QuadraticSystem<f32>;
/// Binary32 coefficient tensor.
pub type Coefficients32 = CoefficientTensor<f32>;
