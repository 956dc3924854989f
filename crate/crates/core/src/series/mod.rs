//! Multi-indices, the coefficient recursion, and evaluation of the
//! truncated series.

mod index;
mod ops;
mod tensor;

pub use index::{enumerate_indices, shell, MultiIndex, DEFAULT_MAX_ENTRIES};
pub use ops::{convolution_s, next_coefficient, residual_spectrum};
pub use tensor::{
    build_coefficients, build_coefficients_opts, build_coefficients_with, BuildOptions, CoefficientTensor,
    MAX_EXPONENT, RESONANCE_TOL,
};

#[cfg(test)]
use tensor::build_impl;
