//! Equilibrium, linearization, and the real simple spectrum that sets the
//! exponential basis `e^{(n·λ)t}`.

use crate::error::{Result, SpsError};
use crate::linalg::{eigenvalues, null_vector, Matrix};
use crate::model::QuadraticSystem;
use crate::scalar::{norm2, Scalar};

/// Imaginary parts above this fraction of the spectral radius are complex.
pub const COMPLEX_TOL: f64 = 1e-9;
/// Eigenvalues closer than this fraction of the spectral radius coincide.
pub const GAP_TOL: f64 = 1e-9;
/// Relative pivot threshold for the rank decision in [`kernel_direction`].
pub const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    /// Lattice box half-width `Z` for the resonance scan.
    pub lattice_bound: u32,
    /// Resonance threshold, relative to `|λ₁|`.
    pub lattice_tol: f64,
    /// Largest lattice box `(2Z+1)^M` scanned; `Z` shrinks to fit.
    pub lattice_budget: u64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            lattice_bound: 20,
            lattice_tol: 1e-9,
            lattice_budget: 10_000_000,
        }
    }
}

/// Spectral data of the linearization at equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData<T> {
    /// Equilibrium `c = -A⁻¹ b`.
    pub c: Vec<T>,
    /// Linearization `J = diag(c) A`.
    pub jacobian: Matrix<T>,
    /// Eigenvalues sorted by ascending magnitude, all real and negative.
    pub lambda: Vec<T>,
    /// Unit eigenvectors; `kernels[i]` spans `ker(λᵢ I − J)`.
    pub kernels: Vec<Vec<T>>,
}

impl<T: Scalar> SpectralData<T> {
    pub fn analyze(system: &QuadraticSystem<T>) -> Result<Self> {
        Self::analyze_with(system, &SpectralOptions::default())
    }

    /// Full pipeline: equilibrium, linearization, spectrum checks, the
    /// finite lattice scan, and kernel directions.
    pub fn analyze_with(system: &QuadraticSystem<T>, opts: &SpectralOptions) -> Result<Self> {
        let c = equilibrium(system)?;
        let jacobian = linearization(system, &c);
        let lambda = spectrum(&jacobian)?;
        let bound = effective_lattice_bound(opts.lattice_bound, lambda.len(), opts.lattice_budget);
        if bound > 0 {
            let hits = resonance_check(&lambda, bound, T::lit(opts.lattice_tol));
            if let Some(z) = hits.into_iter().next() {
                let residual = z
                    .iter()
                    .zip(&lambda)
                    .map(|(&k, &l)| T::lit(k as f64) * l)
                    .sum::<T>()
                    .abs();
                return Err(SpsError::LatticeResonance {
                    z,
                    residual: residual.to_f64().unwrap_or(0.0),
                });
            }
        }
        let kernels = lambda
            .iter()
            .map(|&l| kernel_direction(&jacobian, l))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            c,
            jacobian,
            lambda,
            kernels,
        })
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    /// Slowest eigenvalue `λ₁`.
    pub fn lambda1(&self) -> T {
        self.lambda[0]
    }
}

fn effective_lattice_bound(z: u32, m: usize, budget: u64) -> u32 {
    let mut z = z;
    while z > 0 {
        let side = 2 * z as u64 + 1;
        let size = (0..m).try_fold(1u64, |acc, _| acc.checked_mul(side));
        if matches!(size, Some(s) if s <= budget) {
            break;
        }
        z -= 1;
    }
    z
}

/// Solves `A c = -b`.
pub fn equilibrium<T: Scalar>(system: &QuadraticSystem<T>) -> Result<Vec<T>> {
    let rhs: Vec<T> = system.b().iter().map(|&x| -x).collect();
    system.a().solve(&rhs)
}

/// `J = diag(c) A`.
pub fn linearization<T: Scalar>(system: &QuadraticSystem<T>, c: &[T]) -> Matrix<T> {
    system.a().scale_rows(c)
}

/// Real, negative, simple eigenvalues of `J` sorted by ascending magnitude.
pub fn spectrum<T: Scalar>(jacobian: &Matrix<T>) -> Result<Vec<T>> {
    let raw = match jacobian.rows() {
        1 => vec![(jacobian[(0, 0)], T::zero())],
        2 => eigen_2x2(jacobian),
        _ => eigenvalues(jacobian)?,
    };
    let radius = raw
        .iter()
        .fold(T::zero(), |m, &(re, im)| m.max((re * re + im * im).sqrt()));
    let complex_tol = T::tol(COMPLEX_TOL) * radius;
    if let Some(&(_, im)) = raw.iter().find(|e| e.1.abs() > complex_tol) {
        return Err(SpsError::ComplexEigenvalues {
            imag: im.abs().to_f64().unwrap_or(f64::NAN),
        });
    }
    let mut lambda: Vec<T> = raw.into_iter().map(|e| e.0).collect();
    if let Some(&l) = lambda.iter().find(|&&l| !(l < T::zero())) {
        return Err(SpsError::NonNegativeEigenvalue {
            value: l.to_f64().unwrap_or(f64::NAN),
        });
    }
    lambda.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap_or(std::cmp::Ordering::Equal));
    let gap_tol = T::tol(GAP_TOL) * radius;
    for w in lambda.windows(2) {
        if (w[1] - w[0]).abs() <= gap_tol {
            return Err(SpsError::RepeatedEigenvalue {
                first: w[0].to_f64().unwrap_or(f64::NAN),
                second: w[1].to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    Ok(lambda)
}

/// Closed-form roots of the 2×2 characteristic polynomial, using the
/// cancellation-free pairing `λ_b = det / λ_a`.
fn eigen_2x2<T: Scalar>(j: &Matrix<T>) -> Vec<(T, T)> {
    let half = T::lit(0.5);
    let tr = j[(0, 0)] + j[(1, 1)];
    let det = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
    let diff = j[(0, 0)] - j[(1, 1)];
    let disc = diff * diff + T::lit(4.0) * j[(0, 1)] * j[(1, 0)];
    if disc < T::zero() {
        let im = (-disc).sqrt() * half;
        return vec![(tr * half, im), (tr * half, -im)];
    }
    let sq = disc.sqrt();
    let q = if tr >= T::zero() { (tr + sq) * half } else { (tr - sq) * half };
    if q == T::zero() {
        return vec![(T::zero(), T::zero()), (T::zero(), T::zero())];
    }
    vec![(q, T::zero()), (det / q, T::zero())]
}

/// All integer vectors `z` with `0 < max|zᵢ| ≤ bound` and
/// `|z·λ| < tol·|λ₁|`, in lexicographic order.
///
/// A finite scan: an empty result does not prove non-resonance.
pub fn resonance_check<T: Scalar>(lambda: &[T], bound: u32, tol: T) -> Vec<Vec<i64>> {
    let m = lambda.len();
    if m == 0 || bound == 0 {
        return Vec::new();
    }
    let l1 = lambda.iter().fold(T::infinity(), |acc, &l| acc.min(l.abs()));
    let thresh = tol * l1;
    let zb = bound as i64;
    let mut z = vec![-zb; m];
    let mut hits = Vec::new();
    loop {
        if z.iter().any(|&k| k != 0) {
            let dot: T = z.iter().zip(lambda).map(|(&k, &l)| T::lit(k as f64) * l).sum();
            if dot.abs() < thresh {
                hits.push(z.clone());
            }
        }
        let mut axis = m;
        loop {
            if axis == 0 {
                return hits;
            }
            axis -= 1;
            if z[axis] < zb {
                z[axis] += 1;
                break;
            }
            z[axis] = -zb;
        }
    }
}

/// Unit vector spanning `ker(λ I − J)`, sign-normalized so the first entry
/// of largest magnitude is positive.
pub fn kernel_direction<T: Scalar>(jacobian: &Matrix<T>, lambda: T) -> Result<Vec<T>> {
    let n = jacobian.rows();
    let shifted = Matrix::from_fn(n, n, |i, j| {
        let d = if i == j { lambda } else { T::zero() };
        d - jacobian[(i, j)]
    });
    let mut v = null_vector(&shifted, T::tol(RANK_TOL))?;
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x = *x / nv);
    let big = v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let lead = v
        .iter()
        .position(|x| x.abs() >= big * (T::one() - T::tol(1e-12)))
        .unwrap_or(0);
    if v[lead] < T::zero() {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(v)
}
