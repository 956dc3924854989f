use crate::error::{Result, SpsError};
use crate::linalg::Matrix;
use crate::model::QuadraticSystem;
use crate::scalar::Scalar;
use crate::spectral::SpectralData;

use super::index::{enumerate_with_budget, MultiIndex, DEFAULT_MAX_ENTRIES};
use super::tensor::{solve_shift, CoefficientTensor};

/// Visits every `m` with `lo ≤ m ≤ hi` componentwise.
fn for_each_between(lo: &[u32], hi: &[u32], mut f: impl FnMut(&[u32]) -> Result<()>) -> Result<()> {
    if lo.iter().zip(hi).any(|(a, b)| a > b) {
        return Ok(());
    }
    let mut cur = lo.to_vec();
    loop {
        f(&cur)?;
        let mut k = cur.len();
        loop {
            if k == 0 {
                return Ok(());
            }
            k -= 1;
            if cur[k] < hi[k] {
                cur[k] += 1;
                cur[k + 1..].copy_from_slice(&lo[k + 1..]);
                break;
            }
        }
    }
}

fn check_index<T: Scalar>(coeffs: &CoefficientTensor<T>, n: &MultiIndex) -> Result<()> {
    if n.dim() != coeffs.dim() {
        return Err(SpsError::DimensionMismatch {
            what: "multi-index",
            expected: coeffs.dim(),
            found: n.dim(),
        });
    }
    Ok(())
}

/// Quadratic source `S_ij = Σ_{m ≤ n, m ∉ {0, n}} α_i^m α_j^{n−m}`, as a
/// full symmetric matrix.
///
/// Fails with [`SpsError::MissingCoefficient`] when some interior `m` lies
/// outside the tensor's truncation.
pub fn convolution_s<T: Scalar>(coeffs: &CoefficientTensor<T>, n: &MultiIndex) -> Result<Matrix<T>> {
    check_index(coeffs, n)?;
    let m = coeffs.dim();
    let zero = vec![0u32; m];
    let mut s = Matrix::zeros(m, m);
    let mut rest = vec![0u32; m];
    for_each_between(&zero, n.components(), |mi| {
        if mi.iter().all(|&k| k == 0) || mi == n.components() {
            return Ok(());
        }
        for (r, (&a, &b)) in rest.iter_mut().zip(n.components().iter().zip(mi)) {
            *r = a - b;
        }
        let am = coeffs.entry(&MultiIndex::new(mi.to_vec()))?;
        let ar = coeffs.entry(&MultiIndex::new(rest.clone()))?;
        for i in 0..m {
            for j in i..m {
                s[(i, j)] += am[i] * ar[j];
            }
        }
        Ok(())
    })?;
    for i in 0..m {
        for j in 0..i {
            s[(i, j)] = s[(j, i)];
        }
    }
    Ok(s)
}

/// Solves the recursion for one coefficient of degree at least two from
/// the lower-degree ones already in `coeffs`.
pub fn next_coefficient<T: Scalar>(
    system: &QuadraticSystem<T>,
    spectral: &SpectralData<T>,
    coeffs: &CoefficientTensor<T>,
    n: &MultiIndex,
) -> Result<Vec<T>> {
    if n.degree() < 2 {
        return Err(SpsError::InvalidArgument(format!(
            "multi-index {:?} has degree {}; the recursion starts at degree 2",
            n.components(),
            n.degree()
        )));
    }
    let s = convolution_s(coeffs, n)?;
    let a = system.a();
    let rhs: Vec<T> = (0..a.rows())
        .map(|i| (0..a.cols()).map(|j| a[(i, j)] * s[(i, j)]).sum())
        .collect();
    solve_shift(&spectral.jacobian, &spectral.lambda, n, &rhs)
}

/// Coefficients of `ẋ − diag(x)(b + Ax)` for the truncated series, over
/// the doubled truncation. Zero (to rounding) on admitted indices; what is
/// left outside them is the truncation error.
pub fn residual_spectrum<T: Scalar>(
    system: &QuadraticSystem<T>,
    coeffs: &CoefficientTensor<T>,
) -> Result<Vec<(MultiIndex, Vec<T>)>> {
    let m = coeffs.dim();
    if system.dim() != m {
        return Err(SpsError::DimensionMismatch {
            what: "system",
            expected: coeffs.dim(),
            found: system.dim(),
        });
    }
    let trunc = coeffs.truncation();
    let extended = enumerate_with_budget(trunc.doubled(), m, DEFAULT_MAX_ENTRIES)?;
    let cap = trunc.value();
    let a = system.a();
    let b = system.b();
    let mut out = Vec::with_capacity(extended.len());
    let mut p = Matrix::zeros(m, m);
    for k in extended {
        let kc = k.components();
        for i in 0..m {
            for j in 0..m {
                p[(i, j)] = T::zero();
            }
        }
        let lo: Vec<u32> = kc.iter().map(|&x| x.saturating_sub(cap)).collect();
        let hi: Vec<u32> = kc.iter().map(|&x| x.min(cap)).collect();
        for_each_between(&lo, &hi, |mi| {
            let rest: Vec<u32> = kc.iter().zip(mi).map(|(&x, &y)| x - y).collect();
            if !trunc.admits(mi) || !trunc.admits(&rest) {
                return Ok(());
            }
            let am = coeffs.entry(&MultiIndex::new(mi.to_vec()))?;
            let ar = coeffs.entry(&MultiIndex::new(rest))?;
            for i in 0..m {
                for j in 0..m {
                    p[(i, j)] += am[i] * ar[j];
                }
            }
            Ok(())
        })?;
        let own = coeffs.get(&k);
        let shift = k.dot(coeffs.lambda());
        let r: Vec<T> = (0..m)
            .map(|i| {
                let quad: T = (0..m).map(|j| a[(i, j)] * p[(i, j)]).sum();
                let lin = own.as_ref().map_or(T::zero(), |v| (shift - b[i]) * v[i]);
                lin - quad
            })
            .collect();
        out.push((k, r));
    }
    Ok(out)
}
