//! Reduced models over the first `L` variables, corrected so the reduced
//! equilibrium and slow spectrum agree with the full system.
//!
//! The corrected right-hand side is
//! `ẋᵢ = bᵢxᵢ + (A_{L×L} x)ᵢ xᵢ + δᵢxᵢ + γᵢẋᵢ`, equivalently the quadratic
//! system `Â = diag(γ*) A_{L×L}`, `b̂ = diag(γ*)(b_{1:L} + δ)` with
//! `γ*ᵢ = 1/(1 − γᵢ)`.

use serde::Serialize;

use crate::error::{Result, SpsError};
use crate::linalg::{eigenvalues, Matrix};
use crate::model::{validate, QuadraticSystem};
use crate::scalar::{all_finite, max_abs, Scalar};
use crate::spectral::{equilibrium, linearization, spectrum};

/// Largest `L` for which the subset enumeration in [`correct_gamma`] runs.
pub const MAX_KEEP: usize = 16;

const NEWTON_ITERATIONS: usize = 100;
const NEWTON_HALVINGS: usize = 40;
/// Relative agreement of the corrected and target eigenvalues.
const EIGEN_MATCH_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedModel<T> {
    pub keep: usize,
    pub a_sub: Vec<Vec<T>>,
    pub b_sub: Vec<T>,
    pub delta: Vec<T>,
    pub gamma: Vec<T>,
    pub gamma_star: Vec<T>,
    pub c_hat: Vec<T>,
    pub lambda_hat: Vec<T>,
    /// Equilibrium of the full system.
    pub c: Vec<T>,
    /// Spectrum of the full system, ascending magnitude.
    pub lambda: Vec<T>,
}

impl<T: Scalar> ReducedModel<T> {
    /// Computes `δ`, `γ`, and the derived quantities. Depends only on
    /// `(A, b, L)`; any initial condition on `system` is ignored.
    pub fn new(system: &QuadraticSystem<T>, keep: usize) -> Result<Self> {
        let sub = partial(system, keep)?;
        let full_c = equilibrium(system)?;
        let full_lambda = spectrum(&linearization(system, &full_c))?;
        let delta = delta_from(&sub, &full_c);
        let c_hat = reduced_equilibrium(&sub, &delta)?;
        let gamma = gamma_from(&sub, &c_hat, &full_lambda[..keep])?;
        let gamma_star: Vec<T> = gamma.iter().map(|&g| T::one() / (T::one() - g)).collect();
        let jac = linearization(&sub, &c_hat).scale_rows(&gamma_star);
        let lambda_hat = spectrum(&jac)?;
        Ok(Self {
            keep,
            a_sub: sub.a().to_rows(),
            b_sub: sub.b().to_vec(),
            delta,
            gamma,
            gamma_star,
            c_hat,
            lambda_hat,
            c: full_c,
            lambda: full_lambda,
        })
    }

    /// The corrected `L`-variable system `(Â, b̂)`.
    pub fn system(&self) -> Result<QuadraticSystem<T>> {
        let a = Matrix::from_rows(&self.a_sub)?.scale_rows(&self.gamma_star);
        let b = self
            .b_sub
            .iter()
            .zip(&self.delta)
            .zip(&self.gamma_star)
            .map(|((&b, &d), &g)| g * (b + d))
            .collect();
        QuadraticSystem::new(a, b, None)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reduced model serializes")
    }
}

/// Upper-left `L × L` block and first `L` growth rates. An initial
/// condition, if present, is truncated the same way.
pub fn partial<T: Scalar>(system: &QuadraticSystem<T>, keep: usize) -> Result<QuadraticSystem<T>> {
    let m = system.dim();
    if keep == 0 || keep >= m {
        return Err(SpsError::InvalidArgument(format!(
            "keep must satisfy 1 <= L < {m}, got {keep}"
        )));
    }
    let x0 = system.x0().map(|x| x[..keep].to_vec());
    validate(QuadraticSystem::new(
        system.a().leading_block(keep),
        system.b()[..keep].to_vec(),
        x0,
    )?)
}

/// `δ = −(A_{L×L} c_{1:L} + b_{1:L})`, which makes `ĉ = c_{1:L}`.
pub fn correct_delta<T: Scalar>(system: &QuadraticSystem<T>, keep: usize) -> Result<Vec<T>> {
    let sub = partial(system, keep)?;
    let c = equilibrium(system)?;
    Ok(delta_from(&sub, &c))
}

fn delta_from<T: Scalar>(sub: &QuadraticSystem<T>, c: &[T]) -> Vec<T> {
    let l = sub.dim();
    let ac = sub.a().matvec(&c[..l]);
    ac.iter().zip(sub.b()).map(|(&x, &b)| -(x + b)).collect()
}

fn reduced_equilibrium<T: Scalar>(sub: &QuadraticSystem<T>, delta: &[T]) -> Result<Vec<T>> {
    let rhs: Vec<T> = sub.b().iter().zip(delta).map(|(&b, &d)| -(b + d)).collect();
    sub.a().solve(&rhs)
}

/// `γ` such that `diag(γ*) diag(ĉ) A_{L×L}` has the `L` slowest full
/// eigenvalues; among several real solutions, the one nearest `γ = 0`.
pub fn correct_gamma<T: Scalar>(system: &QuadraticSystem<T>, keep: usize, delta: &[T]) -> Result<Vec<T>> {
    let sub = partial(system, keep)?;
    if delta.len() != keep {
        return Err(SpsError::DimensionMismatch {
            what: "delta",
            expected: keep,
            found: delta.len(),
        });
    }
    let c = equilibrium(system)?;
    let lambda = spectrum(&linearization(system, &c))?;
    let c_hat = reduced_equilibrium(&sub, delta)?;
    gamma_from(&sub, &c_hat, &lambda[..keep])
}

/// Corrected reduced system in one call.
pub fn corrected_system<T: Scalar>(system: &QuadraticSystem<T>, keep: usize) -> Result<QuadraticSystem<T>> {
    ReducedModel::new(system, keep)?.system()
}

fn gamma_from<T: Scalar>(sub: &QuadraticSystem<T>, c_hat: &[T], target: &[T]) -> Result<Vec<T>> {
    let l = sub.dim();
    if l > MAX_KEEP {
        return Err(SpsError::InvalidArgument(format!("keep above {MAX_KEEP} is not supported")));
    }
    let b = linearization(sub, c_hat);
    let minors = principal_minors(&b);
    let tau = elementary_symmetric(target);
    let mut best: Option<(T, Vec<T>)> = None;
    for start in starts(&b, target) {
        let Some(g) = newton(&minors, &tau, start) else {
            continue;
        };
        if !eigen_match(&b, &g, target) {
            continue;
        }
        let gamma: Vec<T> = g.iter().map(|&x| T::one() - T::one() / x).collect();
        if !all_finite(&gamma) {
            continue;
        }
        let size = gamma.iter().map(|&x| x * x).sum::<T>();
        if best.as_ref().map_or(true, |(s, _)| size < *s) {
            best = Some((size, gamma));
        }
    }
    best.map(|(_, g)| g).ok_or_else(|| {
        SpsError::NoCorrection(format!(
            "no real gamma found from {} starting points",
            starts(&b, target).len()
        ))
    })
}

/// `det(B_SS)` for every nonempty subset `S`, indexed by bitmask.
fn principal_minors<T: Scalar>(b: &Matrix<T>) -> Vec<T> {
    let l = b.rows();
    let mut out = vec![T::one(); 1 << l];
    for mask in 1..(1usize << l) {
        let idx: Vec<usize> = (0..l).filter(|&i| mask >> i & 1 == 1).collect();
        out[mask] = b.principal(&idx).det();
    }
    out
}

/// `e_k(λ)` for `k = 1..=L`.
fn elementary_symmetric<T: Scalar>(x: &[T]) -> Vec<T> {
    let mut e = vec![T::zero(); x.len() + 1];
    e[0] = T::one();
    for &v in x {
        for k in (1..e.len()).rev() {
            let prev = e[k - 1];
            e[k] += v * prev;
        }
    }
    e.remove(0);
    e
}

/// Characteristic coefficients `e_k` of `diag(g) B` and their Jacobian in `g`.
fn char_coeffs<T: Scalar>(minors: &[T], g: &[T]) -> (Vec<T>, Matrix<T>) {
    let l = g.len();
    let mut e = vec![T::zero(); l];
    let mut jac = Matrix::zeros(l, l);
    for mask in 1..(1usize << l) {
        let k = mask.count_ones() as usize - 1;
        let mut prod = minors[mask];
        for i in (0..l).filter(|&i| mask >> i & 1 == 1) {
            prod *= g[i];
        }
        e[k] += prod;
        for j in (0..l).filter(|&j| mask >> j & 1 == 1) {
            let mut p = minors[mask];
            for i in (0..l).filter(|&i| i != j && mask >> i & 1 == 1) {
                p *= g[i];
            }
            jac[(k, j)] += p;
        }
    }
    (e, jac)
}

fn newton<T: Scalar>(minors: &[T], tau: &[T], mut g: Vec<T>) -> Option<Vec<T>> {
    let l = g.len();
    let tiny = T::min_positive_value().sqrt();
    let scale: Vec<T> = tau.iter().map(|&t| T::one() / t.abs().max(tiny)).collect();
    let residual = |g: &[T]| {
        let (e, jac) = char_coeffs(minors, g);
        let f: Vec<T> = (0..l).map(|k| (e[k] - tau[k]) * scale[k]).collect();
        (f, jac.scale_rows(&scale))
    };
    let tol = T::tol(1e-14);
    let (mut f, mut jac) = residual(&g);
    for _ in 0..NEWTON_ITERATIONS {
        let norm = max_abs(&f);
        if norm <= tol {
            return Some(g);
        }
        let neg: Vec<T> = f.iter().map(|&x| -x).collect();
        let step = jac.solve(&neg).ok()?;
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..NEWTON_HALVINGS {
            let trial: Vec<T> = g.iter().zip(&step).map(|(&a, &d)| a + t * d).collect();
            let (tf, tj) = residual(&trial);
            if all_finite(&tf) && max_abs(&tf) < norm {
                g = trial;
                f = tf;
                jac = tj;
                accepted = true;
                break;
            }
            t *= T::lit(0.5);
        }
        if !accepted {
            return (norm <= T::tol(1e-12)).then_some(g);
        }
    }
    (max_abs(&f) <= T::tol(1e-12)).then_some(g)
}

fn eigen_match<T: Scalar>(b: &Matrix<T>, g: &[T], target: &[T]) -> bool {
    if g.iter().any(|&x| !x.is_finite() || x == T::zero()) {
        return false;
    }
    let m = b.scale_rows(g);
    let ev = match m.rows() {
        1 => vec![(m[(0, 0)], T::zero())],
        _ => match eigenvalues(&m) {
            Ok(v) => v,
            Err(_) => return false,
        },
    };
    let scale = max_abs(target);
    if ev.iter().any(|e| e.1.abs() > T::tol(EIGEN_MATCH_TOL) * scale) {
        return false;
    }
    let mut got: Vec<T> = ev.iter().map(|e| e.0).collect();
    let mut want = target.to_vec();
    got.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    want.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    got.iter()
        .zip(&want)
        .all(|(x, y)| (*x - *y).abs() <= T::tol(EIGEN_MATCH_TOL) * scale)
}

/// Deterministic Newton starting points: no correction, a uniform scale
/// matching the determinant, diagonal pairings in both orders, and
/// per-component perturbations of each.
fn starts<T: Scalar>(b: &Matrix<T>, target: &[T]) -> Vec<Vec<T>> {
    let l = b.rows();
    let mut base = vec![vec![T::one(); l]];
    let det_ratio = target.iter().fold(T::one(), |acc, &x| acc * x) / b.det();
    if det_ratio > T::zero() && det_ratio.is_finite() {
        base.push(vec![det_ratio.powf(T::one() / T::lit(l as f64)); l]);
    }
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&i, &j| {
        b[(i, i)]
            .abs()
            .partial_cmp(&b[(j, j)].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    for reversed in [false, true] {
        let mut g = vec![T::one(); l];
        for (rank, &i) in order.iter().enumerate() {
            let t = if reversed { target[l - 1 - rank] } else { target[rank] };
            let d = b[(i, i)];
            if d != T::zero() {
                g[i] = t / d;
            }
        }
        base.push(g);
    }
    let mut out = Vec::new();
    for g in base {
        out.push(g.clone());
        for i in 0..l {
            for f in [0.5, 2.0] {
                let mut h = g.clone();
                h[i] *= T::lit(f);
                out.push(h);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three() -> QuadraticSystem<f64> {
        QuadraticSystem::from_rows(
            &[vec![-2.0, -0.3, -0.1], vec![-0.2, -2.0, -0.1], vec![-0.1, -0.4, -2.0]],
            &[2.0, 2.5, 3.0],
        )
        .unwrap()
    }

    #[test]
    fn partial_takes_leading_block() {
        let p = partial(&three(), 2).unwrap();
        assert_eq!(p.a().to_rows(), vec![vec![-2.0, -0.3], vec![-0.2, -2.0]]);
        assert_eq!(p.b(), &[2.0, 2.5]);
        assert!(partial(&three(), 3).is_err());
        assert!(partial(&three(), 0).is_err());
    }

    #[test]
    fn delta_and_gamma_frozen() {
        let r = ReducedModel::new(&three(), 2).unwrap();
        let want_delta: [f64; 2] = [-0.123_925_041_714_799, -0.123_925_041_714_799];
        for (d, w) in r.delta.iter().zip(want_delta) {
            let d: f64 = *d;
            assert!((d - w).abs() < 1e-14, "{d}");
        }
        assert!((r.gamma[0] - 0.011_812_950_740_473_727).abs() < 1e-12);
        assert!((r.gamma[1] + 0.097_111_804_977_246_36).abs() < 1e-12);
        for i in 0..2 {
            assert!((r.c_hat[i] - r.c[i]).abs() < 1e-10);
            assert!((r.lambda_hat[i] - r.lambda[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn decoupled_needs_no_delta() {
        let s: QuadraticSystem<f64> = QuadraticSystem::from_rows(
            &[vec![-1.0, -0.5, 0.0], vec![-0.2, -2.0, 0.0], vec![0.0, 0.0, -3.0]],
            &[1.0, 2.0, 3.0],
        )
        .unwrap();
        let r = ReducedModel::new(&s, 2).unwrap();
        assert!(r.delta.iter().all(|d| d.abs() < 1e-14));
        // the slow pair already belongs to the block, so no transient correction either
        assert!(r.gamma.iter().all(|g| g.abs() < 1e-10), "{:?}", r.gamma);
    }

    #[test]
    fn scalar_gamma_closed_form() {
        let s: QuadraticSystem<f64> =
            QuadraticSystem::from_rows(&[vec![-1.0, -0.3], vec![-0.1, -1.0]], &[2.45, 1.7]).unwrap();
        let r = ReducedModel::new(&s, 1).unwrap();
        let g_star = r.lambda[0] / (r.c_hat[0] * -1.0);
        assert!((r.gamma_star[0] - g_star).abs() < 1e-12);
    }

    #[test]
    fn identity_correction_is_partial() {
        let sub = partial(&three(), 2).unwrap();
        let model = ReducedModel {
            keep: 2,
            a_sub: sub.a().to_rows(),
            b_sub: sub.b().to_vec(),
            delta: vec![0.0; 2],
            gamma: vec![0.0; 2],
            gamma_star: vec![1.0; 2],
            c_hat: vec![],
            lambda_hat: vec![],
            c: vec![],
            lambda: vec![],
        };
        assert_eq!(model.system().unwrap(), sub.without_x0());
    }

    #[test]
    fn independent_of_initial_condition() {
        let a = ReducedModel::new(&three().with_x0(vec![1.0, 1.0, 1.0]).unwrap(), 2).unwrap();
        let b = ReducedModel::new(&three().with_x0(vec![0.2, 3.0, 1.5]).unwrap(), 2).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn char_coeffs_match_symmetric_functions() {
        let b: Matrix<f64> = Matrix::from_rows(&[vec![-1.0, 0.3, 0.1], vec![0.2, -2.0, 0.5], vec![0.0, 0.4, -3.0]]).unwrap();
        let g: [f64; 3] = [1.3, 0.7, 1.1];
        let (e, jac) = char_coeffs(&principal_minors(&b), &g);
        let m = b.scale_rows(&g);
        let ev: Vec<f64> = eigenvalues(&m).unwrap().iter().map(|e| e.0).collect();
        let want = elementary_symmetric(&ev);
        for k in 0..3 {
            assert!((e[k] - want[k]).abs() < 1e-10);
        }
        let h = 1e-6;
        for j in 0..3 {
            let mut gp = g;
            gp[j] += h;
            let (ep, _) = char_coeffs(&principal_minors(&b), &gp);
            for k in 0..3 {
                assert!(((ep[k] - e[k]) / h - jac[(k, j)]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn delta_rejects_wrong_length() {
        assert!(correct_gamma(&three(), 2, &[0.0]).is_err());
        let d = correct_delta(&three(), 2).unwrap();
        let g = correct_gamma(&three(), 2, &d).unwrap();
        assert_eq!(g, ReducedModel::new(&three(), 2).unwrap().gamma);
    }
}
