//! The scalar logistic equation `ẋ = r x (1 − x/k)`, whose series is a
//! geometric progression and whose convergence time is known exactly.

use serde::Serialize;

use crate::error::{Result, SpsError};
use crate::linalg::Matrix;
use crate::model::QuadraticSystem;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogisticParams<T> {
    pub r: T,
    pub k: T,
    pub x0: T,
}

impl<T: Scalar> LogisticParams<T> {
    pub fn new(r: T, k: T, x0: T) -> Result<Self> {
        for (name, v) in [("r", r), ("k", k), ("x0", x0)] {
            if !v.is_finite() || v <= T::zero() {
                return Err(SpsError::InvalidArgument(format!("{name} must be positive and finite")));
            }
        }
        Ok(Self { r, k, x0 })
    }

    /// `(k − x₀)/x₀`.
    fn shape(&self) -> T {
        (self.k - self.x0) / self.x0
    }

    pub fn closed_form(&self, t: T) -> T {
        self.k / (T::one() + self.shape() * (-self.r * t).exp())
    }

    /// `x(t) − k` without cancellation.
    pub fn deviation(&self, t: T) -> T {
        let e = self.shape() * (-self.r * t).exp();
        -self.k * e / (T::one() + e)
    }

    /// `α₁ = k(x₀ − k)/x₀`.
    pub fn alpha1(&self) -> T {
        self.k * (self.x0 - self.k) / self.x0
    }

    /// `[k, α₁, α₁²/k, …, α₁^N/k^{N−1}]`.
    pub fn series_coefficients(&self, n: usize) -> Vec<T> {
        let ratio = self.alpha1() / self.k;
        let mut out = Vec::with_capacity(n + 1);
        out.push(self.k);
        let mut a = self.alpha1();
        for _ in 1..=n {
            out.push(a);
            a *= ratio;
        }
        out
    }

    /// Partial sum `Σₙ αₙ e^{−r n t}` through degree `n`.
    pub fn series_value(&self, n: usize, t: T) -> T {
        let e = (-self.r * t).exp();
        // Horner in e
        self.series_coefficients(n).iter().rev().fold(T::zero(), |acc, &a| acc * e + a)
    }

    /// `(1/r) ln|1 − k/x₀|`; negative infinity at `x₀ = k`.
    pub fn t0_unclamped(&self) -> T {
        (T::one() - self.k / self.x0).abs().ln() / self.r
    }

    /// Convergence time clamped at zero.
    pub fn t0_exact(&self) -> T {
        self.t0_unclamped().max(T::zero())
    }

    /// The one-variable quadratic system `A = [[−r/k]]`, `b = [r]`.
    pub fn as_system(&self) -> QuadraticSystem<T> {
        let a = Matrix::from_diagonal(&[-self.r / self.k]);
        QuadraticSystem::new(a, vec![self.r], Some(vec![self.x0])).expect("positive parameters give a valid system")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(r: f64, k: f64, x0: f64) -> LogisticParams<f64> {
        LogisticParams::new(r, k, x0).unwrap()
    }

    #[test]
    fn closed_form_values() {
        let l = p(1.0, 1.0, 0.75);
        assert!((l.closed_form(1.0) - 0.890_769_1).abs() < 1e-6);
        assert_eq!(p(2.0, 3.0, 3.0).closed_form(7.0), 3.0);
        assert!((l.closed_form(60.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn geometric_coefficients() {
        let a = p(1.0, 1.0, 0.75).series_coefficients(3);
        let want = [1.0, -1.0 / 3.0, 1.0 / 9.0, -1.0 / 27.0];
        for (x, y) in a.iter().zip(want) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(p(1.0, 2.0, 2.0).series_coefficients(5)[1..].iter().all(|&x| x == 0.0));
        let l = p(0.7, 2.0, 0.9);
        let c = l.series_coefficients(10);
        for w in c[1..].windows(2) {
            assert!((w[1] / w[0] - l.alpha1() / l.k).abs() < 1e-12);
        }
    }

    #[test]
    fn convergence_time() {
        assert_eq!(p(1.0, 1.0, 0.5).t0_exact(), 0.0);
        assert_eq!(p(1.0, 1.0, 0.75).t0_exact(), 0.0);
        assert!(p(1.0, 1.0, 0.75).t0_unclamped() < 0.0);
        assert!((p(2.0, 1.0, 0.2).t0_exact() - 0.5 * 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn series_matches_closed_form_past_t0() {
        let l = p(2.0, 1.0, 0.2);
        for i in 0..50 {
            let t = l.t0_exact() + 0.1 + 0.2 * i as f64;
            assert!((l.series_value(400, t) - l.closed_form(t)).abs() <= 1e-10);
        }
        let l = p(1.0, 1.0, 0.75);
        for i in 0..=100 {
            let t = 0.1 * i as f64;
            assert!((l.series_value(50, t) - l.closed_form(t)).abs() <= 1e-10);
        }
    }

    #[test]
    fn tail_identity() {
        let l = p(1.5, 2.0, 0.5);
        let t = 30.0 / l.r;
        assert!((l.deviation(t) * (l.r * t).exp() - l.alpha1()).abs() < 1e-8 * l.alpha1().abs());
        assert!((l.deviation(1.0) - (l.closed_form(1.0) - l.k)).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(LogisticParams::new(1.0, 0.0, 1.0).is_err());
        assert!(LogisticParams::new(1.0, 1.0, -1.0).is_err());
        assert!(LogisticParams::new(f64::NAN, 1.0, 1.0).is_err());
    }
}
