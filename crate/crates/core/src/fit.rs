//! Fixing the free parameters `p` from an initial condition.

use serde::Serialize;

use crate::error::{Result, SpsError};
use crate::linalg::Matrix;
use crate::model::{QuadraticSystem, TruncationSpec};
use crate::oracle::Trajectory;
use crate::scalar::{max_abs, Scalar};
use crate::series::{build_coefficients, CoefficientTensor, MultiIndex};
use crate::spectral::SpectralData;

pub const NEWTON_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 100;
pub const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    SumConstraint,
    TailLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult<T> {
    pub p: Vec<T>,
    pub method: FitMethod,
    /// Max equation misfit (sum) or max relative drift over the windows (tail).
    pub residual: T,
    pub t_ref: T,
    pub warnings: Vec<String>,
}

/// Solves `Σₙ αⁿ(p) e^{(n·λ) t_ref} = x_ref` for `p` by damped Newton.
///
/// The stored coefficients are taken as the base point, so a unit tensor
/// yields `p` directly.
pub fn fit_sum<T: Scalar>(coeffs: &CoefficientTensor<T>, x_ref: &[T], t_ref: T) -> Result<FitResult<T>> {
    let m = coeffs.dim();
    if x_ref.len() != m {
        return Err(SpsError::DimensionMismatch {
            what: "reference state",
            expected: m,
            found: x_ref.len(),
        });
    }
    let tol = T::lit(NEWTON_TOL).max(T::epsilon() * T::lit(64.0) * max_abs(x_ref).max(T::one()));
    let misfit = |q: &[T]| -> Result<(Vec<T>, Matrix<T>, T)> {
        let (x, j) = coeffs.evaluate_with_params(q, t_ref)?;
        let f: Vec<T> = x.iter().zip(x_ref).map(|(&a, &b)| a - b).collect();
        let r = max_abs(&f);
        Ok((f, j, if r.is_finite() { r } else { T::infinity() }))
    };

    let mut q = linear_guess(coeffs, x_ref, t_ref)?;
    let (mut f, mut jac, mut r) = misfit(&q)?;
    let mut iteration = 0;
    while r > tol {
        if iteration == MAX_ITERATIONS {
            return Err(SpsError::NewtonDiverged {
                iterations: iteration,
                residual: r.to_f64().unwrap_or(f64::INFINITY),
            });
        }
        iteration += 1;
        let rhs: Vec<T> = f.iter().map(|&v| -v).collect();
        let d = jac.solve(&rhs).map_err(|_| SpsError::SingularJacobian { iteration })?;
        if !d.iter().all(|v| v.is_finite()) {
            return Err(SpsError::SingularJacobian { iteration });
        }
        let mut scale = T::one();
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<T> = q.iter().zip(&d).map(|(&a, &b)| a + scale * b).collect();
            if let Ok(next) = misfit(&trial) {
                if next.2 < r {
                    accepted = Some((trial, next));
                    break;
                }
            }
            scale = scale * T::lit(0.5);
        }
        match accepted {
            Some((trial, next)) => {
                q = trial;
                (f, jac, r) = next;
            }
            None => {
                return Err(SpsError::NewtonDiverged {
                    iterations: iteration,
                    residual: r.to_f64().unwrap_or(f64::INFINITY),
                })
            }
        }
    }
    let p = q.iter().zip(coeffs.free_params()).map(|(&a, &b)| a * b).collect();
    Ok(FitResult {
        p,
        method: FitMethod::SumConstraint,
        residual: r,
        t_ref,
        warnings: Vec::new(),
    })
}

/// Linearized solution: project `x_ref − c` onto the first-order
/// coefficients and undo their decay to `t_ref`.
fn linear_guess<T: Scalar>(coeffs: &CoefficientTensor<T>, x_ref: &[T], t_ref: T) -> Result<Vec<T>> {
    let m = coeffs.dim();
    let c = coeffs.constant();
    if coeffs.truncation().max_degree(m) == 0 {
        return Ok(vec![T::zero(); m]);
    }
    let cols: Vec<Vec<T>> = (0..m).map(|i| coeffs.entry(&MultiIndex::unit(m, i))).collect::<Result<_>>()?;
    let v = Matrix::from_fn(m, m, |i, j| cols[j][i]);
    let rhs: Vec<T> = x_ref.iter().zip(&c).map(|(&x, &ci)| x - ci).collect();
    let proj = v.solve(&rhs).map_err(|_| SpsError::SingularJacobian { iteration: 0 })?;
    Ok(proj
        .iter()
        .zip(coeffs.lambda())
        .map(|(&a, &l)| a / (l * t_ref).exp())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailOptions {
    /// Trailing fraction of each mode's resolvable span used for averaging.
    pub window: f64,
    /// Largest accepted `(max − min)/|mean|` over a window.
    pub drift_tolerance: f64,
    /// A mode is resolvable while its deflated signal exceeds this
    /// fraction of the largest deviation.
    pub resolve_ratio: f64,
    /// Total degree of the series used to deflate the other modes.
    pub deflation_degree: u32,
    pub max_passes: usize,
}

impl Default for TailOptions {
    fn default() -> Self {
        Self {
            window: 0.25,
            drift_tolerance: 0.01,
            resolve_ratio: 1e-6,
            deflation_degree: 16,
            max_passes: 200,
        }
    }
}

struct Window {
    samples: Vec<usize>,
}

/// Estimates `p` from limits at infinity: `pₖ = lim (x_a(t) − c_a − …) e^{−λₖ t}`
/// read off component `a` = anchor of mode `k`.
///
/// A first pass deflates sequentially, removing every series term built
/// from already-fitted modes. Later passes remove all series terms except
/// the mode's own first-order one, iterating to a fixed point.
pub fn fit_tail_limits<T: Scalar>(
    trajectory: &Trajectory<T>,
    system: &QuadraticSystem<T>,
    spectral: &SpectralData<T>,
    opts: &TailOptions,
) -> Result<FitResult<T>> {
    let m = system.dim();
    if trajectory.dim() != m {
        return Err(SpsError::DimensionMismatch {
            what: "trajectory",
            expected: m,
            found: trajectory.dim(),
        });
    }
    if trajectory.len() < 8 {
        return Err(SpsError::InvalidArgument("trajectory too short for a tail fit".into()));
    }
    let unit = build_coefficients(system, spectral, TruncationSpec::TotalDegree(opts.deflation_degree.max(1)))?;
    let c = &spectral.c;
    let lambda = &spectral.lambda;
    let anchors = unit.anchors().to_vec();
    let devs: Vec<Vec<T>> = (0..trajectory.len()).map(|k| trajectory.deviation(k, c)).collect();
    let times = trajectory.times();
    let scale = devs.iter().fold(T::zero(), |acc, y| acc.max(max_abs(y)));

    let mut p = vec![T::zero(); m];
    if scale == T::zero() {
        return Ok(FitResult {
            p,
            method: FitMethod::TailLimit,
            residual: T::zero(),
            t_ref: times[0],
            warnings: Vec::new(),
        });
    }

    // deflated signal for mode k: anchor component minus the selected terms
    let signal = |k: usize, p: &[T], keep: &dyn Fn(&MultiIndex) -> bool, idx: usize| -> T {
        let t = times[idx];
        let a = anchors[k];
        let mut r = devs[idx][a];
        for (n, v) in unit.iter() {
            if n.degree() == 0 || !keep(n) {
                continue;
            }
            r -= v[a] * n.monomial(p) * (n.dot(lambda) * t).exp();
        }
        r
    };

    let threshold = T::lit(opts.resolve_ratio) * scale;
    let mut windows: Vec<Option<Window>> = Vec::with_capacity(m);
    for k in 0..m {
        let fitted = |n: &MultiIndex| n.components().iter().enumerate().all(|(j, &nj)| nj == 0 || j < k);
        let r: Vec<T> = (0..times.len()).map(|i| signal(k, &p, &fitted, i)).collect();
        let window = pick_window(times, &r, threshold, opts.window);
        p[k] = match &window {
            Some(w) => limit_stats(w, times, &r, lambda[k]).0,
            None => T::zero(),
        };
        windows.push(window);
    }

    // refinement works on the windows only; tabulate e^{(n·λ)t} once
    let terms: Vec<(&MultiIndex, Vec<T>)> = unit.iter().filter(|(n, _)| n.degree() > 0).collect();
    let tables: Vec<Option<Vec<T>>> = windows
        .iter()
        .map(|w| {
            w.as_ref().map(|w| {
                w.samples
                    .iter()
                    .flat_map(|&i| terms.iter().map(move |(n, _)| (n.dot(lambda) * times[i]).exp()))
                    .collect()
            })
        })
        .collect();
    let mut drift = T::zero();
    let mut worst = 0;
    let mut r = Vec::new();
    for pass in 0..opts.max_passes {
        let mut next = p.clone();
        drift = T::zero();
        for k in 0..m {
            let (Some(w), Some(table)) = (&windows[k], &tables[k]) else { continue };
            let a = anchors[k];
            let weights: Vec<T> = terms
                .iter()
                .map(|(n, v)| if n.basis_axis() == Some(k) { T::zero() } else { v[a] * n.monomial(&p) })
                .collect();
            r.clear();
            for (s, &i) in w.samples.iter().enumerate() {
                let row = &table[s * terms.len()..(s + 1) * terms.len()];
                let fit: T = row.iter().zip(&weights).map(|(&e, &c)| e * c).sum();
                r.push(devs[i][a] - fit);
            }
            let ts: Vec<T> = w.samples.iter().map(|&i| times[i]).collect();
            let local = Window {
                samples: (0..r.len()).collect(),
            };
            let (mean, spread) = limit_stats(&local, &ts, &r, lambda[k]);
            next[k] = mean;
            if !(spread <= drift) {
                drift = spread;
                worst = k;
            }
        }
        let change = next
            .iter()
            .zip(&p)
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs() / a.abs().max(T::min_positive_value())));
        p = next;
        if pass > 0 && change <= T::tol(1e-13) {
            break;
        }
    }

    let tolerance = T::lit(opts.drift_tolerance);
    if drift > tolerance {
        return Err(SpsError::TailDrift {
            mode: worst + 1,
            drift: drift.to_f64().unwrap_or(f64::INFINITY),
            tolerance: opts.drift_tolerance,
        });
    }
    Ok(FitResult {
        p,
        method: FitMethod::TailLimit,
        residual: drift,
        t_ref: times[0],
        warnings: Vec::new(),
    })
}

/// Trailing fraction of `[t₀, T]`, `T` the last time `|r| ≥ threshold`.
fn pick_window<T: Scalar>(times: &[T], r: &[T], threshold: T, fraction: f64) -> Option<Window> {
    let last = r.iter().rposition(|v| v.abs() >= threshold)?;
    let t_end = times[last];
    let t_start = t_end - T::lit(fraction) * (t_end - times[0]);
    let samples: Vec<usize> = (0..=last).filter(|&i| times[i] >= t_start).collect();
    if samples.len() < 4 {
        return None;
    }
    Some(Window { samples })
}

/// Mean of `r(t) e^{−λt}` over the window and its relative spread.
fn limit_stats<T: Scalar>(w: &Window, times: &[T], r: &[T], lambda: T) -> (T, T) {
    let g: Vec<T> = w.samples.iter().map(|&i| r[i] * (-lambda * times[i]).exp()).collect();
    let mean = g.iter().copied().sum::<T>() / T::from_usize_lossy(g.len());
    let (lo, hi) = g.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let spread = if mean == T::zero() {
        if hi == lo {
            T::zero()
        } else {
            T::infinity()
        }
    } else {
        (hi - lo) / mean.abs()
    };
    (mean, spread)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::integrate_deviation;
    use crate::series::build_coefficients;
    use approx::assert_abs_diff_eq;

    fn weak() -> QuadraticSystem<f64> {
        QuadraticSystem::from_rows(&[vec![-1.0, -0.3], vec![-0.1, -1.0]], &[2.45, 1.7]).unwrap()
    }

    fn coupled() -> QuadraticSystem<f64> {
        QuadraticSystem::from_rows(&[vec![-2.0, -1.0], vec![-1.0, -1.0]], &[4.0, 3.0]).unwrap()
    }

    fn unit(s: &QuadraticSystem<f64>, t: TruncationSpec) -> CoefficientTensor<f64> {
        build_coefficients(s, &SpectralData::analyze(s).unwrap(), t).unwrap()
    }

    #[test]
    fn equilibrium_gives_zero() {
        let c = unit(&weak(), TruncationSpec::PerIndex(3));
        let fit = fit_sum(&c, &[2.0, 1.5], 0.7).unwrap();
        assert!(fit.p.iter().all(|v| v.abs() < 1e-12));
        assert_eq!(fit.method, FitMethod::SumConstraint);
    }

    #[test]
    fn decoupled_logistic_pair() {
        let r2 = 2f64.sqrt();
        let s = QuadraticSystem::from_rows(&[vec![-1.0, 0.0], vec![0.0, -r2]], &[1.0, r2]).unwrap();
        let c = unit(&s, TruncationSpec::PerIndex(30));
        let fit = fit_sum(&c, &[0.75, 0.75], 0.0).unwrap();
        assert_abs_diff_eq!(fit.p[0], -1.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(fit.p[1], -1.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn fitted_series_hits_reference() {
        let c = unit(&weak(), TruncationSpec::PerIndex(3));
        let fit = fit_sum(&c, &[3.0, 3.0], 0.0).unwrap();
        assert!(fit.residual <= 1e-10);
        let x = c.scale_free_parameters(&fit.p).evaluate(0.0).unwrap();
        assert_abs_diff_eq!(x[0], 3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(x[1], 3.0, epsilon = 1e-8);
    }

    #[test]
    fn reparameterization_covariance() {
        let c = unit(&weak(), TruncationSpec::PerIndex(3));
        let p = fit_sum(&c, &[3.0, 3.0], 0.0).unwrap().p;
        let dt = 0.8;
        let moved = c.scale_free_parameters(&p).evaluate(dt).unwrap();
        let q = fit_sum(&c, &moved, 0.0).unwrap().p;
        for i in 0..2 {
            let expected = p[i] * (c.lambda()[i] * dt).exp();
            assert!((q[i] - expected).abs() <= 1e-6 * expected.abs());
        }
        let same = fit_sum(&c, &moved, dt).unwrap().p;
        for i in 0..2 {
            assert!((same[i] - p[i]).abs() <= 1e-6 * p[i].abs());
        }
    }

    #[test]
    fn newton_failure_is_reported() {
        // logistic at cap 2: x = 1 + p + p² never drops below 3/4
        let s = QuadraticSystem::from_rows(&[vec![-1.0]], &[1.0]).unwrap();
        let c = unit(&s, TruncationSpec::PerIndex(2));
        let err = fit_sum(&c, &[0.0], 0.0).unwrap_err();
        assert!(matches!(err, SpsError::NewtonDiverged { .. } | SpsError::SingularJacobian { .. }));
    }

    #[test]
    fn tail_of_equilibrium_is_zero() {
        let s = weak();
        let sp = SpectralData::analyze(&s).unwrap();
        let tr = integrate_deviation(&s, &sp.c, &sp.c.clone(), 5.0, 1e-2).unwrap();
        let fit = fit_tail_limits(&tr, &s, &sp, &TailOptions::default()).unwrap();
        assert_eq!(fit.p, vec![0.0, 0.0]);
    }

    #[test]
    fn tail_agrees_with_sum() {
        for (s, x0) in [(weak(), [3.0, 3.0]), (coupled(), [3.0, 1.0])] {
            let sp = SpectralData::analyze(&s).unwrap();
            let tr = integrate_deviation(&s, &sp.c, &x0, 40.0, 1e-3).unwrap();
            let tail = fit_tail_limits(&tr, &s, &sp, &TailOptions::default()).unwrap();
            let c = build_coefficients(&s, &sp, TruncationSpec::TotalDegree(16)).unwrap();
            let k = (2.0 / 1e-3) as usize;
            let sum = fit_sum(&c, &tr.state(k), tr.times()[k]).unwrap();
            for i in 0..2 {
                assert!((tail.p[i] - sum.p[i]).abs() <= 1e-3, "{:?} vs {:?}", tail.p, sum.p);
            }
            assert!(tail.residual <= 0.01);
        }
    }
}
