//! Fixed-step RK4 reference integrator.

use serde::Serialize;

use crate::error::{Result, SpsError};
use crate::format::{csv_row, sig17};
use crate::model::QuadraticSystem;
use crate::scalar::{max_abs, Scalar};

/// States beyond this norm count as finite-time blow-up.
pub const DIVERGENCE_NORM: f64 = 1e12;
pub const DEFAULT_STEP: f64 = 1e-3;

/// Uniformly sampled numerical solution.
///
/// States are kept as offsets from an origin so that a trajectory computed
/// around the equilibrium keeps full relative precision as it decays.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory<T> {
    times: Vec<T>,
    origin: Vec<T>,
    offsets: Vec<Vec<T>>,
    step: T,
    est_error: T,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn step(&self) -> T {
        self.step
    }

    /// Max-norm difference against a half-step run.
    pub fn est_error(&self) -> T {
        self.est_error
    }

    pub fn origin(&self) -> &[T] {
        &self.origin
    }

    /// `x(tₖ) − origin`.
    pub fn offset(&self, k: usize) -> &[T] {
        &self.offsets[k]
    }

    pub fn state(&self, k: usize) -> Vec<T> {
        self.origin.iter().zip(&self.offsets[k]).map(|(&o, &y)| o + y).collect()
    }

    pub fn states(&self) -> Vec<Vec<T>> {
        (0..self.len()).map(|k| self.state(k)).collect()
    }

    /// `x(tₖ) − reference`, exact when `reference` is the origin.
    pub fn deviation(&self, k: usize, reference: &[T]) -> Vec<T> {
        if reference == self.origin.as_slice() {
            return self.offsets[k].clone();
        }
        self.origin
            .iter()
            .zip(&self.offsets[k])
            .zip(reference)
            .map(|((&o, &y), &r)| (o - r) + y)
            .collect()
    }

    pub fn last_state(&self) -> Vec<T> {
        self.state(self.len() - 1)
    }

    /// CSV with header `t,x1,…,xM`.
    pub fn to_csv(&self) -> String {
        let m = self.dim();
        let mut out = String::from("t");
        for i in 1..=m {
            out.push_str(&format!(",x{i}"));
        }
        out.push('\n');
        for k in 0..self.len() {
            csv_row(&mut out, &[sig17(self.times[k])], &self.state(k));
        }
        out
    }
}

fn check_inputs<T: Scalar>(system: &QuadraticSystem<T>, x0: &[T], t_end: T, step: T) -> Result<usize> {
    if x0.len() != system.dim() {
        return Err(SpsError::DimensionMismatch {
            what: "x0",
            expected: system.dim(),
            found: x0.len(),
        });
    }
    step_count(t_end, step)
}

/// Number of steps of size `step` covering `[0, t_end]`: the rounded ratio
/// when `t_end` is a multiple of `step` up to rounding, else its ceiling.
pub fn step_count<T: Scalar>(t_end: T, step: T) -> Result<usize> {
    if !(step > T::zero()) || !step.is_finite() {
        return Err(SpsError::InvalidArgument("step must be positive".into()));
    }
    if !(t_end > T::zero()) || !t_end.is_finite() {
        return Err(SpsError::InvalidArgument("t_end must be positive".into()));
    }
    let ratio = (t_end / step).to_f64().unwrap_or(f64::INFINITY);
    if ratio > 1e9 {
        return Err(SpsError::InvalidArgument(format!("{ratio:e} steps requested")));
    }
    // tolerate t_end being a multiple of step up to rounding
    let rounded = ratio.round();
    let n = if (ratio - rounded).abs() <= 1e-9 * rounded.max(1.0) {
        rounded
    } else {
        ratio.ceil()
    };
    Ok((n as usize).max(1))
}


/// RK4 for `ẏ = (o + y)∘(r₀ + A y)` with `r₀ = b + A o`.
struct Stepper<'a, T> {
    a: &'a crate::linalg::Matrix<T>,
    origin: &'a [T],
    r0: Vec<T>,
}

impl<T: Scalar> Stepper<'_, T> {
    fn rhs(&self, y: &[T], out: &mut [T]) {
        let m = y.len();
        for i in 0..m {
            let mut g = self.r0[i];
            for j in 0..m {
                g += self.a[(i, j)] * y[j];
            }
            out[i] = (self.origin[i] + y[i]) * g;
        }
    }

    fn advance(&self, y: &mut [T], h: T, scratch: &mut [Vec<T>; 5]) {
        let m = y.len();
        let half = h * T::lit(0.5);
        let [k1, k2, k3, k4, tmp] = scratch;
        self.rhs(y, k1);
        for i in 0..m {
            tmp[i] = y[i] + half * k1[i];
        }
        self.rhs(tmp, k2);
        for i in 0..m {
            tmp[i] = y[i] + half * k2[i];
        }
        self.rhs(tmp, k3);
        for i in 0..m {
            tmp[i] = y[i] + h * k3[i];
        }
        self.rhs(tmp, k4);
        let sixth = h / T::lit(6.0);
        for i in 0..m {
            y[i] += sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
        }
    }

    /// `n` steps of size `h`, recording every `stride`-th state.
    fn run(&self, y0: &[T], n: usize, h: T, stride: usize) -> Result<Vec<Vec<T>>> {
        let m = y0.len();
        let mut y = y0.to_vec();
        let mut scratch: [Vec<T>; 5] = std::array::from_fn(|_| vec![T::zero(); m]);
        let mut out = Vec::with_capacity(n / stride + 1);
        out.push(y.clone());
        let limit = T::lit(DIVERGENCE_NORM);
        for k in 1..=n {
            self.advance(&mut y, h, &mut scratch);
            let norm = self.origin.iter().zip(&y).fold(T::zero(), |acc, (&o, &v)| acc.max((o + v).abs()));
            if !(norm <= limit) {
                return Err(SpsError::Divergence {
                    t: (h * T::from_usize_lossy(k)).to_f64().unwrap_or(f64::NAN),
                    norm: norm.to_f64().unwrap_or(f64::INFINITY),
                });
            }
            if k % stride == 0 {
                out.push(y.clone());
            }
        }
        Ok(out)
    }
}

fn integrate_around<T: Scalar>(
    system: &QuadraticSystem<T>,
    origin: Vec<T>,
    r0: Vec<T>,
    x0: &[T],
    t_end: T,
    step: T,
) -> Result<Trajectory<T>> {
    let n = check_inputs(system, x0, t_end, step)?;
    let stepper = Stepper {
        a: system.a(),
        origin: &origin,
        r0,
    };
    let y0: Vec<T> = x0.iter().zip(&origin).map(|(&x, &o)| x - o).collect();
    let offsets = stepper.run(&y0, n, step, 1)?;
    let fine = stepper.run(&y0, 2 * n, step * T::lit(0.5), 2)?;
    let est_error = offsets
        .iter()
        .zip(&fine)
        .map(|(a, b)| a.iter().zip(b).fold(T::zero(), |m, (&u, &v)| m.max((u - v).abs())))
        .fold(T::zero(), T::max);
    let times = (0..=n).map(|k| step * T::from_usize_lossy(k)).collect();
    Ok(Trajectory {
        times,
        origin,
        offsets,
        step,
        est_error,
    })
}

/// Integrates `ẋ = diag(x)(b + Ax)` from `x0` over `[0, t_end]`.
pub fn integrate<T: Scalar>(system: &QuadraticSystem<T>, x0: &[T], t_end: T, step: T) -> Result<Trajectory<T>> {
    let m = system.dim();
    integrate_around(system, vec![T::zero(); m], system.b().to_vec(), x0, t_end, step)
}

/// Same flow written for `y = x − c` about an equilibrium `c`, taking
/// `b + Ac = 0` exactly: `ẏ = (c + y)∘(A y)`. Late, tiny deviations keep
/// their relative accuracy, which the tail-limit fit relies on.
pub fn integrate_deviation<T: Scalar>(
    system: &QuadraticSystem<T>,
    c: &[T],
    x0: &[T],
    t_end: T,
    step: T,
) -> Result<Trajectory<T>> {
    if c.len() != system.dim() {
        return Err(SpsError::DimensionMismatch {
            what: "equilibrium",
            expected: system.dim(),
            found: c.len(),
        });
    }
    integrate_around(system, c.to_vec(), vec![T::zero(); c.len()], x0, t_end, step)
}

/// Sup-norm distance between a trajectory and `f(t)` over samples with
/// `t ≥ from`.
pub fn sup_error<T: Scalar>(
    trajectory: &Trajectory<T>,
    from: T,
    mut f: impl FnMut(T) -> Result<Vec<T>>,
) -> Result<T> {
    let mut worst = T::zero();
    for k in 0..trajectory.len() {
        let t = trajectory.times[k];
        if t < from {
            continue;
        }
        let x = trajectory.state(k);
        let y = f(t)?;
        let d: Vec<T> = x.iter().zip(&y).map(|(&a, &b)| a - b).collect();
        worst = worst.max(max_abs(&d));
    }
    Ok(worst)
}
