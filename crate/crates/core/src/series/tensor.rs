use crate::error::{Result, SpsError};
use crate::format::csv_row;
use crate::linalg::Matrix;
use crate::model::{QuadraticSystem, TruncationSpec};
use crate::scalar::{max_abs, Scalar};
use crate::spectral::SpectralData;

use super::index::{enumerate_with_budget, Layout, MultiIndex, DEFAULT_MAX_ENTRIES};

/// A shift `n·λ` closer than this (relative) to an eigenvalue is resonant.
pub const RESONANCE_TOL: f64 = 1e-12;
/// Largest exponent `(n·λ)t` accepted by the evaluators.
pub const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    /// Cap on both admitted indices and dense storage slots.
    pub max_entries: u128,
    /// Keep stored magnitudes near one by moving a factor `e^{s|n|}` into
    /// [`CoefficientTensor::log_scale`]. Needed only at very high degree.
    pub renormalize: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            max_entries: DEFAULT_MAX_ENTRIES,
            renormalize: false,
        }
    }
}

/// Coefficients `αⁿ ∈ ℝ^M` for every admitted multi-index.
///
/// Stored densely on the box `[0, cap]^M`, one plane per state component,
/// plus a copy reversed along the last axis so convolutions run as forward
/// dot products. A stored value `v` represents `v · e^{s|n|}` where `s` is
/// [`log_scale`](Self::log_scale), zero unless built with renormalization.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTensor<T> {
    truncation: TruncationSpec,
    layout: Layout,
    indices: Vec<MultiIndex>,
    lambda: Vec<T>,
    anchors: Vec<usize>,
    free_params: Vec<T>,
    log_scale: T,
    planes: Vec<Vec<T>>,
    rplanes: Vec<Vec<T>>,
}

/// Anchor component of a kernel vector: the first one unless it is
/// (relatively) zero, then the largest in magnitude.
fn anchor_of<T: Scalar>(v: &[T]) -> usize {
    let mx = max_abs(v);
    if v[0].abs() > T::tol(1e-9) * mx {
        return 0;
    }
    let mut best = 0;
    for (k, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = k;
        }
    }
    best
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    const W: usize = 8;
    let mut acc = [T::zero(); W];
    let ca = a.chunks_exact(W);
    let cb = b.chunks_exact(W);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..W {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += *x * *y;
    }
    s
}

/// `(a0·r0, a1·r1, a0·r1 + a1·r0)` in one pass.
fn dot_pair<T: Scalar>(a0: &[T], a1: &[T], r0: &[T], r1: &[T]) -> (T, T, T) {
    const W: usize = 4;
    let mut d0 = [T::zero(); W];
    let mut d1 = [T::zero(); W];
    let mut x = [T::zero(); W];
    let len = a0.len();
    let (a0, a1, r0, r1) = (&a0[..len], &a1[..len], &r0[..len], &r1[..len]);
    let full = len - len % W;
    let mut k = 0;
    while k < full {
        for w in 0..W {
            let (p, q, u, v) = (a0[k + w], a1[k + w], r0[k + w], r1[k + w]);
            d0[w] += p * u;
            d1[w] += q * v;
            x[w] += p * v + q * u;
        }
        k += W;
    }
    let sum = |v: [T; W]| (v[0] + v[1]) + (v[2] + v[3]);
    let (mut s0, mut s1, mut sx) = (sum(d0), sum(d1), sum(x));
    for k in full..len {
        s0 += a0[k] * r0[k];
        s1 += a1[k] * r1[k];
        sx += a0[k] * r1[k] + a1[k] * r0[k];
    }
    (s0, s1, sx)
}

impl<T: Scalar> CoefficientTensor<T> {
    fn empty(truncation: TruncationSpec, m: usize, lambda: Vec<T>, budget: u128) -> Result<Self> {
        let indices = enumerate_with_budget(truncation, m, budget)?;
        let layout = Layout::new(truncation, m, budget)?;
        let planes = vec![vec![T::zero(); layout.len]; m];
        Ok(Self {
            truncation,
            rplanes: planes.clone(),
            planes,
            layout,
            indices,
            lambda,
            anchors: vec![0; m],
            free_params: vec![T::one(); m],
            log_scale: T::zero(),
        })
    }

    pub fn dim(&self) -> usize {
        self.lambda.len()
    }

    pub fn truncation(&self) -> TruncationSpec {
        self.truncation
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    /// Component used to normalize each first-order coefficient.
    pub fn anchors(&self) -> &[usize] {
        &self.anchors
    }

    /// First-order free parameters `p`; the anchor component of `α^{eᵢ}` is `pᵢ`.
    pub fn free_params(&self) -> &[T] {
        &self.free_params
    }

    pub fn log_scale(&self) -> T {
        self.log_scale
    }

    /// Admitted multi-indices in build order.
    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Equilibrium `α⁰ = c`.
    pub fn constant(&self) -> Vec<T> {
        self.planes.iter().map(|p| p[0]).collect()
    }

    #[inline]
    fn rev_offset(&self, n: &[u32], off: usize) -> usize {
        let last = *n.last().expect("non-empty index") as usize;
        off - last + (self.layout.side - 1 - last)
    }

    #[inline]
    fn scale_factor(&self, degree: u32) -> T {
        if self.log_scale == T::zero() {
            T::one()
        } else {
            (self.log_scale * T::lit(degree as f64)).exp()
        }
    }

    fn stored(&self, off: usize) -> Vec<T> {
        self.planes.iter().map(|p| p[off]).collect()
    }

    fn set(&mut self, n: &[u32], value: &[T]) {
        let off = self.layout.offset(n);
        let roff = self.rev_offset(n, off);
        for (i, &v) in value.iter().enumerate() {
            self.planes[i][off] = v;
            self.rplanes[i][roff] = v;
        }
    }

    /// Stored value times `e^{s|n|}` for each component, or `None` when
    /// `n` is outside the truncation.
    pub fn get(&self, n: &MultiIndex) -> Option<Vec<T>> {
        if n.dim() != self.dim() || !self.truncation.admits(n.components()) {
            return None;
        }
        let f = self.scale_factor(n.degree());
        Some(self.stored(self.layout.offset(n.components())).into_iter().map(|v| v * f).collect())
    }

    /// `ln|αᵢⁿ|` per component, `−∞` for zeros. Finite even where the
    /// values themselves would overflow.
    pub fn log_abs(&self, n: &MultiIndex) -> Option<Vec<T>> {
        if n.dim() != self.dim() || !self.truncation.admits(n.components()) {
            return None;
        }
        let shift = self.log_scale * T::lit(n.degree() as f64);
        let off = self.layout.offset(n.components());
        Some(self.planes.iter().map(|p| p[off].abs().ln() + shift).collect())
    }

    /// Like [`get`](Self::get) with the missing case as an error.
    pub fn entry(&self, n: &MultiIndex) -> Result<Vec<T>> {
        self.get(n).ok_or_else(|| SpsError::MissingCoefficient(n.components().to_vec()))
    }

    /// `(n, αⁿ)` pairs in build order.
    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, Vec<T>)> + '_ {
        self.indices.iter().map(move |n| {
            let v = self.get(n).expect("admitted index");
            (n, v)
        })
    }

    /// `αⁿ(p∘q) = αⁿ(p) Πᵢ qᵢ^{nᵢ}`: rescales every coefficient as if the
    /// tensor had been built with the free parameters multiplied by `q`.
    pub fn scale_free_parameters(&self, q: &[T]) -> Self {
        assert_eq!(q.len(), self.dim(), "parameter vector length");
        let mut out = self.clone();
        let pows = power_table(q, self.layout.side);
        for n in &self.indices {
            let f = monomial_from_table(&pows, n.components());
            let off = self.layout.offset(n.components());
            let roff = self.rev_offset(n.components(), off);
            for i in 0..self.dim() {
                out.planes[i][off] = self.planes[i][off] * f;
                out.rplanes[i][roff] = self.rplanes[i][roff] * f;
            }
        }
        for (p, &s) in out.free_params.iter_mut().zip(q) {
            *p = *p * s;
        }
        out
    }

    fn exponent_guard(&self, t: T) -> Result<T> {
        let limit = T::lit(MAX_EXPONENT).min(T::max_value().ln() - T::lit(2.0));
        let mut worst = T::neg_infinity();
        for n in &self.indices {
            let e = n.dot(&self.lambda) * t + self.log_scale * T::lit(n.degree() as f64);
            if !(e <= limit) {
                return Err(SpsError::Overflow {
                    exponent: e.to_f64().unwrap_or(f64::INFINITY),
                    t: t.to_f64().unwrap_or(f64::NAN),
                });
            }
            worst = worst.max(e);
        }
        Ok(worst)
    }

    fn accumulate(&self, t: T, skip_constant: bool, mut weight: impl FnMut(&MultiIndex) -> T) -> Result<Vec<T>> {
        self.exponent_guard(t)?;
        let mut x = vec![T::zero(); self.dim()];
        for n in &self.indices {
            if skip_constant && n.degree() == 0 {
                continue;
            }
            let w = weight(n);
            if w == T::zero() {
                continue;
            }
            let e = (n.dot(&self.lambda) * t + self.log_scale * T::lit(n.degree() as f64)).exp() * w;
            let off = self.layout.offset(n.components());
            for (xi, plane) in x.iter_mut().zip(&self.planes) {
                *xi += plane[off] * e;
            }
        }
        Ok(x)
    }

    /// Truncated series `Σₙ αⁿ e^{(n·λ)t}`.
    pub fn evaluate(&self, t: T) -> Result<Vec<T>> {
        self.accumulate(t, false, |_| T::one())
    }

    /// `x(t) − c`, summed without the constant term.
    pub fn evaluate_deviation(&self, t: T) -> Result<Vec<T>> {
        self.accumulate(t, true, |_| T::one())
    }

    /// Term-by-term time derivative `Σₙ (n·λ) αⁿ e^{(n·λ)t}`.
    pub fn evaluate_derivative(&self, t: T) -> Result<Vec<T>> {
        self.accumulate(t, true, |n| n.dot(&self.lambda))
    }

    /// Series at time `t` after scaling the free parameters by `q`, and its
    /// Jacobian with respect to `q`.
    pub fn evaluate_with_params(&self, q: &[T], t: T) -> Result<(Vec<T>, Matrix<T>)> {
        let m = self.dim();
        if q.len() != m {
            return Err(SpsError::DimensionMismatch {
                what: "free parameters",
                expected: m,
                found: q.len(),
            });
        }
        self.exponent_guard(t)?;
        let pows = power_table(q, self.layout.side + 1);
        let mut x = vec![T::zero(); m];
        let mut jac = Matrix::zeros(m, m);
        for n in &self.indices {
            let comps = n.components();
            let e = (n.dot(&self.lambda) * t + self.log_scale * T::lit(n.degree() as f64)).exp();
            let off = self.layout.offset(comps);
            let mono = monomial_from_table(&pows, comps);
            for i in 0..m {
                x[i] += self.planes[i][off] * mono * e;
            }
            for k in 0..m {
                if comps[k] == 0 {
                    continue;
                }
                // ∂/∂q_k of Π q^n = n_k q_k^{n_k−1} Π_{j≠k} q_j^{n_j}
                let mut d = T::lit(comps[k] as f64) * pows[k][comps[k] as usize - 1];
                for (j, &nj) in comps.iter().enumerate() {
                    if j != k {
                        d *= pows[j][nj as usize];
                    }
                }
                for i in 0..m {
                    jac[(i, k)] += self.planes[i][off] * d * e;
                }
            }
        }
        Ok((x, jac))
    }

    /// Coefficients as CSV: `n1..nM` then `alpha1..alphaM`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let m = self.dim();
        let mut out = String::new();
        let header: Vec<String> = (1..=m)
            .map(|i| format!("n{i}"))
            .chain((1..=m).map(|i| format!("alpha{i}")))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for (n, v) in self.iter() {
            let lead: Vec<String> = n.components().iter().map(|k| k.to_string()).collect();
            csv_row(&mut out, &lead, &v);
        }
        out
    }

    /// Convolution `Σ_{m ≤ n, m ∉ {0, n}} α_i^m α_j^{n−m}` in stored scale,
    /// for `n` inside the storage box. Fills the upper triangle of `s`.
    fn convolve_stored(&self, n: &[u32], s: &mut Matrix<T>) {
        let m = self.dim();
        let side = self.layout.side;
        let nl = n[m - 1] as usize;
        let lead = m - 1;
        let mut prefix = vec![0u32; lead];
        let mut mirror = vec![0u32; lead];
        let two = T::lit(2.0);
        for i in 0..m {
            for j in i..m {
                s[(i, j)] = T::zero();
            }
        }
        loop {
            for k in 0..lead {
                mirror[k] = n[k] - prefix[k];
            }
            // rows m and n - m contribute transposed products, so visit each pair once
            let order = prefix.cmp(&mirror);
            if order != std::cmp::Ordering::Greater {
                let pm = self.layout.offset(&prefix);
                let pr = self.layout.offset(&mirror);
                // exclude m = 0 and m = n exactly
                let lo = usize::from(prefix.iter().all(|&k| k == 0));
                let hi = if mirror.iter().all(|&k| k == 0) { nl } else { nl + 1 };
                if lo < hi {
                    let len = hi - lo;
                    let rstart = pr + side - 1 - nl + lo;
                    let a = |i: usize| &self.planes[i][pm + lo..pm + lo + len];
                    let r = |j: usize| &self.rplanes[j][rstart..rstart + len];
                    if order == std::cmp::Ordering::Equal {
                        for i in 0..m {
                            for j in i..m {
                                s[(i, j)] += dot(a(i), r(j));
                            }
                        }
                    } else if m == 2 {
                        let (d0, d1, x) = dot_pair(a(0), a(1), r(0), r(1));
                        s[(0, 0)] += two * d0;
                        s[(1, 1)] += two * d1;
                        s[(0, 1)] += x;
                    } else {
                        for i in 0..m {
                            s[(i, i)] += two * dot(a(i), r(i));
                            for j in i + 1..m {
                                s[(i, j)] += dot(a(i), r(j)) + dot(a(j), r(i));
                            }
                        }
                    }
                }
            }
            // odometer over the leading axes
            let mut k = lead;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                if prefix[k] < n[k] {
                    prefix[k] += 1;
                    for p in prefix.iter_mut().skip(k + 1) {
                        *p = 0;
                    }
                    break;
                }
            }
        }
    }

    fn rescale(&mut self, indices: &[MultiIndex], tau: T, through_degree: u32) {
        let factors: Vec<T> = (0..=through_degree).map(|d| (-tau * T::lit(d as f64)).exp()).collect();
        for n in indices {
            if n.degree() > through_degree {
                break;
            }
            let f = factors[n.degree() as usize];
            let off = self.layout.offset(n.components());
            let roff = self.rev_offset(n.components(), off);
            for i in 0..self.planes.len() {
                self.planes[i][off] *= f;
                self.rplanes[i][roff] *= f;
            }
        }
        self.log_scale += tau;
    }
}

fn power_table<T: Scalar>(q: &[T], len: usize) -> Vec<Vec<T>> {
    q.iter()
        .map(|&x| {
            let mut row = Vec::with_capacity(len);
            let mut acc = T::one();
            for _ in 0..len {
                row.push(acc);
                acc *= x;
            }
            row
        })
        .collect()
}

fn monomial_from_table<T: Scalar>(pows: &[Vec<T>], n: &[u32]) -> T {
    n.iter().zip(pows).fold(T::one(), |acc, (&k, row)| acc * row[k as usize])
}

/// Solves `((n·λ) I − J) α = rhs`, rejecting resonant shifts.
pub(crate) fn solve_shift<T: Scalar>(jacobian: &Matrix<T>, lambda: &[T], n: &MultiIndex, rhs: &[T]) -> Result<Vec<T>> {
    let shift = n.dot(lambda);
    let scale = shift.abs().max(lambda.iter().fold(T::zero(), |m, l| m.max(l.abs())));
    let tol = T::tol(RESONANCE_TOL) * scale;
    if lambda.iter().any(|&l| (shift - l).abs() <= tol) {
        return Err(SpsError::Resonance {
            index: n.components().to_vec(),
            shift: shift.to_f64().unwrap_or(f64::NAN),
        });
    }
    let m = lambda.len();
    let shifted = Matrix::from_fn(m, m, |i, j| {
        let d = if i == j { shift } else { T::zero() };
        d - jacobian[(i, j)]
    });
    shifted.solve(rhs).map_err(|_| SpsError::Resonance {
        index: n.components().to_vec(),
        shift: shift.to_f64().unwrap_or(f64::NAN),
    })
}

/// `sᵢ = (A S)ᵢᵢ` for symmetric `S` given by its upper triangle.
fn source<T: Scalar>(a: &Matrix<T>, s: &Matrix<T>) -> Vec<T> {
    let m = a.rows();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let sij = if i <= j { s[(i, j)] } else { s[(j, i)] };
                    a[(i, j)] * sij
                })
                .sum()
        })
        .collect()
}

fn check_dims<T: Scalar>(system: &QuadraticSystem<T>, spectral: &SpectralData<T>, params: &[T]) -> Result<()> {
    let m = system.dim();
    if spectral.dim() != m {
        return Err(SpsError::DimensionMismatch {
            what: "spectral data",
            expected: m,
            found: spectral.dim(),
        });
    }
    if params.len() != m {
        return Err(SpsError::DimensionMismatch {
            what: "free parameters",
            expected: m,
            found: params.len(),
        });
    }
    Ok(())
}

/// Unit-parameter coefficients (`p = 1`).
pub fn build_coefficients<T: Scalar>(
    system: &QuadraticSystem<T>,
    spectral: &SpectralData<T>,
    truncation: TruncationSpec,
) -> Result<CoefficientTensor<T>> {
    let ones = vec![T::one(); system.dim()];
    build_coefficients_with(system, spectral, truncation, &ones)
}

/// Coefficients for the free parameters `p`.
pub fn build_coefficients_with<T: Scalar>(
    system: &QuadraticSystem<T>,
    spectral: &SpectralData<T>,
    truncation: TruncationSpec,
    params: &[T],
) -> Result<CoefficientTensor<T>> {
    build_coefficients_opts(system, spectral, truncation, params, &BuildOptions::default())
}

pub fn build_coefficients_opts<T: Scalar>(
    system: &QuadraticSystem<T>,
    spectral: &SpectralData<T>,
    truncation: TruncationSpec,
    params: &[T],
    opts: &BuildOptions,
) -> Result<CoefficientTensor<T>> {
    build_impl(system, spectral, truncation, params, opts, false)
}

pub(crate) fn build_impl<T: Scalar>(
    system: &QuadraticSystem<T>,
    spectral: &SpectralData<T>,
    truncation: TruncationSpec,
    params: &[T],
    opts: &BuildOptions,
    reverse_shells: bool,
) -> Result<CoefficientTensor<T>> {
    check_dims(system, spectral, params)?;
    let m = system.dim();
    let mut tensor = CoefficientTensor::empty(truncation, m, spectral.lambda.clone(), opts.max_entries)?;
    tensor.free_params = params.to_vec();
    tensor.set(&vec![0; m], &spectral.c);

    let max_degree = truncation.max_degree(m) as u32;
    if max_degree >= 1 {
        for i in 0..m {
            let v = &spectral.kernels[i];
            let anchor = anchor_of(v);
            tensor.anchors[i] = anchor;
            let f = params[i] / v[anchor];
            let value: Vec<T> = v.iter().map(|&x| x * f).collect();
            tensor.set(MultiIndex::unit(m, i).components(), &value);
        }
    }

    let big = T::max_value().sqrt().sqrt();
    let small = big.recip();
    let mut s = Matrix::zeros(m, m);
    // indices are sorted by degree; walk them shell by shell
    let indices = std::mem::take(&mut tensor.indices);
    let mut start = indices.iter().position(|n| n.degree() >= 2).unwrap_or(indices.len());
    while start < indices.len() {
        let degree = indices[start].degree();
        let end = indices[start..]
            .iter()
            .position(|n| n.degree() != degree)
            .map_or(indices.len(), |k| start + k);
        let shell = &indices[start..end];
        let order: Vec<&MultiIndex> = if reverse_shells {
            shell.iter().rev().collect()
        } else {
            shell.iter().collect()
        };
        let mut shell_max = T::zero();
        for n in order {
            tensor.convolve_stored(n.components(), &mut s);
            let rhs = source(system.a(), &s);
            let alpha = solve_shift(&spectral.jacobian, &spectral.lambda, n, &rhs)?;
            shell_max = shell_max.max(max_abs(&alpha));
            tensor.set(n.components(), &alpha);
        }
        if opts.renormalize && shell_max.is_finite() && (shell_max > big || (shell_max > T::zero() && shell_max < small)) {
            tensor.rescale(&indices, shell_max.ln() / T::lit(degree as f64), degree);
        }
        start = end;
    }
    tensor.indices = indices;
    Ok(tensor)
}
