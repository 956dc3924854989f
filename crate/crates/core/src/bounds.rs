//! Constructive convergence certificate: a time `t₀` past which the
//! series provably converges, from a coefficient bound
//! `|αᵢⁿ| ≤ K^{|n|} / Πⱼ(nⱼ+1)`.

use serde::Serialize;

use crate::error::{Result, SpsError};
use crate::linalg::Matrix;
use crate::model::{binomial, QuadraticSystem, TruncationSpec};
use crate::scalar::Scalar;
use crate::series::{build_coefficients_opts, BuildOptions, CoefficientTensor, DEFAULT_MAX_ENTRIES};
use crate::spectral::SpectralData;

pub const DEFAULT_DELTA: f64 = 0.5;
pub const DELTA_GRID: [f64; 4] = [0.3, 0.5, 0.7, 0.9];
/// Multiply-adds allowed for the degree-`N₂` build.
pub const DEFAULT_MAX_WORK: f64 = 1.2e11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateOptions {
    /// Norm threshold `δ ∈ (0, 1)`.
    pub delta: f64,
    /// Dense storage budget for the build, in slots.
    pub max_entries: u128,
    /// Convolution work budget for the build, in multiply-adds.
    pub max_work: f64,
}

impl Default for CertificateOptions {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            max_entries: DEFAULT_MAX_ENTRIES,
            max_work: DEFAULT_MAX_WORK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceCertificate<T> {
    pub n0: u64,
    pub n1: u64,
    pub n2: u64,
    /// Bound over the fitted parameters when supplied, else unit ones.
    pub k: T,
    pub t0: T,
    /// Same bound for unit free parameters.
    pub k_unit: T,
    pub t0_unit: T,
    pub delta: T,
    pub opnorm_a: T,
    pub opnorm_j: T,
    /// `1/(1−δ)`, the bound on `‖(I − J/(n·λ))⁻¹‖` for `|n| ≥ N₀`.
    pub opnorm_inverse_bound: T,
    pub lambda1: T,
    pub free_params: Vec<T>,
    /// Highest total degree actually scanned for `K`.
    pub degree_scanned: u64,
    /// Set when the budgets stopped the scan short of `N₂`.
    pub partial: bool,
}

impl<T: Scalar> ConvergenceCertificate<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(SpsError::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")))
    }
}

fn saturating_ceil(x: f64) -> u64 {
    if !x.is_finite() || x >= u64::MAX as f64 {
        u64::MAX
    } else {
        (x.ceil() as u64).max(1)
    }
}

/// `N₀ = ⌈‖J‖ / (δ|λ₁|)⌉`.
pub fn compute_n0<T: Scalar>(jacobian: &Matrix<T>, lambda1: T, delta: f64) -> u64 {
    n0_from_norm(jacobian.spectral_norm(), lambda1, delta)
}

fn n0_from_norm<T: Scalar>(norm_j: T, lambda1: T, delta: f64) -> u64 {
    let x = norm_j.to_f64().unwrap_or(f64::INFINITY) / (delta * lambda1.abs().to_f64().unwrap_or(0.0));
    // guard against 4.000000000000001 from rounding
    let r = x.round();
    if (x - r).abs() <= 1e-12 * r.max(1.0) {
        (r as u64).max(1)
    } else {
        saturating_ceil(x)
    }
}

/// Smallest `N` from which on `2^M·M·(ln(N+1)+1)^M·‖A‖ / (N|λ₁|) < 1 − δ`.
///
/// The left side is not monotone for small `N` when `M` is large, so the
/// answer is the start of the final run of `N` satisfying it.
pub fn compute_n1(opnorm_a: f64, lambda1: f64, m: usize, delta: f64) -> u64 {
    let mf = m as f64;
    let coef = 2f64.powi(m as i32) * mf * opnorm_a / lambda1.abs();
    let holds = |n: u64| {
        let nf = n as f64;
        coef * ((nf + 1.0).ln() + 1.0).powi(m as i32) / nf < 1.0 - delta
    };
    if !(coef.is_finite()) {
        return u64::MAX;
    }
    if coef <= 0.0 {
        return 1;
    }
    // ln f has derivative M/((N+1)L) − 1/N with L = ln(N+1)+1; find where
    // it turns negative for good (g(N) = M·N − (N+1)L is concave).
    let g = |n: f64| mf * n - (n + 1.0) * ((n + 1.0).ln() + 1.0);
    let mut b = 0u64;
    let mut n = 1u64;
    loop {
        let (cur, nxt) = (g(n as f64), g(n as f64 + 1.0));
        if cur >= 0.0 {
            b = n;
        }
        if cur < 0.0 && nxt < cur {
            break;
        }
        n += 1;
    }
    // decreasing past b: bracket then bisect
    let mut lo = b + 1;
    let mut hi = lo;
    while !holds(hi) {
        lo = hi;
        if hi > u64::MAX / 4 {
            return u64::MAX;
        }
        hi *= 2;
    }
    if holds(lo) {
        hi = lo;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut first = hi;
    while first > 1 && holds(first - 1) {
        first -= 1;
    }
    first
}

/// Largest-degree profile: entry `d` is `max ln((Π(nⱼ+1)|αᵢⁿ|)^{1/d})` over
/// indices of total degree `d`, with `αⁿ` rescaled by `Π|pⱼ|^{nⱼ}`.
fn degree_profile<T: Scalar>(coeffs: &CoefficientTensor<T>, log_p: &[T], max_degree: u32) -> Vec<T> {
    let mut prof = vec![T::neg_infinity(); max_degree as usize + 1];
    for n in coeffs.indices() {
        let d = n.degree();
        if d == 0 || d > max_degree {
            continue;
        }
        let logs = coeffs.log_abs(n).expect("admitted index");
        let extra: T = n
            .components()
            .iter()
            .zip(log_p)
            .filter(|(&k, _)| k > 0)
            .map(|(&k, &l)| T::lit(k as f64) * l)
            .sum();
        let w = n.weight::<T>().ln();
        let best = logs.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        let v = (w + best + extra) / T::lit(d as f64);
        if v > prof[d as usize] {
            prof[d as usize] = v;
        }
    }
    prof
}

fn k_from_profile<T: Scalar>(prof: &[T], n2: u64) -> T {
    let upto = (n2 as usize).min(prof.len() - 1);
    let best = prof[1..=upto].iter().fold(T::neg_infinity(), |a, &b| a.max(b));
    best.exp()
}

/// `K = max over i and 1 ≤ |n| ≤ N₂ of (Πⱼ(nⱼ+1)|αᵢⁿ|)^{1/|n|}`.
pub fn compute_k<T: Scalar>(coeffs: &CoefficientTensor<T>, n2: u64) -> Result<T> {
    let m = coeffs.dim();
    let covered = match coeffs.truncation() {
        TruncationSpec::TotalDegree(n) | TruncationSpec::PerIndex(n) => n as u64,
    };
    if covered < n2 {
        let mut missing = vec![0u32; m];
        missing[0] = u32::try_from(n2).unwrap_or(u32::MAX);
        return Err(SpsError::MissingCoefficient(missing));
    }
    if n2 == 0 {
        return Ok(T::zero());
    }
    let prof = degree_profile(coeffs, &vec![T::zero(); m], n2 as u32);
    Ok(k_from_profile(&prof, n2))
}

fn t0_of<T: Scalar>(k: T, lambda1: T) -> T {
    if k > T::one() {
        k.ln() / lambda1.abs()
    } else {
        T::zero()
    }
}

/// Highest total degree whose build fits both budgets.
fn feasible_degree(m: usize, want: u64, opts: &CertificateOptions) -> u64 {
    let pairs = (m * (m + 1) / 2) as f64;
    let fits = |d: u64| {
        let entries = (d as u128 + 1).checked_pow(m as u32).unwrap_or(u128::MAX);
        let work = binomial(d as u128 + 2 * m as u128, 2 * m as u128) as f64 * pairs;
        entries <= opts.max_entries && work <= opts.max_work
    };
    if fits(want) {
        return want;
    }
    let (mut lo, mut hi) = (0u64, want);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Certificate for each `δ` in `deltas`, sharing one build to the largest
/// feasible degree. `params` are the fitted free parameters, if any.
pub fn certificates_for<T: Scalar>(
    system: &QuadraticSystem<T>,
    spectral: &SpectralData<T>,
    params: Option<&[T]>,
    deltas: &[f64],
    opts: &CertificateOptions,
) -> Result<Vec<ConvergenceCertificate<T>>> {
    let m = system.dim();
    if let Some(p) = params {
        if p.len() != m {
            return Err(SpsError::DimensionMismatch {
                what: "free parameters",
                expected: m,
                found: p.len(),
            });
        }
    }
    for &d in deltas {
        check_delta(d)?;
    }
    let lambda1 = spectral.lambda1();
    let opnorm_a = system.a().spectral_norm();
    let opnorm_j = spectral.jacobian.spectral_norm();
    let l1 = lambda1.to_f64().unwrap_or(f64::NAN);
    let a64 = opnorm_a.to_f64().unwrap_or(f64::INFINITY);
    let ns: Vec<(u64, u64, u64)> = deltas
        .iter()
        .map(|&d| {
            let n0 = n0_from_norm(opnorm_j, lambda1, d);
            let n1 = compute_n1(a64, l1, m, d);
            (n0, n1, n0.max(n1))
        })
        .collect();
    let want = ns.iter().map(|t| t.2).max().unwrap_or(1);
    let degree = feasible_degree(m, want, opts).min(u32::MAX as u64);

    let build = BuildOptions {
        max_entries: opts.max_entries,
        renormalize: true,
    };
    let unit = build_coefficients_opts(
        system,
        spectral,
        TruncationSpec::TotalDegree(degree as u32),
        &vec![T::one(); m],
        &build,
    )?;
    let zero_logs = vec![T::zero(); m];
    let unit_prof = degree_profile(&unit, &zero_logs, degree as u32);
    let p = params.map(<[T]>::to_vec).unwrap_or_else(|| vec![T::one(); m]);
    let log_p: Vec<T> = p.iter().map(|v| v.abs().ln()).collect();
    let fit_prof = degree_profile(&unit, &log_p, degree as u32);

    Ok(deltas
        .iter()
        .zip(ns)
        .map(|(&d, (n0, n1, n2))| {
            let k = if degree == 0 { T::zero() } else { k_from_profile(&fit_prof, n2) };
            let k_unit = if degree == 0 { T::zero() } else { k_from_profile(&unit_prof, n2) };
            ConvergenceCertificate {
                n0,
                n1,
                n2,
                k,
                t0: t0_of(k, lambda1),
                k_unit,
                t0_unit: t0_of(k_unit, lambda1),
                delta: T::lit(d),
                opnorm_a,
                opnorm_j,
                opnorm_inverse_bound: T::one() / (T::one() - T::lit(d)),
                lambda1,
                free_params: p.clone(),
                degree_scanned: degree.min(n2),
                partial: degree < n2,
            }
        })
        .collect())
}

/// Assembles `N₀`, `N₁`, `N₂ = max(N₀, N₁)`, `K` over degrees `≤ N₂` and
/// `t₀ = max(0, ln K / |λ₁|)`.
pub fn certificate<T: Scalar>(
    system: &QuadraticSystem<T>,
    spectral: &SpectralData<T>,
    params: Option<&[T]>,
    opts: &CertificateOptions,
) -> Result<ConvergenceCertificate<T>> {
    let mut all = certificates_for(system, spectral, params, &[opts.delta], opts)?;
    Ok(all.remove(0))
}

/// The grid entry with the smallest `t₀` (ties to the smaller `δ`).
pub fn best_of_grid<T: Scalar>(certs: &[ConvergenceCertificate<T>]) -> Option<&ConvergenceCertificate<T>> {
    certs.iter().fold(None, |best: Option<&ConvergenceCertificate<T>>, c| match best {
        Some(b) if b.t0 <= c.t0 => Some(b),
        _ => Some(c),
    })
}
