//! Problem definition: the quadratic system `ẋ = diag(x)(b + A x)` and the
//! JSON system-definition file.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpsError};
use crate::linalg::{rcond, Matrix};
use crate::scalar::{all_finite, Scalar};

/// Reciprocal condition number below which `A` is treated as singular.
pub const RCOND_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSystem<T> {
    a: Matrix<T>,
    b: Vec<T>,
    x0: Option<Vec<T>>,
}

impl<T: Scalar> QuadraticSystem<T> {
    /// Checks shapes and finiteness. Invertibility is a separate step, see
    /// [`validate`].
    pub fn new(a: Matrix<T>, b: Vec<T>, x0: Option<Vec<T>>) -> Result<Self> {
        let m = a.rows();
        if m == 0 {
            return Err(SpsError::DimensionMismatch {
                what: "A",
                expected: 1,
                found: 0,
            });
        }
        if !a.is_square() {
            return Err(SpsError::DimensionMismatch {
                what: "A columns",
                expected: m,
                found: a.cols(),
            });
        }
        if b.len() != m {
            return Err(SpsError::DimensionMismatch {
                what: "b",
                expected: m,
                found: b.len(),
            });
        }
        if let Some(x0) = &x0 {
            if x0.len() != m {
                return Err(SpsError::DimensionMismatch {
                    what: "x0",
                    expected: m,
                    found: x0.len(),
                });
            }
            if !all_finite(x0) {
                return Err(SpsError::NonFinite("x0"));
            }
        }
        if !a.all_finite() {
            return Err(SpsError::NonFinite("A"));
        }
        if !all_finite(&b) {
            return Err(SpsError::NonFinite("b"));
        }
        Ok(Self { a, b, x0 })
    }

    /// Convenience constructor from nested rows.
    pub fn from_rows(a: &[Vec<T>], b: &[T]) -> Result<Self> {
        Self::new(Matrix::from_rows(a)?, b.to_vec(), None)
    }

    pub fn with_x0(mut self, x0: Vec<T>) -> Result<Self> {
        self.x0 = Some(x0);
        Self::new(self.a, self.b, self.x0)
    }

    pub fn without_x0(mut self) -> Self {
        self.x0 = None;
        self
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    pub fn x0(&self) -> Option<&[T]> {
        self.x0.as_deref()
    }

    /// Initial condition or [`SpsError::MissingInitialCondition`].
    pub fn require_x0(&self) -> Result<&[T]> {
        self.x0().ok_or(SpsError::MissingInitialCondition)
    }

    /// Right-hand side `diag(x)(b + A x)`.
    pub fn rhs(&self, x: &[T]) -> Vec<T> {
        let ax = self.a.matvec(x);
        x.iter()
            .zip(&self.b)
            .zip(ax)
            .map(|((&xi, &bi), axi)| xi * (bi + axi))
            .collect()
    }

    /// Simultaneous relabeling of variables: new variable `i` is old
    /// variable `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let m = self.dim();
        if perm.len() != m {
            return Err(SpsError::DimensionMismatch {
                what: "permutation",
                expected: m,
                found: perm.len(),
            });
        }
        let a = Matrix::from_fn(m, m, |i, j| self.a[(perm[i], perm[j])]);
        let b = perm.iter().map(|&p| self.b[p]).collect();
        let x0 = self.x0.as_ref().map(|x| perm.iter().map(|&p| x[p]).collect());
        Self::new(a, b, x0)
    }

    pub fn cast<U: Scalar>(&self) -> QuadraticSystem<U> {
        let conv = |x: &T| U::from_f64(x.to_f64().unwrap_or(f64::NAN)).unwrap_or_else(U::nan);
        QuadraticSystem {
            a: Matrix::from_fn(self.dim(), self.dim(), |i, j| conv(&self.a[(i, j)])),
            b: self.b.iter().map(conv).collect(),
            x0: self.x0.as_ref().map(|x| x.iter().map(conv).collect()),
        }
    }
}

/// Rejects systems whose interaction matrix is singular within tolerance.
/// Idempotent: a validated system passes again unchanged.
pub fn validate<T: Scalar>(system: QuadraticSystem<T>) -> Result<QuadraticSystem<T>> {
    let rc = rcond(system.a());
    if !(rc >= T::tol(RCOND_THRESHOLD)) {
        return Err(SpsError::SingularMatrix {
            rcond: rc.to_f64().unwrap_or(0.0),
        });
    }
    Ok(system)
}

/// How far the multi-index expansion is carried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationSpec {
    /// Every component `nᵢ ≤ d`; `(d+1)^M` indices.
    PerIndex(u32),
    /// Total degree `Σ nᵢ ≤ N`; `C(N+M, M)` indices.
    TotalDegree(u32),
}

impl TruncationSpec {
    pub fn value(self) -> u32 {
        match self {
            TruncationSpec::PerIndex(v) | TruncationSpec::TotalDegree(v) => v,
        }
    }

    /// Largest total degree admitted over `m` variables.
    pub fn max_degree(self, m: usize) -> u64 {
        match self {
            TruncationSpec::PerIndex(d) => d as u64 * m as u64,
            TruncationSpec::TotalDegree(n) => n as u64,
        }
    }

    /// Number of admitted multi-indices over `m` variables.
    pub fn count(self, m: usize) -> u128 {
        match self {
            TruncationSpec::PerIndex(d) => (d as u128 + 1).saturating_pow(m as u32),
            TruncationSpec::TotalDegree(n) => binomial(n as u128 + m as u128, m as u128),
        }
    }

    pub fn admits(self, n: &[u32]) -> bool {
        match self {
            TruncationSpec::PerIndex(d) => n.iter().all(|&k| k <= d),
            TruncationSpec::TotalDegree(cap) => n.iter().map(|&k| k as u64).sum::<u64>() <= cap as u64,
        }
    }

    /// The truncation covering every product of two admitted indices.
    pub fn doubled(self) -> Self {
        match self {
            TruncationSpec::PerIndex(d) => TruncationSpec::PerIndex(2 * d),
            TruncationSpec::TotalDegree(n) => TruncationSpec::TotalDegree(2 * n),
        }
    }
}

pub(crate) fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// A parsed system-definition file: the system plus an optional truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemFile<T> {
    pub system: QuadraticSystem<T>,
    pub truncation: Option<TruncationSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemDoc {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truncation: Option<TruncationDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TruncationDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    per_index: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    total_degree: Option<u32>,
}

fn to_scalar<T: Scalar>(v: f64, what: &'static str) -> Result<T> {
    match T::from_f64(v) {
        Some(x) if x.is_finite() => Ok(x),
        _ => Err(SpsError::NonFinite(what)),
    }
}

/// Parses a system-definition document. Dimensions come from `A`.
pub fn parse_system<T: Scalar>(text: &str) -> Result<SystemFile<T>> {
    let doc: SystemDoc = serde_json::from_str(text).map_err(|e| SpsError::Parse(e.to_string()))?;
    let m = doc.a.len();
    for (i, row) in doc.a.iter().enumerate() {
        if row.len() != m {
            return Err(SpsError::RaggedMatrix {
                row: i,
                len: row.len(),
                expected: m,
            });
        }
    }
    let rows = doc
        .a
        .iter()
        .map(|r| r.iter().map(|&v| to_scalar(v, "A")).collect::<Result<Vec<T>>>())
        .collect::<Result<Vec<_>>>()?;
    let b = doc.b.iter().map(|&v| to_scalar(v, "b")).collect::<Result<Vec<T>>>()?;
    let x0 = doc
        .x0
        .map(|x| x.iter().map(|&v| to_scalar(v, "x0")).collect::<Result<Vec<T>>>())
        .transpose()?;
    let truncation = match doc.truncation {
        None => None,
        Some(TruncationDoc {
            per_index: Some(d),
            total_degree: None,
        }) => Some(TruncationSpec::PerIndex(d)),
        Some(TruncationDoc {
            per_index: None,
            total_degree: Some(n),
        }) => Some(TruncationSpec::TotalDegree(n)),
        Some(_) => {
            return Err(SpsError::Parse(
                "truncation needs exactly one of \"per_index\" or \"total_degree\"".into(),
            ))
        }
    };
    if let Some(t) = truncation {
        if t.value() < 1 {
            return Err(SpsError::Parse("truncation value must be at least 1".into()));
        }
    }
    let system = QuadraticSystem::new(Matrix::from_rows(&rows)?, b, x0)?;
    Ok(SystemFile { system, truncation })
}

/// Serializes back to the file format; round-trips bit-exactly for finite
/// binary64 entries.
pub fn emit_system<T: Scalar>(file: &SystemFile<T>) -> String {
    let f = |x: &T| x.to_f64().unwrap_or(f64::NAN);
    let s = &file.system;
    let doc = SystemDoc {
        a: s.a().to_rows().iter().map(|r| r.iter().map(f).collect()).collect(),
        b: s.b().iter().map(f).collect(),
        x0: s.x0().map(|x| x.iter().map(f).collect()),
        truncation: file.truncation.map(|t| match t {
            TruncationSpec::PerIndex(d) => TruncationDoc {
                per_index: Some(d),
                total_degree: None,
            },
            TruncationSpec::TotalDegree(n) => TruncationDoc {
                per_index: None,
                total_degree: Some(n),
            },
        }),
    };
    serde_json::to_string_pretty(&doc).expect("plain numeric document serializes")
}
