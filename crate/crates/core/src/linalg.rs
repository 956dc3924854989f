//! Small dense linear algebra: just enough for M×M systems with M in the
//! single or low double digits.
//!
//! Matrices are row-major. Nothing here tries to be clever about cache
//! blocking; every routine is O(M³) or better on tiny inputs.

use std::ops::{Index, IndexMut};

use crate::error::{Result, SpsError};
use crate::scalar::{norm2, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    /// Builds from row vectors; errors if rows are ragged.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(SpsError::RaggedMatrix {
                    row: i,
                    len: r.len(),
                    expected: cols,
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        debug_assert_eq!(self.cols, other.rows);
        Self::from_fn(self.rows, other.cols, |i, j| {
            (0..self.cols).map(|k| self[(i, k)] * other[(k, j)]).sum()
        })
    }

    /// `diag(d) * self`, i.e. row `i` scaled by `d[i]`.
    pub fn scale_rows(&self, d: &[T]) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| d[i] * self[(i, j)])
    }

    /// Leading principal `k × k` block.
    pub fn leading_block(&self, k: usize) -> Self {
        Self::from_fn(k, k, |i, j| self[(i, j)])
    }

    /// Principal submatrix on the given index set.
    pub fn principal(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), idx.len(), |i, j| self[(idx[i], idx[j])])
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn norm_frobenius(&self) -> T {
        norm2(&self.data)
    }

    /// Spectral norm (largest singular value) by power iteration on `AᵀA`.
    pub fn spectral_norm(&self) -> T {
        spectral_norm(self, T::tol(1e-10), 10_000)
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn lu(&self) -> Result<Lu<T>> {
        Lu::factor(self)
    }

    /// Determinant; zero for exactly singular matrices.
    pub fn det(&self) -> T {
        match Lu::factor(self) {
            Ok(lu) => lu.det(),
            Err(_) => T::zero(),
        }
    }

    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        Ok(self.lu()?.solve(rhs))
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    sign: T,
    min_pivot: T,
}

impl<T: Scalar> Lu<T> {
    /// Factors `a`. Only an exactly zero pivot is an error here; callers
    /// that care about near-singularity inspect [`Lu::min_pivot`] or
    /// [`rcond`].
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(SpsError::DimensionMismatch {
                what: "matrix columns",
                expected: a.rows(),
                found: a.cols(),
            });
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        let mut min_pivot = T::infinity();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == T::zero() || !pmax.is_finite() {
                return Err(SpsError::SingularMatrix { rcond: 0.0 });
            }
            min_pivot = min_pivot.min(pmax);
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f != T::zero() {
                    for j in k + 1..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= f * u;
                    }
                }
            }
        }
        Ok(Self {
            lu,
            perm,
            sign,
            min_pivot,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn min_pivot(&self) -> T {
        self.min_pivot
    }

    pub fn det(&self) -> T {
        (0..self.dim()).fold(self.sign, |d, i| d * self.lu[(i, i)])
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut x: Vec<T> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            for j in 0..i {
                let l = self.lu[(i, j)];
                x[i] = x[i] - l * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let u = self.lu[(i, j)];
                x[i] = x[i] - u * x[j];
            }
            x[i] = x[i] / self.lu[(i, i)];
        }
        x
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = T::zero());
            e[j] = T::one();
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

/// Reciprocal 1-norm condition number `1 / (‖A‖₁ ‖A⁻¹‖₁)`, computed from the
/// explicit inverse (exact rather than estimated; M is small). Returns zero
/// for exactly singular input.
pub fn rcond<T: Scalar>(a: &Matrix<T>) -> T {
    let lu = match Lu::factor(a) {
        Ok(lu) => lu,
        Err(_) => return T::zero(),
    };
    let inv = lu.inverse();
    let denom = a.norm_1() * inv.norm_1();
    if !denom.is_finite() || denom == T::zero() {
        return T::zero();
    }
    T::one() / denom
}

/// Largest singular value via power iteration on `AᵀA`.
pub fn spectral_norm<T: Scalar>(a: &Matrix<T>, tol: T, max_iter: usize) -> T {
    if a.rows() == 0 || a.cols() == 0 {
        return T::zero();
    }
    let ata = a.transpose().matmul(a);
    // Start from the heaviest column of AᵀA plus a uniform component, which
    // cannot be orthogonal to the dominant singular vector unless AᵀA = 0.
    let n = ata.cols();
    let heaviest = (0..n)
        .max_by(|&x, &y| {
            let cx: T = (0..n).map(|i| ata[(i, x)].abs()).sum();
            let cy: T = (0..n).map(|i| ata[(i, y)].abs()).sum();
            cx.partial_cmp(&cy).unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or(0);
    let mut v: Vec<T> = (0..n).map(|i| ata[(i, heaviest)] + T::lit(1e-3)).collect();
    let mut nv = norm2(&v);
    if nv == T::zero() {
        return T::zero();
    }
    v.iter_mut().for_each(|x| *x = *x / nv);
    let mut sigma2 = T::zero();
    for _ in 0..max_iter {
        let w = ata.matvec(&v);
        nv = norm2(&w);
        if nv == T::zero() {
            return T::zero();
        }
        let next = nv;
        v = w.into_iter().map(|x| x / nv).collect();
        let done = (next - sigma2).abs() <= tol * next;
        sigma2 = next;
        if done {
            break;
        }
    }
    sigma2.sqrt()
}

/// Eigenvalues of a general real matrix as `(re, im)` pairs, unordered.
///
/// Reduces to upper Hessenberg form by stabilized elementary similarity
/// transforms, then runs the Francis double-shift QR iteration.
pub fn eigenvalues<T: Scalar>(a: &Matrix<T>) -> Result<Vec<(T, T)>> {
    if !a.is_square() {
        return Err(SpsError::DimensionMismatch {
            what: "matrix columns",
            expected: a.rows(),
            found: a.cols(),
        });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    // 1-based working copy keeps the classic loop bounds readable.
    let mut h = vec![vec![T::zero(); n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            h[i + 1][j + 1] = a[(i, j)];
        }
    }
    hessenberg(&mut h, n);
    for i in 3..=n {
        for j in 1..i - 1 {
            h[i][j] = T::zero();
        }
    }
    francis_qr(&mut h, n)
}

fn hessenberg<T: Scalar>(a: &mut [Vec<T>], n: usize) {
    for m in 2..n {
        let mut x = T::zero();
        let mut i = m;
        for j in m..=n {
            if a[j][m - 1].abs() > x.abs() {
                x = a[j][m - 1];
                i = j;
            }
        }
        if i != m {
            for j in m - 1..=n {
                let t = a[i][j];
                a[i][j] = a[m][j];
                a[m][j] = t;
            }
            for row in a.iter_mut().skip(1) {
                row.swap(i, m);
            }
        }
        if x != T::zero() {
            for i in m + 1..=n {
                let mut y = a[i][m - 1];
                if y != T::zero() {
                    y = y / x;
                    a[i][m - 1] = y;
                    for j in m..=n {
                        let t = a[m][j];
                        a[i][j] -= y * t;
                    }
                    for row in a.iter_mut().skip(1) {
                        let t = row[i];
                        row[m] += y * t;
                    }
                }
            }
        }
    }
}

#[allow(clippy::many_single_char_names)]
fn francis_qr<T: Scalar>(a: &mut [Vec<T>], n: usize) -> Result<Vec<(T, T)>> {
    let zero = T::zero();
    let half = T::lit(0.5);
    let mut wr = vec![zero; n + 1];
    let mut wi = vec![zero; n + 1];
    let mut anorm = zero;
    for i in 1..=n {
        for j in (i.max(2) - 1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let sign = |a: T, b: T| if b >= zero { a.abs() } else { -a.abs() };
    let (mut p, mut q, mut r);
    let (mut x, mut y, mut z);
    let mut w;
    let mut nn = n;
    let mut t = zero;
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == zero {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = zero;
                    break;
                }
                l -= 1;
            }
            x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = zero;
                nn -= 1;
            } else {
                y = a[nn - 1][nn - 1];
                w = a[nn][nn - 1] * a[nn - 1][nn];
                if l == nn - 1 {
                    p = half * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    if q >= zero {
                        z = p + sign(z, p);
                        wr[nn - 1] = x + z;
                        wr[nn] = x + z;
                        if z != zero {
                            wr[nn] = x - w / z;
                        }
                        wi[nn - 1] = zero;
                        wi[nn] = zero;
                    } else {
                        wr[nn - 1] = x + p;
                        wr[nn] = x + p;
                        wi[nn - 1] = -z;
                        wi[nn] = z;
                    }
                    nn -= 2;
                } else {
                    if its == 60 {
                        return Err(SpsError::EigenNoConvergence);
                    }
                    if its == 10 || its == 20 {
                        // exceptional shift
                        t += x;
                        for i in 1..=nn {
                            a[i][i] -= x;
                        }
                        let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                        x = T::lit(0.75) * s;
                        y = x;
                        w = T::lit(-0.4375) * s * s;
                    }
                    its += 1;
                    let mut m = nn - 2;
                    loop {
                        z = a[m][m];
                        r = x - z;
                        let s0 = y - z;
                        p = (r * s0 - w) / a[m + 1][m] + a[m][m + 1];
                        q = a[m + 1][m + 1] - z - r - s0;
                        r = a[m + 2][m + 1];
                        let s = p.abs() + q.abs() + r.abs();
                        p = p / s;
                        q = q / s;
                        r = r / s;
                        if m == l {
                            break;
                        }
                        let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m + 2..=nn {
                        a[i][i - 2] = zero;
                        if i != m + 2 {
                            a[i][i - 3] = zero;
                        }
                    }
                    let mut k = m;
                    while k + 1 <= nn {
                        if k != m {
                            p = a[k][k - 1];
                            q = a[k + 1][k - 1];
                            r = zero;
                            if k != nn - 1 {
                                r = a[k + 2][k - 1];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != zero {
                                p = p / x;
                                q = q / x;
                                r = r / x;
                            }
                        }
                        let s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != zero {
                            if k == m {
                                if l != m {
                                    a[k][k - 1] = -a[k][k - 1];
                                }
                            } else {
                                a[k][k - 1] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q = q / p;
                            r = r / p;
                            for j in k..=nn {
                                p = a[k][j] + q * a[k + 1][j];
                                if k != nn - 1 {
                                    p += r * a[k + 2][j];
                                    a[k + 2][j] -= p * z;
                                }
                                a[k + 1][j] -= p * y;
                                a[k][j] -= p * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                p = x * a[i][k] + y * a[i][k + 1];
                                if k != nn - 1 {
                                    p += z * a[i][k + 2];
                                    a[i][k + 2] -= p * r;
                                }
                                a[i][k + 1] -= p * q;
                                a[i][k] -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if nn < 2 || l + 1 >= nn {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| (wr[i], wi[i])).collect())
}

/// Null vector of a square matrix with (numerical) rank `n − 1`, by
/// Gaussian elimination with complete pivoting.
///
/// Returns the pivot magnitudes alongside the vector so callers can apply
/// their own rank policy; `rank_tol` is relative to the largest entry.
pub fn null_vector<T: Scalar>(b: &Matrix<T>, rank_tol: T) -> Result<Vec<T>> {
    let n = b.rows();
    if n == 0 || !b.is_square() {
        return Err(SpsError::KernelDimension { dim: 0 });
    }
    let scale = b.max_abs();
    if scale == T::zero() {
        return if n == 1 {
            Ok(vec![T::one()])
        } else {
            Err(SpsError::KernelDimension { dim: n })
        };
    }
    let mut u = b.clone();
    let mut colp: Vec<usize> = (0..n).collect();
    let mut pivots = Vec::with_capacity(n);
    for k in 0..n {
        let (mut pi, mut pj, mut best) = (k, k, -T::one());
        for i in k..n {
            for j in k..n {
                let v = u[(i, j)].abs();
                if v > best {
                    best = v;
                    pi = i;
                    pj = j;
                }
            }
        }
        pivots.push(best);
        if pi != k {
            for j in 0..n {
                let t = u[(k, j)];
                u[(k, j)] = u[(pi, j)];
                u[(pi, j)] = t;
            }
        }
        if pj != k {
            for i in 0..n {
                let t = u[(i, k)];
                u[(i, k)] = u[(i, pj)];
                u[(i, pj)] = t;
            }
            colp.swap(k, pj);
        }
        if best == T::zero() {
            break;
        }
        for i in k + 1..n {
            let f = u[(i, k)] / u[(k, k)];
            if f != T::zero() {
                for j in k..n {
                    let t = u[(k, j)];
                    u[(i, j)] -= f * t;
                }
            }
        }
    }
    let tiny = rank_tol * scale;
    let rank = pivots.iter().take_while(|&&p| p > tiny).count();
    if rank != n - 1 {
        return Err(SpsError::KernelDimension { dim: n - rank });
    }
    // Free variable is the last permuted column.
    let mut y = vec![T::zero(); n];
    y[n - 1] = T::one();
    for i in (0..n - 1).rev() {
        let mut s = T::zero();
        for j in i + 1..n {
            s += u[(i, j)] * y[j];
        }
        y[i] = -s / u[(i, i)];
    }
    let mut v = vec![T::zero(); n];
    for (k, &c) in colp.iter().enumerate() {
        v[c] = y[k];
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn sorted_real(mut ev: Vec<(f64, f64)>) -> Vec<f64> {
        ev.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        ev.into_iter().map(|e| e.0).collect()
    }

    #[test]
    fn lu_solves_and_determinant() {
        let a = m(&[&[-2.0, -1.0], &[-1.0, -1.0]]);
        assert_relative_eq!(a.det(), 1.0, epsilon = 1e-15);
        let x = a.solve(&[-4.0, -3.0]).unwrap();
        assert_relative_eq!(x[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(x[1], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn rank_one_has_zero_rcond() {
        assert_eq!(rcond(&m(&[&[1.0, 1.0], &[1.0, 1.0]])), 0.0);
        assert_relative_eq!(rcond(&Matrix::<f64>::identity(3)), 1.0);
    }

    #[test]
    fn ragged_rows_rejected() {
        let err = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert!(matches!(err, SpsError::RaggedMatrix { row: 1, .. }));
    }

    #[test]
    fn spectral_norm_of_symmetric_matrix() {
        // eigenvalues -(3 ± √5)/2
        let a = m(&[&[-2.0, -1.0], &[-1.0, -1.0]]);
        assert_relative_eq!(a.spectral_norm(), (3.0 + 5f64.sqrt()) / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn qr_eigenvalues_of_triangular_and_companion() {
        let a = m(&[&[1.0, 2.0, 3.0], &[0.0, 4.0, 5.0], &[0.0, 0.0, 6.0]]);
        let ev = sorted_real(eigenvalues(&a).unwrap());
        for (got, want) in ev.iter().zip([1.0, 4.0, 6.0]) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
        // companion of (x-1)(x-2)(x-3)(x-4)
        let c = m(&[
            &[10.0, -35.0, 50.0, -24.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]);
        let ev = sorted_real(eigenvalues(&c).unwrap());
        for (got, want) in ev.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert_relative_eq!(*got, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn qr_detects_rotation_pair() {
        let a = m(&[&[0.0, -1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, -2.0]]);
        let ev = eigenvalues(&a).unwrap();
        let max_im = ev.iter().fold(0.0f64, |mx, e| mx.max(e.1.abs()));
        assert_relative_eq!(max_im, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn null_vector_of_rank_deficient() {
        let b = m(&[&[1.0, 2.0], &[2.0, 4.0]]);
        let v = null_vector(&b, 1e-9).unwrap();
        assert_relative_eq!(v[0] + 2.0 * v[1], 0.0, epsilon = 1e-14);
        let z = Matrix::<f64>::zeros(2, 2);
        assert!(matches!(null_vector(&z, 1e-9), Err(SpsError::KernelDimension { dim: 2 })));
        assert!(matches!(
            null_vector(&Matrix::<f64>::identity(2), 1e-9),
            Err(SpsError::KernelDimension { dim: 0 })
        ));
    }
}
