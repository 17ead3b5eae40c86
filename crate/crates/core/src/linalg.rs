//! Dense linear algebra over a generic [`Scalar`].

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != c) {
            return Err(Error::LengthMismatch("ragged rows".into()));
        }
        Ok(Mat { rows: r, cols: c, data: rows.concat() })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        let c = self.cols;
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn col(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let orow = other.row(k);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// Row vector times matrix.
    pub fn vecmat(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    pub fn max_abs_asymmetry(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.rows {
            for j in 0..i {
                m = m.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        m
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn cast<U: Scalar>(&self) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| U::c(x.to_f64_lossy())).collect(),
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

pub fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEig<T> {
    /// Descending.
    pub values: Vec<T>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: Mat<T>,
}

/// Householder tridiagonalisation followed by implicit QL.
pub fn sym_eig<T: Scalar>(a: &Mat<T>) -> SymEig<T> {
    assert_eq!(a.rows, a.cols, "sym_eig needs a square matrix");
    let n = a.rows;
    if n == 0 {
        return SymEig { values: vec![], vectors: Mat::zeros(0, 0) };
    }
    let mut v = a.clone();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = idx.iter().map(|&i| d[i]).collect();
    let vectors = Mat::from_fn(n, n, |r, c| v[(r, idx[c])]);
    SymEig { values, vectors }
}

fn tred2<T: Scalar>(v: &mut Mat<T>, d: &mut [T], e: &mut [T]) {
    let n = d.len();
    let z = T::zero();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = z;
        let mut h = z;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == z {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = z;
                v[(j, i)] = z;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > z {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = z;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = z;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[(k, j)] -= upd;
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = z;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = T::one();
        let h = d[i + 1];
        if h != z {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = z;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[(k, j)] -= upd;
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = z;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = z;
    }
    v[(n - 1, n - 1)] = T::one();
    e[0] = z;
}

fn tql2<T: Scalar>(v: &mut Mat<T>, d: &mut [T], e: &mut [T]) {
    let n = d.len();
    let z = T::zero();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = z;
    let mut f = z;
    let mut tst1 = z;
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            loop {
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (T::c(2.0) * e[l]);
                let mut r = p.hypot(T::one());
                if p < z {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = z;
                let mut s2 = z;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        h = v[(k, i + 1)];
                        v[(k, i + 1)] = s * v[(k, i)] + c * h;
                        v[(k, i)] = c * v[(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = z;
    }
}

/// Largest `k` eigenpairs of a symmetric operator by Lanczos with full
/// reorthogonalisation. Iterates until every wanted Ritz residual is below
/// `tol * scale`, where `scale` bounds the operator norm.
pub fn lanczos_top<T: Scalar>(
    n: usize,
    k: usize,
    matvec: impl Fn(&[T]) -> Vec<T>,
    start: &[T],
    tol: T,
) -> SymEig<T> {
    assert!(k >= 1 && k <= n);
    let mut basis: Vec<Vec<T>> = Vec::new();
    let mut alpha: Vec<T> = Vec::new();
    let mut beta: Vec<T> = Vec::new();
    let nrm = norm2(start);
    let mut q: Vec<T> = start.iter().map(|&x| x / nrm).collect();
    let check_every = 10;
    loop {
        let mut w = matvec(&q);
        let a = dot(&w, &q);
        basis.push(q.clone());
        alpha.push(a);
        // two passes of classical Gram-Schmidt keep the basis orthonormal
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                for (wi, &bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        let bnext = norm2(&w);
        let m = basis.len();
        let done_size = m == n;
        if done_size || m % check_every == 0 || bnext <= T::epsilon() {
            let t = tridiag(&alpha, &beta);
            let te = sym_eig(&t);
            let scale = te.values.iter().fold(T::zero(), |s, &x| s.max(x.abs())).max(T::epsilon());
            let kk = k.min(m);
            let converged = (0..kk).all(|j| (bnext * te.vectors[(m - 1, j)]).abs() <= tol * scale);
            if (converged && m >= k) || done_size || bnext <= T::epsilon() * scale {
                let mut vecs = Mat::zeros(n, kk);
                for j in 0..kk {
                    for (bi, b) in basis.iter().enumerate() {
                        let s = te.vectors[(bi, j)];
                        for r in 0..n {
                            vecs[(r, j)] += s * b[r];
                        }
                    }
                }
                return SymEig { values: te.values[..kk].to_vec(), vectors: vecs };
            }
        }
        beta.push(bnext);
        q = w.iter().map(|&x| x / bnext).collect();
    }
}

fn tridiag<T: Scalar>(alpha: &[T], beta: &[T]) -> Mat<T> {
    let m = alpha.len();
    let mut t = Mat::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

/// Modified Gram-Schmidt on the columns of `a`, in place.
pub fn orthonormalize_columns<T: Scalar>(a: &mut Mat<T>) {
    for j in 0..a.cols {
        for p in 0..j {
            let c = (0..a.rows).fold(T::zero(), |s, i| s + a[(i, j)] * a[(i, p)]);
            for i in 0..a.rows {
                let upd = c * a[(i, p)];
                a[(i, j)] -= upd;
            }
        }
        let nrm = (0..a.rows).fold(T::zero(), |s, i| s + a[(i, j)] * a[(i, j)]).sqrt();
        for i in 0..a.rows {
            a[(i, j)] /= nrm;
        }
    }
}

/// Stationary vector of an irreducible stochastic matrix by
/// Grassmann-Taksar-Heyman state reduction. Subtraction-free, hence
/// accurate entrywise even for nearly decomposable chains.
pub fn gth<T: Scalar>(p: &Mat<T>) -> Vec<T> {
    let n = p.rows;
    let mut a = p.clone();
    for k in (1..n).rev() {
        let s: T = (0..k).map(|j| a[(k, j)]).sum();
        for i in 0..k {
            a[(i, k)] /= s;
        }
        for i in 0..k {
            let aik = a[(i, k)];
            if aik == T::zero() {
                continue;
            }
            for j in 0..k {
                let upd = aik * a[(k, j)];
                a[(i, j)] += upd;
            }
        }
    }
    let mut x = vec![T::zero(); n];
    x[0] = T::one();
    for j in 1..n {
        x[j] = (0..j).map(|i| x[i] * a[(i, j)]).sum();
    }
    let total: T = x.iter().copied().sum();
    x.iter().map(|&v| v / total).collect()
}

/// Log of the principal minor of `I - P` obtained by deleting row and column
/// `z`. Elimination tracks each row's slack (its mass flowing to `z`) so every
/// pivot is a sum of nonnegative terms.
pub fn log_laplacian_cofactor<T: Scalar>(p: &Mat<T>, z: usize) -> T {
    let n = p.rows;
    let idx: Vec<usize> = (0..n).filter(|&i| i != z).collect();
    let m = idx.len();
    let mut off = Mat::from_fn(m, m, |i, j| if i == j { T::zero() } else { p[(idx[i], idx[j])] });
    let mut slack: Vec<T> = idx.iter().map(|&i| p[(i, z)]).collect();
    let mut logdet = T::zero();
    for k in 0..m {
        let pivot: T = (k + 1..m).map(|j| off[(k, j)]).sum::<T>() + slack[k];
        logdet += pivot.ln();
        for i in k + 1..m {
            let f = off[(i, k)] / pivot;
            if f == T::zero() {
                continue;
            }
            for j in k + 1..m {
                if j != i {
                    let upd = f * off[(k, j)];
                    off[(i, j)] += upd;
                }
            }
            let upd = f * slack[k];
            slack[i] += upd;
        }
    }
    logdet
}
