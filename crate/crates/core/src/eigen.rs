//! Dense symmetric eigendecomposition: Householder reduction to
//! tridiagonal form followed by the implicit QL iteration.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Square matrix in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Matrix { n, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::SizeMismatch { expected: n, got: r.len() });
        }
        Ok(Matrix {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> T {
        let scale = self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        if scale == T::zero() {
            return T::zero();
        }
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

/// Eigenvalues in descending order with orthonormal eigenvectors as the
/// columns of `vectors` (absent for value-only solves).
#[derive(Clone, Debug)]
pub struct Eigen<T> {
    pub values: Vec<T>,
    pub vectors: Option<Matrix<T>>,
}

impl<T: Scalar> Eigen<T> {
    pub fn vector(&self, k: usize) -> Option<Vec<T>> {
        let v = self.vectors.as_ref()?;
        Some((0..v.n).map(|i| v[(i, k)]).collect())
    }
}

/// Relative asymmetry accepted by [`symmetric_eigen`].
pub fn symmetry_tolerance<T: Scalar>() -> T {
    T::epsilon() * T::of(64.0)
}

/// Eigendecomposition of a symmetric matrix. Each eigenvector is signed
/// so that its largest-magnitude component (first on ties) is positive.
pub fn symmetric_eigen<T: Scalar>(a: &Matrix<T>, vectors: bool) -> Result<Eigen<T>> {
    let asym = a.asymmetry();
    if !(asym <= symmetry_tolerance()) {
        return Err(Error::Asymmetric(asym.as_f64()));
    }
    let n = a.n;
    if n == 0 {
        return Ok(Eigen {
            values: Vec::new(),
            vectors: vectors.then(|| Matrix::zeros(0)),
        });
    }
    let mut v = a.clone();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(&mut v, &mut d, &mut e, vectors);
    tql2(&mut v, &mut d, &mut e, vectors)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = vectors.then(|| {
        let mut out = Matrix::zeros(n);
        for (k, &src) in order.iter().enumerate() {
            // eigenvector `src` is row `src` of the transposed work matrix
            let col = v.row(src);
            let mut best = 0;
            for i in 0..n {
                if col[i].abs() > col[best].abs() {
                    best = i;
                }
            }
            let sign = if col[best] < T::zero() { -T::one() } else { T::one() };
            for i in 0..n {
                out[(i, k)] = sign * col[i];
            }
        }
        out
    });
    Ok(Eigen { values, vectors })
}

// Householder tridiagonalization. On exit `d` is the diagonal, `e[1..]`
// the subdiagonal and, when `vectors`, `v` the accumulated transform.
// `v` is addressed transposed (`v[(col, row)]`) so the inner loops run
// along contiguous rows; the input is symmetric, so this is free.
fn tred2<T: Scalar>(v: &mut Matrix<T>, d: &mut [T], e: &mut [T], vectors: bool) {
    let n = v.n;
    for j in 0..n {
        d[j] = v[(j, n - 1)];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for &dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(j, i - 1)];
                v[(j, i)] = T::zero();
                v[(i, j)] = T::zero();
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = T::zero();
            }
            for j in 0..i {
                f = d[j];
                v[(i, j)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(j, k)] * d[k];
                    e[k] += v[(j, k)] * f;
                }
                e[j] = g;
            }
            f = T::zero();
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
                    let t = f * e[k] + g * d[k];
                    v[(j, k)] -= t;
                }
                d[j] = v[(j, i - 1)];
                v[(j, i)] = T::zero();
            }
        }
        d[i] = h;
    }
    if !vectors {
        for (j, dj) in d.iter_mut().enumerate() {
            *dj = v[(j, j)];
        }
        e[0] = T::zero();
        return;
    }
    for i in 0..n - 1 {
        v[(i, n - 1)] = v[(i, i)];
        v[(i, i)] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[(i + 1, k)] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g += v[(i + 1, k)] * v[(j, k)];
                }
                for k in 0..=i {
                    let t = g * d[k];
                    v[(j, k)] -= t;
                }
            }
        }
        for k in 0..=i {
            v[(i + 1, k)] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[(j, n - 1)];
        v[(j, n - 1)] = T::zero();
    }
    v[(n - 1, n - 1)] = T::one();
    e[0] = T::zero();
}

// Implicit QL on the tridiagonal matrix left by `tred2`.
fn tql2<T: Scalar>(v: &mut Matrix<T>, d: &mut [T], e: &mut [T], vectors: bool) -> Result<()> {
    let n = v.n;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    let two = T::of(2.0);
    let eps = T::epsilon();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::Degenerate("QL iteration did not converge".into()));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
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
                let mut s = T::zero();
                let mut s2 = T::zero();
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
                    if vectors {
                        for k in 0..n {
                            h = v[(i + 1, k)];
                            v[(i + 1, k)] = s * v[(i, k)] + c * h;
                            v[(i, k)] = c * v[(i, k)] - s * h;
                        }
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
        e[l] = T::zero();
    }
    Ok(())
}
