//! Small dense-matrix helpers: products, inversion, matrix exponential,
//! symmetric eigenvalues and QR.
//!
//! Everything here targets the tiny systems used in this crate (2x2 neuron
//! state matrices up to ~32x32 spring-mass block systems), so the
//! implementations favour clarity and accuracy over scalability.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
#[cfg_attr(feature = "std", allow(unused_imports))]
use num_traits::Float;

/// Row-major dense matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Inversion / solve failure on a numerically singular matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SingularMatrix;

impl fmt::Display for SingularMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "matrix is singular to working precision")
    }
}

impl core::error::Error for SingularMatrix {}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == 0.0 {
                    continue;
                }
                let lhs = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(lhs) {
                    *d += aik * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &x)| a * x).sum())
            .collect()
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: f64) -> Mat {
        let data = self.data.iter().map(|a| a * s).collect();
        Mat { rows: self.rows, cols: self.cols, data }
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn norm_frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Gauss-Jordan inverse with partial pivoting.
    pub fn inverse(&self) -> Result<Mat, SingularMatrix> {
        assert_eq!(self.rows, self.cols, "inverse of a non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Mat::identity(n);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[(i, col)].abs().partial_cmp(&a[(j, col)].abs()).unwrap())
                .unwrap();
            if a[(pivot, col)].abs() < 1e-300 {
                return Err(SingularMatrix);
            }
            if pivot != col {
                a.swap_rows(pivot, col);
                inv.swap_rows(pivot, col);
            }
            let p = a[(col, col)];
            for j in 0..n {
                a[(col, j)] /= p;
                inv[(col, j)] /= p;
            }
            for i in 0..n {
                if i == col {
                    continue;
                }
                let factor = a[(i, col)];
                if factor == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let s = a[(col, j)];
                    a[(i, j)] -= factor * s;
                    let s = inv[(col, j)];
                    inv[(i, j)] -= factor * s;
                }
            }
        }
        Ok(inv)
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for col in 0..self.cols {
            self.data.swap(i * self.cols + col, j * self.cols + col);
        }
    }

    /// Matrix power by repeated squaring.
    pub fn powi(&self, mut e: u64) -> Mat {
        assert_eq!(self.rows, self.cols);
        let mut result = Mat::identity(self.rows);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                result = result.matmul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.matmul(&base);
            }
        }
        result
    }
}

impl core::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Matrix exponential by scaling-and-squaring with a [6/6] Pade approximant.
///
/// The argument is scaled down to `norm_inf <= 0.5` where the degree-6
/// approximant is accurate to full double precision, then squared back up.
pub fn expm(a: &Mat) -> Mat {
    assert_eq!(a.rows, a.cols, "expm of a non-square matrix");
    let norm = a.norm_inf();
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(s));

    const Q: usize = 6;
    let n = a.rows;
    let mut num = Mat::identity(n);
    let mut den = Mat::identity(n);
    let mut term = Mat::identity(n);
    let mut c = 1.0;
    for k in 1..=Q {
        c *= (Q - k + 1) as f64 / ((k * (2 * Q - k + 1)) as f64);
        term = term.matmul(&scaled);
        let ct = term.scale(c);
        num = num.add(&ct);
        if k % 2 == 0 {
            den = den.add(&ct);
        } else {
            den = den.sub(&ct);
        }
    }
    let mut result = den
        .inverse()
        .expect("denominator of the Pade approximant is nonsingular for scaled input")
        .matmul(&num);
    for _ in 0..s {
        result = result.matmul(&result);
    }
    result
}

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method,
/// returned in ascending order.
pub fn eigvals_symmetric(m: &Mat) -> Vec<f64> {
    assert_eq!(m.rows, m.cols);
    let n = m.rows;
    let mut a = m.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() < 1e-15 * (1.0 + a.norm_frobenius()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut vals: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    vals
}

/// Cholesky factor of a symmetric positive-definite matrix; `Err` if the
/// matrix is not positive definite.
pub fn cholesky(m: &Mat) -> Result<Mat, SingularMatrix> {
    assert_eq!(m.rows, m.cols);
    let n = m.rows;
    let mut l = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(SingularMatrix);
                }
                l[(i, i)] = sum.sqrt();
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Orthogonal factor of a Householder QR decomposition, with the sign
/// convention that makes the diagonal of R nonnegative (so the result is
/// Haar-distributed when the input is i.i.d. Gaussian).
pub fn qr_orthogonal(m: &Mat) -> Mat {
    assert_eq!(m.rows, m.cols);
    let n = m.rows;
    let mut r = m.clone();
    let mut q = Mat::identity(n);
    for col in 0..n {
        let mut v = vec![0.0; n - col];
        for i in col..n {
            v[i - col] = r[(i, col)];
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-300 {
            continue;
        }
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * norm;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 < 1e-300 {
            continue;
        }
        // r <- (I - 2 v v^T / v^T v) r, and accumulate the same into q.
        for j in col..n {
            let dot: f64 = (col..n).map(|i| v[i - col] * r[(i, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in col..n {
                r[(i, j)] -= f * v[i - col];
            }
        }
        for j in 0..n {
            let dot: f64 = (col..n).map(|i| v[i - col] * q[(i, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in col..n {
                q[(i, j)] -= f * v[i - col];
            }
        }
    }
    // q currently holds Q^T of the factorization with R diag of mixed sign;
    // flip rows so that R = Q^T m has a nonnegative diagonal, then transpose.
    for i in 0..n {
        let rii: f64 = (0..n).map(|k| q[(i, k)] * m[(k, i)]).sum();
        if rii < 0.0 {
            for k in 0..n {
                q[(i, k)] = -q[(i, k)];
            }
        }
    }
    q.transpose()
}
