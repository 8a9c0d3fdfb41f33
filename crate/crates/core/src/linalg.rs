//! Dense kernels: symmetric eigendecomposition and Householder least squares.
//!
//! The eigensolver is the classical Householder tridiagonalization followed
//! by implicit QL iterations (EISPACK `tred2`/`tql2`).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Eigenpairs of a symmetric matrix, eigenvalues in nonincreasing order.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<T>>,
}

/// Decomposes the row-major symmetric `n×n` matrix `a`.
pub fn symmetric_eigen<T: Scalar>(a: &[T], n: usize) -> Result<SymmetricEigen<T>> {
    if a.len() != n * n {
        return Err(Error::LengthMismatch {
            expected: n * n,
            got: a.len(),
        });
    }
    if n == 0 {
        return Ok(SymmetricEigen {
            values: vec![],
            vectors: vec![],
        });
    }
    let mut v: Vec<Vec<T>> = (0..n).map(|i| a[i * n..(i + 1) * n].to_vec()).collect();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tridiagonalize(&mut v, &mut d, &mut e);
    diagonalize(&mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| (0..n).map(|r| v[r][k]).collect())
        .collect();
    Ok(SymmetricEigen { values, vectors })
}

fn tridiagonalize<T: Scalar>(v: &mut [Vec<T>], d: &mut [T], e: &mut [T]) {
    let n = d.len();
    let zero = T::zero();
    d[..n].copy_from_slice(&v[n - 1][..n]);
    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for &dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = zero;
                v[j][i] = zero;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }
            for j in 0..i {
                let f = d[j];
                v[j][i] = f;
                let mut g = e[j] + v[j][j] * f;
                for k in (j + 1)..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            let mut f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    let delta = f * e[k] + g * d[k];
                    v[k][j] -= delta;
                }
                d[j] = v[i - 1][j];
                v[i][j] = zero;
            }
        }
        d[i] = h;
    }
    for i in 0..n.saturating_sub(1) {
        v[n - 1][i] = v[i][i];
        v[i][i] = T::one();
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    let delta = g * d[k];
                    v[k][j] -= delta;
                }
            }
        }
        for row in v.iter_mut().take(i + 1) {
            row[i + 1] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = zero;
    }
    v[n - 1][n - 1] = T::one();
    e[0] = zero;
}

fn diagonalize<T: Scalar>(v: &mut [Vec<T>], d: &mut [T], e: &mut [T]) -> Result<()> {
    let n = d.len();
    let zero = T::zero();
    let one = T::one();
    let two = T::lit(2.0);
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;
    let mut f = zero;
    let mut tst1 = zero;
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
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::InvalidArgument(
                        "eigenvalue iteration did not converge".to_string(),
                    ));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
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
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        let h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
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
        e[l] = zero;
    }
    Ok(())
}

/// Householder QR factorization of a tall `rows×cols` design matrix, kept
/// so that several responses can be regressed on the same design.
#[derive(Debug, Clone)]
pub struct LeastSquares<T> {
    rows: usize,
    cols: usize,
    /// Column-major Householder vectors and upper triangle.
    qr: Vec<T>,
    rdiag: Vec<T>,
}

impl<T: Scalar> LeastSquares<T> {
    /// `columns[k]` holds column `k` of the design (length `rows`).
    pub fn new(columns: &[Vec<T>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        if cols == 0 {
            return Err(Error::InvalidArgument("empty design".to_string()));
        }
        if rows < cols {
            return Err(Error::TooFewObservations {
                needed: cols,
                got: rows,
            });
        }
        let mut qr = Vec::with_capacity(rows * cols);
        for c in columns {
            if c.len() != rows {
                return Err(Error::LengthMismatch {
                    expected: rows,
                    got: c.len(),
                });
            }
            qr.extend_from_slice(c);
        }
        let col_norms: Vec<T> = columns
            .iter()
            .map(|c| c.iter().fold(T::zero(), |a, &x| a.hypot(x)))
            .collect();
        let mut rdiag = vec![T::zero(); cols];
        for k in 0..cols {
            let (head, tail) = qr.split_at_mut((k + 1) * rows);
            let colk = &mut head[k * rows..];
            let mut nrm = T::zero();
            for &x in &colk[k..] {
                nrm = nrm.hypot(x);
            }
            let tol =
                T::epsilon().sqrt() * T::lit(1.0e-2) * col_norms[k].max(T::min_positive_value());
            if nrm <= tol {
                return Err(Error::RankDeficient { column: k });
            }
            if colk[k] < T::zero() {
                nrm = -nrm;
            }
            for x in &mut colk[k..] {
                *x /= nrm;
            }
            colk[k] += T::one();
            for colj in tail.chunks_exact_mut(rows) {
                let mut s = T::zero();
                for i in k..rows {
                    s += colk[i] * colj[i];
                }
                s = -s / colk[k];
                for i in k..rows {
                    colj[i] += s * colk[i];
                }
            }
            rdiag[k] = -nrm;
        }
        Ok(Self {
            rows,
            cols,
            qr,
            rdiag,
        })
    }

    /// Least-squares coefficients minimizing ‖y − Xβ‖.
    pub fn solve(&self, y: &[T]) -> Result<Vec<T>> {
        if y.len() != self.rows {
            return Err(Error::LengthMismatch {
                expected: self.rows,
                got: y.len(),
            });
        }
        let m = self.rows;
        let mut x = y.to_vec();
        for k in 0..self.cols {
            let colk = &self.qr[k * m..(k + 1) * m];
            let mut s = T::zero();
            for i in k..m {
                s += colk[i] * x[i];
            }
            s = -s / colk[k];
            for i in k..m {
                x[i] += s * colk[i];
            }
        }
        for k in (0..self.cols).rev() {
            x[k] /= self.rdiag[k];
            let colk = &self.qr[k * m..(k + 1) * m];
            let xk = x[k];
            for i in 0..k {
                x[i] -= xk * colk[i];
            }
        }
        x.truncate(self.cols);
        Ok(x)
    }
}
