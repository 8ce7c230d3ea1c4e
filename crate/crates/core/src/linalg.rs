//! Small dense linear algebra: a row-major matrix, cyclic Jacobi for
//! symmetric eigenvalues and one-sided Jacobi SVD.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Matrix { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
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

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &Matrix) -> Matrix {
        assert!(self.rows == 0 || other.rows == 0 || self.cols == other.cols);
        let cols = if self.rows == 0 { other.cols } else { self.cols };
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Matrix {
            rows: self.rows + other.rows,
            cols,
            data,
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        Matrix::from_vec(rows.len(), self.cols, data)
    }

    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(self.rows, cols.len());
        for i in 0..self.rows {
            for (k, &j) in cols.iter().enumerate() {
                out[(i, k)] = self[(i, j)];
            }
        }
        out
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

const MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
///
/// Only the lower triangle is trusted; the input is symmetrised first.
pub fn symmetric_eigenvalues(a: &Matrix) -> Vec<f64> {
    assert_eq!(a.rows, a.cols, "square matrix required");
    let n = a.rows;
    let mut m = a.clone();
    for i in 0..n {
        for j in 0..i {
            let v = m[(i, j)];
            m[(j, i)] = v;
        }
    }
    let scale = m.frobenius();
    if scale == 0.0 {
        return vec![0.0; n];
    }
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let (c, s) = jacobi_rotation(m[(p, p)], m[(q, q)], apq);
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Rotation `(c, s)` that annihilates the off-diagonal entry of the 2×2
/// symmetric block `[[app, apq], [apq, aqq]]`.
fn jacobi_rotation(app: f64, aqq: f64, apq: f64) -> (f64, f64) {
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    (c, t * c)
}

/// Thin SVD `A = U Σ Vᵀ` of a tall matrix.
#[derive(Debug, Clone)]
pub struct Svd {
    /// Singular values, non-increasing.
    pub singular_values: Vec<f64>,
    /// Right singular vectors as rows (`p × p`), aligned with
    /// `singular_values`.
    pub vt: Matrix,
}

/// One-sided Jacobi SVD (Hestenes). Columns of `a` are orthogonalised by
/// plane rotations, which are accumulated into `V`.
pub fn svd(a: &Matrix) -> Svd {
    let (m, p) = (a.rows, a.cols);
    let mut u = a.clone();
    let mut v = Matrix::identity(p);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..p {
            for j in i + 1..p {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for k in 0..m {
                    let (ui, uj) = (u[(k, i)], u[(k, j)]);
                    alpha += ui * ui;
                    beta += uj * uj;
                    gamma += ui * uj;
                }
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..m {
                    let (ui, uj) = (u[(k, i)], u[(k, j)]);
                    u[(k, i)] = c * ui - s * uj;
                    u[(k, j)] = s * ui + c * uj;
                }
                for k in 0..p {
                    let (vi, vj) = (v[(k, i)], v[(k, j)]);
                    v[(k, i)] = c * vi - s * vj;
                    v[(k, j)] = s * vi + c * vj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..p)
        .map(|j| (0..m).map(|k| u[(k, j)] * u[(k, j)]).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));
    let mut vt = Matrix::zeros(p, p);
    for (r, &j) in order.iter().enumerate() {
        for k in 0..p {
            vt[(r, k)] = v[(k, j)];
        }
    }
    Svd {
        singular_values: order.iter().map(|&j| norms[j]).collect(),
        vt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_known_matrices() {
        let k4 = Matrix::from_rows(&[
            [0.0, 1.0, 1.0, 1.0],
            [1.0, 0.0, 1.0, 1.0],
            [1.0, 1.0, 0.0, 1.0],
            [1.0, 1.0, 1.0, 0.0],
        ]);
        let e = symmetric_eigenvalues(&k4);
        let want = [-1.0, -1.0, -1.0, 3.0];
        for (a, b) in e.iter().zip(want) {
            assert!((a - b).abs() < 1e-12, "{e:?}");
        }
        let lap_p3 = Matrix::from_rows(&[[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]]);
        let e = symmetric_eigenvalues(&lap_p3);
        for (a, b) in e.iter().zip([0.0, 1.0, 3.0]) {
            assert!((a - b).abs() < 1e-12, "{e:?}");
        }
        assert_eq!(symmetric_eigenvalues(&Matrix::zeros(3, 3)), vec![0.0; 3]);
    }

    #[test]
    fn svd_reconstructs() {
        let a = Matrix::from_rows(&[
            [1.0, 2.0, 0.5],
            [-1.0, 0.0, 3.0],
            [2.0, 1.0, 1.0],
            [0.0, -2.0, 1.5],
        ]);
        let s = svd(&a);
        assert!(s.singular_values.windows(2).all(|w| w[0] >= w[1]));
        // A V = U Σ, so ||A||_F^2 = Σ σ²
        let fro2: f64 = s.singular_values.iter().map(|x| x * x).sum();
        assert!((fro2 - a.frobenius().powi(2)).abs() < 1e-12);
        let vvt = s.vt.matmul(&s.vt.transpose());
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((vvt[(i, j)] - want).abs() < 1e-12);
            }
        }
    }
}
