//! Joint PCA-by-SVD alignment of source and target anchor features.
//!
//! Both domains are z-scored with pooled statistics, centred, and rotated
//! onto the right singular vectors of the stacked matrix. Parameters are
//! fitted on training rows only and frozen for projection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{compensated_sum, CONSTANT_STD};
use crate::linalg::{svd, Matrix};

/// Components with σ_k < `RANK_TOL`·σ_1 are dropped.
pub const RANK_TOL: f64 = 1e-10;
/// Condition number above which the fit asks for anchor fallback.
pub const MAX_CONDITION: f64 = 1e8;
pub const MIN_ROWS: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentProjection {
    pub anchors: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub center: Vec<f64>,
    /// `d × p`, orthonormal rows.
    pub basis: Matrix,
    /// Singular values of the kept components, non-increasing.
    pub singular_values: Vec<f64>,
    /// All singular values before truncation.
    pub all_singular_values: Vec<f64>,
    pub fallback_triggered: bool,
}

impl AlignmentProjection {
    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn write_json(&self, out: impl std::io::Write) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// Standardised, centred rows (the space the basis lives in).
    pub fn standardize(&self, x: &Matrix) -> Result<Matrix> {
        let p = self.mean.len();
        if x.cols() != p {
            return Err(Error::invalid(format!(
                "alignment fitted on {p} anchor columns, got {}",
                x.cols()
            )));
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j] - self.center[j];
            }
        }
        Ok(out)
    }

    /// Projects rows onto the stored basis (`N × d`). Never refits.
    pub fn project(&self, x: &Matrix) -> Result<Matrix> {
        let z = self.standardize(x)?;
        let d = self.dim();
        let rows: Vec<Vec<f64>> = (0..z.rows())
            .into_par_iter()
            .map(|i| {
                let r = z.row(i);
                (0..d)
                    .map(|k| r.iter().zip(self.basis.row(k)).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect();
        Ok(Matrix::from_vec(z.rows(), d, rows.concat()))
    }

    /// Maps projected rows back to the standardised, centred space.
    pub fn back_project(&self, y: &Matrix) -> Matrix {
        y.matmul(&self.basis)
    }
}

/// Fits the joint projection on stacked `source` and `target` rows (either
/// may be empty). `anchors` records which descriptors the columns are.
pub fn fit_alignment(source: &Matrix, target: &Matrix, anchors: &[usize]) -> Result<AlignmentProjection> {
    let joint = source.vstack(target);
    if joint.rows() < MIN_ROWS {
        return Err(Error::invalid(format!(
            "alignment needs at least {MIN_ROWS} rows, got {}",
            joint.rows()
        )));
    }
    let p = joint.cols();
    if p == 0 || (!anchors.is_empty() && anchors.len() != p) {
        return Err(Error::invalid("anchor list does not match the column count"));
    }
    let n = joint.rows() as f64;
    let mut mean = vec![0.0; p];
    let mut std = vec![1.0; p];
    for j in 0..p {
        let col = joint.column(j);
        let mu = compensated_sum(col.iter().copied()) / n;
        let sd = (compensated_sum(col.iter().map(|x| (x - mu) * (x - mu))) / n).sqrt();
        mean[j] = mu;
        // constant columns become exact zeros and drop out as null components
        std[j] = if sd < CONSTANT_STD { 1.0 } else { sd };
    }
    let mut z = joint.clone();
    for i in 0..z.rows() {
        for (j, v) in z.row_mut(i).iter_mut().enumerate() {
            *v = (*v - mean[j]) / std[j];
        }
    }
    let center: Vec<f64> = (0..p).map(|j| compensated_sum(z.column(j)) / n).collect();
    for i in 0..z.rows() {
        for (j, v) in z.row_mut(i).iter_mut().enumerate() {
            *v -= center[j];
        }
    }
    let dec = svd(&z);
    let s1 = dec.singular_values.first().copied().unwrap_or(0.0);
    let kept = if s1 > 0.0 {
        dec.singular_values.iter().take_while(|&&s| s >= RANK_TOL * s1).count()
    } else {
        0
    };
    let mut basis = Matrix::zeros(kept, p);
    for k in 0..kept {
        let row = dec.vt.row(k);
        // sign convention: largest-magnitude entry positive
        let mut big = 0;
        for j in 1..p {
            if row[j].abs() > row[big].abs() {
                big = j;
            }
        }
        let sign = if row[big] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..p {
            basis[(k, j)] = sign * row[j];
        }
    }
    let singular_values = dec.singular_values[..kept].to_vec();
    let condition = if kept > 0 { s1 / singular_values[kept - 1] } else { f64::INFINITY };
    Ok(AlignmentProjection {
        anchors: if anchors.is_empty() { (0..p).collect() } else { anchors.to_vec() },
        mean,
        std,
        center,
        basis,
        singular_values,
        all_singular_values: dec.singular_values,
        fallback_triggered: kept < 2 || condition > MAX_CONDITION,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_rows(n: usize, p: usize, seed: u64) -> Matrix {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        Matrix::from_vec(n, p, (0..n * p).map(|_| next()).collect())
    }

    #[test]
    fn rank_two_data_keeps_two_components() {
        let base = lcg_rows(40, 2, 1);
        let mix = Matrix::from_rows(&[
            [1.0, 0.5, -0.3, 2.0, 0.0, 1.1, -0.7, 0.2],
            [0.0, 1.0, 0.8, -1.0, 0.3, 0.4, 0.9, -1.2],
        ]);
        let x = base.matmul(&mix);
        let p = fit_alignment(&x, &Matrix::zeros(0, 8), &[]).unwrap();
        assert_eq!(p.dim(), 2);
        assert!(!p.fallback_triggered);
    }

    #[test]
    fn duplicated_column_drops_one_component() {
        let mut x = lcg_rows(60, 8, 3);
        for i in 0..60 {
            let v = x[(i, 2)];
            x[(i, 5)] = v;
        }
        let p = fit_alignment(&x.select_columns(&[0, 1, 2, 3]), &x.select_columns(&[0, 1, 2, 3]).vstack(&Matrix::zeros(0, 4)), &[]).unwrap();
        assert_eq!(p.dim(), 4);
        let p = fit_alignment(&x, &Matrix::zeros(0, 8), &[]).unwrap();
        assert_eq!(p.dim(), 7);
    }

    #[test]
    fn basis_rows_are_orthonormal_with_sign_convention() {
        let s = lcg_rows(30, 8, 5);
        let t = lcg_rows(20, 8, 6);
        let p = fit_alignment(&s, &t, &[0, 1, 2, 3, 4, 5, 6, 7]).unwrap();
        let g = p.basis.matmul(&p.basis.transpose());
        for i in 0..p.dim() {
            for j in 0..p.dim() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - want).abs() < 1e-9);
            }
            let row = p.basis.row(i);
            let big = row.iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(big > 0.0);
        }
        assert!(p.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn projection_is_centred_and_pure() {
        let s = lcg_rows(30, 8, 7);
        let t = lcg_rows(25, 8, 8);
        let p = fit_alignment(&s, &t, &[]).unwrap();
        let y = p.project(&s.vstack(&t)).unwrap();
        for k in 0..y.cols() {
            let m = y.column(k).iter().sum::<f64>() / y.rows() as f64;
            assert!(m.abs() < 1e-9);
        }
        assert_eq!(p.project(&t).unwrap(), p.project(&t).unwrap());
        assert!(p.project(&Matrix::zeros(2, 7)).is_err());
    }

    #[test]
    fn too_few_rows() {
        assert!(fit_alignment(&lcg_rows(4, 3, 1), &lcg_rows(4, 3, 2), &[]).is_err());
    }

    #[test]
    fn single_effective_component_triggers_fallback() {
        let base = lcg_rows(20, 1, 9);
        let x = base.matmul(&Matrix::from_rows(&[[1.0, 2.0, -1.0]]));
        let p = fit_alignment(&x, &Matrix::zeros(0, 3), &[]).unwrap();
        assert_eq!(p.dim(), 1);
        assert!(p.fallback_triggered);
    }
}
