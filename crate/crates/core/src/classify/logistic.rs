use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const L2_PENALTY: f64 = 1.0;
pub const GRAD_TOL: f64 = 1e-6;
pub const MAX_ITER: usize = 2000;
const ARMIJO: f64 = 1e-4;

/// Multinomial softmax regression with an L2 penalty on the weights
/// (intercepts unpenalised).
///
/// Objective: `mean_i −log p(y_i | x_i) + λ/(2N) ‖W‖²`, i.e. the summed
/// log-loss plus `λ/2 ‖W‖²`, rescaled by `1/N`.
#[derive(Debug, Clone)]
pub struct LogisticRegression {
    /// `n_classes × p` weights.
    pub weights: Matrix,
    pub intercepts: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub model: LogisticRegression,
    /// Objective value after every accepted step (first entry: start).
    pub objective_trace: Vec<f64>,
    pub grad_inf_norm: f64,
    pub iterations: usize,
}

/// Flat parameter vector layout: K·p weights (row-major) then K intercepts.
pub(crate) struct Problem<'a> {
    pub x: &'a Matrix,
    pub y: &'a [usize],
    pub k: usize,
    pub lambda: f64,
}

impl Problem<'_> {
    fn dims(&self) -> (usize, usize, usize) {
        (self.x.rows(), self.x.cols(), self.k)
    }

    pub fn objective(&self, theta: &[f64]) -> f64 {
        self.value_and_grad(theta, false).0
    }

    pub fn value_and_grad(&self, theta: &[f64], want_grad: bool) -> (f64, Vec<f64>) {
        let (n, p, k) = self.dims();
        let (w, b) = theta.split_at(k * p);
        let per_row: Vec<(f64, Vec<f64>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let row = self.x.row(i);
                let logits: Vec<f64> = (0..k)
                    .map(|c| b[c] + row.iter().zip(&w[c * p..(c + 1) * p]).map(|(a, b)| a * b).sum::<f64>())
                    .collect();
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
                let lse = max + z.ln();
                let loss = lse - logits[self.y[i]];
                let probs = if want_grad {
                    logits.iter().map(|l| (l - lse).exp()).collect()
                } else {
                    Vec::new()
                };
                (loss, probs)
            })
            .collect();
        let nf = n as f64;
        let data: f64 = per_row.iter().map(|(l, _)| l).sum::<f64>() / nf;
        let reg = self.lambda / (2.0 * nf) * w.iter().map(|v| v * v).sum::<f64>();
        if !want_grad {
            return (data + reg, Vec::new());
        }
        let mut grad = vec![0.0; theta.len()];
        for (i, (_, probs)) in per_row.iter().enumerate() {
            let row = self.x.row(i);
            for c in 0..k {
                let r = probs[c] - (self.y[i] == c) as u8 as f64;
                if r == 0.0 {
                    continue;
                }
                for j in 0..p {
                    grad[c * p + j] += r * row[j];
                }
                grad[k * p + c] += r;
            }
        }
        for (j, g) in grad.iter_mut().enumerate() {
            *g /= nf;
            if j < k * p {
                *g += self.lambda / nf * w[j];
            }
        }
        (data + reg, grad)
    }
}

impl LogisticRegression {
    /// Full-batch gradient descent with Armijo backtracking.
    pub fn fit(x: &Matrix, y: &[usize], n_classes: usize) -> Result<LogisticFit> {
        let problem = Problem {
            x,
            y,
            k: n_classes,
            lambda: L2_PENALTY,
        };
        let dim = n_classes * (x.cols() + 1);
        let mut theta = vec![0.0; dim];
        let (mut f, mut g) = problem.value_and_grad(&theta, true);
        let mut trace = vec![f];
        let mut step = 1.0;
        let mut iterations = 0;
        let inf = |g: &[f64]| g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        while inf(&g) >= GRAD_TOL && iterations < MAX_ITER {
            let g2: f64 = g.iter().map(|v| v * v).sum();
            let mut t = step * 2.0;
            let (candidate, f_new) = loop {
                let cand: Vec<f64> = theta.iter().zip(&g).map(|(a, b)| a - t * b).collect();
                let f_new = problem.objective(&cand);
                if f_new <= f - ARMIJO * t * g2 {
                    break (cand, f_new);
                }
                t *= 0.5;
                if t < 1e-20 {
                    return Err(Error::Numerical("logistic line search failed".into()));
                }
            };
            step = t;
            theta = candidate;
            let (fv, gv) = problem.value_and_grad(&theta, true);
            debug_assert!((fv - f_new).abs() <= 1e-12 * fv.abs().max(1.0));
            f = fv;
            g = gv;
            trace.push(f);
            iterations += 1;
        }
        let p = x.cols();
        let model = LogisticRegression {
            weights: Matrix::from_vec(n_classes, p, theta[..n_classes * p].to_vec()),
            intercepts: theta[n_classes * p..].to_vec(),
        };
        Ok(LogisticFit {
            model,
            objective_trace: trace,
            grad_inf_norm: inf(&g),
            iterations,
        })
    }

    /// Mean absolute coefficient per feature over classes (unnormalised).
    pub fn importance(&self) -> Vec<f64> {
        let k = self.weights.rows() as f64;
        (0..self.weights.cols())
            .map(|j| self.weights.column(j).iter().map(|w| w.abs()).sum::<f64>() / k)
            .collect()
    }

    pub fn predict_proba(&self, x: &Matrix) -> Vec<Vec<f64>> {
        let k = self.weights.rows();
        (0..x.rows())
            .map(|i| {
                let row = x.row(i);
                let logits: Vec<f64> = (0..k)
                    .map(|c| self.intercepts[c] + row.iter().zip(self.weights.row(c)).map(|(a, b)| a * b).sum::<f64>())
                    .collect();
                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|v| v / s).collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let x = Matrix::from_rows(&[
            [0.5, -1.0, 2.0],
            [1.5, 0.3, -0.7],
            [-0.2, 0.8, 0.1],
            [2.0, -1.5, 0.4],
            [-1.1, 0.0, 1.3],
        ]);
        let y = [0, 2, 1, 0, 2];
        let problem = Problem { x: &x, y: &y, k: 3, lambda: 1.0 };
        let theta: Vec<f64> = (0..12).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let (_, g) = problem.value_and_grad(&theta, true);
        let h = 1e-6;
        for j in 0..theta.len() {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (problem.objective(&up) - problem.objective(&dn)) / (2.0 * h);
            let rel = (fd - g[j]).abs() / g[j].abs().max(1e-8);
            assert!(rel < 1e-5, "coord {j}: analytic {} fd {}", g[j], fd);
        }
    }
}
