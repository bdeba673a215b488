//! L2-regularized logistic regression by full-batch gradient descent with
//! step halving, so the objective never increases between epochs, and an
//! exact Newton solver for the fully penalized objective.

use nalgebra::{DMatrix, DVector};

use crate::dataset::sigmoid;

use super::encode::Matrix;

#[derive(Debug, Clone, Copy)]
pub struct LogisticOptions {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    /// Fit an unpenalized intercept. When false the intercept is expected to
    /// live in a constant design column (and is penalized with the rest).
    pub fit_intercept: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Objective after initialization and after each epoch.
    pub losses: Vec<f64>,
}

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean log-loss plus `l2 / 2 * |w|^2`.
pub fn objective(x: &Matrix, y: &[bool], weights: &[f64], bias: f64, l2: f64) -> f64 {
    let mut total = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let z = dot(x.row(i), weights) + bias;
        total += log1p_exp(z) - if yi { z } else { 0.0 };
    }
    total / y.len() as f64 + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gradient(x: &Matrix, y: &[bool], weights: &[f64], bias: f64, l2: f64) -> (Vec<f64>, f64) {
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let row = x.row(i);
        let r = sigmoid(dot(row, weights) + bias) - if yi { 1.0 } else { 0.0 };
        for (g, v) in gw.iter_mut().zip(row) {
            *g += r * v;
        }
        gb += r;
    }
    let n = y.len() as f64;
    for (g, w) in gw.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    (gw, gb / n)
}

pub fn fit(x: &Matrix, y: &[bool], opts: &LogisticOptions) -> LogisticFit {
    let mut weights = vec![0.0; x.cols];
    let mut bias = 0.0;
    let mut loss = objective(x, y, &weights, bias, opts.l2);
    let mut losses = vec![loss];
    for _ in 0..opts.epochs {
        let (gw, gb) = gradient(x, y, &weights, bias, opts.l2);
        let gb = if opts.fit_intercept { gb } else { 0.0 };
        let mut step = opts.learning_rate;
        let mut accepted = false;
        for _ in 0..60 {
            let cand_w: Vec<f64> = weights.iter().zip(&gw).map(|(w, g)| w - step * g).collect();
            let cand_b = bias - step * gb;
            let cand_loss = objective(x, y, &cand_w, cand_b, opts.l2);
            if cand_loss <= loss {
                weights = cand_w;
                bias = cand_b;
                loss = cand_loss;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        losses.push(loss);
        if !accepted {
            break;
        }
    }
    LogisticFit {
        weights,
        bias,
        losses,
    }
}

/// Minimizer of [`objective`] with every weight penalized and no separate
/// intercept, by Newton steps with backtracking. Stops when the gradient
/// norm falls below `tol`. Needs `l2 > 0`, which makes the objective
/// strictly convex.
pub fn fit_newton(x: &Matrix, y: &[bool], l2: f64, max_iter: usize, tol: f64) -> LogisticFit {
    assert!(l2 > 0.0, "Newton solver needs a positive penalty");
    let p = x.cols;
    let n = y.len() as f64;
    let mut weights = vec![0.0; p];
    let mut loss = objective(x, y, &weights, 0.0, l2);
    let mut losses = vec![loss];
    for _ in 0..max_iter {
        let (g, _) = gradient(x, y, &weights, 0.0, l2);
        if g.iter().map(|v| v * v).sum::<f64>().sqrt() < tol {
            break;
        }
        let mut h = DMatrix::<f64>::identity(p, p) * l2;
        for i in 0..y.len() {
            let row = x.row(i);
            let s = sigmoid(dot(row, &weights));
            let c = s * (1.0 - s) / n;
            for a in 0..p {
                let ra = row[a] * c;
                if ra != 0.0 {
                    for b in a..p {
                        h[(a, b)] += ra * row[b];
                    }
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        let step = h
            .cholesky()
            .expect("penalized Hessian is positive definite")
            .solve(&DVector::from_vec(g));
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = weights
                .iter()
                .zip(step.iter())
                .map(|(w, d)| w - t * d)
                .collect();
            let cand_loss = objective(x, y, &cand, 0.0, l2);
            if cand_loss <= loss {
                weights = cand;
                loss = cand_loss;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        losses.push(loss);
        if !accepted {
            break;
        }
    }
    LogisticFit {
        weights,
        bias: 0.0,
        losses,
    }
}
