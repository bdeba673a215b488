//! Gradient-boosted depth-1 trees on the log-loss.

use serde::{Deserialize, Serialize};

use super::encode::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    /// Encoded column index.
    pub feature: usize,
    pub threshold: f64,
    /// Added to the score when `x <= threshold`.
    pub left: f64,
    pub right: f64,
}

impl Stump {
    pub fn apply(&self, row: &[f64]) -> f64 {
        if row[self.feature] <= self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StumpEnsemble {
    pub base_score: f64,
    pub stumps: Vec<Stump>,
}

impl StumpEnsemble {
    pub fn score(&self, row: &[f64]) -> f64 {
        self.base_score + self.stumps.iter().map(|s| s.apply(row)).sum::<f64>()
    }
}

struct Split {
    gain: f64,
    stump: Stump,
}

/// Best split of one column given per-row gradients and hessians.
fn best_split(
    x: &Matrix,
    order: &[usize],
    feature: usize,
    grad: &[f64],
    hess: &[f64],
    totals: (f64, f64),
    l2: f64,
    shrinkage: f64,
) -> Option<Split> {
    let reg = l2 + 1e-12;
    let (g_all, h_all) = totals;
    let parent = g_all * g_all / (h_all + reg);
    let (mut gl, mut hl) = (0.0, 0.0);
    let mut best: Option<Split> = None;
    for k in 0..order.len() - 1 {
        let i = order[k];
        gl += grad[i];
        hl += hess[i];
        let here = x.data[i * x.cols + feature];
        let next = x.data[order[k + 1] * x.cols + feature];
        if next <= here {
            continue;
        }
        let (gr, hr) = (g_all - gl, h_all - hl);
        let gain = gl * gl / (hl + reg) + gr * gr / (hr + reg) - parent;
        if best.as_ref().is_none_or(|b| gain > b.gain) {
            best = Some(Split {
                gain,
                stump: Stump {
                    feature,
                    threshold: 0.5 * (here + next),
                    left: -shrinkage * gl / (hl + reg),
                    right: -shrinkage * gr / (hr + reg),
                },
            });
        }
    }
    best
}

pub fn fit(x: &Matrix, y: &[bool], n_stumps: usize, shrinkage: f64, l2: f64) -> StumpEnsemble {
    let n = y.len();
    let positives = y.iter().filter(|&&v| v).count() as f64;
    let p0 = (positives / n as f64).clamp(1e-6, 1.0 - 1e-6);
    let base_score = (p0 / (1.0 - p0)).ln();
    let orders: Vec<Vec<usize>> = (0..x.cols)
        .map(|j| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x.data[a * x.cols + j].total_cmp(&x.data[b * x.cols + j]));
            idx
        })
        .collect();
    let mut scores = vec![base_score; n];
    let mut stumps = Vec::with_capacity(n_stumps);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for _ in 0..n_stumps {
        for i in 0..n {
            let p = crate::dataset::sigmoid(scores[i]);
            grad[i] = p - if y[i] { 1.0 } else { 0.0 };
            hess[i] = p * (1.0 - p);
        }
        let totals = (grad.iter().sum::<f64>(), hess.iter().sum::<f64>());
        let best = (0..x.cols)
            .filter_map(|j| best_split(x, &orders[j], j, &grad, &hess, totals, l2, shrinkage))
            .fold(None::<Split>, |acc, s| match acc {
                Some(a) if a.gain >= s.gain => Some(a),
                _ => Some(s),
            });
        let Some(split) = best else { break };
        for (i, s) in scores.iter_mut().enumerate() {
            *s += split.stump.apply(x.row(i));
        }
        stumps.push(split.stump);
    }
    StumpEnsemble { base_score, stumps }
}
