use serde::Serialize;

use super::data::SyntheticDataset;
use super::mlp::Mlp;
use crate::linalg::{sym_eig, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProbeTarget {
    CoreTask,
    ShortcutTask,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub active_neurons: Vec<usize>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

/// Fits a fresh L1-penalised linear head on frozen last-hidden activations by
/// proximal gradient descent.
pub fn l1_probe(model: &Mlp<f64>, ds: &SyntheticDataset, target: ProbeTarget, l1_weight: f64) -> ProbeReport {
    let feats: Vec<Vec<f64>> = (0..ds.len()).map(|i| model.last_hidden(ds.x.row(i))).collect();
    let vals = match target {
        ProbeTarget::CoreTask => &ds.v_core,
        ProbeTarget::ShortcutTask => &ds.v_shortcut,
    };
    let y: Vec<f64> = vals.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
    lasso(&feats, &y, l1_weight, 20_000, 1e-12)
}

/// `min 1/(2n) ‖y − Fw − b‖² + λ‖w‖₁` with an unpenalised intercept.
pub fn lasso(feats: &[Vec<f64>], y: &[f64], lambda: f64, max_iter: usize, tol: f64) -> ProbeReport {
    let n = feats.len();
    let p = feats[0].len();
    let nf = n as f64;
    // centring removes the intercept from the coupled problem
    let fm: Vec<f64> = (0..p).map(|j| feats.iter().map(|r| r[j]).sum::<f64>() / nf).collect();
    let ym = y.iter().sum::<f64>() / nf;
    let fc = Mat::from_fn(n, p, |i, j| feats[i][j] - fm[j]);
    let yc: Vec<f64> = y.iter().map(|v| v - ym).collect();
    let gram = Mat::from_fn(p, p, |a, b| (0..n).map(|i| fc[(i, a)] * fc[(i, b)]).sum::<f64>() / nf);
    let fty: Vec<f64> = (0..p).map(|a| (0..n).map(|i| fc[(i, a)] * yc[i]).sum::<f64>() / nf).collect();
    let lip = sym_eig(&gram).values[0].max(1e-12);
    let step = 1.0 / lip;
    let mut w = vec![0.0; p];
    let mut iters = 0;
    for it in 0..max_iter {
        iters = it + 1;
        let gw = gram.matvec(&w);
        let mut change = 0.0f64;
        for j in 0..p {
            let z = w[j] - step * (gw[j] - fty[j]);
            let nw = z.signum() * (z.abs() - step * lambda).max(0.0);
            change = change.max((nw - w[j]).abs());
            w[j] = nw;
        }
        if change <= tol {
            break;
        }
    }
    let bias = ym - fm.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
    let wmax = w.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let active = if wmax == 0.0 {
        Vec::new()
    } else {
        (0..p).filter(|&j| w[j].abs() > 1e-3 * wmax).collect()
    };
    ProbeReport { active_neurons: active, weights: w, bias, iterations: iters }
}

/// Mean silhouette coefficient of a two-group labelling under Euclidean distance.
pub fn silhouette(coords: &[Vec<f64>], groups: &[u8]) -> f64 {
    let n = coords.len();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let mut total = 0.0;
    for i in 0..n {
        let (mut s_same, mut n_same, mut s_other, mut n_other) = (0.0, 0usize, 0.0, 0usize);
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = dist(&coords[i], &coords[j]);
            if groups[i] == groups[j] {
                s_same += d;
                n_same += 1;
            } else {
                s_other += d;
                n_other += 1;
            }
        }
        if n_same == 0 || n_other == 0 {
            continue;
        }
        let a = s_same / n_same as f64;
        let b = s_other / n_other as f64;
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    total / n as f64
}

impl Mlp<f64> {
    /// Last-hidden activations of every sample, row per sample.
    pub fn hidden_features(&self, ds: &SyntheticDataset) -> Vec<Vec<f64>> {
        (0..ds.len()).map(|i| self.last_hidden(ds.x.row(i))).collect()
    }
}
