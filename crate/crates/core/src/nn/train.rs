use rand::seq::SliceRandom;
use serde::Serialize;

use super::data::{FeatureKind, SyntheticDataset};
use super::mlp::Mlp;
use crate::error::{Error, Result};
use crate::feature::{shortcut_bias, LabeledPrediction};
use crate::linalg::{lanczos_top, sym_eig, Mat};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BatchMode {
    FullBatch,
    MiniBatch(usize),
}

impl std::str::FromStr for BatchMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "full" {
            return Ok(BatchMode::FullBatch);
        }
        s.parse::<usize>()
            .ok()
            .filter(|&b| b > 0)
            .map(BatchMode::MiniBatch)
            .ok_or_else(|| Error::ConfigError(format!("batch must be `full` or a positive integer, got `{s}`")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainConfig {
    pub batch: BatchMode,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub acc: f64,
    /// Shortcut bias of the shortcut feature against the core feature on the probe set.
    pub bias: f64,
    pub conflict_accuracy: f64,
    pub score_core: f64,
    pub score_shortcut: f64,
    pub score_noise: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainingLog {
    /// Entry 0 is the untrained model.
    pub epochs: Vec<EpochRecord>,
    /// Samples left out of every epoch because the batch size does not divide n.
    pub dropped_per_epoch: usize,
}

impl TrainingLog {
    pub fn last(&self) -> &EpochRecord {
        self.epochs.last().expect("log has the initial record")
    }
}

pub fn predictions(model: &Mlp<f64>, ds: &SyntheticDataset) -> Vec<f64> {
    (0..ds.len()).map(|i| model.forward(ds.x.row(i))).collect()
}

/// Fraction of samples where `sign f` matches the labels induced by `values`.
pub fn feature_score(outputs: &[f64], values: &[u8]) -> f64 {
    let hits = outputs
        .iter()
        .zip(values)
        .filter(|(&f, &v)| (f >= 0.0) == (v == 1))
        .count();
    hits as f64 / outputs.len() as f64
}

pub fn evaluate(model: &Mlp<f64>, train: &SyntheticDataset, probe: &SyntheticDataset, epoch: usize) -> Result<EpochRecord> {
    let out = predictions(model, train);
    let n = train.len() as f64;
    let loss = out.iter().zip(&train.y).map(|(f, y)| (f - y).powi(2)).sum::<f64>() / (2.0 * n);
    let acc = out.iter().zip(&train.y).filter(|(f, y)| (**f >= 0.0) == (**y > 0.0)).count() as f64 / n;
    let pout = predictions(model, probe);
    let lp = LabeledPrediction::from_outputs(probe.labels_i8(), &pout)?;
    let rep = shortcut_bias::<f64>(&probe.feature(FeatureKind::Shortcut)?, &probe.feature(FeatureKind::Core)?, &lp)?;
    Ok(EpochRecord {
        epoch,
        loss,
        acc,
        bias: rep.shortcut_bias,
        conflict_accuracy: rep.conflict_accuracy,
        score_core: feature_score(&pout, &probe.v_core),
        score_shortcut: feature_score(&pout, &probe.v_shortcut),
        score_noise: feature_score(&pout, &probe.v_noise),
    })
}

/// Gradient descent on the mean-squared error, logging probe metrics each epoch.
pub fn train(model: &mut Mlp<f64>, data: &SyntheticDataset, probe: &SyntheticDataset, cfg: &TrainConfig) -> Result<TrainingLog> {
    if data.x.cols != model.widths[0] || probe.x.cols != model.widths[0] {
        return Err(Error::LengthMismatch(format!("input dim {} vs model {}", data.x.cols, model.widths[0])));
    }
    let n = data.len();
    let bsz = match cfg.batch {
        BatchMode::FullBatch => n,
        BatchMode::MiniBatch(b) if b <= n => b,
        BatchMode::MiniBatch(b) => return Err(Error::ConfigError(format!("batch {b} exceeds {n} samples"))),
    };
    let dropped = n % bsz;
    let mut log = vec![evaluate(model, data, probe, 0)?];
    let initial = log[0].loss;
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 1..=cfg.epochs {
        if bsz < n {
            let mut rng = substream(cfg.seed, epoch as u64);
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks_exact(bsz) {
            let (_, g) = model.loss_and_grad(&data.x, &data.y, chunk);
            model.apply(&g, cfg.lr);
        }
        let rec = evaluate(model, data, probe, epoch)?;
        if !rec.loss.is_finite() || rec.loss > 10.0 * initial {
            return Err(Error::DivergenceError { epoch, loss: rec.loss });
        }
        log.push(rec);
    }
    Ok(TrainingLog { epochs: log, dropped_per_epoch: dropped })
}

#[derive(Debug, Clone, Serialize)]
pub struct TangentPca {
    /// Row `i` holds the coordinates of sample `i`.
    pub coords: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

// Above this many samples the n×n gradient Gram is left implicit.
const DENSE_PCA_LIMIT: usize = 1500;

/// Projects centred per-sample parameter gradients onto their top `k` principal directions.
pub fn tangent_pca(model: &Mlp<f64>, ds: &SyntheticDataset, k: usize) -> Result<TangentPca> {
    let n = ds.len();
    if k == 0 || k >= n {
        return Err(Error::ParamError(format!("k = {k} must lie in 1..{n}")));
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| model.param_gradient(ds.x.row(i))).collect();
    let p = rows[0].len();
    let mut mean = vec![0.0; p];
    for r in &rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n as f64;
        }
    }
    let g = Mat::from_fn(n, p, |i, j| rows[i][j] - mean[j]);
    // eigenvectors of G Gᵀ give the principal scores directly
    let gt = g.transpose();
    let eig = if n <= DENSE_PCA_LIMIT {
        sym_eig(&g.matmul(&gt))
    } else {
        let start: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
        lanczos_top(n, k, |v| g.matvec(&gt.matvec(v)), &start, 1e-10)
    };
    let mut coords = vec![vec![0.0; k]; n];
    for c in 0..k {
        let lam = eig.values[c].max(0.0);
        let col = eig.vectors.col(c);
        // deterministic sign: largest-magnitude entry positive
        let piv = col.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        let sgn = if piv < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            coords[i][c] = sgn * col[i] * lam.sqrt();
        }
    }
    Ok(TangentPca { coords, eigenvalues: eig.values[..k].to_vec() })
}
