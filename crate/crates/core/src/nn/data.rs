use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::feature::FeatureAssignment;
use crate::linalg::Mat;
use crate::rng::substream;

#[derive(Debug, Clone, Serialize)]
pub struct SyntheticDatasetConfig {
    pub n_samples: usize,
    pub d_core: usize,
    pub d_shortcut: usize,
    pub d_noise: usize,
    pub sep_core: f64,
    pub sep_shortcut: f64,
    /// Probability that the shortcut value matches the core value.
    pub rho_sc: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SyntheticDatasetConfig {
    fn default() -> Self {
        SyntheticDatasetConfig {
            n_samples: 1024,
            d_core: 16,
            d_shortcut: 16,
            d_noise: 16,
            sep_core: 1.0,
            sep_shortcut: 2.0,
            rho_sc: 0.9,
            noise_std: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticDatasetConfig {
    pub fn dim(&self) -> usize {
        self.d_core + self.d_shortcut + self.d_noise
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::ConfigError("need at least two samples".into()));
        }
        if self.d_core == 0 || self.d_shortcut == 0 {
            return Err(Error::ConfigError("core and shortcut blocks need positive dimension".into()));
        }
        if !(self.rho_sc > 0.5 && self.rho_sc <= 1.0) {
            return Err(Error::ConfigError(format!("rho_sc {} outside (0.5, 1]", self.rho_sc)));
        }
        if !(self.noise_std >= 0.0) || !(self.sep_core >= 0.0) || !(self.sep_shortcut >= 0.0) {
            return Err(Error::ConfigError("separations and noise must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub x: Mat<f64>,
    /// Labels in {−1, +1}, equal to `2 v_core − 1`.
    pub y: Vec<f64>,
    pub v_core: Vec<u8>,
    pub v_shortcut: Vec<u8>,
    pub v_noise: Vec<u8>,
}

impl SyntheticDataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn labels_i8(&self) -> Vec<i8> {
        self.y.iter().map(|&v| if v > 0.0 { 1 } else { -1 }).collect()
    }

    pub fn conflict_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.v_core[i] != self.v_shortcut[i]).collect()
    }

    pub fn feature(&self, which: FeatureKind) -> Result<FeatureAssignment> {
        let (name, v) = match which {
            FeatureKind::Core => ("core", &self.v_core),
            FeatureKind::Shortcut => ("shortcut", &self.v_shortcut),
            FeatureKind::Noise => ("noise", &self.v_noise),
        };
        FeatureAssignment::new(name, v.clone())
    }

    pub fn subset(&self, idx: &[usize]) -> SyntheticDataset {
        SyntheticDataset {
            x: Mat::from_fn(idx.len(), self.x.cols, |i, j| self.x[(idx[i], j)]),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            v_core: idx.iter().map(|&i| self.v_core[i]).collect(),
            v_shortcut: idx.iter().map(|&i| self.v_shortcut[i]).collect(),
            v_noise: idx.iter().map(|&i| self.v_noise[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FeatureKind {
    Core,
    Shortcut,
    Noise,
}

/// Unit directions of the core and shortcut blocks, fixed by the seed.
fn block_directions(cfg: &SyntheticDatasetConfig) -> (Vec<f64>, Vec<f64>) {
    let mut rng = substream(cfg.seed, 0);
    let mut unit = |d: usize| {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = crate::linalg::norm2(&v);
        v.into_iter().map(|x| x / n).collect::<Vec<f64>>()
    };
    let uc = unit(cfg.d_core);
    let us = unit(cfg.d_shortcut);
    (uc, us)
}

fn render(cfg: &SyntheticDatasetConfig, vc: &[u8], vs: &[u8], vn: Vec<u8>, stream: u64) -> SyntheticDataset {
    let (uc, us) = block_directions(cfg);
    let mut rng = substream(cfg.seed, stream);
    let n = vc.len();
    let d = cfg.dim();
    let mut x = Mat::zeros(n, d);
    for i in 0..n {
        let sc = if vc[i] == 1 { cfg.sep_core } else { -cfg.sep_core };
        let ss = if vs[i] == 1 { cfg.sep_shortcut } else { -cfg.sep_shortcut };
        let row = x.row_mut(i);
        for (j, u) in uc.iter().enumerate() {
            row[j] = sc * u;
        }
        for (j, u) in us.iter().enumerate() {
            row[cfg.d_core + j] = ss * u;
        }
        for r in row.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *r += cfg.noise_std * z;
        }
    }
    SyntheticDataset {
        x,
        y: vc.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect(),
        v_core: vc.to_vec(),
        v_shortcut: vs.to_vec(),
        v_noise: vn,
    }
}

/// Training set: balanced labels, shortcut agreeing with the label at rate `rho_sc`.
pub fn gen_dataset(cfg: &SyntheticDatasetConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let n = cfg.n_samples;
    let mut rng = substream(cfg.seed, 1);
    let mut vc: Vec<u8> = (0..n).map(|i| u8::from(i < n / 2)).collect();
    vc.shuffle(&mut rng);
    let vs: Vec<u8> = vc.iter().map(|&c| if rng.random::<f64>() < cfg.rho_sc { c } else { 1 - c }).collect();
    let vn: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
    Ok(render(cfg, &vc, &vs, vn, 2))
}

/// Held-out probe set with exactly `per_combo` samples of each `(v_core, v_shortcut)` pair.
pub fn gen_probe(cfg: &SyntheticDatasetConfig, per_combo: usize) -> Result<SyntheticDataset> {
    cfg.validate()?;
    let mut vc = Vec::new();
    let mut vs = Vec::new();
    for c in 0..2u8 {
        for s in 0..2u8 {
            for _ in 0..per_combo {
                vc.push(c);
                vs.push(s);
            }
        }
    }
    let mut rng = substream(cfg.seed, 3);
    // noise feature balanced inside every combination
    let mut vn = Vec::new();
    for _ in 0..4 {
        let mut block: Vec<u8> = (0..per_combo).map(|i| u8::from(i < per_combo / 2)).collect();
        block.shuffle(&mut rng);
        vn.extend(block);
    }
    Ok(render(cfg, &vc, &vs, vn, 4))
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceDecomposition {
    pub total_ss: f64,
    pub color_share: f64,
    pub digit_share: f64,
    pub interaction_share: f64,
    pub residual_share: f64,
    /// `−2 Σ N_cd ⟨μ_c − μ, μ_d − μ⟩ / SST`, zero for balanced designs.
    pub cross_share: f64,
}

impl VarianceDecomposition {
    pub fn four_term_sum(&self) -> f64 {
        self.color_share + self.digit_share + self.interaction_share + self.residual_share
    }

    pub fn total_share(&self) -> f64 {
        self.four_term_sum() + self.cross_share
    }
}

/// Two-way sum-of-squares split with color `c = v_shortcut` and digit `d = v_core`.
pub fn variance_decomposition(x: &Mat<f64>, color: &[u8], digit: &[u8]) -> Result<VarianceDecomposition> {
    let n = x.rows;
    let dim = x.cols;
    let mean_of = |sel: &dyn Fn(usize) -> bool| -> (usize, Vec<f64>) {
        let mut m = vec![0.0; dim];
        let mut k = 0;
        for i in (0..n).filter(|&i| sel(i)) {
            k += 1;
            for (a, &v) in m.iter_mut().zip(x.row(i)) {
                *a += v;
            }
        }
        if k > 0 {
            m.iter_mut().for_each(|a| *a /= k as f64);
        }
        (k, m)
    };
    let (_, mu) = mean_of(&|_| true);
    let sqd = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let total: f64 = (0..n).map(|i| sqd(x.row(i), &mu)).sum();
    if total == 0.0 {
        return Err(Error::DegenerateGroups("total sum of squares is zero".into()));
    }
    let mut mc = Vec::new();
    let mut md = Vec::new();
    for v in 0..2u8 {
        let c = mean_of(&|i| color[i] == v);
        let d = mean_of(&|i| digit[i] == v);
        if c.0 == 0 || d.0 == 0 {
            return Err(Error::DegenerateGroups("a factor level is missing".into()));
        }
        mc.push(c);
        md.push(d);
    }
    let ss_c: f64 = mc.iter().map(|(k, m)| *k as f64 * sqd(m, &mu)).sum();
    let ss_d: f64 = md.iter().map(|(k, m)| *k as f64 * sqd(m, &mu)).sum();
    let (mut ss_i, mut ss_r, mut cross) = (0.0, 0.0, 0.0);
    for c in 0..2u8 {
        for d in 0..2u8 {
            let (k, mcd) = mean_of(&|i| color[i] == c && digit[i] == d);
            if k == 0 {
                continue;
            }
            let (mcv, mdv) = (&mc[c as usize].1, &md[d as usize].1);
            let inter: Vec<f64> = (0..dim).map(|j| mcd[j] - mcv[j] - mdv[j] + mu[j]).collect();
            ss_i += k as f64 * inter.iter().map(|v| v * v).sum::<f64>();
            for i in (0..n).filter(|&i| color[i] == c && digit[i] == d) {
                ss_r += sqd(x.row(i), &mcd);
            }
            // −2 N_cd <μ_c − μ, μ_d − μ> survives when the design is unbalanced
            let dot: f64 = (0..dim).map(|j| (mcv[j] - mu[j]) * (mdv[j] - mu[j])).sum();
            cross += 2.0 * k as f64 * dot;
        }
    }
    Ok(VarianceDecomposition {
        total_ss: total,
        color_share: ss_c / total,
        digit_share: ss_d / total,
        interaction_share: ss_i / total,
        residual_share: ss_r / total,
        cross_share: -cross / total,
    })
}

pub fn dataset_variance_decomposition(ds: &SyntheticDataset) -> Result<VarianceDecomposition> {
    variance_decomposition(&ds.x, &ds.v_shortcut, &ds.v_core)
}
