use rayon::prelude::*;
use serde::Serialize;

use super::chain::{chain_step, transition_matrix, ChainConfig, PayoffMode};
use super::payoff::{failed_conditions, gd_conditions, sgd_conditions, PayoffMatrix};
use super::stationary::{stationary, StationaryMethod};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::{splitmix64, substream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SweepMethod {
    /// Exact time-averaged stationary law.
    Exact,
    /// Empirical occupancy of simulated replicas.
    MonteCarlo { horizon: usize, replicas: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepConfig<T> {
    pub chain: ChainConfig<T>,
    /// Payoff tables applied in turn, each held for `epoch_len` steps.
    pub schedule: Vec<PayoffMatrix<T>>,
    pub epoch_len: usize,
    pub eps_grid: Vec<T>,
    pub method: SweepMethod,
    /// Margin in the full-batch standing conditions.
    pub beta: T,
    pub check_conditions: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub occ0: f64,
    pub occ_n: f64,
    pub occ0_stderr: f64,
    pub occ_n_stderr: f64,
}

pub fn standing_conditions<T: Scalar>(cfg: &SweepConfig<T>) -> Vec<(String, bool)> {
    let n = cfg.chain.n;
    cfg.schedule
        .iter()
        .enumerate()
        .flat_map(|(k, pm)| {
            let conds = match cfg.chain.mode {
                PayoffMode::Gd => gd_conditions(pm, n, cfg.beta),
                _ => sgd_conditions(pm, n, cfg.chain.batch.unwrap_or(0)),
            };
            conds.into_iter().map(move |(name, ok)| (format!("schedule[{k}]: {name}"), ok))
        })
        .collect()
}

/// Time-averaged law of the periodic chain defined by a schedule.
pub fn periodic_average<T: Scalar>(mats: &[Mat<T>], epoch_len: usize) -> Result<Vec<T>> {
    let n = mats[0].rows;
    let mut cycle = Mat::identity(n);
    for m in mats {
        for _ in 0..epoch_len {
            cycle = cycle.matmul(m);
        }
    }
    let mu0 = stationary(&cycle, StationaryMethod::ExactSolve)?.probs;
    let mut avg = vec![T::zero(); n];
    let mut cur = mu0;
    let steps = T::from_usize_lossy(mats.len() * epoch_len);
    for m in mats {
        for _ in 0..epoch_len {
            for (a, &c) in avg.iter_mut().zip(&cur) {
                *a += c / steps;
            }
            cur = m.vecmat(&cur);
        }
    }
    Ok(avg)
}

/// Boundary occupancy across mutation rates.
pub fn sss_sweep<T: Scalar>(cfg: &SweepConfig<T>) -> Result<Vec<SweepRow>> {
    cfg.chain.validate()?;
    if cfg.schedule.is_empty() || cfg.epoch_len == 0 {
        return Err(Error::ConfigError("schedule must be nonempty with positive epoch length".into()));
    }
    if cfg.check_conditions {
        if let Some(f) = failed_conditions(&standing_conditions(cfg)) {
            return Err(Error::ConditionViolated(f));
        }
    }
    let n = cfg.chain.n;
    cfg.eps_grid
        .par_iter()
        .enumerate()
        .map(|(ei, &eps)| {
            let chain = cfg.chain.with_eps(eps);
            match cfg.method {
                SweepMethod::Exact => {
                    let mats =
                        cfg.schedule.iter().map(|pm| transition_matrix(&chain, pm)).collect::<Result<Vec<_>>>()?;
                    let mu = periodic_average(&mats, cfg.epoch_len)?;
                    Ok(SweepRow {
                        eps: eps.to_f64_lossy(),
                        occ0: mu[0].to_f64_lossy(),
                        occ_n: mu[n].to_f64_lossy(),
                        occ0_stderr: 0.0,
                        occ_n_stderr: 0.0,
                    })
                }
                SweepMethod::MonteCarlo { horizon, replicas } => {
                    let e = eps.to_f64_lossy();
                    if (horizon as f64) < 10.0 / e {
                        return Err(Error::PreconditionViolated(format!(
                            "horizon {horizon} below 10/eps = {:.0}",
                            10.0 / e
                        )));
                    }
                    if replicas == 0 {
                        return Err(Error::ConfigError("need at least one replica".into()));
                    }
                    let burn = horizon / 10;
                    let stream_seed = splitmix64(chain.seed ^ (ei as u64));
                    let occ: Vec<(f64, f64)> = (0..replicas)
                        .into_par_iter()
                        .map(|r| {
                            let mut rng = substream(stream_seed, r as u64);
                            let mut z = n / 2;
                            let (mut c0, mut cn) = (0usize, 0usize);
                            for t in 0..burn + horizon {
                                let pm = &cfg.schedule[(t / cfg.epoch_len) % cfg.schedule.len()];
                                z = chain_step(z, pm, &chain, &mut rng);
                                if t >= burn {
                                    c0 += usize::from(z == 0);
                                    cn += usize::from(z == n);
                                }
                            }
                            (c0 as f64 / horizon as f64, cn as f64 / horizon as f64)
                        })
                        .collect();
                    let (m0, s0) = mean_stderr(occ.iter().map(|o| o.0));
                    let (mn, sn) = mean_stderr(occ.iter().map(|o| o.1));
                    Ok(SweepRow { eps: e, occ0: m0, occ_n: mn, occ0_stderr: s0, occ_n_stderr: sn })
                }
            }
        })
        .collect()
}

pub fn mean_stderr(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = xs.collect();
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Occupancy of a chain that switches uniformly at random between payoff
/// tables each step, compared with the point mass on `target`. Returns the
/// total-variation distance for each mutation rate.
pub fn switching_tv_distance<T: Scalar>(
    chain: &ChainConfig<T>,
    tables: &[PayoffMatrix<T>],
    eps_grid: &[T],
    target: usize,
    steps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    use rand::Rng as _;
    chain.validate()?;
    if tables.is_empty() {
        return Err(Error::ConfigError("need at least one payoff table".into()));
    }
    eps_grid
        .iter()
        .enumerate()
        .map(|(ei, &eps)| {
            let cfg = chain.with_eps(eps);
            let mut rng = substream(seed, ei as u64);
            let mut z = cfg.n / 2;
            let mut hits = 0usize;
            for _ in 0..steps {
                let k = rng.random_range(0..tables.len());
                z = chain_step(z, &tables[k], &cfg, &mut rng);
                hits += usize::from(z == target);
            }
            Ok(1.0 - hits as f64 / steps as f64)
        })
        .collect()
}
