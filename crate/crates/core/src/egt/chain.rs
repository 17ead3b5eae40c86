use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use super::payoff::{partition_classes, pi_gd, pi_partition, sample_partition, PayoffMatrix};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::Rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PayoffMode {
    Gd,
    SgdExact,
    SgdSample,
}

impl std::str::FromStr for PayoffMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gd" => Ok(PayoffMode::Gd),
            "sgd-exact" => Ok(PayoffMode::SgdExact),
            "sgd-sample" => Ok(PayoffMode::SgdSample),
            other => Err(Error::ConfigError(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainConfig<T> {
    pub n: usize,
    pub batch: Option<usize>,
    pub eps: T,
    pub mode: PayoffMode,
    pub seed: u64,
}

impl<T: Scalar> ChainConfig<T> {
    pub fn gd(n: usize, eps: T) -> Self {
        ChainConfig { n, batch: None, eps, mode: PayoffMode::Gd, seed: 0 }
    }

    pub fn sgd(n: usize, batch: usize, eps: T) -> Self {
        ChainConfig { n, batch: Some(batch), eps, mode: PayoffMode::SgdExact, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::ConfigError("population size must be positive".into()));
        }
        if !(self.eps >= T::zero() && self.eps <= T::c(0.5)) {
            return Err(Error::ConfigError(format!("eps {} outside [0, 0.5]", self.eps)));
        }
        if self.mode != PayoffMode::Gd {
            match self.batch {
                Some(b) if b > 0 && self.n % b == 0 => {}
                _ => return Err(Error::ConfigError(format!("batch {:?} must divide n = {}", self.batch, self.n))),
            }
        }
        Ok(())
    }

    pub fn with_eps(&self, eps: T) -> Self {
        ChainConfig { eps, ..self.clone() }
    }
}

fn sign<T: Scalar>(x: T) -> i64 {
    if x > T::zero() {
        1
    } else if x < T::zero() {
        -1
    } else {
        0
    }
}

/// Selection map `b(z) = clamp(z + sign(π_A − π_B), 0, N)`.
pub fn select<T: Scalar>(z: usize, pi_a: T, pi_b: T, n: usize) -> usize {
    (z as i64 + sign(pi_a - pi_b)).clamp(0, n as i64) as usize
}

/// Selection followed by binomial mutation in both directions.
pub fn darwinian_step<T: Scalar>(z: usize, pi_a: T, pi_b: T, eps: T, n: usize, rng: &mut Rng) -> usize {
    let b = select(z, pi_a, pi_b, n);
    let e = eps.to_f64_lossy();
    if e <= 0.0 {
        return b;
    }
    let p = Binomial::new((n - b) as u64, e).expect("valid binomial").sample(rng) as i64;
    let q = Binomial::new(b as u64, e).expect("valid binomial").sample(rng) as i64;
    (b as i64 + p - q).clamp(0, n as i64) as usize
}

/// Selected state for full-batch payoffs.
pub fn select_gd<T: Scalar>(z: usize, pm: &PayoffMatrix<T>, n: usize) -> usize {
    let (pa, pb) = pi_gd(z, pm, n);
    select(z, pa, pb, n)
}

fn binomial_pmf<T: Scalar>(n: usize, eps: T) -> Vec<T> {
    let mut out = vec![T::zero(); n + 1];
    if eps == T::zero() {
        out[0] = T::one();
        return out;
    }
    let ln_q = (T::one() - eps).ln();
    let ln_ratio = eps.ln() - ln_q;
    let mut lp = T::from_usize_lossy(n) * ln_q;
    out[0] = lp.exp();
    for k in 0..n {
        lp += (T::from_usize_lossy(n - k) / T::from_usize_lossy(k + 1)).ln() + ln_ratio;
        out[k + 1] = lp.exp();
    }
    out
}

/// Law of `b + p − q` with `p ~ Bin(N−b, ε)`, `q ~ Bin(b, ε)`.
pub fn mutation_row<T: Scalar>(b: usize, n: usize, eps: T) -> Vec<T> {
    let up = binomial_pmf(n - b, eps);
    let down = binomial_pmf(b, eps);
    let mut row = vec![T::zero(); n + 1];
    for (p, &pp) in up.iter().enumerate() {
        if pp == T::zero() {
            continue;
        }
        for (q, &pq) in down.iter().enumerate() {
            row[b + p - q] += pp * pq;
        }
    }
    row
}

/// Probabilities that selection moves `z` down, keeps it, or moves it up.
pub fn selection_law<T: Scalar>(z: usize, pm: &PayoffMatrix<T>, cfg: &ChainConfig<T>) -> Result<[T; 3]> {
    let n = cfg.n;
    let mut law = [T::zero(); 3];
    match cfg.mode {
        PayoffMode::Gd => {
            let b = select_gd(z, pm, n);
            law[(b as i64 - z as i64 + 1) as usize] = T::one();
        }
        PayoffMode::SgdExact | PayoffMode::SgdSample => {
            let batch = cfg.batch.ok_or_else(|| Error::ConfigError("mini-batch mode needs a batch size".into()))?;
            for cls in partition_classes(z, n, batch)? {
                let (pa, pb) = pi_partition(&cls.counts(), pm, batch);
                let b = select(z, pa, pb, n);
                law[(b as i64 - z as i64 + 1) as usize] += T::c(cls.prob);
            }
        }
    }
    Ok(law)
}

pub const MAX_MATRIX_N: usize = 2000;

/// Exact one-step transition matrix. For mini-batch modes each row mixes
/// the mutation kernels of every selection outcome by its partition probability.
pub fn transition_matrix<T: Scalar>(cfg: &ChainConfig<T>, pm: &PayoffMatrix<T>) -> Result<Mat<T>> {
    cfg.validate()?;
    let n = cfg.n;
    if n > MAX_MATRIX_N {
        return Err(Error::SizeError(format!("n = {n} exceeds {MAX_MATRIX_N}")));
    }
    let rows: Vec<Vec<T>> = (0..=n).map(|b| mutation_row(b, n, cfg.eps)).collect();
    let mut p = Mat::zeros(n + 1, n + 1);
    for z in 0..=n {
        let law = selection_law(z, pm, cfg)?;
        for (off, &w) in law.iter().enumerate() {
            if w == T::zero() {
                continue;
            }
            let b = z + off - 1;
            for (j, &v) in rows[b].iter().enumerate() {
                p[(z, j)] += w * v;
            }
        }
    }
    Ok(p)
}

/// Samples the next state of a chain described by a stochastic matrix.
pub fn step_from_matrix<T: Scalar>(p: &Mat<T>, z: usize, rng: &mut Rng) -> usize {
    use rand::Rng as _;
    let u = T::c(rng.random::<f64>());
    let mut acc = T::zero();
    let row = p.row(z);
    for (j, &v) in row.iter().enumerate() {
        acc += v;
        if u < acc {
            return j;
        }
    }
    // rounding leaves a sliver of mass above the final cumulative sum
    row.iter().rposition(|&v| v > T::zero()).unwrap_or(z)
}

/// One step of the population chain under the configured payoff regime.
pub fn chain_step<T: Scalar>(z: usize, pm: &PayoffMatrix<T>, cfg: &ChainConfig<T>, rng: &mut Rng) -> usize {
    let (pa, pb) = match cfg.mode {
        PayoffMode::Gd => pi_gd(z, pm, cfg.n),
        PayoffMode::SgdExact | PayoffMode::SgdSample => {
            let batch = cfg.batch.expect("validated batch");
            pi_partition(&sample_partition(z, cfg.n, batch, rng), pm, batch)
        }
    };
    darwinian_step(z, pa, pb, cfg.eps, cfg.n, rng)
}

/// Simulates `steps` transitions from `z0`; the returned path has `steps + 1` states.
pub fn simulate<T: Scalar>(
    cfg: &ChainConfig<T>,
    pm: &PayoffMatrix<T>,
    z0: usize,
    steps: usize,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    cfg.validate()?;
    if z0 > cfg.n {
        return Err(Error::ParamError(format!("z0 = {z0} exceeds n = {}", cfg.n)));
    }
    let mut path = Vec::with_capacity(steps + 1);
    let mut z = z0;
    path.push(z);
    for _ in 0..steps {
        z = chain_step(z, pm, cfg, rng);
        path.push(z);
    }
    Ok(path)
}

/// The three-state matrix of the worked example, as printed.
pub fn example_three_state<T: Scalar>(eps: T) -> Mat<T> {
    let e2 = eps * eps;
    let stay = T::one() - T::c(2.0) * eps - e2;
    let two = T::c(2.0) * eps;
    Mat::from_fn(3, 3, |i, j| match (i, j) {
        (0 | 1, 0) | (2, 2) => stay,
        (_, 1) => two,
        (0 | 1, 2) | (2, 0) => e2,
        _ => unreachable!(),
    })
}

/// Closed-form stationary law of [`example_three_state`].
pub fn example_three_state_stationary<T: Scalar>(eps: T) -> [T; 3] {
    let two = T::c(2.0);
    let den = two * (T::one() + eps);
    [(two - T::c(3.0) * eps - T::c(4.0) * eps * eps) / den, two * eps, eps / den]
}
