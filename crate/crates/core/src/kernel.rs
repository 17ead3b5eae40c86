//! Spectral picture of initial shortcut bias: arc-cosine NTK recursion, the
//! quadratic kernel surrogate, subspace alignment and the spiked Wigner model.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{lanczos_top, orthonormalize_columns, sym_eig, Mat};
use crate::rng::substream;
use crate::scalar::Scalar;

const CLAMP_SLACK: f64 = 1e-12;

fn clamp_unit<T: Scalar>(u: T) -> Result<T> {
    if u.abs() > T::one() + T::c(CLAMP_SLACK) || u.is_nan() {
        return Err(Error::DomainError(format!("|u| = {} exceeds 1", u)));
    }
    Ok(u.max(-T::one()).min(T::one()))
}

pub fn kappa0<T: Scalar>(u: T) -> T {
    (T::pi() - u.acos()) / T::pi()
}

pub fn kappa1<T: Scalar>(u: T) -> T {
    (u * (T::pi() - u.acos()) + (T::one() - u * u).max(T::zero()).sqrt()) / T::pi()
}

/// Normalised depth-`depth` NTK of a ReLU network as a function of the cosine `u`.
pub fn ntk_zonal<T: Scalar>(u: T, depth: usize) -> Result<T> {
    if depth == 0 {
        return Err(Error::DomainError("depth must be at least 1".into()));
    }
    let u = clamp_unit(u)?;
    let mut k = u;
    let mut sigma = u;
    for _ in 0..depth {
        // κ1 can drift a hair above 1 through rounding
        let next = kappa1(sigma).min(T::one());
        k = k * kappa0(sigma) + next;
        sigma = next;
    }
    Ok(k / T::from_usize_lossy(depth + 1))
}

/// Quadratic surrogate `ĥ(u) = 3/(4π) u² + u/2 + 1/(2π)`.
pub fn h_hat<T: Scalar>(u: T) -> T {
    T::c(3.0) / (T::c(4.0) * T::pi()) * u * u + u / T::c(2.0) + T::one() / (T::c(2.0) * T::pi())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix<T> {
    pub entries: Mat<T>,
    pub n: usize,
}

impl<T: Scalar> GramMatrix<T> {
    pub fn new(entries: Mat<T>) -> Result<Self> {
        if entries.rows != entries.cols {
            return Err(Error::LengthMismatch("gram matrix must be square".into()));
        }
        if entries.max_abs_asymmetry() != T::zero() {
            return Err(Error::PreconditionViolated("gram matrix is not symmetric".into()));
        }
        Ok(GramMatrix { n: entries.rows, entries })
    }

    /// Largest off-diagonal magnitude.
    pub fn rho(&self) -> T {
        let mut r = T::zero();
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    r = r.max(self.entries[(i, j)].abs());
                }
            }
        }
        r
    }
}

/// Linear kernel `X Xᵀ`.
pub fn linear_gram<T: Scalar>(x: &Mat<T>) -> GramMatrix<T> {
    let n = x.rows;
    let mut k = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = crate::linalg::dot(x.row(i), x.row(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    GramMatrix { entries: k, n }
}

fn h_hat_of_linear<T: Scalar>(lin: &GramMatrix<T>) -> GramMatrix<T> {
    let e = &lin.entries;
    GramMatrix { entries: Mat::from_fn(lin.n, lin.n, |i, j| h_hat(e[(i, j)])), n: lin.n }
}

pub fn unit_norm_violations<T: Scalar>(x: &Mat<T>, tol: T) -> Vec<usize> {
    (0..x.rows).filter(|&i| (crate::linalg::norm2(x.row(i)) - T::one()).abs() > tol).collect()
}

/// `K_θ` with entries `ĥ(⟨x_i, x_j⟩)` for unit-norm rows.
pub fn quad_gram<T: Scalar>(x: &Mat<T>) -> Result<GramMatrix<T>> {
    let bad = unit_norm_violations(x, T::c(1e-8));
    if !bad.is_empty() {
        return Err(Error::NormError(bad));
    }
    Ok(h_hat_of_linear(&linear_gram(x)))
}

#[derive(Debug, Clone)]
pub struct SpectralReport<T> {
    pub eigenvalues: Vec<T>,
    pub top_subspace: Mat<T>,
    pub gap: T,
    pub rho: T,
    /// Eigenvectors for every eigenvalue, columnwise.
    pub all_vectors: Mat<T>,
}

pub fn spectral_report<T: Scalar>(k: &GramMatrix<T>, r: usize) -> Result<SpectralReport<T>> {
    if r == 0 || r >= k.n {
        return Err(Error::ParamError(format!("rank {r} must lie in 1..{}", k.n)));
    }
    let e = sym_eig(&k.entries);
    let gap = e.values[r - 1] - e.values[r];
    let top = Mat::from_fn(k.n, r, |i, j| e.vectors[(i, j)]);
    Ok(SpectralReport { gap, rho: k.rho(), top_subspace: top, eigenvalues: e.values, all_vectors: e.vectors })
}

pub const DEGENERATE_GAP: f64 = 1e-10;

/// `‖Uᵀ V⊥‖₂` between the top-`r` subspace of `a` and the complement of the top-`r` subspace of `b`.
pub fn sin_theta<T: Scalar>(a: &GramMatrix<T>, b: &GramMatrix<T>, r: usize) -> Result<T> {
    if a.n != b.n {
        return Err(Error::LengthMismatch(format!("{} vs {}", a.n, b.n)));
    }
    let sa = spectral_report(a, r)?;
    if sa.gap <= T::c(DEGENERATE_GAP) {
        return Err(Error::DegenerateGap(sa.gap.to_f64_lossy()));
    }
    let sb = spectral_report(b, r)?;
    Ok(sin_theta_from(&sa.top_subspace, &sb.all_vectors, r))
}

fn sin_theta_from<T: Scalar>(u: &Mat<T>, vb: &Mat<T>, r: usize) -> T {
    let n = u.rows;
    let vperp = Mat::from_fn(n, n - r, |i, j| vb[(i, r + j)]);
    let m = u.transpose().matmul(&vperp);
    let mmt = m.matmul(&m.transpose());
    let top = sym_eig(&mmt).values[0].max(T::zero());
    top.sqrt().min(T::one())
}

#[derive(Debug, Clone, Serialize)]
pub struct DkReport {
    pub angle: f64,
    pub bound: f64,
    pub holds: bool,
    pub rho: f64,
    pub delta: f64,
    pub max_column_mean: f64,
    pub max_norm_deviation: f64,
    /// Entrywise gap between `K_θ` and `½K_X + 3/(4π) K_X∘K_X + 1/(2π) 11ᵀ`.
    pub decomposition_error: f64,
}

/// Checks the alignment bound `sin Θ ≤ 3/(2π) (1 + (N−1)ρ²)/δ` between `K_X` and `K_θ`.
///
/// Requires centred data. Row norms are reported but not enforced, since
/// exact centring and exact unit norms are incompatible in general.
pub fn dk_bound_check<T: Scalar>(x: &Mat<T>, r: usize) -> Result<DkReport> {
    let n = x.rows;
    let mut max_mean = T::zero();
    for j in 0..x.cols {
        let m: T = (0..n).map(|i| x[(i, j)]).sum::<T>() / T::from_usize_lossy(n);
        max_mean = max_mean.max(m.abs());
    }
    if max_mean > T::c(1e-8) {
        return Err(Error::PreconditionViolated(format!("data not centred (max column mean {max_mean})")));
    }
    let max_norm_dev = (0..n)
        .map(|i| (crate::linalg::norm2(x.row(i)) - T::one()).abs())
        .fold(T::zero(), |a, b| a.max(b));
    let kx = linear_gram(x);
    let kt = h_hat_of_linear(&kx);
    let sa = spectral_report(&kx, r)?;
    if sa.gap <= T::c(DEGENERATE_GAP) {
        return Err(Error::DegenerateGap(sa.gap.to_f64_lossy()));
    }
    let sb = spectral_report(&kt, r)?;
    let angle = sin_theta_from(&sa.top_subspace, &sb.all_vectors, r);
    let nn = T::from_usize_lossy(n);
    let bound = T::c(3.0) / (T::c(2.0) * T::pi()) * (T::one() + (nn - T::one()) * sa.rho * sa.rho) / sa.gap;
    let four_pi = T::c(4.0) * T::pi();
    let mut dec_err = T::zero();
    for i in 0..n {
        for j in 0..n {
            let k = kx.entries[(i, j)];
            let rhs = k / T::c(2.0) + T::c(3.0) / four_pi * k * k + T::one() / (T::c(2.0) * T::pi());
            dec_err = dec_err.max((kt.entries[(i, j)] - rhs).abs());
        }
    }
    Ok(DkReport {
        angle: angle.to_f64_lossy(),
        bound: bound.to_f64_lossy(),
        holds: angle <= bound,
        rho: sa.rho.to_f64_lossy(),
        delta: sa.gap.to_f64_lossy(),
        max_column_mean: max_mean.to_f64_lossy(),
        max_norm_deviation: max_norm_dev.to_f64_lossy(),
        decomposition_error: dec_err.to_f64_lossy(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SpikedModelConfig {
    pub n: usize,
    pub betas: Vec<f64>,
    pub sigma: f64,
    pub trials: usize,
    pub seed: u64,
}

impl SpikedModelConfig {
    pub fn rank(&self) -> usize {
        self.betas.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 500 {
            return Err(Error::ConfigError(format!("n = {} below 500", self.n)));
        }
        if self.trials < 5 {
            return Err(Error::ConfigError(format!("trials = {} below 5", self.trials)));
        }
        if self.betas.is_empty() || self.betas.iter().any(|&b| !(b > 0.0)) {
            return Err(Error::ConfigError("spike amplitudes must be positive".into()));
        }
        if self.betas.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::ConfigError("spike amplitudes must be sorted descending".into()));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::ConfigError("sigma must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpikeTrial {
    pub top_eigs: Vec<f64>,
    pub overlaps_sq: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpikeRecord {
    pub beta: f64,
    pub mean_top_eig: f64,
    pub mean_overlap_sq: f64,
    /// `None` below the detection threshold.
    pub predicted_eig: Option<f64>,
    pub predicted_overlap_sq: Option<f64>,
    pub bulk_edge: f64,
    /// Trials whose eigenvalue stayed inside the tolerated bulk edge.
    pub in_bulk: usize,
    /// Trials whose overlap stayed below `25/n`.
    pub small_overlap: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpikedReport {
    pub records: Vec<SpikeRecord>,
    pub trials: Vec<SpikeTrial>,
}

pub fn bulk_edge(sigma: f64, n: usize) -> f64 {
    2.0 * sigma * (1.0 + 4.0 * (n as f64).powf(-2.0 / 3.0))
}

/// Draws one spiked matrix and returns the top-r eigenpairs' statistics.
pub fn spiked_trial(cfg: &SpikedModelConfig, trial: usize) -> SpikeTrial {
    let n = cfg.n;
    let r = cfg.rank();
    let mut rng = substream(cfg.seed, trial as u64);
    let mut v = Mat::<f64>::zeros(n, r);
    for x in v.data.iter_mut() {
        *x = rng.sample(StandardNormal);
    }
    orthonormalize_columns(&mut v);
    let mut k = Mat::<f64>::zeros(n, n);
    let scale = cfg.sigma / (2.0 * n as f64).sqrt();
    let mut g = Mat::<f64>::zeros(n, n);
    for x in g.data.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *x = z;
    }
    for i in 0..n {
        for j in 0..n {
            let mut s = scale * (g[(i, j)] + g[(j, i)]);
            for (q, &b) in cfg.betas.iter().enumerate() {
                s += b * v[(i, q)] * v[(j, q)];
            }
            k[(i, j)] = s;
        }
    }
    let start: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let eig = lanczos_top(n, r, |x| k.matvec(x), &start, 1e-10);
    let overlaps_sq = (0..r)
        .map(|q| {
            let d: f64 = (0..n).map(|i| v[(i, q)] * eig.vectors[(i, q)]).sum();
            d * d
        })
        .collect();
    SpikeTrial { top_eigs: eig.values, overlaps_sq }
}

pub fn spiked_experiment(cfg: &SpikedModelConfig) -> Result<SpikedReport> {
    cfg.validate()?;
    let trials: Vec<SpikeTrial> = (0..cfg.trials).into_par_iter().map(|t| spiked_trial(cfg, t)).collect();
    let t = cfg.trials as f64;
    let edge = bulk_edge(cfg.sigma, cfg.n);
    let records = cfg
        .betas
        .iter()
        .enumerate()
        .map(|(q, &beta)| {
            let s2 = cfg.sigma * cfg.sigma;
            let above = beta > cfg.sigma;
            SpikeRecord {
                beta,
                mean_top_eig: trials.iter().map(|x| x.top_eigs[q]).sum::<f64>() / t,
                mean_overlap_sq: trials.iter().map(|x| x.overlaps_sq[q]).sum::<f64>() / t,
                predicted_eig: above.then(|| beta + s2 / beta),
                predicted_overlap_sq: above.then(|| 1.0 - s2 / (beta * beta)),
                bulk_edge: edge,
                in_bulk: trials.iter().filter(|x| x.top_eigs[q].abs() <= edge).count(),
                small_overlap: trials.iter().filter(|x| x.overlaps_sq[q] <= 25.0 / cfg.n as f64).count(),
            }
        })
        .collect();
    Ok(SpikedReport { records, trials })
}
