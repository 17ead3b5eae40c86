//! Continuous-time model of subnetwork training intensities `(w1, w2)` and
//! the core-sample proportion `α`, with exponentially decaying signal and
//! `α` reflected into `[0, 1]`.

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum AlphaMode<T> {
    Fixed(T),
    Dynamic,
}

#[derive(Debug, Clone, Serialize)]
pub struct SdeParams<T> {
    pub gamma: T,
    pub tau: T,
    pub sigma: T,
    pub dt: T,
    pub t_end: T,
    pub alpha_mode: AlphaMode<T>,
    pub w0: (T, T),
    pub alpha0: T,
    pub seed: u64,
    /// Hold `w` at `w0` (drift coefficients frozen).
    pub freeze_w: bool,
    /// Keep every `record_every`-th state in the trajectory.
    pub record_every: usize,
}

impl<T: Scalar> SdeParams<T> {
    pub fn new(gamma: T, tau: T, sigma: T, w0: (T, T), alpha_mode: AlphaMode<T>) -> Self {
        let alpha0 = match alpha_mode {
            AlphaMode::Fixed(a) => a,
            AlphaMode::Dynamic => T::c(0.5),
        };
        SdeParams {
            gamma,
            tau,
            sigma,
            dt: T::c(1e-3),
            t_end: T::c(20.0),
            alpha_mode,
            w0,
            alpha0,
            seed: 0,
            freeze_w: false,
            record_every: 100,
        }
    }

    /// `dt ≤ 1e−2 · min(1, 1/τ)`.
    pub fn dt_limit(&self) -> T {
        T::c(1e-2) * T::one().min(T::one() / self.tau)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > T::zero() && self.gamma < T::one()) {
            return Err(Error::ParamError(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        if !(self.tau > T::zero()) {
            return Err(Error::ParamError(format!("tau {} must be positive", self.tau)));
        }
        if !(self.sigma >= T::zero()) {
            return Err(Error::ParamError(format!("sigma {} must be nonnegative", self.sigma)));
        }
        if !(self.t_end >= T::zero()) {
            return Err(Error::ParamError("t_end must be nonnegative".into()));
        }
        if !(self.alpha0 >= T::zero() && self.alpha0 <= T::one()) {
            return Err(Error::ParamError(format!("alpha0 {} outside [0, 1]", self.alpha0)));
        }
        if let AlphaMode::Fixed(a) = self.alpha_mode {
            if !(a >= T::zero() && a <= T::one()) {
                return Err(Error::ParamError(format!("fixed alpha {a} outside [0, 1]")));
            }
        }
        if !(self.dt > T::zero()) || self.dt > self.dt_limit() {
            return Err(Error::StepSizeError { dt: self.dt.to_f64_lossy(), limit: self.dt_limit().to_f64_lossy() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SdeState<T> {
    pub w1: T,
    pub w2: T,
    pub alpha: T,
    pub t: T,
    /// Total push applied at `α = 0`.
    pub k0: T,
    /// Total push applied at `α = 1`.
    pub k1: T,
}

impl<T: Scalar> SdeState<T> {
    pub fn initial(p: &SdeParams<T>) -> Self {
        let alpha = match p.alpha_mode {
            AlphaMode::Fixed(a) => a,
            AlphaMode::Dynamic => p.alpha0,
        };
        SdeState { w1: p.w0.0, w2: p.w0.1, alpha, t: T::zero(), k0: T::zero(), k1: T::zero() }
    }
}

/// Core and shortcut payoffs `a = 1 + γw2 − w1`, `d = 1 − w2 − γw1`.
pub fn payoffs<T: Scalar>(gamma: T, w1: T, w2: T) -> (T, T) {
    (T::one() + gamma * w2 - w1, T::one() - w2 - gamma * w1)
}

/// Slope and intercept of the `α` drift: `b(α) = mα + c`.
pub fn alpha_drift_coeffs<T: Scalar>(gamma: T, w1: T, w2: T) -> (T, T) {
    let (a, d) = payoffs(gamma, w1, w2);
    ((T::one() + gamma) * a + (T::one() - gamma) * d, -gamma * a - d)
}

/// `(dw1/dt, dw2/dt, b(α))` at the given state.
pub fn drift<T: Scalar>(s: &SdeState<T>, p: &SdeParams<T>) -> (T, T, T) {
    let g = p.gamma;
    let (a, d) = payoffs(g, s.w1, s.w2);
    let al = s.alpha;
    let f1 = (T::one() - al) * g * d + al * a;
    let f2 = (T::one() - al) * d - al * g * a;
    let ba = ((T::one() + g) * al - g) * a - (T::one() - (T::one() - g) * al) * d;
    let decay = if p.freeze_w { T::zero() } else { (-p.tau * s.t).exp() };
    (f1 * decay, f2 * decay, ba)
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory<T> {
    pub states: Vec<SdeState<T>>,
    pub last: SdeState<T>,
    /// Set when `w` left `[0, 1.5]` at some step.
    pub w_out_of_range: bool,
    /// Whether `G(1) < G(0)` held at every step.
    pub sigma_condition_held: bool,
}

/// Projected Euler-Maruyama. Every state passed to `observe` is post-step.
pub fn integrate_with<T: Scalar>(p: &SdeParams<T>, stream: u64, mut observe: impl FnMut(&SdeState<T>)) -> Result<Trajectory<T>> {
    p.validate()?;
    let mut rng = substream(p.seed, stream);
    let mut s = SdeState::initial(p);
    let steps = (p.t_end / p.dt).round().to_usize().unwrap_or(0);
    let sq = p.dt.sqrt();
    let mut states = vec![s];
    let mut out_of_range = false;
    let mut cond = sigma_condition(p.gamma, s.w1, s.w2);
    let lo = T::zero();
    let hi = T::c(1.5);
    for k in 0..steps {
        let (dw1, dw2, ba) = drift(&s, p);
        s.w1 += dw1 * p.dt;
        s.w2 += dw2 * p.dt;
        if let AlphaMode::Dynamic = p.alpha_mode {
            let xi: f64 = rng.sample(StandardNormal);
            let mut a = s.alpha + ba * p.dt + p.sigma * sq * T::c(xi);
            if a < T::zero() {
                s.k0 -= a;
                a = T::zero();
            } else if a > T::one() {
                s.k1 += a - T::one();
                a = T::one();
            }
            s.alpha = a;
        }
        s.t = T::from_usize_lossy(k + 1) * p.dt;
        if s.w1 < lo || s.w2 < lo || s.w1 > hi || s.w2 > hi {
            out_of_range = true;
        }
        cond &= sigma_condition(p.gamma, s.w1, s.w2);
        observe(&s);
        if p.record_every > 0 && (k + 1) % p.record_every == 0 {
            states.push(s);
        }
    }
    Ok(Trajectory { states, last: s, w_out_of_range: out_of_range, sigma_condition_held: cond })
}


pub fn integrate<T: Scalar>(p: &SdeParams<T>) -> Result<Trajectory<T>> {
    integrate_with(p, 0, |_| {})
}

/// `G(1) < G(0)`, i.e. `(1−γ)a < (1+γ)d`: the stationary `α` law leans to 0.
pub fn sigma_condition<T: Scalar>(gamma: T, w1: T, w2: T) -> bool {
    let (m, c) = alpha_drift_coeffs(gamma, w1, w2);
    m / T::c(2.0) + c < T::zero()
}

/// Closed-form fixed-`α`, noiseless solution of the `w` system.
#[derive(Debug, Clone, Serialize)]
pub struct ClosedForm<T> {
    pub gamma: T,
    pub tau: T,
    pub alpha: T,
    pub w_eq: (T, T),
    pub lambda: (T, T),
    /// Columns `u1 = (γ, 1)/√(1+γ²)` and `u2 = (1, −γ)/√(1+γ²)`.
    pub u1: (T, T),
    pub u2: (T, T),
    /// Coordinates of `w0 − w_eq` in the eigenbasis.
    pub coords: (T, T),
}

pub fn w_equilibrium<T: Scalar>(gamma: T) -> (T, T) {
    let den = T::one() + gamma * gamma;
    ((T::one() + gamma) / den, (T::one() - gamma) / den)
}

/// The linear system `dw/dt = e^{−τt}(M w + b)` at fixed `α`.
pub fn linear_system<T: Scalar>(gamma: T, alpha: T) -> ([[T; 2]; 2], [T; 2]) {
    let one = T::one();
    let g = gamma;
    let m = [
        [-(one - alpha) * g * g - alpha, g * (T::c(2.0) * alpha - one)],
        [g * (T::c(2.0) * alpha - one), -(one - alpha) - alpha * g * g],
    ];
    let b = [(one - alpha) * g + alpha, (one - alpha) - alpha * g];
    (m, b)
}

pub fn ode_closed_form<T: Scalar>(p: &SdeParams<T>) -> Result<ClosedForm<T>> {
    let alpha = match p.alpha_mode {
        AlphaMode::Fixed(a) => a,
        AlphaMode::Dynamic => return Err(Error::ParamError("closed form needs a fixed alpha".into())),
    };
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::ParamError(format!("alpha {alpha} must lie strictly inside (0, 1)")));
    }
    if p.sigma != T::zero() {
        return Err(Error::ParamError("closed form is noiseless; sigma must be 0".into()));
    }
    let g = p.gamma;
    let s = T::one() + g * g;
    let r = s.sqrt();
    let w_eq = w_equilibrium(g);
    let u1 = (g / r, T::one() / r);
    let u2 = (T::one() / r, -g / r);
    let dv = (p.w0.0 - w_eq.0, p.w0.1 - w_eq.1);
    Ok(ClosedForm {
        gamma: g,
        tau: p.tau,
        alpha,
        w_eq,
        lambda: (-(T::one() - alpha) * s, -alpha * s),
        u1,
        u2,
        coords: (u1.0 * dv.0 + u1.1 * dv.1, u2.0 * dv.0 + u2.1 * dv.1),
    })
}

impl<T: Scalar> ClosedForm<T> {
    /// Effective elapsed signal `s(t) = (1 − e^{−τt})/τ`.
    pub fn s_of(&self, t: T) -> T {
        (T::one() - (-self.tau * t).exp()) / self.tau
    }

    fn at_s(&self, s: T) -> (T, T) {
        let e1 = (self.lambda.0 * s).exp() * self.coords.0;
        let e2 = (self.lambda.1 * s).exp() * self.coords.1;
        (self.w_eq.0 + self.u1.0 * e1 + self.u2.0 * e2, self.w_eq.1 + self.u1.1 * e1 + self.u2.1 * e2)
    }

    pub fn at(&self, t: T) -> (T, T) {
        self.at_s(self.s_of(t))
    }

    pub fn limit(&self) -> (T, T) {
        self.at_s(T::one() / self.tau)
    }

    /// `w2(∞) − w1(∞)` as a function of the decay rate.
    pub fn gap_at_tau(&self, tau: T) -> T {
        let (a1, a2) = self.gap_weights();
        let g = self.gamma;
        -T::c(2.0) * g / (T::one() + g * g)
            + a1 * self.coords.0 * (self.lambda.0 / tau).exp()
            + a2 * self.coords.1 * (self.lambda.1 / tau).exp()
    }

    /// `(a1, a2) = ((1−γ), −(1+γ))/√(1+γ²)`, the gap functional in eigen-coordinates.
    pub fn gap_weights(&self) -> (T, T) {
        let g = self.gamma;
        let r = (T::one() + g * g).sqrt();
        ((T::one() - g) / r, -(T::one() + g) / r)
    }
}

/// Critical decay rate beyond which the limiting gap is nondecreasing in `τ`.
pub fn tau_c<T: Scalar>(p: &SdeParams<T>) -> Result<Option<T>> {
    let cf = ode_closed_form(&SdeParams { sigma: T::zero(), ..p.clone() })?;
    let (a1, a2) = cf.gap_weights();
    let (b1, b2) = cf.coords;
    let den = a1 * b1 * cf.lambda.0;
    if den == T::zero() {
        return Ok(None);
    }
    let ratio = -a2 * b2 * cf.lambda.1 / den;
    if !(ratio > T::zero()) {
        return Ok(None);
    }
    let lg = ratio.ln();
    let num = (T::c(2.0) * cf.alpha - T::one()) * (T::one() + cf.gamma * cf.gamma);
    if lg == T::zero() {
        return Ok(if num == T::zero() { None } else { Some(T::infinity()) });
    }
    Ok(Some(num / lg))
}

/// Stationary `α` density `p ∝ exp(2G/σ²)`, `G = mα²/2 + cα`, on a uniform grid.
pub fn fp_density<T: Scalar>(w: (T, T), gamma: T, sigma: T, grid_size: usize) -> Result<Vec<(T, T)>> {
    if !(sigma > T::zero()) {
        return Err(Error::ParamError("density needs sigma > 0".into()));
    }
    if grid_size < 2 {
        return Err(Error::ParamError("grid needs at least two points".into()));
    }
    let (m, c) = alpha_drift_coeffs(gamma, w.0, w.1);
    let h = T::one() / T::from_usize_lossy(grid_size - 1);
    let s2 = sigma * sigma;
    let logp: Vec<T> = (0..grid_size)
        .map(|i| {
            let a = T::from_usize_lossy(i) * h;
            T::c(2.0) * (m * a * a / T::c(2.0) + c * a) / s2
        })
        .collect();
    let mx = logp.iter().copied().fold(T::neg_infinity(), T::max);
    let raw: Vec<T> = logp.iter().map(|&l| (l - mx).exp()).collect();
    let z = trapezoid(&raw, h);
    Ok(raw.iter().enumerate().map(|(i, &v)| (T::from_usize_lossy(i) * h, v / z)).collect())
}

fn trapezoid<T: Scalar>(ys: &[T], h: T) -> T {
    let n = ys.len();
    let inner: T = ys[1..n - 1].iter().copied().sum();
    h * (inner + (ys[0] + ys[n - 1]) / T::c(2.0))
}

/// Probability of each of `bins` equal-width bins on `[0, 1]` under the density.
pub fn fp_bin_probs<T: Scalar>(w: (T, T), gamma: T, sigma: T, bins: usize) -> Result<Vec<T>> {
    let sub = 64;
    let dens = fp_density(w, gamma, sigma, bins * sub + 1)?;
    let h = T::one() / T::from_usize_lossy(bins * sub);
    let ys: Vec<T> = dens.iter().map(|d| d.1).collect();
    Ok((0..bins).map(|b| trapezoid(&ys[b * sub..=(b + 1) * sub], h)).collect())
}

/// Long-run histogram of `α` pooled over replicas, discarding `burn_in` time.
pub fn alpha_histogram(p: &SdeParams<f64>, replicas: usize, burn_in: f64, bins: usize) -> Result<Vec<f64>> {
    p.validate()?;
    let counts: Vec<Vec<u64>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut c = vec![0u64; bins];
            let q = SdeParams { record_every: 0, ..p.clone() };
            integrate_with(&q, r as u64, |s| {
                if s.t > burn_in {
                    let b = ((s.alpha * bins as f64) as usize).min(bins - 1);
                    c[b] += 1;
                }
            })
            .map(|_| c)
        })
        .collect::<Result<_>>()?;
    let mut tot = vec![0u64; bins];
    for c in &counts {
        for (t, v) in tot.iter_mut().zip(c) {
            *t += v;
        }
    }
    let n: u64 = tot.iter().sum();
    Ok(tot.iter().map(|&v| v as f64 / n as f64).collect())
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0
}

#[derive(Debug, Clone, Serialize)]
pub struct GapCell {
    pub tau: f64,
    pub sigma: f64,
    pub gap_mean: f64,
    pub gap_stderr: f64,
    /// `w2(0) ≥ (1−γ)/(1+γ²)`.
    pub cond_tau: bool,
    /// `G(1) < G(0)` at every step of every replica.
    pub cond_sigma: bool,
    /// Per-replica gaps, replica order.
    pub gaps: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapSweep {
    pub cells: Vec<GapCell>,
    /// For each `τ`, whether the gap is nonincreasing in `σ` up to two paired standard errors.
    pub sigma_monotone: Vec<(f64, bool)>,
    /// For each `σ`, whether the gap is nondecreasing in `τ` up to two standard errors.
    pub tau_monotone: Vec<(f64, bool)>,
}

/// Horizon after which the `w` drift has decayed below `1e−6`.
pub fn decayed_horizon(tau: f64) -> f64 {
    (1e6f64).ln() / tau
}

/// Ensemble estimate of `w2(∞) − w1(∞)` over a `(τ, σ)` grid. Replica `r`
/// reuses substream `r` in every cell, coupling the cells.
pub fn gap_sweep(base: &SdeParams<f64>, taus: &[f64], sigmas: &[f64], replicas: usize) -> Result<GapSweep> {
    let mut cells = Vec::new();
    for &tau in taus {
        for &sigma in sigmas {
            let p = SdeParams { tau, sigma, t_end: decayed_horizon(tau), record_every: 0, ..base.clone() };
            p.validate()?;
            let runs: Vec<Trajectory<f64>> =
                (0..replicas).into_par_iter().map(|r| integrate_with(&p, r as u64, |_| {})).collect::<Result<_>>()?;
            let gaps: Vec<f64> = runs.iter().map(|t| t.last.w2 - t.last.w1).collect();
            let (m, se) = crate::egt::mean_stderr(gaps.iter().copied());
            cells.push(GapCell {
                tau,
                sigma,
                gap_mean: m,
                gap_stderr: se,
                cond_tau: base.w0.1 >= (1.0 - base.gamma) / (1.0 + base.gamma * base.gamma),
                cond_sigma: runs.iter().all(|t| t.sigma_condition_held),
                gaps,
            });
        }
    }
    let ns = sigmas.len();
    let sigma_monotone = taus
        .iter()
        .enumerate()
        .map(|(ti, &tau)| {
            let row = &cells[ti * ns..(ti + 1) * ns];
            (tau, row.windows(2).all(|w| paired_not_above(&w[0].gaps, &w[1].gaps)))
        })
        .collect();
    let tau_monotone = sigmas
        .iter()
        .enumerate()
        .map(|(si, &sigma)| {
            let ok = (1..taus.len()).all(|ti| {
                let (a, b) = (&cells[(ti - 1) * ns + si], &cells[ti * ns + si]);
                b.gap_mean >= a.gap_mean - 2.0 * (a.gap_stderr.powi(2) + b.gap_stderr.powi(2)).sqrt()
            });
            (sigma, ok)
        })
        .collect();
    Ok(GapSweep { cells, sigma_monotone, tau_monotone })
}

/// `mean(after − before) ≤ 2 · stderr(after − before)` for coupled samples.
pub fn paired_not_above(before: &[f64], after: &[f64]) -> bool {
    let (m, se) = crate::egt::mean_stderr(before.iter().zip(after).map(|(b, a)| a - b));
    m <= 2.0 * se
}
