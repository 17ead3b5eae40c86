use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{Field, Scalar};

/// The 2x2 game between the core strategy `A` and the shortcut strategy `B`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PayoffMatrix<T> {
    pub gamma: T,
    pub w1: T,
    pub w2: T,
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

pub fn payoff_matrix<T: Field>(gamma: T, w1: T, w2: T) -> Result<PayoffMatrix<T>> {
    if !(gamma > T::zero() && gamma < T::one()) {
        return Err(Error::ParamError(format!("gamma {gamma:?} outside (0, 1)")));
    }
    if w1 < T::zero() || w2 < T::zero() {
        return Err(Error::ParamError(format!("negative intensity ({w1:?}, {w2:?})")));
    }
    let a = T::one() + gamma.clone() * w2.clone() - w1.clone();
    let d = T::one() - w2.clone() - gamma.clone() * w1.clone();
    let b = -(gamma.clone() * a.clone());
    let c = gamma.clone() * d.clone();
    Ok(PayoffMatrix { gamma, w1, w2, a, b, c, d })
}

impl<T: Field> PayoffMatrix<T> {
    /// Entries given directly, e.g. a rescaled game. `gamma`, `w1`, `w2` are left at zero.
    pub fn from_entries(a: T, b: T, c: T, d: T) -> Self {
        PayoffMatrix { gamma: T::zero(), w1: T::zero(), w2: T::zero(), a, b, c, d }
    }

    pub fn scaled(&self, k: T) -> Self {
        PayoffMatrix {
            a: self.a.clone() * k.clone(),
            b: self.b.clone() * k.clone(),
            c: self.c.clone() * k.clone(),
            d: self.d.clone() * k,
            ..self.clone()
        }
    }
}

/// Full-batch payoffs `(π_A, π_B)` with `z` core samples out of `n`.
pub fn pi_gd<T: Field>(z: usize, pm: &PayoffMatrix<T>, n: usize) -> (T, T) {
    let zf = T::from_i64(z as i64);
    let nf = T::from_i64(n as i64);
    let rest = T::from_i64((n - z) as i64);
    let pa = (zf.clone() * pm.a.clone() + rest.clone() * pm.b.clone()) / nf.clone();
    let pb = (zf * pm.c.clone() + rest * pm.d.clone()) / nf;
    (pa, pb)
}

/// Payoffs of one batch partition; `counts[j]` is the number of core samples in batch `j`.
pub fn pi_partition<T: Field>(counts: &[usize], pm: &PayoffMatrix<T>, batch: usize) -> (T, T) {
    let bf = T::from_i64(batch as i64);
    let (mut sa, mut na, mut sb, mut nb) = (T::zero(), 0i64, T::zero(), 0i64);
    for &k in counts {
        let kf = T::from_i64(k as i64);
        let rest = T::from_i64((batch - k) as i64);
        if k != 0 {
            sa = sa + (kf.clone() * pm.a.clone() + rest.clone() * pm.b.clone()) / bf.clone();
            na += 1;
        }
        if k != batch {
            sb = sb + (kf * pm.c.clone() + rest * pm.d.clone()) / bf.clone();
            nb += 1;
        }
    }
    finish_sentinel(sa, na, sb, nb, pm)
}

// An absent strategy is scored one below the other so selection never creates it.
fn finish_sentinel<T: Field>(sa: T, na: i64, sb: T, nb: i64, pm: &PayoffMatrix<T>) -> (T, T) {
    match (na, nb) {
        (0, 0) => (pm.a.clone(), pm.d.clone()),
        (0, _) => {
            let pb = sb / T::from_i64(nb);
            (pb.clone() - T::one(), pb)
        }
        (_, 0) => {
            let pa = sa / T::from_i64(na);
            (pa.clone(), pa - T::one())
        }
        _ => (sa / T::from_i64(na), sb / T::from_i64(nb)),
    }
}

pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// One class of batch partitions: `mult[k]` batches contain exactly `k` core samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionClass {
    pub mult: Vec<usize>,
    pub prob: f64,
}

fn ln_choose(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

fn count_multisets(parts: usize, kinds: usize) -> u128 {
    // C(parts + kinds - 1, kinds - 1)
    let mut r: u128 = 1;
    for i in 1..kinds as u128 {
        r = r * (parts as u128 + i) / i;
    }
    r
}

/// All partition classes reachable with `z` core samples, with their
/// multivariate-hypergeometric probabilities.
pub fn partition_classes(z: usize, n: usize, batch: usize) -> Result<Vec<PartitionClass>> {
    if batch == 0 || n % batch != 0 {
        return Err(Error::ParamError(format!("batch {batch} must divide n = {n}")));
    }
    if z > n {
        return Err(Error::ParamError(format!("z = {z} exceeds n = {n}")));
    }
    let m = n / batch;
    let total = count_multisets(m, batch + 1);
    if total > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge(total));
    }
    let ln_bc: Vec<f64> = (0..=batch).map(|k| ln_choose(batch, k)).collect();
    let ln_norm = ln_choose(n, z) - ln_factorial(m);
    let mut out = Vec::new();
    let mut mult = vec![0usize; batch + 1];
    fn rec(
        k: usize,
        left_batches: usize,
        left_z: usize,
        mult: &mut Vec<usize>,
        ln_bc: &[f64],
        ln_norm: f64,
        out: &mut Vec<PartitionClass>,
    ) {
        let batch = mult.len() - 1;
        if k == batch {
            if left_z == batch * left_batches {
                mult[batch] = left_batches;
                let mut lp = -ln_norm;
                for (kk, &c) in mult.iter().enumerate() {
                    lp += c as f64 * ln_bc[kk] - ln_factorial(c);
                }
                out.push(PartitionClass { mult: mult.clone(), prob: lp.exp() });
                mult[batch] = 0;
            }
            return;
        }
        for c in 0..=left_batches {
            if c * k > left_z {
                break;
            }
            let rem_b = left_batches - c;
            let rem_z = left_z - c * k;
            // remaining batches hold at most `batch` each
            if rem_z > rem_b * batch {
                continue;
            }
            mult[k] = c;
            rec(k + 1, rem_b, rem_z, mult, ln_bc, ln_norm, out);
        }
        mult[k] = 0;
    }
    rec(0, m, z, &mut mult, &ln_bc, ln_norm, &mut out);
    Ok(out)
}

impl PartitionClass {
    pub fn counts(&self) -> Vec<usize> {
        let mut v = Vec::new();
        for (k, &c) in self.mult.iter().enumerate() {
            v.extend(std::iter::repeat_n(k, c));
        }
        v
    }
}

/// Draws the per-batch core counts of one uniformly random partition.
pub fn sample_partition(z: usize, n: usize, batch: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
    let mut left_a = z;
    let mut left = n;
    let mut counts = Vec::with_capacity(n / batch);
    for _ in 0..n / batch {
        let mut k = 0;
        for _ in 0..batch {
            if rng.random_range(0..left) < left_a {
                k += 1;
                left_a -= 1;
            }
            left -= 1;
        }
        counts.push(k);
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SgdMode {
    Exact,
    Sample,
}

/// Mini-batch payoffs. `Exact` returns the expectation over all partitions,
/// `Sample` the payoffs of one random partition drawn from `seed`.
pub fn pi_sgd<T: Scalar>(
    z: usize,
    pm: &PayoffMatrix<T>,
    n: usize,
    batch: usize,
    mode: SgdMode,
    seed: u64,
) -> Result<(T, T)> {
    if batch == 0 || n % batch != 0 {
        return Err(Error::ParamError(format!("batch {batch} must divide n = {n}")));
    }
    if z > n {
        return Err(Error::ParamError(format!("z = {z} exceeds n = {n}")));
    }
    match mode {
        SgdMode::Sample => {
            let mut rng = crate::rng::substream(seed, z as u64);
            Ok(pi_partition(&sample_partition(z, n, batch, &mut rng), pm, batch))
        }
        SgdMode::Exact => {
            let mut ea = T::zero();
            let mut eb = T::zero();
            for cls in partition_classes(z, n, batch)? {
                let (pa, pb) = pi_partition(&cls.counts(), pm, batch);
                ea += T::c(cls.prob) * pa;
                eb += T::c(cls.prob) * pb;
            }
            Ok((ea, eb))
        }
    }
}

/// Derived thresholds of the game.
#[derive(Debug, Clone, Serialize)]
pub struct Thresholds {
    /// Indifference point of the full-batch payoffs.
    pub z_star: f64,
    pub tau: f64,
    pub ceil_tau_b: Option<usize>,
    /// Population size beyond which mini-batch selection favours the core near `z = N`.
    pub n_tilde: Option<f64>,
}

/// Indifference point `N(d − b)/((a − c) + (d − b))` of the full-batch payoffs.
/// Defined even when `a = d`, where only `τ` degenerates.
pub fn z_star<T: Scalar>(pm: &PayoffMatrix<T>, n: usize) -> Result<f64> {
    let denom = (pm.a - pm.c) + (pm.d - pm.b);
    if denom == T::zero() {
        return Err(Error::DegenerateGame);
    }
    Ok((T::from_usize_lossy(n) * (pm.d - pm.b) / denom).to_f64_lossy())
}

pub fn thresholds<T: Scalar>(pm: &PayoffMatrix<T>, n: usize, batch: Option<usize>) -> Result<Thresholds> {
    let (a, b, d) = (pm.a, pm.b, pm.d);
    if a == d {
        return Err(Error::DegenerateGame);
    }
    let z_star = z_star(pm, n)?;
    let tau = (a - b) / (a - d);
    let ceil_tau_b = batch.map(|bs| (tau * T::from_usize_lossy(bs)).ceil().to_usize().unwrap_or(usize::MAX));
    let n_tilde = match (batch, ceil_tau_b) {
        (Some(bs), Some(l)) => Some(n_tilde(pm, bs, l).to_f64_lossy()),
        _ => None,
    };
    Ok(Thresholds { z_star, tau: tau.to_f64_lossy(), ceil_tau_b, n_tilde })
}

/// `Ñ(L) = (L(a−b) − B⌊L/B⌋d)/(a−d)`.
pub fn n_tilde<T: Scalar>(pm: &PayoffMatrix<T>, batch: usize, l: usize) -> T {
    let lf = T::from_usize_lossy(l);
    let bf = T::from_usize_lossy(batch);
    let fl = T::from_usize_lossy(l / batch);
    (lf * (pm.a - pm.b) - bf * fl * pm.d) / (pm.a - pm.d)
}

/// Standing conditions under which full-batch selection drives the population to `z = 0`.
///
/// The intensity-gap condition is `w2 − w1 ≤ 2γβ/(1−γ²)`; with it and
/// `w1 + w2 ≤ 1 − β` the indifference point lies above `N/2`.
pub fn gd_conditions<T: Scalar>(pm: &PayoffMatrix<T>, n: usize, beta: T) -> Vec<(String, bool)> {
    let g = pm.gamma;
    let z_star = z_star(pm, n).unwrap_or(f64::NAN);
    vec![
        ("n even".to_string(), n % 2 == 0),
        ("w1 + w2 <= 1 - beta".to_string(), pm.w1 + pm.w2 <= T::one() - beta),
        (
            "w2 - w1 <= 2 gamma beta / (1 - gamma^2)".to_string(),
            pm.w2 - pm.w1 <= T::c(2.0) * g * beta / (T::one() - g * g),
        ),
        ("z* > n/2".to_string(), z_star > n as f64 / 2.0),
    ]
}

/// Standing conditions under which mini-batch selection drives the population to `z = N`.
pub fn sgd_conditions<T: Scalar>(pm: &PayoffMatrix<T>, n: usize, batch: usize) -> Vec<(String, bool)> {
    let g = pm.gamma;
    let divides = batch > 0 && n % batch == 0;
    let big_enough = thresholds(pm, n, Some(batch))
        .ok()
        .and_then(|t| t.n_tilde)
        .is_some_and(|nt| n as f64 >= nt);
    vec![
        ("batch divides n".to_string(), divides),
        ("(1+gamma) w2 > (1-gamma) w1".to_string(), (T::one() + g) * pm.w2 > (T::one() - g) * pm.w1),
        ("a > d".to_string(), pm.a > pm.d),
        ("n >= n_tilde(ceil(tau B))".to_string(), big_enough),
    ]
}

pub fn failed_conditions(conds: &[(String, bool)]) -> Option<String> {
    let failed: Vec<&str> = conds.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
    (!failed.is_empty()).then(|| failed.join(", "))
}
