use serde::Serialize;

use super::chain::step_from_matrix;
use crate::error::{Error, Result};
use crate::linalg::{gth, log_laplacian_cofactor, Mat};
use crate::rng::substream;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StationaryMethod {
    /// State reduction (Grassmann-Taksar-Heyman).
    ExactSolve,
    /// Principal cofactors of `I − P`, i.e. summed rooted-tree weights.
    TreeTheorem,
    /// Long-run occupancy of a simulated path.
    MonteCarlo { steps: usize, burn_in: usize, seed: u64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaryDistribution<T> {
    pub probs: Vec<T>,
    pub method: StationaryMethod,
    /// `max_j |(μP − μ)_j|`.
    pub residual: T,
}

pub fn check_stochastic<T: Scalar>(p: &Mat<T>, tol: T) -> Result<()> {
    if p.rows != p.cols || p.rows == 0 {
        return Err(Error::LengthMismatch("transition matrix must be square and nonempty".into()));
    }
    for i in 0..p.rows {
        let row = p.row(i);
        if row.iter().any(|&v| v < T::zero() || v.is_nan()) {
            return Err(Error::PreconditionViolated(format!("row {i} has a negative entry")));
        }
        let s: T = row.iter().copied().sum();
        if (s - T::one()).abs() > tol {
            return Err(Error::PreconditionViolated(format!("row {i} sums to {s}")));
        }
    }
    Ok(())
}

/// Every state reaches every other through positive entries.
pub fn is_irreducible<T: Scalar>(p: &Mat<T>) -> bool {
    let n = p.rows;
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let v = if forward { p[(i, j)] } else { p[(j, i)] };
                if v > T::zero() && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

pub fn stationary_residual<T: Scalar>(p: &Mat<T>, mu: &[T]) -> T {
    let mp = p.vecmat(mu);
    mp.iter().zip(mu).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
}

/// Stationary distribution of an irreducible stochastic matrix.
///
/// Strict positivity is the usual sufficient condition; entries that
/// underflow to zero at tiny mutation rates are tolerated as long as the
/// chain stays irreducible.
pub fn stationary<T: Scalar>(p: &Mat<T>, method: StationaryMethod) -> Result<StationaryDistribution<T>> {
    check_stochastic(p, T::c(1e-9))?;
    let n = p.rows;
    if !is_irreducible(p) {
        let (i, j) = (0..n * n).map(|k| (k / n, k % n)).find(|&(i, j)| p[(i, j)] == T::zero()).unwrap_or((0, 0));
        return Err(Error::NotPositive(i, j));
    }
    let probs = match method {
        StationaryMethod::ExactSolve => gth(p),
        StationaryMethod::TreeTheorem => {
            let logs: Vec<T> = (0..n).map(|z| log_laplacian_cofactor(p, z)).collect();
            let mx = logs.iter().copied().fold(T::neg_infinity(), T::max);
            let w: Vec<T> = logs.iter().map(|&l| (l - mx).exp()).collect();
            let s: T = w.iter().copied().sum();
            w.into_iter().map(|x| x / s).collect()
        }
        StationaryMethod::MonteCarlo { steps, burn_in, seed } => {
            if steps == 0 {
                return Err(Error::ParamError("monte carlo needs at least one step".into()));
            }
            let mut rng = substream(seed, 0);
            let mut z = 0;
            for _ in 0..burn_in {
                z = step_from_matrix(p, z, &mut rng);
            }
            let mut counts = vec![0usize; n];
            for _ in 0..steps {
                z = step_from_matrix(p, z, &mut rng);
                counts[z] += 1;
            }
            counts.iter().map(|&c| T::from_usize_lossy(c) / T::from_usize_lossy(steps)).collect()
        }
    };
    let residual = stationary_residual(p, &probs);
    Ok(StationaryDistribution { probs, method, residual })
}

/// Dobrushin coefficient `1 − min_{i,j} Σ_s min(P_is, P_js)`.
pub fn dobrushin<T: Scalar>(p: &Mat<T>) -> T {
    let n = p.rows;
    let mut best = T::infinity();
    for i in 0..n {
        for j in i + 1..n {
            let s: T = p.row(i).iter().zip(p.row(j)).map(|(&a, &b)| a.min(b)).sum();
            best = best.min(s);
        }
    }
    if n < 2 {
        return T::zero();
    }
    (T::one() - best).max(T::zero()).min(T::one())
}

/// Equivalent half-maximal row distance form of [`dobrushin`].
pub fn dobrushin_row_distance<T: Scalar>(p: &Mat<T>) -> T {
    let n = p.rows;
    let mut best = T::zero();
    for i in 0..n {
        for j in i + 1..n {
            let s: T = p.row(i).iter().zip(p.row(j)).map(|(&a, &b)| (a - b).abs()).sum();
            best = best.max(s);
        }
    }
    best / T::c(2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reducible_chain_is_rejected() {
        let p = Mat::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        assert!(matches!(stationary(&p, StationaryMethod::ExactSolve), Err(Error::NotPositive(0, 1))));
    }

    #[test]
    fn dobrushin_extremes() {
        let same = Mat::from_rows(&[vec![0.2, 0.8], vec![0.2, 0.8]]).unwrap();
        assert_eq!(dobrushin(&same), 0.0);
        assert_eq!(dobrushin(&Mat::<f64>::identity(3)), 1.0);
    }
}
