use serde::Serialize;

use super::chain::{select_gd, transition_matrix, ChainConfig, PayoffMode};
use super::payoff::{pi_gd, z_star, PayoffMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const ENERGY_EPS_GRID: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];
pub const MAX_ENERGY_N: usize = 60;

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    /// Selected state `b(i)` for each `i`.
    pub selection: Vec<usize>,
    /// `E_ij = |b(i) − j|`.
    pub edge_energy: Vec<Vec<usize>>,
    /// Log-log slope of `P_ij(ε)`; `None` where a probability underflowed.
    pub fitted_energy: Vec<Vec<Option<f64>>>,
    /// Smallest state where the core strategy strictly wins.
    pub chi1: Option<usize>,
    /// Largest state where the shortcut strategy strictly wins.
    pub chi2: Option<usize>,
    pub z_star: f64,
    /// Cheapest escape cost into the basin of `0`, `N − χ2`.
    pub e_h0: Option<usize>,
    /// Cheapest escape cost into the basin of `N`, `χ1`.
    pub e_hn: Option<usize>,
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Mutation energies of the full-batch chain, analytic and fitted.
pub fn mutation_energy<T: Scalar>(cfg: &ChainConfig<T>, pm: &PayoffMatrix<T>) -> Result<EnergyReport> {
    if cfg.mode != PayoffMode::Gd {
        return Err(Error::ConfigError("mutation energies need a deterministic (full-batch) selection map".into()));
    }
    let n = cfg.n;
    if n > MAX_ENERGY_N {
        return Err(Error::SizeError(format!("n = {n} exceeds {MAX_ENERGY_N} for slope fitting")));
    }
    let selection: Vec<usize> = (0..=n).map(|z| select_gd(z, pm, n)).collect();
    let edge_energy: Vec<Vec<usize>> =
        selection.iter().map(|&b| (0..=n).map(|j| b.abs_diff(j)).collect()).collect();
    let mats = ENERGY_EPS_GRID
        .iter()
        .map(|&e| transition_matrix(&cfg.with_eps(T::c(e)), pm))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = ENERGY_EPS_GRID.iter().map(|e| e.ln()).collect();
    let mut fitted = vec![vec![None; n + 1]; n + 1];
    for i in 0..=n {
        for j in 0..=n {
            let ps: Vec<f64> = mats.iter().map(|m| m[(i, j)].to_f64_lossy()).collect();
            if ps.iter().any(|&p| p < f64::MIN_POSITIVE) {
                continue;
            }
            if edge_energy[i][j] > 0 && ps.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::FitError(format!("P[{i},{j}] not decreasing as eps shrinks: {ps:?}")));
            }
            let ys: Vec<f64> = ps.iter().map(|p| p.ln()).collect();
            fitted[i][j] = Some(slope(&xs, &ys));
        }
    }
    let gaps: Vec<T> = (0..=n).map(|z| {
        let (a, b) = pi_gd(z, pm, n);
        a - b
    }).collect();
    let chi1 = (0..=n).find(|&z| gaps[z] > T::zero());
    let chi2 = (0..=n).rev().find(|&z| gaps[z] < T::zero());
    let z_star = z_star(pm, n).unwrap_or(f64::NAN);
    Ok(EnergyReport {
        selection,
        edge_energy,
        fitted_energy: fitted,
        chi1,
        chi2,
        z_star,
        e_h0: chi2.map(|c| n - c),
        e_hn: chi1,
    })
}

/// Minimum total energy of a spanning tree directed into `root`
/// (Chu-Liu/Edmonds on the reversed graph). `cost[i][j]` prices the edge `i → j`.
pub fn min_rooted_tree_energy(cost: &[Vec<usize>], root: usize) -> Option<u64> {
    let n0 = cost.len();
    // reversed edges: parent j -> child i costs cost[i][j]
    let mut edges: Vec<(usize, usize, i64)> = Vec::new();
    for i in 0..n0 {
        for j in 0..n0 {
            if i != j && i != root {
                edges.push((j, i, cost[i][j] as i64));
            }
        }
    }
    let (mut n, mut root) = (n0, root);
    let mut total: i64 = 0;
    loop {
        let mut in_w = vec![i64::MAX; n];
        let mut pre = vec![usize::MAX; n];
        for &(u, v, w) in &edges {
            if u != v && w < in_w[v] {
                in_w[v] = w;
                pre[v] = u;
            }
        }
        if (0..n).any(|v| v != root && in_w[v] == i64::MAX) {
            return None;
        }
        in_w[root] = 0;
        let mut id = vec![usize::MAX; n];
        let mut vis = vec![usize::MAX; n];
        let mut cnt = 0;
        for v in 0..n {
            total += in_w[v];
            let mut u = v;
            while vis[u] != v && id[u] == usize::MAX && u != root {
                vis[u] = v;
                u = pre[u];
            }
            if u != root && id[u] == usize::MAX {
                let mut x = pre[u];
                while x != u {
                    id[x] = cnt;
                    x = pre[x];
                }
                id[u] = cnt;
                cnt += 1;
            }
        }
        if cnt == 0 {
            break;
        }
        for x in id.iter_mut() {
            if *x == usize::MAX {
                *x = cnt;
                cnt += 1;
            }
        }
        edges = edges
            .into_iter()
            .filter_map(|(u, v, w)| {
                let (nu, nv) = (id[u], id[v]);
                (nu != nv).then(|| (nu, nv, w - in_w[v]))
            })
            .collect();
        n = cnt;
        root = id[root];
    }
    Some(total as u64)
}

/// Stochastic potential of every state: minimum rooted-tree energy.
pub fn stochastic_potential(edge_energy: &[Vec<usize>]) -> Vec<u64> {
    (0..edge_energy.len())
        .map(|z| min_rooted_tree_energy(edge_energy, z).expect("complete graph has trees"))
        .collect()
}
