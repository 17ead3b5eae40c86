use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use shortcut_lab::egt::*;
use shortcut_lab::linalg::Mat;
use shortcut_lab::rng::substream;
use shortcut_lab::{Error, Field, Rational};

fn q(n: i64, d: i64) -> Rational {
    Rational::from_i64(n) / Rational::from_i64(d)
}

fn pm(gamma: f64, w1: f64, w2: f64) -> PayoffMatrix<f64> {
    payoff_matrix(gamma, w1, w2).unwrap()
}

#[test]
fn payoff_entries_by_substitution() {
    let p = payoff_matrix(q(1, 2), q(0, 1), q(0, 1)).unwrap();
    assert_eq!((p.a, p.b, p.c, p.d), (q(1, 1), q(-1, 2), q(1, 2), q(1, 1)));
    let p = payoff_matrix(q(1, 2), q(0, 1), q(1, 5)).unwrap();
    assert_eq!((p.a.clone(), p.b.clone(), p.c.clone(), p.d.clone()), (q(11, 10), q(-11, 20), q(2, 5), q(4, 5)));
    assert_eq!(p.b, -(p.gamma.clone() * p.a.clone()));
    assert_eq!(p.c, p.gamma.clone() * p.d.clone());
    // a vanishing coupling decouples the game
    let p = pm(1e-300, 0.3, 0.2);
    assert!(p.b.abs() < 1e-299 && p.c.abs() < 1e-299);
}

#[test]
fn payoff_rejects_out_of_range() {
    for (g, w1, w2) in [(0.0, 0.1, 0.1), (1.0, 0.1, 0.1), (0.5, -0.1, 0.0), (0.5, 0.0, -1e-9), (f64::NAN, 0.0, 0.0)] {
        assert!(matches!(payoff_matrix(g, w1, w2), Err(Error::ParamError(_))), "{g} {w1} {w2}");
    }
}

#[test]
fn full_batch_payoffs() {
    let p = pm(0.5, 0.0, 0.0);
    assert_eq!(pi_gd(10, &p, 10), (p.a, p.c));
    let (pa, pb) = pi_gd(5, &p, 10);
    assert_abs_diff_eq!(pa, 0.25, epsilon = 1e-15);
    assert_abs_diff_eq!(pb, 0.75, epsilon = 1e-15);
    // z* = N(1+γ)/2 = 3 is an integer for N = 4
    assert!(matches!(thresholds(&p, 4, None), Err(Error::DegenerateGame)));
    assert_abs_diff_eq!(z_star(&p, 4).unwrap(), 3.0, epsilon = 1e-12);
    let (pa, pb) = pi_gd(3, &p, 4);
    assert_abs_diff_eq!(pa, pb, epsilon = 1e-12);
    assert_eq!(select(3, pa, pb, 4), 3);
}

#[test]
fn thresholds_examples() {
    for g in [0.1, 0.5, 0.9] {
        let t = thresholds(&pm(g, 0.0, 0.0), 100, None);
        // a = d for w = 0, so tau is undefined there
        assert!(matches!(t, Err(Error::DegenerateGame)));
    }
    let p = pm(0.5, 0.0, 0.2);
    let t = thresholds(&p, 48, Some(4)).unwrap();
    assert_abs_diff_eq!(t.tau, 5.5, epsilon = 1e-12);
    assert_eq!(t.ceil_tau_b, Some(22));
    let zs = 48.0 * (p.d + 0.5 * p.a) / ((p.a - 0.5 * p.d) + (p.d + 0.5 * p.a));
    assert_abs_diff_eq!(t.z_star, zs, epsilon = 1e-12);
    let (l, b) = (22.0, 4.0);
    assert_abs_diff_eq!(t.n_tilde.unwrap(), (l * (p.a - p.b) - b * (l / b).floor() * p.d) / (p.a - p.d), epsilon = 1e-12);
}

#[test]
fn z_star_formula_for_untrained_game() {
    // a = d only at w = 0; z* is still defined there
    for (g, n) in [(0.5, 10), (0.2, 40), (1e-9, 6)] {
        let p = pm(g, 0.0, 0.0);
        assert_abs_diff_eq!(z_star(&p, n).unwrap(), n as f64 * (1.0 + g) / 2.0, epsilon = 1e-9);
    }
}

/// Payoffs of one ordered arrangement following the indicator-normalised means.
fn arrangement_payoffs(bits: &[bool], p: &PayoffMatrix<f64>, batch: usize) -> (f64, f64) {
    let (mut sa, mut na, mut sb, mut nb) = (0.0, 0, 0.0, 0);
    for blk in bits.chunks(batch) {
        let k = blk.iter().filter(|&&x| x).count() as f64;
        let bf = batch as f64;
        if k > 0.0 {
            sa += p.a * (k / bf - p.gamma * (bf - k) / bf);
            na += 1;
        }
        if k < bf {
            sb += p.d * (p.gamma * k / bf + (bf - k) / bf);
            nb += 1;
        }
    }
    match (na, nb) {
        (0, _) => (sb / nb as f64 - 1.0, sb / nb as f64),
        (_, 0) => (sa / na as f64, sa / na as f64 - 1.0),
        _ => (sa / na as f64, sb / nb as f64),
    }
}

#[test]
fn exact_minibatch_payoffs_match_arrangement_enumeration() {
    let p = pm(0.5, 0.1, 0.25);
    for (n, batch) in [(8, 2), (8, 4), (6, 3), (4, 2)] {
        for z in 0..=n {
            let (mut ea, mut eb, mut cnt) = (0.0, 0.0, 0usize);
            for mask in 0u32..(1 << n) {
                if mask.count_ones() as usize != z {
                    continue;
                }
                let bits: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
                let (a, b) = arrangement_payoffs(&bits, &p, batch);
                ea += a;
                eb += b;
                cnt += 1;
            }
            let (pa, pb) = pi_sgd(z, &p, n, batch, SgdMode::Exact, 0).unwrap();
            assert_abs_diff_eq!(pa, ea / cnt as f64, epsilon = 1e-12);
            assert_abs_diff_eq!(pb, eb / cnt as f64, epsilon = 1e-12);
        }
    }
}

#[test]
fn four_samples_two_batches() {
    let classes = partition_classes(2, 4, 2).unwrap();
    let mut probs: Vec<(Vec<usize>, f64)> = classes.iter().map(|c| (c.counts(), c.prob)).collect();
    probs.sort_by(|x, y| x.0.cmp(&y.0));
    // ordered outcomes (2,0), (1,1), (0,2) carry 1/6, 4/6, 1/6
    assert_eq!(probs[0].0, vec![0, 2]);
    assert_abs_diff_eq!(probs[0].1, 2.0 / 6.0, epsilon = 1e-14);
    assert_eq!(probs[1].0, vec![1, 1]);
    assert_abs_diff_eq!(probs[1].1, 4.0 / 6.0, epsilon = 1e-14);
    let p = pm(0.5, 0.0, 0.2);
    let (pa, pb) = pi_sgd(2, &p, 4, 2, SgdMode::Exact, 0).unwrap();
    assert_abs_diff_eq!(pa, (1.0 / 3.0) * p.a + (2.0 / 3.0) * (p.a + p.b) / 2.0, epsilon = 1e-14);
    assert_abs_diff_eq!(pb, (1.0 / 3.0) * p.d + (2.0 / 3.0) * (p.c + p.d) / 2.0, epsilon = 1e-14);
}

#[test]
fn partition_probabilities_sum_to_one() {
    for (z, n, b) in [(0, 12, 3), (7, 12, 3), (12, 12, 4), (25, 48, 4), (10, 20, 5)] {
        let s: f64 = partition_classes(z, n, b).unwrap().iter().map(|c| c.prob).sum();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
    }
    assert!(matches!(partition_classes(3, 10, 3), Err(Error::ParamError(_))));
    assert!(matches!(pi_sgd(3, &pm(0.5, 0.1, 0.1), 10, 4, SgdMode::Exact, 0), Err(Error::ParamError(_))));
    assert!(matches!(partition_classes(500, 1000, 50), Err(Error::EnumerationTooLarge(_))));
}

#[test]
fn absent_strategy_sentinel_keeps_boundaries() {
    let p = pm(0.5, 0.2, 0.3);
    let (pa, pb) = pi_sgd(0, &p, 8, 2, SgdMode::Exact, 0).unwrap();
    assert_abs_diff_eq!(pb, p.d, epsilon = 1e-15);
    assert!(pa < pb);
    assert_eq!(select(0, pa, pb, 8), 0);
    let (pa, pb) = pi_sgd(8, &p, 8, 2, SgdMode::Sample, 3).unwrap();
    assert_abs_diff_eq!(pa, p.a, epsilon = 1e-15);
    assert_eq!(select(8, pa, pb, 8), 8);
}

#[test]
fn concentrated_partition_favours_core_exactly() {
    // γ = 1/2, w = (0, 1/5): a = 11/10, d = 4/5, τ = 11/2, ⌈τB⌉ = 22 for B = 4
    let p = payoff_matrix(q(1, 2), q(0, 1), q(1, 5)).unwrap();
    let (n, batch) = (48usize, 4usize);
    let l = 22;
    for z in l..n {
        let full = z.div_ceil(batch) - 1;
        let mut k = vec![batch; full];
        k.push(z - full * batch);
        k.resize(n / batch, 0);
        assert_eq!(k.iter().sum::<usize>(), z);
        let (pa, pb) = pi_partition(&k, &p, batch);
        assert!(pa >= p.d && p.d >= pb, "z = {z}: {pa} {pb}");
    }
}

#[test]
fn printed_population_threshold_is_not_sufficient() {
    // N = 48 clears Ñ(17) ≈ 41.8, yet a partition with every batch occupied loses
    let p = pm(0.5, 0.2, 0.3);
    let t = thresholds(&p, 48, Some(4)).unwrap();
    assert_eq!(t.ceil_tau_b, Some(17));
    assert!(48.0 >= t.n_tilde.unwrap());
    let k = [4, 2, 1, 3, 2, 1, 4, 2, 2, 4, 4, 2];
    assert_eq!(k.iter().sum::<usize>(), 31);
    let (pa, pb) = pi_partition(&k, &p, 4);
    assert_abs_diff_eq!(pa, (31.0 * p.a + 17.0 * p.b) / 48.0, epsilon = 1e-14);
    assert!(pa < pb);
}

#[test]
fn sampled_partitions_near_the_top_favour_core() {
    // with all batches occupied π_A = (z a + (N−z) b)/N and π_B ≤ d,
    // so N > L(a − b)/(a − d) suffices for z ≥ N − L
    let p = pm(0.5, 0.0, 0.5);
    let (n, batch) = (48, 4);
    let t = thresholds(&p, n, Some(batch)).unwrap();
    let l = t.ceil_tau_b.unwrap();
    assert!(n as f64 > l as f64 * t.tau && n as f64 >= t.n_tilde.unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..10_000 {
        let z = rng.random_range(n - l.min(n)..n);
        let k = sample_partition(z, n, batch, &mut rng);
        let (pa, pb) = pi_partition(&k, &p, batch);
        assert!(pa > pb, "z = {z}, counts {k:?}");
    }
}

#[test]
fn zero_mutation_iterates_to_a_fixed_point() {
    let p = pm(0.5, 0.1, 0.1);
    let n = 20;
    let mut rng = substream(0, 0);
    for z0 in 0..=n {
        let mut z = z0;
        for _ in 0..=n {
            let (pa, pb) = pi_gd(z, &p, n);
            z = darwinian_step(z, pa, pb, 0.0, n, &mut rng);
        }
        let (pa, pb) = pi_gd(z, &p, n);
        assert_eq!(select(z, pa, pb, n), z, "from {z0}");
        assert!(z == 0 || z == n || (pa - pb).abs() < 1e-12);
    }
    assert_eq!(darwinian_step(7, 1.0, 1.0, 0.0, 20, &mut rng), 7);
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Law of `b + Bin(N−b, ε) − Bin(b, ε)` by direct double sum.
fn mutation_oracle(b: usize, n: usize, eps: f64) -> Vec<f64> {
    let mut row = vec![0.0; n + 1];
    for p in 0..=n - b {
        for qq in 0..=b {
            let pr = binom(n - b, p) * eps.powi(p as i32) * (1.0 - eps).powi((n - b - p) as i32)
                * binom(b, qq) * eps.powi(qq as i32) * (1.0 - eps).powi((b - qq) as i32);
            row[b + p - qq] += pr;
        }
    }
    row
}

#[test]
fn darwinian_step_frequencies_match_the_exact_row() {
    let (n, eps, z) = (10, 0.15, 4);
    let (pa, pb) = (1.0, 0.0);
    let row = mutation_oracle(5, n, eps);
    let draws = 100_000;
    let mut counts = vec![0usize; n + 1];
    let mut rng = substream(42, 0);
    for _ in 0..draws {
        counts[darwinian_step(z, pa, pb, eps, n, &mut rng)] += 1;
    }
    for (j, (&c, &pj)) in counts.iter().zip(&row).enumerate() {
        let f = c as f64 / draws as f64;
        let sd = (pj * (1.0 - pj) / draws as f64).sqrt();
        assert!((f - pj).abs() <= 3.0 * sd + 1e-12, "state {j}: {f} vs {pj}");
    }
}

#[test]
fn mutation_rows_match_double_sum() {
    for (n, eps) in [(6, 0.3), (12, 0.01), (20, 0.45)] {
        for b in 0..=n {
            let got = mutation_row(b, n, eps);
            let want = mutation_oracle(b, n, eps);
            for j in 0..=n {
                assert_abs_diff_eq!(got[j], want[j], epsilon = 1e-14);
            }
        }
    }
}

#[test]
fn transition_matrix_structure() {
    let p = pm(0.5, 0.15, 0.1);
    let n = 12;
    let zero = transition_matrix(&ChainConfig::gd(n, 0.0), &p).unwrap();
    for z in 0..=n {
        let b = select_gd(z, &p, n);
        for j in 0..=n {
            assert_eq!(zero[(z, j)], if j == b { 1.0 } else { 0.0 });
        }
    }
    for cfg in [ChainConfig::gd(n, 0.05), ChainConfig::sgd(n, 3, 0.05)] {
        let m = transition_matrix(&cfg, &p).unwrap();
        for z in 0..=n {
            let s: f64 = m.row(z).iter().sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
            assert!(m.row(z).iter().all(|&v| v > 0.0));
        }
    }
    assert!(matches!(transition_matrix(&ChainConfig::gd(2001, 0.1), &p), Err(Error::SizeError(_))));
    assert!(matches!(transition_matrix(&ChainConfig::sgd(10, 3, 0.1), &p), Err(Error::ConfigError(_))));
}

#[test]
fn minibatch_rows_mix_selection_outcomes() {
    let p = pm(0.5, 0.2, 0.3);
    let (n, batch, eps) = (8, 2, 0.07);
    let m = transition_matrix(&ChainConfig::sgd(n, batch, eps), &p).unwrap();
    for z in 0..=n {
        let mut want = vec![0.0; n + 1];
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != z {
                continue;
            }
            let bits: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let (pa, pb) = arrangement_payoffs(&bits, &p, batch);
            let row = mutation_oracle(select(z, pa, pb, n), n, eps);
            let w = 1.0 / binom(n, z);
            for j in 0..=n {
                want[j] += w * row[j];
            }
        }
        for j in 0..=n {
            assert_abs_diff_eq!(m[(z, j)], want[j], epsilon = 1e-12);
        }
    }
}

#[test]
fn simulated_steps_match_matrix_rows() {
    let p = pm(0.5, 0.3, 0.1);
    let n = 6;
    for cfg in [ChainConfig::gd(n, 0.1), ChainConfig::sgd(n, 2, 0.1)] {
        let m = transition_matrix(&cfg, &p).unwrap();
        let mut rng = substream(9, 1);
        let draws = 60_000;
        for z in [0, 2, 3, 6] {
            let mut counts = vec![0usize; n + 1];
            for _ in 0..draws {
                counts[chain_step(z, &p, &cfg, &mut rng)] += 1;
            }
            for j in 0..=n {
                let f = counts[j] as f64 / draws as f64;
                let pj = m[(z, j)];
                let sd = (pj * (1.0 - pj) / draws as f64).sqrt();
                assert!((f - pj).abs() <= 4.0 * sd + 1e-9, "{:?} z={z} j={j}: {f} vs {pj}", cfg.mode);
            }
        }
    }
}

#[test]
fn three_state_example() {
    let m = example_three_state(0.1f64);
    let want = [[0.79, 0.2, 0.01], [0.79, 0.2, 0.01], [0.01, 0.2, 0.79]];
    for i in 0..3 {
        for j in 0..3 {
            assert_abs_diff_eq!(m[(i, j)], want[i][j], epsilon = 1e-15);
        }
    }
    for method in [StationaryMethod::ExactSolve, StationaryMethod::TreeTheorem] {
        let mu = stationary(&m, method).unwrap();
        assert_abs_diff_eq!(mu.probs[0], 1.66 / 2.2, epsilon = 1e-12);
        assert_abs_diff_eq!(mu.probs[1], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(mu.probs[2], 0.1 / 2.2, epsilon = 1e-12);
        assert!(mu.residual < 1e-12);
    }
    let mut prev = 0.0;
    for k in 1..=6 {
        let e = 10f64.powi(-k);
        let mu = stationary(&example_three_state(e), StationaryMethod::ExactSolve).unwrap();
        assert!(mu.probs[0] > prev);
        prev = mu.probs[0];
        let closed = example_three_state_stationary(e);
        for s in 0..3 {
            assert_abs_diff_eq!(mu.probs[s], closed[s], epsilon = 1e-12);
        }
    }
    assert!(prev > 1.0 - 1e-5);
}

fn random_stochastic(rng: &mut ChaCha8Rng, n: usize) -> Mat<f64> {
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        let row: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = row.iter().sum();
        for j in 0..n {
            m[(i, j)] = row[j] / s;
        }
    }
    m
}

/// Σ over spanning in-trees rooted at `root` of the product of edge weights.
fn tree_weight(p: &Mat<f64>, root: usize) -> f64 {
    let n = p.rows;
    let others: Vec<usize> = (0..n).filter(|&v| v != root).collect();
    let mut parent = vec![0usize; n];
    let mut total = 0.0;
    let combos = (n as u64).pow(others.len() as u32);
    for code in 0..combos {
        let mut c = code;
        for &v in &others {
            parent[v] = (c % n as u64) as usize;
            c /= n as u64;
        }
        if others.iter().any(|&v| parent[v] == v) {
            continue;
        }
        let acyclic = others.iter().all(|&v| {
            let mut u = v;
            for _ in 0..n {
                if u == root {
                    return true;
                }
                u = parent[u];
            }
            false
        });
        if acyclic {
            total += others.iter().map(|&v| p[(v, parent[v])]).product::<f64>();
        }
    }
    total
}

#[test]
fn tree_theorem_matches_brute_force_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in [3, 4, 5] {
        let p = random_stochastic(&mut rng, n);
        let w: Vec<f64> = (0..n).map(|z| tree_weight(&p, z)).collect();
        let s: f64 = w.iter().sum();
        let mu = stationary(&p, StationaryMethod::TreeTheorem).unwrap();
        for z in 0..n {
            assert_abs_diff_eq!(mu.probs[z], w[z] / s, epsilon = 1e-13);
        }
    }
}

#[test]
fn stationary_methods_agree_on_five_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let p = random_stochastic(&mut rng, 5);
    let a = stationary(&p, StationaryMethod::ExactSolve).unwrap();
    let b = stationary(&p, StationaryMethod::TreeTheorem).unwrap();
    let c = stationary(&p, StationaryMethod::MonteCarlo { steps: 1_000_000, burn_in: 1000, seed: 3 }).unwrap();
    for z in 0..5 {
        assert_abs_diff_eq!(a.probs[z], b.probs[z], epsilon = 1e-12);
        assert_abs_diff_eq!(a.probs[z], c.probs[z], epsilon = 5e-3);
    }
    assert!(a.residual <= 1e-10 && b.residual <= 1e-10);
    assert_abs_diff_eq!(c.probs.iter().sum::<f64>(), 1.0, epsilon = 1e-3);
}

#[test]
fn tree_and_exact_agree_on_population_chains() {
    for n in [2, 6, 10, 12] {
        for cfg in [ChainConfig::gd(n, 0.02), ChainConfig::sgd(n, 2, 0.02)] {
            let m = transition_matrix(&cfg, &pm(0.5, 0.1, 0.2)).unwrap();
            let a = stationary(&m, StationaryMethod::ExactSolve).unwrap();
            let b = stationary(&m, StationaryMethod::TreeTheorem).unwrap();
            for z in 0..=n {
                assert_abs_diff_eq!(a.probs[z], b.probs[z], epsilon = 1e-9);
            }
        }
    }
}

#[test]
fn reducible_chains_are_rejected() {
    let m = Mat::from_rows(&[vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
    assert!(matches!(stationary(&m, StationaryMethod::ExactSolve), Err(Error::NotPositive(_, _))));
    let bad = Mat::from_rows(&[vec![0.7, 0.2], vec![0.5, 0.5]]).unwrap();
    assert!(matches!(stationary(&bad, StationaryMethod::ExactSolve), Err(Error::PreconditionViolated(_))));
}

#[test]
fn dobrushin_examples() {
    let same = Mat::from_rows(&[vec![0.2, 0.8], vec![0.2, 0.8]]).unwrap();
    assert_eq!(dobrushin(&same), 0.0);
    assert_eq!(dobrushin(&Mat::<f64>::identity(4)), 1.0);
    let m = example_three_state(0.1f64);
    assert_abs_diff_eq!(dobrushin(&m), dobrushin_row_distance(&m), epsilon = 1e-15);
    assert_abs_diff_eq!(dobrushin(&m), 0.78, epsilon = 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let p = random_stochastic(&mut rng, 6);
        let d = dobrushin(&p);
        assert!((0.0..=1.0).contains(&d));
        assert_abs_diff_eq!(d, dobrushin_row_distance(&p), epsilon = 1e-14);
    }
}

#[test]
fn energy_report_structure() {
    let p = pm(0.5, 0.1, 0.1);
    let n = 10;
    let cfg = ChainConfig::gd(n, 0.01);
    assert!(failed_conditions(&gd_conditions(&p, n, 0.1)).is_none());
    let r = mutation_energy(&cfg, &p).unwrap();
    for i in 0..=n {
        assert_eq!(r.edge_energy[i][r.selection[i]], 0);
        for j in 0..=n {
            assert_eq!(r.edge_energy[i][j], r.selection[i].abs_diff(j));
            if let Some(f) = r.fitted_energy[i][j] {
                if r.edge_energy[i][j] <= 4 {
                    assert_abs_diff_eq!(f, r.edge_energy[i][j] as f64, epsilon = 0.1);
                }
            }
        }
    }
    let (c1, c2) = (r.chi1.unwrap() as f64, r.chi2.unwrap() as f64);
    assert!(c2 < r.z_star && r.z_star < c1);
    assert!(r.z_star > n as f64 / 2.0);
    assert!(r.e_h0.unwrap() < r.e_hn.unwrap());
    assert!(matches!(mutation_energy(&ChainConfig::sgd(n, 2, 0.01), &p), Err(Error::ConfigError(_))));
    assert!(matches!(mutation_energy(&ChainConfig::gd(61, 0.01), &p), Err(Error::SizeError(_))));
}

/// Minimum rooted in-tree cost by exhaustive parent assignment.
fn brute_min_tree(cost: &[Vec<usize>], root: usize) -> u64 {
    let n = cost.len();
    let others: Vec<usize> = (0..n).filter(|&v| v != root).collect();
    let mut parent = vec![0usize; n];
    let mut best = u64::MAX;
    for code in 0..(n as u64).pow(others.len() as u32) {
        let mut c = code;
        for &v in &others {
            parent[v] = (c % n as u64) as usize;
            c /= n as u64;
        }
        if others.iter().any(|&v| parent[v] == v) {
            continue;
        }
        let ok = others.iter().all(|&v| {
            let mut u = v;
            (0..n).any(|_| {
                u = parent[u];
                u == root
            })
        });
        if ok {
            best = best.min(others.iter().map(|&v| cost[v][parent[v]] as u64).sum());
        }
    }
    best
}

#[test]
fn edmonds_matches_exhaustive_search() {
    let p = pm(0.5, 0.1, 0.1);
    let r = mutation_energy(&ChainConfig::gd(6, 0.01), &p).unwrap();
    let pot = stochastic_potential(&r.edge_energy);
    for z in 0..=6 {
        assert_eq!(pot[z], brute_min_tree(&r.edge_energy, z), "root {z}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..20 {
        let n = rng.random_range(3..7);
        let cost: Vec<Vec<usize>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(0..6)).collect()).collect();
        for root in 0..n {
            assert_eq!(min_rooted_tree_energy(&cost, root), Some(brute_min_tree(&cost, root)));
        }
    }
}

#[test]
fn stationary_mass_follows_stochastic_potential() {
    let p = pm(0.5, 0.1, 0.1);
    let n = 6;
    let r = mutation_energy(&ChainConfig::gd(n, 0.01), &p).unwrap();
    let pot = stochastic_potential(&r.edge_energy);
    let best = (0..=n).min_by_key(|&z| pot[z]).unwrap();
    assert_eq!(best, 0);
    let eps = 1e-5;
    let m = transition_matrix(&ChainConfig::gd(n, eps), &p).unwrap();
    let mu = stationary(&m, StationaryMethod::TreeTheorem).unwrap().probs;
    for i in 0..=n {
        for j in 0..=n {
            if pot[i] < pot[j] {
                assert!(mu[i] > mu[j], "states {i},{j}: potentials {} < {}, masses {} {}", pot[i], pot[j], mu[i], mu[j]);
            }
        }
    }
    assert!(mu[0] > 0.99);
}

fn sweep(mode_sgd: bool, p: PayoffMatrix<f64>, n: usize, eps_grid: Vec<f64>) -> SweepConfig<f64> {
    SweepConfig {
        chain: if mode_sgd { ChainConfig::sgd(n, 4, 0.1) } else { ChainConfig::gd(n, 0.1) },
        schedule: vec![p],
        epoch_len: 1,
        eps_grid,
        method: SweepMethod::Exact,
        beta: 0.1,
        check_conditions: true,
    }
}

#[test]
fn full_batch_sweep_concentrates_on_zero() {
    let cfg = sweep(false, pm(0.5, 0.1, 0.1), 50, vec![0.05, 0.02, 0.01, 0.005]);
    let rows = sss_sweep(&cfg).unwrap();
    assert!(rows.windows(2).all(|w| w[1].occ0 > w[0].occ0));
    // exact stationary solve of the same chain
    for r in &rows {
        let m = transition_matrix(&ChainConfig::gd(50, r.eps), &pm(0.5, 0.1, 0.1)).unwrap();
        let mu = stationary(&m, StationaryMethod::ExactSolve).unwrap().probs;
        assert_abs_diff_eq!(r.occ0, mu[0], epsilon = 1e-12);
    }
}

#[test]
fn maximal_mutation_makes_the_boundaries_equal() {
    let cfg = sweep(false, pm(0.5, 0.1, 0.1), 10, vec![0.5]);
    let r = &sss_sweep(&cfg).unwrap()[0];
    assert_abs_diff_eq!(r.occ0, r.occ_n, epsilon = 1e-15);
    assert_abs_diff_eq!(r.occ0, 2f64.powi(-10), epsilon = 1e-15);
}

#[test]
fn sweep_names_the_violated_condition() {
    let cfg = sweep(false, pm(0.5, 0.6, 0.5), 10, vec![0.1]);
    match sss_sweep(&cfg) {
        Err(Error::ConditionViolated(msg)) => assert!(msg.contains("w1 + w2"), "{msg}"),
        other => panic!("{other:?}"),
    }
    let cfg = sweep(true, pm(0.5, 0.5, 0.1), 48, vec![0.1]);
    match sss_sweep(&cfg) {
        Err(Error::ConditionViolated(msg)) => assert!(msg.contains("(1+gamma) w2"), "{msg}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn monte_carlo_sweep_needs_a_long_horizon() {
    let mut cfg = sweep(false, pm(0.5, 0.1, 0.1), 10, vec![0.01]);
    cfg.method = SweepMethod::MonteCarlo { horizon: 500, replicas: 2 };
    assert!(matches!(sss_sweep(&cfg), Err(Error::PreconditionViolated(_))));
    cfg.method = SweepMethod::MonteCarlo { horizon: 20_000, replicas: 8 };
    let mc = &sss_sweep(&cfg).unwrap()[0];
    cfg.method = SweepMethod::Exact;
    let ex = &sss_sweep(&cfg).unwrap()[0];
    assert!((mc.occ0 - ex.occ0).abs() < 4.0 * mc.occ0_stderr + 0.02, "{} vs {}", mc.occ0, ex.occ0);
}

#[test]
fn positive_scaling_keeps_selection() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..50 {
        let p = pm(rng.random_range(0.05..0.95), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let k = rng.random_range(0.01..100.0);
        let s = p.scaled(k);
        for z in 0..=20 {
            assert_eq!(select_gd(z, &p, 20), select_gd(z, &s, 20));
            let c = sample_partition(z, 20, 4, &mut rng);
            let (a1, b1) = pi_partition(&c, &p, 4);
            let (a2, b2) = pi_partition(&c, &s, 4);
            assert_eq!(select(z, a1, b1, 20), select(z, a2, b2, 20));
        }
    }
}

#[test]
fn switching_between_admissible_games_concentrates() {
    let tables = vec![pm(0.5, 0.1, 0.1), pm(0.5, 0.2, 0.1), pm(0.5, 0.1, 0.2)];
    for t in &tables {
        assert!(failed_conditions(&gd_conditions(t, 10, 0.1)).is_none());
    }
    let tv = switching_tv_distance(&ChainConfig::gd(10, 0.1), &tables, &[0.05, 0.02, 0.005], 0, 400_000, 1).unwrap();
    assert!(tv.windows(2).all(|w| w[1] < w[0]), "{tv:?}");
}

#[test]
fn sampled_minibatch_chain_is_reproducible() {
    let p = pm(0.5, 0.2, 0.3);
    let mut cfg = ChainConfig::sgd(12, 3, 0.05);
    cfg.mode = PayoffMode::SgdSample;
    let a = simulate(&cfg, &p, 6, 500, &mut substream(4, 0)).unwrap();
    let b = simulate(&cfg, &p, 6, 500, &mut substream(4, 0)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 501);
    assert!(matches!(simulate(&cfg, &p, 13, 5, &mut substream(4, 0)), Err(Error::ParamError(_))));
}
