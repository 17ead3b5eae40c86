use serde_json::json;
use shortcut_lab::egt::{
    self, failed_conditions, gd_conditions, mutation_energy, payoff_matrix, sgd_conditions, sss_sweep, stationary,
    thresholds, transition_matrix, z_star, ChainConfig, PayoffMatrix, PayoffMode, StationaryMethod, SweepConfig,
    SweepMethod,
};
use shortcut_lab::feature::{
    bias_equivalence_check, classify_feature, read_samples_csv, shortcut_bias, BiasReport, FeatureClass,
};
use shortcut_lab::kernel::{dk_bound_check, h_hat, ntk_zonal, spiked_experiment, SpikedModelConfig};
use shortcut_lab::linalg::Mat;
use shortcut_lab::nn::{
    dataset_variance_decomposition, gen_dataset, gen_probe, l1_probe, silhouette, tangent_pca, train, BatchMode, Mlp,
    ProbeTarget, SyntheticDataset, SyntheticDatasetConfig, TrainConfig, TrainingLog,
};
use shortcut_lab::rng::substream;
use shortcut_lab::sde::{
    fp_density, gap_sweep, integrate, integrate_with, ode_closed_form, tau_c, AlphaMode, SdeParams,
};
use shortcut_lab::{Error, Result};

use crate::config::{key, ExperimentConfig, Key};
use crate::output::{f, Outputs};

pub struct Outcome {
    pub summary: String,
    /// Set when a self-check failed; maps to exit code 2.
    pub invariant_failed: bool,
}

fn ok(summary: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { summary: summary.into(), invariant_failed: false })
}

const EGT_KEYS: &[Key] = &[
    key("n", "48", "population size N"),
    key("batch", "4", "mini-batch size B (must divide N)"),
    key("gamma", "0.5", "feature correlation gamma in (0, 1)"),
    key("w1", "0.2", "core weight w1"),
    key("w2", "0.3", "shortcut weight w2"),
    key("eps", "0.01", "mutation rate in [0, 0.5]"),
    key("mode", "gd", "payoff regime: gd | sgd-exact | sgd-sample"),
    key("steps", "1000", "chain steps (simulate) or Monte Carlo horizon"),
    key("replicas", "1", "independent replicas"),
    key("seed", "0", "64-bit seed"),
    key("z0", "mid", "initial state, or `mid` for N/2"),
    key("method", "exact", "stationary solver: exact | tree | mc"),
    key("eps-grid", "0.05,0.01,0.002", "mutation rates for sweep"),
    key("beta", "0.5", "margin in the full-batch standing conditions"),
    key("check-conditions", "true", "refuse to sweep when standing conditions fail"),
];

const SDE_KEYS: &[Key] = &[
    key("gamma", "0.5", "feature correlation gamma in (0, 1)"),
    key("tau", "0.3", "decay rate of the weight drift"),
    key("sigma", "0.4", "attention noise level"),
    key("alpha", "dynamic", "attention: fixed:<v> | dynamic"),
    key("alpha0", "0.2", "initial attention when dynamic"),
    key("w0", "0.02,0.4", "initial weights w1,w2"),
    key("dt", "0.001", "Euler step"),
    key("t-end", "20", "horizon"),
    key("replicas", "8", "independent replicas"),
    key("seed", "0", "64-bit seed"),
    key("record-every", "10", "keep every k-th step in trajectories"),
    key("taus", "0.3,0.8", "tau grid for sweep"),
    key("sigmas", "0,0.4", "sigma grid for sweep"),
    key("grid", "201", "density grid points"),
];

const KERNEL_KEYS: &[Key] = &[
    key("depth", "2", "NTK depth L"),
    key("grid", "201", "points on [-1, 1]"),
    key("n", "500", "spiked matrix size"),
    key("betas", "3,1.5,0.5", "spike amplitudes, descending"),
    key("sigma", "1", "Wigner noise level"),
    key("trials", "5", "spiked trials"),
    key("seed", "0", "64-bit seed"),
    key("input", "", "dense CSV data matrix for dk (rows are samples)"),
    key("rank", "1", "subspace rank r"),
];

const NN_KEYS: &[Key] = &[
    key("n-samples", "1024", "training samples"),
    key("d-core", "16", "core block dimension"),
    key("d-shortcut", "16", "shortcut block dimension"),
    key("d-noise", "16", "noise block dimension"),
    key("sep-core", "1.0", "core block separation"),
    key("sep-shortcut", "2.0", "shortcut block separation"),
    key("rho-sc", "0.9", "shortcut-core agreement rate in (0.5, 1]"),
    key("noise-std", "0.1", "isotropic input noise"),
    key("seed", "0", "64-bit seed"),
    key("probe-per-combo", "64", "probe samples per (core, shortcut) combination"),
    key("hidden", "64,32", "hidden widths"),
    key("batch", "full", "full | <B>"),
    key("lr", "0.05", "learning rate"),
    key("epochs", "50", "epochs"),
    key("l1", "0.1", "L1 weight of the probe"),
    key("k", "2", "principal components"),
];

const FEATURE_KEYS: &[Key] = &[
    key("input", "", "sample CSV: id,label,pred,<feature columns>"),
    key("alpha", "", "shortcut feature column"),
    key("beta", "", "reference (core) feature column"),
    key("balance-tol", "0.02", "balance tolerance of the equivalence check"),
    key("noise-tol", "auto", "covariance tolerance for noise classification"),
];

const VERIFY_KEYS: &[Key] = &[key("seed", "0", "64-bit seed")];

pub fn keys(group: &str, name: &str) -> &'static [Key] {
    match group {
        "egt" => EGT_KEYS,
        "sde" => SDE_KEYS,
        "kernel" => KERNEL_KEYS,
        "nnlab" => NN_KEYS,
        _ if name == "feature" => FEATURE_KEYS,
        _ => VERIFY_KEYS,
    }
}

pub fn dispatch(group: &str, name: &str, cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Outcome> {
    match (group, name) {
        ("egt", n) => egt_cmd(n, cfg, out),
        ("sde", n) => sde_cmd(n, cfg, out),
        ("kernel", n) => kernel_cmd(n, cfg, out),
        ("nnlab", n) => nn_cmd(n, cfg, out),
        ("", "feature") => feature_cmd(cfg, out),
        ("", "verify") => verify_cmd(cfg, out),
        _ => Err(Error::ConfigError(format!("unknown command `{group} {name}`"))),
    }
}

fn game(cfg: &ExperimentConfig) -> Result<(PayoffMatrix<f64>, ChainConfig<f64>)> {
    let pm = payoff_matrix(cfg.get::<f64>("gamma")?, cfg.get("w1")?, cfg.get("w2")?)?;
    let mode: PayoffMode = cfg.get("mode")?;
    let n: usize = cfg.get("n")?;
    let batch = (mode != PayoffMode::Gd).then(|| cfg.get::<usize>("batch")).transpose()?;
    let chain = ChainConfig { n, batch, eps: cfg.get("eps")?, mode, seed: cfg.get("seed")? };
    chain.validate()?;
    Ok((pm, chain))
}

fn egt_summary(pm: &PayoffMatrix<f64>, chain: &ChainConfig<f64>, beta: f64) -> serde_json::Value {
    let conds = match chain.mode {
        PayoffMode::Gd => gd_conditions(pm, chain.n, beta),
        _ => sgd_conditions(pm, chain.n, chain.batch.unwrap_or(0)),
    };
    json!({
        "payoffs": { "a": pm.a, "b": pm.b, "c": pm.c, "d": pm.d },
        "z_star": z_star(pm, chain.n).ok(),
        "thresholds": thresholds(pm, chain.n, chain.batch).ok(),
        "conditions": conds.iter().map(|(k, v)| json!({ "condition": k, "holds": v })).collect::<Vec<_>>(),
    })
}

fn egt_cmd(name: &str, cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Outcome> {
    let (pm, chain) = game(cfg)?;
    let beta: f64 = cfg.get("beta")?;
    let mut summary = egt_summary(&pm, &chain, beta);
    let n = chain.n;
    let line = match name {
        "simulate" => {
            let z0 = match cfg.raw("z0") {
                "mid" => n / 2,
                _ => cfg.get("z0")?,
            };
            let steps: usize = cfg.get("steps")?;
            let replicas: usize = cfg.get("replicas")?;
            let mut finals = Vec::new();
            for r in 0..replicas.max(1) {
                let mut rng = substream(chain.seed, r as u64);
                let path = egt::simulate(&chain, &pm, z0, steps, &mut rng)?;
                finals.push(*path.last().unwrap());
                let file = if r == 0 { "trajectory.csv".to_string() } else { format!("trajectory_{r}.csv") };
                out.csv(&file, &["t", "z"], path.iter().enumerate().map(|(t, z)| [t.to_string(), z.to_string()]))?;
            }
            summary["final_states"] = json!(finals);
            format!("{} replica(s) of {steps} steps, final states {finals:?}", replicas.max(1))
        }
        "stationary" => {
            let p = transition_matrix(&chain, &pm)?;
            let method = match cfg.raw("method") {
                "exact" => StationaryMethod::ExactSolve,
                "tree" => StationaryMethod::TreeTheorem,
                "mc" => {
                    let steps: usize = cfg.get("steps")?;
                    StationaryMethod::MonteCarlo { steps, burn_in: steps / 10, seed: chain.seed }
                }
                m => return Err(Error::ConfigError(format!("unknown stationary method `{m}`"))),
            };
            let mu = stationary(&p, method)?;
            out.csv("stationary.csv", &["z", "prob"], mu.probs.iter().enumerate().map(|(z, p)| [z.to_string(), f(*p)]))?;
            summary["residual"] = json!(mu.residual);
            summary["mass_at_0"] = json!(mu.probs[0]);
            summary["mass_at_n"] = json!(mu.probs[n]);
            format!("mass at 0 = {:.6}, at N = {:.6}, residual {:.1e}", mu.probs[0], mu.probs[n], mu.residual)
        }
        "energy" => {
            let rep = mutation_energy(&chain, &pm)?;
            let s = format!("chi1 {:?}, chi2 {:?}, escape costs to 0 / N: {:?} / {:?}", rep.chi1, rep.chi2, rep.e_h0, rep.e_hn);
            summary["energy"] = serde_json::to_value(&rep).map_err(|e| Error::Io(e.to_string()))?;
            s
        }
        "sweep" => {
            let method = match cfg.raw("method") {
                "exact" | "tree" => SweepMethod::Exact,
                "mc" => SweepMethod::MonteCarlo { horizon: cfg.get("steps")?, replicas: cfg.get("replicas")? },
                m => return Err(Error::ConfigError(format!("unknown sweep method `{m}`"))),
            };
            let sc = SweepConfig {
                chain: chain.clone(),
                schedule: vec![pm.clone()],
                epoch_len: 1,
                eps_grid: cfg.list("eps-grid")?,
                method,
                beta,
                check_conditions: cfg.get("check-conditions")?,
            };
            let rows = sss_sweep(&sc)?;
            out.csv("sweep.csv", &["eps", "occ0", "occN"], rows.iter().map(|r| [f(r.eps), f(r.occ0), f(r.occ_n)]))?;
            summary["sweep"] = json!(rows);
            rows.iter().map(|r| format!("eps {}: occ0 {:.4} occN {:.4}", r.eps, r.occ0, r.occ_n)).collect::<Vec<_>>().join("; ")
        }
        other => return Err(Error::ConfigError(format!("unknown egt command `{other}`"))),
    };
    if let Some(fail) = failed_conditions(
        &summary["conditions"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| (c["condition"].as_str().unwrap().to_string(), c["holds"].as_bool().unwrap()))
            .collect::<Vec<_>>(),
    ) {
        eprintln!("note: standing conditions not met: {fail}");
    }
    out.json("summary.json", &summary)?;
    ok(line)
}

fn pair(cfg: &ExperimentConfig, k: &str) -> Result<(f64, f64)> {
    match cfg.list::<f64>(k)?[..] {
        [a, b] => Ok((a, b)),
        _ => Err(Error::ConfigError(format!("{k} needs two comma-separated values"))),
    }
}

fn sde_params(cfg: &ExperimentConfig) -> Result<SdeParams<f64>> {
    let alpha = match cfg.raw("alpha") {
        "dynamic" => AlphaMode::Dynamic,
        s => match s.strip_prefix("fixed:") {
            Some(v) => AlphaMode::Fixed(v.parse().map_err(|e| Error::ConfigError(format!("alpha = `{s}`: {e}")))?),
            None => return Err(Error::ConfigError(format!("alpha must be `dynamic` or `fixed:<v>`, got `{s}`"))),
        },
    };
    let mut p = SdeParams::new(cfg.get("gamma")?, cfg.get("tau")?, cfg.get("sigma")?, pair(cfg, "w0")?, alpha);
    if alpha == AlphaMode::Dynamic {
        p.alpha0 = cfg.get("alpha0")?;
    }
    p.dt = cfg.get("dt")?;
    p.t_end = cfg.get("t-end")?;
    p.seed = cfg.get("seed")?;
    p.record_every = cfg.get("record-every")?;
    p.validate()?;
    Ok(p)
}

fn sde_cmd(name: &str, cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Outcome> {
    let p = sde_params(cfg)?;
    let replicas: usize = cfg.get("replicas")?;
    match name {
        "run" => {
            let mut lasts = Vec::new();
            for r in 0..replicas.max(1) {
                let tr = if r == 0 { integrate(&p)? } else { integrate_with(&p, r as u64, |_| {})? };
                if tr.w_out_of_range {
                    eprintln!("warning: replica {r} left w in [0, 1.5]");
                }
                if r == 0 {
                    out.csv(
                        "trajectory.csv",
                        &["t", "w1", "w2", "alpha"],
                        tr.states.iter().map(|s| [f(s.t), f(s.w1), f(s.w2), f(s.alpha)]),
                    )?;
                }
                lasts.push(tr.last);
            }
            let gaps: Vec<f64> = lasts.iter().map(|s| s.w2 - s.w1).collect();
            let (m, se) = egt::mean_stderr(gaps.iter().copied());
            let closed = ode_closed_form(&SdeParams { sigma: 0.0, ..p.clone() }).ok();
            out.json(
                "summary.json",
                &json!({
                    "final_states": lasts,
                    "gap_mean": m,
                    "gap_stderr": se,
                    "closed_form_limit": closed.as_ref().map(|c| c.limit()),
                    "tau_c": tau_c(&p).ok().flatten(),
                }),
            )?;
            ok(format!("final gap w2 - w1 = {m:.4} (stderr {se:.4}) over {} replica(s)", replicas.max(1)))
        }
        "sweep" => {
            let sw = gap_sweep(&p, &cfg.list("taus")?, &cfg.list("sigmas")?, replicas)?;
            out.csv(
                "sweep.csv",
                &["tau", "sigma", "gap_mean", "gap_stderr", "cond_tau", "cond_sigma"],
                sw.cells.iter().map(|c| {
                    [f(c.tau), f(c.sigma), f(c.gap_mean), f(c.gap_stderr), c.cond_tau.to_string(), c.cond_sigma.to_string()]
                }),
            )?;
            out.json("summary.json", &json!({ "sigma_monotone": sw.sigma_monotone, "tau_monotone": sw.tau_monotone }))?;
            ok(format!("{} cells", sw.cells.len()))
        }
        "density" => {
            let dens = fp_density(p.w0, p.gamma, p.sigma, cfg.get("grid")?)?;
            out.csv("density.csv", &["alpha", "p"], dens.iter().map(|(a, v)| [f(*a), f(*v)]))?;
            let mode = dens.iter().cloned().fold((0.0, f64::MIN), |b, d| if d.1 > b.1 { d } else { b });
            ok(format!("mode at alpha = {}", mode.0))
        }
        other => Err(Error::ConfigError(format!("unknown sde command `{other}`"))),
    }
}

/// Reads a dense numeric CSV matrix. A header row is skipped when it does not parse.
pub fn read_matrix_csv(path: &str) -> Result<Mat<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{path}: {e}")))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::ParseError { line, msg: e.to_string() })?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(|s| s.trim().parse::<f64>()).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if line == 1 => continue,
            Err(e) => return Err(Error::ParseError { line, msg: e.to_string() }),
        }
    }
    Mat::from_rows(&rows)
}

fn kernel_cmd(name: &str, cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Outcome> {
    match name {
        "ntk" => {
            let depth: usize = cfg.get("depth")?;
            let grid: usize = cfg.get("grid")?;
            if grid < 2 {
                return Err(Error::ConfigError("grid needs at least two points".into()));
            }
            let rows = (0..grid)
                .map(|i| {
                    let u = -1.0 + 2.0 * i as f64 / (grid - 1) as f64;
                    Ok([f(u), f(ntk_zonal(u, depth)?), f(h_hat(u))])
                })
                .collect::<Result<Vec<_>>>()?;
            out.csv("ntk.csv", &["u", "ntk", "h_hat"], rows)?;
            ok(format!("depth {depth} on {grid} points"))
        }
        "spiked" => {
            let sc = SpikedModelConfig {
                n: cfg.get("n")?,
                betas: cfg.list("betas")?,
                sigma: cfg.get("sigma")?,
                trials: cfg.get("trials")?,
                seed: cfg.get("seed")?,
            };
            let rep = spiked_experiment(&sc)?;
            let opt = |x: Option<f64>| x.map(f).unwrap_or_default();
            out.csv(
                "spiked.csv",
                &["beta", "mean_top_eig", "mean_overlap_sq", "predicted_eig", "predicted_overlap_sq", "bulk_edge"],
                rep.records.iter().map(|r| {
                    [
                        f(r.beta),
                        f(r.mean_top_eig),
                        f(r.mean_overlap_sq),
                        opt(r.predicted_eig),
                        opt(r.predicted_overlap_sq),
                        f(r.bulk_edge),
                    ]
                }),
            )?;
            out.json("spiked.json", &rep)?;
            ok(rep
                .records
                .iter()
                .map(|r| format!("beta {}: eig {:.4} overlap^2 {:.4}", r.beta, r.mean_top_eig, r.mean_overlap_sq))
                .collect::<Vec<_>>()
                .join("; "))
        }
        "dk" => {
            let path = cfg.raw("input");
            if path.is_empty() {
                return Err(Error::ConfigError("dk needs --input".into()));
            }
            let x = read_matrix_csv(path)?;
            let rep = dk_bound_check(&x, cfg.get("rank")?)?;
            out.json("dk.json", &rep)?;
            ok(format!("sin theta {:.4} vs bound {:.4}: {}", rep.angle, rep.bound, if rep.holds { "holds" } else { "violated" }))
        }
        other => Err(Error::ConfigError(format!("unknown kernel command `{other}`"))),
    }
}

fn nn_data(cfg: &ExperimentConfig) -> Result<(SyntheticDatasetConfig, SyntheticDataset, SyntheticDataset)> {
    let dc = SyntheticDatasetConfig {
        n_samples: cfg.get("n-samples")?,
        d_core: cfg.get("d-core")?,
        d_shortcut: cfg.get("d-shortcut")?,
        d_noise: cfg.get("d-noise")?,
        sep_core: cfg.get("sep-core")?,
        sep_shortcut: cfg.get("sep-shortcut")?,
        rho_sc: cfg.get("rho-sc")?,
        noise_std: cfg.get("noise-std")?,
        seed: cfg.get("seed")?,
    };
    let ds = gen_dataset(&dc)?;
    let probe = gen_probe(&dc, cfg.get("probe-per-combo")?)?;
    Ok((dc, ds, probe))
}

fn nn_train(cfg: &ExperimentConfig, ds: &SyntheticDataset, probe: &SyntheticDataset) -> Result<(Mlp<f64>, Mlp<f64>, TrainingLog)> {
    let mut widths = vec![ds.x.cols];
    widths.extend(cfg.list::<usize>("hidden")?);
    widths.push(1);
    let seed: u64 = cfg.get("seed")?;
    let init = Mlp::new(&widths, seed)?;
    let mut m = init.clone();
    let tc = TrainConfig { batch: cfg.get::<BatchMode>("batch")?, lr: cfg.get("lr")?, epochs: cfg.get("epochs")?, seed };
    let log = train(&mut m, ds, probe, &tc)?;
    Ok((init, m, log))
}

fn nn_cmd(name: &str, cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Outcome> {
    let (_, ds, probe) = nn_data(cfg)?;
    match name {
        "gen" => {
            let d = ds.x.cols;
            let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
            header.extend(["y", "v_core", "v_shortcut", "v_noise"].map(String::from));
            let h: Vec<&str> = header.iter().map(String::as_str).collect();
            out.csv(
                "dataset.csv",
                &h,
                (0..ds.len()).map(|i| {
                    let mut r: Vec<String> = ds.x.row(i).iter().map(|v| f(*v)).collect();
                    r.push(f(ds.y[i]));
                    r.extend([ds.v_core[i], ds.v_shortcut[i], ds.v_noise[i]].map(|v| v.to_string()));
                    r
                }),
            )?;
            let var = dataset_variance_decomposition(&ds)?;
            out.json(
                "variance.json",
                &json!({ "decomposition": var, "total_share": var.total_share(), "conflicts": ds.conflict_indices().len() }),
            )?;
            ok(format!(
                "{} samples; shortcut share {:.4}, core share {:.4}, {} conflicts",
                ds.len(),
                var.color_share,
                var.digit_share,
                ds.conflict_indices().len()
            ))
        }
        "train" => {
            let (_, _, log) = nn_train(cfg, &ds, &probe)?;
            out.csv(
                "metrics.csv",
                &["epoch", "loss", "acc", "bias", "score_core", "score_shortcut", "score_noise"],
                log.epochs.iter().map(|r| {
                    [r.epoch.to_string(), f(r.loss), f(r.acc), f(r.bias), f(r.score_core), f(r.score_shortcut), f(r.score_noise)]
                }),
            )?;
            out.json("summary.json", &json!({ "final": log.last(), "dropped_per_epoch": log.dropped_per_epoch }))?;
            let l = log.last();
            ok(format!("loss {:.4}, acc {:.4}, bias {:.4}", l.loss, l.acc, l.bias))
        }
        "probe" => {
            let (_, m, _) = nn_train(cfg, &ds, &probe)?;
            let l1: f64 = cfg.get("l1")?;
            let core = l1_probe(&m, &probe, ProbeTarget::CoreTask, l1);
            let short = l1_probe(&m, &probe, ProbeTarget::ShortcutTask, l1);
            let shared: Vec<usize> =
                core.active_neurons.iter().copied().filter(|n| short.active_neurons.contains(n)).collect();
            out.json("probe.json", &json!({ "l1": l1, "core": core, "shortcut": short, "shared_neurons": shared }))?;
            ok(format!(
                "core neurons {:?}, shortcut neurons {:?}, shared {:?}",
                core.active_neurons, short.active_neurons, shared
            ))
        }
        "pca" => {
            let (init, m, _) = nn_train(cfg, &ds, &probe)?;
            let k: usize = cfg.get("k")?;
            let before = tangent_pca(&init, &probe, k)?;
            let after = tangent_pca(&m, &probe, k)?;
            let mut header: Vec<String> = vec!["sample".into(), "stage".into()];
            header.extend((1..=k).map(|c| format!("pc{c}")));
            header.extend(["v_core", "v_shortcut", "v_noise"].map(String::from));
            let h: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows = [("init", &before), ("trained", &after)].into_iter().flat_map(|(stage, p)| {
                let probe = &probe;
                (0..probe.len()).map(move |i| {
                    let mut r = vec![i.to_string(), stage.to_string()];
                    r.extend(p.coords[i].iter().map(|v| f(*v)));
                    r.extend([probe.v_core[i], probe.v_shortcut[i], probe.v_noise[i]].map(|v| v.to_string()));
                    r
                })
            });
            out.csv("pca.csv", &h, rows)?;
            let sil = |p: &shortcut_lab::nn::TangentPca| {
                json!({
                    "core": silhouette(&p.coords, &probe.v_core),
                    "shortcut": silhouette(&p.coords, &probe.v_shortcut),
                    "eigenvalues": p.eigenvalues,
                })
            };
            let (b, a) = (sil(&before), sil(&after));
            let line = format!(
                "silhouette core/shortcut: init {:.3}/{:.3}, trained {:.3}/{:.3}",
                b["core"].as_f64().unwrap(),
                b["shortcut"].as_f64().unwrap(),
                a["core"].as_f64().unwrap(),
                a["shortcut"].as_f64().unwrap()
            );
            out.json("pca.json", &json!({ "init": b, "trained": a }))?;
            ok(line)
        }
        other => Err(Error::ConfigError(format!("unknown nnlab command `{other}`"))),
    }
}

fn feature_cmd(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Outcome> {
    let path = cfg.raw("input");
    if path.is_empty() {
        return Err(Error::ConfigError("feature needs --input".into()));
    }
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{path}: {e}")))?;
    let table = read_samples_csv(file)?;
    let noise_tol = match cfg.raw("noise-tol") {
        "auto" => None,
        _ => Some(cfg.get::<f64>("noise-tol")?),
    };
    let classes = table
        .features
        .iter()
        .map(|(name, fa)| Ok((name.clone(), classify_feature(fa, &table.lp.labels, noise_tol)?)))
        .collect::<Result<Vec<(String, FeatureClass)>>>()?;
    let mut report = json!({ "samples": table.lp.len(), "classes": classes.iter().map(|(n, c)| json!({ "feature": n, "class": c })).collect::<Vec<_>>() });
    let mut line = format!("{} samples, {} features", table.lp.len(), classes.len());
    let (an, bn) = (cfg.raw("alpha"), cfg.raw("beta"));
    if !an.is_empty() || !bn.is_empty() {
        let get = |n: &str| {
            table.features.get(n).ok_or_else(|| Error::ConfigError(format!("no feature column `{n}`")))
        };
        let (a, b) = (get(an)?, get(bn)?);
        let rep: BiasReport<f64> = shortcut_bias(a, b, &table.lp)?;
        let equiv = bias_equivalence_check::<f64>(a, b, &table.lp, cfg.get("balance-tol")?);
        line += &format!(", bias {:.4}", rep.shortcut_bias);
        report["bias"] = serde_json::to_value(&rep).map_err(|e| Error::Io(e.to_string()))?;
        report["equivalence"] = match equiv {
            Ok(gap) => json!({ "gap": gap }),
            Err(e) => json!({ "skipped": e.to_string() }),
        };
    }
    out.json("feature.json", &report)?;
    ok(line)
}

/// One named self-check: pass flag and a detail line.
fn check(name: &str, pass: bool, detail: String) -> serde_json::Value {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    json!({ "check": name, "pass": pass, "detail": detail })
}

fn verify_cmd(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Outcome> {
    let seed: u64 = cfg.get("seed")?;
    let mut results = Vec::new();

    let mut worst = 0.0f64;
    for eps in [0.1, 0.01, 0.001] {
        let p = egt::example_three_state::<f64>(eps);
        let mu = stationary(&p, StationaryMethod::ExactSolve)?.probs;
        let want = egt::example_three_state_stationary::<f64>(eps);
        worst = worst.max(mu.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    results.push(check("three-state example closed form", worst <= 1e-12, format!("max deviation {worst:.1e}")));

    let (w1, w2) = shortcut_lab::sde::w_equilibrium(0.5f64);
    let mut res = 0.0f64;
    for alpha in [0.0, 0.3, 0.5, 1.0] {
        let (m, b) = shortcut_lab::sde::linear_system(0.5f64, alpha);
        res = res.max((m[0][0] * w1 + m[0][1] * w2 + b[0]).abs()).max((m[1][0] * w1 + m[1][1] * w2 + b[1]).abs());
    }
    let arith = (w1 - 1.2).abs().max((w2 - 0.4).abs());
    results.push(check(
        "weight equilibrium",
        arith <= 1e-15 && res <= 1e-14,
        format!("w_eq ({w1}, {w2}), residual {res:.1e}"),
    ));

    let mut share_err = 0.0f64;
    for k in 0..3 {
        let dc = SyntheticDatasetConfig { n_samples: 300 + 37 * k, seed: seed.wrapping_add(k as u64), ..Default::default() };
        let var = dataset_variance_decomposition(&gen_dataset(&dc)?)?;
        share_err = share_err.max((var.total_share() - 1.0).abs());
    }
    results.push(check("variance shares sum to one", share_err <= 1e-10, format!("max error {share_err:.1e}")));

    let pm = payoff_matrix(0.5f64, 0.2, 0.3)?;
    let mut gap = 0.0f64;
    for chain in [ChainConfig::gd(12, 0.05), ChainConfig::sgd(12, 4, 0.05), ChainConfig::gd(30, 0.01)] {
        let p: Mat<f64> = transition_matrix(&chain, &pm)?;
        let a = stationary(&p, StationaryMethod::ExactSolve)?.probs;
        let b = stationary(&p, StationaryMethod::TreeTheorem)?.probs;
        gap = gap.max(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }
    results.push(check("tree theorem matches exact solve", gap <= 1e-10, format!("max disagreement {gap:.1e}")));

    let failed = results.iter().filter(|r| !r["pass"].as_bool().unwrap()).count();
    out.json("verify.json", &results)?;
    Ok(Outcome { summary: format!("{}/{} checks passed", results.len() - failed, results.len()), invariant_failed: failed > 0 })
}
