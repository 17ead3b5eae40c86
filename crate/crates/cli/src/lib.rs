//! Command-line front end: argument parsing, configuration layering and dispatch.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Arg, ArgAction, ArgMatches, Command};
use shortcut_lab::{Error, Result};

use config::{ExperimentConfig, Key};
use output::Outputs;

pub const OUT_ENV: &str = "SHORTCUT_LAB_OUT";
const DEFAULT_OUT: &str = "shortcut-lab-out";

/// Leaf commands as `(group, name, about)`; an empty group means top level.
const LEAVES: &[(&str, &str, &str)] = &[
    ("egt", "simulate", "simulate population-chain trajectories"),
    ("egt", "stationary", "stationary law of the population chain"),
    ("egt", "energy", "mutation energies of the full-batch chain"),
    ("egt", "sweep", "boundary occupancy across mutation rates"),
    ("sde", "run", "integrate the weight/attention dynamics"),
    ("sde", "sweep", "limiting gap over a (tau, sigma) grid"),
    ("sde", "density", "stationary attention density"),
    ("kernel", "ntk", "zonal NTK and its quadratic surrogate on [-1, 1]"),
    ("kernel", "spiked", "spiked Wigner eigenvalue and overlap transition"),
    ("kernel", "dk", "alignment bound between linear and NTK Gram matrices"),
    ("nnlab", "gen", "generate the synthetic dataset and its variance shares"),
    ("nnlab", "train", "train the MLP and log per-epoch metrics"),
    ("nnlab", "probe", "L1 subnetwork probe after training"),
    ("nnlab", "pca", "tangent-feature PCA before and after training"),
    ("", "feature", "shortcut bias and feature classes from a sample CSV"),
    ("", "verify", "run the closed-form self-checks"),
];

fn key_args(keys: &[Key]) -> Vec<Arg> {
    keys.iter()
        .map(|k| {
            Arg::new(k.name)
                .long(k.name)
                .value_name("VALUE")
                .help(format!("{} [default: {}]", k.help, if k.default.is_empty() { "none" } else { k.default }))
        })
        .collect()
}

pub fn cli() -> Command {
    let mut root = Command::new("shortcut-lab")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Numerical laboratory for shortcut-learning dynamics")
        .subcommand_required(true)
        .arg(Arg::new("config").long("config").global(true).value_name("FILE").help("flat key=value file; flags override it"))
        .arg(
            Arg::new("out")
                .long("out")
                .global(true)
                .value_name("DIR")
                .help(format!("output directory [default: ${OUT_ENV} or ./{DEFAULT_OUT}]")),
        )
        .arg(
            Arg::new("threads")
                .long("threads")
                .global(true)
                .value_name("N")
                .value_parser(clap::value_parser!(usize))
                .help("cap on worker threads"),
        )
        .arg(Arg::new("quiet").long("quiet").short('q').global(true).action(ArgAction::SetTrue).help("suppress the summary line"));
    let mut groups: Vec<(&str, Command)> = Vec::new();
    for &(group, name, about) in LEAVES {
        let leaf = Command::new(name).about(about).args(key_args(commands::keys(group, name)));
        if group.is_empty() {
            root = root.subcommand(leaf);
        } else if let Some(g) = groups.iter_mut().find(|g| g.0 == group) {
            g.1 = std::mem::replace(&mut g.1, Command::new(group)).subcommand(leaf);
        } else {
            groups.push((group, Command::new(group).subcommand_required(true).subcommand(leaf)));
        }
    }
    for (name, g) in groups {
        let about = match name {
            "egt" => "evolutionary-game population chain",
            "sde" => "weight/attention stochastic dynamics",
            "kernel" => "NTK spectral analysis",
            _ => "synthetic shortcut-learning network experiments",
        };
        root = root.subcommand(g.about(about));
    }
    root
}

/// Leaf path and matches, e.g. `("egt", "simulate", m)` or `("", "verify", m)`.
fn leaf(m: &ArgMatches) -> (&str, &str, &ArgMatches) {
    let (top, sub) = m.subcommand().expect("subcommand required");
    match sub.subcommand() {
        Some((name, inner)) => (top, name, inner),
        None => ("", top, sub),
    }
}

fn resolve(keys: &[Key], m: &ArgMatches) -> Result<ExperimentConfig> {
    let file = match m.get_one::<String>("config") {
        Some(p) => config::load_config(p.as_ref())?,
        None => Vec::new(),
    };
    let flags: Vec<(String, String)> = keys
        .iter()
        .filter_map(|k| m.get_one::<String>(k.name).map(|v| (k.name.to_string(), v.clone())))
        .collect();
    ExperimentConfig::resolve(keys, &file, &flags)
}

fn out_dir(m: &ArgMatches) -> PathBuf {
    m.get_one::<String>("out")
        .cloned()
        .or_else(|| std::env::var(OUT_ENV).ok().filter(|s| !s.is_empty()))
        .unwrap_or_else(|| DEFAULT_OUT.to_string())
        .into()
}

/// Maps a library error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_invariant() {
        2
    } else {
        1
    }
}

/// Runs one invocation and returns its exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let m = match cli().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (group, name, lm) = leaf(&m);
    let threads = lm.get_one::<usize>("threads").copied();
    if let Some(t) = threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    let command = if group.is_empty() { name.to_string() } else { format!("{group} {name}") };
    let result = (|| -> Result<commands::Outcome> {
        let cfg = resolve(commands::keys(group, name), lm)?;
        let mut out = Outputs::new(out_dir(lm))?;
        let outcome = commands::dispatch(group, name, &cfg, &mut out)?;
        out.manifest(&command, &cfg, threads)?;
        Ok(outcome)
    })();
    match result {
        Ok(o) => {
            if !lm.get_flag("quiet") {
                println!("{command}: {}", o.summary);
            }
            if o.invariant_failed {
                2
            } else {
                0
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
