//! `detour`: command-line runner for the detour-learning experiments.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use detour_core::harness::{
    cmd_discover, cmd_eval, cmd_learn, cmd_replay, cmd_run, ExperimentConfig, TraceBundle,
};
use detour_core::network::TwoSliceNetwork;
use detour_core::Error;

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;

#[derive(Parser)]
#[command(name = "detour", version, about = "Surprise-driven latent variable learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// JSON experiment configuration; absent fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of epochs to play.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    no_barrier: bool,
    /// Significance level of the per-percept surprise test.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Log random interaction and search each percept's parents.
    Discover {
        #[command(flatten)]
        common: Common,
    },
    /// Run the learning process from the initial network.
    Learn {
        #[command(flatten)]
        common: Common,
    },
    /// Play epochs with a fixed network.
    Run {
        #[command(flatten)]
        common: Common,
        /// Network JSON to act with instead of the initial network.
        #[arg(long)]
        network: Option<PathBuf>,
    },
    /// Compare bundles before and after learning, paired by seed.
    Eval {
        #[arg(long, required = true, num_args = 1..)]
        pre: Vec<PathBuf>,
        #[arg(long, required = true, num_args = 1..)]
        post: Vec<PathBuf>,
        #[arg(long, default_value = "eval")]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Re-execute a bundle and check that every file matches.
    Replay {
        bundle: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
}

impl Common {
    fn resolve(&self) -> detour_core::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path).map_err(|e| match e {
                Error::Io { path, source } => Error::ConfigInvalid(format!("{}: {source}", path.display())),
                other => other,
            })?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        if let Some(n) = self.epochs {
            config.agent.epoch_budget = n;
        }
        if self.no_barrier {
            config.world.barrier_exists = false;
        }
        if let Some(alpha) = self.alpha {
            config.agent.alpha = alpha;
        }
        config.validate()?;
        Ok(config)
    }
}

fn say(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        println!("{}", msg.as_ref());
    }
}

fn write(bundle: &TraceBundle, dir: &Path, quiet: bool) -> anyhow::Result<()> {
    bundle.write_to(dir)?;
    say(quiet, format!("wrote {}", dir.display()));
    Ok(())
}

fn read_network(path: &Path) -> anyhow::Result<TwoSliceNetwork> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing network {}", path.display()))
}

fn execute(cmd: Cmd) -> anyhow::Result<()> {
    match cmd {
        Cmd::Discover { common } => {
            let config = common.resolve()?;
            let out = cmd_discover(&config)?;
            for (target, parents) in &out.report.parents {
                let names: Vec<&str> = parents.iter().map(|e| e.source.as_str()).collect();
                say(common.quiet, format!("{target}_t+1 <- {}", names.join(", ")));
            }
            write(&out.bundle, &config.output_dir, common.quiet)
        }
        Cmd::Learn { common } => {
            let config = common.resolve()?;
            let out = cmd_learn(&config)?;
            match &out.outcome.hidden {
                Some(h) => {
                    let vars: Vec<&str> = h.parents.iter().map(|v| v.name()).collect();
                    say(
                        common.quiet,
                        format!(
                            "hidden variable over {{{}}}, {} epochs, converged: {}",
                            vars.join(", "),
                            out.outcome.epochs.len(),
                            out.outcome.converged
                        ),
                    );
                }
                None => say(common.quiet, "no latent influence detected"),
            }
            write(&out.bundle, &config.output_dir, common.quiet)
        }
        Cmd::Run { common, network } => {
            let config = common.resolve()?;
            let net = network.as_deref().map(read_network).transpose()?;
            let bundle = cmd_run(&config, net.as_ref())?;
            write(&bundle, &config.output_dir, common.quiet)
        }
        Cmd::Eval { pre, post, out, quiet } => {
            let load = |dirs: &[PathBuf]| {
                dirs.iter()
                    .map(|d| TraceBundle::read_from(d))
                    .collect::<detour_core::Result<Vec<_>>>()
            };
            let result = cmd_eval(&load(&pre)?, &load(&post)?)?;
            for m in &result.report.metrics {
                say(
                    quiet,
                    format!(
                        "{:<26} pre {:>10.4} post {:>10.4}  decreased in {}/{} seeds",
                        m.metric,
                        m.mean_pre,
                        m.mean_post,
                        m.decreased,
                        result.report.seeds.len()
                    ),
                );
            }
            write(&result.files, &out, quiet)
        }
        Cmd::Replay { bundle, quiet } => {
            let stored = TraceBundle::read_from(&bundle)?;
            let report = match cmd_replay(&stored) {
                Ok(r) => r,
                Err(e) => {
                    if let Ok(m) = stored.manifest() {
                        if m.code_version != detour_core::harness::CODE_VERSION {
                            eprintln!(
                                "warning: bundle written by version {}, this is {}",
                                m.code_version,
                                detour_core::harness::CODE_VERSION
                            );
                        }
                    }
                    return Err(e.into());
                }
            };
            if let Some(w) = &report.warning {
                eprintln!("warning: {w}");
            }
            say(quiet, format!("replay ok: {} files identical", report.files_checked));
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::ConfigInvalid(_)) => EXIT_CONFIG,
        Some(Error::ReplayDivergence { .. }) => EXIT_DIVERGENCE,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
