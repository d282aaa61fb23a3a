//! Reproducible experiment commands.
//!
//! Each command turns an [`ExperimentConfig`] into a [`TraceBundle`]: a set
//! of CSV and JSON files plus a manifest holding everything needed to
//! regenerate them byte for byte. File layouts are described in
//! `docs/formats.md`.

mod bundle;
mod config;
mod eval;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use bundle::{
    Command, Manifest, NetworkSource, TraceBundle, CODE_VERSION, EDGES, EPOCHS, MANIFEST, NETWORK_POST,
    NETWORK_PRE, SAMPLES, SCHEMA_VERSION, SKELETON, STEPS, SURPRISE_SHARES, TRAJECTORY,
};
pub use config::{DiscoveryConfig, ExperimentConfig};
pub use eval::{cmd_eval, BehaviorStats, EvalOutput, EvalReport, MetricSummary, SeedComparison, EVAL_CSV, EVAL_JSON, SURPRISE_CURVES};

use bundle::{csv_bytes, json_bytes};
use crate::agent::{run_epoch, run_learning_process, EmLog, EpochRun, EpochSummary, HiddenVariableSpec, LearningOutcome};
use crate::discovery::{discover, sample_random_policy, CandidateKind, DiscoveryReport};
use crate::environment::TrajectoryRow;
use crate::error::{Error, Result};
use crate::network::{past_name, Edge, EdgeKind, ObsVar, TwoSliceNetwork, VarKind, VariableSpec, STEP_ASIDE, STEP_FORWARD};

/// Per-epoch figures stored in `epochs.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub steps: usize,
    pub reached_target: bool,
    pub contact_events: usize,
    pub detected: bool,
    pub selected: Vec<ObsVar>,
    pub rejection_counts: BTreeMap<ObsVar, usize>,
    /// Mean finite surprise coefficient per percept.
    pub mean_surprise: BTreeMap<ObsVar, f64>,
    pub mean_utility_surprise: f64,
}

impl EpochStats {
    pub fn of(summary: &EpochSummary) -> Self {
        EpochStats {
            epoch: summary.epoch,
            steps: summary.records.len(),
            reached_target: summary.reached_target,
            contact_events: summary.contact_events(),
            detected: summary.detected,
            selected: summary.selected_variables.iter().copied().collect(),
            rejection_counts: summary.rejection_counts.clone(),
            mean_surprise: ObsVar::ALL.into_iter().map(|v| (v, summary.mean_surprise(v))).collect(),
            mean_utility_surprise: summary.mean_utility_surprise(),
        }
    }
}

/// Contents of `epochs.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochsDoc {
    pub schema_version: u32,
    pub hidden: Option<HiddenVariableSpec>,
    /// Whether learning settled; absent for runs without learning.
    pub converged: Option<bool>,
    pub epochs: Vec<EpochStats>,
    #[serde(default)]
    pub em: Vec<EmLog>,
}

/// Result of [`cmd_learn`]: the bundle and the in-memory outcome.
#[derive(Clone, Debug)]
pub struct LearnOutput {
    pub bundle: TraceBundle,
    pub outcome: LearningOutcome,
}

/// Result of [`cmd_discover`].
#[derive(Clone, Debug)]
pub struct DiscoverOutput {
    pub bundle: TraceBundle,
    pub report: DiscoveryReport,
}

/// Slice-`t` parents found by discovery, in network form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub schema_version: u32,
    pub variables: Vec<VariableSpec>,
    pub edges: Vec<Edge>,
}

fn fmt_bool(b: bool) -> String {
    u8::from(b).to_string()
}

fn trajectory_csv<'a>(rows: impl IntoIterator<Item = &'a TrajectoryRow>) -> Result<Vec<u8>> {
    csv_bytes(
        &["epoch", "step", "x", "y", "sf_cat", "sa_cat", "sf_cont", "sa_cont", "bt", "tvf", "depth", "ha"],
        rows.into_iter().map(|r| {
            vec![
                r.epoch.to_string(),
                r.step.to_string(),
                r.x.to_string(),
                r.y.to_string(),
                r.sf_cat.to_string(),
                r.sa_cat.to_string(),
                r.sf_cont.to_string(),
                r.sa_cont.to_string(),
                r.bt.to_string(),
                r.tvf.to_string(),
                r.depth.to_string(),
                r.ha.to_string(),
            ]
        }),
    )
}

fn steps_header() -> Vec<String> {
    let mut h: Vec<String> = ["epoch", "t"].map(String::from).to_vec();
    h.extend(ObsVar::ALL.map(past_name));
    h.extend([STEP_FORWARD, STEP_ASIDE].map(String::from));
    h.extend(ObsVar::ALL.map(|v| v.name().to_string()));
    h.extend(
        ["meu", "utility", "c_u", "influence_p0", "weight", "gated"].map(String::from),
    );
    for v in ObsVar::ALL {
        h.push(format!("c_{v}"));
        h.push(format!("p_{v}"));
        h.push(format!("rejected_{v}"));
    }
    h
}

fn steps_csv<'a>(epochs: impl IntoIterator<Item = &'a EpochSummary>) -> Result<Vec<u8>> {
    let header = steps_header();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = epochs.into_iter().flat_map(|e| {
        e.records.iter().map(move |r| {
            let mut row = vec![e.epoch.to_string(), r.t.to_string()];
            row.extend(ObsVar::ALL.map(|v| r.obs_t.get(v).to_string()));
            row.push(r.action.step_forward.to_string());
            row.push(r.action.step_aside.to_string());
            row.extend(ObsVar::ALL.map(|v| r.obs_t1.get(v).to_string()));
            row.extend([
                r.meu.to_string(),
                r.realized_utility.to_string(),
                r.c_u.to_string(),
                r.influence_p0.to_string(),
                r.weight.to_string(),
                fmt_bool(r.gated()),
            ]);
            for v in ObsVar::ALL {
                let verdict = &r.per_variable[&v];
                row.push(verdict.coefficient.to_string());
                row.push(verdict.p_value.to_string());
                row.push(fmt_bool(verdict.rejected));
            }
            row
        })
    });
    csv_bytes(&header, rows)
}

/// Each percept's surprise coefficient divided by the step's total.
///
/// Unbounded coefficients share the whole mass equally; a step without
/// surprise has all shares zero.
pub fn surprise_shares(coefficients: &[f64]) -> Vec<f64> {
    let infinite = coefficients.iter().filter(|c| c.is_infinite()).count();
    if infinite > 0 {
        return coefficients
            .iter()
            .map(|c| if c.is_infinite() { 1.0 / infinite as f64 } else { 0.0 })
            .collect();
    }
    let total: f64 = coefficients.iter().sum();
    if total > 0.0 {
        coefficients.iter().map(|c| c / total).collect()
    } else {
        vec![0.0; coefficients.len()]
    }
}

fn shares_csv<'a>(epochs: impl IntoIterator<Item = &'a EpochSummary>) -> Result<Vec<u8>> {
    let mut header = vec!["epoch", "t"];
    header.extend(ObsVar::ALL.map(ObsVar::name));
    let rows = epochs.into_iter().flat_map(|e| {
        e.records.iter().map(move |r| {
            let coefs: Vec<f64> = ObsVar::ALL.iter().map(|v| r.per_variable[v].coefficient).collect();
            let mut row = vec![e.epoch.to_string(), r.t.to_string()];
            row.extend(surprise_shares(&coefs).iter().map(f64::to_string));
            row
        })
    });
    csv_bytes(&header, rows)
}

fn finish(
    mut bundle: TraceBundle,
    command: Command,
    config: &ExperimentConfig,
    network: NetworkSource,
) -> Result<TraceBundle> {
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        code_version: CODE_VERSION.to_string(),
        command,
        seed: config.seed,
        config: config.clone(),
        network,
        files: bundle.names().map(String::from).collect(),
    };
    bundle.insert(MANIFEST, json_bytes(&manifest)?);
    Ok(bundle)
}

fn episode_files(bundle: &mut TraceBundle, runs: &[EpochRun], doc: &EpochsDoc) -> Result<()> {
    bundle.insert(TRAJECTORY, trajectory_csv(runs.iter().flat_map(|r| &r.trajectory))?);
    bundle.insert(STEPS, steps_csv(runs.iter().map(|r| &r.summary))?);
    bundle.insert(SURPRISE_SHARES, shares_csv(runs.iter().map(|r| &r.summary))?);
    bundle.insert(EPOCHS, json_bytes(doc)?);
    Ok(())
}

/// Plays `epoch_budget` epochs with a fixed network and no learning.
///
/// Without `network` the initial hand-specified network is used.
pub fn cmd_run(config: &ExperimentConfig, network: Option<&TwoSliceNetwork>) -> Result<TraceBundle> {
    config.validate()?;
    let (net, source) = match network {
        Some(n) => (n.clone(), NetworkSource::Bundled),
        None => (TwoSliceNetwork::initial(), NetworkSource::Initial),
    };
    let runs = (0..config.agent.epoch_budget)
        .map(|epoch| run_epoch(&net, &config.world, &config.agent, config.seed, epoch))
        .collect::<Result<Vec<_>>>()?;
    let doc = EpochsDoc {
        schema_version: SCHEMA_VERSION,
        hidden: None,
        converged: None,
        epochs: runs.iter().map(|r| EpochStats::of(&r.summary)).collect(),
        em: Vec::new(),
    };
    let mut bundle = TraceBundle::new();
    episode_files(&mut bundle, &runs, &doc)?;
    bundle.insert(NETWORK_PRE, json_bytes(&net)?);
    finish(bundle, Command::Run, config, source)
}

/// Runs the full learning process from the initial network.
pub fn cmd_learn(config: &ExperimentConfig) -> Result<LearnOutput> {
    config.validate()?;
    let outcome = run_learning_process(&TwoSliceNetwork::initial(), &config.world, &config.agent, config.seed)?;
    let doc = EpochsDoc {
        schema_version: SCHEMA_VERSION,
        hidden: outcome.hidden.clone(),
        converged: Some(outcome.converged),
        epochs: outcome.epochs.iter().map(|r| EpochStats::of(&r.summary)).collect(),
        em: outcome.em_logs.clone(),
    };
    let mut bundle = TraceBundle::new();
    episode_files(&mut bundle, &outcome.epochs, &doc)?;
    bundle.insert(NETWORK_PRE, json_bytes(&outcome.initial_network)?);
    bundle.insert(NETWORK_POST, json_bytes(&outcome.final_network)?);
    let bundle = finish(bundle, Command::Learn, config, NetworkSource::Initial)?;
    Ok(LearnOutput { bundle, outcome })
}

/// Builds the discovered slice-`t` parent graph.
pub fn skeleton(report: &DiscoveryReport) -> Skeleton {
    let mut variables: Vec<VariableSpec> = ObsVar::ALL
        .iter()
        .map(|v| VariableSpec {
            name: v.name().into(),
            kind: VarKind::Chance,
            cardinality: Some(v.cardinality()),
        })
        .collect();
    variables.extend(TwoSliceNetwork::initial().variables().into_iter().filter(|v| v.kind == VarKind::Decision));
    let mut edges = Vec::new();
    for (target, parents) in &report.parents {
        for e in parents.iter().filter(|e| e.kind == CandidateKind::Inter) {
            let from = match ObsVar::from_name(&e.source) {
                Some(v) => past_name(v),
                None => e.source.clone(),
            };
            edges.push(Edge {
                from,
                to: target.clone(),
                kind: EdgeKind::Inter,
            });
        }
    }
    Skeleton {
        schema_version: SCHEMA_VERSION,
        variables,
        edges,
    }
}

/// Logs random interaction and searches each percept's parents.
pub fn cmd_discover(config: &ExperimentConfig) -> Result<DiscoverOutput> {
    config.validate()?;
    let d = &config.discovery;
    if d.samples == 0 {
        return Err(Error::InsufficientData("zero samples requested".into()));
    }
    let log = sample_random_policy(&config.world, d.samples, d.episode_steps, config.seed)?;
    let report = discover(&log, d.threshold)?;
    let mut bundle = TraceBundle::new();
    bundle.insert(SAMPLES, log.to_csv()?);
    bundle.insert(EDGES, report.to_csv()?);
    bundle.insert(SKELETON, json_bytes(&skeleton(&report))?);
    let bundle = finish(bundle, Command::Discover, config, NetworkSource::Initial)?;
    Ok(DiscoverOutput { bundle, report })
}

/// What a successful replay found.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayReport {
    pub manifest: Manifest,
    /// Set when the bundle was written by another code version.
    pub warning: Option<String>,
    pub files_checked: usize,
}

/// Regenerates the stored bundle's contents.
pub fn regenerate(bundle: &TraceBundle) -> Result<TraceBundle> {
    let manifest = bundle.manifest()?;
    let config = manifest.config;
    match manifest.command {
        Command::Run => {
            let network = match manifest.network {
                NetworkSource::Initial => None,
                NetworkSource::Bundled => Some(bundle.read_json::<TwoSliceNetwork>(NETWORK_PRE)?),
            };
            cmd_run(&config, network.as_ref())
        }
        Command::Learn => Ok(cmd_learn(&config)?.bundle),
        Command::Discover => Ok(cmd_discover(&config)?.bundle),
    }
}

/// Re-executes a bundle from its manifest and demands byte equality.
pub fn cmd_replay(bundle: &TraceBundle) -> Result<ReplayReport> {
    let manifest = bundle.manifest()?;
    let warning = (manifest.code_version != CODE_VERSION).then(|| {
        format!(
            "bundle written by version {}, replaying with {}",
            manifest.code_version, CODE_VERSION
        )
    });
    let fresh = regenerate(bundle)?;
    let mut files = fresh.diff(bundle);
    if warning.is_some() {
        // The manifest differs by its version field alone; report the rest.
        files.retain(|f| f != MANIFEST);
    }
    if !files.is_empty() {
        return Err(Error::ReplayDivergence { files });
    }
    Ok(ReplayReport {
        manifest,
        warning,
        files_checked: fresh.names().count(),
    })
}

/// Seeds present in a set of bundles, rejecting duplicates.
pub(crate) fn seed_index(bundles: &[TraceBundle]) -> Result<BTreeMap<u64, (Manifest, &TraceBundle)>> {
    let mut out = BTreeMap::new();
    for b in bundles {
        let m = b.manifest()?;
        let seed = m.seed;
        if out.insert(seed, (m, b)).is_some() {
            return Err(Error::BundleMismatch(format!("seed {seed} appears twice")));
        }
    }
    Ok(out)
}

pub(crate) fn seed_set<T>(m: &BTreeMap<u64, T>) -> BTreeSet<u64> {
    m.keys().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.agent.epoch_budget = 1;
        c.agent.steps_per_epoch = 15;
        c.discovery.samples = 300;
        c.seed = 3;
        c
    }

    #[test]
    fn shares_sum_to_one() {
        let s = surprise_shares(&[1.0, 3.0, 0.0, 0.0]);
        assert_eq!(s, vec![0.25, 0.75, 0.0, 0.0]);
        let s = surprise_shares(&[1.0, f64::INFINITY, 0.0, f64::INFINITY]);
        assert_eq!(s, vec![0.0, 0.5, 0.0, 0.5]);
        assert_eq!(surprise_shares(&[0.0; 4]), vec![0.0; 4]);
    }

    #[test]
    fn run_is_deterministic_and_replays() {
        let c = small();
        let a = cmd_run(&c, None).unwrap();
        assert_eq!(a, cmd_run(&c, None).unwrap());
        let report = cmd_replay(&a).unwrap();
        assert!(report.warning.is_none());
        assert_eq!(report.files_checked, 6);
    }

    #[test]
    fn tampering_is_detected() {
        let c = small();
        let mut b = cmd_run(&c, None).unwrap();
        let mut steps = b.get(STEPS).unwrap().to_vec();
        steps.push(b'\n');
        b.insert(STEPS, steps);
        match cmd_replay(&b) {
            Err(Error::ReplayDivergence { files }) => assert_eq!(files, vec![STEPS.to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn discover_requires_samples() {
        let mut c = small();
        c.discovery.samples = 0;
        assert!(matches!(cmd_discover(&c), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn steps_header_matches_rows() {
        let b = cmd_run(&small(), None).unwrap();
        let mut r = csv::Reader::from_reader(b.get(STEPS).unwrap());
        let width = r.headers().unwrap().len();
        assert_eq!(width, steps_header().len());
        for row in r.records() {
            assert_eq!(row.unwrap().len(), width);
        }
    }
}
