use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::bundle::{csv_bytes, json_bytes, TraceBundle, EPOCHS, SCHEMA_VERSION, STEPS};
use super::{seed_index, seed_set, EpochStats};
use crate::error::{Error, Result};
use crate::network::ObsVar;

pub const EVAL_JSON: &str = "eval.json";
pub const EVAL_CSV: &str = "eval.csv";
pub const SURPRISE_CURVES: &str = "surprise_curves.csv";

/// Behaviour of one bundle, averaged over its epochs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorStats {
    pub epochs: usize,
    pub contact_events_per_epoch: f64,
    pub mean_bt_surprise: f64,
    pub mean_depth_surprise: f64,
    pub mean_utility_surprise: f64,
    /// Mean step count of the epochs that reached the target.
    pub mean_steps_to_target: Option<f64>,
    pub success_rate: f64,
}

impl BehaviorStats {
    pub fn of(epochs: &[EpochStats]) -> Self {
        let n = epochs.len().max(1) as f64;
        let mean = |f: &dyn Fn(&EpochStats) -> f64| epochs.iter().map(f).sum::<f64>() / n;
        let reached: Vec<f64> = epochs
            .iter()
            .filter(|e| e.reached_target)
            .map(|e| e.steps as f64)
            .collect();
        BehaviorStats {
            epochs: epochs.len(),
            contact_events_per_epoch: mean(&|e| e.contact_events as f64),
            mean_bt_surprise: mean(&|e| e.mean_surprise[&ObsVar::BarrierTactile]),
            mean_depth_surprise: mean(&|e| e.mean_surprise[&ObsVar::Depth]),
            mean_utility_surprise: mean(&|e| e.mean_utility_surprise),
            mean_steps_to_target: (!reached.is_empty())
                .then(|| reached.iter().sum::<f64>() / reached.len() as f64),
            success_rate: mean(&|e| f64::from(u8::from(e.reached_target))),
        }
    }

    fn metrics(&self) -> [(&'static str, f64); 5] {
        [
            ("contact_events_per_epoch", self.contact_events_per_epoch),
            ("mean_bt_surprise", self.mean_bt_surprise),
            ("mean_depth_surprise", self.mean_depth_surprise),
            ("mean_utility_surprise", self.mean_utility_surprise),
            ("success_rate", self.success_rate),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedComparison {
    pub seed: u64,
    pub pre: BehaviorStats,
    pub post: BehaviorStats,
}

/// How many seeds moved each way on one metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub decreased: usize,
    pub unchanged: usize,
    pub increased: usize,
    pub mean_pre: f64,
    pub mean_post: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub seeds: Vec<SeedComparison>,
    pub metrics: Vec<MetricSummary>,
}

impl EvalReport {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == name)
    }
}

/// The report and the files rendering it.
#[derive(Clone, Debug)]
pub struct EvalOutput {
    pub report: EvalReport,
    pub files: TraceBundle,
}

#[derive(Deserialize)]
struct EpochsView {
    epochs: Vec<EpochStats>,
}

/// Mean finite coefficient at each step index over all of a bundle's
/// epochs, for BT, Depth and the utility magnitude.
fn step_curves(bundle: &TraceBundle, acc: &mut BTreeMap<usize, [(f64, usize); 3]>) -> Result<()> {
    let mut reader = csv::Reader::from_reader(bundle.require(STEPS)?);
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::BundleMismatch(format!("{STEPS} has no column {name}")))
    };
    let t_col = col("t")?;
    let cols = [col("c_BT")?, col("c_D")?, col("c_u")?];
    for row in reader.records() {
        let row = row?;
        let parse = |i: usize| {
            row[i]
                .parse::<f64>()
                .map_err(|e| Error::BundleMismatch(format!("{STEPS}: {e}")))
        };
        let t = parse(t_col)? as usize;
        let slot = acc.entry(t).or_insert([(0.0, 0); 3]);
        for (k, &c) in cols.iter().enumerate() {
            let v = parse(c)?.abs();
            if v.is_finite() {
                slot[k].0 += v;
                slot[k].1 += 1;
            }
        }
    }
    Ok(())
}

fn curve_rows(phase: &str, acc: &BTreeMap<usize, [(f64, usize); 3]>) -> Vec<Vec<String>> {
    acc.iter()
        .map(|(t, cells)| {
            let mut row = vec![phase.to_string(), t.to_string()];
            row.extend(cells.iter().map(|&(s, n)| {
                if n == 0 {
                    String::new()
                } else {
                    (s / n as f64).to_string()
                }
            }));
            row
        })
        .collect()
}

/// Compares behaviour before and after learning, seed by seed.
///
/// Both sides must hold one bundle per seed over the same seed set, and
/// every bundle must come from the same experiment settings.
pub fn cmd_eval(pre: &[TraceBundle], post: &[TraceBundle]) -> Result<EvalOutput> {
    let pre_ix = seed_index(pre)?;
    let post_ix = seed_index(post)?;
    if pre_ix.is_empty() {
        return Err(Error::BundleMismatch("no bundles to compare".into()));
    }
    if seed_set(&pre_ix) != seed_set(&post_ix) {
        return Err(Error::BundleMismatch(format!(
            "seed sets differ: {:?} vs {:?}",
            seed_set(&pre_ix),
            seed_set(&post_ix)
        )));
    }
    let reference = &pre_ix.values().next().expect("non-empty").0.config;
    for (m, _) in pre_ix.values().chain(post_ix.values()) {
        if !m.config.comparable(reference) {
            return Err(Error::BundleMismatch(format!(
                "seed {} was run with different settings",
                m.seed
            )));
        }
    }
    let mut seeds = Vec::new();
    let mut curves = (BTreeMap::new(), BTreeMap::new());
    for (seed, (_, pre_b)) in &pre_ix {
        let post_b = post_ix[seed].1;
        let pre_e: EpochsView = pre_b.read_json(EPOCHS)?;
        let post_e: EpochsView = post_b.read_json(EPOCHS)?;
        step_curves(pre_b, &mut curves.0)?;
        step_curves(post_b, &mut curves.1)?;
        seeds.push(SeedComparison {
            seed: *seed,
            pre: BehaviorStats::of(&pre_e.epochs),
            post: BehaviorStats::of(&post_e.epochs),
        });
    }
    let names = seeds[0].pre.metrics().map(|(n, _)| n);
    let metrics = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut s = MetricSummary {
                metric: name.to_string(),
                decreased: 0,
                unchanged: 0,
                increased: 0,
                mean_pre: 0.0,
                mean_post: 0.0,
            };
            for c in &seeds {
                let (a, b) = (c.pre.metrics()[i].1, c.post.metrics()[i].1);
                s.mean_pre += a / seeds.len() as f64;
                s.mean_post += b / seeds.len() as f64;
                match b.partial_cmp(&a) {
                    Some(std::cmp::Ordering::Less) => s.decreased += 1,
                    Some(std::cmp::Ordering::Greater) => s.increased += 1,
                    _ => s.unchanged += 1,
                }
            }
            s
        })
        .collect();
    let report = EvalReport {
        schema_version: SCHEMA_VERSION,
        seeds,
        metrics,
    };

    let mut files = TraceBundle::new();
    files.insert(EVAL_JSON, json_bytes(&report)?);
    let rows = report.seeds.iter().flat_map(|c| {
        c.pre.metrics().into_iter().zip(c.post.metrics()).map(move |((name, a), (_, b))| {
            vec![c.seed.to_string(), name.to_string(), a.to_string(), b.to_string(), (b - a).to_string()]
        })
    });
    files.insert(EVAL_CSV, csv_bytes(&["seed", "metric", "pre", "post", "delta"], rows)?);
    let mut rows = curve_rows("pre", &curves.0);
    rows.extend(curve_rows("post", &curves.1));
    files.insert(SURPRISE_CURVES, csv_bytes(&["phase", "t", "bt", "depth", "utility"], rows)?);
    Ok(EvalOutput { report, files })
}
