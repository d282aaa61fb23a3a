//! Entropy-based structure discovery from logs of random interaction.
//!
//! Every estimate here is a plug-in (maximum-likelihood) estimate computed
//! from counts; configurations that never occur contribute nothing. All
//! entropies are in nats.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{discretize, env_step, observe, WorldConfig, WorldState};
use crate::error::{Error, Result};
use crate::network::{
    DiscreteAction, DiscreteObservation, ObsVar, STEP_ASIDE, STEP_ASIDE_CATEGORIES, STEP_FORWARD,
    STEP_FORWARD_CATEGORIES,
};
use crate::rng::{substream, SITE_RANDOM_POLICY};
use crate::surprise::{entropy, Distribution};

/// Default minimum normalized entropy reduction for accepting a parent.
pub const DEFAULT_THRESHOLD: f64 = 0.05;

/// Tolerance of the plug-in estimates at around 10^4 samples, in nats.
pub const ESTIMATION_TOLERANCE: f64 = 0.01;

const GAIN_TIE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub name: String,
    pub cardinality: usize,
}

/// Aligned discrete time series, split into episodes.
///
/// Row `t` holds every variable's value at step `t`; for action columns
/// that is the decision taken at `t`. Consecutive rows form a transition
/// only when they share an episode.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleLog {
    variables: Vec<SeriesSpec>,
    columns: Vec<Vec<usize>>,
    episodes: Vec<usize>,
}

impl SampleLog {
    pub fn new(variables: Vec<SeriesSpec>, columns: Vec<Vec<usize>>, episodes: Vec<usize>) -> Result<Self> {
        if variables.len() != columns.len() {
            return Err(Error::InvalidArgument(format!(
                "{} variables but {} columns",
                variables.len(),
                columns.len()
            )));
        }
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].iter().any(|w| w.name == v.name) {
                return Err(Error::InvalidArgument(format!("duplicate series `{}`", v.name)));
            }
            if v.cardinality < 2 {
                return Err(Error::CardinalityOne);
            }
        }
        for (v, col) in variables.iter().zip(&columns) {
            if col.len() != episodes.len() {
                return Err(Error::InvalidArgument(format!(
                    "series `{}` has {} values, expected {}",
                    v.name,
                    col.len(),
                    episodes.len()
                )));
            }
            if let Some(&bad) = col.iter().find(|&&x| x >= v.cardinality) {
                return Err(Error::IndexOutOfRange {
                    index: bad,
                    len: v.cardinality,
                });
            }
        }
        Ok(SampleLog {
            variables,
            columns,
            episodes,
        })
    }

    /// A log holding a single episode.
    pub fn single_episode(variables: Vec<SeriesSpec>, columns: Vec<Vec<usize>>) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        SampleLog::new(variables, columns, vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn variables(&self) -> &[SeriesSpec] {
        &self.variables
    }

    pub fn episodes(&self) -> &[usize] {
        &self.episodes
    }

    fn position(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<&[usize]> {
        Ok(&self.columns[self.position(name)?])
    }

    pub fn cardinality(&self, name: &str) -> Result<usize> {
        Ok(self.variables[self.position(name)?].cardinality)
    }

    /// Rows `t` whose successor `t + 1` lies in the same episode.
    pub fn transitions(&self) -> Vec<usize> {
        (0..self.len().saturating_sub(1))
            .filter(|&t| self.episodes[t] == self.episodes[t + 1])
            .collect()
    }

    /// Values of `name` at the rows in `rows`, shifted by `offset`.
    fn gather(&self, name: &str, rows: &[usize], offset: usize) -> Result<Vec<usize>> {
        let col = self.column(name)?;
        Ok(rows.iter().map(|&t| col[t + offset]).collect())
    }

    /// Empirical marginal distribution of one series.
    pub fn marginal(&self, name: &str) -> Result<Distribution> {
        empirical_distribution(self.column(name)?, self.cardinality(name)?)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["episode".to_string()];
        header.extend(self.variables.iter().map(|v| v.name.clone()));
        w.write_record(&header)?;
        for t in 0..self.len() {
            let mut row = vec![self.episodes[t].to_string()];
            row.extend(self.columns.iter().map(|c| c[t].to_string()));
            w.write_record(&row)?;
        }
        w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

/// Relative frequencies of `values` over `0..cardinality`.
pub fn empirical_distribution(values: &[usize], cardinality: usize) -> Result<Distribution> {
    if cardinality < 2 {
        return Err(Error::CardinalityOne);
    }
    if values.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let mut counts = vec![0.0; cardinality];
    for &v in values {
        if v >= cardinality {
            return Err(Error::IndexOutOfRange {
                index: v,
                len: cardinality,
            });
        }
        counts[v] += 1.0;
    }
    Distribution::from_counts(&counts)
}

/// `H(X)/ln|X| - H(Y)/ln|Y|` over the declared outcome counts.
pub fn causal_coefficient(x: &Distribution, y: &Distribution) -> Result<f64> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::CardinalityOne);
    }
    Ok(entropy(x) / (x.len() as f64).ln() - entropy(y) / (y.len() as f64).ln())
}

/// Plug-in `H(Y | Z)` for aligned columns; with no `given` columns this is
/// the entropy of `target`.
pub fn conditional_entropy(target: &[usize], given: &[&[usize]]) -> Result<f64> {
    if target.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    if let Some(bad) = given.iter().find(|g| g.len() != target.len()) {
        return Err(Error::InvalidArgument(format!(
            "conditioning column has {} values, target has {}",
            bad.len(),
            target.len()
        )));
    }
    let mut cells: BTreeMap<Vec<usize>, BTreeMap<usize, usize>> = BTreeMap::new();
    for (i, &y) in target.iter().enumerate() {
        let key: Vec<usize> = given.iter().map(|g| g[i]).collect();
        *cells.entry(key).or_default().entry(y).or_default() += 1;
    }
    let n = target.len() as f64;
    let mut h = 0.0;
    for ys in cells.values() {
        let nz: usize = ys.values().sum();
        for &c in ys.values() {
            h -= c as f64 / n * (c as f64 / nz as f64).ln();
        }
    }
    Ok(h.max(0.0))
}

/// `H(O) - H(O | D)` for aligned observation and decision samples.
pub fn causal_action_coefficient(o: &[usize], d: &[usize]) -> Result<f64> {
    Ok((conditional_entropy(o, &[])? - conditional_entropy(o, &[d])?).max(0.0))
}

/// Transfer entropy from `x` to `y` with `lag` past values of each.
pub fn transfer_entropy(x: &[usize], y: &[usize], lag: usize) -> Result<f64> {
    if lag == 0 {
        return Err(Error::InvalidArgument("lag must be at least 1".into()));
    }
    if x.len() != y.len() {
        return Err(Error::InvalidArgument("series lengths differ".into()));
    }
    if y.len() <= lag {
        return Err(Error::InsufficientData(format!(
            "{} samples for lag {lag}",
            y.len()
        )));
    }
    let rows = lag..y.len();
    let target: Vec<usize> = rows.clone().map(|t| y[t]).collect();
    let y_past: Vec<Vec<usize>> = (1..=lag).map(|k| rows.clone().map(|t| y[t - k]).collect()).collect();
    let x_past: Vec<Vec<usize>> = (1..=lag).map(|k| rows.clone().map(|t| x[t - k]).collect()).collect();
    let own: Vec<&[usize]> = y_past.iter().map(Vec::as_slice).collect();
    let mut both = own.clone();
    both.extend(x_past.iter().map(Vec::as_slice));
    Ok((conditional_entropy(&target, &own)? - conditional_entropy(&target, &both)?).max(0.0))
}

/// Share of `H(Obs_{t+1} | Obs_t)` removed by also conditioning on the
/// action and the extra series in `conditioning`, all at `t`. Clamped to
/// `[0, 1]`.
pub fn normalized_transfer_entropy(act: &[usize], obs: &[usize], conditioning: &[&[usize]]) -> Result<f64> {
    if act.len() != obs.len() || conditioning.iter().any(|c| c.len() != obs.len()) {
        return Err(Error::InvalidArgument("series lengths differ".into()));
    }
    if obs.len() < 2 {
        return Err(Error::InsufficientData(format!("{} samples", obs.len())));
    }
    let n = obs.len() - 1;
    let next = &obs[1..];
    let mut given: Vec<&[usize]> = vec![&obs[..n]];
    let base = conditional_entropy(next, &given)?;
    if base <= GAIN_TIE {
        return Err(Error::ZeroBaseEntropy);
    }
    given.push(&act[..n]);
    given.extend(conditioning.iter().map(|c| &c[..n]));
    let full = conditional_entropy(next, &given)?;
    Ok(((base - full) / base).clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateKind {
    /// Both ends in the same slice.
    Intra,
    /// From slice `t` to slice `t + 1`.
    Inter,
}

impl fmt::Display for CandidateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CandidateKind::Intra => "intra",
            CandidateKind::Inter => "inter",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCandidate {
    pub source: String,
    pub target: String,
    pub coefficient: f64,
    pub kind: CandidateKind,
}

/// Greedy parent search for `target` at `t + 1` among the series in
/// `candidates` at `t`.
///
/// The target's own past, when it is a candidate, is tried first, as the
/// base every transfer entropy conditions on. After that each round adds
/// the candidate with the largest entropy reduction. Reductions are
/// measured as a share of the target's entropy, and the search stops once
/// the best share falls below `threshold`. Ties go to the lexicographically
/// smaller name, so the result does not depend on the order of
/// `candidates`. A target that never varies gets no parents.
pub fn forward_select(log: &SampleLog, target: &str, candidates: &[&str], threshold: f64) -> Result<Vec<EdgeCandidate>> {
    let rows = log.transitions();
    if rows.is_empty() {
        return Err(Error::InsufficientData("log has no transitions".into()));
    }
    let next = log.gather(target, &rows, 1)?;
    let mut pool: Vec<(String, Vec<usize>)> = Vec::with_capacity(candidates.len());
    let mut names: Vec<&str> = candidates.to_vec();
    names.sort_unstable();
    names.dedup();
    for name in names {
        pool.push((name.to_string(), log.gather(name, &rows, 0)?));
    }
    let total = conditional_entropy(&next, &[])?;
    if total <= GAIN_TIE {
        return Ok(Vec::new());
    }
    let mut chosen: Vec<Vec<usize>> = Vec::new();
    let mut parents = Vec::new();
    let mut current = total;
    let mut own = pool.iter().position(|(name, _)| name == target);
    while !pool.is_empty() {
        let mut best: Option<(usize, f64)> = None;
        for (i, (_, values)) in pool.iter().enumerate() {
            if own.is_some_and(|j| j != i) {
                continue;
            }
            let mut given: Vec<&[usize]> = chosen.iter().map(Vec::as_slice).collect();
            given.push(values);
            let h = conditional_entropy(&next, &given)?;
            let gain = (current - h) / total;
            if best.is_none_or(|(_, g)| gain > g + GAIN_TIE) {
                best = Some((i, gain));
            }
        }
        let (i, gain) = best.expect("pool is non-empty");
        if own.take().is_some() && gain < threshold {
            continue;
        }
        if gain < threshold {
            break;
        }
        let (name, values) = pool.remove(i);
        current -= gain * total;
        chosen.push(values);
        parents.push(EdgeCandidate {
            source: name,
            target: target.to_string(),
            coefficient: gain,
            kind: CandidateKind::Inter,
        });
    }
    Ok(parents)
}

/// Result of structure discovery over one log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryReport {
    /// Selected slice-`t` parents of each observation at `t + 1`, in the
    /// order they were added.
    pub parents: BTreeMap<String, Vec<EdgeCandidate>>,
    /// Causal coefficient of every ordered pair of observations in one
    /// slice; reported, not selected.
    pub intra: Vec<EdgeCandidate>,
    /// Causal action coefficient of each decision on each observation.
    pub actions: Vec<EdgeCandidate>,
}

impl DiscoveryReport {
    pub fn has_self_edge(&self, var: ObsVar) -> bool {
        self.parents
            .get(var.name())
            .is_some_and(|ps| ps.iter().any(|e| e.source == var.name()))
    }

    /// Every candidate as a CSV table with a `selected` flag.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["kind", "source", "target", "rank", "coefficient", "selected"])?;
        for (target, edges) in &self.parents {
            for (rank, e) in edges.iter().enumerate() {
                w.write_record([
                    e.kind.to_string(),
                    e.source.clone(),
                    target.clone(),
                    rank.to_string(),
                    e.coefficient.to_string(),
                    "true".into(),
                ])?;
            }
        }
        for e in self.intra.iter().chain(&self.actions) {
            w.write_record([
                e.kind.to_string(),
                e.source.clone(),
                e.target.clone(),
                String::new(),
                e.coefficient.to_string(),
                "false".into(),
            ])?;
        }
        w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

/// Runs the forward search for every observation against every series at
/// `t`, and tabulates the pairwise coefficients.
pub fn discover(log: &SampleLog, threshold: f64) -> Result<DiscoveryReport> {
    let names: Vec<&str> = log.variables().iter().map(|v| v.name.as_str()).collect();
    let observations: Vec<ObsVar> = ObsVar::ALL
        .into_iter()
        .filter(|v| names.contains(&v.name()))
        .collect();
    let mut parents = BTreeMap::new();
    for var in &observations {
        parents.insert(var.name().to_string(), forward_select(log, var.name(), &names, threshold)?);
    }
    let mut intra = Vec::new();
    for x in &observations {
        for y in &observations {
            if x != y {
                intra.push(EdgeCandidate {
                    source: x.name().into(),
                    target: y.name().into(),
                    coefficient: causal_coefficient(&log.marginal(x.name())?, &log.marginal(y.name())?)?,
                    kind: CandidateKind::Intra,
                });
            }
        }
    }
    let rows = log.transitions();
    let mut actions = Vec::new();
    for d in [STEP_FORWARD, STEP_ASIDE].into_iter().filter(|d| names.contains(d)) {
        let decisions = log.gather(d, &rows, 0)?;
        for var in &observations {
            let next = log.gather(var.name(), &rows, 1)?;
            actions.push(EdgeCandidate {
                source: d.into(),
                target: var.name().into(),
                coefficient: causal_action_coefficient(&next, &decisions)?,
                kind: CandidateKind::Inter,
            });
        }
    }
    Ok(DiscoveryReport {
        parents,
        intra,
        actions,
    })
}

/// Observation and action series names in log column order.
pub fn environment_series() -> Vec<SeriesSpec> {
    let mut v: Vec<SeriesSpec> = ObsVar::ALL
        .iter()
        .map(|o| SeriesSpec {
            name: o.name().into(),
            cardinality: o.cardinality(),
        })
        .collect();
    v.push(SeriesSpec {
        name: STEP_FORWARD.into(),
        cardinality: STEP_FORWARD_CATEGORIES,
    });
    v.push(SeriesSpec {
        name: STEP_ASIDE.into(),
        cardinality: STEP_ASIDE_CATEGORIES,
    });
    v
}

/// Logs `steps` rows of uniformly random decisions, restarting from the
/// initial state every `episode_steps` rows.
pub fn sample_random_policy(world: &WorldConfig, steps: usize, episode_steps: usize, seed: u64) -> Result<SampleLog> {
    world.validate()?;
    if episode_steps == 0 {
        return Err(Error::ConfigInvalid("episode_steps must be positive".into()));
    }
    let mut columns = (0..6).map(|_| Vec::with_capacity(steps)).collect::<Vec<Vec<usize>>>();
    let mut episodes = Vec::with_capacity(steps);
    let mut state = WorldState::initial(*world);
    let mut rng = substream(seed, &[SITE_RANDOM_POLICY, 0]);
    for t in 0..steps {
        let episode = t / episode_steps;
        if t % episode_steps == 0 {
            state = WorldState::initial(*world);
            rng = substream(seed, &[SITE_RANDOM_POLICY, episode as u64]);
        }
        let obs: DiscreteObservation = discretize(&observe(&state), world);
        let act = DiscreteAction::new(
            rng.random_range(0..STEP_FORWARD_CATEGORIES),
            rng.random_range(0..STEP_ASIDE_CATEGORIES),
        )?;
        for (i, var) in ObsVar::ALL.iter().enumerate() {
            columns[i].push(obs.get(*var));
        }
        columns[4].push(act.step_forward);
        columns[5].push(act.step_aside);
        episodes.push(episode);
        state = env_step(&state, &act, &mut rng).state;
    }
    SampleLog::new(environment_series(), columns, episodes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn causal_coefficient_examples() {
        let x = Distribution::uniform(4).unwrap();
        let y = Distribution::degenerate(4, 2).unwrap();
        assert!(close(causal_coefficient(&x, &y).unwrap(), 1.0, 1e-15));
        assert_eq!(causal_coefficient(&x, &x).unwrap(), 0.0);
        let z = Distribution::from_probs(vec![0.2, 0.8]).unwrap();
        assert_eq!(causal_coefficient(&x, &z).unwrap(), -causal_coefficient(&z, &x).unwrap());
        let one = Distribution::from_probs(vec![1.0]).unwrap();
        assert!(matches!(causal_coefficient(&one, &x), Err(Error::CardinalityOne)));
    }

    #[test]
    fn conditional_entropy_by_hand() {
        // Y = Z on half the rows, constant on the rest.
        let y = [0, 1, 0, 0];
        let z = [0, 1, 2, 2];
        assert!(close(conditional_entropy(&y, &[&z]).unwrap(), 0.0, 1e-15));
        let h = conditional_entropy(&y, &[]).unwrap();
        assert!(close(h, -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln()), 1e-15));
        assert!(conditional_entropy(&[], &[]).is_err());
    }

    #[test]
    fn action_coefficient_cases() {
        let d = [0, 1, 2, 0, 1, 2];
        let o = [1, 0, 0, 1, 0, 0];
        let h = conditional_entropy(&o, &[]).unwrap();
        assert!(close(causal_action_coefficient(&o, &d).unwrap(), h, 1e-15));
        assert_eq!(causal_action_coefficient(&[3; 6], &d).unwrap(), 0.0);
    }

    #[test]
    fn transfer_entropy_edge_cases() {
        assert!(matches!(transfer_entropy(&[0], &[1], 1), Err(Error::InsufficientData(_))));
        assert!(transfer_entropy(&[0, 1], &[1, 0], 0).is_err());
        let y = [0, 1, 1, 0, 1, 0, 0, 1];
        assert_eq!(transfer_entropy(&[2; 8], &y, 1).unwrap(), 0.0);
    }

    #[test]
    fn normalized_transfer_entropy_cases() {
        // The next observation is exactly the action.
        let act = [0, 1, 1, 0, 1, 0, 0, 1, 1];
        let mut obs = vec![0];
        obs.extend_from_slice(&act[..8]);
        assert!(close(normalized_transfer_entropy(&act, &obs, &[]).unwrap(), 1.0, 1e-12));
        assert!(matches!(
            normalized_transfer_entropy(&act, &[2; 9], &[]),
            Err(Error::ZeroBaseEntropy)
        ));
    }

    #[test]
    fn log_validation() {
        let spec = |n: &str| SeriesSpec {
            name: n.into(),
            cardinality: 2,
        };
        assert!(SampleLog::single_episode(vec![spec("a")], vec![vec![0, 2]]).is_err());
        assert!(SampleLog::single_episode(vec![spec("a"), spec("b")], vec![vec![0, 1], vec![1]]).is_err());
        assert!(SampleLog::single_episode(vec![spec("a"), spec("a")], vec![vec![0], vec![1]]).is_err());
        let log = SampleLog::new(vec![spec("a")], vec![vec![0, 1, 1, 0]], vec![0, 0, 1, 1]).unwrap();
        assert_eq!(log.transitions(), vec![0, 2]);
    }

    #[test]
    fn random_policy_is_deterministic() {
        let w = WorldConfig::default();
        let a = sample_random_policy(&w, 120, 50, 3).unwrap();
        let b = sample_random_policy(&w, 120, 50, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 120);
        assert_eq!(a.transitions().len(), 117);
    }
}
