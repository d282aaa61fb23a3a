//! The surprise-driven learning loop.
//!
//! The agent acts greedily on its network for an epoch, scoring each step
//! for surprise in the utility and in every percept. Percepts that keep
//! being rejected while the utility came out worse than expected become
//! the parents and children of a new binary hidden variable, whose tables
//! are then fitted by hard weighted EM over the collected steps.

mod em;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use em::{hard_weighted_em, EmIteration, EmLog, Imputation};

use crate::environment::{
    discretize, env_step, observe, TrajectoryRow, WorldConfig, WorldState,
};
use crate::error::{Error, Result};
use crate::network::{
    expected_utility, predict_marginals, select_action_meu, utility_distribution, DiscreteAction,
    DiscreteObservation, ObsVar, TwoSliceNetwork,
};
use crate::rng::{substream, SITE_ACTION};
use crate::surprise::{
    influence_probability, surprise_coefficient, surprise_test, SurpriseVerdict,
};

/// Default significance level of the per-percept test during learning.
///
/// At this level a blocked full-power forward step, whose unchanged depth
/// had probability 1/3, counts as a rejection; at 0.05 it would not.
pub const DETECTION_ALPHA: f64 = 0.2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Significance level of the per-percept surprise test.
    pub alpha: f64,
    /// Largest table change accepted as convergence, both within EM and
    /// between epochs.
    pub epsilon: f64,
    pub max_iters: usize,
    pub epoch_budget: usize,
    pub steps_per_epoch: usize,
    /// Gated rejections a percept needs within one epoch to be selected.
    pub min_rejections: usize,
    /// Dirichlet pseudo-count added to every cell of the tables EM
    /// estimates; 1 is add-one smoothing.
    pub map_prior_strength: f64,
    pub imputation: Imputation,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            alpha: DETECTION_ALPHA,
            epsilon: 1e-3,
            max_iters: 50,
            epoch_budget: 30,
            steps_per_epoch: 100,
            min_rejections: 2,
            map_prior_strength: 1.0,
            imputation: Imputation::Hard,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::ConfigInvalid(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::ConfigInvalid("epsilon must be positive".into()));
        }
        if self.max_iters == 0 || self.steps_per_epoch == 0 {
            return Err(Error::ConfigInvalid(
                "max_iters and steps_per_epoch must be positive".into(),
            ));
        }
        if self.min_rejections == 0 {
            return Err(Error::ConfigInvalid("min_rejections must be at least 1".into()));
        }
        if !(self.map_prior_strength >= 0.0 && self.map_prior_strength.is_finite()) {
            return Err(Error::ConfigInvalid("map_prior_strength must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Everything the agent computed around one transition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub obs_t: DiscreteObservation,
    pub obs_t1: DiscreteObservation,
    pub action: DiscreteAction,
    pub meu: f64,
    pub realized_utility: f64,
    pub c_u: f64,
    pub influence_p0: f64,
    pub per_variable: BTreeMap<ObsVar, SurpriseVerdict>,
    pub weight: f64,
}

impl StepRecord {
    /// Whether this step counts toward latent-variable detection: only
    /// outcomes worse than expected are attributed to a latent cause.
    pub fn gated(&self) -> bool {
        self.influence_p0 < 0.5
    }

    pub fn rejected(&self, var: ObsVar) -> bool {
        self.per_variable.get(&var).is_some_and(|v| v.rejected)
    }
}

/// The selected parents and children of a new hidden variable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenVariableSpec {
    pub name: String,
    pub parents: Vec<ObsVar>,
    pub children: Vec<ObsVar>,
    pub cardinality: usize,
}

impl HiddenVariableSpec {
    /// "XM" shape: the same percepts feed the hidden variable at `t` and
    /// are driven by it at `t + 1`.
    pub fn xm(selected: &BTreeSet<ObsVar>) -> Self {
        let vars: Vec<ObsVar> = selected.iter().copied().collect();
        HiddenVariableSpec {
            name: crate::network::HIDDEN.into(),
            parents: vars.clone(),
            children: vars,
            cardinality: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochSummary {
    pub epoch: usize,
    pub records: Vec<StepRecord>,
    pub detected: bool,
    pub selected_variables: BTreeSet<ObsVar>,
    pub rejection_counts: BTreeMap<ObsVar, usize>,
    pub reached_target: bool,
}

impl EpochSummary {
    pub fn contact_events(&self) -> usize {
        self.records.iter().filter(|r| r.obs_t1.barrier_tactile == 1).count()
    }

    /// Mean surprise coefficient of `var` over the epoch, with unbounded
    /// values excluded.
    pub fn mean_surprise(&self, var: ObsVar) -> f64 {
        mean_finite(self.records.iter().map(|r| r.per_variable[&var].coefficient))
    }

    /// Mean magnitude of the utility surprise, with unbounded values excluded.
    pub fn mean_utility_surprise(&self) -> f64 {
        mean_finite(self.records.iter().map(|r| r.c_u.abs()))
    }
}

fn mean_finite(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .filter(|v| v.is_finite())
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Signed surprise of a realized utility: the surprise coefficient of its
/// atom, negative when the outcome fell short of the expectation.
///
/// A realized value outside the predicted support is infinitely surprising.
pub fn utility_surprise(
    u_dist: &crate::network::UtilityDistribution,
    realized_u: f64,
    meu: f64,
) -> f64 {
    let diff = realized_u - meu;
    let sign = if diff > 0.0 {
        1.0
    } else if diff < 0.0 {
        -1.0
    } else {
        0.0
    };
    let magnitude = match u_dist.atom_of(realized_u) {
        Some(i) => surprise_coefficient(i, &u_dist.distribution).unwrap_or(f64::INFINITY),
        None => f64::INFINITY,
    };
    if magnitude == 0.0 || sign == 0.0 {
        0.0
    } else {
        sign * magnitude
    }
}

/// Scores one transition for surprise. The returned record has weight 1;
/// weights depend on the previous step and are filled in by the epoch loop.
pub fn detect_step(
    net: &TwoSliceNetwork,
    obs_t: &DiscreteObservation,
    act: &DiscreteAction,
    obs_t1: &DiscreteObservation,
    alpha: f64,
) -> Result<StepRecord> {
    let meu = expected_utility(net, obs_t, act)?;
    let u_dist = utility_distribution(net, obs_t, act)?;
    let realized = net.utility_model().value(obs_t1, act);
    let c_u = utility_surprise(&u_dist, realized, meu);
    let marginals = predict_marginals(net, obs_t, act, None)?;
    let mut per_variable = BTreeMap::new();
    for (var, marginal) in ObsVar::ALL.into_iter().zip(&marginals) {
        per_variable.insert(var, surprise_test(obs_t1.get(var), marginal, alpha)?);
    }
    Ok(StepRecord {
        t: 0,
        obs_t: *obs_t,
        obs_t1: *obs_t1,
        action: *act,
        meu,
        realized_utility: realized,
        c_u,
        influence_p0: influence_probability(c_u),
        per_variable,
        weight: 1.0,
    })
}

/// Gated rejection tallies per percept.
pub fn rejection_counts(records: &[StepRecord]) -> BTreeMap<ObsVar, usize> {
    ObsVar::ALL
        .into_iter()
        .map(|v| (v, records.iter().filter(|r| r.gated() && r.rejected(v)).count()))
        .collect()
}

/// Percepts whose gated rejection count reaches `min_rejections`.
pub fn select_related_variables(epoch: &EpochSummary, min_rejections: usize) -> BTreeSet<ObsVar> {
    rejection_counts(&epoch.records)
        .into_iter()
        .filter(|&(_, n)| n >= min_rejections.max(1))
        .map(|(v, _)| v)
        .collect()
}

/// Adds the hidden variable described by `spec` to `net`.
pub fn insert_hidden_variable(net: &TwoSliceNetwork, spec: &HiddenVariableSpec) -> Result<TwoSliceNetwork> {
    if spec.cardinality != 2 {
        return Err(Error::InvalidArgument("hidden variables are binary".into()));
    }
    net.insert_hidden(&spec.parents, &spec.children)
}

/// `w_0 = 1`, `w_i = 1 + |U_{i-1} - U_i|` over realized utilities.
pub fn assign_weights(records: &mut [StepRecord]) {
    let mut previous: Option<f64> = None;
    for r in records.iter_mut() {
        r.weight = match previous {
            None => 1.0,
            Some(u) => 1.0 + (u - r.realized_utility).abs(),
        };
        previous = Some(r.realized_utility);
    }
}

/// One epoch's records together with the continuous trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRun {
    pub summary: EpochSummary,
    pub trajectory: Vec<TrajectoryRow>,
}

/// Plays one epoch from the start state with a fixed network.
///
/// The epoch ends when the target comes into view or after
/// `steps_per_epoch` steps.
pub fn run_epoch(
    net: &TwoSliceNetwork,
    world: &WorldConfig,
    agent: &AgentConfig,
    seed: u64,
    epoch: usize,
) -> Result<EpochRun> {
    let mut state = WorldState::initial(*world);
    let mut obs = discretize(&observe(&state), world);
    let mut records = Vec::with_capacity(agent.steps_per_epoch);
    let mut trajectory = Vec::with_capacity(agent.steps_per_epoch + 1);
    let start = observe(&state);
    trajectory.push(TrajectoryRow {
        epoch,
        step: 0,
        x: state.agent_position.x,
        y: state.agent_position.y,
        sf_cat: 0,
        sa_cat: 0,
        sf_cont: 0.0,
        sa_cont: 0.0,
        bt: start.barrier_tactile,
        tvf: start.target_in_visual_field,
        depth: start.depth,
        ha: start.heading_angle,
    });
    let mut reached_target = false;
    for t in 0..agent.steps_per_epoch {
        let (act, meu) = select_action_meu(net, &obs)?;
        let mut rng = substream(seed, &[SITE_ACTION, epoch as u64, t as u64]);
        let tr = env_step(&state, &act, &mut rng);
        let next = discretize(&tr.observation, world);
        let mut record = detect_step(net, &obs, &act, &next, agent.alpha)?;
        record.t = t;
        record.meu = meu;
        records.push(record);
        trajectory.push(TrajectoryRow {
            epoch,
            step: t + 1,
            x: tr.state.agent_position.x,
            y: tr.state.agent_position.y,
            sf_cat: act.step_forward,
            sa_cat: act.step_aside,
            sf_cont: tr.action.step_forward,
            sa_cont: tr.action.step_aside,
            bt: tr.observation.barrier_tactile,
            tvf: tr.observation.target_in_visual_field,
            depth: tr.observation.depth,
            ha: tr.observation.heading_angle,
        });
        state = tr.state;
        obs = next;
        if next.target_in_visual_field == 1 {
            reached_target = true;
            break;
        }
    }
    assign_weights(&mut records);
    let mut summary = EpochSummary {
        epoch,
        records,
        detected: false,
        selected_variables: BTreeSet::new(),
        rejection_counts: BTreeMap::new(),
        reached_target,
    };
    summary.rejection_counts = rejection_counts(&summary.records);
    summary.selected_variables = select_related_variables(&summary, agent.min_rejections);
    summary.detected = !summary.selected_variables.is_empty();
    Ok(EpochRun { summary, trajectory })
}

/// Result of a full learning process.
#[derive(Clone, Debug)]
pub struct LearningOutcome {
    pub initial_network: TwoSliceNetwork,
    pub final_network: TwoSliceNetwork,
    pub hidden: Option<HiddenVariableSpec>,
    pub epochs: Vec<EpochRun>,
    pub em_logs: Vec<EmLog>,
    /// Whether the hidden tables settled before the epoch budget ran out.
    pub converged: bool,
}

/// Largest change among the hidden variable's table and its children's.
fn learned_change(a: &TwoSliceNetwork, b: &TwoSliceNetwork) -> Result<f64> {
    let mut delta = 0.0f64;
    if let (Some(ha), Some(hb)) = (a.hidden(), b.hidden()) {
        delta = delta.max(ha.cpt().max_abs_diff(hb.cpt())?);
    }
    for var in b.hidden_children() {
        delta = delta.max(a.cpt(var).max_abs_diff(b.cpt(var))?);
    }
    Ok(delta)
}

/// Acts, detects, inserts a hidden variable on the first detection and
/// refits it after every later epoch until its tables stop moving.
pub fn run_learning_process(
    net: &TwoSliceNetwork,
    world: &WorldConfig,
    agent: &AgentConfig,
    seed: u64,
) -> Result<LearningOutcome> {
    agent.validate()?;
    world.validate()?;
    let mut current = net.clone();
    let mut hidden = None;
    let mut epochs = Vec::new();
    let mut em_logs = Vec::new();
    let mut data: Vec<StepRecord> = Vec::new();
    let mut converged = false;
    for epoch in 0..agent.epoch_budget {
        let run = run_epoch(&current, world, agent, seed, epoch)?;
        let detected = run.summary.detected;
        let selected = run.summary.selected_variables.clone();
        let records = run.summary.records.clone();
        epochs.push(run);
        if hidden.is_none() {
            if !detected {
                continue;
            }
            let spec = HiddenVariableSpec::xm(&selected);
            current = insert_hidden_variable(&current, &spec)?;
            hidden = Some(spec);
        }
        data.extend(records);
        let (fitted, log) = hard_weighted_em(&current, &data, agent, seed, epoch)?;
        em_logs.push(log);
        let change = learned_change(&current, &fitted)?;
        let first_fit = em_logs.len() == 1;
        current = fitted;
        if !first_fit && change <= agent.epsilon {
            converged = true;
            break;
        }
    }
    Ok(LearningOutcome {
        initial_network: net.clone(),
        final_network: current,
        hidden,
        epochs,
        em_logs,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surprise::Distribution;

    fn obs(d: usize, ha: usize, bt: usize, tvf: usize) -> DiscreteObservation {
        DiscreteObservation::new(d, ha, bt, tvf).unwrap()
    }

    #[test]
    fn utility_surprise_signs() {
        let ud = crate::network::UtilityDistribution {
            values: vec![-12.0, -2.0],
            distribution: Distribution::from_probs(vec![0.1, 0.9]).unwrap(),
        };
        let c = utility_surprise(&ud, -12.0, ud.mean());
        assert!((c + 3.0).abs() < 1e-12, "{c}");
        let point = crate::network::UtilityDistribution {
            values: vec![-2.0],
            distribution: Distribution::from_probs(vec![1.0]).unwrap(),
        };
        assert_eq!(utility_surprise(&point, -2.0, -2.0), 0.0);
        assert_eq!(utility_surprise(&point, -7.0, -2.0), f64::NEG_INFINITY);
    }

    #[test]
    fn first_bump_rejects_contact() {
        let net = TwoSliceNetwork::initial();
        let act = DiscreteAction::new(4, 5).unwrap();
        let r = detect_step(&net, &obs(2, 5, 0, 0), &act, &obs(1, 5, 1, 0), 0.05).unwrap();
        assert!(r.rejected(ObsVar::BarrierTactile));
        assert!(!r.rejected(ObsVar::Depth));
        assert!(r.gated());
        assert!(r.c_u < 0.0);
    }

    #[test]
    fn blocked_forward_step_depth_surprise() {
        // Depth stays put although SF = 4 predicted a decrease w.p. 4/6.
        let net = TwoSliceNetwork::initial();
        let act = DiscreteAction::new(4, 5).unwrap();
        let r = detect_step(&net, &obs(1, 5, 1, 0), &act, &obs(1, 5, 1, 0), 0.05).unwrap();
        let v = r.per_variable[&ObsVar::Depth];
        assert!((v.coefficient - 2f64.sqrt()).abs() < 1e-12);
        assert!(!v.rejected);
        let r = detect_step(&net, &obs(1, 5, 1, 0), &act, &obs(1, 5, 1, 0), DETECTION_ALPHA).unwrap();
        assert!(r.rejected(ObsVar::Depth));
        // An impossible depth bin is rejected outright.
        let r = detect_step(&net, &obs(1, 5, 1, 0), &act, &obs(2, 5, 1, 0), 0.05).unwrap();
        assert!(r.rejected(ObsVar::Depth));
    }

    #[test]
    fn weights_follow_utility_jumps() {
        let net = TwoSliceNetwork::initial();
        let act = DiscreteAction::idle();
        let a = detect_step(&net, &obs(2, 5, 0, 0), &act, &obs(2, 5, 0, 0), 0.05).unwrap();
        let b = detect_step(&net, &obs(2, 5, 0, 0), &act, &obs(2, 5, 1, 0), 0.05).unwrap();
        let mut rs = vec![a.clone(), b.clone()];
        assign_weights(&mut rs);
        assert_eq!(rs[0].weight, 1.0);
        assert_eq!(rs[1].weight, 1.0 + (a.realized_utility - b.realized_utility).abs());
    }

    #[test]
    fn threshold_semantics() {
        let net = TwoSliceNetwork::initial();
        let act = DiscreteAction::new(4, 5).unwrap();
        let r = detect_step(&net, &obs(2, 5, 0, 0), &act, &obs(1, 5, 1, 0), 0.05).unwrap();
        let epoch = EpochSummary {
            epoch: 0,
            records: vec![r],
            detected: true,
            selected_variables: BTreeSet::new(),
            rejection_counts: BTreeMap::new(),
            reached_target: false,
        };
        assert_eq!(
            select_related_variables(&epoch, 1),
            BTreeSet::from([ObsVar::BarrierTactile])
        );
        assert!(select_related_variables(&epoch, 2).is_empty());
    }
}
