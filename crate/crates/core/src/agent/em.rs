//! Hard weighted EM for the hidden variable's tables.
//!
//! Only the hidden variable's table and the tables of its children are
//! re-estimated. The first imputation thresholds the recorded influence
//! probability; later ones take the most probable hidden value given the
//! transition under the previous iteration's parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AgentConfig, StepRecord};
use crate::error::{Error, Result};
use crate::network::{ConditionalTable, ObsVar, TwoSliceNetwork};
use crate::rng::{substream, SITE_IMPUTATION};

/// How the first E-step turns an influence probability into a value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Imputation {
    /// `HV = 1` iff `P(HV = 1 | C_U) > 1/2`.
    #[default]
    Hard,
    /// `HV = 1` with probability `P(HV = 1 | C_U)`.
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmIteration {
    pub iteration: usize,
    /// Records imputed with `HV = 1`.
    pub hidden_ones: usize,
    /// Penalized weighted log-likelihood of this iteration's completed data
    /// under the parameters before and after the M-step.
    pub objective_before: f64,
    pub objective_after: f64,
    pub max_delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmLog {
    pub epoch: usize,
    pub records: usize,
    pub iterations: Vec<EmIteration>,
    pub converged: bool,
}

/// The tables EM estimates, hidden table first.
#[derive(Clone, Debug)]
struct Params {
    hidden: ConditionalTable,
    children: Vec<(ObsVar, ConditionalTable)>,
}

impl Params {
    fn of(net: &TwoSliceNetwork) -> Result<Self> {
        let hidden = net.hidden().ok_or(Error::NoHiddenVariable)?.cpt().clone();
        let children = net
            .hidden_children()
            .into_iter()
            .map(|v| (v, net.cpt(v).clone()))
            .collect();
        Ok(Params { hidden, children })
    }

    fn max_delta(&self, other: &Params) -> Result<f64> {
        let mut d = self.hidden.max_abs_diff(&other.hidden)?;
        for ((_, a), (_, b)) in self.children.iter().zip(&other.children) {
            d = d.max(a.max_abs_diff(b)?);
        }
        Ok(d)
    }

    fn install(&self, net: &TwoSliceNetwork) -> Result<TwoSliceNetwork> {
        let mut out = net.clone();
        out.replace_table(self.hidden.clone())?;
        for (_, t) in &self.children {
            out.replace_table(t.clone())?;
        }
        Ok(out)
    }
}

/// Weighted counts of one table's child values per parent configuration.
fn counts(
    net: &TwoSliceNetwork,
    data: &[StepRecord],
    imputed: &[usize],
) -> (Vec<Vec<f64>>, Vec<(ObsVar, Vec<Vec<f64>>)>) {
    let hidden = net.hidden().expect("checked by caller");
    let mut hv = vec![vec![0.0; 2]; hidden.cpt().config_count()];
    let mut children: Vec<(ObsVar, Vec<Vec<f64>>)> = net
        .hidden_children()
        .into_iter()
        .map(|v| (v, vec![vec![0.0; v.cardinality()]; net.cpt(v).config_count()]))
        .collect();
    for (r, &h) in data.iter().zip(imputed) {
        hv[hidden.config_of(&r.obs_t)][h] += r.weight;
        for (var, table) in children.iter_mut() {
            let cfg = net.table_index(*var, &r.obs_t, &r.action, h);
            table[cfg][r.obs_t1.get(*var)] += r.weight;
        }
    }
    (hv, children)
}

/// Smoothed relative frequencies; a column without counts or pseudo-counts
/// keeps `fallback`.
fn normalize(counts: &[f64], pseudo: f64, fallback: &[f64]) -> Vec<f64> {
    let total: f64 = counts.iter().sum::<f64>() + pseudo * counts.len() as f64;
    if total > 0.0 {
        counts.iter().map(|c| (c + pseudo) / total).collect()
    } else {
        fallback.to_vec()
    }
}

/// Exact maximizer of the smoothed objective for fixed imputations.
fn m_step(net: &TwoSliceNetwork, data: &[StepRecord], imputed: &[usize], pseudo: f64) -> Result<Params> {
    let (hv_counts, child_counts) = counts(net, data, imputed);
    let mut params = Params::of(net)?;
    for (i, c) in hv_counts.iter().enumerate() {
        let col = normalize(c, pseudo, params.hidden.column(i));
        params.hidden.set_column(i, col)?;
    }
    for ((_, table), (_, cnt)) in params.children.iter_mut().zip(&child_counts) {
        for (i, c) in cnt.iter().enumerate() {
            let col = normalize(c, pseudo, table.column(i));
            table.set_column(i, col)?;
        }
    }
    Ok(params)
}

fn log_term(weight: f64, p: f64) -> f64 {
    if weight == 0.0 {
        0.0
    } else {
        weight * p.ln()
    }
}

/// Weighted complete-data log-likelihood plus the log Dirichlet prior
/// density (up to a constant) that the M-step maximizes.
fn objective(params: &Params, net: &TwoSliceNetwork, data: &[StepRecord], imputed: &[usize], pseudo: f64) -> f64 {
    let (hv_counts, child_counts) = counts(net, data, imputed);
    let mut total = 0.0;
    for (i, c) in hv_counts.iter().enumerate() {
        for (k, &n) in c.iter().enumerate() {
            total += log_term(n + pseudo, params.hidden.column(i)[k]);
        }
    }
    for ((_, table), (_, cnt)) in params.children.iter().zip(&child_counts) {
        for (i, c) in cnt.iter().enumerate() {
            for (k, &n) in c.iter().enumerate() {
                total += log_term(n + pseudo, table.column(i)[k]);
            }
        }
    }
    total
}

/// Most probable hidden value of each record under `net`; ties go to 0.
fn e_step(net: &TwoSliceNetwork, data: &[StepRecord]) -> Vec<usize> {
    let children = net.hidden_children();
    data.iter()
        .map(|r| {
            let prior = net.hidden_prior(&r.obs_t).expect("network has HV");
            let score = |h: usize| {
                children.iter().fold(prior[h].ln(), |acc, v| {
                    acc + net.column(*v, &r.obs_t, &r.action, h)[r.obs_t1.get(*v)].ln()
                })
            };
            usize::from(score(1) > score(0))
        })
        .collect()
}

fn initial_imputation(data: &[StepRecord], mode: Imputation, seed: u64, epoch: usize) -> Vec<usize> {
    data.iter()
        .enumerate()
        .map(|(i, r)| {
            let p1 = 1.0 - r.influence_p0;
            match mode {
                Imputation::Hard => usize::from(p1 > 0.5),
                Imputation::Sampled => {
                    let mut rng = substream(seed, &[SITE_IMPUTATION, epoch as u64, i as u64]);
                    usize::from(rng.random::<f64>() < p1)
                }
            }
        })
        .collect()
}

/// Fits the hidden variable's table and its children's tables to `data`.
///
/// Every column of those tables is re-estimated, so a parent configuration
/// that never occurs in `data` ends up uniform.
pub fn hard_weighted_em(
    net: &TwoSliceNetwork,
    data: &[StepRecord],
    config: &AgentConfig,
    seed: u64,
    epoch: usize,
) -> Result<(TwoSliceNetwork, EmLog)> {
    if !net.has_hidden() {
        return Err(Error::NoHiddenVariable);
    }
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let pseudo = config.map_prior_strength;
    let mut current = net.clone();
    let mut params = Params::of(net)?;
    let mut imputed = initial_imputation(data, config.imputation, seed, epoch);
    let mut log = EmLog {
        epoch,
        records: data.len(),
        iterations: Vec::new(),
        converged: false,
    };
    for iteration in 0..config.max_iters {
        if iteration > 0 {
            imputed = e_step(&current, data);
        }
        let next = m_step(&current, data, &imputed, pseudo)?;
        let step = EmIteration {
            iteration,
            hidden_ones: imputed.iter().sum(),
            objective_before: objective(&params, &current, data, &imputed, pseudo),
            objective_after: objective(&next, &current, data, &imputed, pseudo),
            max_delta: next.max_delta(&params)?,
        };
        let done = step.max_delta <= config.epsilon;
        log.iterations.push(step);
        current = next.install(&current)?;
        params = next;
        if done {
            log.converged = true;
            break;
        }
    }
    Ok((current, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::detect_step;
    use crate::network::{DiscreteAction, DiscreteObservation};

    fn record(obs_t: DiscreteObservation, act: DiscreteAction, obs_t1: DiscreteObservation) -> StepRecord {
        detect_step(&TwoSliceNetwork::initial(), &obs_t, &act, &obs_t1, 0.05).unwrap()
    }

    #[test]
    fn errors() {
        let net = TwoSliceNetwork::initial();
        let cfg = AgentConfig::default();
        assert!(matches!(
            hard_weighted_em(&net, &[], &cfg, 0, 0),
            Err(Error::NoHiddenVariable)
        ));
        let h = net
            .insert_hidden(&[ObsVar::BarrierTactile], &[ObsVar::BarrierTactile])
            .unwrap();
        assert!(matches!(hard_weighted_em(&h, &[], &cfg, 0, 0), Err(Error::EmptyData)));
    }

    #[test]
    fn unvisited_configurations_stay_uniform() {
        let net = TwoSliceNetwork::initial()
            .insert_hidden(&[ObsVar::Depth, ObsVar::BarrierTactile], &[ObsVar::BarrierTactile, ObsVar::Depth])
            .unwrap();
        let o = DiscreteObservation::new(2, 5, 0, 0).unwrap();
        let bumped = DiscreteObservation::new(1, 5, 1, 0).unwrap();
        let data = vec![
            record(o, DiscreteAction::new(4, 5).unwrap(), bumped),
            record(o, DiscreteAction::idle(), o),
        ];
        let (fitted, log) = hard_weighted_em(&net, &data, &AgentConfig::default(), 0, 0).unwrap();
        assert!(log.converged);
        let hv = fitted.hidden().unwrap().cpt();
        for i in 0..hv.config_count() {
            let cfg = hv.config_at(i);
            if cfg != vec![2, 0] {
                assert_eq!(hv.column(i), &[0.5, 0.5]);
            }
        }
        for it in &log.iterations {
            assert!(it.objective_after >= it.objective_before - 1e-9);
        }
    }
}
