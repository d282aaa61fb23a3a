//! Exact one-step prediction by enumeration of the next slice.

use super::variables::{
    DiscreteAction, DiscreteObservation, ObsVar, HEADING_BINS, JOINT_OBSERVATIONS,
};
use super::TwoSliceNetwork;
use crate::error::{Error, Result};
use crate::surprise::Distribution;

/// Relative margin by which an action must beat the incumbent to replace it.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Utility atoms closer than this are merged.
const ATOM_MERGE: f64 = 1e-9;

/// Distribution of `HV` to marginalize over: the supplied belief, or the
/// network's own table at `obs_t`.
fn hidden_weights(
    net: &TwoSliceNetwork,
    obs_t: &DiscreteObservation,
    hv_belief: Option<&Distribution>,
) -> Result<Vec<(usize, f64)>> {
    match (net.hidden_prior(obs_t), hv_belief) {
        (None, None) => Ok(vec![(0, 1.0)]),
        (None, Some(_)) => Err(Error::ArityMismatch(
            "hidden-variable belief given for a network without HV".into(),
        )),
        (Some(prior), belief) => {
            let w = match belief {
                Some(b) if b.len() != 2 => {
                    return Err(Error::ArityMismatch(format!(
                        "hidden-variable belief over {} values",
                        b.len()
                    )))
                }
                Some(b) => [b.probs()[0], b.probs()[1]],
                None => prior,
            };
            Ok(w.into_iter().enumerate().filter(|(_, p)| *p > 0.0).collect())
        }
    }
}

/// Joint next-slice probabilities as a plain vector in observation-index order.
pub(crate) fn joint_probs(
    net: &TwoSliceNetwork,
    obs_t: &DiscreteObservation,
    act: &DiscreteAction,
    hv_belief: Option<&Distribution>,
) -> Result<Vec<f64>> {
    let mut joint = vec![0.0; JOINT_OBSERVATIONS];
    for (hv, w) in hidden_weights(net, obs_t, hv_belief)? {
        let d = net.column(ObsVar::Depth, obs_t, act, hv);
        let ha = net.column(ObsVar::HeadingAngle, obs_t, act, hv);
        let bt = net.column(ObsVar::BarrierTactile, obs_t, act, hv);
        let tvf = net.column(ObsVar::TargetInVisualField, obs_t, act, hv);
        for (i, &pd) in d.iter().enumerate() {
            if pd == 0.0 {
                continue;
            }
            for (j, &ph) in ha.iter().enumerate() {
                let pdh = w * pd * ph;
                if pdh == 0.0 {
                    continue;
                }
                let base = (i * HEADING_BINS + j) * 4;
                for (k, &pb) in bt.iter().enumerate() {
                    for (l, &pt) in tvf.iter().enumerate() {
                        joint[base + k * 2 + l] += pdh * pb * pt;
                    }
                }
            }
        }
    }
    Ok(joint)
}

/// `P(X_{t+1} | x_t, a_t)` over the 220 joint observations.
///
/// The hidden variable, when present, is summed out using `hv_belief` if
/// supplied and its own table otherwise.
pub fn predict_joint(
    net: &TwoSliceNetwork,
    obs_t: &DiscreteObservation,
    act: &DiscreteAction,
    hv_belief: Option<&Distribution>,
) -> Result<Distribution> {
    let probs = joint_probs(net, obs_t, act, hv_belief)?;
    Distribution::with_domain(DiscreteObservation::joint_domain(), probs)
}

/// Per-variable predictive marginals in `ObsVar::ALL` order.
pub fn predict_marginals(
    net: &TwoSliceNetwork,
    obs_t: &DiscreteObservation,
    act: &DiscreteAction,
    hv_belief: Option<&Distribution>,
) -> Result<[Distribution; 4]> {
    let weights = hidden_weights(net, obs_t, hv_belief)?;
    let marginal = |var: ObsVar| {
        let mut probs = vec![0.0; var.cardinality()];
        for &(hv, w) in &weights {
            for (acc, p) in probs.iter_mut().zip(net.column(var, obs_t, act, hv)) {
                *acc += w * p;
            }
        }
        Distribution::with_domain(DiscreteObservation::variable_domain(var), probs)
    };
    Ok([
        marginal(ObsVar::Depth)?,
        marginal(ObsVar::HeadingAngle)?,
        marginal(ObsVar::BarrierTactile)?,
        marginal(ObsVar::TargetInVisualField)?,
    ])
}

fn expectation(net: &TwoSliceNetwork, joint: &[f64], act: &DiscreteAction) -> f64 {
    let model = net.utility_model();
    joint
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(i, p)| p * model.value(&DiscreteObservation::from_index(i), act))
        .sum()
}

/// `E[U(X_{t+1}, a) | x_t, a]`.
pub fn expected_utility(net: &TwoSliceNetwork, obs_t: &DiscreteObservation, act: &DiscreteAction) -> Result<f64> {
    let joint = joint_probs(net, obs_t, act, None)?;
    Ok(expectation(net, &joint, act))
}

/// Action of maximum expected utility over all 55 decision pairs, with
/// its expected utility. Ties keep the lexicographically smallest pair.
pub fn select_action_meu(net: &TwoSliceNetwork, obs_t: &DiscreteObservation) -> Result<(DiscreteAction, f64)> {
    let mut best: Option<(DiscreteAction, f64)> = None;
    for act in DiscreteAction::all() {
        let eu = expected_utility(net, obs_t, &act)?;
        let better = match best {
            None => true,
            Some((_, incumbent)) => eu - incumbent > TIE_TOLERANCE * incumbent.abs().max(1.0),
        };
        if better {
            best = Some((act, eu));
        }
    }
    Ok(best.expect("action set is non-empty"))
}

/// Pushforward of the next-slice prediction through the utility function.
#[derive(Clone, Debug, PartialEq)]
pub struct UtilityDistribution {
    /// Distinct utility values in increasing order.
    pub values: Vec<f64>,
    pub distribution: Distribution,
}

impl UtilityDistribution {
    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(self.distribution.probs())
            .map(|(v, p)| v * p)
            .sum()
    }

    /// Atom matching `u` within the merge tolerance.
    pub fn atom_of(&self, u: f64) -> Option<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| (*v - u).abs() <= ATOM_MERGE * u.abs().max(1.0))
            .min_by(|a, b| (a.1 - u).abs().total_cmp(&(b.1 - u).abs()))
            .map(|(i, _)| i)
    }
}

/// Probability of each distinct utility value reachable in one step.
///
/// Only outcomes with positive predicted mass contribute atoms.
pub fn utility_distribution(
    net: &TwoSliceNetwork,
    obs_t: &DiscreteObservation,
    act: &DiscreteAction,
) -> Result<UtilityDistribution> {
    let model = net.utility_model();
    let joint = joint_probs(net, obs_t, act, None)?;
    let mut atoms: Vec<(f64, f64)> = joint
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(i, &p)| (model.value(&DiscreteObservation::from_index(i), act), p))
        .collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
    for (u, p) in atoms {
        match merged.last_mut() {
            Some((v, q)) if (u - *v).abs() <= ATOM_MERGE * v.abs().max(1.0) => {
                *v = (*v * *q + u * p) / (*q + p);
                *q += p;
            }
            _ => merged.push((u, p)),
        }
    }
    let total: f64 = merged.iter().map(|a| a.1).sum();
    let values: Vec<f64> = merged.iter().map(|a| a.0).collect();
    let labels: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    let probs = merged.iter().map(|a| a.1 / total).collect();
    Ok(UtilityDistribution {
        values,
        distribution: Distribution::new(labels, probs)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(d: usize, ha: usize, bt: usize, tvf: usize) -> DiscreteObservation {
        DiscreteObservation::new(d, ha, bt, tvf).unwrap()
    }

    #[test]
    fn worked_predictions() {
        let net = TwoSliceNetwork::initial();
        let m = predict_marginals(&net, &obs(2, 5, 0, 0), &DiscreteAction::new(0, 5).unwrap(), None).unwrap();
        assert_eq!(m[0].probs(), &[0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!((m[2].probs()[1] - 0.01).abs() < 1e-15);
        let m = predict_marginals(&net, &obs(1, 5, 0, 0), &DiscreteAction::new(3, 5).unwrap(), None).unwrap();
        assert_eq!(&m[0].probs()[..2], &[0.5, 0.5]);
    }

    #[test]
    fn belief_without_hidden_is_an_error() {
        let net = TwoSliceNetwork::initial();
        let b = Distribution::from_probs(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            predict_joint(&net, &obs(0, 0, 0, 0), &DiscreteAction::idle(), Some(&b)),
            Err(Error::ArityMismatch(_))
        ));
    }

    #[test]
    fn utility_mean_matches_expectation() {
        let net = TwoSliceNetwork::initial();
        let o = obs(2, 5, 0, 0);
        let a = DiscreteAction::new(2, 5).unwrap();
        let ud = utility_distribution(&net, &o, &a).unwrap();
        assert!((ud.mean() - expected_utility(&net, &o, &a).unwrap()).abs() < 1e-9);
        assert!(ud.values.windows(2).all(|w| w[0] < w[1]));
    }
}
