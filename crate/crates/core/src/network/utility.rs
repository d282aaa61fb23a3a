use serde::{Deserialize, Serialize};

use super::variables::{DiscreteAction, DiscreteObservation, STEP_ASIDE_CENTER};

/// Penalty collected on every step that ends touching the barrier.
pub const CONTACT_PENALTY: f64 = -10.0;

/// Energy spent by a step-forward decision of category `sf`.
pub fn forward_energy(sf: usize) -> f64 {
    1.0 + 0.1 * (sf as f64).sqrt()
}

/// Energy spent by a step-aside decision of category `sa`.
pub fn aside_energy(sa: usize) -> f64 {
    1.0 + 0.1 * (sa.abs_diff(STEP_ASIDE_CENTER) as f64).sqrt()
}

/// Utility of reaching `obs` after taking `act`.
pub fn utility(obs: &DiscreteObservation, act: &DiscreteAction) -> f64 {
    let energy = forward_energy(act.step_forward) + aside_energy(act.step_aside);
    if obs.barrier_tactile == 1 {
        return CONTACT_PENALTY - energy;
    }
    -2.0 * obs.depth as f64 - obs.heading_angle.abs_diff(5) as f64
        + 10.0 * obs.target_in_visual_field as f64
        - energy
}

/// Positive affine image `scale * U + offset` of the base utility.
///
/// The default is the identity; other values exist so that invariance of
/// action selection under rescaling can be exercised.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityModel {
    pub scale: f64,
    pub offset: f64,
}

impl Default for UtilityModel {
    fn default() -> Self {
        UtilityModel {
            scale: 1.0,
            offset: 0.0,
        }
    }
}

impl UtilityModel {
    pub fn value(&self, obs: &DiscreteObservation, act: &DiscreteAction) -> f64 {
        self.scale * utility(obs, act) + self.offset
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(d: usize, ha: usize, bt: usize, tvf: usize) -> DiscreteObservation {
        DiscreteObservation::new(d, ha, bt, tvf).unwrap()
    }

    #[test]
    fn worked_values() {
        let idle = DiscreteAction::idle();
        assert_eq!(utility(&obs(0, 5, 1, 0), &idle), -12.0);
        assert_eq!(utility(&obs(0, 5, 0, 1), &idle), 8.0);
        let u = utility(&obs(4, 0, 0, 0), &DiscreteAction::new(4, 10).unwrap());
        assert!((u - (-15.423_606_797_749_978)).abs() < 1e-12, "{u}");
    }
}
