use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The agent's four discretized percepts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ObsVar {
    #[serde(rename = "D")]
    Depth,
    #[serde(rename = "HA")]
    HeadingAngle,
    #[serde(rename = "BT")]
    BarrierTactile,
    #[serde(rename = "TVF")]
    TargetInVisualField,
}

impl ObsVar {
    pub const ALL: [ObsVar; 4] = [
        ObsVar::Depth,
        ObsVar::HeadingAngle,
        ObsVar::BarrierTactile,
        ObsVar::TargetInVisualField,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObsVar::Depth => "D",
            ObsVar::HeadingAngle => "HA",
            ObsVar::BarrierTactile => "BT",
            ObsVar::TargetInVisualField => "TVF",
        }
    }

    pub fn from_name(name: &str) -> Option<ObsVar> {
        ObsVar::ALL.into_iter().find(|v| v.name() == name)
    }

    pub fn cardinality(self) -> usize {
        match self {
            ObsVar::Depth => DEPTH_BINS,
            ObsVar::HeadingAngle => HEADING_BINS,
            ObsVar::BarrierTactile | ObsVar::TargetInVisualField => 2,
        }
    }

    pub fn position(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ObsVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const DEPTH_BINS: usize = 5;
/// Eleven heading bins over `[-pi, pi]`, centred on bin 5.
pub const HEADING_BINS: usize = 11;
pub const STEP_FORWARD_CATEGORIES: usize = 5;
pub const STEP_ASIDE_CATEGORIES: usize = 11;
/// Step-aside category that corresponds to no lateral motion.
pub const STEP_ASIDE_CENTER: usize = 5;
/// Number of distinct joint observations.
pub const JOINT_OBSERVATIONS: usize = DEPTH_BINS * HEADING_BINS * 2 * 2;
pub const ACTION_COUNT: usize = STEP_FORWARD_CATEGORIES * STEP_ASIDE_CATEGORIES;

pub const STEP_FORWARD: &str = "SF";
pub const STEP_ASIDE: &str = "SA";

/// Discretized observation at one time slice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiscreteObservation {
    pub depth: usize,
    pub heading_angle: usize,
    pub barrier_tactile: usize,
    pub target_in_visual_field: usize,
}

impl DiscreteObservation {
    pub fn new(depth: usize, heading_angle: usize, barrier_tactile: usize, tvf: usize) -> Result<Self> {
        let obs = DiscreteObservation {
            depth,
            heading_angle,
            barrier_tactile,
            target_in_visual_field: tvf,
        };
        for var in ObsVar::ALL {
            if obs.get(var) >= var.cardinality() {
                return Err(Error::IndexOutOfRange {
                    index: obs.get(var),
                    len: var.cardinality(),
                });
            }
        }
        Ok(obs)
    }

    pub fn get(&self, var: ObsVar) -> usize {
        match var {
            ObsVar::Depth => self.depth,
            ObsVar::HeadingAngle => self.heading_angle,
            ObsVar::BarrierTactile => self.barrier_tactile,
            ObsVar::TargetInVisualField => self.target_in_visual_field,
        }
    }

    /// Row-major index with depth most significant.
    pub fn index(&self) -> usize {
        ((self.depth * HEADING_BINS + self.heading_angle) * 2 + self.barrier_tactile) * 2
            + self.target_in_visual_field
    }

    pub fn from_index(index: usize) -> DiscreteObservation {
        let tvf = index % 2;
        let bt = (index / 2) % 2;
        let ha = (index / 4) % HEADING_BINS;
        let d = index / (4 * HEADING_BINS);
        DiscreteObservation {
            depth: d,
            heading_angle: ha,
            barrier_tactile: bt,
            target_in_visual_field: tvf,
        }
    }

    pub fn all() -> impl Iterator<Item = DiscreteObservation> {
        (0..JOINT_OBSERVATIONS).map(DiscreteObservation::from_index)
    }

    pub fn label(&self) -> String {
        format!(
            "D{}.HA{}.BT{}.TVF{}",
            self.depth, self.heading_angle, self.barrier_tactile, self.target_in_visual_field
        )
    }

    /// Shared outcome labels of the joint observation space.
    pub fn joint_domain() -> Arc<[String]> {
        static DOMAIN: OnceLock<Arc<[String]>> = OnceLock::new();
        DOMAIN
            .get_or_init(|| DiscreteObservation::all().map(|o| o.label()).collect())
            .clone()
    }

    /// Shared outcome labels `"0".."k-1"` for a single variable.
    pub fn variable_domain(var: ObsVar) -> Arc<[String]> {
        static DOMAINS: OnceLock<[Arc<[String]>; 4]> = OnceLock::new();
        DOMAINS.get_or_init(|| {
            ObsVar::ALL.map(|v| (0..v.cardinality()).map(|i| i.to_string()).collect())
        })[var.position()]
            .clone()
    }
}

/// The two decisions taken every slice, as category indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DiscreteAction {
    pub step_forward: usize,
    pub step_aside: usize,
}

impl DiscreteAction {
    pub fn new(step_forward: usize, step_aside: usize) -> Result<Self> {
        if step_forward >= STEP_FORWARD_CATEGORIES {
            return Err(Error::IndexOutOfRange {
                index: step_forward,
                len: STEP_FORWARD_CATEGORIES,
            });
        }
        if step_aside >= STEP_ASIDE_CATEGORIES {
            return Err(Error::IndexOutOfRange {
                index: step_aside,
                len: STEP_ASIDE_CATEGORIES,
            });
        }
        Ok(DiscreteAction {
            step_forward,
            step_aside,
        })
    }

    /// Standing still: no forward motion, no lateral motion.
    pub fn idle() -> DiscreteAction {
        DiscreteAction {
            step_forward: 0,
            step_aside: STEP_ASIDE_CENTER,
        }
    }

    /// All 55 actions in lexicographic `(SF, SA)` order.
    pub fn all() -> impl Iterator<Item = DiscreteAction> {
        (0..STEP_FORWARD_CATEGORIES).flat_map(|sf| {
            (0..STEP_ASIDE_CATEGORIES).map(move |sa| DiscreteAction {
                step_forward: sf,
                step_aside: sa,
            })
        })
    }

    pub fn decision(&self, name: &str) -> Option<usize> {
        match name {
            STEP_FORWARD => Some(self.step_forward),
            STEP_ASIDE => Some(self.step_aside),
            _ => None,
        }
    }
}
