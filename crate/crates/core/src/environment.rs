//! The continuous world the agent acts in.
//!
//! A square agent moves in the rectangle `[0, 10] x [0, 15]` toward a target
//! on the right edge. A vertical barrier lined with spikes blocks the direct
//! route except for a narrow gap at its lower end. Motion is deterministic
//! once a discrete decision has been turned into a continuous magnitude.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{
    DiscreteAction, DiscreteObservation, DEPTH_BINS, HEADING_BINS, STEP_FORWARD_CATEGORIES,
};

/// Infinity-norm range at which the agent feels the spikes.
pub const TOUCH_RANGE: f64 = 2.0;
/// Distance below which a target ahead is visible.
pub const VISUAL_RANGE: f64 = 2.0;
pub const MAX_STEP_FORWARD: f64 = 2.5;
pub const MAX_STEP_ASIDE: f64 = 2.5;

/// Interval edges of the eleven step-aside categories.
pub const STEP_ASIDE_EDGES: [f64; 12] = [
    -2.5, -2.1, -1.6, -1.1, -0.7, -0.2, 0.2, 0.7, 1.1, 1.6, 2.1, 2.5,
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    /// Length of the diagonal: the largest possible depth.
    pub fn diagonal(&self) -> f64 {
        (self.x_max - self.x_min).hypot(self.y_max - self.y_min)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub bounds: Bounds,
    pub target_position: Point,
    pub agent_start: Point,
    pub agent_orientation: f64,
    pub agent_width: f64,
    pub barrier_exists: bool,
    pub barrier_start: Point,
    pub barrier_end: Point,
    pub spike_separation: f64,
    /// Drawing length of a spike; it plays no part in the dynamics.
    pub spike_length: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            bounds: Bounds {
                x_min: 0.0,
                x_max: 10.0,
                y_min: 0.0,
                y_max: 15.0,
            },
            target_position: Point::new(10.0, 7.5),
            agent_start: Point::new(1.0, 7.5),
            agent_orientation: 0.0,
            agent_width: 0.75,
            barrier_exists: true,
            barrier_start: Point::new(4.5, 1.5),
            barrier_end: Point::new(4.5, 15.0),
            spike_separation: 0.5,
            spike_length: 0.5,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        let b = &self.bounds;
        if !(b.x_min < b.x_max && b.y_min < b.y_max) {
            return Err(Error::ConfigInvalid("empty world bounds".into()));
        }
        if !b.contains(self.agent_start) {
            return Err(Error::ConfigInvalid("agent starts outside the world".into()));
        }
        if !(self.agent_width > 0.0 && self.spike_separation > 0.0) {
            return Err(Error::ConfigInvalid(
                "agent width and spike separation must be positive".into(),
            ));
        }
        if self.barrier_start.x != self.barrier_end.x || self.barrier_start.y > self.barrier_end.y {
            return Err(Error::ConfigInvalid(
                "barrier must be a vertical segment listed bottom to top".into(),
            ));
        }
        if self.barrier_exists && self.barrier_overlaps(self.agent_start) {
            return Err(Error::ConfigInvalid("agent starts inside the barrier".into()));
        }
        Ok(())
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.agent_width
    }

    /// Spike positions along the barrier, both end points included.
    pub fn spikes(&self) -> Vec<Point> {
        let (a, b) = (self.barrier_start, self.barrier_end);
        let n = ((b.y - a.y) / self.spike_separation + 1e-9).floor() as usize;
        (0..=n)
            .map(|k| Point::new(a.x, a.y + k as f64 * self.spike_separation))
            .collect()
    }

    /// Whether an agent centred at `p` overlaps the barrier segment. Flush
    /// contact does not count.
    pub fn barrier_overlaps(&self, p: Point) -> bool {
        let h = self.half_width();
        (p.x - self.barrier_start.x).abs() < h
            && p.y + h > self.barrier_start.y
            && p.y - h < self.barrier_end.y
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub agent_position: Point,
    pub config: WorldConfig,
}

impl WorldState {
    pub fn initial(config: WorldConfig) -> Self {
        WorldState {
            agent_position: config.agent_start,
            config,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousObservation {
    pub depth: f64,
    pub heading_angle: f64,
    pub barrier_tactile: u8,
    pub target_in_visual_field: u8,
}

/// Continuous magnitudes chosen for a discrete action.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousAction {
    pub step_forward: f64,
    pub step_aside: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MotionKind {
    Forward,
    Aside,
}

fn check_range(value: f64, min: f64, max: f64) -> Result<()> {
    if value >= min && value <= max {
        Ok(())
    } else {
        Err(Error::DomainViolation { value, min, max })
    }
}

/// Candidate position after moving `s` units along the facing direction.
pub fn step_forward(state: &WorldState, s: f64) -> Result<Point> {
    check_range(s, 0.0, MAX_STEP_FORWARD)?;
    let (p, a) = (state.agent_position, state.config.agent_orientation);
    Ok(Point::new(p.x + s * a.cos(), p.y + s * a.sin()))
}

/// Candidate position after moving `s` units perpendicular to the facing
/// direction. Positive values move along the facing direction turned by
/// `+pi/2` (toward `+y` when facing `+x`) and negative values the other way.
pub fn step_aside(state: &WorldState, s: f64) -> Result<Point> {
    check_range(s, -MAX_STEP_ASIDE, MAX_STEP_ASIDE)?;
    let (p, a) = (state.agent_position, state.config.agent_orientation);
    let side = a + PI / 2.0;
    Ok(Point::new(p.x + s * side.cos(), p.y + s * side.sin()))
}

/// Entry parameter of the segment `from + t (to - from)`, `t` in `[0, 1]`,
/// into the open barrier rectangle grown by the agent's half width, with
/// the axis that becomes binding.
fn barrier_entry(config: &WorldConfig, from: Point, to: Point) -> Option<(f64, Axis)> {
    let h = config.half_width();
    let bx = config.barrier_start.x;
    let slabs = [
        (Axis::X, from.x, to.x - from.x, bx - h, bx + h),
        (
            Axis::Y,
            from.y,
            to.y - from.y,
            config.barrier_start.y - h,
            config.barrier_end.y + h,
        ),
    ];
    let (mut enter, mut exit, mut axis) = (f64::NEG_INFINITY, f64::INFINITY, Axis::X);
    for (ax, start, delta, lo, hi) in slabs {
        if delta == 0.0 {
            if start <= lo || start >= hi {
                return None;
            }
            continue;
        }
        let (t0, t1) = {
            let a = (lo - start) / delta;
            let b = (hi - start) / delta;
            if a < b {
                (a, b)
            } else {
                (b, a)
            }
        };
        if t0 > enter {
            enter = t0;
            axis = ax;
        }
        exit = exit.min(t1);
    }
    if enter < exit && enter < 1.0 && exit > 0.0 {
        Some((enter.max(0.0), axis))
    } else {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Axis {
    X,
    Y,
}

/// Applies `BarrierImpact` and then `MapBounds` to a candidate move.
///
/// A move that would run into the barrier is shortened to the longest
/// prefix that keeps the body clear; the binding coordinate is set exactly
/// flush with the barrier. A move whose end point leaves the world is not
/// carried out at all.
pub fn apply_restrictors(state: &WorldState, candidate: Point, _kind: MotionKind) -> Point {
    let cfg = &state.config;
    let from = state.agent_position;
    let mut end = candidate;
    if cfg.barrier_exists {
        if let Some((t, axis)) = barrier_entry(cfg, from, candidate) {
            let h = cfg.half_width();
            end = Point::new(
                from.x + t * (candidate.x - from.x),
                from.y + t * (candidate.y - from.y),
            );
            match axis {
                Axis::X => {
                    end.x = if candidate.x > from.x {
                        cfg.barrier_start.x - h
                    } else {
                        cfg.barrier_start.x + h
                    }
                }
                Axis::Y => {
                    end.y = if candidate.y > from.y {
                        cfg.barrier_start.y - h
                    } else {
                        cfg.barrier_end.y + h
                    }
                }
            }
            if t == 0.0 {
                end = from;
            }
        }
    }
    if cfg.bounds.contains(end) {
        end
    } else {
        from
    }
}

/// Continuous percepts at `state`.
pub fn observe(state: &WorldState) -> ContinuousObservation {
    let cfg = &state.config;
    let p = state.agent_position;
    let dx = cfg.target_position.x - p.x;
    let dy = cfg.target_position.y - p.y;
    let depth = dx.hypot(dy);
    let heading_angle = dy.atan2(dx);
    let touching = cfg.barrier_exists
        && cfg
            .spikes()
            .iter()
            .any(|s| (p.x - s.x).abs().max((p.y - s.y).abs()) <= TOUCH_RANGE);
    let visible = depth <= VISUAL_RANGE && heading_angle.abs() <= PI / 2.0;
    ContinuousObservation {
        depth,
        heading_angle,
        barrier_tactile: touching as u8,
        target_in_visual_field: visible as u8,
    }
}

/// Largest possible depth in the default world, `sqrt(325)`.
pub fn max_depth(config: &WorldConfig) -> f64 {
    config.bounds.diagonal()
}

/// Bins a continuous observation. Bins are half-open with the top edge
/// folded into the last bin.
pub fn discretize(c: &ContinuousObservation, config: &WorldConfig) -> DiscreteObservation {
    let d_max = max_depth(config);
    let depth = ((DEPTH_BINS as f64 * c.depth / d_max).floor().max(0.0) as usize).min(DEPTH_BINS - 1);
    let ha = (HEADING_BINS as f64 * (c.heading_angle + PI) / (2.0 * PI)).floor().max(0.0) as usize;
    DiscreteObservation {
        depth,
        heading_angle: ha.min(HEADING_BINS - 1),
        barrier_tactile: c.barrier_tactile as usize,
        target_in_visual_field: c.target_in_visual_field as usize,
    }
}

/// Interval of continuous step-forward magnitudes for a category.
pub fn step_forward_interval(category: usize) -> (f64, f64) {
    let lo = 0.5 * category as f64;
    (lo, lo + 0.5)
}

pub fn step_aside_interval(category: usize) -> (f64, f64) {
    (STEP_ASIDE_EDGES[category], STEP_ASIDE_EDGES[category + 1])
}

fn uniform_in<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64), closed: bool) -> f64 {
    if closed {
        rng.random_range(lo..=hi)
    } else {
        rng.random_range(lo..hi)
    }
}

/// Draws continuous magnitudes uniformly inside each category's interval.
/// Only the outermost categories include their upper edge.
pub fn action_to_continuous<R: Rng + ?Sized>(act: &DiscreteAction, rng: &mut R) -> ContinuousAction {
    let sf_last = act.step_forward + 1 == STEP_FORWARD_CATEGORIES;
    let sa_last = act.step_aside + 2 == STEP_ASIDE_EDGES.len();
    ContinuousAction {
        step_forward: uniform_in(rng, step_forward_interval(act.step_forward), sf_last),
        step_aside: uniform_in(rng, step_aside_interval(act.step_aside), sa_last),
    }
}

/// Executes already-sampled magnitudes: forward first, then aside, each
/// passed through the restrictors.
pub fn apply_continuous(state: &WorldState, action: ContinuousAction) -> Result<WorldState> {
    let mut next = *state;
    let candidate = step_forward(&next, action.step_forward)?;
    next.agent_position = apply_restrictors(&next, candidate, MotionKind::Forward);
    let candidate = step_aside(&next, action.step_aside)?;
    next.agent_position = apply_restrictors(&next, candidate, MotionKind::Aside);
    Ok(next)
}

/// Outcome of one environment transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub state: WorldState,
    pub observation: ContinuousObservation,
    pub action: ContinuousAction,
}

/// Samples magnitudes for `act`, moves the agent and observes the result.
pub fn env_step<R: Rng + ?Sized>(state: &WorldState, act: &DiscreteAction, rng: &mut R) -> Transition {
    let action = action_to_continuous(act, rng);
    let next = apply_continuous(state, action).expect("sampled magnitudes lie in their domains");
    Transition {
        state: next,
        observation: observe(&next),
        action,
    }
}

/// One row of the exported trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub epoch: usize,
    pub step: usize,
    pub x: f64,
    pub y: f64,
    pub sf_cat: usize,
    pub sa_cat: usize,
    pub sf_cont: f64,
    pub sa_cont: f64,
    pub bt: u8,
    pub tvf: u8,
    pub depth: f64,
    pub ha: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn at(x: f64, y: f64) -> WorldState {
        WorldState {
            agent_position: Point::new(x, y),
            config: WorldConfig::default(),
        }
    }

    #[test]
    fn mechanistic_moves() {
        let s = at(1.0, 7.5);
        assert_eq!(step_forward(&s, 2.0).unwrap(), Point::new(3.0, 7.5));
        assert_eq!(step_forward(&s, 2.5).unwrap(), Point::new(3.5, 7.5));
        assert_eq!(step_forward(&s, 0.0).unwrap(), s.agent_position);
        let p = step_aside(&s, 1.0).unwrap();
        assert!((p.x - 1.0).abs() < 1e-15 && (p.y - 8.5).abs() < 1e-15);
        let p = step_aside(&s, -1.0).unwrap();
        assert!((p.x - 1.0).abs() < 1e-15 && (p.y - 6.5).abs() < 1e-15);
        assert!(matches!(step_forward(&s, 3.0), Err(Error::DomainViolation { .. })));
        assert!(step_aside(&s, -2.6).is_err());
    }

    #[test]
    fn map_bounds_denies() {
        let s = at(9.5, 7.5);
        let c = step_forward(&s, 2.0).unwrap();
        assert_eq!(apply_restrictors(&s, c, MotionKind::Forward), s.agent_position);
    }

    #[test]
    fn barrier_clips_forward() {
        // Body edge three units from the barrier, five requested.
        let s = at(4.5 - 0.375 - 3.0, 7.5);
        let c = Point::new(s.agent_position.x + 5.0, 7.5);
        let end = apply_restrictors(&s, c, MotionKind::Forward);
        assert_eq!(end, Point::new(4.125, 7.5));
        assert!(!s.config.barrier_overlaps(end));
        // Parallel motion next to the barrier is untouched.
        let s = at(4.125, 7.5);
        let c = Point::new(4.125, 9.0);
        assert_eq!(apply_restrictors(&s, c, MotionKind::Aside), c);
    }

    #[test]
    fn barrier_clips_at_lower_end() {
        // Moving up into the barrier's lower end from the gap below it.
        let s = at(4.5, 0.5);
        let end = apply_restrictors(&s, Point::new(4.5, 2.5), MotionKind::Aside);
        assert_eq!(end, Point::new(4.5, 1.125));
    }

    #[test]
    fn observation_examples() {
        let o = observe(&at(1.0, 7.5));
        assert_eq!((o.depth, o.heading_angle, o.barrier_tactile, o.target_in_visual_field), (9.0, 0.0, 0, 0));
        assert_eq!(observe(&at(3.0, 7.5)).barrier_tactile, 1);
        assert_eq!(observe(&at(9.0, 7.5)).target_in_visual_field, 1);
        let d = discretize(&observe(&at(1.0, 7.5)), &WorldConfig::default());
        assert_eq!((d.depth, d.heading_angle), (2, 5));
        let top = ContinuousObservation {
            depth: 325f64.sqrt(),
            heading_angle: PI,
            barrier_tactile: 0,
            target_in_visual_field: 0,
        };
        let d = discretize(&top, &WorldConfig::default());
        assert_eq!((d.depth, d.heading_angle), (4, 10));
    }

    #[test]
    fn spikes_include_both_ends() {
        let s = WorldConfig::default().spikes();
        assert_eq!(s.len(), 28);
        assert_eq!(s[0], Point::new(4.5, 1.5));
        assert_eq!(s[27], Point::new(4.5, 15.0));
    }

    #[test]
    fn sampling_stays_in_category() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let a = action_to_continuous(&DiscreteAction::new(1, 5).unwrap(), &mut rng);
            assert!((0.5..1.0).contains(&a.step_forward));
            assert!((-0.2..0.2).contains(&a.step_aside));
        }
    }
}
