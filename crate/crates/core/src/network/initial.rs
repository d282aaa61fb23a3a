//! Closed-form transition model of the agent's prior network.
//!
//! Each function returns the distribution of a variable at `t + 1` given
//! its own value at `t` and the two decision categories. Matrices are
//! column-stochastic: entry `(i, j)` is `P(X_{t+1} = i | X_t = j)`.

use super::variables::{HEADING_BINS, STEP_ASIDE_CENTER};

/// Weight of the step-aside decision in heading transitions.
pub const HEADING_ASIDE_WEIGHT: f64 = 0.2;

/// Probability that a depth of zero leaks into bin one.
const DEPTH_LEAK: f64 = 0.0001;

fn forward_share(sf: usize) -> f64 {
    sf as f64 / 6.0
}

/// Signed lateral share `(SA - 5) / 5`.
fn aside_share(sa: usize) -> f64 {
    (sa as f64 - STEP_ASIDE_CENTER as f64) / 5.0
}

pub fn depth_column(depth_t: usize, sf: usize) -> Vec<f64> {
    let mut col = vec![0.0; 5];
    if depth_t == 0 {
        col[0] = 1.0 - DEPTH_LEAK;
        col[1] = DEPTH_LEAK;
    } else {
        let f = forward_share(sf);
        col[depth_t - 1] = f;
        col[depth_t] = 1.0 - f;
    }
    col
}

/// The heading helper functions at one decision pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeadingTerms {
    pub stay: f64,
    /// `(minus, plus)` pairs for the four heading regions.
    pub regions: [(f64, f64); 4],
}

pub fn heading_terms(sf: f64, sa: f64, p: f64) -> HeadingTerms {
    let x = (sa - STEP_ASIDE_CENTER as f64) / 5.0;
    let f = sf / 6.0;
    let pos = p * x.max(0.0);
    let neg = -p * x.min(0.0);
    let fwd = (1.0 - p) * f;
    HeadingTerms {
        stay: p * (1.0 - x.abs()) + (1.0 - p) * (1.0 - f),
        regions: [
            (pos + fwd, neg),
            (neg + fwd, pos),
            (neg, pos + fwd),
            (pos, neg + fwd),
        ],
    }
}

fn heading_region(bin: usize) -> usize {
    match bin {
        0..=2 => 0,
        3..=5 => 1,
        6..=7 => 2,
        _ => 3,
    }
}

pub fn heading_column(heading_t: usize, sf: usize, sa: usize) -> Vec<f64> {
    let terms = heading_terms(sf as f64, sa as f64, HEADING_ASIDE_WEIGHT);
    let (minus, plus) = terms.regions[heading_region(heading_t)];
    let n = HEADING_BINS;
    let mut col = vec![0.0; n];
    col[heading_t] = terms.stay;
    col[(heading_t + n - 1) % n] += minus;
    col[(heading_t + 1) % n] += plus;
    col
}

pub fn target_visual_column(tvf_t: usize, sa: usize) -> Vec<f64> {
    if tvf_t == 0 {
        vec![0.9, 0.1]
    } else {
        let x = aside_share(sa).abs();
        vec![0.4 * x + 0.01 * (1.0 - x), 0.6 * x + 0.99 * (1.0 - x)]
    }
}

/// `P(BT_{t+1} = 0 | BT_t = 0)`: sidestepping is discouraged.
fn contact_free(sa: usize) -> f64 {
    if sa == STEP_ASIDE_CENTER {
        0.99
    } else {
        0.95
    }
}

/// `P(BT_{t+1} = 0 | BT_t = 1)`: biased toward positive sidesteps.
fn contact_release(sa: usize) -> f64 {
    match sa.cmp(&STEP_ASIDE_CENTER) {
        std::cmp::Ordering::Less => 0.5,
        std::cmp::Ordering::Equal => 0.6,
        std::cmp::Ordering::Greater => 0.65,
    }
}

pub fn barrier_tactile_column(bt_t: usize, sa: usize) -> Vec<f64> {
    let stay_clear = if bt_t == 0 {
        contact_free(sa)
    } else {
        contact_release(sa)
    };
    vec![stay_clear, 1.0 - stay_clear]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_examples() {
        assert_eq!(depth_column(2, 0), vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(depth_column(1, 3), vec![0.5, 0.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn heading_matrix_layout() {
        // Spot-check entries of the printed 11x11 matrix at SF = 3, SA = 8.
        let (sf, sa) = (3, 8);
        let t = heading_terms(3.0, 8.0, HEADING_ASIDE_WEIGHT);
        let col = |j| heading_column(j, sf, sa);
        assert_eq!(col(0)[0], t.stay);
        assert_eq!(col(0)[1], t.regions[0].1); // F1+
        assert_eq!(col(0)[10], t.regions[0].0); // F1-
        assert_eq!(col(3)[2], t.regions[1].0); // F2-
        assert_eq!(col(5)[6], t.regions[1].1); // F2+
        assert_eq!(col(6)[7], t.regions[2].1); // F3+
        assert_eq!(col(7)[6], t.regions[2].0); // F3-
        assert_eq!(col(10)[0], t.regions[3].1); // F4+
        assert_eq!(col(10)[9], t.regions[3].0); // F4-
    }

    #[test]
    fn contact_examples() {
        assert!((barrier_tactile_column(0, 5)[1] - 0.01).abs() < 1e-15);
        assert_eq!(barrier_tactile_column(1, 2), vec![0.5, 0.5]);
        assert!((barrier_tactile_column(1, 9)[0] - 0.65).abs() < 1e-15);
    }
}
