//! Information measures and the surprise calculus built on them.
//!
//! All logarithms are natural. Quantities that are unbounded (a
//! divergence against a reference that gives an observed outcome zero mass,
//! say) are reported as `f64::INFINITY`; that sentinel orders above every
//! finite value and is never produced as `NaN`.

mod distribution;
pub mod montecarlo;

use serde::{Deserialize, Serialize};
use libm::{erf, erfc};

pub use distribution::{Distribution, MASS_TOLERANCE};
pub use montecarlo::{
    empirical_dispersion, normality_mc_check, sample_counts, sample_surprise_test, KsOutcome,
};

use crate::error::{Error, Result};

/// Dispersion at or below this value is treated as exactly zero.
pub const ZERO_DISPERSION: f64 = 1e-24;

/// Surprisal differences at or below this value are treated as exactly zero.
const ZERO_NUMERATOR: f64 = 1e-12;

/// Default significance level of the per-variable surprise test.
pub const DEFAULT_ALPHA: f64 = 0.05;

fn surprisal(p: f64) -> f64 {
    -p.ln()
}

/// Shannon entropy `-Σ p ln p`, with `0 ln 0 = 0`.
pub fn entropy(p: &Distribution) -> f64 {
    p.probs()
        .iter()
        .filter(|&&pi| pi > 0.0)
        .map(|&pi| pi * surprisal(pi))
        .sum()
}

/// Variance of the surprisal `-ln P(X)` under `P`.
pub fn information_dispersion(p: &Distribution) -> f64 {
    let h = entropy(p);
    let v: f64 = p
        .probs()
        .iter()
        .filter(|&&pi| pi > 0.0)
        .map(|&pi| {
            let d = surprisal(pi) - h;
            pi * d * d
        })
        .sum();
    v.max(0.0)
}

/// Cross entropy `-Σ q ln p`; infinite when `q` puts mass where `p` has none.
pub fn cross_entropy(q: &Distribution, p: &Distribution) -> Result<f64> {
    if !q.same_domain(p) {
        return Err(Error::DomainMismatch);
    }
    let mut total = 0.0;
    for (&qi, &pi) in q.probs().iter().zip(p.probs()) {
        if qi == 0.0 {
            continue;
        }
        if pi == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += qi * surprisal(pi);
    }
    Ok(total)
}

/// Kullback-Leibler divergence of `q` from the reference `p`.
pub fn kl_divergence(q: &Distribution, p: &Distribution) -> Result<f64> {
    if !q.same_domain(p) {
        return Err(Error::DomainMismatch);
    }
    let mut total = 0.0;
    for (&qi, &pi) in q.probs().iter().zip(p.probs()) {
        if qi == 0.0 {
            continue;
        }
        if pi == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += qi * (qi / pi).ln();
    }
    Ok(total.max(0.0))
}

/// Standardized cross-entropy gap `(H(Q,P) - H(P)) / sqrt(V_I(P))`.
///
/// A reference with zero dispersion yields 0 when the gap vanishes and
/// `+inf` otherwise.
pub fn surprise_divergence(q: &Distribution, p: &Distribution) -> Result<f64> {
    let cross = cross_entropy(q, p)?;
    if cross.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let gap = cross - entropy(p);
    standardize(gap, information_dispersion(p), false)
}

fn standardize(gap: f64, dispersion: f64, absolute: bool) -> Result<f64> {
    let gap = if absolute { gap.abs() } else { gap };
    if dispersion <= ZERO_DISPERSION {
        if gap.abs() <= ZERO_NUMERATOR {
            Ok(0.0)
        } else {
            Ok(f64::INFINITY)
        }
    } else {
        Ok(gap / dispersion.sqrt())
    }
}

/// Surprise of observing outcome `index` when `p` was expected:
/// `|-ln p_i - H(p)| / sqrt(V_I(p))`.
pub fn surprise_coefficient(index: usize, p: &Distribution) -> Result<f64> {
    let pi = p.prob(index)?;
    if pi == 0.0 {
        return Ok(f64::INFINITY);
    }
    let h = entropy(p);
    let v = information_dispersion(p);
    if v <= ZERO_DISPERSION {
        // Every supported outcome of a flat reference is equally expected.
        return Ok(0.0);
    }
    standardize(surprisal(pi) - h, v, true)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Two-sided normal p-value `2 (1 - Φ(c))` for a non-negative statistic.
pub fn two_sided_p_value(coefficient: f64) -> f64 {
    if coefficient.is_infinite() {
        return 0.0;
    }
    erfc(coefficient.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// CDF of the chi distribution with one degree of freedom: `2Φ(x) - 1`.
pub fn chi1_cdf(x: f64) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::NegativeInput(x));
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(erf(x / std::f64::consts::SQRT_2).clamp(0.0, 1.0))
}

/// Probability that no latent influence acted, given the signed utility
/// surprise `c_u`. Equals 1/2 at zero and is antisymmetric about it.
pub fn influence_probability(c_u: f64) -> f64 {
    if c_u.is_nan() {
        return 0.5;
    }
    let mass = chi1_cdf(c_u.abs()).unwrap_or(1.0);
    if c_u < 0.0 {
        0.5 - 0.5 * mass
    } else {
        0.5 + 0.5 * mass
    }
}

/// Outcome of the per-variable surprise hypothesis test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurpriseVerdict {
    pub coefficient: f64,
    pub p_value: f64,
    pub rejected: bool,
    pub alpha: f64,
}

impl SurpriseVerdict {
    pub fn from_coefficient(coefficient: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "significance level {alpha} outside (0, 1)"
            )));
        }
        let p_value = two_sided_p_value(coefficient);
        Ok(SurpriseVerdict {
            coefficient,
            p_value,
            rejected: p_value < alpha,
            alpha,
        })
    }
}

/// Tests `H0: the observed outcome is unsurprising under p`.
pub fn surprise_test(index: usize, p: &Distribution, alpha: f64) -> Result<SurpriseVerdict> {
    let coefficient = surprise_coefficient(index, p)?;
    SurpriseVerdict::from_coefficient(coefficient, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(p: &[f64]) -> Distribution {
        Distribution::from_probs(p.to_vec()).unwrap()
    }

    #[test]
    fn entropy_cases() {
        assert!((entropy(&d(&[0.25; 4])) - 4f64.ln()).abs() < 1e-12);
        assert_eq!(entropy(&d(&[1.0, 0.0])), 0.0);
        assert!((entropy(&d(&[0.75, 0.25])) - 0.562_335_144_618_808_4).abs() < 1e-12);
    }

    #[test]
    fn dispersion_cases() {
        assert!(information_dispersion(&d(&[0.2; 5])) < ZERO_DISPERSION);
        assert_eq!(information_dispersion(&d(&[1.0, 0.0])), 0.0);
        assert!((information_dispersion(&d(&[0.75, 0.25])) - 0.226_302_930_152_359_12).abs() < 1e-12);
    }

    #[test]
    fn kl_cases() {
        let p = d(&[0.3, 0.7]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let half = d(&[0.5, 0.5]);
        assert!((kl_divergence(&d(&[1.0, 0.0]), &half).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(kl_divergence(&half, &d(&[1.0, 0.0])).unwrap(), f64::INFINITY);
        let other = Distribution::new(vec!["x".into(), "y".into()], vec![0.5, 0.5]).unwrap();
        assert!(matches!(kl_divergence(&half, &other), Err(Error::DomainMismatch)));
    }

    #[test]
    fn divergence_cases() {
        let p = d(&[0.6, 0.3, 0.1]);
        assert_eq!(surprise_divergence(&p, &p).unwrap(), 0.0);
        // Flat reference: the cross entropy equals H(P), so nothing is surprising.
        assert_eq!(surprise_divergence(&d(&[1.0, 0.0]), &d(&[0.5, 0.5])).unwrap(), 0.0);
        let v = surprise_divergence(&d(&[0.9, 0.1]), &d(&[0.75, 0.25])).unwrap();
        assert!((v - (-0.346_410_161_513_775_46)).abs() < 1e-12, "{v}");
        assert_eq!(
            surprise_divergence(&d(&[0.5, 0.5]), &d(&[1.0, 0.0])).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn coefficient_cases() {
        assert_eq!(surprise_coefficient(2, &d(&[0.25; 4])).unwrap(), 0.0);
        assert!((surprise_coefficient(1, &d(&[0.9, 0.1])).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(surprise_coefficient(0, &d(&[1.0, 0.0])).unwrap(), 0.0);
        assert_eq!(surprise_coefficient(1, &d(&[1.0, 0.0])).unwrap(), f64::INFINITY);
        assert!(matches!(
            surprise_coefficient(5, &d(&[1.0, 0.0])),
            Err(Error::IndexOutOfRange { index: 5, len: 2 })
        ));
    }

    #[test]
    fn test_cases() {
        let v = SurpriseVerdict::from_coefficient(0.0, 0.05).unwrap();
        assert_eq!(v.p_value, 1.0);
        assert!(!v.rejected);
        let v = SurpriseVerdict::from_coefficient(1.959_963_984_540_054, 0.05).unwrap();
        assert!((v.p_value - 0.05).abs() < 1e-12);
        let v = surprise_test(1, &d(&[1.0, 0.0]), 0.05).unwrap();
        assert_eq!(v.p_value, 0.0);
        assert!(v.rejected);
        assert!(SurpriseVerdict::from_coefficient(1.0, 1.5).is_err());
    }

    #[test]
    fn chi_and_influence() {
        assert_eq!(chi1_cdf(0.0).unwrap(), 0.0);
        assert!((chi1_cdf(1.0).unwrap() - 0.682_689_492_137_085_9).abs() < 1e-12);
        assert!((chi1_cdf(40.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(chi1_cdf(-1.0), Err(Error::NegativeInput(_))));
        assert_eq!(influence_probability(0.0), 0.5);
        assert_eq!(influence_probability(f64::NEG_INFINITY), 0.0);
        assert_eq!(influence_probability(f64::INFINITY), 1.0);
        assert!((influence_probability(1.0) - 0.841_344_746_068_542_9).abs() < 1e-12);
    }
}
