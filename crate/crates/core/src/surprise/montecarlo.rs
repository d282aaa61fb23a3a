//! Sampling harnesses for the large-sample behaviour of the surprise
//! divergence: asymptotic normality, consistency of the empirical
//! dispersion, and the size of the divergence test under the null.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution as _};
use serde::{Deserialize, Serialize};

use super::{
    information_dispersion, normal_cdf, surprise_divergence, Distribution,
    SurpriseVerdict, ZERO_DISPERSION,
};
use crate::error::{Error, Result};

/// Kolmogorov-Smirnov comparison of a sample against `N(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub samples: usize,
}

/// Multinomial counts of `n` i.i.d. draws from `p`, via a chain of
/// conditional binomials.
pub fn sample_counts<R: Rng + ?Sized>(p: &Distribution, n: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; p.len()];
    let mut remaining = n;
    let mut mass_left = 1.0;
    let last = p.len() - 1;
    for (i, &pi) in p.probs().iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i == last || mass_left <= 0.0 {
            counts[i] = remaining;
            break;
        }
        let share = (pi / mass_left).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, share)
            .map(|b| b.sample(rng))
            .unwrap_or(0);
        counts[i] = k;
        remaining -= k;
        mass_left -= pi;
    }
    counts
}

fn empirical(p: &Distribution, counts: &[u64]) -> Result<Distribution> {
    let n: u64 = counts.iter().sum();
    let probs = counts.iter().map(|&c| c as f64 / n as f64).collect();
    Distribution::with_domain(p.domain().clone(), probs)
}

/// `sqrt(n) * D_S(P_hat || P)` for one sample of size `n`.
fn scaled_divergence(p: &Distribution, counts: &[u64]) -> Result<f64> {
    let n: u64 = counts.iter().sum();
    let p_hat = empirical(p, counts)?;
    Ok((n as f64).sqrt() * surprise_divergence(&p_hat, p)?)
}

/// Draws `reps` samples of size `n` from `p`, standardizes each through the
/// surprise divergence and compares the statistics with `N(0, 1)`.
///
/// Replication `r` uses its own ChaCha stream derived from `(seed, r)`, so
/// the outcome does not depend on evaluation order.
pub fn normality_mc_check(p: &Distribution, n: u64, reps: usize, seed: u64) -> Result<KsOutcome> {
    if information_dispersion(p) <= ZERO_DISPERSION {
        return Err(Error::DegenerateReference);
    }
    if n < 100 || reps < 100 {
        return Err(Error::InvalidArgument(format!(
            "need n >= 100 and reps >= 100, got n = {n}, reps = {reps}"
        )));
    }
    let mut stats = Vec::with_capacity(reps);
    for r in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let counts = sample_counts(p, n, &mut rng);
        stats.push(scaled_divergence(p, &counts)?);
    }
    Ok(ks_against_standard_normal(&mut stats))
}

/// One-sample KS test against the standard normal.
pub fn ks_against_standard_normal(sample: &mut [f64]) -> KsOutcome {
    sample.sort_by(|a, b| a.total_cmp(b));
    let n = sample.len();
    let nf = n as f64;
    let statistic = sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            (f - i as f64 / nf).abs().max(((i + 1) as f64 / nf - f).abs())
        })
        .fold(0.0, f64::max);
    let sqrt_n = nf.sqrt();
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * statistic;
    KsOutcome {
        statistic,
        p_value: kolmogorov_survival(lambda),
        samples: n,
    }
}

/// `P(K > lambda)` for the Kolmogorov distribution.
fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=200 {
        let jf = j as f64;
        let term = sign * (-2.0 * jf * jf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Unbiased sample variance of the surprisal `-ln P(X_i)` over a sample
/// summarised by its counts.
pub fn empirical_dispersion(p: &Distribution, counts: &[u64]) -> Result<f64> {
    let n: u64 = counts.iter().sum();
    if n < 2 {
        return Err(Error::InsufficientData("need at least two draws".into()));
    }
    let mut mean = 0.0;
    for (&c, &pi) in counts.iter().zip(p.probs()) {
        if c > 0 {
            mean += c as f64 * -pi.ln();
        }
    }
    mean /= n as f64;
    let mut ss = 0.0;
    for (&c, &pi) in counts.iter().zip(p.probs()) {
        if c > 0 {
            let d = -pi.ln() - mean;
            ss += c as f64 * d * d;
        }
    }
    Ok(ss / (n - 1) as f64)
}

/// Goodness-of-fit test of a whole sample against `p`: rejects when
/// `sqrt(n) |D_S(P_hat || P)|` exceeds the two-sided normal quantile.
pub fn sample_surprise_test(p: &Distribution, counts: &[u64], alpha: f64) -> Result<SurpriseVerdict> {
    if counts.len() != p.len() {
        return Err(Error::DomainMismatch);
    }
    let stat = scaled_divergence(p, counts)?;
    SurpriseVerdict::from_coefficient(stat.abs(), alpha)
}

/// Absolute gap between the empirical and true dispersion for a fresh
/// sample of size `n`; used to check consistency.
pub fn dispersion_error<R: Rng + ?Sized>(p: &Distribution, n: u64, rng: &mut R) -> Result<f64> {
    let counts = sample_counts(p, n, rng);
    Ok((empirical_dispersion(p, &counts)? - information_dispersion(p)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(p: &[f64]) -> Distribution {
        Distribution::from_probs(p.to_vec()).unwrap()
    }

    #[test]
    fn counts_sum_to_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = sample_counts(&d(&[0.2, 0.0, 0.5, 0.3]), 1000, &mut rng);
        assert_eq!(c.iter().sum::<u64>(), 1000);
        assert_eq!(c[1], 0);
    }

    #[test]
    fn degenerate_reference_rejected() {
        assert!(matches!(
            normality_mc_check(&d(&[0.5, 0.5]), 1000, 100, 1),
            Err(Error::DegenerateReference)
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let p = d(&[0.7, 0.2, 0.1]);
        let a = normality_mc_check(&p, 1000, 100, 42).unwrap();
        let b = normality_mc_check(&p, 1000, 100, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ks_of_exact_quantiles_is_small() {
        // Midpoint quantiles of N(0,1) approximate the CDF as closely as a
        // sample of this size can.
        let mut xs: Vec<f64> = (0..200)
            .map(|i| {
                let u = (i as f64 + 0.5) / 200.0;
                // bisection inverse of the normal CDF
                let (mut lo, mut hi) = (-10.0, 10.0);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if normal_cdf(mid) < u {
                        lo = mid
                    } else {
                        hi = mid
                    }
                }
                lo
            })
            .collect();
        let ks = ks_against_standard_normal(&mut xs);
        assert!(ks.statistic <= 0.0026, "{ks:?}");
        assert!(ks.p_value > 0.99);
    }

    #[test]
    fn kolmogorov_tail_values() {
        // Reference values of the asymptotic Kolmogorov distribution.
        assert!((kolmogorov_survival(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_survival(1.628) - 0.01).abs() < 1e-3);
    }
}
