//! Accuracy of "n out of N" hard-decision voting over independent detectors.
//!
//! Detector `i` reports "abnormal" with probability `P_i` when the target is
//! normal, and reports "normal" with probability `Q_i` when the target is
//! abnormal. Both hypotheses are equally likely a priori. The fusion center
//! declares "abnormal" iff at least `n` detectors say so, giving
//!
//! ```text
//! Theta(n) = 1/2 Pr[#abnormal votes <= n-1 | normal]
//!          + 1/2 Pr[#normal votes   <= N-n | abnormal]
//! ```
//!
//! Each vote count is Poisson-binomial, evaluated here by convolving the
//! Bernoulli PMFs. [`binomial_accuracy`] replaces the heterogeneous rates
//! by their means, which admits the closed-form threshold of
//! [`optimal_threshold`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest profile accepted by [`brute_force_accuracy`].
pub const MAX_ENUMERATION: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("voting threshold {n} outside 1..={count}")]
    InvalidThreshold { n: usize, count: usize },
    #[error("empty fusion profile")]
    EmptyProfile,
    #[error("{count} detectors is too many for enumeration (max {MAX_ENUMERATION})")]
    TooLargeForEnumeration { count: usize },
    #[error("degenerate mean rates P={p}, Q={q}")]
    DegenerateRates { p: f64, q: f64 },
}

/// Error rates of the detectors taking part in a vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionProfile {
    /// Probability of an "abnormal" vote under a normal target.
    pub p: Vec<f64>,
    /// Probability of a "normal" vote under an abnormal target.
    pub q: Vec<f64>,
}

impl FusionProfile {
    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Self {
        assert_eq!(p.len(), q.len(), "rate vectors must have equal length");
        FusionProfile { p, q }
    }

    pub fn homogeneous(n: usize, p: f64, q: f64) -> Self {
        FusionProfile::new(vec![p; n], vec![q; n])
    }

    /// Restrict full per-DFR rate tables to the DFRs in `members`.
    pub fn subset(p: &[f64], q: &[f64], members: &[usize]) -> Self {
        FusionProfile::new(
            members.iter().map(|&i| p[i]).collect(),
            members.iter().map(|&i| q[i]).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn mean_p(&self) -> f64 {
        mean(&self.p)
    }

    pub fn mean_q(&self) -> f64 {
        mean(&self.q)
    }

    fn check_threshold(&self, n: usize) -> Result<(), FusionError> {
        if self.is_empty() {
            return Err(FusionError::EmptyProfile);
        }
        if n < 1 || n > self.len() {
            return Err(FusionError::InvalidThreshold {
                n,
                count: self.len(),
            });
        }
        Ok(())
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// PMF of the number of successes among independent Bernoulli trials.
pub fn poisson_binomial_pmf(probs: &[f64]) -> Vec<f64> {
    let mut pmf = Vec::with_capacity(probs.len() + 1);
    pmf.push(1.0);
    for &p in probs {
        pmf.push(0.0);
        for k in (1..pmf.len()).rev() {
            pmf[k] = pmf[k] * (1.0 - p) + pmf[k - 1] * p;
        }
        pmf[0] *= 1.0 - p;
    }
    pmf
}

fn cdf_upto(pmf: &[f64], upto: usize) -> f64 {
    pmf[..=upto].iter().sum()
}

/// Exact voting accuracy for threshold `n`.
pub fn exact_accuracy(profile: &FusionProfile, n: usize) -> Result<f64, FusionError> {
    profile.check_threshold(n)?;
    let big_n = profile.len();
    let normal = cdf_upto(&poisson_binomial_pmf(&profile.p), n - 1);
    let abnormal = cdf_upto(&poisson_binomial_pmf(&profile.q), big_n - n);
    Ok(0.5 * normal + 0.5 * abnormal)
}

/// Exact accuracy for all thresholds `1..=N` (index 0 holds `n = 1`).
pub fn exact_accuracy_curve(profile: &FusionProfile) -> Result<Vec<f64>, FusionError> {
    if profile.is_empty() {
        return Err(FusionError::EmptyProfile);
    }
    let big_n = profile.len();
    let pmf_p = poisson_binomial_pmf(&profile.p);
    let pmf_q = poisson_binomial_pmf(&profile.q);
    Ok((1..=big_n)
        .map(|n| 0.5 * cdf_upto(&pmf_p, n - 1) + 0.5 * cdf_upto(&pmf_q, big_n - n))
        .collect())
}

/// Accuracy by enumerating all `2^N` vote patterns under each hypothesis.
pub fn brute_force_accuracy(profile: &FusionProfile, n: usize) -> Result<f64, FusionError> {
    profile.check_threshold(n)?;
    let big_n = profile.len();
    if big_n > MAX_ENUMERATION {
        return Err(FusionError::TooLargeForEnumeration { count: big_n });
    }
    let mut correct_normal = 0.0;
    let mut correct_abnormal = 0.0;
    for votes in 0u32..(1 << big_n) {
        // bit i set: detector i votes "abnormal"
        let abnormal_votes = votes.count_ones() as usize;
        let mut pr_normal = 1.0;
        let mut pr_abnormal = 1.0;
        for i in 0..big_n {
            let says_abnormal = votes >> i & 1 == 1;
            pr_normal *= if says_abnormal {
                profile.p[i]
            } else {
                1.0 - profile.p[i]
            };
            pr_abnormal *= if says_abnormal {
                1.0 - profile.q[i]
            } else {
                profile.q[i]
            };
        }
        if abnormal_votes >= n {
            correct_abnormal += pr_abnormal;
        } else {
            correct_normal += pr_normal;
        }
    }
    Ok(0.5 * correct_normal + 0.5 * correct_abnormal)
}

/// `Pr[Binomial(N, p) <= upto]`, summed in log space so that large `N` does
/// not overflow the binomial coefficients.
pub fn binomial_cdf(trials: usize, p: f64, upto: usize) -> f64 {
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return if upto >= trials { 1.0 } else { 0.0 };
    }
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let mut ln_choose = 0.0;
    let mut total = 0.0;
    for l in 0..=upto.min(trials) {
        if l > 0 {
            ln_choose += ((trials - l + 1) as f64).ln() - (l as f64).ln();
        }
        total += (ln_choose + l as f64 * ln_p + (trials - l) as f64 * ln_q).exp();
    }
    total.min(1.0)
}

/// Surrogate accuracy with every detector replaced by the mean rates.
pub fn binomial_accuracy(profile: &FusionProfile, n: usize) -> Result<f64, FusionError> {
    profile.check_threshold(n)?;
    let big_n = profile.len();
    Ok(0.5 * binomial_cdf(big_n, profile.mean_p(), n - 1)
        + 0.5 * binomial_cdf(big_n, profile.mean_q(), big_n - n))
}

fn check_mean_rates(profile: &FusionProfile) -> Result<(f64, f64), FusionError> {
    if profile.is_empty() {
        return Err(FusionError::EmptyProfile);
    }
    let (p, q) = (profile.mean_p(), profile.mean_q());
    let inside = |r: f64| r > 0.0 && r < 1.0;
    if !inside(p) || !inside(q) {
        return Err(FusionError::DegenerateRates { p, q });
    }
    Ok((p, q))
}

/// Ratio `ln(P / (1-Q)) / ln(Q / (1-P))` of the mean rates.
pub fn threshold_alpha(profile: &FusionProfile) -> Result<f64, FusionError> {
    let (p, q) = check_mean_rates(profile)?;
    // both logarithms are negative exactly when P + Q < 1
    if p + q >= 1.0 {
        return Err(FusionError::DegenerateRates { p, q });
    }
    Ok((p / (1.0 - q)).ln() / (q / (1.0 - p)).ln())
}

/// Closed-form voting threshold `min(N, ceil(N / (1 + alpha)))` that
/// maximizes the binomial surrogate, clamped to `1..=N`.
pub fn optimal_threshold(profile: &FusionProfile) -> Result<usize, FusionError> {
    let alpha = threshold_alpha(profile)?;
    let big_n = profile.len();
    let n = (big_n as f64 / (1.0 + alpha)).ceil();
    Ok((n as usize).clamp(1, big_n))
}

fn gap_term(rates: &[f64], mean: f64) -> f64 {
    let big_n = rates.len() as f64;
    let spread: f64 = rates.iter().map(|r| (r - mean).powi(2)).sum();
    let scale = big_n * (1.0 - mean.powf(big_n + 1.0) - (1.0 - mean).powf(big_n + 1.0))
        / ((big_n + 1.0) * mean * (1.0 - mean));
    scale * spread
}

/// Upper bound on `1/2 sum_n |Theta(n) - Theta_hat(n)|`.
pub fn gap_bound(profile: &FusionProfile) -> Result<f64, FusionError> {
    let (p, q) = check_mean_rates(profile)?;
    Ok(gap_term(&profile.p, p) + gap_term(&profile.q, q))
}

/// Threshold maximizing the exact accuracy; ties go to the smaller `n`.
pub fn best_exact_threshold(profile: &FusionProfile) -> Result<usize, FusionError> {
    Ok(argmax_first(&exact_accuracy_curve(profile)?) + 1)
}

/// Threshold maximizing the binomial surrogate; ties go to the smaller `n`.
pub fn best_binomial_threshold(profile: &FusionProfile) -> Result<usize, FusionError> {
    let curve = (1..=profile.len())
        .map(|n| binomial_accuracy(profile, n))
        .collect::<Result<Vec<_>, _>>()?;
    if curve.is_empty() {
        return Err(FusionError::EmptyProfile);
    }
    Ok(argmax_first(&curve) + 1)
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
