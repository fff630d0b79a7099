//! Information-theoretic and sample-complexity calculators: PAC sample
//! size, generalization bounds, plug-in mutual information between agent
//! decisions and ground truth, and the diminishing-returns check over a
//! marginal-gain sequence.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::num::{count, real, Real};
use crate::{Error, Result, Score};

/// Query for the finite-hypothesis-class sample size bound.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PacQuery<F = Score> {
    pub hypothesis_count: u64,
    pub epsilon: F,
    pub delta: F,
}

impl<F: Real> PacQuery<F> {
    fn validate(&self) -> Result<()> {
        if self.hypothesis_count == 0 {
            return Err(Error::invalid("hypothesis count must be positive"));
        }
        let one = F::one();
        if self.epsilon <= F::zero() || self.epsilon >= one {
            return Err(Error::invalid("epsilon must lie in (0, 1)"));
        }
        if self.delta <= F::zero() || self.delta >= one {
            return Err(Error::invalid("delta must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Minimum sample count for error `epsilon` at confidence `1 - delta`
/// over a finite hypothesis class:
/// `n = ceil((ln |H| + ln(1/delta)) / (2 epsilon^2))`.
pub fn pac_sample_size<F: Real>(query: &PacQuery<F>) -> Result<u64> {
    query.validate()?;
    let h: F = count(query.hypothesis_count as usize);
    let numerator = h.ln() + query.delta.recip().ln();
    let denominator = real::<F>(2.0) * query.epsilon * query.epsilon;
    let n = (numerator / denominator).ceil();
    Ok(n.to_f64().map(|x| x.max(0.0) as u64).unwrap_or(0).max(1))
}

/// Query for the generalization upper bound.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GeneralizationQuery<F = Score> {
    pub empirical_error: F,
    pub n: u64,
    pub hypothesis_count: u64,
    pub delta: F,
}

/// Upper bound on the true error with probability `1 - delta`:
/// `R_emp + sqrt((ln |H| + ln(1/delta)) / (2n))`.
pub fn generalization_bound<F: Real>(query: &GeneralizationQuery<F>) -> Result<F> {
    if query.n == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    if query.hypothesis_count == 0 {
        return Err(Error::invalid("hypothesis count must be positive"));
    }
    if query.empirical_error < F::zero() || query.empirical_error > F::one() {
        return Err(Error::invalid("empirical error must lie in [0, 1]"));
    }
    if query.delta <= F::zero() || query.delta >= F::one() {
        return Err(Error::invalid("delta must lie in (0, 1)"));
    }
    let h: F = count(query.hypothesis_count as usize);
    let gap = ((h.ln() + query.delta.recip().ln())
        / (real::<F>(2.0) * count::<F>(query.n as usize)))
    .sqrt();
    Ok(query.empirical_error + gap)
}

/// Shannon entropy of a binary label vector, in bits.
pub fn label_entropy<F: Real>(labels: &[bool]) -> F {
    let n = labels.len();
    if n == 0 {
        return F::zero();
    }
    let positives = labels.iter().filter(|&&b| b).count();
    let mut h = F::zero();
    for group in [positives, n - positives] {
        if group > 0 {
            let p = count::<F>(group) / count::<F>(n);
            h -= p * p.log2();
        }
    }
    if h == F::zero() {
        F::zero()
    } else {
        h
    }
}

/// Plug-in mutual information `I(A_S; B)` in bits between the joint
/// decision tuple of an agent set and the binary label, estimated from
/// the empirical joint distribution.
///
/// `decisions` holds one vector per agent in the set, aligned with
/// `labels`. The estimate is the maximum-likelihood one, with no bias
/// correction; at these sample sizes it supports directional checks, not
/// precise magnitudes.
pub fn mutual_information<F: Real>(decisions: &[Vec<bool>], labels: &[bool]) -> Result<F> {
    let n = labels.len();
    if n < 2 {
        return Err(Error::invalid("mutual information needs at least 2 samples"));
    }
    if decisions.is_empty() {
        return Err(Error::invalid("at least one agent decision vector required"));
    }
    if decisions.iter().any(|d| d.len() != n) {
        return Err(Error::invalid("decision vectors must align with labels"));
    }
    if decisions.len() > 16 {
        return Err(Error::invalid("joint tuples limited to 16 agents"));
    }

    // Joint tuple encoded as a bitmask per sample.
    let mut joint: BTreeMap<(u32, bool), usize> = BTreeMap::new();
    let mut tuple_marginal: BTreeMap<u32, usize> = BTreeMap::new();
    for (idx, &label) in labels.iter().enumerate() {
        let mut key = 0u32;
        for (bit, agent) in decisions.iter().enumerate() {
            if agent[idx] {
                key |= 1 << bit;
            }
        }
        *joint.entry((key, label)).or_insert(0) += 1;
        *tuple_marginal.entry(key).or_insert(0) += 1;
    }

    let nf: F = count(n);
    let positives = labels.iter().filter(|&&b| b).count();
    let label_marginal = |b: bool| -> F {
        count::<F>(if b { positives } else { n - positives }) / nf
    };
    let mut mi = F::zero();
    for (&(key, label), &c) in &joint {
        let p_joint = count::<F>(c) / nf;
        let p_tuple = count::<F>(tuple_marginal[&key]) / nf;
        let p_label = label_marginal(label);
        if p_joint > F::zero() {
            mi += p_joint * (p_joint / (p_tuple * p_label)).log2();
        }
    }
    // Clamp floating dust; the plug-in estimate is nonnegative.
    Ok(mi.max(F::zero()))
}

/// One agent-addition trajectory: the first entry is the first agent's
/// solo value, each later entry the gain from adding one more agent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginalGainSeries {
    pub agents: Vec<String>,
    pub gains: Vec<Score>,
}

/// Diminishing-returns verdict over a gain sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiminishingReturnsReport {
    pub monotone: bool,
    /// 1-based indices of entries that exceed their predecessor.
    pub violations: Vec<usize>,
    pub gains: Vec<Score>,
}

/// Check that gains never increase after the first entry.
pub fn diminishing_returns_check(series: &MarginalGainSeries) -> DiminishingReturnsReport {
    let mut violations = Vec::new();
    for i in 1..series.gains.len() {
        if series.gains[i] > series.gains[i - 1] {
            violations.push(i + 1);
        }
    }
    DiminishingReturnsReport {
        monotone: violations.is_empty(),
        violations,
        gains: series.gains.clone(),
    }
}

/// Pearson correlation between two agents' decisions restricted to the
/// samples with a given label: a diagnostic for the conditional
/// independence premise, reported but never asserted.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionalCorrelationReport {
    pub pairs: Vec<ConditionalCorrelationEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionalCorrelationEntry {
    pub agent_a: String,
    pub agent_b: String,
    /// rho(D_a, D_b | B = 1), absent when undefined on the slice.
    pub given_buggy: Option<Score>,
    /// rho(D_a, D_b | B = 0).
    pub given_correct: Option<Score>,
}

pub fn conditional_correlation(
    names: &[String],
    decisions: &[Vec<bool>],
    labels: &[bool],
) -> Result<ConditionalCorrelationReport> {
    if names.len() != decisions.len() {
        return Err(Error::invalid("one name per decision vector required"));
    }
    if decisions.iter().any(|d| d.len() != labels.len()) {
        return Err(Error::invalid("decision vectors must align with labels"));
    }
    let slice_corr = |a: &[bool], b: &[bool], keep: bool| -> Option<Score> {
        let xs: Vec<Score> = a
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == keep)
            .map(|(&d, _)| if d { 1.0 } else { 0.0 })
            .collect();
        let ys: Vec<Score> = b
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == keep)
            .map(|(&d, _)| if d { 1.0 } else { 0.0 })
            .collect();
        crate::stats::pearson(&xs, &ys)
    };
    let mut pairs = Vec::new();
    for i in 0..decisions.len() {
        for j in (i + 1)..decisions.len() {
            pairs.push(ConditionalCorrelationEntry {
                agent_a: names[i].clone(),
                agent_b: names[j].clone(),
                given_buggy: slice_corr(&decisions[i], &decisions[j], true),
                given_correct: slice_corr(&decisions[i], &decisions[j], false),
            });
        }
    }
    Ok(ConditionalCorrelationReport { pairs })
}
