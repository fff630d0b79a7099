//! Scalar-generic statistics kernels shared by the agents, the evaluation
//! laboratory, and the theory calculators.

use std::collections::BTreeMap;

use crate::num::{count, real, Real};
use crate::{Error, Result};

/// Shannon entropy in bits over the character frequency distribution of `s`.
///
/// The empty string has no distribution and is an error to the caller; it
/// is never silently treated as zero entropy.
pub fn shannon_entropy<F: Real>(s: &str) -> Result<F> {
    if s.is_empty() {
        return Err(Error::invalid("shannon_entropy: empty string"));
    }
    // BTreeMap keeps the summation order stable so results are
    // bit-reproducible across runs.
    let mut freq: BTreeMap<char, usize> = BTreeMap::new();
    for ch in s.chars() {
        *freq.entry(ch).or_insert(0) += 1;
    }
    let n: F = count(s.chars().count());
    let mut entropy = F::zero();
    for &c in freq.values() {
        let p = count::<F>(c) / n;
        entropy -= p * p.log2();
    }
    // -0.0 shows up for single-symbol strings.
    Ok(if entropy == F::zero() { F::zero() } else { entropy })
}

/// Halstead volume `V = N * log2(eta)` where `N` is the total token count
/// and `eta` the distinct-token vocabulary size.
pub fn halstead_volume<F: Real>(total_tokens: usize, distinct_tokens: usize) -> F {
    if total_tokens == 0 || distinct_tokens == 0 {
        return F::zero();
    }
    count::<F>(total_tokens) * count::<F>(distinct_tokens).log2()
}

/// Pearson correlation of two equal-length samples.
///
/// Returns `None` when fewer than two points are available or when either
/// side is constant (zero variance), which the callers report explicitly
/// rather than coercing to a number.
pub fn pearson<F: Real>(xs: &[F], ys: &[F]) -> Option<F> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n: F = count(xs.len());
    let mean_x = xs.iter().copied().sum::<F>() / n;
    let mean_y = ys.iter().copied().sum::<F>() / n;
    let mut cov = F::zero();
    let mut var_x = F::zero();
    let mut var_y = F::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == F::zero() || var_y == F::zero() {
        return None;
    }
    Some(cov / (var_x * var_y).sqrt())
}

/// Complementary error function (Abramowitz & Stegun 7.1.26, |err| <= 1.5e-7).
pub fn erfc<F: Real>(x: f64) -> F {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * z);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let tail = poly * (-z * z).exp();
    real(if x >= 0.0 { tail } else { 2.0 - tail })
}

/// Upper tail probability of the chi-squared distribution with one degree
/// of freedom: `P(X >= x) = erfc(sqrt(x / 2))`.
pub fn chi2_tail_1df<F: Real>(x: f64) -> F {
    if x <= 0.0 {
        return F::one();
    }
    erfc((x / 2.0).sqrt())
}
