//! Probability-simplex primitives: validated score vectors, entropy,
//! KL divergence, and deterministic argmax.
//!
//! All logarithms are base 2, so every information quantity in this crate
//! is in bits.

use crate::error::{Error, Result};
use crate::scalar::{as_f64, cast, Scalar};

/// Floor applied to raw scores before renormalization, so downstream
/// logarithms never see an exact zero.
pub const SCORE_FLOOR: f64 = 1e-12;

/// Tolerance for the sum-to-one check on already-normalized input.
pub const SIMPLEX_SUM_TOLERANCE: f64 = 1e-9;

/// A point on the probability simplex: non-negative entries summing to one
/// within [`SIMPLEX_SUM_TOLERANCE`].
///
/// Score vectors over classes require at least two entries (enforced by
/// [`crate::capacity::ScoreSet`] and [`crate::tensor::ScoreTensor`]); the
/// type itself also serves as a weighting over models, where a single entry
/// is legitimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector<S> {
    values: Vec<S>,
}

impl<S: Scalar> ProbVector<S> {
    /// Validates an already-normalized distribution. Exact zeros are allowed.
    pub fn new(values: Vec<S>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        let mut sum = S::zero();
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "non-finite entry {v} at index {k}"
                )));
            }
            if v < S::zero() {
                return Err(Error::InvalidDistribution(format!(
                    "negative entry {v} at index {k}"
                )));
            }
            sum = sum + v;
        }
        if (sum - S::one()).abs() > cast(SIMPLEX_SUM_TOLERANCE) {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {} (expected 1 within {SIMPLEX_SUM_TOLERANCE})",
                as_f64(sum)
            )));
        }
        Ok(Self { values })
    }

    /// Builds a distribution from raw non-negative scores: entries below
    /// [`SCORE_FLOOR`] are raised to the floor and the vector is
    /// renormalized. The result never contains an exact zero.
    pub fn from_scores(values: Vec<S>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        let floor: S = cast(SCORE_FLOOR);
        let mut sum = S::zero();
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "non-finite entry {v} at index {k}"
                )));
            }
            if v < S::zero() {
                return Err(Error::InvalidDistribution(format!(
                    "negative entry {v} at index {k}"
                )));
            }
            sum = sum + v;
        }
        if sum <= S::zero() {
            return Err(Error::InvalidDistribution(
                "raw scores sum to zero".into(),
            ));
        }
        let mut clipped: Vec<S> = values
            .into_iter()
            .map(|v| if v < floor { floor } else { v })
            .collect();
        let total: S = clipped.iter().copied().sum();
        for v in &mut clipped {
            *v = *v / total;
        }
        Ok(Self { values: clipped })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    /// True when every entry matches `other` within `tolerance`.
    pub fn approx_eq(&self, other: &Self, tolerance: S) -> bool {
        self.dim() == other.dim()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(&a, &b)| (a - b).abs() <= tolerance)
    }
}

/// KL divergence `D(p ‖ q) = Σ_k p_k log2(p_k / q_k)` in bits.
///
/// Uses the convention `0·log(0/x) = 0`; returns `S::infinity()` when some
/// `p_k > 0` meets `q_k = 0` exactly (cannot happen for vectors built with
/// [`ProbVector::from_scores`]).
pub fn kl_divergence<S: Scalar>(p: &ProbVector<S>, q: &ProbVector<S>) -> Result<S> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            actual: q.dim(),
        });
    }
    let mut acc = S::zero();
    for (&pk, &qk) in p.values().iter().zip(q.values()) {
        if pk == S::zero() {
            continue;
        }
        if qk == S::zero() {
            return Ok(S::infinity());
        }
        acc = acc + pk * (pk / qk).log2();
    }
    // Rounding can push the sum a hair below zero when p == q.
    Ok(acc.max(S::zero()))
}

/// Shannon entropy `H(p) = −Σ_k p_k log2 p_k` in bits; `0 ≤ H(p) ≤ log2 c`.
pub fn entropy<S: Scalar>(p: &ProbVector<S>) -> S {
    let mut acc = S::zero();
    for &pk in p.values() {
        if pk > S::zero() {
            acc = acc - pk * pk.log2();
        }
    }
    acc.max(S::zero())
}

/// Index of the largest entry; ties break to the lowest index so that
/// thresholded predictions are reproducible.
pub fn argmax_class<S: Scalar>(p: &ProbVector<S>) -> usize {
    let mut best = 0;
    for (k, &v) in p.values().iter().enumerate().skip(1) {
        if v > p.values()[best] {
            best = k;
        }
    }
    best
}
