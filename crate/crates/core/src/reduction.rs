//! Resolving multiplicity: reducing one sample's score set to at most `c`
//! rows without changing its capacity, and greedy selection of a small
//! model subset that preserves mean capacity across a dataset.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::capacity::{ba_capacity, BaConfig, ScoreSet};
use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};
use crate::simplex::SIMPLEX_SUM_TOLERANCE;
use crate::simplex::ProbVector;
use crate::tensor::ScoreTensor;

/// Outcome of a support reduction.
///
/// `conforming` is false when the reduced capacity deviates from the
/// original by more than `100 × tolerance` (the reduction tolerance); that
/// is reported rather than treated as an error.
#[derive(Debug, Clone)]
pub struct ReductionResult<S> {
    pub kept_model_ids: Vec<String>,
    pub original_capacity_bits: S,
    pub reduced_capacity_bits: S,
    /// Capacity-achieving weights of the kept rows, renormalized.
    pub support_weights: ProbVector<S>,
    pub conforming: bool,
}

/// Ordered greedy selection with the mean-capacity trace after each
/// addition.
#[derive(Debug, Clone)]
pub struct GreedySelection<S> {
    pub selected_model_ids: Vec<String>,
    pub capacity_trace: Vec<S>,
}

/// Keeps at most `c` rows that preserve the channel's capacity.
///
/// Runs the capacity solver, merges duplicate rows (the fixed point splits
/// weight arbitrarily among equal rows), keeps rows whose merged weight
/// exceeds `support_threshold`, caps the survivors at the `c` largest
/// weights, and recomputes capacity on the kept rows.
pub fn caratheodory_reduce<S: Scalar>(
    channel: &ScoreSet<S>,
    config: &BaConfig<S>,
    support_threshold: S,
) -> Result<ReductionResult<S>> {
    let m = channel.num_models();
    let c = channel.num_classes();
    let upper: S = S::one() / cast::<S>(m as f64);
    if !(support_threshold > S::zero()) || support_threshold > upper {
        return Err(Error::InvalidArgument(format!(
            "support_threshold must lie in (0, 1/m], got {support_threshold} for m = {m}"
        )));
    }

    let full = ba_capacity(channel, config);
    let weights = full.input_distribution.values();

    // Merge rows that are equal within the simplex tolerance; the group
    // keeps its lowest row index as representative.
    let eq_tol: S = cast(SIMPLEX_SUM_TOLERANCE);
    let rows = channel.rows();
    let mut groups: Vec<(usize, S)> = Vec::new();
    for (j, row) in rows.iter().enumerate() {
        match groups
            .iter_mut()
            .find(|(rep, _)| rows[*rep].approx_eq(row, eq_tol))
        {
            Some((_, w)) => *w = *w + weights[j],
            None => groups.push((j, weights[j])),
        }
    }

    let mut kept: Vec<(usize, S)> = groups
        .iter()
        .copied()
        .filter(|&(_, w)| w > support_threshold)
        .collect();
    if kept.is_empty() {
        // All merged weights tied at the threshold; keep the heaviest group.
        let heaviest = groups
            .iter()
            .copied()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
            .expect("at least one group exists");
        kept.push(heaviest);
    }
    if kept.len() > c {
        kept.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        kept.truncate(c);
    }
    kept.sort_by_key(|&(j, _)| j);

    let kept_rows: Vec<ProbVector<S>> = kept.iter().map(|&(j, _)| rows[j].clone()).collect();
    let kept_ids: Vec<String> = kept
        .iter()
        .map(|&(j, _)| channel.model_ids()[j].clone())
        .collect();
    let reduced_channel = ScoreSet::new(kept_rows, kept_ids.clone())?;
    let reduced = ba_capacity(&reduced_channel, config);

    let total: S = kept.iter().map(|&(_, w)| w).sum();
    let support_weights =
        ProbVector::new(kept.iter().map(|&(_, w)| w / total).collect::<Vec<S>>())?;

    let reduction_tolerance = cast::<S>(100.0) * config.tolerance;
    let deviation = (full.capacity_bits - reduced.capacity_bits).abs();

    Ok(ReductionResult {
        kept_model_ids: kept_ids,
        original_capacity_bits: full.capacity_bits,
        reduced_capacity_bits: reduced.capacity_bits,
        support_weights,
        conforming: deviation <= reduction_tolerance,
    })
}

/// Mean per-sample capacity of `subset` over the given samples.
fn mean_capacity<S: Scalar>(
    tensor: &ScoreTensor<S>,
    samples: &[usize],
    subset: &[usize],
    config: &BaConfig<S>,
) -> Result<S> {
    let total: S = samples
        .par_iter()
        .map(|&i| {
            tensor
                .score_set_for_sample(i, subset)
                .map(|set| ba_capacity(&set, config).capacity_bits)
        })
        .collect::<Result<Vec<S>>>()?
        .into_iter()
        .sum();
    Ok(total / cast::<S>(samples.len() as f64))
}

/// Greedily grows a model set of size `r` that maximizes mean per-sample
/// capacity across the dataset.
///
/// The first model is drawn with the seeded generator; every later step
/// scans the remaining candidates in ascending model-index order and adds
/// the one with the highest mean capacity (ties to the lowest index).
/// `sample_cap` optionally evaluates candidates on a seeded random subset
/// of samples to bound cost; `None` uses every sample.
pub fn greedy_select<S: Scalar>(
    tensor: &ScoreTensor<S>,
    model_subset: &[usize],
    r: usize,
    config: &BaConfig<S>,
    seed: u64,
    sample_cap: Option<usize>,
) -> Result<GreedySelection<S>> {
    if model_subset.is_empty() {
        return Err(Error::InvalidArgument("empty model subset".into()));
    }
    let mut pool: Vec<usize> = model_subset.to_vec();
    pool.sort_unstable();
    pool.dedup();
    if pool.len() != model_subset.len() {
        return Err(Error::InvalidArgument("duplicate model indices".into()));
    }
    if let Some(&bad) = pool.iter().find(|&&j| j >= tensor.num_models()) {
        return Err(Error::InvalidArgument(format!(
            "model index {bad} out of range for {} models",
            tensor.num_models()
        )));
    }
    if r == 0 || r > pool.len() {
        return Err(Error::InvalidArgument(format!(
            "r must lie in [1, {}], got {r}",
            pool.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = pool[rng.gen_range(0..pool.len())];

    let n = tensor.num_samples();
    let samples: Vec<usize> = match sample_cap {
        Some(k) if k < n => {
            let mut picked = rand::seq::index::sample(&mut rng, n, k).into_vec();
            picked.sort_unstable();
            picked
        }
        _ => (0..n).collect(),
    };

    let mut selected = vec![first];
    let mut trace = vec![mean_capacity(tensor, &samples, &selected, config)?];

    while selected.len() < r {
        let mut best: Option<(usize, S)> = None;
        for &candidate in pool.iter().filter(|j| !selected.contains(j)) {
            let mut trial = selected.clone();
            trial.push(candidate);
            let value = mean_capacity(tensor, &samples, &trial, config)?;
            let better = match best {
                None => true,
                Some((_, incumbent)) => value > incumbent,
            };
            if better {
                best = Some((candidate, value));
            }
        }
        let (winner, value) = best.expect("r ≤ pool size leaves at least one candidate");
        selected.push(winner);
        trace.push(value);
    }

    Ok(GreedySelection {
        selected_model_ids: selected
            .iter()
            .map(|&j| tensor.model_ids()[j].clone())
            .collect(),
        capacity_trace: trace,
    })
}
