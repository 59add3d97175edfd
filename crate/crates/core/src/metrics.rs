//! Per-sample and dataset-level multiplicity metrics: capacity over a score
//! tensor, ambiguity, discrepancy, and tail/CDF report statistics.

use rayon::prelude::*;

use crate::capacity::{ba_capacity, BaConfig, CapacityResult};
use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};
use crate::simplex::argmax_class;
use crate::tensor::{filter_rashomon_set, resolve_base_model, RashomonSpec, ScoreTensor};

/// Dataset-level multiplicity report.
///
/// `per_sample_*`, `sample_ids` are aligned with the tensor's sample order;
/// `cdf_points` is the full empirical CDF (one point per sample, no
/// binning).
#[derive(Debug, Clone)]
pub struct MetricsReport<S> {
    pub sample_ids: Vec<String>,
    pub per_sample_capacity: Vec<S>,
    pub per_sample_multiplicity: Vec<S>,
    pub ambiguity: S,
    pub discrepancy: S,
    pub tail_mean_1pct: S,
    pub tail_mean_5pct: S,
    pub tail_stderr_1pct: S,
    pub tail_stderr_5pct: S,
    pub cdf_points: Vec<(S, S)>,
    pub rashomon_model_ids: Vec<String>,
}

/// Tail and CDF statistics of a set of per-sample capacities.
#[derive(Debug, Clone)]
pub struct CapacitySummary<S> {
    pub tail_mean_1pct: S,
    pub tail_mean_5pct: S,
    pub tail_stderr_1pct: S,
    pub tail_stderr_5pct: S,
    pub cdf_points: Vec<(S, S)>,
}

fn mean<S: Scalar>(values: &[S]) -> S {
    values.iter().copied().sum::<S>() / cast::<S>(values.len() as f64)
}

/// Standard error of the mean: sample standard deviation over √k.
/// Zero for a single value.
fn standard_error<S: Scalar>(values: &[S]) -> S {
    let k = values.len();
    if k < 2 {
        return S::zero();
    }
    let mu = mean(values);
    let ss: S = values.iter().map(|&v| (v - mu) * (v - mu)).sum();
    let variance = ss / cast::<S>((k - 1) as f64);
    variance.sqrt() / cast::<S>(k as f64).sqrt()
}

/// Summarizes capacities into top-1%/top-5% tail statistics and the full
/// empirical CDF. Tail sizes use `⌈fraction · n⌉` so small datasets still
/// have a non-empty tail.
pub fn summarize_capacities<S: Scalar>(capacities: &[S]) -> Result<CapacitySummary<S>> {
    let n = capacities.len();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "cannot summarize an empty capacity list".into(),
        ));
    }
    let mut descending = capacities.to_vec();
    descending.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let take = |fraction: f64| -> &[S] {
        let k = ((n as f64) * fraction).ceil().max(1.0) as usize;
        &descending[..k.min(n)]
    };
    let top1 = take(0.01);
    let top5 = take(0.05);

    let mut ascending = capacities.to_vec();
    ascending.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let cdf_points = ascending
        .iter()
        .enumerate()
        .map(|(rank, &v)| (v, cast::<S>((rank + 1) as f64) / cast::<S>(n as f64)))
        .collect();

    Ok(CapacitySummary {
        tail_mean_1pct: mean(top1),
        tail_mean_5pct: mean(top5),
        tail_stderr_1pct: standard_error(top1),
        tail_stderr_5pct: standard_error(top5),
        cdf_points,
    })
}

/// Capacity of one sample's score set restricted to `model_subset`.
pub fn sample_capacity<S: Scalar>(
    tensor: &ScoreTensor<S>,
    sample: usize,
    model_subset: &[usize],
    config: &BaConfig<S>,
) -> Result<CapacityResult<S>> {
    let channel = tensor.score_set_for_sample(sample, model_subset)?;
    Ok(ba_capacity(&channel, config))
}

/// Thresholded predictions of every subset model plus the reference model.
fn predicted_classes<S: Scalar>(
    tensor: &ScoreTensor<S>,
    spec: &RashomonSpec<S>,
) -> Result<(Vec<usize>, Vec<usize>, Vec<Vec<usize>>)> {
    let subset = filter_rashomon_set(tensor, spec)?;
    let base = resolve_base_model(tensor, spec)?;
    let n = tensor.num_samples();
    let base_classes: Vec<usize> = (0..n)
        .map(|i| argmax_class(tensor.score(i, base)))
        .collect();
    let subset_classes: Vec<Vec<usize>> = subset
        .iter()
        .map(|&j| (0..n).map(|i| argmax_class(tensor.score(i, j))).collect())
        .collect();
    Ok((subset, base_classes, subset_classes))
}

/// Fraction of samples whose thresholded prediction can be flipped by at
/// least one model in the filtered set, relative to the reference model.
pub fn ambiguity<S: Scalar>(tensor: &ScoreTensor<S>, spec: &RashomonSpec<S>) -> Result<S> {
    let (_, base_classes, subset_classes) = predicted_classes(tensor, spec)?;
    let n = tensor.num_samples();
    let flipped = (0..n)
        .filter(|&i| subset_classes.iter().any(|cls| cls[i] != base_classes[i]))
        .count();
    Ok(cast::<S>(flipped as f64) / cast::<S>(n as f64))
}

/// Largest fraction of samples flipped by a single model in the filtered
/// set, relative to the reference model. Never exceeds [`ambiguity`].
pub fn discrepancy<S: Scalar>(tensor: &ScoreTensor<S>, spec: &RashomonSpec<S>) -> Result<S> {
    let (_, base_classes, subset_classes) = predicted_classes(tensor, spec)?;
    let n = tensor.num_samples();
    let worst = subset_classes
        .iter()
        .map(|cls| cls.iter().zip(&base_classes).filter(|(a, b)| a != b).count())
        .max()
        .unwrap_or(0);
    Ok(cast::<S>(worst as f64) / cast::<S>(n as f64))
}

/// Per-sample capacities over the filtered model set plus all dataset-level
/// statistics. Sample capacities are computed in parallel; the result does
/// not depend on the thread count.
pub fn compute_report<S: Scalar>(
    tensor: &ScoreTensor<S>,
    spec: &RashomonSpec<S>,
    config: &BaConfig<S>,
) -> Result<MetricsReport<S>> {
    let subset = filter_rashomon_set(tensor, spec)?;
    let n = tensor.num_samples();

    let results: Vec<CapacityResult<S>> = (0..n)
        .into_par_iter()
        .map(|i| sample_capacity(tensor, i, &subset, config))
        .collect::<Result<_>>()?;
    let per_sample_capacity: Vec<S> = results.iter().map(|r| r.capacity_bits).collect();
    let per_sample_multiplicity: Vec<S> = results.iter().map(|r| r.multiplicity).collect();

    let summary = summarize_capacities(&per_sample_capacity)?;

    Ok(MetricsReport {
        sample_ids: tensor.sample_ids().to_vec(),
        per_sample_capacity,
        per_sample_multiplicity,
        ambiguity: ambiguity(tensor, spec)?,
        discrepancy: discrepancy(tensor, spec)?,
        tail_mean_1pct: summary.tail_mean_1pct,
        tail_mean_5pct: summary.tail_mean_5pct,
        tail_stderr_1pct: summary.tail_stderr_1pct,
        tail_stderr_5pct: summary.tail_stderr_5pct,
        cdf_points: summary.cdf_points,
        rashomon_model_ids: subset
            .iter()
            .map(|&j| tensor.model_ids()[j].clone())
            .collect(),
    })
}
