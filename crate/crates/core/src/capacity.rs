//! Channel capacity of a discrete score set via Blahut–Arimoto alternating
//! maximization, plus the information radius and diameter of the set.
//!
//! A score set is read as a discrete memoryless channel: row `j` is the
//! score vector produced by model `j`, the input alphabet is the model
//! index, and the output alphabet is the class index. The capacity of that
//! channel (in bits) measures how far apart the rows are; `2^capacity`
//! lies in `[1, c]` and counts the classes the rows can effectively
//! disagree on.

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};
use crate::simplex::{kl_divergence, ProbVector};

/// Rows of competing score vectors for one sample (a channel matrix).
#[derive(Debug, Clone)]
pub struct ScoreSet<S> {
    rows: Vec<ProbVector<S>>,
    model_ids: Vec<String>,
}

impl<S: Scalar> ScoreSet<S> {
    /// Builds a channel from `m ≥ 1` rows over `c ≥ 2` classes. All rows
    /// must share the same dimension and ids must match the row count.
    pub fn new(rows: Vec<ProbVector<S>>, model_ids: Vec<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidChannel("no rows".into()));
        }
        if model_ids.len() != rows.len() {
            return Err(Error::InvalidChannel(format!(
                "{} model ids for {} rows",
                model_ids.len(),
                rows.len()
            )));
        }
        let c = rows[0].dim();
        if c < 2 {
            return Err(Error::InvalidChannel(format!(
                "rows need at least 2 classes, got {c}"
            )));
        }
        for row in &rows {
            if row.dim() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    actual: row.dim(),
                });
            }
        }
        Ok(Self { rows, model_ids })
    }

    pub fn rows(&self) -> &[ProbVector<S>] {
        &self.rows
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn num_models(&self) -> usize {
        self.rows.len()
    }

    pub fn num_classes(&self) -> usize {
        self.rows[0].dim()
    }
}

/// Accuracy controls for the fixed-point iteration.
#[derive(Debug, Clone)]
pub struct BaConfig<S> {
    /// Width of the upper−lower capacity bracket at which iteration stops,
    /// in bits.
    pub tolerance: S,
    /// Hard cap on iterations; hitting it yields `converged = false`.
    pub max_iterations: usize,
}

impl<S: Scalar> BaConfig<S> {
    pub fn new(tolerance: S, max_iterations: usize) -> Result<Self> {
        if !(tolerance > S::zero()) || !tolerance.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be positive and finite, got {tolerance}"
            )));
        }
        if max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be ≥ 1".into()));
        }
        Ok(Self {
            tolerance,
            max_iterations,
        })
    }
}

impl<S: Scalar> Default for BaConfig<S> {
    fn default() -> Self {
        Self {
            tolerance: cast(1e-6),
            max_iterations: 100_000,
        }
    }
}

/// Output of a capacity computation.
#[derive(Debug, Clone)]
pub struct CapacityResult<S> {
    /// Reported capacity: the final lower bound of the sandwich, in bits.
    pub capacity_bits: S,
    /// `2^capacity_bits`, in `[1, c]`.
    pub multiplicity: S,
    /// Capacity-achieving weighting over the rows (models).
    pub input_distribution: ProbVector<S>,
    /// Output marginal under `input_distribution`: the KL centroid of the
    /// rows.
    pub centroid: ProbVector<S>,
    /// Iterations performed.
    pub iterations: usize,
    /// Final spread between the upper and lower capacity bounds, in bits.
    pub gap: S,
    /// Whether `gap ≤ tolerance` was reached before `max_iterations`.
    pub converged: bool,
}

/// Capacity bracketed against the coarser geometric spread measures.
///
/// The chain `capacity ≤ radius ≤ diameter` always holds.
#[derive(Debug, Clone)]
pub struct SpreadBounds<S> {
    pub capacity_bits: S,
    pub radius_bits: S,
    pub diameter_bits: S,
}

impl<S: Scalar> SpreadBounds<S> {
    pub fn compute(channel: &ScoreSet<S>, config: &BaConfig<S>) -> Self {
        Self {
            capacity_bits: ba_capacity(channel, config).capacity_bits,
            radius_bits: info_radius(channel, config),
            diameter_bits: info_diameter(channel),
        }
    }
}

/// Divergence of every row from a reference distribution, in bits.
/// `reference` entries may be zero only where every row is zero.
fn row_divergences<S: Scalar>(rows: &[ProbVector<S>], reference: &[S]) -> Vec<S> {
    rows.iter()
        .map(|row| {
            let mut acc = S::zero();
            for (&p, &w) in row.values().iter().zip(reference) {
                if p > S::zero() {
                    if w <= S::zero() {
                        return S::infinity();
                    }
                    acc = acc + p * (p / w).log2();
                }
            }
            acc.max(S::zero())
        })
        .collect()
}

fn output_marginal<S: Scalar>(rows: &[ProbVector<S>], weights: &[S]) -> Vec<S> {
    let c = rows[0].dim();
    let mut marginal = vec![S::zero(); c];
    for (row, &w) in rows.iter().zip(weights) {
        for (mj, &p) in marginal.iter_mut().zip(row.values()) {
            *mj = *mj + w * p;
        }
    }
    marginal
}

/// Channel capacity by the Blahut–Arimoto fixed-point iteration.
///
/// Starting from the uniform input weighting, each pass recomputes the
/// backward channel, folds it into the per-row multipliers
/// `r_j = w_j · 2^{D(row_j ‖ marginal)}`, renormalizes the weights to
/// `r / Σ r`, and brackets the capacity by
///
/// ```text
/// log2 Σ_j w_j 2^{D_j}  ≤  C  ≤  max_j D_j .
/// ```
///
/// Iteration stops once the bracket is narrower than `config.tolerance` or
/// `config.max_iterations` passes have run; the reported capacity is the
/// conservative lower bound of the final bracket. A single-row channel has
/// capacity zero by definition and skips the iteration.
pub fn ba_capacity<S: Scalar>(channel: &ScoreSet<S>, config: &BaConfig<S>) -> CapacityResult<S> {
    let m = channel.num_models();
    let rows = channel.rows();
    if m == 1 {
        return CapacityResult {
            capacity_bits: S::zero(),
            multiplicity: S::one(),
            input_distribution: ProbVector::new(vec![S::one()])
                .expect("singleton weighting is valid"),
            centroid: rows[0].clone(),
            iterations: 0,
            gap: S::zero(),
            converged: true,
        };
    }

    let uniform = S::one() / cast::<S>(m as f64);
    let mut weights = vec![uniform; m];
    let mut marginal = output_marginal(rows, &weights);
    let mut lower = S::zero();
    let mut gap = S::infinity();
    let mut iterations = 0;
    let mut converged = false;

    for iter in 1..=config.max_iterations {
        iterations = iter;
        let divergences = row_divergences(rows, &marginal);
        let mut mass = S::zero();
        let mut upper = S::zero();
        for (&w, &d) in weights.iter().zip(&divergences) {
            mass = mass + w * d.exp2();
            if d > upper {
                upper = d;
            }
        }
        lower = mass.log2().max(S::zero());
        gap = (upper - lower).max(S::zero());
        if gap <= config.tolerance {
            converged = true;
            break;
        }
        if iter == config.max_iterations {
            break;
        }
        for (w, &d) in weights.iter_mut().zip(&divergences) {
            *w = *w * d.exp2() / mass;
        }
        marginal = output_marginal(rows, &weights);
    }

    // Normalize defensively before re-validating as distributions.
    let wsum: S = weights.iter().copied().sum();
    for w in &mut weights {
        *w = *w / wsum;
    }
    let msum: S = marginal.iter().copied().sum();
    for v in &mut marginal {
        *v = *v / msum;
    }

    CapacityResult {
        capacity_bits: lower,
        multiplicity: lower.exp2(),
        input_distribution: ProbVector::new(weights)
            .expect("renormalized weights form a distribution"),
        centroid: ProbVector::new(marginal)
            .expect("renormalized marginal forms a distribution"),
        iterations,
        gap,
        converged,
    }
}

fn max_divergence_to<S: Scalar>(rows: &[ProbVector<S>], reference: &[S]) -> S {
    row_divergences(rows, reference)
        .into_iter()
        .fold(S::zero(), S::max)
}

/// Euclidean projection onto the probability simplex.
fn project_to_simplex<S: Scalar>(point: &[S]) -> Vec<S> {
    let n = point.len();
    let mut sorted = point.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumulative = S::zero();
    let mut threshold = S::zero();
    let mut found = false;
    for (k, &v) in sorted.iter().enumerate() {
        cumulative = cumulative + v;
        let t = (cumulative - S::one()) / cast::<S>((k + 1) as f64);
        if v - t > S::zero() {
            threshold = t;
            found = true;
        } else {
            break;
        }
    }
    if !found {
        let total: S = point.iter().copied().sum();
        threshold = (total - S::one()) / cast::<S>(n as f64);
    }
    point
        .iter()
        .map(|&v| (v - threshold).max(S::zero()))
        .collect()
}

/// Information radius `inf_q max_j D(row_j ‖ q)` in bits.
///
/// The objective is a maximum of functions convex in `q`, so it is
/// minimized by projected subgradient descent with backtracking, seeded at
/// the Blahut–Arimoto centroid (which already brackets the optimum within
/// the solver gap). For two classes a dense grid plus ternary refinement
/// over the one free coordinate replaces the descent.
pub fn info_radius<S: Scalar>(channel: &ScoreSet<S>, config: &BaConfig<S>) -> S {
    let rows = channel.rows();
    if rows.len() == 1 {
        return S::zero();
    }
    let ba = ba_capacity(channel, config);
    let mut center: Vec<S> = ba.centroid.values().to_vec();
    let mut best = max_divergence_to(rows, &center);

    if channel.num_classes() == 2 {
        let objective = |t: S| -> S {
            let q = [t, S::one() - t];
            max_divergence_to(rows, &q)
        };
        let tiny: S = cast(1e-15);
        let step: S = cast(1e-3);
        let mut best_t = center[0].max(tiny).min(S::one() - tiny);
        for k in 0..=1000usize {
            let t = (step * cast::<S>(k as f64)).max(tiny).min(S::one() - tiny);
            let obj = objective(t);
            if obj < best {
                best = obj;
                best_t = t;
            }
        }
        // Ternary refinement: the objective is convex in the free coordinate.
        let mut lo = (best_t - step).max(tiny);
        let mut hi = (best_t + step).min(S::one() - tiny);
        for _ in 0..200 {
            let third = (hi - lo) / cast::<S>(3.0);
            let a = lo + third;
            let b = hi - third;
            if objective(a) <= objective(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let refined = objective((lo + hi) / cast::<S>(2.0));
        return best.min(refined).max(S::zero());
    }

    let ln2: S = cast(std::f64::consts::LN_2);
    let band = config.tolerance.max(cast(1e-9));
    let mut step: S = cast(0.25);
    for _ in 0..200 {
        if best <= ba.capacity_bits + config.tolerance {
            break;
        }
        let divergences = row_divergences(rows, &center);
        let peak = divergences.iter().copied().fold(S::zero(), S::max);
        let active: Vec<usize> = (0..rows.len())
            .filter(|&j| divergences[j] >= peak - band)
            .collect();
        let scale = S::one() / (ln2 * cast::<S>(active.len() as f64));
        let mut gradient = vec![S::zero(); center.len()];
        for &j in &active {
            for (g, (&p, &q)) in gradient.iter_mut().zip(rows[j].values().iter().zip(&center)) {
                if p > S::zero() {
                    *g = *g - scale * p / q;
                }
            }
        }
        let shifted: Vec<S> = center
            .iter()
            .zip(&gradient)
            .map(|(&q, &g)| q - step * g)
            .collect();
        let candidate = project_to_simplex(&shifted);
        let obj = max_divergence_to(rows, &candidate);
        if obj < best {
            best = obj;
            center = candidate;
            step = step * cast(1.5);
        } else {
            step = step * cast(0.5);
            if step < cast(1e-14) {
                break;
            }
        }
    }
    best.max(S::zero())
}

/// Information diameter `max_{j,k} D(row_j ‖ row_k)` in bits, exact by
/// enumeration over ordered row pairs. Infinite when a zero in one row
/// meets positive mass in another (impossible for clipped rows).
pub fn info_diameter<S: Scalar>(channel: &ScoreSet<S>) -> S {
    let rows = channel.rows();
    let mut best = S::zero();
    for (j, row_j) in rows.iter().enumerate() {
        for (k, row_k) in rows.iter().enumerate() {
            if j == k {
                continue;
            }
            let d = kl_divergence(row_j, row_k).expect("rows share a dimension");
            if d > best {
                best = d;
            }
        }
    }
    best
}

/// Capacity of a random channel by exhaustive grid search over the input
/// weighting; an independent oracle for the fixed-point solver. Only
/// practical for `m ≤ 3`.
pub fn grid_search_capacity<S: Scalar>(channel: &ScoreSet<S>, grid_step: f64) -> S {
    let rows = channel.rows();
    let m = rows.len();
    let steps = (1.0 / grid_step).round() as usize;
    let eval = |weights: &[S]| -> S {
        let marginal = output_marginal(rows, weights);
        weights
            .iter()
            .zip(row_divergences(rows, &marginal))
            .map(|(&w, d)| w * d)
            .sum()
    };
    let mut best = S::zero();
    match m {
        1 => {}
        2 => {
            for a in 0..=steps {
                let wa: S = cast(a as f64 * grid_step);
                let value = eval(&[wa, S::one() - wa]);
                if value > best {
                    best = value;
                }
            }
        }
        3 => {
            for a in 0..=steps {
                let wa = a as f64 * grid_step;
                for b in 0..=(steps - a) {
                    let wb = b as f64 * grid_step;
                    let wc = (1.0 - wa - wb).max(0.0);
                    let value = eval(&[cast(wa), cast(wb), cast(wc)]);
                    if value > best {
                        best = value;
                    }
                }
            }
        }
        _ => panic!("grid search oracle supports at most 3 rows, got {m}"),
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn channel(rows: &[&[f64]]) -> ScoreSet<f64> {
        let rows: Vec<ProbVector<f64>> = rows
            .iter()
            .map(|r| ProbVector::new(r.to_vec()).unwrap())
            .collect();
        let ids = (0..rows.len()).map(|j| format!("m{j}")).collect();
        ScoreSet::new(rows, ids).unwrap()
    }

    fn clipped_channel(rows: &[&[f64]]) -> ScoreSet<f64> {
        let rows: Vec<ProbVector<f64>> = rows
            .iter()
            .map(|r| ProbVector::from_scores(r.to_vec()).unwrap())
            .collect();
        let ids = (0..rows.len()).map(|j| format!("m{j}")).collect();
        ScoreSet::new(rows, ids).unwrap()
    }

    fn binary_entropy(p: f64) -> f64 {
        if p <= 0.0 || p >= 1.0 {
            0.0
        } else {
            -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
        }
    }

    #[test]
    fn noiseless_binary_channel_has_one_bit() {
        let result = ba_capacity(&channel(&[&[1.0, 0.0], &[0.0, 1.0]]), &BaConfig::default());
        assert_abs_diff_eq!(result.capacity_bits, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(result.input_distribution.values()[0], 0.5, epsilon = 1e-9);
        assert!(result.converged);
    }

    #[test]
    fn identical_rows_have_zero_capacity() {
        let result = ba_capacity(
            &channel(&[&[0.3, 0.7], &[0.3, 0.7], &[0.3, 0.7]]),
            &BaConfig::default(),
        );
        assert_eq!(result.capacity_bits, 0.0);
        assert_eq!(result.multiplicity, 1.0);
        assert!(result.converged);
    }

    #[test]
    fn binary_symmetric_channel_matches_closed_form() {
        let result = ba_capacity(&channel(&[&[0.9, 0.1], &[0.1, 0.9]]), &BaConfig::default());
        assert_abs_diff_eq!(result.capacity_bits, 1.0 - binary_entropy(0.1), epsilon = 1e-4);
    }

    #[test]
    fn single_row_short_circuits() {
        let result = ba_capacity(&channel(&[&[0.3, 0.7]]), &BaConfig::default());
        assert_eq!(result.capacity_bits, 0.0);
        assert_eq!(result.iterations, 0);
        assert!(result.converged);
        assert_eq!(result.centroid.values(), &[0.3, 0.7]);
    }

    #[test]
    fn centroid_is_marginal_under_input_distribution() {
        let set = channel(&[&[0.8, 0.2], &[0.4, 0.6], &[0.1, 0.9]]);
        let result = ba_capacity(&set, &BaConfig::default());
        let weights = result.input_distribution.values();
        let mut expected = [0.0, 0.0];
        for (row, &w) in set.rows().iter().zip(weights) {
            expected[0] += w * row.values()[0];
            expected[1] += w * row.values()[1];
        }
        assert_abs_diff_eq!(result.centroid.values()[0], expected[0], epsilon = 1e-12);
        assert_abs_diff_eq!(result.centroid.values()[1], expected[1], epsilon = 1e-12);
    }

    #[test]
    fn sandwich_gap_bounds_converged_result() {
        let set = channel(&[&[0.9, 0.1], &[0.2, 0.8], &[0.5, 0.5]]);
        let config = BaConfig::default();
        let result = ba_capacity(&set, &config);
        assert!(result.converged);
        assert!(result.gap <= config.tolerance);
        let oracle = grid_search_capacity(&set, 1e-4);
        assert!(result.capacity_bits <= oracle + 1e-6);
        assert!(oracle <= result.capacity_bits + result.gap + 1e-6);
    }

    #[test]
    fn non_convergence_is_reported_not_an_error() {
        let config = BaConfig::new(1e-12, 3).unwrap();
        let result = ba_capacity(&channel(&[&[0.9, 0.1], &[0.2, 0.8]]), &config);
        assert!(!result.converged);
        assert_eq!(result.iterations, 3);
        assert!(result.gap > config.tolerance);
    }

    #[test]
    fn radius_of_noiseless_binary_channel_is_one_bit() {
        let r = info_radius(&channel(&[&[1.0, 0.0], &[0.0, 1.0]]), &BaConfig::default());
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn radius_degenerate_cases_are_zero() {
        let config = BaConfig::default();
        assert_eq!(info_radius(&channel(&[&[0.4, 0.6]]), &config), 0.0);
        let r = info_radius(&channel(&[&[0.3, 0.7], &[0.3, 0.7]]), &config);
        assert!(r <= 1e-9);
    }

    #[test]
    fn radius_three_class_descent_path() {
        let set = channel(&[
            &[0.8, 0.1, 0.1],
            &[0.1, 0.8, 0.1],
            &[0.1, 0.1, 0.8],
        ]);
        let config = BaConfig::default();
        let capacity = ba_capacity(&set, &config).capacity_bits;
        let radius = info_radius(&set, &config);
        // Symmetric rows: the set behaves as convex from the centroid's
        // viewpoint, so the radius matches capacity tightly.
        assert!(radius >= capacity - 1e-9);
        assert!(radius <= capacity + 1e-3);
    }

    #[test]
    fn diameter_identical_rows_is_zero() {
        assert_eq!(info_diameter(&channel(&[&[0.3, 0.7], &[0.3, 0.7]])), 0.0);
    }

    #[test]
    fn diameter_of_clipped_corners() {
        let d = info_diameter(&clipped_channel(&[&[1.0, 0.0], &[0.0, 1.0]]));
        assert_abs_diff_eq!(d, (1e12f64).log2(), epsilon = 0.01);
    }

    #[test]
    fn diameter_takes_the_larger_direction() {
        let set = channel(&[&[0.85, 0.15], &[0.10, 0.90]]);
        let rows = set.rows();
        let forward = kl_divergence(&rows[0], &rows[1]).unwrap();
        let backward = kl_divergence(&rows[1], &rows[0]).unwrap();
        assert_abs_diff_eq!(info_diameter(&set), forward.max(backward), epsilon = 1e-12);
        assert_abs_diff_eq!(forward, 2.2366, epsilon = 1e-4);
        assert_abs_diff_eq!(backward, 2.0177, epsilon = 1e-4);
    }

    #[test]
    fn spread_bounds_chain_holds() {
        let set = channel(&[&[0.7, 0.2, 0.1], &[0.2, 0.5, 0.3], &[0.05, 0.15, 0.8]]);
        let bounds = SpreadBounds::compute(&set, &BaConfig::default());
        assert!(bounds.capacity_bits <= bounds.radius_bits + 1e-9);
        assert!(bounds.radius_bits <= bounds.diameter_bits + 2e-9);
    }

    #[test]
    fn invalid_channels_are_rejected() {
        let row = ProbVector::new(vec![0.5, 0.5]).unwrap();
        assert!(ScoreSet::<f64>::new(vec![], vec![]).is_err());
        assert!(ScoreSet::new(vec![row.clone()], vec![]).is_err());
        let short = ProbVector::new(vec![1.0]).unwrap();
        assert!(ScoreSet::new(vec![short], vec!["a".into()]).is_err());
        let tall = ProbVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert!(ScoreSet::new(vec![row, tall], vec!["a".into(), "b".into()]).is_err());
    }
}
