//! Self-contained Rashomon-set generation for binary logistic regression:
//! Newton–Raphson training, per-sample per-class adversarial weight
//! perturbation, label-flip retraining, and score emission.
//!
//! Training losses and loss budgets here are mean cross-entropy in nats
//! (the natural-log form the Newton algebra is written in); capacities
//! stay in bits everywhere else.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};
use crate::simplex::ProbVector;
use crate::tensor::ScoreTensor;

/// Binary-labelled feature matrix.
#[derive(Debug, Clone)]
pub struct Dataset<S> {
    features: Vec<S>, // n×d, row-major
    labels: Vec<u8>,
    feature_names: Vec<String>,
    num_features: usize,
}

impl<S: Scalar> Dataset<S> {
    pub fn new(features: Vec<S>, labels: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        let n = labels.len();
        let d = feature_names.len();
        if n == 0 {
            return Err(Error::InvalidDataset("no samples".into()));
        }
        if d == 0 {
            return Err(Error::InvalidDataset("no features".into()));
        }
        if features.len() != n * d {
            return Err(Error::InvalidDataset(format!(
                "expected {} feature values for {n} samples × {d} features, got {}",
                n * d,
                features.len()
            )));
        }
        if let Some(bad) = features.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite feature value {bad}"
            )));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::InvalidDataset("labels must be 0 or 1".into()));
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            num_features: d,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.features[i * self.num_features..(i + 1) * self.num_features]
    }
}

/// Where a model came from, for provenance in emitted tensors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Base,
    Awp { sample: usize, target_class: u8 },
    LabelFlip { sample: usize },
    Ingested,
}

impl Provenance {
    fn slug(&self) -> String {
        match self {
            Provenance::Base => "base".into(),
            Provenance::Awp {
                sample,
                target_class,
            } => format!("awp_s{sample}_c{target_class}"),
            Provenance::LabelFlip { sample } => format!("flip_s{sample}"),
            Provenance::Ingested => "ingested".into(),
        }
    }
}

/// A fitted (or perturbed) logistic model.
#[derive(Debug, Clone)]
pub struct LogisticModel<S> {
    pub weights: Vec<S>,
    /// Mean cross-entropy on the training data, in nats.
    pub train_loss: S,
    pub provenance: Provenance,
}

/// Controls for the adversarial perturbation walk.
#[derive(Debug, Clone)]
pub struct AwpConfig<S> {
    /// Magnitude of the adversarial gradient term. `None` auto-scales to
    /// `0.1·n / ‖z_target‖²`, which balances the term against the
    /// aggregate gradient and is invariant to feature scale.
    pub perturbation_strength: Option<S>,
    /// Loss slack over the base model's loss, in nats (mean form).
    pub loss_budget: S,
    /// Hard cap on perturbation steps.
    pub max_steps: usize,
    /// Target-class score at which the walk stops.
    pub score_cap: S,
    /// Scale applied to each Newton step; full steps overshoot the budget
    /// boundary too coarsely.
    pub damping: S,
}

impl<S: Scalar> AwpConfig<S> {
    pub fn new(loss_budget: S) -> Result<Self> {
        if !loss_budget.is_finite() || loss_budget < S::zero() {
            return Err(Error::InvalidConfig(format!(
                "loss budget must be finite and ≥ 0, got {loss_budget}"
            )));
        }
        Ok(Self {
            perturbation_strength: None,
            loss_budget,
            max_steps: 500,
            score_cap: cast(0.9),
            damping: cast(0.5),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.perturbation_strength {
            if !(s > S::zero()) || !s.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "perturbation strength must be positive, got {s}"
                )));
            }
        }
        if !self.loss_budget.is_finite() || self.loss_budget < S::zero() {
            return Err(Error::InvalidConfig("loss budget must be ≥ 0".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be ≥ 1".into()));
        }
        let half = cast::<S>(0.5);
        if !(self.score_cap > half) || self.score_cap > S::one() {
            return Err(Error::InvalidConfig(format!(
                "score cap must lie in (0.5, 1], got {}",
                self.score_cap
            )));
        }
        if !(self.damping > S::zero()) || self.damping > S::one() {
            return Err(Error::InvalidConfig(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

/// Why an adversarial walk stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AwpStop {
    /// The base model already met the score cap; nothing to do.
    AlreadyAtCap,
    /// The target-class score crossed the cap.
    ScoreCapReached,
    /// The next step would have exceeded the loss budget and was rolled
    /// back.
    BudgetExhausted,
    /// Score change stayed below 1e-12 for 10 consecutive steps.
    Stalled,
    /// `max_steps` ran out.
    StepLimit,
}

/// Perturbed model plus the stop condition that ended the walk.
#[derive(Debug, Clone)]
pub struct AwpOutcome<S> {
    pub model: LogisticModel<S>,
    pub stop: AwpStop,
    pub steps: usize,
}

/// Synthetic two-Gaussian generator parameters: class k is centred at
/// `±(class_separation/2)·𝟙` with identity covariance, balanced labels.
#[derive(Debug, Clone)]
pub struct SyntheticSpec<S> {
    pub num_samples: usize,
    pub num_features: usize,
    pub class_separation: S,
    pub seed: u64,
}

fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// `ln(1 + e^x)`, computed without overflow.
fn softplus<S: Scalar>(x: S) -> S {
    x.max(S::zero()) + (-x.abs()).exp().ln_1p()
}

fn margins<S: Scalar>(data: &Dataset<S>, weights: &[S]) -> Vec<S> {
    (0..data.num_samples())
        .map(|i| {
            data.row(i)
                .iter()
                .zip(weights)
                .map(|(&z, &w)| z * w)
                .sum()
        })
        .collect()
}

/// Mean negative log-likelihood in nats.
pub fn mean_log_loss<S: Scalar>(data: &Dataset<S>, weights: &[S]) -> S {
    let total: S = margins(data, weights)
        .into_iter()
        .zip(data.labels())
        .map(|(m, &y)| if y == 1 { softplus(-m) } else { softplus(m) })
        .sum();
    total / cast::<S>(data.num_samples() as f64)
}

/// Gradient `−Σ_i z_i (y_i − p_i)` of the summed negative log-likelihood.
pub fn log_loss_gradient<S: Scalar>(data: &Dataset<S>, weights: &[S]) -> Vec<S> {
    let probs: Vec<S> = margins(data, weights).into_iter().map(sigmoid).collect();
    likelihood_gradient(data, &probs)
        .into_iter()
        .map(|g| -g)
        .collect()
}

/// Hessian `Σ_i p_i (1 − p_i) z_i z_iᵀ` of the summed negative
/// log-likelihood (d×d, row-major).
pub fn log_loss_hessian<S: Scalar>(data: &Dataset<S>, weights: &[S]) -> Vec<S> {
    let probs: Vec<S> = margins(data, weights).into_iter().map(sigmoid).collect();
    curvature_matrix(data, &probs)
}

/// Log-likelihood gradient `Σ_i z_i (y_i − p_i)`.
fn likelihood_gradient<S: Scalar>(data: &Dataset<S>, probs: &[S]) -> Vec<S> {
    let d = data.num_features();
    let mut g = vec![S::zero(); d];
    for i in 0..data.num_samples() {
        let y: S = cast(data.labels()[i] as f64);
        let residual = y - probs[i];
        for (gk, &z) in g.iter_mut().zip(data.row(i)) {
            *gk = *gk + z * residual;
        }
    }
    g
}

/// Negated log-likelihood Hessian `Σ_i p_i (1 − p_i) z_i z_iᵀ` (d×d,
/// row-major).
fn curvature_matrix<S: Scalar>(data: &Dataset<S>, probs: &[S]) -> Vec<S> {
    let d = data.num_features();
    let mut h = vec![S::zero(); d * d];
    for i in 0..data.num_samples() {
        let w = probs[i] * (S::one() - probs[i]);
        let row = data.row(i);
        for a in 0..d {
            let wa = w * row[a];
            for b in a..d {
                h[a * d + b] = h[a * d + b] + wa * row[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            h[a * d + b] = h[b * d + a];
        }
    }
    h
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_linear<S: Scalar>(matrix: &[S], rhs: &[S]) -> Option<Vec<S>> {
    let d = rhs.len();
    let mut a = matrix.to_vec();
    let mut b = rhs.to_vec();
    for col in 0..d {
        let pivot_row = (col..d)
            .max_by(|&r, &s| {
                a[r * d + col]
                    .abs()
                    .partial_cmp(&a[s * d + col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap();
        let pivot = a[pivot_row * d + col];
        if !pivot.is_finite() || pivot.abs() < cast(1e-300) {
            return None;
        }
        if pivot_row != col {
            for k in 0..d {
                a.swap(col * d + k, pivot_row * d + k);
            }
            b.swap(col, pivot_row);
        }
        for row in (col + 1)..d {
            let factor = a[row * d + col] / a[col * d + col];
            if factor == S::zero() {
                continue;
            }
            for k in col..d {
                a[row * d + k] = a[row * d + k] - factor * a[col * d + k];
            }
            b[row] = b[row] - factor * b[col];
        }
    }
    let mut x = vec![S::zero(); d];
    for row in (0..d).rev() {
        let mut acc = b[row];
        for k in (row + 1)..d {
            acc = acc - a[row * d + k] * x[k];
        }
        x[row] = acc / a[row * d + row];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Newton direction for the (possibly modified) gradient, with a ridge
/// jitter of 1e-10 on the diagonal when the normal equations are singular.
fn newton_direction<S: Scalar>(curvature: &[S], gradient: &[S]) -> Result<Vec<S>> {
    if let Some(direction) = solve_linear(curvature, gradient) {
        return Ok(direction);
    }
    let d = gradient.len();
    let jitter: S = cast(1e-10);
    let mut ridged = curvature.to_vec();
    for k in 0..d {
        ridged[k * d + k] = ridged[k * d + k] + jitter;
    }
    solve_linear(&ridged, gradient).ok_or(Error::Separable)
}

/// Fits unregularized logistic regression by damped Newton–Raphson from
/// zero weights, stopping at `grad_tolerance` on the gradient norm or
/// `max_iters`. Steps that would increase the loss are halved until they
/// do not; accepted iterations therefore never increase the loss.
pub fn train_logistic<S: Scalar>(
    data: &Dataset<S>,
    max_iters: usize,
    grad_tolerance: S,
) -> Result<LogisticModel<S>> {
    if data.num_features() > data.num_samples() {
        log::warn!(
            "more features ({}) than samples ({}); the fit is underdetermined",
            data.num_features(),
            data.num_samples()
        );
    }
    let d = data.num_features();
    let mut weights = vec![S::zero(); d];
    let mut loss = mean_log_loss(data, &weights);

    for _ in 0..max_iters {
        let probs: Vec<S> = margins(data, &weights).into_iter().map(sigmoid).collect();
        let gradient = likelihood_gradient(data, &probs);
        let norm: S = gradient.iter().map(|&g| g * g).sum::<S>().sqrt();
        if norm <= grad_tolerance {
            break;
        }
        let curvature = curvature_matrix(data, &probs);
        let direction = newton_direction(&curvature, &gradient)?;

        let mut scale = S::one();
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<S> = weights
                .iter()
                .zip(&direction)
                .map(|(&w, &s)| w + scale * s)
                .collect();
            let trial_loss = mean_log_loss(data, &trial);
            if trial_loss.is_finite() && trial_loss <= loss {
                weights = trial;
                loss = trial_loss;
                accepted = true;
                break;
            }
            scale = scale / cast(2.0);
        }
        if !accepted {
            break; // no descent step exists at float resolution
        }
        if !loss.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Separable);
        }
    }
    if !loss.is_finite() || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Separable);
    }
    Ok(LogisticModel {
        weights,
        train_loss: loss,
        provenance: Provenance::Base,
    })
}

fn target_score<S: Scalar>(weights: &[S], row: &[S], target_class: u8) -> S {
    let margin: S = row.iter().zip(weights).map(|(&z, &w)| z * w).sum();
    let p1 = sigmoid(margin);
    if target_class == 1 {
        p1
    } else {
        S::one() - p1
    }
}

/// Walks the weights away from `base` to push one sample's score toward
/// `target_class`, staying inside the loss budget.
///
/// Each step solves the Newton system for the gradient augmented with the
/// adversarial term (positive sign toward class 1, negative toward class
/// 0). The walk stops when the target score crosses `score_cap`, when a
/// step would push the dataset loss above `base loss + budget` (that step
/// is rolled back), when the score stalls, or at `max_steps`. Every
/// returned model satisfies the budget exactly.
pub fn awp_perturb<S: Scalar>(
    base: &LogisticModel<S>,
    data: &Dataset<S>,
    target_sample: usize,
    target_class: u8,
    config: &AwpConfig<S>,
) -> Result<AwpOutcome<S>> {
    config.validate()?;
    if base.weights.len() != data.num_features() {
        return Err(Error::DimensionMismatch {
            expected: data.num_features(),
            actual: base.weights.len(),
        });
    }
    if target_sample >= data.num_samples() {
        return Err(Error::InvalidArgument(format!(
            "target sample {target_sample} out of range for {} samples",
            data.num_samples()
        )));
    }
    if target_class > 1 {
        return Err(Error::InvalidArgument(format!(
            "target class must be 0 or 1, got {target_class}"
        )));
    }

    let provenance = Provenance::Awp {
        sample: target_sample,
        target_class,
    };
    let target_row: Vec<S> = data.row(target_sample).to_vec();
    let budget = base.train_loss + config.loss_budget;

    if target_score(&base.weights, &target_row, target_class) >= config.score_cap {
        return Ok(AwpOutcome {
            model: LogisticModel {
                weights: base.weights.clone(),
                train_loss: base.train_loss,
                provenance,
            },
            stop: AwpStop::AlreadyAtCap,
            steps: 0,
        });
    }

    let strength = config.perturbation_strength.unwrap_or_else(|| {
        let norm_sq: S = target_row.iter().map(|&z| z * z).sum();
        if norm_sq > S::zero() {
            cast::<S>(0.1) * cast::<S>(data.num_samples() as f64) / norm_sq
        } else {
            S::zero()
        }
    });
    let signed = if target_class == 1 { strength } else { -strength };

    let mut weights = base.weights.clone();
    let mut loss = base.train_loss;
    let mut previous_score = target_score(&weights, &target_row, target_class);
    let mut stall_count = 0usize;
    let mut stop = AwpStop::StepLimit;
    let mut steps = 0usize;

    for step in 1..=config.max_steps {
        let probs: Vec<S> = margins(data, &weights).into_iter().map(sigmoid).collect();
        let mut gradient = likelihood_gradient(data, &probs);
        for (g, &z) in gradient.iter_mut().zip(&target_row) {
            *g = *g + signed * z;
        }
        let curvature = curvature_matrix(data, &probs);
        let direction = newton_direction(&curvature, &gradient)?;
        let trial: Vec<S> = weights
            .iter()
            .zip(&direction)
            .map(|(&w, &s)| w + config.damping * s)
            .collect();
        let trial_loss = mean_log_loss(data, &trial);
        if !trial_loss.is_finite() || trial.iter().any(|w| !w.is_finite()) || trial_loss > budget
        {
            stop = AwpStop::BudgetExhausted;
            break; // roll back: keep the last in-budget iterate
        }
        weights = trial;
        loss = trial_loss;
        steps = step;

        let score = target_score(&weights, &target_row, target_class);
        if score >= config.score_cap {
            stop = AwpStop::ScoreCapReached;
            break;
        }
        if (score - previous_score).abs() < cast(1e-12) {
            stall_count += 1;
            if stall_count >= 10 {
                stop = AwpStop::Stalled;
                break;
            }
        } else {
            stall_count = 0;
        }
        previous_score = score;
    }

    Ok(AwpOutcome {
        model: LogisticModel {
            weights,
            train_loss: loss,
            provenance,
        },
        stop,
        steps,
    })
}

/// Retrains from scratch on a copy of the data with one label flipped.
pub fn label_flip_retrain<S: Scalar>(
    data: &Dataset<S>,
    flip_sample: usize,
    max_iters: usize,
    grad_tolerance: S,
) -> Result<LogisticModel<S>> {
    if flip_sample >= data.num_samples() {
        return Err(Error::InvalidArgument(format!(
            "flip sample {flip_sample} out of range for {} samples",
            data.num_samples()
        )));
    }
    let mut flipped = data.clone();
    flipped.labels[flip_sample] ^= 1;
    let fitted = train_logistic(&flipped, max_iters, grad_tolerance)?;
    Ok(LogisticModel {
        weights: fitted.weights.clone(),
        // Loss is reported on the flipped data the model was fit to.
        train_loss: fitted.train_loss,
        provenance: Provenance::LabelFlip {
            sample: flip_sample,
        },
    })
}

/// Scores every model on every sample and packages the result as a tensor;
/// model losses are the mean cross-entropy of each model on `data`.
pub fn emit_scores<S: Scalar>(
    models: &[LogisticModel<S>],
    data: &Dataset<S>,
) -> Result<ScoreTensor<S>> {
    if models.is_empty() {
        return Err(Error::InvalidArgument("no models to score".into()));
    }
    let d = data.num_features();
    for model in models {
        if model.weights.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: model.weights.len(),
            });
        }
    }
    let n = data.num_samples();
    let m = models.len();

    let per_model_probs: Vec<Vec<S>> = models
        .iter()
        .map(|model| {
            margins(data, &model.weights)
                .into_iter()
                .map(sigmoid)
                .collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(n * m);
    for i in 0..n {
        for probs in &per_model_probs {
            let p1 = probs[i];
            rows.push(ProbVector::from_scores(vec![S::one() - p1, p1])?);
        }
    }

    let losses: Vec<S> = models
        .iter()
        .map(|model| mean_log_loss(data, &model.weights))
        .collect();

    let model_ids = models
        .iter()
        .enumerate()
        .map(|(j, model)| format!("m{j:03}_{}", model.provenance.slug()))
        .collect();
    let sample_ids = (0..n).map(|i| format!("s{i:04}")).collect();

    ScoreTensor::new(sample_ids, model_ids, rows, Some(losses))
}

/// Draws a balanced two-Gaussian dataset; identical specs produce
/// bit-identical datasets.
pub fn generate_synthetic<S: Scalar>(spec: &SyntheticSpec<S>) -> Result<Dataset<S>> {
    if spec.num_samples < 2 {
        return Err(Error::InvalidDataset(format!(
            "need at least 2 samples, got {}",
            spec.num_samples
        )));
    }
    if spec.num_features == 0 {
        return Err(Error::InvalidDataset("need at least 1 feature".into()));
    }
    if !spec.class_separation.is_finite() || spec.class_separation < S::zero() {
        return Err(Error::InvalidDataset(format!(
            "class separation must be finite and ≥ 0, got {}",
            spec.class_separation
        )));
    }
    let n = spec.num_samples;
    let d = spec.num_features;
    let half = spec.class_separation / cast::<S>(2.0);
    let n0 = n / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = StandardNormal;

    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = u8::from(i >= n0);
        let center = if label == 0 { -half } else { half };
        for _ in 0..d {
            let noise: f64 = normal.sample(&mut rng);
            features.push(center + cast::<S>(noise));
        }
        labels.push(label);
    }
    let feature_names = (0..d).map(|k| format!("f{k}")).collect();
    Dataset::new(features, labels, feature_names)
}

/// Fraction of samples whose thresholded prediction matches the label.
pub fn training_accuracy<S: Scalar>(data: &Dataset<S>, weights: &[S]) -> S {
    let half = cast::<S>(0.5);
    let correct = margins(data, weights)
        .into_iter()
        .map(sigmoid)
        .zip(data.labels())
        .filter(|&(p, &y)| (p >= half) == (y == 1))
        .count();
    cast::<S>(correct as f64) / cast::<S>(data.num_samples() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec(n: usize, d: usize, sep: f64, seed: u64) -> SyntheticSpec<f64> {
        SyntheticSpec {
            num_samples: n,
            num_features: d,
            class_separation: sep,
            seed,
        }
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = generate_synthetic(&spec(50, 3, 2.0, 9)).unwrap();
        let b = generate_synthetic(&spec(50, 3, 2.0, 9)).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn synthetic_zero_separation_is_chance_level() {
        let data = generate_synthetic(&spec(2000, 2, 0.0, 5)).unwrap();
        let model = train_logistic(&data, 50, 1e-8).unwrap();
        let acc = training_accuracy(&data, &model.weights);
        assert!((acc - 0.5).abs() < 0.05, "accuracy {acc}");
    }

    #[test]
    fn synthetic_wide_separation_is_nearly_perfect() {
        let data = generate_synthetic(&spec(400, 2, 6.0, 5)).unwrap();
        let model = train_logistic(&data, 60, 1e-8).unwrap();
        assert!(training_accuracy(&data, &model.weights) > 0.95);
    }

    #[test]
    fn separable_one_dimensional_data_diverges_monotonically() {
        let data = Dataset::new(vec![-1.0, 1.0], vec![0, 1], vec!["z".into()]).unwrap();
        let mut last_loss = mean_log_loss(&data, &[0.0]);
        let mut weight = 0.0;
        for iters in [1usize, 5, 20, 100] {
            let model = train_logistic(&data, iters, 0.0).unwrap();
            assert!(model.train_loss <= last_loss + 1e-15);
            assert!(model.weights[0] >= weight);
            last_loss = model.train_loss;
            weight = model.weights[0];
        }
        assert!(weight > 10.0, "weight should grow without bound, got {weight}");
    }

    #[test]
    fn all_negative_labels_fit_below_half() {
        // Feature vectors share an open halfspace, so a direction exists
        // that pushes every score below one half.
        let data = Dataset::new(
            vec![0.4, -1.2, 2.0, 0.3, 0.7, 1.1],
            vec![0, 0, 0],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let start_loss = mean_log_loss(&data, &[0.0, 0.0]);
        let model = train_logistic(&data, 30, 1e-10).unwrap();
        assert!(model.train_loss <= start_loss);
        for i in 0..data.num_samples() {
            let m: f64 = data
                .row(i)
                .iter()
                .zip(&model.weights)
                .map(|(z, w)| z * w)
                .sum();
            assert!(sigmoid(m) < 0.5);
        }
    }

    #[test]
    fn symmetric_data_fits_symmetric_scores() {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..10 {
            features.push(-1.0);
            labels.push(0);
            features.push(1.0);
            labels.push(1);
        }
        let data = Dataset::new(features, labels, vec!["z".into()]).unwrap();
        let model = train_logistic(&data, 20, 1e-9).unwrap();
        assert!(model.weights[0] > 0.0);
        let s_pos = sigmoid(model.weights[0]);
        let s_neg = sigmoid(-model.weights[0]);
        assert_abs_diff_eq!(s_pos, 1.0 - s_neg, epsilon = 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = generate_synthetic(&spec(20, 4, 1.0, 3)).unwrap();
        let weights: Vec<f64> = (0..4).map(|k| 0.1 * (k as f64 + 1.0)).collect();
        let n = data.num_samples() as f64;
        let probs: Vec<f64> = margins(&data, &weights).into_iter().map(sigmoid).collect();
        let analytic = likelihood_gradient(&data, &probs);
        let h = 1e-6;
        for k in 0..4 {
            let mut plus = weights.clone();
            plus[k] += h;
            let mut minus = weights.clone();
            minus[k] -= h;
            // mean_log_loss is the scaled negative log-likelihood.
            let fd = -(mean_log_loss(&data, &plus) - mean_log_loss(&data, &minus)) * n / (2.0 * h);
            let denom = analytic[k].abs().max(1.0);
            assert!(
                ((analytic[k] - fd) / denom).abs() < 1e-6,
                "component {k}: analytic {} vs fd {fd}",
                analytic[k]
            );
        }
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let data = generate_synthetic(&spec(15, 3, 1.0, 8)).unwrap();
        let weights = vec![0.2, -0.1, 0.05];
        let probs: Vec<f64> = margins(&data, &weights).into_iter().map(sigmoid).collect();
        let curvature = curvature_matrix(&data, &probs);
        let d = 3;
        let h = 1e-5;
        for a in 0..d {
            for b in 0..d {
                let mut plus = weights.clone();
                plus[b] += h;
                let mut minus = weights.clone();
                minus[b] -= h;
                let gp = {
                    let p: Vec<f64> = margins(&data, &plus).into_iter().map(sigmoid).collect();
                    likelihood_gradient(&data, &p)[a]
                };
                let gm = {
                    let p: Vec<f64> = margins(&data, &minus).into_iter().map(sigmoid).collect();
                    likelihood_gradient(&data, &p)[a]
                };
                // ∂g/∂w = −(ZᵀWZ)
                let fd = (gp - gm) / (2.0 * h);
                let denom = curvature[a * d + b].abs().max(1.0);
                assert!(
                    ((-curvature[a * d + b] - fd) / denom).abs() < 1e-5,
                    "entry ({a},{b})"
                );
            }
        }
    }

    #[test]
    fn awp_with_zero_budget_returns_the_base() {
        let data = generate_synthetic(&spec(60, 2, 2.0, 17)).unwrap();
        let base = train_logistic(&data, 50, 1e-10).unwrap();
        let config = AwpConfig::new(0.0).unwrap();
        let outcome = awp_perturb(&base, &data, 0, 1, &config).unwrap();
        assert_eq!(outcome.model.weights, base.weights);
        assert!(matches!(
            outcome.stop,
            AwpStop::BudgetExhausted | AwpStop::AlreadyAtCap
        ));
    }

    #[test]
    fn awp_returns_immediately_when_cap_is_met() {
        let data = generate_synthetic(&spec(80, 2, 5.0, 17)).unwrap();
        let base = train_logistic(&data, 60, 1e-10).unwrap();
        // A well-separated sample already scores above 0.9 for its label.
        let sample = 0;
        let class = data.labels()[sample];
        let config = AwpConfig::new(0.05).unwrap();
        let outcome = awp_perturb(&base, &data, sample, class, &config).unwrap();
        assert_eq!(outcome.stop, AwpStop::AlreadyAtCap);
        assert_eq!(outcome.model.weights, base.weights);
    }

    #[test]
    fn awp_respects_the_budget_exactly() {
        let data = generate_synthetic(&spec(100, 2, 2.0, 21)).unwrap();
        let base = train_logistic(&data, 50, 1e-10).unwrap();
        for class in [0u8, 1u8] {
            let config = AwpConfig::new(0.05).unwrap();
            let outcome = awp_perturb(&base, &data, 3, class, &config).unwrap();
            let loss = mean_log_loss(&data, &outcome.model.weights);
            assert!(loss <= base.train_loss + 0.05 + 1e-12);
        }
    }

    #[test]
    fn awp_budget_monotonicity_in_epsilon() {
        let data = generate_synthetic(&spec(100, 2, 2.0, 23)).unwrap();
        let base = train_logistic(&data, 50, 1e-10).unwrap();
        let target = 7;
        let mut last = 0.0;
        for eps in [0.01, 0.02, 0.05, 0.1] {
            let config = AwpConfig::new(eps).unwrap();
            let outcome = awp_perturb(&base, &data, target, 1, &config).unwrap();
            let score = target_score(&outcome.model.weights, data.row(target), 1);
            assert!(score >= last - 1e-12, "eps {eps}: {score} < {last}");
            last = score;
        }
    }

    #[test]
    fn label_flip_is_an_involution_and_small_at_duplicates() {
        // 30 duplicated points; flipping one of them barely moves the fit.
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..15 {
            features.extend([-1.0, -0.5]);
            labels.push(0);
            features.extend([1.0, 0.5]);
            labels.push(1);
        }
        let data = Dataset::new(features, labels, vec!["a".into(), "b".into()]).unwrap();
        let base = train_logistic(&data, 40, 1e-10).unwrap();
        let flipped = label_flip_retrain(&data, 0, 40, 1e-10).unwrap();
        let base_loss_on_data: f64 = mean_log_loss(&data, &base.weights);
        let flip_loss_on_data: f64 = mean_log_loss(&data, &flipped.weights);
        // One point's influence at the optimum is O(1/n).
        assert!((flip_loss_on_data - base_loss_on_data).abs() < 0.35);

        // Flip twice → identical training problem → identical model.
        let mut twice = data.clone();
        twice.labels[0] ^= 1;
        twice.labels[0] ^= 1;
        let again = train_logistic(&twice, 40, 1e-10).unwrap();
        assert_eq!(again.weights, base.weights);
    }

    #[test]
    fn single_sample_flip_predicts_the_flipped_label() {
        let data = Dataset::new(vec![1.0], vec![0], vec!["z".into()]).unwrap();
        let model = label_flip_retrain(&data, 0, 100, 1e-12).unwrap();
        assert!(sigmoid(model.weights[0]) > 0.5);
    }

    #[test]
    fn emitted_tensor_round_trips_the_models() {
        let data = generate_synthetic(&spec(40, 2, 2.0, 31)).unwrap();
        let base = train_logistic(&data, 50, 1e-10).unwrap();
        let tensor = emit_scores(std::slice::from_ref(&base), &data).unwrap();
        assert_eq!(tensor.num_models(), 1);
        assert_eq!(tensor.num_samples(), 40);
        let losses = tensor.model_losses().unwrap();
        assert_abs_diff_eq!(losses[0], base.train_loss, epsilon = 1e-12);
    }

    #[test]
    fn mismatched_model_dimension_is_rejected() {
        let data = generate_synthetic(&spec(10, 2, 1.0, 1)).unwrap();
        let model = LogisticModel {
            weights: vec![0.1, 0.2, 0.3],
            train_loss: 0.5,
            provenance: Provenance::Ingested,
        };
        assert!(emit_scores(&[model], &data).is_err());
    }

    #[test]
    fn invalid_synthetic_specs_error() {
        assert!(generate_synthetic(&spec(1, 2, 1.0, 0)).is_err());
        assert!(generate_synthetic(&spec(10, 0, 1.0, 0)).is_err());
        assert!(generate_synthetic(&spec(10, 2, -1.0, 0)).is_err());
    }
}
