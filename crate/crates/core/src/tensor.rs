//! Dataset-level score storage: `n` samples × `m` models × `c` classes,
//! with optional per-model empirical losses and Rashomon-set filtering.

use crate::capacity::ScoreSet;
use crate::error::{Error, Result};
use crate::scalar::{as_f64, Scalar};
use crate::simplex::ProbVector;

/// Full score tensor plus identifiers and optional per-model losses.
///
/// Scores are stored sample-major: the row for `(sample i, model j)` sits
/// at `i * m + j`.
#[derive(Debug, Clone)]
pub struct ScoreTensor<S> {
    sample_ids: Vec<String>,
    model_ids: Vec<String>,
    scores: Vec<ProbVector<S>>,
    model_losses: Option<Vec<S>>,
    num_classes: usize,
}

impl<S: Scalar> ScoreTensor<S> {
    pub fn new(
        sample_ids: Vec<String>,
        model_ids: Vec<String>,
        scores: Vec<ProbVector<S>>,
        model_losses: Option<Vec<S>>,
    ) -> Result<Self> {
        let n = sample_ids.len();
        let m = model_ids.len();
        if n == 0 {
            return Err(Error::InvalidTensor("no samples".into()));
        }
        if m == 0 {
            return Err(Error::InvalidTensor("no models".into()));
        }
        if scores.len() != n * m {
            return Err(Error::InvalidTensor(format!(
                "expected {} score rows for {n} samples × {m} models, got {}",
                n * m,
                scores.len()
            )));
        }
        for (label, ids) in [("sample", &sample_ids), ("model", &model_ids)] {
            let mut sorted: Vec<&String> = ids.iter().collect();
            sorted.sort();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidTensor(format!("duplicate {label} ids")));
            }
        }
        let c = scores[0].dim();
        if c < 2 {
            return Err(Error::InvalidTensor(format!(
                "scores need at least 2 classes, got {c}"
            )));
        }
        for row in &scores {
            if row.dim() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    actual: row.dim(),
                });
            }
        }
        if let Some(losses) = &model_losses {
            if losses.len() != m {
                return Err(Error::InvalidTensor(format!(
                    "{} losses for {m} models",
                    losses.len()
                )));
            }
            if let Some(bad) = losses.iter().find(|l| !l.is_finite()) {
                return Err(Error::InvalidTensor(format!("non-finite loss {bad}")));
            }
        }
        Ok(Self {
            sample_ids,
            model_ids,
            scores,
            model_losses,
            num_classes: c,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn num_models(&self) -> usize {
        self.model_ids.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn model_losses(&self) -> Option<&[S]> {
        self.model_losses.as_deref()
    }

    pub fn score(&self, sample: usize, model: usize) -> &ProbVector<S> {
        &self.scores[sample * self.num_models() + model]
    }

    /// Channel holding the rows of `model_subset` for one sample.
    pub fn score_set_for_sample(
        &self,
        sample: usize,
        model_subset: &[usize],
    ) -> Result<ScoreSet<S>> {
        if sample >= self.num_samples() {
            return Err(Error::InvalidArgument(format!(
                "sample index {sample} out of range for {} samples",
                self.num_samples()
            )));
        }
        if model_subset.is_empty() {
            return Err(Error::InvalidArgument("empty model subset".into()));
        }
        let mut rows = Vec::with_capacity(model_subset.len());
        let mut ids = Vec::with_capacity(model_subset.len());
        for &j in model_subset {
            if j >= self.num_models() {
                return Err(Error::InvalidArgument(format!(
                    "model index {j} out of range for {} models",
                    self.num_models()
                )));
            }
            rows.push(self.score(sample, j).clone());
            ids.push(self.model_ids[j].clone());
        }
        ScoreSet::new(rows, ids)
    }
}

/// How the loss threshold of the Rashomon set is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RashomonMode {
    /// Keep models with `loss ≤ epsilon`.
    Absolute,
    /// Keep models with `loss ≤ min_loss + epsilon`.
    Relative,
}

/// Loss threshold plus the reference model used for thresholded-prediction
/// comparisons.
///
/// The reference model defaults to the lowest-loss model (ties to the
/// lowest index) and is *not* required to qualify for the filtered set
/// itself.
#[derive(Debug, Clone)]
pub struct RashomonSpec<S> {
    pub mode: RashomonMode,
    pub epsilon: S,
    pub base_model: Option<String>,
}

impl<S: Scalar> RashomonSpec<S> {
    pub fn new(mode: RashomonMode, epsilon: S) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < S::zero() {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be finite and ≥ 0, got {epsilon}"
            )));
        }
        Ok(Self {
            mode,
            epsilon,
            base_model: None,
        })
    }

    pub fn with_base_model(mut self, id: impl Into<String>) -> Self {
        self.base_model = Some(id.into());
        self
    }
}

/// Index of the lowest-loss model, ties to the lowest index.
fn lowest_loss_index<S: Scalar>(losses: &[S]) -> usize {
    let mut best = 0;
    for (j, &l) in losses.iter().enumerate().skip(1) {
        if l < losses[best] {
            best = j;
        }
    }
    best
}

/// Resolves the reference model of `spec` against the tensor.
pub fn resolve_base_model<S: Scalar>(
    tensor: &ScoreTensor<S>,
    spec: &RashomonSpec<S>,
) -> Result<usize> {
    match &spec.base_model {
        Some(id) => tensor
            .model_ids()
            .iter()
            .position(|m| m == id)
            .ok_or_else(|| Error::UnknownModel(id.clone())),
        None => {
            let losses = tensor.model_losses().ok_or(Error::MissingLosses)?;
            Ok(lowest_loss_index(losses))
        }
    }
}

/// Indices of the models whose loss qualifies under `spec`, in ascending
/// order. Errs when losses are missing or no model qualifies; the error
/// names the smallest epsilon that would admit at least one model.
pub fn filter_rashomon_set<S: Scalar>(
    tensor: &ScoreTensor<S>,
    spec: &RashomonSpec<S>,
) -> Result<Vec<usize>> {
    let losses = tensor.model_losses().ok_or(Error::MissingLosses)?;
    let min_loss = losses[lowest_loss_index(losses)];
    let threshold = match spec.mode {
        RashomonMode::Absolute => spec.epsilon,
        RashomonMode::Relative => min_loss + spec.epsilon,
    };
    let subset: Vec<usize> = (0..losses.len())
        .filter(|&j| losses[j] <= threshold)
        .collect();
    if subset.is_empty() {
        return Err(Error::EmptyRashomonSet {
            min_epsilon: as_f64(min_loss),
        });
    }
    Ok(subset)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor_with_losses(losses: &[f64]) -> ScoreTensor<f64> {
        let m = losses.len();
        let sample_ids = vec!["s0".to_string()];
        let model_ids = (0..m).map(|j| format!("m{j}")).collect();
        let scores = (0..m)
            .map(|_| ProbVector::new(vec![0.5, 0.5]).unwrap())
            .collect();
        ScoreTensor::new(sample_ids, model_ids, scores, Some(losses.to_vec())).unwrap()
    }

    #[test]
    fn relative_filter_thresholds_against_minimum() {
        let tensor = tensor_with_losses(&[0.30, 0.31, 0.50]);
        let spec = RashomonSpec::new(RashomonMode::Relative, 0.02).unwrap();
        assert_eq!(filter_rashomon_set(&tensor, &spec).unwrap(), vec![0, 1]);
    }

    #[test]
    fn absolute_filter_uses_raw_threshold() {
        let tensor = tensor_with_losses(&[0.30, 0.31, 0.50]);
        let spec = RashomonSpec::new(RashomonMode::Absolute, 0.60).unwrap();
        assert_eq!(filter_rashomon_set(&tensor, &spec).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn minimizer_always_qualifies_in_relative_mode() {
        let tensor = tensor_with_losses(&[0.30]);
        let spec = RashomonSpec::new(RashomonMode::Relative, 0.0).unwrap();
        assert_eq!(filter_rashomon_set(&tensor, &spec).unwrap(), vec![0]);
    }

    #[test]
    fn empty_result_names_tightest_epsilon() {
        let tensor = tensor_with_losses(&[0.30, 0.31]);
        let spec = RashomonSpec::new(RashomonMode::Absolute, 0.1).unwrap();
        match filter_rashomon_set(&tensor, &spec) {
            Err(Error::EmptyRashomonSet { min_epsilon }) => {
                assert!((min_epsilon - 0.30).abs() < 1e-12)
            }
            other => panic!("expected EmptyRashomonSet, got {other:?}"),
        }
    }

    #[test]
    fn missing_losses_error() {
        let tensor = ScoreTensor::new(
            vec!["s0".into()],
            vec!["m0".into()],
            vec![ProbVector::new(vec![0.5, 0.5]).unwrap()],
            None,
        )
        .unwrap();
        let spec = RashomonSpec::new(RashomonMode::Relative, 0.1).unwrap();
        assert!(matches!(
            filter_rashomon_set(&tensor, &spec),
            Err(Error::MissingLosses)
        ));
    }

    #[test]
    fn base_model_defaults_to_loss_minimizer_with_index_ties() {
        let tensor = tensor_with_losses(&[0.31, 0.30, 0.30]);
        let spec = RashomonSpec::new(RashomonMode::Relative, 0.1).unwrap();
        assert_eq!(resolve_base_model(&tensor, &spec).unwrap(), 1);
        let spec = spec.with_base_model("m2");
        assert_eq!(resolve_base_model(&tensor, &spec).unwrap(), 2);
    }

    #[test]
    fn unknown_base_model_errors() {
        let tensor = tensor_with_losses(&[0.3]);
        let spec = RashomonSpec::new(RashomonMode::Relative, 0.1)
            .unwrap()
            .with_base_model("nope");
        assert!(matches!(
            resolve_base_model(&tensor, &spec),
            Err(Error::UnknownModel(_))
        ));
    }

    #[test]
    fn tensor_validation_catches_duplicates_and_shape() {
        let pv = || ProbVector::new(vec![0.5, 0.5]).unwrap();
        assert!(ScoreTensor::<f64>::new(
            vec!["a".into(), "a".into()],
            vec!["m".into()],
            vec![pv(), pv()],
            None
        )
        .is_err());
        assert!(ScoreTensor::<f64>::new(
            vec!["a".into()],
            vec!["m".into()],
            vec![pv(), pv()],
            None
        )
        .is_err());
        assert!(ScoreTensor::new(
            vec!["a".into()],
            vec!["m".into()],
            vec![pv()],
            Some(vec![f64::NAN])
        )
        .is_err());
    }
}
