//! File formats: the score-tensor manifest, score/loss CSVs, and the
//! report outputs. All writes are atomic (write-temp-then-rename) and all
//! report numbers carry 12 significant digits.

use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rkit_core::{CapacitySummary, MetricsReport64, ProbVector64, ScoreTensor64};

use crate::CliError;

/// Top-level description of a stored score tensor; referenced files are
/// relative to the manifest's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreFileManifest {
    pub format_version: u32,
    pub n: usize,
    pub m: usize,
    pub c: usize,
    pub model_ids: Vec<String>,
    pub sample_ids: Vec<String>,
    pub score_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_file: Option<String>,
    /// Unit note for the loss column (the explorer writes mean
    /// cross-entropy in nats).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_units: Option<String>,
}

pub fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn io_err(path: &Path, err: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {err}", path.display()))
}

/// 12-significant-digit scientific rendering used in report CSVs.
pub fn fmt_sig12(x: f64) -> String {
    format!("{x:.11e}")
}

/// Rounds to 12 significant digits (identity on repeated application).
pub fn round_sig12(x: f64) -> f64 {
    if x.is_finite() {
        fmt_sig12(x).parse().expect("formatted float re-parses")
    } else {
        x
    }
}

fn opt_round(x: Option<f64>) -> Option<f64> {
    x.map(round_sig12)
}

/// Writes via a temp file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let file_name = path
        .file_name()
        .ok_or_else(|| io_err(path, "path has no file name"))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    {
        let mut file = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        file.write_all(contents).map_err(|e| io_err(&tmp, e))?;
        file.sync_all().map_err(|e| io_err(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))?;
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Loads a manifest plus its score and loss files into a validated tensor.
/// Rows are clipped and renormalized on ingestion.
pub fn load_score_tensor(manifest_path: &Path) -> Result<ScoreTensor64, CliError> {
    let text = read_to_string(manifest_path)?;
    let manifest: ScoreFileManifest = serde_json::from_str(&text)
        .map_err(|e| validation(format!("{}: {e}", manifest_path.display())))?;
    if manifest.format_version != 1 {
        return Err(validation(format!(
            "unsupported manifest format_version {} (expected 1)",
            manifest.format_version
        )));
    }
    if manifest.sample_ids.len() != manifest.n {
        return Err(validation(format!(
            "manifest declares n = {} but lists {} sample ids",
            manifest.n,
            manifest.sample_ids.len()
        )));
    }
    if manifest.model_ids.len() != manifest.m {
        return Err(validation(format!(
            "manifest declares m = {} but lists {} model ids",
            manifest.m,
            manifest.model_ids.len()
        )));
    }
    if manifest.c < 2 {
        return Err(validation(format!(
            "manifest declares c = {}; need at least 2 classes",
            manifest.c
        )));
    }
    let base_dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let score_path = base_dir.join(&manifest.score_file);

    let sample_index: HashMap<&str, usize> = manifest
        .sample_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let model_index: HashMap<&str, usize> = manifest
        .model_ids
        .iter()
        .enumerate()
        .map(|(j, id)| (id.as_str(), j))
        .collect();

    let mut reader = csv::Reader::from_path(&score_path).map_err(|e| io_err(&score_path, e))?;
    {
        let headers = reader.headers().map_err(|e| io_err(&score_path, e))?;
        let mut expected = vec!["sample_id".to_string(), "model_id".to_string()];
        expected.extend((0..manifest.c).map(|k| format!("class_{k}")));
        let got: Vec<String> = headers.iter().map(str::to_string).collect();
        if got != expected {
            return Err(validation(format!(
                "score header mismatch: expected {expected:?}, got {got:?}"
            )));
        }
    }

    let n = manifest.n;
    let m = manifest.m;
    let mut slots: Vec<Option<ProbVector64>> = vec![None; n * m];
    for record in reader.records() {
        let record = record.map_err(|e| validation(format!("{}: {e}", score_path.display())))?;
        let sample_id = record.get(0).unwrap_or_default();
        let model_id = record.get(1).unwrap_or_default();
        let i = *sample_index
            .get(sample_id)
            .ok_or_else(|| validation(format!("unknown sample id `{sample_id}` in scores")))?;
        let j = *model_index
            .get(model_id)
            .ok_or_else(|| validation(format!("unknown model id `{model_id}` in scores")))?;
        if slots[i * m + j].is_some() {
            return Err(validation(format!(
                "duplicate score row for ({sample_id}, {model_id})"
            )));
        }
        let mut raw = Vec::with_capacity(manifest.c);
        for k in 0..manifest.c {
            let field = record.get(2 + k).ok_or_else(|| {
                validation(format!("({sample_id}, {model_id}): missing class_{k}"))
            })?;
            let value: f64 = field.parse().map_err(|_| {
                validation(format!(
                    "({sample_id}, {model_id}): class_{k} value `{field}` is not a number"
                ))
            })?;
            raw.push(value);
        }
        let sum: f64 = raw.iter().sum();
        if !(0.99..=1.01).contains(&sum) {
            return Err(validation(format!(
                "({sample_id}, {model_id}): scores sum to {sum}; rows must be normalized \
                 probabilities (are these logits?)"
            )));
        }
        slots[i * m + j] = Some(
            ProbVector64::from_scores(raw)
                .map_err(|e| validation(format!("({sample_id}, {model_id}): {e}")))?,
        );
    }
    let mut scores = Vec::with_capacity(n * m);
    for (idx, slot) in slots.into_iter().enumerate() {
        match slot {
            Some(row) => scores.push(row),
            None => {
                return Err(validation(format!(
                    "missing score row for ({}, {})",
                    manifest.sample_ids[idx / m],
                    manifest.model_ids[idx % m]
                )))
            }
        }
    }

    let model_losses = match &manifest.loss_file {
        None => None,
        Some(loss_file) => {
            let loss_path = base_dir.join(loss_file);
            let mut reader =
                csv::Reader::from_path(&loss_path).map_err(|e| io_err(&loss_path, e))?;
            {
                let headers = reader.headers().map_err(|e| io_err(&loss_path, e))?;
                let got: Vec<&str> = headers.iter().collect();
                if got != ["model_id", "loss"] {
                    return Err(validation(format!(
                        "loss header mismatch: expected [model_id, loss], got {got:?}"
                    )));
                }
            }
            let mut losses: Vec<Option<f64>> = vec![None; m];
            for record in reader.records() {
                let record =
                    record.map_err(|e| validation(format!("{}: {e}", loss_path.display())))?;
                let model_id = record.get(0).unwrap_or_default();
                let j = *model_index.get(model_id).ok_or_else(|| {
                    validation(format!("unknown model id `{model_id}` in losses"))
                })?;
                if losses[j].is_some() {
                    return Err(validation(format!("duplicate loss for `{model_id}`")));
                }
                let field = record.get(1).unwrap_or_default();
                let value: f64 = field.parse().map_err(|_| {
                    validation(format!("loss for `{model_id}` is not a number: `{field}`"))
                })?;
                losses[j] = Some(value);
            }
            let mut out = Vec::with_capacity(m);
            for (j, loss) in losses.into_iter().enumerate() {
                out.push(loss.ok_or_else(|| {
                    validation(format!("missing loss for `{}`", manifest.model_ids[j]))
                })?);
            }
            Some(out)
        }
    };

    ScoreTensor64::new(
        manifest.sample_ids,
        manifest.model_ids,
        scores,
        model_losses,
    )
    .map_err(|e| validation(e.to_string()))
}

/// Writes a tensor as manifest + score CSV (+ loss CSV). Score and loss
/// values keep full round-trip precision.
pub fn save_tensor(
    tensor: &ScoreTensor64,
    manifest_path: &Path,
    score_file: &str,
    loss_file: Option<&str>,
    loss_units: Option<&str>,
) -> Result<Vec<PathBuf>, CliError> {
    let base_dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut written = Vec::new();

    let mut scores_csv = String::from("sample_id,model_id");
    for k in 0..tensor.num_classes() {
        scores_csv.push_str(&format!(",class_{k}"));
    }
    scores_csv.push('\n');
    for i in 0..tensor.num_samples() {
        for j in 0..tensor.num_models() {
            scores_csv.push_str(&tensor.sample_ids()[i]);
            scores_csv.push(',');
            scores_csv.push_str(&tensor.model_ids()[j]);
            for &v in tensor.score(i, j).values() {
                scores_csv.push_str(&format!(",{v}"));
            }
            scores_csv.push('\n');
        }
    }
    let score_path = base_dir.join(score_file);
    write_atomic(&score_path, scores_csv.as_bytes())?;
    written.push(score_path);

    let loss_file_name = match (loss_file, tensor.model_losses()) {
        (Some(name), Some(losses)) => {
            let mut csv = String::from("model_id,loss\n");
            for (id, loss) in tensor.model_ids().iter().zip(losses) {
                csv.push_str(&format!("{id},{loss}\n"));
            }
            let loss_path = base_dir.join(name);
            write_atomic(&loss_path, csv.as_bytes())?;
            written.push(loss_path);
            Some(name.to_string())
        }
        _ => None,
    };

    let manifest = ScoreFileManifest {
        format_version: 1,
        n: tensor.num_samples(),
        m: tensor.num_models(),
        c: tensor.num_classes(),
        model_ids: tensor.model_ids().to_vec(),
        sample_ids: tensor.sample_ids().to_vec(),
        score_file: score_file.to_string(),
        loss_file: loss_file_name,
        loss_units: loss_units.map(str::to_string),
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| validation(format!("manifest serialization: {e}")))?;
    write_atomic(manifest_path, json.as_bytes())?;
    written.push(manifest_path.to_path_buf());
    Ok(written)
}

/// Scalar block of `summary.json`. Fields that a command does not compute
/// are `null`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryFile {
    pub ambiguity: Option<f64>,
    pub discrepancy: Option<f64>,
    pub tail_mean_1pct: Option<f64>,
    pub tail_mean_5pct: Option<f64>,
    pub tail_stderr_1pct: Option<f64>,
    pub tail_stderr_5pct: Option<f64>,
    pub n_samples: usize,
    pub rashomon_model_ids: Option<Vec<String>>,
    pub config: serde_json::Value,
}

impl SummaryFile {
    fn rounded(mut self) -> Self {
        self.ambiguity = opt_round(self.ambiguity);
        self.discrepancy = opt_round(self.discrepancy);
        self.tail_mean_1pct = opt_round(self.tail_mean_1pct);
        self.tail_mean_5pct = opt_round(self.tail_mean_5pct);
        self.tail_stderr_1pct = opt_round(self.tail_stderr_1pct);
        self.tail_stderr_5pct = opt_round(self.tail_stderr_5pct);
        self
    }
}

pub fn write_summary(path: &Path, summary: SummaryFile) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(&summary.rounded())
        .map_err(|e| validation(format!("summary serialization: {e}")))?;
    write_atomic(path, json.as_bytes())
}

pub fn read_summary(path: &Path) -> Result<SummaryFile, CliError> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| validation(format!("{}: {e}", path.display())))
}

/// `per_sample.csv`: one row per sample, sorted by sample id.
pub fn write_per_sample(
    path: &Path,
    sample_ids: &[String],
    capacities: &[f64],
    multiplicities: &[f64],
) -> Result<(), CliError> {
    let mut order: Vec<usize> = (0..sample_ids.len()).collect();
    order.sort_by(|&a, &b| sample_ids[a].cmp(&sample_ids[b]));
    let mut csv = String::from("sample_id,capacity_bits,m_c\n");
    for i in order {
        csv.push_str(&format!(
            "{},{},{}\n",
            sample_ids[i],
            fmt_sig12(capacities[i]),
            fmt_sig12(multiplicities[i])
        ));
    }
    write_atomic(path, csv.as_bytes())
}

/// Reads a `per_sample.csv` back as (sample_ids, capacities, m_c).
pub fn read_per_sample(path: &Path) -> Result<(Vec<String>, Vec<f64>, Vec<f64>), CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    {
        let headers = reader.headers().map_err(|e| io_err(path, e))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != ["sample_id", "capacity_bits", "m_c"] {
            return Err(validation(format!(
                "per-sample header mismatch: expected [sample_id, capacity_bits, m_c], got {got:?}"
            )));
        }
    }
    let mut ids = Vec::new();
    let mut capacities = Vec::new();
    let mut multiplicities = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| validation(format!("{}: {e}", path.display())))?;
        ids.push(record.get(0).unwrap_or_default().to_string());
        for (field_idx, out) in [(1, &mut capacities), (2, &mut multiplicities)] {
            let field = record.get(field_idx).unwrap_or_default();
            let value: f64 = field
                .parse()
                .map_err(|_| validation(format!("bad number `{field}` in {}", path.display())))?;
            out.push(value);
        }
    }
    if ids.is_empty() {
        return Err(validation(format!("{}: no rows", path.display())));
    }
    Ok((ids, capacities, multiplicities))
}

pub fn write_cdf(path: &Path, cdf_points: &[(f64, f64)]) -> Result<(), CliError> {
    let mut csv = String::from("capacity_bits,cumulative_fraction\n");
    for &(value, fraction) in cdf_points {
        csv.push_str(&format!("{},{}\n", fmt_sig12(value), fmt_sig12(fraction)));
    }
    write_atomic(path, csv.as_bytes())
}

/// Writes summary.json, per_sample.csv, and cdf.csv for a full report.
pub fn save_report(
    report: &MetricsReport64,
    config_echo: serde_json::Value,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let summary_path = out_dir.join("summary.json");
    write_summary(
        &summary_path,
        SummaryFile {
            ambiguity: Some(report.ambiguity),
            discrepancy: Some(report.discrepancy),
            tail_mean_1pct: Some(report.tail_mean_1pct),
            tail_mean_5pct: Some(report.tail_mean_5pct),
            tail_stderr_1pct: Some(report.tail_stderr_1pct),
            tail_stderr_5pct: Some(report.tail_stderr_5pct),
            n_samples: report.sample_ids.len(),
            rashomon_model_ids: Some(report.rashomon_model_ids.clone()),
            config: config_echo,
        },
    )?;
    let per_sample_path = out_dir.join("per_sample.csv");
    write_per_sample(
        &per_sample_path,
        &report.sample_ids,
        &report.per_sample_capacity,
        &report.per_sample_multiplicity,
    )?;
    let cdf_path = out_dir.join("cdf.csv");
    write_cdf(&cdf_path, &report.cdf_points)?;
    Ok(vec![summary_path, per_sample_path, cdf_path])
}

/// Summary + CDF files recomputed from bare capacities (the `report`
/// subcommand path, where ambiguity/discrepancy are unavailable).
pub fn save_recomputed_summary(
    summary: &CapacitySummary<f64>,
    n_samples: usize,
    config_echo: serde_json::Value,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let summary_path = out_dir.join("summary.json");
    write_summary(
        &summary_path,
        SummaryFile {
            ambiguity: None,
            discrepancy: None,
            tail_mean_1pct: Some(summary.tail_mean_1pct),
            tail_mean_5pct: Some(summary.tail_mean_5pct),
            tail_stderr_1pct: Some(summary.tail_stderr_1pct),
            tail_stderr_5pct: Some(summary.tail_stderr_5pct),
            n_samples,
            rashomon_model_ids: None,
            config: config_echo,
        },
    )?;
    let cdf_path = out_dir.join("cdf.csv");
    write_cdf(&cdf_path, &summary.cdf_points)?;
    Ok(vec![summary_path, cdf_path])
}

/// Loads a feature/label CSV: every column is a feature except the named
/// label column, whose values must be 0 or 1.
pub fn load_dataset_csv(path: &Path, label_col: &str) -> Result<rkit_core::Dataset64, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| io_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_col)
        .ok_or_else(|| validation(format!("no `{label_col}` column in {}", path.display())))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if feature_names.is_empty() {
        return Err(validation("dataset has no feature columns"));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| validation(format!("{}: {e}", path.display())))?;
        for (k, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| {
                validation(format!(
                    "row {}: `{field}` in column `{}` is not a number",
                    row_idx + 1,
                    headers[k]
                ))
            })?;
            if k == label_idx {
                if value == 0.0 {
                    labels.push(0u8);
                } else if value == 1.0 {
                    labels.push(1u8);
                } else {
                    return Err(validation(format!(
                        "row {}: label `{field}` is not 0 or 1",
                        row_idx + 1
                    )));
                }
            } else {
                features.push(value);
            }
        }
    }
    rkit_core::Dataset64::new(features, labels, feature_names)
        .map_err(|e| validation(e.to_string()))
}
