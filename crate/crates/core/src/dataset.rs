//! PU datasets: loading, scaling, synthetic generation and ground-truth sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

/// Name of the label column written by [`write_csv`].
pub const DEFAULT_LABEL_COLUMN: &str = "label";

pub const N_NEGATIVE_ROWS: usize = 4000;
pub const N_POSITIVE_ROWS: usize = 500;
pub const N_RELEVANT: usize = 25;
pub const N_UNIFORM_IRRELEVANT: usize = 20;
pub const N_NOISY_IRRELEVANT: usize = 5;
pub const N_FEATURES: usize = N_RELEVANT + N_UNIFORM_IRRELEVANT + N_NOISY_IRRELEVANT;

const CLUSTER_MEAN_RANGE: f64 = 5.0;
const CLUSTER_VARIANCE: f64 = 10.0;
const OUTLIER_VARIANCE: f64 = 25.0;
const IRRELEVANT_RANGE: f64 = 10.0;
const NOISE_VARIANCE: f64 = 1.0;

/// A PU dataset: features plus the labeled-positive indicator `s`.
///
/// `relevant_truth` and `y_truth` only exist for synthetic data and are never
/// consulted by the selection pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Matrix,
    pub s: Vec<bool>,
    pub feature_names: Option<Vec<String>>,
    pub relevant_truth: Option<Vec<bool>>,
    pub y_truth: Option<Vec<bool>>,
    pub origin: Option<SyntheticSpec>,
}

impl Dataset {
    /// Build a dataset, checking the PU invariants.
    pub fn new(x: Matrix, s: Vec<bool>) -> Result<Self> {
        let data = Dataset {
            x,
            s,
            feature_names: None,
            relevant_truth: None,
            y_truth: None,
            origin: None,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features() {
            return Err(Error::LengthMismatch {
                expected: self.n_features(),
                found: names.len(),
            });
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if self.x.cols() == 0 {
            return Err(Error::NoFeatures);
        }
        if self.s.len() != self.x.rows() {
            return Err(Error::LengthMismatch {
                expected: self.x.rows(),
                found: self.s.len(),
            });
        }
        if let Some((i, _)) = self
            .x
            .as_slice()
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite())
        {
            return Err(Error::NonFinite {
                row: i / self.x.cols(),
                column: self.feature_name(i % self.x.cols()),
            });
        }
        let labeled = self.n_labeled();
        if labeled == 0 {
            return Err(Error::AllUnlabeled);
        }
        if labeled == self.n_rows() {
            return Err(Error::AllLabeled);
        }
        if let Some(truth) = &self.relevant_truth {
            if truth.len() != self.n_features() {
                return Err(Error::LengthMismatch {
                    expected: self.n_features(),
                    found: truth.len(),
                });
            }
            if !truth.iter().any(|&t| t) {
                return Err(Error::EmptyGroundTruth);
            }
        }
        if let Some(y) = &self.y_truth {
            if y.len() != self.n_rows() {
                return Err(Error::LengthMismatch {
                    expected: self.n_rows(),
                    found: y.len(),
                });
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.x.rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    pub fn n_labeled(&self) -> usize {
        self.s.iter().filter(|&&v| v).count()
    }

    pub fn feature_name(&self, i: usize) -> String {
        match &self.feature_names {
            Some(names) => names[i].clone(),
            None => format!("f{i}"),
        }
    }

    pub fn feature_names_or_default(&self) -> Vec<String> {
        (0..self.n_features())
            .map(|i| self.feature_name(i))
            .collect()
    }

    /// Indices of the ground-truth relevant features, if known.
    pub fn relevant_indices(&self) -> Option<Vec<usize>> {
        self.relevant_truth.as_ref().map(|t| {
            t.iter()
                .enumerate()
                .filter(|(_, &r)| r)
                .map(|(i, _)| i)
                .collect()
        })
    }
}

/// Per-feature min/max fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn fit_minmax(data: &Dataset) -> NormalizationParams {
    let d = data.n_features();
    let mut min = vec![f64::INFINITY; d];
    let mut max = vec![f64::NEG_INFINITY; d];
    for r in 0..data.n_rows() {
        for (c, &v) in data.x.row(r).iter().enumerate() {
            min[c] = min[c].min(v);
            max[c] = max[c].max(v);
        }
    }
    NormalizationParams { min, max }
}

/// Map each feature to `(x - min) / (max - min)`. Constant features become 0.
/// No clipping: held-out values may leave `[0, 1]`.
pub fn apply_minmax(data: &Dataset, params: &NormalizationParams) -> Result<Dataset> {
    if params.min.len() != data.n_features() || params.max.len() != data.n_features() {
        return Err(Error::LengthMismatch {
            expected: data.n_features(),
            found: params.min.len(),
        });
    }
    let mut out = data.clone();
    for r in 0..out.n_rows() {
        for (c, v) in out.x.row_mut(r).iter_mut().enumerate() {
            let range = params.max[c] - params.min[c];
            *v = if range > 0.0 {
                (*v - params.min[c]) / range
            } else {
                0.0
            };
        }
    }
    Ok(out)
}

pub fn normalize(data: &Dataset) -> Dataset {
    let params = fit_minmax(data);
    apply_minmax(data, &params).expect("params fitted on the same data")
}

// ---------------------------------------------------------------------------
// CSV I/O

/// Ground-truth sidecar written next to synthetic CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub relevant_columns: Vec<String>,
    pub positive_rows: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<SyntheticSpec>,
}

/// `data.csv` -> `data.truth.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("truth.json")
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn parse_label(raw: &str, row: usize) -> Result<bool> {
    match raw.trim().parse::<f64>() {
        Ok(v) if v == 0.0 => Ok(false),
        Ok(v) if v == 1.0 => Ok(true),
        _ => Err(Error::InvalidLabel {
            row,
            value: raw.to_string(),
        }),
    }
}

/// Load a PU dataset. `s` comes from `label_column`; every other column is a
/// feature, kept in file order. A `.truth.json` sidecar, if present, fills in
/// the ground truth.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)?;
    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn(label_column.to_string()))?;
    let names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if names.is_empty() {
        return Err(Error::NoFeatures);
    }

    let mut values = Vec::new();
    let mut s = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                s.push(parse_label(cell, row)?);
                continue;
            }
            let v: f64 = cell.trim().parse().map_err(|_| Error::NonNumeric {
                row,
                column: header[i].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    column: header[i].clone(),
                });
            }
            values.push(v);
        }
    }
    if s.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let x = Matrix::new(s.len(), names.len(), values);
    let mut data = Dataset::new(x, s)?.with_feature_names(names)?;

    let sidecar = sidecar_path(path);
    if sidecar.exists() {
        let truth = read_ground_truth(&sidecar)?;
        attach_ground_truth(&mut data, &truth)?;
    }
    Ok(data)
}

fn attach_ground_truth(data: &mut Dataset, truth: &GroundTruth) -> Result<()> {
    let names = data.feature_names_or_default();
    let mut relevant = vec![false; names.len()];
    for col in &truth.relevant_columns {
        let i = names
            .iter()
            .position(|n| n == col)
            .ok_or_else(|| Error::Config(format!("sidecar names unknown column '{col}'")))?;
        relevant[i] = true;
    }
    let mut y = vec![false; data.n_rows()];
    for &r in &truth.positive_rows {
        if r >= y.len() {
            return Err(Error::LengthMismatch {
                expected: y.len(),
                found: r + 1,
            });
        }
        y[r] = true;
    }
    data.relevant_truth = Some(relevant);
    data.y_truth = Some(y);
    data.origin = truth.spec.clone();
    data.validate()
}

/// Write features plus a `label` column. Floats use the shortest
/// representation that parses back to the same bits. Ground truth, when
/// present, goes to the sidecar only.
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let names = data.feature_names_or_default();
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = names.clone();
    header.push(DEFAULT_LABEL_COLUMN.to_string());
    writer.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for r in 0..data.n_rows() {
        record.clear();
        record.extend(data.x.row(r).iter().map(|v| format!("{v:?}")));
        record.push(if data.s[r] { "1" } else { "0" }.to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;

    if data.relevant_truth.is_some() || data.y_truth.is_some() {
        let relevant_columns = data
            .relevant_indices()
            .unwrap_or_default()
            .into_iter()
            .map(|i| names[i].clone())
            .collect();
        let positive_rows = data
            .y_truth
            .as_ref()
            .map(|y| {
                y.iter()
                    .enumerate()
                    .filter(|(_, &p)| p)
                    .map(|(i, _)| i)
                    .collect()
            })
            .unwrap_or_default();
        let truth = GroundTruth {
            relevant_columns,
            positive_rows,
            spec: data.origin.clone(),
        };
        fs::write(sidecar_path(path), serde_json::to_string_pretty(&truth)?)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Synthetic generators

/// Parameters of one synthetic benchmark condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub cluster_assumption: bool,
    pub labeled_rate: f64,
    pub n_negative_clusters: usize,
    pub n_positive_clusters: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn clustered(labeled_rate: f64, n_negative: usize, n_positive: usize, seed: u64) -> Self {
        Self {
            cluster_assumption: true,
            labeled_rate,
            n_negative_clusters: n_negative,
            n_positive_clusters: n_positive,
            seed,
        }
    }

    pub fn outlier(labeled_rate: f64, seed: u64) -> Self {
        Self {
            cluster_assumption: false,
            labeled_rate,
            n_negative_clusters: 0,
            n_positive_clusters: 0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.labeled_rate > 0.0 && self.labeled_rate <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "labeled_rate must be in (0, 1], got {}",
                self.labeled_rate
            )));
        }
        if self.cluster_assumption
            && (self.n_negative_clusters == 0 || self.n_positive_clusters == 0)
        {
            return Err(Error::InvalidSpec(
                "cluster counts must be at least 1".to_string(),
            ));
        }
        Ok(())
    }

    /// Short label in the `{✓, 10%, 8, 1}` style used for result tables.
    pub fn label(&self) -> String {
        let pct = (self.labeled_rate * 100.0).round();
        if self.cluster_assumption {
            format!(
                "{{✓, {pct}%, {}, {}}}",
                self.n_negative_clusters, self.n_positive_clusters
            )
        } else {
            format!("{{×, {pct}%}}")
        }
    }
}

/// Generate the dataset described by `spec`, dispatching on `cluster_assumption`.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.cluster_assumption {
        generate_clustered(spec)
    } else {
        generate_outlier(spec.labeled_rate, spec.seed)
    }
}

/// Split `total` rows over `parts` groups as evenly as possible.
fn split_rows(total: usize, parts: usize) -> Vec<usize> {
    (0..parts)
        .map(|i| total / parts + usize::from(i < total % parts))
        .collect()
}

fn labeled_count(rate: f64, positives: usize) -> usize {
    ((rate * positives as f64) + 1e-9).floor() as usize
}

/// Isotropic Gaussian blobs for the relevant block.
///
/// Negatives come first, positives after; rows are shuffled later.
pub fn generate_clustered(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    if !spec.cluster_assumption {
        return Err(Error::InvalidSpec(
            "generate_clustered requires cluster_assumption = true".to_string(),
        ));
    }
    let mut rng = rng::from_seed(spec.seed);
    let mean_dist =
        Uniform::new_inclusive(-CLUSTER_MEAN_RANGE, CLUSTER_MEAN_RANGE).expect("valid range");
    let std = CLUSTER_VARIANCE.sqrt();

    let mut relevant = Vec::with_capacity((N_NEGATIVE_ROWS + N_POSITIVE_ROWS) * N_RELEVANT);
    let mut y = Vec::with_capacity(N_NEGATIVE_ROWS + N_POSITIVE_ROWS);
    let groups = [
        (N_NEGATIVE_ROWS, spec.n_negative_clusters, false),
        (N_POSITIVE_ROWS, spec.n_positive_clusters, true),
    ];
    for (total, clusters, positive) in groups {
        for rows in split_rows(total, clusters) {
            let means: Vec<f64> = (0..N_RELEVANT)
                .map(|_| mean_dist.sample(&mut rng))
                .collect();
            let dists: Vec<Normal<f64>> = means
                .iter()
                .map(|&m| Normal::new(m, std).expect("finite std"))
                .collect();
            for _ in 0..rows {
                relevant.extend(dists.iter().map(|d| d.sample(&mut rng)));
                y.push(positive);
            }
        }
    }
    Ok(assemble(relevant, y, spec, &mut rng))
}

/// One wide Gaussian; the rows with the largest norm are the positives.
pub fn generate_outlier(labeled_rate: f64, seed: u64) -> Result<Dataset> {
    let spec = SyntheticSpec::outlier(labeled_rate, seed);
    spec.validate()?;
    let mut rng = rng::from_seed(seed);
    let n = N_NEGATIVE_ROWS + N_POSITIVE_ROWS;
    let normal = Normal::new(0.0, OUTLIER_VARIANCE.sqrt()).expect("finite std");
    let relevant: Vec<f64> = (0..n * N_RELEVANT)
        .map(|_| normal.sample(&mut rng))
        .collect();

    let norms: Vec<f64> = relevant
        .chunks_exact(N_RELEVANT)
        .map(|r| r.iter().map(|v| v * v).sum::<f64>())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    let mut y = vec![false; n];
    for &i in &order[..N_POSITIVE_ROWS] {
        y[i] = true;
    }
    Ok(assemble(relevant, y, &spec, &mut rng))
}

/// Append the irrelevant block, shuffle rows and columns, and reveal labels.
fn assemble(relevant: Vec<f64>, y: Vec<bool>, spec: &SyntheticSpec, rng: &mut rng::Rng) -> Dataset {
    let n = y.len();
    let uniform = Uniform::new_inclusive(-IRRELEVANT_RANGE, IRRELEVANT_RANGE).expect("valid range");
    let noise = Normal::new(0.0, NOISE_VARIANCE.sqrt()).expect("finite std");
    let sources = index::sample(rng, N_UNIFORM_IRRELEVANT, N_NOISY_IRRELEVANT).into_vec();

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for r in 0..n {
        let mut row = Vec::with_capacity(N_FEATURES);
        row.extend_from_slice(&relevant[r * N_RELEVANT..(r + 1) * N_RELEVANT]);
        let start = row.len();
        for _ in 0..N_UNIFORM_IRRELEVANT {
            row.push(uniform.sample(rng));
        }
        for &src in &sources {
            let v = row[start + src] + noise.sample(rng);
            row.push(v);
        }
        rows.push(row);
    }

    // column layout is randomized so that no index order favors relevant features
    let mut col_perm: Vec<usize> = (0..N_FEATURES).collect();
    col_perm.shuffle(rng);
    let mut row_perm: Vec<usize> = (0..n).collect();
    row_perm.shuffle(rng);

    let mut data = Vec::with_capacity(n * N_FEATURES);
    let mut y_out = Vec::with_capacity(n);
    for &r in &row_perm {
        data.extend(col_perm.iter().map(|&c| rows[r][c]));
        y_out.push(y[r]);
    }
    let relevant_truth: Vec<bool> = col_perm.iter().map(|&c| c < N_RELEVANT).collect();

    let positives: Vec<usize> = (0..n).filter(|&i| y_out[i]).collect();
    let n_labeled = labeled_count(spec.labeled_rate, positives.len()).max(1);
    let mut s = vec![false; n];
    for i in index::sample(rng, positives.len(), n_labeled) {
        s[positives[i]] = true;
    }
    Dataset {
        x: Matrix::new(n, N_FEATURES, data),
        s,
        feature_names: Some((0..N_FEATURES).map(|i| format!("f{i}")).collect()),
        relevant_truth: Some(relevant_truth),
        y_truth: Some(y_out),
        origin: Some(spec.clone()),
    }
}

/// Stratified row subsample: the labeled fraction is preserved (at least one
/// labeled and one unlabeled row survive). Row order is kept.
pub fn subsample_rows(data: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n >= data.n_rows() {
        return Ok(data.clone());
    }
    if n < 2 {
        return Err(Error::Config("subsample needs at least 2 rows".to_string()));
    }
    let labeled: Vec<usize> = (0..data.n_rows()).filter(|&i| data.s[i]).collect();
    let unlabeled: Vec<usize> = (0..data.n_rows()).filter(|&i| !data.s[i]).collect();
    let keep_labeled = ((labeled.len() as f64 * n as f64 / data.n_rows() as f64).round() as usize)
        .clamp(1, labeled.len().min(n - 1));
    let keep_unlabeled = (n - keep_labeled).min(unlabeled.len());

    let mut rng = rng::from_seed(seed);
    let mut rows: Vec<usize> = index::sample(&mut rng, labeled.len(), keep_labeled)
        .into_iter()
        .map(|i| labeled[i])
        .chain(
            index::sample(&mut rng, unlabeled.len(), keep_unlabeled)
                .into_iter()
                .map(|i| unlabeled[i]),
        )
        .collect();
    rows.sort_unstable();

    let out = Dataset {
        x: data.x.select_rows(&rows),
        s: rows.iter().map(|&r| data.s[r]).collect(),
        feature_names: data.feature_names.clone(),
        relevant_truth: data.relevant_truth.clone(),
        y_truth: data
            .y_truth
            .as_ref()
            .map(|y| rows.iter().map(|&r| y[r]).collect()),
        origin: data.origin.clone(),
    };
    out.validate()?;
    Ok(out)
}
