//! Dataset acquisition helpers: CSV parsing into [`BanditDataset`], the
//! synthetic linear generator, min-max scaling, and the 2D PCA diagnostic.
//!
//! The repository never ships the benchmark data files. `fetch_instructions`
//! (also surfaced by the CLI) documents where to download each dataset and
//! how to prepare it; the loaders accept both the raw sources and
//! preprocessed CSVs.

mod pca;

pub use pca::{pca2_variance, Pca2};

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::environment::BanditDataset;
use crate::error::{Error, Result};

/// Which column of a delimited file carries the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
    Last,
}

impl LabelColumn {
    /// Parse a CLI/config token: `last`, a 0-based column index, or a header
    /// name.
    pub fn parse(s: &str) -> Self {
        if s.eq_ignore_ascii_case("last") {
            LabelColumn::Last
        } else if let Ok(idx) = s.parse::<usize>() {
            LabelColumn::Index(idx)
        } else {
            LabelColumn::Name(s.to_string())
        }
    }
}

/// Everything needed to parse one delimited file into a dataset.
#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub name: String,
    pub path: PathBuf,
    pub label_column: LabelColumn,
    pub delimiter: u8,
    pub has_header: bool,
    /// Optional (rows, dims, classes) sanity triple; loading fails loudly on
    /// mismatch.
    pub expected_dims: Option<(usize, usize, usize)>,
}

impl DatasetSpec {
    pub fn custom(
        name: impl Into<String>,
        path: impl Into<PathBuf>,
        label_column: LabelColumn,
    ) -> Self {
        Self {
            name: name.into(),
            path: path.into(),
            label_column,
            delimiter: b',',
            has_header: false,
            expected_dims: None,
        }
    }

    /// Known benchmark layouts, rooted at `data_dir`. The CNAE-9 and
    /// Internet Advertisements raw files match the published dimensions
    /// exactly, so those are enforced; Covertype and Warfarin shapes depend
    /// on preprocessing and are left unchecked.
    pub fn preset(kind: &str, data_dir: &Path) -> Result<Self> {
        let spec = match kind {
            "cnae9" => Self {
                name: "cnae9".into(),
                path: data_dir.join("CNAE-9.data"),
                label_column: LabelColumn::Index(0),
                delimiter: b',',
                has_header: false,
                expected_dims: Some((1080, 856, 9)),
            },
            "internet_ads" => Self {
                name: "internet_ads".into(),
                path: data_dir.join("ad.data"),
                label_column: LabelColumn::Last,
                delimiter: b',',
                has_header: false,
                expected_dims: Some((3279, 1558, 2)),
            },
            "covertype" => Self {
                name: "covertype".into(),
                path: data_dir.join("covtype.data"),
                label_column: LabelColumn::Last,
                delimiter: b',',
                has_header: false,
                expected_dims: None,
            },
            "warfarin" => Self {
                name: "warfarin".into(),
                path: data_dir.join("warfarin.csv"),
                label_column: LabelColumn::Name("dose_class".into()),
                delimiter: b',',
                has_header: true,
                expected_dims: None,
            },
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown dataset preset '{}'; expected one of cnae9, internet_ads, covertype, warfarin",
                    other
                )))
            }
        };
        Ok(spec)
    }
}

/// Parse a delimited numeric file into a dataset.
///
/// Empty cells and `?` are treated as missing feature values and imputed
/// with the column mean (the count is logged). Label tokens are mapped to
/// `0..K` in first-appearance order.
pub fn load_csv(spec: &DatasetSpec) -> Result<BanditDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter)
        .has_headers(spec.has_header)
        .trim(csv::Trim::All)
        .from_path(&spec.path)?;

    let header: Option<csv::StringRecord> = if spec.has_header {
        Some(reader.headers()?.clone())
    } else {
        None
    };

    let mut label_idx: Option<usize> = match &spec.label_column {
        LabelColumn::Index(i) => Some(*i),
        LabelColumn::Last => None, // resolved from the first record
        LabelColumn::Name(name) => {
            let header = header.as_ref().ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "label column '{}' requested by name but the file has no header",
                    name
                ))
            })?;
            Some(
                header
                    .iter()
                    .position(|h| h == name)
                    .ok_or_else(|| {
                        Error::InvalidConfig(format!("label column '{}' not found in header", name))
                    })?,
            )
        }
    };

    let mut cells: Vec<Option<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut label_ids: HashMap<String, usize> = HashMap::new();
    let mut width: Option<usize> = None;

    for (row_idx, record) in reader.records().enumerate() {
        let row = row_idx + 1; // 1-based data rows in error messages
        let record = record?;
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::ParseRow {
                row,
                message: format!("expected {} fields, found {}", w, record.len()),
            });
        }
        let li = *label_idx.get_or_insert(w.saturating_sub(1));
        if li >= w {
            return Err(Error::InvalidConfig(format!(
                "label column index {} out of range for {} columns",
                li, w
            )));
        }

        for (col, field) in record.iter().enumerate() {
            if col == li {
                let next_id = label_ids.len();
                let id = *label_ids.entry(field.to_string()).or_insert(next_id);
                labels.push(id);
            } else if field.is_empty() || field == "?" {
                cells.push(None);
            } else {
                let v: f64 = field.parse().map_err(|e| Error::ParseRow {
                    row,
                    message: format!("column {}: cannot parse '{}' as a number ({})", col, field, e),
                })?;
                cells.push(Some(v));
            }
        }
    }

    let rows = labels.len();
    if rows == 0 {
        return Err(Error::InvalidConfig(format!(
            "no data rows in {}",
            spec.path.display()
        )));
    }
    let dim = cells.len() / rows;
    let num_arms = label_ids.len();
    if num_arms < 2 {
        return Err(Error::TooFewClasses(num_arms));
    }

    // column-mean imputation for missing feature cells
    let mut col_sum = vec![0.0; dim];
    let mut col_count = vec![0usize; dim];
    for (i, cell) in cells.iter().enumerate() {
        if let Some(v) = cell {
            col_sum[i % dim] += v;
            col_count[i % dim] += 1;
        }
    }
    let col_mean: Vec<f64> = col_sum
        .iter()
        .zip(col_count.iter())
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let mut imputed = 0usize;
    let contexts: Vec<f64> = cells
        .iter()
        .enumerate()
        .map(|(i, cell)| {
            cell.unwrap_or_else(|| {
                imputed += 1;
                col_mean[i % dim]
            })
        })
        .collect();
    if imputed > 0 {
        log::info!(
            "{}: imputed {} missing feature cells with column means",
            spec.name,
            imputed
        );
    }

    if let Some((er, ed, ek)) = spec.expected_dims {
        if (rows, dim, num_arms) != (er, ed, ek) {
            return Err(Error::DimsMismatch {
                name: spec.name.clone(),
                expected_rows: er,
                expected_dim: ed,
                expected_arms: ek,
                rows,
                dim,
                arms: num_arms,
            });
        }
    }

    BanditDataset::new(spec.name.clone(), contexts, labels, num_arms, dim)
}

/// The hidden coefficients behind a synthetic dataset, for oracle tests.
#[derive(Debug, Clone)]
pub struct SynthTruth {
    pub thetas: Vec<Vec<f64>>,
}

/// Linearly realizable synthetic dataset: per-arm coefficient vectors on the
/// unit sphere, contexts uniform on the unit sphere, and labels
/// `argmax_k theta_k . x` (plus optional Gaussian score noise).
pub fn synth_linear(
    rows: usize,
    dim: usize,
    arms: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<(BanditDataset, SynthTruth)> {
    if arms < 2 {
        return Err(Error::TooFewClasses(arms));
    }
    if dim == 0 {
        return Err(Error::InvalidDimension);
    }
    if rows == 0 {
        return Err(Error::InvalidConfig("rows must be >= 1".into()));
    }
    if !noise_sigma.is_finite() || noise_sigma < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "noise_sigma must be finite and >= 0, got {}",
            noise_sigma
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit_vec = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    };

    let thetas: Vec<Vec<f64>> = (0..arms).map(|_| unit_vec(&mut rng)).collect();
    let mut contexts = Vec::with_capacity(rows * dim);
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        let x = unit_vec(&mut rng);
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (k, theta) in thetas.iter().enumerate() {
            let mut score: f64 = theta.iter().zip(x.iter()).map(|(t, v)| t * v).sum();
            if noise_sigma > 0.0 {
                let noise: f64 = StandardNormal.sample(&mut rng);
                score += noise_sigma * noise;
            }
            if score > best_score {
                best = k;
                best_score = score;
            }
        }
        contexts.extend_from_slice(&x);
        labels.push(best);
    }
    let ds = BanditDataset::new("synthetic", contexts, labels, arms, dim)?;
    Ok((ds, SynthTruth { thetas }))
}

/// Scale every feature into [0, 1] over the dataset (constant columns map
/// to 0). Off by default: the algorithms operate on raw contexts, and
/// cluster distances change under scaling.
pub fn min_max_scale(ds: &BanditDataset) -> Result<BanditDataset> {
    let d = ds.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for t in 0..ds.rows() {
        for (j, &v) in ds.context(t).iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    let mut contexts = Vec::with_capacity(ds.rows() * d);
    let mut labels = Vec::with_capacity(ds.rows());
    for t in 0..ds.rows() {
        for (j, &v) in ds.context(t).iter().enumerate() {
            let span = hi[j] - lo[j];
            contexts.push(if span > 0.0 { (v - lo[j]) / span } else { 0.0 });
        }
        labels.push(ds.label(t));
    }
    BanditDataset::new(ds.name(), contexts, labels, ds.num_arms(), d)
}

/// Human-readable download and preparation instructions for the benchmark
/// datasets (printed by the CLI's `fetch-instructions` subcommand).
pub fn fetch_instructions() -> &'static str {
    "\
The benchmark data files are not redistributed with this repository.
Place the prepared files under ./data (or pass an explicit path):

  cnae9          data/CNAE-9.data
      curl -LO https://archive.ics.uci.edu/static/public/233/cnae+9.zip
      unzip cnae+9.zip CNAE-9.data -d data/
      Format: 1080 rows, label in column 0 (classes 1..9), 856 word-frequency
      features. Used as-is.

  internet_ads   data/ad.data
      curl -LO https://archive.ics.uci.edu/static/public/51/internet+advertisements.zip
      unzip internet+advertisements.zip ad.data -d data/
      Format: 3279 rows, 1558 features, label 'ad.'/'nonad.' in the last
      column. Missing cells are encoded as '?' and imputed with column means
      at load time.

  covertype      data/covtype.data
      curl -LO https://archive.ics.uci.edu/static/public/31/covertype.zip
      unzip covertype.zip covtype.data.gz -d data/ && gunzip data/covtype.data.gz
      Format: 581012 rows, 54 features (10 quantitative + 44 binary), cover
      type 1..7 in the last column. Published results describe 500000 rows
      and 95 features after an unspecified preprocessing step; the raw
      54-feature file is accepted as-is, and runs subsample it
      (default 20000 rows) for desk-scale experiments.

  warfarin       data/warfarin.csv
      Download the IWPC clinical dataset (iwpc_data_7_3_09_revised.xls) from
      https://www.pharmgkb.org/downloads (account required), export it as
      CSV, then run:
      python3 scripts/prepare_warfarin.py iwpc_data.csv data/warfarin.csv
      The script one-hot encodes demographics and genotype columns, buckets
      the weekly dose into 3 classes (<21, 21-49, >49 mg/week), and writes a
      headered CSV with a 'dose_class' label column.

scripts/fetch_data.sh automates the three UCI downloads.
"
}
