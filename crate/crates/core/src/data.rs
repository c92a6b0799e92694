//! Datasets: LIBSVM and CSV ingestion, standardization and seeded synthetic
//! generation.
//!
//! Features are stored densely as an `n x d` matrix, one row per sample.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: DMatrix<f64>,
    pub labels: DVector<f64>,
    pub name: String,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, labels: DVector<f64>, name: impl Into<String>) -> Result<Self> {
        let (n, d) = features.shape();
        if n == 0 || d == 0 {
            return Err(Error::Precondition(format!("dataset must be non-empty, got {n}x{d}")));
        }
        if labels.len() != n {
            return Err(Error::Precondition(format!(
                "{} labels for {n} feature rows",
                labels.len()
            )));
        }
        if features.iter().chain(labels.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Precondition("dataset contains NaN or Inf".into()));
        }
        Ok(Dataset {
            features,
            labels,
            name: name.into(),
        })
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    /// Number of features.
    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Keep at most `n_max` rows, chosen uniformly without replacement by `seed`.
    /// Selected rows keep their original relative order.
    pub fn subsample(&self, n_max: usize, seed: u64) -> Dataset {
        if n_max >= self.len() {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = sample(&mut rng, self.len(), n_max).into_vec();
        rows.sort_unstable();
        Dataset {
            features: self.features.select_rows(rows.iter()),
            labels: DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.labels[i])),
            name: format!("{}[sub{n_max}]", self.name),
        }
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

/// Map `{-1,+1}` and `{1,2}` label sets onto `{0,1}`; leave anything else alone.
fn normalize_labels(labels: &mut [f64]) {
    let within = |set: &[f64]| labels.iter().all(|l| set.contains(l));
    if within(&[-1.0, 1.0]) {
        labels.iter_mut().for_each(|l| *l = if *l > 0.0 { 1.0 } else { 0.0 });
    } else if within(&[1.0, 2.0]) {
        labels.iter_mut().for_each(|l| *l -= 1.0);
    }
}

fn parse_real(tok: &str) -> Option<f64> {
    tok.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Read a LIBSVM file (`label idx:val idx:val ...`, 1-based increasing indices).
/// The feature dimension is the largest index seen.
pub fn load_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    load_libsvm_impl(path.as_ref(), None)
}

/// Like [`load_libsvm`] but pads the feature dimension to `dim`.
pub fn load_libsvm_dim(path: impl AsRef<Path>, dim: usize) -> Result<Dataset> {
    load_libsvm_impl(path.as_ref(), Some(dim))
}

fn load_libsvm_impl(path: &Path, dim: Option<usize>) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_idx = 0usize;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let label_tok = toks.next().unwrap();
        let label = parse_real(label_tok)
            .ok_or_else(|| parse_err(path, lineno, format!("bad label `{label_tok}`")))?;
        let mut entries = Vec::new();
        let mut last = 0usize;
        for tok in toks {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(path, lineno, format!("malformed token `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad index in `{tok}`")))?;
            if idx == 0 {
                return Err(parse_err(path, lineno, "indices are 1-based, found 0"));
            }
            if idx <= last {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("index {idx} does not increase (previous {last})"),
                ));
            }
            let val = parse_real(val)
                .ok_or_else(|| parse_err(path, lineno, format!("bad value in `{tok}`")))?;
            last = idx;
            entries.push((idx - 1, val));
        }
        max_idx = max_idx.max(last);
        labels.push(label);
        rows.push(entries);
    }

    if rows.is_empty() {
        return Err(parse_err(path, 0, "no samples"));
    }
    let d = match dim {
        Some(d) if d < max_idx => {
            return Err(parse_err(path, 0, format!("index {max_idx} exceeds dimension {d}")))
        }
        Some(d) => d,
        None => max_idx,
    };
    if d == 0 {
        return Err(parse_err(path, 0, "no features"));
    }
    let mut features = DMatrix::zeros(rows.len(), d);
    for (r, entries) in rows.iter().enumerate() {
        for &(c, v) in entries {
            features[(r, c)] = v;
        }
    }
    normalize_labels(&mut labels);
    Dataset::new(features, DVector::from_vec(labels), stem(path))
}

/// Write in LIBSVM format, omitting zero entries. Values use the shortest
/// representation that parses back to the same bits.
pub fn write_libsvm(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in 0..ds.len() {
        write!(w, "{:?}", ds.labels[r])?;
        for c in 0..ds.dim() {
            let v = ds.features[(r, c)];
            if v != 0.0 {
                write!(w, " {}:{:?}", c + 1, v)?;
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a rectangular numeric CSV. A first row containing any non-numeric
/// cell is treated as a header.
pub fn load_csv(path: impl AsRef<Path>, label_col: usize) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut width = None;
    let mut cells: Vec<f64> = Vec::new();
    let mut labels = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if width.is_none() && cells.is_empty() && labels.is_empty() {
            if fields.iter().any(|f| f.parse::<f64>().is_err()) {
                // Header row.
                width = Some(fields.len());
                continue;
            }
        }
        let w = *width.get_or_insert(fields.len());
        if fields.len() != w {
            return Err(parse_err(
                path,
                lineno,
                format!("row has {} columns, expected {w}", fields.len()),
            ));
        }
        if label_col >= w {
            return Err(parse_err(
                path,
                lineno,
                format!("label column {label_col} out of range for {w} columns"),
            ));
        }
        for (c, f) in fields.iter().enumerate() {
            let v = parse_real(f).ok_or_else(|| {
                parse_err(path, lineno, format!("column {}: non-numeric cell `{f}`", c + 1))
            })?;
            if c == label_col {
                labels.push(v);
            } else {
                cells.push(v);
            }
        }
    }

    let n = labels.len();
    if n == 0 {
        return Err(parse_err(path, 0, "no samples"));
    }
    let d = width.unwrap() - 1;
    if d == 0 {
        return Err(parse_err(path, 0, "no feature columns"));
    }
    let features = DMatrix::from_row_slice(n, d, &cells);
    Dataset::new(features, DVector::from_vec(labels), stem(path))
}

/// Write as CSV with header `x1,...,xd,y` (label in the last column).
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    let header: Vec<String> = (1..=ds.dim()).map(|j| format!("x{j}")).collect();
    writeln!(w, "{},y", header.join(","))?;
    for r in 0..ds.len() {
        for c in 0..ds.dim() {
            write!(w, "{:?},", ds.features[(r, c)])?;
        }
        writeln!(w, "{:?}", ds.labels[r])?;
    }
    w.flush()?;
    Ok(())
}

/// Center every feature column and scale to unit population standard
/// deviation. Constant columns become all zeros.
pub fn standardize(ds: &Dataset) -> Result<Dataset> {
    let n = ds.len();
    if n < 2 {
        return Err(Error::Precondition(format!(
            "standardize needs at least 2 samples, got {n}"
        )));
    }
    let mut features = ds.features.clone();
    for mut col in features.column_iter_mut() {
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / n as f64).sqrt();
        if sd > 0.0 {
            col /= sd;
        } else {
            col.fill(0.0);
        }
    }
    Ok(Dataset {
        features,
        labels: ds.labels.clone(),
        name: ds.name.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub label_noise: f64,
    pub task: Task,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn classification(n: usize, d: usize, label_noise: f64, seed: u64) -> Self {
        SyntheticSpec {
            n,
            d,
            label_noise,
            task: Task::Classification,
            seed,
        }
    }

    pub fn regression(n: usize, d: usize, seed: u64) -> Self {
        SyntheticSpec {
            n,
            d,
            label_noise: 0.0,
            task: Task::Regression,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::Config(format!(
                "synthetic n and d must be positive, got n={} d={}",
                self.n, self.d
            )));
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(Error::Config(format!(
                "label_noise must lie in [0, 1], got {}",
                self.label_noise
            )));
        }
        Ok(())
    }
}

// Independent ChaCha streams so features do not depend on the task or noise.
const STREAM_FEATURES: u64 = 1;
const STREAM_WEIGHTS: u64 = 2;
const STREAM_NOISE: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// The hidden ground-truth weights behind [`gen_synthetic`]: i.i.d. normal
/// entries scaled by `1/sqrt(d)` so that `w^T a` has roughly unit variance.
pub fn hidden_weights(spec: &SyntheticSpec) -> DVector<f64> {
    let mut rng = stream(spec.seed, STREAM_WEIGHTS);
    let scale = 1.0 / (spec.d as f64).sqrt();
    DVector::from_fn(spec.d, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Seeded synthetic data. Classification labels are `1[w^T a > 0]` flipped
/// independently with probability `label_noise`; regression labels are
/// `w^T a` plus Student-t (3 dof) noise.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut frng = stream(spec.seed, STREAM_FEATURES);
    let features =
        DMatrix::from_fn(spec.n, spec.d, |_, _| frng.sample::<f64, _>(StandardNormal));
    let w = hidden_weights(spec);
    let signal = &features * &w;
    let mut nrng = stream(spec.seed, STREAM_NOISE);
    let labels = match spec.task {
        Task::Classification => signal.map(|z| {
            let clean = if z > 0.0 { 1.0 } else { 0.0 };
            // Always draw so the noise stream position does not depend on `label_noise`.
            let u: f64 = nrng.gen();
            if u < spec.label_noise {
                1.0 - clean
            } else {
                clean
            }
        }),
        Task::Regression => {
            let t = StudentT::new(3.0).expect("valid dof");
            signal.map(|z| z + nrng.sample(t))
        }
    };
    let task = match spec.task {
        Task::Classification => "cls",
        Task::Regression => "reg",
    };
    Dataset::new(
        features,
        labels,
        format!("synthetic-{task}-n{}-d{}-s{}", spec.n, spec.d, spec.seed),
    )
}

/// Write both LIBSVM (`<stem>.svm`) and CSV (`<stem>.csv`) renditions.
pub fn write_both(ds: &Dataset, dir: impl AsRef<Path>, stem: &str) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let svm = dir.join(format!("{stem}.svm"));
    let csv = dir.join(format!("{stem}.csv"));
    write_libsvm(ds, &svm)?;
    write_csv(ds, &csv)?;
    Ok((svm, csv))
}
