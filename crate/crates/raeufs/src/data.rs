//! Dataset ingestion, unit-interval scaling, and synthetic outlier injection.
//!
//! File formats:
//! - CSV (RFC-4180 style, `.` decimal separator), optional header and label
//!   column. The canonical interchange format.
//! - A length-prefixed binary matrix format for large data: magic `RFSM`,
//!   one version byte, u64 rows, u64 cols, then row-major little-endian f64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::RngState;
use crate::scalar::Scalar;

const RFSM_MAGIC: &[u8; 4] = b"RFSM";
const RFSM_VERSION: u8 = 1;

/// Sample matrix with optional ground-truth labels and an inlier mask.
#[derive(Clone, Debug)]
pub struct Dataset<S> {
    pub x: Matrix<S>,
    /// Per-row cluster id; `None` entries mark rows without ground truth
    /// (injected outliers). `None` overall means the dataset is unlabeled.
    pub labels: Option<Vec<Option<usize>>>,
    /// `true` for original samples, `false` for injected outliers.
    pub inlier_mask: Vec<bool>,
    pub feature_names: Option<Vec<String>>,
}

/// How much synthetic contamination to add and with which stream.
#[derive(Clone, Copy, Debug)]
pub struct ContaminationSpec {
    /// Outliers as a fraction of the TOTAL row count after injection.
    pub fraction: f64,
    pub seed: u64,
}

impl<S: Scalar> Dataset<S> {
    /// Dataset with no labels and an all-inlier mask.
    pub fn from_matrix(x: Matrix<S>) -> Self {
        let n = x.rows();
        Self {
            x,
            labels: None,
            inlier_mask: vec![true; n],
            feature_names: None,
        }
    }

    pub fn n_samples(&self) -> usize {
        self.x.rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    /// Number of distinct labels present (0 if unlabeled).
    pub fn n_classes(&self) -> usize {
        match &self.labels {
            None => 0,
            Some(ls) => ls.iter().flatten().map(|&l| l + 1).max().unwrap_or(0),
        }
    }

    /// Indices of rows that are inliers and carry a label.
    pub fn labeled_inlier_rows(&self) -> Vec<usize> {
        let labels = match &self.labels {
            Some(l) => l,
            None => return Vec::new(),
        };
        (0..self.n_samples())
            .filter(|&i| self.inlier_mask[i] && labels[i].is_some())
            .collect()
    }
}

/// Loads a numeric CSV table. `label_column` (0-based, counted over the raw
/// file columns) is split out of the feature matrix if given.
pub fn load_csv<S: Scalar>(
    path: impl AsRef<Path>,
    has_header: bool,
    label_column: Option<usize>,
) -> Result<Dataset<S>> {
    let file = File::open(path.as_ref())?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .from_reader(BufReader::new(file));

    let header: Option<Vec<String>> = if has_header {
        Some(reader.headers().map_err(csv_err)?.iter().map(str::to_owned).collect())
    } else {
        None
    };

    let mut rows: Vec<Vec<S>> = Vec::new();
    let mut labels: Vec<Option<usize>> = Vec::new();
    let mut width: Option<usize> = None;

    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        // 1-based file row, counting the header line if present.
        let file_row = idx + 1 + usize::from(has_header);
        if let Some(w) = width {
            if record.len() != w {
                return Err(Error::Parse {
                    row: file_row,
                    col: record.len(),
                    reason: format!("ragged row: expected {w} fields, found {}", record.len()),
                });
            }
        } else {
            width = Some(record.len());
        }
        if let Some(lc) = label_column {
            if lc >= record.len() {
                return Err(Error::invalid_arg(
                    "label_column",
                    format!("index {lc} out of range for {} columns", record.len()),
                ));
            }
        }

        let mut row = Vec::with_capacity(record.len().saturating_sub(usize::from(label_column.is_some())));
        for (col, field) in record.iter().enumerate() {
            let field = field.trim();
            if Some(col) == label_column {
                if field.is_empty() {
                    labels.push(None);
                } else {
                    let raw: f64 = field.parse().map_err(|_| Error::Parse {
                        row: file_row,
                        col: col + 1,
                        reason: format!("label {field:?} is not numeric"),
                    })?;
                    if raw < 0.0 || raw.fract() != 0.0 {
                        return Err(Error::Parse {
                            row: file_row,
                            col: col + 1,
                            reason: format!("label {field:?} is not a non-negative integer"),
                        });
                    }
                    labels.push(Some(raw as usize));
                }
            } else {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    row: file_row,
                    col: col + 1,
                    reason: format!("cell {field:?} is not numeric"),
                })?;
                row.push(S::of(v));
            }
        }
        rows.push(row);
    }

    let x = Matrix::from_rows(&rows)?;
    let feature_names = header.map(|h| {
        h.into_iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != label_column)
            .map(|(_, name)| name)
            .collect()
    });
    let n = x.rows();
    Ok(Dataset {
        x,
        labels: label_column.map(|_| labels),
        inlier_mask: vec![true; n],
        feature_names,
    })
}

/// Writes the dataset as CSV. Labels, when present, go into a trailing
/// `label` column; outlier rows leave it empty.
pub fn save_csv<S: Scalar>(dataset: &Dataset<S>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    let d = dataset.n_features();
    let names: Vec<String> = match &dataset.feature_names {
        Some(ns) => ns.clone(),
        None => (0..d).map(|j| format!("f{j}")).collect(),
    };
    let mut header = names.join(",");
    if dataset.labels.is_some() {
        header.push_str(",label");
    }
    writeln!(w, "{header}")?;
    for i in 0..dataset.n_samples() {
        let mut line = dataset
            .x
            .row(i)
            .iter()
            .map(|v| format!("{}", v.as_f64()))
            .collect::<Vec<_>>()
            .join(",");
        if let Some(labels) = &dataset.labels {
            match labels[i] {
                Some(l) => line.push_str(&format!(",{l}")),
                None => line.push(','),
            }
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Per-feature min-max scaling to `[0, 1]`, with statistics computed over
/// inlier rows only. Constant features map to 0. Outlier rows are transformed
/// with the inlier statistics and may land outside `[0, 1]`.
pub fn scale_unit_interval<S: Scalar>(dataset: &Dataset<S>) -> Dataset<S> {
    let (n, d) = dataset.x.shape();
    let mut lo = vec![S::infinity(); d];
    let mut hi = vec![S::neg_infinity(); d];
    for i in 0..n {
        if !dataset.inlier_mask[i] {
            continue;
        }
        for (j, &v) in dataset.x.row(i).iter().enumerate() {
            if v < lo[j] {
                lo[j] = v;
            }
            if v > hi[j] {
                hi[j] = v;
            }
        }
    }
    let mut out = dataset.clone();
    for i in 0..n {
        let row = out.x.row_mut(i);
        for j in 0..d {
            let range = hi[j] - lo[j];
            row[j] = if range > S::zero() {
                (row[j] - lo[j]) / range
            } else {
                S::zero()
            };
        }
    }
    out
}

/// Appends standard-normal outlier rows so they make up `spec.fraction` of the
/// total, then shuffles rows deterministically. Appended rows carry
/// `inlier_mask = false` and no label.
pub fn inject_outliers<S: Scalar>(dataset: &Dataset<S>, spec: &ContaminationSpec) -> Result<Dataset<S>> {
    if !(0.0..1.0).contains(&spec.fraction) {
        return Err(Error::invalid_arg(
            "fraction",
            format!("contamination fraction {} must lie in [0, 1)", spec.fraction),
        ));
    }
    let n_clean = dataset.n_samples();
    let d = dataset.n_features();
    // fraction = n_out / (n_clean + n_out), rounded to the nearest integer.
    let n_out = (spec.fraction * n_clean as f64 / (1.0 - spec.fraction)).round() as usize;
    let n_total = n_clean + n_out;

    let mut rng = RngState::new(spec.seed);
    let outliers = crate::rng::gaussian_matrix::<S>(n_out, d, &mut rng);

    let mut order: Vec<usize> = (0..n_total).collect();
    rng.shuffle(&mut order);

    let mut x = Matrix::zeros(n_total, d);
    let mut labels: Option<Vec<Option<usize>>> = dataset.labels.as_ref().map(|_| vec![None; n_total]);
    let mut mask = vec![false; n_total];
    for (dst, &src) in order.iter().enumerate() {
        if src < n_clean {
            x.row_mut(dst).copy_from_slice(dataset.x.row(src));
            mask[dst] = dataset.inlier_mask[src];
            if let (Some(out_l), Some(in_l)) = (labels.as_mut(), dataset.labels.as_ref()) {
                out_l[dst] = in_l[src];
            }
        } else {
            x.row_mut(dst).copy_from_slice(outliers.row(src - n_clean));
        }
    }
    Ok(Dataset {
        x,
        labels,
        inlier_mask: mask,
        feature_names: dataset.feature_names.clone(),
    })
}

/// Writes a matrix in the RFSM binary format.
pub fn save_matrix_binary<S: Scalar>(m: &Matrix<S>, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    write_matrix_binary(m, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Reads a matrix in the RFSM binary format.
pub fn load_matrix_binary<S: Scalar>(path: impl AsRef<Path>) -> Result<Matrix<S>> {
    let mut r = BufReader::new(File::open(path.as_ref())?);
    read_matrix_binary(&mut r)
}

pub(crate) fn write_matrix_binary<S: Scalar>(m: &Matrix<S>, w: &mut impl Write) -> Result<()> {
    w.write_all(RFSM_MAGIC)?;
    w.write_all(&[RFSM_VERSION])?;
    w.write_all(&(m.rows() as u64).to_le_bytes())?;
    w.write_all(&(m.cols() as u64).to_le_bytes())?;
    for v in m.data() {
        w.write_all(&v.as_f64().to_le_bytes())?;
    }
    Ok(())
}

pub(crate) fn read_matrix_binary<S: Scalar>(r: &mut impl Read) -> Result<Matrix<S>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != RFSM_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected \"RFSM\"")));
    }
    let mut version = [0u8; 1];
    r.read_exact(&mut version)?;
    if version[0] != RFSM_VERSION {
        return Err(Error::Format(format!("unsupported RFSM version {}", version[0])));
    }
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    let rows = u64::from_le_bytes(buf) as usize;
    r.read_exact(&mut buf)?;
    let cols = u64::from_le_bytes(buf) as usize;
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        r.read_exact(&mut buf)?;
        data.push(S::of(f64::from_le_bytes(buf)));
    }
    Matrix::from_vec(rows, cols, data)
}

fn csv_err(e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Format(format!("csv read failed: {e}")),
        _ => Error::Format(format!("csv parse failed: {e}")),
    }
}
