//! Factorizations of the count matrix and their reports.

mod nmf;
mod pca;
mod report;

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counts::{row_normalize, standardize_columns, CountMatrix, RowKey, Scheme, SparseMatrix};
use crate::zobrist::NumBuckets;

pub use nmf::{nmf_fit, nmf_fit_dense, NmfModel, NmfOptions};
pub use pca::{pca_fit, PcaModel};
pub use report::{component_scores, top_moves_per_component, write_scores_csv, write_top_moves_csv, ComponentMoves, RowScores};

#[derive(Debug, Error)]
pub enum FactorError {
    #[error("d = {d} is outside 1..={max}")]
    InvalidDimension { d: usize, max: usize },
    #[error("negative or non-finite input {value} at ({row}, {col})")]
    NegativeInput { row: usize, col: usize, value: f64 },
    #[error("shape mismatch: model is {expected:?}, matrix is {found:?}")]
    ShapeMismatch { expected: (usize, usize), found: (usize, usize) },
    #[error("{0}")]
    Unsupported(String),
    #[error("model file: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// How the factorized matrix was derived from counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preprocessing {
    RawCounts,
    RowNormalized,
    /// Row-normalized, then column-standardized.
    Standardized,
    /// Counts were not involved; the matrix was supplied directly.
    External,
}

impl std::str::FromStr for Preprocessing {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw-counts" => Ok(Preprocessing::RawCounts),
            "row-normalized" => Ok(Preprocessing::RowNormalized),
            "standardized" => Ok(Preprocessing::Standardized),
            "external" => Ok(Preprocessing::External),
            _ => Err(format!("unknown preprocessing `{s}` (raw-counts, row-normalized, standardized)")),
        }
    }
}

/// Provenance of the rows of a fitted matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixInfo {
    pub scheme: Scheme,
    pub num_buckets: NumBuckets,
    pub zobrist_seed: u64,
    pub preprocessing: Preprocessing,
}

impl MatrixInfo {
    pub fn row_key(&self, i: usize) -> Option<RowKey> {
        RowKey::from_index(self.scheme, self.num_buckets, i)
    }
}

impl CountMatrix {
    fn info(&self, preprocessing: Preprocessing) -> MatrixInfo {
        MatrixInfo { scheme: self.scheme, num_buckets: self.num_buckets, zobrist_seed: self.zobrist_seed, preprocessing }
    }
}

/// The matrix NMF sees: raw counts or row frequencies.
pub fn nmf_input(x: &CountMatrix, preprocessing: Preprocessing) -> Result<SparseMatrix, FactorError> {
    match preprocessing {
        Preprocessing::RawCounts => Ok(x.as_f64()),
        Preprocessing::RowNormalized => Ok(row_normalize(x)),
        other => Err(FactorError::Unsupported(format!("NMF input cannot be {other:?}"))),
    }
}

pub fn fit_nmf_counts(x: &CountMatrix, preprocessing: Preprocessing, opts: &NmfOptions) -> Result<NmfModel, FactorError> {
    let mut model = nmf_fit(&nmf_input(x, preprocessing)?, opts)?;
    model.info = Some(x.info(preprocessing));
    Ok(model)
}

/// Row frequencies with standardized columns, densified.
pub fn pca_input(x: &CountMatrix) -> (DMatrix<f64>, crate::counts::StandardizationParams) {
    standardize_columns(&row_normalize(x).to_dense())
}

pub fn fit_pca_counts(x: &CountMatrix, d: usize) -> Result<PcaModel, FactorError> {
    let (z, params) = pca_input(x);
    let mut model = pca_fit(&z, d)?;
    model.standardization = Some(params);
    model.info = Some(x.info(Preprocessing::Standardized));
    Ok(model)
}

pub const MODEL_FORMAT: &str = "chessvec-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Pca(PcaModel),
    Nmf(NmfModel),
}

impl Model {
    pub fn info(&self) -> Option<&MatrixInfo> {
        match self {
            Model::Pca(m) => m.info.as_ref(),
            Model::Nmf(m) => m.info.as_ref(),
        }
    }

    pub fn d(&self) -> usize {
        match self {
            Model::Pca(m) => m.d,
            Model::Nmf(m) => m.d,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: Model,
}

/// JSON container; floats are written in shortest round-trip form, so a
/// read-back model is bit-identical.
pub fn write_model<W: Write>(mut out: W, model: &Model) -> Result<(), FactorError> {
    let file = ModelFile { format: MODEL_FORMAT.into(), version: MODEL_VERSION, model: model.clone() };
    serde_json::to_writer(&mut out, &file).map_err(|e| FactorError::Format(e.to_string()))?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_model<R: Read>(input: R) -> Result<Model, FactorError> {
    let file: ModelFile = serde_json::from_reader(input).map_err(|e| FactorError::Format(e.to_string()))?;
    if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
        return Err(FactorError::Format(format!("unsupported format {} v{}", file.format, file.version)));
    }
    Ok(file.model)
}

/// Row-major matrix encoding for model files.
mod dense_serde {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Dense {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let data = m.transpose().as_slice().to_vec();
        Dense { rows: m.nrows(), cols: m.ncols(), data }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let m = Dense::deserialize(d)?;
        if m.data.len() != m.rows * m.cols {
            return Err(serde::de::Error::custom("matrix data length does not match its shape"));
        }
        Ok(DMatrix::from_row_slice(m.rows, m.cols, &m.data))
    }
}

fn squared_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}
