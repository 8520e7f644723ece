//! The count matrix X: one row per piece (optionally per piece and hash
//! bucket), one column per [`MoveIndex`], entries counting logged moves.
//!
//! Rows are ordered piece-major, bucket-minor: per-type rows follow
//! [`PieceKind::ALL`], per-piece rows are ids 1..=16, and the piece-bucket
//! row of `(id, j)` is `(id - 1) * B + j`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chess::{MoveIndex, PieceId, PieceKind};
use crate::game::MoveRecord;
use crate::ingest::FilteredDataset;
use crate::zobrist::{BucketId, NumBuckets};

pub const NUM_MOVES: usize = MoveIndex::COUNT;
const WHITE_PIECES: usize = 16;

#[derive(Debug, Error)]
pub enum CountsError {
    #[error("game {game} ply {ply} has no bucket annotation")]
    MissingBucketAnnotation { game: u64, ply: u32 },
    #[error("count file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    PerType,
    PerPiece,
    PieceBucket,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::PerType => "per-type",
            Scheme::PerPiece => "per-piece",
            Scheme::PieceBucket => "piece-bucket",
        }
    }

    /// Number of rows for this scheme; `num_buckets` only matters for
    /// piece-bucket.
    pub fn rows(self, num_buckets: NumBuckets) -> usize {
        match self {
            Scheme::PerType => PieceKind::ALL.len(),
            Scheme::PerPiece => WHITE_PIECES,
            Scheme::PieceBucket => WHITE_PIECES * num_buckets.get() as usize,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-type" => Ok(Scheme::PerType),
            "per-piece" => Ok(Scheme::PerPiece),
            "piece-bucket" => Ok(Scheme::PieceBucket),
            _ => Err(format!("unknown scheme `{s}` (per-type, per-piece, piece-bucket)")),
        }
    }
}

/// Row label. Text form: `pawn`, `13`, `13/255`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowKey {
    PerType(PieceKind),
    PerPiece(PieceId),
    PieceBucket(PieceId, BucketId),
}

impl RowKey {
    pub fn for_record(scheme: Scheme, r: &MoveRecord) -> Result<RowKey, CountsError> {
        Ok(match scheme {
            Scheme::PerType => RowKey::PerType(r.kind),
            Scheme::PerPiece => RowKey::PerPiece(r.piece),
            Scheme::PieceBucket => RowKey::PieceBucket(
                r.piece,
                r.bucket.ok_or(CountsError::MissingBucketAnnotation { game: r.game, ply: r.ply })?,
            ),
        })
    }

    pub fn scheme(self) -> Scheme {
        match self {
            RowKey::PerType(_) => Scheme::PerType,
            RowKey::PerPiece(_) => Scheme::PerPiece,
            RowKey::PieceBucket(..) => Scheme::PieceBucket,
        }
    }

    pub fn index(self, num_buckets: NumBuckets) -> usize {
        match self {
            RowKey::PerType(k) => k.index(),
            RowKey::PerPiece(id) => id.index() - 1,
            RowKey::PieceBucket(id, b) => (id.index() - 1) * num_buckets.get() as usize + b.get() as usize,
        }
    }

    pub fn from_index(scheme: Scheme, num_buckets: NumBuckets, i: usize) -> Option<RowKey> {
        if i >= scheme.rows(num_buckets) {
            return None;
        }
        Some(match scheme {
            Scheme::PerType => RowKey::PerType(PieceKind::from_index(i)?),
            Scheme::PerPiece => RowKey::PerPiece(PieceId::new(i as u8 + 1)?),
            Scheme::PieceBucket => {
                let b = num_buckets.get() as usize;
                RowKey::PieceBucket(PieceId::new((i / b) as u8 + 1)?, BucketId::new((i % b) as u32, num_buckets)?)
            }
        })
    }

    pub fn piece(self) -> Option<PieceId> {
        match self {
            RowKey::PerType(_) => None,
            RowKey::PerPiece(id) | RowKey::PieceBucket(id, _) => Some(id),
        }
    }

    /// Kind of the piece at the start of the game.
    pub fn kind(self) -> PieceKind {
        match self {
            RowKey::PerType(k) => k,
            RowKey::PerPiece(id) | RowKey::PieceBucket(id, _) => id.initial_kind().expect("white piece id"),
        }
    }

    pub fn parse(scheme: Scheme, num_buckets: NumBuckets, s: &str) -> Option<RowKey> {
        let id = |t: &str| t.parse::<u8>().ok().and_then(PieceId::new).filter(|p| !p.is_none());
        match scheme {
            Scheme::PerType => PieceKind::from_name(s).map(RowKey::PerType),
            Scheme::PerPiece => id(s).map(RowKey::PerPiece),
            Scheme::PieceBucket => {
                let (p, b) = s.split_once('/')?;
                Some(RowKey::PieceBucket(id(p)?, BucketId::new(b.parse().ok()?, num_buckets)?))
            }
        }
    }
}

impl fmt::Display for RowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowKey::PerType(k) => f.write_str(k.name()),
            RowKey::PerPiece(id) => write!(f, "{}", id.get()),
            RowKey::PieceBucket(id, b) => write!(f, "{}/{}", id.get(), b.get()),
        }
    }
}

/// Compressed sparse rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Csr<T> {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub values: Vec<T>,
}

pub type SparseMatrix = Csr<f64>;

impl<T: Copy> Csr<T> {
    /// From (row, col, value) triplets sorted by row then column.
    pub fn from_sorted(n_rows: usize, n_cols: usize, entries: impl IntoIterator<Item = (usize, u32, T)>) -> Self {
        let mut indptr = vec![0usize; n_rows + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (r, c, v) in entries {
            debug_assert!(r < n_rows && (c as usize) < n_cols);
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
        }
        for r in 0..n_rows {
            indptr[r + 1] += indptr[r];
        }
        Csr { n_rows, n_cols, indptr, indices, values }
    }

    pub fn row(&self, i: usize) -> (&[u32], &[T]) {
        let span = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_is_empty(&self, i: usize) -> bool {
        self.indptr[i] == self.indptr[i + 1]
    }

    pub fn nonempty_rows(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_rows).filter(move |&i| !self.row_is_empty(i))
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, u32, T)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&c, &v)| (i, c, v))
        })
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Csr<U> {
        Csr {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl SparseMatrix {
    pub fn from_dense(m: &DMatrix<f64>) -> SparseMatrix {
        let entries = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .filter(|&(i, j)| m[(i, j)] != 0.0)
            .map(|(i, j)| (i, j as u32, m[(i, j)]));
        Csr::from_sorted(m.nrows(), m.ncols(), entries)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triplets() {
            m[(i, j as usize)] = v;
        }
        m
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountMatrix {
    pub scheme: Scheme,
    /// 1 unless the scheme is piece-bucket.
    pub num_buckets: NumBuckets,
    pub zobrist_seed: u64,
    pub counts: Csr<u64>,
    pub total_count: u64,
}

impl CountMatrix {
    pub fn n(&self) -> usize {
        self.counts.n_rows
    }

    pub fn p(&self) -> usize {
        self.counts.n_cols
    }

    pub fn row_key(&self, i: usize) -> RowKey {
        RowKey::from_index(self.scheme, self.num_buckets, i).expect("row in range")
    }

    pub fn row_keys(&self) -> Vec<RowKey> {
        (0..self.n()).map(|i| self.row_key(i)).collect()
    }

    pub fn get(&self, key: RowKey, m: MoveIndex) -> u64 {
        let (cols, vals) = self.counts.row(key.index(self.num_buckets));
        cols.binary_search(&(m.index() as u32)).map_or(0, |k| vals[k])
    }

    pub fn as_f64(&self) -> SparseMatrix {
        self.counts.map(|c| c as f64)
    }

    /// Sums piece-bucket rows over buckets, giving the per-piece matrix.
    pub fn collapse_buckets(&self) -> CountMatrix {
        if self.scheme != Scheme::PieceBucket {
            return self.clone();
        }
        let b = self.num_buckets.get() as usize;
        let mut acc: BTreeMap<(usize, u32), u64> = BTreeMap::new();
        for (i, c, v) in self.counts.triplets() {
            *acc.entry((i / b, c)).or_default() += v;
        }
        CountMatrix {
            scheme: Scheme::PerPiece,
            num_buckets: NumBuckets::ONE,
            zobrist_seed: self.zobrist_seed,
            counts: Csr::from_sorted(WHITE_PIECES, NUM_MOVES, acc.into_iter().map(|((i, c), v)| (i, c, v))),
            total_count: self.total_count,
        }
    }
}

type Tally = BTreeMap<(usize, u32), u64>;

/// Counts each white move record once, at (row of its key, its move index).
/// For piece-bucket the dataset must carry bucket annotations.
pub fn build_count_matrix(ds: &FilteredDataset, scheme: Scheme) -> Result<CountMatrix, CountsError> {
    let num_buckets = match scheme {
        Scheme::PieceBucket => ds.meta.num_buckets.unwrap_or(NumBuckets::ONE),
        _ => NumBuckets::ONE,
    };
    let tally = ds
        .games
        .par_iter()
        .try_fold(Tally::new, |mut acc, g| {
            for r in ds.game_records(g) {
                let row = RowKey::for_record(scheme, r)?.index(num_buckets);
                *acc.entry((row, r.move_index.index() as u32)).or_default() += 1;
            }
            Ok::<_, CountsError>(acc)
        })
        .try_reduce(Tally::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            Ok(a)
        })?;
    let total_count = tally.values().sum();
    let n = scheme.rows(num_buckets);
    Ok(CountMatrix {
        scheme,
        num_buckets,
        zobrist_seed: ds.meta.zobrist_seed,
        counts: Csr::from_sorted(n, NUM_MOVES, tally.into_iter().map(|((r, c), v)| (r, c, v))),
        total_count,
    })
}

/// Divides each row by its total; empty rows stay empty.
pub fn row_normalize(x: &CountMatrix) -> SparseMatrix {
    let mut out = x.as_f64();
    for i in 0..out.n_rows {
        let span = out.indptr[i]..out.indptr[i + 1];
        let total: f64 = out.values[span.clone()].iter().sum();
        for v in &mut out.values[span] {
            *v /= total;
        }
    }
    out
}

/// Column centring and scaling with the population (1/n) deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub column_means: Vec<f64>,
    pub column_stds: Vec<f64>,
    pub zero_variance_mask: Vec<bool>,
}

impl StandardizationParams {
    /// Maps standardized values back; masked columns come back as their mean.
    pub fn invert(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut m = z.clone();
        for (j, mut col) in m.column_iter_mut().enumerate() {
            let scale = if self.zero_variance_mask[j] { 0.0 } else { self.column_stds[j] };
            for v in col.iter_mut() {
                *v = *v * scale + self.column_means[j];
            }
        }
        m
    }
}

/// Standardizes every column to mean 0 and variance 1. Columns whose spread
/// is at rounding level are zeroed and masked.
pub fn standardize_columns(m: &DMatrix<f64>) -> (DMatrix<f64>, StandardizationParams) {
    let n = m.nrows() as f64;
    let mut out = m.clone();
    let p = m.ncols();
    let mut params = StandardizationParams {
        column_means: vec![0.0; p],
        column_stds: vec![0.0; p],
        zero_variance_mask: vec![false; p],
    };
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        params.column_means[j] = mean;
        if std <= 1e-12 * mean.abs().max(1.0) {
            params.zero_variance_mask[j] = true;
            col.fill(0.0);
        } else {
            params.column_stds[j] = std;
            for v in col.iter_mut() {
                *v = (*v - mean) / std;
            }
        }
    }
    (out, params)
}

pub const COUNTS_FORMAT: &str = "chessvec-counts";
pub const COUNTS_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CountsHeader {
    format: String,
    version: u32,
    scheme: Scheme,
    num_buckets: NumBuckets,
    zobrist_seed: u64,
    rows: usize,
    cols: usize,
    total_count: u64,
}

/// Writes a JSON header line, then one `row_key<TAB>move_index<TAB>count`
/// line per nonzero entry in row-major order.
pub fn write_counts<W: Write>(mut out: W, x: &CountMatrix) -> Result<(), CountsError> {
    let header = CountsHeader {
        format: COUNTS_FORMAT.into(),
        version: COUNTS_VERSION,
        scheme: x.scheme,
        num_buckets: x.num_buckets,
        zobrist_seed: x.zobrist_seed,
        rows: x.n(),
        cols: x.p(),
        total_count: x.total_count,
    };
    let json = serde_json::to_string(&header).map_err(|e| CountsError::Format { line: 1, message: e.to_string() })?;
    writeln!(out, "{json}")?;
    for (i, c, v) in x.counts.triplets() {
        writeln!(out, "{}\t{}\t{}", x.row_key(i), c, v)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_counts<R: BufRead>(input: R) -> Result<CountMatrix, CountsError> {
    let mut lines = input.lines();
    let fail = |line: usize, message: String| CountsError::Format { line, message };
    let first = lines.next().ok_or_else(|| fail(1, "empty file".into()))??;
    let h: CountsHeader = serde_json::from_str(&first).map_err(|e| fail(1, e.to_string()))?;
    if h.format != COUNTS_FORMAT || h.version != COUNTS_VERSION {
        return Err(fail(1, format!("unsupported format {} v{}", h.format, h.version)));
    }
    if h.rows != h.scheme.rows(h.num_buckets) || h.cols != NUM_MOVES {
        return Err(fail(1, "shape does not match the scheme".into()));
    }
    let mut entries = Vec::new();
    let mut last: Option<(usize, u32)> = None;
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        let line = line?;
        let mut parts = line.split('\t');
        let (Some(key), Some(col), Some(count), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
            return Err(fail(lineno, "expected three tab-separated fields".into()));
        };
        let row = RowKey::parse(h.scheme, h.num_buckets, key)
            .ok_or_else(|| fail(lineno, format!("bad row key `{key}`")))?
            .index(h.num_buckets);
        let col: u32 = col.parse().ok().filter(|&c| (c as usize) < NUM_MOVES).ok_or_else(|| fail(lineno, format!("bad column `{col}`")))?;
        let count: u64 = count.parse().map_err(|_| fail(lineno, format!("bad count `{count}`")))?;
        if last.is_some_and(|l| l >= (row, col)) {
            return Err(fail(lineno, "entries out of order".into()));
        }
        last = Some((row, col));
        entries.push((row, col, count));
    }
    let total: u64 = entries.iter().map(|e| e.2).sum();
    if total != h.total_count {
        return Err(fail(1, format!("header total {} but entries sum to {}", h.total_count, total)));
    }
    Ok(CountMatrix {
        scheme: h.scheme,
        num_buckets: h.num_buckets,
        zobrist_seed: h.zobrist_seed,
        counts: Csr::from_sorted(h.rows, h.cols, entries),
        total_count: total,
    })
}
