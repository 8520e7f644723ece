//! Reading game data and preparing the white-win dataset.

mod dataset;
pub mod mlog;
pub mod pgn;

use std::io;

use thiserror::Error;

use crate::chess::ChessError;
use crate::zobrist::ZobristError;

pub use dataset::{annotate_buckets, filter_white_wins, rehash, DatasetMeta, FilterSummary, FilteredDataset};
pub use mlog::{read_mlog, MlogHeader, MlogWriter};
pub use pgn::{parse_pgn, parse_pgn_lenient};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("move log line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("PGN syntax error at line {line}, column {column}: {message}")]
    PgnSyntax { line: usize, column: usize, message: String },
    #[error("game {game}, ply {ply}: cannot play `{san}` ({source})")]
    IllegalSanMove { game: u64, ply: u32, san: String, source: ChessError },
    #[error("game {game} does not replay: {source}")]
    Replay { game: u64, source: ChessError },
    #[error(transparent)]
    InvalidBucketCount(#[from] ZobristError),
}
