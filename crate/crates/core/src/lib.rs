//! Vector representations of chess pieces learned from move counts.
//!
//! The pipeline logs games, keeps white's moves from white wins, counts
//! (piece, move) pairs into a sparse matrix whose rows may additionally be
//! split by Zobrist hash bucket, factorizes it with PCA or NMF, and predicts
//! moves by reconstructing count rows from the factors.

pub mod chess;
pub mod zobrist;
pub mod game;
pub mod ingest;
pub mod selfplay;
pub mod uci;
pub mod counts;
pub mod factor;
pub mod predict;
pub mod pipeline;
