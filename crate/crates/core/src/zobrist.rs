//! Zobrist hashing of positions and the bucket partition built on it.
//!
//! Tables hold 12·64 piece-square keys (plane-major: white king, queen,
//! rook, bishop, knight, pawn, then black), one side-to-move key, four
//! castling keys (K, Q, k, q) and eight en-passant file keys: 781 values,
//! drawn in exactly that order from `ChaCha8Rng::seed_from_u64(seed)`.
//! The side-to-move key is XOR-ed in when white is to move.

use std::fmt;
use std::sync::OnceLock;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chess::{CastlingRights, Color, Move, MoveFlag, Piece, PieceKind, Position, Square};

/// Seed of the tables used when none is given.
pub const DEFAULT_SEED: u64 = 0x2018_0708_c4e5_5ec5;

/// Largest supported bucket count.
pub const MAX_BUCKETS: u32 = 32_768;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ZobristError {
    #[error("bucket count {0} is not a power of two in 1..=32768")]
    InvalidBucketCount(u64),
}

#[derive(Clone, PartialEq, Eq)]
pub struct ZobristTables {
    pub piece_square: [[u64; 64]; 12],
    pub side_to_move: u64,
    pub castling: [u64; 4],
    pub en_passant_file: [u64; 8],
    seed: u64,
}

impl fmt::Debug for ZobristTables {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ZobristTables").field("seed", &self.seed).finish_non_exhaustive()
    }
}

impl ZobristTables {
    pub const ENTRY_COUNT: usize = 12 * 64 + 1 + 4 + 8;

    pub fn new(seed: u64) -> ZobristTables {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut piece_square = [[0u64; 64]; 12];
        for plane in piece_square.iter_mut() {
            for key in plane.iter_mut() {
                *key = rng.next_u64();
            }
        }
        let side_to_move = rng.next_u64();
        let castling = std::array::from_fn(|_| rng.next_u64());
        let en_passant_file = std::array::from_fn(|_| rng.next_u64());
        ZobristTables { piece_square, side_to_move, castling, en_passant_file, seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// All 781 entries in fill order.
    pub fn entries(&self) -> Vec<u64> {
        let mut v: Vec<u64> = self.piece_square.iter().flatten().copied().collect();
        v.push(self.side_to_move);
        v.extend_from_slice(&self.castling);
        v.extend_from_slice(&self.en_passant_file);
        v
    }

    #[inline]
    pub fn piece_key(&self, piece: Piece, sq: Square) -> u64 {
        self.piece_square[piece.plane()][sq.index()]
    }

    fn castling_key(&self, rights: CastlingRights) -> u64 {
        (0..4)
            .filter(|i| rights.bits() & (1 << i) != 0)
            .fold(0, |acc, i| acc ^ self.castling[i])
    }

    fn side_key(&self, side: Color) -> u64 {
        if side == Color::White {
            self.side_to_move
        } else {
            0
        }
    }

    /// Hash of an arbitrary state description; `full_hash` is this applied
    /// to a position.
    pub fn hash_components(
        &self,
        pieces: impl IntoIterator<Item = (Square, Piece)>,
        side: Color,
        castling: CastlingRights,
        en_passant: Option<Square>,
    ) -> u64 {
        let mut h = pieces.into_iter().fold(0, |acc, (sq, p)| acc ^ self.piece_key(p, sq));
        h ^= self.side_key(side);
        h ^= self.castling_key(castling);
        if let Some(ep) = en_passant {
            h ^= self.en_passant_file[ep.file() as usize];
        }
        h
    }

    pub(crate) fn hash_board(&self, board: &crate::chess::Board) -> u64 {
        let pieces = Square::all().filter_map(|sq| board.squares[sq.index()].map(|o| (sq, o.piece)));
        self.hash_components(pieces, board.side, board.castling, board.ep)
    }

    /// XOR of the keys for every occupied square plus the state terms.
    /// Keys depend on piece kind and color only, not on piece identity.
    pub fn full_hash(&self, pos: &Position) -> u64 {
        let pieces = Square::all().filter_map(|sq| pos.piece_at(sq).map(|p| (sq, p)));
        self.hash_components(pieces, pos.side_to_move(), pos.castling_rights(), pos.en_passant_square())
    }

    /// Hash after `m` from `before`, using XOR deltas only. `h` must equal
    /// `full_hash(before)` and `m` must be a legal move there.
    pub fn incremental_update(&self, h: u64, before: &Position, m: &Move) -> u64 {
        let mover = before.piece_at(m.source).expect("move from an empty square");
        let mut h = h ^ self.piece_key(mover, m.source);
        let landed = match m.promotion {
            Some(kind) => Piece::new(mover.color, kind),
            None => mover,
        };
        match m.flag {
            MoveFlag::EnPassant => {
                let behind = Square::from_coords(m.target.file(), m.source.rank()).unwrap();
                h ^= self.piece_key(Piece::new(mover.color.other(), PieceKind::Pawn), behind);
            }
            _ => {
                if let Some(victim) = before.piece_at(m.target) {
                    h ^= self.piece_key(victim, m.target);
                }
            }
        }
        h ^= self.piece_key(landed, m.target);
        if m.flag == MoveFlag::Castle {
            let rank = m.source.rank();
            let (from, to) = if m.target.file() == 6 { (7, 5) } else { (0, 3) };
            let rook = Piece::new(mover.color, PieceKind::Rook);
            h ^= self.piece_key(rook, Square::from_coords(from, rank).unwrap());
            h ^= self.piece_key(rook, Square::from_coords(to, rank).unwrap());
        }

        h ^= self.side_key(Color::White) ^ self.side_key(Color::Black);

        let old_rights = before.castling_rights();
        let new_rights = rights_after(old_rights, m);
        h ^= self.castling_key(old_rights) ^ self.castling_key(new_rights);

        if let Some(ep) = before.en_passant_square() {
            h ^= self.en_passant_file[ep.file() as usize];
        }
        if m.flag == MoveFlag::DoublePush {
            h ^= self.en_passant_file[m.source.file() as usize];
        }
        h
    }
}

fn rights_after(mut rights: CastlingRights, m: &Move) -> CastlingRights {
    for sq in [m.source, m.target] {
        let lost = match sq {
            Square::A1 => CastlingRights::WHITE_QUEENSIDE,
            Square::H1 => CastlingRights::WHITE_KINGSIDE,
            Square::A8 => CastlingRights::BLACK_QUEENSIDE,
            Square::H8 => CastlingRights::BLACK_KINGSIDE,
            Square::E1 => {
                rights.remove(CastlingRights::WHITE_QUEENSIDE);
                CastlingRights::WHITE_KINGSIDE
            }
            Square::E8 => {
                rights.remove(CastlingRights::BLACK_QUEENSIDE);
                CastlingRights::BLACK_KINGSIDE
            }
            _ => CastlingRights::NONE,
        };
        rights.remove(lost);
    }
    rights
}

pub fn init_tables(seed: u64) -> ZobristTables {
    ZobristTables::new(seed)
}

pub fn full_hash(pos: &Position, tables: &ZobristTables) -> u64 {
    tables.full_hash(pos)
}

pub fn incremental_update(h: u64, before: &Position, m: &Move, tables: &ZobristTables) -> u64 {
    tables.incremental_update(h, before, m)
}

/// Tables for [`DEFAULT_SEED`], built once. Positions use these for their
/// repetition keys.
pub fn default_tables() -> &'static ZobristTables {
    static TABLES: OnceLock<ZobristTables> = OnceLock::new();
    TABLES.get_or_init(|| ZobristTables::new(DEFAULT_SEED))
}

/// A validated bucket count: a power of two from 1 to 32768.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct NumBuckets(u32);

impl NumBuckets {
    pub const ONE: NumBuckets = NumBuckets(1);

    pub fn new(n: u64) -> Result<NumBuckets, ZobristError> {
        if n.is_power_of_two() && n <= MAX_BUCKETS as u64 {
            Ok(NumBuckets(n as u32))
        } else {
            Err(ZobristError::InvalidBucketCount(n))
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl TryFrom<u32> for NumBuckets {
    type Error = ZobristError;

    fn try_from(n: u32) -> Result<Self, Self::Error> {
        NumBuckets::new(n as u64)
    }
}

impl From<NumBuckets> for u32 {
    fn from(n: NumBuckets) -> u32 {
        n.0
    }
}

impl fmt::Display for NumBuckets {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BucketId(u32);

impl BucketId {
    pub fn new(j: u32, num_buckets: NumBuckets) -> Option<BucketId> {
        (j < num_buckets.get()).then_some(BucketId(j))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for BucketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Low bits of the hash.
pub fn bucket_of(h: u64, num_buckets: NumBuckets) -> BucketId {
    BucketId((h & (num_buckets.get() as u64 - 1)) as u32)
}

/// `bucket_of` with the count validated first.
pub fn bucket(h: u64, num_buckets: u64) -> Result<BucketId, ZobristError> {
    Ok(bucket_of(h, NumBuckets::new(num_buckets)?))
}
