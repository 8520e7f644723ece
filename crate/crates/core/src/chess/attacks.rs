//! Attack sets as 64-bit masks. Sliders use ray scans stopped at the first
//! blocker; leapers use tables built at compile time.

use super::types::{Color, Square};

const fn leaper_table(deltas: &[(i8, i8)]) -> [u64; 64] {
    let mut table = [0u64; 64];
    let mut sq = 0;
    while sq < 64 {
        let f = (sq % 8) as i8;
        let r = (sq / 8) as i8;
        let mut i = 0;
        let mut bits = 0u64;
        while i < deltas.len() {
            let nf = f + deltas[i].0;
            let nr = r + deltas[i].1;
            if nf >= 0 && nf < 8 && nr >= 0 && nr < 8 {
                bits |= 1u64 << (nf + 8 * nr);
            }
            i += 1;
        }
        table[sq] = bits;
        sq += 1;
    }
    table
}

const KNIGHT: [u64; 64] = leaper_table(&[
    (1, 2),
    (2, 1),
    (2, -1),
    (1, -2),
    (-1, -2),
    (-2, -1),
    (-2, 1),
    (-1, 2),
]);
const KING: [u64; 64] = leaper_table(&[
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
]);
const WHITE_PAWN: [u64; 64] = leaper_table(&[(-1, 1), (1, 1)]);
const BLACK_PAWN: [u64; 64] = leaper_table(&[(-1, -1), (1, -1)]);

const ROOK_DIRS: [(i8, i8); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
const BISHOP_DIRS: [(i8, i8); 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];

#[inline]
pub fn knight(sq: Square) -> u64 {
    KNIGHT[sq.index()]
}

#[inline]
pub fn king(sq: Square) -> u64 {
    KING[sq.index()]
}

/// Squares a pawn of `color` on `sq` attacks.
#[inline]
pub fn pawn(color: Color, sq: Square) -> u64 {
    match color {
        Color::White => WHITE_PAWN[sq.index()],
        Color::Black => BLACK_PAWN[sq.index()],
    }
}

fn slide(sq: Square, occupied: u64, dirs: &[(i8, i8); 4]) -> u64 {
    let mut bits = 0;
    for &(df, dr) in dirs {
        let mut cur = sq;
        while let Some(next) = cur.offset(df, dr) {
            bits |= next.bit();
            if occupied & next.bit() != 0 {
                break;
            }
            cur = next;
        }
    }
    bits
}

pub fn rook(sq: Square, occupied: u64) -> u64 {
    slide(sq, occupied, &ROOK_DIRS)
}

pub fn bishop(sq: Square, occupied: u64) -> u64 {
    slide(sq, occupied, &BISHOP_DIRS)
}

pub fn queen(sq: Square, occupied: u64) -> u64 {
    rook(sq, occupied) | bishop(sq, occupied)
}

/// Iterates the set bits of a mask as squares, lowest first.
pub struct Bits(pub u64);

impl Iterator for Bits {
    type Item = Square;

    #[inline]
    fn next(&mut self) -> Option<Square> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(Square::from_index(i))
    }
}
