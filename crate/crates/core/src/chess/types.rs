use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ChessError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    White,
    Black,
}

impl Color {
    pub const ALL: [Color; 2] = [Color::White, Color::Black];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    #[inline]
    pub fn other(self) -> Color {
        match self {
            Color::White => Color::Black,
            Color::Black => Color::White,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Color::White => 'w',
            Color::Black => 'b',
        }
    }
}

/// The six piece types, without color.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PieceKind {
    King,
    Queen,
    Rook,
    Bishop,
    Knight,
    Pawn,
}

impl PieceKind {
    pub const ALL: [PieceKind; 6] = [
        PieceKind::King,
        PieceKind::Queen,
        PieceKind::Rook,
        PieceKind::Bishop,
        PieceKind::Knight,
        PieceKind::Pawn,
    ];

    pub const PROMOTIONS: [PieceKind; 4] = [
        PieceKind::Queen,
        PieceKind::Rook,
        PieceKind::Bishop,
        PieceKind::Knight,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<PieceKind> {
        PieceKind::ALL.get(i).copied()
    }

    /// Lowercase FEN letter.
    pub fn letter(self) -> char {
        match self {
            PieceKind::King => 'k',
            PieceKind::Queen => 'q',
            PieceKind::Rook => 'r',
            PieceKind::Bishop => 'b',
            PieceKind::Knight => 'n',
            PieceKind::Pawn => 'p',
        }
    }

    pub fn from_letter(c: char) -> Option<PieceKind> {
        Some(match c.to_ascii_lowercase() {
            'k' => PieceKind::King,
            'q' => PieceKind::Queen,
            'r' => PieceKind::Rook,
            'b' => PieceKind::Bishop,
            'n' => PieceKind::Knight,
            'p' => PieceKind::Pawn,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            PieceKind::King => "king",
            PieceKind::Queen => "queen",
            PieceKind::Rook => "rook",
            PieceKind::Bishop => "bishop",
            PieceKind::Knight => "knight",
            PieceKind::Pawn => "pawn",
        }
    }

    pub fn from_name(s: &str) -> Option<PieceKind> {
        PieceKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// A colored piece; one of the 12 bitboard planes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Piece {
    pub color: Color,
    pub kind: PieceKind,
}

impl Piece {
    pub const fn new(color: Color, kind: PieceKind) -> Self {
        Piece { color, kind }
    }

    /// Plane index in `0..12`: white planes first, then black, each in
    /// `PieceKind::ALL` order.
    #[inline]
    pub fn plane(self) -> usize {
        self.color.index() * 6 + self.kind.index()
    }

    pub fn from_plane(plane: usize) -> Option<Piece> {
        let color = match plane / 6 {
            0 => Color::White,
            1 => Color::Black,
            _ => return None,
        };
        Some(Piece::new(color, PieceKind::from_index(plane % 6)?))
    }

    pub fn fen_char(self) -> char {
        match self.color {
            Color::White => self.kind.letter().to_ascii_uppercase(),
            Color::Black => self.kind.letter(),
        }
    }

    pub fn from_fen_char(c: char) -> Option<Piece> {
        let kind = PieceKind::from_letter(c)?;
        let color = if c.is_ascii_uppercase() { Color::White } else { Color::Black };
        Some(Piece::new(color, kind))
    }
}

/// Board location: `file + 8 * rank`, a1 = 0, h1 = 7, a2 = 8, h8 = 63.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Square(u8);

impl Square {
    pub const COUNT: usize = 64;

    pub const A1: Square = Square(0);
    pub const B1: Square = Square(1);
    pub const C1: Square = Square(2);
    pub const D1: Square = Square(3);
    pub const E1: Square = Square(4);
    pub const F1: Square = Square(5);
    pub const G1: Square = Square(6);
    pub const H1: Square = Square(7);
    pub const A8: Square = Square(56);
    pub const B8: Square = Square(57);
    pub const C8: Square = Square(58);
    pub const D8: Square = Square(59);
    pub const E8: Square = Square(60);
    pub const F8: Square = Square(61);
    pub const G8: Square = Square(62);
    pub const H8: Square = Square(63);

    pub fn new(index: u8) -> Option<Square> {
        (index < 64).then_some(Square(index))
    }

    /// # Panics
    /// If `index >= 64`.
    pub const fn from_index(index: usize) -> Square {
        assert!(index < 64);
        Square(index as u8)
    }

    pub fn from_coords(file: u8, rank: u8) -> Option<Square> {
        (file < 8 && rank < 8).then_some(Square(file + 8 * rank))
    }

    #[inline]
    pub const fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub const fn file(self) -> u8 {
        self.0 & 7
    }

    #[inline]
    pub const fn rank(self) -> u8 {
        self.0 >> 3
    }

    #[inline]
    pub const fn bit(self) -> u64 {
        1u64 << self.0
    }

    /// Square offset by (file, rank) deltas, if still on the board.
    pub fn offset(self, df: i8, dr: i8) -> Option<Square> {
        let f = self.file() as i8 + df;
        let r = self.rank() as i8 + dr;
        ((0..8).contains(&f) && (0..8).contains(&r)).then(|| Square((f + 8 * r) as u8))
    }

    pub fn all() -> impl Iterator<Item = Square> {
        (0..64u8).map(Square)
    }
}

impl fmt::Display for Square {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", (b'a' + self.file()) as char, (b'1' + self.rank()) as char)
    }
}

impl fmt::Debug for Square {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Square {
    type Err = ChessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let b = s.as_bytes();
        if b.len() != 2 {
            return Err(ChessError::InvalidSquare(s.to_string()));
        }
        let file = b[0].wrapping_sub(b'a');
        let rank = b[1].wrapping_sub(b'1');
        Square::from_coords(file, rank).ok_or_else(|| ChessError::InvalidSquare(s.to_string()))
    }
}

/// Identity of an individual white piece. 0 means "empty or black".
///
/// Initial assignment: 1=Ra1, 2=Nb1, 3=Bc1, 4=Qd1, 5=Ke1, 6=Bf1, 7=Ng1,
/// 8=Rh1, 9..=16 = pawns a2..h2. An id follows its piece through promotion
/// and disappears with it on capture.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PieceId(u8);

impl PieceId {
    pub const NONE: PieceId = PieceId(0);
    /// Number of distinct ids including the special id 0.
    pub const COUNT: usize = 17;

    pub fn new(id: u8) -> Option<PieceId> {
        (id < 17).then_some(PieceId(id))
    }

    #[inline]
    pub fn get(self) -> u8 {
        self.0
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_none(self) -> bool {
        self.0 == 0
    }

    /// The white pieces, ids 1 through 16.
    pub fn white_pieces() -> impl Iterator<Item = PieceId> {
        (1..=16u8).map(PieceId)
    }

    /// Id initially assigned to the white piece standing on `sq`.
    pub fn initial(sq: Square) -> PieceId {
        match sq.index() {
            i @ 0..=7 => PieceId(i as u8 + 1),
            i @ 8..=15 => PieceId(i as u8 + 1),
            _ => PieceId::NONE,
        }
    }

    /// Home square of the piece, the inverse of [`PieceId::initial`].
    pub fn home_square(self) -> Option<Square> {
        (1..=16).contains(&self.0).then(|| Square(self.0 - 1))
    }

    /// Kind the piece had in the initial position.
    pub fn initial_kind(self) -> Option<PieceKind> {
        Some(match self.0 {
            1 | 8 => PieceKind::Rook,
            2 | 7 => PieceKind::Knight,
            3 | 6 => PieceKind::Bishop,
            4 => PieceKind::Queen,
            5 => PieceKind::King,
            9..=16 => PieceKind::Pawn,
            _ => return None,
        })
    }

    /// Short human label such as `Ra1` or `Pe2`.
    pub fn label(self) -> String {
        match (self.initial_kind(), self.home_square()) {
            (Some(k), Some(sq)) => format!("{}{}", k.letter().to_ascii_uppercase(), sq),
            _ => "none".to_string(),
        }
    }
}

impl fmt::Display for PieceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Column of the move-count matrix: `64 * source + target`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MoveIndex(u16);

impl MoveIndex {
    pub const COUNT: usize = 4096;

    pub fn new(source: Square, target: Square) -> MoveIndex {
        MoveIndex(64 * source.0 as u16 + target.0 as u16)
    }

    pub fn from_index(index: usize) -> Option<MoveIndex> {
        (index < Self::COUNT).then_some(MoveIndex(index as u16))
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn source(self) -> Square {
        Square((self.0 / 64) as u8)
    }

    pub fn target(self) -> Square {
        Square((self.0 % 64) as u8)
    }

    pub fn decode(self) -> (Square, Square) {
        (self.source(), self.target())
    }
}

impl fmt::Display for MoveIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.source(), self.target())
    }
}

pub fn move_index(source: Square, target: Square) -> MoveIndex {
    MoveIndex::new(source, target)
}

pub fn decode_move_index(index: MoveIndex) -> (Square, Square) {
    index.decode()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MoveFlag {
    Quiet,
    Capture,
    Castle,
    EnPassant,
    DoublePush,
}

/// A move in from/to form. Castling is the king's two-square move.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Move {
    pub source: Square,
    pub target: Square,
    pub promotion: Option<PieceKind>,
    pub flag: MoveFlag,
}

impl Move {
    pub fn new(source: Square, target: Square, promotion: Option<PieceKind>, flag: MoveFlag) -> Self {
        Move { source, target, promotion, flag }
    }

    pub fn index(&self) -> MoveIndex {
        MoveIndex::new(self.source, self.target)
    }

    /// Same from/to/promotion, ignoring the flag.
    pub fn same_squares(&self, other: &Move) -> bool {
        self.source == other.source && self.target == other.target && self.promotion == other.promotion
    }

    pub fn is_capture(&self) -> bool {
        matches!(self.flag, MoveFlag::Capture | MoveFlag::EnPassant)
    }

    pub fn uci(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.source, self.target)?;
        if let Some(p) = self.promotion {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}

/// Move parsed from UCI long algebraic text, before it is matched against
/// a position (flags are unknown at that point).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct UciMove {
    pub source: Square,
    pub target: Square,
    pub promotion: Option<PieceKind>,
}

impl FromStr for UciMove {
    type Err = ChessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ChessError::InvalidUci(s.to_string());
        if !s.is_ascii() || !(4..=5).contains(&s.len()) {
            return Err(bad());
        }
        let source: Square = s[0..2].parse().map_err(|_| bad())?;
        let target: Square = s[2..4].parse().map_err(|_| bad())?;
        let promotion = match s[4..].chars().next() {
            None => None,
            Some(c) => match PieceKind::from_letter(c) {
                Some(k) if PieceKind::PROMOTIONS.contains(&k) && c.is_ascii_lowercase() => Some(k),
                _ => return Err(bad()),
            },
        };
        Ok(UciMove { source, target, promotion })
    }
}

impl fmt::Display for UciMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.source, self.target)?;
        if let Some(p) = self.promotion {
            write!(f, "{}", p.letter())?;
        }
        Ok(())
    }
}
