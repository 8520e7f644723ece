use std::fmt;

use serde::{Deserialize, Serialize};

use super::attacks;
use super::types::{Color, Move, MoveFlag, MoveIndex, Piece, PieceId, PieceKind, Square, UciMove};
use super::ChessError;
use crate::zobrist;

pub const START_FEN: &str = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1";

/// A piece standing on a square together with its identity. Black pieces
/// always carry [`PieceId::NONE`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Occupant {
    pub piece: Piece,
    pub id: PieceId,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct CastlingRights(u8);

impl CastlingRights {
    pub const WHITE_KINGSIDE: CastlingRights = CastlingRights(1);
    pub const WHITE_QUEENSIDE: CastlingRights = CastlingRights(2);
    pub const BLACK_KINGSIDE: CastlingRights = CastlingRights(4);
    pub const BLACK_QUEENSIDE: CastlingRights = CastlingRights(8);
    pub const NONE: CastlingRights = CastlingRights(0);
    pub const ALL: CastlingRights = CastlingRights(15);

    pub fn contains(self, other: CastlingRights) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn insert(&mut self, other: CastlingRights) {
        self.0 |= other.0;
    }

    pub fn remove(&mut self, other: CastlingRights) {
        self.0 &= !other.0;
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn kingside(color: Color) -> CastlingRights {
        match color {
            Color::White => Self::WHITE_KINGSIDE,
            Color::Black => Self::BLACK_KINGSIDE,
        }
    }

    pub fn queenside(color: Color) -> CastlingRights {
        match color {
            Color::White => Self::WHITE_QUEENSIDE,
            Color::Black => Self::BLACK_QUEENSIDE,
        }
    }

    /// Right lost when a piece leaves or arrives on `sq`.
    fn touched_by(sq: Square) -> CastlingRights {
        match sq {
            Square::A1 => Self::WHITE_QUEENSIDE,
            Square::H1 => Self::WHITE_KINGSIDE,
            Square::E1 => CastlingRights(Self::WHITE_KINGSIDE.0 | Self::WHITE_QUEENSIDE.0),
            Square::A8 => Self::BLACK_QUEENSIDE,
            Square::H8 => Self::BLACK_KINGSIDE,
            Square::E8 => CastlingRights(Self::BLACK_KINGSIDE.0 | Self::BLACK_QUEENSIDE.0),
            _ => Self::NONE,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ongoing,
    Checkmate,
    Stalemate,
    DrawRepetition,
    #[serde(rename = "draw-50move")]
    DrawFiftyMove,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        self != Status::Ongoing
    }
}

/// Placement plus the state that legal move generation depends on.
#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) struct Board {
    pub(crate) squares: [Option<Occupant>; 64],
    pub(crate) planes: [u64; 12],
    pub(crate) colors: [u64; 2],
    pub(crate) side: Color,
    pub(crate) castling: CastlingRights,
    pub(crate) ep: Option<Square>,
}

impl Board {
    fn empty() -> Board {
        Board {
            squares: [None; 64],
            planes: [0; 12],
            colors: [0; 2],
            side: Color::White,
            castling: CastlingRights::NONE,
            ep: None,
        }
    }

    fn put(&mut self, sq: Square, occ: Occupant) {
        debug_assert!(self.squares[sq.index()].is_none());
        self.squares[sq.index()] = Some(occ);
        self.planes[occ.piece.plane()] |= sq.bit();
        self.colors[occ.piece.color.index()] |= sq.bit();
    }

    fn take(&mut self, sq: Square) -> Option<Occupant> {
        let occ = self.squares[sq.index()].take()?;
        self.planes[occ.piece.plane()] &= !sq.bit();
        self.colors[occ.piece.color.index()] &= !sq.bit();
        Some(occ)
    }

    #[inline]
    pub(crate) fn occupied(&self) -> u64 {
        self.colors[0] | self.colors[1]
    }

    #[inline]
    pub(crate) fn pieces(&self, color: Color, kind: PieceKind) -> u64 {
        self.planes[Piece::new(color, kind).plane()]
    }

    pub(crate) fn king_square(&self, color: Color) -> Square {
        let bb = self.pieces(color, PieceKind::King);
        debug_assert!(bb != 0);
        Square::from_index(bb.trailing_zeros() as usize)
    }

    /// Whether any piece of `by` attacks `sq`, given an occupancy mask.
    pub(crate) fn attacked(&self, sq: Square, by: Color, occupied: u64) -> bool {
        let them = |k| self.pieces(by, k);
        if attacks::pawn(by.other(), sq) & them(PieceKind::Pawn) != 0 {
            return true;
        }
        if attacks::knight(sq) & them(PieceKind::Knight) != 0 {
            return true;
        }
        if attacks::king(sq) & them(PieceKind::King) != 0 {
            return true;
        }
        let queens = them(PieceKind::Queen);
        if attacks::rook(sq, occupied) & (them(PieceKind::Rook) | queens) != 0 {
            return true;
        }
        attacks::bishop(sq, occupied) & (them(PieceKind::Bishop) | queens) != 0
    }

    pub(crate) fn in_check(&self, color: Color) -> bool {
        self.attacked(self.king_square(color), color.other(), self.occupied())
    }

    /// Plays a move assumed pseudo-legal; returns the captured occupant.
    pub(crate) fn make(&mut self, m: &Move) -> Option<Occupant> {
        let mut mover = self.take(m.source).expect("move from an empty square");
        let captured = if m.flag == MoveFlag::EnPassant {
            let behind = Square::from_coords(m.target.file(), m.source.rank()).unwrap();
            self.take(behind)
        } else {
            self.take(m.target)
        };
        if let Some(kind) = m.promotion {
            mover.piece.kind = kind;
        }
        self.put(m.target, mover);

        if m.flag == MoveFlag::Castle {
            let rank = m.source.rank();
            let (from, to) = if m.target.file() == 6 { (7, 5) } else { (0, 3) };
            let rook = self
                .take(Square::from_coords(from, rank).unwrap())
                .expect("castling without a rook");
            self.put(Square::from_coords(to, rank).unwrap(), rook);
        }

        self.castling.remove(CastlingRights::touched_by(m.source));
        self.castling.remove(CastlingRights::touched_by(m.target));
        self.ep = if m.flag == MoveFlag::DoublePush {
            Square::from_coords(m.source.file(), (m.source.rank() + m.target.rank()) / 2)
        } else {
            None
        };
        self.side = self.side.other();
        captured
    }
}

/// Full game state. Immutable once built; [`Position::apply_move`] returns
/// a successor.
#[derive(Clone, PartialEq, Eq)]
pub struct Position {
    pub(crate) board: Board,
    halfmove_clock: u32,
    fullmove_number: u32,
    /// Keys of earlier positions since the last irreversible move.
    history: Vec<u64>,
    key: u64,
}

impl Position {
    pub fn initial() -> Position {
        Position::from_fen(START_FEN).expect("start FEN parses")
    }

    /// Parses FEN. White piece identities are reconstructed: a piece on its
    /// own home square gets that square's id, the rest take unused ids of the
    /// same initial kind, then unused pawn ids (promoted pawns), then any.
    pub fn from_fen(fen: &str) -> Result<Position, ChessError> {
        let bad = |why: &str| ChessError::InvalidFen(format!("{why}: {fen}"));
        let fields: Vec<&str> = fen.split_whitespace().collect();
        if fields.len() < 4 || fields.len() > 6 {
            return Err(bad("expected 4 to 6 fields"));
        }

        let mut placed: Vec<(Square, Piece)> = Vec::new();
        let ranks: Vec<&str> = fields[0].split('/').collect();
        if ranks.len() != 8 {
            return Err(bad("expected 8 ranks"));
        }
        for (i, row) in ranks.iter().enumerate() {
            let rank = 7 - i as u8;
            let mut file = 0u8;
            for c in row.chars() {
                if let Some(d) = c.to_digit(10) {
                    if !(1..=8).contains(&d) {
                        return Err(bad("bad empty-square count"));
                    }
                    file += d as u8;
                } else {
                    let piece = Piece::from_fen_char(c).ok_or_else(|| bad("bad piece letter"))?;
                    let sq = Square::from_coords(file, rank).ok_or_else(|| bad("rank overflow"))?;
                    placed.push((sq, piece));
                    file += 1;
                }
                if file > 8 {
                    return Err(bad("rank overflow"));
                }
            }
            if file != 8 {
                return Err(bad("short rank"));
            }
        }

        let mut board = Board::empty();
        board.side = match fields[1] {
            "w" => Color::White,
            "b" => Color::Black,
            _ => return Err(bad("bad side to move")),
        };
        if fields[2] != "-" {
            for c in fields[2].chars() {
                board.castling.insert(match c {
                    'K' => CastlingRights::WHITE_KINGSIDE,
                    'Q' => CastlingRights::WHITE_QUEENSIDE,
                    'k' => CastlingRights::BLACK_KINGSIDE,
                    'q' => CastlingRights::BLACK_QUEENSIDE,
                    _ => return Err(bad("bad castling field")),
                });
            }
        }
        board.ep = match fields[3] {
            "-" => None,
            s => Some(s.parse().map_err(|_| bad("bad en-passant square"))?),
        };
        let halfmove_clock = match fields.get(4) {
            Some(s) => s.parse().map_err(|_| bad("bad halfmove clock"))?,
            None => 0,
        };
        let fullmove_number = match fields.get(5) {
            Some(s) => s.parse().map_err(|_| bad("bad fullmove number"))?,
            None => 1,
        };

        for (sq, id) in assign_ids(&placed).map_err(|e| bad(e))? {
            let piece = placed.iter().find(|(s, _)| *s == sq).unwrap().1;
            board.put(sq, Occupant { piece, id });
        }

        for color in Color::ALL {
            if board.pieces(color, PieceKind::King).count_ones() != 1 {
                return Err(bad("each side needs exactly one king"));
            }
        }
        let back_ranks = 0xff00_0000_0000_00ffu64;
        if (board.pieces(Color::White, PieceKind::Pawn) | board.pieces(Color::Black, PieceKind::Pawn))
            & back_ranks
            != 0
        {
            return Err(bad("pawn on first or last rank"));
        }
        if board.in_check(board.side.other()) {
            return Err(bad("side not to move is in check"));
        }
        // Drop castling rights the placement cannot support.
        for (right, king_sq, rook_sq, color) in [
            (CastlingRights::WHITE_KINGSIDE, Square::E1, Square::H1, Color::White),
            (CastlingRights::WHITE_QUEENSIDE, Square::E1, Square::A1, Color::White),
            (CastlingRights::BLACK_KINGSIDE, Square::E8, Square::H8, Color::Black),
            (CastlingRights::BLACK_QUEENSIDE, Square::E8, Square::A8, Color::Black),
        ] {
            let ok = board.squares[king_sq.index()].map(|o| o.piece) == Some(Piece::new(color, PieceKind::King))
                && board.squares[rook_sq.index()].map(|o| o.piece) == Some(Piece::new(color, PieceKind::Rook));
            if !ok {
                board.castling.remove(right);
            }
        }

        Ok(Position::from_board(board, halfmove_clock, fullmove_number, Vec::new()))
    }

    fn from_board(board: Board, halfmove_clock: u32, fullmove_number: u32, history: Vec<u64>) -> Position {
        let key = zobrist::default_tables().hash_board(&board);
        Position { board, halfmove_clock, fullmove_number, history, key }
    }

    pub fn to_fen(&self) -> String {
        let mut out = String::new();
        for rank in (0..8).rev() {
            let mut empty = 0;
            for file in 0..8 {
                match self.board.squares[(file + 8 * rank) as usize] {
                    None => empty += 1,
                    Some(occ) => {
                        if empty > 0 {
                            out.push(char::from_digit(empty, 10).unwrap());
                            empty = 0;
                        }
                        out.push(occ.piece.fen_char());
                    }
                }
            }
            if empty > 0 {
                out.push(char::from_digit(empty, 10).unwrap());
            }
            if rank > 0 {
                out.push('/');
            }
        }
        out.push(' ');
        out.push(self.board.side.letter());
        out.push(' ');
        let c = self.board.castling;
        if c == CastlingRights::NONE {
            out.push('-');
        } else {
            for (r, ch) in [
                (CastlingRights::WHITE_KINGSIDE, 'K'),
                (CastlingRights::WHITE_QUEENSIDE, 'Q'),
                (CastlingRights::BLACK_KINGSIDE, 'k'),
                (CastlingRights::BLACK_QUEENSIDE, 'q'),
            ] {
                if c.contains(r) {
                    out.push(ch);
                }
            }
        }
        match self.board.ep {
            Some(sq) => out.push_str(&format!(" {sq}")),
            None => out.push_str(" -"),
        }
        out.push_str(&format!(" {} {}", self.halfmove_clock, self.fullmove_number));
        out
    }

    pub fn side_to_move(&self) -> Color {
        self.board.side
    }

    pub fn castling_rights(&self) -> CastlingRights {
        self.board.castling
    }

    pub fn en_passant_square(&self) -> Option<Square> {
        self.board.ep
    }

    pub fn halfmove_clock(&self) -> u32 {
        self.halfmove_clock
    }

    pub fn fullmove_number(&self) -> u32 {
        self.fullmove_number
    }

    /// Repetition key under the built-in Zobrist tables.
    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn occupant(&self, sq: Square) -> Option<Occupant> {
        self.board.squares[sq.index()]
    }

    pub fn piece_at(&self, sq: Square) -> Option<Piece> {
        self.occupant(sq).map(|o| o.piece)
    }

    /// White piece id on `sq`; 0 for empty squares and black pieces.
    pub fn occupant_piece(&self, sq: Square) -> PieceId {
        match self.occupant(sq) {
            Some(Occupant { piece, id }) if piece.color == Color::White => id,
            _ => PieceId::NONE,
        }
    }

    /// `occupant_piece` for every square, indexed by square.
    pub fn white_piece_map(&self) -> [PieceId; 64] {
        std::array::from_fn(|i| self.occupant_piece(Square::from_index(i)))
    }

    /// Occupancy mask of one of the 12 planes.
    pub fn bitboard(&self, piece: Piece) -> u64 {
        self.board.planes[piece.plane()]
    }

    pub fn planes(&self) -> [u64; 12] {
        self.board.planes
    }

    pub fn occupied(&self) -> u64 {
        self.board.occupied()
    }

    pub fn is_check(&self) -> bool {
        self.board.in_check(self.board.side)
    }

    pub fn king_square(&self, color: Color) -> Square {
        self.board.king_square(color)
    }

    /// How many earlier positions since the last irreversible move share
    /// this position's key.
    pub fn repetitions(&self) -> usize {
        self.history.iter().filter(|&&k| k == self.key).count()
    }

    pub fn legal_moves(&self) -> Vec<Move> {
        self.board.legal_moves()
    }

    /// Resolves from/to/promotion against the legal moves.
    pub fn find_move(&self, source: Square, target: Square, promotion: Option<PieceKind>) -> Option<Move> {
        self.legal_moves()
            .into_iter()
            .find(|m| m.source == source && m.target == target && m.promotion == promotion)
    }

    /// The legal move with this index. A promotion decodes to a queen.
    pub fn move_for_index(&self, index: MoveIndex) -> Option<Move> {
        let (source, target) = index.decode();
        self.find_move(source, target, None).or_else(|| self.find_move(source, target, Some(PieceKind::Queen)))
    }

    pub fn parse_uci(&self, text: &str) -> Result<Move, ChessError> {
        let m: UciMove = text.parse()?;
        self.find_move(m.source, m.target, m.promotion)
            .ok_or_else(|| ChessError::IllegalMove(format!("{text} in {}", self.to_fen())))
    }

    /// Successor position, or `IllegalMove` if `m` is not legal here. Only
    /// from/to/promotion are compared; the flag is taken from the matching
    /// legal move.
    pub fn apply_move(&self, m: &Move) -> Result<Position, ChessError> {
        let legal = self
            .legal_moves()
            .into_iter()
            .find(|l| l.same_squares(m))
            .ok_or_else(|| ChessError::IllegalMove(format!("{m} in {}", self.to_fen())))?;
        Ok(self.play_unchecked(&legal))
    }

    /// Applies a move already known to be legal.
    pub(crate) fn play_unchecked(&self, m: &Move) -> Position {
        let mut board = self.board;
        let is_pawn = board.squares[m.source.index()].map(|o| o.piece.kind) == Some(PieceKind::Pawn);
        let captured = board.make(m);
        let irreversible = is_pawn || captured.is_some();
        let halfmove_clock = if irreversible { 0 } else { self.halfmove_clock + 1 };
        let fullmove_number = self.fullmove_number + u32::from(self.board.side == Color::Black);
        let history = if irreversible {
            Vec::new()
        } else {
            let mut h = Vec::with_capacity(self.history.len() + 1);
            h.extend_from_slice(&self.history);
            h.push(self.key);
            h
        };
        Position::from_board(board, halfmove_clock, fullmove_number, history)
    }

    /// Terminal classification. No legal moves wins over the draw rules.
    pub fn status(&self) -> Status {
        if self.legal_moves().is_empty() {
            return if self.is_check() { Status::Checkmate } else { Status::Stalemate };
        }
        if self.repetitions() >= 2 {
            return Status::DrawRepetition;
        }
        if self.halfmove_clock >= 100 {
            return Status::DrawFiftyMove;
        }
        Status::Ongoing
    }

    pub fn perft(&self, depth: u32) -> u64 {
        perft_board(&self.board, depth)
    }

    /// Checks occupancy against the derived planes; used by tests.
    pub fn planes_consistent(&self) -> bool {
        let mut planes = [0u64; 12];
        for sq in Square::all() {
            if let Some(o) = self.occupant(sq) {
                planes[o.piece.plane()] |= sq.bit();
            }
        }
        let disjoint = {
            let mut acc = 0u64;
            self.board.planes.iter().all(|&p| {
                let ok = acc & p == 0;
                acc |= p;
                ok
            })
        };
        planes == self.board.planes
            && disjoint
            && self.board.colors[0] == planes[..6].iter().fold(0, |a, b| a | b)
            && self.board.colors[1] == planes[6..].iter().fold(0, |a, b| a | b)
    }
}

impl Default for Position {
    fn default() -> Self {
        Position::initial()
    }
}

impl fmt::Debug for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Position({})", self.to_fen())
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rank in (0..8).rev() {
            for file in 0..8 {
                let c = self.board.squares[(file + 8 * rank) as usize].map_or('.', |o| o.piece.fen_char());
                write!(f, "{c}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn perft_board(board: &Board, depth: u32) -> u64 {
    if depth == 0 {
        return 1;
    }
    let moves = board.legal_moves();
    if depth == 1 {
        return moves.len() as u64;
    }
    moves
        .iter()
        .map(|m| {
            let mut next = *board;
            next.make(m);
            perft_board(&next, depth - 1)
        })
        .sum()
}

fn assign_ids(placed: &[(Square, Piece)]) -> Result<Vec<(Square, PieceId)>, &'static str> {
    let mut used = [false; 17];
    let mut out = Vec::with_capacity(placed.len());
    let mut pending = Vec::new();
    for &(sq, piece) in placed {
        if piece.color == Color::Black {
            out.push((sq, PieceId::NONE));
            continue;
        }
        let home = PieceId::initial(sq);
        if !home.is_none() && home.initial_kind() == Some(piece.kind) {
            used[home.index()] = true;
            out.push((sq, home));
        } else {
            pending.push((sq, piece));
        }
    }
    pending.sort_by_key(|(sq, _)| *sq);
    for (sq, piece) in pending {
        let pick = |pred: &dyn Fn(PieceId) -> bool, used: &[bool; 17]| {
            PieceId::white_pieces().find(|id| !used[id.index()] && pred(*id))
        };
        let id = pick(&|id| id.initial_kind() == Some(piece.kind), &used)
            .or_else(|| pick(&|id| id.initial_kind() == Some(PieceKind::Pawn), &used))
            .or_else(|| pick(&|_| true, &used))
            .ok_or("more than 16 white pieces")?;
        used[id.index()] = true;
        out.push((sq, id));
    }
    Ok(out)
}

/// Positions and statuses along a game, starting from `start`.
pub fn replay<'a>(start: &Position, moves: impl IntoIterator<Item = &'a Move>) -> Result<Vec<Position>, ChessError> {
    let mut line = vec![start.clone()];
    for m in moves {
        let next = line.last().unwrap().apply_move(m)?;
        line.push(next);
    }
    Ok(line)
}
