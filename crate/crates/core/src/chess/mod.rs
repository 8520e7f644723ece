//! Chess rules with per-piece identity tracking.
//!
//! Squares are numbered `file + 8 * rank` (a1 = 0, h8 = 63) and a move's
//! column in the count matrix is `64 * source + target`. Every white piece
//! carries a [`PieceId`] from the initial position onward.

mod attacks;
mod movegen;
mod position;
mod san;
mod types;

use thiserror::Error;

pub(crate) use position::Board;
pub use position::{replay, CastlingRights, Occupant, Position, Status, START_FEN};
pub use san::{parse_san, to_san};
pub use types::{
    decode_move_index, move_index, Color, Move, MoveFlag, MoveIndex, Piece, PieceId, PieceKind, Square,
    UciMove,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChessError {
    #[error("invalid square `{0}`")]
    InvalidSquare(String),
    #[error("invalid FEN ({0})")]
    InvalidFen(String),
    #[error("invalid UCI move `{0}`")]
    InvalidUci(String),
    #[error("illegal move {0}")]
    IllegalMove(String),
    #[error("invalid SAN `{0}`")]
    InvalidSan(String),
    #[error("ambiguous SAN `{0}`")]
    AmbiguousSan(String),
}

pub fn initial_position() -> Position {
    Position::initial()
}

pub fn legal_moves(pos: &Position) -> Vec<Move> {
    pos.legal_moves()
}

pub fn apply_move(pos: &Position, m: &Move) -> Result<Position, ChessError> {
    pos.apply_move(m)
}

pub fn occupant_piece(pos: &Position, sq: Square) -> PieceId {
    pos.occupant_piece(sq)
}

pub fn game_status(pos: &Position) -> Status {
    pos.status()
}

pub fn perft(pos: &Position, depth: u32) -> u64 {
    pos.perft(depth)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq(s: &str) -> Square {
        s.parse().unwrap()
    }

    fn play(pos: &Position, moves: &[&str]) -> Position {
        moves.iter().fold(pos.clone(), |p, m| {
            let mv = p.parse_uci(m).unwrap();
            p.apply_move(&mv).unwrap()
        })
    }

    #[test]
    fn initial_position_facts() {
        let pos = initial_position();
        let a1 = pos.occupant(Square::A1).unwrap();
        assert_eq!(a1.piece, Piece::new(Color::White, PieceKind::Rook));
        assert_eq!(a1.id.get(), 1);
        assert!(pos.occupant(sq("e4")).is_none());
        assert_eq!(occupant_piece(&pos, sq("e4")), PieceId::NONE);
        assert_eq!(pos.side_to_move(), Color::White);
        assert_eq!(pos.en_passant_square(), None);
        assert_eq!(pos.castling_rights(), CastlingRights::ALL);
        assert_eq!(pos.to_fen(), START_FEN);
        assert!(pos.planes_consistent());
    }

    #[test]
    fn occupant_piece_examples() {
        let pos = initial_position();
        assert_eq!(occupant_piece(&pos, Square::D1).get(), 4);
        assert_eq!(occupant_piece(&pos, Square::D8), PieceId::NONE);
        assert_eq!(occupant_piece(&pos, sq("e5")), PieceId::NONE);
    }

    #[test]
    fn twenty_opening_moves() {
        assert_eq!(legal_moves(&initial_position()).len(), 20);
    }

    #[test]
    fn pawn_identity_follows_the_move() {
        let pos = play(&initial_position(), &["e2e4"]);
        let occ = pos.occupant(sq("e4")).unwrap();
        assert_eq!(occ.piece.kind, PieceKind::Pawn);
        assert_eq!(occ.id.get(), 13);
        assert_eq!(pos.en_passant_square(), Some(sq("e3")));
    }

    #[test]
    fn promotion_keeps_the_pawn_id() {
        let pos = Position::from_fen("4k3/P7/8/8/8/8/8/4K3 w - - 0 1").unwrap();
        // a7 is not a home square, so the pawn takes the first free pawn id.
        assert_eq!(pos.occupant_piece(sq("a7")).get(), 9);
        let next = play(&pos, &["a7a8q"]);
        let occ = next.occupant(sq("a8")).unwrap();
        assert_eq!(occ.piece, Piece::new(Color::White, PieceKind::Queen));
        assert_eq!(occ.id.get(), 9);
    }

    #[test]
    fn move_index_decodes_promotions_to_queen() {
        let pos = Position::from_fen("4k3/P7/8/8/8/8/8/4K3 w - - 0 1").unwrap();
        let m = pos.move_for_index(MoveIndex::new(sq("a7"), sq("a8"))).unwrap();
        assert_eq!(m.promotion, Some(PieceKind::Queen));
        let k = pos.move_for_index(MoveIndex::new(sq("e1"), sq("d1"))).unwrap();
        assert_eq!(k.promotion, None);
        assert!(pos.move_for_index(MoveIndex::new(sq("e1"), sq("e3"))).is_none());
    }

    #[test]
    fn castling_moves_king_and_rook() {
        let pos = Position::from_fen("r3k2r/8/8/8/8/8/8/R3K2R w KQkq - 0 1").unwrap();
        let moves = legal_moves(&pos);
        let castle = moves
            .iter()
            .find(|m| m.source == Square::E1 && m.target == Square::G1)
            .expect("kingside castle generated");
        assert_eq!(castle.flag, MoveFlag::Castle);
        let next = pos.apply_move(castle).unwrap();
        assert_eq!(next.occupant(Square::G1).unwrap().id.get(), 5);
        assert_eq!(next.occupant(Square::F1).unwrap().id.get(), 8);
        assert!(next.occupant(Square::H1).is_none());
        assert!(!next.castling_rights().contains(CastlingRights::WHITE_KINGSIDE));
        assert!(!next.castling_rights().contains(CastlingRights::WHITE_QUEENSIDE));
        assert!(next.castling_rights().contains(CastlingRights::BLACK_KINGSIDE));
    }

    #[test]
    fn castling_blocked_when_passing_through_attack() {
        let pos = Position::from_fen("4kr2/8/8/8/8/8/8/4K2R w K - 0 1").unwrap();
        assert!(!legal_moves(&pos).iter().any(|m| m.flag == MoveFlag::Castle));
    }

    #[test]
    fn capture_retires_the_id() {
        let pos = play(&initial_position(), &["e2e4", "d7d5", "e4d5", "d8d5"]);
        let ids: Vec<u8> = Square::all().map(|s| pos.occupant_piece(s).get()).filter(|&i| i > 0).collect();
        assert_eq!(ids.len(), 15);
        assert!(!ids.contains(&13));
    }

    #[test]
    fn en_passant_capture() {
        let pos = play(&initial_position(), &["e2e4", "a7a6", "e4e5", "d7d5"]);
        let ep = pos.parse_uci("e5d6").unwrap();
        assert_eq!(ep.flag, MoveFlag::EnPassant);
        let next = pos.apply_move(&ep).unwrap();
        assert!(next.occupant(sq("d5")).is_none());
        assert_eq!(next.occupant_piece(sq("d6")).get(), 13);
    }

    #[test]
    fn illegal_move_rejected() {
        let pos = initial_position();
        let bogus = Move::new(sq("e2"), sq("e5"), None, MoveFlag::Quiet);
        assert!(matches!(pos.apply_move(&bogus), Err(ChessError::IllegalMove(_))));
        assert!(pos.parse_uci("e1e2").is_err());
    }

    #[test]
    fn fools_mate_is_checkmate() {
        let pos = play(&initial_position(), &["f2f3", "e7e5", "g2g4", "d8h4"]);
        assert!(pos.is_check());
        assert!(legal_moves(&pos).is_empty());
        assert_eq!(game_status(&pos), Status::Checkmate);
    }

    #[test]
    fn stalemate_detected() {
        let pos = Position::from_fen("7k/5Q2/6K1/8/8/8/8/8 b - - 0 1").unwrap();
        assert_eq!(game_status(&pos), Status::Stalemate);
    }

    #[test]
    fn threefold_by_knight_shuffle() {
        let shuffle = ["g1f3", "g8f6", "f3g1", "f6g8"];
        let once = play(&initial_position(), &shuffle);
        assert_eq!(game_status(&once), Status::Ongoing);
        let twice = play(&once, &shuffle);
        assert_eq!(twice.repetitions(), 2);
        assert_eq!(game_status(&twice), Status::DrawRepetition);
    }

    #[test]
    fn fifty_move_rule() {
        let pos = Position::from_fen("4k3/8/8/8/8/8/8/R3K3 w - - 99 80").unwrap();
        let next = play(&pos, &["a1a2"]);
        assert_eq!(next.halfmove_clock(), 100);
        assert_eq!(game_status(&next), Status::DrawFiftyMove);
    }

    #[test]
    fn fen_round_trip_and_validation() {
        for fen in [
            START_FEN,
            "r3k2r/p1ppqpb1/bn2pnp1/3PN3/1p2P3/2N2Q1p/PPPBBPPP/R3K2R w KQkq - 0 1",
            "8/2p5/3p4/KP5r/1R3p1k/8/4P1P1/8 w - - 0 1",
            "rnbqkbnr/pppp1ppp/8/4p3/4P3/8/PPPP1PPP/RNBQKBNR w KQkq e6 0 2",
        ] {
            assert_eq!(Position::from_fen(fen).unwrap().to_fen(), fen);
        }
        assert!(Position::from_fen("8/8/8/8/8/8/8/8 w - - 0 1").is_err());
        assert!(Position::from_fen("4k3/8/8/8/8/8/8/P3K3 w - - 0 1").is_err());
        assert!(Position::from_fen("4k3/8/8/8/8/8/8/4K2 w - - 0 1").is_err());
        assert!(Position::from_fen("4k3/4R3/8/8/8/8/8/4K3 w - - 0 1").is_err());
    }

    #[test]
    fn perft_start_position() {
        let pos = initial_position();
        assert_eq!(perft(&pos, 0), 1);
        assert_eq!(perft(&pos, 1), 20);
        assert_eq!(perft(&pos, 2), 400);
        assert_eq!(perft(&pos, 3), 8902);
    }
}
