use super::attacks::{self, Bits};
use super::position::{Board, CastlingRights};
use super::types::{Color, Move, MoveFlag, PieceKind, Square};

impl Board {
    /// Pseudo-legal moves filtered by "own king not attacked afterwards".
    pub(crate) fn legal_moves(&self) -> Vec<Move> {
        let mut moves = Vec::with_capacity(48);
        self.pseudo_legal(&mut moves);
        let us = self.side;
        moves.retain(|m| {
            let mut next = *self;
            next.make(m);
            !next.in_check(us)
        });
        moves
    }

    fn pseudo_legal(&self, out: &mut Vec<Move>) {
        let us = self.side;
        let own = self.colors[us.index()];
        let theirs = self.colors[us.other().index()];
        let occupied = own | theirs;

        let push = |out: &mut Vec<Move>, from: Square, targets: u64| {
            for to in Bits(targets) {
                let flag = if theirs & to.bit() != 0 { MoveFlag::Capture } else { MoveFlag::Quiet };
                out.push(Move::new(from, to, None, flag));
            }
        };

        for from in Bits(self.pieces(us, PieceKind::Knight)) {
            push(out, from, attacks::knight(from) & !own);
        }
        for from in Bits(self.pieces(us, PieceKind::Bishop)) {
            push(out, from, attacks::bishop(from, occupied) & !own);
        }
        for from in Bits(self.pieces(us, PieceKind::Rook)) {
            push(out, from, attacks::rook(from, occupied) & !own);
        }
        for from in Bits(self.pieces(us, PieceKind::Queen)) {
            push(out, from, attacks::queen(from, occupied) & !own);
        }
        let king = self.king_square(us);
        push(out, king, attacks::king(king) & !own);
        self.castles(king, occupied, out);
        self.pawn_moves(theirs, occupied, out);
    }

    fn castles(&self, king: Square, occupied: u64, out: &mut Vec<Move>) {
        let us = self.side;
        let home = if us == Color::White { Square::E1 } else { Square::E8 };
        if king != home || self.attacked(king, us.other(), occupied) {
            return;
        }
        let rank = home.rank();
        let sq = |file: u8| Square::from_coords(file, rank).unwrap();
        if self.castling.contains(CastlingRights::kingside(us))
            && occupied & (sq(5).bit() | sq(6).bit()) == 0
            && !self.attacked(sq(5), us.other(), occupied)
        {
            out.push(Move::new(king, sq(6), None, MoveFlag::Castle));
        }
        if self.castling.contains(CastlingRights::queenside(us))
            && occupied & (sq(1).bit() | sq(2).bit() | sq(3).bit()) == 0
            && !self.attacked(sq(3), us.other(), occupied)
        {
            out.push(Move::new(king, sq(2), None, MoveFlag::Castle));
        }
    }

    fn pawn_moves(&self, theirs: u64, occupied: u64, out: &mut Vec<Move>) {
        let us = self.side;
        let (dir, start_rank, last_rank) = match us {
            Color::White => (1i8, 1u8, 7u8),
            Color::Black => (-1i8, 6u8, 0u8),
        };
        let emit = |out: &mut Vec<Move>, from: Square, to: Square, flag: MoveFlag| {
            if to.rank() == last_rank {
                for kind in PieceKind::PROMOTIONS {
                    out.push(Move::new(from, to, Some(kind), flag));
                }
            } else {
                out.push(Move::new(from, to, None, flag));
            }
        };
        for from in Bits(self.pieces(us, PieceKind::Pawn)) {
            if let Some(one) = from.offset(0, dir) {
                if occupied & one.bit() == 0 {
                    emit(out, from, one, MoveFlag::Quiet);
                    if from.rank() == start_rank {
                        let two = one.offset(0, dir).unwrap();
                        if occupied & two.bit() == 0 {
                            out.push(Move::new(from, two, None, MoveFlag::DoublePush));
                        }
                    }
                }
            }
            let hits = attacks::pawn(us, from);
            for to in Bits(hits & theirs) {
                emit(out, from, to, MoveFlag::Capture);
            }
            if let Some(ep) = self.ep {
                if hits & ep.bit() != 0 {
                    out.push(Move::new(from, ep, None, MoveFlag::EnPassant));
                }
            }
        }
    }
}
