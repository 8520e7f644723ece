//! Standard Algebraic Notation, resolved against the legal moves of a position.

use super::position::Position;
use super::types::{Move, MoveFlag, PieceKind, Square};
use super::ChessError;

/// Resolves a SAN token (check marks and `!?` annotations allowed) to the
/// unique legal move it denotes.
pub fn parse_san(pos: &Position, san: &str) -> Result<Move, ChessError> {
    let invalid = || ChessError::InvalidSan(san.to_string());
    let text = san.trim_end_matches(['+', '#', '!', '?']);
    if text.is_empty() || !text.is_ascii() {
        return Err(invalid());
    }
    let legal = pos.legal_moves();

    if matches!(text, "O-O" | "0-0" | "O-O-O" | "0-0-0") {
        let file = if text.len() == 3 { 6 } else { 2 };
        return legal
            .into_iter()
            .find(|m| m.flag == MoveFlag::Castle && m.target.file() == file)
            .ok_or_else(|| ChessError::IllegalMove(format!("{san} in {}", pos.to_fen())));
    }

    let mut body = text;
    let mut promotion = None;
    if let Some((head, promo)) = body.split_once('=') {
        promotion = Some(promo_kind(promo).ok_or_else(invalid)?);
        body = head;
    } else if body.len() >= 3 && body.as_bytes()[0].is_ascii_lowercase() {
        // Tolerate "e8Q" without the '='.
        if let Some(k) = body.chars().last().and_then(|c| c.is_ascii_uppercase().then(|| promo_kind(&c.to_string())).flatten()) {
            promotion = Some(k);
            body = &body[..body.len() - 1];
        }
    }

    let (kind, rest) = match body.chars().next() {
        Some(c @ ('K' | 'Q' | 'R' | 'B' | 'N')) => (PieceKind::from_letter(c).unwrap(), &body[1..]),
        Some('a'..='h') => (PieceKind::Pawn, body),
        _ => return Err(invalid()),
    };
    if rest.len() < 2 {
        return Err(invalid());
    }
    let target: Square = rest[rest.len() - 2..].parse().map_err(|_| invalid())?;
    let mut file_hint = None;
    let mut rank_hint = None;
    for c in rest[..rest.len() - 2].chars() {
        match c {
            'a'..='h' => file_hint = Some(c as u8 - b'a'),
            '1'..='8' => rank_hint = Some(c as u8 - b'1'),
            'x' | ':' | '-' => {}
            _ => return Err(invalid()),
        }
    }

    let mut hits = legal.into_iter().filter(|m| {
        m.target == target
            && m.promotion == promotion
            && pos.piece_at(m.source).map(|p| p.kind) == Some(kind)
            && file_hint.is_none_or(|f| m.source.file() == f)
            && rank_hint.is_none_or(|r| m.source.rank() == r)
    });
    match (hits.next(), hits.next()) {
        (Some(m), None) => Ok(m),
        (None, _) => Err(ChessError::IllegalMove(format!("{san} in {}", pos.to_fen()))),
        (Some(_), Some(_)) => Err(ChessError::AmbiguousSan(san.to_string())),
    }
}

fn promo_kind(s: &str) -> Option<PieceKind> {
    let mut chars = s.chars();
    let c = chars.next()?;
    if chars.next().is_some() {
        return None;
    }
    PieceKind::from_letter(c).filter(|k| PieceKind::PROMOTIONS.contains(k))
}

/// SAN for a legal move, with minimal disambiguation and a check suffix.
pub fn to_san(pos: &Position, m: &Move) -> String {
    let mut out = String::new();
    let kind = pos.piece_at(m.source).map(|p| p.kind).unwrap_or(PieceKind::Pawn);
    if m.flag == MoveFlag::Castle {
        out.push_str(if m.target.file() == 6 { "O-O" } else { "O-O-O" });
    } else if kind == PieceKind::Pawn {
        if m.is_capture() {
            out.push((b'a' + m.source.file()) as char);
            out.push('x');
        }
        out.push_str(&m.target.to_string());
        if let Some(p) = m.promotion {
            out.push('=');
            out.push(p.letter().to_ascii_uppercase());
        }
    } else {
        out.push(kind.letter().to_ascii_uppercase());
        let rivals: Vec<Move> = pos
            .legal_moves()
            .into_iter()
            .filter(|o| o.target == m.target && o.source != m.source && pos.piece_at(o.source).map(|p| p.kind) == Some(kind))
            .collect();
        if !rivals.is_empty() {
            let same_file = rivals.iter().any(|o| o.source.file() == m.source.file());
            let same_rank = rivals.iter().any(|o| o.source.rank() == m.source.rank());
            if !same_file {
                out.push((b'a' + m.source.file()) as char);
            } else if !same_rank {
                out.push((b'1' + m.source.rank()) as char);
            } else {
                out.push_str(&m.source.to_string());
            }
        }
        if m.is_capture() {
            out.push('x');
        }
        out.push_str(&m.target.to_string());
    }
    if let Ok(next) = pos.apply_move(m) {
        if next.is_check() {
            out.push(if next.legal_moves().is_empty() { '#' } else { '+' });
        }
    }
    out
}
