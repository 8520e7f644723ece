mod common;

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use chessvec::chess::Position;
use common::naive;

const KIWIPETE: &str = "r3k2r/p1ppqpb1/bn2pnp1/3PN3/1p2P3/2N2Q1p/PPPBBPPP/R3K2R w KQkq - 0 1";
const ENDGAME: &str = "8/2p5/3p4/KP5r/1R3p1k/8/4P1P1/8 w - - 0 1";
const PROMOTIONS: &str = "r3k2r/Pppp1ppp/1b3nbN/nP6/BBP1P3/q4N2/Pp1P2PP/R2Q1RK1 w kq - 0 1";
const TALKCHESS: &str = "rnbq1k1r/pp1Pbppp/2p5/8/2B5/8/PPP1NnPP/RNBQK2R w KQ - 1 8";

fn fen4(pos: &Position) -> String {
    pos.to_fen().split_whitespace().take(4).collect::<Vec<_>>().join(" ")
}

fn legal_set(pos: &Position) -> BTreeSet<String> {
    pos.legal_moves().iter().map(|m| m.to_string()).collect()
}

fn naive_set(b: &naive::Board) -> BTreeSet<String> {
    b.legal_moves().iter().map(|m| m.uci()).collect()
}

/// Walks both generators in lockstep, comparing move sets and the
/// resulting positions at every node.
fn cross_check(pos: &Position, board: &naive::Board, depth: u32) -> u64 {
    assert_eq!(fen4(pos), board.fen4());
    let ours = legal_set(pos);
    assert_eq!(ours, naive_set(board), "move sets differ at {}", pos.to_fen());
    if depth == 0 {
        return 1;
    }
    board
        .legal_moves()
        .into_iter()
        .map(|m| {
            let next = pos.apply_move(&pos.parse_uci(&m.uci()).unwrap()).unwrap();
            cross_check(&next, &board.make(m), depth - 1)
        })
        .sum()
}

#[test]
fn published_perft_counts() {
    let table: [(&str, &[u64]); 5] = [
        ("rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1", &[20, 400, 8902, 197_281]),
        (KIWIPETE, &[48, 2039, 97_862]),
        (ENDGAME, &[14, 191, 2812, 43_238]),
        (PROMOTIONS, &[6, 264, 9467]),
        (TALKCHESS, &[44, 1486, 62_379]),
    ];
    for (fen, counts) in table {
        let pos = Position::from_fen(fen).unwrap();
        for (d, &expected) in counts.iter().enumerate() {
            assert_eq!(pos.perft(d as u32 + 1), expected, "{fen} depth {}", d + 1);
        }
    }
}

#[test]
fn naive_oracle_agrees_on_published_positions() {
    for (fen, depth, nodes) in [(KIWIPETE, 2, 2039), (ENDGAME, 3, 2812), (PROMOTIONS, 2, 264), (TALKCHESS, 2, 1486)] {
        let pos = Position::from_fen(fen).unwrap();
        assert_eq!(cross_check(&pos, &naive::Board::from_fen(fen), depth), nodes, "{fen}");
    }
}

#[test]
fn naive_oracle_agrees_along_random_games() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let mut pos = Position::initial();
        let mut board = naive::Board::from_fen(&pos.to_fen());
        for _ in 0..250 {
            assert_eq!(fen4(&pos), board.fen4());
            let moves = board.legal_moves();
            assert_eq!(legal_set(&pos), naive_set(&board), "at {}", pos.to_fen());
            let Some(&m) = moves.choose(&mut rng) else { break };
            pos = pos.apply_move(&pos.parse_uci(&m.uci()).unwrap()).unwrap();
            board = board.make(m);
        }
    }
}
