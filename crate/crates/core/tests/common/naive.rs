//! A deliberately simple mailbox move generator, used only as an oracle.
//! Squares are 0..64 with a1 = 0; pieces are FEN letters.

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Board {
    pub squares: [Option<char>; 64],
    pub white_to_move: bool,
    /// K, Q, k, q.
    pub castling: [bool; 4],
    pub ep: Option<usize>,
}

const KNIGHT: [(i32, i32); 8] = [(1, 2), (2, 1), (2, -1), (1, -2), (-1, -2), (-2, -1), (-2, 1), (-1, 2)];
const KING: [(i32, i32); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];
const ROOK: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
const BISHOP: [(i32, i32); 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];

fn step(sq: usize, df: i32, dr: i32) -> Option<usize> {
    let f = (sq % 8) as i32 + df;
    let r = (sq / 8) as i32 + dr;
    ((0..8).contains(&f) && (0..8).contains(&r)).then(|| (r * 8 + f) as usize)
}

fn name(sq: usize) -> String {
    format!("{}{}", (b'a' + (sq % 8) as u8) as char, sq / 8 + 1)
}

fn parse_square(s: &str) -> usize {
    let b = s.as_bytes();
    (b[0] - b'a') as usize + 8 * (b[1] - b'1') as usize
}

fn is_white(p: char) -> bool {
    p.is_ascii_uppercase()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NaiveMove {
    pub from: usize,
    pub to: usize,
    pub promo: Option<char>,
}

impl NaiveMove {
    pub fn uci(&self) -> String {
        let mut s = format!("{}{}", name(self.from), name(self.to));
        if let Some(p) = self.promo {
            s.push(p.to_ascii_lowercase());
        }
        s
    }
}

impl Board {
    pub fn from_fen(fen: &str) -> Board {
        let fields: Vec<&str> = fen.split_whitespace().collect();
        let mut squares = [None; 64];
        for (i, row) in fields[0].split('/').enumerate() {
            let rank = 7 - i;
            let mut file = 0;
            for c in row.chars() {
                if let Some(n) = c.to_digit(10) {
                    file += n as usize;
                } else {
                    squares[rank * 8 + file] = Some(c);
                    file += 1;
                }
            }
        }
        let castling = ['K', 'Q', 'k', 'q'].map(|c| fields[2].contains(c));
        let ep = (fields[3] != "-").then(|| parse_square(fields[3]));
        Board { squares, white_to_move: fields[1] == "w", castling, ep }
    }

    /// Placement, side, castling and en-passant fields.
    pub fn fen4(&self) -> String {
        let mut out = String::new();
        for rank in (0..8).rev() {
            let mut empty = 0;
            for file in 0..8 {
                match self.squares[rank * 8 + file] {
                    None => empty += 1,
                    Some(p) => {
                        if empty > 0 {
                            out.push_str(&empty.to_string());
                            empty = 0;
                        }
                        out.push(p);
                    }
                }
            }
            if empty > 0 {
                out.push_str(&empty.to_string());
            }
            if rank > 0 {
                out.push('/');
            }
        }
        out.push_str(if self.white_to_move { " w " } else { " b " });
        let rights: String = ['K', 'Q', 'k', 'q'].iter().zip(self.castling).filter(|(_, on)| *on).map(|(c, _)| *c).collect();
        out.push_str(if rights.is_empty() { "-" } else { &rights });
        out.push(' ');
        out.push_str(&self.ep.map_or("-".to_string(), name));
        out
    }

    /// Whether a piece of the given color attacks `sq`.
    pub fn attacked(&self, sq: usize, by_white: bool) -> bool {
        let piece = |p: char| if by_white { p.to_ascii_uppercase() } else { p };
        let at = |s: Option<usize>, p: char| s.is_some_and(|s| self.squares[s] == Some(piece(p)));
        let pawn_dr = if by_white { -1 } else { 1 };
        if at(step(sq, -1, pawn_dr), 'p') || at(step(sq, 1, pawn_dr), 'p') {
            return true;
        }
        if KNIGHT.iter().any(|&(df, dr)| at(step(sq, df, dr), 'n')) || KING.iter().any(|&(df, dr)| at(step(sq, df, dr), 'k')) {
            return true;
        }
        for (dirs, slider) in [(ROOK, 'r'), (BISHOP, 'b')] {
            for (df, dr) in dirs {
                let mut cur = sq;
                while let Some(next) = step(cur, df, dr) {
                    if let Some(p) = self.squares[next] {
                        if p == piece(slider) || p == piece('q') {
                            return true;
                        }
                        break;
                    }
                    cur = next;
                }
            }
        }
        false
    }

    fn pseudo_moves(&self) -> Vec<NaiveMove> {
        let mut out = Vec::new();
        let white = self.white_to_move;
        let mine = |s: usize| self.squares[s].is_some_and(|p| is_white(p) == white);
        let theirs = |s: usize| self.squares[s].is_some_and(|p| is_white(p) != white);
        for from in 0..64 {
            let Some(p) = self.squares[from] else { continue };
            if is_white(p) != white {
                continue;
            }
            match p.to_ascii_lowercase() {
                'p' => {
                    let dr = if white { 1 } else { -1 };
                    let last = if white { 7 } else { 0 };
                    let start = if white { 1 } else { 6 };
                    let mut push = |to: usize| {
                        if to / 8 == last {
                            for promo in ['q', 'r', 'b', 'n'] {
                                out.push(NaiveMove { from, to, promo: Some(promo) });
                            }
                        } else {
                            out.push(NaiveMove { from, to, promo: None });
                        }
                    };
                    if let Some(one) = step(from, 0, dr).filter(|&s| self.squares[s].is_none()) {
                        push(one);
                        if from / 8 == start {
                            if let Some(two) = step(one, 0, dr).filter(|&s| self.squares[s].is_none()) {
                                push(two);
                            }
                        }
                    }
                    for df in [-1, 1] {
                        if let Some(to) = step(from, df, dr) {
                            if theirs(to) || self.ep == Some(to) {
                                push(to);
                            }
                        }
                    }
                }
                'n' | 'k' => {
                    let offsets = if p.eq_ignore_ascii_case(&'n') { KNIGHT } else { KING };
                    for (df, dr) in offsets {
                        if let Some(to) = step(from, df, dr).filter(|&s| !mine(s)) {
                            out.push(NaiveMove { from, to, promo: None });
                        }
                    }
                }
                kind => {
                    let dirs: Vec<(i32, i32)> = match kind {
                        'r' => ROOK.to_vec(),
                        'b' => BISHOP.to_vec(),
                        _ => ROOK.iter().chain(BISHOP.iter()).copied().collect(),
                    };
                    for (df, dr) in dirs {
                        let mut cur = from;
                        while let Some(to) = step(cur, df, dr) {
                            if mine(to) {
                                break;
                            }
                            out.push(NaiveMove { from, to, promo: None });
                            if theirs(to) {
                                break;
                            }
                            cur = to;
                        }
                    }
                }
            }
        }
        // Castling: king and rook at home, path empty, king never crosses an attacked square.
        let (base, king, rook, rights) = if white { (0, 'K', 'R', [0, 1]) } else { (56, 'k', 'r', [2, 3]) };
        if self.squares[base + 4] == Some(king) {
            let safe = |s: usize| !self.attacked(base + s, !white);
            let empty = |s: usize| self.squares[base + s].is_none();
            if self.castling[rights[0]] && self.squares[base + 7] == Some(rook) && empty(5) && empty(6) && safe(4) && safe(5) && safe(6) {
                out.push(NaiveMove { from: base + 4, to: base + 6, promo: None });
            }
            if self.castling[rights[1]]
                && self.squares[base] == Some(rook)
                && empty(1)
                && empty(2)
                && empty(3)
                && safe(4)
                && safe(3)
                && safe(2)
            {
                out.push(NaiveMove { from: base + 4, to: base + 2, promo: None });
            }
        }
        out
    }

    pub fn make(&self, m: NaiveMove) -> Board {
        let mut b = self.clone();
        let p = b.squares[m.from].take().expect("moving piece");
        let pawn = p.eq_ignore_ascii_case(&'p');
        if pawn && Some(m.to) == self.ep && self.squares[m.to].is_none() {
            let victim = if self.white_to_move { m.to - 8 } else { m.to + 8 };
            b.squares[victim] = None;
        }
        b.squares[m.to] = Some(match m.promo {
            Some(q) if self.white_to_move => q.to_ascii_uppercase(),
            Some(q) => q,
            None => p,
        });
        if p.eq_ignore_ascii_case(&'k') && m.from.abs_diff(m.to) == 2 {
            let (rook_from, rook_to) = if m.to > m.from { (m.from + 3, m.from + 1) } else { (m.from - 4, m.from - 1) };
            b.squares[rook_to] = b.squares[rook_from].take();
        }
        b.ep = (pawn && m.from.abs_diff(m.to) == 16).then(|| (m.from + m.to) / 2);
        for (i, corner) in [7usize, 0, 63, 56].into_iter().enumerate() {
            if m.from == corner || m.to == corner {
                b.castling[i] = false;
            }
        }
        if p == 'K' {
            b.castling[0] = false;
            b.castling[1] = false;
        }
        if p == 'k' {
            b.castling[2] = false;
            b.castling[3] = false;
        }
        b.white_to_move = !self.white_to_move;
        b
    }

    fn king(&self, white: bool) -> usize {
        let k = if white { 'K' } else { 'k' };
        (0..64).find(|&s| self.squares[s] == Some(k)).expect("king on board")
    }

    pub fn legal_moves(&self) -> Vec<NaiveMove> {
        self.pseudo_moves()
            .into_iter()
            .filter(|&m| {
                let after = self.make(m);
                !after.attacked(after.king(self.white_to_move), !self.white_to_move)
            })
            .collect()
    }

    pub fn perft(&self, depth: u32) -> u64 {
        if depth == 0 {
            return 1;
        }
        self.legal_moves().into_iter().map(|m| self.make(m).perft(depth - 1)).sum()
    }
}
