//! UCI client over a child process (or any line transport) and the
//! built-in random-move engine that speaks the same protocol.

use std::collections::BTreeMap;
use std::io::{self, BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chess::{Move, Position, UciMove};

/// Command name that selects the in-process random mover instead of a
/// subprocess.
pub const BUILTIN_RANDOM: &str = "builtin:random";

/// Name of the UCI option the built-in engine reads its per-game seed from.
pub const SEED_OPTION: &str = "Seed";

#[derive(Debug, Error)]
pub enum UciError {
    #[error("engine i/o: {0}")]
    Io(#[from] io::Error),
    #[error("engine protocol error: {0}")]
    Protocol(String),
    #[error("engine did not answer `{0}` in time")]
    Timeout(String),
}

/// Search limit sent with `go`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchLimit {
    /// Milliseconds per move.
    Movetime(u64),
    Depth(u32),
}

impl Default for SearchLimit {
    fn default() -> Self {
        SearchLimit::Movetime(10)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Executable path, or [`BUILTIN_RANDOM`].
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default)]
    pub limit: SearchLimit,
    #[serde(default)]
    pub options: BTreeMap<String, String>,
    /// How long to wait for any single reply.
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
}

fn default_timeout_ms() -> u64 {
    10_000
}

impl EngineConfig {
    pub fn builtin_random() -> EngineConfig {
        EngineConfig::new(BUILTIN_RANDOM)
    }

    pub fn new(command: impl Into<String>) -> EngineConfig {
        EngineConfig {
            command: command.into(),
            args: Vec::new(),
            limit: SearchLimit::default(),
            options: BTreeMap::new(),
            timeout_ms: default_timeout_ms(),
        }
    }

    pub fn is_builtin(&self) -> bool {
        self.command == BUILTIN_RANDOM
    }
}

/// Parses a `bestmove` line. `bestmove (none)` and `bestmove 0000` are
/// protocol errors: the engine had no move to give.
pub fn parse_bestmove(line: &str) -> Result<UciMove, UciError> {
    let mut words = line.split_whitespace();
    if words.next() != Some("bestmove") {
        return Err(UciError::Protocol(format!("expected bestmove, got `{line}`")));
    }
    match words.next() {
        None => Err(UciError::Protocol("empty bestmove".into())),
        Some("(none)") | Some("0000") => {
            Err(UciError::Protocol(format!("engine reported no legal move (`{line}`)")))
        }
        Some(mv) => mv
            .parse()
            .map_err(|_| UciError::Protocol(format!("unparsable move in `{line}`"))),
    }
}

/// A UCI conversation. Replies are read on a helper thread so every wait can
/// time out.
pub struct UciSession {
    writer: Box<dyn Write + Send>,
    lines: Receiver<io::Result<String>>,
    timeout: Duration,
    child: Option<Child>,
    limit: SearchLimit,
    options: Vec<String>,
    name: Option<String>,
}

impl UciSession {
    /// Spawns the engine and completes the handshake.
    pub fn spawn(cfg: &EngineConfig) -> Result<UciSession, UciError> {
        let mut child = Command::new(&cfg.command)
            .args(&cfg.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
        let stdin: ChildStdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut session = UciSession::over(BufReader::new(stdout), stdin, cfg);
        session.child = Some(child);
        session.handshake(&cfg.options)?;
        Ok(session)
    }

    /// Wraps an existing transport without sending anything.
    pub fn over<R, W>(reader: R, writer: W, cfg: &EngineConfig) -> UciSession
    where
        R: BufRead + Send + 'static,
        W: Write + Send + 'static,
    {
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in reader.lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        UciSession {
            writer: Box::new(writer),
            lines: rx,
            timeout: Duration::from_millis(cfg.timeout_ms),
            child: None,
            limit: cfg.limit,
            options: Vec::new(),
            name: None,
        }
    }

    fn send(&mut self, line: &str) -> Result<(), UciError> {
        log::trace!(">> {line}");
        writeln!(self.writer, "{line}")?;
        self.writer.flush()?;
        Ok(())
    }

    /// Reads lines until one satisfies `done`, returning it.
    fn wait_for(&mut self, what: &str, mut done: impl FnMut(&str) -> bool) -> Result<String, UciError> {
        let deadline = Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(left) {
                Ok(Ok(line)) => {
                    log::trace!("<< {line}");
                    let line = line.trim().to_string();
                    if done(&line) {
                        return Ok(line);
                    }
                    if let Some(rest) = line.strip_prefix("id name ") {
                        self.name = Some(rest.to_string());
                    }
                    if let Some(rest) = line.strip_prefix("option name ") {
                        let name = rest.split(" type ").next().unwrap_or(rest).trim();
                        self.options.push(name.to_string());
                    }
                }
                Ok(Err(e)) => return Err(UciError::Io(e)),
                Err(RecvTimeoutError::Timeout) => return Err(UciError::Timeout(what.to_string())),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(UciError::Protocol(format!("engine closed its output while waiting for {what}")))
                }
            }
        }
    }

    /// `uci`/`uciok`, option setup, then `isready`/`readyok`.
    pub fn handshake(&mut self, options: &BTreeMap<String, String>) -> Result<(), UciError> {
        self.send("uci")?;
        self.wait_for("uciok", |l| l == "uciok")?;
        for (k, v) in options {
            self.send(&format!("setoption name {k} value {v}"))?;
        }
        self.sync()
    }

    pub fn sync(&mut self) -> Result<(), UciError> {
        self.send("isready")?;
        self.wait_for("readyok", |l| l == "readyok")?;
        Ok(())
    }

    pub fn engine_name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// Whether the engine advertised an option with this name.
    pub fn has_option(&self, name: &str) -> bool {
        self.options.iter().any(|o| o.eq_ignore_ascii_case(name))
    }

    pub fn set_option(&mut self, name: &str, value: &str) -> Result<(), UciError> {
        self.send(&format!("setoption name {name} value {value}"))
    }

    pub fn new_game(&mut self) -> Result<(), UciError> {
        self.send("ucinewgame")?;
        self.sync()
    }

    /// `position startpos moves ...` or `position fen <fen> moves ...`.
    pub fn set_position(&mut self, fen: Option<&str>, moves: &[Move]) -> Result<(), UciError> {
        let mut cmd = match fen {
            Some(f) => format!("position fen {f}"),
            None => "position startpos".to_string(),
        };
        if !moves.is_empty() {
            cmd.push_str(" moves");
            for m in moves {
                cmd.push(' ');
                cmd.push_str(&m.to_string());
            }
        }
        self.send(&cmd)
    }

    pub fn best_move(&mut self) -> Result<UciMove, UciError> {
        let go = match self.limit {
            SearchLimit::Movetime(ms) => format!("go movetime {ms}"),
            SearchLimit::Depth(d) => format!("go depth {d}"),
        };
        self.send(&go)?;
        let line = self.wait_for("bestmove", |l| l.starts_with("bestmove"))?;
        parse_bestmove(&line)
    }

    /// Sends `quit` and reaps the child, killing it if it lingers.
    pub fn close(mut self) -> Result<(), UciError> {
        let _ = self.send("quit");
        if let Some(mut child) = self.child.take() {
            let deadline = Instant::now() + Duration::from_secs(2);
            while Instant::now() < deadline {
                if child.try_wait()?.is_some() {
                    return Ok(());
                }
                thread::sleep(Duration::from_millis(10));
            }
            child.kill()?;
            child.wait()?;
        }
        Ok(())
    }
}

impl Drop for UciSession {
    fn drop(&mut self) {
        if let Some(child) = self.child.as_mut() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Uniform choice among the legal moves.
pub fn random_legal_move(pos: &Position, rng: &mut ChaCha8Rng) -> Option<Move> {
    pos.legal_moves().choose(rng).copied()
}

/// Serves the built-in random mover over UCI until `quit` or end of input.
/// The per-game seed comes from `setoption name Seed value N`; `base_seed`
/// applies until then.
pub fn serve_random_engine<R: BufRead, W: Write>(input: R, mut out: W, base_seed: u64) -> io::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    let mut pos = Position::initial();
    for line in input.lines() {
        let line = line?;
        let mut words = line.split_whitespace();
        match words.next() {
            Some("uci") => {
                writeln!(out, "id name chessvec-random")?;
                writeln!(out, "id author chessvec")?;
                writeln!(out, "option name {SEED_OPTION} type spin default 0 min 0 max 9223372036854775807")?;
                writeln!(out, "uciok")?;
            }
            Some("isready") => writeln!(out, "readyok")?,
            Some("setoption") => {
                let rest: Vec<&str> = words.collect();
                if let (Some(n), Some(v)) = (rest.iter().position(|w| *w == "name"), rest.iter().position(|w| *w == "value"))
                {
                    if rest[n + 1..v].join(" ").eq_ignore_ascii_case(SEED_OPTION) {
                        if let Some(seed) = rest.get(v + 1).and_then(|s| s.parse::<u64>().ok()) {
                            rng = ChaCha8Rng::seed_from_u64(seed);
                        }
                    }
                }
            }
            Some("ucinewgame") => pos = Position::initial(),
            Some("position") => pos = parse_position_command(&line).unwrap_or_else(|_| Position::initial()),
            Some("go") => match random_legal_move(&pos, &mut rng) {
                Some(m) => writeln!(out, "bestmove {m}")?,
                None => writeln!(out, "bestmove (none)")?,
            },
            Some("quit") => break,
            _ => {}
        }
        out.flush()?;
    }
    Ok(())
}

/// Parses `position startpos|fen <fen> [moves ...]`.
pub fn parse_position_command(line: &str) -> Result<Position, UciError> {
    let bad = |why: String| UciError::Protocol(format!("{why} in `{line}`"));
    let rest = line.trim().strip_prefix("position").ok_or_else(|| bad("not a position command".into()))?;
    let (setup, moves) = match rest.split_once(" moves") {
        Some((s, m)) => (s.trim(), m.trim()),
        None => (rest.trim(), ""),
    };
    let mut pos = if setup == "startpos" {
        Position::initial()
    } else if let Some(fen) = setup.strip_prefix("fen ") {
        Position::from_fen(fen.trim()).map_err(|e| bad(e.to_string()))?
    } else {
        return Err(bad("unknown setup".into()));
    };
    for mv in moves.split_whitespace() {
        let m = pos.parse_uci(mv).map_err(|e| bad(e.to_string()))?;
        pos = pos.apply_move(&m).map_err(|e| bad(e.to_string()))?;
    }
    Ok(pos)
}
