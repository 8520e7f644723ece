use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::game::{GameRecord, GameResult, MoveRecord};
use crate::zobrist::{bucket_of, NumBuckets, ZobristTables};

/// Where the record hashes came from and which bucket count, if any, they
/// were annotated with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub zobrist_seed: u64,
    pub num_buckets: Option<NumBuckets>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub games_kept: u64,
    pub games_dropped: u64,
    pub records_kept: u64,
}

/// White-won games. The games are kept whole so positions can be replayed;
/// the dataset's records are their white moves, optionally narrowed to a
/// `(game, ply)` selection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilteredDataset {
    pub meta: DatasetMeta,
    pub games: Vec<GameRecord>,
    pub selection: Option<BTreeSet<(u64, u32)>>,
    pub summary: FilterSummary,
}

impl FilteredDataset {
    pub fn from_games(meta: DatasetMeta, games: Vec<GameRecord>, games_dropped: u64) -> FilteredDataset {
        FilteredDataset::with_selection(meta, games, None, games_dropped)
    }

    pub fn with_selection(
        meta: DatasetMeta,
        games: Vec<GameRecord>,
        selection: Option<BTreeSet<(u64, u32)>>,
        games_dropped: u64,
    ) -> FilteredDataset {
        let mut ds = FilteredDataset { meta, games, selection, summary: FilterSummary::default() };
        ds.summary = FilterSummary {
            games_kept: ds.games.len() as u64,
            games_dropped,
            records_kept: ds.records().count() as u64,
        };
        ds
    }

    /// Records of one game.
    pub fn game_records<'a>(&'a self, g: &'a GameRecord) -> impl Iterator<Item = &'a MoveRecord> + 'a {
        g.white_moves().filter(move |r| self.selection.as_ref().is_none_or(|s| s.contains(&(r.game, r.ply))))
    }

    pub fn records(&self) -> impl Iterator<Item = &MoveRecord> {
        self.games.iter().flat_map(|g| self.game_records(g))
    }

    pub fn num_records(&self) -> usize {
        self.summary.records_kept as usize
    }

    pub fn is_empty(&self) -> bool {
        self.summary.records_kept == 0
    }
}

/// Keeps the games white won. `zobrist_seed` is the seed the record hashes
/// were computed with.
pub fn filter_white_wins(games: &[GameRecord], zobrist_seed: u64) -> FilteredDataset {
    let kept: Vec<GameRecord> = games.iter().filter(|g| g.result == GameResult::WhiteWin).cloned().collect();
    let dropped = (games.len() - kept.len()) as u64;
    FilteredDataset::from_games(DatasetMeta { zobrist_seed, num_buckets: None }, kept, dropped)
}

/// Recomputes every record hash with `tables` by replay. A no-op when the
/// dataset was already hashed with the same seed.
pub fn rehash(ds: &FilteredDataset, tables: &ZobristTables) -> Result<FilteredDataset, IngestError> {
    if tables.seed() == ds.meta.zobrist_seed {
        return Ok(ds.clone());
    }
    let games = ds
        .games
        .par_iter()
        .map(|g| {
            let mut g = g.clone();
            let line = g.replay().map_err(|source| IngestError::Replay { game: g.game_id, source })?;
            for (r, pos) in g.moves.iter_mut().zip(&line) {
                r.hash = tables.full_hash(pos);
                r.bucket = None;
            }
            Ok(g)
        })
        .collect::<Result<Vec<_>, IngestError>>()?;
    Ok(FilteredDataset {
        meta: DatasetMeta { zobrist_seed: tables.seed(), num_buckets: None },
        games,
        selection: ds.selection.clone(),
        summary: ds.summary,
    })
}

/// Sets every record's bucket from the hash of the position it was played
/// from, rehashing first when `tables` uses a different seed than the
/// dataset.
pub fn annotate_buckets(
    ds: &FilteredDataset,
    tables: &ZobristTables,
    num_buckets: u64,
) -> Result<FilteredDataset, IngestError> {
    let nb = NumBuckets::new(num_buckets)?;
    let mut out = rehash(ds, tables)?;
    out.games.par_iter_mut().for_each(|g| {
        for r in g.moves.iter_mut() {
            r.bucket = Some(bucket_of(r.hash, nb));
        }
    });
    out.meta.num_buckets = Some(nb);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chess::{Color, Move, Position};
    use crate::game::Termination;
    use crate::zobrist::{default_tables, init_tables, BucketId, DEFAULT_SEED};

    fn game(id: u64, uci: &[&str], result: GameResult) -> GameRecord {
        let mut pos = Position::initial();
        let moves: Vec<Move> = uci
            .iter()
            .map(|u| {
                let m = pos.parse_uci(u).unwrap();
                pos = pos.apply_move(&m).unwrap();
                m
            })
            .collect();
        GameRecord::from_moves(id, None, &moves, result, Termination::Unterminated, default_tables()).unwrap()
    }

    /// Twenty plies of knight shuffling: ten white moves.
    fn shuffle_game(id: u64, result: GameResult) -> GameRecord {
        let cycle = ["g1f3", "g8f6", "f3g1", "f6g8"];
        let plies: Vec<&str> = cycle.iter().cycle().take(20).copied().collect();
        game(id, &plies, result)
    }

    #[test]
    fn keeps_only_white_wins() {
        let games = [
            shuffle_game(1, GameResult::WhiteWin),
            shuffle_game(2, GameResult::Draw),
            shuffle_game(3, GameResult::BlackWin),
        ];
        let ds = filter_white_wins(&games, DEFAULT_SEED);
        assert_eq!(ds.num_records(), 10);
        assert_eq!(ds.records().count(), 10);
        assert!(ds.records().all(|r| r.color == Color::White && r.game == 1));
        assert_eq!(ds.summary, FilterSummary { games_kept: 1, games_dropped: 2, records_kept: 10 });
    }

    #[test]
    fn empty_input() {
        let ds = filter_white_wins(&[], DEFAULT_SEED);
        assert!(ds.is_empty());
        assert_eq!(ds.summary, FilterSummary::default());
    }

    #[test]
    fn filtering_is_idempotent() {
        let games = [shuffle_game(1, GameResult::WhiteWin), shuffle_game(2, GameResult::Draw)];
        let once = filter_white_wins(&games, DEFAULT_SEED);
        let twice = filter_white_wins(&once.games, DEFAULT_SEED);
        assert_eq!(once.games, twice.games);
        assert_eq!(once.records().count(), twice.records().count());
    }

    #[test]
    fn one_bucket_means_bucket_zero() {
        let ds = filter_white_wins(&[shuffle_game(1, GameResult::WhiteWin)], DEFAULT_SEED);
        let a = annotate_buckets(&ds, default_tables(), 1).unwrap();
        assert!(a.records().all(|r| r.bucket == Some(BucketId::new(0, NumBuckets::ONE).unwrap())));
        assert!(matches!(annotate_buckets(&ds, default_tables(), 3), Err(IngestError::InvalidBucketCount(_))));
    }

    #[test]
    fn transpositions_share_a_bucket() {
        // Both games reach the position after 1. Nf3 Nf6 2. Nc3 by different orders.
        let a = game(1, &["g1f3", "g8f6", "b1c3", "b8c6", "a2a3"], GameResult::WhiteWin);
        let b = game(2, &["b1c3", "g8f6", "g1f3", "b8c6", "a2a3"], GameResult::WhiteWin);
        let ds = filter_white_wins(&[a, b], DEFAULT_SEED);
        let ann = annotate_buckets(&ds, default_tables(), 32768).unwrap();
        let last: Vec<_> = ann.games.iter().map(|g| g.moves[4].bucket).collect();
        assert_eq!(last[0], last[1]);
        assert_ne!(ann.games[0].moves[2].bucket, ann.games[0].moves[0].bucket);
    }

    #[test]
    fn reseeding_rewrites_buckets_not_records() {
        let games: Vec<_> = (1..=4).map(|i| shuffle_game(i, GameResult::WhiteWin)).collect();
        let ds = filter_white_wins(&games, DEFAULT_SEED);
        let a = annotate_buckets(&ds, default_tables(), 256).unwrap();
        let other = init_tables(99);
        let b = annotate_buckets(&ds, &other, 256).unwrap();
        assert_eq!(a.records().count(), b.records().count());
        assert_eq!(b.meta.zobrist_seed, 99);
        assert!(a.records().zip(b.records()).any(|(x, y)| x.bucket != y.bucket));
        for (x, y) in a.records().zip(b.records()) {
            assert_eq!((x.game, x.ply, x.piece, x.move_index), (y.game, y.ply, y.piece, y.move_index));
        }
        let first = b.games[0].moves[0].hash;
        assert_eq!(first, other.full_hash(&Position::initial()));
    }
}
