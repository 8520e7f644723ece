use std::io::{self, Write};

use super::Model;
use crate::chess::MoveIndex;
use crate::counts::RowKey;

/// Leading moves of one component with their signed weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentMoves {
    pub component: usize,
    pub moves: Vec<(MoveIndex, f64)>,
}

/// Up to `k` moves per component with the largest loading magnitude (PCA)
/// or basis weight (NMF). Weights below 1e-12 of the component's largest
/// count as zero and are not listed. Ties go to the smaller move index.
pub fn top_moves_per_component(model: &Model, k: usize) -> Vec<ComponentMoves> {
    (0..model.d())
        .map(|c| {
            let weights: Vec<f64> = match model {
                Model::Pca(m) => m.loadings.column(c).iter().copied().collect(),
                Model::Nmf(m) => m.h.row(c).iter().copied().collect(),
            };
            let floor = 1e-12 * weights.iter().fold(0.0f64, |a, w| a.max(w.abs()));
            let mut order: Vec<usize> = (0..weights.len()).filter(|&j| weights[j].abs() > floor).collect();
            order.sort_by(|&a, &b| weights[b].abs().total_cmp(&weights[a].abs()).then(a.cmp(&b)));
            let moves = order
                .into_iter()
                .take(k)
                .map(|j| (MoveIndex::from_index(j).expect("column is a move index"), weights[j]))
                .collect();
            ComponentMoves { component: c, moves }
        })
        .collect()
}

/// One row's coordinates in the component space.
#[derive(Clone, Debug, PartialEq)]
pub struct RowScores {
    pub row: usize,
    pub key: Option<RowKey>,
    pub scores: Vec<f64>,
}

/// PCA scores for every row, or the stored rows of NMF's W.
pub fn component_scores(model: &Model) -> Vec<RowScores> {
    let key = |i: usize| model.info().and_then(|info| info.row_key(i));
    match model {
        Model::Pca(m) => (0..m.scores.nrows())
            .map(|i| RowScores { row: i, key: key(i), scores: m.scores.row(i).iter().copied().collect() })
            .collect(),
        Model::Nmf(m) => m
            .rows
            .iter()
            .enumerate()
            .map(|(k, &i)| RowScores {
                row: i as usize,
                key: key(i as usize),
                scores: m.w.row(k).iter().copied().collect(),
            })
            .collect(),
    }
}

/// Columns: `component,rank,move,move_index,weight`.
pub fn write_top_moves_csv<W: Write>(mut out: W, table: &[ComponentMoves]) -> io::Result<()> {
    writeln!(out, "component,rank,move,move_index,weight")?;
    for c in table {
        for (rank, (m, w)) in c.moves.iter().enumerate() {
            writeln!(out, "{},{},{},{},{}", c.component + 1, rank + 1, m, m.index(), w)?;
        }
    }
    out.flush()
}

/// Columns: `row,key,label,c1..cd`. `label` names the piece by its
/// starting square, e.g. `Qd1`.
pub fn write_scores_csv<W: Write>(mut out: W, rows: &[RowScores]) -> io::Result<()> {
    let d = rows.first().map_or(0, |r| r.scores.len());
    let header: Vec<String> = (1..=d).map(|c| format!("c{c}")).collect();
    writeln!(out, "row,key,label,{}", header.join(","))?;
    for r in rows {
        let key = r.key.map(|k| k.to_string()).unwrap_or_default();
        let label = match r.key {
            Some(k) => k.piece().map_or_else(|| k.kind().name().to_string(), |id| id.label()),
            None => String::new(),
        };
        let scores: Vec<String> = r.scores.iter().map(|s| s.to_string()).collect();
        writeln!(out, "{},{},{},{}", r.row, key, label, scores.join(","))?;
    }
    out.flush()
}
