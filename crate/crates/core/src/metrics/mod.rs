//! Per-move and per-player measures derived from aligned game records and
//! engine analyses: move effect, search-gap hit rate and KL-divergence,
//! candidate score summaries, and player aggregates.

mod bench;
pub mod kl;
mod summary;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::board::{to_engine_coord, BoardError, Color, Move, MoveKind};
use crate::engine::{EngineError, TurnAnalysis};

pub use bench::{
    calibration_run, histogram, sample_positions, strength_bench, CalibrationRow, HistogramBin, NetworkPositions,
    NetworkStrength,
};
pub use kl::{kl_divergence, restricted_kl, search_gap_kl, RestrictedPolicy, VisitDistribution, POLICY_FLOOR};
pub use summary::{player_summary, PlayerSummary, DEFAULT_WIN_THRESHOLD, TOP_K};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("analyses misaligned: expected turn {expected}, found {found}")]
    MisalignedTurns { expected: usize, found: usize },
    #[error("turn {turn} has no raw policy")]
    MissingPolicy { turn: usize },
    #[error("visited support is empty")]
    EmptySupport,
    #[error("a move appears twice in the visit distribution")]
    DuplicateMove,
    #[error("move index {0} is outside the policy vector")]
    PolicyIndex(usize),
    #[error("no analyzed moves for {0}")]
    NoMovesForColor(Color),
    #[error("position set is empty")]
    EmptyPositionSet,
    #[error(transparent)]
    Board(#[from] BoardError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Effect of the move taking `prev` to `next`, in points from the mover's
/// point of view (negative means the mover lost points).
pub fn effect(prev: &TurnAnalysis, next: &TurnAnalysis, mover: Color) -> Result<f64, MetricsError> {
    if next.turn_index != prev.turn_index + 1 {
        return Err(MetricsError::MisalignedTurns { expected: prev.turn_index + 1, found: next.turn_index });
    }
    Ok(mover.sign() * (next.root_score_mean - prev.root_score_mean))
}

/// Whether the most visited move equals the raw policy's favourite.
///
/// `Ok(None)` when the position cannot be judged: the search's top move is a
/// pass but the policy has no pass entry.
pub fn hit(analysis: &TurnAnalysis) -> Result<Option<bool>, MetricsError> {
    let policy = analysis
        .raw_policy
        .as_ref()
        .ok_or(MetricsError::MissingPolicy { turn: analysis.turn_index })?;
    let top = analysis.top_candidate().ok_or(MetricsError::EmptySupport)?;
    let size = analysis.board_size;
    let top_index = top.kind(size)?.policy_index(size);
    if top_index >= policy.len() {
        return Ok(None);
    }
    Ok(analysis.policy_argmax().map(|a| a == top_index))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitRate {
    pub rate: f64,
    pub hits: usize,
    pub positions: usize,
}

/// Hit rate over a set of positions. The played move does not enter the
/// hit test (it compares search against policy); it is accepted so callers
/// can pass aligned pairs straight through.
pub fn hit_rate<'a, I>(turns: I) -> Result<HitRate, MetricsError>
where
    I: IntoIterator<Item = (&'a TurnAnalysis, Option<Move>)>,
{
    let mut hits = 0;
    let mut positions = 0;
    for (analysis, _) in turns {
        if let Some(h) = hit(analysis)? {
            positions += 1;
            hits += usize::from(h);
        }
    }
    let rate = if positions == 0 { 0.0 } else { hits as f64 / positions as f64 };
    Ok(HitRate { rate, hits, positions })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TurnMetricsOptions {
    /// Weight candidate average and median by visits instead of treating
    /// every candidate equally.
    pub visit_weighted: bool,
}

/// Derived quantities for one move. Score means are in the mover's
/// perspective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TurnMetrics {
    pub turn_index: usize,
    pub mover: Color,
    /// Engine coordinate of the move played.
    pub played: String,
    /// Mover-perspective effect; absent when the following position was not
    /// analyzed.
    pub effect: Option<f64>,
    /// Black-perspective score change across the move.
    pub black_delta: Option<f64>,
    pub hit: Option<bool>,
    pub kl_divergence: Option<f64>,
    pub best_score_mean: f64,
    pub actual_score_mean: Option<f64>,
    pub avg_score_mean: f64,
    pub median_score_mean: f64,
    /// Black's win rate before the move.
    pub root_winrate: f64,
    /// Mover's win rate before the move.
    pub mover_winrate: f64,
    /// 0-based rank of the played move among candidates by visits.
    pub played_rank: Option<usize>,
}

fn weighted_median(mut values: Vec<(f64, f64)>) -> f64 {
    values.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = values.iter().map(|v| v.1).sum();
    let mut acc = 0.0;
    for &(x, w) in &values {
        acc += w;
        if acc >= total / 2.0 {
            return x;
        }
    }
    values.last().map(|v| v.0).unwrap_or(0.0)
}

/// Median of an unweighted sample: the middle value, or the mean of the two
/// middle values for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Per-move metrics for a replayed game.
///
/// `moves` are the replayed moves and `analyses[i]` must describe the
/// position before `moves[i]`; an extra trailing analysis (the final
/// position) is allowed. Warnings list moves the engine did not search.
pub fn turn_metrics(
    moves: &[Move],
    analyses: &[TurnAnalysis],
    opts: TurnMetricsOptions,
) -> Result<(Vec<TurnMetrics>, Vec<String>), MetricsError> {
    for (i, a) in analyses.iter().enumerate() {
        if a.turn_index != i {
            return Err(MetricsError::MisalignedTurns { expected: i, found: a.turn_index });
        }
    }
    if analyses.len() > moves.len() + 1 {
        return Err(MetricsError::MisalignedTurns { expected: moves.len(), found: analyses.len() - 1 });
    }
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    for (i, (a, mv)) in analyses.iter().zip(moves).enumerate() {
        let mover = mv.color;
        let sign = mover.sign();
        let size = a.board_size;
        let next = analyses.get(i + 1);
        let effect_value = next.map(|n| effect(a, n, mover)).transpose()?;
        let black_delta = next.map(|n| n.root_score_mean - a.root_score_mean);

        let hit_flag = match hit(a) {
            Ok(h) => h,
            Err(MetricsError::MissingPolicy { .. }) => None,
            Err(e) => return Err(e),
        };
        let kl = match search_gap_kl(a) {
            Ok(v) => Some(v),
            Err(MetricsError::MissingPolicy { .. }) => None,
            Err(e) => return Err(e),
        };

        let top = a.top_candidate().ok_or(MetricsError::EmptySupport)?;
        let scores: Vec<f64> = a.candidates.iter().map(|c| sign * c.score_mean).collect();
        let (avg, med) = if opts.visit_weighted {
            let total: f64 = a.candidates.iter().map(|c| c.visits as f64).sum();
            let avg = a.candidates.iter().map(|c| sign * c.score_mean * c.visits as f64).sum::<f64>() / total;
            let med = weighted_median(a.candidates.iter().map(|c| (sign * c.score_mean, c.visits as f64)).collect());
            (avg, med)
        } else {
            (scores.iter().sum::<f64>() / scores.len() as f64, median(&scores))
        };

        let played_kind: MoveKind = mv.kind;
        let ranked = a.ranked_candidates();
        let mut played_rank = None;
        for (r, c) in ranked.iter().enumerate() {
            if c.kind(size)? == played_kind {
                played_rank = Some(r);
                break;
            }
        }
        let actual = played_rank.map(|r| sign * ranked[r].score_mean);
        if actual.is_none() {
            warnings.push(format!(
                "turn {i}: played move {} was not among the engine's candidates",
                to_engine_coord(played_kind, size)
            ));
        }

        out.push(TurnMetrics {
            turn_index: i,
            mover,
            played: to_engine_coord(played_kind, size),
            effect: effect_value,
            black_delta,
            hit: hit_flag,
            kl_divergence: kl,
            best_score_mean: sign * top.score_mean,
            actual_score_mean: actual,
            avg_score_mean: avg,
            median_score_mean: med,
            root_winrate: a.root_winrate,
            mover_winrate: if mover == Color::Black { a.root_winrate } else { 1.0 - a.root_winrate },
            played_rank,
        });
    }
    Ok((out, warnings))
}
