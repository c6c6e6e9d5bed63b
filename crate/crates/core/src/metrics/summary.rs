use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{MetricsError, TurnMetrics};
use crate::board::Color;

/// Mover win rate at which a game counts as decided.
pub const DEFAULT_WIN_THRESHOLD: f64 = 0.98;

/// Candidate ranks reported in [`PlayerSummary::top_k_match_rate`].
pub const TOP_K: [usize; 3] = [1, 3, 5];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlayerSummary {
    pub color: Color,
    /// Moves played by this player.
    pub moves: usize,
    /// Moves whose effect could be measured.
    pub measured_moves: usize,
    pub average_effect: f64,
    pub effect_std_dev: f64,
    /// Cumulative moving average of the measured effects.
    pub cma_series: Vec<f64>,
    /// Turn index of each entry in `cma_series`.
    pub cma_turns: Vec<usize>,
    pub hit_rate: f64,
    pub hits: usize,
    pub hit_positions: usize,
    pub top_k_match_rate: BTreeMap<usize, f64>,
    pub winrate98_turn: Option<usize>,
    pub avg_effect_pre98: f64,
    pub avg_effect_post98: Option<f64>,
    /// Lowest mover win rate over the moves from `winrate98_turn` on.
    pub min_winrate_post98: Option<f64>,
    pub kl_mean: f64,
    pub kl_max: f64,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Aggregates one player's per-move metrics.
pub fn player_summary(metrics: &[TurnMetrics], color: Color, win_threshold: f64) -> Result<PlayerSummary, MetricsError> {
    let own: Vec<&TurnMetrics> = metrics.iter().filter(|m| m.mover == color).collect();
    if own.is_empty() {
        return Err(MetricsError::NoMovesForColor(color));
    }

    let measured: Vec<(usize, f64)> = own.iter().filter_map(|m| m.effect.map(|e| (m.turn_index, e))).collect();
    let effects: Vec<f64> = measured.iter().map(|&(_, e)| e).collect();
    let average_effect = mean(&effects);
    let effect_std_dev = if effects.is_empty() {
        0.0
    } else {
        (effects.iter().map(|e| (e - average_effect).powi(2)).sum::<f64>() / effects.len() as f64).sqrt()
    };
    let mut cma_series = Vec::with_capacity(effects.len());
    let mut acc = 0.0;
    for (i, e) in effects.iter().enumerate() {
        acc += e;
        cma_series.push(acc / (i + 1) as f64);
    }

    let judged: Vec<bool> = own.iter().filter_map(|m| m.hit).collect();
    let hits = judged.iter().filter(|&&h| h).count();
    let hit_positions = judged.len();
    let hit_rate = if hit_positions == 0 { 0.0 } else { hits as f64 / hit_positions as f64 };

    let top_k_match_rate = TOP_K
        .iter()
        .map(|&k| {
            let n = own.iter().filter(|m| m.played_rank.is_some_and(|r| r < k)).count();
            (k, n as f64 / own.len() as f64)
        })
        .collect();

    let winrate98_turn = own.iter().find(|m| m.mover_winrate >= win_threshold).map(|m| m.turn_index);
    let (pre, post): (Vec<(usize, f64)>, Vec<(usize, f64)>) =
        measured.iter().partition(|&&(t, _)| winrate98_turn.is_none_or(|w| t < w));
    let pre: Vec<f64> = pre.into_iter().map(|(_, e)| e).collect();
    let post: Vec<f64> = post.into_iter().map(|(_, e)| e).collect();
    let min_winrate_post98 = winrate98_turn.map(|w| {
        own.iter()
            .filter(|m| m.turn_index >= w)
            .map(|m| m.mover_winrate)
            .fold(f64::INFINITY, f64::min)
    });

    let kls: Vec<f64> = own.iter().filter_map(|m| m.kl_divergence).collect();

    Ok(PlayerSummary {
        color,
        moves: own.len(),
        measured_moves: effects.len(),
        average_effect,
        effect_std_dev,
        cma_series,
        cma_turns: measured.iter().map(|&(t, _)| t).collect(),
        hit_rate,
        hits,
        hit_positions,
        top_k_match_rate,
        winrate98_turn,
        avg_effect_pre98: mean(&pre),
        avg_effect_post98: if post.is_empty() { None } else { Some(mean(&post)) },
        min_winrate_post98,
        kl_mean: mean(&kls),
        kl_max: kls.iter().copied().fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tm(turn: usize, mover: Color, effect: Option<f64>, rank: Option<usize>, winrate: f64) -> TurnMetrics {
        TurnMetrics {
            turn_index: turn,
            mover,
            played: "A1".into(),
            effect,
            black_delta: effect.map(|e| mover.sign() * e),
            hit: Some(rank == Some(0)),
            kl_divergence: Some(turn as f64 * 0.1),
            best_score_mean: 0.0,
            actual_score_mean: None,
            avg_score_mean: 0.0,
            median_score_mean: 0.0,
            root_winrate: if mover == Color::Black { winrate } else { 1.0 - winrate },
            mover_winrate: winrate,
            played_rank: rank,
        }
    }

    #[test]
    fn constant_effects() {
        let m: Vec<_> = (0..3).map(|i| tm(2 * i, Color::Black, Some(-1.0), Some(0), 0.5)).collect();
        let s = player_summary(&m, Color::Black, DEFAULT_WIN_THRESHOLD).unwrap();
        assert_eq!(s.average_effect, -1.0);
        assert_eq!(s.cma_series, vec![-1.0, -1.0, -1.0]);
        assert_eq!(s.effect_std_dev, 0.0);
    }

    #[test]
    fn running_mean() {
        let m = [tm(0, Color::White, Some(0.0), Some(0), 0.5), tm(2, Color::White, Some(-1.0), Some(0), 0.5)];
        let s = player_summary(&m, Color::White, DEFAULT_WIN_THRESHOLD).unwrap();
        assert_eq!(s.cma_series, vec![0.0, -0.5]);
        assert_eq!(s.cma_turns, vec![0, 2]);
    }

    #[test]
    fn missing_color() {
        let m = [tm(0, Color::Black, Some(0.0), Some(0), 0.5)];
        assert!(matches!(player_summary(&m, Color::White, 0.98), Err(MetricsError::NoMovesForColor(Color::White))));
    }

    #[test]
    fn top_k_and_hits() {
        let m = [
            tm(0, Color::Black, Some(0.0), Some(0), 0.5),
            tm(2, Color::Black, Some(0.0), Some(2), 0.5),
            tm(4, Color::Black, Some(0.0), Some(4), 0.5),
            tm(6, Color::Black, Some(0.0), None, 0.5),
        ];
        let s = player_summary(&m, Color::Black, 0.98).unwrap();
        assert_eq!(s.top_k_match_rate[&1], 0.25);
        assert_eq!(s.top_k_match_rate[&3], 0.5);
        assert_eq!(s.top_k_match_rate[&5], 0.75);
        assert_eq!((s.hits, s.hit_positions), (1, 4));
        assert!((s.kl_mean - 0.3).abs() < 1e-12);
        assert!((s.kl_max - 0.6).abs() < 1e-12);
    }

    #[test]
    fn split_at_98() {
        let m = [
            tm(0, Color::Black, Some(-0.1), Some(0), 0.7),
            tm(2, Color::Black, Some(-0.1), Some(0), 0.985),
            tm(4, Color::Black, Some(-1.1), Some(0), 0.99),
            tm(6, Color::Black, None, Some(0), 0.97),
        ];
        let s = player_summary(&m, Color::Black, 0.98).unwrap();
        assert_eq!(s.winrate98_turn, Some(2));
        assert!((s.avg_effect_pre98 + 0.1).abs() < 1e-12);
        assert!((s.avg_effect_post98.unwrap() + 0.6).abs() < 1e-12);
        assert_eq!(s.min_winrate_post98, Some(0.97));
        assert_eq!(s.measured_moves, 3);
        assert_eq!(s.moves, 4);
    }

    #[test]
    fn never_decided() {
        let m = [tm(0, Color::Black, Some(-0.5), Some(0), 0.6)];
        let s = player_summary(&m, Color::Black, 0.98).unwrap();
        assert_eq!(s.winrate98_turn, None);
        assert_eq!(s.avg_effect_post98, None);
        assert_eq!(s.avg_effect_pre98, -0.5);
    }
}
