//! Suspicion reports: per-player indicators grouped by the three-step review
//! (win-rate graph, average effect, agreement with the engine), a rule-table
//! suspicion level, and plot-ready series.
//!
//! Reports present evidence for a human arbiter. They never label anyone a
//! cheater.

mod indicators;
mod plot;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::board::{Color, Move};
use crate::engine::TurnAnalysis;
use crate::metrics::{self, median, player_summary, MetricsError, PlayerSummary, TurnMetrics, TurnMetricsOptions};
use crate::sgf::GameRecord;

pub use indicators::{
    build_indicators, drawdown_after, suspicion_level, Direction, Indicator, SuspicionLevel, Thresholds, Verdict,
    AVERAGE_EFFECT, DEGRADATION, DRAWDOWN, TOP1_MATCH, VOLATILITY,
};
pub use plot::{
    calibration_csv, calibration_spec, emit_plot_specs, strength_csv, strength_histogram_csv, strength_histogram_spec,
};

/// Version of the JSON report layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub const CAVEAT: &str = "These indicators are statistical evidence for a human reviewer, not proof. \
There is no hard evidence of cheating in engine statistics alone, and every threshold is an uncalibrated default.";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GameMeta {
    pub black: Option<String>,
    pub white: Option<String>,
    pub size: u8,
    pub komi: f64,
    pub handicap: u32,
    pub result: Option<String>,
    pub network: String,
    pub visits: u32,
    pub game_hash: String,
    pub moves: usize,
    pub analyzed_turns: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TimingStats {
    pub moves: usize,
    pub mean_seconds: f64,
    pub median_seconds: f64,
    pub max_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlayerReport {
    pub color: Color,
    pub name: Option<String>,
    pub level: SuspicionLevel,
    pub rule_trace: Vec<String>,
    pub indicators: Vec<Indicator>,
    pub summary: PlayerSummary,
    /// Descriptive only; no indicator uses timing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WinrateRow {
    pub turn: usize,
    pub black_winrate: f64,
    pub black_score_mean: f64,
}

/// Score means for one move in the mover's perspective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScoreRow {
    pub turn: usize,
    pub best: f64,
    pub actual: Option<f64>,
    pub average: f64,
    pub median: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CmaRow {
    pub turn: usize,
    pub cma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Series {
    /// One row per analyzed position.
    pub winrate: Vec<WinrateRow>,
    pub black_scores: Vec<ScoreRow>,
    pub white_scores: Vec<ScoreRow>,
    pub black_cma: Vec<CmaRow>,
    pub white_cma: Vec<CmaRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SuspicionReport {
    pub schema_version: u32,
    pub caveat: String,
    pub banners: Vec<String>,
    pub game: GameMeta,
    pub thresholds: Thresholds,
    /// Black first, then White.
    pub players: Vec<PlayerReport>,
    pub series: Series,
    pub warnings: Vec<String>,
}

impl SuspicionReport {
    pub fn player(&self, color: Color) -> &PlayerReport {
        &self.players[color.index()]
    }
}

/// Everything a report is built from.
pub struct ReportInput<'a> {
    pub record: &'a GameRecord,
    /// Replayed moves; `analyses[i]` describes the position before `moves[i]`.
    pub moves: &'a [Move],
    pub analyses: &'a [TurnAnalysis],
    pub network: &'a str,
    pub visits: u32,
    pub game_hash: &'a str,
    /// Seconds spent on each move, if known.
    pub move_seconds: Option<&'a [f64]>,
    pub metrics_options: TurnMetricsOptions,
}

fn timing(moves: &[Move], seconds: &[f64], color: Color) -> Option<TimingStats> {
    let own: Vec<f64> = moves.iter().zip(seconds).filter(|(m, _)| m.color == color).map(|(_, &s)| s).collect();
    if own.is_empty() {
        return None;
    }
    Some(TimingStats {
        moves: own.len(),
        mean_seconds: own.iter().sum::<f64>() / own.len() as f64,
        median_seconds: median(&own),
        max_seconds: own.iter().copied().fold(f64::MIN, f64::max),
    })
}

fn score_rows(metrics: &[TurnMetrics], color: Color) -> Vec<ScoreRow> {
    metrics
        .iter()
        .filter(|m| m.mover == color)
        .map(|m| ScoreRow {
            turn: m.turn_index,
            best: m.best_score_mean,
            actual: m.actual_score_mean,
            average: m.avg_score_mean,
            median: m.median_score_mean,
        })
        .collect()
}

fn cma_rows(summary: &PlayerSummary) -> Vec<CmaRow> {
    summary.cma_turns.iter().zip(&summary.cma_series).map(|(&turn, &cma)| CmaRow { turn, cma }).collect()
}

fn empty_summary(color: Color) -> PlayerSummary {
    PlayerSummary {
        color,
        moves: 0,
        measured_moves: 0,
        average_effect: 0.0,
        effect_std_dev: 0.0,
        cma_series: Vec::new(),
        cma_turns: Vec::new(),
        hit_rate: 0.0,
        hits: 0,
        hit_positions: 0,
        top_k_match_rate: metrics::TOP_K.iter().map(|&k| (k, 0.0)).collect(),
        winrate98_turn: None,
        avg_effect_pre98: 0.0,
        avg_effect_post98: None,
        min_winrate_post98: None,
        kl_mean: 0.0,
        kl_max: 0.0,
    }
}

pub fn build_report(input: &ReportInput<'_>, thresholds: &Thresholds) -> Result<SuspicionReport, ReportError> {
    let (turn_metrics, mut warnings) = metrics::turn_metrics(input.moves, input.analyses, input.metrics_options)?;
    let black_winrates: Vec<f64> = input.analyses.iter().map(|a| a.root_winrate).collect();
    let record = input.record;

    let mut players = Vec::with_capacity(2);
    for color in [Color::Black, Color::White] {
        let summary = match player_summary(&turn_metrics, color, thresholds.decided_winrate) {
            Ok(s) => s,
            Err(MetricsError::NoMovesForColor(_)) => empty_summary(color),
            Err(e) => return Err(e.into()),
        };
        let indicators = build_indicators(&summary, &turn_metrics, &black_winrates, thresholds);
        let (level, rule_trace) = suspicion_level(&indicators);
        let name = match color {
            Color::Black => record.player_names.black.clone(),
            Color::White => record.player_names.white.clone(),
        };
        players.push(PlayerReport {
            color,
            name,
            level,
            rule_trace,
            indicators,
            timing: input.move_seconds.and_then(|s| timing(input.moves, s, color)),
            summary,
        });
    }

    let mut banners = Vec::new();
    if record.handicap > 0 || !record.setup_stones.is_empty() {
        banners.push(format!(
            "Handicap game (HA {}, {} setup stones): score means behave differently with handicap stones; weigh every indicator accordingly.",
            record.handicap,
            record.setup_stones.len()
        ));
    }
    if let Some(s) = input.move_seconds {
        if s.len() != input.moves.len() {
            warnings.push(format!("{} move times for {} moves; extra entries ignored", s.len(), input.moves.len()));
        }
    }

    let series = Series {
        winrate: input
            .analyses
            .iter()
            .map(|a| WinrateRow { turn: a.turn_index, black_winrate: a.root_winrate, black_score_mean: a.root_score_mean })
            .collect(),
        black_scores: score_rows(&turn_metrics, Color::Black),
        white_scores: score_rows(&turn_metrics, Color::White),
        black_cma: cma_rows(&players[0].summary),
        white_cma: cma_rows(&players[1].summary),
    };

    Ok(SuspicionReport {
        schema_version: REPORT_SCHEMA_VERSION,
        caveat: CAVEAT.into(),
        banners,
        game: GameMeta {
            black: record.player_names.black.clone(),
            white: record.player_names.white.clone(),
            size: record.size,
            komi: record.komi,
            handicap: record.handicap,
            result: record.result.clone(),
            network: input.network.into(),
            visits: input.visits,
            game_hash: input.game_hash.into(),
            moves: input.moves.len(),
            analyzed_turns: input.analyses.len(),
        },
        thresholds: thresholds.clone(),
        players,
        series,
        warnings,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

fn render_text(r: &SuspicionReport) -> String {
    let mut s = String::new();
    let g = &r.game;
    let name = |n: &Option<String>| n.clone().unwrap_or_else(|| "?".into());
    let _ = writeln!(s, "Suspicion report (schema v{})", r.schema_version);
    let _ = writeln!(s, "Black: {}  White: {}", name(&g.black), name(&g.white));
    let _ = writeln!(
        s,
        "Board {}x{}, komi {}, result {}, {} moves, {} positions analyzed",
        g.size,
        g.size,
        g.komi,
        g.result.as_deref().unwrap_or("?"),
        g.moves,
        g.analyzed_turns
    );
    let _ = writeln!(s, "Engine network {} at {} visits, game {}", g.network, g.visits, g.game_hash);
    let _ = writeln!(s);
    let _ = writeln!(s, "NOTE: {}", r.caveat);
    for b in &r.banners {
        let _ = writeln!(s, "NOTE: {b}");
    }
    for p in &r.players {
        let _ = writeln!(s);
        let _ = writeln!(s, "== {} ({}) ==", p.color, name(&p.name));
        let _ = writeln!(s, "Suspicion level: {}", p.level);
        for line in &p.rule_trace {
            let _ = writeln!(s, "  rule trace: {line}");
        }
        let sm = &p.summary;
        let _ = writeln!(
            s,
            "Moves {} (measured {}), average effect {:.3} (sd {:.3}), hit rate {:.3} ({}/{}), KL mean {:.4} max {:.4}",
            sm.moves, sm.measured_moves, sm.average_effect, sm.effect_std_dev, sm.hit_rate, sm.hits, sm.hit_positions,
            sm.kl_mean, sm.kl_max
        );
        let topk: Vec<String> = sm.top_k_match_rate.iter().map(|(k, v)| format!("top-{k} {v:.3}")).collect();
        let _ = writeln!(s, "Match rates: {}", topk.join(", "));
        if let Some(t) = &p.timing {
            let _ = writeln!(
                s,
                "Move times (descriptive only): mean {:.1}s, median {:.1}s, max {:.1}s over {} moves",
                t.mean_seconds, t.median_seconds, t.max_seconds, t.moves
            );
        }
        for i in &p.indicators {
            let dir = match i.direction {
                Direction::Above => ">=",
                Direction::Below => "<=",
            };
            let _ = writeln!(
                s,
                "  [step {}] {}: {} (suspicious if {} {}) -> {}. {}",
                i.step,
                i.name,
                fmt_value(i.value),
                dir,
                i.threshold,
                i.verdict,
                i.narrative
            );
        }
    }
    if !r.warnings.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "Warnings:");
        for w in &r.warnings {
            let _ = writeln!(s, "  {w}");
        }
    }
    s
}

/// Serializes a report. Output is a pure function of the report.
pub fn emit_report(report: &SuspicionReport, format: Format) -> Result<Vec<u8>, ReportError> {
    Ok(match format {
        Format::Text => render_text(report).into_bytes(),
        Format::Json => {
            let mut v = serde_json::to_vec_pretty(report)?;
            v.push(b'\n');
            v
        }
    })
}
