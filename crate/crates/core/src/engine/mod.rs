//! Analysis-engine client.
//!
//! Engines speak the line-delimited JSON analysis protocol popularized by
//! KataGo: one query object per line on the child's stdin, one response
//! object per analyzed turn on its stdout, matched back to the query by
//! `id`. Results are normalized to Black's perspective on ingestion and can
//! be persisted to a JSON-lines sidecar cache.

mod analyze;
mod cache;
mod handle;
pub mod protocol;
pub mod stub;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::board::{from_engine_coord, BoardError, Color, MoveKind};

pub use analyze::{analyze_game, analyze_position, game_hash, AnalyzeOptions, AnalyzedGame, ScoreField, DEFAULT_RESPONSE_TIMEOUT};
pub use cache::{AnalysisCache, CacheEntry, CacheKey, CacheMeta, CACHE_SCHEMA_VERSION};
pub use handle::{EngineConfig, EngineHandle, Perspective};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("failed to start engine {command:?}: {message}")]
    SpawnFailure { command: String, message: String },
    #[error("engine did not answer the probe query within {0:?}")]
    HandshakeTimeout(std::time::Duration),
    #[error("protocol error: {reason}; line: {line}")]
    ProtocolError { line: String, reason: String },
    #[error("engine exited with {salvaged} of {expected} turns answered")]
    EngineCrashed { salvaged: usize, expected: usize },
    #[error("engine rejected query {id}: {message}")]
    Rejected { id: String, message: String },
    #[error("no response within {0:?}")]
    Timeout(std::time::Duration),
    #[error("engine handle is closed")]
    Closed,
    #[error(transparent)]
    Board(#[from] BoardError),
    #[error("cache error: {0}")]
    Cache(String),
}

/// One searched move at a position, normalized to Black's perspective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CandidateMove {
    /// Engine coordinate (`Q16`) or `pass`.
    #[serde(rename = "move")]
    pub mv: String,
    pub visits: u64,
    /// Probability that Black wins after this move.
    pub winrate: f64,
    /// Expected final score difference after this move, Black-positive.
    pub score_mean: f64,
    /// Raw network prior for this move.
    pub prior: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pv: Option<Vec<String>>,
}

impl CandidateMove {
    pub fn kind(&self, size: u8) -> Result<MoveKind, BoardError> {
        from_engine_coord(&self.mv, size)
    }
}

/// Engine output for the position before move `turn_index`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TurnAnalysis {
    pub turn_index: usize,
    pub board_size: u8,
    pub to_move: Color,
    /// Root score estimate, Black-positive points.
    pub root_score_mean: f64,
    /// Root probability that Black wins.
    pub root_winrate: f64,
    pub candidates: Vec<CandidateMove>,
    /// Raw policy, row-major from the top-left with a trailing pass entry;
    /// negative entries mark illegal moves.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_policy: Option<Vec<f64>>,
    pub total_visits: u64,
}

/// Negative policy entries flag illegal moves.
pub const POLICY_SENTINEL: f64 = -1.0;

impl TurnAnalysis {
    /// Candidate with the most visits; ties go to the first listed.
    pub fn top_candidate(&self) -> Option<&CandidateMove> {
        let mut best: Option<&CandidateMove> = None;
        for c in &self.candidates {
            if best.is_none_or(|b| c.visits > b.visits) {
                best = Some(c);
            }
        }
        best
    }

    /// Candidates ordered by visits, most visited first (stable for ties).
    pub fn ranked_candidates(&self) -> Vec<&CandidateMove> {
        let mut v: Vec<&CandidateMove> = self.candidates.iter().collect();
        v.sort_by(|a, b| b.visits.cmp(&a.visits));
        v
    }

    /// Policy index of the raw policy's most likely legal move (lowest index
    /// on ties).
    pub fn policy_argmax(&self) -> Option<usize> {
        let policy = self.raw_policy.as_ref()?;
        let mut best: Option<(usize, f64)> = None;
        for (i, &p) in policy.iter().enumerate() {
            if p < 0.0 {
                continue;
            }
            if best.is_none_or(|(_, b)| p > b) {
                best = Some((i, p));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Flips every Black-positive quantity, as if the colors were swapped.
    pub fn mirrored(&self) -> TurnAnalysis {
        TurnAnalysis {
            to_move: self.to_move.opposite(),
            root_score_mean: -self.root_score_mean,
            root_winrate: 1.0 - self.root_winrate,
            candidates: self
                .candidates
                .iter()
                .map(|c| CandidateMove {
                    winrate: 1.0 - c.winrate,
                    score_mean: -c.score_mean,
                    ..c.clone()
                })
                .collect(),
            ..self.clone()
        }
    }
}
