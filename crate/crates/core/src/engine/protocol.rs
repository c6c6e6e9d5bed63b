//! Wire format of the JSON-lines analysis protocol.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CandidateMove, EngineError, TurnAnalysis};
use crate::board::{from_engine_coord, Color};

/// A query line. Field names follow the de-facto analysis-engine schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisQuery {
    pub id: String,
    /// (color letter, engine coordinate) pairs.
    pub moves: Vec<(String, String)>,
    #[serde(default)]
    pub initial_stones: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_player: Option<String>,
    pub rules: String,
    pub komi: f64,
    pub board_x_size: u8,
    pub board_y_size: u8,
    pub analyze_turns: Vec<usize>,
    pub max_visits: u32,
    #[serde(default)]
    pub include_policy: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub override_settings: Option<Value>,
}

impl AnalysisQuery {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_visits < 1 {
            return Err("maxVisits must be at least 1".into());
        }
        if let Some(&t) = self.analyze_turns.iter().find(|&&t| t > self.moves.len()) {
            return Err(format!("analyzeTurns entry {t} exceeds move count {}", self.moves.len()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RootInfo {
    pub winrate: f64,
    #[serde(default)]
    pub score_lead: Option<f64>,
    #[serde(default)]
    pub score_mean: Option<f64>,
    #[serde(default)]
    pub score_selfplay: Option<f64>,
    #[serde(default)]
    pub visits: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MoveInfo {
    #[serde(rename = "move")]
    pub mv: String,
    pub visits: u64,
    pub winrate: f64,
    #[serde(default)]
    pub score_lead: Option<f64>,
    #[serde(default)]
    pub score_mean: Option<f64>,
    #[serde(default)]
    pub score_selfplay: Option<f64>,
    pub prior: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pv: Option<Vec<String>>,
}

/// One per-turn response line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnalysisResponse {
    pub id: String,
    pub turn_number: usize,
    #[serde(default)]
    pub is_during_search: bool,
    pub root_info: RootInfo,
    pub move_infos: Vec<MoveInfo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<Vec<f64>>,
}

/// Which score estimate is read as the position's score mean.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ScoreField {
    #[default]
    ScoreLead,
    ScoreMean,
    ScoreSelfplay,
}

impl ScoreField {
    pub fn name(self) -> &'static str {
        match self {
            ScoreField::ScoreLead => "scoreLead",
            ScoreField::ScoreMean => "scoreMean",
            ScoreField::ScoreSelfplay => "scoreSelfplay",
        }
    }

    pub fn parse(s: &str) -> Option<ScoreField> {
        match s {
            "scoreLead" | "score-lead" | "lead" => Some(ScoreField::ScoreLead),
            "scoreMean" | "score-mean" | "mean" => Some(ScoreField::ScoreMean),
            "scoreSelfplay" | "score-selfplay" | "selfplay" => Some(ScoreField::ScoreSelfplay),
            _ => None,
        }
    }

    fn pick(self, lead: Option<f64>, mean: Option<f64>, selfplay: Option<f64>) -> Option<f64> {
        match self {
            ScoreField::ScoreLead => lead,
            ScoreField::ScoreMean => mean,
            ScoreField::ScoreSelfplay => selfplay,
        }
    }
}

/// A parsed stdout line.
#[derive(Clone, Debug)]
pub enum EngineLine {
    Analysis(Box<AnalysisResponse>),
    /// `{"id": .., "error": ..}`
    Error { id: String, message: String },
    /// `{"id": .., "action": ..}` acknowledgements (version probe and the like).
    Action { id: String, body: Value },
    /// Warnings and other id-less chatter.
    Other(Value),
}

fn protocol_error(line: &str, reason: impl Into<String>) -> EngineError {
    EngineError::ProtocolError { line: line.to_string(), reason: reason.into() }
}

/// Extracts the `id` of a line if it is at least a JSON object carrying one.
pub fn line_id(value: &Value) -> Option<&str> {
    value.get("id").and_then(Value::as_str)
}

pub fn parse_line(line: &str) -> Result<(Option<String>, EngineLine), (Option<String>, EngineError)> {
    let value: Value = serde_json::from_str(line).map_err(|e| (None, protocol_error(line, e.to_string())))?;
    if !value.is_object() {
        return Err((None, protocol_error(line, "not a JSON object")));
    }
    let id = line_id(&value).map(str::to_string);
    let Some(id_str) = id.clone() else {
        return Ok((None, EngineLine::Other(value)));
    };
    if let Some(msg) = value.get("error") {
        let message = match msg {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        return Ok((id, EngineLine::Error { id: id_str, message }));
    }
    if value.get("action").is_some() {
        return Ok((id, EngineLine::Action { id: id_str, body: value }));
    }
    if value.get("warning").is_some() && value.get("rootInfo").is_none() {
        return Ok((id, EngineLine::Other(value)));
    }
    match serde_json::from_value::<AnalysisResponse>(value) {
        Ok(r) => Ok((id, EngineLine::Analysis(Box::new(r)))),
        Err(e) => Err((id, protocol_error(line, e.to_string()))),
    }
}

/// Turns a wire response into a [`TurnAnalysis`] in Black's perspective.
///
/// `side_to_move_perspective` says whether the engine reported winrates and
/// scores for the player to move (the engine is asked to) or for Black.
pub fn ingest(
    response: &AnalysisResponse,
    to_move: Color,
    board_size: u8,
    score_field: ScoreField,
    side_to_move_perspective: bool,
) -> Result<TurnAnalysis, String> {
    let flip = if side_to_move_perspective { to_move.sign() } else { 1.0 };
    let to_black_winrate = |w: f64| if flip < 0.0 { 1.0 - w } else { w };
    let check_unit = |what: &str, v: f64| {
        if v.is_finite() && (0.0..=1.0).contains(&v) {
            Ok(v)
        } else {
            Err(format!("{what} {v} outside [0, 1]"))
        }
    };

    let root = &response.root_info;
    let root_score = score_field
        .pick(root.score_lead, root.score_mean, root.score_selfplay)
        .ok_or_else(|| format!("rootInfo lacks {}", score_field.name()))?;
    let root_winrate = check_unit("root winrate", root.winrate)?;

    let mut candidates = Vec::with_capacity(response.move_infos.len());
    for mi in &response.move_infos {
        if mi.visits == 0 {
            continue;
        }
        from_engine_coord(&mi.mv, board_size).map_err(|e| e.to_string())?;
        let score = score_field
            .pick(mi.score_lead, mi.score_mean, mi.score_selfplay)
            .ok_or_else(|| format!("moveInfo {} lacks {}", mi.mv, score_field.name()))?;
        candidates.push(CandidateMove {
            mv: mi.mv.to_ascii_uppercase().replace("PASS", "pass"),
            visits: mi.visits,
            winrate: to_black_winrate(check_unit("move winrate", mi.winrate)?),
            score_mean: flip * score,
            prior: check_unit("prior", mi.prior)?,
            pv: mi.pv.clone(),
        });
    }
    if candidates.is_empty() {
        return Err("no searched candidate moves".into());
    }

    let raw_policy = match &response.policy {
        None => None,
        Some(p) => {
            let expected = board_size as usize * board_size as usize + 1;
            if p.len() != expected {
                return Err(format!("policy has {} entries, expected {expected}", p.len()));
            }
            let total: f64 = p.iter().filter(|&&x| x >= 0.0).sum();
            if (total - 1.0).abs() > 1e-3 {
                return Err(format!("policy sums to {total}"));
            }
            Some(p.clone())
        }
    };

    Ok(TurnAnalysis {
        turn_index: response.turn_number,
        board_size,
        to_move,
        root_score_mean: flip * root_score,
        root_winrate: to_black_winrate(root_winrate),
        total_visits: candidates.iter().map(|c| c.visits).sum(),
        candidates,
        raw_policy,
    })
}
