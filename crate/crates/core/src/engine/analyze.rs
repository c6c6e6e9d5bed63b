use std::collections::BTreeMap;
use std::time::Duration;

use log::warn;
use serde_json::json;
use sha2::{Digest, Sha256};

use super::handle::{EngineHandle, Event, Perspective, Ticket};
use super::protocol::{ingest, AnalysisQuery, EngineLine};
use super::{AnalysisCache, CacheEntry, CacheKey, CacheMeta, EngineError, TurnAnalysis, CACHE_SCHEMA_VERSION};
use crate::board::{replay, to_engine_coord, Color, Move, MoveKind, Replay};
use crate::sgf::GameRecord;

pub use super::protocol::ScoreField;

#[derive(Clone, Debug)]
pub struct AnalyzeOptions {
    pub max_visits: u32,
    pub include_policy: bool,
    /// Also analyze the position after the last move.
    pub include_final: bool,
    pub rules: String,
    pub komi_override: Option<f64>,
    pub score_field: ScoreField,
    /// Replay leniency (see [`crate::board::replay`]).
    pub lenient: bool,
    /// Read from the cache before querying the engine.
    pub use_cache: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            max_visits: 1600,
            include_policy: true,
            include_final: false,
            rules: "tromp-taylor".into(),
            komi_override: None,
            score_field: ScoreField::ScoreLead,
            lenient: false,
            use_cache: true,
        }
    }
}

pub(crate) fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn coord_pairs(moves: &[Move], size: u8) -> Vec<(String, String)> {
    moves
        .iter()
        .map(|m| (m.color.letter().to_string(), to_engine_coord(m.kind, size)))
        .collect()
}

fn setup_pairs(record: &GameRecord) -> Vec<(String, String)> {
    record
        .setup_stones
        .iter()
        .map(|(c, p)| (c.letter().to_string(), to_engine_coord(MoveKind::Play(*p), record.size)))
        .collect()
}

/// Hash over everything that determines the engine's answers: board size,
/// komi, rules, setup stones and the replayed move sequence.
pub fn game_hash(record: &GameRecord, replayed: &[Move], opts: &AnalyzeOptions) -> String {
    let canonical = json!({
        "size": record.size,
        "komi": opts.komi_override.unwrap_or(record.komi),
        "rules": opts.rules,
        "setup": setup_pairs(record),
        "moves": coord_pairs(replayed, record.size),
    });
    digest_hex(canonical.to_string().as_bytes())
}

/// Side to move at `turn`, as the engine sees it: the opposite of the
/// previous mover, or the first mover at turn 0.
fn engine_to_move(moves: &[Move], turn: usize) -> Color {
    match turn {
        0 => moves.first().map(|m| m.color).unwrap_or(Color::Black),
        t => moves[t - 1].color.opposite(),
    }
}

fn build_query(
    handle: &EngineHandle,
    record: &GameRecord,
    moves: &[Move],
    hash: &str,
    turns: Vec<usize>,
    opts: &AnalyzeOptions,
) -> AnalysisQuery {
    AnalysisQuery {
        id: handle.fresh_id(&hash[..12.min(hash.len())]),
        moves: coord_pairs(moves, record.size),
        initial_stones: setup_pairs(record),
        initial_player: Some(engine_to_move(moves, 0).letter().to_string()),
        rules: opts.rules.clone(),
        komi: opts.komi_override.unwrap_or(record.komi),
        board_x_size: record.size,
        board_y_size: record.size,
        analyze_turns: turns,
        max_visits: opts.max_visits,
        include_policy: opts.include_policy,
        override_settings: Some(json!({"reportAnalysisWinratesAs": "SIDETOMOVE"})),
    }
}

/// Outcome of [`analyze_game`].
#[derive(Clone, Debug)]
pub struct AnalyzedGame {
    pub analyses: Vec<TurnAnalysis>,
    /// Replay the analyses are aligned with.
    pub replay: Replay,
    pub key: CacheKey,
    pub from_cache: bool,
}

struct Collected {
    analyses: Vec<TurnAnalysis>,
    error: Option<EngineError>,
}

fn collect(
    handle: &EngineHandle,
    ticket: Ticket,
    turns: &[usize],
    moves: &[Move],
    size: u8,
    opts: &AnalyzeOptions,
) -> Collected {
    let config = handle.config();
    let side_to_move = config.perspective == Perspective::SideToMove;
    let mut got: BTreeMap<usize, TurnAnalysis> = BTreeMap::new();
    let mut error: Option<EngineError> = None;
    let mut crashed = false;
    while got.len() < turns.len() {
        let timeout = match (&error, config.response_timeout) {
            (Some(_), Some(t)) => Some(t.min(config.error_grace)),
            (Some(_), None) => Some(config.error_grace),
            (None, t) => t,
        };
        match ticket.recv(timeout) {
            Ok(Event::Line(EngineLine::Analysis(r), raw)) => {
                if r.is_during_search {
                    continue;
                }
                if !turns.contains(&r.turn_number) {
                    error.get_or_insert(EngineError::ProtocolError {
                        line: raw,
                        reason: format!("turn {} was not requested", r.turn_number),
                    });
                    continue;
                }
                let to_move = engine_to_move(moves, r.turn_number);
                match ingest(&r, to_move, size, opts.score_field, side_to_move) {
                    Ok(a) => {
                        got.insert(r.turn_number, a);
                    }
                    Err(reason) => {
                        error.get_or_insert(EngineError::ProtocolError { line: raw, reason });
                    }
                }
            }
            Ok(Event::Line(EngineLine::Error { id, message }, _)) => {
                error.get_or_insert(EngineError::Rejected { id, message });
                break;
            }
            Ok(Event::Line(_, _)) => {}
            Ok(Event::Protocol(e)) => {
                error.get_or_insert(e);
            }
            Ok(Event::Closed) | Err(EngineError::Closed) => {
                crashed = true;
                break;
            }
            Err(e) => {
                error.get_or_insert(e);
                break;
            }
        }
    }
    if crashed && got.len() < turns.len() && error.is_none() {
        error = Some(EngineError::EngineCrashed { salvaged: got.len(), expected: turns.len() });
    }
    Collected { analyses: got.into_values().collect(), error }
}

/// Analyzes every position before each move of `record` (plus the final
/// position if requested), serving from and writing through to `cache`.
///
/// If the engine fails part-way, whatever was answered is stored as an
/// incomplete cache entry before the error is returned.
pub fn analyze_game(
    handle: &EngineHandle,
    record: &GameRecord,
    opts: &AnalyzeOptions,
    cache: Option<&AnalysisCache>,
) -> Result<AnalyzedGame, EngineError> {
    let replayed = replay(record, opts.lenient)?;
    let moves = &replayed.moves;
    let hash = game_hash(record, moves, opts);
    let key = CacheKey { game_hash: hash.clone(), network: handle.config().network.clone(), max_visits: opts.max_visits };
    let mut turns: Vec<usize> = (0..moves.len()).collect();
    if opts.include_final {
        turns.push(moves.len());
    }

    if let (Some(cache), true) = (cache, opts.use_cache) {
        if let Some(entry) = cache.load(&key)? {
            let have: Vec<usize> = entry.analyses.iter().map(|a| a.turn_index).collect();
            let usable = entry.meta.complete
                && (entry.meta.include_policy || !opts.include_policy)
                && entry.meta.score_field == opts.score_field.name()
                && turns.iter().all(|t| have.contains(t));
            if usable {
                return Ok(AnalyzedGame { analyses: entry.analyses, replay: replayed, key, from_cache: true });
            }
        }
    }

    if turns.is_empty() {
        return Ok(AnalyzedGame { analyses: Vec::new(), replay: replayed, key, from_cache: false });
    }

    let query = build_query(handle, record, moves, &hash, turns.clone(), opts);
    let ticket = handle.submit(&query)?;
    let collected = collect(handle, ticket, &turns, moves, record.size, opts);
    let complete = collected.analyses.len() == turns.len();

    if let Some(cache) = cache {
        if complete || !collected.analyses.is_empty() {
            let entry = CacheEntry {
                meta: CacheMeta {
                    schema_version: CACHE_SCHEMA_VERSION,
                    engine: handle.config().engine_name.clone(),
                    network: handle.config().network.clone(),
                    visits: opts.max_visits,
                    game_hash: hash.clone(),
                    score_field: opts.score_field.name().into(),
                    include_policy: opts.include_policy,
                    expected_turns: turns.len(),
                    complete,
                },
                analyses: collected.analyses.clone(),
            };
            cache.store(&key, &entry)?;
        }
    }

    match (complete, collected.error) {
        (true, Some(e)) => {
            warn!("query {} completed despite: {e}", query.id);
            Ok(AnalyzedGame { analyses: collected.analyses, replay: replayed, key, from_cache: false })
        }
        (true, None) => Ok(AnalyzedGame { analyses: collected.analyses, replay: replayed, key, from_cache: false }),
        (false, Some(e)) => Err(e),
        (false, None) => Err(EngineError::EngineCrashed { salvaged: collected.analyses.len(), expected: turns.len() }),
    }
}

/// Fresh, uncached analysis of the position before move `turn`.
pub fn analyze_position(
    handle: &EngineHandle,
    record: &GameRecord,
    turn: usize,
    opts: &AnalyzeOptions,
) -> Result<TurnAnalysis, EngineError> {
    let replayed = replay(record, opts.lenient)?;
    let moves = &replayed.moves;
    if turn > moves.len() {
        return Err(EngineError::Board(crate::board::BoardError::IllegalAtTurn {
            turn,
            reason: crate::board::IllegalReason::OffBoard,
        }));
    }
    let hash = game_hash(record, moves, opts);
    let query = build_query(handle, record, moves, &hash, vec![turn], opts);
    let ticket = handle.submit(&query)?;
    let mut collected = collect(handle, ticket, &[turn], moves, record.size, opts);
    match collected.analyses.pop() {
        Some(a) => Ok(a),
        None => Err(collected.error.unwrap_or(EngineError::EngineCrashed { salvaged: 0, expected: 1 })),
    }
}

/// Default wait used by tests and the CLI when nothing else is configured.
pub const DEFAULT_RESPONSE_TIMEOUT: Duration = Duration::from_secs(600);
