//! Deterministic stand-in for a real analysis engine.
//!
//! Every position gets a seeded pseudo-random policy (Dirichlet over the
//! legal moves) and a score landscape: the policy's favourite keeps the
//! root score, each lower-ranked move loses a little more. Playing a move
//! sets the next position's root score to that move's score, so a game's
//! score trajectory is fully determined by the seed and the moves played,
//! independent of visit counts. Visits only shape how the search spreads
//! over the candidate moves.

use std::io::{BufRead, BufReader, Write};
use std::str::FromStr;
use std::thread;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::handle::{EngineConfig, EngineHandle, Perspective};
use super::protocol::{AnalysisQuery, AnalysisResponse, MoveInfo, RootInfo};
use crate::board::{from_engine_coord, to_engine_coord, BoardState, Color, Move, MoveKind, Point};

/// How the stub spreads visits over its candidate moves.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicyShape {
    /// Visits proportional to the policy raised to `sharpness`, over the
    /// `candidates` most likely moves.
    Dirichlet { candidates: usize, sharpness: f64 },
    /// Nearly all visits on the top move (at least 99%).
    OneHot,
    /// `k` candidates with an equal split of visits (within one).
    UniformK(usize),
}

impl Default for PolicyShape {
    fn default() -> Self {
        PolicyShape::Dirichlet { candidates: 8, sharpness: 1.0 }
    }
}

impl FromStr for PolicyShape {
    type Err = String;

    /// `dirichlet`, `dirichlet:<candidates>[:<sharpness>]`, `one-hot`,
    /// `uniform-<k>` or `uniform-k:<k>`.
    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("unknown policy shape {s:?}");
        let s = s.trim();
        if s == "one-hot" {
            return Ok(PolicyShape::OneHot);
        }
        if let Some(rest) = s.strip_prefix("uniform-k:").or_else(|| s.strip_prefix("uniform-")) {
            let k: usize = rest.parse().map_err(|_| bad())?;
            if k == 0 {
                return Err(bad());
            }
            return Ok(PolicyShape::UniformK(k));
        }
        if let Some(rest) = s.strip_prefix("dirichlet") {
            let mut shape = PolicyShape::default();
            let parts: Vec<&str> = rest.split(':').skip(1).collect();
            if let PolicyShape::Dirichlet { candidates, sharpness } = &mut shape {
                if let Some(c) = parts.first() {
                    *candidates = c.parse().map_err(|_| bad())?;
                }
                if let Some(x) = parts.get(1) {
                    *sharpness = x.parse().map_err(|_| bad())?;
                }
                if *candidates == 0 || !sharpness.is_finite() {
                    return Err(bad());
                }
            }
            if parts.len() > 2 || (!rest.is_empty() && !rest.starts_with(':')) {
                return Err(bad());
            }
            return Ok(shape);
        }
        Err(bad())
    }
}

/// Which positions the search's most visited move agrees with the policy's
/// favourite.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Agreement {
    #[default]
    Always,
    Never,
    /// Agree on turns divisible by `n`, disagree elsewhere.
    EveryNth(usize),
}

impl FromStr for Agreement {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "always" => Ok(Agreement::Always),
            "never" => Ok(Agreement::Never),
            other => match other.strip_prefix("every-") {
                Some(n) => match n.parse() {
                    Ok(n) if n >= 1 => Ok(Agreement::EveryNth(n)),
                    _ => Err(format!("bad agreement {s:?}")),
                },
                None => Err(format!("bad agreement {s:?}")),
            },
        }
    }
}

impl Agreement {
    fn agrees(self, turn: usize) -> bool {
        match self {
            Agreement::Always => true,
            Agreement::Never => false,
            Agreement::EveryNth(n) => turn % n == 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StubConfig {
    pub seed: u64,
    pub shape: PolicyShape,
    pub agreement: Agreement,
    /// Dirichlet concentration of the generated policy.
    pub concentration: f64,
    /// Exponent applied to the policy before it is reported; values above 1
    /// make the reported policy sharper without touching the search.
    pub policy_sharpness: f64,
    /// Mean extra loss (points) per step down the policy ranking.
    pub loss_step: f64,
    /// Extra loss for moves outside the ranked list.
    pub off_list_penalty: f64,
    /// Score (points) at which the win rate is logistic(1).
    pub winrate_scale: f64,
    /// Perturb visit splits with the query id, so repeated queries differ.
    pub noise: bool,
    /// Deliver a query's per-turn responses in a seeded random order.
    pub shuffle_responses: bool,
}

impl Default for StubConfig {
    fn default() -> Self {
        StubConfig {
            seed: 0,
            shape: PolicyShape::default(),
            agreement: Agreement::Always,
            concentration: 0.3,
            policy_sharpness: 1.0,
            loss_step: 0.35,
            off_list_penalty: 2.0,
            winrate_scale: 8.0,
            noise: false,
            shuffle_responses: false,
        }
    }
}

impl StubConfig {
    /// Applies comma-separated `key=value` overrides, e.g.
    /// `seed=3,shape=one-hot,agreement=every-2,sharpness=2,noise`.
    /// A bare key sets a boolean option.
    pub fn with_options(mut self, spec: &str) -> Result<Self, String> {
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = item.split_once('=').unwrap_or((item, "true"));
            let num = |v: &str| v.parse::<f64>().map_err(|_| format!("bad value for {key}: {v:?}"));
            let flag = |v: &str| v.parse::<bool>().map_err(|_| format!("bad value for {key}: {v:?}"));
            match key {
                "seed" => self.seed = value.parse().map_err(|_| format!("bad seed {value:?}"))?,
                "shape" => self.shape = value.parse()?,
                "agreement" => self.agreement = value.parse()?,
                "concentration" => self.concentration = num(value)?,
                "sharpness" => self.policy_sharpness = num(value)?,
                "loss-step" => self.loss_step = num(value)?,
                "off-list-penalty" => self.off_list_penalty = num(value)?,
                "winrate-scale" => self.winrate_scale = num(value)?,
                "noise" => self.noise = flag(value)?,
                "shuffle" => self.shuffle_responses = flag(value)?,
                _ => return Err(format!("unknown stub option {key:?}")),
            }
        }
        if !(self.concentration > 0.0 && self.loss_step > 0.0 && self.winrate_scale > 0.0) {
            return Err("concentration, loss-step and winrate-scale must be positive".into());
        }
        Ok(self)
    }
}

/// Number of ranked moves that get individually drawn losses.
const RANKED: usize = 10;

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn seed_from(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// The stub's view of one position.
#[derive(Clone, Debug)]
pub struct PositionEval {
    pub turn: usize,
    pub to_move: Color,
    pub size: u8,
    /// Root score from the mover's point of view.
    pub root_mover: f64,
    /// Generated policy; negative for illegal moves.
    pub policy: Vec<f64>,
    /// Policy as reported to clients (after `policy_sharpness`).
    pub reported_policy: Vec<f64>,
    /// Legal policy indices, most likely first.
    pub ranked: Vec<usize>,
    /// Cumulative loss per rank, `losses[0] == 0`.
    pub losses: Vec<f64>,
    pub off_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StubCandidate {
    pub index: usize,
    pub visits: u64,
    /// Score after this move, mover's point of view.
    pub score_mover: f64,
}

impl PositionEval {
    pub fn rank_of(&self, index: usize) -> Option<usize> {
        self.ranked.iter().position(|&i| i == index)
    }

    /// Score after playing policy index `index`, mover's point of view.
    pub fn score_after(&self, index: usize) -> f64 {
        match self.rank_of(index) {
            Some(r) if r < self.losses.len() => self.root_mover - self.losses[r],
            _ => self.root_mover - self.losses.last().copied().unwrap_or(0.0) - self.off_loss,
        }
    }

    pub fn winrate_mover(&self, score_mover: f64, scale: f64) -> f64 {
        logistic(score_mover / scale)
    }

    /// Candidate moves and their visits for a search of `total` visits, in
    /// the order they are reported (most visited first).
    pub fn candidates(&self, config: &StubConfig, total: u32, noise_key: Option<&str>) -> Vec<StubCandidate> {
        let total = total.max(1) as u64;
        let legal = self.ranked.len();
        let m = match &config.shape {
            PolicyShape::Dirichlet { candidates, .. } => *candidates,
            PolicyShape::OneHot => 1 + (total / 100) as usize,
            PolicyShape::UniformK(k) => *k,
        };
        let mut m = m.min(legal).min(total as usize).max(1);
        let agree = config.agreement.agrees(self.turn);
        if !agree && m < 2 && legal >= 2 && total >= 2 {
            m = 2;
        }
        let mut visits: Vec<u64> = match &config.shape {
            PolicyShape::OneHot => {
                let mut v = vec![1u64; m];
                v[0] = total - (m as u64 - 1);
                v
            }
            PolicyShape::UniformK(_) => {
                let base = total / m as u64;
                let extra = (total % m as u64) as usize;
                (0..m).map(|i| base + u64::from(i < extra)).collect()
            }
            PolicyShape::Dirichlet { sharpness, .. } => {
                let mut weights: Vec<f64> =
                    self.ranked[..m].iter().map(|&i| self.policy[i].max(1e-12).powf(*sharpness)).collect();
                if let (true, Some(key)) = (config.noise, noise_key) {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed_from(&[
                        &config.seed.to_le_bytes(),
                        &self.turn.to_le_bytes(),
                        key.as_bytes(),
                    ]));
                    let normal = Normal::new(0.0, 0.5).expect("valid normal");
                    for w in &mut weights {
                        *w *= f64::exp(normal.sample(&mut rng));
                    }
                }
                apportion(&weights, total)
            }
        };
        // Most visited first; ties keep policy order.
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| visits[b].cmp(&visits[a]));
        let mut ranked_idx: Vec<usize> = order.iter().map(|&k| self.ranked[k]).collect();
        visits = order.iter().map(|&k| visits[k]).collect();
        if !agree && m >= 2 && ranked_idx[0] == self.ranked[0] {
            // The search prefers the policy's runner-up.
            ranked_idx.swap(0, 1);
        }
        ranked_idx
            .into_iter()
            .zip(visits)
            .filter(|(_, v)| *v > 0)
            .map(|(index, visits)| StubCandidate { index, visits, score_mover: self.score_after(index) })
            .collect()
    }
}

/// Largest-remainder split of `total` in proportion to `weights`, giving
/// every entry at least one visit when `total` allows.
fn apportion(weights: &[f64], total: u64) -> Vec<u64> {
    let n = weights.len() as u64;
    let floor = if total >= n { 1 } else { 0 };
    let rest = total - floor * n;
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| w / sum * rest as f64).collect();
    let mut out: Vec<u64> = exact.iter().map(|x| x.floor() as u64).collect();
    let assigned: u64 = out.iter().sum();
    let mut by_remainder: Vec<usize> = (0..weights.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in by_remainder.iter().take((rest - assigned) as usize) {
        out[i] += 1;
    }
    out.iter().map(|v| v + floor).collect()
}

/// Walks a game through the stub model, one position at a time.
#[derive(Clone, Debug)]
pub struct StubSession {
    config: StubConfig,
    board: BoardState,
    prefix: Sha256,
    root_mover: f64,
    turn: usize,
}

impl StubSession {
    pub fn new(
        config: &StubConfig,
        size: u8,
        komi: f64,
        setup: &[(Color, Point)],
        first_to_move: Color,
    ) -> Result<Self, crate::board::BoardError> {
        let mut board = BoardState::new(size)?.with_setup(setup)?;
        board.set_to_move(first_to_move);
        let mut prefix = Sha256::new();
        prefix.update(config.seed.to_le_bytes());
        prefix.update([size]);
        prefix.update(komi.to_le_bytes());
        for (c, p) in setup {
            prefix.update([c.index() as u8, p.col, p.row]);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed_from(&[&prefix.clone().finalize()]));
        let start_black: f64 = rng.random_range(-0.5..0.5);
        Ok(StubSession {
            config: config.clone(),
            board,
            prefix,
            root_mover: first_to_move.sign() * start_black,
            turn: 0,
        })
    }

    pub fn board(&self) -> &BoardState {
        &self.board
    }

    pub fn turn(&self) -> usize {
        self.turn
    }

    pub fn config(&self) -> &StubConfig {
        &self.config
    }

    pub fn evaluate(&self) -> PositionEval {
        let size = self.board.size();
        let n = size as usize * size as usize + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed_from(&[&self.prefix.clone().finalize(), b"eval"]));
        let gamma = Gamma::new(self.config.concentration, 1.0).expect("positive concentration");
        let to_move = self.board.to_move();
        let mut policy = vec![-1.0; n];
        let mut total = 0.0;
        for (i, slot) in policy.iter_mut().enumerate() {
            // Draw for every index so the stream does not depend on legality.
            let g: f64 = gamma.sample(&mut rng);
            let kind = MoveKind::from_policy_index(i, size);
            if self.board.check(Move { color: to_move, kind }).is_ok() {
                let w = if kind == MoveKind::Pass { g * 0.01 } else { g } + 1e-9;
                *slot = w;
                total += w;
            }
        }
        for p in policy.iter_mut().filter(|p| **p >= 0.0) {
            *p /= total;
        }
        let mut ranked: Vec<usize> = (0..n).filter(|&i| policy[i] >= 0.0).collect();
        ranked.sort_by(|&a, &b| policy[b].partial_cmp(&policy[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));

        let reported_policy = if self.config.policy_sharpness == 1.0 {
            policy.clone()
        } else {
            let s = self.config.policy_sharpness;
            let sum: f64 = policy.iter().filter(|&&p| p >= 0.0).map(|p| p.powf(s)).sum();
            policy.iter().map(|&p| if p >= 0.0 { p.powf(s) / sum } else { p }).collect()
        };

        let step = Exp::new(1.0 / self.config.loss_step.max(1e-9)).expect("positive rate");
        let mut losses = Vec::with_capacity(RANKED);
        let mut acc = 0.0;
        losses.push(0.0);
        for _ in 1..RANKED {
            acc += step.sample(&mut rng);
            losses.push(acc);
        }
        let off_loss = self.config.off_list_penalty + step.sample(&mut rng) * 3.0;

        PositionEval {
            turn: self.turn,
            to_move,
            size,
            root_mover: self.root_mover,
            policy,
            reported_policy,
            ranked,
            losses,
            off_loss,
        }
    }

    /// Plays `mv` from the position `eval` describes (which must come from
    /// this session's current position). Illegal moves are played leniently
    /// where possible and skipped otherwise; the score still moves on.
    pub fn play(&mut self, mv: Move, eval: &PositionEval) {
        let index = mv.kind.policy_index(self.board.size());
        let after = eval.score_after(index);
        if mv.color != self.board.to_move() {
            self.board.set_to_move(mv.color);
        }
        match self.board.apply_move_lenient(mv) {
            Ok((next, _)) => self.board = next,
            Err(_) => self.board.set_to_move(mv.color.opposite()),
        }
        self.root_mover = if self.board.to_move() == eval.to_move { after } else { -after };
        self.prefix.update([mv.color.index() as u8]);
        self.prefix.update((index as u32).to_le_bytes());
        self.turn += 1;
    }
}

fn color_of(letter: &str) -> Option<Color> {
    Color::from_letter(letter)
}

/// Answers one query line with zero or more response lines.
pub fn respond(config: &StubConfig, line: &str) -> Vec<String> {
    let value: serde_json::Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return vec![json!({"error": format!("could not parse query: {e}")}).to_string()],
    };
    let id = value.get("id").and_then(|v| v.as_str()).unwrap_or("").to_string();
    if value.get("action").and_then(|a| a.as_str()) == Some("query_version") {
        return vec![json!({"id": id, "action": "query_version", "version": "stub-1", "git_hash": "none"}).to_string()];
    }
    let query: AnalysisQuery = match serde_json::from_value(value) {
        Ok(q) => q,
        Err(e) => return vec![json!({"id": id, "error": e.to_string()}).to_string()],
    };
    match answer(config, &query) {
        Ok(responses) => responses.iter().map(|r| serde_json::to_string(r).expect("serializes")).collect(),
        Err(message) => vec![json!({"id": id, "error": message}).to_string()],
    }
}

/// Computes the stub's responses for a query, one per requested turn.
pub fn answer(config: &StubConfig, query: &AnalysisQuery) -> Result<Vec<AnalysisResponse>, String> {
    query.validate()?;
    if query.board_x_size != query.board_y_size {
        return Err("rectangular boards are not supported".into());
    }
    let size = query.board_x_size;
    let parse_move = |(c, m): &(String, String)| -> Result<Move, String> {
        let color = color_of(c).ok_or_else(|| format!("bad color {c:?}"))?;
        let kind = from_engine_coord(m, size).map_err(|e| e.to_string())?;
        Ok(Move { color, kind })
    };
    let moves: Vec<Move> = query.moves.iter().map(parse_move).collect::<Result<_, _>>()?;
    let mut setup = Vec::new();
    for s in &query.initial_stones {
        let mv = parse_move(s)?;
        if let MoveKind::Play(p) = mv.kind {
            setup.push((mv.color, p));
        }
    }
    let first = query
        .initial_player
        .as_deref()
        .and_then(color_of)
        .or(moves.first().map(|m| m.color))
        .unwrap_or(Color::Black);
    let mut session = StubSession::new(config, size, query.komi, &setup, first).map_err(|e| e.to_string())?;
    let last = query.analyze_turns.iter().copied().max();
    let mut out = Vec::new();
    if let Some(last) = last {
        for turn in 0..=last {
            let eval = session.evaluate();
            if query.analyze_turns.contains(&turn) {
                out.push(render(config, query, &eval, turn));
            }
            if turn < moves.len() {
                session.play(moves[turn], &eval);
            }
        }
    }
    if config.shuffle_responses {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_from(&[&config.seed.to_le_bytes(), query.id.as_bytes()]));
        out.shuffle(&mut rng);
    }
    Ok(out)
}

fn render(config: &StubConfig, query: &AnalysisQuery, eval: &PositionEval, turn: usize) -> AnalysisResponse {
    let scale = config.winrate_scale;
    let cands = eval.candidates(config, query.max_visits, Some(&query.id));
    let size = eval.size;
    // Reports always come from the side to move's point of view.
    let move_infos: Vec<MoveInfo> = cands
        .iter()
        .enumerate()
        .map(|(order, c)| {
            let kind = MoveKind::from_policy_index(c.index, size);
            MoveInfo {
                mv: to_engine_coord(kind, size),
                visits: c.visits,
                winrate: eval.winrate_mover(c.score_mover, scale),
                score_lead: Some(c.score_mover),
                score_mean: Some(c.score_mover),
                score_selfplay: Some(c.score_mover),
                prior: eval.reported_policy[c.index],
                order: Some(order as u32),
                pv: Some(vec![to_engine_coord(kind, size)]),
            }
        })
        .collect();
    AnalysisResponse {
        id: query.id.clone(),
        turn_number: turn,
        is_during_search: false,
        root_info: RootInfo {
            winrate: eval.winrate_mover(eval.root_mover, scale),
            score_lead: Some(eval.root_mover),
            score_mean: Some(eval.root_mover),
            score_selfplay: Some(eval.root_mover),
            visits: cands.iter().map(|c| c.visits).sum(),
        },
        move_infos,
        policy: query.include_policy.then(|| eval.reported_policy.clone()),
    }
}

/// Serves queries from `input` until end of input, writing responses to
/// `output`. This is the loop behind both the in-process stub handle and
/// the `stub-engine` subprocess.
pub fn serve<R: BufRead, W: Write>(config: &StubConfig, input: R, mut output: W) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for r in respond(config, &line) {
            output.write_all(r.as_bytes())?;
            output.write_all(b"\n")?;
        }
        output.flush()?;
    }
    Ok(())
}

/// Starts an in-process stub engine behind a regular [`EngineHandle`].
pub fn stub_engine(config: StubConfig, network: &str) -> EngineHandle {
    let (query_rx, query_tx) = std::io::pipe().expect("create pipe");
    let (resp_rx, resp_tx) = std::io::pipe().expect("create pipe");
    thread::Builder::new()
        .name("stub-engine".into())
        .spawn(move || {
            let _ = serve(&config, BufReader::new(query_rx), resp_tx);
        })
        .expect("spawn stub thread");
    EngineHandle::from_io(
        BufReader::new(resp_rx),
        query_tx,
        EngineConfig {
            engine_name: "stub".into(),
            network: network.to_string(),
            perspective: Perspective::SideToMove,
            ..EngineConfig::default()
        },
    )
}
