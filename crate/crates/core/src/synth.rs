//! Synthetic games played against the stub engine's score model.
//!
//! A game is generated by walking a [`StubSession`] and letting each side
//! pick moves from the stub's ranking according to a [`Profile`]. Analyzing
//! the resulting record with a stub engine built from the same
//! [`StubConfig`] reproduces exactly the scores the players saw.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::board::{BoardError, Color, Move, MoveKind};
use crate::engine::stub::{PositionEval, StubConfig, StubSession};
use crate::sgf::GameRecord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Profile {
    /// Always plays the engine's favourite until its win rate reaches
    /// `threshold`; from then on, with probability `sag`, plays one of the
    /// moves ranked `sag_ranks.0..=sag_ranks.1` instead.
    Perfect { threshold: f64, sag: f64, sag_ranks: (usize, usize) },
    /// Picks rank `r` with weight `rank_weights[r]`, or with probability
    /// `off_list` any legal move outside the weighted ranks.
    Human { rank_weights: Vec<f64>, off_list: f64 },
}

impl Profile {
    pub fn perfect() -> Self {
        Profile::Perfect { threshold: 0.98, sag: 0.5, sag_ranks: (2, 3) }
    }

    pub fn human() -> Self {
        Profile::Human { rank_weights: vec![0.30, 0.22, 0.15, 0.10, 0.08, 0.05, 0.01, 0.01, 0.005, 0.005], off_list: 0.07 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub size: u8,
    pub komi: f64,
    pub plies: usize,
    pub black: Profile,
    pub white: Profile,
    /// Seeds the players' choices; the score model is seeded by the stub.
    pub seed: u64,
}

/// Seed of the perfect-player fixture (Black perfect, White human).
pub const PERFECT_FIXTURE_SEED: u64 = 0;
/// Seed of the noisy-human fixture (both sides human).
pub const HUMAN_FIXTURE_SEED: u64 = 3;

impl SynthSpec {
    pub fn perfect_vs_human(seed: u64) -> Self {
        SynthSpec { size: 19, komi: 7.5, plies: 150, black: Profile::perfect(), white: Profile::human(), seed }
    }

    pub fn human_vs_human(seed: u64) -> Self {
        SynthSpec { size: 19, komi: 7.5, plies: 150, black: Profile::human(), white: Profile::human(), seed }
    }
}

/// Legal non-pass moves in the stub's policy order.
fn playable(eval: &PositionEval) -> Vec<usize> {
    let pass = MoveKind::Pass.policy_index(eval.size);
    eval.ranked.iter().copied().filter(|&i| i != pass).collect()
}

fn choose(profile: &Profile, eval: &PositionEval, winrate_scale: f64, rng: &mut ChaCha8Rng) -> Option<usize> {
    let moves = playable(eval);
    if moves.is_empty() {
        return None;
    }
    let pick = match profile {
        Profile::Perfect { threshold, sag, sag_ranks } => {
            let decided = eval.winrate_mover(eval.root_mover, winrate_scale) >= *threshold;
            if decided && rng.random_bool(sag.clamp(0.0, 1.0)) {
                rng.random_range(sag_ranks.0..=sag_ranks.1)
            } else {
                0
            }
        }
        Profile::Human { rank_weights, off_list } => {
            if moves.len() > rank_weights.len() && rng.random_bool(off_list.clamp(0.0, 1.0)) {
                rng.random_range(rank_weights.len()..moves.len())
            } else {
                WeightedIndex::new(rank_weights).map(|w| w.sample(rng)).unwrap_or(0)
            }
        }
    };
    Some(moves[pick.min(moves.len() - 1)])
}

/// Plays a synthetic game. Stops early if a side has no legal non-pass move.
pub fn generate(stub: &StubConfig, spec: &SynthSpec) -> Result<GameRecord, BoardError> {
    let mut session = StubSession::new(stub, spec.size, spec.komi, &[], Color::Black)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut moves = Vec::with_capacity(spec.plies);
    for _ in 0..spec.plies {
        let eval = session.evaluate();
        let profile = match eval.to_move {
            Color::Black => &spec.black,
            Color::White => &spec.white,
        };
        let Some(index) = choose(profile, &eval, stub.winrate_scale, &mut rng) else { break };
        let mv = Move { color: eval.to_move, kind: MoveKind::from_policy_index(index, spec.size) };
        session.play(mv, &eval);
        moves.push(mv);
    }
    let mut record = GameRecord::new(spec.size, spec.komi, Vec::new(), moves);
    let name = |p: &Profile| match p {
        Profile::Perfect { .. } => "synthetic perfect",
        Profile::Human { .. } => "synthetic human",
    };
    record.set_player_names(name(&spec.black), name(&spec.white));
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::board::replay;

    #[test]
    fn deterministic_and_legal() {
        let stub = StubConfig::default();
        let spec = SynthSpec { plies: 40, ..SynthSpec::human_vs_human(3) };
        let a = generate(&stub, &spec).unwrap();
        assert_eq!(a, generate(&stub, &spec).unwrap());
        assert_eq!(a.moves.len(), 40);
        let r = replay(&a, false).unwrap();
        assert!(r.warnings.is_empty(), "{:?}", r.warnings);
    }

    #[test]
    fn perfect_player_follows_the_favourite() {
        let stub = StubConfig::default();
        let spec = SynthSpec { plies: 20, ..SynthSpec::perfect_vs_human(5) };
        let g = generate(&stub, &spec).unwrap();
        let mut session = StubSession::new(&stub, 19, 7.5, &[], Color::Black).unwrap();
        for mv in &g.moves {
            let eval = session.evaluate();
            if mv.color == Color::Black {
                assert_eq!(eval.ranked[0], mv.kind.policy_index(19));
            }
            session.play(*mv, &eval);
        }
    }
}
