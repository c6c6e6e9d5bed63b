use serde::{Deserialize, Serialize};

use crate::board::Color;
use crate::metrics::{PlayerSummary, TurnMetrics};

/// Indicator thresholds. None of these are calibrated; they are defaults
/// picked to separate a handful of published case studies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Players with fewer moves than this get only inconclusive indicators.
    pub min_moves: usize,
    /// Win rate at which the drawdown watch starts.
    pub lead_winrate: f64,
    /// A drawdown at or below this (win-rate fraction) is suspicious.
    pub max_drawdown: f64,
    /// An average effect at or above this (points) is suspicious.
    pub average_effect: f64,
    /// Win rate marking a decided game.
    pub decided_winrate: f64,
    /// Pre-minus-post average effect at or above this is suspicious.
    pub degradation: f64,
    /// The player's win rate must stay at or above this after the game is
    /// decided for the degradation indicator to apply.
    pub pinned_winrate: f64,
    /// A top-1 match rate at or above this is suspicious.
    pub top1_match: f64,
    /// Average loss (negated average effect, floored at 0) over
    /// mean(best - median); at or below this is suspicious.
    pub volatility_ratio: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            min_moves: 20,
            lead_winrate: 0.60,
            max_drawdown: 0.05,
            average_effect: -0.35,
            decided_winrate: 0.98,
            degradation: 0.3,
            pinned_winrate: 0.95,
            top1_match: 0.55,
            volatility_ratio: 0.3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Suspicious when the value is at or above the threshold.
    Above,
    /// Suspicious when the value is at or below the threshold.
    Below,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Suspicious,
    Clean,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Indicator {
    pub name: String,
    /// Procedure step: 1 win-rate graph, 2 average effect, 3 comparison
    /// with the engine's recommendations.
    pub step: u8,
    pub value: Option<f64>,
    pub threshold: f64,
    pub direction: Direction,
    pub verdict: Verdict,
    pub narrative: String,
}

impl Indicator {
    fn judged(name: &str, step: u8, value: f64, threshold: f64, direction: Direction, narrative: String) -> Self {
        let suspicious = match direction {
            Direction::Above => value >= threshold,
            Direction::Below => value <= threshold,
        };
        Indicator {
            name: name.into(),
            step,
            value: Some(value),
            threshold,
            direction,
            verdict: if suspicious { Verdict::Suspicious } else { Verdict::Clean },
            narrative,
        }
    }

    fn inconclusive(name: &str, step: u8, threshold: f64, direction: Direction, narrative: String) -> Self {
        Indicator {
            name: name.into(),
            step,
            value: None,
            threshold,
            direction,
            verdict: Verdict::Inconclusive,
            narrative,
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Suspicious => "suspicious",
            Verdict::Clean => "clean",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

pub const DRAWDOWN: &str = "win-rate-drawdown";
pub const AVERAGE_EFFECT: &str = "average-effect";
pub const DEGRADATION: &str = "post-98-degradation";
pub const TOP1_MATCH: &str = "top-1-match";
pub const VOLATILITY: &str = "volatility-adjusted-effect";

/// Largest fall of `series` below its running peak, counted from the first
/// point at or above `start`. `None` if the series never gets there.
pub fn drawdown_after(series: &[f64], start: f64) -> Option<f64> {
    let first = series.iter().position(|&w| w >= start)?;
    let mut peak = series[first];
    let mut worst: f64 = 0.0;
    for &w in &series[first..] {
        peak = peak.max(w);
        worst = worst.max(peak - w);
    }
    Some(worst)
}

/// Builds the five indicators for one player.
///
/// `black_winrates` is Black's win rate at every analyzed position and
/// `metrics` the per-move metrics of the whole game.
pub fn build_indicators(
    summary: &PlayerSummary,
    metrics: &[TurnMetrics],
    black_winrates: &[f64],
    t: &Thresholds,
) -> Vec<Indicator> {
    use Direction::{Above, Below};

    if summary.moves < t.min_moves {
        let why = format!("insufficient data: {} moves, at least {} needed", summary.moves, t.min_moves);
        return vec![
            Indicator::inconclusive(DRAWDOWN, 1, t.max_drawdown, Below, why.clone()),
            Indicator::inconclusive(AVERAGE_EFFECT, 2, t.average_effect, Above, why.clone()),
            Indicator::inconclusive(DEGRADATION, 2, t.degradation, Above, why.clone()),
            Indicator::inconclusive(TOP1_MATCH, 3, t.top1_match, Above, why.clone()),
            Indicator::inconclusive(VOLATILITY, 3, t.volatility_ratio, Below, why),
        ];
    }

    let own_winrates: Vec<f64> = black_winrates
        .iter()
        .map(|&w| if summary.color == Color::Black { w } else { 1.0 - w })
        .collect();
    let drawdown = match drawdown_after(&own_winrates, t.lead_winrate) {
        Some(d) => Indicator::judged(
            DRAWDOWN,
            1,
            d,
            t.max_drawdown,
            Below,
            format!(
                "after first reaching {:.0}% the player's win rate fell at most {:.1} percentage points",
                t.lead_winrate * 100.0,
                d * 100.0
            ),
        ),
        None => Indicator::inconclusive(
            DRAWDOWN,
            1,
            t.max_drawdown,
            Below,
            format!("the player's win rate never reached {:.0}%", t.lead_winrate * 100.0),
        ),
    };

    let average = if summary.measured_moves == 0 {
        Indicator::inconclusive(AVERAGE_EFFECT, 2, t.average_effect, Above, "no move effect could be measured".into())
    } else {
        Indicator::judged(
            AVERAGE_EFFECT,
            2,
            summary.average_effect,
            t.average_effect,
            Above,
            format!(
                "average effect {:.3} points over {} measured moves",
                summary.average_effect, summary.measured_moves
            ),
        )
    };

    let degradation = match (summary.winrate98_turn, summary.avg_effect_post98, summary.min_winrate_post98) {
        (Some(turn), Some(post), Some(low)) if low >= t.pinned_winrate => {
            let d = summary.avg_effect_pre98 - post;
            Indicator::judged(
                DEGRADATION,
                2,
                d,
                t.degradation,
                Above,
                format!(
                    "from turn {turn} the win rate stayed at or above {:.1}%; average effect {:.3} before, {:.3} after",
                    low * 100.0,
                    summary.avg_effect_pre98,
                    post
                ),
            )
        }
        (Some(turn), Some(_), Some(low)) => Indicator::inconclusive(
            DEGRADATION,
            2,
            t.degradation,
            Above,
            format!(
                "win rate reached {:.0}% at turn {turn} but later fell to {:.1}%",
                t.decided_winrate * 100.0,
                low * 100.0
            ),
        ),
        _ => Indicator::inconclusive(
            DEGRADATION,
            2,
            t.degradation,
            Above,
            format!("no measured moves with the player's win rate at {:.0}% or more", t.decided_winrate * 100.0),
        ),
    };

    let top1 = summary.top_k_match_rate.get(&1).copied().unwrap_or(0.0);
    let matching = Indicator::judged(
        TOP1_MATCH,
        3,
        top1,
        t.top1_match,
        Above,
        format!("{:.1}% of the player's moves were the engine's most visited candidate", top1 * 100.0),
    );

    let spreads: Vec<f64> = metrics
        .iter()
        .filter(|m| m.mover == summary.color)
        .map(|m| m.best_score_mean - m.median_score_mean)
        .collect();
    let spread = spreads.iter().sum::<f64>() / spreads.len().max(1) as f64;
    // Only losses count: a player gaining points on average has loss zero,
    // so worsening effects can never make this indicator more suspicious.
    let loss = (-summary.average_effect).max(0.0);
    let volatility = if spread > 0.0 && summary.measured_moves > 0 {
        let ratio = loss / spread;
        Indicator::judged(
            VOLATILITY,
            3,
            ratio,
            t.volatility_ratio,
            Below,
            format!(
                "average loss {:.3} points against a mean best-to-median candidate spread of {:.3}",
                loss,
                spread
            ),
        )
    } else {
        Indicator::inconclusive(VOLATILITY, 3, t.volatility_ratio, Below, "candidate score spread is zero".into())
    };

    vec![drawdown, average, degradation, matching, volatility]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuspicionLevel {
    None,
    Weak,
    Strong,
}

impl std::fmt::Display for SuspicionLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SuspicionLevel::None => "none",
            SuspicionLevel::Weak => "weak",
            SuspicionLevel::Strong => "strong",
        })
    }
}

/// Rule table: strong needs three or more suspicious indicators covering
/// all three steps; weak needs two or more; anything else is none.
pub fn suspicion_level(indicators: &[Indicator]) -> (SuspicionLevel, Vec<String>) {
    let suspicious: Vec<&Indicator> = indicators.iter().filter(|i| i.verdict == Verdict::Suspicious).collect();
    let mut steps: Vec<u8> = suspicious.iter().map(|i| i.step).collect();
    steps.sort_unstable();
    steps.dedup();
    let names: Vec<&str> = suspicious.iter().map(|i| i.name.as_str()).collect();
    let mut trace = vec![format!(
        "{} suspicious indicator(s) [{}] covering step(s) {:?}",
        suspicious.len(),
        names.join(", "),
        steps
    )];
    let all_steps = steps == [1, 2, 3];
    let level = if suspicious.len() >= 3 && all_steps {
        trace.push("rule strong: >= 3 suspicious and every step represented -> fired".into());
        SuspicionLevel::Strong
    } else {
        trace.push(format!(
            "rule strong: >= 3 suspicious and every step represented -> not fired{}",
            if suspicious.len() >= 3 { " (a step is missing)" } else { "" }
        ));
        if suspicious.len() >= 2 {
            trace.push("rule weak: >= 2 suspicious -> fired".into());
            SuspicionLevel::Weak
        } else {
            trace.push("rule weak: >= 2 suspicious -> not fired".into());
            SuspicionLevel::None
        }
    };
    (level, trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ind(step: u8, verdict: Verdict) -> Indicator {
        Indicator {
            name: format!("s{step}"),
            step,
            value: Some(0.0),
            threshold: 0.0,
            direction: Direction::Above,
            verdict,
            narrative: String::new(),
        }
    }

    #[test]
    fn rule_table() {
        use Verdict::*;
        let all: Vec<_> = [1, 2, 2, 3, 3].iter().map(|&s| ind(s, Suspicious)).collect();
        assert_eq!(suspicion_level(&all).0, SuspicionLevel::Strong);
        assert_eq!(suspicion_level(&[ind(1, Suspicious), ind(2, Clean)]).0, SuspicionLevel::None);
        assert_eq!(suspicion_level(&[ind(2, Suspicious), ind(2, Suspicious)]).0, SuspicionLevel::Weak);
        let no_step1 = [ind(2, Suspicious), ind(2, Suspicious), ind(3, Suspicious), ind(1, Inconclusive)];
        let (level, trace) = suspicion_level(&no_step1);
        assert_eq!(level, SuspicionLevel::Weak);
        assert!(trace[1].contains("step is missing"));
        assert_eq!(suspicion_level(&[]).0, SuspicionLevel::None);
    }

    #[test]
    fn drawdown_examples() {
        assert_eq!(drawdown_after(&[0.5, 0.55], 0.6), None);
        assert_eq!(drawdown_after(&[0.5, 0.7, 0.9, 0.6, 0.95], 0.6), Some(0.9 - 0.6));
        assert_eq!(drawdown_after(&[0.61, 0.7, 0.8], 0.6), Some(0.0));
        // A dip before the lead is established does not count.
        assert_eq!(drawdown_after(&[0.59, 0.1, 0.6, 0.6], 0.6), Some(0.0));
    }

    #[test]
    fn verdict_follows_direction() {
        let a = Indicator::judged("x", 1, 0.5, 0.5, Direction::Above, String::new());
        let b = Indicator::judged("x", 1, 0.49, 0.5, Direction::Above, String::new());
        let c = Indicator::judged("x", 1, 0.49, 0.5, Direction::Below, String::new());
        assert_eq!((a.verdict, b.verdict, c.verdict), (Verdict::Suspicious, Verdict::Clean, Verdict::Suspicious));
    }

    #[test]
    fn thresholds_parse_partially() {
        let t: Thresholds = serde_json::from_str(r#"{"top1_match": 0.7}"#).unwrap();
        assert_eq!(t.top1_match, 0.7);
        assert_eq!(t.min_moves, 20);
        assert!(serde_json::from_str::<Thresholds>(r#"{"bogus": 1}"#).is_err());
    }
}
