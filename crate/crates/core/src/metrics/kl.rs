//! Search-gap KL-divergence between the raw policy and the visit
//! distribution, restricted to the moves the search actually visited.
//!
//! The visit distribution is normalized over the visited moves. The raw
//! policy is read on that same support, exact zeros are floored at
//! [`POLICY_FLOOR`], and the result is renormalized. The divergence is taken
//! policy-first, in nats.

use super::MetricsError;
use crate::engine::TurnAnalysis;

/// Floor for raw-policy entries that are exactly zero (or flagged illegal)
/// on the visited support.
pub const POLICY_FLOOR: f64 = 1e-10;

/// Normalized visit counts over the visited moves. Moves are policy indices.
#[derive(Clone, Debug, PartialEq)]
pub struct VisitDistribution {
    entries: Vec<(usize, f64)>,
    source_visits: Vec<(usize, u64)>,
}

impl VisitDistribution {
    pub fn from_visits(visits: &[(usize, u64)]) -> Result<Self, MetricsError> {
        let mut source: Vec<(usize, u64)> = visits.iter().copied().filter(|&(_, v)| v > 0).collect();
        if source.is_empty() {
            return Err(MetricsError::EmptySupport);
        }
        source.sort_by_key(|&(m, _)| m);
        if source.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(MetricsError::DuplicateMove);
        }
        let total: u64 = source.iter().map(|&(_, v)| v).sum();
        let entries = source.iter().map(|&(m, v)| (m, v as f64 / total as f64)).collect();
        Ok(VisitDistribution { entries, source_visits: source })
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn source_visits(&self) -> &[(usize, u64)] {
        &self.source_visits
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(m, _)| m)
    }
}

/// The raw policy restricted to a visit distribution's support.
#[derive(Clone, Debug, PartialEq)]
pub struct RestrictedPolicy {
    entries: Vec<(usize, f64)>,
}

impl RestrictedPolicy {
    /// `policy` is indexed by move; negative entries mark illegal moves.
    pub fn restrict(policy: &[f64], support: &VisitDistribution) -> Result<Self, MetricsError> {
        let mut raw = Vec::with_capacity(support.entries.len());
        for m in support.support() {
            let p = *policy.get(m).ok_or(MetricsError::PolicyIndex(m))?;
            let p = if p > 0.0 && p.is_finite() { p } else { POLICY_FLOOR };
            raw.push((m, p));
        }
        let total: f64 = raw.iter().map(|&(_, p)| p).sum();
        Ok(RestrictedPolicy { entries: raw.into_iter().map(|(m, p)| (m, p / total)).collect() })
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }
}

/// `Σ p ln(p / q)` over paired entries; terms with `p == 0` contribute 0.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum()
}

/// Restricted divergence from raw visit counts and a raw policy vector.
pub fn restricted_kl(visits: &[(usize, u64)], policy: &[f64]) -> Result<f64, MetricsError> {
    let pi = VisitDistribution::from_visits(visits)?;
    let p = RestrictedPolicy::restrict(policy, &pi)?;
    let pv: Vec<f64> = p.entries.iter().map(|&(_, x)| x).collect();
    let qv: Vec<f64> = pi.entries.iter().map(|&(_, x)| x).collect();
    // Rounding can leave a tiny negative value for identical distributions.
    Ok(kl_divergence(&pv, &qv).max(0.0))
}

/// Search-gap divergence for one analyzed position.
pub fn search_gap_kl(analysis: &TurnAnalysis) -> Result<f64, MetricsError> {
    let policy = analysis
        .raw_policy
        .as_ref()
        .ok_or(MetricsError::MissingPolicy { turn: analysis.turn_index })?;
    if analysis.candidates.is_empty() {
        return Err(MetricsError::EmptySupport);
    }
    let mut visits = Vec::with_capacity(analysis.candidates.len());
    for c in &analysis.candidates {
        let kind = c.kind(analysis.board_size)?;
        visits.push((kind.policy_index(analysis.board_size), c.visits));
    }
    restricted_kl(&visits, policy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_distributions_give_zero() {
        let kl = restricted_kl(&[(0, 1), (1, 1)], &[0.5, 0.5]).unwrap();
        assert_eq!(kl, 0.0);
        let kl = restricted_kl(&[(3, 30), (7, 70)], &[0.0, 0.0, 0.0, 0.03, 0.0, 0.0, 0.0, 0.07]).unwrap();
        assert!(kl.abs() < 1e-15, "{kl}");
    }

    #[test]
    fn hand_case() {
        // p' = (0.5, 0.5), pi' = (0.25, 0.75); value from a 40-digit evaluation.
        let kl = restricted_kl(&[(0, 1), (1, 3)], &[0.5, 0.5]).unwrap();
        assert!((kl - 0.143_841_036_225_890_46).abs() < 1e-15, "{kl}");
    }

    #[test]
    fn zero_policy_entries_are_floored() {
        // Visits (5, 3, 2); policy on support (0.2, 0.1, 0) -> floored third
        // entry. Reference value from a 40-digit evaluation.
        let policy = [0.2, 0.1, 0.0, 0.7];
        let kl = restricted_kl(&[(0, 5), (1, 3), (2, 2)], &policy).unwrap();
        assert!((kl - 0.226_908_213_040_679_9).abs() < 1e-12, "{kl}");
    }

    #[test]
    fn sentinel_counts_as_zero() {
        let a = restricted_kl(&[(0, 5), (1, 3), (2, 2)], &[0.2, 0.1, -1.0]).unwrap();
        let b = restricted_kl(&[(0, 5), (1, 3), (2, 2)], &[0.2, 0.1, 0.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn support_errors() {
        assert!(matches!(restricted_kl(&[], &[1.0]), Err(MetricsError::EmptySupport)));
        assert!(matches!(restricted_kl(&[(0, 0)], &[1.0]), Err(MetricsError::EmptySupport)));
        assert!(matches!(restricted_kl(&[(0, 1), (0, 2)], &[1.0]), Err(MetricsError::DuplicateMove)));
        assert!(matches!(restricted_kl(&[(5, 1)], &[1.0]), Err(MetricsError::PolicyIndex(5))));
    }

    #[test]
    fn visit_distribution_matches_counts() {
        let d = VisitDistribution::from_visits(&[(4, 6), (1, 2)]).unwrap();
        assert_eq!(d.entries(), &[(1, 0.25), (4, 0.75)]);
        assert_eq!(d.source_visits(), &[(1, 2), (4, 6)]);
    }
}
