use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{hit_rate, search_gap_kl, MetricsError};
use crate::engine::{analyze_position, AnalyzeOptions, EngineHandle, TurnAnalysis};
use crate::sgf::GameRecord;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub visits: u32,
    pub run: usize,
    pub kl: f64,
}

/// Analyzes the position before `turn` afresh for every visit count in
/// `grid`, `repeats` times each, and records the search-gap divergence.
pub fn calibration_run(
    handle: &EngineHandle,
    record: &GameRecord,
    turn: usize,
    grid: &[u32],
    repeats: usize,
    opts: &AnalyzeOptions,
) -> Result<Vec<CalibrationRow>, MetricsError> {
    let mut rows = Vec::with_capacity(grid.len() * repeats);
    for &visits in grid {
        let opts = AnalyzeOptions { max_visits: visits, include_policy: true, use_cache: false, ..opts.clone() };
        for run in 0..repeats {
            let analysis = analyze_position(handle, record, turn, &opts)?;
            rows.push(CalibrationRow { visits, run, kl: search_gap_kl(&analysis)? });
        }
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width histogram over `[lo, hi]`; values outside the range are
/// clamped into the end bins.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<HistogramBin> {
    let bins = bins.max(1);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin { lo: lo + i as f64 * width, hi: lo + (i + 1) as f64 * width, count: 0 })
        .collect();
    for &v in values {
        let i = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        out[i].count += 1;
    }
    out
}

/// One network's analyses of a shared position set.
#[derive(Clone, Debug)]
pub struct NetworkPositions {
    pub network: String,
    pub analyses: Vec<TurnAnalysis>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NetworkStrength {
    pub network: String,
    pub hit_rate: f64,
    pub hits: usize,
    pub positions: usize,
    pub kl_mean: f64,
    pub kl_max: f64,
    pub kl_values: Vec<f64>,
    pub histogram: Vec<HistogramBin>,
}

/// Per-network hit rate and divergence statistics. Histograms share one
/// range across networks so they can be overlaid.
pub fn strength_bench(networks: &[NetworkPositions], bins: usize) -> Result<Vec<NetworkStrength>, MetricsError> {
    if networks.is_empty() || networks.iter().any(|n| n.analyses.is_empty()) {
        return Err(MetricsError::EmptyPositionSet);
    }
    let mut partial = Vec::with_capacity(networks.len());
    for n in networks {
        let hr = hit_rate(n.analyses.iter().map(|a| (a, None)))?;
        let kls = n.analyses.iter().map(search_gap_kl).collect::<Result<Vec<_>, _>>()?;
        partial.push((n, hr, kls));
    }
    let top = partial.iter().flat_map(|(_, _, k)| k.iter().copied()).fold(0.0, f64::max);
    let hi = if top > 0.0 { top } else { 1.0 };
    Ok(partial
        .into_iter()
        .map(|(n, hr, kls)| NetworkStrength {
            network: n.network.clone(),
            hit_rate: hr.rate,
            hits: hr.hits,
            positions: hr.positions,
            kl_mean: kls.iter().sum::<f64>() / kls.len() as f64,
            kl_max: kls.iter().copied().fold(0.0, f64::max),
            histogram: histogram(&kls, 0.0, hi, bins),
            kl_values: kls,
        })
        .collect())
}

/// Picks one turn per game uniformly at random. Games without moves get
/// `None`. The same seed always picks the same turns.
pub fn sample_positions(game_lengths: &[usize], seed: u64) -> Vec<Option<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    game_lengths
        .iter()
        .map(|&n| if n == 0 { None } else { Some(rng.random_range(0..n)) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;

    #[test]
    fn three_of_four() {
        let agree = analysis(0, 0.0, &[(0.0, 10), (0.0, 2)], Some(policy_favoring(0)));
        let miss = analysis(0, 0.0, &[(0.0, 2), (0.0, 10)], Some(policy_favoring(0)));
        let set = NetworkPositions { network: "n".into(), analyses: vec![agree.clone(), agree.clone(), miss, agree] };
        let r = strength_bench(&[set], 10).unwrap();
        assert_eq!(r[0].hit_rate, 0.75);
        assert_eq!((r[0].hits, r[0].positions), (3, 4));
        assert_eq!(r[0].histogram.iter().map(|b| b.count).sum::<usize>(), 4);
    }

    #[test]
    fn sharper_policy_lower_kl() {
        // Visits fixed at (6, 3, 1); the sharper policy tracks them more closely.
        let visits = [(0.0, 6), (0.0, 3), (0.0, 1)];
        let mut flat = vec![0.0; 82];
        flat[..3].copy_from_slice(&[0.34, 0.33, 0.33]);
        let mut sharp = vec![0.0; 82];
        sharp[..3].copy_from_slice(&[0.58, 0.31, 0.11]);
        let nets = [
            NetworkPositions { network: "flat".into(), analyses: vec![analysis(0, 0.0, &visits, Some(flat))] },
            NetworkPositions { network: "sharp".into(), analyses: vec![analysis(0, 0.0, &visits, Some(sharp))] },
        ];
        let r = strength_bench(&nets, 5).unwrap();
        assert!(r[1].kl_mean < r[0].kl_mean, "{} vs {}", r[1].kl_mean, r[0].kl_mean);
        assert_eq!(r[0].histogram[0].hi, r[1].histogram[0].hi);
    }

    #[test]
    fn empty_set_is_an_error() {
        assert!(matches!(strength_bench(&[], 5), Err(MetricsError::EmptyPositionSet)));
        let empty = NetworkPositions { network: "n".into(), analyses: vec![] };
        assert!(matches!(strength_bench(&[empty], 5), Err(MetricsError::EmptyPositionSet)));
    }

    #[test]
    fn histogram_edges() {
        let h = histogram(&[0.0, 0.5, 1.0, 2.0, -1.0], 0.0, 1.0, 2);
        assert_eq!(h.iter().map(|b| b.count).collect::<Vec<_>>(), vec![2, 3]);
    }

    #[test]
    fn sampling_is_seeded() {
        let lens = [10, 0, 200, 1];
        let a = sample_positions(&lens, 7);
        assert_eq!(a, sample_positions(&lens, 7));
        assert_eq!(a[1], None);
        assert_eq!(a[3], Some(0));
        assert!(a[2].unwrap() < 200);
    }
}
