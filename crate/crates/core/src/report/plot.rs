//! Vega-Lite plot specifications with inline data, and CSV twins of the
//! same data.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::{ReportError, ScoreRow, SuspicionReport};
use crate::board::Color;
use crate::metrics::{CalibrationRow, NetworkStrength};

const SCHEMA: &str = "https://vega.github.io/schema/vega-lite/v5.json";

fn to_csv<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>, ReportError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    w.into_inner().map_err(|e| ReportError::Invalid(e.to_string()))
}

fn write_pair(dir: &Path, stem: &str, spec: &Value, csv: &[u8], out: &mut Vec<PathBuf>) -> Result<(), ReportError> {
    let spec_path = dir.join(format!("{stem}.vl.json"));
    let mut bytes = serde_json::to_vec_pretty(spec)?;
    bytes.push(b'\n');
    fs::write(&spec_path, bytes)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    fs::write(&csv_path, csv)?;
    out.push(spec_path);
    out.push(csv_path);
    Ok(())
}

fn winrate_spec(r: &SuspicionReport) -> Value {
    let values: Vec<Value> = r
        .series
        .winrate
        .iter()
        .map(|w| json!({"turn": w.turn, "blackWinrate": w.black_winrate, "blackScoreMean": w.black_score_mean}))
        .collect();
    json!({
        "$schema": SCHEMA,
        "title": "Black win rate",
        "width": 600,
        "height": 250,
        "data": {"values": values},
        "mark": {"type": "line"},
        "encoding": {
            "x": {"field": "turn", "type": "quantitative", "title": "Turn"},
            "y": {"field": "blackWinrate", "type": "quantitative", "title": "Black win rate", "scale": {"domain": [0, 1]}}
        }
    })
}

fn score_spec(color: Color, rows: &[ScoreRow]) -> Value {
    let mut values = Vec::with_capacity(rows.len() * 4);
    for r in rows {
        values.push(json!({"turn": r.turn, "series": "best", "scoreMean": r.best}));
        if let Some(a) = r.actual {
            values.push(json!({"turn": r.turn, "series": "actual", "scoreMean": a}));
        }
        values.push(json!({"turn": r.turn, "series": "average", "scoreMean": r.average}));
        values.push(json!({"turn": r.turn, "series": "median", "scoreMean": r.median}));
    }
    json!({
        "$schema": SCHEMA,
        "title": format!("{color}: score mean of engine best, actual move, candidate average and median"),
        "width": 600,
        "height": 250,
        "data": {"values": values},
        "mark": {"type": "line", "point": false},
        "encoding": {
            "x": {"field": "turn", "type": "quantitative", "title": "Turn"},
            "y": {"field": "scoreMean", "type": "quantitative", "title": "Score mean (mover's view)"},
            "color": {"field": "series", "type": "nominal", "sort": ["best", "actual", "average", "median"]}
        }
    })
}

fn cma_spec(r: &SuspicionReport) -> Value {
    let mut values = Vec::new();
    for (color, rows) in [(Color::Black, &r.series.black_cma), (Color::White, &r.series.white_cma)] {
        for c in rows {
            values.push(json!({"turn": c.turn, "player": color.to_string(), "cma": c.cma}));
        }
    }
    json!({
        "$schema": SCHEMA,
        "title": "Cumulative moving average of move effect",
        "width": 600,
        "height": 250,
        "data": {"values": values},
        "mark": {"type": "line"},
        "encoding": {
            "x": {"field": "turn", "type": "quantitative", "title": "Turn"},
            "y": {"field": "cma", "type": "quantitative", "title": "Average effect (points)"},
            "color": {"field": "player", "type": "nominal"}
        }
    })
}

#[derive(Serialize)]
struct CmaCsv<'a> {
    player: &'a str,
    turn: usize,
    cma: f64,
}

/// Writes the win-rate, per-player score-mean and effect CMA plots, each as
/// a spec and a CSV, into `dir`.
pub fn emit_plot_specs(report: &SuspicionReport, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    let s = &report.series;

    let wr = to_csv(&s.winrate, &["turn", "black_winrate", "black_score_mean"])?;
    write_pair(dir, "winrate", &winrate_spec(report), &wr, &mut out)?;

    for (color, rows) in [(Color::Black, &s.black_scores), (Color::White, &s.white_scores)] {
        let csv = to_csv(rows, &["turn", "best", "actual", "average", "median"])?;
        let stem = format!("score-{}", color.to_string().to_lowercase());
        write_pair(dir, &stem, &score_spec(color, rows), &csv, &mut out)?;
    }

    let mut cma_rows = Vec::new();
    for (name, rows) in [("black", &s.black_cma), ("white", &s.white_cma)] {
        cma_rows.extend(rows.iter().map(|c| CmaCsv { player: name, turn: c.turn, cma: c.cma }));
    }
    let csv = to_csv(&cma_rows, &["player", "turn", "cma"])?;
    write_pair(dir, "effect-cma", &cma_spec(report), &csv, &mut out)?;
    Ok(out)
}

/// KL against visit count, one point per run.
pub fn calibration_spec(rows: &[CalibrationRow]) -> Value {
    let values: Vec<Value> = rows.iter().map(|r| json!({"visits": r.visits, "run": r.run, "kl": r.kl})).collect();
    json!({
        "$schema": SCHEMA,
        "title": "Search-gap KL-divergence by visit count",
        "width": 500,
        "height": 300,
        "data": {"values": values},
        "mark": {"type": "point"},
        "encoding": {
            "x": {"field": "visits", "type": "quantitative", "scale": {"type": "log"}, "title": "Visits"},
            "y": {"field": "kl", "type": "quantitative", "title": "KL-divergence (nats)"},
            "color": {"field": "run", "type": "ordinal"}
        }
    })
}

pub fn calibration_csv(rows: &[CalibrationRow]) -> Result<Vec<u8>, ReportError> {
    to_csv(rows, &["visits", "run", "kl"])
}

#[derive(Serialize)]
struct StrengthCsv<'a> {
    network: &'a str,
    hits: usize,
    positions: usize,
    rate: String,
    kl_mean: f64,
    kl_max: f64,
}

/// One row per network: hits, positions, rate (4 decimals), KL mean and max.
pub fn strength_csv(results: &[NetworkStrength]) -> Result<Vec<u8>, ReportError> {
    let rows: Vec<StrengthCsv> = results
        .iter()
        .map(|r| StrengthCsv {
            network: &r.network,
            hits: r.hits,
            positions: r.positions,
            rate: format!("{:.4}", r.hit_rate),
            kl_mean: r.kl_mean,
            kl_max: r.kl_max,
        })
        .collect();
    to_csv(&rows, &["network", "hits", "positions", "rate", "kl_mean", "kl_max"])
}

/// Overlaid per-network histograms of the search-gap divergence.
pub fn strength_histogram_spec(results: &[NetworkStrength]) -> Value {
    let mut values = Vec::new();
    for r in results {
        for b in &r.histogram {
            values.push(json!({"network": r.network, "binLo": b.lo, "binHi": b.hi, "count": b.count}));
        }
    }
    json!({
        "$schema": SCHEMA,
        "title": "Search-gap KL-divergence per position",
        "width": 500,
        "height": 300,
        "data": {"values": values},
        "mark": {"type": "bar", "opacity": 0.6},
        "encoding": {
            "x": {"field": "binLo", "type": "quantitative", "bin": {"binned": true}, "title": "KL-divergence (nats)"},
            "x2": {"field": "binHi"},
            "y": {"field": "count", "type": "quantitative", "stack": null, "title": "Positions"},
            "color": {"field": "network", "type": "nominal"}
        }
    })
}

#[derive(Serialize)]
struct HistCsv<'a> {
    network: &'a str,
    bin_lo: f64,
    bin_hi: f64,
    count: usize,
}

pub fn strength_histogram_csv(results: &[NetworkStrength]) -> Result<Vec<u8>, ReportError> {
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r.histogram.iter().map(|b| HistCsv { network: &r.network, bin_lo: b.lo, bin_hi: b.hi, count: b.count }));
    }
    to_csv(&rows, &["network", "bin_lo", "bin_hi", "count"])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibration_shape() {
        let rows: Vec<CalibrationRow> = [10u32, 100]
            .iter()
            .flat_map(|&v| (0..2).map(move |run| CalibrationRow { visits: v, run, kl: 0.1 }))
            .collect();
        let spec = calibration_spec(&rows);
        assert_eq!(spec["data"]["values"].as_array().unwrap().len(), 4);
        let csv = String::from_utf8(calibration_csv(&rows).unwrap()).unwrap();
        assert_eq!(csv.lines().count(), 5);
        assert_eq!(csv.lines().next(), Some("visits,run,kl"));
    }

    #[test]
    fn empty_csv_keeps_header() {
        let csv = String::from_utf8(strength_csv(&[]).unwrap()).unwrap();
        assert_eq!(csv, "network,hits,positions,rate,kl_mean,kl_max\n");
    }
}
