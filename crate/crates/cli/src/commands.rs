use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use anyhow::{anyhow, bail, Context, Result};
use kifu_core::board::replay;
use kifu_core::engine::stub::{serve, StubConfig};
use kifu_core::engine::{analyze_game, game_hash, AnalyzedGame, CacheKey, EngineHandle};
use kifu_core::metrics::{calibration_run, sample_positions, strength_bench, NetworkPositions, TurnMetricsOptions};
use kifu_core::report::{
    build_report, calibration_csv, calibration_spec, emit_plot_specs, emit_report, strength_csv,
    strength_histogram_csv, strength_histogram_spec, Format, ReportInput,
};
use kifu_core::sgf::{parse_sgf, write_sgf, GameRecord};
use kifu_core::synth::{generate, SynthSpec, HUMAN_FIXTURE_SEED, PERFECT_FIXTURE_SEED};
use log::{info, warn};
use walkdir::WalkDir;

use crate::config::{EngineSpec, Settings};
use crate::{ReportFormat, SynthKind};

/// Result of a batch command.
pub enum Outcome {
    Success,
    /// Some inputs failed; the rest were processed.
    Partial,
}

impl Outcome {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            Outcome::Success => ExitCode::SUCCESS,
            Outcome::Partial => ExitCode::from(2),
        }
    }

    fn from_failures(failures: usize) -> Self {
        if failures == 0 {
            Outcome::Success
        } else {
            Outcome::Partial
        }
    }
}

/// Expands directories into the `.sgf` files below them, sorted by path.
pub fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            for entry in WalkDir::new(input).sort_by_file_name() {
                let entry = entry.with_context(|| format!("walking {}", input.display()))?;
                let is_sgf = entry.path().extension().is_some_and(|e| e.eq_ignore_ascii_case("sgf"));
                if entry.file_type().is_file() && is_sgf {
                    out.push(entry.into_path());
                }
            }
        } else if input.exists() {
            out.push(input.clone());
        } else {
            bail!("input {} does not exist", input.display());
        }
    }
    if out.is_empty() {
        bail!("no SGF files found in the given inputs");
    }
    Ok(out)
}

fn load_game(path: &Path) -> Result<GameRecord> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let (record, warnings) = parse_sgf(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    for w in warnings {
        warn!("{}: {w}", path.display());
    }
    Ok(record)
}

/// Runs `f` over `items` on up to `workers` threads; results keep input order.
fn run_pool<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    thread::scope(|s| {
        for _ in 0..workers.min(items.len()).max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                slots.lock().expect("results lock")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("results lock").into_iter().map(|r| r.expect("every item processed")).collect()
}

/// Analyses for `record`, from the engine (through the cache) or, with no
/// engine, from the cache alone.
fn obtain(settings: &Settings, handle: Option<&EngineHandle>, record: &GameRecord, path: &Path) -> Result<AnalyzedGame> {
    let opts = settings.analyze_options();
    let cache = settings.cache();
    if let Some(h) = handle {
        return analyze_game(h, record, &opts, Some(&cache)).with_context(|| format!("analyzing {}", path.display()));
    }
    let replayed = replay(record, opts.lenient).with_context(|| format!("replaying {}", path.display()))?;
    let key = CacheKey {
        game_hash: game_hash(record, &replayed.moves, &opts),
        network: settings.network_label.clone(),
        max_visits: opts.max_visits,
    };
    match cache.load(&key)? {
        Some(entry) if entry.meta.complete && entry.analyses.len() == replayed.moves.len() + 1 => {
            Ok(AnalyzedGame { analyses: entry.analyses, replay: replayed, key, from_cache: true })
        }
        _ => Err(anyhow!(
            "missing analysis for {} (network {:?}, {} visits) in cache {}; run `kifu analyze` first or pass --engine/--stub",
            path.display(),
            settings.network_label,
            opts.max_visits,
            settings.cache_dir.display()
        )),
    }
}

fn report_failures<T>(paths: &[PathBuf], results: &[Result<T>]) -> usize {
    let mut failures = 0;
    for (p, r) in paths.iter().zip(results) {
        if let Err(e) = r {
            failures += 1;
            log::error!("{}: {e:#}", p.display());
        }
    }
    failures
}

pub fn analyze(settings: &Settings, inputs: &[PathBuf]) -> Result<Outcome> {
    let paths = expand_inputs(inputs)?;
    let handle = settings.start_engine()?.context("analyze needs an engine: pass --engine or --stub")?;
    let results = run_pool(&paths, settings.workers, |path| {
        let record = load_game(path)?;
        let game = obtain(settings, Some(&handle), &record, path)?;
        info!(
            "{}: {} positions {}",
            path.display(),
            game.analyses.len(),
            if game.from_cache { "(cached)" } else { "analyzed" }
        );
        Ok(())
    });
    let failures = report_failures(&paths, &results);
    info!("{} of {} games analyzed; {} engine queries", paths.len() - failures, paths.len(), handle.queries_sent());
    handle.shutdown();
    Ok(Outcome::from_failures(failures))
}

/// Unique per-game output directory names derived from file stems.
fn game_dirs(paths: &[PathBuf]) -> Vec<String> {
    let mut seen = HashSet::new();
    paths
        .iter()
        .map(|p| {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "game".into());
            let mut name = stem.clone();
            let mut n = 2;
            while !seen.insert(name.clone()) {
                name = format!("{stem}-{n}");
                n += 1;
            }
            name
        })
        .collect()
}

fn read_move_times(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| l.parse::<f64>().with_context(|| format!("bad move time {l:?} in {}", path.display())))
        .collect()
}

pub fn report(
    settings: &Settings,
    inputs: &[PathBuf],
    format: ReportFormat,
    move_times: Option<&Path>,
    visit_weighted: bool,
) -> Result<Outcome> {
    let paths = expand_inputs(inputs)?;
    let times = match move_times {
        Some(_) if paths.len() != 1 => bail!("--move-times applies to a single game"),
        Some(p) => Some(read_move_times(p)?),
        None => None,
    };
    let handle = settings.start_engine()?;
    let dirs = game_dirs(&paths);
    let jobs: Vec<(&PathBuf, &String)> = paths.iter().zip(&dirs).collect();
    let results = run_pool(&jobs, settings.workers, |(path, dir)| -> Result<String> {
        let record = load_game(path)?;
        let game = obtain(settings, handle.as_ref(), &record, path)?;
        let input = ReportInput {
            record: &record,
            moves: &game.replay.moves,
            analyses: &game.analyses,
            network: &settings.network_label,
            visits: settings.visits,
            game_hash: &game.key.game_hash,
            move_seconds: times.as_deref(),
            metrics_options: TurnMetricsOptions { visit_weighted },
        };
        let mut report = build_report(&input, &settings.thresholds)?;
        report.warnings.splice(0..0, game.replay.warnings.iter().cloned());
        let out = settings.out.join(dir);
        fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
        if matches!(format, ReportFormat::Text | ReportFormat::Both) {
            fs::write(out.join("report.txt"), emit_report(&report, Format::Text)?)?;
        }
        if matches!(format, ReportFormat::Json | ReportFormat::Both) {
            fs::write(out.join("report.json"), emit_report(&report, Format::Json)?)?;
        }
        emit_plot_specs(&report, &out)?;
        Ok(format!(
            "{}: black {}, white {} -> {}",
            path.display(),
            report.players[0].level,
            report.players[1].level,
            out.display()
        ))
    });
    for line in results.iter().flatten() {
        println!("{line}");
    }
    let failures = report_failures(&paths, &results);
    if let Some(h) = handle {
        h.shutdown();
    }
    Ok(Outcome::from_failures(failures))
}

fn parse_network(arg: &str, seed: u64) -> Result<(String, EngineSpec)> {
    let (label, spec) = arg.split_once('=').with_context(|| format!("--network expects LABEL=SPEC, got {arg:?}"))?;
    if label.trim().is_empty() {
        bail!("empty network label in {arg:?}");
    }
    Ok((label.trim().to_string(), EngineSpec::parse(spec, seed)?))
}

pub fn strength(
    settings: &Settings,
    inputs: &[PathBuf],
    networks: &[String],
    sample: bool,
    bins: usize,
) -> Result<Outcome> {
    let paths = expand_inputs(inputs)?;
    let loaded: Vec<Result<GameRecord>> = paths.iter().map(|p| load_game(p)).collect();
    let mut failures = report_failures(&paths, &loaded);
    let games: Vec<(&PathBuf, GameRecord)> =
        paths.iter().zip(loaded).filter_map(|(p, r)| r.ok().map(|g| (p, g))).collect();
    if games.is_empty() {
        bail!("no readable games in the corpus");
    }

    let nets: Vec<(String, Option<EngineSpec>)> = if networks.is_empty() {
        vec![(settings.network_label.clone(), settings.engine.clone())]
    } else {
        networks.iter().map(|n| parse_network(n, settings.seed).map(|(l, s)| (l, Some(s)))).collect::<Result<_>>()?
    };
    let mut seen = HashSet::new();
    for (label, _) in &nets {
        if !seen.insert(label) {
            bail!("network label {label:?} given twice");
        }
    }

    let replays: Vec<usize> = games
        .iter()
        .map(|(_, g)| replay(g, settings.leniency).map(|r| r.moves.len()).unwrap_or(0))
        .collect();
    let picks = if sample { Some(sample_positions(&replays, settings.seed)) } else { None };

    let mut sets = Vec::with_capacity(nets.len());
    let mut bad_games = HashSet::new();
    for (label, spec) in &nets {
        let mut net_settings = settings.clone();
        net_settings.network_label = label.clone();
        let handle = spec.as_ref().map(|s| s.start(label, settings.timeout)).transpose()?;
        let results = run_pool(&games, settings.workers, |(path, record)| {
            obtain(&net_settings, handle.as_ref(), record, path)
        });
        let mut analyses = Vec::new();
        for (i, ((path, _), r)) in games.iter().zip(results).enumerate() {
            match r {
                Ok(game) => {
                    let n = game.replay.moves.len();
                    let positions = game.analyses.into_iter().filter(|a| a.turn_index < n);
                    match picks.as_ref().map(|p| p[i]) {
                        Some(Some(t)) => analyses.extend(positions.filter(|a| a.turn_index == t)),
                        Some(None) => {}
                        None => analyses.extend(positions),
                    }
                }
                Err(e) => {
                    if bad_games.insert(i) {
                        failures += 1;
                    }
                    log::error!("{} ({label}): {e:#}", path.display());
                }
            }
        }
        if let Some(h) = handle {
            h.shutdown();
        }
        sets.push(NetworkPositions { network: label.clone(), analyses });
    }

    let results = strength_bench(&sets, bins)?;
    let out = &settings.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("strength.csv"), strength_csv(&results)?)?;
    fs::write(out.join("kl-histogram.csv"), strength_histogram_csv(&results)?)?;
    let mut spec = serde_json::to_vec_pretty(&strength_histogram_spec(&results))?;
    spec.push(b'\n');
    fs::write(out.join("kl-histogram.vl.json"), spec)?;
    if let Some(picks) = &picks {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["game", "turn", "seed"])?;
        for ((path, _), pick) in games.iter().zip(picks) {
            let turn = pick.map(|t| t.to_string()).unwrap_or_default();
            w.write_record([path.display().to_string(), turn, settings.seed.to_string()])?;
        }
        fs::write(out.join("positions.csv"), w.into_inner().map_err(|e| anyhow!("{e}"))?)?;
    }
    for r in &results {
        println!("{}: {}/{} hits ({:.4}), KL mean {:.4}, max {:.4}", r.network, r.hits, r.positions, r.hit_rate, r.kl_mean, r.kl_max);
    }
    Ok(Outcome::from_failures(failures))
}

pub fn calibrate(settings: &Settings, input: &Path, turn: usize, grid: &[u32], repeats: usize) -> Result<Outcome> {
    if repeats == 0 || grid.is_empty() || grid.contains(&0) {
        bail!("calibrate needs at least one repeat and a grid of positive visit counts");
    }
    let record = load_game(input)?;
    let handle = settings.start_engine()?.context("calibrate needs an engine: pass --engine or --stub")?;
    let rows = calibration_run(&handle, &record, turn, grid, repeats, &settings.analyze_options())
        .with_context(|| format!("calibrating {} at turn {turn}", input.display()))?;
    handle.shutdown();
    let out = &settings.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("calibration.csv"), calibration_csv(&rows)?)?;
    let mut spec = serde_json::to_vec_pretty(&calibration_spec(&rows))?;
    spec.push(b'\n');
    fs::write(out.join("calibration.vl.json"), spec)?;
    println!("{} calibration rows written to {}", rows.len(), out.display());
    Ok(Outcome::Success)
}

fn stub_config(settings: &Settings) -> StubConfig {
    match &settings.engine {
        Some(EngineSpec::Stub(cfg)) => cfg.clone(),
        _ => StubConfig { seed: settings.seed, ..StubConfig::default() },
    }
}

pub fn stub_engine(settings: &Settings) -> Result<Outcome> {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    serve(&stub_config(settings), stdin.lock(), stdout.lock()).context("stub engine i/o")?;
    Ok(Outcome::Success)
}

pub fn synth(settings: &Settings, kind: SynthKind, game_seed: Option<u64>, plies: usize, output: &Path) -> Result<Outcome> {
    let spec = match kind {
        SynthKind::Perfect => SynthSpec::perfect_vs_human(game_seed.unwrap_or(PERFECT_FIXTURE_SEED)),
        SynthKind::Human => SynthSpec::human_vs_human(game_seed.unwrap_or(HUMAN_FIXTURE_SEED)),
    };
    let spec = SynthSpec { plies, ..spec };
    let record = generate(&stub_config(settings), &spec)?;
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(output, write_sgf(&record)).with_context(|| format!("writing {}", output.display()))?;
    Ok(Outcome::Success)
}
