//! Acceptance suite: one check per criterion, one PASS/FAIL line each.
//! Run with `cargo test -p kifu --test acceptance`.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Output};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use kifu_core::board::{to_sgf_coord, BoardState, Color, IllegalReason, Move, MoveKind, Point, Stone};
use kifu_core::engine::stub::{self, StubConfig};
use kifu_core::engine::{
    analyze_game, AnalysisCache, AnalyzeOptions, CandidateMove, EngineConfig, EngineError, EngineHandle, TurnAnalysis,
};
use kifu_core::metrics::{restricted_kl, search_gap_kl, turn_metrics, TurnMetricsOptions};
use kifu_core::sgf::{parse_collection, parse_sgf, write_collection, write_sgf, SgfError};
use kifu_core::synth::{generate, SynthSpec, PERFECT_FIXTURE_SEED};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn kifu(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kifu")).current_dir(dir).args(args).output().expect("run kifu")
}

fn run_ok(dir: &Path, args: &[&str]) -> Result<Output, String> {
    let o = kifu(dir, args);
    if o.status.success() {
        Ok(o)
    } else {
        Err(format!("kifu {} exited {:?}: {}", args.join(" "), o.status.code(), String::from_utf8_lossy(&o.stderr)))
    }
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        let Ok(rd) = fs::read_dir(&d) else { continue };
        for e in rd.flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

fn brute_force_kl(p: &[f64], q: &[f64]) -> f64 {
    let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
    let mut d = 0.0;
    for (a, b) in p.iter().zip(q) {
        let (a, b) = (a / sp, b / sq);
        if a > 0.0 {
            d += a * (a.ln() - b.ln());
        }
    }
    d
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut zeros = 0;
    for case in 0..1000 {
        let support = rng.random_range(1..=362usize);
        let mut idx: Vec<usize> = (0..362).collect();
        idx.shuffle(&mut rng);
        let visits: Vec<(usize, u64)> = idx[..support].iter().map(|&i| (i, rng.random_range(1..10_000))).collect();
        let mut policy: Vec<f64> = (0..362).map(|_| rng.random_range(0.0..1.0)).collect();
        let equal = case % 2 == 0;
        if equal {
            let c = rng.random_range(0.001..1.0);
            for &(i, v) in &visits {
                policy[i] = v as f64 * c;
            }
        }
        let d = restricted_kl(&visits, &policy).map_err(|e| e.to_string())?;
        ensure!(d >= 0.0, "case {case}: negative divergence {d}");
        let p: Vec<f64> = visits.iter().map(|&(i, _)| policy[i]).collect();
        let q: Vec<f64> = visits.iter().map(|&(_, v)| v as f64).collect();
        let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
        let differ = p.iter().zip(&q).any(|(a, b)| (a / sp - b / sq).abs() > 1e-12);
        ensure!(differ == (d > 1e-12), "case {case}: distributions differ = {differ} but divergence {d}");
        zeros += usize::from(!differ);
    }
    let hand = restricted_kl(&[(0, 1), (1, 3)], &[0.5, 0.5]).map_err(|e| e.to_string())?;
    ensure!((hand - 0.143841).abs() < 1e-6, "hand case gave {hand}");
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("1000 pairs ({zeros} equal), hand case {hand:.6}, {elapsed:.2?}"))
}

fn analysis_9x9(turn: usize, root: f64, cands: &[(usize, u64, f64)], policy: Option<Vec<f64>>) -> TurnAnalysis {
    let candidates: Vec<CandidateMove> = cands
        .iter()
        .map(|&(index, visits, score)| CandidateMove {
            mv: kifu_core::board::to_engine_coord(MoveKind::from_policy_index(index, 9), 9),
            visits,
            winrate: 0.5,
            score_mean: score,
            prior: 0.1,
            pv: None,
        })
        .collect();
    TurnAnalysis {
        turn_index: turn,
        board_size: 9,
        to_move: Color::Black,
        root_score_mean: root,
        root_winrate: 0.5,
        total_visits: candidates.iter().map(|c| c.visits).sum(),
        candidates,
        raw_policy: policy,
    }
}

fn criterion_2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let legal = rng.random_range(1..=82usize);
        let mut idx: Vec<usize> = (0..82).collect();
        idx.shuffle(&mut rng);
        let mut policy = vec![-1.0; 82];
        let mut visits = vec![0.0; 82];
        let mut cands = Vec::new();
        for &i in &idx[..legal] {
            policy[i] = rng.random_range(0.01..1.0);
            let v = rng.random_range(1..5000u64);
            visits[i] = v as f64;
            cands.push((i, v, 0.0));
        }
        let total: f64 = policy.iter().filter(|&&p| p > 0.0).sum();
        for p in policy.iter_mut().filter(|p| **p > 0.0) {
            *p /= total;
        }
        let full: Vec<f64> = policy.iter().map(|&p| p.max(0.0)).collect();
        let restricted = search_gap_kl(&analysis_9x9(0, 0.0, &cands, Some(policy))).map_err(|e| e.to_string())?;
        let diff = (restricted - brute_force_kl(&full, &visits).max(0.0)).abs();
        ensure!(diff < 1e-9, "case {case}: differs by {diff}");
        worst = worst.max(diff);
    }
    Ok(format!("100 full-support cases, largest difference {worst:.2e}"))
}

fn stub_analysis(spec: &SynthSpec, visits: u32) -> Result<(Vec<Move>, Vec<TurnAnalysis>), String> {
    let config = StubConfig::default();
    let record = generate(&config, spec).map_err(|e| e.to_string())?;
    let handle = stub::stub_engine(config, "stub");
    let opts = AnalyzeOptions { max_visits: visits, include_final: true, ..AnalyzeOptions::default() };
    let game = analyze_game(&handle, &record, &opts, None).map_err(|e| e.to_string());
    handle.shutdown();
    let game = game?;
    Ok((game.replay.moves, game.analyses))
}

fn criterion_3() -> Check {
    let mut detail = Vec::new();
    for (name, spec) in [
        ("perfect", SynthSpec::perfect_vs_human(PERFECT_FIXTURE_SEED)),
        ("human", SynthSpec::human_vs_human(kifu_core::synth::HUMAN_FIXTURE_SEED)),
    ] {
        let (moves, analyses) = stub_analysis(&spec, 100)?;
        let (metrics, _) = turn_metrics(&moves, &analyses, TurnMetricsOptions::default()).map_err(|e| e.to_string())?;
        let sum: f64 = metrics.iter().map(|m| m.black_delta.unwrap_or(f64::NAN)).sum();
        let expected = analyses.last().unwrap().root_score_mean - analyses[0].root_score_mean;
        let err = (sum - expected).abs();
        ensure!(err < 1e-9, "{name}: sum {sum} vs {expected}");
        let black: f64 = metrics.iter().filter(|m| m.mover == Color::Black).filter_map(|m| m.effect).sum();
        let white: f64 = metrics.iter().filter(|m| m.mover == Color::White).filter_map(|m| m.effect).sum();
        ensure!((black - white - expected).abs() < 1e-9, "{name}: effect sums do not telescope");
        detail.push(format!("{name} {} moves, error {err:.1e}", moves.len()));
    }
    Ok(detail.join("; "))
}

/// Writes 9x9 synthetic games of the given lengths into `dir/games`.
fn corpus(dir: &Path, lengths: &[usize]) -> Result<(), String> {
    let games = dir.join("games");
    fs::create_dir_all(&games).map_err(|e| e.to_string())?;
    for (i, &plies) in lengths.iter().enumerate() {
        let spec = SynthSpec { size: 9, plies, ..SynthSpec::human_vs_human(i as u64) };
        let record = generate(&StubConfig::default(), &spec).map_err(|e| e.to_string())?;
        ensure!(record.moves.len() == plies, "game {i} stopped at {} moves", record.moves.len());
        fs::write(games.join(format!("g{i}.sgf")), write_sgf(&record)).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn criterion_4() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    corpus(tmp.path(), &[10, 15, 20, 25])?;
    run_ok(
        tmp.path(),
        &[
            "--visits", "50", "strength", "games",
            "--network", "always=stub",
            "--network", "never=stub:agreement=never",
            "--network", "every3=stub:agreement=every-3",
        ],
    )?;
    // Positions exclude each game's final position: 10 + 15 + 20 + 25.
    // `every-3` agrees on turns 0, 3, 6, ..: 4 + 5 + 7 + 9 = 25.
    let expected = [("always", 70, 70), ("never", 0, 70), ("every3", 25, 70)];
    let mut rdr = csv::Reader::from_path(tmp.path().join("kifu-out/strength.csv")).map_err(|e| e.to_string())?;
    let rows: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    ensure!(rows.len() == 3, "{} rows", rows.len());
    for (row, (name, hits, positions)) in rows.iter().zip(expected) {
        let got_hits: usize = row[1].parse().map_err(|_| "bad hits")?;
        let got_pos: usize = row[2].parse().map_err(|_| "bad positions")?;
        let rate: f64 = row[3].parse().map_err(|_| "bad rate")?;
        ensure!(&row[0] == name, "row {:?} where {name} expected", &row[0]);
        ensure!((got_hits, got_pos) == (hits, positions), "{name}: {got_hits}/{got_pos}, expected {hits}/{positions}");
        let want = format!("{:.4}", got_hits as f64 / got_pos as f64);
        ensure!(format!("{rate:.4}") == want, "{name}: rate {rate} vs {want}");
    }
    Ok("always 70/70, never 0/70, every-3 25/70; rates match to 4 places".into())
}

const VICTIM_MOVES: usize = 30;
const VICTIM_TURN: usize = 5;

fn criterion_5() -> Check {
    let config = StubConfig::default();
    let mut records = Vec::new();
    for plies in [20, 30, 40] {
        let spec = SynthSpec { size: 9, plies, ..SynthSpec::perfect_vs_human(plies as u64) };
        records.push(generate(&config, &spec).map_err(|e| e.to_string())?);
    }
    let opts = AnalyzeOptions { max_visits: 50, include_final: true, ..AnalyzeOptions::default() };

    // Recorded transcript: all responses, shuffled across queries, with one
    // response replaced by a malformed line.
    let (query_rx, query_tx) = std::io::pipe().map_err(|e| e.to_string())?;
    let (resp_rx, mut resp_tx) = std::io::pipe().map_err(|e| e.to_string())?;
    let transcript = Arc::new(Mutex::new(Vec::<String>::new()));
    let recorded = transcript.clone();
    let engine_config = config.clone();
    let expected = records.len();
    thread::spawn(move || {
        let mut lines = BufReader::new(query_rx).lines();
        let mut out = Vec::new();
        for _ in 0..expected {
            let Some(Ok(line)) = lines.next() else { return };
            let query: serde_json::Value = serde_json::from_str(&line).unwrap_or_default();
            let id = query["id"].as_str().unwrap_or_default().to_string();
            let victim = query["moves"].as_array().map(Vec::len) == Some(VICTIM_MOVES);
            for r in stub::respond(&engine_config, &line) {
                let v: serde_json::Value = serde_json::from_str(&r).unwrap_or_default();
                if victim && v["turnNumber"] == VICTIM_TURN {
                    out.push(format!(r#"{{"id":"{id}","turnNumber":"five","rootInfo":{{}}}}"#));
                } else {
                    out.push(r);
                }
            }
        }
        out.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
        for l in &out {
            let _ = writeln!(resp_tx, "{l}");
        }
        let _ = resp_tx.flush();
        *recorded.lock().unwrap() = out;
        for _ in lines {}
    });
    let handle = EngineHandle::from_io(
        BufReader::new(resp_rx),
        query_tx,
        EngineConfig {
            network: "stub".into(),
            response_timeout: Some(Duration::from_secs(30)),
            error_grace: Duration::from_millis(300),
            ..EngineConfig::default()
        },
    );
    let cache_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cache = AnalysisCache::new(cache_dir.path());
    let results: Vec<Result<_, EngineError>> = thread::scope(|s| {
        let jobs: Vec<_> = records
            .iter()
            .map(|r| {
                let (h, c, o) = (handle.clone(), &cache, &opts);
                s.spawn(move || analyze_game(&h, r, o, Some(c)))
            })
            .collect();
        jobs.into_iter().map(|j| j.join().expect("worker")).collect()
    });
    let errors = handle.protocol_errors();
    handle.shutdown();

    let reference = stub::stub_engine(config, "stub");
    let mut matched = 0;
    for (record, result) in records.iter().zip(results) {
        let truth = analyze_game(&reference, record, &opts, None).map_err(|e| e.to_string())?.analyses;
        if record.moves.len() == VICTIM_MOVES {
            ensure!(
                matches!(&result, Err(EngineError::ProtocolError { .. })),
                "victim game: expected a protocol error, got {:?}",
                result.as_ref().map(|_| ())
            );
            let entry = files_under(cache_dir.path())
                .into_iter()
                .map(|p| fs::read_to_string(p).unwrap_or_default())
                .find(|s| s.lines().next().is_some_and(|l| l.contains("\"complete\":false")))
                .ok_or("no partial cache entry")?;
            let salvaged: Vec<TurnAnalysis> =
                entry.lines().skip(1).map(|l| serde_json::from_str(l).map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
            ensure!(salvaged.len() == VICTIM_MOVES, "salvaged {} turns", salvaged.len());
            for a in &salvaged {
                ensure!(truth.get(a.turn_index) == Some(a), "salvaged turn {} does not match", a.turn_index);
            }
            matched += salvaged.len();
        } else {
            let got = result.map_err(|e| e.to_string())?;
            ensure!(got.analyses == truth, "{}-move game mismatched", record.moves.len());
            matched += got.analyses.len();
        }
    }
    reference.shutdown();
    ensure!(errors.len() == 1, "{} protocol errors", errors.len());
    let lines = transcript.lock().unwrap().len();
    ensure!(matched + 1 == lines, "{matched} matched of {lines} lines");
    Ok(format!("{matched} of {lines} shuffled responses matched by id, 1 protocol error, {VICTIM_MOVES} turns salvaged"))
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace(']', "\\]")
}

/// One generated SGF with comments, escapes, setup, passes and variations.
fn sgf_case(rng: &mut ChaCha8Rng, index: usize) -> (String, Vec<Move>) {
    let size = *[9u8, 13, 19].choose(rng).unwrap();
    let mut board = BoardState::new(size).unwrap();
    let mut text = format!("(;GM[1]FF[4]SZ[{size}]KM[6.5]PB[{}]PW[w]", escape(&format!("b]{index}\\")));
    if index % 5 == 0 {
        let stones = [Point::new(2, 2), Point::new(size - 3, size - 3)];
        text.push_str("HA[2]AB");
        for p in stones {
            let _ = write!(text, "[{}]", to_sgf_coord(MoveKind::Play(p)));
        }
        board = board.with_setup(&stones.map(|p| (Color::Black, p))).unwrap();
        board.set_to_move(Color::White);
    }
    if index % 3 == 1 {
        text.push_str("C[note \\] with\nnewline \\\\]");
    }
    let mut moves = Vec::new();
    let mut split = None;
    for i in 0..rng.random_range(0..100) {
        let color = board.to_move();
        let mut mv = Move::pass(color);
        if !rng.random_bool(0.03) {
            for _ in 0..40 {
                let p = Point::new(rng.random_range(0..size), rng.random_range(0..size));
                if board.check(Move::play(color, p)).is_ok() {
                    mv = Move::play(color, p);
                    break;
                }
            }
        }
        let next = board.apply_move(mv).unwrap();
        if next.is_over() {
            break;
        }
        board = next;
        let _ = write!(text, ";{}[{}]", color.letter(), to_sgf_coord(mv.kind));
        moves.push(mv);
        if i == 8 && index % 2 == 0 {
            split = Some(text.len());
        }
    }
    if let Some(at) = split.filter(|&at| at < text.len()) {
        let tail = text.split_off(at);
        let _ = write!(text, "({tail})(;B[aa]C[side];W[ba])");
    }
    text.push(')');
    (text, moves)
}

fn criterion_6() -> Check {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut expected = Vec::new();
    for i in 0..50 {
        let (text, moves) = sgf_case(&mut rng, i);
        fs::write(dir.path().join(format!("{i:02}.sgf")), &text).map_err(|e| e.to_string())?;
        expected.push(moves);
    }
    let files = files_under(dir.path());
    ensure!(files.len() == 50, "{} files", files.len());
    for (path, moves) in files.iter().zip(&expected) {
        let bytes = fs::read(path).map_err(|e| e.to_string())?;
        let (tree, _) = parse_collection(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
        let (again, _) = parse_collection(&write_collection(&tree)).map_err(|e| e.to_string())?;
        ensure!(again == tree, "{}: tree changed on round trip", path.display());
        let (record, _) = parse_sgf(&bytes).map_err(|e| e.to_string())?;
        ensure!(&record.moves == moves, "{}: main line differs", path.display());
        let (record2, _) = parse_sgf(&write_sgf(&record)).map_err(|e| e.to_string())?;
        ensure!(record2 == record, "{}: record changed on round trip", path.display());
    }

    let seeds: Vec<Vec<u8>> = files.iter().take(10).map(|p| fs::read(p).unwrap_or_default()).collect();
    let alphabet = b"();[]\\ABCWKMSZabcdst0123456789 \n:";
    let (mut ok, mut errs) = (0, 0);
    for i in 0..10_000 {
        let input: Vec<u8> = match i % 3 {
            0 => {
                let mut v = vec![0u8; rng.random_range(0..200)];
                rng.fill_bytes(&mut v);
                v
            }
            1 => (0..rng.random_range(0..300)).map(|_| *alphabet.choose(&mut rng).unwrap()).collect(),
            _ => {
                let mut v = seeds.choose(&mut rng).unwrap().clone();
                for _ in 0..rng.random_range(1..6) {
                    if v.is_empty() {
                        break;
                    }
                    let at = rng.random_range(0..v.len());
                    match rng.random_range(0..3) {
                        0 => v[at] = *alphabet.choose(&mut rng).unwrap(),
                        1 => {
                            v.remove(at);
                        }
                        _ => v.truncate(at),
                    }
                }
                v
            }
        };
        match catch_unwind(|| parse_sgf(&input)) {
            Ok(Ok(_)) => ok += 1,
            Ok(Err(SgfError::Parse { .. } | SgfError::Invalid(_))) => errs += 1,
            Err(_) => return Err(format!("parser panicked on input {i}: {:?}", String::from_utf8_lossy(&input))),
        }
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("50 files round-trip; fuzz 10000 inputs: {ok} parsed, {errs} errors, no panics; {elapsed:.2?}"))
}

fn diagram(rows: &[&str], to_move: Color) -> BoardState {
    let mut setup = Vec::new();
    for (r, line) in rows.iter().enumerate() {
        for (c, ch) in line.chars().filter(|c| !c.is_whitespace()).enumerate() {
            let p = Point::new(c as u8, r as u8);
            match ch {
                'X' => setup.push((Color::Black, p)),
                'O' => setup.push((Color::White, p)),
                _ => {}
            }
        }
    }
    let mut b = BoardState::new(9).unwrap().with_setup(&setup).unwrap();
    b.set_to_move(to_move);
    b
}

fn criterion_7() -> Check {
    let at = Point::new;
    let err = |r: Result<BoardState, kifu_core::board::BoardError>| r.err().and_then(|e| e.reason());

    let b = diagram(&["O X", ". ."], Color::Black).apply_move(Move::play(Color::Black, at(0, 1))).map_err(|e| e.to_string())?;
    ensure!(b.stone(at(0, 0)) == Stone::Empty && b.captures(Color::Black) == 1, "corner capture");

    let b = diagram(&[". . . X X .", ". . X O O X", ". . . X . ."], Color::Black)
        .apply_move(Move::play(Color::Black, at(4, 2)))
        .map_err(|e| e.to_string())?;
    ensure!(b.count(Stone::White) == 0 && b.captures(Color::Black) == 2, "multi-stone capture");

    let b = diagram(&[". X", "X ."], Color::White);
    ensure!(err(b.apply_move(Move::play(Color::White, at(0, 0)))) == Some(IllegalReason::Suicide), "single-stone suicide");
    let b = diagram(&["O . X", "O X .", "X . ."], Color::White);
    ensure!(err(b.apply_move(Move::play(Color::White, at(1, 0)))) == Some(IllegalReason::Suicide), "multi-stone suicide");

    let b = diagram(&[". . . X O .", ". . X O . O", ". . . X O ."], Color::Black);
    let b = b.apply_move(Move::play(Color::Black, at(4, 1))).map_err(|e| e.to_string())?;
    ensure!(b.ko_point() == Some(at(3, 1)), "ko point after the take: {:?}", b.ko_point());
    ensure!(err(b.apply_move(Move::play(Color::White, at(3, 1)))) == Some(IllegalReason::KoViolation), "ko retake allowed");
    let b = b.apply_move(Move::play(Color::White, at(8, 8))).map_err(|e| e.to_string())?;
    let b = b.apply_move(Move::play(Color::Black, at(8, 0))).map_err(|e| e.to_string())?;
    ensure!(b.apply_move(Move::play(Color::White, at(3, 1))).is_ok(), "retake after exchange refused");

    let b = BoardState::new(9).map_err(|e| e.to_string())?;
    let b = b.apply_move(Move::pass(Color::Black)).map_err(|e| e.to_string())?;
    ensure!(!b.is_over(), "one pass ended the game");
    let b = b.apply_move(Move::pass(Color::White)).map_err(|e| e.to_string())?;
    ensure!(b.is_over(), "pass-pass did not end the game");
    Ok("corner capture, multi-stone capture, suicide, simple ko, pass-pass end".into())
}

fn criterion_8() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    corpus(tmp.path(), &[12])?;
    run_ok(tmp.path(), &["--stub=noise", "calibrate", "games/g0.sgf", "--turn", "6", "--grid", "10,100,1000", "--repeats", "7"])?;
    let mut rdr = csv::Reader::from_path(tmp.path().join("kifu-out/calibration.csv")).map_err(|e| e.to_string())?;
    let rows: Vec<csv::StringRecord> = rdr.records().collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    ensure!(rows.len() == 21, "{} CSV rows", rows.len());
    for visits in ["10", "100", "1000"] {
        let n = rows.iter().filter(|r| &r[0] == visits).count();
        ensure!(n == 7, "{n} runs at {visits} visits");
    }
    let spec: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("kifu-out/calibration.vl.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let n = spec["data"]["values"].as_array().map_or(0, Vec::len);
    ensure!(n == 21, "{n} rows in the plot spec");
    Ok("21 CSV rows (3 visit levels x 7 runs), 21 inline spec rows".into())
}

fn criterion_9() -> Check {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_ok(tmp.path(), &["synth", "--kind", "perfect", "games/perfect.sgf"])?;
    run_ok(tmp.path(), &["synth", "--kind", "human", "games/human.sgf"])?;
    run_ok(tmp.path(), &["--stub", "report", "games", "--format", "json"])?;
    let elapsed = start.elapsed();
    let read = |name: &str| -> Result<serde_json::Value, String> {
        let bytes = fs::read(tmp.path().join("kifu-out").join(name).join("report.json")).map_err(|e| e.to_string())?;
        serde_json::from_slice(&bytes).map_err(|e| e.to_string())
    };
    let perfect = read("perfect")?;
    let human = read("human")?;
    let level = |r: &serde_json::Value, i: usize| r["players"][i]["level"].as_str().unwrap_or("?").to_string();
    ensure!(level(&perfect, 0) == "strong", "perfect player rated {}", level(&perfect, 0));
    ensure!(level(&human, 0) == "none" && level(&human, 1) == "none", "humans rated {} / {}", level(&human, 0), level(&human, 1));
    let avg = |i: usize| human["players"][i]["summary"]["averageEffect"].as_f64().unwrap_or(0.0);
    ensure!(avg(0) < -0.5 && avg(1) < -0.5, "human average effects {} / {}", avg(0), avg(1));
    let winrates: Vec<f64> =
        human["series"]["winrate"].as_array().ok_or("no series")?.iter().filter_map(|w| w["blackWinrate"].as_f64()).collect();
    let changes = winrates.windows(2).filter(|w| (w[0] - 0.5) * (w[1] - 0.5) < 0.0).count();
    ensure!(changes >= 2, "{changes} lead changes");

    // Same seed, same verdicts and bytes.
    let first = fs::read(tmp.path().join("kifu-out/perfect/report.json")).map_err(|e| e.to_string())?;
    run_ok(tmp.path(), &["--stub", "report", "games", "--format", "json"])?;
    let second = fs::read(tmp.path().join("kifu-out/perfect/report.json")).map_err(|e| e.to_string())?;
    ensure!(first == second, "rerun changed the report");
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!(
        "perfect: strong; human: none/none (average effects {:.3} / {:.3}, {changes} lead changes); {elapsed:.2?}",
        avg(0),
        avg(1)
    ))
}

fn criterion_10() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    corpus(tmp.path(), &[22, 26, 30])?;
    for run in ["a", "b"] {
        let cache = format!("cache-{run}");
        let out = |sub: &str| format!("{run}/{sub}");
        run_ok(tmp.path(), &["--stub", "--visits", "60", "--cache-dir", &cache, "analyze", "games"])?;
        run_ok(tmp.path(), &["--stub", "--visits", "60", "--cache-dir", &cache, "--out", &out("report"), "report", "games"])?;
        run_ok(
            tmp.path(),
            &["--visits", "60", "--seed", "9", "--cache-dir", &cache, "--out", &out("strength"), "strength", "games",
              "--sample", "--network", "x=stub", "--network", "y=stub:shape=one-hot"],
        )?;
        run_ok(tmp.path(), &["--stub=noise", "--seed", "3", "--out", &out("calibrate"), "calibrate", "games/g0.sgf", "--turn", "4"])?;
    }
    let mut compared = 0;
    for (sub_a, sub_b) in [("a", "b"), ("cache-a", "cache-b")] {
        let a = files_under(&tmp.path().join(sub_a));
        let b = files_under(&tmp.path().join(sub_b));
        ensure!(a.len() == b.len() && !a.is_empty(), "{sub_a}: {} files vs {}", a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            let rel_x = x.strip_prefix(tmp.path().join(sub_a)).unwrap_or(x);
            let rel_y = y.strip_prefix(tmp.path().join(sub_b)).unwrap_or(y);
            ensure!(rel_x == rel_y, "{} vs {}", rel_x.display(), rel_y.display());
            ensure!(fs::read(x).ok() == fs::read(y).ok(), "{} differs between runs", rel_x.display());
            compared += 1;
        }
    }
    Ok(format!("{compared} files byte-identical across reruns (reports, plot specs, CSVs, cache)"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("KL kernel", criterion_1),
        ("oracle equivalence", criterion_2),
        ("telescoping effects", criterion_3),
        ("hit rate arithmetic", criterion_4),
        ("protocol conformance", criterion_5),
        ("SGF robustness", criterion_6),
        ("rules engine", criterion_7),
        ("calibration shape", criterion_8),
        ("end-to-end discrimination", criterion_9),
        ("determinism", criterion_10),
    ];
    // Keep panics inside a criterion from printing backtraces over the report.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match result {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
