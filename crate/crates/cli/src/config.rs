use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use kifu_core::engine::stub::{stub_engine, StubConfig};
use kifu_core::engine::{
    AnalysisCache, AnalyzeOptions, EngineConfig, EngineHandle, ScoreField, DEFAULT_RESPONSE_TIMEOUT,
};
use kifu_core::report::Thresholds;
use serde::Deserialize;

use crate::GlobalArgs;

/// Contents of a `--config` file. Every key is optional; command-line flags
/// take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub engine: Option<String>,
    pub network_label: Option<String>,
    pub visits: Option<u32>,
    pub rules: Option<String>,
    pub komi_override: Option<f64>,
    pub cache_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub stub: Option<String>,
    pub leniency: Option<bool>,
    pub workers: Option<usize>,
    pub score_field: Option<String>,
    pub timeout_secs: Option<u64>,
    pub thresholds: Option<Thresholds>,
    pub thresholds_file: Option<PathBuf>,
}

/// Where analyses come from.
#[derive(Clone, Debug)]
pub enum EngineSpec {
    Command { program: String, args: Vec<String> },
    Stub(StubConfig),
}

impl EngineSpec {
    /// `stub[:options]` selects the built-in stub; anything else is a
    /// whitespace-separated command line.
    pub fn parse(s: &str, seed: u64) -> Result<Self> {
        let s = s.trim();
        if s == "stub" || s.starts_with("stub:") {
            let opts = s.strip_prefix("stub").unwrap_or("").trim_start_matches(':');
            let cfg = StubConfig { seed, ..StubConfig::default() }.with_options(opts).map_err(anyhow::Error::msg)?;
            return Ok(EngineSpec::Stub(cfg));
        }
        let mut parts = s.split_whitespace().map(str::to_string);
        let Some(program) = parts.next() else { bail!("empty engine command") };
        Ok(EngineSpec::Command { program, args: parts.collect() })
    }

    pub fn start(&self, network: &str, timeout: Duration) -> Result<EngineHandle> {
        match self {
            EngineSpec::Stub(cfg) => Ok(stub_engine(cfg.clone(), network)),
            EngineSpec::Command { program, args } => {
                let config = EngineConfig {
                    engine_name: program.clone(),
                    network: network.to_string(),
                    response_timeout: Some(timeout),
                    ..EngineConfig::default()
                };
                EngineHandle::start(program, args, config).with_context(|| format!("starting engine {program}"))
            }
        }
    }
}

/// Effective settings after merging defaults, the config file and flags.
#[derive(Clone, Debug)]
pub struct Settings {
    pub engine: Option<EngineSpec>,
    pub network_label: String,
    pub visits: u32,
    pub rules: String,
    pub komi_override: Option<f64>,
    pub cache_dir: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub leniency: bool,
    pub workers: usize,
    pub score_field: ScoreField,
    pub timeout: Duration,
    pub thresholds: Thresholds,
}

fn read_thresholds(path: &Path) -> Result<Thresholds> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing thresholds in {}", path.display()))
}

impl Settings {
    pub fn resolve(g: &GlobalArgs) -> Result<Self> {
        let file = match &g.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                toml::from_str::<FileConfig>(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => FileConfig::default(),
        };
        let seed = g.seed.or(file.seed).unwrap_or(0);

        let engine = if g.stub.is_some() {
            let opts = g.stub.as_deref().unwrap_or("");
            Some(EngineSpec::parse(&format!("stub:{opts}"), seed)?)
        } else if let Some(cmd) = g.engine.as_deref().or(file.engine.as_deref()) {
            Some(EngineSpec::parse(cmd, seed)?)
        } else if let Some(opts) = &file.stub {
            Some(EngineSpec::parse(&format!("stub:{opts}"), seed)?)
        } else {
            None
        };

        let default_label = match &engine {
            Some(EngineSpec::Stub(_)) => "stub",
            _ => "default",
        };
        let visits = g.visits.or(file.visits).unwrap_or(400);
        if visits == 0 {
            bail!("--visits must be at least 1");
        }
        let score_name = g.score_field.clone().or(file.score_field).unwrap_or_else(|| "scoreLead".into());
        let score_field =
            ScoreField::parse(&score_name).with_context(|| format!("unknown score field {score_name:?}"))?;

        let thresholds = if let Some(path) = g.thresholds.as_ref().or(file.thresholds_file.as_ref()) {
            read_thresholds(path)?
        } else {
            file.thresholds.unwrap_or_default()
        };

        Ok(Settings {
            engine,
            network_label: g.network_label.clone().or(file.network_label).unwrap_or_else(|| default_label.into()),
            visits,
            rules: g.rules.clone().or(file.rules).unwrap_or_else(|| "tromp-taylor".into()),
            komi_override: g.komi_override.or(file.komi_override),
            cache_dir: g.cache_dir.clone().or(file.cache_dir).unwrap_or_else(|| PathBuf::from(".kifu-cache")),
            out: g.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("kifu-out")),
            seed,
            leniency: g.leniency || file.leniency.unwrap_or(false),
            workers: g.workers.or(file.workers).unwrap_or(4).max(1),
            score_field,
            timeout: g
                .timeout_secs
                .or(file.timeout_secs)
                .map(Duration::from_secs)
                .unwrap_or(DEFAULT_RESPONSE_TIMEOUT),
            thresholds,
        })
    }

    pub fn analyze_options(&self) -> AnalyzeOptions {
        AnalyzeOptions {
            max_visits: self.visits,
            include_policy: true,
            include_final: true,
            rules: self.rules.clone(),
            komi_override: self.komi_override,
            score_field: self.score_field,
            lenient: self.leniency,
            use_cache: true,
        }
    }

    pub fn cache(&self) -> AnalysisCache {
        AnalysisCache::new(&self.cache_dir)
    }

    pub fn start_engine(&self) -> Result<Option<EngineHandle>> {
        self.engine.as_ref().map(|e| e.start(&self.network_label, self.timeout)).transpose()
    }
}
