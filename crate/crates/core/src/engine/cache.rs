use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EngineError, TurnAnalysis};

pub const CACHE_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CacheKey {
    /// Content hash of the analyzed game (see [`super::game_hash`]).
    pub game_hash: String,
    pub network: String,
    pub max_visits: u32,
}

/// First line of every sidecar file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CacheMeta {
    pub schema_version: u32,
    pub engine: String,
    pub network: String,
    pub visits: u32,
    pub game_hash: String,
    /// Which engine field was read as the score mean.
    pub score_field: String,
    pub include_policy: bool,
    /// Turn indices the game needed analyzed.
    pub expected_turns: usize,
    /// False when the file holds salvaged partial results.
    pub complete: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CacheEntry {
    pub meta: CacheMeta,
    pub analyses: Vec<TurnAnalysis>,
}

/// Content-addressed JSON-lines store:
/// `<root>/<hash[..2]>/<hash>/<network>-v<visits>.jsonl`.
#[derive(Clone, Debug)]
pub struct AnalysisCache {
    root: PathBuf,
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> EngineError {
    EngineError::Cache(format!("{}: {e}", path.display()))
}

impl AnalysisCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        AnalysisCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        let prefix: String = key.game_hash.chars().take(2).collect();
        // The sanitized label can collide ("a/b" vs "a_b"); a short digest of
        // the exact label keeps keys distinct.
        let label_digest = &super::analyze::digest_hex(key.network.as_bytes())[..8];
        self.root
            .join(prefix)
            .join(&key.game_hash)
            .join(format!("{}-{}-v{}.jsonl", sanitize(&key.network), label_digest, key.max_visits))
    }

    pub fn store(&self, key: &CacheKey, entry: &CacheEntry) -> Result<PathBuf, EngineError> {
        let path = self.path_for(key);
        let dir = path.parent().expect("cache path has a parent");
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut buf = Vec::new();
        serde_json::to_writer(&mut buf, &entry.meta).map_err(|e| io_err(&path, e))?;
        buf.push(b'\n');
        for a in &entry.analyses {
            serde_json::to_writer(&mut buf, a).map_err(|e| io_err(&path, e))?;
            buf.push(b'\n');
        }
        let tmp = path.with_extension("jsonl.tmp");
        let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        f.write_all(&buf).map_err(|e| io_err(&tmp, e))?;
        f.sync_all().map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    /// Reads an entry, complete or not. `Ok(None)` when absent.
    pub fn load(&self, key: &CacheKey) -> Result<Option<CacheEntry>, EngineError> {
        let path = self.path_for(key);
        let f = match fs::File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(io_err(&path, e)),
        };
        let mut lines = BufReader::new(f).lines();
        let first = match lines.next() {
            Some(l) => l.map_err(|e| io_err(&path, e))?,
            None => return Err(io_err(&path, "empty cache file")),
        };
        let meta: CacheMeta = serde_json::from_str(&first).map_err(|e| io_err(&path, e))?;
        if meta.schema_version != CACHE_SCHEMA_VERSION {
            return Err(io_err(&path, format!("unsupported schema version {}", meta.schema_version)));
        }
        let mut analyses = Vec::new();
        for line in lines {
            let line = line.map_err(|e| io_err(&path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            analyses.push(serde_json::from_str(&line).map_err(|e| io_err(&path, e))?);
        }
        Ok(Some(CacheEntry { meta, analyses }))
    }

    /// Every sidecar file under the root, sorted.
    pub fn files(&self) -> Vec<PathBuf> {
        let mut out = Vec::new();
        let mut stack = vec![self.root.clone()];
        while let Some(dir) = stack.pop() {
            let Ok(rd) = fs::read_dir(&dir) else { continue };
            for e in rd.flatten() {
                let p = e.path();
                if p.is_dir() {
                    stack.push(p);
                } else if p.extension().is_some_and(|x| x == "jsonl") {
                    out.push(p);
                }
            }
        }
        out.sort();
        out
    }
}
