//! On-disk cache of built characteristic functions, one file per situation
//! fingerprint. A stored table is reused only when it was built with the
//! same solver settings.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chaincore::{CharacteristicFunction, Situation, SolverConfig, Table};

pub const DEFAULT_DIR: &str = ".chaincore-cache";

pub struct Cache {
    dir: PathBuf,
}

/// Where a characteristic function came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Source {
    Built,
    Cached,
}

impl Cache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    fn path(&self, fingerprint: &str) -> PathBuf {
        self.dir.join(format!("{fingerprint}.json"))
    }

    /// A matching stored table, if any. Unreadable or stale entries are
    /// reported and ignored.
    pub fn load(&self, situation: &Situation, config: &SolverConfig) -> Option<CharacteristicFunction> {
        let path = self.path(&situation.fingerprint());
        let text = fs::read_to_string(&path).ok()?;
        let table: Table = match serde_json::from_str(&text) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("warning: ignoring unreadable cache entry {}: {e}", path.display());
                return None;
            }
        };
        if table.solver != *config {
            return None;
        }
        match CharacteristicFunction::from_table(situation, table) {
            Ok(cf) => Some(cf),
            Err(e) => {
                eprintln!("warning: ignoring cache entry {}: {e}", path.display());
                None
            }
        }
    }

    pub fn store(&self, cf: &CharacteristicFunction) -> Result<()> {
        fs::create_dir_all(&self.dir).with_context(|| format!("creating cache directory {}", self.dir.display()))?;
        let path = self.path(cf.fingerprint());
        // sorted keys, full precision
        let text = serde_json::to_string(&serde_json::to_value(cf.table())?)?;
        write_atomically(&path, text.as_bytes())
    }
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("moving cache entry into {}", path.display()))?;
    Ok(())
}

/// Loads from `cache` when possible, otherwise builds (and stores).
pub fn obtain(
    situation: &Situation,
    config: &SolverConfig,
    cache: Option<&Cache>,
) -> chaincore::Result<(CharacteristicFunction, Source)> {
    if let Some(cf) = cache.and_then(|c| c.load(situation, config)) {
        return Ok((cf, Source::Cached));
    }
    let cf = CharacteristicFunction::build(situation, config)?;
    if let Some(c) = cache {
        if let Err(e) = c.store(&cf) {
            eprintln!("warning: could not write cache: {e:#}");
        }
    }
    Ok((cf, Source::Built))
}
