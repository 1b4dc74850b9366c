use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::source::{locate_method, parse_unit, LineRange, MethodLocator, MethodModel, SourceUnit};

/// One historical refactoring. Line numbers refer to the file before it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleEntry {
    #[serde(deserialize_with = "id_string")]
    pub id: String,
    pub file: PathBuf,
    pub method_name: String,
    pub method_start: u32,
    pub method_end: u32,
    pub extracted_start: u32,
    pub extracted_end: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extracted_name: Option<String>,
}

impl OracleEntry {
    pub fn host_range(&self) -> LineRange {
        LineRange::new(self.method_start, self.method_end)
    }

    pub fn extracted_range(&self) -> LineRange {
        LineRange::new(self.extracted_start, self.extracted_end)
    }
}

/// Ids may be written as strings or numbers.
pub(super) fn id_string<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        S(String),
        N(serde_json::Number),
    }
    Ok(match Id::deserialize(d)? {
        Id::S(s) => s,
        Id::N(n) => n.to_string(),
    })
}

/// An entry whose host method was found.
#[derive(Debug, Clone)]
pub struct ResolvedEntry {
    pub entry: OracleEntry,
    pub path: PathBuf,
    pub model: MethodModel,
}

/// Host size statistics, in lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocSummary {
    pub min: u32,
    pub max: u32,
    pub mean: f64,
    pub median: f64,
}

impl LocSummary {
    pub fn of(locs: &[u32]) -> Option<LocSummary> {
        if locs.is_empty() {
            return None;
        }
        let mut v = locs.to_vec();
        v.sort_unstable();
        let n = v.len();
        let median = if n % 2 == 1 { f64::from(v[n / 2]) } else { (f64::from(v[n / 2 - 1]) + f64::from(v[n / 2])) / 2.0 };
        Some(LocSummary {
            min: v[0],
            max: v[n - 1],
            mean: v.iter().map(|&x| f64::from(x)).sum::<f64>() / n as f64,
            median,
        })
    }
}

impl std::fmt::Display for LocSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "host LOC min/max/mean/median = {}/{}/{:.1}/{}", self.min, self.max, self.mean, self.median)
    }
}

#[derive(Debug)]
pub struct OracleLoad {
    pub entries: Vec<ResolvedEntry>,
    /// One line per skipped or suspicious row.
    pub diagnostics: Vec<String>,
    pub loc: LocSummary,
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read oracle {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("no oracle entry could be resolved ({skipped} skipped)")]
    EmptyOracle { skipped: usize, diagnostics: Vec<String> },
}

/// Read a JSONL oracle. Relative `file` paths are taken from the oracle's
/// directory.
pub fn load_oracle(path: &Path) -> Result<OracleLoad, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_owned(), source })?;
    parse_oracle(&text, path.parent().unwrap_or(Path::new(".")))
}

/// [`load_oracle`] on text already in memory.
pub fn parse_oracle(text: &str, base: &Path) -> Result<OracleLoad, LoadError> {
    let mut diagnostics = Vec::new();
    let mut entries = Vec::new();
    let mut units: HashMap<PathBuf, Result<Arc<SourceUnit>, String>> = HashMap::new();
    let mut skipped = 0;

    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let entry: OracleEntry = match serde_json::from_str(line) {
            Ok(e) => e,
            Err(e) => {
                diagnostics.push(format!("line {lineno}: malformed entry: {e}"));
                skipped += 1;
                continue;
            }
        };
        match resolve(&entry, base, &mut units) {
            Ok((path, model)) => entries.push(ResolvedEntry { entry, path, model }),
            Err(why) => {
                diagnostics.push(format!("line {lineno} (id {}): {why}", entry.id));
                skipped += 1;
            }
        }
    }

    let locs: Vec<u32> = entries.iter().map(|e| e.entry.host_range().len()).collect();
    match LocSummary::of(&locs) {
        Some(loc) => Ok(OracleLoad { entries, diagnostics, loc }),
        None => Err(LoadError::EmptyOracle { skipped, diagnostics }),
    }
}

fn resolve(
    entry: &OracleEntry,
    base: &Path,
    units: &mut HashMap<PathBuf, Result<Arc<SourceUnit>, String>>,
) -> Result<(PathBuf, MethodModel), String> {
    let path = if entry.file.is_absolute() { entry.file.clone() } else { base.join(&entry.file) };
    let unit = units
        .entry(path.clone())
        .or_insert_with(|| {
            let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_unit(&text, &path).map(Arc::new).map_err(|e| e.to_string())
        })
        .clone()?;
    let host = entry.host_range();
    if host.start > host.end || entry.extracted_start > entry.extracted_end {
        return Err("inverted line range".into());
    }
    if !host.contains(&entry.extracted_range()) {
        return Err(format!("extracted range {} is outside the host {}", entry.extracted_range(), host));
    }
    let model = locate_method(&unit, &MethodLocator::Line(entry.method_start)).map_err(|e| e.to_string())?;
    if model.name != entry.method_name {
        return Err(format!("line {} is in `{}`, not `{}`", entry.method_start, model.name, entry.method_name));
    }
    Ok((path, model))
}
