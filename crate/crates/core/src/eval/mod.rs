//! Recall@k against an oracle of real extract-method refactorings.

mod oracle;
mod stats;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::source::LineRange;

pub use oracle::{load_oracle, parse_oracle, LoadError, LocSummary, OracleEntry, OracleLoad, ResolvedEntry};
pub use stats::{repeated_stats, RunStats, StatsError};

/// How many lines of difference a host of `host_loc` lines tolerates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Allowance {
    #[default]
    Floor,
    Round,
    Ceil,
}

impl Allowance {
    pub fn lines(self, tolerance: f64, host_loc: u32) -> usize {
        let x = tolerance * f64::from(host_loc);
        // absorb representation error so 0.03 * 200 counts as 6
        let v = match self {
            Allowance::Floor => (x + 1e-9).floor(),
            Allowance::Round => x.round(),
            Allowance::Ceil => (x - 1e-9).ceil(),
        };
        v.max(0.0) as usize
    }
}

/// Line-set match: the symmetric difference stays within the allowance.
pub fn matches_lines(
    suggested: &BTreeSet<u32>,
    oracle: &BTreeSet<u32>,
    host_loc: u32,
    tolerance: f64,
    allowance: Allowance,
) -> bool {
    suggested.symmetric_difference(oracle).count() <= allowance.lines(tolerance, host_loc)
}

/// [`matches_lines`] over every line of the two ranges.
pub fn matches(suggested: LineRange, oracle: LineRange, host_loc: u32, tolerance: f64) -> bool {
    let a: BTreeSet<u32> = suggested.lines().collect();
    let b: BTreeSet<u32> = oracle.lines().collect();
    matches_lines(&a, &b, host_loc, tolerance, Allowance::Floor)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub k: usize,
    pub tolerance: f64,
    pub allowance: Allowance,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { k: 5, tolerance: 0.03, allowance: Allowance::Floor }
    }
}

/// One ranked suggestion as seen by the harness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedRange {
    pub start: u32,
    pub end: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl RankedRange {
    pub fn range(&self) -> LineRange {
        LineRange::new(self.start.min(self.end), self.start.max(self.end))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceOutput {
    /// Best first.
    pub ranked: Vec<RankedRange>,
    /// Why suggestions were dropped before ranking, for the report.
    pub trail: Vec<String>,
}

/// Where ranked suggestions for an oracle entry come from.
pub trait SuggestionSource: Sync {
    fn suggestions(&self, entry: &ResolvedEntry) -> Result<SourceOutput, String>;
}

/// Suggestions read from a dump file: one JSON object per line with the
/// entry id and its ranked ranges.
#[derive(Debug, Clone, Default)]
pub struct DumpSource {
    by_id: std::collections::HashMap<String, Vec<RankedRange>>,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct DumpLine {
    #[serde(deserialize_with = "oracle::id_string")]
    id: String,
    suggestions: Vec<RankedRange>,
}

impl DumpSource {
    pub fn parse(text: &str) -> Self {
        let mut out = DumpSource::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<DumpLine>(line) {
                Ok(d) => {
                    out.by_id.insert(d.id, d.suggestions);
                }
                Err(e) => out.diagnostics.push(format!("dump line {}: {e}", i + 1)),
            }
        }
        out
    }

    pub fn load(path: &std::path::Path) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn from_map(by_id: std::collections::HashMap<String, Vec<RankedRange>>) -> Self {
        DumpSource { by_id, diagnostics: Vec::new() }
    }
}

impl SuggestionSource for DumpSource {
    fn suggestions(&self, entry: &ResolvedEntry) -> Result<SourceOutput, String> {
        Ok(SourceOutput { ranked: self.by_id.get(&entry.entry.id).cloned().unwrap_or_default(), trail: Vec::new() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    /// 1-based rank of the first matching suggestion within the top k.
    pub matched_rank: Option<usize>,
    pub considered: usize,
    pub trail: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub k: usize,
    pub tolerance: f64,
    pub verdicts: Vec<Verdict>,
    pub matched: usize,
    pub total: usize,
    pub recall: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<RunStats>,
}

fn statement_lines(entry: &ResolvedEntry, range: LineRange) -> BTreeSet<u32> {
    entry.model.body_bearing_lines().iter().copied().filter(|l| range.contains_line(*l)).collect()
}

/// Match every entry's top-k suggestions against its oracle range.
///
/// A failing source counts as a miss for that entry only.
pub fn evaluate(entries: &[ResolvedEntry], source: &dyn SuggestionSource, opts: &EvalOptions) -> EvalReport {
    let workers = std::thread::available_parallelism().map_or(4, |n| n.get()).min(entries.len()).max(1);
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Verdict>>> = Mutex::new(vec![None; entries.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(e) = entries.get(i) else { break };
                let v = judge(e, source, opts);
                slots.lock().unwrap()[i] = Some(v);
            });
        }
    });
    let verdicts: Vec<Verdict> = slots.into_inner().unwrap().into_iter().map(|v| v.expect("judged")).collect();
    let matched = verdicts.iter().filter(|v| v.matched_rank.is_some()).count();
    let total = verdicts.len();
    EvalReport {
        k: opts.k,
        tolerance: opts.tolerance,
        matched,
        total,
        recall: if total == 0 { 0.0 } else { matched as f64 / total as f64 },
        verdicts,
        stats: None,
    }
}

fn judge(entry: &ResolvedEntry, source: &dyn SuggestionSource, opts: &EvalOptions) -> Verdict {
    let id = entry.entry.id.clone();
    let out = match source.suggestions(entry) {
        Ok(out) => out,
        Err(e) => return Verdict { id, matched_rank: None, considered: 0, trail: Vec::new(), error: Some(e) },
    };
    let host_loc = entry.entry.host_range().len();
    let want = statement_lines(entry, entry.entry.extracted_range());
    let top: Vec<_> = out.ranked.iter().take(opts.k).collect();
    let matched_rank = top
        .iter()
        .position(|s| {
            let got = statement_lines(entry, s.range());
            matches_lines(&got, &want, host_loc, opts.tolerance, opts.allowance)
        })
        .map(|i| i + 1);
    Verdict { id, matched_rank, considered: top.len(), trail: out.trail, error: None }
}

impl EvalReport {
    /// Plain-text table for terminals.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let width = self.verdicts.iter().map(|v| v.id.len()).max().unwrap_or(2).max(2);
        let _ = writeln!(s, "{:<width$}  {:>5}  {:>10}  note", "id", "rank", "considered");
        for v in &self.verdicts {
            let rank = v.matched_rank.map_or("miss".to_owned(), |r| r.to_string());
            let note = match &v.error {
                Some(e) => format!("error: {e}"),
                None if v.trail.is_empty() => String::new(),
                None => v.trail.join("; "),
            };
            let _ = writeln!(s, "{:<width$}  {:>5}  {:>10}  {note}", v.id, rank, v.considered);
        }
        let _ = writeln!(
            s,
            "Recall@{} at tolerance {}: {}/{} = {:.4}",
            self.k, self.tolerance, self.matched, self.total, self.recall
        );
        if let Some(st) = &self.stats {
            let _ = writeln!(
                s,
                "runs={} mean={:.4} sd={:.4} t={} p={}{}",
                st.n,
                st.mean,
                st.sd,
                st.t,
                st.p,
                if st.degenerate { " (degenerate: zero variance)" } else { "" }
            );
        }
        s
    }
}
