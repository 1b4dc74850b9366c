//! End-to-end suggestion flow for one host method.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidates::{process, FilterOptions, Provenance, RawRange, RejectionReason, Suggestion, SuggestionState};
use crate::dataflow::{build_cfg, liveness};
use crate::eval::{RankedRange, ResolvedEntry, SourceOutput, SuggestionSource};
use crate::extractor::plan;
use crate::provider::{
    sample, CompletionRecord, CompletionRequest, PromptError, PromptTemplate, Provider, ProviderConfig, SampleError,
};
use crate::ranking::{aggregate, rank, RankedGroup};
use crate::source::{LineRange, MethodModel};

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub provider: ProviderConfig,
    pub template: PromptTemplate,
    pub top_n: usize,
    pub filter: FilterOptions,
    /// Jaccard threshold for merging overlapping groups; exact ranges only when `None`.
    pub overlap: Option<f64>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            provider: ProviderConfig::default(),
            template: PromptTemplate::default(),
            top_n: 3,
            filter: FilterOptions::default(),
            overlap: None,
        }
    }
}

/// A ranked group with what the new method would look like.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPreview {
    pub rank: usize,
    #[serde(flatten)]
    pub group: RankedGroup,
    /// Declaration of the new method, when a plan can be made.
    pub signature: Option<String>,
    pub call: Option<String>,
    pub plan_error: Option<String>,
}

/// A suggestion that did not make it, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrailEntry {
    pub suggestion: usize,
    pub iteration: u32,
    pub name: String,
    pub raw_range: RawRange,
    pub reason: RejectionReason,
    pub detail: String,
}

impl std::fmt::Display for TrailEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {} ({}): {}", self.name, self.raw_range, self.reason, self.detail)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub method: String,
    pub method_lines: LineRange,
    pub unit_digest: String,
    pub request_digest: String,
    pub records: Vec<CompletionRecord>,
    pub suggestions: Vec<Suggestion>,
    /// Top groups, best first.
    pub groups: Vec<GroupPreview>,
    /// Every group before truncation to `top_n`, best first.
    pub all_groups: Vec<RankedGroup>,
    pub trail: Vec<TrailEntry>,
    pub rejection_counts: BTreeMap<RejectionReason, usize>,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Sample(#[from] SampleError),
}

/// Prompt, sample, check every suggestion, group and rank.
pub fn run(model: &MethodModel, provider: &dyn Provider, opts: &PipelineOptions) -> Result<PipelineOutput, PipelineError> {
    let prompt = opts.template.build(model)?;
    let request_digest = CompletionRequest::new(&prompt, &opts.provider).digest;
    let records = sample(provider, &prompt, &opts.provider)?;
    Ok(analyse(model, records, request_digest, opts))
}

/// Everything after sampling; deterministic in its inputs.
pub fn analyse(
    model: &MethodModel,
    records: Vec<CompletionRecord>,
    request_digest: String,
    opts: &PipelineOptions,
) -> PipelineOutput {
    let cfg = build_cfg(model);
    let live = liveness(model, &cfg);

    let mut suggestions = Vec::new();
    for r in &records {
        for raw in &r.parsed {
            let s = Suggestion::raw(
                suggestions.len(),
                raw.function_name.clone(),
                RawRange::new(raw.line_start, raw.line_end),
                Provenance { iteration: r.iteration, provider: r.provider.clone() },
            );
            suggestions.push(process(model, &cfg, &live, s, &opts.filter));
        }
    }

    let mut trail = Vec::new();
    let mut rejection_counts = BTreeMap::new();
    for s in &suggestions {
        if let Some(rej) = s.state.rejection() {
            *rejection_counts.entry(rej.category).or_insert(0) += 1;
            trail.push(TrailEntry {
                suggestion: s.id,
                iteration: s.provenance.iteration,
                name: s.proposed_name.clone(),
                raw_range: s.raw_range,
                reason: rej.category,
                detail: rej.detail.clone(),
            });
        }
    }

    let useful: Vec<Suggestion> = suggestions.iter().filter(|s| s.state == SuggestionState::Useful).cloned().collect();
    let all_groups = rank(aggregate(&useful, opts.overlap), usize::MAX);
    let groups = all_groups
        .iter()
        .take(opts.top_n.max(1))
        .enumerate()
        .map(|(i, g)| {
            let (signature, call, plan_error) = match plan(model, &cfg, &live, &g.fragment, &g.representative_name) {
                Ok(p) => (Some(p.signature()), Some(p.call_line()), None),
                Err(e) => (None, None, Some(e.to_string())),
            };
            GroupPreview { rank: i + 1, group: g.clone(), signature, call, plan_error }
        })
        .collect();

    PipelineOutput {
        method: model.name.clone(),
        method_lines: model.span.lines(),
        unit_digest: model.unit().digest().to_owned(),
        request_digest,
        records,
        suggestions,
        groups,
        all_groups,
        trail,
        rejection_counts,
    }
}

/// Runs the pipeline for each oracle entry, for live or replayed evaluation.
pub struct PipelineSource<'p> {
    pub provider: &'p dyn Provider,
    pub options: PipelineOptions,
}

impl SuggestionSource for PipelineSource<'_> {
    fn suggestions(&self, entry: &ResolvedEntry) -> Result<SourceOutput, String> {
        let out = run(&entry.model, self.provider, &self.options).map_err(|e| e.to_string())?;
        Ok(SourceOutput {
            ranked: out
                .all_groups
                .iter()
                .map(|g| RankedRange {
                    start: g.canonical_range.start,
                    end: g.canonical_range.end,
                    name: Some(g.representative_name.clone()),
                })
                .collect(),
            trail: out.trail.iter().map(ToString::to_string).collect(),
        })
    }
}
