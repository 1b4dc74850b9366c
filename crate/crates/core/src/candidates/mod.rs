//! Candidate fragments: snapping raw line ranges onto statements, checking
//! extract-method preconditions and dropping fragments nobody wants.

mod names;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use names::{is_java_identifier, JAVA_KEYWORDS};

use crate::dataflow::{fragment_io, Cfg, FragmentIo, Liveness, Region};
use crate::source::{AlignError, JumpKind, JumpTarget, LineRange, MethodModel, StmtId, StmtKind};

/// Line range exactly as the provider emitted it; may be inverted or out of
/// the file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RawRange {
    pub start: i64,
    pub end: i64,
}

impl RawRange {
    pub fn new(start: i64, end: i64) -> Self {
        Self { start, end }
    }

    /// The range with its endpoints ordered and clamped to `within`.
    pub fn clamp(&self, within: LineRange) -> Option<LineRange> {
        let lo = self.start.min(self.end).max(within.start as i64);
        let hi = self.start.max(self.end).min(within.end as i64);
        (lo <= hi).then(|| LineRange::new(lo as u32, hi as u32))
    }
}

impl fmt::Display for RawRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    OutOfBounds,
    InvertedRange,
    Unalignable,
    NameInvalid,
    JumpCrossesBoundary,
    ConditionalReturn,
    MultipleOutputs,
    WholeBody,
    EmptyFragment,
}

impl RejectionReason {
    pub const ALL: [RejectionReason; 9] = [
        RejectionReason::OutOfBounds,
        RejectionReason::InvertedRange,
        RejectionReason::Unalignable,
        RejectionReason::NameInvalid,
        RejectionReason::JumpCrossesBoundary,
        RejectionReason::ConditionalReturn,
        RejectionReason::MultipleOutputs,
        RejectionReason::WholeBody,
        RejectionReason::EmptyFragment,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RejectionReason::OutOfBounds => "out_of_bounds",
            RejectionReason::InvertedRange => "inverted_range",
            RejectionReason::Unalignable => "unalignable",
            RejectionReason::NameInvalid => "name_invalid",
            RejectionReason::JumpCrossesBoundary => "jump_crosses_boundary",
            RejectionReason::ConditionalReturn => "conditional_return",
            RejectionReason::MultipleOutputs => "multiple_outputs",
            RejectionReason::WholeBody => "whole_body",
            RejectionReason::EmptyFragment => "empty_fragment",
        }
    }

    /// Reasons produced by the usefulness filter rather than the validator.
    pub fn is_filter(&self) -> bool {
        matches!(self, RejectionReason::WholeBody | RejectionReason::EmptyFragment)
    }
}

impl fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub category: RejectionReason,
    pub detail: String,
}

impl Rejection {
    fn new(category: RejectionReason, detail: impl Into<String>) -> Self {
        Self { category, detail: detail.into() }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.category, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum SuggestionState {
    Raw,
    Normalized,
    Invalid { reason: Rejection },
    Valid,
    Filtered { reason: Rejection },
    Useful,
}

impl SuggestionState {
    pub fn is_terminal(&self) -> bool {
        matches!(
            self,
            SuggestionState::Invalid { .. } | SuggestionState::Filtered { .. } | SuggestionState::Useful
        )
    }

    pub fn rejection(&self) -> Option<&Rejection> {
        match self {
            SuggestionState::Invalid { reason } | SuggestionState::Filtered { reason } => Some(reason),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub iteration: u32,
    pub provider: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub id: usize,
    pub proposed_name: String,
    pub raw_range: RawRange,
    pub normalized_range: Option<LineRange>,
    pub fragment: Option<Vec<StmtId>>,
    #[serde(flatten)]
    pub state: SuggestionState,
    pub provenance: Provenance,
}

impl Suggestion {
    pub fn raw(id: usize, name: impl Into<String>, range: RawRange, provenance: Provenance) -> Self {
        Suggestion {
            id,
            proposed_name: name.into(),
            raw_range: range,
            normalized_range: None,
            fragment: None,
            state: SuggestionState::Raw,
            provenance,
        }
    }
}

/// Options for the usefulness filter.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FilterOptions {
    /// Also drop fragments covering at least this fraction of the body's
    /// statement-bearing lines. Off when `None`.
    pub near_whole_body: Option<f64>,
}

/// Snap the raw range onto complete statements.
///
/// The range is clamped to the body and, when it cuts through a statement,
/// grown to the smallest enclosing sibling sequence that owns its lines.
/// Ranges that cannot be snapped keep no fragment and are rejected by
/// [`validate`].
pub fn normalize(model: &MethodModel, mut s: Suggestion) -> Suggestion {
    debug_assert_eq!(s.state, SuggestionState::Raw);
    s.state = SuggestionState::Normalized;
    s.normalized_range = None;
    s.fragment = None;
    if s.raw_range.start > s.raw_range.end {
        return s;
    }
    let Some(clamped) = s.raw_range.clamp(model.body_span) else {
        return s;
    };
    let aligned = match model.statements_in_range(clamped) {
        Ok(a) => Some(a),
        Err(AlignError::NotAligned { enclosing }) => enclosing,
        Err(AlignError::EmptyRange) => None,
    };
    if let Some(a) = aligned {
        s.normalized_range = Some(a.range);
        s.fragment = Some(a.ids);
    }
    s
}

/// Check extract-method preconditions in a fixed order, stopping at the
/// first failure.
pub fn validate(model: &MethodModel, cfg: &Cfg, live: &Liveness, mut s: Suggestion) -> Suggestion {
    debug_assert_eq!(s.state, SuggestionState::Normalized);
    s.state = match check(model, cfg, live, &s) {
        Ok(()) => SuggestionState::Valid,
        Err(reason) => SuggestionState::Invalid { reason },
    };
    s
}

fn check(model: &MethodModel, cfg: &Cfg, live: &Liveness, s: &Suggestion) -> Result<(), Rejection> {
    use RejectionReason::*;

    let raw = s.raw_range;
    if raw.clamp(model.body_span).is_none() {
        return Err(Rejection::new(
            OutOfBounds,
            format!("lines {raw} are outside the method body {}", model.body_span),
        ));
    }
    if raw.start > raw.end {
        return Err(Rejection::new(InvertedRange, format!("line_start {} > line_end {}", raw.start, raw.end)));
    }
    let fragment = match (&s.fragment, s.normalized_range) {
        (Some(f), Some(_)) if !f.is_empty() => f.as_slice(),
        _ => {
            return Err(Rejection::new(
                Unalignable,
                format!("lines {raw} do not snap onto a statement sequence inside the body"),
            ))
        }
    };
    let region = Region::new(model, cfg, fragment);
    let all = region.all_stmts();
    if let Some(&c) = all.iter().find(|&&id| is_constructor_call(model, id)) {
        return Err(Rejection::new(
            Unalignable,
            format!("line {} calls another constructor and must stay first", model.stmt(c).span.start_line),
        ));
    }

    let name = s.proposed_name.as_str();
    if !is_java_identifier(name) {
        return Err(Rejection::new(NameInvalid, format!("`{name}` is not a legal Java method name")));
    }
    if model.collides(name, None) {
        return Err(Rejection::new(NameInvalid, format!("a method named `{name}` already exists")));
    }

    for &id in &all {
        let st = model.stmt(id);
        let Some(j) = st.jump else { continue };
        let line = st.span.start_line;
        match (j.kind, j.target) {
            (JumpKind::Break | JumpKind::Continue, JumpTarget::Statement(t)) => {
                if !fragment.iter().any(|&f| model.is_ancestor_or_self(f, t)) {
                    let what = if j.kind == JumpKind::Break { "break" } else { "continue" };
                    return Err(Rejection::new(
                        JumpCrossesBoundary,
                        format!("{what} on line {line} targets line {} outside the fragment", model.stmt(t).span.start_line),
                    ));
                }
            }
            (_, JumpTarget::Unresolved) => {
                return Err(Rejection::new(
                    JumpCrossesBoundary,
                    format!("jump on line {line} has no target inside the method"),
                ));
            }
            _ => {}
        }
    }

    let returns = region.has_return();
    let completes = region.can_complete_normally();
    if returns && completes {
        return Err(Rejection::new(
            ConditionalReturn,
            "some paths return from the method while others fall through",
        ));
    }

    let io = fragment_io(model, cfg, live, fragment);
    if io.outputs.len() > 1 {
        return Err(Rejection::new(
            MultipleOutputs,
            format!("{} values are needed afterwards: {}", io.outputs.len(), io.outputs.join(", ")),
        ));
    }
    if let Some(out) = io.outputs.first() {
        if returns {
            return Err(Rejection::new(
                MultipleOutputs,
                format!("`{out}` is needed afterwards but the fragment always returns"),
            ));
        }
        let declared_inside = declared_in(model, &all).contains(out.as_str());
        if declared_inside && !region.definitely_assigns(out) {
            return Err(Rejection::new(
                MultipleOutputs,
                format!("`{out}` is declared in the fragment but not assigned on every path"),
            ));
        }
    }
    Ok(())
}

fn is_constructor_call(model: &MethodModel, id: StmtId) -> bool {
    let st = model.stmt(id);
    if st.kind != StmtKind::Other {
        return false;
    }
    let unit = model.unit();
    let text = unit.slice(st.span.start_byte, st.span.end_byte).trim_start();
    ["this", "super"].iter().any(|kw| {
        text.strip_prefix(kw)
            .is_some_and(|rest| rest.trim_start().starts_with('(') || rest.starts_with('<'))
    }) || text.contains(".super(")
}

/// Names of locals declared anywhere in the given statements.
pub fn declared_in<'m>(model: &'m MethodModel, stmts: &[StmtId]) -> BTreeSet<&'m str> {
    stmts
        .iter()
        .flat_map(|&s| model.stmt(s).declares.iter())
        .map(|&l| model.locals[l].name.as_str())
        .collect()
}

/// Drop valid fragments that are not worth proposing.
pub fn filter_useful(model: &MethodModel, mut s: Suggestion, opts: &FilterOptions) -> Suggestion {
    debug_assert_eq!(s.state, SuggestionState::Valid);
    let fragment = s.fragment.as_deref().unwrap_or(&[]);
    let body = model.body_bearing_lines();
    let lines: BTreeSet<u32> = fragment.iter().flat_map(|&id| model.bearing_lines(id).iter().copied()).collect();
    s.state = if fragment.is_empty() || lines.is_empty() {
        SuggestionState::Filtered {
            reason: Rejection::new(RejectionReason::EmptyFragment, "the fragment holds no statements"),
        }
    } else if lines == *body {
        SuggestionState::Filtered {
            reason: Rejection::new(RejectionReason::WholeBody, "the fragment is the entire method body"),
        }
    } else if let Some(t) = opts.near_whole_body.filter(|&t| lines.len() as f64 >= t * body.len() as f64) {
        SuggestionState::Filtered {
            reason: Rejection::new(
                RejectionReason::WholeBody,
                format!(
                    "the fragment covers {} of {} body lines (threshold {t})",
                    lines.len(),
                    body.len()
                ),
            ),
        }
    } else {
        SuggestionState::Useful
    };
    s
}

/// Data-flow summary for a fragment that passed validation.
pub fn fragment_summary(model: &MethodModel, cfg: &Cfg, live: &Liveness, s: &Suggestion) -> Option<FragmentIo> {
    s.fragment.as_deref().filter(|f| !f.is_empty()).map(|f| fragment_io(model, cfg, live, f))
}

/// Run a raw suggestion through normalization, validation and filtering.
pub fn process(model: &MethodModel, cfg: &Cfg, live: &Liveness, s: Suggestion, opts: &FilterOptions) -> Suggestion {
    let s = validate(model, cfg, live, normalize(model, s));
    if s.state == SuggestionState::Valid {
        filter_useful(model, s, opts)
    } else {
        s
    }
}
