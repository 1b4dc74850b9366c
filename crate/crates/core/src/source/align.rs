//! Snapping line ranges onto complete statement sequences.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{LineRange, MethodModel, StmtId};

/// A same-level sibling sequence that owns every line it spans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aligned {
    pub ids: Vec<StmtId>,
    pub range: LineRange,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlignError {
    #[error("range does not intersect any statement of the body")]
    EmptyRange,
    #[error("range does not fall on statement boundaries")]
    NotAligned { enclosing: Option<Aligned> },
}

impl MethodModel {
    /// The sibling sequence whose statement-bearing lines are exactly those of
    /// `range ∩ body_span`; otherwise `NotAligned` with the smallest enclosing
    /// aligned sequence, if one exists below the method itself.
    pub fn statements_in_range(&self, range: LineRange) -> Result<Aligned, AlignError> {
        let clamped = range
            .intersection(&self.body_span)
            .ok_or(AlignError::EmptyRange)?;
        let wanted: BTreeSet<u32> = self.body_bearing_lines().range(clamped.start..=clamped.end).copied().collect();
        if wanted.is_empty() {
            return Err(AlignError::EmptyRange);
        }
        match self.expand(clamped) {
            Some(aligned) => {
                let have: BTreeSet<u32> = aligned.ids.iter().flat_map(|&id| self.bearing_lines(id).iter().copied()).collect();
                if have == wanted {
                    Ok(aligned)
                } else {
                    Err(AlignError::NotAligned { enclosing: Some(aligned) })
                }
            }
            None => Err(AlignError::NotAligned { enclosing: None }),
        }
    }

    /// Smallest aligned sibling sequence covering every statement-bearing line
    /// of `range` (already clamped to the body).
    pub fn expand(&self, range: LineRange) -> Option<Aligned> {
        let seq = self.descend(&self.roots, range)?;
        let seq = self.widen_until_exclusive(seq)?;
        let first = self.stmt(seq[0]);
        let last = self.stmt(*seq.last().unwrap());
        Some(Aligned {
            range: LineRange::new(first.span.start_line, last.span.end_line),
            ids: seq,
        })
    }

    fn touches(&self, id: StmtId, range: LineRange) -> bool {
        self.bearing_lines(id).range(range.start..=range.end).next().is_some()
    }

    fn descend(&self, level: &[StmtId], range: LineRange) -> Option<Vec<StmtId>> {
        let hit: Vec<usize> = level
            .iter()
            .enumerate()
            .filter(|(_, &id)| self.touches(id, range))
            .map(|(i, _)| i)
            .collect();
        let (&first, &last) = (hit.first()?, hit.last()?);
        if first != last {
            return Some(level[first..=last].to_vec());
        }
        let c = level[first];
        let stmt = self.stmt(c);
        let all = self.bearing_lines(c);
        if all.iter().all(|l| range.contains_line(*l)) || stmt.children.is_empty() {
            return Some(vec![c]);
        }
        let inner = if stmt.children.iter().all(|&k| self.stmt(k).is_container()) {
            let header: BTreeSet<u32> = std::iter::once(c)
                .chain(stmt.children.iter().copied())
                .flat_map(|s| self.stmt(s).own_lines.iter().copied())
                .collect();
            if header.range(range.start..=range.end).next().is_some() {
                return Some(vec![c]);
            }
            let touched: Vec<StmtId> = stmt.children.iter().copied().filter(|&k| self.touches(k, range)).collect();
            match touched.as_slice() {
                [k] => self.descend(&self.stmt(*k).children, range),
                _ => None,
            }
        } else {
            if stmt.own_lines.iter().any(|l| range.contains_line(*l)) {
                return Some(vec![c]);
            }
            self.descend(&stmt.children, range)
        };
        Some(inner.unwrap_or_else(|| vec![c]))
    }

    fn widen_until_exclusive(&self, mut seq: Vec<StmtId>) -> Option<Vec<StmtId>> {
        loop {
            if self.is_line_exclusive(&seq) {
                return Some(seq);
            }
            let parent = self.stmt(seq[0]).parent?;
            let owner = if self.stmt(parent).is_container() {
                self.stmt(parent).parent?
            } else {
                parent
            };
            seq = vec![owner];
        }
    }

    /// No token outside `ids` shares a line with them.
    pub fn is_line_exclusive(&self, ids: &[StmtId]) -> bool {
        let (Some(&first), Some(&last)) = (ids.first(), ids.last()) else {
            return false;
        };
        let unit = self.unit();
        let first = &self.stmt(first).span;
        let last = &self.stmt(last).span;
        let before = unit.slice(unit.line_start(first.start_line), first.start_byte);
        let after = unit.slice(last.end_byte, unit.line_end_inclusive(last.end_line));
        let after = after.trim();
        before.trim().is_empty() && (after.is_empty() || after.starts_with("//"))
    }

    /// Consecutive non-container siblings in document order.
    pub fn is_sibling_sequence(&self, ids: &[StmtId]) -> bool {
        let Some(&first) = ids.first() else { return false };
        let level = self.siblings(first);
        let Some(pos) = level.iter().position(|&s| s == first) else {
            return false;
        };
        !self.stmt(first).is_container()
            && level.len() >= pos + ids.len()
            && level[pos..pos + ids.len()] == *ids
    }
}
