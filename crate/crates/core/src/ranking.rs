//! Grouping useful suggestions by range and ranking the groups by how often
//! they were proposed.

use std::cmp::Reverse;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::candidates::{Suggestion, SuggestionState};
use crate::source::{LineRange, StmtId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedGroup {
    pub canonical_range: LineRange,
    pub frequency: usize,
    /// Proposed names with their counts.
    pub names: BTreeMap<String, usize>,
    pub representative_name: String,
    /// Suggestion ids, ascending.
    pub members: Vec<usize>,
    pub fragment: Vec<StmtId>,
}

/// Modal name; ties go to the lexicographically least.
fn modal(names: &BTreeMap<String, usize>) -> String {
    names
        .iter()
        .max_by_key(|(n, c)| (**c, Reverse(*n)))
        .map(|(n, _)| n.clone())
        .unwrap_or_default()
}

/// Group useful suggestions by exact normalized range.
///
/// With `overlap` set, groups whose line ranges have a Jaccard index of at
/// least that value are merged into the more frequent one.
pub fn aggregate(suggestions: &[Suggestion], overlap: Option<f64>) -> Vec<RankedGroup> {
    let mut by_range: BTreeMap<LineRange, RankedGroup> = BTreeMap::new();
    for s in suggestions {
        debug_assert_eq!(s.state, SuggestionState::Useful);
        let Some(range) = s.normalized_range else { continue };
        let g = by_range.entry(range).or_insert_with(|| RankedGroup {
            canonical_range: range,
            frequency: 0,
            names: BTreeMap::new(),
            representative_name: String::new(),
            members: Vec::new(),
            fragment: s.fragment.clone().unwrap_or_default(),
        });
        g.frequency += 1;
        *g.names.entry(s.proposed_name.clone()).or_default() += 1;
        g.members.push(s.id);
    }
    let mut groups: Vec<RankedGroup> = by_range.into_values().collect();

    if let Some(threshold) = overlap {
        groups.sort_by(order);
        let mut merged: Vec<RankedGroup> = Vec::new();
        for g in groups {
            match merged
                .iter_mut()
                .find(|m| jaccard(m.canonical_range, g.canonical_range) >= threshold)
            {
                Some(m) => {
                    m.frequency += g.frequency;
                    for (n, c) in g.names {
                        *m.names.entry(n).or_default() += c;
                    }
                    m.members.extend(g.members);
                }
                None => merged.push(g),
            }
        }
        groups = merged;
        groups.sort_by_key(|g| g.canonical_range);
    }

    for g in &mut groups {
        g.members.sort_unstable();
        g.representative_name = modal(&g.names);
    }
    groups
}

/// Jaccard index of two line ranges as line sets.
pub fn jaccard(a: LineRange, b: LineRange) -> f64 {
    let inter = a.intersection(&b).map_or(0, |r| r.len());
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn order(a: &RankedGroup, b: &RankedGroup) -> std::cmp::Ordering {
    b.frequency
        .cmp(&a.frequency)
        .then(b.canonical_range.len().cmp(&a.canonical_range.len()))
        .then(a.canonical_range.start.cmp(&b.canonical_range.start))
}

/// Most frequent first; ties prefer longer fragments, then earlier ones.
pub fn rank(mut groups: Vec<RankedGroup>, top_n: usize) -> Vec<RankedGroup> {
    assert!(top_n >= 1, "top_n must be at least 1");
    groups.sort_by(order);
    groups.truncate(top_n);
    groups
}
