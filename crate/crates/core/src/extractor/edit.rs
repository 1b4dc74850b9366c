use serde::{Deserialize, Serialize};
use similar::TextDiff;

/// Replace bytes `start..end` of the original text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub start: usize,
    pub end: usize,
    pub replacement: String,
}

/// Non-overlapping edits against one text, plus a unified diff for display.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditScript {
    pub edits: Vec<Edit>,
    pub diff: String,
}

impl EditScript {
    pub fn new(mut edits: Vec<Edit>) -> Self {
        edits.sort_by_key(|e| (e.start, e.end));
        for pair in edits.windows(2) {
            assert!(pair[0].end <= pair[1].start, "overlapping edits");
        }
        EditScript { edits, diff: String::new() }
    }

    pub fn apply_to(&self, text: &str) -> String {
        let mut out = String::with_capacity(text.len() + 256);
        let mut at = 0;
        for e in &self.edits {
            out.push_str(&text[at..e.start]);
            out.push_str(&e.replacement);
            at = e.end;
        }
        out.push_str(&text[at..]);
        out
    }

    pub(super) fn with_diff(mut self, old: &str, new: &str, path: &str) -> Self {
        self.diff = unified_diff(old, new, path);
        self
    }
}

/// Unified diff with three lines of context.
pub fn unified_diff(old: &str, new: &str, path: &str) -> String {
    TextDiff::from_lines(old, new)
        .unified_diff()
        .context_radius(3)
        .header(&format!("a/{path}"), &format!("b/{path}"))
        .to_string()
}
