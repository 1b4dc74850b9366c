//! Java source units and the statement-level model of a host method.
//!
//! Parsing is delegated to the tree-sitter Java grammar. Everything above the
//! concrete syntax tree (statement tree, per-statement def/use facts, jump
//! targets, alignment of line ranges) lives in the submodules.

mod align;
mod facts;
mod method;

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tree_sitter::{Node, Parser, Tree};

pub use align::{AlignError, Aligned};
pub use facts::Facts;
pub use method::{
    locate_method, ContainerRole, Jump, JumpKind, JumpTarget, LocalDecl, LocalId, LocateError, LoopKind,
    MethodLocator, MethodModel, Statement, StmtId, StmtKind,
};

/// Inclusive, 1-based line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LineRange {
    pub start: u32,
    pub end: u32,
}

impl LineRange {
    pub fn new(start: u32, end: u32) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> u32 {
        if self.end < self.start {
            0
        } else {
            self.end - self.start + 1
        }
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn contains_line(&self, line: u32) -> bool {
        self.start <= line && line <= self.end
    }

    pub fn contains(&self, other: &LineRange) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn intersects(&self, other: &LineRange) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn intersection(&self, other: &LineRange) -> Option<LineRange> {
        let start = self.start.max(other.start);
        let end = self.end.min(other.end);
        (start <= end).then_some(LineRange { start, end })
    }

    pub fn lines(&self) -> impl Iterator<Item = u32> {
        self.start..=self.end
    }
}

impl fmt::Display for LineRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

/// Position of a syntax element: lines and columns are 1-based, bytes are
/// offsets into the unit text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
    pub start_byte: usize,
    pub end_byte: usize,
}

impl Span {
    pub(crate) fn of(node: &Node<'_>) -> Self {
        let s = node.start_position();
        let e = node.end_position();
        Span {
            start_line: s.row as u32 + 1,
            start_col: s.column as u32 + 1,
            end_line: e.row as u32 + 1,
            end_col: e.column as u32 + 1,
            start_byte: node.start_byte(),
            end_byte: node.end_byte(),
        }
    }

    pub fn lines(&self) -> LineRange {
        LineRange::new(self.start_line, self.end_line)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{path}:{line}:{column}: syntax error near `{snippet}`")]
    Syntax {
        path: String,
        line: u32,
        column: u32,
        snippet: String,
    },
    #[error("parser initialisation failed: {0}")]
    Init(String),
}

/// A parsed Java compilation unit.
pub struct SourceUnit {
    path: PathBuf,
    text: String,
    line_index: Vec<usize>,
    digest: String,
    tree: Tree,
}

impl fmt::Debug for SourceUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceUnit")
            .field("path", &self.path)
            .field("lines", &self.line_count())
            .field("digest", &self.digest)
            .finish()
    }
}

/// Parse `text` as a Java compilation unit.
///
/// The unit only needs to parse, not compile. Any error or missing node in the
/// concrete syntax tree is reported with the position of the first offender.
pub fn parse_unit(text: &str, path: impl AsRef<Path>) -> Result<SourceUnit, ParseError> {
    let path = path.as_ref().to_path_buf();
    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_java::LANGUAGE.into())
        .map_err(|e| ParseError::Init(e.to_string()))?;
    let tree = parser
        .parse(text, None)
        .ok_or_else(|| ParseError::Init("parser returned no tree".into()))?;

    if tree.root_node().has_error() {
        let bad = first_error(tree.root_node()).unwrap_or(tree.root_node());
        let pos = bad.start_position();
        let snippet: String = text[bad.start_byte()..bad.end_byte().min(bad.start_byte() + 40)]
            .chars()
            .take_while(|c| *c != '\n')
            .collect();
        return Err(ParseError::Syntax {
            path: path.display().to_string(),
            line: pos.row as u32 + 1,
            column: pos.column as u32 + 1,
            snippet,
        });
    }

    let mut line_index = vec![0usize];
    line_index.extend(
        text.bytes()
            .enumerate()
            .filter(|(_, b)| *b == b'\n')
            .map(|(i, _)| i + 1)
            .filter(|&i| i < text.len()),
    );

    Ok(SourceUnit {
        path,
        digest: digest_text(text),
        text: text.to_owned(),
        line_index,
        tree,
    })
}

fn first_error(node: Node<'_>) -> Option<Node<'_>> {
    if node.is_error() || node.is_missing() {
        return Some(node);
    }
    let mut cursor = node.walk();
    for child in node.children(&mut cursor) {
        if child.has_error() || child.is_missing() {
            if let Some(found) = first_error(child) {
                return Some(found);
            }
        }
    }
    None
}

/// Hex SHA-256 of a text, used to detect stale units.
pub fn digest_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl SourceUnit {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    /// Byte offsets of each line start; entry `i` is line `i + 1`.
    pub fn line_index(&self) -> &[usize] {
        &self.line_index
    }

    pub fn line_count(&self) -> u32 {
        self.line_index.len() as u32
    }

    pub fn lines(&self) -> LineRange {
        LineRange::new(1, self.line_count())
    }

    /// Byte offset where `line` starts.
    pub fn line_start(&self, line: u32) -> usize {
        self.line_index[(line - 1) as usize]
    }

    /// Byte offset just past the end of `line`, including its newline.
    pub fn line_end_inclusive(&self, line: u32) -> usize {
        self.line_index
            .get(line as usize)
            .copied()
            .unwrap_or(self.text.len())
    }

    /// Text of `line` without its line terminator.
    pub fn line_text(&self, line: u32) -> &str {
        let s = self.line_start(line);
        let e = self.line_end_inclusive(line);
        self.text[s..e].trim_end_matches(['\n', '\r'])
    }

    pub fn slice(&self, start: usize, end: usize) -> &str {
        &self.text[start..end]
    }

    pub fn node_text(&self, node: &Node<'_>) -> &str {
        &self.text[node.start_byte()..node.end_byte()]
    }

    /// Leading whitespace of `line`.
    pub fn indentation(&self, line: u32) -> &str {
        let text = self.line_text(line);
        let trimmed = text.trim_start_matches([' ', '\t']);
        &text[..text.len() - trimmed.len()]
    }
}
