#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use emx_core::source::{locate_method, parse_unit, MethodLocator, MethodModel, SourceUnit, StmtId};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/java").join(name)
}

pub fn unit(name: &str) -> Arc<SourceUnit> {
    let path = fixture_path(name);
    let text = std::fs::read_to_string(&path).unwrap();
    Arc::new(parse_unit(&text, &path).unwrap())
}

pub fn method(file: &str, locator: &str) -> MethodModel {
    let unit = unit(file);
    locate_method(&unit, &locator.parse::<MethodLocator>().unwrap()).unwrap()
}

/// Outermost non-container statement starting on `line`.
pub fn stmt_at(m: &MethodModel, line: u32) -> StmtId {
    m.statements
        .iter()
        .find(|s| !s.is_container() && s.span.start_line == line)
        .unwrap_or_else(|| panic!("no statement starts on line {line}"))
        .id
}

pub fn names(xs: &[&str]) -> std::collections::BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}
pub mod extraction;
pub mod oracle;

/// Every method and constructor in a fixture file.
pub fn all_methods(file: &str) -> Vec<MethodModel> {
    let u = unit(file);
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for line in 1..=u.line_count() {
        if let Ok(m) = locate_method(&u, &MethodLocator::Line(line)) {
            if seen.insert(m.span.start_line) {
                out.push(m);
            }
        }
    }
    out
}

/// All contiguous runs of sibling statements.
pub fn sibling_runs(m: &MethodModel) -> Vec<Vec<StmtId>> {
    let mut lists = vec![m.roots.clone()];
    lists.extend(m.statements.iter().filter(|s| s.is_container()).map(|s| s.children.clone()));
    let mut out = Vec::new();
    for list in lists {
        for i in 0..list.len() {
            for j in i..list.len() {
                out.push(list[i..=j].to_vec());
            }
        }
    }
    out
}
pub mod synth;
