//! Independent checks on an applied extraction.

use std::collections::BTreeSet;
use std::sync::Arc;

use emx_core::dataflow::{build_cfg, fragment_io, liveness};
use emx_core::extractor::{Applied, ExtractPlan};
use emx_core::source::{locate_method, parse_unit, MethodLocator, MethodModel, SourceUnit};

fn squash(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).collect()
}

fn lines(text: &str) -> Vec<&str> {
    text.split_inclusive('\n').collect()
}

/// Re-parse, conservation, round-trip dataflow and statement count.
pub fn check(before: &SourceUnit, host: &MethodModel, plan: &ExtractPlan, applied: &Applied) -> Result<(), String> {
    let after = Arc::new(parse_unit(&applied.new_text, before.path()).map_err(|e| format!("re-parse: {e}"))?);

    // conservation: dropping the call and the new method from the result
    // gives the original minus the fragment
    let old = lines(before.text());
    let (s, e) = (plan.fragment_range.start as usize, plan.fragment_range.end as usize);
    let frag: String = old[s - 1..e].concat();
    let mut outside_old: String = old[..s - 1].concat();
    outside_old.push_str(&old[e..].concat());

    let new_method = locate_method(&after, &MethodLocator::Line(applied.new_method_line))
        .map_err(|e| format!("new method not found: {e}"))?;
    if new_method.name != plan.new_name {
        return Err(format!("method at line {} is {}", applied.new_method_line, new_method.name));
    }
    let nm = new_method.span;
    let new_text = after.text();
    let call_line = after.line_text(plan.fragment_range.start);
    if squash(call_line) != squash(&plan.call_line()) {
        return Err(format!("call line is `{call_line}`"));
    }
    let mut outside_new = String::new();
    outside_new.push_str(&new_text[..after.line_start(plan.fragment_range.start)]);
    outside_new.push_str(&new_text[after.line_end_inclusive(plan.fragment_range.start)..nm.start_byte]);
    outside_new.push_str(&new_text[nm.end_byte..]);
    if squash(&outside_old) != squash(&outside_new) {
        return Err("text outside the fragment changed".into());
    }
    let body = &new_text[new_method.body_open_byte + 1..new_method.body_close_byte - 1];
    let mut expected = String::new();
    for p in &plan.extra_locals {
        expected.push_str(&format!("{} {};", p.ty, p.name));
    }
    expected.push_str(&frag);
    if let Some(rv) = &plan.return_variable {
        expected.push_str(&format!("return {};", rv.name));
    }
    if squash(body) != squash(&expected) {
        return Err(format!("new body differs:\n{body}"));
    }

    // round trip: the moved statements need nothing beyond the parameters
    // and produce nothing beyond the return value
    let cfg = build_cfg(&new_method);
    let live = liveness(&new_method, &cfg);
    let skip_front = plan.extra_locals.len();
    let skip_back = usize::from(plan.return_variable.is_some());
    let roots = &new_method.roots[skip_front..new_method.roots.len() - skip_back];
    let io = fragment_io(&new_method, &cfg, &live, roots);
    let params: BTreeSet<&str> = plan.parameters.iter().map(|p| p.name.as_str()).collect();
    for i in &io.inputs {
        if !params.contains(i.as_str()) {
            return Err(format!("round trip input {i} is not a parameter"));
        }
    }
    let rv: BTreeSet<&str> = plan.return_variable.iter().map(|r| r.name.as_str()).collect();
    for o in &io.outputs {
        if !rv.contains(o.as_str()) {
            return Err(format!("round trip output {o} is not the return value"));
        }
    }

    // the host lost the fragment's statements and gained the call
    let host_after = locate_method(&after, &MethodLocator::Line(host.span.start_line))
        .map_err(|e| format!("host not found: {e}"))?;
    let removed: usize = plan.fragment.iter().map(|&f| host.subtree(f).len()).sum();
    let added = if plan.call_line().ends_with("; return;") { 2 } else { 1 };
    let want = host.statements.len() - removed + added;
    if host_after.statements.len() != want {
        return Err(format!("host has {} statements, expected {want}", host_after.statements.len()));
    }
    Ok(())
}

/// Plan, apply and check every useful sibling run in `files`. Returns how
/// many extractions were checked and the failures.
pub fn sweep(files: &[&str]) -> (usize, Vec<String>) {
    use emx_core::candidates::{process, FilterOptions, Provenance, RawRange, Suggestion, SuggestionState};
    use emx_core::extractor::{apply, plan, PlanError};

    let mut checked = 0;
    let mut failures = Vec::new();
    for file in files {
        for m in super::all_methods(file) {
            let cfg = build_cfg(&m);
            let live = liveness(&m, &cfg);
            for run in super::sibling_runs(&m) {
                let first = m.stmt(run[0]).span.start_line;
                let last = m.stmt(*run.last().unwrap()).span.end_line;
                let s = Suggestion::raw(
                    0,
                    "extracted",
                    RawRange::new(first as i64, last as i64),
                    Provenance { iteration: 0, provider: "sweep".into() },
                );
                let s = process(&m, &cfg, &live, s, &FilterOptions::default());
                if s.state != SuggestionState::Useful {
                    continue;
                }
                let frag = s.fragment.clone().unwrap();
                let where_ = format!("{file}:{}..{} in {}", first, last, m.name);
                match plan(&m, &cfg, &live, &frag, "extracted") {
                    Ok(p) => match apply(m.unit(), &p) {
                        Ok(a) => {
                            checked += 1;
                            if let Err(e) = check(m.unit(), &m, &p, &a) {
                                failures.push(format!("{where_}: {e}"));
                            }
                        }
                        Err(e) => failures.push(format!("{where_}: {e}")),
                    },
                    Err(PlanError::UntypedVariable { .. }) => {}
                    Err(e) => failures.push(format!("{where_}: plan: {e}")),
                }
            }
        }
    }
    (checked, failures)
}
