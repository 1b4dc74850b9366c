//! Reference answers computed by brute-force path enumeration.
//!
//! Nothing here uses the liveness solver, `Region` or `fragment_io`; only the
//! statement model and the CFG edges.

use std::collections::BTreeSet;

use emx_core::candidates::RejectionReason;
use emx_core::dataflow::{Cfg, CfgNode, EdgeKind, EXIT};
use emx_core::source::{JumpKind, MethodModel, StmtId, StmtKind};

/// `v` is live at `n` iff some path from `n` reads `v` before writing it.
/// Paths are enumerated explicitly, visiting each node at most twice.
pub fn live_by_paths(m: &MethodModel, cfg: &Cfg, n: usize, v: &str) -> bool {
    fn go(m: &MethodModel, cfg: &Cfg, n: usize, v: &str, visits: &mut Vec<u8>) -> bool {
        if let Some(f) = cfg.facts(m, n) {
            if f.uses.contains(v) {
                return true;
            }
            if f.defs.contains(v) {
                return false;
            }
        }
        if visits[n] >= 2 {
            return false;
        }
        visits[n] += 1;
        let found = cfg.succ[n].iter().any(|&(s, _)| go(m, cfg, s, v, visits));
        visits[n] -= 1;
        found
    }
    let mut visits = vec![0u8; cfg.nodes.len()];
    go(m, cfg, n, v, &mut visits)
}

fn subtree_of(m: &MethodModel, roots: &[StmtId]) -> Vec<StmtId> {
    fn walk(m: &MethodModel, id: StmtId, out: &mut Vec<StmtId>) {
        out.push(id);
        for &c in &m.stmt(id).children {
            walk(m, c, out);
        }
    }
    let mut out = Vec::new();
    for &r in roots {
        walk(m, r, &mut out);
    }
    out
}

/// Target of a `break`/`continue` from the language rules: the labeled
/// ancestor, else the innermost loop (or switch, for `break`).
fn jump_target(m: &MethodModel, id: StmtId) -> Option<StmtId> {
    let st = m.stmt(id);
    let text = m.unit().slice(st.span.start_byte, st.span.end_byte);
    let keyword = if st.kind == StmtKind::Break { "break" } else { "continue" };
    let rest = text.trim_start().strip_prefix(keyword)?.trim_start_matches(|c: char| c.is_whitespace());
    let label: String = rest.chars().take_while(|c| c.is_alphanumeric() || *c == '_' || *c == '$').collect();
    let mut cur = st.parent;
    while let Some(p) = cur {
        let ps = m.stmt(p);
        let hit = if !label.is_empty() {
            ps.label.as_deref() == Some(label.as_str())
        } else if st.kind == StmtKind::Break {
            matches!(ps.kind, StmtKind::Loop | StmtKind::Switch) && !ps.is_container()
        } else {
            ps.kind == StmtKind::Loop && !ps.is_container()
        };
        if hit {
            return Some(p);
        }
        cur = ps.parent;
    }
    None
}

fn calls_other_constructor(m: &MethodModel, id: StmtId) -> bool {
    let st = m.stmt(id);
    let text: String = m.unit().slice(st.span.start_byte, st.span.end_byte).split_whitespace().collect();
    text.starts_with("this(") || text.starts_with("super(") || text.starts_with("this<") || text.starts_with("super<")
        || text.contains(".super(")
}

#[derive(Default)]
struct Walk {
    returns: bool,
    falls_through: bool,
    /// Candidates left unwritten on some path that falls through.
    unassigned: BTreeSet<String>,
}

/// Accept/reject decision for a sibling sequence, from the definitions.
pub fn reference_verdict(m: &MethodModel, cfg: &Cfg, fragment: &[StmtId]) -> Result<(), RejectionReason> {
    let all = subtree_of(m, fragment);
    if all.iter().any(|&id| m.stmt(id).kind == StmtKind::Other && calls_other_constructor(m, id)) {
        return Err(RejectionReason::Unalignable);
    }

    for &id in &all {
        let st = m.stmt(id);
        match st.kind {
            StmtKind::Break | StmtKind::Continue => match jump_target(m, id) {
                Some(t) if all.contains(&t) => {}
                _ => return Err(RejectionReason::JumpCrossesBoundary),
            },
            _ if st.jump.is_some_and(|j| j.kind == JumpKind::Yield) => {
                return Err(RejectionReason::JumpCrossesBoundary)
            }
            _ => {}
        }
    }

    let mut region = BTreeSet::new();
    for &id in &all {
        region.extend((0..cfg.nodes.len()).filter(|&n| cfg.stmt_of(n) == Some(id)));
    }

    let mut written = BTreeSet::new();
    let mut declared = BTreeSet::new();
    for &id in &all {
        let st = m.stmt(id);
        for f in st.all_facts() {
            written.extend(f.defs.iter().cloned());
        }
        declared.extend(st.declares.iter().map(|&l| m.locals[l].name.clone()));
    }
    let candidates: BTreeSet<String> = written.union(&declared).cloned().collect();

    struct Ctx<'a> {
        m: &'a MethodModel,
        cfg: &'a Cfg,
        region: &'a BTreeSet<usize>,
        candidates: &'a BTreeSet<String>,
    }
    // enumerate executions through the fragment, each node at most twice
    fn go(cx: &Ctx<'_>, n: usize, defined: &mut Vec<String>, visits: &mut Vec<u8>, out: &mut Walk) {
        let Ctx { m, cfg, region, candidates } = *cx;
        if visits[n] >= 2 {
            return;
        }
        visits[n] += 1;
        let before = defined.len();
        if let Some(f) = cfg.facts(m, n) {
            defined.extend(f.defs.iter().cloned());
        }
        if let Some(s) = cfg.stmt_of(n) {
            if m.stmt(s).kind == StmtKind::Return && cfg.nodes[n] == CfgNode::Stmt(s) {
                out.returns = true;
            }
        }
        for &(t, k) in &cfg.succ[n] {
            if k == EdgeKind::Finally {
                continue;
            }
            if region.contains(&t) {
                go(cx, t, defined, visits, out);
            } else if t != EXIT && matches!(k, EdgeKind::Normal | EdgeKind::Back) {
                out.falls_through = true;
                for c in candidates {
                    if !defined.contains(c) {
                        out.unassigned.insert(c.clone());
                    }
                }
            }
        }
        defined.truncate(before);
        visits[n] -= 1;
    }
    let mut walk = Walk::default();
    let entry = cfg.entry_of(fragment[0]);
    let cx = Ctx { m, cfg, region: &region, candidates: &candidates };
    go(&cx, entry, &mut Vec::new(), &mut vec![0; cfg.nodes.len()], &mut walk);

    if walk.returns && walk.falls_through {
        return Err(RejectionReason::ConditionalReturn);
    }

    // values read after leaving the fragment by any edge
    let mut outputs = BTreeSet::new();
    for &n in &region {
        for &(t, _) in &cfg.succ[n] {
            if !region.contains(&t) {
                outputs.extend(candidates.iter().filter(|c| live_by_paths(m, cfg, t, c)).cloned());
            }
        }
    }
    // a declaration the following siblings still refer to must stay visible
    let last = *fragment.last().unwrap();
    let siblings: Vec<StmtId> = match m.stmt(last).parent {
        Some(p) => m.stmt(p).children.clone(),
        None => m.roots.clone(),
    };
    let later = subtree_of(m, &siblings[siblings.iter().position(|&s| s == last).unwrap() + 1..]);
    for &s in fragment {
        for &l in &m.stmt(s).declares {
            let name = &m.locals[l].name;
            if later.iter().any(|&t| m.stmt(t).all_facts().any(|f| f.uses.contains(name) || f.defs.contains(name))) {
                outputs.insert(name.clone());
            }
        }
    }

    if outputs.len() > 1 {
        return Err(RejectionReason::MultipleOutputs);
    }
    if let Some(out) = outputs.first() {
        if walk.returns {
            return Err(RejectionReason::MultipleOutputs);
        }
        if declared.contains(out) && walk.unassigned.contains(out) {
            return Err(RejectionReason::MultipleOutputs);
        }
    }
    Ok(())
}
