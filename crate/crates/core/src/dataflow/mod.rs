//! Control flow and liveness over the statement model.

mod cfg;

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use serde::Serialize;

pub use cfg::{build_cfg, Cfg, CfgNode, EdgeKind, NodeId, ENTRY, EXIT};

use crate::source::{JumpKind, MethodModel, StmtId};

/// Per-node live variable sets.
#[derive(Debug, Clone)]
pub struct Liveness {
    pub live_in: Vec<BTreeSet<String>>,
    pub live_out: Vec<BTreeSet<String>>,
}

impl Liveness {
    pub fn live_in(&self, node: NodeId) -> &BTreeSet<String> {
        &self.live_in[node]
    }

    pub fn live_out(&self, node: NodeId) -> &BTreeSet<String> {
        &self.live_out[node]
    }
}

/// Backward may-liveness, iterated to a fixed point with a worklist.
pub fn liveness(model: &MethodModel, cfg: &Cfg) -> Liveness {
    let n = cfg.nodes.len();
    let mut live_in = vec![BTreeSet::new(); n];
    let mut live_out: Vec<BTreeSet<String>> = vec![BTreeSet::new(); n];
    let mut queued = vec![true; n];
    let mut work: VecDeque<NodeId> = (0..n).rev().collect();

    while let Some(v) = work.pop_front() {
        queued[v] = false;
        let out: BTreeSet<String> = cfg.succ[v]
            .iter()
            .flat_map(|(s, _)| live_in[*s].iter().cloned())
            .collect();
        let mut inn: BTreeSet<String> = match cfg.facts(model, v) {
            Some(f) => {
                let mut set: BTreeSet<String> = out.difference(&f.defs).cloned().collect();
                set.extend(f.uses.iter().cloned());
                set
            }
            None => out.clone(),
        };
        live_out[v] = out;
        if inn != live_in[v] {
            std::mem::swap(&mut live_in[v], &mut inn);
            for &(p, _) in &cfg.pred[v] {
                if !queued[p] {
                    queued[p] = true;
                    work.push_back(p);
                }
            }
        }
    }
    Liveness { live_in, live_out }
}

/// Data crossing the boundary of a candidate fragment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FragmentIo {
    /// Locals read before being written, ordered by first read.
    pub inputs: Vec<String>,
    /// Locals written (or declared) inside and needed after the fragment.
    pub outputs: Vec<String>,
    /// Union of live-in sets at every node control may reach on leaving.
    pub live_after: BTreeSet<String>,
    /// Top-level declarations of the fragment referenced by later siblings.
    pub escaping: Vec<String>,
}

/// A fragment's nodes and the edges leaving it.
pub struct Region<'a> {
    model: &'a MethodModel,
    cfg: &'a Cfg,
    pub stmts: Vec<StmtId>,
    pub nodes: HashSet<NodeId>,
    pub entry: NodeId,
}

impl<'a> Region<'a> {
    pub fn new(model: &'a MethodModel, cfg: &'a Cfg, stmts: &[StmtId]) -> Self {
        let nodes = cfg.nodes_of(model, stmts).into_iter().collect();
        Region {
            model,
            cfg,
            stmts: stmts.to_vec(),
            nodes,
            entry: cfg.entry_of(stmts[0]),
        }
    }

    /// Every statement id in the fragment subtrees, preorder.
    pub fn all_stmts(&self) -> Vec<StmtId> {
        self.stmts.iter().flat_map(|&s| self.model.subtree(s)).collect()
    }

    /// Edges from a fragment node to a node outside it.
    pub fn exit_edges(&self) -> Vec<(NodeId, NodeId, EdgeKind)> {
        let mut out = Vec::new();
        for &v in &self.nodes {
            for &(t, k) in &self.cfg.succ[v] {
                if !self.nodes.contains(&t) {
                    out.push((v, t, k));
                }
            }
        }
        out.sort_unstable_by_key(|(a, b, _)| (*a, *b));
        out
    }

    /// Fragment nodes reachable from the entry along non-exceptional-escape
    /// edges (catch handlers inside the fragment are followed).
    fn reachable_without(&self, blocked: &dyn Fn(NodeId) -> bool) -> Vec<NodeId> {
        let mut seen = HashSet::new();
        let mut stack = vec![self.entry];
        let mut order = Vec::new();
        while let Some(v) = stack.pop() {
            if !seen.insert(v) {
                continue;
            }
            order.push(v);
            if blocked(v) {
                continue;
            }
            for &(t, k) in &self.cfg.succ[v] {
                if k.is_completion() && self.nodes.contains(&t) {
                    stack.push(t);
                }
            }
        }
        order
    }

    fn normal_exit_from(&self, v: NodeId) -> bool {
        self.cfg.succ[v]
            .iter()
            .any(|&(t, k)| !self.nodes.contains(&t) && t != EXIT && matches!(k, EdgeKind::Normal | EdgeKind::Back))
    }

    /// Control can fall out of the fragment into the statement that follows.
    pub fn can_complete_normally(&self) -> bool {
        self.reachable_without(&|_| false)
            .into_iter()
            .any(|v| self.normal_exit_from(v))
    }

    pub fn has_return(&self) -> bool {
        self.all_stmts()
            .iter()
            .any(|&s| self.model.stmt(s).jump.is_some_and(|j| j.kind == JumpKind::Return))
    }

    /// Every path that leaves the fragment normally writes `name` first.
    pub fn definitely_assigns(&self, name: &str) -> bool {
        let defines = |v: NodeId| self.cfg.facts(self.model, v).is_some_and(|f| f.defs.contains(name));
        !self
            .reachable_without(&defines)
            .into_iter()
            .any(|v| !defines(v) && self.normal_exit_from(v))
    }
}

/// Inputs and outputs of a fragment given as a sibling sequence.
pub fn fragment_io(model: &MethodModel, cfg: &Cfg, live: &Liveness, stmts: &[StmtId]) -> FragmentIo {
    let region = Region::new(model, cfg, stmts);
    let first = stmts[0];

    let mut first_use: BTreeMap<String, usize> = BTreeMap::new();
    let mut defs = BTreeSet::new();
    let mut declared = BTreeSet::new();
    for s in region.all_stmts() {
        let st = model.stmt(s);
        for f in st.all_facts() {
            for (name, &at) in &f.first_use {
                let slot = first_use.entry(name.clone()).or_insert(at);
                *slot = (*slot).min(at);
            }
            defs.extend(f.defs.iter().cloned());
        }
        declared.extend(st.declares.iter().map(|&l| model.locals[l].name.clone()));
    }

    let live_entry = live.live_in(region.entry);
    let mut inputs: Vec<(usize, String)> = first_use
        .iter()
        .filter(|(name, _)| live_entry.contains(*name) && model.visible_local(name, first).is_some())
        .map(|(name, &at)| (at, name.clone()))
        .collect();
    inputs.sort();

    let live_after: BTreeSet<String> = region
        .exit_edges()
        .iter()
        .flat_map(|&(_, t, _)| live.live_in(t).iter().cloned())
        .collect();

    let last = *stmts.last().unwrap();
    let level = model.siblings(last);
    let later: Vec<StmtId> = level
        .iter()
        .skip_while(|&&s| s != last)
        .skip(1)
        .flat_map(|&s| model.subtree(s))
        .collect();
    let mut escaping = Vec::new();
    for &s in stmts {
        for &l in &model.stmt(s).declares {
            let name = &model.locals[l].name;
            let referenced = later.iter().any(|&t| {
                let st = model.stmt(t);
                st.all_facts().any(|f| f.uses.contains(name) || f.defs.contains(name))
            });
            if referenced && !escaping.contains(name) {
                escaping.push(name.clone());
            }
        }
    }

    let mut outputs: BTreeSet<String> = defs
        .union(&declared)
        .filter(|n| live_after.contains(*n))
        .cloned()
        .collect();
    outputs.extend(escaping.iter().cloned());

    FragmentIo {
        inputs: inputs.into_iter().map(|(_, n)| n).collect(),
        outputs: outputs.into_iter().collect(),
        live_after,
        escaping,
    }
}
