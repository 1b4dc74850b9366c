use std::collections::HashMap;

use serde::Serialize;

use crate::source::{ContainerRole, Facts, JumpKind, JumpTarget, LoopKind, MethodModel, StmtId, StmtKind};

pub type NodeId = usize;

pub const ENTRY: NodeId = 0;
pub const EXIT: NodeId = 1;

/// What a CFG node evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CfgNode {
    Entry,
    Exit,
    Stmt(StmtId),
    /// `for` condition or enhanced-`for` element binding.
    LoopHead(StmtId),
    /// `for` update clause.
    LoopStep(StmtId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EdgeKind {
    Normal,
    /// Loop back edge (also normal control flow).
    Back,
    /// Exception transfer into a `catch` clause.
    Catch,
    /// Exception or abrupt-completion transfer into a `finally` clause.
    Finally,
}

impl EdgeKind {
    /// Edges along which execution continues without an exception in flight
    /// towards the target (catch handlers complete normally).
    pub fn is_completion(self) -> bool {
        !matches!(self, EdgeKind::Finally)
    }

    pub fn is_exceptional(self) -> bool {
        matches!(self, EdgeKind::Catch | EdgeKind::Finally)
    }
}

/// Statement-level control-flow graph of one method.
#[derive(Debug, Clone)]
pub struct Cfg {
    pub nodes: Vec<CfgNode>,
    pub succ: Vec<Vec<(NodeId, EdgeKind)>>,
    pub pred: Vec<Vec<(NodeId, EdgeKind)>>,
    stmt_node: Vec<NodeId>,
    entry_node: Vec<NodeId>,
    loop_head: HashMap<StmtId, NodeId>,
    loop_step: HashMap<StmtId, NodeId>,
    /// Statements whose jump target is outside the model (flagged, not fatal).
    pub unsupported: Vec<StmtId>,
}

impl Cfg {
    pub fn node_of(&self, stmt: StmtId) -> NodeId {
        self.stmt_node[stmt]
    }

    /// Node at which control enters `stmt` (the body for `do`-`while`).
    pub fn entry_of(&self, stmt: StmtId) -> NodeId {
        self.entry_node[stmt]
    }

    pub fn loop_head_of(&self, stmt: StmtId) -> Option<NodeId> {
        self.loop_head.get(&stmt).copied()
    }

    pub fn loop_step_of(&self, stmt: StmtId) -> Option<NodeId> {
        self.loop_step.get(&stmt).copied()
    }

    /// Every node belonging to the given statements and their subtrees.
    pub fn nodes_of(&self, model: &MethodModel, stmts: &[StmtId]) -> Vec<NodeId> {
        let mut out = Vec::new();
        for &s in stmts {
            for id in model.subtree(s) {
                out.push(self.stmt_node[id]);
                out.extend(self.loop_head.get(&id));
                out.extend(self.loop_step.get(&id));
            }
        }
        out
    }

    pub fn back_edges(&self) -> Vec<(NodeId, NodeId)> {
        self.edges().filter(|(_, _, k)| *k == EdgeKind::Back).map(|(a, b, _)| (a, b)).collect()
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, EdgeKind)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(a, out)| out.iter().map(move |&(b, k)| (a, b, k)))
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.succ[from].iter().any(|(b, _)| *b == to)
    }

    /// Facts evaluated at `node`.
    pub fn facts<'m>(&self, model: &'m MethodModel, node: NodeId) -> Option<&'m Facts> {
        match self.nodes[node] {
            CfgNode::Entry | CfgNode::Exit => None,
            CfgNode::Stmt(s) => Some(&model.stmt(s).head),
            CfgNode::LoopHead(s) => model.stmt(s).loop_head.as_ref(),
            CfgNode::LoopStep(s) => model.stmt(s).loop_step.as_ref(),
        }
    }

    /// Statement a node belongs to.
    pub fn stmt_of(&self, node: NodeId) -> Option<StmtId> {
        match self.nodes[node] {
            CfgNode::Stmt(s) | CfgNode::LoopHead(s) | CfgNode::LoopStep(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Default, Clone)]
struct TryFrame {
    catches: Vec<NodeId>,
    finally: Option<NodeId>,
}

struct CfgBuilder<'m> {
    model: &'m MethodModel,
    cfg: Cfg,
    break_to: HashMap<StmtId, NodeId>,
    continue_to: HashMap<StmtId, NodeId>,
    frames: Vec<TryFrame>,
}

/// Build the statement-level CFG of `model`.
///
/// Switch groups fall through; every statement inside a `try` block may
/// transfer to each `catch` entry and to the `finally` entry. `return` and
/// `throw` reach the synthetic exit.
pub fn build_cfg(model: &MethodModel) -> Cfg {
    let n = model.statements.len();
    let mut nodes = vec![CfgNode::Entry, CfgNode::Exit];
    let mut stmt_node = Vec::with_capacity(n);
    for id in 0..n {
        stmt_node.push(nodes.len());
        nodes.push(CfgNode::Stmt(id));
    }
    let mut loop_head = HashMap::new();
    let mut loop_step = HashMap::new();
    for s in &model.statements {
        match s.loop_kind {
            Some(LoopKind::For) => {
                loop_head.insert(s.id, nodes.len());
                nodes.push(CfgNode::LoopHead(s.id));
                loop_step.insert(s.id, nodes.len());
                nodes.push(CfgNode::LoopStep(s.id));
            }
            Some(LoopKind::ForEach) => {
                loop_head.insert(s.id, nodes.len());
                nodes.push(CfgNode::LoopHead(s.id));
            }
            _ => {}
        }
    }
    let entry_node = (0..n)
        .map(|id| {
            let s = model.stmt(id);
            if s.loop_kind == Some(LoopKind::DoWhile) {
                s.children.first().map_or(stmt_node[id], |&b| stmt_node[b])
            } else {
                stmt_node[id]
            }
        })
        .collect();

    let count = nodes.len();
    let mut b = CfgBuilder {
        model,
        cfg: Cfg {
            nodes,
            succ: vec![Vec::new(); count],
            pred: vec![Vec::new(); count],
            stmt_node,
            entry_node,
            loop_head,
            loop_step,
            unsupported: Vec::new(),
        },
        break_to: HashMap::new(),
        continue_to: HashMap::new(),
        frames: Vec::new(),
    };

    let first = b.seq(&model.roots, EXIT);
    b.edge(ENTRY, first, EdgeKind::Normal);
    b.mark_back_edges();

    let mut cfg = b.cfg;
    for (a, out) in cfg.succ.iter().enumerate() {
        for &(t, k) in out {
            cfg.pred[t].push((a, k));
        }
    }
    cfg
}

impl CfgBuilder<'_> {
    fn edge(&mut self, from: NodeId, to: NodeId, kind: EdgeKind) {
        let out = &mut self.cfg.succ[from];
        match out.iter_mut().find(|(t, _)| *t == to) {
            // normal flow wins over an exceptional edge to the same node
            Some(existing) if existing.1.is_exceptional() && !kind.is_exceptional() => existing.1 = kind,
            Some(_) => {}
            None => out.push((to, kind)),
        }
    }

    fn entry(&self, id: StmtId) -> NodeId {
        self.cfg.entry_node[id]
    }

    fn node(&self, id: StmtId) -> NodeId {
        self.cfg.stmt_node[id]
    }

    /// Wire a sibling sequence; returns the node control enters first.
    fn seq(&mut self, ids: &[StmtId], follow: NodeId) -> NodeId {
        let mut next = follow;
        for &id in ids.iter().rev() {
            self.stmt(id, next);
            next = self.entry(id);
        }
        next
    }

    fn exceptional(&mut self, from: NodeId) {
        let frames = self.frames.clone();
        for f in frames.iter().rev() {
            for &c in &f.catches {
                self.edge(from, c, EdgeKind::Catch);
            }
            if let Some(fin) = f.finally {
                self.edge(from, fin, EdgeKind::Finally);
            }
        }
    }

    fn stmt(&mut self, id: StmtId, follow: NodeId) {
        let s = self.model.stmt(id);
        let me = self.node(id);
        if !s.is_container() {
            self.exceptional(me);
        }

        if s.label.is_some() {
            self.break_to.insert(id, follow);
        }

        if s.is_container() || s.kind == StmtKind::Block {
            let first = self.seq(&s.children, follow);
            self.edge(me, first, EdgeKind::Normal);
            return;
        }

        match (s.kind, s.loop_kind) {
            (StmtKind::If, _) => {
                let mut has_else = false;
                for &c in &s.children {
                    has_else |= self.model.stmt(c).container == Some(ContainerRole::Else);
                    self.stmt(c, follow);
                    let e = self.entry(c);
                    self.edge(me, e, EdgeKind::Normal);
                }
                if !has_else {
                    self.edge(me, follow, EdgeKind::Normal);
                }
            }
            (StmtKind::Loop, Some(kind)) => {
                let body = s.children.first().copied();
                self.break_to.insert(id, follow);
                match kind {
                    LoopKind::While => {
                        self.continue_to.insert(id, me);
                        if let Some(body) = body {
                            self.stmt(body, me);
                            let e = self.entry(body);
                            self.edge(me, e, EdgeKind::Normal);
                        }
                        self.edge(me, follow, EdgeKind::Normal);
                    }
                    LoopKind::DoWhile => {
                        self.continue_to.insert(id, me);
                        if let Some(body) = body {
                            self.stmt(body, me);
                            let e = self.entry(body);
                            self.edge(me, e, EdgeKind::Normal);
                        }
                        self.edge(me, follow, EdgeKind::Normal);
                    }
                    LoopKind::For => {
                        let head = self.cfg.loop_head[&id];
                        let step = self.cfg.loop_step[&id];
                        self.exceptional(head);
                        self.exceptional(step);
                        self.continue_to.insert(id, step);
                        self.edge(me, head, EdgeKind::Normal);
                        if let Some(body) = body {
                            self.stmt(body, step);
                            let e = self.entry(body);
                            self.edge(head, e, EdgeKind::Normal);
                        }
                        self.edge(head, follow, EdgeKind::Normal);
                        self.edge(step, head, EdgeKind::Normal);
                    }
                    LoopKind::ForEach => {
                        let head = self.cfg.loop_head[&id];
                        self.exceptional(head);
                        self.continue_to.insert(id, head);
                        self.edge(me, head, EdgeKind::Normal);
                        if let Some(body) = body {
                            self.stmt(body, head);
                            let e = self.entry(body);
                            self.edge(head, e, EdgeKind::Normal);
                        }
                        self.edge(head, follow, EdgeKind::Normal);
                    }
                }
            }
            (StmtKind::Switch, _) => {
                self.break_to.insert(id, follow);
                let groups = s.children.clone();
                if !s.has_default || groups.is_empty() {
                    self.edge(me, follow, EdgeKind::Normal);
                }
                let mut next = follow;
                for &g in groups.iter().rev() {
                    let after = if s.arrow_switch { follow } else { next };
                    self.stmt(g, after);
                    next = self.entry(g);
                }
                for &g in &groups {
                    let e = self.entry(g);
                    self.edge(me, e, EdgeKind::Normal);
                }
            }
            (StmtKind::Try, _) => {
                let role = |c: &StmtId| self.model.stmt(*c).container;
                let body = s.children.iter().copied().find(|c| role(c) == Some(ContainerRole::TryBody));
                let catches: Vec<StmtId> =
                    s.children.iter().copied().filter(|c| role(c) == Some(ContainerRole::Catch)).collect();
                let finally = s.children.iter().copied().find(|c| role(c) == Some(ContainerRole::Finally));

                let after_clauses = finally.map_or(follow, |f| self.entry(f));
                let frame = TryFrame {
                    catches: catches.iter().map(|&c| self.entry(c)).collect(),
                    finally: finally.map(|f| self.entry(f)),
                };
                self.frames.push(frame.clone());
                // resource initialisation may throw as well
                self.exceptional(me);
                if let Some(body) = body {
                    self.stmt(body, after_clauses);
                    let e = self.entry(body);
                    self.edge(me, e, EdgeKind::Normal);
                } else {
                    self.edge(me, after_clauses, EdgeKind::Normal);
                }
                self.frames.pop();

                self.frames.push(TryFrame { catches: Vec::new(), finally: frame.finally });
                for c in catches {
                    self.stmt(c, after_clauses);
                }
                self.frames.pop();
                if let Some(f) = finally {
                    self.stmt(f, follow);
                }
            }
            _ => match s.jump {
                Some(j) => match (j.kind, j.target) {
                    (JumpKind::Return | JumpKind::Throw, _) => self.edge(me, EXIT, EdgeKind::Normal),
                    (JumpKind::Break, JumpTarget::Statement(t)) => {
                        let to = self.break_to.get(&t).copied().unwrap_or(EXIT);
                        self.edge(me, to, EdgeKind::Normal);
                    }
                    (JumpKind::Continue, JumpTarget::Statement(t)) => {
                        let to = self.continue_to.get(&t).copied().unwrap_or(EXIT);
                        self.edge(me, to, EdgeKind::Normal);
                    }
                    _ => {
                        self.cfg.unsupported.push(id);
                        self.edge(me, follow, EdgeKind::Normal);
                    }
                },
                None => {
                    if s.children.is_empty() {
                        self.edge(me, follow, EdgeKind::Normal);
                    } else {
                        // synchronized and friends: header, then body
                        let first = self.seq(&s.children, follow);
                        self.edge(me, first, EdgeKind::Normal);
                    }
                }
            },
        }
    }

    /// An edge is a back edge when it re-enters a loop's condition node from
    /// inside that loop.
    fn mark_back_edges(&mut self) {
        let model = self.model;
        for a in 0..self.cfg.succ.len() {
            let from_stmt = self.cfg.stmt_of(a);
            for i in 0..self.cfg.succ[a].len() {
                let (b, kind) = self.cfg.succ[a][i];
                if kind != EdgeKind::Normal {
                    continue;
                }
                let target_loop = match self.cfg.nodes[b] {
                    CfgNode::Stmt(s) if model.stmt(s).loop_kind == Some(LoopKind::While) => Some(s),
                    CfgNode::LoopHead(s) => Some(s),
                    _ => None,
                };
                let Some(l) = target_loop else { continue };
                let Some(fs) = from_stmt else { continue };
                let inside = fs != l && model.is_ancestor_or_self(l, fs);
                let from_step = self.cfg.nodes[a] == CfgNode::LoopStep(l);
                if inside || from_step {
                    self.cfg.succ[a][i].1 = EdgeKind::Back;
                }
            }
        }
        // do-while: the condition jumps back to the body
        for s in &model.statements {
            if s.loop_kind == Some(LoopKind::DoWhile) {
                if let Some(&body) = s.children.first() {
                    let me = self.cfg.stmt_node[s.id];
                    let target = self.cfg.stmt_node[body];
                    for e in &mut self.cfg.succ[me] {
                        if e.0 == target {
                            e.1 = EdgeKind::Back;
                        }
                    }
                }
            }
        }
    }
}
