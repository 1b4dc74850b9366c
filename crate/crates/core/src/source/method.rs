use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tree_sitter::Node;

use super::facts::{ExprWalker, Facts, ScopeEnv};
use super::{LineRange, SourceUnit, Span};

pub type StmtId = usize;
pub type LocalId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StmtKind {
    Declaration,
    Expression,
    If,
    Loop,
    Switch,
    Try,
    Return,
    Break,
    Continue,
    Throw,
    Block,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    While,
    DoWhile,
    For,
    ForEach,
}

/// Role of a synthetic container statement: the body of a compound statement.
/// Containers are never extraction units themselves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContainerRole {
    Then,
    Else,
    Body,
    Case,
    TryBody,
    Catch,
    Finally,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpKind {
    Break,
    Continue,
    Return,
    Throw,
    Yield,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpTarget {
    Statement(StmtId),
    MethodExit,
    /// Labeled jump whose label is not in the modeled method, or a `yield`.
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Jump {
    pub kind: JumpKind,
    pub target: JumpTarget,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Statement {
    pub id: StmtId,
    pub span: Span,
    pub kind: StmtKind,
    pub container: Option<ContainerRole>,
    pub loop_kind: Option<LoopKind>,
    pub label: Option<String>,
    pub parent: Option<StmtId>,
    pub children: Vec<StmtId>,
    /// Facts of the statement's own evaluation point (for `for`: the init).
    pub head: Facts,
    /// Loop condition (`for`) or element binding (enhanced `for`).
    pub loop_head: Option<Facts>,
    /// Loop update (`for`).
    pub loop_step: Option<Facts>,
    pub jump: Option<Jump>,
    /// Locals introduced by this statement.
    pub declares: Vec<LocalId>,
    /// Lines holding tokens of this statement that are not inside a child.
    pub own_lines: Vec<u32>,
    /// `switch` only: a `default` label exists.
    pub has_default: bool,
    /// `switch` only: arrow-form rules (no fallthrough).
    pub arrow_switch: bool,
}

impl Statement {
    pub fn lines(&self) -> LineRange {
        self.span.lines()
    }

    pub fn is_container(&self) -> bool {
        self.container.is_some()
    }

    /// Union of the written locals over every evaluation point.
    pub fn defs(&self) -> BTreeSet<String> {
        self.all_facts().flat_map(|f| f.defs.iter().cloned()).collect()
    }

    /// Union of the read locals over every evaluation point.
    pub fn uses(&self) -> BTreeSet<String> {
        self.all_facts().flat_map(|f| f.uses.iter().cloned()).collect()
    }

    pub fn all_facts(&self) -> impl Iterator<Item = &Facts> {
        std::iter::once(&self.head)
            .chain(self.loop_head.iter())
            .chain(self.loop_step.iter())
    }
}

/// A local variable or parameter of the host method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalDecl {
    pub id: LocalId,
    pub name: String,
    /// Declared type text, verbatim from the source.
    pub ty: String,
    /// `None` for method parameters.
    pub decl_stmt: Option<StmtId>,
    /// Statement whose subtree bounds the scope; `None` is the method body.
    pub scope_owner: Option<StmtId>,
    pub offset: usize,
}

impl LocalDecl {
    pub fn is_param(&self) -> bool {
        self.decl_stmt.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MethodLocator {
    Name(String),
    Line(u32),
}

impl FromStr for MethodLocator {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Ok(match s.parse::<u32>() {
            Ok(line) => MethodLocator::Line(line),
            Err(_) => MethodLocator::Name(s.to_owned()),
        })
    }
}

impl fmt::Display for MethodLocator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodLocator::Name(n) => f.write_str(n),
            MethodLocator::Line(l) => write!(f, "line {l}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LocateError {
    #[error("no method matches {0}")]
    MethodNotFound(String),
    #[error("{name} is overloaded ({count} declarations); locate it by line instead")]
    AmbiguousMethod { name: String, count: usize },
}

/// Statement-level model of one host method.
#[derive(Debug, Clone)]
pub struct MethodModel {
    unit: Arc<SourceUnit>,
    pub name: String,
    pub span: Span,
    pub signature_span: LineRange,
    pub body_span: LineRange,
    pub statements: Vec<Statement>,
    pub roots: Vec<StmtId>,
    pub locals: Vec<LocalDecl>,
    pub params: Vec<LocalId>,
    /// `None` for constructors.
    pub return_type: Option<String>,
    pub is_static: bool,
    pub type_parameters: Option<String>,
    pub throws_clause: Option<String>,
    /// Methods declared directly in the enclosing type: (name, arity).
    pub sibling_methods: Vec<(String, usize)>,
    pub body_open_byte: usize,
    pub body_close_byte: usize,
    bearing: BTreeSet<u32>,
    subtree_bearing: Vec<BTreeSet<u32>>,
}

impl MethodModel {
    pub fn unit(&self) -> &Arc<SourceUnit> {
        &self.unit
    }

    pub fn stmt(&self, id: StmtId) -> &Statement {
        &self.statements[id]
    }

    pub fn is_void(&self) -> bool {
        matches!(self.return_type.as_deref(), None | Some("void"))
    }

    pub fn param_decls(&self) -> impl Iterator<Item = &LocalDecl> {
        self.params.iter().map(|&p| &self.locals[p])
    }

    pub fn param_names(&self) -> BTreeSet<String> {
        self.param_decls().map(|d| d.name.clone()).collect()
    }

    /// Siblings of `id` in document order (the roots for top-level statements).
    pub fn siblings(&self, id: StmtId) -> &[StmtId] {
        match self.statements[id].parent {
            Some(p) => &self.statements[p].children,
            None => &self.roots,
        }
    }

    /// `id` and all its descendants, preorder.
    pub fn subtree(&self, id: StmtId) -> Vec<StmtId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(s) = stack.pop() {
            out.push(s);
            stack.extend(self.statements[s].children.iter().rev());
        }
        out
    }

    pub fn is_ancestor_or_self(&self, ancestor: StmtId, mut id: StmtId) -> bool {
        loop {
            if id == ancestor {
                return true;
            }
            match self.statements[id].parent {
                Some(p) => id = p,
                None => return false,
            }
        }
    }

    /// Lines carrying at least one non-comment token of `id`'s subtree.
    pub fn bearing_lines(&self, id: StmtId) -> &BTreeSet<u32> {
        &self.subtree_bearing[id]
    }

    /// Statement-bearing lines of the whole body.
    pub fn body_bearing_lines(&self) -> &BTreeSet<u32> {
        &self.bearing
    }

    /// Local visible under `name` at the start of statement `at`, declared
    /// outside `at`'s subtree.
    pub fn visible_local(&self, name: &str, at: StmtId) -> Option<&LocalDecl> {
        let start = self.statements[at].span.start_byte;
        self.locals
            .iter()
            .filter(|d| d.name == name)
            .filter(|d| match d.decl_stmt {
                None => true,
                Some(ds) => {
                    !self.is_ancestor_or_self(at, ds)
                        && d.offset < start
                        && d.scope_owner.is_none_or(|o| self.is_ancestor_or_self(o, at))
                }
            })
            .max_by_key(|d| (d.decl_stmt.is_some(), d.offset))
    }

    /// Names of locals and parameters visible at the start of `at`.
    pub fn visible_names(&self, at: StmtId) -> BTreeSet<String> {
        self.locals
            .iter()
            .filter(|d| self.visible_local(&d.name, at).is_some_and(|v| v.id == d.id))
            .map(|d| d.name.clone())
            .collect()
    }

    /// Number of method declarations in the enclosing type with this name and arity.
    pub fn collides(&self, name: &str, arity: Option<usize>) -> bool {
        self.sibling_methods
            .iter()
            .any(|(n, a)| n == name && arity.is_none_or(|ar| ar == *a))
    }
}

/// Find a method in `unit` and build its statement model.
///
/// A line locator selects the innermost method whose declaration contains the
/// line; a name locator must match exactly one method with a body.
pub fn locate_method(unit: &Arc<SourceUnit>, locator: &MethodLocator) -> Result<MethodModel, LocateError> {
    let root = unit.tree().root_node();
    let mut methods = Vec::new();
    collect_methods(root, &mut methods);

    let chosen = match locator {
        MethodLocator::Line(line) => methods
            .into_iter()
            .filter(|m| Span::of(m).lines().contains_line(*line))
            .min_by_key(|m| m.end_byte() - m.start_byte())
            .ok_or_else(|| LocateError::MethodNotFound(locator.to_string()))?,
        MethodLocator::Name(name) => {
            let mut found: Vec<_> = methods
                .into_iter()
                .filter(|m| {
                    m.child_by_field_name("name")
                        .is_some_and(|n| unit.node_text(&n) == name)
                })
                .collect();
            match found.len() {
                0 => return Err(LocateError::MethodNotFound(name.clone())),
                1 => found.pop().unwrap(),
                count => {
                    return Err(LocateError::AmbiguousMethod {
                        name: name.clone(),
                        count,
                    })
                }
            }
        }
    };
    Ok(build_model(unit, chosen))
}

fn collect_methods<'t>(node: Node<'t>, out: &mut Vec<Node<'t>>) {
    if matches!(node.kind(), "method_declaration" | "constructor_declaration")
        && node.child_by_field_name("body").is_some()
    {
        out.push(node);
    }
    let mut cursor = node.walk();
    for child in node.named_children(&mut cursor) {
        collect_methods(child, out);
    }
}

fn arity(params: Option<Node<'_>>) -> usize {
    params.map_or(0, |p| {
        let mut cursor = p.walk();
        p.named_children(&mut cursor)
            .filter(|c| matches!(c.kind(), "formal_parameter" | "spread_parameter"))
            .count()
    })
}

fn build_model(unit: &Arc<SourceUnit>, node: Node<'_>) -> MethodModel {
    let text = |n: &Node<'_>| unit.node_text(n).to_owned();
    let name = node.child_by_field_name("name").map(|n| text(&n)).unwrap_or_default();
    let body = node.child_by_field_name("body").expect("located methods have bodies");
    let is_constructor = node.kind() == "constructor_declaration";

    let mut is_static = false;
    let mut throws_clause = None;
    let mut cursor = node.walk();
    for child in node.named_children(&mut cursor) {
        match child.kind() {
            "modifiers" => {
                let mut mc = child.walk();
                is_static = child.children(&mut mc).any(|m| m.kind() == "static");
            }
            "throws" => throws_clause = Some(text(&child)),
            _ => {}
        }
    }
    let return_type = if is_constructor {
        None
    } else {
        node.child_by_field_name("type").map(|t| {
            let dims = node.child_by_field_name("dimensions").map(|d| text(&d)).unwrap_or_default();
            format!("{}{}", text(&t), dims)
        })
    };
    let type_parameters = node.child_by_field_name("type_parameters").map(|t| text(&t));

    let sibling_methods = node
        .parent()
        .map(|p| {
            let mut c = p.walk();
            p.named_children(&mut c)
                .filter(|m| m.kind() == "method_declaration")
                .filter_map(|m| {
                    let n = m.child_by_field_name("name")?;
                    Some((text(&n), arity(m.child_by_field_name("parameters"))))
                })
                .collect()
        })
        .unwrap_or_default();

    let mut b = Builder {
        src: unit.text().as_bytes(),
        stmts: Vec::new(),
        locals: Vec::new(),
        scopes: vec![Scope { owner: None, names: Vec::new() }],
        targets: Vec::new(),
        current: None,
    };

    let mut params = Vec::new();
    if let Some(plist) = node.child_by_field_name("parameters") {
        let mut c = plist.walk();
        for p in plist.named_children(&mut c) {
            let (pname, ty) = match p.kind() {
                "formal_parameter" => {
                    let Some(n) = p.child_by_field_name("name") else { continue };
                    let ty = p.child_by_field_name("type").map(|t| text(&t)).unwrap_or_default();
                    let dims = p.child_by_field_name("dimensions").map(|d| text(&d)).unwrap_or_default();
                    (text(&n), format!("{ty}{dims}"))
                }
                "spread_parameter" => {
                    let mut ty = String::new();
                    let mut pn = None;
                    let mut sc = p.walk();
                    for part in p.named_children(&mut sc) {
                        match part.kind() {
                            "variable_declarator" => {
                                pn = part.child_by_field_name("name").map(|n| text(&n))
                            }
                            "modifiers" | "annotation" | "marker_annotation" => {}
                            _ => ty = text(&part),
                        }
                    }
                    let Some(pn) = pn else { continue };
                    (pn, format!("{ty}[]"))
                }
                _ => continue,
            };
            let offset = p.start_byte();
            let id = b.add_local(&pname, &ty, None, None, offset);
            b.scopes[0].names.push((pname, Some(id)));
            params.push(id);
        }
    }

    let mut roots = Vec::new();
    let mut bc = body.walk();
    for child in body.named_children(&mut bc) {
        if is_statement_node(&child) {
            roots.push(b.stmt(child, None));
        }
    }

    let open_line = body.start_position().row as u32 + 1;
    let close_line = body.end_position().row as u32 + 1;
    let body_span = match (roots.first(), roots.last()) {
        (Some(&f), Some(&l)) => LineRange::new(b.stmts[f].span.start_line, b.stmts[l].span.end_line),
        _ if close_line > open_line + 1 => LineRange::new(open_line + 1, close_line - 1),
        _ => LineRange::new(open_line, close_line),
    };
    let decl_line = node.start_position().row as u32 + 1;

    let Builder { stmts, locals, .. } = b;
    let bearing = stmts.iter().flat_map(|s| s.own_lines.iter().copied()).collect();
    // Children are allocated after their parent, so a reverse sweep sees them first.
    let mut subtree_bearing: Vec<BTreeSet<u32>> =
        stmts.iter().map(|s| s.own_lines.iter().copied().collect()).collect();
    for id in (0..stmts.len()).rev() {
        if let Some(p) = stmts[id].parent {
            let lines = std::mem::take(&mut subtree_bearing[id]);
            subtree_bearing[p].extend(lines.iter().copied());
            subtree_bearing[id] = lines;
        }
    }

    MethodModel {
        unit: Arc::clone(unit),
        name,
        span: Span::of(&node),
        signature_span: LineRange::new(decl_line, open_line),
        body_span,
        statements: stmts,
        roots,
        locals,
        params,
        return_type,
        is_static,
        type_parameters,
        throws_clause,
        sibling_methods,
        body_open_byte: body.start_byte(),
        body_close_byte: body.end_byte(),
        bearing,
        subtree_bearing,
    }
}

fn is_comment(node: &Node<'_>) -> bool {
    matches!(node.kind(), "line_comment" | "block_comment" | "comment")
}

fn is_statement_node(node: &Node<'_>) -> bool {
    node.is_named() && !is_comment(node) && node.kind() != "switch_label"
}

struct Scope {
    owner: Option<StmtId>,
    names: Vec<(String, Option<LocalId>)>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum TargetKind {
    Loop,
    Switch,
    Labeled,
}

struct Builder<'s> {
    src: &'s [u8],
    stmts: Vec<Statement>,
    locals: Vec<LocalDecl>,
    scopes: Vec<Scope>,
    targets: Vec<(Option<String>, StmtId, TargetKind)>,
    current: Option<StmtId>,
}

impl ScopeEnv for Builder<'_> {
    fn is_local(&self, name: &str) -> bool {
        for scope in self.scopes.iter().rev() {
            if let Some((_, id)) = scope.names.iter().rev().find(|(n, _)| n == name) {
                return id.is_some();
            }
        }
        false
    }

    fn declare_binding(&mut self, name: &str, ty: &str, facts: &mut Facts) {
        let owner = self.scopes.last().and_then(|s| s.owner);
        let offset = self.current.map_or(0, |c| self.stmts[c].span.start_byte);
        let id = self.add_local(name, ty, self.current, owner, offset);
        if let Some(cur) = self.current {
            self.stmts[cur].declares.push(id);
        }
        self.scopes.last_mut().unwrap().names.push((name.to_owned(), Some(id)));
        facts.add_def(name);
    }

    fn push_shadow(&mut self, names: Vec<String>) {
        let owner = self.scopes.last().and_then(|s| s.owner);
        self.scopes.push(Scope {
            owner,
            names: names.into_iter().map(|n| (n, None)).collect(),
        });
    }

    fn pop_shadow(&mut self) {
        self.scopes.pop();
    }
}

impl<'s> Builder<'s> {
    fn text(&self, node: &Node<'_>) -> &'s str {
        std::str::from_utf8(&self.src[node.start_byte()..node.end_byte()]).unwrap_or("")
    }

    fn add_local(
        &mut self,
        name: &str,
        ty: &str,
        decl_stmt: Option<StmtId>,
        scope_owner: Option<StmtId>,
        offset: usize,
    ) -> LocalId {
        let id = self.locals.len();
        self.locals.push(LocalDecl {
            id,
            name: name.to_owned(),
            ty: ty.to_owned(),
            decl_stmt,
            scope_owner,
            offset,
        });
        id
    }

    fn push_scope(&mut self, owner: StmtId) {
        self.scopes.push(Scope { owner: Some(owner), names: Vec::new() });
    }

    fn pop_scope(&mut self) {
        self.scopes.pop();
    }

    fn declare(&mut self, stmt: StmtId, name: &str, ty: &str, offset: usize) -> LocalId {
        let owner = self.scopes.last().and_then(|s| s.owner);
        let id = self.add_local(name, ty, Some(stmt), owner, offset);
        self.stmts[stmt].declares.push(id);
        self.scopes.last_mut().unwrap().names.push((name.to_owned(), Some(id)));
        id
    }

    fn alloc(&mut self, span_node: &Node<'_>, kind: StmtKind, parent: Option<StmtId>) -> StmtId {
        let id = self.stmts.len();
        self.stmts.push(Statement {
            id,
            span: Span::of(span_node),
            kind,
            container: None,
            loop_kind: None,
            label: None,
            parent,
            children: Vec::new(),
            head: Facts::default(),
            loop_head: None,
            loop_step: None,
            jump: None,
            declares: Vec::new(),
            own_lines: Vec::new(),
            has_default: false,
            arrow_switch: false,
        });
        id
    }

    fn facts_of(&mut self, id: StmtId, node: Node<'_>) -> Facts {
        let saved = self.current.replace(id);
        let mut facts = Facts::default();
        ExprWalker { src: self.src }.walk(node, self, &mut facts, false);
        self.current = saved;
        facts
    }

    fn stmt(&mut self, node: Node<'_>, parent: Option<StmtId>) -> StmtId {
        self.stmt_labeled(node, node, parent, None)
    }

    fn stmt_labeled(
        &mut self,
        node: Node<'_>,
        span_node: Node<'_>,
        parent: Option<StmtId>,
        label: Option<String>,
    ) -> StmtId {
        if node.kind() == "labeled_statement" {
            let mut c = node.walk();
            let lbl = node
                .named_children(&mut c)
                .find(|n| n.kind() == "identifier")
                .map(|n| self.text(&n).to_owned());
            let mut c = node.walk();
            let inner = node
                .named_children(&mut c)
                .filter(|n| n.kind() != "identifier" && !is_comment(n))
                .last();
            if let Some(inner) = inner {
                return self.stmt_labeled(inner, span_node, parent, lbl);
            }
        }

        let kind = match node.kind() {
            "local_variable_declaration" => StmtKind::Declaration,
            "expression_statement" => StmtKind::Expression,
            "if_statement" => StmtKind::If,
            "while_statement" | "do_statement" | "for_statement" | "enhanced_for_statement" => StmtKind::Loop,
            "switch_expression" => StmtKind::Switch,
            "try_statement" | "try_with_resources_statement" => StmtKind::Try,
            "return_statement" => StmtKind::Return,
            "break_statement" => StmtKind::Break,
            "continue_statement" => StmtKind::Continue,
            "throw_statement" => StmtKind::Throw,
            "block" => StmtKind::Block,
            _ => StmtKind::Other,
        };
        let id = self.alloc(&span_node, kind, parent);
        self.stmts[id].label = label.clone();
        if label.is_some() {
            self.targets.push((label.clone(), id, TargetKind::Labeled));
        }

        match node.kind() {
            "local_variable_declaration" => {
                let ty = node.child_by_field_name("type").map(|t| self.text(&t)).unwrap_or("");
                let mut facts = Facts::default();
                let mut c = node.walk();
                let declarators: Vec<_> = node.children_by_field_name("declarator", &mut c).collect();
                for d in declarators {
                    let Some(n) = d.child_by_field_name("name") else { continue };
                    if let Some(v) = d.child_by_field_name("value") {
                        let f = self.facts_of(id, v);
                        facts.merge(&f);
                        facts.add_def(self.text(&n));
                    }
                    let dims = d.child_by_field_name("dimensions").map(|x| self.text(&x)).unwrap_or("");
                    let name = self.text(&n);
                    self.declare(id, name, &format!("{ty}{dims}"), n.start_byte());
                }
                self.stmts[id].head = facts;
            }
            "block" => {
                self.push_scope(id);
                self.block_children(id, node);
                self.pop_scope();
            }
            "if_statement" => {
                if let Some(c) = node.child_by_field_name("condition") {
                    self.stmts[id].head = self.facts_of(id, c);
                }
                if let Some(t) = node.child_by_field_name("consequence") {
                    self.container(id, t, ContainerRole::Then);
                }
                if let Some(e) = node.child_by_field_name("alternative") {
                    self.container(id, e, ContainerRole::Else);
                }
            }
            "while_statement" | "do_statement" => {
                self.stmts[id].loop_kind = Some(if node.kind() == "while_statement" {
                    LoopKind::While
                } else {
                    LoopKind::DoWhile
                });
                if let Some(c) = node.child_by_field_name("condition") {
                    self.stmts[id].head = self.facts_of(id, c);
                }
                self.targets.push((label.clone(), id, TargetKind::Loop));
                if let Some(body) = node.child_by_field_name("body") {
                    self.container(id, body, ContainerRole::Body);
                }
                self.targets.pop();
            }
            "for_statement" => {
                self.stmts[id].loop_kind = Some(LoopKind::For);
                self.push_scope(id);
                let mut c = node.walk();
                let inits: Vec<_> = node.children_by_field_name("init", &mut c).collect();
                let mut init = Facts::default();
                for i in inits {
                    if i.kind() == "local_variable_declaration" {
                        let ty = i.child_by_field_name("type").map(|t| self.text(&t)).unwrap_or("");
                        let mut dc = i.walk();
                        let decls: Vec<_> = i.children_by_field_name("declarator", &mut dc).collect();
                        for d in decls {
                            let Some(n) = d.child_by_field_name("name") else { continue };
                            if let Some(v) = d.child_by_field_name("value") {
                                let f = self.facts_of(id, v);
                                init.merge(&f);
                                init.add_def(self.text(&n));
                            }
                            let name = self.text(&n);
                            self.declare(id, name, ty, n.start_byte());
                        }
                    } else {
                        let f = self.facts_of(id, i);
                        init.merge(&f);
                    }
                }
                self.stmts[id].head = init;
                let cond = node
                    .child_by_field_name("condition")
                    .map(|c| self.facts_of(id, c))
                    .unwrap_or_default();
                let mut step = Facts::default();
                let mut c = node.walk();
                let updates: Vec<_> = node.children_by_field_name("update", &mut c).collect();
                for u in updates {
                    let f = self.facts_of(id, u);
                    step.merge(&f);
                }
                self.stmts[id].loop_head = Some(cond);
                self.stmts[id].loop_step = Some(step);
                self.targets.push((label.clone(), id, TargetKind::Loop));
                if let Some(body) = node.child_by_field_name("body") {
                    self.container(id, body, ContainerRole::Body);
                }
                self.targets.pop();
                self.pop_scope();
            }
            "enhanced_for_statement" => {
                self.stmts[id].loop_kind = Some(LoopKind::ForEach);
                if let Some(v) = node.child_by_field_name("value") {
                    self.stmts[id].head = self.facts_of(id, v);
                }
                self.push_scope(id);
                let mut binding = Facts::default();
                if let Some(n) = node.child_by_field_name("name") {
                    if n.kind() == "identifier" {
                        let ty = node.child_by_field_name("type").map(|t| self.text(&t)).unwrap_or("");
                        let dims = node.child_by_field_name("dimensions").map(|x| self.text(&x)).unwrap_or("");
                        let name = self.text(&n);
                        self.declare(id, name, &format!("{ty}{dims}"), n.start_byte());
                        binding.add_def(name);
                    }
                }
                self.stmts[id].loop_head = Some(binding);
                self.targets.push((label.clone(), id, TargetKind::Loop));
                if let Some(body) = node.child_by_field_name("body") {
                    self.container(id, body, ContainerRole::Body);
                }
                self.targets.pop();
                self.pop_scope();
            }
            "switch_expression" => {
                if let Some(c) = node.child_by_field_name("condition") {
                    self.stmts[id].head = self.facts_of(id, c);
                }
                self.targets.push((label.clone(), id, TargetKind::Switch));
                if let Some(block) = node.child_by_field_name("body") {
                    self.switch_block(id, block);
                }
                self.targets.pop();
            }
            "try_statement" | "try_with_resources_statement" => {
                self.push_scope(id);
                if let Some(res) = node.child_by_field_name("resources") {
                    let mut facts = Facts::default();
                    let mut c = res.walk();
                    let resources: Vec<_> = res.named_children(&mut c).filter(|r| r.kind() == "resource").collect();
                    for r in resources {
                        match (r.child_by_field_name("name"), r.child_by_field_name("value")) {
                            (Some(n), value) => {
                                if let Some(v) = value {
                                    let f = self.facts_of(id, v);
                                    facts.merge(&f);
                                }
                                let ty = r.child_by_field_name("type").map(|t| self.text(&t)).unwrap_or("");
                                let name = self.text(&n);
                                facts.add_def(name);
                                self.declare(id, name, ty, n.start_byte());
                            }
                            (None, _) => {
                                let f = self.facts_of(id, r);
                                facts.merge(&f);
                            }
                        }
                    }
                    self.stmts[id].head = facts;
                }
                if let Some(body) = node.child_by_field_name("body") {
                    self.container(id, body, ContainerRole::TryBody);
                }
                self.pop_scope();
                let mut c = node.walk();
                let clauses: Vec<_> = node.named_children(&mut c).collect();
                for clause in clauses {
                    match clause.kind() {
                        "catch_clause" => self.catch_clause(id, clause),
                        "finally_clause" => {
                            let cid = self.alloc(&clause, StmtKind::Block, Some(id));
                            self.stmts[cid].container = Some(ContainerRole::Finally);
                            self.stmts[id].children.push(cid);
                            self.push_scope(cid);
                            let mut fc = clause.walk();
                            let block = clause.named_children(&mut fc).find(|n| n.kind() == "block");
                            if let Some(block) = block {
                                self.block_children(cid, block);
                            }
                            self.pop_scope();
                            self.finish(cid, clause);
                        }
                        _ => {}
                    }
                }
            }
            "return_statement" | "throw_statement" => {
                self.stmts[id].head = self.facts_of(id, node);
                let kind = if node.kind() == "return_statement" {
                    JumpKind::Return
                } else {
                    JumpKind::Throw
                };
                self.stmts[id].jump = Some(Jump { kind, target: JumpTarget::MethodExit });
            }
            "break_statement" | "continue_statement" => {
                let is_break = node.kind() == "break_statement";
                let mut c = node.walk();
                let lbl = node
                    .named_children(&mut c)
                    .find(|n| n.kind() == "identifier")
                    .map(|n| self.text(&n).to_owned());
                let target = self
                    .targets
                    .iter()
                    .rev()
                    .find(|(l, _, k)| match (&lbl, is_break) {
                        (Some(want), true) => l.as_deref() == Some(want.as_str()),
                        (Some(want), false) => {
                            l.as_deref() == Some(want.as_str()) && *k == TargetKind::Loop
                        }
                        (None, true) => matches!(k, TargetKind::Loop | TargetKind::Switch),
                        (None, false) => *k == TargetKind::Loop,
                    })
                    .map(|(_, t, _)| JumpTarget::Statement(*t))
                    .unwrap_or(JumpTarget::Unresolved);
                let kind = if is_break { JumpKind::Break } else { JumpKind::Continue };
                self.stmts[id].jump = Some(Jump { kind, target });
            }
            "yield_statement" => {
                self.stmts[id].head = self.facts_of(id, node);
                self.stmts[id].jump = Some(Jump { kind: JumpKind::Yield, target: JumpTarget::Unresolved });
            }
            "synchronized_statement" => {
                let mut c = node.walk();
                let parts: Vec<_> = node.named_children(&mut c).collect();
                for part in parts {
                    if part.kind() == "block" {
                        self.container(id, part, ContainerRole::Body);
                    } else if !is_comment(&part) {
                        let f = self.facts_of(id, part);
                        self.stmts[id].head.merge(&f);
                    }
                }
            }
            _ => {
                self.stmts[id].head = self.facts_of(id, node);
            }
        }

        if label.is_some() {
            self.targets.retain(|(_, t, _)| *t != id);
        }
        self.finish(id, span_node);
        id
    }

    fn block_children(&mut self, id: StmtId, block: Node<'_>) {
        let mut c = block.walk();
        let kids: Vec<_> = block.named_children(&mut c).filter(is_statement_node).collect();
        for k in kids {
            let child = self.stmt(k, Some(id));
            self.stmts[id].children.push(child);
        }
    }

    fn container(&mut self, parent: StmtId, body: Node<'_>, role: ContainerRole) -> StmtId {
        let cid = self.alloc(&body, StmtKind::Block, Some(parent));
        self.stmts[cid].container = Some(role);
        self.stmts[parent].children.push(cid);
        self.push_scope(cid);
        if body.kind() == "block" {
            self.block_children(cid, body);
        } else {
            let child = self.stmt(body, Some(cid));
            self.stmts[cid].children.push(child);
        }
        self.pop_scope();
        self.finish(cid, body);
        cid
    }

    fn catch_clause(&mut self, try_id: StmtId, clause: Node<'_>) {
        let cid = self.alloc(&clause, StmtKind::Block, Some(try_id));
        self.stmts[cid].container = Some(ContainerRole::Catch);
        self.stmts[try_id].children.push(cid);
        self.push_scope(cid);
        let mut c = clause.walk();
        let param = clause.named_children(&mut c).find(|n| n.kind() == "catch_formal_parameter");
        if let Some(p) = param {
            if let Some(n) = p.child_by_field_name("name").filter(|n| n.kind() == "identifier") {
                let mut pc = p.walk();
                let ty = p
                    .named_children(&mut pc)
                    .find(|x| x.kind() == "catch_type")
                    .map(|t| self.text(&t))
                    .unwrap_or("Exception");
                let name = self.text(&n);
                self.declare(cid, name, ty, n.start_byte());
                self.stmts[cid].head.add_def(name);
            }
        }
        if let Some(body) = clause.child_by_field_name("body") {
            self.block_children(cid, body);
        }
        self.pop_scope();
        self.finish(cid, clause);
    }

    fn switch_block(&mut self, id: StmtId, block: Node<'_>) {
        self.push_scope(id);
        let mut c = block.walk();
        let entries: Vec<_> = block.named_children(&mut c).collect();
        for entry in entries {
            if !matches!(entry.kind(), "switch_block_statement_group" | "switch_rule") {
                continue;
            }
            let arrow = entry.kind() == "switch_rule";
            if arrow {
                self.stmts[id].arrow_switch = true;
            }
            let cid = self.alloc(&entry, StmtKind::Block, Some(id));
            self.stmts[cid].container = Some(ContainerRole::Case);
            self.stmts[id].children.push(cid);
            if arrow {
                self.push_scope(cid);
            }
            let mut ec = entry.walk();
            let parts: Vec<_> = entry.named_children(&mut ec).collect();
            for part in parts {
                if part.kind() == "switch_label" {
                    let mut lc = part.walk();
                    if part.children(&mut lc).any(|t| t.kind() == "default") {
                        self.stmts[id].has_default = true;
                    }
                    let f = self.facts_of(cid, part);
                    self.stmts[cid].head.merge(&f);
                } else if part.kind() == "block" && arrow {
                    self.block_children(cid, part);
                } else if is_statement_node(&part) {
                    let child = self.stmt(part, Some(cid));
                    self.stmts[cid].children.push(child);
                }
            }
            if arrow {
                self.pop_scope();
            }
            self.finish(cid, entry);
        }
        self.pop_scope();
    }

    /// Record the lines of tokens that belong to `id` itself.
    fn finish(&mut self, id: StmtId, node: Node<'_>) {
        let child_ranges: HashSet<(usize, usize)> = self.stmts[id]
            .children
            .iter()
            .map(|&c| (self.stmts[c].span.start_byte, self.stmts[c].span.end_byte))
            .collect();
        let mut lines = BTreeSet::new();
        own_token_lines(node, &child_ranges, &mut lines);
        self.stmts[id].own_lines = lines.into_iter().collect();
    }
}

fn own_token_lines(node: Node<'_>, skip: &HashSet<(usize, usize)>, out: &mut BTreeSet<u32>) {
    if skip.contains(&(node.start_byte(), node.end_byte())) || is_comment(&node) {
        return;
    }
    if node.child_count() == 0 {
        if node.end_byte() > node.start_byte() {
            let s = node.start_position().row as u32 + 1;
            let e = node.end_position().row as u32 + 1;
            out.extend(s..=e);
        }
        return;
    }
    let mut c = node.walk();
    for child in node.children(&mut c) {
        own_token_lines(child, skip, out);
    }
}
