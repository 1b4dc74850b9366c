use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use tree_sitter::Node;

/// Local variables written and read by one evaluation point of a statement.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Facts {
    pub defs: BTreeSet<String>,
    pub uses: BTreeSet<String>,
    /// Byte offset of the first read of each used identifier.
    #[serde(skip)]
    pub first_use: BTreeMap<String, usize>,
}

impl Facts {
    pub fn is_empty(&self) -> bool {
        self.defs.is_empty() && self.uses.is_empty()
    }

    pub(crate) fn add_use(&mut self, name: &str, at: usize) {
        self.uses.insert(name.to_owned());
        let slot = self.first_use.entry(name.to_owned()).or_insert(at);
        if at < *slot {
            *slot = at;
        }
    }

    pub(crate) fn add_def(&mut self, name: &str) {
        self.defs.insert(name.to_owned());
    }

    pub fn merge(&mut self, other: &Facts) {
        self.defs.extend(other.defs.iter().cloned());
        for (name, at) in &other.first_use {
            self.add_use(name, *at);
        }
        self.uses.extend(other.uses.iter().cloned());
    }
}

/// Name resolution hooks the expression walker needs from the statement
/// builder.
pub(crate) trait ScopeEnv {
    /// True when `name` resolves to a method local or parameter at this point.
    fn is_local(&self, name: &str) -> bool;
    /// Declare a pattern binding (`x instanceof Foo f`, `case Bar b ->`).
    fn declare_binding(&mut self, name: &str, ty: &str, facts: &mut Facts);
    /// Hide names bound by a lambda or local/anonymous class body.
    fn push_shadow(&mut self, names: Vec<String>);
    fn pop_shadow(&mut self);
}

pub(crate) struct ExprWalker<'s> {
    pub src: &'s [u8],
}

impl<'s> ExprWalker<'s> {
    fn text(&self, node: &Node<'_>) -> &'s str {
        std::str::from_utf8(&self.src[node.start_byte()..node.end_byte()]).unwrap_or("")
    }

    /// Collect facts for an expression (or any non-statement subtree).
    /// `capture` is set inside lambda and class bodies, where every resolved
    /// local is a read of the enclosing statement.
    pub fn walk(&self, node: Node<'_>, env: &mut dyn ScopeEnv, facts: &mut Facts, capture: bool) {
        match node.kind() {
            "identifier" => {
                let name = self.text(&node);
                if env.is_local(name) {
                    facts.add_use(name, node.start_byte());
                }
            }
            "comment" | "line_comment" | "block_comment" | "marker_annotation" | "annotation"
            | "scoped_identifier" | "type_identifier" | "class_literal" => {}
            "assignment_expression" => {
                let left = node.child_by_field_name("left");
                let right = node.child_by_field_name("right");
                let op = node
                    .child_by_field_name("operator")
                    .map(|o| self.text(&o))
                    .unwrap_or("=");
                match left {
                    Some(l) if l.kind() == "identifier" && env.is_local(self.text(&l)) => {
                        let name = self.text(&l);
                        if op != "=" || capture {
                            facts.add_use(name, l.start_byte());
                        }
                        if let Some(r) = right {
                            self.walk(r, env, facts, capture);
                        }
                        if !capture {
                            facts.add_def(name);
                        }
                    }
                    _ => {
                        if let Some(l) = left {
                            self.walk(l, env, facts, capture);
                        }
                        if let Some(r) = right {
                            self.walk(r, env, facts, capture);
                        }
                    }
                }
            }
            "update_expression" => {
                let mut cursor = node.walk();
                for child in node.named_children(&mut cursor) {
                    if child.kind() == "identifier" && env.is_local(self.text(&child)) {
                        let name = self.text(&child);
                        facts.add_use(name, child.start_byte());
                        if !capture {
                            facts.add_def(name);
                        }
                    } else {
                        self.walk(child, env, facts, capture);
                    }
                }
            }
            "field_access" => {
                if let Some(obj) = node.child_by_field_name("object") {
                    self.walk(obj, env, facts, capture);
                }
            }
            "method_invocation" => {
                if let Some(obj) = node.child_by_field_name("object") {
                    self.walk(obj, env, facts, capture);
                }
                if let Some(args) = node.child_by_field_name("arguments") {
                    self.walk(args, env, facts, capture);
                }
            }
            "method_reference" => {
                if let Some(first) = node.named_child(0) {
                    self.walk(first, env, facts, capture);
                }
            }
            "instanceof_expression" => {
                if let Some(left) = node.child_by_field_name("left") {
                    self.walk(left, env, facts, capture);
                }
                if let Some(name) = node.child_by_field_name("name") {
                    if !capture {
                        let ty = node
                            .child_by_field_name("right")
                            .map(|t| self.text(&t))
                            .unwrap_or("Object");
                        env.declare_binding(self.text(&name), ty, facts);
                    }
                }
                if let Some(pattern) = node.child_by_field_name("pattern") {
                    if !capture {
                        self.declare_pattern(pattern, env, facts);
                    }
                }
            }
            "type_pattern" | "record_pattern" => {
                if !capture {
                    self.declare_pattern(node, env, facts);
                }
            }
            "lambda_expression" | "class_body" | "class_declaration" | "record_declaration"
            | "interface_declaration" | "enum_declaration" => {
                let mut bound = Vec::new();
                collect_bound_names(node, self.src, &mut bound);
                env.push_shadow(bound);
                match node.kind() {
                    "lambda_expression" => {
                        if let Some(body) = node.child_by_field_name("body") {
                            self.walk(body, env, facts, true);
                        }
                    }
                    _ => self.walk_children(node, env, facts, true),
                }
                env.pop_shadow();
            }
            "object_creation_expression" => {
                self.walk_children(node, env, facts, capture);
            }
            "variable_declarator" => {
                if let Some(v) = node.child_by_field_name("value") {
                    self.walk(v, env, facts, capture);
                }
            }
            "method_declaration" | "constructor_declaration" => {
                if let Some(b) = node.child_by_field_name("body") {
                    self.walk(b, env, facts, capture);
                }
            }
            "formal_parameter" | "catch_formal_parameter" | "spread_parameter"
            | "inferred_parameters" | "formal_parameters" | "enum_constant" => {}
            "labeled_statement" | "break_statement" | "continue_statement" => {
                let mut cursor = node.walk();
                for child in node.named_children(&mut cursor) {
                    if child.kind() != "identifier" {
                        self.walk(child, env, facts, capture);
                    }
                }
            }
            "enhanced_for_statement" => {
                if let Some(v) = node.child_by_field_name("value") {
                    self.walk(v, env, facts, capture);
                }
                if let Some(b) = node.child_by_field_name("body") {
                    self.walk(b, env, facts, capture);
                }
            }
            _ => self.walk_children(node, env, facts, capture),
        }
    }

    fn walk_children(&self, node: Node<'_>, env: &mut dyn ScopeEnv, facts: &mut Facts, capture: bool) {
        let mut cursor = node.walk();
        for child in node.named_children(&mut cursor) {
            self.walk(child, env, facts, capture);
        }
    }

    fn declare_pattern(&self, node: Node<'_>, env: &mut dyn ScopeEnv, facts: &mut Facts) {
        match node.kind() {
            "type_pattern" | "record_pattern_component" => {
                let mut ty = "Object";
                let mut cursor = node.walk();
                for child in node.named_children(&mut cursor) {
                    if child.kind() == "identifier" {
                        env.declare_binding(self.text(&child), ty, facts);
                    } else if child.kind() != "underscore_pattern" {
                        ty = self.text(&child);
                    }
                }
            }
            _ => {
                let mut cursor = node.walk();
                for child in node.named_children(&mut cursor) {
                    self.declare_pattern(child, env, facts);
                }
            }
        }
    }
}

/// Names bound inside a lambda or class body (parameters, locals, fields).
/// These shadow nothing the host could see, so references to them are not
/// captures.
fn collect_bound_names(node: Node<'_>, src: &[u8], out: &mut Vec<String>) {
    let text = |n: &Node<'_>| String::from_utf8_lossy(&src[n.start_byte()..n.end_byte()]).into_owned();
    match node.kind() {
        "variable_declarator" | "formal_parameter" | "catch_formal_parameter" | "resource"
        | "enhanced_for_statement" => {
            if let Some(n) = node.child_by_field_name("name") {
                out.push(text(&n));
            }
        }
        "instanceof_expression" => {
            if let Some(n) = node.child_by_field_name("name") {
                out.push(text(&n));
            }
        }
        "inferred_parameters" | "type_pattern" | "record_pattern_component" => {
            let mut cursor = node.walk();
            for child in node.named_children(&mut cursor) {
                if child.kind() == "identifier" {
                    out.push(text(&child));
                }
            }
        }
        "lambda_expression" => {
            if let Some(p) = node.child_by_field_name("parameters") {
                if p.kind() == "identifier" {
                    out.push(text(&p));
                }
            }
        }
        _ => {}
    }
    let mut cursor = node.walk();
    for child in node.named_children(&mut cursor) {
        collect_bound_names(child, src, out);
    }
}
