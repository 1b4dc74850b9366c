//! Turning a chosen fragment into a new method and a call site.

mod edit;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use edit::{unified_diff, Edit, EditScript};

use crate::candidates::declared_in;
use crate::dataflow::{fragment_io, Cfg, Liveness, Region};
use crate::source::{parse_unit, LineRange, MethodModel, ParseError, SourceUnit, StmtId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnVariable {
    pub name: String,
    pub ty: String,
    /// Declared by one of the fragment's statements (the call site declares it).
    pub declared_inside: bool,
}

/// A fully determined extract-method refactoring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractPlan {
    pub fragment: Vec<StmtId>,
    pub fragment_range: LineRange,
    pub new_name: String,
    /// Ordered by first use in the fragment.
    pub parameters: Vec<Param>,
    pub return_variable: Option<ReturnVariable>,
    /// The fragment never completes normally (it returns or throws on every path).
    pub all_paths_return: bool,
    pub return_type: String,
    pub modifiers: String,
    pub type_parameters: Option<String>,
    pub exceptions_clause: Option<String>,
    /// Variables declared before the fragment and assigned in it before any
    /// read; the new method declares them itself.
    pub extra_locals: Vec<Param>,
    pub host_is_void: bool,
    pub host_end_line: u32,
    /// Byte just past the host's closing brace.
    pub host_close_byte: usize,
    pub indent_step: String,
    pub unit_digest: String,
}

impl ExtractPlan {
    /// Declaration header of the new method, without the opening brace.
    pub fn signature(&self) -> String {
        let params: Vec<String> = self.parameters.iter().map(|p| format!("{} {}", p.ty, p.name)).collect();
        let mut sig = self.modifiers.clone();
        if let Some(tp) = &self.type_parameters {
            sig.push(' ');
            sig.push_str(tp);
        }
        sig.push_str(&format!(" {} {}({})", self.return_type, self.new_name, params.join(", ")));
        if let Some(t) = &self.exceptions_clause {
            sig.push(' ');
            sig.push_str(t);
        }
        sig
    }

    /// Statement(s) that replace the fragment, without indentation.
    pub fn call_line(&self) -> String {
        let args: Vec<&str> = self.parameters.iter().map(|p| p.name.as_str()).collect();
        let call = format!("{}({})", self.new_name, args.join(", "));
        match &self.return_variable {
            Some(rv) if rv.declared_inside => format!("{} {} = {call};", rv.ty, rv.name),
            Some(rv) => format!("{} = {call};", rv.name),
            None if self.all_paths_return && self.host_is_void => format!("{call}; return;"),
            None if self.all_paths_return => format!("return {call};"),
            None => format!("{call};"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("a method `{name}` with {arity} parameter(s) already exists")]
    PlanConflict { name: String, arity: usize },
    #[error("`{name}` has no spelled-out type (`{ty}`), so it cannot cross a method boundary")]
    UntypedVariable { name: String, ty: String },
    #[error("the fragment is empty")]
    EmptyFragment,
    #[error("{0} values flow out of the fragment")]
    TooManyOutputs(usize),
}

fn param_type_ok(ty: &str) -> bool {
    !ty.is_empty() && ty != "var" && !ty.contains('|')
}

/// Work out the new method's signature and the call that replaces the fragment.
pub fn plan(
    model: &MethodModel,
    cfg: &Cfg,
    live: &Liveness,
    fragment: &[StmtId],
    name: &str,
) -> Result<ExtractPlan, PlanError> {
    if fragment.is_empty() {
        return Err(PlanError::EmptyFragment);
    }
    let first = fragment[0];
    let io = fragment_io(model, cfg, live, fragment);
    if io.outputs.len() > 1 {
        return Err(PlanError::TooManyOutputs(io.outputs.len()));
    }
    let region = Region::new(model, cfg, fragment);
    let all_paths_return = !region.can_complete_normally();

    let typed = |name: &str, ty: &str| -> Result<Param, PlanError> {
        if param_type_ok(ty) {
            Ok(Param { name: name.to_owned(), ty: ty.to_owned() })
        } else {
            Err(PlanError::UntypedVariable { name: name.to_owned(), ty: ty.to_owned() })
        }
    };

    let mut parameters = Vec::new();
    for n in &io.inputs {
        let decl = model.visible_local(n, first).expect("inputs are declared before the fragment");
        parameters.push(typed(n, &decl.ty)?);
    }

    let top_decls: Vec<_> = fragment
        .iter()
        .flat_map(|&s| model.stmt(s).declares.iter().map(|&l| &model.locals[l]))
        .collect();
    let return_variable = match io.outputs.first() {
        None => None,
        Some(out) => {
            let (ty, declared_inside) = match top_decls.iter().find(|d| &d.name == out) {
                Some(d) => (d.ty.clone(), true),
                None => {
                    let d = model.visible_local(out, first).expect("outputs are declared somewhere");
                    (d.ty.clone(), false)
                }
            };
            let p = typed(out, &ty)?;
            Some(ReturnVariable { name: p.name, ty: p.ty, declared_inside })
        }
    };

    let all = region.all_stmts();
    let inside: BTreeSet<&str> = declared_in(model, &all);
    let input_names: BTreeSet<&str> = io.inputs.iter().map(String::as_str).collect();
    let mut extra_locals = Vec::new();
    let mut defined: Vec<&String> = all
        .iter()
        .flat_map(|&s| model.stmt(s).all_facts().flat_map(|f| f.defs.iter()).collect::<Vec<_>>())
        .collect();
    defined.sort();
    defined.dedup();
    for n in defined {
        if inside.contains(n.as_str()) || input_names.contains(n.as_str()) {
            continue;
        }
        if let Some(decl) = model.visible_local(n, first) {
            extra_locals.push(typed(n, &decl.ty)?);
        }
    }

    let arity = parameters.len();
    if model.collides(name, Some(arity)) {
        return Err(PlanError::PlanConflict { name: name.to_owned(), arity });
    }

    let return_type = match &return_variable {
        Some(rv) => rv.ty.clone(),
        None if all_paths_return => model.return_type.clone().unwrap_or_else(|| "void".into()),
        None => "void".into(),
    };
    let first_stmt = model.stmt(first);
    let last_stmt = model.stmt(*fragment.last().unwrap());

    Ok(ExtractPlan {
        fragment: fragment.to_vec(),
        fragment_range: LineRange::new(first_stmt.span.start_line, last_stmt.span.end_line),
        new_name: name.to_owned(),
        parameters,
        return_variable,
        all_paths_return,
        return_type,
        modifiers: if model.is_static { "private static".into() } else { "private".into() },
        type_parameters: model.type_parameters.clone(),
        exceptions_clause: model.throws_clause.clone(),
        extra_locals,
        host_is_void: model.is_void(),
        host_end_line: model.span.end_line,
        host_close_byte: model.body_close_byte,
        indent_step: indent_step(model),
        unit_digest: model.unit().digest().to_owned(),
    })
}

#[derive(Debug, Error)]
pub enum ApplyError {
    #[error("the file changed since the suggestion was computed")]
    StaleUnit,
    #[error("edited text does not parse (this is a bug): {0}")]
    RenderError(ParseError),
}

/// Result of applying a plan.
#[derive(Debug, Clone)]
pub struct Applied {
    pub new_text: String,
    pub script: EditScript,
    /// Line of the new method's declaration in `new_text`.
    pub new_method_line: u32,
}

/// Perform the extraction as two line-granular edits: the fragment becomes a
/// call, and the new method is inserted right after the host.
pub fn apply(unit: &SourceUnit, plan: &ExtractPlan) -> Result<Applied, ApplyError> {
    if unit.digest() != plan.unit_digest {
        return Err(ApplyError::StaleUnit);
    }
    let LineRange { start, end } = plan.fragment_range;
    let frag_indent = unit.indentation(start).to_owned();
    let host_indent = unit.indentation(plan.host_end_line).to_owned();
    let body_indent = format!("{host_indent}{}", plan.indent_step);

    let call = Edit {
        start: unit.line_start(start),
        end: unit.line_end_inclusive(end),
        replacement: format!("{frag_indent}{}{}", plan.call_line(), line_ending(unit, end)),
    };

    let mut method = Vec::new();
    method.push(format!("{host_indent}{} {{", plan.signature()));
    for p in &plan.extra_locals {
        method.push(format!("{body_indent}{} {};", p.ty, p.name));
    }
    for line in start..=end {
        let text = unit.line_text(line);
        method.push(match text.strip_prefix(frag_indent.as_str()) {
            _ if text.trim().is_empty() => String::new(),
            Some(rest) => format!("{body_indent}{rest}"),
            None => text.to_owned(),
        });
    }
    if let Some(rv) = &plan.return_variable {
        method.push(format!("{body_indent}return {};", rv.name));
    }
    method.push(format!("{host_indent}}}"));

    let host_last = plan.host_end_line;
    let host_end_byte = plan.host_close_byte;
    let rest_of_line = unit.slice(host_end_byte, unit.line_end_inclusive(host_last));
    let rest = rest_of_line.trim();
    let insertion = if rest.is_empty() || rest.starts_with("//") {
        let at = unit.line_end_inclusive(host_last);
        let nl = line_ending(unit, host_last);
        let lead = if nl.is_empty() { "\n" } else { "" };
        Edit {
            start: at,
            end: at,
            replacement: format!("{lead}\n{}{}", method.join("\n"), if nl.is_empty() { "" } else { "\n" }),
        }
    } else {
        Edit { start: host_end_byte, end: host_end_byte, replacement: format!("\n\n{}\n", method.join("\n")) }
    };

    // the call replaces fragment_range.len() lines with one
    let new_method_line = host_last - (end - start) + 2;
    let script = EditScript::new(vec![call, insertion]);
    let new_text = script.apply_to(unit.text());
    if let Err(e) = parse_unit(&new_text, unit.path()) {
        return Err(ApplyError::RenderError(e));
    }
    let script = script.with_diff(unit.text(), &new_text, &unit.path().display().to_string());
    Ok(Applied { new_text, script, new_method_line })
}

fn line_ending(unit: &SourceUnit, line: u32) -> &str {
    let full = unit.slice(unit.line_start(line), unit.line_end_inclusive(line));
    if full.ends_with("\r\n") {
        "\r\n"
    } else if full.ends_with('\n') {
        "\n"
    } else {
        ""
    }
}

/// One level of indentation as used by the host's own body.
fn indent_step(model: &MethodModel) -> String {
    let unit = model.unit();
    let host = unit.indentation(model.span.start_line);
    model
        .roots
        .first()
        .and_then(|&r| unit.indentation(model.stmt(r).span.start_line).strip_prefix(host))
        .filter(|step| !step.is_empty())
        .unwrap_or("    ")
        .to_owned()
}
