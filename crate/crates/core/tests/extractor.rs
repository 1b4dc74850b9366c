mod common;

use std::sync::Arc;

use common::{extraction, fixture_path, method, stmt_at, unit};
use emx_core::dataflow::{build_cfg, liveness};
use emx_core::extractor::{apply, plan, ApplyError, Applied, ExtractPlan, Param, PlanError};
use emx_core::source::{locate_method, parse_unit, LineRange, MethodLocator, MethodModel};

fn plan_lines(m: &MethodModel, start: u32, end: u32, name: &str) -> Result<ExtractPlan, PlanError> {
    let cfg = build_cfg(m);
    let live = liveness(m, &cfg);
    let frag = m.statements_in_range(LineRange::new(start, end)).unwrap().ids;
    plan(m, &cfg, &live, &frag, name)
}

fn extract(file: &str, host: &str, start: u32, end: u32, name: &str) -> (ExtractPlan, Applied) {
    let m = method(file, host);
    let p = plan_lines(&m, start, end, name).unwrap();
    let a = apply(m.unit(), &p).unwrap();
    extraction::check(m.unit(), &m, &p, &a).unwrap();
    (p, a)
}

fn param(name: &str, ty: &str) -> Param {
    Param { name: name.into(), ty: ty.into() }
}

#[test]
fn figure_one_matches_golden_output() {
    let (p, a) = extract("JvmClassWriter.java", "writeJvmClass", 85, 90, "writeMethods");
    assert_eq!(p.parameters, [param("jvmClass", "JvmClass"), param("cw", "ClassWriter")]);
    assert_eq!(p.return_variable, None);
    assert_eq!(p.signature(), "private void writeMethods(JvmClass jvmClass, ClassWriter cw)");
    let golden = std::fs::read_to_string(
        fixture_path("").parent().unwrap().join("golden/JvmClassWriter.writeMethods.java"),
    )
    .unwrap();
    assert_eq!(a.new_text, golden);
    assert!(a.script.diff.contains("+        writeMethods(jvmClass, cw);\n"));
    assert!(a.script.diff.contains("\n@@ "));
    assert!(a.script.diff.starts_with("--- a/"));
}

#[test]
fn output_declared_inside_is_declared_at_the_call() {
    let (p, a) = extract("Shapes.java", "conditionalAssign", 197, 202, "magnitude");
    assert_eq!(p.call_line(), "int m = magnitude(a);");
    assert_eq!(p.return_type, "int");
    assert!(a.new_text.contains("    private int magnitude(int a) {\n        int m;\n"));
    assert!(a.new_text.contains("        return m;\n    }\n"));
}

#[test]
fn output_declared_before_is_assigned_at_the_call() {
    let (p, a) = extract("Shapes.java", "withIf", 29, 33, "distance");
    assert_eq!(p.call_line(), "r = distance(a);");
    assert_eq!(p.extra_locals, [param("r", "int")]);
    assert!(a.new_text.contains("    private int distance(int a) {\n        int r;\n        if (a > 10) {"));
}

#[test]
fn scratch_variable_is_redeclared() {
    let (p, _) = extract("Shapes.java", "readAll", 126, 128, "drain");
    assert_eq!(p.parameters, [param("in", "Reader"), param("buf", "char[]"), param("sb", "StringBuilder")]);
    assert_eq!(p.extra_locals, [param("n", "int")]);
    assert_eq!(p.exceptions_clause.as_deref(), Some("throws IOException"));
    assert_eq!(p.signature(), "private void drain(Reader in, char[] buf, StringBuilder sb) throws IOException");
}

#[test]
fn all_paths_return_becomes_return_of_call() {
    let (p, _) = extract("Shapes.java", "earlyReturn", 43, 46, "clamp");
    assert!(p.all_paths_return);
    assert_eq!(p.call_line(), "return clamp(c);");
    assert_eq!(p.return_type, "int");

    let (p, _) = extract("Shapes.java", "patternMatch", 181, 185, "logString");
    assert_eq!(p.call_line(), "return logString(o);");
    assert_eq!(p.return_type, "boolean");
}

#[test]
fn throwing_fragment_keeps_host_return_type() {
    let (p, _) = extract("Shapes.java", "throwing", 190, 190, "reject");
    assert!(p.all_paths_return);
    assert_eq!(p.call_line(), "return reject();");
    assert_eq!(p.return_type, "int");
}

#[test]
fn void_host_with_early_return_keeps_the_return() {
    let (p, a) = extract("Extract.java", "guard", 10, 11, "reset");
    assert_eq!(p.call_line(), "reset(); return;");
    assert!(a.new_text.contains("\t\t\treset(); return;\n"));
    assert!(a.new_text.contains("\tprivate void reset() {\n\t\thits = 0;\n\t\treturn;\n\t}\n"));
}

#[test]
fn static_generic_host() {
    let (p, _) = extract("Shapes.java", "maxOf", 208, 213, "findMax");
    assert_eq!(p.signature(), "private static <T extends Comparable<T>> T findMax(List<T> xs)");
    assert_eq!(p.call_line(), "T best = findMax(xs);");
}

#[test]
fn lambda_capture_becomes_parameter() {
    let (p, _) = extract("Shapes.java", "lambdaCapture", 174, 176, "countAbove");
    assert_eq!(p.parameters[0], param("xs", "List<Integer>"));
    assert!(p.parameters.contains(&param("base", "int")));
    assert!(p.parameters.contains(&param("k", "int")));
}

#[test]
fn inferred_types_cannot_cross() {
    let m = method("Extract.java", "inferred");
    assert_eq!(
        plan_lines(&m, 18, 18, "twice"),
        Err(PlanError::UntypedVariable { name: "n".into(), ty: "var".into() })
    );
    assert_eq!(
        plan_lines(&m, 17, 17, "size"),
        Err(PlanError::UntypedVariable { name: "n".into(), ty: "var".into() })
    );
}

#[test]
fn name_and_arity_clash_is_a_conflict() {
    let m = method("Shapes.java", "straight");
    assert_eq!(
        plan_lines(&m, 16, 16, "overload"),
        Err(PlanError::PlanConflict { name: "overload".into(), arity: 2 })
    );
    let m = method("Shapes.java", "withIf");
    assert!(matches!(plan_lines(&m, 34, 34, "overload"), Err(PlanError::PlanConflict { arity: 1, .. })));
    // same name, different arity is an overload
    assert!(plan_lines(&m, 29, 33, "straight").is_ok());
}

#[test]
fn closing_brace_shared_with_class() {
    let u = unit("Extract.java");
    let m = locate_method(&u, &MethodLocator::Name("twice".into())).unwrap();
    let p = plan_lines(&m, 32, 32, "doubleOf").unwrap();
    let a = apply(&u, &p).unwrap();
    extraction::check(&u, &m, &p, &a).unwrap();
    assert!(a.new_text.ends_with(
        "    int b = doubleOf(a);\n    return b; }\n\n    private int doubleOf(int a) {\n        int b = a * 2;\n        return b;\n    }\n }\n"
    ));
}

#[test]
fn stale_unit_is_refused() {
    let m = method("Shapes.java", "straight");
    let p = plan_lines(&m, 14, 14, "inc").unwrap();
    let edited = m.unit().text().replace("int x = a + 1;", "int x = a + 2;");
    let changed = Arc::new(parse_unit(&edited, m.unit().path()).unwrap());
    assert!(matches!(apply(&changed, &p), Err(ApplyError::StaleUnit)));
}

#[test]
fn same_line_statements_extract_together() {
    let (p, _) = extract("Shapes.java", "sameLine", 264, 264, "sum");
    assert_eq!(p.parameters, [param("x", "int"), param("y", "int")]);
    let m = method("Shapes.java", "sameLine");
    let frag = vec![stmt_at(&m, 263), stmt_at(&m, 263) + 1];
    let cfg = build_cfg(&m);
    let live = liveness(&m, &cfg);
    assert!(matches!(plan(&m, &cfg, &live, &frag, "both"), Err(PlanError::TooManyOutputs(2))));
}

#[test]
fn every_useful_fragment_extracts_safely() {
    let (checked, failures) = extraction::sweep(&["Shapes.java", "JvmClassWriter.java", "Extract.java"]);
    assert!(failures.is_empty(), "{}", failures.join("\n"));
    assert!(checked >= 100, "only {checked} extractions checked");
}
