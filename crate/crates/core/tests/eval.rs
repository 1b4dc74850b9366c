mod common;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::OnceLock;

use emx_core::eval::{
    evaluate, load_oracle, matches, matches_lines, parse_oracle, repeated_stats, Allowance, DumpSource, EvalOptions,
    LoadError, OracleLoad, RankedRange, StatsError,
};
use emx_core::source::LineRange;
use proptest::prelude::*;

fn eval_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/eval")
}

fn shapes_oracle() -> &'static OracleLoad {
    static LOAD: OnceLock<OracleLoad> = OnceLock::new();
    LOAD.get_or_init(|| load_oracle(&eval_dir().join("shapes.oracle.jsonl")).unwrap())
}

fn opts(k: usize) -> EvalOptions {
    EvalOptions { k, ..EvalOptions::default() }
}

#[test]
fn tolerance_arithmetic() {
    let r = LineRange::new(10, 14);
    assert!(matches(r, r, 30, 0.0));
    assert!(matches(r, r, 1, 0.5));
    // 0.03 * 30 = 0.9 allows nothing
    assert!(!matches(LineRange::new(10, 15), r, 30, 0.03));
    // 0.03 * 200 = 6 allows five
    assert!(matches(LineRange::new(10, 19), r, 200, 0.03));
    assert_eq!(Allowance::Floor.lines(0.03, 200), 6);
    assert_eq!(Allowance::Floor.lines(0.03, 30), 0);
    assert_eq!(Allowance::Floor.lines(0.03, 34), 1);
    assert_eq!(Allowance::Round.lines(0.03, 30), 1);
    assert_eq!(Allowance::Ceil.lines(0.03, 1), 1);
}

#[test]
fn oracle_loads_with_summary() {
    let load = load_oracle(&eval_dir().join("shapes.oracle.jsonl")).unwrap();
    assert_eq!(load.entries.len(), 20);
    assert!(load.diagnostics.is_empty(), "{:?}", load.diagnostics);
    assert_eq!(load.loc.min, 6);
    assert_eq!(load.loc.max, 14);
    // host sizes: 6 6 10 10 10 12 9 9 14 13 9 12 13 12 7 7 7 10 9 6
    assert!((load.loc.mean - 191.0 / 20.0).abs() < 1e-12);
    assert_eq!(load.loc.median, 9.5);
}

#[test]
fn unresolvable_rows_are_skipped() {
    let text = [
        r#"{"id":1,"file":"Shapes.java","method_name":"straight","method_start":13,"method_end":18,"extracted_start":14,"extracted_end":15}"#,
        r#"{"id":2,"file":"Missing.java","method_name":"x","method_start":1,"method_end":2,"extracted_start":1,"extracted_end":1}"#,
        r#"{"id":3,"file":"Shapes.java","method_name":"wrongName","method_start":13,"method_end":18,"extracted_start":14,"extracted_end":15}"#,
        r#"{"id":4,"file":"Shapes.java","method_name":"straight","method_start":13,"method_end":18,"extracted_start":14,"extracted_end":25}"#,
        r#"not json"#,
        r#"{"id":"s6","file":"Shapes.java","method_name":"noReturn","method_start":20,"method_end":25,"extracted_start":22,"extracted_end":23,"extracted_name":"f"}"#,
    ]
    .join("\n");
    let load = parse_oracle(&text, &common::fixture_path("")).unwrap();
    let ids: Vec<_> = load.entries.iter().map(|e| e.entry.id.as_str()).collect();
    assert_eq!(ids, ["1", "s6"]);
    assert_eq!(load.diagnostics.len(), 4);
    assert!(load.diagnostics[0].contains("Missing.java"));
}

#[test]
fn nothing_resolves_is_empty_oracle() {
    let text = r#"{"id":2,"file":"Missing.java","method_name":"x","method_start":1,"method_end":2,"extracted_start":1,"extracted_end":1}"#;
    assert!(matches!(
        parse_oracle(text, &common::fixture_path("")),
        Err(LoadError::EmptyOracle { skipped: 1, .. })
    ));
    assert!(matches!(parse_oracle("", &common::fixture_path("")), Err(LoadError::EmptyOracle { skipped: 0, .. })));
}

#[test]
fn four_entries_two_hits() {
    let load = load_oracle(&eval_dir().join("shapes.oracle.jsonl")).unwrap();
    let four = &load.entries[..4];
    let dump = DumpSource::parse(
        r#"{"id":"s01","suggestions":[{"start":1,"end":1},{"start":14,"end":15}]}
{"id":"s02","suggestions":[{"start":24,"end":24}]}
{"id":"s03","suggestions":[{"start":29,"end":33,"name":"dist"}]}"#,
    );
    assert!(dump.diagnostics.is_empty());
    let report = evaluate(four, &dump, &opts(5));
    assert_eq!(report.recall, 0.5);
    let ranks: Vec<_> = report.verdicts.iter().map(|v| v.matched_rank).collect();
    assert_eq!(ranks, [Some(2), None, Some(1), None]);
}

#[test]
fn hand_built_dump_recall() {
    let load = load_oracle(&eval_dir().join("shapes.oracle.jsonl")).unwrap();
    let dump = DumpSource::load(&eval_dir().join("shapes.dump.jsonl")).unwrap();
    assert_eq!(evaluate(&load.entries, &dump, &opts(5)).matched, 13);
    assert_eq!(evaluate(&load.entries, &dump, &opts(1)).matched, 9);
    assert_eq!(evaluate(&load.entries, &dump, &opts(10)).matched, 14);
    let report = evaluate(&load.entries, &dump, &opts(5));
    assert_eq!(report.recall, 0.65);
    assert!(report.table().contains("Recall@5 at tolerance 0.03: 13/20 = 0.6500"));
}

#[test]
fn textbook_t_test() {
    // reference values from scipy.stats.ttest_1samp
    let s = repeated_stats(&[0.52, 0.55, 0.49, 0.58, 0.51], 0.5).unwrap();
    assert!((s.mean - 0.53).abs() < 1e-12);
    assert!((s.sd - 0.03535533905932737).abs() < 1e-12);
    assert!((s.t - 1.8973665961010298).abs() < 1e-9);
    assert!((s.p - 0.13063511375366027).abs() < 1e-9);
    let s = repeated_stats(&[5.1, 4.9, 5.6, 5.8, 6.0], 5.0).unwrap();
    assert!((s.t - 2.304073731539131).abs() < 1e-9);
    assert!((s.p - 0.08256829674577393).abs() < 1e-9);
}

#[test]
fn zero_variance_cases() {
    let s = repeated_stats(&[0.5, 0.5, 0.5], 0.5).unwrap();
    assert_eq!((s.t, s.p, s.degenerate), (0.0, 1.0, false));
    let s = repeated_stats(&[0.6, 0.6, 0.6, 0.6], 0.5).unwrap();
    assert!(s.degenerate);
    assert_eq!(s.t, f64::INFINITY);
    assert_eq!(s.p, 0.0);
    assert_eq!(repeated_stats(&[0.5], 0.5), Err(StatsError::InsufficientSamples(1)));
}

#[test]
fn fifty_runs_well_above_baseline_are_significant() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    // synthetic runs centred on 0.534 against a baseline of 0.45
    let runs: Vec<f64> = (0..50).map(|_| 0.534 + rng.gen_range(-0.02..0.02)).collect();
    let s = repeated_stats(&runs, 0.45).unwrap();
    assert!(s.p < 1e-5, "p = {}", s.p);
}

fn dump_strategy() -> impl Strategy<Value = Vec<Vec<(u32, u32)>>> {
    prop::collection::vec(prop::collection::vec((13u32..223, 0u32..8), 0..8), 20)
}

fn to_source(ids: &[String], lists: &[Vec<(u32, u32)>]) -> DumpSource {
    let map: HashMap<String, Vec<RankedRange>> = ids
        .iter()
        .zip(lists)
        .map(|(id, l)| (id.clone(), l.iter().map(|&(s, len)| RankedRange { start: s, end: s + len, name: None }).collect()))
        .collect();
    DumpSource::from_map(map)
}

proptest! {
    #[test]
    fn matches_is_symmetric_and_monotone(
        a in prop::collection::btree_set(1u32..60, 0..20),
        b in prop::collection::btree_set(1u32..60, 0..20),
        loc in 1u32..2000,
        t1 in 0.0f64..0.5,
        t2 in 0.0f64..0.5,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert_eq!(matches_lines(&a, &b, loc, lo, Allowance::Floor), matches_lines(&b, &a, loc, lo, Allowance::Floor));
        if matches_lines(&a, &b, loc, lo, Allowance::Floor) {
            prop_assert!(matches_lines(&a, &b, loc, hi, Allowance::Floor));
        }
    }

    #[test]
    fn recall_properties(lists in dump_strategy(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let load = shapes_oracle();
        let ids: Vec<String> = load.entries.iter().map(|e| e.entry.id.clone()).collect();
        let src = to_source(&ids, &lists);
        let r1 = evaluate(&load.entries, &src, &opts(1)).recall;
        let r5 = evaluate(&load.entries, &src, &opts(5)).recall;
        prop_assert!(r1 <= r5);
        let mut shuffled = load.entries.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(evaluate(&shuffled, &src, &opts(5)).recall, r5);
    }
}

#[test]
fn identical_dump_has_full_recall() {
    let load = load_oracle(&eval_dir().join("shapes.oracle.jsonl")).unwrap();
    let map = load
        .entries
        .iter()
        .map(|e| {
            let r = e.entry.extracted_range();
            (e.entry.id.clone(), vec![RankedRange { start: r.start, end: r.end, name: None }])
        })
        .collect();
    let src = DumpSource::from_map(map);
    for tol in [0.0, 0.03, 0.1, 1.0] {
        for k in [1, 5] {
            let o = EvalOptions { k, tolerance: tol, allowance: Allowance::Floor };
            assert_eq!(evaluate(&load.entries, &src, &o).recall, 1.0);
        }
    }
}
