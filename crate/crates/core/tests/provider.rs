mod common;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use common::method;
use emx_core::provider::{
    build_prompt, parse_completion, request_digest, sample, CompletionRequest, Fixture, PromptError, PromptTemplate,
    Provider, ProviderConfig, ProviderError, RecordingProvider, ReplayProvider, SampleError,
};
use proptest::prelude::*;

struct Scripted {
    in_flight: AtomicUsize,
    peak: AtomicUsize,
    fail_on: Vec<u32>,
}

impl Scripted {
    fn new(fail_on: Vec<u32>) -> Self {
        Scripted { in_flight: AtomicUsize::new(0), peak: AtomicUsize::new(0), fail_on }
    }
}

impl Provider for Scripted {
    fn id(&self) -> &str {
        "scripted"
    }

    fn complete(&self, _req: &CompletionRequest, iteration: u32) -> Result<String, ProviderError> {
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(now, Ordering::SeqCst);
        // later iterations finish first
        std::thread::sleep(Duration::from_millis(5 * (10 - iteration as u64 % 10)));
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        if self.fail_on.contains(&iteration) {
            return Err(ProviderError::Timeout);
        }
        Ok(format!(r#"[{{"function_name":"f{iteration}","line_start":{iteration},"line_end":{iteration}}}]"#))
    }
}

#[test]
fn target_is_numbered_with_file_lines() {
    let m = method("Shapes.java", "249");
    let p = build_prompt(&m).unwrap();
    assert_eq!(p.target.lines().count(), 3);
    assert!(p.target.starts_with("248:     int overload(int a, int b) {\n"));
    assert!(!p.few_shot_examples.is_empty());
}

#[test]
fn figure_one_prompt() {
    let m = method("JvmClassWriter.java", "writeJvmClass");
    let p = build_prompt(&m).unwrap();
    assert!(p.target.contains("writeJvmClass"));
    assert!(p.target.contains("\n85:         for (JvmMethod method : jvmClass.methods()) {\n"));
    let msgs = p.messages();
    assert_eq!(msgs.first().unwrap().role, "system");
    assert!(msgs.last().unwrap().content.ends_with(&p.target));
    assert!(msgs[0].content.contains("function_name"));
}

#[test]
fn budget_is_enforced() {
    let m = method("JvmClassWriter.java", "writeJvmClass");
    let mut t = PromptTemplate::default();
    t.max_prompt_tokens = 200;
    assert!(matches!(t.build(&m), Err(PromptError::MethodTooLarge { budget: 200, .. })));
}

#[test]
fn template_needs_an_example() {
    let err = PromptTemplate::parse("system_preamble='a'\noutput_contract='b'\ninstruction='c'\nexamples=[]").unwrap_err();
    assert!(matches!(err, PromptError::Template(_)));
}

#[test]
fn digest_ignores_secrets_and_iteration_count() {
    let m = method("Shapes.java", "straight");
    let p = build_prompt(&m).unwrap();
    let a = ProviderConfig::default();
    let b = ProviderConfig {
        endpoint: "http://localhost:9".into(),
        api_key_env: "OTHER".into(),
        iterations: 9,
        max_parallel: 2,
        ..ProviderConfig::default()
    };
    assert_eq!(CompletionRequest::new(&p, &a).digest, CompletionRequest::new(&p, &b).digest);
    let c = ProviderConfig { temperature: 0.2, ..ProviderConfig::default() };
    assert_ne!(CompletionRequest::new(&p, &a).digest, CompletionRequest::new(&p, &c).digest);
    let msgs = p.messages();
    assert_eq!(request_digest(&msgs, "gpt-3.5-turbo", 1.0), CompletionRequest::new(&p, &a).digest);
}

#[test]
fn records_keep_iteration_order_and_parallelism_cap() {
    let m = method("Shapes.java", "straight");
    let p = build_prompt(&m).unwrap();
    let provider = Scripted::new(vec![]);
    let cfg = ProviderConfig { iterations: 10, max_parallel: 3, ..ProviderConfig::default() };
    let records = sample(&provider, &p, &cfg).unwrap();
    assert_eq!(records.len(), 10);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r.iteration, i as u32);
        assert_eq!(r.parsed[0].function_name, format!("f{i}"));
    }
    assert!(provider.peak.load(Ordering::SeqCst) <= 3);
}

#[test]
fn one_timeout_is_data() {
    let m = method("Shapes.java", "straight");
    let p = build_prompt(&m).unwrap();
    let provider = Scripted::new(vec![4]);
    let cfg = ProviderConfig { iterations: 7, ..ProviderConfig::default() };
    let records = sample(&provider, &p, &cfg).unwrap();
    assert_eq!(records.len(), 7);
    let failed: Vec<_> = records.iter().filter(|r| r.failed()).collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].iteration, 4);
    assert!(failed[0].diagnostics[0].contains("timed out"));
}

#[test]
fn all_failures_mean_unreachable() {
    let m = method("Shapes.java", "straight");
    let p = build_prompt(&m).unwrap();
    let provider = Scripted::new((0..5).collect());
    let err = sample(&provider, &p, &ProviderConfig::default()).unwrap_err();
    assert!(matches!(err, SampleError::ProviderUnreachable { iterations: 5, .. }));
}

#[test]
fn config_bounds() {
    let m = method("Shapes.java", "straight");
    let p = build_prompt(&m).unwrap();
    let provider = Scripted::new(vec![]);
    for cfg in [
        ProviderConfig { iterations: 0, ..ProviderConfig::default() },
        ProviderConfig { iterations: 21, ..ProviderConfig::default() },
        ProviderConfig { max_parallel: 0, ..ProviderConfig::default() },
        ProviderConfig { temperature: -1.0, ..ProviderConfig::default() },
    ] {
        assert!(matches!(sample(&provider, &p, &cfg), Err(SampleError::Config(_))));
    }
}

#[test]
fn record_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let m = method("Shapes.java", "straight");
    let p = build_prompt(&m).unwrap();
    let cfg = ProviderConfig::default();
    let recorder = RecordingProvider::new(Scripted::new(vec![]));
    let live = sample(&recorder, &p, &cfg).unwrap();
    let files = recorder.persist(dir.path()).unwrap();
    assert_eq!(files.len(), 1);

    let replay = ReplayProvider::new(dir.path());
    let again = sample(&replay, &p, &cfg).unwrap();
    assert_eq!(again.len(), 5);
    for (a, b) in live.iter().zip(&again) {
        assert_eq!(a.raw_text, b.raw_text);
        assert_eq!(a.parsed, b.parsed);
    }
    let digest = CompletionRequest::new(&p, &cfg).digest;
    let f = Fixture::load(dir.path(), &digest).unwrap().unwrap();
    assert_eq!(f.prompt_text, p.render());
}

#[test]
fn replay_without_fixture_is_unreachable() {
    let dir = tempfile::tempdir().unwrap();
    let m = method("Shapes.java", "straight");
    let p = build_prompt(&m).unwrap();
    let err = sample(&ReplayProvider::new(dir.path()), &p, &ProviderConfig::default()).unwrap_err();
    match err {
        SampleError::ProviderUnreachable { last, .. } => assert!(last.contains("no replay fixture")),
        other => panic!("{other:?}"),
    }
}

proptest! {
    #[test]
    fn parsing_is_total(text in ".{0,200}") {
        let p = parse_completion(&text);
        prop_assert!(p.suggestions.is_empty() || !p.diagnostics.iter().any(|d| d.contains("no JSON array")));
    }

    #[test]
    fn parsing_finds_embedded_answers(prefix in "[^\\[]{0,40}", start in -5i64..500, end in -5i64..500) {
        let text = format!("{prefix}```json\n[{{\"function_name\":\"x\",\"line_start\":{start},\"line_end\":{end}}}]\n```");
        let p = parse_completion(&text);
        prop_assert_eq!(p.suggestions.len(), 1);
        prop_assert_eq!(p.suggestions[0].line_start, start);
        prop_assert_eq!(p.suggestions[0].line_end, end);
    }
}
