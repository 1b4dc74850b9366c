//! The `suggest`, `apply` and `eval` commands, written against any output stream.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use emx_core::candidates::{process, FilterOptions, Provenance, RawRange, Suggestion, SuggestionState};
use emx_core::dataflow::{build_cfg, liveness};
use emx_core::eval::{
    evaluate, load_oracle, repeated_stats, DumpSource, EvalOptions, EvalReport, LoadError, RankedRange, ResolvedEntry,
    SourceOutput, SuggestionSource,
};
use emx_core::extractor::{apply, plan, Applied, ApplyError};
use emx_core::pipeline::{run, PipelineError, PipelineOptions, PipelineOutput, PipelineSource};
use emx_core::provider::{
    LiveProvider, PromptError, PromptTemplate, Provider, RecordingProvider, ReplayProvider, SampleError,
};
use emx_core::source::{locate_method, parse_unit, LineRange, LocateError, MethodLocator, MethodModel, SourceUnit};
use thiserror::Error;

use crate::config::{AppConfig, ConfigError, ProviderMode};

/// Everything that ends a command early, with its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Method(#[from] LocateError),
    #[error("{0}")]
    ProviderUnreachable(String),
    #[error("{0}")]
    InvalidRange(String),
    #[error("{0}")]
    EmptyOracle(String),
    #[error("the file changed since the suggestions were computed")]
    StaleUnit,
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::FileNotFound(_) => 3,
            CliError::Parse(_) => 4,
            CliError::Method(_) => 5,
            CliError::ProviderUnreachable(_) => 6,
            CliError::InvalidRange(_) => 7,
            CliError::EmptyOracle(_) => 8,
            CliError::StaleUnit | CliError::Io(_) => 9,
            CliError::Config(_) => 10,
            CliError::Other(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Sample(SampleError::ProviderUnreachable { .. }) => CliError::ProviderUnreachable(e.to_string()),
            PipelineError::Sample(SampleError::Config(c)) => CliError::Config(ConfigError::Invalid(c.to_string())),
            PipelineError::Prompt(p @ PromptError::MethodTooLarge { .. }) => CliError::Other(p.to_string()),
            PipelineError::Prompt(p) => CliError::Config(ConfigError::Invalid(p.to_string())),
        }
    }
}

impl From<ApplyError> for CliError {
    fn from(e: ApplyError) -> Self {
        match e {
            ApplyError::StaleUnit => CliError::StaleUnit,
            ApplyError::RenderError(_) => CliError::Other(e.to_string()),
        }
    }
}

pub fn load_unit(path: &Path) -> Result<Arc<SourceUnit>, CliError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(CliError::FileNotFound(path.to_owned())),
        Err(e) => return Err(CliError::Io(format!("{}: {e}", path.display()))),
    };
    parse_unit(&text, path).map(Arc::new).map_err(|e| CliError::Parse(e.to_string()))
}

pub fn load_method(path: &Path, locator: &MethodLocator) -> Result<MethodModel, CliError> {
    let unit = load_unit(path)?;
    Ok(locate_method(&unit, locator)?)
}

/// The configured completion source.
pub enum ProviderHandle {
    Live(LiveProvider),
    Replay(ReplayProvider),
    Record(RecordingProvider<LiveProvider>, PathBuf),
}

impl ProviderHandle {
    pub fn from_config(cfg: &AppConfig) -> Result<Self, CliError> {
        let fixtures = || cfg.fixture_dir.clone().ok_or_else(|| CliError::Usage("a fixture directory is required".into()));
        Ok(match cfg.mode {
            ProviderMode::Live => ProviderHandle::Live(LiveProvider::new(&cfg.provider)),
            ProviderMode::Replay => ProviderHandle::Replay(ReplayProvider::new(fixtures()?)),
            ProviderMode::Record => {
                ProviderHandle::Record(RecordingProvider::new(LiveProvider::new(&cfg.provider)), fixtures()?)
            }
        })
    }

    pub fn provider(&self) -> &dyn Provider {
        match self {
            ProviderHandle::Live(p) => p,
            ProviderHandle::Replay(p) => p,
            ProviderHandle::Record(p, _) => p,
        }
    }

    /// Save recorded completions, if recording.
    pub fn finish(&self) -> Result<(), CliError> {
        if let ProviderHandle::Record(p, dir) = self {
            let written = p.persist(dir).map_err(|e| CliError::Io(e.to_string()))?;
            log::info!("wrote {} fixture(s) to {}", written.len(), dir.display());
        }
        Ok(())
    }
}

pub fn pipeline_options(cfg: &AppConfig) -> Result<PipelineOptions, CliError> {
    let template = match &cfg.prompt_file {
        Some(path) => PromptTemplate::load(path).map_err(|e| ConfigError::Invalid(e.to_string()))?,
        None => PromptTemplate::default(),
    };
    Ok(PipelineOptions { provider: cfg.provider.clone(), template, top_n: cfg.top_n, ..PipelineOptions::default() })
}

/// Run the whole suggestion pipeline for one method.
pub fn suggest(cfg: &AppConfig, model: &MethodModel) -> Result<PipelineOutput, CliError> {
    let handle = ProviderHandle::from_config(cfg)?;
    let opts = pipeline_options(cfg)?;
    let out = run(model, handle.provider(), &opts);
    handle.finish()?;
    Ok(out?)
}

pub fn cmd_suggest(
    cfg: &AppConfig,
    file: &Path,
    locator: &MethodLocator,
    json: bool,
    out: &mut dyn Write,
) -> Result<PipelineOutput, CliError> {
    let model = load_method(file, locator)?;
    let result = suggest(cfg, &model)?;
    if json {
        serde_json::to_writer_pretty(&mut *out, &result).map_err(|e| CliError::Other(e.to_string()))?;
        writeln!(out)?;
    } else {
        print_suggestions(&result, out)?;
    }
    Ok(result)
}

fn print_suggestions(r: &PipelineOutput, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(
        out,
        "{} (lines {}): {} proposal(s) from {} completion(s)",
        r.method,
        r.method_lines,
        r.suggestions.len(),
        r.records.len()
    )?;
    if r.groups.is_empty() {
        writeln!(out, "no suggestions")?;
    }
    for g in &r.groups {
        let grp = &g.group;
        writeln!(
            out,
            "{}. {}  lines {}  ({} line(s), {} statement(s), proposed {}x)",
            g.rank,
            grp.representative_name,
            grp.canonical_range,
            grp.canonical_range.len(),
            grp.fragment.len(),
            grp.frequency
        )?;
        match (&g.signature, &g.plan_error) {
            (Some(sig), _) => writeln!(out, "   {sig}")?,
            (None, Some(e)) => writeln!(out, "   (cannot extract: {e})")?,
            (None, None) => {}
        }
    }
    if !r.rejection_counts.is_empty() {
        let counts: Vec<String> = r.rejection_counts.iter().map(|(k, v)| format!("{k} {v}")).collect();
        writeln!(out, "rejected: {}", counts.join(", "))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApplyMode {
    Diff,
    InPlace,
}

/// Check a hand-picked range and extract it.
pub fn extract_range(
    model: &MethodModel,
    range: LineRange,
    name: &str,
    filter: &FilterOptions,
) -> Result<Applied, CliError> {
    let cfg = build_cfg(model);
    let live = liveness(model, &cfg);
    let s = Suggestion::raw(
        0,
        name,
        RawRange::new(i64::from(range.start), i64::from(range.end)),
        Provenance { iteration: 0, provider: "user".into() },
    );
    let s = process(model, &cfg, &live, s, filter);
    if let Some(rej) = s.state.rejection() {
        return Err(CliError::InvalidRange(rej.to_string()));
    }
    debug_assert_eq!(s.state, SuggestionState::Useful);
    let fragment = s.fragment.expect("useful suggestions carry a fragment");
    let p = plan(model, &cfg, &live, &fragment, name).map_err(|e| CliError::InvalidRange(e.to_string()))?;
    Ok(apply(model.unit(), &p)?)
}

pub fn cmd_apply(
    file: &Path,
    range: LineRange,
    name: &str,
    method: Option<&MethodLocator>,
    mode: ApplyMode,
    out: &mut dyn Write,
) -> Result<Applied, CliError> {
    let locator = method.cloned().unwrap_or(MethodLocator::Line(range.start));
    let model = load_method(file, &locator)?;
    let applied = extract_range(&model, range, name, &FilterOptions::default())?;
    match mode {
        ApplyMode::Diff => out.write_all(applied.script.diff.as_bytes())?,
        ApplyMode::InPlace => {
            write_atomically(file, &applied.new_text)?;
            writeln!(out, "extracted {name} from {} lines {range} in {}", model.name, file.display())?;
        }
    }
    Ok(applied)
}

/// Replace `path` with `text` through a temporary file in the same directory.
pub fn write_atomically(path: &Path, text: &str) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.as_file().sync_all()?;
    if let Ok(meta) = std::fs::metadata(path) {
        std::fs::set_permissions(tmp.path(), meta.permissions())?;
    }
    tmp.persist(path).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

pub enum EvalSource {
    Pipeline,
    Dump(PathBuf),
}

pub struct EvalArgs {
    pub oracle: PathBuf,
    pub source: EvalSource,
    pub runs: usize,
    pub baseline: Option<f64>,
    pub json: bool,
    pub write_dump: Option<PathBuf>,
}

/// Remembers what a source returned so it can be written as a dump.
struct Capturing<'a> {
    inner: &'a dyn SuggestionSource,
    seen: Mutex<BTreeMap<String, Vec<RankedRange>>>,
}

impl SuggestionSource for Capturing<'_> {
    fn suggestions(&self, entry: &ResolvedEntry) -> Result<SourceOutput, String> {
        let out = self.inner.suggestions(entry)?;
        self.seen.lock().unwrap().insert(entry.entry.id.clone(), out.ranked.clone());
        Ok(out)
    }
}

pub fn cmd_eval(cfg: &AppConfig, args: &EvalArgs, out: &mut dyn Write) -> Result<EvalReport, CliError> {
    let load = load_oracle(&args.oracle).map_err(|e| match e {
        LoadError::Io { .. } => CliError::FileNotFound(args.oracle.clone()),
        LoadError::EmptyOracle { ref diagnostics, .. } => {
            for d in diagnostics {
                log::warn!("{d}");
            }
            CliError::EmptyOracle(e.to_string())
        }
    })?;
    for d in &load.diagnostics {
        log::warn!("oracle {d}");
    }
    log::info!("{} oracle entries, {}", load.entries.len(), load.loc);
    let opts = EvalOptions { k: cfg.k, tolerance: cfg.tolerance, ..EvalOptions::default() };

    let handle = match args.source {
        EvalSource::Pipeline => Some(ProviderHandle::from_config(cfg)?),
        EvalSource::Dump(_) => None,
    };
    let pipeline;
    let dump;
    let source: &dyn SuggestionSource = match &args.source {
        EvalSource::Pipeline => {
            let h = handle.as_ref().expect("pipeline source has a provider");
            let mut options = pipeline_options(cfg)?;
            options.top_n = cfg.k;
            pipeline = PipelineSource { provider: h.provider(), options };
            &pipeline
        }
        EvalSource::Dump(path) => {
            dump = DumpSource::load(path).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => CliError::FileNotFound(path.clone()),
                _ => CliError::Io(e.to_string()),
            })?;
            for d in &dump.diagnostics {
                log::warn!("{d}");
            }
            &dump
        }
    };
    let capturing = Capturing { inner: source, seen: Mutex::new(BTreeMap::new()) };

    let runs = args.runs.max(1);
    let mut reports: Vec<EvalReport> = (0..runs).map(|_| evaluate(&load.entries, &capturing, &opts)).collect();
    if let Some(h) = &handle {
        h.finish()?;
    }
    let mut report = reports.swap_remove(0);
    if let Some(baseline) = args.baseline {
        let mut recalls = vec![report.recall];
        recalls.extend(reports.iter().map(|r| r.recall));
        report.stats = Some(repeated_stats(&recalls, baseline).map_err(|e| CliError::Usage(e.to_string()))?);
    }

    if let Some(path) = &args.write_dump {
        let mut text = String::new();
        for (id, ranked) in capturing.seen.lock().unwrap().iter() {
            let line = serde_json::json!({ "id": id, "suggestions": ranked });
            text.push_str(&line.to_string());
            text.push('\n');
        }
        std::fs::write(path, text)?;
    }

    if args.json {
        serde_json::to_writer_pretty(&mut *out, &report).map_err(|e| CliError::Other(e.to_string()))?;
        writeln!(out)?;
    } else {
        writeln!(out, "{} entries ({})", load.entries.len(), load.loc)?;
        out.write_all(report.table().as_bytes())?;
    }
    Ok(report)
}
