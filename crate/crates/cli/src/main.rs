use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use emx_cli::commands::{cmd_apply, cmd_eval, cmd_suggest, ApplyMode, EvalArgs, EvalSource};
use emx_cli::server::{serve, AppState};
use emx_cli::{AppConfig, CliError, Overrides, ProviderMode};
use emx_core::source::{LineRange, MethodLocator};

/// Suggest and perform Extract Method refactorings on Java code.
///
/// The API key is read from the environment variable named by the
/// `api_key_env` setting (OPENAI_API_KEY unless configured otherwise).
#[derive(Parser)]
#[command(name = "emx", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Config file (defaults to ./emx.toml when present)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// live, replay or record
    #[arg(long, global = true)]
    provider: Option<ProviderMode>,
    /// Fixture directory for replay and record
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[arg(long, global = true)]
    temperature: Option<f64>,
    #[arg(long, global = true)]
    iterations: Option<u32>,
    #[arg(long, global = true)]
    max_parallel: Option<usize>,
    #[arg(long, global = true)]
    timeout_secs: Option<u64>,
    /// Number of groups to show
    #[arg(long, global = true)]
    top_n: Option<usize>,
    #[arg(long, global = true)]
    prompt_file: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Ask for extraction candidates in one method
    Suggest {
        file: PathBuf,
        /// Method name, or a line inside it
        method: MethodLocator,
        #[arg(long)]
        json: bool,
    },
    /// Extract a line range into a new method
    Apply {
        file: PathBuf,
        /// Inclusive line range, e.g. 85-90
        #[arg(long, value_parser = parse_range)]
        lines: LineRange,
        #[arg(long)]
        name: String,
        /// Host method, when the range start is ambiguous
        #[arg(long)]
        method: Option<MethodLocator>,
        #[arg(long, conflicts_with = "in_place", required_unless_present = "in_place")]
        diff: bool,
        #[arg(long)]
        in_place: bool,
    },
    /// Measure recall against an oracle of known extractions
    Eval {
        #[arg(long)]
        oracle: PathBuf,
        /// live runs the pipeline with the configured provider; dump reads ranked lists from --dump
        #[arg(long, default_value = "live", value_parser = ["live", "dump"])]
        source: String,
        #[arg(long, required_if_eq("source", "dump"))]
        dump: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        json: bool,
        /// Repeat the evaluation this many times
        #[arg(long, default_value_t = 1)]
        runs: usize,
        /// Compare the runs' recall with this value using a one-sample t-test
        #[arg(long)]
        baseline: Option<f64>,
        /// Save the ranked lists that were evaluated as a dump
        #[arg(long)]
        write_dump: Option<PathBuf>,
    },
    /// Serve the HTTP API
    Serve {
        #[arg(long)]
        port: Option<u16>,
        /// Project root; /source and /suggest cannot reach outside it
        #[arg(long, default_value = ".")]
        root: PathBuf,
    },
}

fn parse_range(s: &str) -> Result<LineRange, String> {
    let (a, b) = s.split_once('-').unwrap_or((s, s));
    let a: u32 = a.trim().parse().map_err(|_| format!("bad line number `{a}`"))?;
    let b: u32 = b.trim().parse().map_err(|_| format!("bad line number `{b}`"))?;
    if a == 0 || b < a {
        return Err(format!("`{s}` is not a range A-B with 1 <= A <= B"));
    }
    Ok(LineRange::new(a, b))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let g = cli.global;
    let mut overrides = Overrides {
        mode: g.provider,
        fixture_dir: g.fixtures,
        prompt_file: g.prompt_file,
        endpoint: g.endpoint,
        model: g.model,
        temperature: g.temperature,
        iterations: g.iterations,
        max_parallel: g.max_parallel,
        timeout_secs: g.timeout_secs,
        top_n: g.top_n,
        ..Overrides::default()
    };
    match &cli.command {
        Command::Eval { k, tolerance, .. } => {
            overrides.k = *k;
            overrides.tolerance = *tolerance;
        }
        Command::Serve { port, .. } => overrides.port = *port,
        _ => {}
    }
    let cfg = AppConfig::resolve(g.config.as_deref(), |v| std::env::var(v).ok(), &overrides)?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Suggest { file, method, json } => {
            cmd_suggest(&cfg, &file, &method, json, &mut out)?;
        }
        Command::Apply { file, lines, name, method, in_place, .. } => {
            let mode = if in_place { ApplyMode::InPlace } else { ApplyMode::Diff };
            cmd_apply(&file, lines, &name, method.as_ref(), mode, &mut out)?;
        }
        Command::Eval { oracle, source, dump, json, runs, baseline, write_dump, .. } => {
            let source = match (source.as_str(), dump) {
                ("dump", Some(path)) => EvalSource::Dump(path),
                ("dump", None) => return Err(CliError::Usage("--source dump needs --dump FILE".into())),
                _ => EvalSource::Pipeline,
            };
            cmd_eval(&cfg, &EvalArgs { oracle, source, runs, baseline, json, write_dump }, &mut out)?;
        }
        Command::Serve { root, .. } => {
            let state = Arc::new(AppState::new(&cfg, &root)?);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(state, cfg.port))?;
        }
    }
    out.flush()?;
    Ok(())
}
