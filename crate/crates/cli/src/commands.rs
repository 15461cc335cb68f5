use std::io::Write;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use oodlens_core::analysis::{analyze, AnalysisBundle};
use oodlens_core::fixtures::{blob_spec, scale_spec, scenario_spec, topical_corpus};
use oodlens_core::ingest::{load_dataset, validate_dataset, Split};
use oodlens_service::AppState;

use crate::config::{manifest_seed, Cli, Command, ReportArgs, ReportFormat, RunArgs, RunConfig, ServeArgs, SynthArgs, SynthKind};
use crate::error::CliError;
use crate::report::{build_report, render_html};

/// Runs one command, writing its normal output to `out`. Returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match cli.command {
        Command::Validate { data_dir } => validate(&data_dir, out),
        Command::Analyze(args) => cmd_analyze(&args, out).map(|_| 0),
        Command::Serve(args) => serve(&args, out).map(|_| 0),
        Command::Report(args) => report(&args, out).map(|_| 0),
        Command::Synth(args) => synth(&args, out).map(|_| 0),
    }
}

fn emit(out: &mut dyn Write, line: std::fmt::Arguments<'_>) -> Result<(), CliError> {
    out.write_fmt(line).and_then(|_| out.write_all(b"\n")).and_then(|_| out.flush()).map_err(|e| CliError::new("io", e.to_string()))
}

pub fn validate(data_dir: &Path, out: &mut dyn Write) -> Result<i32, CliError> {
    if !data_dir.is_dir() {
        return Err(CliError::new("io", format!("{} is not a readable directory", data_dir.display())));
    }
    let report = validate_dataset(data_dir)?;
    for v in &report.violations {
        emit(out, format_args!("violation: {v}"))?;
    }
    let n = report.violations.len();
    emit(out, format_args!("{n} violation{}", if n == 1 { "" } else { "s" }))?;
    Ok(if n == 0 { 0 } else { 1 })
}

fn resolve(args: &RunArgs) -> Result<RunConfig, CliError> {
    RunConfig::resolve(args, manifest_seed(&args.data_dir))
}

/// Analyzes, writes the cache, and returns the bundle as reloaded from it, so
/// a freshly analyzed server answers exactly like a restarted one.
pub fn analyze_to_cache(cfg: &RunConfig) -> Result<AnalysisBundle, CliError> {
    let dataset = load_dataset(&cfg.data_dir)?;
    let bundle = analyze(dataset, cfg.analysis())?;
    bundle.write_cache(&cfg.out_dir)?;
    Ok(AnalysisBundle::from_cache(bundle.dataset, &cfg.out_dir)?)
}

pub fn cmd_analyze(args: &RunArgs, out: &mut dyn Write) -> Result<AnalysisBundle, CliError> {
    let cfg = resolve(args)?;
    let bundle = analyze_to_cache(&cfg)?;
    emit(out, format_args!("n_opt={}", bundle.clustering.n_opt))?;
    emit(out, format_args!("epsilon={}", bundle.epsilon()))?;
    emit(out, format_args!("train={} test={}", bundle.scores.split_len(Split::Train), bundle.scores.split_len(Split::Test)))?;
    emit(out, format_args!("cache={}", cfg.out_dir.display()))?;
    Ok(bundle)
}

fn load_cached(cfg: &RunConfig) -> Result<AnalysisBundle, CliError> {
    if !cfg.out_dir.join(oodlens_core::analysis::ANALYSIS_FILE).is_file() {
        return Err(CliError::new(
            "missing_cache",
            format!("no analysis in {}; run `oodlens analyze` or pass --analyze", cfg.out_dir.display()),
        ));
    }
    Ok(AnalysisBundle::load(&cfg.data_dir, &cfg.out_dir)?)
}

pub fn serve(args: &ServeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = resolve(&args.run)?;
    let bundle = if args.analyze { analyze_to_cache(&cfg)? } else { load_cached(&cfg)? };
    let addr: SocketAddr = format!("{}:{}", args.host, cfg.port)
        .parse()
        .map_err(|e| CliError::config(format!("bad listen address {}:{}: {e}", args.host, cfg.port)))?;
    if let Some(dir) = &args.ui_dir {
        if !dir.is_dir() {
            return Err(CliError::config(format!("--ui-dir {} is not a directory", dir.display())));
        }
    }
    let state = Arc::new(AppState::new(bundle).with_default_bins(cfg.bins));
    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::new("serve", e.to_string()))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| match e.kind() {
            std::io::ErrorKind::AddrInUse => CliError::new("port_in_use", format!("{addr} is already in use")),
            _ => CliError::new("serve", format!("cannot bind {addr}: {e}")),
        })?;
        let local = listener.local_addr().map_err(|e| CliError::new("serve", e.to_string()))?;
        emit(out, format_args!("listening on http://{local}"))?;
        oodlens_service::serve_on(listener, state, args.ui_dir.clone()).await.map_err(|e| CliError::new("serve", e.to_string()))
    })
}

pub fn report(args: &ReportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = resolve(&args.run)?;
    let bundle = load_cached(&cfg)?;
    let report = build_report(&bundle, cfg.bins)?;
    let (ext, body) = match args.format {
        ReportFormat::Json => ("json", serde_json::to_string_pretty(&report).expect("report serializes") + "\n"),
        ReportFormat::Html => ("html", render_html(&report)),
    };
    let path = args.output.clone().unwrap_or_else(|| cfg.out_dir.join(format!("report.{ext}")));
    std::fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
    emit(out, format_args!("report={}", path.display()))?;
    Ok(())
}

pub fn synth(args: &SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = match args.kind {
        SynthKind::Scenario => scenario_spec(args.seed),
        SynthKind::Blobs => blob_spec(4, 100, 10, 0.05, args.seed),
        SynthKind::Scale => scale_spec(args.seed),
    };
    let corpus = topical_corpus(&spec);
    corpus.dataset.write_to(&args.out)?;
    emit(out, format_args!("wrote {} instances to {}", corpus.dataset.len(), args.out.display()))?;
    Ok(())
}
