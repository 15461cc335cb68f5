use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use oodlens_core::analysis::AnalysisConfig;
use oodlens_core::clustering::ClusteringConfig;
use oodlens_core::saliency::SaliencyConfig;

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 42;
/// Cache directory used when `--out-dir` is not given, relative to the data directory.
pub const DEFAULT_OUT_SUBDIR: &str = "analysis";

#[derive(Debug, Parser)]
#[command(name = "oodlens", version, about = "Explore out-of-distribution instances in a text corpus")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a dataset directory and list every violation.
    Validate {
        #[arg(long, env = "DEEPLENS_DATA_DIR")]
        data_dir: PathBuf,
    },
    /// Score, threshold and cluster a dataset, writing the analysis cache.
    Analyze(RunArgs),
    /// Serve the API (and optionally a built UI) over an analysis cache.
    Serve(ServeArgs),
    /// Write a static report from an analysis cache.
    Report(ReportArgs),
    /// Write a synthetic fixture dataset.
    Synth(SynthArgs),
}

/// Flags shared by the commands that work on an analysis.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, env = "DEEPLENS_DATA_DIR")]
    pub data_dir: PathBuf,
    /// Defaults to `<data-dir>/analysis`.
    #[arg(long, env = "DEEPLENS_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long, env = "DEEPLENS_PCA_DIM", default_value_t = 128)]
    pub pca_dim: usize,
    #[arg(long, env = "DEEPLENS_MAX_CLUSTERS", default_value_t = 200)]
    pub max_clusters: usize,
    #[arg(long, env = "DEEPLENS_FACTORS", default_value_t = 10)]
    pub factors: usize,
    /// Defaults to the dataset manifest's seed.
    #[arg(long, env = "DEEPLENS_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "DEEPLENS_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "DEEPLENS_BINS", default_value_t = 40)]
    pub bins: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Run the analysis first instead of requiring an existing cache.
    #[arg(long)]
    pub analyze: bool,
    #[arg(long, env = "DEEPLENS_HOST", default_value = "127.0.0.1")]
    pub host: String,
    /// Directory of built UI assets to serve at `/`.
    #[arg(long, env = "DEEPLENS_UI_DIR")]
    pub ui_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Html,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value_t = ReportFormat::Html)]
    pub format: ReportFormat,
    /// Defaults to `<out-dir>/report.<format>`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Two known topics plus an injected unseen one.
    Scenario,
    /// Four well-separated Gaussian blobs.
    Blobs,
    /// 4,500 test instances with 128-dim features.
    Scale,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(value_enum)]
    pub kind: SynthKind,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

/// Fully resolved settings: flags, then `DEEPLENS_*` variables, then the
/// dataset manifest, then built-in defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub pca_dim: usize,
    pub max_clusters: usize,
    pub factors: usize,
    pub seed: u64,
    pub port: u16,
    pub bins: usize,
}

impl RunConfig {
    pub fn resolve(args: &RunArgs, manifest_seed: Option<u64>) -> Result<Self, CliError> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(CliError::config(format!("--{name} must be positive")))
            } else {
                Ok(())
            }
        };
        positive("pca-dim", args.pca_dim)?;
        positive("factors", args.factors)?;
        positive("bins", args.bins)?;
        if args.max_clusters < 2 {
            return Err(CliError::config("--max-clusters must be at least 2"));
        }
        if args.port == 0 {
            return Err(CliError::config("--port must be positive"));
        }
        Ok(Self {
            data_dir: args.data_dir.clone(),
            out_dir: args.out_dir.clone().unwrap_or_else(|| args.data_dir.join(DEFAULT_OUT_SUBDIR)),
            pca_dim: args.pca_dim,
            max_clusters: args.max_clusters,
            factors: args.factors,
            seed: args.seed.or(manifest_seed).unwrap_or(DEFAULT_SEED),
            port: args.port,
            bins: args.bins,
        })
    }

    pub fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig {
            clustering: ClusteringConfig { p: self.pca_dim, n_max: self.max_clusters, seed: self.seed, ..Default::default() },
            saliency: SaliencyConfig { n_factors: self.factors, seed: self.seed, ..Default::default() },
        }
    }
}

/// The manifest seed, if the manifest can be read at all; full validation
/// happens when the dataset is loaded.
pub fn manifest_seed(data_dir: &Path) -> Option<u64> {
    let text = std::fs::read_to_string(data_dir.join("manifest.json")).ok()?;
    serde_json::from_str::<serde_json::Value>(&text).ok()?.get("seed")?.as_u64()
}
