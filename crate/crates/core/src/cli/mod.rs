//! Command surface: manifests, configuration, experiment runs, sweeps and reports.

pub mod args;
pub mod config;
pub mod corpora;
pub mod manifest;
pub mod report;
pub mod runner;
pub mod sweep;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::Parser;

pub use args::{Cli, Command, Overrides, RunArgs};
pub use config::{ConfigError, ExperimentConfig};
pub use corpora::{scan_corpus, write_corpus_manifest, CorpusEntry, CorpusLayout};
pub use manifest::{
    canonical_label, ingest_manifest, parse_manifest, Manifest, ManifestError, ManifestRow,
    Protocol,
};
pub use report::{render_report, RunSummary, Tables};
pub use runner::{
    evaluate_run, extract_features, run_experiment, run_experiment_with_cache, ErrorKind,
    ModelSidecar, RunError, RunOutcome,
};
pub use sweep::{
    run_sweep, run_sweep_with_cache, subset_id, window_subsets, SubsetResult, SweepSummary,
};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_RUNTIME: u8 = 4;

impl ErrorKind {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorKind::Config => EXIT_CONFIG,
            ErrorKind::Data => EXIT_DATA,
            ErrorKind::Runtime => EXIT_RUNTIME,
        }
    }
}

/// Config file (or defaults) with command-line overrides applied.
pub fn resolve_config(args: &RunArgs) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    args.overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn load(args: &RunArgs) -> Result<(ExperimentConfig, Manifest), RunError> {
    let cfg = resolve_config(args)?;
    let manifest = ingest_manifest(&args.manifest, cfg.protocol)?;
    log::info!(
        "{}: {} utterances, classes {:?}, excluded {:?}",
        args.manifest.display(),
        manifest.rows.len(),
        manifest.class_names,
        manifest.excluded
    );
    Ok((cfg, manifest))
}

/// Executes one parsed command.
pub fn execute(cli: &Cli) -> Result<(), RunError> {
    match &cli.command {
        Command::Extract(a) => {
            let (cfg, manifest) = load(a)?;
            let cache = runner::open_cache(&cfg)?;
            let dataset = extract_features(&manifest, &cfg, &a.out, &cache)?;
            println!(
                "extracted {} windows for {} utterances ({} cache hits, {} computed, {} failures)",
                dataset.windows.len(),
                dataset.train_utterances() + dataset.test.first().map_or(0, |t| t.examples.len()),
                cache.hits(),
                cache.misses(),
                dataset.failures.len()
            );
        }
        Command::Train(a) => {
            let (cfg, manifest) = load(a)?;
            let outcome = run_experiment(&manifest, &cfg, &a.out)?;
            let r = &outcome.report;
            println!(
                "best window {} ms: UA {:.4}  WAP {:.4}  WAF1 {:.4}  (mean UA over windows {:.4})",
                r.best_window_ms, r.metrics.ua, r.metrics.wap, r.metrics.waf1, r.mean_ua
            );
        }
        Command::Eval(a) => {
            let (cfg, manifest) = load(a)?;
            let r = evaluate_run(&manifest, &cfg, &a.out)?;
            println!(
                "best window {} ms: UA {:.4}  WAP {:.4}  WAF1 {:.4}  (mean UA over windows {:.4})",
                r.best_window_ms, r.metrics.ua, r.metrics.wap, r.metrics.waf1, r.mean_ua
            );
        }
        Command::Sweep(a) => {
            let (cfg, manifest) = load(a)?;
            let summary = run_sweep(&manifest, &cfg, &a.out)?;
            print!("{}", sweep::sweep_csv(&summary));
        }
        Command::Report { dir } => {
            let tables = render_report(dir)?;
            println!("{}", tables.comparison_text);
            print!("{}", tables.grid_text);
        }
        Command::MakeManifest { layout, root, out } => {
            let entries = scan_corpus(root, *layout).map_err(runner::io_err(root))?;
            if entries.is_empty() {
                return Err(RunError::NoResults(root.clone()));
            }
            write_corpus_manifest(out, &entries).map_err(runner::io_err(out))?;
            println!("wrote {} rows to {}", entries.len(), out.display());
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let _ = env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .try_init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind().exit_code())
        }
    }
}
