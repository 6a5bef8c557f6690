use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pruefer_lab::experiment::{
    load_config, parse_config, report, run_experiment, ExperimentConfig, ExperimentError, ExperimentKind,
};

/// Batch experiments on the Prüfer phase of decaying random Schrödinger operators.
#[derive(Parser)]
#[command(name = "pruefer-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalue point process on [0, L].
    Spectrum(RunArgs),
    /// Clock-process samples (alpha > 1/2).
    Clock(RunArgs),
    /// Gaussian spacing fluctuations (1/2 < alpha < 1).
    Gaussian(RunArgs),
    /// Critical gap statistics against the circular beta-ensemble.
    Critical(RunArgs),
    /// The critical SDE family Psi_t(c).
    PsiSde(RunArgs),
    /// Circular beta-ensemble samples.
    Cbe(RunArgs),
    /// Model constants at a list of energies.
    Constants(RunArgs),
    /// Phase uniformity mod pi.
    Uniformity(RunArgs),
    /// Characteristic-function decay of the centred phase.
    CharDecay(RunArgs),
    /// Merge run manifests into one pass/fail table.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; its `kind` must match the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override run.master_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override run.replicas.
    #[arg(long)]
    replicas: Option<usize>,
    /// Override run.workers (default: config, then PRUEFER_LAB_WORKERS, then 1).
    #[arg(long)]
    workers: Option<usize>,
    /// Override run.output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit nonzero when an acceptance check fails.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Manifest files or run directories.
    #[arg(required = true)]
    manifests: Vec<PathBuf>,
    /// Directory for report.json, report.csv and ECDF tables.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit nonzero when any listed check failed.
    #[arg(long)]
    check: bool,
}

fn fail(err: &ExperimentError) -> ExitCode {
    match err {
        ExperimentError::Validation(errors) => {
            eprintln!("error: invalid config");
            for e in errors {
                eprintln!("  {e}");
            }
        }
        e => eprintln!("error: {e}"),
    }
    ExitCode::from(2)
}

fn resolve(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig, ExperimentError> {
    let mut config = match &args.config {
        Some(path) => load_config(path)?,
        None => parse_config(&format!("kind = \"{kind}\"\n"))?,
    };
    if config.kind != kind {
        return Err(ExperimentError::SchemaMismatch(format!(
            "config describes a '{}' experiment, not '{kind}'",
            config.kind
        )));
    }
    if let Some(s) = args.seed {
        config.run.master_seed = s;
    }
    if let Some(r) = args.replicas {
        config.run.replicas = r;
    }
    if let Some(w) = args.workers {
        config.run.workers = Some(w);
    }
    if let Some(o) = &args.out {
        config.run.output_dir = o.clone();
    }
    Ok(config)
}

fn run(kind: ExperimentKind, args: &RunArgs) -> ExitCode {
    let manifest = match resolve(kind, args).and_then(|c| run_experiment(&c)) {
        Ok(m) => m,
        Err(e) => return fail(&e),
    };
    println!(
        "{}: {} replicas completed, {} failed, {:.1}s on {} worker(s) -> {}",
        kind,
        manifest.completed,
        manifest.failures.len(),
        manifest.wall_time_s,
        manifest.workers,
        manifest.config.run.output_dir.display()
    );
    for f in &manifest.failures {
        println!("  replica {} (seed {}): {}", f.replica, f.seed, f.error);
    }
    for (name, c) in &manifest.checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        println!("  {verdict} {name}: {} (threshold {})", c.statistic, c.threshold);
    }
    if args.check && !manifest.passed() {
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}

fn run_report(args: &ReportArgs) -> ExitCode {
    let r = match report(&args.manifests, args.out.as_deref()) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    println!(
        "{}: {} sources, {} replicas completed, {} failed",
        r.kind,
        r.sources.len(),
        r.completed,
        r.failures
    );
    for row in &r.table {
        let verdict = if row.pass { "PASS" } else { "FAIL" };
        println!("  {verdict} {} [{}]: {} (threshold {})", row.test, row.source, row.statistic, row.threshold);
    }
    if args.out.is_none() {
        match serde_json::to_string_pretty(&r.summary) {
            Ok(s) => println!("{s}"),
            Err(e) => eprintln!("error: {e}"),
        }
    }
    if args.check && !r.passed() {
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Spectrum(a) => (ExperimentKind::Spectrum, a),
        Command::Clock(a) => (ExperimentKind::Clock, a),
        Command::Gaussian(a) => (ExperimentKind::Gaussian, a),
        Command::Critical(a) => (ExperimentKind::Critical, a),
        Command::PsiSde(a) => (ExperimentKind::PsiSde, a),
        Command::Cbe(a) => (ExperimentKind::Cbe, a),
        Command::Constants(a) => (ExperimentKind::Constants, a),
        Command::Uniformity(a) => (ExperimentKind::Uniformity, a),
        Command::CharDecay(a) => (ExperimentKind::CharDecay, a),
        Command::Report(a) => return run_report(a),
    };
    run(kind, args)
}
