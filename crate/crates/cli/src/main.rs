use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use errscope::divergence::KlMethod;
use errscope::ingest::Task;
use errscope::pipeline::{self, AnalysisReport, PipelineError, RunManifest, Stages};
use errscope::report::{write_artifacts, Artifact};

#[derive(Parser)]
#[command(name = "errscope", version, about = "Executional and procedural error analysis of surgical gesture data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run manifest (TOML).
    #[arg(long)]
    manifest: PathBuf,
    /// Override the manifest's task.
    #[arg(long)]
    task: Option<Task>,
    /// Truncate transcript entries that run past the kinematics.
    #[arg(long)]
    clamp: bool,
    /// KL estimator: gaussian or histogram.
    #[arg(long)]
    method: Option<KlMethod>,
    /// Seed for clustering initialization.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check inputs and report every problem found.
    Validate(Common),
    /// Run every analysis and write all artifacts.
    Run(Common),
    /// Executional error counts per gesture.
    ExecReport(Common),
    /// Grammar violations per trial and per skill level.
    ProcReport(Common),
    /// KL ranking of parameter groups.
    Kl(Common),
    /// Average trajectories of normal and erroneous gestures.
    Trajavg(Common),
    /// Duration tests and skill correlations.
    Stats(Common),
}

fn load(c: &Common) -> Result<RunManifest, PipelineError> {
    let mut m = RunManifest::load(&c.manifest)?;
    if let Some(task) = c.task {
        m.task = task;
    }
    if c.clamp {
        m.analysis.clamp = true;
    }
    if let Some(method) = c.method {
        m.divergence.method = method;
    }
    if let Some(seed) = c.seed {
        m.fcm.rng_seed = seed;
    }
    if let Some(out) = &c.out {
        m.output_dir = std::env::current_dir().map(|d| d.join(out)).unwrap_or_else(|_| out.clone());
    }
    Ok(m)
}

/// Writes `files` to the output directory when one was requested on the
/// command line, otherwise prints the first file to stdout.
fn emit(c: &Common, m: &RunManifest, files: Vec<Artifact>) -> Result<(), PipelineError> {
    if c.out.is_some() {
        for p in write_artifacts(&m.output_path(), &files)? {
            println!("wrote {}", p.display());
        }
    } else if let Some(first) = files.first() {
        print!("{}", String::from_utf8_lossy(&first.bytes));
    }
    Ok(())
}

fn section(report: &AnalysisReport, name: &str) -> Option<Artifact> {
    pipeline::artifacts(report).into_iter().find(|a| a.path == name)
}

fn sections(report: &AnalysisReport, names: &[&str]) -> Vec<Artifact> {
    names.iter().filter_map(|n| section(report, n)).collect()
}

fn execute(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Validate(c) => {
            let m = load(&c)?;
            let v = pipeline::validate(&m);
            for w in &v.warnings {
                eprintln!("warning: {w}");
            }
            if v.is_ok() {
                println!("OK ({} trials)", v.trials);
                Ok(())
            } else {
                for i in &v.issues {
                    println!("{i}");
                }
                Err(PipelineError::Validation(v))
            }
        }
        Command::Run(c) => {
            let m = load(&c)?;
            let report = pipeline::run_pipeline(&m)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            println!("{} trials analyzed; outputs in {}", report.trials, m.output_path().display());
            Ok(())
        }
        Command::ExecReport(c) => {
            let m = load(&c)?;
            let report = pipeline::analyze(&m, Stages::NO_EXECUTIONAL)?;
            emit(&c, &m, sections(&report, &["error_counts.csv"]))
        }
        Command::ProcReport(c) => {
            let m = load(&c)?;
            let report = pipeline::analyze(&m, Stages::NO_EXECUTIONAL)?;
            emit(&c, &m, sections(&report, &["procedural_summary.csv", "procedural.json"]))
        }
        Command::Kl(c) => {
            let m = load(&c)?;
            let report = pipeline::analyze(&m, Stages { divergence: true, trajectories: false })?;
            for w in &report.kl.warnings {
                eprintln!("warning: {w}");
            }
            let mut files = sections(&report, &["kl.csv"]);
            files.extend(pipeline::plot_data(&report).0.into_iter().filter(|a| a.path.starts_with("dtw/")));
            emit(&c, &m, files)
        }
        Command::Trajavg(c) => {
            let m = load(&c)?;
            let report = pipeline::analyze(&m, Stages::ALL)?;
            let files = sections(&report, &["trajectories.csv"]);
            if files.is_empty() {
                eprintln!("no trajectories computed");
            }
            emit(&c, &m, files)
        }
        Command::Stats(c) => {
            let m = load(&c)?;
            let report = pipeline::analyze(&m, Stages::NO_EXECUTIONAL)?;
            emit(&c, &m, sections(&report, &["durations.csv", "correlations.csv", "skill_bands.csv", "trial_scatter.csv"]))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(PipelineError::Validation(v)) => {
            eprintln!("validation failed with {} issue(s)", v.issues.len());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
