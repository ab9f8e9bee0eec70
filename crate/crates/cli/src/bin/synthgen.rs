use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use errscope::synthgen::{generate, SynthSpec};

/// Generate a synthetic dataset with known injected errors.
#[derive(Parser)]
#[command(name = "synthgen", version)]
struct Cli {
    /// Generator spec (TOML). Defaults apply to omitted fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Dataset directory to create.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli
        .spec
        .as_deref()
        .map_or_else(|| Ok(SynthSpec::default()), SynthSpec::load)
        .and_then(|spec| generate(&spec))
        .and_then(|ds| {
            let manifest = ds.write(&cli.out)?;
            Ok((ds, manifest))
        });
    match result {
        Ok((ds, manifest)) => {
            println!(
                "{} trials, {} instances ({} erroneous), {} corruptions; manifest {}",
                ds.truth.trials,
                ds.truth.instances,
                ds.truth.erroneous_instances,
                ds.truth.corruptions.len(),
                manifest.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
