use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use polariton_cli::config::{self, Pipeline};
use polariton_cli::{Failure, EXIT_CONFIG, EXIT_OK, OUT_ENV};

#[derive(Parser)]
#[command(
    name = "polariton",
    version,
    about = "Fano diagonalization of the damped-polariton model in 1D"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to [output] dir, then $POLARITON_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a tolerance, e.g. `oracle_response=0.02`.
    #[arg(long = "tol-override", value_name = "NAME=VALUE")]
    tol_override: Vec<String>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every pipeline listed in the config.
    Run(Common),
    /// Static validation; prints diagnostics as JSON.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    Chi(Common),
    Green(Common),
    Modes(Common),
    Verify(Common),
    Correlate(Common),
    Oracle(Common),
}

fn fail(f: Failure) -> ExitCode {
    eprintln!("error: {}", f.message);
    for d in &f.diagnostics {
        eprintln!("  {d}");
    }
    ExitCode::from(f.code as u8)
}

fn validate(path: &PathBuf) -> ExitCode {
    let diags = match polariton_cli::load(path) {
        Ok(l) => config::validate(&l.config, &l.base_dir),
        Err(f) if !f.diagnostics.is_empty() => f.diagnostics,
        Err(f) => return fail(f),
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&diags).expect("diagnostics serialize")
    );
    if config::has_errors(&diags) {
        ExitCode::from(EXIT_CONFIG as u8)
    } else {
        ExitCode::from(EXIT_OK as u8)
    }
}

fn execute(common: Common, selected: Option<Pipeline>) -> ExitCode {
    if let Some(n) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("warning: cannot configure {n} threads: {e}");
        }
    }
    let mut loaded = match polariton_cli::load(&common.config) {
        Ok(l) => l,
        Err(f) => return fail(f),
    };
    if let Err(f) = polariton_cli::apply_overrides(&mut loaded.config, &common.tol_override) {
        return fail(f);
    }
    let env_root = std::env::var_os(OUT_ENV).map(PathBuf::from);
    let out = polariton_cli::output_dir(common.out.as_deref(), &loaded.config, env_root);
    match polariton_cli::run(&loaded, selected, &out) {
        Ok(report) => {
            for d in &report.diagnostics {
                eprintln!("{d}");
            }
            for p in &report.pipelines {
                let failed: Vec<&str> = p
                    .residuals
                    .iter()
                    .filter(|r| r.pass == Some(false))
                    .map(|r| r.name.as_str())
                    .collect();
                if failed.is_empty() {
                    println!("[{}] ok ({} residuals)", p.name, p.residuals.len());
                } else {
                    println!("[{}] outside tolerance: {}", p.name, failed.join(", "));
                }
            }
            println!("report: {}", out.join("report.json").display());
            ExitCode::from(EXIT_OK as u8)
        }
        Err(f) => fail(f),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(c) => execute(c, None),
        Command::Validate { config } => validate(&config),
        Command::Chi(c) => execute(c, Some(Pipeline::Chi)),
        Command::Green(c) => execute(c, Some(Pipeline::Green)),
        Command::Modes(c) => execute(c, Some(Pipeline::Modes)),
        Command::Verify(c) => execute(c, Some(Pipeline::Verify)),
        Command::Correlate(c) => execute(c, Some(Pipeline::Correlate)),
        Command::Oracle(c) => execute(c, Some(Pipeline::Oracle)),
    }
}
