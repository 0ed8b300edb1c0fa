use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use emaclab::bench::output::{compare_column, CsvTable};
use emaclab::bench::{preset, run, BenchError, RunConfig, RunOutcome, PRESETS};

#[derive(Parser)]
#[command(name = "emaclab", version, about = "Taylor-Hood Navier-Stokes benchmarks with EMAC and other nonlinear forms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configuration in a key = value file
    Run {
        config: PathBuf,
        /// Extra key=value settings applied on top of the file
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run a named preset
    Preset {
        /// Preset name; `list` prints the available presets
        name: String,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Print the resolved configuration instead of running it
        #[arg(long)]
        print: bool,
    },
    /// Run the fast invariant suite
    Verify,
    /// Largest difference of one column between two diagnostics CSV files
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        column: String,
    },
}

fn read(path: &PathBuf) -> Result<String, BenchError> {
    std::fs::read_to_string(path).map_err(|e| BenchError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn report(outcome: &RunOutcome) {
    println!("diagnostics: {}", outcome.csv_path.display());
    println!("manifest:    {}", outcome.manifest_path.display());
    if !outcome.snapshot_paths.is_empty() {
        println!("snapshots:   {}", outcome.snapshot_paths.len());
    }
    if let Some(last) = outcome.records.last() {
        print!("final t = {:.6}  E = {:.10e}  |M| = {:.3e}", last.t, last.energy, last.momentum_norm());
        if let Some((l2, h1)) = last.errors {
            print!("  L2err = {l2:.6e}  H1err = {h1:.6e}");
        }
        println!();
    }
    if let Some(s) = &outcome.summary {
        println!(
            "window [{}, {}]: cl_max = {:.6}  cd_max = {:.6}",
            s.window.0, s.window.1, s.cl_max, s.cd_max
        );
    }
    println!("wall clock: {:.1} s", outcome.wall_clock_seconds);
}

fn execute(cli: Cli) -> Result<ExitCode, BenchError> {
    match cli.command {
        Command::Run { config, overrides } => {
            let c = RunConfig::parse(&read(&config)?)?.with_overrides(&overrides)?;
            report(&run(&c)?);
        }
        Command::Preset { name, overrides, print } => {
            if name == "list" {
                for (n, d) in PRESETS {
                    println!("{n:16} {d}");
                }
                return Ok(ExitCode::SUCCESS);
            }
            let c = preset(&name)?.with_overrides(&overrides)?;
            if print {
                print!("{}", c.to_text());
            } else {
                report(&run(&c)?);
            }
        }
        Command::Verify => {
            let checks = emaclab::verify::run_all();
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                println!("{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("{} of {} checks passed", checks.len() - failed, checks.len());
            if failed > 0 {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Compare { a, b, column } => {
            let (ta, tb) = (CsvTable::parse(&read(&a)?)?, CsvTable::parse(&read(&b)?)?);
            let (diff, t) = compare_column(&ta, &tb, &column)?;
            println!("max |{column}_a - {column}_b| = {diff:.16e} at t = {t}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
