//! Command-line front end of the `crowdflow` binary.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::scenario::{builtin_scenario, parse_config, run_scenario, serialize_config, Scenario, BUILTIN_NAMES};
use crate::study::{run_convergence, run_sweep, sweep_csv, ConvergenceCase, SweepParam};

#[derive(Debug, Parser)]
#[command(name = "crowdflow", version, about = "Macroscopic pedestrian flow simulator")]
struct Cli {
    /// Run every kernel on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write series, report and snapshots.
    Run {
        /// Scenario config file.
        #[arg(short = 'c', long = "config", conflicts_with = "scenario")]
        config: Option<PathBuf>,
        /// Built-in scenario name instead of a config file.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(short = 'o', long = "out", default_value = "out")]
        out: PathBuf,
    },
    /// Mesh-refinement ladder with a least-squares order fit.
    Convergence {
        /// test1, test2 or full.
        #[arg(long)]
        case: String,
        /// Comma-separated target cell counts.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        levels: Vec<usize>,
        #[arg(short = 'o', long = "out", default_value = "out")]
        out: PathBuf,
    },
    /// Evacuation time as a function of one parameter.
    Sweep {
        /// p0, gamma or v_max.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        #[arg(short = 'c', long = "config", conflicts_with = "scenario")]
        config: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(short = 'o', long = "out", default_value = "out")]
        out: PathBuf,
    },
    /// Print the config of a built-in scenario.
    Scenario {
        /// One of the built-in names; omit to list them.
        name: Option<String>,
    },
}

fn load(config: Option<&Path>, scenario: Option<&str>) -> Result<Scenario> {
    match (config, scenario) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_config(&text)
        }
        (None, Some(name)) => builtin_scenario(name),
        (None, None) => Err(Error::Config("pass either -c <config> or --scenario <name>".into())),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn execute(cli: Cli) -> Result<()> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Run { config, scenario, out } => {
            let sc = load(config.as_deref(), scenario.as_deref())?;
            match run_scenario(&sc, Some(&out), exec) {
                Ok(report) => {
                    print!("{}", report.to_text());
                    Ok(())
                }
                Err(f) => {
                    if let Some(partial) = f.partial {
                        print!("{}", partial.to_text());
                    }
                    Err(f.error)
                }
            }
        }
        Command::Convergence { case, levels, out } => {
            let case = ConvergenceCase::parse(&case)?;
            let report = run_convergence(case, &levels, exec)?;
            create_dir(&out)?;
            for (field, study) in &report.fields {
                let path = out.join(format!("convergence_{}_{field}.csv", case.name()));
                write(&path, &study.to_csv())?;
                println!("{field}: p = {:.4}, C = {:.4e}", study.p, study.c);
            }
            if report.extrapolated > 0 {
                log::warn!("{} sample points fell outside the reference mesh", report.extrapolated);
            }
            Ok(())
        }
        Command::Sweep {
            param,
            values,
            config,
            scenario,
            out,
        } => {
            let param = SweepParam::parse(&param)?;
            let sc = load(config.as_deref(), scenario.as_deref())?;
            create_dir(&out)?;
            let points = run_sweep(&sc, param, &values, Some(&out), exec)?;
            let csv = sweep_csv(param, &points);
            write(&out.join(format!("sweep_{}.csv", param.name())), &csv)?;
            print!("{csv}");
            for p in &points {
                if let Some(msg) = &p.failure {
                    log::error!("{} = {:?}: {msg}", param.name(), p.value);
                }
            }
            Ok(())
        }
        Command::Scenario { name } => {
            match name {
                Some(name) => print!("{}", serialize_config(&builtin_scenario(&name)?)),
                None => {
                    for n in BUILTIN_NAMES {
                        println!("{n}");
                    }
                }
            }
            Ok(())
        }
    }
}

/// Parses `argv` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argument_errors_exit_with_two() {
        assert_eq!(run_cli(["crowdflow", "frobnicate"]), 2);
        assert_eq!(run_cli(["crowdflow", "run", "-c", "a", "--scenario", "room_empty"]), 2);
    }

    #[test]
    fn bad_inputs_exit_with_one() {
        assert_eq!(run_cli(["crowdflow", "run", "-c", "/nonexistent/cfg.txt"]), 1);
        assert_eq!(run_cli(["crowdflow", "scenario", "nowhere"]), 1);
        assert_eq!(
            run_cli(["crowdflow", "convergence", "--case", "test9", "--levels", "1,2,3"]),
            1
        );
    }

    #[test]
    fn scenario_listing() {
        assert_eq!(run_cli(["crowdflow", "scenario"]), 0);
        assert_eq!(run_cli(["crowdflow", "scenario", "room_empty"]), 0);
    }
}
