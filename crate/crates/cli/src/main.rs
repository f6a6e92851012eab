use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use dbs_traj::commands::{self, RunArgs};
use dbs_traj::{configure_threads, CliError};
use dbs_traj_core::validation::Suite;

#[derive(Parser)]
#[command(
    name = "dbs-traj",
    version,
    about = "Ray-bundle simulator for de Broglie-Schroedinger trajectories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write CSV, JSON and optional SVG output.
    Run {
        scenario: PathBuf,
        /// Output directory; defaults to the scenario's output.directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write trajectories.svg and profiles.svg.
        #[arg(long)]
        plot: bool,
        /// Drop the wave potential.
        #[arg(long, conflicts_with = "relativistic")]
        classical: bool,
        /// Use the relativistic equations of motion.
        #[arg(long)]
        relativistic: bool,
    },
    /// Run acceptance criteria and print a pass/fail table.
    Validate {
        #[arg(value_enum)]
        name: SuiteArg,
    },
    /// Compare bundle widths of two run directories.
    Compare { dir_a: PathBuf, dir_b: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Waist,
    Oracle,
    Energy,
    Limits,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Suite {
        match s {
            SuiteArg::Waist => Suite::Waist,
            SuiteArg::Oracle => Suite::Oracle,
            SuiteArg::Energy => Suite::Energy,
            SuiteArg::Limits => Suite::Limits,
            SuiteArg::All => Suite::All,
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Run {
            scenario,
            out,
            plot,
            classical,
            relativistic,
        } => {
            let args = RunArgs {
                scenario,
                out,
                plot,
                classical,
                relativistic,
            };
            let manifest = commands::cmd_run(&args)?;
            println!("{}", commands::summarize_run(&manifest));
        }
        Command::Validate { name } => {
            commands::cmd_validate(name.into())?;
            println!("all criteria passed");
        }
        Command::Compare { dir_a, dir_b } => {
            let c = commands::cmd_compare(&dir_a, &dir_b)?;
            print!("{}", commands::format_comparison(&c));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
