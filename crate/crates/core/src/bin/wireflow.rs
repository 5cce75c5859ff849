use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wireflow::cli::{self, SweepAxis};
use wireflow::diagnostics::OrderStudySettings;

#[derive(Parser)]
#[command(name = "wireflow", version, about = "Constrained gradient flow of closed elastic wires")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write diagnostics, snapshots and the final stationarity report.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a snapshot as SVG.
    Render {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(short = 'o')]
        output: PathBuf,
        /// Model used for the energy in the caption.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run one scenario per value of a parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure the spatial convergence order.
    OrderStudy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        resolutions: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(command: Command) -> wireflow::Result<ExitCode> {
    match command {
        Command::Run { config, out } => {
            let config = cli::load_config(&config)?;
            let run = cli::cmd_run(&config, out.as_deref())?;
            let traj = &run.trajectory;
            println!(
                "{}: {} steps, t = {}, E = {:.16e}",
                traj.terminal.as_str(),
                traj.accepted_steps(),
                traj.last().time,
                traj.last().energy
            );
            if let Some(reason) = &traj.failure {
                eprintln!("step failure: {reason}");
            }
            Ok(ExitCode::from(run.exit_code() as u8))
        }
        Command::Render { snapshot, output, config } => {
            let config = config.as_deref().map(cli::load_config).transpose()?;
            cli::cmd_render(&snapshot, &output, config.as_ref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config, axis, values, out } => {
            let config = cli::load_config(&config)?;
            let values = cli::parse_list::<f64>(&values)?;
            let rows = cli::cmd_sweep(&config, axis, &values, out.as_deref(), cli::sweep_threads())?;
            print!("{}", cli::sweep_csv(&rows));
            Ok(ExitCode::SUCCESS)
        }
        Command::OrderStudy { config, resolutions, out } => {
            let config = cli::load_config(&config)?;
            let resolutions = cli::parse_list::<usize>(&resolutions)?;
            let report = cli::cmd_order_study(&config, &resolutions, out.as_deref(), &OrderStudySettings::default())?;
            match report.observed_order {
                Some(p) => println!("observed order {p:.4}"),
                None => println!("order undefined: errors below the noise floor"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match execute(Args::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("wireflow: {e}");
            ExitCode::from(2)
        }
    }
}
