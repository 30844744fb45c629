use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nich_cli::commands::{cmd_continuation, cmd_mms, cmd_report, cmd_run, CliError};
use nich_cli::config::{parse_config, RunConfig};
use nich_cli::output::read_text;
use nich_core::stepper::Coupling;

#[derive(Parser)]
#[command(name = "nich", version, about = "Non-isothermal Cahn-Hilliard simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file (`section.key = value` lines); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the initial noise, overriding `initial.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Freeze the temperature and solve the isothermal Cahn-Hilliard equation.
    #[arg(long)]
    isothermal: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write balances, snapshots and monitors.
    Run(Common),
    /// Repeat a run for a decreasing ladder of regularisation strengths.
    Continuation {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4,1e-5")]
        eps_ladder: Vec<f64>,
    },
    /// Manufactured-solution convergence study.
    Mms {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "32,64,128")]
        levels: Vec<usize>,
    },
    /// Recompute balances and monitors from a run directory.
    Report {
        /// Run directory containing `config.txt` and `snapshots/`.
        dir: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load(common: &Common) -> Result<(RunConfig, u64, PathBuf), CliError> {
    let mut cfg = match &common.config {
        Some(path) => parse_config(&read_text(path)?)?,
        None => RunConfig::default(),
    };
    if common.isothermal {
        cfg.solver.coupling = Coupling::FrozenTemperature;
    }
    let seed = common.seed.unwrap_or(cfg.initial.seed);
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    Ok((cfg, seed, out))
}

fn execute(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Run(common) => {
            let (cfg, seed, out) = load(&common)?;
            let run = cmd_run(&cfg, seed, &out)?;
            Ok(format!("{} steps to t = {}, output in {}", run.trajectory.reports.len(), run.trajectory.last().t, out.display()))
        }
        Command::Continuation { common, eps_ladder } => {
            let (cfg, seed, out) = load(&common)?;
            let s = cmd_continuation(&cfg, seed, &eps_ladder, &out)?;
            let worst = s.spread.values().map(|v| v.2).fold(1.0, f64::max);
            Ok(format!("{} rungs, largest monitor ratio {worst:e}, output in {}", s.eps.len(), out.display()))
        }
        Command::Mms { common, levels } => {
            let (cfg, _, out) = load(&common)?;
            let table = cmd_mms(&cfg, &levels, &out)?;
            let mut text = String::from("n_coarse n_fine  u_l2  u_linf  theta_l2  theta_linf\n");
            for (w, o) in table.levels.windows(2).zip(&table.orders) {
                text.push_str(&format!("{} {} {:.3} {:.3} {:.3} {:.3}\n", w[0].n, w[1].n, o[0], o[1], o[2], o[3]));
            }
            Ok(text)
        }
        Command::Report { dir, config } => {
            let (rows, monitors) = cmd_report(&dir, config.as_deref())?;
            Ok(format!("{} snapshots, {} monitors recomputed in {}", rows.len(), monitors.len(), dir.display()))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(message) => {
            println!("{}", message.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nich: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
