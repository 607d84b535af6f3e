use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use turnpike_cli::commands::{cmd_analytic, cmd_check, cmd_solve, cmd_sweep, cmd_trims, threads_from_env, AnalyticArgs, Outcome};
use turnpike_cli::scenario_file::ScenarioFile;
use turnpike_cli::{exit, CliError};

#[derive(Parser)]
#[command(name = "turnpike", version, about = "Velocity turnpikes of optimal control problems with symmetry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario file (TOML, or JSON by extension).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; created when missing.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the number of collocation intervals.
    #[arg(long)]
    nodes: Option<usize>,
    /// Overrides the KKT tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Overrides the solver seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<ScenarioFile, CliError> {
        ScenarioFile::load(&self.scenario)?.with_overrides(self.nodes, self.tol, self.seed)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario by direct collocation.
    Solve(ScenarioArgs),
    /// Closed-form solution of the double-integrator problem.
    Analytic {
        #[arg(long, allow_hyphen_values = true)]
        q0: f64,
        #[arg(long, allow_hyphen_values = true)]
        v0: f64,
        #[arg(long = "qT", allow_hyphen_values = true)]
        qt: f64,
        #[arg(long = "vT", allow_hyphen_values = true)]
        vt: f64,
        #[arg(long = "T")]
        horizon: f64,
        /// Number of sample intervals.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve over a list of horizons and analyse the turnpike.
    Sweep {
        #[command(flatten)]
        common: ScenarioArgs,
        /// Comma-separated horizons.
        #[arg(long = "T-list", value_delimiter = ',', required = true)]
        t_list: Vec<f64>,
    },
    /// Derivative, equivariance and steady-state checks.
    Check(ScenarioArgs),
    /// Velocity steady states of the scenario's model and the optimal one.
    Trims(ScenarioArgs),
}

fn run(cli: Cli) -> Result<(Outcome, Option<PathBuf>), CliError> {
    Ok(match cli.command {
        Command::Solve(a) => (cmd_solve(&a.load()?)?, a.out),
        Command::Analytic {
            q0,
            v0,
            qt,
            vt,
            horizon,
            samples,
            out,
        } => {
            let args = AnalyticArgs {
                q0,
                v0,
                qt,
                vt,
                horizon,
                samples,
            };
            (cmd_analytic(&args)?, out)
        }
        Command::Sweep { common, t_list } => {
            let file = common.load()?;
            (cmd_sweep(&file, &t_list, threads_from_env()?)?, common.out)
        }
        Command::Check(a) => {
            let file = a.load()?;
            let seed = file.solver_options()?.seed;
            (cmd_check(&file, seed)?, a.out)
        }
        Command::Trims(a) => (cmd_trims(&a.load()?)?, a.out),
    })
}

fn main() -> ExitCode {
    let start = Instant::now();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE as u8 } else { exit::OK as u8 });
        }
    };
    match run(cli) {
        Ok((outcome, out)) => {
            print!("{}", outcome.summary);
            if let Some(dir) = out {
                if let Err(e) = outcome.bundle.write(&dir) {
                    eprintln!("error: {e}");
                    return ExitCode::from(e.exit_code() as u8);
                }
                // kept out of the manifest so identical runs stay byte-identical
                let wall = format!("{:.3}\n", start.elapsed().as_secs_f64());
                if let Err(e) = std::fs::write(dir.join("wall_time.txt"), wall) {
                    eprintln!("error: {e}");
                    return ExitCode::from(exit::USAGE as u8);
                }
            }
            ExitCode::from(outcome.status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
