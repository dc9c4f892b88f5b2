use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use relay_nbs::bargaining::{
    best_time_shared_point, eigenvalues, hessian, nash_product, sample_utility_region, solve_nbs,
    CgMode, CgSettings, NashProductContext, NbsSolver, StartPoint,
};
use relay_nbs::experiments::{concavity_map, sweep, OracleCadence, SweepConfig, SweepGrid};
use relay_nbs::format::{self, REFERENCE_SCENARIO};
use relay_nbs::{BandAllocation, Execution, Point, Scenario};

/// Directory for output files. Relative `--out` paths resolve against it,
/// and without `--out` each subcommand writes `<dir>/<subcommand>.<ext>`.
const OUT_DIR_ENV: &str = "RELAY_NBS_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "relay-nbs",
    version,
    about = "Nash equilibrium and Nash bargaining solutions of the relay spectrum-sharing game"
)]
struct Cli {
    /// Scenario file (flat TOML). Defaults to the bundled reference scenario.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,

    /// Run grid evaluations on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the Nash equilibrium for one relay position.
    Ne {
        #[arg(long, value_parser = parse_point)]
        relay: Point,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the bargaining solution for one relay position.
    Nbs {
        #[arg(long, value_parser = parse_point)]
        relay: Point,
        /// Also run the grid oracle and report the agreement.
        #[arg(long)]
        oracle: bool,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the utility region and its Pareto boundary (CSV).
    Region {
        #[arg(long, value_parser = parse_point)]
        relay: Point,
        #[arg(long, default_value_t = 201)]
        resolution: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep relay positions and compare NE with NBS (CSV).
    Sweep {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Run the oracle cross-check every N positions (default: every
        /// position for steps >= 25 m, every 10th otherwise).
        #[arg(long, conflicts_with = "no_oracle")]
        oracle_every: Option<usize>,
        #[arg(long)]
        no_oracle: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hessian eigenvalues of the Nash product at the grid-oracle NBS (CSV).
    ConcavityMap {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 401)]
        resolution: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    x_min: f64,
    #[arg(long, default_value_t = 700.0, allow_hyphen_values = true)]
    x_max: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    y_min: f64,
    #[arg(long, default_value_t = 700.0, allow_hyphen_values = true)]
    y_max: f64,
    /// Grid step in meters.
    #[arg(long, default_value_t = 50.0)]
    step: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Joint,
    Alternating,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Grid oracle points per axis.
    #[arg(long, default_value_t = 401)]
    resolution: usize,
    /// Absolute stopping threshold on the search direction norm (default:
    /// 1e-8 * max(1, |grad pi(w0)|)).
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Joint)]
    mode: ModeArg,
    /// Start allocation `w1,w2` in Hz, `centre`, or `auto`.
    #[arg(long, default_value = "auto")]
    start: String,
}

impl SolverArgs {
    fn solver(&self, execution: Execution) -> Result<NbsSolver> {
        if self.resolution < 2 {
            bail!("--resolution must be at least 2");
        }
        if let Some(eps) = self.epsilon {
            if !(eps.is_finite() && eps > 0.0) {
                bail!("--epsilon must be finite and > 0");
            }
        }
        let start = match self.start.as_str() {
            "auto" => StartPoint::Auto,
            "centre" | "center" => StartPoint::Centre,
            other => {
                let p = parse_point(other).map_err(|e| anyhow!("--start: {e}"))?;
                StartPoint::Explicit(BandAllocation::new(p.x, p.y))
            }
        };
        Ok(NbsSolver {
            cg: CgSettings {
                epsilon: self.epsilon,
                max_iter: self.max_iter,
                mode: match self.mode {
                    ModeArg::Joint => CgMode::Joint,
                    ModeArg::Alternating => CgMode::Alternating,
                },
                ..CgSettings::default()
            },
            start,
            oracle_resolution: self.resolution,
            execution,
            ..NbsSolver::default()
        })
    }
}

fn parse_point(s: &str) -> std::result::Result<Point, String> {
    let (x, y) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `x,y`, got `{s}`"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|e| format!("`{v}`: {e}"))
            .and_then(|f| {
                if f.is_finite() {
                    Ok(f)
                } else {
                    Err(format!("`{v}` is not finite"))
                }
            })
    };
    Ok(Point::new(parse(x)?, parse(y)?))
}

fn load_scenario(path: Option<&Path>) -> Result<Scenario> {
    let text = match path {
        Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => REFERENCE_SCENARIO.to_owned(),
    };
    let origin = path.map_or_else(
        || "bundled scenario".to_owned(),
        |p| p.display().to_string(),
    );
    format::parse_scenario(&text).with_context(|| origin)
}

/// Writes `contents` to the resolved output file, or stdout when there is
/// neither `--out` nor an output directory.
fn emit(out: Option<&Path>, default_name: &str, contents: &str) -> Result<()> {
    let dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    let target = match (out, dir) {
        (Some(p), Some(dir)) if p.is_relative() => Some(dir.join(p)),
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(dir)) => Some(dir.join(default_name)),
        (None, None) => None,
    };
    match target {
        None => {
            print!("{contents}");
            Ok(())
        }
        Some(path) => {
            if let Some(parent) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))?;
            }
            fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let scenario = load_scenario(cli.scenario.as_deref())?;
    let execution = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };

    match cli.command {
        Command::Ne { relay, out } => {
            let ctx = NashProductContext::new(&scenario, relay)?;
            emit(
                out.as_deref(),
                "ne.txt",
                &format::report_text("ne", &ctx.ne),
            )?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Nbs {
            relay,
            oracle,
            solver,
            out,
        } => {
            let solver = solver.solver(execution)?;
            let ctx = NashProductContext::new(&scenario, relay)?;
            let sol = solve_nbs(&ctx, &solver, oracle);
            let mut text = format::report_text("ne", &ctx.ne);
            text.push_str(&format::report_text("nbs", &sol.report));
            if let Some(o) = &sol.oracle {
                text.push_str(&format::report_text("oracle", o));
            }
            let eigen = eigenvalues(&hessian(sol.report.allocation, &ctx));
            text.push_str("[analysis]\n");
            text.push_str(&format!(
                "nash_product = {:e}\n",
                nash_product(sol.report.allocation, &ctx)
            ));
            text.push_str(&format!(
                "lambda1 = {:e}\nlambda2 = {:e}\n",
                eigen.lambda1, eigen.lambda2
            ));
            text.push_str(&format!(
                "strictly_concave = {}\n",
                eigen.is_negative_definite()
            ));
            if let Some(m) = sol.cg_matched_oracle {
                text.push_str(&format!("cg_matched_oracle = {m}\n"));
            }
            text.push_str(&format!("cg_converged = {}\n", sol.cg.converged));
            emit(out.as_deref(), "nbs.txt", &text)?;
            if sol.cg.converged {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!(
                    "error: conjugate gradient stopped after {} iterations with direction norm {:e}",
                    sol.cg.iterations, sol.cg.residual
                );
                Ok(ExitCode::from(2))
            }
        }
        Command::Region {
            relay,
            resolution,
            out,
        } => {
            let ctx = NashProductContext::new(&scenario, relay)?;
            let region = sample_utility_region(&ctx, resolution, execution)?;
            emit(out.as_deref(), "region.csv", &format::region_csv(&region))?;
            if let Some((p, v)) = best_time_shared_point(&region, ctx.threat()) {
                eprintln!(
                    "time-shared optimum: mu={:e} u1={:e} u2={:e} nash_product={v:e}",
                    p.mu, p.utilities.u1, p.utilities.u2
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            grid,
            solver,
            oracle_every,
            no_oracle,
            out,
        } => {
            let grid = SweepGrid::new(grid.x_min, grid.x_max, grid.y_min, grid.y_max, grid.step)?;
            let config = SweepConfig {
                solver: solver.solver(execution)?,
                oracle_cadence: match (no_oracle, oracle_every) {
                    (true, _) => OracleCadence::Never,
                    (false, Some(n)) => OracleCadence::Every(n),
                    (false, None) => OracleCadence::Auto,
                },
            };
            let records = sweep(&scenario, &grid, &config)?;
            emit(out.as_deref(), "sweep.csv", &format::sweep_csv(&records))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::ConcavityMap {
            grid,
            resolution,
            out,
        } => {
            let grid = SweepGrid::new(grid.x_min, grid.x_max, grid.y_min, grid.y_max, grid.step)?;
            let records = concavity_map(&scenario, &grid, resolution, execution)?;
            emit(
                out.as_deref(),
                "concavity.csv",
                &format::concavity_csv(&records),
            )?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
