use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use dibm::config::{self, ParamOverrides};
use dibm::dynamics::{fixed_iceline_simulate, simulate, SimOptions};
use dibm::emit;
use dibm::equilibria::equilibrium_profile;
use dibm::manifold::{fixed_point, FixedPointOptions};
use dibm::output::{ensure_dir, fmt_f64, guarded_write};
use dibm::physics::{Params, State};
use dibm::verify::{self, VerifyOptions};
use dibm::{bifurcation, Profile};

/// Dynamic-iceline energy balance model toolkit.
#[derive(Parser)]
#[command(name = "dibm", version, about, max_term_width = 100)]
struct Cli {
    /// Flat `key = value` parameter file; flags below override its entries.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(flatten)]
    params: ParamFlags,

    /// Directory receiving all output files.
    #[arg(long, global = true, default_value = "dibm-out", value_name = "DIR")]
    out_dir: PathBuf,

    /// Replace existing output files instead of refusing to overwrite.
    #[arg(long, global = true)]
    overwrite: bool,

    #[command(subcommand)]
    command: Command,
}

/// Model parameters (defaults in parentheses are the standard constants).
#[derive(Args)]
struct ParamFlags {
    /// Solar constant, W m^-2 (343, present-day).
    #[arg(long = "Q", global = true, value_name = "W/M2")]
    q: Option<f64>,
    /// Re-emission intercept A of the outgoing-longwave fit, W m^-2 (202).
    #[arg(long = "A", global = true, value_name = "W/M2")]
    a: Option<f64>,
    /// Re-emission slope B of the outgoing-longwave fit, W m^-2 degC^-1 (1.9).
    #[arg(long = "B", global = true, value_name = "W/M2/degC")]
    b: Option<f64>,
    /// Transport relaxation coefficient C, W m^-2 degC^-1 (3.04 = 1.6 B).
    #[arg(long = "C", global = true, value_name = "W/M2/degC")]
    c: Option<f64>,
    /// Critical iceline temperature, degC (-10).
    #[arg(long = "T_c", global = true, value_name = "degC")]
    t_c: Option<f64>,
    /// Albedo front steepness M, dimensionless (25; must exceed 10).
    #[arg(long = "M", global = true, value_name = "STEEPNESS")]
    m: Option<f64>,
    /// Iceline response rate per degC of excess (0.025 for simulations).
    #[arg(long = "eps", global = true, value_name = "RATE")]
    eps: Option<f64>,
    /// Euler time step (0.1; must stay below 1/(B+C)).
    #[arg(long = "dt", global = true, value_name = "STEP")]
    dt: Option<f64>,
    /// Lower edge of the extended latitude grid (-0.5).
    #[arg(long = "y_min", global = true, value_name = "SINLAT")]
    y_min: Option<f64>,
    /// Upper edge of the extended latitude grid (1.5).
    #[arg(long = "y_max", global = true, value_name = "SINLAT")]
    y_max: Option<f64>,
    /// Grid node count, odd, with nodes on 0 and 1 (601).
    #[arg(long = "n_points", global = true, value_name = "N")]
    n_points: Option<usize>,
}

impl ParamFlags {
    fn overrides(&self) -> ParamOverrides {
        ParamOverrides {
            q: self.q,
            a: self.a,
            b: self.b,
            c: self.c,
            t_c: self.t_c,
            m: self.m,
            eps: self.eps,
            dt: self.dt,
            y_min: self.y_min,
            y_max: self.y_max,
            n_points: self.n_points,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Integrate trajectories of the coupled system and dump frames.
    Simulate {
        /// Initial iceline positions, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1.0")]
        eta0: Vec<f64>,
        #[arg(long, default_value_t = 500_000)]
        max_steps: usize,
        /// Steps between recorded frames.
        #[arg(long, default_value_t = 50)]
        stride: usize,
        /// Recorded frames between full profile dumps.
        #[arg(long, default_value_t = 10)]
        profile_stride: usize,
        /// Also write the long-format profile CSV.
        #[arg(long)]
        profiles: bool,
        /// Pin the iceline and relax the profile only.
        #[arg(long)]
        fixed_iceline: bool,
        /// Seed the profile on the local equilibrium of eta0 instead of the
        /// cold parabolic start 14 - 54 y^2.
        #[arg(long)]
        init_equilibrium: bool,
    },
    /// Locate equilibria of the reduced map and tabulate the excess function.
    Equilibrium,
    /// Compute the attracting invariant graph by iterating the transform.
    Manifold {
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        /// Node count of the iceline grid carrying the graph.
        #[arg(long, default_value_t = 401)]
        eta_nodes: usize,
    },
    /// Sweep the solar constant and emit the bifurcation diagram.
    Bifurcate {
        #[arg(long, default_value_t = 280.0)]
        q_min: f64,
        #[arg(long, default_value_t = 420.0)]
        q_max: f64,
        #[arg(long, default_value_t = 1.0)]
        q_step: f64,
    },
    /// Run the verification suite and print the pass/fail table.
    Verify {
        /// Check names or groups to skip (repeatable).
        #[arg(long)]
        skip: Vec<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Ok(threads) = std::env::var("DIBM_THREADS") {
        if let Ok(n) = threads.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }

    let params = match config::resolve(cli.config.as_deref(), &cli.params.overrides()) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };

    match run(&cli, &params) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli, params: &Params) -> Result<ExitCode, Box<dyn std::error::Error>> {
    ensure_dir(&cli.out_dir)?;
    match &cli.command {
        Command::Simulate {
            eta0,
            max_steps,
            stride,
            profile_stride,
            profiles,
            fixed_iceline,
            init_equilibrium,
        } => {
            let opts = SimOptions {
                max_steps: *max_steps,
                stride: *stride,
                profile_stride: *profile_stride,
                record_profiles: *profiles,
            };
            for &e0 in eta0 {
                let start = Instant::now();
                let profile = if *init_equilibrium {
                    equilibrium_profile(e0, params)
                } else {
                    Profile::from_fn(params.grid(), |y| 14.0 - 54.0 * y * y)
                };
                let initial = State::new(profile, e0);
                let traj = if *fixed_iceline {
                    fixed_iceline_simulate(initial, params, &opts)?
                } else {
                    simulate(initial, params, &opts)?
                };
                let wall = start.elapsed().as_secs_f64();
                let tag = format!("eta{e0:.3}");
                emit::frames_csv(&traj)
                    .write(&cli.out_dir.join(format!("frames_{tag}.csv")), cli.overwrite)?;
                if *profiles {
                    emit::profiles_csv(&traj)
                        .write(&cli.out_dir.join(format!("profiles_{tag}.csv")), cli.overwrite)?;
                }
                let summary = emit::run_summary_json(&traj, e0, *fixed_iceline, wall);
                guarded_write(
                    &cli.out_dir.join(format!("summary_{tag}.json")),
                    &format!("{}\n", serde_json::to_string_pretty(&summary)?),
                    cli.overwrite,
                )?;
                println!(
                    "eta0 {e0}: {} after {} steps, final eta {}",
                    traj.outcome.as_str(),
                    traj.steps,
                    fmt_f64(traj.final_state.eta)
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Equilibrium => {
            emit::equilibria_csv(params).write(&cli.out_dir.join("equilibria.csv"), cli.overwrite)?;
            emit::excess_csv(params, 1e-3)
                .write(&cli.out_dir.join("iceline_excess.csv"), cli.overwrite)?;
            for r in dibm::equilibria::find_interior_roots(params) {
                println!(
                    "interior root eta = {} ({})",
                    fmt_f64(r.eta),
                    if r.stable { "stable" } else { "unstable" }
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Manifold {
            tol,
            max_iter,
            eta_nodes,
        } => {
            let opts = FixedPointOptions {
                tol: *tol,
                max_iter: *max_iter,
                eta_nodes: *eta_nodes,
            };
            let start = Instant::now();
            let run = fixed_point(params, &opts)?;
            let wall = start.elapsed().as_secs_f64();
            emit::manifold_diag_csv(&run, params)
                .write(&cli.out_dir.join("manifold_diag.csv"), cli.overwrite)?;
            emit::manifold_graph_csv(&run)
                .write(&cli.out_dir.join("manifold_graph.csv"), cli.overwrite)?;
            let report = emit::manifold_report_json(&run, params, wall);
            guarded_write(
                &cli.out_dir.join("manifold_report.json"),
                &format!("{}\n", serde_json::to_string_pretty(&report)?),
                cli.overwrite,
            )?;
            println!(
                "converged in {} iterations, residual {}, wall {:.2}s",
                run.iterations,
                fmt_f64(run.final_residual),
                wall
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Bifurcate { q_min, q_max, q_step } => {
            let table = bifurcation::sweep(*q_min, *q_max, *q_step, params)?;
            emit::bifurcation_csv(&table)
                .write(&cli.out_dir.join("bifurcation.csv"), cli.overwrite)?;
            guarded_write(
                &cli.out_dir.join("bifurcation.svg"),
                &emit::bifurcation_svg(&table),
                cli.overwrite,
            )?;
            println!("swept Q in [{q_min}, {q_max}], {} rows", table.rows.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { skip } => {
            let run = verify::run(params, &VerifyOptions { skip: skip.clone() });
            print_verify_table(&run.checks);
            for (name, contents) in &run.artifacts {
                guarded_write(&cli.out_dir.join(name), contents, cli.overwrite)?;
            }
            if run.all_passed() {
                println!("\nall checks passed");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("\nsome checks FAILED");
                Ok(ExitCode::from(1))
            }
        }
    }
}

fn print_verify_table(checks: &[verify::Check]) {
    let name_w = checks.iter().map(|c| c.name.len()).max().unwrap_or(4);
    println!("{:<name_w$}  {:<6}  measured | expected", "check", "status");
    println!("{}", "-".repeat(name_w + 40));
    for c in checks {
        println!("{:<name_w$}  {:<6}  {} | {}", c.name, c.status.as_str(), c.measured, c.expected);
    }
}
