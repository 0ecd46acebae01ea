//! `edgephase`: phase-diagram scans, fixed points, critical-angle search,
//! finite-chain spectra, noisy evolution and the validation suite.

mod commands;
mod config;
mod output;
mod plot;
mod pool;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use edgephase::BoundaryCondition;

use commands::{Ctx, Failure};
use config::{parse_chi_list, Config, SolverChoice, ThetaSpec};

#[derive(Parser, Debug)]
#[command(name = "edgephase", version, about = "Boundary phase diagram of a measured 2D cluster state")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config file layered over the defaults table.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Angles: comma-separated values and A:B:STEP ranges (radians).
    #[arg(long, global = true, value_name = "GRID", allow_hyphen_values = true)]
    theta: Option<String>,

    /// Bond dimensions, comma separated.
    #[arg(long, global = true, value_name = "LIST")]
    chi: Option<String>,

    #[arg(long, global = true, value_name = "power|vumps|both")]
    solver: Option<SolverChoice>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Continue an interrupted scan in --out, skipping finished points.
    #[arg(long, global = true)]
    resume: bool,

    /// Exit with status 3 if any solver did not converge.
    #[arg(long, global = true)]
    strict: bool,

    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Print the resolved configuration as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fixed points over the θ × χ × solver grid.
    Scan,
    /// A single fixed point, printed as JSON.
    FixedPoint,
    /// Critical angle for each bond dimension.
    Critical,
    /// Two leading eigenpairs of finite chains over a θ grid.
    Finite {
        /// Chain lengths, comma separated.
        #[arg(long, value_name = "LIST")]
        n: Option<String>,
        #[arg(long, value_name = "open|periodic")]
        bc: Option<BoundaryCondition>,
    },
    /// Row-by-row evolution with noisy measurement angles.
    Noise {
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        layers: Option<usize>,
    },
    /// Brute-force validation suite.
    Validate {
        /// Corrupt one entry of the site tensor first (exercises the failure path).
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

fn single<T: Copy>(what: &str, v: &[T]) -> Result<T, Failure> {
    match v {
        [x] => Ok(*x),
        _ => Err(Failure::Config(format!("{what} takes a single value here, got {}", v.len()))),
    }
}

fn resolve(cli: &Cli) -> Result<Config, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    let theta = cli.theta.as_ref().map(|s| ThetaSpec::Expr(s.clone()));
    let theta_values = match &theta {
        Some(t) => Some(t.values().map_err(|e| Failure::Config(format!("--theta: {e}")))?),
        None => None,
    };
    let chi = match &cli.chi {
        Some(s) => Some(parse_chi_list(s)?),
        None => None,
    };
    match &cli.command {
        Command::Scan | Command::FixedPoint => {
            if let Some(t) = theta {
                cfg.grid.theta = t;
            }
            if let Some(c) = chi {
                cfg.grid.chi = c;
            }
            if let Some(s) = cli.solver {
                cfg.grid.solver = s;
            }
        }
        Command::Critical => {
            if let Some(c) = chi {
                cfg.critical.chi = c;
            }
            if let Some(v) = theta_values {
                match v.as_slice() {
                    [lo, hi] => cfg.critical.bracket = [*lo, *hi],
                    _ => return Err(Failure::Config("--theta for critical must be a bracket 'LO,HI'".into())),
                }
            }
        }
        Command::Finite { n, bc } => {
            if let Some(t) = theta {
                cfg.finite.theta = t;
            }
            if let Some(c) = chi {
                cfg.finite.chi = single("--chi", &c)?;
            }
            if let Some(n) = n {
                let sizes: Result<Vec<usize>, _> = n.split(',').map(|x| x.trim().parse()).collect();
                cfg.finite.n = sizes.map_err(|_| Failure::Config(format!("--n: '{n}' is not a list of integers")))?;
            }
            if let Some(bc) = bc {
                cfg.finite.bc = *bc;
            }
        }
        Command::Noise { epsilon, layers } => {
            if let Some(v) = theta_values {
                cfg.noise.theta = single("--theta", &v)?;
            }
            if let Some(c) = chi {
                cfg.noise.chi = single("--chi", &c)?;
            }
            if let Some(s) = cli.seed {
                cfg.noise.seeds = vec![s];
            }
            if let Some(e) = epsilon {
                cfg.noise.epsilon = *e;
            }
            if let Some(l) = layers {
                cfg.noise.layers = *l;
            }
        }
        Command::Validate { .. } => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = resolve(cli)?;
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let ctx = Ctx { cfg, out: cli.out.clone(), resume: cli.resume, strict: cli.strict };
    match &cli.command {
        Command::Scan => commands::scan::run(&ctx),
        Command::FixedPoint => commands::fixed_point::run(&ctx),
        Command::Critical => commands::critical::run(&ctx),
        Command::Finite { .. } => commands::finite::run(&ctx),
        Command::Noise { .. } => commands::noise::run(&ctx),
        Command::Validate { inject_fault } => commands::validate::run(&ctx, *inject_fault),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("edgephase: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
