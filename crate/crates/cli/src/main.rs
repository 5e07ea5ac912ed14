use clap::{Parser, Subcommand};
use frontlab::kernels::{Kernel, KernelSpec};
use frontlab_cli::config::{self, Scenario};
use frontlab_cli::{output, CliError, DEFAULT_SEED};
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "frontlab", version, about = "Semi-waves, spreading speeds and free-boundary runs for nonlocal cooperative systems")]
struct Cli {
    /// Scenario file (TOML or JSON); a batch file for `batch`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named scenario from `configs/<name>.toml`, used when --config is absent.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads for parallel scans and batches.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for the sampled reaction checks.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify kernels by their integrability conditions.
    CheckKernel {
        #[arg(long, requires = "param")]
        family: Option<String>,
        #[arg(long)]
        param: Option<f64>,
    },
    /// Verify the structural assumptions on the reaction term.
    CheckReaction,
    /// Semi-wave profile at a speed, or at the spreading speed when --c is absent.
    Semiwave {
        #[arg(long)]
        c: Option<f64>,
        #[arg(long = "L")]
        length: Option<f64>,
        #[arg(long)]
        dx: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Spreading speed from the flux balance against a simulated front.
    Speed,
    /// Free-boundary simulation.
    Simulate,
    /// Growth-law fits of a trajectory CSV.
    Analyze {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        c0: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = frontlab::asymptotics::DEFAULT_FRACTION)]
        window: f64,
    },
    /// Run every scenario listed in a batch file.
    Batch,
    /// Full pipeline for one scenario.
    Run,
}

fn main() {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            std::process::exit(1);
        }
    }
    match execute(&cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn scenario(cli: &Cli) -> Result<Scenario, CliError> {
    let path = match (&cli.config, &cli.preset) {
        (Some(p), _) => p.clone(),
        (None, Some(name)) => config::preset_path(name)?,
        (None, None) => return Err(CliError::Validation("a scenario is required: pass --config or --preset".into())),
    };
    config::load_scenario(&path)
}

fn emit<T: serde::Serialize>(dir: &Path, file: &str, value: &T) -> Result<(), CliError> {
    output::ensure_dir(dir)?;
    output::write_json(&dir.join(file), value)?;
    print!("{}", output::to_json(value)?);
    Ok(())
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::CheckKernel { family, param } => {
            let (kernels, dir) = match (family, param) {
                (Some(f), Some(p)) => {
                    let spec = KernelSpec { family: f.clone(), param: *p };
                    let k = Kernel::from_spec(&spec).map_err(|e| CliError::Validation(format!("kernel: {e}")))?;
                    (vec![k], cli.out_dir.clone())
                }
                _ => {
                    let s = scenario(cli)?;
                    let dir = frontlab_cli::scenario_dir(&s, &cli.out_dir);
                    (s.kernels, dir)
                }
            };
            let reports: Vec<_> = kernels.iter().map(frontlab_cli::kernel_report).collect();
            emit(&dir, "kernel_report.json", &reports)?;
            Ok(0)
        }
        Command::CheckReaction => {
            let s = scenario(cli)?;
            let report = frontlab_cli::check_reaction(&s, cli.seed);
            emit(&frontlab_cli::scenario_dir(&s, &cli.out_dir), "assumption_report.json", &report)?;
            Ok(0)
        }
        Command::Semiwave { c, length, dx, tol } => {
            let mut s = scenario(cli)?;
            let sw = &mut s.config.semiwave;
            sw.length = length.unwrap_or(sw.length);
            sw.dx = dx.unwrap_or(sw.dx);
            sw.tol = tol.unwrap_or(sw.tol);
            let s = config::build_scenario(s.config)?;
            let dir = frontlab_cli::scenario_dir(&s, &cli.out_dir);
            output::ensure_dir(&dir)?;
            match c {
                Some(c) => {
                    let (summary, profile) = frontlab_cli::semiwave_at(&s, *c)?;
                    if let Some(p) = &profile {
                        output::write_profile_csv(&dir.join("profile.csv"), p)?;
                    }
                    emit(&dir, "semiwave_summary.json", &summary)?;
                }
                None => {
                    let (summary, profile) = frontlab_cli::spreading_speed(&s)?;
                    output::write_profile_csv(&dir.join("profile.csv"), &profile)?;
                    emit(&dir, "semiwave_summary.json", &summary)?;
                }
            }
            Ok(0)
        }
        Command::Speed => {
            let s = scenario(cli)?;
            let (cmp, _, traj) = frontlab_cli::compare_speed(&s)?;
            let dir = frontlab_cli::scenario_dir(&s, &cli.out_dir);
            output::ensure_dir(&dir)?;
            output::write_trajectory(&dir, &traj)?;
            emit(&dir, "speed_report.json", &cmp)?;
            Ok(0)
        }
        Command::Simulate => {
            let s = scenario(cli)?;
            let (traj, report) = frontlab_cli::simulate(&s)?;
            let dir = frontlab_cli::scenario_dir(&s, &cli.out_dir);
            output::ensure_dir(&dir)?;
            output::write_trajectory(&dir, &traj)?;
            emit(&dir, "run_report.json", &report)?;
            Ok(0)
        }
        Command::Analyze { trajectory, c0, gamma, window } => {
            let (t, h) = output::read_trajectory(trajectory)?;
            let report = frontlab_cli::analyze(&t, &h, *c0, *gamma, *window)?;
            emit(&cli.out_dir, "asymptotics.json", &report)?;
            Ok(0)
        }
        Command::Batch => {
            let path = cli
                .config
                .as_ref()
                .ok_or_else(|| CliError::Validation("batch needs --config pointing at a batch file".into()))?;
            let entries = frontlab_cli::batch(path, &cli.out_dir, cli.seed)?;
            emit(&cli.out_dir, "batch_report.json", &entries)?;
            Ok(entries.iter().map(|e| e.exit_code).max().unwrap_or(0))
        }
        Command::Run => {
            let s = scenario(cli)?;
            let dir = frontlab_cli::run_scenario(&s, &cli.out_dir, cli.seed)?;
            println!("{}", dir.display());
            Ok(0)
        }
    }
}
