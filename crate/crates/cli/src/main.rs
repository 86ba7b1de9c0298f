use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dsm_core::harness::{
    plot_data, run_sweep, summary_table, verify_lemmas_command, write_plot_csv, ConfigMap,
    ExperimentConfig, VerifyOptions,
};
use dsm_core::{Error, Result};

/// Dynamical systems solvers for ill-posed monotone equations with noisy data.
#[derive(Parser)]
#[command(name = "dsm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment and print its summary.
    Solve(RunArgs),
    /// Run every combination of comma-separated values (delta_rel, method, seed, ...).
    Experiment(RunArgs),
    /// Run the oracle suite on the Wiener problem; exits nonzero on any failure.
    VerifyLemmas(VerifyArgs),
    /// Write x, u_exact, u_dsmg, u_dsmn columns for one noisy dataset.
    PlotData(RunArgs),
}

#[derive(Args, Default)]
struct RunArgs {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    /// one, sin-pi or sin-2pi.
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    n_points: Option<String>,
    #[arg(long)]
    delta_rel: Option<String>,
    /// dsmg, dsmg-flow or dsmn.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    c1: Option<String>,
    #[arg(long)]
    zeta: Option<String>,
    #[arg(long)]
    c0: Option<String>,
    #[arg(long)]
    b: Option<String>,
    /// Schedule offset c in a_n = C0 delta^zeta / (c + n)^b.
    #[arg(long)]
    c: Option<String>,
    /// capped[:alpha] or constant:alpha.
    #[arg(long)]
    alpha_policy: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    /// Override the derivative bound used by the step-size cap.
    #[arg(long)]
    m1: Option<String>,
    /// Flow time step.
    #[arg(long)]
    dt: Option<String>,
    /// Flow time horizon.
    #[arg(long)]
    t_max: Option<String>,
    /// Leave wall time out of the CSV so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
    /// Output directory (solve, experiment) or CSV file (plot-data).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 100)]
    n_points: usize,
    #[arg(long, default_value_t = 0.01)]
    delta_rel: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Schedule scale d for the continuous checks.
    #[arg(long, default_value_t = 2.0)]
    d: f64,
    /// Schedule offset c for the continuous checks.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Schedule exponent b for the continuous checks.
    #[arg(long, default_value_t = 0.25)]
    b: f64,
    /// Flip the sign of the cubic term to check that the suite notices.
    #[arg(long)]
    anti_monotone: bool,
}

impl RunArgs {
    fn config_map(&self) -> Result<ConfigMap> {
        let mut map = match &self.config {
            Some(path) => ConfigMap::load(path)?,
            None => ConfigMap::default(),
        };
        let mut flags = ConfigMap::default();
        let pairs = [
            ("problem", &self.problem),
            ("target", &self.target),
            ("n_points", &self.n_points),
            ("delta_rel", &self.delta_rel),
            ("method", &self.method),
            ("c1", &self.c1),
            ("zeta", &self.zeta),
            ("c0", &self.c0),
            ("b", &self.b),
            ("c", &self.c),
            ("alpha_policy", &self.alpha_policy),
            ("seed", &self.seed),
            ("max_iterations", &self.max_iter),
            ("m1", &self.m1),
            ("dt", &self.dt),
            ("t_max", &self.t_max),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                flags.set(key, v.clone())?;
            }
        }
        if self.no_timing {
            flags.set("timing", "off")?;
        }
        if let Some(out) = &self.out {
            flags.set("output", out.display().to_string())?;
        }
        map.merge(&flags);
        Ok(map)
    }

    fn single(&self) -> Result<ExperimentConfig> {
        let configs = self.config_map()?.expand()?;
        match configs.as_slice() {
            [one] => Ok(one.clone()),
            _ => Err(Error::Config(format!(
                "this command runs one configuration but the settings expand to {}; use `experiment` for sweeps",
                configs.len()
            ))),
        }
    }
}

fn solve(args: &RunArgs, sweep: bool) -> Result<bool> {
    let configs = if sweep {
        args.config_map()?.expand()?
    } else {
        vec![args.single()?]
    };
    let out = configs[0].output_path.clone();
    let records = run_sweep(&configs, out.as_deref())?;
    let rows: Vec<_> = records.iter().map(|r| r.summary.clone()).collect();
    print!("{}", summary_table(&rows));
    if let Some(dir) = out {
        println!("wrote {}", dir.display());
    }
    Ok(rows.iter().all(|r| r.is_ok()))
}

fn plot(args: &RunArgs) -> Result<bool> {
    let config = args.single()?;
    let rows = plot_data(&config)?;
    match &config.output_path {
        Some(path) => {
            write_plot_csv(path, &rows)?;
            println!("wrote {}", path.display());
        }
        None => {
            println!("x,u_exact,u_dsmg,u_dsmn");
            for r in rows {
                println!(
                    "{:.16e},{:.16e},{:.16e},{:.16e}",
                    r.x, r.u_exact, r.u_dsmg, r.u_dsmn
                );
            }
        }
    }
    Ok(true)
}

fn verify(args: &VerifyArgs) -> Result<bool> {
    let options = VerifyOptions {
        n_points: args.n_points,
        delta_rel: args.delta_rel,
        seed: args.seed,
        schedule: (args.d, args.c, args.b),
        anti_monotone: args.anti_monotone,
    };
    let report = verify_lemmas_command(&options)?;
    print!("{}", report.table());
    let failed = report.rows.iter().filter(|r| !r.passed).count();
    if failed == 0 {
        println!("all {} oracles passed", report.rows.len());
    } else {
        println!("{failed} of {} oracles failed", report.rows.len());
    }
    Ok(failed == 0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(a) => solve(a, false),
        Command::Experiment(a) => solve(a, true),
        Command::VerifyLemmas(a) => verify(a),
        Command::PlotData(a) => plot(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
