use std::fs;
use std::path::Path;
use std::time::Instant;

use log::info;

use super::config::{ExperimentConfig, Method};
use super::noise::make_noisy_rhs;
use super::{fmt_float, format_table};
use crate::error::{Error, Result};
use crate::hilbert::{norm, GridFunction};
use crate::operator::{wiener_problem, MonotoneProblem, OperatorBounds};
use crate::schedule::{heuristic_a0, PowerSchedule};
use crate::solver::{dsmg_flow, dsmg_iterate, dsmn_iterate, FlowOptions, SolveReport, StopRule};

/// One row of the run summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub target: String,
    pub n_points: usize,
    pub delta_rel: f64,
    pub seed: u64,
    pub n_delta: Option<usize>,
    pub t_delta: Option<f64>,
    pub residual_at_stop: f64,
    pub threshold: f64,
    /// `‖u − y‖`.
    pub error_vs_y: f64,
    /// `‖u − y‖ / ‖y‖`.
    pub rel_error: f64,
    pub clipped_steps: usize,
    /// Seconds; `None` when timing is disabled.
    pub wall_time: Option<f64>,
    /// `discrepancy`, `max_iterations`, `max_time` or `error: <message>`.
    pub status: String,
}

pub const SUMMARY_HEADER: [&str; 14] = [
    "method",
    "target",
    "n_points",
    "delta_rel",
    "seed",
    "n_delta",
    "t_delta",
    "residual_at_stop",
    "threshold",
    "error_vs_y",
    "rel_error",
    "clipped_steps",
    "wall_time",
    "status",
];

impl SummaryRow {
    fn fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
        vec![
            self.method.to_string(),
            self.target.clone(),
            self.n_points.to_string(),
            fmt_float(self.delta_rel),
            self.seed.to_string(),
            self.n_delta.map(|n| n.to_string()).unwrap_or_default(),
            opt(self.t_delta),
            fmt_float(self.residual_at_stop),
            fmt_float(self.threshold),
            fmt_float(self.error_vs_y),
            fmt_float(self.rel_error),
            self.clipped_steps.to_string(),
            opt(self.wall_time),
            self.status.clone(),
        ]
    }

    fn short_fields(&self) -> Vec<String> {
        let g = |v: f64| format!("{v:.4e}");
        vec![
            self.method.to_string(),
            self.target.clone(),
            self.n_points.to_string(),
            format!("{}", self.delta_rel),
            self.seed.to_string(),
            self.n_delta
                .map(|n| n.to_string())
                .unwrap_or_else(|| "-".into()),
            g(self.residual_at_stop),
            g(self.threshold),
            g(self.error_vs_y),
            g(self.rel_error),
            self.wall_time
                .map(|t| format!("{t:.3}"))
                .unwrap_or_else(|| "-".into()),
            self.status.clone(),
        ]
    }

    pub fn is_ok(&self) -> bool {
        !self.status.starts_with("error")
    }
}

/// Aligned text table of summary rows.
pub fn summary_table(rows: &[SummaryRow]) -> String {
    let header = [
        "method",
        "target",
        "N",
        "delta_rel",
        "seed",
        "n_delta",
        "residual",
        "threshold",
        "error_vs_y",
        "rel_error",
        "time[s]",
        "status",
    ];
    let body: Vec<Vec<String>> = rows.iter().map(SummaryRow::short_fields).collect();
    format_table(&header, &body)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionRow {
    pub x: f64,
    pub u_exact: f64,
    pub u_numeric: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentRecord {
    pub config: ExperimentConfig,
    pub summary: SummaryRow,
    pub solution: Vec<SolutionRow>,
    /// Full solver output; `None` when the solver failed.
    pub report: Option<SolveReport>,
}

/// Builds the configured problem, applying the `m1` override if present.
pub fn build_problem(config: &ExperimentConfig) -> Result<MonotoneProblem> {
    let problem = wiener_problem(config.n_points, config.target)?;
    Ok(match config.m1 {
        Some(m1) => {
            let b = *problem.bounds();
            problem.with_bounds(OperatorBounds::new(m1, b.m2, b.radius)?)
        }
        None => problem,
    })
}

/// The schedule `a_n = C0 δ^ζ / (c + n)^b` of a run at noise level `δ`.
pub fn experiment_schedule(config: &ExperimentConfig, delta: f64) -> Result<PowerSchedule> {
    let a0 = heuristic_a0(delta, config.zeta, config.c0_or_default())?;
    PowerSchedule::new(a0, config.c, config.b_or_default())
}

/// Runs one configured experiment from `u_0 = 0`.
///
/// Solver failures are recorded in the summary status; invalid
/// configurations are returned as errors.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    config.validate()?;
    let problem = build_problem(config)?;
    let f = problem
        .rhs()
        .ok_or_else(|| Error::Config("problem has no data".into()))?;
    let y = problem
        .exact_solution()
        .ok_or_else(|| Error::Config("problem has no exact solution".into()))?
        .clone();
    let noisy = make_noisy_rhs(f, config.delta_rel, config.seed)?;
    let stop = StopRule::new(config.c1, config.zeta, noisy.delta, config.max_iterations)?;
    let schedule = experiment_schedule(config, noisy.delta)?;
    let u0 = GridFunction::zeros(problem.grid().clone());

    let start = Instant::now();
    let outcome = match config.method {
        Method::Dsmg => dsmg_iterate(
            &problem,
            &noisy.f_delta,
            &schedule,
            &config.alpha_policy,
            &stop,
            &u0,
        ),
        Method::DsmgFlow => {
            let opts = FlowOptions {
                dt: config.dt,
                t_max: config.t_max,
            };
            dsmg_flow(&problem, &noisy.f_delta, &schedule, &stop, &u0, &opts)
        }
        Method::Dsmn => dsmn_iterate(&problem, &noisy.f_delta, &schedule, &stop, &u0),
    };
    let elapsed = start.elapsed().as_secs_f64();
    let wall_time = config.timing.then_some(elapsed);
    let y_norm = norm(&y);

    let base = SummaryRow {
        method: config.method,
        target: config.target.to_string(),
        n_points: config.n_points,
        delta_rel: config.delta_rel,
        seed: config.seed,
        n_delta: None,
        t_delta: None,
        residual_at_stop: f64::NAN,
        threshold: stop.threshold(),
        error_vs_y: f64::NAN,
        rel_error: f64::NAN,
        clipped_steps: 0,
        wall_time,
        status: String::new(),
    };
    let nodes = problem.grid().nodes();
    let record = match outcome {
        Ok(report) => {
            let err = report.error_vs_y.unwrap_or(f64::NAN);
            let summary = SummaryRow {
                n_delta: Some(report.n_delta),
                t_delta: report.t_delta,
                residual_at_stop: report.residual_at_stop(),
                error_vs_y: err,
                rel_error: err / y_norm,
                clipped_steps: report.clipped_steps,
                status: report.stopped_by.to_string(),
                ..base
            };
            let solution = nodes
                .iter()
                .zip(y.as_slice())
                .zip(report.final_iterate.as_slice())
                .map(|((&x, &ue), &un)| SolutionRow {
                    x,
                    u_exact: ue,
                    u_numeric: un,
                })
                .collect();
            ExperimentRecord {
                config: config.clone(),
                summary,
                solution,
                report: Some(report),
            }
        }
        Err(e) => ExperimentRecord {
            config: config.clone(),
            summary: SummaryRow {
                status: format!("error: {e}"),
                ..base
            },
            solution: nodes
                .iter()
                .zip(y.as_slice())
                .map(|(&x, &ue)| SolutionRow {
                    x,
                    u_exact: ue,
                    u_numeric: f64::NAN,
                })
                .collect(),
            report: None,
        },
    };
    info!(
        "{}: status {}, n_delta {:?}, error {:e}",
        config.tag(),
        record.summary.status,
        record.summary.n_delta,
        record.summary.error_vs_y
    );
    Ok(record)
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_solution_csv(path: &Path, rows: &[SolutionRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "u_exact", "u_numeric"])?;
    for r in rows {
        w.write_record([fmt_float(r.x), fmt_float(r.u_exact), fmt_float(r.u_numeric)])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every config in order and, if `out_dir` is given, writes
/// `summary.csv` plus one `solution_<tag>.csv` per run.
pub fn run_sweep(
    configs: &[ExperimentConfig],
    out_dir: Option<&Path>,
) -> Result<Vec<ExperimentRecord>> {
    let records = configs
        .iter()
        .map(run_experiment)
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        let rows: Vec<SummaryRow> = records.iter().map(|r| r.summary.clone()).collect();
        write_summary_csv(&dir.join("summary.csv"), &rows)?;
        for r in &records {
            let name = format!("solution_{}.csv", r.config.tag());
            write_solution_csv(&dir.join(name), &r.solution)?;
        }
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotRow {
    pub x: f64,
    pub u_exact: f64,
    pub u_dsmg: f64,
    pub u_dsmn: f64,
}

/// Solutions of the gradient iteration and the Newton baseline on the same
/// noisy data, side by side. Each method uses its own default `C0` and `b`.
pub fn plot_data(config: &ExperimentConfig) -> Result<Vec<PlotRow>> {
    let run = |method| {
        let cfg = ExperimentConfig {
            method,
            c0: None,
            b: None,
            ..config.clone()
        };
        run_experiment(&cfg)
    };
    let g = run(Method::Dsmg)?;
    let n = run(Method::Dsmn)?;
    Ok(g.solution
        .iter()
        .zip(&n.solution)
        .map(|(a, b)| PlotRow {
            x: a.x,
            u_exact: a.u_exact,
            u_dsmg: a.u_numeric,
            u_dsmn: b.u_numeric,
        })
        .collect())
}

pub fn write_plot_csv(path: &Path, rows: &[PlotRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "u_exact", "u_dsmg", "u_dsmn"])?;
    for r in rows {
        w.write_record([r.x, r.u_exact, r.u_dsmg, r.u_dsmn].map(fmt_float))?;
    }
    w.flush()?;
    Ok(())
}
