//! Noise generation, experiment orchestration, the oracle suite and CSV output.

mod config;
mod experiment;
mod noise;
mod verify;

pub use config::{ConfigMap, ExperimentConfig, Method, CONFIG_KEYS, SWEEP_KEYS};
pub use experiment::{
    build_problem, experiment_schedule, plot_data, run_experiment, run_sweep, summary_table,
    write_plot_csv, write_solution_csv, write_summary_csv, ExperimentRecord, PlotRow, SolutionRow,
    SummaryRow, SUMMARY_HEADER,
};
pub use noise::{make_noisy_rhs, NoisyData};
pub use verify::{psi_samples, verify_lemmas_command, OracleRow, VerifyOptions, VerifyReport};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Left-aligned columns separated by two spaces.
pub fn format_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<String>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.iter().map(|s| s.to_string()).collect());
    out.push('\n');
    out.push_str(&line(widths.iter().map(|w| "-".repeat(*w)).collect()));
    for row in rows {
        out.push('\n');
        out.push_str(&line(row.clone()));
    }
    out.push('\n');
    out
}
