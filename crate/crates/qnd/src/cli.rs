//! Command-line front end: run plan files, print the characterization table,
//! sweep the measurement strength, and dump density matrices.
//!
//! Exit codes: 0 success, 1 parse/validation/usage error, 2 physics
//! precondition failure (a configuration whose heralded branch is empty).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::circuit::{
    self, meter_d_prime, CircuitConfig, CircuitError, PolarizationQubit, StandardInput, SweepPoint,
};
use crate::dsl::{self, OutputFormat, ResolvedAction, ResolvedExperiment};
use crate::metrics::{self, InputDistMode, InputReport, MetricsReport};
use crate::numfmt::{round_sig, sig};

/// Joint probabilities measured by the published experiment, printed next to
/// the ideal table for reference and never asserted by the simulator.
pub const EXPERIMENT_JOINT_REFERENCE: [(&str, [f64; 4]); 4] = [
    ("H", [0.97, 0.024, 0.007, 0.0005]),
    ("V", [0.012, 0.00013, 0.18, 0.81]),
    ("D+", [0.44, 0.016, 0.10, 0.44]),
    ("R+", [0.46, 0.022, 0.104, 0.41]),
];
/// Published six-input QSP-fidelity average.
pub const EXPERIMENT_F_QSP_AVERAGE: f64 = 0.88;
/// Published output purities at the two sweep endpoints.
pub const EXPERIMENT_PURITY_ENDPOINTS: (f64, f64) = (0.89, 0.51);

#[derive(Parser, Debug)]
#[command(
    name = "qnd",
    version,
    about = "Simulate a heralded, nondestructive polarization measurement"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Execute a plan file (see the README for the plan language).
    Run {
        /// Path to a .qnd plan file.
        plan: PathBuf,
    },
    /// Characterize all six standard inputs in the strong configuration.
    Table {
        /// Compare against the bare input populations instead of the
        /// success-weighted ones.
        #[arg(long)]
        raw_input_dist: bool,
        /// Also write the metrics report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Sweep the meter weight alpha from 0 to sqrt(3)/2 and write a CSV.
    Sweep {
        /// Number of sweep points (at least 2).
        #[arg(long)]
        steps: usize,
        /// CSV destination.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the signal-output density matrix for one meter weight.
    Densmat {
        /// Meter H amplitude in [0, 1]; the V amplitude is sqrt(1 - alpha²).
        #[arg(long)]
        alpha: f64,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}", format_parse_errors(.0))]
    Plan(Vec<dsl::ParseError>),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Physics(#[from] CircuitError),
}

fn format_parse_errors(errors: &[dsl::ParseError]) -> String {
    let mut out = String::from("plan is invalid:");
    for e in errors {
        let _ = write!(out, "\n  {e}");
    }
    out
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Physics(
                CircuitError::NoSuccessBranch | CircuitError::ImpossibleOutcome,
            ) => 2,
            _ => 1,
        }
    }
}

/// Runs one parsed command and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Run { plan } => cmd_run(&plan),
        Command::Table {
            raw_input_dist,
            json,
        } => cmd_table(raw_input_dist, json.as_deref()),
        Command::Sweep { steps, out } => cmd_sweep(steps, &out),
        Command::Densmat { alpha } => cmd_densmat(alpha),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn cmd_run(plan_path: &Path) -> Result<(), CliError> {
    let source = std::fs::read_to_string(plan_path).map_err(|source| CliError::Io {
        path: plan_path.display().to_string(),
        source,
    })?;
    let plan = dsl::parse(&source).map_err(CliError::Plan)?;
    let resolved = plan.resolve()?;
    match &resolved.action {
        ResolvedAction::Run => {
            let report = metrics::input_report(
                &resolved.signal_label,
                &resolved.signal,
                &resolved.meter,
                &resolved.config,
                InputDistMode::SuccessWeighted,
            )?;
            let outcome = circuit::run(&resolved.signal, &resolved.meter, &resolved.config)?;
            print_run(&resolved, &report, outcome.success_probability);
            for (format, path) in &plan.outputs {
                let body = match format {
                    OutputFormat::Json => {
                        let mut value = report.to_json_value();
                        value["success_probability"] =
                            round_sig(outcome.success_probability, 12).into();
                        format!("{value}\n")
                    }
                    OutputFormat::Csv => run_csv(&report, outcome.success_probability),
                };
                write_file(path, &body)?;
            }
        }
        ResolvedAction::Table => {
            let report = table_report(&resolved.meter, &resolved.config, InputDistMode::SuccessWeighted)?;
            print_table(&report, &resolved.config);
            for (format, path) in &plan.outputs {
                let body = match format {
                    OutputFormat::Json => format!("{}\n", report.to_json_value()),
                    OutputFormat::Csv => table_csv(&report),
                };
                write_file(path, &body)?;
            }
        }
        ResolvedAction::Densmat => {
            let rho = circuit::signal_output_density_matrix(
                &resolved.signal,
                &resolved.meter,
                &resolved.config,
            )?;
            print_densmat(&resolved, &rho);
            for (format, path) in &plan.outputs {
                let body = match format {
                    OutputFormat::Json => format!(
                        "{}\n",
                        serde_json::json!({
                            "rho": rho.to_json_value(),
                            "purity": round_sig(rho.purity(), 12),
                        })
                    ),
                    OutputFormat::Csv => densmat_csv(&rho),
                };
                write_file(path, &body)?;
            }
        }
        ResolvedAction::Sweep { alphas } => {
            let points = sweep_with_thread_cap(&resolved.signal, alphas, &resolved.config)?;
            print_sweep_summary(&points);
            for (format, path) in &plan.outputs {
                let body = match format {
                    OutputFormat::Csv => circuit::sweep_csv(&points),
                    OutputFormat::Json => format!("{}\n", sweep_json(&points)),
                };
                write_file(path, &body)?;
            }
        }
    }
    Ok(())
}

pub fn cmd_table(raw_input_dist: bool, json_path: Option<&Path>) -> Result<(), CliError> {
    let mode = if raw_input_dist {
        InputDistMode::Raw
    } else {
        InputDistMode::SuccessWeighted
    };
    let config = CircuitConfig::strong();
    let report = table_report(&meter_d_prime(), &config, mode)?;
    print_table(&report, &config);
    if let Some(path) = json_path {
        write_file(path, &format!("{}\n", report.to_json_value()))?;
    }
    Ok(())
}

pub fn cmd_sweep(steps: usize, out: &Path) -> Result<(), CliError> {
    if steps < 2 {
        return Err(CliError::Usage(format!(
            "sweep needs at least 2 steps, got {steps}"
        )));
    }
    let top = 3.0_f64.sqrt() / 2.0;
    let alphas: Vec<f64> = (0..steps)
        .map(|i| top * i as f64 / (steps - 1) as f64)
        .collect();
    let points = sweep_with_thread_cap(
        &PolarizationQubit::equal_superposition(),
        &alphas,
        &CircuitConfig::weak(),
    )?;
    print_sweep_summary(&points);
    write_file(out, &circuit::sweep_csv(&points))?;
    println!("wrote {}", out.display());
    Ok(())
}

pub fn cmd_densmat(alpha: f64) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&alpha) || alpha.is_nan() {
        return Err(CliError::Usage(format!(
            "alpha = {alpha} must lie in [0, 1]"
        )));
    }
    let beta = (1.0 - alpha * alpha).sqrt();
    let meter = PolarizationQubit::new_real(alpha, beta)?;
    let rho = circuit::signal_output_density_matrix(
        &PolarizationQubit::equal_superposition(),
        &meter,
        &CircuitConfig::weak(),
    )?;
    println!(
        "signal (|H> + |V>)/sqrt(2), meter alpha = {}, balanced loss on",
        sig(alpha, 4)
    );
    println!("signal output density matrix:");
    for row in 0..2 {
        let cell = |col: usize| {
            let e = rho.entry(row, col);
            format!("{:>8} {} {:>7}i", sig(e.re, 4), if e.im < 0.0 { "-" } else { "+" }, sig(e.im.abs(), 4))
        };
        println!("  [ {}   {} ]", cell(0), cell(1));
    }
    println!("purity: {}", sig(rho.purity(), 4));
    println!(
        "experiment (published reference): purity {} at alpha = 0, {} at alpha = sqrt(3)/2",
        EXPERIMENT_PURITY_ENDPOINTS.0, EXPERIMENT_PURITY_ENDPOINTS.1
    );
    Ok(())
}

/// Sweep under an optional `QND_THREADS` pool-size cap. Results are ordered
/// by input index regardless of parallelism.
fn sweep_with_thread_cap(
    signal: &PolarizationQubit,
    alphas: &[f64],
    config: &CircuitConfig,
) -> Result<Vec<SweepPoint>, CliError> {
    let cap = std::env::var("QND_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0);
    match cap {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| CliError::Usage(format!("QND_THREADS: {e}")))?;
            Ok(pool.install(|| circuit::weak_sweep(signal, alphas, config))?)
        }
        None => Ok(circuit::weak_sweep(signal, alphas, config)?),
    }
}

fn table_report(
    meter: &PolarizationQubit,
    config: &CircuitConfig,
    mode: InputDistMode,
) -> Result<MetricsReport, CliError> {
    let mut inputs = Vec::new();
    for input in StandardInput::all() {
        inputs.push(metrics::input_report(
            input.label(),
            &input.qubit(),
            meter,
            config,
            mode,
        )?);
    }
    Ok(MetricsReport::new(inputs))
}

fn print_run(resolved: &ResolvedExperiment, report: &InputReport, p_success: f64) {
    println!(
        "signal {}   eta = {}   balanced_loss = {}",
        resolved.signal_label,
        sig(resolved.config.eta, 4),
        if resolved.config.balanced_loss { "on" } else { "off" }
    );
    println!("success probability: {}", sig(p_success, 4));
    println!();
    println!("joint distribution (signal, meter | success):");
    println!(
        "  P_HH = {}   P_HV = {}   P_VH = {}   P_VV = {}",
        sig(report.joint.p_hh, 4),
        sig(report.joint.p_hv, 4),
        sig(report.joint.p_vh, 4),
        sig(report.joint.p_vv, 4)
    );
    println!();
    println!(
        "metrics: F_M = {}   F_QND = {}   F_QSP = {}   K = {}",
        sig(report.f_m, 4),
        sig(report.f_qnd, 4),
        sig(report.f_qsp, 4),
        sig(report.k, 4)
    );
}

fn print_table(report: &MetricsReport, config: &CircuitConfig) {
    println!(
        "strong measurement, eta = {}, balanced_loss = {}",
        sig(config.eta, 4),
        if config.balanced_loss { "on" } else { "off" }
    );
    println!();
    println!(
        "{:<7}{:>9}{:>9}{:>9}{:>9}{:>8}{:>8}{:>8}{:>8}",
        "input", "P_HH", "P_HV", "P_VH", "P_VV", "F_M", "F_QND", "F_QSP", "K"
    );
    for r in &report.inputs {
        println!(
            "{:<7}{:>9}{:>9}{:>9}{:>9}{:>8}{:>8}{:>8}{:>8}",
            r.input,
            sig(r.joint.p_hh, 4),
            sig(r.joint.p_hv, 4),
            sig(r.joint.p_vh, 4),
            sig(r.joint.p_vv, 4),
            sig(r.f_m, 4),
            sig(r.f_qnd, 4),
            sig(r.f_qsp, 4),
            sig(r.k, 4)
        );
    }
    println!();
    println!(
        "F_QSP average over the six inputs: {}",
        sig(report.f_qsp_average, 4)
    );
    println!();
    println!("experiment (published reference), joint probabilities:");
    println!(
        "{:<7}{:>9}{:>9}{:>9}{:>9}",
        "input", "P_HH", "P_HV", "P_VH", "P_VV"
    );
    for (label, p) in EXPERIMENT_JOINT_REFERENCE {
        println!(
            "{:<7}{:>9}{:>9}{:>9}{:>9}",
            label,
            sig(p[0], 4),
            sig(p[1], 4),
            sig(p[2], 4),
            sig(p[3], 4)
        );
    }
    println!("(D-/R- nearly identical to D+/R+; published F_QSP average {EXPERIMENT_F_QSP_AVERAGE})");
}

fn print_densmat(resolved: &ResolvedExperiment, rho: &crate::fock::QubitDensityMatrix) {
    println!("signal {}   signal output density matrix:", resolved.signal_label);
    for row in 0..2 {
        let cell = |col: usize| {
            let e = rho.entry(row, col);
            format!(
                "{:>8} {} {:>7}i",
                sig(e.re, 4),
                if e.im < 0.0 { "-" } else { "+" },
                sig(e.im.abs(), 4)
            )
        };
        println!("  [ {}   {} ]", cell(0), cell(1));
    }
    println!("purity: {}", sig(rho.purity(), 4));
}

fn print_sweep_summary(points: &[SweepPoint]) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo = lo.min(p.duality_sum());
        hi = hi.max(p.duality_sum());
    }
    println!(
        "sweep: {} points, alpha in [{}, {}]",
        points.len(),
        sig(points.first().map(|p| p.alpha).unwrap_or(0.0), 4),
        sig(points.last().map(|p| p.alpha).unwrap_or(0.0), 4)
    );
    println!("K^2 + V^2: min {}, max {}", sig(lo, 12), sig(hi, 12));
}

fn run_csv(report: &InputReport, p_success: f64) -> String {
    let mut out = String::from("input,p_hh,p_hv,p_vh,p_vv,F_M,F_QND,F_QSP,K,p_success\n");
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{}",
        report.input,
        sig(report.joint.p_hh, 12),
        sig(report.joint.p_hv, 12),
        sig(report.joint.p_vh, 12),
        sig(report.joint.p_vv, 12),
        sig(report.f_m, 12),
        sig(report.f_qnd, 12),
        sig(report.f_qsp, 12),
        sig(report.k, 12),
        sig(p_success, 12)
    );
    out
}

fn table_csv(report: &MetricsReport) -> String {
    let mut out = String::from("input,p_hh,p_hv,p_vh,p_vv,F_M,F_QND,F_QSP,K\n");
    for r in &report.inputs {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.input,
            sig(r.joint.p_hh, 12),
            sig(r.joint.p_hv, 12),
            sig(r.joint.p_vh, 12),
            sig(r.joint.p_vv, 12),
            sig(r.f_m, 12),
            sig(r.f_qnd, 12),
            sig(r.f_qsp, 12),
            sig(r.k, 12)
        );
    }
    out
}

fn densmat_csv(rho: &crate::fock::QubitDensityMatrix) -> String {
    let mut out = String::from("entry,re,im\n");
    for (label, row, col) in [("hh", 0, 0), ("hv", 0, 1), ("vh", 1, 0), ("vv", 1, 1)] {
        let e = rho.entry(row, col);
        let _ = writeln!(out, "{label},{},{}", sig(e.re, 12), sig(e.im, 12));
    }
    out
}

fn sweep_json(points: &[SweepPoint]) -> serde_json::Value {
    serde_json::json!(points
        .iter()
        .map(|p| {
            serde_json::json!({
                "alpha": round_sig(p.alpha, 12),
                "K": round_sig(p.knowledge, 12),
                "V": round_sig(p.visibility, 12),
                "K2plusV2": round_sig(p.duality_sum(), 12),
                "purity": round_sig(p.purity, 12),
                "p_success": round_sig(p.success_probability, 12),
            })
        })
        .collect::<Vec<_>>())
}

fn write_file(path: impl AsRef<Path>, body: &str) -> Result<(), CliError> {
    let path = path.as_ref();
    std::fs::write(path, body).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}
