//! Subcommand implementations. Each returns the text to print and an exit
//! code so the binary and the tests share one code path.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 computed but unstable.

use std::fmt;
use std::path::Path;

use serde::Serialize;

use cocrn_core::model::{parse_config, Protocol, Sensing};
use cocrn_core::performance::{
    analyze, analyze_optimized, pu_delay, pu_delay_geo_g1, stability_check, su_throughput_bound,
    DEFAULT_Q_STEP,
};
use cocrn_core::protocols::{branch_gains, pu_throughput};
use cocrn_core::{BranchGains, SimEstimate, SystemConfig, ThroughputReport};
use cocrn_sim::{simulate, trace, SimConfig, SimReport};

use crate::sweep::{run_sweep, to_csv, SweepSpec};
use crate::validate;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_UNSTABLE: i32 = 2;

/// Text produced by a command that ran to completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

/// A command that could not run; always printed to stderr.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<cocrn_core::Error> for CliError {
    fn from(e: cocrn_core::Error) -> Self {
        Self::usage(e.to_string())
    }
}

pub type CliResult = Result<Output, CliError>;

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn defaulted_notes(keys: &[&str]) -> String {
    keys.iter()
        .map(|k| format!("note: `{k}` not set, using the default\n"))
        .collect()
}

/// Loads a configuration file; errors read `path: line N: message`.
pub fn load_config(path: &Path) -> Result<(SystemConfig, Vec<&'static str>), CliError> {
    let text = read(path)?;
    let loaded =
        parse_config(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    Ok((loaded.config, loaded.defaulted))
}

#[derive(Serialize)]
struct AnalyzeOutput<'a> {
    protocol: Protocol,
    sensing: Sensing,
    #[serde(rename = "L")]
    su_count: usize,
    q: f64,
    #[serde(rename = "lambda_P")]
    lambda_p: f64,
    #[serde(flatten)]
    report: ThroughputReport,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    defaulted: &'a [&'static str],
    #[serde(skip_serializing_if = "Option::is_none")]
    gains: Option<BranchGains>,
}

pub fn cmd_analyze(path: &Path, dump_gains: bool, optimize_q: bool) -> CliResult {
    let (cfg, defaulted) = load_config(path)?;
    let report = if optimize_q {
        analyze_optimized(&cfg, DEFAULT_Q_STEP)?
    } else {
        analyze(&cfg)?
    };
    let gains = if dump_gains {
        Some(branch_gains(&cfg.with_q(report.q_star.unwrap_or(cfg.q)))?)
    } else {
        None
    };
    let out = AnalyzeOutput {
        protocol: cfg.protocol,
        sensing: cfg.sensing,
        su_count: cfg.su_count,
        q: report.q_star.unwrap_or(cfg.q),
        lambda_p: cfg.lambda_p,
        report,
        defaulted: &defaulted,
        gains,
    };
    let mut stderr = defaulted_notes(&defaulted);
    let code = if report.stable {
        EXIT_OK
    } else {
        stderr.push_str(&format!(
            "unstable: lambda_P = {} >= mu_P = {}\n",
            cfg.lambda_p, report.mu_p
        ));
        EXIT_UNSTABLE
    };
    Ok(Output {
        stdout: json(&out),
        stderr,
        code,
    })
}

/// Runs a sweep spec; writes the CSV to `out` or returns it as stdout.
pub fn cmd_sweep(spec_path: &Path, out: Option<&Path>) -> CliResult {
    let text = read(spec_path)?;
    let spec = SweepSpec::parse(&text)
        .map_err(|e| CliError::usage(format!("{}: {e}", spec_path.display())))?;
    let csv = to_csv(&run_sweep(&spec)?);
    match out {
        Some(path) => {
            std::fs::write(path, &csv)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            Ok(Output {
                stdout: String::new(),
                stderr: format!(
                    "wrote {} rows to {}\n",
                    csv.lines().count() - 1,
                    path.display()
                ),
                code: EXIT_OK,
            })
        }
        None => Ok(Output {
            stdout: csv,
            stderr: String::new(),
            code: EXIT_OK,
        }),
    }
}

/// Simulation options as given on the command line.
#[derive(Debug, Clone, PartialEq)]
pub struct SimFlags {
    pub slots: u64,
    pub warmup: u64,
    pub seed: u64,
    pub saturated: bool,
    pub replications: u32,
    pub batches: u32,
    pub join_mid_packet: bool,
    /// Print a per-slot trace of the first replication to stderr.
    pub trace: Option<u64>,
}

impl Default for SimFlags {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            slots: d.slots,
            warmup: d.warmup,
            seed: d.seed,
            saturated: false,
            replications: d.replications,
            batches: d.batches,
            join_mid_packet: d.join_mid_packet,
            trace: None,
        }
    }
}

impl SimFlags {
    pub fn to_sim_config(&self) -> SimConfig {
        SimConfig {
            slots: self.slots,
            warmup: self.warmup,
            seed: self.seed,
            saturated_pu: self.saturated,
            replications: self.replications,
            batches: self.batches,
            join_mid_packet: self.join_mid_packet,
        }
    }
}

#[derive(Serialize)]
struct Comparison {
    reference: &'static str,
    estimate: &'static str,
    analytic: f64,
    z: f64,
}

impl Comparison {
    fn new(
        reference: &'static str,
        estimate: &'static str,
        est: &SimEstimate,
        analytic: f64,
    ) -> Self {
        Self {
            reference,
            estimate,
            analytic,
            z: est.z_score(analytic),
        }
    }
}

#[derive(Serialize)]
struct SimulateOutput {
    protocol: Protocol,
    sensing: Sensing,
    #[serde(rename = "L")]
    su_count: usize,
    q: f64,
    #[serde(rename = "lambda_P")]
    lambda_p: f64,
    sim: SimConfig,
    report: SimReport,
    #[serde(rename = "mu_P")]
    mu_p: f64,
    stable: bool,
    comparisons: Vec<Comparison>,
}

pub fn cmd_simulate(path: &Path, flags: &SimFlags) -> CliResult {
    let (cfg, defaulted) = load_config(path)?;
    let sim = flags.to_sim_config();
    sim.validate().map_err(CliError::usage)?;
    let mu_p = pu_throughput(&cfg)?;
    let stable = stability_check(cfg.lambda_p, mu_p);
    let report = simulate(&cfg, &sim)?;

    let mut comparisons = Vec::new();
    if sim.saturated_pu {
        comparisons.push(Comparison::new("mu_P", "mu_P_hat", &report.mu_p_hat, mu_p));
    } else {
        comparisons.push(Comparison::new(
            "lambda_P",
            "mu_P_hat",
            &report.mu_p_hat,
            cfg.lambda_p,
        ));
        if stable {
            comparisons.push(Comparison::new(
                "1-lambda_P/mu_P",
                "idle_frac",
                &report.idle_frac,
                1.0 - cfg.lambda_p / mu_p,
            ));
            comparisons.push(Comparison::new(
                "D_P",
                "delay_hat",
                &report.delay_hat,
                pu_delay(cfg.lambda_p, mu_p)?,
            ));
            comparisons.push(Comparison::new(
                "D_geo_g1",
                "delay_hat",
                &report.delay_hat,
                pu_delay_geo_g1(&cfg)?,
            ));
        }
        comparisons.push(Comparison::new(
            "mu_S_bound",
            "mu_S_bound_hat",
            &report.mu_s_bound_hat,
            su_throughput_bound(&cfg, mu_p),
        ));
    }

    let mut stderr = defaulted_notes(&defaulted);
    if let Some(limit) = flags.trace {
        for line in trace(&cfg, &sim, limit)? {
            stderr.push_str(&line);
            stderr.push('\n');
        }
    }
    let code = if !sim.saturated_pu && !stable {
        stderr.push_str(&format!(
            "unstable: lambda_P = {} >= mu_P = {mu_p}\n",
            cfg.lambda_p
        ));
        EXIT_UNSTABLE
    } else {
        EXIT_OK
    };
    let out = SimulateOutput {
        protocol: cfg.protocol,
        sensing: cfg.sensing,
        su_count: cfg.su_count,
        q: cfg.q,
        lambda_p: cfg.lambda_p,
        sim,
        report,
        mu_p,
        stable,
        comparisons,
    };
    Ok(Output {
        stdout: json(&out),
        stderr,
        code,
    })
}

/// `quick` or `full`; prints the CSV table and one verdict line per group.
pub fn cmd_validate(level: &str) -> CliResult {
    let groups = match level {
        "quick" => validate::quick(),
        "full" => validate::full(),
        other => {
            return Err(CliError::usage(format!(
                "unknown validation level `{other}` (expected quick or full)"
            )))
        }
    };
    let stderr: String = groups.iter().map(|g| g.summary() + "\n").collect();
    let code = if groups.iter().all(|g| g.passed()) {
        EXIT_OK
    } else {
        EXIT_USAGE
    };
    Ok(Output {
        stdout: validate::to_csv(&groups),
        stderr,
        code,
    })
}
