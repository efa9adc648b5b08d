//! `kfcs`: experiment runs, incoherence audits, bound tables and trajectory traces.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kfcs_core::bounds;
use kfcs_core::config::ExperimentConfig;
use kfcs_core::error::Error;
use kfcs_core::harness::{self, MseTrace, SummaryRow, TrialTrace};
use kfcs_core::metrics::IncoherenceReport;
use serde::Serialize;

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_CHECK: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "kfcs", version, about = "Kalman filtered compressed sensing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo MSE comparison of all configured estimators.
    Run(Common),
    /// Enumerate incoherence constants of the configured matrix and check the assumptions.
    Audit(Common),
    /// B1, the detection delay and the B_CSLSE(S) table.
    Bounds(Common),
    /// Per-time diagnostics of a single seeded trajectory.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Preset name (experiment1, experiment2) or path to a TOML file.
    #[arg(long, short)]
    config: String,
    /// Directory receiving all output files.
    #[arg(long = "out", visible_alias = "output-dir", short, default_value = "out")]
    out: PathBuf,
    /// Override a configuration key, e.g. --set thresholds.alpha_fe=100.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Master seed (overrides master_seed).
    #[arg(long)]
    seed: Option<u64>,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Budget { .. } => EXIT_BUDGET,
            Error::Config(_) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        message: format!("{}: {e}", path.display()),
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Audit(c) => cmd_audit(c),
        Command::Bounds(c) => cmd_bounds(c),
        Command::Trace { common, trial } => cmd_trace(common, *trial),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(c: &Common) -> Result<ExperimentConfig, Failure> {
    let mut overrides = c.overrides.clone();
    if let Some(seed) = c.seed {
        overrides.push(format!("master_seed={seed}"));
    }
    Ok(ExperimentConfig::load(&c.config, &overrides)?)
}

fn prepare_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_failure(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io_failure(path, e))?;
    }
    w.flush().map_err(|e| io_failure(path, e))
}

/// Resolved configuration plus everything derived from it.
fn write_manifest(dir: &Path, cfg: &ExperimentConfig, command: &str, extra: &str) -> Result<(), Failure> {
    let th = cfg.thresholds();
    let mut text = format!(
        "# kfcs {command}; rerun with: kfcs {command} --config manifest.toml\n{}",
        cfg.to_toml()?
    );
    text.push_str(&format!(
        "\n# derived\n# lambda_m = {}\n# sigma_init_sq = {}\n# alpha_a = {}\n# alpha_fe = {}\n# alpha_z = {}\n# k = {}\n# k_prime = {}\n# max_add = {}\n# simple_cs_alpha = {}\n",
        cfg.lambda_m(),
        cfg.sigma_init_sq(),
        th.alpha_a,
        th.alpha_fe,
        th.alpha_z,
        th.k,
        th.k_prime,
        th.max_add,
        cfg.simple_cs_alpha()
    ));
    text.push_str(extra);
    write_text(&dir.join("manifest.toml"), &text)
}

#[derive(Serialize)]
struct MseRow<'a> {
    time: usize,
    algorithm: &'a str,
    mse_mean: f64,
    mse_stderr: f64,
    support_err_mean: f64,
}

#[derive(Serialize)]
struct AbortRow<'a> {
    trial: usize,
    time: usize,
    algorithm: &'a str,
    cause: &'a str,
}

fn mse_rows(trace: &MseTrace) -> Vec<MseRow<'_>> {
    let mut rows = Vec::new();
    for a in &trace.algorithms {
        let (mse, se, sup) = (a.mse(), a.mse_stderr(), a.support_err_mean());
        for t in 0..trace.horizon {
            rows.push(MseRow {
                time: t + 1,
                algorithm: a.algorithm.name(),
                mse_mean: mse[t],
                mse_stderr: se[t],
                support_err_mean: sup[t],
            });
        }
    }
    rows
}

const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
# Plots mse.csv next to this script: one MSE curve per algorithm.
import csv, os, sys
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
series = defaultdict(lambda: ([], []))
with open(os.path.join(here, "mse.csv")) as f:
    for row in csv.DictReader(f):
        t, v = series[row["algorithm"]]
        t.append(int(row["time"]))
        v.append(float(row["mse_mean"]))

fig, ax = plt.subplots(figsize=(6, 3.5))
for name, (t, v) in sorted(series.items()):
    ax.plot(t, v, label=name)
ax.set_xlabel("time")
ax.set_ylabel("MSE")
ax.set_yscale("log")
ax.legend()
fig.tight_layout()
out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "mse.png")
fig.savefig(out, dpi=150)
print(out)
"#;

fn cmd_run(c: &Common) -> CmdResult {
    let cfg = load(c)?;
    prepare_dir(&c.out)?;
    let trace = harness::run_experiment(&cfg)?;
    write_csv(&c.out.join("mse.csv"), mse_rows(&trace))?;
    let summary: Vec<SummaryRow> = harness::summarize(&trace);
    write_csv(&c.out.join("summary.csv"), summary.iter())?;
    write_csv(
        &c.out.join("aborts.csv"),
        trace.aborts.iter().map(|a| AbortRow {
            trial: a.trial,
            time: a.time,
            algorithm: a.algorithm.name(),
            cause: &a.cause,
        }),
    )?;
    write_text(&c.out.join("plot_mse.py"), PLOT_SCRIPT)?;
    let extra = format!(
        "# trials completed = {} of {}\n# aborted trials = {:?}\n",
        trace.completed.len(),
        trace.n_trials,
        trace.aborts.iter().map(|a| a.trial).collect::<Vec<_>>()
    );
    write_manifest(&c.out, &cfg, "run", &extra)?;
    println!("{:<10} {:>12} {:>6} {:>14} {:>12}", "algorithm", "peak_mse", "t_peak", "final_window", "support_err");
    for r in &summary {
        println!(
            "{:<10} {:>12.4} {:>6} {:>14.4} {:>12.3}",
            r.algorithm.name(),
            r.peak_mse,
            r.peak_time,
            r.final_window_mean,
            r.mean_support_err
        );
    }
    Ok(0)
}

#[derive(Serialize)]
struct ConstantRow {
    constant: &'static str,
    s: usize,
    s_prime: Option<usize>,
    value: f64,
}

#[derive(Serialize)]
struct CheckRow<'a> {
    check: &'a str,
    passed: bool,
}

fn print_report(r: &IncoherenceReport) {
    println!("incoherence (S_max = {}, S_fa = {})", r.budget_s_max, r.s_fa);
    for d in &r.delta {
        println!("  delta_{:<3} = {:.10}", d.s, d.delta);
    }
    for t in &r.theta {
        println!("  theta_{{{},{}}} = {:.10}", t.s, t.s_prime, t.theta);
    }
    for c in &r.checks {
        println!("  [{}] {}", if c.passed { "pass" } else { "FAIL" }, c.name);
    }
}

fn cmd_audit(c: &Common) -> CmdResult {
    let cfg = load(c)?;
    prepare_dir(&c.out)?;
    let report = cfg.incoherence_report()?;
    let rows = report
        .delta
        .iter()
        .map(|d| ConstantRow {
            constant: "delta",
            s: d.s,
            s_prime: None,
            value: d.delta,
        })
        .chain(report.theta.iter().map(|t| ConstantRow {
            constant: "theta",
            s: t.s,
            s_prime: Some(t.s_prime),
            value: t.theta,
        }));
    write_csv(&c.out.join("incoherence.csv"), rows)?;
    write_csv(
        &c.out.join("checks.csv"),
        report.checks.iter().map(|k| CheckRow {
            check: &k.name,
            passed: k.passed,
        }),
    )?;
    write_manifest(&c.out, &cfg, "audit", "")?;
    print_report(&report);
    Ok(if report.all_passed() { 0 } else { EXIT_CHECK })
}

#[derive(Serialize)]
struct BoundRow {
    s: usize,
    b_cslse: f64,
}

#[derive(Serialize)]
struct KeyValue {
    quantity: &'static str,
    value: f64,
}

fn cmd_bounds(c: &Common) -> CmdResult {
    let cfg = load(c)?;
    prepare_dir(&c.out)?;
    let rb = cfg.bound_inputs()?;
    let inp = &rb.inputs;
    let b1 = bounds::b1(inp);
    // an unbounded B1 gives no finite delay; report it as inf
    let tau = match bounds::tau_epsilon(rb.eps, inp, cfg.sigma_sys_sq) {
        Ok(t) => t as f64,
        Err(Error::Domain(_)) if !b1.is_finite() => f64::INFINITY,
        Err(e) => return Err(e.into()),
    };
    let table = (1..=rb.s_inf)
        .map(|s| Ok(BoundRow { s, b_cslse: bounds::b_cslse(s, inp)? }))
        .collect::<Result<Vec<_>, Error>>()?;
    let (s_star, b_min) = bounds::min_over_s_bound(inp, 1..=rb.s_inf)?;
    write_csv(&c.out.join("b_cslse.csv"), table.iter())?;
    let summary = [
        KeyValue { quantity: "b1", value: b1 },
        KeyValue { quantity: "eps", value: rb.eps },
        KeyValue { quantity: "tau_eps", value: tau },
        KeyValue { quantity: "c1", value: inp.c1 },
        KeyValue { quantity: "lambda_m", value: inp.lambda_m },
        KeyValue { quantity: "s_max", value: inp.s_max as f64 },
        KeyValue { quantity: "delta_t", value: inp.delta_t },
        KeyValue { quantity: "theta_t_delta", value: inp.theta_t_delta },
        KeyValue { quantity: "s_star", value: s_star as f64 },
        KeyValue { quantity: "min_b_cslse", value: b_min },
    ];
    write_csv(&c.out.join("bounds.csv"), summary.iter())?;
    write_manifest(&c.out, &cfg, "bounds", "")?;
    for kv in &summary {
        println!("{:<14} {}", kv.quantity, kv.value);
    }
    println!("S,B_CSLSE(S)");
    for r in &table {
        println!("{},{}", r.s, r.b_cslse);
    }
    Ok(0)
}

#[derive(Serialize)]
struct TraceCsvRow<'a> {
    t: usize,
    algorithm: &'a str,
    sq_err: f64,
    support_size: usize,
    support: String,
    added: String,
    deleted: String,
    fen: Option<f64>,
    true_support: String,
}

fn join(set: &kfcs_core::IndexSet) -> String {
    set.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

fn trace_rows(tt: &TrialTrace) -> Vec<TraceCsvRow<'_>> {
    let mut rows = Vec::new();
    for row in &tt.rows {
        for s in &row.steps {
            rows.push(TraceCsvRow {
                t: row.t,
                algorithm: s.algorithm.name(),
                sq_err: s.sq_err,
                support_size: s.support.len(),
                support: join(&s.support),
                added: join(&s.added),
                deleted: join(&s.deleted),
                fen: s.fen,
                true_support: join(&row.true_support),
            });
        }
    }
    rows
}

fn cmd_trace(c: &Common, trial: usize) -> CmdResult {
    let cfg = load(c)?;
    prepare_dir(&c.out)?;
    let tt = harness::trace_trial(&cfg, trial)?;
    write_csv(&c.out.join("trace.csv"), trace_rows(&tt))?;
    write_manifest(&c.out, &cfg, "trace", &format!("# trial = {trial}\n"))?;
    for row in &tt.rows {
        for s in &row.steps {
            if !s.added.is_empty() || !s.deleted.is_empty() {
                println!(
                    "t={:<4} {:<8} added [{}] deleted [{}]",
                    row.t,
                    s.algorithm.name(),
                    join(&s.added),
                    join(&s.deleted)
                );
            }
        }
    }
    match tt.abort {
        None => Ok(0),
        Some(a) => Err(Failure {
            code: EXIT_RUNTIME,
            message: format!("trial {} aborted at t={} in {}: {}", a.trial, a.time, a.algorithm, a.cause),
        }),
    }
}
