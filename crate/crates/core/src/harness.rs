//! Seeded Monte Carlo runs pairing one ground-truth trajectory with every
//! selected estimator.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, ExperimentConfig};
use crate::error::{Error, Result};
use crate::filters::{self, FilterState};
use crate::model::{self, MeasurementModel};
use crate::numerics::{self, IndexSet};
use crate::rng::{Role, SeedStream};

/// A trial stopped by a filter error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialAbort {
    pub trial: usize,
    pub time: usize,
    pub algorithm: Algorithm,
    pub cause: String,
}

/// Raw per-trial series of one algorithm, indexed `[trial][t - 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmTrace {
    pub algorithm: Algorithm,
    pub sq_err: Vec<Vec<f64>>,
    /// `|T_t symmetric-difference N_t|`.
    pub support_err: Vec<Vec<f64>>,
}

fn column_mean(rows: &[Vec<f64>], horizon: usize) -> Vec<f64> {
    let k = rows.len().max(1) as f64;
    (0..horizon).map(|t| rows.iter().map(|r| r[t]).sum::<f64>() / k).collect()
}

impl AlgorithmTrace {
    pub fn horizon(&self) -> usize {
        self.sq_err.first().map_or(0, Vec::len)
    }

    /// Mean squared error at each time.
    pub fn mse(&self) -> Vec<f64> {
        column_mean(&self.sq_err, self.horizon())
    }

    /// Standard error of the mean at each time (zero with fewer than two trials).
    pub fn mse_stderr(&self) -> Vec<f64> {
        let n = self.sq_err.len();
        let mean = self.mse();
        (0..self.horizon())
            .map(|t| {
                if n < 2 {
                    return 0.0;
                }
                let var = self.sq_err.iter().map(|r| (r[t] - mean[t]).powi(2)).sum::<f64>() / (n - 1) as f64;
                (var / n as f64).sqrt()
            })
            .collect()
    }

    pub fn support_err_mean(&self) -> Vec<f64> {
        column_mean(&self.support_err, self.horizon())
    }

    /// Mean MSE over times `from..=to` (1-based).
    pub fn window_mean(&self, from: usize, to: usize) -> f64 {
        let mse = self.mse();
        let slice = &mse[from - 1..to];
        slice.iter().sum::<f64>() / slice.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MseTrace {
    pub horizon: usize,
    pub n_trials: usize,
    /// Trials that ran to the horizon, in increasing order.
    pub completed: Vec<usize>,
    pub aborts: Vec<TrialAbort>,
    pub algorithms: Vec<AlgorithmTrace>,
}

impl MseTrace {
    pub fn get(&self, alg: Algorithm) -> Option<&AlgorithmTrace> {
        self.algorithms.iter().find(|a| a.algorithm == alg)
    }
}

/// Per-time diagnostics of one algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmStep {
    pub algorithm: Algorithm,
    pub sq_err: f64,
    pub support: IndexSet,
    pub added: IndexSet,
    pub deleted: IndexSet,
    /// Filtering-error norm, for the support-tracking filters.
    pub fen: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub true_support: IndexSet,
    pub steps: Vec<AlgorithmStep>,
}

/// Rows produced before the trial ended, and the abort if it did not finish.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialTrace {
    pub rows: Vec<TraceRow>,
    pub abort: Option<TrialAbort>,
}

enum Runner {
    Kfcs(FilterState),
    Lscs(FilterState),
    SimpleCs,
    GaKf(FilterState),
    GaLs(FilterState),
}

/// Runs every configured algorithm over one seeded trajectory.
///
/// `meas` is the measurement model for this trial (shared or per trial).
pub fn run_trial_detailed(cfg: &ExperimentConfig, trial: usize, meas: &MeasurementModel) -> Result<TrialTrace> {
    let m = cfg.m;
    let schedule = cfg.support_schedule(trial as u64)?;
    let sys = cfg.system(schedule)?;
    let th = cfg.thresholds();
    let alpha_simple = cfg.simple_cs_alpha();
    let mut signal_rng = SeedStream::derive(cfg.master_seed, trial as u64, Role::Signal);
    let mut noise_rng = SeedStream::derive(cfg.master_seed, trial as u64, Role::Noise);
    let traj = model::simulate(&sys, meas, cfg.horizon, &mut signal_rng, &mut noise_rng)?;

    let mut runners: Vec<(Algorithm, Runner)> = cfg
        .algorithms
        .iter()
        .map(|&a| {
            let init = FilterState::initial(m);
            let r = match a {
                Algorithm::Kfcs => Runner::Kfcs(init),
                Algorithm::Lscs => Runner::Lscs(init),
                Algorithm::SimpleCs => Runner::SimpleCs,
                Algorithm::GaKf => Runner::GaKf(init),
                Algorithm::GaLs => Runner::GaLs(init),
            };
            (a, r)
        })
        .collect();

    let mut rows = Vec::with_capacity(cfg.horizon);
    for (truth, y) in &traj {
        let mut steps = Vec::with_capacity(runners.len());
        for (alg, runner) in runners.iter_mut() {
            let outcome: Result<(Vec<f64>, IndexSet, IndexSet, IndexSet, Option<f64>)> = match runner {
                Runner::Kfcs(state) => filters::kfcs_step(state, y, meas, &sys, &th).map(|(next, rep)| {
                    *state = next;
                    (state.x_hat.clone(), state.support.clone(), rep.added, rep.deleted, Some(rep.fen))
                }),
                Runner::Lscs(state) => filters::lscs_step(state, y, meas, &th).map(|(next, rep)| {
                    *state = next;
                    (state.x_hat.clone(), state.support.clone(), rep.added, rep.deleted, Some(rep.fen))
                }),
                Runner::SimpleCs => filters::simple_cs_step(y, meas, alpha_simple)
                    .map(|(support, x)| (x, support, IndexSet::empty(), IndexSet::empty(), None)),
                Runner::GaKf(state) => filters::ga_kf_step(state, y, meas, &sys, &truth.support).map(|next| {
                    *state = next;
                    (state.x_hat.clone(), state.support.clone(), IndexSet::empty(), IndexSet::empty(), None)
                }),
                Runner::GaLs(state) => filters::ga_ls_step(state, y, meas, &truth.support).map(|next| {
                    *state = next;
                    (state.x_hat.clone(), state.support.clone(), IndexSet::empty(), IndexSet::empty(), None)
                }),
            };
            match outcome {
                Ok((x_hat, support, added, deleted, fen)) => steps.push(AlgorithmStep {
                    algorithm: *alg,
                    sq_err: numerics::norm2_sq(&numerics::sub(&truth.x, &x_hat)),
                    support,
                    added,
                    deleted,
                    fen,
                }),
                Err(e) => {
                    return Ok(TrialTrace {
                        rows,
                        abort: Some(TrialAbort {
                            trial,
                            time: truth.t,
                            algorithm: *alg,
                            cause: e.to_string(),
                        }),
                    })
                }
            }
        }
        rows.push(TraceRow {
            t: truth.t,
            true_support: truth.support.clone(),
            steps,
        });
    }
    Ok(TrialTrace { rows, abort: None })
}

/// Diagnostics of a single trial, using the trial's own measurement matrix.
pub fn trace_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialTrace> {
    cfg.validate()?;
    let meas = cfg.measurement(trial as u64)?;
    run_trial_detailed(cfg, trial, &meas)
}

type TrialResult = std::result::Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), TrialAbort>;

fn run_trial(cfg: &ExperimentConfig, trial: usize, shared: Option<&MeasurementModel>) -> Result<TrialResult> {
    let own;
    let meas = match shared {
        Some(m) => m,
        None => {
            own = cfg.measurement(trial as u64)?;
            &own
        }
    };
    let tr = run_trial_detailed(cfg, trial, meas)?;
    if let Some(abort) = tr.abort {
        return Ok(Err(abort));
    }
    let k = cfg.algorithms.len();
    let mut sq = vec![Vec::with_capacity(cfg.horizon); k];
    let mut se = vec![Vec::with_capacity(cfg.horizon); k];
    for row in &tr.rows {
        for (a, step) in row.steps.iter().enumerate() {
            sq[a].push(step.sq_err);
            se[a].push(row.true_support.symmetric_difference_len(&step.support) as f64);
        }
    }
    Ok(Ok((sq, se)))
}

/// Runs `cfg.n_trials` trials and aggregates their error series.
///
/// Aborted trials are left out of the averages; more than 5% of them fails the run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MseTrace> {
    cfg.validate()?;
    let shared = if cfg.share_matrix {
        Some(cfg.measurement(0)?)
    } else {
        None
    };
    let job = |trial: usize| run_trial(cfg, trial, shared.as_ref());
    #[cfg(feature = "parallel")]
    let results: Vec<Result<TrialResult>> = (0..cfg.n_trials).into_par_iter().map(job).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<TrialResult>> = (0..cfg.n_trials).map(job).collect();

    let mut algorithms: Vec<AlgorithmTrace> = cfg
        .algorithms
        .iter()
        .map(|&algorithm| AlgorithmTrace {
            algorithm,
            sq_err: Vec::new(),
            support_err: Vec::new(),
        })
        .collect();
    let mut completed = Vec::new();
    let mut aborts = Vec::new();
    for (trial, r) in results.into_iter().enumerate() {
        match r? {
            Ok((sq, se)) => {
                completed.push(trial);
                for ((tr, s), e) in algorithms.iter_mut().zip(sq).zip(se) {
                    tr.sq_err.push(s);
                    tr.support_err.push(e);
                }
            }
            Err(abort) => aborts.push(abort),
        }
    }
    if aborts.len() * 20 > cfg.n_trials || completed.is_empty() {
        let a = &aborts[0];
        return Err(Error::TooManyAborts {
            aborted: aborts.len(),
            total: cfg.n_trials,
            first: format!("trial {} at t={} ({}): {}", a.trial, a.time, a.algorithm, a.cause),
        });
    }
    Ok(MseTrace {
        horizon: cfg.horizon,
        n_trials: cfg.n_trials,
        completed,
        aborts,
        algorithms,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub peak_mse: f64,
    pub peak_time: usize,
    /// Mean MSE over the last 10 steps.
    pub final_window_mean: f64,
    pub mean_support_err: f64,
}

pub fn summarize(trace: &MseTrace) -> Vec<SummaryRow> {
    trace
        .algorithms
        .iter()
        .map(|a| {
            let mse = a.mse();
            let (peak_idx, peak) = mse
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
            let h = mse.len();
            let from = h.saturating_sub(10) + 1;
            let se = a.support_err_mean();
            SummaryRow {
                algorithm: a.algorithm,
                peak_mse: peak.max(0.0),
                peak_time: peak_idx + 1,
                final_window_mean: if h == 0 { 0.0 } else { a.window_mean(from, h) },
                mean_support_err: se.iter().sum::<f64>() / se.len().max(1) as f64,
            }
        })
        .collect()
}
