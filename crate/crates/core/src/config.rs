//! Experiment configuration: TOML files, built-in presets and `key=value` overrides.
//!
//! A configuration source is either a preset name (`experiment1`,
//! `experiment2`) or a path to a TOML file. A file may start from a preset
//! with `preset = "experiment2"`; every key it sets replaces the preset value.
//! Overrides use dotted keys, e.g. `thresholds.alpha_fe=100` or `n_trials=5`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundInputs, SConstant};
use crate::dantzig;
use crate::error::{Error, Result};
use crate::filters::Thresholds;
use crate::metrics::{self, IncoherenceReport, DEFAULT_BUDGET};
use crate::model::{
    self, Experiment, LogBase, MeasurementModel, NoiseKind, SupportSchedule, SystemModel,
};
use crate::numerics::{IndexSet, Mat};
use crate::rng::{child_seed, Role};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Kfcs,
    Lscs,
    SimpleCs,
    GaKf,
    GaLs,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Kfcs,
        Algorithm::Lscs,
        Algorithm::SimpleCs,
        Algorithm::GaKf,
        Algorithm::GaLs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Kfcs => "kfcs",
            Algorithm::Lscs => "lscs",
            Algorithm::SimpleCs => "simple_cs",
            Algorithm::GaKf => "ga_kf",
            Algorithm::GaLs => "ga_ls",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Experiment1,
    Experiment2,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduledAddition {
    pub time: usize,
    pub indices: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    /// i.i.d. Gaussian entries, columns scaled to unit norm.
    Gaussian,
    /// `[I_n, H_n / sqrt n]`; requires `m = 2n` with `n` a power of two.
    HadamardPair,
    /// Columns listed in `matrix_columns`, scaled to unit norm.
    Explicit,
}

/// Threshold settings; unset entries take the simulation defaults for the
/// configured `n`, `m` and `sigma_obs^2`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSpec {
    pub alpha_a: Option<f64>,
    pub alpha_fe: Option<f64>,
    pub alpha_z: Option<f64>,
    pub k: Option<usize>,
    pub k_prime: Option<usize>,
    pub max_add: Option<usize>,
    pub final_ls: bool,
    pub deletion_enabled: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSpec {
    /// Defaults to the schedule's total number of additions.
    pub s_max: Option<usize>,
    /// Bound on false additions; defaults to `max_add`.
    pub s_fa: Option<usize>,
    pub budget: f64,
}

impl Default for AuditSpec {
    fn default() -> Self {
        AuditSpec {
            s_max: None,
            s_fa: None,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSpec {
    pub eps: f64,
    pub s_max: Option<usize>,
    /// Largest `S` scanned for `B_CSLSE(S)`; defaults to `|T| + |Delta|`.
    pub s_inf: Option<usize>,
    pub t_size: usize,
    pub delta_size: usize,
    pub e_x_delta_sq: f64,
    /// Enumerated from the matrix when unset.
    pub delta_t: Option<f64>,
    pub theta_t_delta: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<SConstant>,
    pub c3: Option<SConstant>,
    pub budget: f64,
}

impl Default for BoundsSpec {
    fn default() -> Self {
        BoundsSpec {
            eps: 0.1,
            s_max: None,
            s_inf: None,
            t_size: 0,
            delta_size: 1,
            e_x_delta_sq: 0.0,
            delta_t: None,
            theta_t_delta: None,
            c1: None,
            c2: None,
            c3: None,
            budget: DEFAULT_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub m: usize,
    pub n: usize,
    pub schedule: ScheduleKind,
    pub custom_schedule: Vec<ScheduledAddition>,
    pub sigma_sys_sq: f64,
    /// Defaults to `3 sigma_sys^2`.
    pub sigma_init_sq: Option<f64>,
    pub sigma_obs_sq: f64,
    pub lambda_log_base: LogBase,
    /// Overrides `sqrt(2 log m)`.
    pub lambda_m: Option<f64>,
    pub noise_kind: NoiseKind,
    pub matrix: MatrixKind,
    pub matrix_columns: Vec<Vec<f64>>,
    pub algorithms: Vec<Algorithm>,
    pub n_trials: usize,
    pub horizon: usize,
    pub master_seed: u64,
    pub share_matrix: bool,
    pub share_schedule: bool,
    /// Gauss-Dantzig threshold on squared estimates; defaults to `alpha_a`.
    pub simple_cs_alpha: Option<f64>,
    pub thresholds: ThresholdSpec,
    pub audit: AuditSpec,
    pub bounds: BoundsSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            m: 256,
            n: 72,
            schedule: ScheduleKind::Experiment1,
            custom_schedule: Vec::new(),
            sigma_sys_sq: 1.0,
            sigma_init_sq: None,
            // ((1/3) sqrt(16/n))^2
            sigma_obs_sq: 16.0 / (9.0 * 72.0),
            lambda_log_base: LogBase::Two,
            lambda_m: None,
            noise_kind: NoiseKind::Gaussian,
            matrix: MatrixKind::Gaussian,
            matrix_columns: Vec::new(),
            algorithms: Algorithm::ALL.to_vec(),
            n_trials: 100,
            horizon: 100,
            master_seed: 0,
            share_matrix: true,
            share_schedule: false,
            simple_cs_alpha: None,
            thresholds: ThresholdSpec::default(),
            audit: AuditSpec::default(),
            bounds: BoundsSpec::default(),
        }
    }
}

pub const PRESETS: [&str; 2] = ["experiment1", "experiment2"];

impl ExperimentConfig {
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "experiment1" => Some(ExperimentConfig::default()),
            "experiment2" => Some(ExperimentConfig {
                schedule: ScheduleKind::Experiment2,
                ..ExperimentConfig::default()
            }),
            _ => None,
        }
    }

    /// Parses TOML text, honoring an optional `preset` key.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_table(table, &[])
    }

    /// Loads a preset name or a TOML file and applies `key=value` overrides.
    ///
    /// A path that exists wins over a preset of the same name.
    pub fn load(source: &str, overrides: &[String]) -> Result<Self> {
        let path = Path::new(source);
        let table = if path.exists() {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config file {}: {e}", path.display())))?;
            toml::from_str(&text)
                .map_err(|e| Error::Config(format!("cannot parse config file {}: {e}", path.display())))?
        } else if PRESETS.contains(&source) {
            let mut t = toml::Table::new();
            t.insert("preset".into(), toml::Value::String(source.into()));
            t
        } else {
            return Err(Error::Config(format!(
                "config file {} not found (and not one of the presets {})",
                path.display(),
                PRESETS.join(", ")
            )));
        };
        Self::from_table(table, overrides)
    }

    fn from_table(mut table: toml::Table, overrides: &[String]) -> Result<Self> {
        let base = match table.remove("preset") {
            None => ExperimentConfig::default(),
            Some(toml::Value::String(name)) => ExperimentConfig::preset(&name)
                .ok_or_else(|| Error::Config(format!("unknown preset {name:?}")))?,
            Some(other) => return Err(Error::Config(format!("preset must be a string, got {other}"))),
        };
        let mut merged = base.to_table()?;
        merge(&mut merged, table);
        for ov in overrides {
            apply_override(&mut merged, ov)?;
        }
        let cfg: ExperimentConfig = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn to_table(&self) -> Result<toml::Table> {
        toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n == 0 || self.m == 0 {
            return bad("m and n must be positive".into());
        }
        if self.n_trials == 0 {
            return bad("n_trials must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            return bad("at least one algorithm is required".into());
        }
        for v in [self.sigma_sys_sq, self.sigma_obs_sq, self.sigma_init_sq()] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad("variances must be finite and non-negative".into());
            }
        }
        match self.matrix {
            MatrixKind::HadamardPair if self.m != 2 * self.n || !self.n.is_power_of_two() => {
                return bad(format!("hadamard_pair needs m = 2n with n a power of two (m={}, n={})", self.m, self.n));
            }
            MatrixKind::Explicit
                if self.matrix_columns.len() != self.m || self.matrix_columns.iter().any(|c| c.len() != self.n) =>
            {
                return bad(format!("matrix_columns must hold m={} columns of length n={}", self.m, self.n));
            }
            _ => {}
        }
        if self.schedule == ScheduleKind::Custom {
            let last = self.custom_schedule.last().map_or(0, |a| a.time);
            if self.horizon < last {
                return bad(format!("horizon {} precedes the last addition time {last}", self.horizon));
            }
            self.custom_support_schedule()?;
        } else {
            let (last, total) = if self.schedule == ScheduleKind::Experiment1 { (30, 20) } else { (50, 26) };
            if self.m < total {
                return bad(format!("m={} cannot hold the {total} scheduled indices", self.m));
            }
            if self.horizon < last {
                return bad(format!("horizon {} precedes the last addition time {last}", self.horizon));
            }
        }
        self.thresholds().validate()
    }

    pub fn sigma_init_sq(&self) -> f64 {
        self.sigma_init_sq.unwrap_or(3.0 * self.sigma_sys_sq)
    }

    pub fn lambda_m(&self) -> f64 {
        self.lambda_m.unwrap_or_else(|| model::lambda_m(self.m, self.lambda_log_base))
    }

    pub fn thresholds(&self) -> Thresholds {
        let d = Thresholds::simulation_defaults(self.n, self.m.max(2), self.sigma_obs_sq);
        let s = &self.thresholds;
        Thresholds {
            alpha_a: s.alpha_a.unwrap_or(d.alpha_a),
            alpha_fe: s.alpha_fe.unwrap_or(d.alpha_fe),
            alpha_z: s.alpha_z.unwrap_or(d.alpha_z),
            k: s.k.unwrap_or(d.k),
            k_prime: s.k_prime.unwrap_or(d.k_prime),
            max_add: s.max_add.unwrap_or(d.max_add),
            final_ls: s.final_ls,
            deletion_enabled: s.deletion_enabled.unwrap_or(d.deletion_enabled),
        }
    }

    pub fn simple_cs_alpha(&self) -> f64 {
        self.simple_cs_alpha.unwrap_or_else(|| self.thresholds().alpha_a)
    }

    pub fn max_add_default(&self) -> usize {
        dantzig::default_max_add(self.n, self.m.max(2))
    }

    fn custom_support_schedule(&self) -> Result<SupportSchedule> {
        let additions = self
            .custom_schedule
            .iter()
            .map(|a| Ok((a.time, IndexSet::new(a.indices.clone(), self.m)?)))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::Config(format!("custom_schedule: {e}")))?;
        SupportSchedule::new(additions, self.m).map_err(|e| Error::Config(format!("custom_schedule: {e}")))
    }

    pub fn matrix_seed(&self, trial: u64) -> u64 {
        child_seed(self.master_seed, if self.share_matrix { 0 } else { trial }, Role::Matrix)
    }

    pub fn schedule_seed(&self, trial: u64) -> u64 {
        child_seed(self.master_seed, if self.share_schedule { 0 } else { trial }, Role::Schedule)
    }

    /// Support schedule used by `trial`.
    pub fn support_schedule(&self, trial: u64) -> Result<SupportSchedule> {
        match self.schedule {
            ScheduleKind::Experiment1 => model::experiment_schedule(Experiment::Experiment1, self.m, self.schedule_seed(trial)),
            ScheduleKind::Experiment2 => model::experiment_schedule(Experiment::Experiment2, self.m, self.schedule_seed(trial)),
            ScheduleKind::Custom => self.custom_support_schedule(),
        }
    }

    /// Measurement matrix used by `trial`.
    pub fn matrix(&self, trial: u64) -> Result<Mat> {
        match self.matrix {
            MatrixKind::Gaussian => model::gen_matrix(self.n, self.m, self.matrix_seed(trial)),
            MatrixKind::HadamardPair => model::hadamard_pair(self.n),
            MatrixKind::Explicit => model::unit_columns(&self.matrix_columns),
        }
    }

    pub fn measurement(&self, trial: u64) -> Result<MeasurementModel> {
        MeasurementModel::new(self.matrix(trial)?, self.sigma_obs_sq, self.lambda_m(), self.noise_kind)
    }

    pub fn system(&self, schedule: SupportSchedule) -> Result<SystemModel> {
        SystemModel::new(self.m, self.sigma_sys_sq, self.sigma_init_sq(), schedule)
    }
}

/// Fully specified inputs of the bound calculations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedBounds {
    pub inputs: BoundInputs,
    pub eps: f64,
    pub s_inf: usize,
}

impl ExperimentConfig {
    /// Total number of scheduled additions of trial 0.
    pub fn schedule_s_max(&self) -> Result<usize> {
        Ok(self.support_schedule(0)?.s_max())
    }

    /// Incoherence constants of the trial-0 matrix for the audit settings.
    pub fn incoherence_report(&self) -> Result<IncoherenceReport> {
        let s_max = match self.audit.s_max {
            Some(s) => s,
            None => self.schedule_s_max()?,
        };
        let s_fa = self.audit.s_fa.unwrap_or(self.thresholds().max_add);
        metrics::incoherence_report(&self.matrix(0)?, s_max, s_fa, self.audit.budget)
    }

    /// Fills every unset bound input from the trial-0 matrix by enumeration.
    ///
    /// `C2(S)` and `C3(S)` default to `lambda_m^2 (4 / (1 - delta_S - theta_{S,2S}))^2`,
    /// which is `+inf` where the denominator is not positive or `3S > m`.
    pub fn bound_inputs(&self) -> Result<ResolvedBounds> {
        let b = &self.bounds;
        let gram = self.matrix(0)?.gram();
        let m = gram.rows();
        let lambda = self.lambda_m();
        let s_max = match b.s_max {
            Some(s) => s,
            None => self.schedule_s_max()?,
        };
        let delta = |s: usize| metrics::delta_s_with_gram(&gram, s, b.budget);
        let theta = |s: usize, sp: usize| -> Result<f64> {
            if s + sp > m {
                Ok(f64::INFINITY)
            } else {
                metrics::theta_s_sp_with_gram(&gram, s, sp, b.budget)
            }
        };
        let delta_t = match b.delta_t {
            Some(d) => d,
            None => delta(b.t_size.min(m))?,
        };
        let theta_t_delta = match b.theta_t_delta {
            Some(t) => t,
            None if b.t_size == 0 || b.delta_size == 0 => 0.0,
            None => theta(b.t_size, b.delta_size)?,
        };
        let c1 = match b.c1 {
            Some(c) => c,
            None if s_max == 0 => 4.0,
            None if s_max > m => f64::INFINITY,
            None => bounds::default_c1(delta(s_max)?, theta(s_max, 2 * s_max)?),
        };
        let s_inf = b.s_inf.unwrap_or((b.t_size + b.delta_size).max(1));
        let c23 = || -> Result<SConstant> {
            let mut v = Vec::with_capacity(s_inf);
            for s in 1..=s_inf {
                if s > m {
                    v.push(f64::INFINITY);
                } else {
                    v.push(bounds::default_c23(lambda, delta(s)?, theta(s, 2 * s)?));
                }
            }
            Ok(SConstant::PerS(v))
        };
        let c2 = match &b.c2 {
            Some(c) => c.clone(),
            None => c23()?,
        };
        let c3 = match &b.c3 {
            Some(c) => c.clone(),
            None if b.c2.is_none() => c2.clone(),
            None => c23()?,
        };
        Ok(ResolvedBounds {
            inputs: BoundInputs {
                c1,
                c2,
                c3,
                lambda_m: lambda,
                s_max,
                sigma_obs_sq: self.sigma_obs_sq,
                delta_t,
                theta_t_delta,
                t_size: b.t_size,
                delta_size: b.delta_size,
                e_x_delta_sq: b.e_x_delta_sq,
            },
            eps: b.eps,
            s_inf,
        })
    }
}

/// Recursively overlays `over` onto `base`.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies one `dotted.key=value` override; the value is read as TOML and
/// falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not of the form key=value")))?;
    let key = key.trim();
    let value = parse_value(raw.trim());
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("malformed key {key:?}")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(Error::Config(format!("{p} in {key:?} is not a table"))),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
