//! Causal estimators for sparse signal sequences.
//!
//! All Kalman filters here are reduced order: the state mean is kept as a
//! full-length vector that is zero off the current support, but the error
//! covariance only lives on the support (`|T| x |T|`, rows and columns in
//! increasing index order).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dantzig::{self, DsProblem, SimplexOptions};
use crate::error::{Error, Result};
use crate::model::{MeasurementModel, SystemModel};
use crate::numerics::{self, Cholesky, IndexSet, Mat, Qr};

/// Tuning knobs of the support-tracking filters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Addition threshold on squared Dantzig estimates.
    pub alpha_a: f64,
    /// Filtering-error-norm threshold gating the addition step.
    pub alpha_fe: f64,
    /// Deletion threshold on the mean squared recent estimate.
    pub alpha_z: f64,
    /// Steps the support must stay unchanged before deletions are checked.
    pub k: usize,
    /// Number of recent estimates averaged by the deletion test (`k_prime < k`).
    pub k_prime: usize,
    pub max_add: usize,
    /// Replace the Kalman update by least squares at steps where the support grew.
    pub final_ls: bool,
    pub deletion_enabled: bool,
}

impl Thresholds {
    /// `alpha_a = 9 sigma_obs^2`, `alpha_fe = 2n`, `alpha_z = sigma_obs^2`,
    /// `k = 5`, `k' = 3`, at most `floor(1.25 n / log2 m)` additions per step.
    pub fn simulation_defaults(n: usize, m: usize, sigma_obs_sq: f64) -> Self {
        Thresholds {
            alpha_a: 9.0 * sigma_obs_sq,
            alpha_fe: 2.0 * n as f64,
            alpha_z: sigma_obs_sq,
            k: 5,
            k_prime: 3,
            max_add: dantzig::default_max_add(n, m),
            final_ls: false,
            deletion_enabled: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_prime >= self.k {
            return Err(Error::Config(format!(
                "deletion window k'={} must be smaller than k={}",
                self.k_prime, self.k
            )));
        }
        if self.k_prime == 0 {
            return Err(Error::Config("k' must be at least 1".into()));
        }
        if !(self.alpha_a >= 0.0 && self.alpha_fe >= 0.0 && self.alpha_z >= 0.0) {
            return Err(Error::Config("thresholds must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    pub t: usize,
    pub support: IndexSet,
    /// Length-`m` estimate, zero off the support.
    pub x_hat: Vec<f64>,
    /// Error covariance restricted to the support.
    pub cov: Mat,
    /// Time of the last change to the support (additions or deletions).
    pub support_unchanged_since: usize,
    /// Up to `k'` most recent estimates, newest last.
    pub recent: VecDeque<Vec<f64>>,
}

impl FilterState {
    /// `x_0 = 0`, `P_0 = 0`, `T_0` empty.
    pub fn initial(m: usize) -> Self {
        FilterState::with_support(m, IndexSet::empty())
    }

    /// `x_0 = 0`, `P_0 = 0` on a known initial support.
    pub fn with_support(m: usize, support: IndexSet) -> Self {
        let k = support.len();
        FilterState {
            t: 0,
            support,
            x_hat: vec![0.0; m],
            cov: Mat::zeros(k, k),
            support_unchanged_since: 0,
            recent: VecDeque::new(),
        }
    }

    pub fn m(&self) -> usize {
        self.x_hat.len()
    }
}

/// Diagnostics of one support-tracking step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepReport {
    pub x_tmp: Vec<f64>,
    pub fen: f64,
    pub fen_passed: bool,
    /// Dantzig estimate on the filtering residual, when the addition step ran.
    pub beta_hat: Option<Vec<f64>>,
    pub added: IndexSet,
    /// An addition batch was discarded because it made `A_T'A_T` singular.
    pub rejected_batch: bool,
    pub deleted: IndexSet,
    pub used_final_ls: bool,
}

/// Result of the temporary Kalman step on `T_{t-1}`.
#[derive(Clone, Debug)]
pub struct TemporaryUpdate {
    pub x_tmp: Vec<f64>,
    pub cov_tmp: Mat,
    /// `A_T (P + Q) A_T' + sigma_obs^2 I`.
    pub innovation_cov: Mat,
}

struct KalmanOutput {
    x_post: Vec<f64>,
    cov_post: Mat,
}

/// One Kalman measurement update on the columns `a_t`, starting from the
/// predicted mean `x_prior` and covariance `p_pred`.
fn kalman_update(
    a_t: &Mat,
    x_prior: &[f64],
    p_pred: &Mat,
    y: &[f64],
    sigma_obs_sq: f64,
) -> Result<(KalmanOutput, Mat, Cholesky)> {
    let ap = a_t.matmul(p_pred)?; // n x k
    let mut s = ap.matmul_t(a_t)?;
    s.add_diag(sigma_obs_sq);
    s.symmetrize();
    let chol = Cholesky::factor(&s).map_err(|e| match e {
        Error::Singular { lambda_min, .. } => Error::Singular {
            context: "Kalman innovation covariance",
            lambda_min,
        },
        other => other,
    })?;
    let innov = numerics::sub(y, &a_t.mul_vec(x_prior)?);
    let w = chol.forward(&innov);
    // V = L^{-1} A P, so K innov = V' w and K A P = V'V
    let k = p_pred.rows();
    let mut v = Mat::zeros(a_t.rows(), k);
    for c in 0..k {
        let col = chol.forward(&ap.column(c));
        for (i, val) in col.into_iter().enumerate() {
            v[(i, c)] = val;
        }
    }
    let gain_innov = v.tr_mul_vec(&w)?;
    let x_post: Vec<f64> = x_prior.iter().zip(&gain_innov).map(|(a, b)| a + b).collect();
    let vtv = v.gram();
    let mut cov_post = p_pred.add(&vtv.scale(-1.0))?;
    cov_post.symmetrize();
    Ok((KalmanOutput { x_post, cov_post }, s, chol))
}

/// Prediction covariance on `new_support`: old entries get `P + sigma_sys^2 I`,
/// entries not in the previous support start at `sigma_init^2` with no cross terms.
fn predicted_cov(state: &FilterState, new_support: &IndexSet, sys: &SystemModel) -> Mat {
    let k = new_support.len();
    let mut p = Mat::zeros(k, k);
    let pos: Vec<Option<usize>> = new_support.iter().map(|i| state.support.position(i)).collect();
    for a in 0..k {
        match pos[a] {
            Some(pa) => {
                for b in 0..k {
                    if let Some(pb) = pos[b] {
                        p[(a, b)] = state.cov[(pa, pb)];
                    }
                }
                p[(a, a)] += sys.sigma_sys_sq;
            }
            None => p[(a, a)] = sys.sigma_init_sq,
        }
    }
    p
}

/// Temporary Kalman prediction and update on the previous support.
pub fn kf_temporary(
    state: &FilterState,
    y: &[f64],
    meas: &MeasurementModel,
    sys: &SystemModel,
) -> Result<TemporaryUpdate> {
    let m = meas.m();
    let n = meas.n();
    if y.len() != n || state.m() != m {
        return Err(Error::contract("state or observation does not match the measurement model"));
    }
    if state.support.is_empty() {
        let mut s = Mat::identity(n);
        s = s.scale(meas.sigma_obs_sq);
        return Ok(TemporaryUpdate {
            x_tmp: vec![0.0; m],
            cov_tmp: Mat::zeros(0, 0),
            innovation_cov: s,
        });
    }
    let a_t = numerics::columns(meas.a(), &state.support)?;
    let mut p_pred = state.cov.clone();
    p_pred.add_diag(sys.sigma_sys_sq);
    let x_prior = state.support.gather(&state.x_hat);
    let (out, s, _) = kalman_update(&a_t, &x_prior, &p_pred, y, meas.sigma_obs_sq)?;
    Ok(TemporaryUpdate {
        x_tmp: state.support.scatter(&out.x_post, m),
        cov_tmp: out.cov_post,
        innovation_cov: s,
    })
}

/// Filtering-error norm `r' S^{-1} r`.
pub fn fen_value(residual: &[f64], innovation_cov: &Mat) -> Result<f64> {
    if residual.len() != innovation_cov.rows() {
        return Err(Error::contract("residual length does not match the covariance"));
    }
    if residual.iter().all(|&r| r == 0.0) {
        return Ok(0.0);
    }
    Ok(Cholesky::factor(innovation_cov)?.quad_form(residual))
}

/// True when the filtering-error norm exceeds `alpha_fe`.
pub fn fen_test(residual: &[f64], innovation_cov: &Mat, alpha_fe: f64) -> Result<bool> {
    Ok(fen_value(residual, innovation_cov)? > alpha_fe)
}

/// Runs the Dantzig selector on the residual and thresholds it.
///
/// Returns the estimate, the accepted additions and whether a batch was
/// rejected for making the Gram matrix of the enlarged support singular.
fn detect_additions(
    residual: &[f64],
    support: &IndexSet,
    meas: &MeasurementModel,
    th: &Thresholds,
) -> Result<(Vec<f64>, IndexSet, bool)> {
    let problem = DsProblem {
        a: meas.a(),
        y: residual,
        eps: meas.ds_eps(),
    };
    let sol = dantzig::solve_ds_with_gram(&problem, meas.gram(), SimplexOptions::for_dimension(meas.m()))?;
    let added = dantzig::threshold_additions(&sol.beta_hat, support, th.alpha_a, th.max_add);
    if added.is_empty() {
        return Ok((sol.beta_hat, added, false));
    }
    let grown = support.union(&added);
    let singular = grown.len() > meas.n() || {
        let g = meas.gram().select(grown.as_slice(), grown.as_slice());
        numerics::eig_extremes(&g)?.0 < 1e-10
    };
    if singular {
        Ok((sol.beta_hat, IndexSet::empty(), true))
    } else {
        Ok((sol.beta_hat, added, false))
    }
}

/// Least squares on `support`: estimate and `(A_T'A_T)^{-1} sigma_obs^2`.
fn ls_on_support(support: &IndexSet, y: &[f64], meas: &MeasurementModel) -> Result<(Vec<f64>, Mat)> {
    let m = meas.m();
    if support.is_empty() {
        return Ok((vec![0.0; m], Mat::zeros(0, 0)));
    }
    let a_t = numerics::columns(meas.a(), support)?;
    let qr = Qr::factor(&a_t)?;
    let coef = qr.solve(y)?;
    let cov = qr.gram_inverse().scale(meas.sigma_obs_sq);
    Ok((support.scatter(&coef, m), cov))
}

/// Kalman update on `new_support` from `state`, with new entries seeded at `sigma_init^2`.
fn kf_on_support(
    state: &FilterState,
    new_support: &IndexSet,
    y: &[f64],
    meas: &MeasurementModel,
    sys: &SystemModel,
) -> Result<(Vec<f64>, Mat)> {
    let m = meas.m();
    if new_support.is_empty() {
        return Ok((vec![0.0; m], Mat::zeros(0, 0)));
    }
    let a_t = numerics::columns(meas.a(), new_support)?;
    let p_pred = predicted_cov(state, new_support, sys);
    let x_prior = new_support.gather(&state.x_hat);
    let (out, _, _) = kalman_update(&a_t, &x_prior, &p_pred, y, meas.sigma_obs_sq)?;
    Ok((new_support.scatter(&out.x_post, m), out.cov_post))
}

/// Records the new estimate and applies the zero-coefficient deletion rule.
fn finish_step(
    prev: &FilterState,
    support: IndexSet,
    mut x_hat: Vec<f64>,
    mut cov: Mat,
    th: &Thresholds,
) -> (FilterState, IndexSet) {
    let t = prev.t + 1;
    let mut unchanged_since = if support != prev.support {
        t
    } else {
        prev.support_unchanged_since
    };
    let mut recent = prev.recent.clone();
    recent.push_back(x_hat.clone());
    while recent.len() > th.k_prime {
        recent.pop_front();
    }

    let mut deleted = IndexSet::empty();
    let mut support = support;
    if th.deletion_enabled && t >= unchanged_since + th.k && recent.len() >= th.k_prime {
        deleted = support
            .iter()
            .filter(|&i| {
                let mean_sq = recent.iter().map(|x| x[i] * x[i]).sum::<f64>() / th.k_prime as f64;
                mean_sq < th.alpha_z
            })
            .collect();
        if !deleted.is_empty() {
            let keep = support.difference(&deleted);
            let keep_pos: Vec<usize> = keep.iter().map(|i| support.position(i).expect("subset")).collect();
            cov = cov.select(&keep_pos, &keep_pos);
            for i in deleted.iter() {
                x_hat[i] = 0.0;
            }
            support = keep;
            unchanged_since = t;
        }
    }
    (
        FilterState {
            t,
            support,
            x_hat,
            cov,
            support_unchanged_since: unchanged_since,
            recent,
        },
        deleted,
    )
}

/// One step of Kalman filtered compressed sensing.
pub fn kfcs_step(
    state: &FilterState,
    y: &[f64],
    meas: &MeasurementModel,
    sys: &SystemModel,
    th: &Thresholds,
) -> Result<(FilterState, StepReport)> {
    let temp = kf_temporary(state, y, meas, sys)?;
    let fitted = meas.a().mul_vec(&temp.x_tmp)?;
    let residual = numerics::sub(y, &fitted);
    let fen = fen_value(&residual, &temp.innovation_cov)?;
    let mut report = StepReport {
        fen,
        fen_passed: fen > th.alpha_fe,
        ..StepReport::default()
    };

    let mut support = state.support.clone();
    if report.fen_passed {
        let (beta, added, rejected) = detect_additions(&residual, &state.support, meas, th)?;
        report.beta_hat = Some(beta);
        report.rejected_batch = rejected;
        support = support.union(&added);
        report.added = added;
    }

    let grew = support != state.support;
    let (x_hat, cov) = if grew && th.final_ls {
        report.used_final_ls = true;
        ls_on_support(&support, y, meas)?
    } else {
        kf_on_support(state, &support, y, meas, sys)?
    };
    report.x_tmp = temp.x_tmp;
    let (next, deleted) = finish_step(state, support, x_hat, cov, th);
    report.deleted = deleted;
    Ok((next, report))
}

/// One step of least squares compressed sensing.
///
/// The filtering-error norm uses `sigma_obs^2 I` as the residual covariance.
pub fn lscs_step(
    state: &FilterState,
    y: &[f64],
    meas: &MeasurementModel,
    th: &Thresholds,
) -> Result<(FilterState, StepReport)> {
    if y.len() != meas.n() || state.m() != meas.m() {
        return Err(Error::contract("state or observation does not match the measurement model"));
    }
    let (x_tmp, _) = ls_on_support(&state.support, y, meas)?;
    let residual = numerics::sub(y, &meas.a().mul_vec(&x_tmp)?);
    let fen = if residual.iter().all(|&r| r == 0.0) {
        0.0
    } else if meas.sigma_obs_sq > 0.0 {
        numerics::norm2_sq(&residual) / meas.sigma_obs_sq
    } else {
        f64::INFINITY
    };
    let mut report = StepReport {
        fen,
        fen_passed: fen > th.alpha_fe,
        ..StepReport::default()
    };
    let mut support = state.support.clone();
    if report.fen_passed {
        let (beta, added, rejected) = detect_additions(&residual, &state.support, meas, th)?;
        report.beta_hat = Some(beta);
        report.rejected_batch = rejected;
        support = support.union(&added);
        report.added = added;
    }
    report.used_final_ls = support != state.support;
    let (x_hat, cov) = ls_on_support(&support, y, meas)?;
    report.x_tmp = x_tmp;
    let (next, deleted) = finish_step(state, support, x_hat, cov, th);
    report.deleted = deleted;
    Ok((next, report))
}

fn genie_state(prev: &FilterState, support: &IndexSet, x_hat: Vec<f64>, cov: Mat) -> FilterState {
    let t = prev.t + 1;
    FilterState {
        t,
        support_unchanged_since: if *support != prev.support {
            t
        } else {
            prev.support_unchanged_since
        },
        support: support.clone(),
        x_hat,
        cov,
        recent: VecDeque::new(),
    }
}

/// Kalman filter that is told the true support at every step.
pub fn ga_kf_step(
    state: &FilterState,
    y: &[f64],
    meas: &MeasurementModel,
    sys: &SystemModel,
    true_support: &IndexSet,
) -> Result<FilterState> {
    if y.len() != meas.n() || state.m() != meas.m() {
        return Err(Error::contract("state or observation does not match the measurement model"));
    }
    let (x_hat, cov) = kf_on_support(state, true_support, y, meas, sys)?;
    Ok(genie_state(state, true_support, x_hat, cov))
}

/// Least squares on the true support at every step.
pub fn ga_ls_step(
    state: &FilterState,
    y: &[f64],
    meas: &MeasurementModel,
    true_support: &IndexSet,
) -> Result<FilterState> {
    if y.len() != meas.n() || state.m() != meas.m() {
        return Err(Error::contract("state or observation does not match the measurement model"));
    }
    let (x_hat, cov) = ls_on_support(true_support, y, meas)?;
    Ok(genie_state(state, true_support, x_hat, cov))
}

/// Gauss-Dantzig estimate from the current observation alone.
pub fn simple_cs_step(y: &[f64], meas: &MeasurementModel, alpha: f64) -> Result<(IndexSet, Vec<f64>)> {
    if y.len() == meas.n() && y.iter().all(|&v| v == 0.0) {
        return Ok((IndexSet::empty(), vec![0.0; meas.m()]));
    }
    let problem = DsProblem {
        a: meas.a(),
        y,
        eps: meas.ds_eps(),
    };
    dantzig::gauss_dantzig_with_gram(&problem, meas.gram(), alpha)
}
