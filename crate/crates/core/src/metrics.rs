//! Restricted isometry / orthogonality constants by exhaustive enumeration,
//! plus the compressibility and detection-condition checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, Mat};

/// Default work budget: refuse enumerations with `C(m,S) * S^3 > 1e9`.
pub const DEFAULT_BUDGET: f64 = 1e9;

/// Binomial coefficient as a float (exact up to 2^53).
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c.round()
}

/// Advances `c` to the next `k`-subset of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> Result<()>) -> Result<()> {
    if k > n {
        return Ok(());
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        f(&c)?;
        if k == 0 || !next_combination(&mut c, n) {
            return Ok(());
        }
    }
}

fn check_budget(work: f64, budget: f64) -> Result<()> {
    if work > budget {
        Err(Error::Budget { work, budget })
    } else {
        Ok(())
    }
}

/// Restricted isometry constant `delta_S` of `a`, given its Gram matrix.
pub fn delta_s_with_gram(gram: &Mat, s: usize, budget: f64) -> Result<f64> {
    let m = gram.rows();
    if s > m {
        return Err(Error::contract(format!("S={s} exceeds the number of columns {m}")));
    }
    if s == 0 {
        return Ok(0.0);
    }
    check_budget(binomial(m, s) * (s as f64).powi(3), budget)?;
    let mut worst = 0.0f64;
    for_each_subset(m, s, |t| {
        let (lo, hi) = numerics::eig_extremes(&gram.select(t, t))?;
        worst = worst.max(hi - 1.0).max(1.0 - lo);
        Ok(())
    })?;
    Ok(worst.max(0.0))
}

pub fn delta_s(a: &Mat, s: usize, budget: f64) -> Result<f64> {
    delta_s_with_gram(&a.gram(), s, budget)
}

/// Restricted orthogonality constant `theta_{S,S'}`, given the Gram matrix.
pub fn theta_s_sp_with_gram(gram: &Mat, s: usize, sp: usize, budget: f64) -> Result<f64> {
    let m = gram.rows();
    if s + sp > m {
        return Err(Error::contract(format!("S+S'={} exceeds the number of columns {m}", s + sp)));
    }
    if s == 0 || sp == 0 {
        return Ok(0.0);
    }
    // enumerate the smaller side in the inner loop
    let (s, sp) = if s <= sp { (s, sp) } else { (sp, s) };
    let work = binomial(m, s) * binomial(m - s, sp) * ((s + sp) as f64).powi(3);
    check_budget(work, budget)?;
    let mut worst = 0.0f64;
    let mut rest = Vec::with_capacity(m);
    for_each_subset(m, s, |t| {
        rest.clear();
        rest.extend((0..m).filter(|i| !t.contains(i)));
        for_each_subset(rest.len(), sp, |pos| {
            let tp: Vec<usize> = pos.iter().map(|&p| rest[p]).collect();
            // ||B||_2^2 = lambda_max(B B') with B = A_T'A_T' (s x sp, s <= sp)
            let b = gram.select(t, &tp);
            let bbt = b.matmul_t(&b)?;
            let (_, hi) = numerics::eig_extremes(&bbt)?;
            worst = worst.max(hi.max(0.0).sqrt());
            Ok(())
        })
    })?;
    Ok(worst)
}

pub fn theta_s_sp(a: &Mat, s: usize, sp: usize, budget: f64) -> Result<f64> {
    theta_s_sp_with_gram(&a.gram(), s, sp, budget)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaEntry {
    pub s: usize,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaEntry {
    pub s: usize,
    pub s_prime: usize,
    pub theta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncoherenceReport {
    pub delta: Vec<DeltaEntry>,
    pub theta: Vec<ThetaEntry>,
    pub budget_s_max: usize,
    pub s_fa: usize,
    pub checks: Vec<Check>,
}

impl IncoherenceReport {
    pub fn delta(&self, s: usize) -> Option<f64> {
        self.delta.iter().find(|e| e.s == s).map(|e| e.delta)
    }

    pub fn theta(&self, s: usize, s_prime: usize) -> Option<f64> {
        self.theta
            .iter()
            .find(|e| (e.s, e.s_prime) == (s, s_prime) || (e.s, e.s_prime) == (s_prime, s))
            .map(|e| e.theta)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Enumerates `delta_S` for `S = 1..=max(3 S_max, S_max + S_fa)` (capped at `m`)
/// and `theta_{S_max,S_max}`, `theta_{S_max,2S_max}`, then evaluates
/// `delta_{S_max+S_fa} < 1` and `delta_{2S_max} + delta_{3S_max} < 1`.
pub fn incoherence_report(a: &Mat, s_max: usize, s_fa: usize, budget: f64) -> Result<IncoherenceReport> {
    let m = a.cols();
    let gram = a.gram();
    let top = (3 * s_max).max(s_max + s_fa).min(m);
    let mut delta = Vec::new();
    for s in 1..=top {
        delta.push(DeltaEntry {
            s,
            delta: delta_s_with_gram(&gram, s, budget)?,
        });
    }
    let mut theta = Vec::new();
    for sp in [s_max, 2 * s_max] {
        if s_max >= 1 && s_max + sp <= m {
            theta.push(ThetaEntry {
                s: s_max,
                s_prime: sp,
                theta: theta_s_sp_with_gram(&gram, s_max, sp, budget)?,
            });
        }
    }
    let lookup = |s: usize| -> f64 {
        if s == 0 {
            0.0
        } else {
            delta.iter().find(|e| e.s == s).map_or(f64::INFINITY, |e| e.delta)
        }
    };
    let checks = vec![
        Check {
            name: format!("delta_{{S_max+S_fa}} = delta_{} < 1", s_max + s_fa),
            passed: lookup(s_max + s_fa) < 1.0,
        },
        Check {
            name: format!("delta_{} + delta_{} < 1", 2 * s_max, 3 * s_max),
            passed: lookup(2 * s_max) + lookup(3 * s_max) < 1.0,
        },
    ];
    Ok(IncoherenceReport {
        delta,
        theta,
        budget_s_max: s_max,
        s_fa,
        checks,
    })
}

/// `max_i E[beta_i^2] < min_i E[x_i^2]` (strict); an empty `beta` side is compressible.
pub fn compressibility_check(beta_moments: &[f64], x_min_energy: f64) -> bool {
    let max_beta = beta_moments.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max_beta < x_min_energy
}

/// `(t - t_a + 1) sigma_sys^2 >= theta^2 / (1-delta)^2 * lambda_max + sigma_obs^2 / (1-delta)`.
///
/// False whenever `delta_t >= 1` or `t < t_a`.
pub fn theorem1_condition(
    t: usize,
    t_a: usize,
    sigma_sys_sq: f64,
    delta_t: f64,
    theta: f64,
    lambda_max_cond: f64,
    sigma_obs_sq: f64,
) -> bool {
    if delta_t >= 1.0 || t < t_a {
        return false;
    }
    let lhs = (t - t_a + 1) as f64 * sigma_sys_sq;
    let one_minus = 1.0 - delta_t;
    let rhs = theta * theta / (one_minus * one_minus) * lambda_max_cond + sigma_obs_sq / one_minus;
    lhs >= rhs
}
