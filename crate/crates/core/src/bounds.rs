//! Closed-form error bounds and detection delay.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A Dantzig-selector constant that may depend on the sparsity level `S`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SConstant {
    Constant(f64),
    /// Entry `S - 1` holds the value for `S`; missing entries are `+inf`.
    PerS(Vec<f64>),
}

impl SConstant {
    pub fn value(&self, s: usize) -> f64 {
        match self {
            SConstant::Constant(c) => *c,
            SConstant::PerS(v) => s.checked_sub(1).and_then(|i| v.get(i)).copied().unwrap_or(f64::INFINITY),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub c1: f64,
    pub c2: SConstant,
    pub c3: SConstant,
    pub lambda_m: f64,
    pub s_max: usize,
    pub sigma_obs_sq: f64,
    /// `delta_{|T|}`
    pub delta_t: f64,
    /// `theta_{|T|,|Delta|}`
    pub theta_t_delta: f64,
    pub t_size: usize,
    pub delta_size: usize,
    /// `E[||(x_t)_Delta||^2 | y_{1:t-1}]`
    pub e_x_delta_sq: f64,
}

/// `4 / (1 - delta_S - theta_{S,2S})`, or `+inf` when the denominator is not positive.
pub fn default_c1(delta_s: f64, theta_s_2s: f64) -> f64 {
    let d = 1.0 - delta_s - theta_s_2s;
    if d > 0.0 {
        4.0 / d
    } else {
        f64::INFINITY
    }
}

/// `lambda_m^2 * C1(S)^2`, used for both `C2(S)` and `C3(S)`.
pub fn default_c23(lambda_m: f64, delta_s: f64, theta_s_2s: f64) -> f64 {
    let c = default_c1(delta_s, theta_s_2s);
    lambda_m * lambda_m * c * c
}

/// Product that treats `0 * inf` as `0`.
fn mul0(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

/// `B1 = C1^2 lambda_m^2 S_max sigma_obs^2`.
pub fn b1(inp: &BoundInputs) -> f64 {
    mul0(inp.c1 * inp.c1 * inp.lambda_m * inp.lambda_m, inp.s_max as f64 * inp.sigma_obs_sq)
}

/// `B_CSLSE(S) = C2(S) S sigma^2 + C3(S) (|T|+|Delta|-S)/S * L0`.
///
/// The factor `|T|+|Delta|-S` saturates at zero.
pub fn b_cslse(s: usize, inp: &BoundInputs) -> Result<f64> {
    if s == 0 {
        return Err(Error::contract("S must be at least 1"));
    }
    if !(inp.delta_t < 1.0) {
        return Err(Error::Domain(format!("delta_T = {} >= 1 leaves the bound undefined", inp.delta_t)));
    }
    let one_minus = 1.0 - inp.delta_t;
    let ratio = inp.theta_t_delta * inp.theta_t_delta / (one_minus * one_minus);
    let excess = (inp.t_size + inp.delta_size).saturating_sub(s) as f64;
    let l0 = if s >= inp.delta_size {
        ratio * inp.e_x_delta_sq + excess * inp.sigma_obs_sq / one_minus
    } else {
        (ratio + 1.0) * inp.e_x_delta_sq + inp.t_size as f64 * inp.sigma_obs_sq / one_minus
    };
    let first = mul0(inp.c2.value(s), s as f64 * inp.sigma_obs_sq);
    let second = mul0(inp.c3.value(s), excess / s as f64 * l0);
    Ok(first + second)
}

/// Smallest `B_CSLSE(S)` over `range`, ties going to the smaller `S`.
pub fn min_over_s_bound(inp: &BoundInputs, range: RangeInclusive<usize>) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for s in range {
        let v = b_cslse(s, inp)?;
        if best.map_or(true, |(_, b)| v < b) {
            best = Some((s, v));
        }
    }
    best.ok_or_else(|| Error::contract("empty S range"))
}

/// Complementary error function, accurate to about 1e-15 relative.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 1.0 {
        // erf(x) = 2/sqrt(pi) e^{-x^2} sum_n (2x^2)^n x / (2n+1)!!, all terms positive
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        while term > 1e-17 * sum && n < 500.0 {
            n += 1.0;
            term *= 2.0 * x2 / (2.0 * n + 1.0);
            sum += term;
        }
        1.0 - 2.0 / std::f64::consts::PI.sqrt() * (-x2).exp() * sum
    } else {
        // even continued fraction, evaluated from the tail
        let z = 2.0 * x * x;
        let mut t = 0.0;
        for k in (1..=200).rev() {
            let k = k as f64;
            t = (2.0 * k - 1.0) * (2.0 * k) / (z + 4.0 * k + 1.0 - t);
        }
        (-x * x).exp() / std::f64::consts::PI.sqrt() * 2.0 * x / (z + 1.0 - t)
    }
}

/// Gaussian tail `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Inverse of `Q` on `(0, 1)` by bisection.
pub fn q_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("Q^-1 needs 0 < p < 1, got {p}")));
    }
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q_function(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `ceil(4 B1 / (sigma_sys^2 [Q^-1((1-eps)^{1/S_max} / 2)]^2))`.
pub fn tau_epsilon(eps: f64, inp: &BoundInputs, sigma_sys_sq: f64) -> Result<u64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps must lie in (0, 1), got {eps}")));
    }
    if inp.s_max == 0 {
        return Err(Error::Domain("S_max must be positive".into()));
    }
    let b = b1(inp);
    if b == 0.0 {
        return Ok(0);
    }
    if !(sigma_sys_sq > 0.0) {
        return Err(Error::Domain("sigma_sys^2 must be positive".into()));
    }
    let q = q_inverse((1.0 - eps).powf(1.0 / inp.s_max as f64) / 2.0)?;
    let tau = (4.0 * b / (sigma_sys_sq * q * q)).ceil();
    if !tau.is_finite() || tau > u64::MAX as f64 {
        return Err(Error::Domain(format!("detection delay is not finite (B1 = {b})")));
    }
    Ok(tau as u64)
}
