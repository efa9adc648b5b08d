//! Dantzig selector, addition thresholding and the Gauss-Dantzig refit.
//!
//! The selector `min ||b||_1  s.t.  ||A'(y - A b)||_inf <= eps` is solved as
//! the linear program
//!
//! ```text
//! min  sum(u) + sum(v)
//! s.t. -G(u - v) + s+ = eps - g
//!       G(u - v) + s- = eps + g
//!       u, v, s+, s- >= 0
//! ```
//!
//! with `G = A'A` and `g = A'y`. Every cost is non-negative, so the all-slack
//! basis is dual feasible and a dual simplex runs from it without a phase 1.
//! A basis is stored compactly: the set `J` of basic structural columns and
//! the set of "active" rows whose slack is non-basic always have equal size
//! `k`, and the basis inverse reduces to the `k x k` block `G[active, J]`.
//! `k` never exceeds `rank(G) <= n`, so each pivot costs `O(k^3 + m k)`.

use crate::error::{Error, Result};
use crate::numerics::{self, IndexSet, Lu, Mat};

#[derive(Clone, Copy, Debug)]
pub struct DsProblem<'a> {
    pub a: &'a Mat,
    pub y: &'a [f64],
    /// Constraint level `lambda_m sigma_obs`.
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DsSolution {
    pub beta_hat: Vec<f64>,
    /// `||beta_hat||_1`.
    pub objective: f64,
    /// `max(0, ||A'(y - A beta_hat)||_inf - eps)`, recomputed from `A` directly.
    pub feasibility_gap: f64,
    /// `|primal - dual|` objective values of the final basis.
    pub duality_gap: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Degenerate pivots tolerated before switching to Bland's rule.
    pub bland_after: usize,
    pub feasibility_tol: f64,
    pub gap_tol: f64,
}

impl SimplexOptions {
    pub fn for_dimension(m: usize) -> Self {
        SimplexOptions {
            max_iterations: 100 * m + 1000,
            bland_after: 50 * m,
            feasibility_tol: 1e-9,
            gap_tol: 1e-7,
        }
    }
}

const PIVOT_TOL: f64 = 1e-9;

/// Solves the Dantzig selector for an arbitrary matrix.
pub fn solve_ds(p: &DsProblem<'_>) -> Result<DsSolution> {
    let gram = p.a.gram();
    solve_ds_with_gram(p, &gram, SimplexOptions::for_dimension(p.a.cols()))
}

/// Same as [`solve_ds`] with a precomputed `A'A`.
pub fn solve_ds_with_gram(p: &DsProblem<'_>, gram: &Mat, opts: SimplexOptions) -> Result<DsSolution> {
    let (n, m) = (p.a.rows(), p.a.cols());
    if p.y.len() != n {
        return Err(Error::contract(format!(
            "observation length {} does not match {n} rows",
            p.y.len()
        )));
    }
    if gram.rows() != m || gram.cols() != m {
        return Err(Error::contract("Gram matrix does not match A"));
    }
    if !(p.eps > 0.0) || !p.eps.is_finite() {
        return Err(Error::contract("Dantzig selector needs eps > 0"));
    }
    let g = p.a.tr_mul_vec(p.y)?;
    let (beta, iterations, duality_gap) = DualSimplex::new(gram, &g, p.eps, opts).run()?;

    let fitted = p.a.mul_vec(&beta)?;
    let resid = numerics::sub(p.y, &fitted);
    let corr = p.a.tr_mul_vec(&resid)?;
    let feasibility_gap = (numerics::norm_inf(&corr) - p.eps).max(0.0);
    Ok(DsSolution {
        objective: beta.iter().map(|b| b.abs()).sum(),
        beta_hat: beta,
        feasibility_gap,
        duality_gap,
        iterations,
    })
}

/// A basic structural column: coefficient `j` entering with sign `sign`
/// (`+1` for the `u` copy, `-1` for the `v` copy).
#[derive(Clone, Copy, Debug, PartialEq)]
struct Column {
    j: usize,
    sign: f64,
}

enum Leaving {
    Structural(usize),
    Slack(usize),
}

#[derive(Clone, Copy)]
enum Entering {
    Structural(Column),
    Slack(usize),
}

struct DualSimplex<'a> {
    gram: &'a Mat,
    g: &'a [f64],
    eps: f64,
    m: usize,
    opts: SimplexOptions,
    basic: Vec<Column>,
    active: Vec<usize>,
}

impl<'a> DualSimplex<'a> {
    fn new(gram: &'a Mat, g: &'a [f64], eps: f64, opts: SimplexOptions) -> Self {
        DualSimplex {
            gram,
            g,
            eps,
            m: g.len(),
            opts,
            basic: Vec::new(),
            active: Vec::new(),
        }
    }

    /// `-1` for the upper-bound rows `0..m`, `+1` for the lower-bound rows `m..2m`.
    #[inline]
    fn row_sign(&self, r: usize) -> f64 {
        if r < self.m {
            -1.0
        } else {
            1.0
        }
    }

    #[inline]
    fn row_coord(&self, r: usize) -> usize {
        r % self.m
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.eps + self.row_sign(r) * self.g[self.row_coord(r)]
    }

    fn basis_matrix(&self) -> Mat {
        let k = self.basic.len();
        let mut b = Mat::zeros(k, k);
        for (p, &r) in self.active.iter().enumerate() {
            let sr = self.row_sign(r);
            let grow = self.gram.row(self.row_coord(r));
            for (q, col) in self.basic.iter().enumerate() {
                b[(p, q)] = sr * col.sign * grow[col.j];
            }
        }
        b
    }

    /// `sum_p coef[p] * row_sign(active[p]) * G[coord(active[p]), :]`.
    fn combine_rows(&self, coef: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (p, &r) in self.active.iter().enumerate() {
            let c = coef[p] * self.row_sign(r);
            if c != 0.0 {
                numerics::axpy(c, self.gram.row(self.row_coord(r)), &mut out);
            }
        }
        out
    }

    fn beta(&self, z: &[f64]) -> Vec<f64> {
        let mut beta = vec![0.0; self.m];
        for (col, &zq) in self.basic.iter().zip(z) {
            beta[col.j] = col.sign * zq.max(0.0);
        }
        beta
    }

    fn run(mut self) -> Result<(Vec<f64>, usize, f64)> {
        let m = self.m;
        let tol = self.opts.feasibility_tol;
        let mut degenerate = 0usize;
        let mut in_basis = vec![0i8; m]; // sign of the basic copy of coefficient j, 0 if none
        let mut is_active = vec![false; 2 * m];

        for iter in 1..=self.opts.max_iterations {
            let k = self.basic.len();
            let bmat = self.basis_matrix();
            let lu = if k > 0 { Some(Lu::factor(&bmat)?) } else { None };
            let rhs_active: Vec<f64> = self.active.iter().map(|&r| self.rhs(r)).collect();
            let z = lu.as_ref().map_or_else(Vec::new, |lu| lu.solve(&rhs_active));
            let ones = vec![1.0; k];
            let dual = lu.as_ref().map_or_else(Vec::new, |lu| lu.solve_transpose(&ones));

            // residual correlation c = g - G beta
            let mut beta_j = vec![0.0; m];
            for (col, &zq) in self.basic.iter().zip(&z) {
                beta_j[col.j] = col.sign * zq;
            }
            let mut corr = self.g.to_vec();
            for col in &self.basic {
                let b = beta_j[col.j];
                if b != 0.0 {
                    numerics::axpy(-b, self.gram.row(col.j), &mut corr);
                }
            }

            let bland = degenerate > self.opts.bland_after;
            let leaving = self.choose_leaving(&z, &corr, &is_active, tol, bland);
            let primal_obj: f64 = z.iter().sum();
            let dual_obj: f64 = dual.iter().zip(&rhs_active).map(|(y, b)| y * b).sum();
            let gap = (primal_obj - dual_obj).abs();

            let Some(leaving) = leaving else {
                let h = self.combine_rows(&dual);
                let dual_infeas = h
                    .iter()
                    .map(|v| v.abs() - 1.0)
                    .chain(dual.iter().copied())
                    .fold(0.0f64, f64::max);
                if gap > self.opts.gap_tol * (1.0 + primal_obj.abs()) || dual_infeas > self.opts.gap_tol {
                    return Err(Error::Convergence {
                        iterations: iter,
                        gap: gap.max(dual_infeas),
                        best: self.beta(&z),
                    });
                }
                return Ok((self.beta(&z), iter, gap));
            };

            // pivot row of the tableau, restricted to the active block
            let rho = match leaving {
                Leaving::Structural(p0) => {
                    let mut e = vec![0.0; k];
                    e[p0] = 1.0;
                    lu.as_ref().expect("structural leaving implies k > 0").solve_transpose(&e)
                }
                Leaving::Slack(q) => {
                    if k == 0 {
                        Vec::new()
                    } else {
                        let sq = self.row_sign(q);
                        let grow = self.gram.row(self.row_coord(q));
                        let rhs: Vec<f64> =
                            self.basic.iter().map(|c| -sq * c.sign * grow[c.j]).collect();
                        lu.as_ref().expect("k > 0").solve_transpose(&rhs)
                    }
                }
            };
            let mut eta = self.combine_rows(&rho);
            if let Leaving::Slack(q) = leaving {
                numerics::axpy(self.row_sign(q), self.gram.row(self.row_coord(q)), &mut eta);
            }
            let h = self.combine_rows(&dual);

            // dual ratio test over non-basic columns
            let mut best: Option<(f64, f64, usize, Entering)> = None; // (ratio, |alpha|, id, col)
            let mut consider = |ratio: f64, alpha_abs: f64, id: usize, e: Entering| {
                let better = match best {
                    None => true,
                    Some((br, ba, bid, _)) => {
                        let scale = 1e-12 * (1.0 + br.abs());
                        if ratio < br - scale {
                            true
                        } else if ratio <= br + scale {
                            if bland {
                                id < bid
                            } else {
                                alpha_abs > ba
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    best = Some((ratio, alpha_abs, id, e));
                }
            };
            for j in 0..m {
                for (sign, id) in [(1.0, j), (-1.0, m + j)] {
                    if in_basis[j] as f64 == sign {
                        continue;
                    }
                    let alpha = sign * eta[j];
                    if alpha < -PIVOT_TOL {
                        let d = (1.0 - sign * h[j]).max(0.0);
                        consider(d / -alpha, -alpha, id, Entering::Structural(Column { j, sign }));
                    }
                }
            }
            for (p, &r) in self.active.iter().enumerate() {
                let alpha = rho[p];
                if alpha < -PIVOT_TOL {
                    let d = (-dual[p]).max(0.0);
                    consider(d / -alpha, -alpha, 2 * m + r, Entering::Slack(p));
                }
            }
            let Some((ratio, _, _, entering)) = best else {
                return Err(Error::Infeasible(
                    "dual simplex found no entering column for an infeasible row".into(),
                ));
            };
            if ratio <= 1e-12 {
                degenerate += 1;
            }

            match (leaving, entering) {
                (Leaving::Structural(p0), Entering::Structural(col)) => {
                    in_basis[self.basic[p0].j] = 0;
                    self.basic[p0] = col;
                    in_basis[col.j] = col.sign as i8;
                }
                (Leaving::Slack(q), Entering::Structural(col)) => {
                    self.basic.push(col);
                    in_basis[col.j] = col.sign as i8;
                    self.active.push(q);
                    is_active[q] = true;
                }
                (Leaving::Structural(p0), Entering::Slack(pa)) => {
                    in_basis[self.basic[p0].j] = 0;
                    self.basic.swap_remove(p0);
                    is_active[self.active[pa]] = false;
                    self.active.swap_remove(pa);
                }
                (Leaving::Slack(q), Entering::Slack(pa)) => {
                    is_active[self.active[pa]] = false;
                    self.active[pa] = q;
                    is_active[q] = true;
                }
            }
        }

        // iteration budget exhausted: report the last basis
        let k = self.basic.len();
        let z = if k > 0 {
            let lu = Lu::factor(&self.basis_matrix())?;
            let rhs: Vec<f64> = self.active.iter().map(|&r| self.rhs(r)).collect();
            lu.solve(&rhs)
        } else {
            Vec::new()
        };
        Err(Error::Convergence {
            iterations: self.opts.max_iterations,
            gap: f64::NAN,
            best: self.beta(&z),
        })
    }

    fn choose_leaving(
        &self,
        z: &[f64],
        corr: &[f64],
        is_active: &[bool],
        tol: f64,
        bland: bool,
    ) -> Option<Leaving> {
        let m = self.m;
        // (violation, variable id, leaving)
        let mut best: Option<(f64, usize, Leaving)> = None;
        let mut consider = |viol: f64, id: usize, l: Leaving| {
            if viol <= tol {
                return;
            }
            let better = match &best {
                None => true,
                Some((bv, bid, _)) => {
                    if bland {
                        id < *bid
                    } else {
                        viol > *bv
                    }
                }
            };
            if better {
                best = Some((viol, id, l));
            }
        };
        for (p, (&zq, col)) in z.iter().zip(&self.basic).enumerate() {
            let id = if col.sign > 0.0 { col.j } else { m + col.j };
            consider(-zq, id, Leaving::Structural(p));
        }
        for i in 0..m {
            // upper row i: slack = eps - corr_i ; lower row m+i: slack = eps + corr_i
            if !is_active[i] {
                consider(corr[i] - self.eps, 2 * m + i, Leaving::Slack(i));
            }
            if !is_active[m + i] {
                consider(-corr[i] - self.eps, 3 * m + i, Leaving::Slack(m + i));
            }
        }
        best.map(|(_, _, l)| l)
    }
}

/// Indices outside `t_prev` whose squared estimate exceeds `alpha_a`, keeping
/// at most `max_add` of the largest magnitudes (ties toward the lower index).
pub fn threshold_additions(beta_hat: &[f64], t_prev: &IndexSet, alpha_a: f64, max_add: usize) -> IndexSet {
    let mut cand: Vec<usize> = (0..beta_hat.len())
        .filter(|&i| !t_prev.contains(i) && beta_hat[i] * beta_hat[i] > alpha_a)
        .collect();
    cand.sort_by(|&a, &b| beta_hat[b].abs().total_cmp(&beta_hat[a].abs()).then(a.cmp(&b)));
    cand.truncate(max_add);
    IndexSet::from_unsorted(cand)
}

/// Default cap on additions per step: `floor(1.25 n / log2 m)`.
pub fn default_max_add(n: usize, m: usize) -> usize {
    (1.25 * n as f64 / (m as f64).log2()).floor() as usize
}

/// Dantzig selector, thresholding at `alpha`, then least squares on the kept support.
pub fn gauss_dantzig(p: &DsProblem<'_>, alpha: f64) -> Result<(IndexSet, Vec<f64>)> {
    let gram = p.a.gram();
    gauss_dantzig_with_gram(p, &gram, alpha)
}

pub fn gauss_dantzig_with_gram(p: &DsProblem<'_>, gram: &Mat, alpha: f64) -> Result<(IndexSet, Vec<f64>)> {
    let m = p.a.cols();
    let sol = solve_ds_with_gram(p, gram, SimplexOptions::for_dimension(m))?;
    let beta = &sol.beta_hat;
    let mut order: Vec<usize> = (0..m).filter(|&i| beta[i] * beta[i] > alpha).collect();
    order.sort_by(|&a, &b| beta[b].abs().total_cmp(&beta[a].abs()).then(a.cmp(&b)));
    order.truncate(p.a.rows());
    loop {
        let support = IndexSet::from_unsorted(order.iter().copied());
        let a_s = numerics::columns(p.a, &support)?;
        match numerics::least_squares(&a_s, p.y) {
            Ok(coef) => return Ok((support.clone(), support.scatter(&coef, m))),
            Err(Error::Singular { .. }) if !order.is_empty() => {
                order.pop();
            }
            Err(e) => return Err(e),
        }
    }
}
