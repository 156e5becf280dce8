//! Small dense semidefinite-program solver for linear-matrix-inequality
//! problems: minimize a linear objective subject to affine Hermitian
//! constraints `F0 + sum_i x_i F_i <= 0` plus optional per-variable lower
//! bounds.
//!
//! The algorithm is a logarithmic-barrier interior-point method with damped
//! Newton centering and a phase-1 feasibility stage (minimize the maximum
//! block eigenvalue shifted by an auxiliary variable). Complex blocks are
//! realified before solving so one real solver serves all LMIs. Strict
//! inequalities are approximated by a margin scaled to each block's norm.

use std::fmt::Write as _;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::numerics::{jacobi_eig_sym, realify, HermitianMatrix, RealSymMatrix};

/// One LMI block: `F0 + sum_i x_i F_i <= 0`.
#[derive(Debug, Clone)]
pub struct LmiBlock {
    pub f0: HermitianMatrix,
    /// Per-variable coefficient matrices, all of the block's dimension.
    pub coeffs: Vec<HermitianMatrix>,
}

impl LmiBlock {
    pub fn dim(&self) -> usize {
        self.f0.dim()
    }
}

#[derive(Debug, Clone)]
pub struct LmiProblem {
    pub num_vars: usize,
    /// Minimize `objective . x`.
    pub objective: Vec<f64>,
    pub blocks: Vec<LmiBlock>,
    /// Optional per-variable lower bounds (`xi >= 0`, multiplier positivity).
    pub lower_bounds: Vec<Option<f64>>,
}

impl LmiProblem {
    pub fn new(num_vars: usize) -> Self {
        LmiProblem {
            num_vars,
            objective: vec![0.0; num_vars],
            blocks: Vec::new(),
            lower_bounds: vec![None; num_vars],
        }
    }

    pub fn add_block(&mut self, block: LmiBlock) -> Result<()> {
        if block.coeffs.len() != self.num_vars {
            return Err(Error::Dimension(format!(
                "block has {} coefficient matrices, problem has {} variables",
                block.coeffs.len(),
                self.num_vars
            )));
        }
        let d = block.dim();
        for (i, c) in block.coeffs.iter().enumerate() {
            if c.dim() != d {
                return Err(Error::Dimension(format!(
                    "coefficient {} has dimension {}, block has {}",
                    i,
                    c.dim(),
                    d
                )));
            }
        }
        self.blocks.push(block);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.num_vars {
            return Err(Error::Dimension(
                "objective length differs from variable count".into(),
            ));
        }
        if self.lower_bounds.len() != self.num_vars {
            return Err(Error::Dimension(
                "lower-bound list length differs from variable count".into(),
            ));
        }
        if self.blocks.is_empty() {
            return Err(Error::InvalidArgument("problem has no LMI blocks".into()));
        }
        Ok(())
    }

    /// Dump dimensions and dense per-block matrices in row-major decimal,
    /// for cross-checking against external solvers.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "lmi_problem");
        let _ = writeln!(out, "num_vars {}", self.num_vars);
        let _ = writeln!(
            out,
            "objective {}",
            self.objective
                .iter()
                .map(|v| format!("{v:.17e}"))
                .collect::<Vec<_>>()
                .join(" ")
        );
        for (i, lb) in self.lower_bounds.iter().enumerate() {
            if let Some(l) = lb {
                let _ = writeln!(out, "lower_bound {i} {l:.17e}");
            }
        }
        for (b, block) in self.blocks.iter().enumerate() {
            let d = block.dim();
            let _ = writeln!(out, "block {b} dim {d}");
            let mut write_matrix = |label: &str, m: &HermitianMatrix| {
                let _ = writeln!(out, "{label}");
                for i in 0..d {
                    let row = (0..d)
                        .map(|j| {
                            let e = m.get(i, j);
                            format!("{:.17e}{:+.17e}i", e.re, e.im)
                        })
                        .collect::<Vec<_>>()
                        .join(" ");
                    let _ = writeln!(out, "{row}");
                }
            };
            write_matrix("f0", &block.f0);
            for (i, c) in block.coeffs.iter().enumerate() {
                write_matrix(&format!("f{}", i + 1), c);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Max over blocks of the top eigenvalue of `F0 + sum x_i F_i`
    /// (negative values mean strict feasibility).
    pub worst_residual: f64,
    pub iterations: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Feasibility tolerance, relative to `1 + ||F0||` per block.
    pub feas_tol: f64,
    /// Relative surrogate-gap stopping tolerance.
    pub gap_tol: f64,
    /// Barrier parameter reduction factor per outer stage.
    pub barrier_reduction: f64,
    /// Newton-step cap per centering stage.
    pub max_newton_per_stage: usize,
    /// Outer stage cap.
    pub max_outer: usize,
    /// Strictness margin scale: per block, `F(x) <= -margin*(1+||F0||) I`.
    pub margin: f64,
    /// Synthetic box half-width keeping the barrier domain bounded.
    pub var_bound: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            barrier_reduction: 10.0,
            max_newton_per_stage: 200,
            max_outer: 60,
            margin: 1e-9,
            var_bound: 1e9,
        }
    }
}

/// Realified internal form of the problem; all blocks real symmetric.
struct RealProblem {
    nvars: usize,
    objective: Vec<f64>,
    blocks: Vec<RealBlock>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// True where the bound comes from the user, not the synthetic box.
    user_lower: Vec<bool>,
    barrier_degree: f64,
}

struct RealBlock {
    dim: usize,
    /// F0 with the strictness margin already folded in.
    f0: RealSymMatrix,
    coeffs: Vec<RealSymMatrix>,
}

impl RealBlock {
    /// S(x) = -(F0 + sum x_i F_i); the barrier needs S(x) > 0.
    fn slack(&self, x: &[f64]) -> RealSymMatrix {
        let n = self.dim;
        let mut s = RealSymMatrix::zeros(n);
        for idx in 0..n * n {
            s.data[idx] = -self.f0.data[idx];
        }
        for (i, c) in self.coeffs.iter().enumerate() {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for idx in 0..n * n {
                s.data[idx] -= xi * c.data[idx];
            }
        }
        s
    }
}

fn realify_problem(problem: &LmiProblem, opts: &SolverOptions) -> RealProblem {
    let nvars = problem.num_vars;
    let mut blocks = Vec::with_capacity(problem.blocks.len());
    let mut degree = 0.0;
    for b in &problem.blocks {
        let eps = opts.margin * (1.0 + b.f0.frobenius_norm());
        let mut f0 = realify(&b.f0);
        for i in 0..f0.n {
            let v = f0.get(i, i) + eps;
            f0.set(i, i, v);
        }
        let coeffs: Vec<RealSymMatrix> = b.coeffs.iter().map(realify).collect();
        degree += f0.n as f64;
        blocks.push(RealBlock {
            dim: f0.n,
            f0,
            coeffs,
        });
    }
    let mut lower = Vec::with_capacity(nvars);
    let mut user_lower = Vec::with_capacity(nvars);
    for lb in &problem.lower_bounds {
        match lb {
            Some(l) => {
                lower.push(*l);
                user_lower.push(true);
            }
            None => {
                lower.push(-opts.var_bound);
                user_lower.push(false);
            }
        }
    }
    let upper = vec![opts.var_bound; nvars];
    degree += 2.0 * nvars as f64;
    RealProblem {
        nvars,
        objective: problem.objective.clone(),
        blocks,
        lower,
        upper,
        user_lower,
        barrier_degree: degree,
    }
}

/// Cholesky with a small adaptive ridge; returns the factor of `m + sigma I`.
fn robust_cholesky(m: &RealSymMatrix) -> Vec<f64> {
    let n = m.n;
    let mut sigma = 0.0f64;
    let base = m.data.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    loop {
        let mut shifted = m.clone();
        if sigma > 0.0 {
            for i in 0..n {
                let v = shifted.get(i, i) + sigma;
                shifted.set(i, i, v);
            }
        }
        match shifted.cholesky() {
            Ok(l) => return l,
            Err(_) => {
                sigma = if sigma == 0.0 { 1e-14 * base } else { sigma * 100.0 };
                assert!(
                    sigma.is_finite() && sigma < 1e60 * base,
                    "Newton system irreparably indefinite"
                );
            }
        }
    }
}

/// State for one barrier evaluation: factors of the slack matrices.
struct BarrierEval {
    value: f64,
    feasible: bool,
}

fn eval_barrier(rp: &RealProblem, x: &[f64]) -> BarrierEval {
    let mut value = 0.0;
    for b in &rp.blocks {
        let s = b.slack(x);
        match s.cholesky() {
            Ok(l) => {
                let n = b.dim;
                let mut logdet = 0.0;
                for i in 0..n {
                    logdet += l[i * n + i].ln();
                }
                value -= 2.0 * logdet;
            }
            Err(_) => {
                return BarrierEval {
                    value: f64::INFINITY,
                    feasible: false,
                }
            }
        }
    }
    for i in 0..rp.nvars {
        let lo = x[i] - rp.lower[i];
        let hi = rp.upper[i] - x[i];
        if lo <= 0.0 || hi <= 0.0 {
            return BarrierEval {
                value: f64::INFINITY,
                feasible: false,
            };
        }
        value -= lo.ln() + hi.ln();
    }
    BarrierEval {
        value,
        feasible: true,
    }
}

/// Gradient and Hessian of `t*c.x + barrier(x)`.
fn grad_hess(rp: &RealProblem, x: &[f64], t: f64) -> Option<(Vec<f64>, RealSymMatrix)> {
    let nv = rp.nvars;
    let mut g = vec![0.0; nv];
    for i in 0..nv {
        g[i] = t * rp.objective[i];
    }
    let mut h = RealSymMatrix::zeros(nv);
    for b in &rp.blocks {
        let n = b.dim;
        let s = b.slack(x);
        let l = s.cholesky().ok()?;
        // W_i = L^-1 F_i L^-T for each variable.
        let mut ws: Vec<Vec<f64>> = Vec::with_capacity(nv);
        for c in &b.coeffs {
            // Solve L Y = F_i  (column blocks), then W L^T = Y i.e. W = Y L^-T.
            let mut y = c.data.clone();
            // forward solve on each column: L y_col = f_col
            for col in 0..n {
                for i in 0..n {
                    let mut v = y[i * n + col];
                    for k in 0..i {
                        v -= l[i * n + k] * y[k * n + col];
                    }
                    y[i * n + col] = v / l[i * n + i];
                }
            }
            // Now solve W L^T = Y  row-wise: for each row r of W: L w_r = y_r.
            let mut w = vec![0.0; n * n];
            for row in 0..n {
                for i in 0..n {
                    let mut v = y[row * n + i];
                    for k in 0..i {
                        v -= l[i * n + k] * w[row * n + k];
                    }
                    w[row * n + i] = v / l[i * n + i];
                }
            }
            ws.push(w);
        }
        for i in 0..nv {
            let mut tr = 0.0;
            for d in 0..n {
                tr += ws[i][d * n + d];
            }
            g[i] += tr;
            for j in i..nv {
                let mut dot = 0.0;
                for idx in 0..n * n {
                    dot += ws[i][idx] * ws[j][idx];
                }
                let v = h.get(i, j) + dot;
                h.set(i, j, v);
                if i != j {
                    h.set(j, i, v);
                }
            }
        }
    }
    for i in 0..nv {
        let lo = x[i] - rp.lower[i];
        let hi = rp.upper[i] - x[i];
        g[i] += -1.0 / lo + 1.0 / hi;
        let v = h.get(i, i) + 1.0 / (lo * lo) + 1.0 / (hi * hi);
        h.set(i, i, v);
    }
    Some((g, h))
}

fn solve_newton_system(h: &RealSymMatrix, g: &[f64]) -> Vec<f64> {
    let n = h.n;
    let l = robust_cholesky(h);
    // Solve L L^T d = -g.
    let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
    for i in 0..n {
        let mut v = d[i];
        for k in 0..i {
            v -= l[i * n + k] * d[k];
        }
        d[i] = v / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut v = d[i];
        for k in (i + 1)..n {
            v -= l[k * n + i] * d[k];
        }
        d[i] = v / l[i * n + i];
    }
    d
}

/// Damped-Newton centering of `t*c.x + barrier` from a strictly feasible x.
/// Returns the Newton step count; `x` is updated in place. When `early_stop`
/// fires on an accepted iterate the stage ends immediately.
fn center(
    rp: &RealProblem,
    x: &mut Vec<f64>,
    t: f64,
    opts: &SolverOptions,
    early_stop: Option<&dyn Fn(&[f64]) -> bool>,
) -> usize {
    let mut steps = 0;
    for _ in 0..opts.max_newton_per_stage {
        let Some((g, h)) = grad_hess(rp, x, t) else {
            break;
        };
        let d = solve_newton_system(&h, &g);
        let lambda2: f64 = -g.iter().zip(&d).map(|(gi, di)| gi * di).sum::<f64>();
        if !lambda2.is_finite() {
            break;
        }
        if lambda2 <= 1e-10 {
            break;
        }
        let lambda = lambda2.max(0.0).sqrt();
        let mut alpha = if lambda > 0.25 { 1.0 / (1.0 + lambda) } else { 1.0 };
        let obj0 = t * dot(&rp.objective, x) + eval_barrier(rp, x).value;
        let slope: f64 = g.iter().zip(&d).map(|(gi, di)| gi * di).sum();
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            let be = eval_barrier(rp, &trial);
            if be.feasible {
                let obj1 = t * dot(&rp.objective, &trial) + be.value;
                if obj1 <= obj0 + 0.01 * alpha * slope {
                    *x = trial;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        steps += 1;
        if !accepted {
            break;
        }
        if let Some(stop) = early_stop {
            if stop(x) {
                break;
            }
        }
        if lambda < 0.1 {
            break;
        }
    }
    steps
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Max over blocks of the top eigenvalue of `F(x)` (margin not included).
fn worst_residual(problem: &LmiProblem, x: &[f64]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for b in &problem.blocks {
        let mut acc = b.f0.matrix().clone();
        for (i, c) in b.coeffs.iter().enumerate() {
            acc = acc.add(&c.matrix().scale(num_complex::Complex64::new(x[i], 0.0)));
        }
        let h = HermitianMatrix::symmetrize(acc).expect("affine Hermitian combination");
        let r = realify(&h);
        let (vals, _) = jacobi_eig_sym(&r);
        worst = worst.max(*vals.last().expect("nonempty spectrum"));
    }
    worst
}

/// Max over realified margin-shifted blocks of the top eigenvalue; used by
/// phase 1 (strict feasibility means this is negative).
fn shifted_worst_eig(rp: &RealProblem, x: &[f64]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for b in &rp.blocks {
        let s = b.slack(x);
        // max eig of F~(x) = -min eig of S(x)
        let (vals, _) = jacobi_eig_sym(&s);
        worst = worst.max(-vals[0]);
    }
    worst
}

/// Phase 1: minimize the auxiliary shift `s` with `F(x) <= s I` until a
/// strictly feasible x is found or infeasibility is concluded.
fn phase1(rp: &RealProblem, opts: &SolverOptions) -> (Option<Vec<f64>>, usize) {
    let nv = rp.nvars;
    let mut x0 = vec![0.0; nv];
    for i in 0..nv {
        let lo = rp.lower[i];
        let hi = rp.upper[i];
        let candidate = if rp.user_lower[i] { lo + 1.0 } else { 0.0 };
        x0[i] = candidate.clamp(lo + 1e-6 * (1.0 + lo.abs()), hi - 1e-6 * (1.0 + hi.abs()));
    }
    let s0 = shifted_worst_eig(rp, &x0);
    if s0 < 0.0 {
        return (Some(x0), 0);
    }
    // Augmented problem: variables (x, s); every block gains -s I.
    let mut blocks = Vec::with_capacity(rp.blocks.len());
    for b in &rp.blocks {
        let mut coeffs: Vec<RealSymMatrix> = b.coeffs.clone();
        let mut eye = RealSymMatrix::zeros(b.dim);
        for i in 0..b.dim {
            eye.set(i, i, -1.0);
        }
        coeffs.push(eye);
        blocks.push(RealBlock {
            dim: b.dim,
            f0: b.f0.clone(),
            coeffs,
        });
    }
    let mut objective = vec![0.0; nv + 1];
    objective[nv] = 1.0;
    let mut lower = rp.lower.clone();
    let mut upper = rp.upper.clone();
    let s_cap = (s0 + 1.0) * 2.0 + 1.0;
    lower.push(-opts.var_bound);
    upper.push(s_cap.max(1.0) * 2.0);
    let mut user_lower = rp.user_lower.clone();
    user_lower.push(false);
    let aug = RealProblem {
        nvars: nv + 1,
        objective,
        blocks,
        lower,
        upper,
        user_lower,
        barrier_degree: rp.barrier_degree + 2.0,
    };
    let mut xs = x0;
    xs.push(s0 + 1.0);
    let mut t = (aug.barrier_degree / (1.0 + xs[nv].abs())).max(1.0);
    let mut total_steps = 0usize;
    // Leave as soon as the x-part goes strictly feasible; lingering in the
    // phase-1 problem lets unconstrained coordinates drift toward the
    // analytic center of the synthetic box.
    let feasible_now = |p: &[f64]| shifted_worst_eig(rp, &p[..nv]) < 0.0;
    for _ in 0..opts.max_outer {
        total_steps += center(&aug, &mut xs, t, opts, Some(&feasible_now));
        let x_part = &xs[..nv];
        if shifted_worst_eig(rp, x_part) < 0.0 {
            return (Some(x_part.to_vec()), total_steps);
        }
        let gap = aug.barrier_degree / t;
        if gap <= opts.gap_tol * (1.0 + xs[nv].abs()) && xs[nv] >= 0.0 {
            // Converged with a nonnegative shift: no strictly feasible point.
            return (None, total_steps);
        }
        t *= opts.barrier_reduction;
    }
    (None, total_steps)
}

/// Solve the LMI problem.
pub fn solve(problem: &LmiProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    problem.validate()?;
    let start = Instant::now();
    let rp = realify_problem(problem, opts);

    let (feas, p1_steps) = phase1(&rp, opts);
    let Some(mut x) = feas else {
        return Ok(SdpSolution {
            status: SdpStatus::Infeasible,
            x: vec![0.0; problem.num_vars],
            objective: f64::NAN,
            worst_residual: f64::NAN,
            iterations: p1_steps,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    };

    let mut total_steps = p1_steps;
    let c_is_zero = rp.objective.iter().all(|&v| v == 0.0);
    let mut status = SdpStatus::MaxIterations;
    if c_is_zero {
        status = SdpStatus::Optimal;
    } else {
        // Balance the barrier against the objective at the starting point so
        // the first stages do not wander toward the analytic center.
        let obj0 = dot(&rp.objective, &x);
        let mut t = (rp.barrier_degree / (1.0 + obj0.abs())).max(1.0);
        for _ in 0..opts.max_outer {
            total_steps += center(&rp, &mut x, t, opts, None);
            let obj = dot(&rp.objective, &x);
            let gap = rp.barrier_degree / t;
            if gap <= opts.gap_tol * (1.0 + obj.abs()) {
                status = SdpStatus::Optimal;
                break;
            }
            t *= opts.barrier_reduction;
        }
        // An optimizer pinned against the synthetic box along a direction that
        // improves the objective means the true problem is unbounded below.
        if status == SdpStatus::Optimal {
            for i in 0..rp.nvars {
                let at_lower = !rp.user_lower[i]
                    && (x[i] - rp.lower[i]).abs() < 1e-3 * opts.var_bound
                    && rp.objective[i] > 0.0;
                let at_upper =
                    (rp.upper[i] - x[i]).abs() < 1e-3 * opts.var_bound && rp.objective[i] < 0.0;
                if at_lower || at_upper {
                    status = SdpStatus::Unbounded;
                }
            }
        }
    }

    let objective = dot(&problem.objective, &x);
    let residual = worst_residual(problem, &x);
    Ok(SdpSolution {
        status,
        x,
        objective,
        worst_residual: residual,
        iterations: total_steps,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Residual report for a candidate point.
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    /// Top eigenvalue of `F(x)` per block.
    pub block_residuals: Vec<f64>,
    /// Largest lower-bound violation (0 when none).
    pub box_violation: f64,
    pub feasible: bool,
}

/// Exact residuals of `x` against the problem. A point declared feasible by
/// `solve` passes with the solver's own tolerance.
pub fn check_feasibility(
    problem: &LmiProblem,
    x: &[f64],
    opts: &SolverOptions,
) -> Result<FeasibilityReport> {
    if x.len() != problem.num_vars {
        return Err(Error::Dimension(format!(
            "candidate has {} entries, problem has {} variables",
            x.len(),
            problem.num_vars
        )));
    }
    let mut block_residuals = Vec::with_capacity(problem.blocks.len());
    let mut feasible = true;
    for b in &problem.blocks {
        let mut acc = b.f0.matrix().clone();
        for (i, coeff) in b.coeffs.iter().enumerate() {
            acc = acc.add(&coeff.matrix().scale(num_complex::Complex64::new(x[i], 0.0)));
        }
        let h = HermitianMatrix::symmetrize(acc)?;
        let r = realify(&h);
        let (vals, _) = jacobi_eig_sym(&r);
        let top = *vals.last().expect("nonempty spectrum");
        if top > opts.feas_tol * (1.0 + b.f0.frobenius_norm()) {
            feasible = false;
        }
        block_residuals.push(top);
    }
    let mut box_violation = 0.0f64;
    for (i, lb) in problem.lower_bounds.iter().enumerate() {
        if let Some(l) = lb {
            box_violation = box_violation.max(l - x[i]);
        }
    }
    if box_violation > opts.feas_tol {
        feasible = false;
    }
    Ok(FeasibilityReport {
        block_residuals,
        box_violation,
        feasible,
    })
}

/// Bisection on a monotone feasibility predicate: returns a value within
/// `tol` of the infimum of the feasible set inside `[lo, hi]`.
pub fn minimize_scalar_by_bisection(
    mut feasible_at: impl FnMut(f64) -> bool,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64> {
    if !(hi > lo) || tol <= 0.0 {
        return Err(Error::InvalidArgument(
            "bisection needs hi > lo and tol > 0".into(),
        ));
    }
    if !feasible_at(hi) {
        return Err(Error::Infeasible(format!(
            "predicate infeasible at interval top {hi}"
        )));
    }
    if feasible_at(lo) {
        return Ok(lo);
    }
    let mut a = lo;
    let mut b = hi;
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if feasible_at(mid) {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ComplexMatrix;
    use approx::assert_abs_diff_eq;

    fn herm_real(n: usize, entries: &[f64]) -> HermitianMatrix {
        HermitianMatrix::new(ComplexMatrix::from_real(n, n, entries).unwrap()).unwrap()
    }

    /// minimize t s.t. [[t,1],[1,t]] >= 0, encoded as -M <= 0. Optimum 1.
    fn toy_problem() -> LmiProblem {
        let mut p = LmiProblem::new(1);
        p.objective = vec![1.0];
        let f0 = herm_real(2, &[0.0, -1.0, -1.0, 0.0]);
        let ft = herm_real(2, &[-1.0, 0.0, 0.0, -1.0]);
        p.add_block(LmiBlock {
            f0,
            coeffs: vec![ft],
        })
        .unwrap();
        p
    }

    #[test]
    fn solve_t_geq_one() {
        let p = toy_problem();
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, 1.0, epsilon = 1e-6);
        assert!(sol.worst_residual <= 1e-8);
    }

    #[test]
    fn solve_max_eigenvalue() {
        // minimize t s.t. t I - diag(1,2,3) >= 0  ->  t = 3.
        let mut p = LmiProblem::new(1);
        p.objective = vec![1.0];
        let f0 = herm_real(3, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0]);
        let ft = herm_real(3, &[-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0]);
        p.add_block(LmiBlock {
            f0,
            coeffs: vec![ft],
        })
        .unwrap();
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, 3.0, epsilon = 1e-6);
    }

    /// minimize x1+x2 s.t. [[x1, 1/2],[1/2, x2]] >= 0; optimum 1 at (0.5, 0.5).
    /// The expected value is confirmed by brute-force grid refinement.
    #[test]
    fn solve_trace_problem_with_grid_oracle() {
        let mut p = LmiProblem::new(2);
        p.objective = vec![1.0, 1.0];
        let f0 = herm_real(2, &[0.0, -0.5, -0.5, 0.0]);
        let f1 = herm_real(2, &[-1.0, 0.0, 0.0, 0.0]);
        let f2 = herm_real(2, &[0.0, 0.0, 0.0, -1.0]);
        p.add_block(LmiBlock {
            f0,
            coeffs: vec![f1, f2],
        })
        .unwrap();
        let sol = solve(&p, &SolverOptions::default()).unwrap();

        // Brute-force refinement oracle: 2-D grid over [0, 2]^2, refined 12 times.
        let feas = |x1: f64, x2: f64| x1 >= 0.0 && x2 >= 0.0 && x1 * x2 >= 0.25;
        let mut best = f64::INFINITY;
        let (mut c1, mut c2, mut half) = (1.0, 1.0, 1.0);
        for _ in 0..12 {
            let mut arg = (c1, c2);
            for i in 0..41 {
                for j in 0..41 {
                    let x1 = c1 - half + 2.0 * half * (i as f64) / 40.0;
                    let x2 = c2 - half + 2.0 * half * (j as f64) / 40.0;
                    if feas(x1, x2) && x1 + x2 < best {
                        best = x1 + x2;
                        arg = (x1, x2);
                    }
                }
            }
            c1 = arg.0;
            c2 = arg.1;
            half *= 0.1;
        }
        assert_abs_diff_eq!(best, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.objective, best, epsilon = 1e-5);
    }

    #[test]
    fn feasibility_check_examples() {
        let p = toy_problem();
        let opts = SolverOptions::default();
        let rep = check_feasibility(&p, &[2.0], &opts).unwrap();
        assert!(rep.feasible);
        assert!(rep.block_residuals[0] <= 0.0);
        let rep = check_feasibility(&p, &[0.0], &opts).unwrap();
        assert!(!rep.feasible);
        assert_abs_diff_eq!(rep.block_residuals[0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn optimal_solutions_pass_feasibility() {
        let p = toy_problem();
        let opts = SolverOptions::default();
        let sol = solve(&p, &opts).unwrap();
        let rep = check_feasibility(&p, &sol.x, &opts).unwrap();
        assert!(rep.feasible);
    }

    #[test]
    fn infeasible_detected() {
        // [[ -1, 2],[2, -1]] + x*0 <= 0 has top eigenvalue 1 regardless of x.
        let mut p = LmiProblem::new(1);
        p.objective = vec![1.0];
        let f0 = herm_real(2, &[-1.0, 2.0, 2.0, -1.0]);
        let zero = herm_real(2, &[0.0; 4]);
        p.add_block(LmiBlock {
            f0,
            coeffs: vec![zero],
        })
        .unwrap();
        // Keep x bounded so only the block matters.
        p.lower_bounds = vec![Some(0.0)];
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        // minimize x with only the trivial block: unbounded below.
        let mut p = LmiProblem::new(1);
        p.objective = vec![1.0];
        let f0 = herm_real(1, &[-1.0]);
        let zero = herm_real(1, &[0.0]);
        p.add_block(LmiBlock {
            f0,
            coeffs: vec![zero],
        })
        .unwrap();
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Unbounded);
    }

    #[test]
    fn monotone_under_added_variable() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..6 {
            let base = toy_problem();
            let opts = SolverOptions::default();
            let sol0 = solve(&base, &opts).unwrap();
            let mut aug = base.clone();
            aug.num_vars = 2;
            aug.objective.push(0.0);
            aug.lower_bounds.push(None);
            let mut extra = ComplexMatrix::zeros(2, 2);
            let a = rng.random_range(-1.0..1.0);
            let b = rng.random_range(-1.0..1.0);
            let d = rng.random_range(-1.0..1.0);
            extra.set(0, 0, num_complex::Complex64::new(a, 0.0));
            extra.set(0, 1, num_complex::Complex64::new(b, 0.0));
            extra.set(1, 0, num_complex::Complex64::new(b, 0.0));
            extra.set(1, 1, num_complex::Complex64::new(d, 0.0));
            aug.blocks[0]
                .coeffs
                .push(HermitianMatrix::new(extra).unwrap());
            let sol1 = solve(&aug, &opts).unwrap();
            assert!(
                sol1.objective <= sol0.objective + 1e-7 * (1.0 + sol0.objective.abs()),
                "augmented optimum {} exceeds base {}",
                sol1.objective,
                sol0.objective
            );
        }
    }

    #[test]
    fn scaling_invariance() {
        let p = toy_problem();
        let opts = SolverOptions::default();
        let sol0 = solve(&p, &opts).unwrap();
        let mut scaled = p.clone();
        scaled.objective = vec![10.0];
        for b in &mut scaled.blocks {
            b.f0 = b.f0.scale(10.0);
            for c in &mut b.coeffs {
                *c = c.scale(10.0);
            }
        }
        let sol1 = solve(&scaled, &opts).unwrap();
        assert_abs_diff_eq!(
            sol1.objective,
            10.0 * sol0.objective,
            epsilon = 1e-7 * (1.0 + 10.0 * sol0.objective.abs())
        );
    }

    #[test]
    fn deterministic_resolve() {
        let p = toy_problem();
        let opts = SolverOptions::default();
        let a = solve(&p, &opts).unwrap();
        let b = solve(&p, &opts).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn bisection_examples() {
        let v = minimize_scalar_by_bisection(|g| g >= 4.0, 0.0, 100.0, 1e-6).unwrap();
        assert_abs_diff_eq!(v, 4.0, epsilon = 1e-5);
        let v = minimize_scalar_by_bisection(|_| true, 3.0, 100.0, 1e-6).unwrap();
        assert_abs_diff_eq!(v, 3.0, epsilon = 1e-12);
        assert!(minimize_scalar_by_bisection(|_| false, 0.0, 1.0, 1e-6).is_err());
    }

    #[test]
    fn dump_roundtrips_dimensions() {
        let p = toy_problem();
        let text = p.dump();
        assert!(text.contains("num_vars 1"));
        assert!(text.contains("block 0 dim 2"));
    }
}
