//! Dense two-phase primal simplex and bipartite matching.
//!
//! Problems are in standard equality form: minimize `cᵀu` subject to
//! `E u = e`, `u ≥ 0`. Pivoting follows Bland's rule, so the method cannot
//! cycle. Sizes stay small (a few thousand variables at most), so the tableau
//! is kept dense.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const PIVOT_TOL: f64 = 1e-10;
pub const FEASIBILITY_REL_TOL: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    eq: Matrix,
    rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, eq: Matrix, rhs: Vec<f64>) -> Result<Self> {
        if eq.rows() != rhs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} constraint rows but {} right-hand sides",
                eq.rows(),
                rhs.len()
            )));
        }
        if eq.rows() > 0 && eq.cols() != objective.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} constraint columns but {} objective coefficients",
                eq.cols(),
                objective.len()
            )));
        }
        if !eq.is_finite() || objective.iter().chain(&rhs).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear program data".into()));
        }
        Ok(Self { objective, eq, rhs })
    }

    /// Pure feasibility problem (zero objective).
    pub fn feasibility(eq: Matrix, rhs: Vec<f64>) -> Result<Self> {
        let n = eq.cols();
        Self::new(vec![0.0; n], eq, rhs)
    }

    pub fn variables(&self) -> usize {
        self.objective.len()
    }

    pub fn constraints(&self) -> usize {
        self.rhs.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn eq(&self) -> &Matrix {
        &self.eq
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Max violation of `E u = e` and of `u ≥ 0`, computed from the original data.
    pub fn residuals(&self, u: &[f64]) -> (f64, f64) {
        let eq_res = (0..self.eq.rows())
            .map(|i| {
                let lhs: f64 = self.eq.row(i).iter().zip(u).map(|(a, x)| a * x).sum();
                (lhs - self.rhs[i]).abs()
            })
            .fold(0.0, f64::max);
        let neg = u.iter().fold(0.0_f64, |m, &x| m.max(-x));
        (eq_res, neg)
    }

    fn rhs_scale(&self) -> f64 {
        self.rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub solution: Vec<f64>,
    pub objective_value: f64,
    /// Phase-1 optimum (sum of artificial variables).
    pub infeasibility: f64,
    pub iterations: usize,
}

struct Tableau {
    /// `rows × (cols + 1)`; the last column is the right-hand side.
    t: Matrix,
    basis: Vec<usize>,
    /// Reduced-cost row, same width as `t`.
    cost: Vec<f64>,
    iterations: usize,
}

impl Tableau {
    fn width(&self) -> usize {
        self.t.cols() - 1
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.t.cols();
        let p = self.t[(r, c)];
        for j in 0..w {
            self.t[(r, j)] /= p;
        }
        let pivot_row = self.t.row(r).to_vec();
        for i in 0..self.t.rows() {
            if i == r {
                continue;
            }
            let f = self.t[(i, c)];
            if f != 0.0 {
                for (j, pv) in pivot_row.iter().enumerate() {
                    self.t[(i, j)] -= f * pv;
                }
                self.t[(i, c)] = 0.0;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for (j, pv) in pivot_row.iter().enumerate() {
                self.cost[j] -= f * pv;
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
        self.iterations += 1;
    }

    /// Runs Bland's rule over the columns allowed by `eligible`. Returns false
    /// if the problem is unbounded in some eligible direction.
    fn optimize(&mut self, eligible: impl Fn(usize) -> bool) -> Result<bool> {
        let w = self.width();
        let cost_tol = PIVOT_TOL;
        loop {
            if self.iterations >= MAX_ITERATIONS {
                return Err(Error::TooLarge("simplex iteration limit reached".into()));
            }
            let Some(enter) = (0..w).find(|&j| eligible(j) && self.cost[j] < -cost_tol) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.t.rows() {
                let a = self.t[(i, enter)];
                if a > PIVOT_TOL {
                    let ratio = self.t[(i, w)] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-15 * lr.abs().max(1.0)
                                || ((ratio - lr).abs() <= 1e-15 * lr.abs().max(1.0) && self.basis[i] < self.basis[li])
                            {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(false),
                Some((r, _)) => self.pivot(r, enter),
            }
        }
    }
}

/// Two-phase simplex with Bland's anti-cycling rule.
pub fn lp_solve(lp: &LinearProgram) -> Result<LpOutcome> {
    let n = lp.variables();
    let m = lp.constraints();
    let feas_tol = FEASIBILITY_REL_TOL * lp.rhs_scale();

    // Phase 1: artificials n..n+m, rows sign-normalized so e ≥ 0.
    let mut t = Matrix::zeros(m, n + m + 1);
    for i in 0..m {
        let sign = if lp.rhs[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(i, j)] = sign * lp.eq[(i, j)];
        }
        t[(i, n + i)] = 1.0;
        t[(i, n + m)] = sign * lp.rhs[i];
    }
    let mut cost = vec![0.0; n + m + 1];
    for i in 0..m {
        for j in 0..n {
            cost[j] -= t[(i, j)];
        }
        cost[n + m] -= t[(i, n + m)];
    }
    let mut tab = Tableau {
        t,
        basis: (n..n + m).collect(),
        cost,
        iterations: 0,
    };
    tab.optimize(|_| true)?;
    let infeasibility = -tab.cost[n + m];
    if infeasibility > feas_tol {
        return Ok(LpOutcome {
            status: LpStatus::Infeasible,
            solution: Vec::new(),
            objective_value: f64::NAN,
            infeasibility,
            iterations: tab.iterations,
        });
    }

    // Drive artificials out of the basis; rows where that is impossible are redundant.
    let mut keep_rows: Vec<usize> = Vec::with_capacity(m);
    for r in 0..m {
        if tab.basis[r] >= n {
            let col = (0..n)
                .filter(|&j| tab.t[(r, j)].abs() > PIVOT_TOL)
                .max_by(|&a, &b| tab.t[(r, a)].abs().total_cmp(&tab.t[(r, b)].abs()));
            match col {
                Some(c) => {
                    tab.pivot(r, c);
                    keep_rows.push(r);
                }
                None => {}
            }
        } else {
            keep_rows.push(r);
        }
    }
    let mut t2 = Matrix::zeros(keep_rows.len(), n + 1);
    let mut basis2 = Vec::with_capacity(keep_rows.len());
    for (k, &r) in keep_rows.iter().enumerate() {
        for j in 0..n {
            t2[(k, j)] = tab.t[(r, j)];
        }
        t2[(k, n)] = tab.t[(r, n + m)].max(0.0);
        basis2.push(tab.basis[r]);
    }

    // Phase 2.
    let mut cost2 = vec![0.0; n + 1];
    cost2[..n].copy_from_slice(&lp.objective);
    for (k, &b) in basis2.iter().enumerate() {
        let cb = lp.objective[b];
        if cb != 0.0 {
            for j in 0..=n {
                cost2[j] -= cb * t2[(k, j)];
            }
        }
    }
    let mut tab2 = Tableau {
        t: t2,
        basis: basis2,
        cost: cost2,
        iterations: tab.iterations,
    };
    let bounded = tab2.optimize(|_| true)?;
    if !bounded {
        return Ok(LpOutcome {
            status: LpStatus::Unbounded,
            solution: Vec::new(),
            objective_value: f64::NEG_INFINITY,
            infeasibility,
            iterations: tab2.iterations,
        });
    }
    let mut solution = vec![0.0; n];
    for (k, &b) in tab2.basis.iter().enumerate() {
        solution[b] = tab2.t[(k, n)];
    }
    refine_basic_solution(lp, &keep_rows, &tab2.basis, &mut solution);
    let objective_value = lp.objective.iter().zip(&solution).map(|(c, u)| c * u).sum();
    Ok(LpOutcome {
        status: LpStatus::Optimal,
        solution,
        objective_value,
        infeasibility,
        iterations: tab2.iterations,
    })
}

/// Recomputes the basic variables from the original constraint data by
/// Gaussian elimination, which removes most of the drift accumulated over
/// tableau pivots. Keeps the tableau values if the basis matrix is singular.
fn refine_basic_solution(lp: &LinearProgram, rows: &[usize], basis: &[usize], solution: &mut [f64]) {
    let k = basis.len();
    if k == 0 || rows.len() != k {
        return;
    }
    let mut a = Matrix::from_fn(k, k + 1, |i, j| {
        if j < k {
            lp.eq[(rows[i], basis[j])]
        } else {
            lp.rhs[rows[i]]
        }
    });
    for col in 0..k {
        let Some(p) = (col..k).max_by(|&x, &y| a[(x, col)].abs().total_cmp(&a[(y, col)].abs())) else {
            return;
        };
        if a[(p, col)].abs() < 1e-13 {
            return;
        }
        if p != col {
            for j in 0..=k {
                let tmp = a[(p, j)];
                a[(p, j)] = a[(col, j)];
                a[(col, j)] = tmp;
            }
        }
        for i in 0..k {
            if i != col {
                let f = a[(i, col)] / a[(col, col)];
                if f != 0.0 {
                    for j in col..=k {
                        let v = a[(col, j)];
                        a[(i, j)] -= f * v;
                    }
                }
            }
        }
    }
    let refined: Vec<f64> = (0..k).map(|i| a[(i, k)] / a[(i, i)]).collect();
    if refined.iter().any(|v| !v.is_finite()) {
        return;
    }
    let before = lp.residuals(solution).0;
    let mut candidate = solution.to_vec();
    for (&b, v) in basis.iter().zip(&refined) {
        candidate[b] = if *v < 0.0 && *v > -1e-12 { 0.0 } else { *v };
    }
    let (after, neg) = lp.residuals(&candidate);
    if after <= before && neg <= 1e-10 {
        solution.copy_from_slice(&candidate);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility {
    Feasible(Vec<f64>),
    /// Phase-1 optimum (total artificial mass) when infeasible.
    Infeasible(f64),
}

/// Phase-1 wrapper: any `u ≥ 0` with `E u = e`, or a certificate of infeasibility.
pub fn feasibility(eq: Matrix, rhs: Vec<f64>) -> Result<Feasibility> {
    let lp = LinearProgram::feasibility(eq, rhs)?;
    let out = lp_solve(&lp)?;
    Ok(match out.status {
        LpStatus::Infeasible => Feasibility::Infeasible(out.infeasibility),
        _ => Feasibility::Feasible(out.solution),
    })
}

/// Lexicographically smallest permutation `π` with `d[i, π(i)] > threshold`
/// for every row, or `None` if the support admits no perfect matching.
pub fn positive_support_matching(d: &Matrix, threshold: f64) -> Result<Option<Vec<usize>>> {
    if d.rows() != d.cols() {
        return Err(Error::NotSquare(d.rows(), d.cols()));
    }
    let n = d.rows();
    let allowed = |i: usize, j: usize| d[(i, j)] > threshold;
    let mut fixed: Vec<usize> = Vec::with_capacity(n);
    let mut col_used = vec![false; n];
    if !has_perfect_matching(n, 0, &col_used, &allowed) {
        return Ok(None);
    }
    for i in 0..n {
        let mut chosen = None;
        for j in 0..n {
            if col_used[j] || !allowed(i, j) {
                continue;
            }
            col_used[j] = true;
            if has_perfect_matching(n, i + 1, &col_used, &allowed) {
                chosen = Some(j);
                break;
            }
            col_used[j] = false;
        }
        match chosen {
            Some(j) => fixed.push(j),
            None => return Ok(None),
        }
    }
    Ok(Some(fixed))
}

/// Kuhn's augmenting-path algorithm on rows `first_row..n` and unused columns.
fn has_perfect_matching(n: usize, first_row: usize, col_used: &[bool], allowed: &impl Fn(usize, usize) -> bool) -> bool {
    let mut match_col: Vec<Option<usize>> = vec![None; n];
    fn augment(
        i: usize,
        n: usize,
        col_used: &[bool],
        allowed: &impl Fn(usize, usize) -> bool,
        seen: &mut [bool],
        match_col: &mut [Option<usize>],
    ) -> bool {
        for j in 0..n {
            if col_used[j] || seen[j] || !allowed(i, j) {
                continue;
            }
            seen[j] = true;
            if match_col[j].is_none_or(|k| augment(k, n, col_used, allowed, seen, match_col)) {
                match_col[j] = Some(i);
                return true;
            }
        }
        false
    }
    for i in first_row..n {
        let mut seen = vec![false; n];
        if !augment(i, n, col_used, allowed, &mut seen, &mut match_col) {
            return false;
        }
    }
    true
}
