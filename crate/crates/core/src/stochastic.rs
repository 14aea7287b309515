//! Majorization of discrete measures.
//!
//! `Σ λᵢ δ_{xᵢ} ≺ Σ μⱼ δ_{yⱼ}` holds when some row-stochastic `A` pushes `λ`
//! forward to `μ` (`μⱼ = Σᵢ aᵢⱼ λᵢ`) and every `xᵢ` is the barycenter of
//! `Σⱼ aᵢⱼ δ_{yⱼ}`. This module checks that relation given `A`, builds
//! majorized measures from `A`, decides it by LP in Euclidean space, and
//! provides the classical sorted-partial-sum predicates, Birkhoff
//! decomposition of doubly stochastic matrices, and the Rado hull probe.

use serde::Serialize;

use crate::barycenter::{self, DiscreteMeasure, SolverOptions};
use crate::error::{Error, Result};
use crate::geometry::{Point, Space};
use crate::linalg::Matrix;
use crate::lpcore::{self, Feasibility};

pub const WEIGHT_TOL: f64 = 1e-9;
pub const ENTRY_FLOOR: f64 = -1e-12;
pub const MAJORIZATION_REL_TOL: f64 = 1e-9;
/// Relative accuracy requested from the row barycenter solves.
pub const ROW_SOLVER_TOL: f64 = 1e-12;
pub const RADO_MAX_N: usize = 6;

/// Ok if `w` is nonnegative (to −1e-12) and sums to 1 within 1e-9.
pub fn check_probability_vector(w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::NotProbabilityVector("empty".into()));
    }
    if w.iter().any(|x| !x.is_finite() || *x < ENTRY_FLOOR) {
        return Err(Error::NotProbabilityVector("negative or non-finite entry".into()));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::NotProbabilityVector(format!("sums to {s}")));
    }
    Ok(())
}

/// Nonnegative matrix with unit row sums.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RowStochasticMatrix(Matrix);

impl RowStochasticMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.rows() == 0 || m.cols() == 0 {
            return Err(Error::NotRowStochastic("empty matrix".into()));
        }
        if !m.is_finite() {
            return Err(Error::NotRowStochastic("non-finite entry".into()));
        }
        for i in 0..m.rows() {
            let row = m.row(i);
            if row.iter().any(|&a| a < ENTRY_FLOOR) {
                return Err(Error::NotRowStochastic(format!("row {i} has a negative entry")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > WEIGHT_TOL {
                return Err(Error::NotRowStochastic(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows).ok_or_else(|| Error::NotRowStochastic("ragged rows".into()))?)
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n))
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    /// True if the column sums are also 1 within 1e-9.
    pub fn is_doubly_stochastic(&self) -> bool {
        self.rows() == self.cols()
            && (0..self.cols()).all(|j| {
                let s: f64 = (0..self.rows()).map(|i| self.get(i, j)).sum();
                (s - 1.0).abs() <= WEIGHT_TOL
            })
    }

    /// Product of two row-stochastic matrices.
    pub fn compose(&self, other: &RowStochasticMatrix) -> Result<RowStochasticMatrix> {
        if self.cols() != other.rows() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        RowStochasticMatrix::new(self.0.matmul(&other.0))
    }
}

fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

fn partial_sums_ok(x: &[f64], y: &[f64], rel_tol: f64, require_equal_total: bool) -> Result<bool> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let scale = x
        .iter()
        .chain(y)
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(1e-12);
    let tol = rel_tol * scale;
    let (xs, ys) = (sorted_desc(x), sorted_desc(y));
    let (mut sx, mut sy) = (0.0, 0.0);
    for k in 0..xs.len() {
        sx += xs[k];
        sy += ys[k];
        if sx > sy + tol {
            return Ok(false);
        }
    }
    Ok(!require_equal_total || (sx - sy).abs() <= tol)
}

/// Classical majorization `x ≺ y`: descending partial sums of `x` bounded by
/// those of `y`, with equal totals. Tolerance `1e-9·max|entry|`.
pub fn hlp_majorizes(x: &[f64], y: &[f64]) -> Result<bool> {
    partial_sums_ok(x, y, MAJORIZATION_REL_TOL, true)
}

/// Weak majorization `x ≺* y` (partial sums only).
pub fn weakly_majorizes(x: &[f64], y: &[f64]) -> Result<bool> {
    partial_sums_ok(x, y, MAJORIZATION_REL_TOL, false)
}

/// Weak majorization with a caller-chosen relative tolerance.
pub fn weakly_majorizes_tol(x: &[f64], y: &[f64], rel_tol: f64) -> Result<bool> {
    partial_sums_ok(x, y, rel_tol, false)
}

/// `μⱼ = Σᵢ aᵢⱼ λᵢ`.
pub fn pushforward_weights(a: &RowStochasticMatrix, lambda: &[f64]) -> Result<Vec<f64>> {
    if lambda.len() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "lambda has {} entries, A has {} rows",
            lambda.len(),
            a.rows()
        )));
    }
    check_probability_vector(lambda)?;
    let mu: Vec<f64> = (0..a.cols())
        .map(|j| (0..a.rows()).map(|i| a.get(i, j) * lambda[i]).sum())
        .collect();
    check_probability_vector(&mu)?;
    Ok(mu)
}

/// Checkable witness of `Σ λᵢ δ_{xᵢ} ≺ Σ μⱼ δ_{yⱼ}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MajorizationCertificate {
    #[serde(rename = "A")]
    pub a: RowStochasticMatrix,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub x_atoms: Vec<Point>,
    pub y_atoms: Vec<Point>,
    /// `d(xᵢ, bar(Σⱼ aᵢⱼ δ_{yⱼ}))`.
    pub residuals: Vec<f64>,
    /// Max |pushforward(A, λ) − μ|.
    pub pushforward_error: f64,
    /// Max pairwise distance among all atoms.
    pub scale: f64,
    pub tol: f64,
    /// Rows whose barycenter solve did not converge.
    pub unconverged_rows: Vec<usize>,
    /// Rows excluded from the residual test (zero weight, when requested).
    pub ignored_rows: Vec<usize>,
    pub valid: bool,
}

impl MajorizationCertificate {
    pub fn max_residual(&self) -> f64 {
        self.residuals
            .iter()
            .enumerate()
            .filter(|(i, _)| !self.ignored_rows.contains(i))
            .fold(0.0, |m, (_, r)| m.max(*r))
    }

    /// True when `m = n` and all weights are `1/n`.
    pub fn is_equal_weight(&self) -> bool {
        let n = self.lambda.len();
        n == self.mu.len()
            && self
                .lambda
                .iter()
                .chain(&self.mu)
                .all(|w| (w - 1.0 / n as f64).abs() <= WEIGHT_TOL)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub tol: f64,
    pub ignore_zero_weight_rows: bool,
}

impl VerifyOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            ignore_zero_weight_rows: false,
        }
    }
}

/// Row `i` of `A` as a measure on the `y` atoms.
fn row_measure(space: &Space, a: &RowStochasticMatrix, i: usize, y: &[Point]) -> Result<DiscreteMeasure> {
    let w: Vec<f64> = a.row(i).iter().map(|v| v.max(0.0)).collect();
    let total: f64 = w.iter().sum();
    DiscreteMeasure::new(space, y.to_vec(), w.iter().map(|v| v / total).collect())
}

fn row_barycenters(space: &Space, a: &RowStochasticMatrix, y: &[Point]) -> Result<Vec<barycenter::BarycenterResult>> {
    let opts = SolverOptions::with_tol(ROW_SOLVER_TOL);
    (0..a.rows())
        .map(|i| barycenter::barycenter_with(space, &row_measure(space, a, i, y)?, opts))
        .collect()
}

pub fn verify_majorization(
    space: &Space,
    x: &[Point],
    lambda: &[f64],
    y: &[Point],
    mu: &[f64],
    a: &RowStochasticMatrix,
    tol: f64,
) -> Result<MajorizationCertificate> {
    verify_majorization_with(space, x, lambda, y, mu, a, VerifyOptions::new(tol))
}

pub fn verify_majorization_with(
    space: &Space,
    x: &[Point],
    lambda: &[f64],
    y: &[Point],
    mu: &[f64],
    a: &RowStochasticMatrix,
    opts: VerifyOptions,
) -> Result<MajorizationCertificate> {
    let (m, n) = (a.rows(), a.cols());
    if x.len() != m || lambda.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "A has {m} rows but {} x atoms and {} lambda weights",
            x.len(),
            lambda.len()
        )));
    }
    if y.len() != n || mu.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "A has {n} columns but {} y atoms and {} mu weights",
            y.len(),
            mu.len()
        )));
    }
    check_probability_vector(lambda)?;
    check_probability_vector(mu)?;
    for p in x.iter().chain(y) {
        space.check_point(p)?;
    }
    let push = pushforward_weights(a, lambda)?;
    let pushforward_error = push.iter().zip(mu).fold(0.0_f64, |e, (p, q)| e.max((p - q).abs()));
    let bars = row_barycenters(space, a, y)?;
    let mut residuals = Vec::with_capacity(m);
    let mut unconverged_rows = Vec::new();
    for (i, b) in bars.iter().enumerate() {
        residuals.push(space.distance(&x[i], &b.point)?);
        if !b.converged {
            unconverged_rows.push(i);
        }
    }
    let ignored_rows: Vec<usize> = if opts.ignore_zero_weight_rows {
        (0..m).filter(|&i| lambda[i] == 0.0).collect()
    } else {
        Vec::new()
    };
    let all: Vec<&Point> = x.iter().chain(y).collect();
    let scale = barycenter::pairwise_scale(space, &all)?;
    let mut cert = MajorizationCertificate {
        a: a.clone(),
        lambda: lambda.to_vec(),
        mu: mu.to_vec(),
        x_atoms: x.to_vec(),
        y_atoms: y.to_vec(),
        residuals,
        pushforward_error,
        scale,
        tol: opts.tol,
        unconverged_rows,
        ignored_rows,
        valid: false,
    };
    cert.valid = pushforward_error <= opts.tol
        && cert.max_residual() <= opts.tol * scale
        && cert.unconverged_rows.iter().all(|i| cert.ignored_rows.contains(i));
    Ok(cert)
}

/// Output of [`synthesize_majorized`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Synthesis {
    pub x_atoms: Vec<Point>,
    pub mu: Vec<f64>,
    pub certificate: MajorizationCertificate,
}

/// Builds `xᵢ = bar(Σⱼ aᵢⱼ δ_{yⱼ})` and `μ = pushforward(A, λ)`; the result
/// majorizes by construction and is re-verified before returning.
pub fn synthesize_majorized(
    space: &Space,
    y: &[Point],
    lambda: &[f64],
    a: &RowStochasticMatrix,
    tol: f64,
) -> Result<Synthesis> {
    if y.len() != a.cols() {
        return Err(Error::DimensionMismatch(format!(
            "A has {} columns but {} y atoms",
            a.cols(),
            y.len()
        )));
    }
    let mu = pushforward_weights(a, lambda)?;
    let bars = row_barycenters(space, a, y)?;
    if bars.iter().any(|b| !b.converged) {
        return Err(Error::NotConverged);
    }
    let x: Vec<Point> = bars.into_iter().map(|b| b.point).collect();
    let certificate = verify_majorization(space, &x, lambda, y, &mu, a, tol)?;
    if !certificate.valid {
        return Err(Error::InvalidCertificate(format!(
            "re-verification failed, max residual {}",
            certificate.max_residual()
        )));
    }
    Ok(Synthesis {
        x_atoms: x,
        mu,
        certificate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Decision {
    Feasible {
        #[serde(rename = "A")]
        a: RowStochasticMatrix,
        certificate: MajorizationCertificate,
    },
    Infeasible {
        phase1_value: f64,
    },
}

impl Decision {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Decision::Feasible { .. })
    }
}

fn euclidean_coords(points: &[Point]) -> Result<(usize, Vec<&[f64]>)> {
    let mut dim = None;
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let Point::Euclidean(v) = p else {
            return Err(Error::NotEuclidean);
        };
        match dim {
            None => dim = Some(v.len()),
            Some(d) if d != v.len() => {
                return Err(Error::DimensionMismatch("points of unequal dimension".into()));
            }
            _ => {}
        }
        out.push(v.as_slice());
    }
    Ok((dim.unwrap_or(0), out))
}

/// Decides Euclidean majorization as LP feasibility in the entries of `A`:
/// unit row sums, `Σᵢ λᵢ aᵢⱼ = μⱼ`, and `Σⱼ aᵢⱼ yⱼ = xᵢ` coordinatewise.
pub fn decide_majorization_euclidean(
    x: &[Point],
    lambda: &[f64],
    y: &[Point],
    mu: &[f64],
    tol: f64,
) -> Result<Decision> {
    let (dx, xs) = euclidean_coords(x)?;
    let (dy, ys) = euclidean_coords(y)?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyInput);
    }
    if dx != dy {
        return Err(Error::DimensionMismatch(format!("x in ℝ^{dx}, y in ℝ^{dy}")));
    }
    if lambda.len() != x.len() || mu.len() != y.len() {
        return Err(Error::DimensionMismatch("weights do not match atoms".into()));
    }
    check_probability_vector(lambda)?;
    check_probability_vector(mu)?;
    let (m, n, dim) = (x.len(), y.len(), dx);
    let rows = m + n + m * dim;
    let mut eq = Matrix::zeros(rows, m * n);
    let mut rhs = vec![0.0; rows];
    for i in 0..m {
        for j in 0..n {
            let var = i * n + j;
            eq[(i, var)] = 1.0;
            eq[(m + j, var)] = lambda[i];
            for k in 0..dim {
                eq[(m + n + i * dim + k, var)] = ys[j][k];
            }
        }
        rhs[i] = 1.0;
        for k in 0..dim {
            rhs[m + n + i * dim + k] = xs[i][k];
        }
    }
    rhs[m..m + n].copy_from_slice(mu);
    match lpcore::feasibility(eq, rhs)? {
        Feasibility::Infeasible(v) => Ok(Decision::Infeasible { phase1_value: v }),
        Feasibility::Feasible(u) => {
            let mut am = Matrix::from_fn(m, n, |i, j| u[i * n + j].max(0.0));
            for i in 0..m {
                let s: f64 = am.row(i).iter().sum();
                am.row_mut(i).iter_mut().for_each(|v| *v /= s);
            }
            let a = RowStochasticMatrix::new(am)?;
            let space = Space::euclidean(dim)?;
            let certificate = verify_majorization(&space, x, lambda, y, mu, &a, tol)?;
            Ok(Decision::Feasible { a, certificate })
        }
    }
}

/// One term `weight · P_π`, where `P_π[i, π(i)] = 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BirkhoffTerm {
    pub weight: f64,
    pub permutation: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BirkhoffDecomposition {
    pub terms: Vec<BirkhoffTerm>,
}

impl BirkhoffDecomposition {
    pub fn reconstruct(&self, n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for t in &self.terms {
            for (i, &j) in t.permutation.iter().enumerate() {
                m[(i, j)] += t.weight;
            }
        }
        m
    }

    pub fn reconstruction_error(&self, d: &Matrix) -> f64 {
        self.reconstruct(d.rows()).max_abs_diff(d)
    }

    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }
}

const BIRKHOFF_ZERO: f64 = 1e-12;

/// Writes a doubly stochastic matrix as a convex combination of permutation
/// matrices by repeatedly extracting the lexicographically smallest
/// permutation on the positive support.
pub fn birkhoff_decompose(d: &Matrix) -> Result<BirkhoffDecomposition> {
    if d.rows() != d.cols() {
        return Err(Error::NotSquare(d.rows(), d.cols()));
    }
    let n = d.rows();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if !d.is_finite() || d.as_slice().iter().any(|&v| v < ENTRY_FLOOR) {
        return Err(Error::NotDoublyStochastic("negative or non-finite entry".into()));
    }
    for i in 0..n {
        let rs: f64 = d.row(i).iter().sum();
        let cs: f64 = (0..n).map(|k| d[(k, i)]).sum();
        if (rs - 1.0).abs() > WEIGHT_TOL || (cs - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::NotDoublyStochastic(format!("line {i} sums to {rs} / {cs}")));
        }
    }
    let mut r = Matrix::from_fn(n, n, |i, j| if d[(i, j)] > BIRKHOFF_ZERO { d[(i, j)] } else { 0.0 });
    let mut terms = Vec::new();
    while r.max_abs() > BIRKHOFF_ZERO {
        let Some(perm) = lpcore::positive_support_matching(&r, BIRKHOFF_ZERO)? else {
            if r.max_abs() <= 1e-9 {
                break;
            }
            return Err(Error::MatchingFailed);
        };
        let (arg, weight) = perm
            .iter()
            .enumerate()
            .map(|(i, &j)| ((i, j), r[(i, j)]))
            .fold(((0, 0), f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        for (i, &j) in perm.iter().enumerate() {
            r[(i, j)] -= weight;
            if r[(i, j)] <= BIRKHOFF_ZERO {
                r[(i, j)] = 0.0;
            }
        }
        r[arg] = 0.0;
        terms.push(BirkhoffTerm {
            weight,
            permutation: perm,
        });
    }
    Ok(BirkhoffDecomposition { terms })
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut cur: Vec<usize> = (0..n).collect();
    let mut out = vec![cur.clone()];
    loop {
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).expect("exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
}

/// The 3×3 doubly stochastic matrix carried by weights on the six
/// permutations of three points, listed in lexicographic order
/// `(123), (132), (213), (231), (312), (321)`: the permutation `σ` sends
/// weight to entry `(i, σ(i))`.
pub fn three_by_three_from_weights(w: &[f64; 6]) -> Matrix {
    let terms = permutations(3)
        .into_iter()
        .zip(w)
        .map(|(permutation, &weight)| BirkhoffTerm { weight, permutation })
        .collect();
    BirkhoffDecomposition { terms }.reconstruct(3)
}

/// Reads a 3×3 decomposition back into the six lexicographic slots.
pub fn three_by_three_weights(dec: &BirkhoffDecomposition) -> Option<[f64; 6]> {
    let perms = permutations(3);
    let mut out = [0.0; 6];
    for t in &dec.terms {
        let k = perms.iter().position(|p| *p == t.permutation)?;
        out[k] += t.weight;
    }
    Some(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HullCoefficient {
    pub permutation: Vec<usize>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadoReport {
    /// `(x₁..xₙ)` equals the barycenter in `Mⁿ` of the permuted `y` tuples
    /// weighted by the Birkhoff decomposition of `A`.
    pub necessity_holds: bool,
    pub reconstruction_residual: f64,
    pub scale: f64,
    pub decomposition: BirkhoffDecomposition,
    /// Euclidean only: LP membership of `x` in the hull of permuted `y` tuples.
    pub hull_member: Option<bool>,
    pub hull_coefficients: Option<Vec<HullCoefficient>>,
}

/// Probes the necessity half of Rado's characterization for an equal-weight
/// majorization `(x₁..xₙ) ≺ (y₁..yₙ)`. Only data is reported; the converse
/// is never asserted.
pub fn rado_probe(
    space: &Space,
    x: &[Point],
    y: &[Point],
    certificate: Option<&RowStochasticMatrix>,
    tol: f64,
) -> Result<RadoReport> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::LengthMismatch(n, y.len()));
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if n > RADO_MAX_N {
        return Err(Error::TooLarge(format!("n = {n} > {RADO_MAX_N}")));
    }
    for p in x.iter().chain(y) {
        space.check_point(p)?;
    }
    let uniform = vec![1.0 / n as f64; n];
    let a = match certificate {
        Some(a) => a.clone(),
        None if space.is_euclidean() => match decide_majorization_euclidean(x, &uniform, y, &uniform, tol)? {
            Decision::Feasible { a, .. } => a,
            Decision::Infeasible { .. } => return Err(Error::NoCertificate),
        },
        None => return Err(Error::NoCertificate),
    };
    if a.rows() != n || a.cols() != n {
        return Err(Error::DimensionMismatch(format!("certificate is {}x{}", a.rows(), a.cols())));
    }
    let decomposition = birkhoff_decompose(a.matrix())?;

    let power = Space::product(vec![space.clone(); n])?;
    let tuples: Vec<Point> = decomposition
        .terms
        .iter()
        .map(|t| Point::Product(t.permutation.iter().map(|&j| y[j].clone()).collect()))
        .collect();
    let total = decomposition.total_weight();
    let weights: Vec<f64> = decomposition.terms.iter().map(|t| t.weight / total).collect();
    let measure = DiscreteMeasure::new(&power, tuples, weights)?;
    let bar = barycenter::barycenter_with(&power, &measure, SolverOptions::with_tol(ROW_SOLVER_TOL))?;
    let x_tuple = Point::Product(x.to_vec());
    let reconstruction_residual = power.distance(&x_tuple, &bar.point)?;
    let all: Vec<&Point> = x.iter().chain(y).collect();
    let scale = barycenter::pairwise_scale(space, &all)?;
    let necessity_holds = bar.converged && reconstruction_residual <= tol * scale;

    let (hull_member, hull_coefficients) = if space.is_euclidean() {
        match euclidean_hull_membership(x, y)? {
            Some(c) => (Some(true), Some(c)),
            None => (Some(false), None),
        }
    } else {
        (None, None)
    };
    Ok(RadoReport {
        necessity_holds,
        reconstruction_residual,
        scale,
        decomposition,
        hull_member,
        hull_coefficients,
    })
}

/// LP test of `(x₁..xₙ) ∈ conv{(y_{σ(1)}..y_{σ(n)})}` over all `n!` permutations.
fn euclidean_hull_membership(x: &[Point], y: &[Point]) -> Result<Option<Vec<HullCoefficient>>> {
    let (dim, xs) = euclidean_coords(x)?;
    let (_, ys) = euclidean_coords(y)?;
    let n = x.len();
    let perms = permutations(n);
    let rows = 1 + n * dim;
    let mut eq = Matrix::zeros(rows, perms.len());
    let mut rhs = vec![0.0; rows];
    rhs[0] = 1.0;
    for (c, p) in perms.iter().enumerate() {
        eq[(0, c)] = 1.0;
        for i in 0..n {
            for k in 0..dim {
                eq[(1 + i * dim + k, c)] = ys[p[i]][k];
            }
        }
    }
    for i in 0..n {
        for k in 0..dim {
            rhs[1 + i * dim + k] = xs[i][k];
        }
    }
    Ok(match lpcore::feasibility(eq, rhs)? {
        Feasibility::Infeasible(_) => None,
        Feasibility::Feasible(u) => Some(
            perms
                .into_iter()
                .zip(u)
                .filter(|(_, w)| *w > BIRKHOFF_ZERO)
                .map(|(permutation, weight)| HullCoefficient { permutation, weight })
                .collect(),
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1(v: f64) -> Point {
        Point::euclidean(&[v])
    }

    #[test]
    fn hlp_examples() {
        assert!(hlp_majorizes(&[1.0, 1.0, 1.0], &[3.0, 0.0, 0.0]).unwrap());
        assert!(!hlp_majorizes(&[2.0, 2.0], &[3.0, 0.0]).unwrap());
        assert!(hlp_majorizes(&[2.0, 1.0, 1.0], &[2.0, 2.0, 0.0]).unwrap());
        assert_eq!(hlp_majorizes(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch(1, 2)));
        assert_eq!(hlp_majorizes(&[], &[]), Err(Error::EmptyInput));
    }

    #[test]
    fn weak_examples() {
        assert!(weakly_majorizes(&[1.0, 1.0], &[3.0, 0.0]).unwrap());
        assert!(!weakly_majorizes(&[3.0, 0.0], &[1.0, 1.0]).unwrap());
        assert!(weakly_majorizes(&[1.0, 1.0, 1.0], &[1.5, 1.0, 0.6]).unwrap());
    }

    #[test]
    fn pushforward_examples() {
        let id = RowStochasticMatrix::identity(2);
        assert_eq!(pushforward_weights(&id, &[0.3, 0.7]).unwrap(), vec![0.3, 0.7]);
        let u = RowStochasticMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(pushforward_weights(&u, &[0.2, 0.8]).unwrap(), vec![0.5, 0.5]);
        let row = RowStochasticMatrix::from_rows(&[vec![0.1, 0.6, 0.3]]).unwrap();
        assert_eq!(pushforward_weights(&row, &[1.0]).unwrap(), vec![0.1, 0.6, 0.3]);
        assert!(pushforward_weights(&row, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn row_stochastic_validation() {
        assert!(RowStochasticMatrix::from_rows(&[vec![0.5, 0.6]]).is_err());
        assert!(RowStochasticMatrix::from_rows(&[vec![1.5, -0.5]]).is_err());
        assert!(RowStochasticMatrix::from_rows(&[vec![1.0 + 1e-13, -1e-13]]).is_ok());
    }

    #[test]
    fn verify_examples() {
        let s = Space::euclidean(1).unwrap();
        let y = vec![e1(0.0), e1(4.0)];
        let a = RowStochasticMatrix::from_rows(&[vec![0.25, 0.75], vec![0.75, 0.25]]).unwrap();
        let c = verify_majorization(&s, &[e1(3.0), e1(1.0)], &[0.5, 0.5], &y, &[0.5, 0.5], &a, 1e-9).unwrap();
        assert!(c.valid);
        let c = verify_majorization(&s, &[e1(3.0), e1(1.5)], &[0.5, 0.5], &y, &[0.5, 0.5], &a, 1e-9).unwrap();
        assert!(!c.valid);
        assert!((c.residuals[1] - 0.5).abs() < 1e-12);

        let id = RowStochasticMatrix::identity(2);
        let c = verify_majorization(&s, &y, &[0.3, 0.7], &y, &[0.3, 0.7], &id, 1e-9).unwrap();
        assert!(c.valid);

        // δ_bar ≺ μ-measure.
        let row = RowStochasticMatrix::from_rows(&[vec![0.5, 0.5]]).unwrap();
        let c = verify_majorization(&s, &[e1(2.0)], &[1.0], &y, &[0.5, 0.5], &row, 1e-9).unwrap();
        assert!(c.valid);

        assert!(matches!(
            verify_majorization(&s, &[e1(2.0)], &[1.0], &y[..1], &[1.0], &row, 1e-9),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn zero_weight_rows() {
        let s = Space::euclidean(1).unwrap();
        let y = vec![e1(0.0), e1(4.0)];
        let a = RowStochasticMatrix::from_rows(&[vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        // Row 2 carries no mass but its atom is wrong.
        let x = [e1(2.0), e1(3.0)];
        let c = verify_majorization(&s, &x, &[1.0, 0.0], &y, &[0.5, 0.5], &a, 1e-9).unwrap();
        assert!(!c.valid);
        let opts = VerifyOptions {
            tol: 1e-9,
            ignore_zero_weight_rows: true,
        };
        let c = verify_majorization_with(&s, &x, &[1.0, 0.0], &y, &[0.5, 0.5], &a, opts).unwrap();
        assert!(c.valid);
    }

    #[test]
    fn synthesize_examples() {
        let s = Space::spd(2).unwrap();
        let y = vec![Point::spd_diag(&[1.0, 1.0]), Point::spd_diag(&[4.0, 4.0])];
        let a = RowStochasticMatrix::from_rows(&[vec![0.5, 0.5]]).unwrap();
        let syn = synthesize_majorized(&s, &y, &[1.0], &a, 1e-9).unwrap();
        assert!(syn.certificate.valid);
        let Point::Spd(m) = &syn.x_atoms[0] else { panic!() };
        assert!(m.max_abs_diff(&crate::linalg::SymMatrix::diag(&[2.0, 2.0])) < 1e-12);

        let h = Space::HalfPlane;
        let y = vec![Point::half_plane(0.0, 1.0), Point::half_plane(1.0, 2.0)];
        let syn = synthesize_majorized(&h, &y, &[0.4, 0.6], &RowStochasticMatrix::identity(2), 1e-9).unwrap();
        assert_eq!(syn.x_atoms, y);
        assert_eq!(syn.mu, vec![0.4, 0.6]);
    }

    #[test]
    fn decide_examples() {
        let y = vec![e1(0.0), e1(4.0)];
        let d = decide_majorization_euclidean(&[e1(2.0)], &[1.0], &y, &[0.5, 0.5], 1e-9).unwrap();
        let Decision::Feasible { a, certificate } = d else { panic!() };
        assert!(certificate.valid);
        assert!((a.get(0, 0) - 0.5).abs() < 1e-12);

        let d = decide_majorization_euclidean(&[e1(5.0)], &[1.0], &y, &[0.5, 0.5], 1e-9).unwrap();
        assert!(!d.is_feasible());

        let d = decide_majorization_euclidean(&[e1(1.0), e1(3.0)], &[0.5, 0.5], &y, &[0.5, 0.5], 1e-9).unwrap();
        let Decision::Feasible { a, certificate } = d else { panic!() };
        assert!(certificate.valid);
        let expect = [[0.75, 0.25], [0.25, 0.75]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((a.get(i, j) - expect[i][j]).abs() < 1e-12);
            }
        }

        let h = [Point::half_plane(0.0, 1.0)];
        assert_eq!(
            decide_majorization_euclidean(&h, &[1.0], &h, &[1.0], 1e-9),
            Err(Error::NotEuclidean)
        );
    }

    /// Grid search over 2×2 row-stochastic matrices with step 1/64.
    fn brute_force_decide(x: &[f64; 2], lambda: &[f64; 2], y: &[f64; 2], mu: &[f64; 2]) -> bool {
        let steps = 64;
        let tol = 1e-9;
        (0..=steps).any(|p| {
            (0..=steps).any(|q| {
                let (a0, a1) = (p as f64 / steps as f64, q as f64 / steps as f64);
                let a = [[a0, 1.0 - a0], [a1, 1.0 - a1]];
                let push_ok = (0..2).all(|j| (a[0][j] * lambda[0] + a[1][j] * lambda[1] - mu[j]).abs() < tol);
                let bar_ok = (0..2).all(|i| (a[i][0] * y[0] + a[i][1] * y[1] - x[i]).abs() < tol);
                push_ok && bar_ok
            })
        })
    }

    #[test]
    fn decide_agrees_with_grid_oracle() {
        // Instances whose witnesses (when they exist) lie on the 1/64 grid.
        let cases: &[([f64; 2], [f64; 2], [f64; 2], [f64; 2])] = &[
            ([1.0, 3.0], [0.5, 0.5], [0.0, 4.0], [0.5, 0.5]),
            ([0.5, 3.5], [0.5, 0.5], [0.0, 4.0], [0.5, 0.5]),
            ([2.0, 2.0], [0.25, 0.75], [0.0, 4.0], [0.5, 0.5]),
            ([0.0, 4.0], [0.5, 0.5], [0.0, 4.0], [0.5, 0.5]),
            ([-1.0, 3.0], [0.5, 0.5], [0.0, 4.0], [0.5, 0.5]),
            ([1.0, 1.0], [0.5, 0.5], [0.0, 4.0], [0.5, 0.5]),
            ([1.0, 3.0], [0.25, 0.75], [0.0, 4.0], [0.25, 0.75]),
        ];
        for (x, l, y, m) in cases {
            let expected = brute_force_decide(x, l, y, m);
            let got = decide_majorization_euclidean(
                &[e1(x[0]), e1(x[1])],
                l,
                &[e1(y[0]), e1(y[1])],
                m,
                1e-9,
            )
            .unwrap()
            .is_feasible();
            assert_eq!(got, expected, "x={x:?} λ={l:?} y={y:?} μ={m:?}");
        }
    }

    #[test]
    fn birkhoff_examples() {
        let d = birkhoff_decompose(&Matrix::identity(4)).unwrap();
        assert_eq!(d.terms.len(), 1);
        assert_eq!(d.terms[0].weight, 1.0);
        assert_eq!(d.terms[0].permutation, vec![0, 1, 2, 3]);

        let uniform = Matrix::from_fn(3, 3, |_, _| 1.0 / 3.0);
        let d = birkhoff_decompose(&uniform).unwrap();
        assert_eq!(d.terms.len(), 3);
        assert_eq!(d.terms[0].permutation, vec![0, 1, 2]);
        for t in &d.terms {
            assert!((t.weight - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(d.reconstruction_error(&uniform) < 1e-15);

        let p1 = [2usize, 0, 1];
        let p2 = [1usize, 2, 0];
        let mut half = Matrix::zeros(3, 3);
        for i in 0..3 {
            half[(i, p1[i])] += 0.5;
            half[(i, p2[i])] += 0.5;
        }
        let d = birkhoff_decompose(&half).unwrap();
        assert_eq!(d.terms.len(), 2);
        assert_eq!(d.terms[0].permutation, p2.to_vec());
        assert_eq!(d.terms[1].permutation, p1.to_vec());
        assert!(d.terms.iter().all(|t| t.weight == 0.5));

        assert!(matches!(
            birkhoff_decompose(&Matrix::from_fn(2, 2, |i, _| i as f64)),
            Err(Error::NotDoublyStochastic(_))
        ));
    }

    #[test]
    fn three_by_three_slots_are_lexicographic() {
        let w = [0.1, 0.2, 0.05, 0.15, 0.3, 0.2];
        let a = three_by_three_from_weights(&w);
        // x₁ carries weight λ₁+λ₂ on y₁, λ₃+λ₄ on y₂, λ₅+λ₆ on y₃.
        assert!((a[(0, 0)] - 0.3).abs() < 1e-15);
        assert!((a[(0, 1)] - 0.2).abs() < 1e-15);
        assert!((a[(0, 2)] - 0.5).abs() < 1e-15);
        // x₂: λ₃+λ₅, λ₁+λ₆, λ₂+λ₄.
        assert!((a[(1, 0)] - 0.35).abs() < 1e-15);
        assert!((a[(1, 1)] - 0.3).abs() < 1e-15);
        assert!((a[(1, 2)] - 0.35).abs() < 1e-15);
    }

    #[test]
    fn permutations_in_order() {
        assert_eq!(
            permutations(3),
            vec![
                vec![0, 1, 2],
                vec![0, 2, 1],
                vec![1, 0, 2],
                vec![1, 2, 0],
                vec![2, 0, 1],
                vec![2, 1, 0]
            ]
        );
        assert_eq!(permutations(5).len(), 120);
        assert_eq!(permutations(1), vec![vec![0]]);
    }

    #[test]
    fn rado_examples() {
        let s = Space::euclidean(1).unwrap();
        let y = vec![e1(0.0), e1(4.0), e1(1.0)];
        let r = rado_probe(&s, &y, &y, None, 1e-9).unwrap();
        assert!(r.necessity_holds);
        assert_eq!(r.hull_member, Some(true));
        let c = r.hull_coefficients.unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].permutation, vec![0, 1, 2]);
        assert!((c[0].weight - 1.0).abs() < 1e-12);

        let r = rado_probe(&s, &[e1(1.0), e1(3.0)], &[e1(0.0), e1(4.0)], None, 1e-9).unwrap();
        assert!(r.necessity_holds);
        let mut c = r.hull_coefficients.unwrap();
        c.sort_by(|a, b| a.permutation.cmp(&b.permutation));
        assert_eq!(c[0].permutation, vec![0, 1]);
        assert!((c[0].weight - 0.75).abs() < 1e-12);
        assert_eq!(c[1].permutation, vec![1, 0]);
        assert!((c[1].weight - 0.25).abs() < 1e-12);

        let h = Space::HalfPlane;
        let hp = vec![Point::half_plane(0.0, 1.0), Point::half_plane(1.0, 1.0)];
        assert_eq!(rado_probe(&h, &hp, &hp, None, 1e-9).unwrap_err(), Error::NoCertificate);
        let seven: Vec<Point> = (0..7).map(|k| e1(k as f64)).collect();
        assert!(matches!(rado_probe(&s, &seven, &seven, None, 1e-9), Err(Error::TooLarge(_))));
    }
}
