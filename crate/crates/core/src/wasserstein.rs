//! Optimal transport for finitely supported measures.
//!
//! On the real line every computation goes through quantile functions. A
//! discrete measure has a piecewise-constant quantile function, so merging the
//! cumulative-weight breakpoints of several measures gives a common grid on
//! which W₂ distances, McCann interpolants and barycenters are finite sums.
//! In higher dimension only the distance is offered, by solving the
//! transportation LP directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Space};
use crate::linalg::Matrix;
use crate::lpcore::{self, LinearProgram, LpStatus};
use crate::stochastic::{self, MajorizationCertificate, RowStochasticMatrix, Synthesis};

const WEIGHT_SUM_TOL: f64 = 1e-12;
const MERGE_REL_TOL: f64 = 1e-12;

/// Finitely supported probability measure on ℝ in canonical form: atoms
/// strictly increasing, weights strictly positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure1D")]
pub struct DiscreteMeasure1D {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure1D {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawMeasure1D> for DiscreteMeasure1D {
    type Error = Error;
    fn try_from(raw: RawMeasure1D) -> Result<Self> {
        DiscreteMeasure1D::new(raw.atoms, raw.weights)
    }
}

impl DiscreteMeasure1D {
    /// Validates and canonicalizes: zero-weight atoms are dropped, atoms are
    /// sorted, and atoms closer than `1e-12·max|atom|` are merged.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        if atoms.iter().chain(&weights).any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite atom or weight".into()));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidMeasure("negative weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        let mut pairs: Vec<(f64, f64)> = atoms
            .into_iter()
            .zip(weights)
            .filter(|&(_, w)| w > 0.0)
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let scale = pairs.iter().fold(0.0_f64, |m, p| m.max(p.0.abs()));
        let merge_tol = MERGE_REL_TOL * scale;
        let mut out_a: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut out_w: Vec<f64> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            match (out_a.last_mut(), out_w.last_mut()) {
                (Some(la), Some(lw)) if a - *la <= merge_tol => {
                    *la = (*la * *lw + a * w) / (*lw + w);
                    *lw += w;
                }
                _ => {
                    out_a.push(a);
                    out_w.push(w);
                }
            }
        }
        Ok(Self {
            atoms: out_a,
            weights: out_w,
        })
    }

    pub fn dirac(at: f64) -> Self {
        Self {
            atoms: vec![at],
            weights: vec![1.0],
        }
    }

    /// Equal weights on the given atoms.
    pub fn uniform(atoms: Vec<f64>) -> Result<Self> {
        let n = atoms.len();
        Self::new(atoms, vec![1.0 / n as f64; n])
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    pub fn second_moment(&self) -> f64 {
        self.atoms.iter().zip(&self.weights).map(|(a, w)| a * a * w).sum()
    }

    /// Pushes the measure forward by `t ↦ t + c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            atoms: self.atoms.iter().map(|a| a + c).collect(),
            weights: self.weights.clone(),
        }
    }

    pub fn max_abs_atom(&self) -> f64 {
        self.atoms.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// Right endpoints of the quantile pieces; the last entry is exactly 1.
    fn breakpoints(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out: Vec<f64> = self
            .weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
        out
    }

    pub fn quantile_function(&self) -> QuantileFn {
        QuantileFn {
            breaks: self.breakpoints(),
            values: self.atoms.clone(),
        }
    }
}

/// Piecewise-constant function on (0, 1]: `values[k]` on `(breaks[k-1], breaks[k]]`.
///
/// Used both for quantile functions and for tangent vectors of the 1-D
/// Wasserstein space (differences of quantile functions).
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileFn {
    breaks: Vec<f64>,
    values: Vec<f64>,
}

impl QuantileFn {
    pub fn zero() -> Self {
        Self {
            breaks: vec![1.0],
            values: vec![0.0],
        }
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Pointwise linear combination `Σ cₖ fₖ`, realized on the merged grid.
    pub fn combine(terms: &[(f64, &QuantileFn)]) -> QuantileFn {
        let fns: Vec<&QuantileFn> = terms.iter().map(|(_, f)| *f).collect();
        let mut breaks = Vec::new();
        let mut values = Vec::new();
        for (right, len, vals) in MergedGrid::new(&fns) {
            let _ = len;
            breaks.push(right);
            values.push(terms.iter().zip(vals).map(|((c, _), v)| c * v).sum());
        }
        QuantileFn { breaks, values }
    }

    pub fn scale(&self, c: f64) -> QuantileFn {
        QuantileFn {
            breaks: self.breaks.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// `∫₀¹ f(t) g(t) dt`.
    pub fn inner(&self, other: &QuantileFn) -> f64 {
        MergedGrid::new(&[self, other])
            .map(|(_, len, v)| len * v[0] * v[1])
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.breaks
            .iter()
            .scan(0.0, |prev, &b| {
                let len = b - *prev;
                *prev = b;
                Some(len)
            })
            .zip(&self.values)
            .map(|(len, v)| len * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Reads the function back as a measure. Fails if it is not
    /// nondecreasing beyond `tol`.
    pub fn to_measure(&self, tol: f64) -> Result<DiscreteMeasure1D> {
        let mut atoms = Vec::with_capacity(self.values.len());
        let mut weights = Vec::with_capacity(self.values.len());
        let mut prev_b = 0.0;
        let mut prev_v = f64::NEG_INFINITY;
        for (&b, &v) in self.breaks.iter().zip(&self.values) {
            let len = b - prev_b;
            prev_b = b;
            if len <= 0.0 {
                continue;
            }
            if v < prev_v - tol {
                return Err(Error::InvalidPoint(
                    "quantile function is not nondecreasing".into(),
                ));
            }
            let v = v.max(prev_v);
            prev_v = v;
            atoms.push(v);
            weights.push(len);
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("quantile values".into()));
        }
        DiscreteMeasure1D::new(atoms, weights)
    }
}

/// Sweep over the union of breakpoints of several piecewise-constant
/// functions. Yields `(right endpoint, interval length, value of each input)`.
struct MergedGrid<'a> {
    fns: Vec<&'a QuantileFn>,
    idx: Vec<usize>,
    prev: f64,
}

impl<'a> MergedGrid<'a> {
    fn new(fns: &[&'a QuantileFn]) -> Self {
        Self {
            fns: fns.to_vec(),
            idx: vec![0; fns.len()],
            prev: 0.0,
        }
    }
}

impl Iterator for MergedGrid<'_> {
    type Item = (f64, f64, Vec<f64>);

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.prev >= 1.0 || self.fns.is_empty() {
                return None;
            }
            let right = self
                .fns
                .iter()
                .zip(&self.idx)
                .map(|(f, &i)| f.breaks[i])
                .fold(f64::INFINITY, f64::min);
            let vals: Vec<f64> = self
                .fns
                .iter()
                .zip(&self.idx)
                .map(|(f, &i)| f.values[i])
                .collect();
            let len = right - self.prev;
            for (f, i) in self.fns.iter().zip(self.idx.iter_mut()) {
                if f.breaks[*i] <= right && *i + 1 < f.breaks.len() {
                    *i += 1;
                }
            }
            self.prev = right;
            if len > 0.0 {
                return Some((right, len, vals));
            }
        }
    }
}

/// Exact W₂ between two measures on ℝ via their quantile functions.
pub fn w2_quantile(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D) -> f64 {
    let (qm, qn) = (mu.quantile_function(), nu.quantile_function());
    MergedGrid::new(&[&qm, &qn])
        .map(|(_, len, v)| len * (v[0] - v[1]) * (v[0] - v[1]))
        .sum::<f64>()
        .sqrt()
}

/// McCann interpolant: quantile function `(1−t)F_μ⁻¹ + tF_ν⁻¹`.
pub fn w2_geodesic(mu: &DiscreteMeasure1D, nu: &DiscreteMeasure1D, t: f64) -> DiscreteMeasure1D {
    let (qm, qn) = (mu.quantile_function(), nu.quantile_function());
    QuantileFn::combine(&[(1.0 - t, &qm), (t, &qn)])
        .to_measure(f64::INFINITY)
        .expect("convex combination of quantile functions is monotone")
}

/// Wasserstein barycenter on ℝ: its quantile function is `Σ λᵢ F_{νᵢ}⁻¹`.
pub fn w2_barycenter_1d(measures: &[DiscreteMeasure1D], weights: &[f64]) -> Result<DiscreteMeasure1D> {
    if measures.is_empty() {
        return Err(Error::InvalidMeasure("no measures".into()));
    }
    if measures.len() != weights.len() {
        return Err(Error::LengthMismatch(measures.len(), weights.len()));
    }
    stochastic::check_probability_vector(weights)?;
    let qs: Vec<QuantileFn> = measures.iter().map(DiscreteMeasure1D::quantile_function).collect();
    let terms: Vec<(f64, &QuantileFn)> = weights.iter().copied().zip(qs.iter()).collect();
    QuantileFn::combine(&terms).to_measure(f64::INFINITY)
}

/// `½ Σ λᵢ W₂²(νᵢ, ν)`.
pub fn w2_objective(measures: &[DiscreteMeasure1D], weights: &[f64], nu: &DiscreteMeasure1D) -> f64 {
    0.5 * measures
        .iter()
        .zip(weights)
        .map(|(m, w)| w * w2_quantile(m, nu).powi(2))
        .sum::<f64>()
}

/// Finitely supported measure on ℝᴺ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch(points.len(), weights.len()));
        }
        let dim = points[0].len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch("points of unequal dimension".into()));
        }
        stochastic::check_probability_vector(&weights)?;
        Ok(Self { points, weights })
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }
}

/// Transport plan between two discrete measures.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coupling {
    pub plan: Matrix,
    pub row_marginals: Vec<f64>,
    pub column_marginals: Vec<f64>,
    pub cost: f64,
}

pub const MAX_LP_CELLS: usize = 10_000;

/// W₂ by solving the transportation LP with squared Euclidean costs.
pub fn w2_lp(mu: &PointCloud, nu: &PointCloud) -> Result<(f64, Coupling)> {
    let (m, n) = (mu.points.len(), nu.points.len());
    if m * n > MAX_LP_CELLS {
        return Err(Error::TooLarge(format!("{m}x{n} transport plan")));
    }
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch(format!("ℝ^{} vs ℝ^{}", mu.dim(), nu.dim())));
    }
    let cost: Vec<f64> = (0..m)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            mu.points[i]
                .iter()
                .zip(&nu.points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        })
        .collect();
    let mut eq = Matrix::zeros(m + n, m * n);
    let mut rhs = Vec::with_capacity(m + n);
    for i in 0..m {
        for j in 0..n {
            eq[(i, i * n + j)] = 1.0;
            eq[(m + j, i * n + j)] = 1.0;
        }
        rhs.push(mu.weights[i]);
    }
    rhs.extend_from_slice(&nu.weights);
    let lp = LinearProgram::new(cost, eq, rhs)?;
    let out = lpcore::lp_solve(&lp)?;
    match out.status {
        LpStatus::Optimal => {
            let plan = Matrix::from_fn(m, n, |i, j| out.solution[i * n + j].max(0.0));
            let value = out.objective_value.max(0.0);
            Ok((
                value.sqrt(),
                Coupling {
                    plan,
                    row_marginals: mu.weights.clone(),
                    column_marginals: nu.weights.clone(),
                    cost: value,
                },
            ))
        }
        other => Err(Error::InvalidMeasure(format!("transport LP reported {other:?}"))),
    }
}

/// Functional on measures over ℝ, convex along Wasserstein barycenters.
#[derive(Clone, Debug, PartialEq)]
pub enum WFunctional {
    /// `Σ wᵢ V(aᵢ)`.
    Potential(Potential),
    /// `Σᵢⱼ wᵢwⱼ (aᵢ − aⱼ)²`.
    InteractionQuadratic,
    SecondMoment,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Potential {
    Square,
    Abs,
    Hinge(f64),
}

impl Potential {
    fn eval(&self, t: f64) -> f64 {
        match self {
            Potential::Square => t * t,
            Potential::Abs => t.abs(),
            Potential::Hinge(c) => (t - c).max(0.0),
        }
    }
}

impl WFunctional {
    pub fn id(&self) -> String {
        match self {
            WFunctional::Potential(Potential::Square) => "potential_sq".into(),
            WFunctional::Potential(Potential::Abs) => "potential_abs".into(),
            WFunctional::Potential(Potential::Hinge(c)) => format!("potential_hinge_{c}"),
            WFunctional::InteractionQuadratic => "interaction_sq".into(),
            WFunctional::SecondMoment => "second_moment".into(),
        }
    }

    pub fn eval(&self, m: &DiscreteMeasure1D) -> f64 {
        let (a, w) = (m.atoms(), m.weights());
        match self {
            WFunctional::Potential(v) => a.iter().zip(w).map(|(x, p)| p * v.eval(*x)).sum(),
            WFunctional::InteractionQuadratic => {
                let mut s = 0.0;
                for i in 0..a.len() {
                    for j in 0..a.len() {
                        s += w[i] * w[j] * (a[i] - a[j]).powi(2);
                    }
                }
                s
            }
            WFunctional::SecondMoment => m.second_moment(),
        }
    }
}

/// Potential energies for `V ∈ {t², |t|, (t − c)₊}`, the quadratic
/// interaction energy and the second moment.
pub fn w_functional_registry() -> Vec<WFunctional> {
    vec![
        WFunctional::Potential(Potential::Square),
        WFunctional::Potential(Potential::Abs),
        WFunctional::Potential(Potential::Hinge(0.5)),
        WFunctional::InteractionQuadratic,
        WFunctional::SecondMoment,
    ]
}

/// Jensen slack `F(bar) − Σ λᵢ F(νᵢ)` for one functional.
pub fn barycentric_convexity_slack(
    functional: &WFunctional,
    measures: &[DiscreteMeasure1D],
    weights: &[f64],
) -> Result<f64> {
    let bar = w2_barycenter_1d(measures, weights)?;
    let rhs: f64 = measures
        .iter()
        .zip(weights)
        .map(|(m, w)| w * functional.eval(m))
        .sum();
    Ok(functional.eval(&bar) - rhs)
}

/// Majorization with `M = P₂(ℝ)`: synthesizes `xᵢ = bar(Σⱼ aᵢⱼ δ_{νⱼ})` and
/// the pushed-forward weights, and returns the re-verified certificate.
pub fn w_majorization(
    measures_y: &[DiscreteMeasure1D],
    lambda: &[f64],
    a: &RowStochasticMatrix,
    tol: f64,
) -> Result<Synthesis> {
    let support = measures_y.iter().map(DiscreteMeasure1D::len).max().unwrap_or(1);
    let space = Space::wasserstein_1d(support.max(1))?;
    let y: Vec<Point> = measures_y.iter().cloned().map(Point::Measure).collect();
    stochastic::synthesize_majorized(&space, &y, lambda, a, tol)
}

/// Verifies an explicit relation between lists of measures on ℝ.
pub fn w_verify(
    x: &[DiscreteMeasure1D],
    lambda: &[f64],
    y: &[DiscreteMeasure1D],
    mu: &[f64],
    a: &RowStochasticMatrix,
    tol: f64,
) -> Result<MajorizationCertificate> {
    let support = x.iter().chain(y).map(DiscreteMeasure1D::len).max().unwrap_or(1);
    let space = Space::wasserstein_1d(support.max(1))?;
    let xs: Vec<Point> = x.iter().cloned().map(Point::Measure).collect();
    let ys: Vec<Point> = y.iter().cloned().map(Point::Measure).collect();
    stochastic::verify_majorization(&space, &xs, lambda, &ys, mu, a, tol)
}
