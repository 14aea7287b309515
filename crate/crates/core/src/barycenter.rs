//! Weighted Fréchet (Karcher) barycenters of finitely supported measures.
//!
//! `bar(λ) = argmin_z J(z)`, `J(z) = ½ Σ λᵢ d²(z, xᵢ)`. Closed forms are used
//! where they exist (Euclidean mean, two-atom geodesic point, quantile
//! average in W₂, componentwise in products); everything else runs the
//! fixed-point map `z ← exp_z(Σ λᵢ log_z xᵢ)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Point, Space, TangentVector};
use crate::wasserstein::{self, DiscreteMeasure1D};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Armijo fraction for accepting a step of the fixed-point iteration.
const SUFFICIENT_DECREASE: f64 = 0.25;
const WEIGHT_SUM_TOL: f64 = 1e-12;
const SCALE_FLOOR: f64 = 1e-12;

/// Finite list of atoms with probability weights.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<Point>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(space: &Space, atoms: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidMeasure("no atoms".into()));
        }
        if atoms.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidMeasure("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}")));
        }
        for a in &atoms {
            space.check_point(a)?;
        }
        Ok(Self { atoms, weights })
    }

    pub fn dirac(space: &Space, p: Point) -> Result<Self> {
        Self::new(space, vec![p], vec![1.0])
    }

    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Atoms with positive weight, weights unchanged.
    fn support(&self) -> (Vec<&Point>, Vec<f64>) {
        self.atoms
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(a, w)| (a, *w))
            .unzip()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarycenterResult {
    pub point: Point,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Max pairwise distance among supported atoms, floored at 1e-12.
    pub scale: f64,
}

/// Summary without the point, for reports.
#[derive(Clone, Debug, Serialize)]
pub struct BarycenterSummary {
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl From<&BarycenterResult> for BarycenterSummary {
    fn from(r: &BarycenterResult) -> Self {
        Self {
            objective: r.objective,
            grad_norm: r.grad_norm,
            iterations: r.iterations,
            converged: r.converged,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Skip closed forms and always iterate (used to cross-check them).
    pub force_iterative: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            force_iterative: false,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// `J(z) = ½ Σ λᵢ d²(z, xᵢ)`.
pub fn objective(space: &Space, measure: &DiscreteMeasure, z: &Point) -> Result<f64> {
    space.check_point(z)?;
    let mut s = 0.0;
    for (a, w) in measure.atoms.iter().zip(&measure.weights) {
        if *w > 0.0 {
            s += w * space.distance(z, a)?.powi(2);
        }
    }
    Ok(0.5 * s)
}

/// Max pairwise distance among the given points, floored at 1e-12.
pub fn pairwise_scale(space: &Space, points: &[&Point]) -> Result<f64> {
    let mut s: f64 = 0.0;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            s = s.max(space.distance(points[i], points[j])?);
        }
    }
    Ok(s.max(SCALE_FLOOR))
}

/// Tangent mean `Σ λᵢ log_z xᵢ`, i.e. the negative Riemannian gradient of J.
pub fn tangent_mean(space: &Space, atoms: &[&Point], weights: &[f64], z: &Point) -> Result<TangentVector> {
    let logs: Vec<TangentVector> = atoms
        .iter()
        .map(|a| space.log_map(z, a))
        .collect::<Result<_>>()?;
    let terms: Vec<(f64, &TangentVector)> = weights.iter().copied().zip(logs.iter()).collect();
    space.tangent_combination(z, &terms)
}

pub fn barycenter(space: &Space, measure: &DiscreteMeasure, tol: f64, max_iter: usize) -> Result<BarycenterResult> {
    barycenter_with(
        space,
        measure,
        SolverOptions {
            tol,
            max_iter,
            force_iterative: false,
        },
    )
}

pub fn barycenter_with(space: &Space, measure: &DiscreteMeasure, opts: SolverOptions) -> Result<BarycenterResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("tol = {}", opts.tol)));
    }
    if opts.max_iter < 1 {
        return Err(Error::ParameterOutOfRange("max_iter must be >= 1".into()));
    }
    let (atoms, weights) = measure.support();
    let scale = pairwise_scale(space, &atoms)?;
    let finish = |point: Point, iterations: usize, converged: bool| -> Result<BarycenterResult> {
        let grad = tangent_mean(space, &atoms, &weights, &point)?;
        let grad_norm = space.tangent_norm(&grad)?;
        let objective = objective(space, measure, &point)?;
        if !objective.is_finite() || !grad_norm.is_finite() {
            return Err(Error::NonFinite("barycenter objective".into()));
        }
        Ok(BarycenterResult {
            point,
            objective,
            grad_norm,
            iterations,
            converged,
            scale,
        })
    };

    let first = atoms[0];
    if atoms.iter().all(|a| *a == first) {
        return finish(first.clone(), 0, true);
    }

    if !opts.force_iterative {
        if let Some(p) = closed_form(space, &atoms, &weights, opts)? {
            return finish(p, 0, true);
        }
    }

    // Start at the heaviest atom, lowest index on ties.
    let start = weights
        .iter()
        .enumerate()
        .fold(0, |best, (i, w)| if *w > weights[best] { i } else { best });
    let mut z = atoms[start].clone();
    let threshold = opts.tol * scale;
    let mut j_z = objective(space, measure, &z)?;
    let mut g = tangent_mean(space, &atoms, &weights, &z)?;
    let mut gn = space.tangent_norm(&g)?;
    // Differences in J below this are rounding noise.
    let noise = 1e-13 * (j_z + scale * scale);
    let mut step: f64 = 1.0;
    for it in 0..opts.max_iter {
        if !gn.is_finite() {
            return Err(Error::NonFinite("tangent mean".into()));
        }
        if gn <= threshold {
            return finish(z, it, true);
        }
        // Try the remembered step; halve until it makes enough progress.
        loop {
            let cand = space.exp_map(&z, &g.scale(step))?;
            let j_c = objective(space, measure, &cand)?;
            if !j_c.is_finite() {
                return Err(Error::NonFinite("barycenter iterate".into()));
            }
            let g_c = tangent_mean(space, &atoms, &weights, &cand)?;
            let gn_c = space.tangent_norm(&g_c)?;
            // Demand sufficient progress, not just any: step 1 can settle into
            // a 2-cycle in which J creeps down while the gradient stays put.
            let wanted = SUFFICIENT_DECREASE * step * gn * gn;
            let better = if wanted > noise {
                j_c <= j_z - wanted
            } else {
                gn_c <= (1.0 - SUFFICIENT_DECREASE * step) * gn
            };
            if better || step < 1e-9 {
                (z, j_z, g, gn) = (cand, j_c, g_c, gn_c);
                break;
            }
            step *= 0.5;
        }
        step = (2.0 * step).min(1.0);
    }
    let g = tangent_mean(space, &atoms, &weights, &z)?;
    let converged = space.tangent_norm(&g)? <= threshold;
    finish(z, opts.max_iter, converged)
}

fn closed_form(space: &Space, atoms: &[&Point], weights: &[f64], opts: SolverOptions) -> Result<Option<Point>> {
    Ok(match space {
        Space::Euclidean { dim } => {
            let mut acc = vec![0.0; *dim];
            for (a, w) in atoms.iter().zip(weights) {
                let Point::Euclidean(v) = a else { unreachable!("validated") };
                for (s, x) in acc.iter_mut().zip(v) {
                    *s += w * x;
                }
            }
            let total: f64 = weights.iter().sum();
            Some(Point::Euclidean(acc.into_iter().map(|s| s / total).collect()))
        }
        Space::Wasserstein1D { .. } => {
            let ms: Vec<DiscreteMeasure1D> = atoms
                .iter()
                .map(|a| match a {
                    Point::Measure(m) => m.clone(),
                    _ => unreachable!("validated"),
                })
                .collect();
            let total: f64 = weights.iter().sum();
            let w: Vec<f64> = weights.iter().map(|x| x / total).collect();
            Some(Point::Measure(wasserstein::w2_barycenter_1d(&ms, &w)?))
        }
        Space::Product { factors } => {
            // J separates over factors, so the minimizer is componentwise.
            let mut parts = Vec::with_capacity(factors.len());
            for (k, f) in factors.iter().enumerate() {
                let comp: Vec<Point> = atoms
                    .iter()
                    .map(|a| match a {
                        Point::Product(p) => p[k].clone(),
                        _ => unreachable!("validated"),
                    })
                    .collect();
                let total: f64 = weights.iter().sum();
                let w: Vec<f64> = weights.iter().map(|x| x / total).collect();
                let m = DiscreteMeasure { atoms: comp, weights: w };
                let r = barycenter_with(f, &m, opts)?;
                if !r.converged {
                    return Ok(None);
                }
                parts.push(r.point);
            }
            Some(Point::Product(parts))
        }
        _ if atoms.len() == 2 => {
            let t = weights[1] / (weights[0] + weights[1]);
            Some(space.geodesic_point(atoms[0], atoms[1], t)?)
        }
        _ => None,
    })
}

/// Signed slack of `d²(bar, z) ≤ Σ λᵢ d²(xᵢ, z)`, normalized by `scale²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlackCheck {
    pub slack: f64,
    pub scale: f64,
    pub ok: bool,
}

pub fn variance_inequality_check(space: &Space, measure: &DiscreteMeasure, z: &Point, tol: f64) -> Result<SlackCheck> {
    let bar = barycenter_with(space, measure, SolverOptions::with_tol(1e-12))?;
    if !bar.converged {
        return Err(Error::NotConverged);
    }
    let lhs = space.distance(&bar.point, z)?.powi(2);
    let mut rhs = 0.0;
    let mut pts: Vec<&Point> = vec![z];
    for (a, w) in measure.atoms.iter().zip(&measure.weights) {
        rhs += w * space.distance(a, z)?.powi(2);
        pts.push(a);
    }
    let scale = pairwise_scale(space, &pts)?;
    let slack = lhs - rhs;
    Ok(SlackCheck {
        slack,
        scale,
        ok: slack <= tol * scale * scale,
    })
}

/// `d(bar x, bar y) ≤ (1/n) Σ d(xᵢ, yᵢ)` for equal-weight barycenters.
pub fn mean_contraction_check(space: &Space, x: &[Point], y: &[Point], tol: f64) -> Result<SlackCheck> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = x.len();
    let w = vec![1.0 / n as f64; n];
    let mx = DiscreteMeasure::new(space, x.to_vec(), w.clone())?;
    let my = DiscreteMeasure::new(space, y.to_vec(), w)?;
    let opts = SolverOptions::with_tol(1e-12);
    let (bx, by) = (barycenter_with(space, &mx, opts)?, barycenter_with(space, &my, opts)?);
    if !bx.converged || !by.converged {
        return Err(Error::NotConverged);
    }
    let lhs = space.distance(&bx.point, &by.point)?;
    let mut rhs = 0.0;
    for (a, b) in x.iter().zip(y) {
        rhs += space.distance(a, b)?;
    }
    rhs /= n as f64;
    let all: Vec<&Point> = x.iter().chain(y).collect();
    let scale = pairwise_scale(space, &all)?;
    let slack = lhs - rhs;
    Ok(SlackCheck {
        slack,
        scale,
        ok: slack <= tol * scale,
    })
}
