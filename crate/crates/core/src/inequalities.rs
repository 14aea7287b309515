//! Convex functionals on each space and checkers for the inequalities that
//! majorization implies.
//!
//! Every checker returns a signed slack (positive means the inequality is
//! broken) together with the scale it should be compared against. The fuzz
//! harness aggregates those into [`CheckReport`]s keyed by check and
//! functional.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::barycenter::{self, DiscreteMeasure, SlackCheck, SolverOptions};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{Point, Space};
use crate::sampling;
use crate::stochastic::{self, MajorizationCertificate};
use crate::wasserstein::{self, WFunctional};

/// Relative slack above which a check counts as violated.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Relative tolerance for the NPC comparison inequalities (in units of scale²).
pub const NPC_TOL: f64 = 1e-9;
/// Relative tolerance for the permutation-barycenter reconstruction.
pub const RADO_TOL: f64 = 1e-6;
const SCALE_FLOOR: f64 = 1e-12;
/// Offset `c` of the hinge `max(t − c, 0)`.
pub const HINGE_OFFSET: f64 = 0.5;
const INV_E: f64 = 1.0 / std::f64::consts::E;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Arity {
    /// A function on `M`.
    One,
    /// A function on `Mⁿ` for any `n`.
    Many,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexityKind {
    Convex,
    ConvexNondecreasingOfDistance,
    SymmetricConvexOnPower,
}

type Evaluator = Arc<dyn Fn(&Space, &[Point]) -> Result<f64> + Send + Sync>;

/// A named functional, either on points or on tuples of points.
#[derive(Clone)]
pub struct ConvexFunctional {
    id: String,
    arity: Arity,
    kind: ConvexityKind,
    evaluator: Evaluator,
}

impl fmt::Debug for ConvexFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexFunctional")
            .field("id", &self.id)
            .field("arity", &self.arity)
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

impl ConvexFunctional {
    pub fn new(
        id: impl Into<String>,
        arity: Arity,
        kind: ConvexityKind,
        evaluator: impl Fn(&Space, &[Point]) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            id: id.into(),
            arity,
            kind,
            evaluator: Arc::new(evaluator),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn arity(&self) -> Arity {
        self.arity
    }

    pub fn kind(&self) -> ConvexityKind {
        self.kind
    }

    pub fn is_symmetric(&self) -> bool {
        self.kind == ConvexityKind::SymmetricConvexOnPower
    }

    /// Value at a single point.
    pub fn eval(&self, space: &Space, p: &Point) -> Result<f64> {
        if self.arity != Arity::One {
            return Err(Error::ArityMismatch {
                expected: "n".into(),
                found: 1,
            });
        }
        self.finite((self.evaluator)(space, std::slice::from_ref(p))?)
    }

    /// Value at a tuple `(z₁..zₙ)`.
    pub fn eval_tuple(&self, space: &Space, tuple: &[Point]) -> Result<f64> {
        if self.arity != Arity::Many {
            return Err(Error::ArityMismatch {
                expected: "1".into(),
                found: tuple.len(),
            });
        }
        self.finite((self.evaluator)(space, tuple)?)
    }

    fn finite(&self, v: f64) -> Result<f64> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("functional {}", self.id)))
        }
    }

    /// `−f`, kept under the same convexity flag; a harness sanity control.
    pub fn negated(&self) -> ConvexFunctional {
        let inner = self.evaluator.clone();
        ConvexFunctional {
            id: format!("neg:{}", self.id),
            arity: self.arity,
            kind: self.kind,
            evaluator: Arc::new(move |s, p| inner(s, p).map(|v| -v)),
        }
    }
}

/// Convex nondecreasing shapes `f` applied to distances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DistanceShape {
    Identity,
    Square,
    ExpMinusOne,
    Hinge(f64),
}

impl DistanceShape {
    pub const ALL: [DistanceShape; 4] = [
        DistanceShape::Identity,
        DistanceShape::Square,
        DistanceShape::ExpMinusOne,
        DistanceShape::Hinge(HINGE_OFFSET),
    ];

    pub fn apply(self, t: f64) -> f64 {
        match self {
            DistanceShape::Identity => t,
            DistanceShape::Square => t * t,
            DistanceShape::ExpMinusOne => t.exp_m1(),
            DistanceShape::Hinge(c) => (t - c).max(0.0),
        }
    }

    fn tag(self) -> &'static str {
        match self {
            DistanceShape::Identity => "dist",
            DistanceShape::Square => "dist_sq",
            DistanceShape::ExpMinusOne => "expm1_dist",
            DistanceShape::Hinge(_) => "hinge_dist",
        }
    }
}

/// Sum of the terms after sorting them, so that the result does not depend
/// on the order they were produced in.
fn ordered_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// `Σ_{i<j} d^α(zᵢ, zⱼ)`, exactly invariant under permuting the tuple.
pub fn pairwise_distance_power(space: &Space, tuple: &[Point], alpha: f64) -> Result<f64> {
    let mut terms = Vec::with_capacity(tuple.len() * tuple.len());
    for (i, p) in tuple.iter().enumerate() {
        for (j, q) in tuple.iter().enumerate() {
            if i != j {
                terms.push(space.distance(p, q)?.powf(alpha));
            }
        }
    }
    Ok(0.5 * ordered_sum(terms))
}

fn distance_functional(id: String, shape: DistanceShape, anchor: Point) -> ConvexFunctional {
    ConvexFunctional::new(id, Arity::One, ConvexityKind::ConvexNondecreasingOfDistance, move |s, p| {
        Ok(shape.apply(s.distance(&p[0], &anchor)?))
    })
}

fn euclidean_functional(id: &str, f: fn(&[f64]) -> f64) -> ConvexFunctional {
    ConvexFunctional::new(id, Arity::One, ConvexityKind::Convex, move |_, p| match &p[0] {
        Point::Euclidean(v) => Ok(f(v)),
        _ => Err(Error::NotEuclidean),
    })
}

fn measure_functional(wf: WFunctional) -> ConvexFunctional {
    ConvexFunctional::new(format!("w:{}", wf.id()), Arity::One, ConvexityKind::Convex, move |_, p| match &p[0] {
        Point::Measure(m) => Ok(wf.eval(m)),
        _ => Err(Error::SpaceMismatch("expected a measure on ℝ".into())),
    })
}

/// Built-in functionals for `space`, with distance-based entries anchored
/// at each point of `anchors` (labelled `z0`, `z1`, ...).
///
/// Contents: `f(d(·, z))` for every [`DistanceShape`]; on tuples,
/// `Σ_{i<j} d^α(zᵢ, zⱼ)` for `α ∈ {1, 2, 3}` and `Σᵢ f(d(zᵢ, z))`; coordinate
/// polynomials and norms in Euclidean space; potential and interaction
/// energies on measures over ℝ.
pub fn builtin_registry(space: &Space, anchors: &[Point]) -> Vec<ConvexFunctional> {
    let mut out = Vec::new();
    for (k, z) in anchors.iter().enumerate() {
        for shape in DistanceShape::ALL {
            out.push(distance_functional(format!("{}[z{k}]", shape.tag()), shape, z.clone()));
        }
    }
    if space.is_euclidean() {
        out.push(euclidean_functional("norm_l1", |v| ordered_sum(v.iter().map(|x| x.abs()).collect())));
        out.push(euclidean_functional("norm_l2", |v| v.iter().map(|x| x * x).sum::<f64>().sqrt()));
        out.push(euclidean_functional("norm_linf", |v| v.iter().fold(0.0, |m, x| m.max(x.abs()))));
        out.push(euclidean_functional("sum_sq", |v| v.iter().map(|x| x * x).sum()));
        out.push(euclidean_functional("sum_quartic", |v| v.iter().map(|x| x.powi(4)).sum()));
        out.push(euclidean_functional("sum_sq_plus_linear", |v| v.iter().map(|x| x * x + x).sum()));
    }
    if matches!(space, Space::Wasserstein1D { .. }) {
        out.extend(wasserstein::w_functional_registry().into_iter().map(measure_functional));
    }
    for alpha in [1.0, 2.0, 3.0] {
        out.push(ConvexFunctional::new(
            format!("pair_dist_pow{alpha}"),
            Arity::Many,
            ConvexityKind::SymmetricConvexOnPower,
            move |s, t| pairwise_distance_power(s, t, alpha),
        ));
    }
    for (k, z) in anchors.iter().enumerate() {
        for shape in DistanceShape::ALL {
            let z = z.clone();
            out.push(ConvexFunctional::new(
                format!("sum_{}[z{k}]", shape.tag()),
                Arity::Many,
                ConvexityKind::SymmetricConvexOnPower,
                move |s, t| {
                    let terms = t
                        .iter()
                        .map(|p| s.distance(p, &z).map(|d| shape.apply(d)))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(ordered_sum(terms))
                },
            ));
        }
    }
    out
}

fn slack_check(slack: f64, scale: f64, tol: f64) -> SlackCheck {
    let scale = scale.max(SCALE_FLOOR);
    SlackCheck {
        slack,
        scale,
        ok: slack <= tol * scale,
    }
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Slack of `φ(γ(t)) ≤ (1−t)φ(p) + tφ(q)` along the geodesic from `p` to `q`.
/// Tuple functionals take `p`, `q` as product points.
pub fn geodesic_convexity_slack(
    space: &Space,
    functional: &ConvexFunctional,
    p: &Point,
    q: &Point,
    t: f64,
    tol: f64,
) -> Result<SlackCheck> {
    let (fp, fq, ft) = match functional.arity() {
        Arity::One => {
            let g = space.geodesic_point(p, q, t)?;
            (functional.eval(space, p)?, functional.eval(space, q)?, functional.eval(space, &g)?)
        }
        Arity::Many => {
            let (Point::Product(pp), Point::Product(qq)) = (p, q) else {
                return Err(Error::ArityMismatch {
                    expected: "n".into(),
                    found: 1,
                });
            };
            if pp.len() != qq.len() {
                return Err(Error::LengthMismatch(pp.len(), qq.len()));
            }
            let g = pp
                .iter()
                .zip(qq)
                .map(|(a, b)| space.geodesic_point(a, b, t))
                .collect::<Result<Vec<_>>>()?;
            (
                functional.eval_tuple(space, pp)?,
                functional.eval_tuple(space, qq)?,
                functional.eval_tuple(space, &g)?,
            )
        }
    };
    let slack = ft - (1.0 - t) * fp - t * fq;
    Ok(slack_check(slack, max_abs(&[fp, fq, ft]), tol))
}

/// Samples `trials` random geodesics and checks `functional` along each.
pub fn check_geodesic_convexity(
    space: &Space,
    functional: &ConvexFunctional,
    trials: u64,
    seed: u64,
    tol: f64,
) -> Result<CheckReport> {
    check_geodesic_convexity_with(space, functional, trials, seed, tol, Execution::default())
}

pub fn check_geodesic_convexity_with(
    space: &Space,
    functional: &ConvexFunctional,
    trials: u64,
    seed: u64,
    tol: f64,
    exec: Execution,
) -> Result<CheckReport> {
    let outcomes = exec.map_trials(trials, |trial| -> Result<Outcome> {
        let mut rng = sampling::trial_rng(seed, trial);
        let (p, q) = random_endpoints(space, functional.arity(), &mut rng)?;
        let t = rng.random::<f64>();
        geodesic_convexity_slack(space, functional, &p, &q, t, tol).map(|c| Outcome::from_check(&c, tol))
    });
    let mut report = CheckReport::new("geodesic_convexity", functional.id(), space, seed, tol);
    for (trial, o) in outcomes.into_iter().enumerate() {
        report.record(trial as u64, o?);
    }
    Ok(report)
}

fn random_endpoints<R: Rng + ?Sized>(space: &Space, arity: Arity, rng: &mut R) -> Result<(Point, Point)> {
    Ok(match arity {
        Arity::One => (sampling::random_point(space, rng), sampling::random_point(space, rng)),
        Arity::Many => {
            let n = rng.random_range(2..=4);
            let power = Space::product(vec![space.clone(); n])?;
            (sampling::random_point(&power, rng), sampling::random_point(&power, rng))
        }
    })
}

fn require_unary(f: &ConvexFunctional) -> Result<()> {
    match f.arity() {
        Arity::One => Ok(()),
        Arity::Many => Err(Error::ArityMismatch {
            expected: "1".into(),
            found: 0,
        }),
    }
}

/// Jensen slack `f(bar μ) − Σ λᵢ f(xᵢ)`, compared against `max |f|` over
/// the atoms and the barycenter.
pub fn check_jensen(space: &Space, functional: &ConvexFunctional, measure: &DiscreteMeasure, tol: f64) -> Result<SlackCheck> {
    require_unary(functional)?;
    let bar = barycenter::barycenter_with(space, measure, SolverOptions::with_tol(1e-12))?;
    if !bar.converged {
        return Err(Error::NotConverged);
    }
    let fb = functional.eval(space, &bar.point)?;
    let mut values = vec![fb];
    let mut rhs = 0.0;
    for (x, w) in measure.atoms().iter().zip(measure.weights()) {
        let v = functional.eval(space, x)?;
        rhs += w * v;
        values.push(v);
    }
    Ok(slack_check(fb - rhs, max_abs(&values), tol))
}

/// Slack of `Σ λᵢ f(xᵢ) ≤ Σ μⱼ f(yⱼ)` for a valid certificate.
pub fn check_convex_majorization(
    space: &Space,
    certificate: &MajorizationCertificate,
    functional: &ConvexFunctional,
    tol: f64,
) -> Result<SlackCheck> {
    require_unary(functional)?;
    if !certificate.valid {
        return Err(Error::InvalidCertificate("certificate did not verify".into()));
    }
    let mut values = Vec::new();
    let mut side = |atoms: &[Point], weights: &[f64]| -> Result<f64> {
        let mut s = 0.0;
        for (p, w) in atoms.iter().zip(weights) {
            let v = functional.eval(space, p)?;
            values.push(v);
            s += w * v;
        }
        Ok(s)
    };
    let lhs = side(&certificate.x_atoms, &certificate.lambda)?;
    let rhs = side(&certificate.y_atoms, &certificate.mu)?;
    Ok(slack_check(lhs - rhs, max_abs(&values), tol))
}

fn require_equal_weight(certificate: &MajorizationCertificate) -> Result<()> {
    if certificate.valid && certificate.is_equal_weight() {
        Ok(())
    } else {
        Err(Error::NoCertificate)
    }
}

fn distance_vector(space: &Space, atoms: &[Point], z: &Point) -> Result<Vec<f64>> {
    atoms.iter().map(|p| space.distance(p, z)).collect()
}

/// Largest excess of a descending partial sum of `x` over that of `y`.
fn weak_majorization_excess(x: &[f64], y: &[f64]) -> f64 {
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(|a, b| b.total_cmp(a));
    ys.sort_by(|a, b| b.total_cmp(a));
    let (mut sx, mut sy, mut worst) = (0.0, 0.0, f64::NEG_INFINITY);
    for (a, b) in xs.iter().zip(&ys) {
        sx += a;
        sy += b;
        worst = worst.max(sx - sy);
    }
    worst
}

/// `(d(xᵢ, z))ᵢ ≺* (d(yᵢ, z))ᵢ` for an equal-weight certificate, as a slack:
/// the largest excess of a sorted partial sum, relative to the largest
/// distance.
pub fn check_distance_weak_majorization(
    space: &Space,
    certificate: &MajorizationCertificate,
    z: &Point,
    tol: f64,
) -> Result<SlackCheck> {
    require_equal_weight(certificate)?;
    let dx = distance_vector(space, &certificate.x_atoms, z)?;
    let dy = distance_vector(space, &certificate.y_atoms, z)?;
    let check = slack_check(weak_majorization_excess(&dx, &dy), max_abs(&[max_abs(&dx), max_abs(&dy)]), tol);
    debug_assert_eq!(check.ok, stochastic::weakly_majorizes_tol(&dx, &dy, tol).unwrap_or(false));
    Ok(check)
}

/// `Σ d ln d` over the distance vector.
fn entropy_sum(d: &[f64]) -> f64 {
    ordered_sum(d.iter().map(|t| t * t.ln()).collect())
}

/// Compares `Π d(xᵢ,z)^{d(xᵢ,z)}` with `Π d(yᵢ,z)^{d(yᵢ,z)}` in the log
/// domain. Since `t ln t` is convex and nondecreasing on `[1/e, ∞)`, weak
/// majorization of the distance vectors gives `Σ d ln d (x) ≤ Σ d ln d (y)`,
/// i.e. the product over `x` is the smaller one; the slack is
/// `Σ_x − Σ_y`. Fails with `PreconditionNotMet` when a distance is below
/// `1/e`.
pub fn check_entropy_product(
    space: &Space,
    certificate: &MajorizationCertificate,
    z: &Point,
    tol: f64,
) -> Result<SlackCheck> {
    require_equal_weight(certificate)?;
    let dx = distance_vector(space, &certificate.x_atoms, z)?;
    let dy = distance_vector(space, &certificate.y_atoms, z)?;
    if let Some(d) = dx.iter().chain(&dy).find(|d| **d < INV_E) {
        return Err(Error::PreconditionNotMet(format!("distance {d} < 1/e")));
    }
    let scale: f64 = dx.iter().chain(&dy).map(|t| t * (t.ln().abs() + 1.0)).sum();
    Ok(slack_check(entropy_sum(&dx) - entropy_sum(&dy), scale, tol))
}

fn symmetric_slack(
    certificate: &MajorizationCertificate,
    f: impl Fn(&[Point]) -> Result<f64>,
    tol: f64,
) -> Result<SlackCheck> {
    require_equal_weight(certificate)?;
    let fx = f(&certificate.x_atoms)?;
    let fy = f(&certificate.y_atoms)?;
    Ok(slack_check(fx - fy, max_abs(&[fx, fy]), tol))
}

/// Slack of `Σ_{i<j} d^α(xᵢ,xⱼ) ≤ Σ_{i<j} d^α(yᵢ,yⱼ)`, `α ≥ 1`.
pub fn check_dispersion(space: &Space, certificate: &MajorizationCertificate, alpha: f64, tol: f64) -> Result<SlackCheck> {
    if !(alpha >= 1.0 && alpha.is_finite()) {
        return Err(Error::AlphaOutOfRange(alpha));
    }
    symmetric_slack(certificate, |t| pairwise_distance_power(space, t, alpha), tol)
}

/// Evaluates `f` on a few rearrangements of `tuple` and requires bitwise
/// equal values.
pub fn verify_symmetry(space: &Space, functional: &ConvexFunctional, tuple: &[Point]) -> Result<()> {
    let base = functional.eval_tuple(space, tuple)?;
    let n = tuple.len();
    let mut rearrangements: Vec<Vec<Point>> = vec![tuple.iter().rev().cloned().collect()];
    if n > 2 {
        let mut rot = tuple.to_vec();
        rot.rotate_left(1);
        rearrangements.push(rot);
        let mut swap = tuple.to_vec();
        swap.swap(0, n - 1);
        rearrangements.push(swap);
    }
    for r in rearrangements {
        if functional.eval_tuple(space, &r)?.to_bits() != base.to_bits() {
            return Err(Error::NotSymmetric(functional.id().to_string()));
        }
    }
    Ok(())
}

/// Slack of `F(x₁..xₙ) ≤ F(y₁..yₙ)` for a symmetric tuple functional.
pub fn check_schur(
    space: &Space,
    certificate: &MajorizationCertificate,
    functional: &ConvexFunctional,
    tol: f64,
) -> Result<SlackCheck> {
    if functional.arity() != Arity::Many {
        return Err(Error::ArityMismatch {
            expected: "n".into(),
            found: 1,
        });
    }
    if !functional.is_symmetric() {
        return Err(Error::NotSymmetric(functional.id().to_string()));
    }
    verify_symmetry(space, functional, &certificate.x_atoms)?;
    symmetric_slack(certificate, |t| functional.eval_tuple(space, t), tol)
}

/// Symmetric gauge functions on `ℝⁿ₊`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gauge {
    L1,
    L2,
    LInf,
    /// Sum of the `k` largest entries.
    TopK(usize),
}

impl Gauge {
    pub fn family(n: usize) -> Vec<Gauge> {
        let mut g = vec![Gauge::L1, Gauge::L2, Gauge::LInf];
        g.extend((1..=n).map(Gauge::TopK));
        g
    }

    pub fn eval(self, v: &[f64]) -> f64 {
        match self {
            Gauge::L1 => ordered_sum(v.iter().map(|x| x.abs()).collect()),
            Gauge::L2 => ordered_sum(v.iter().map(|x| x * x).collect()).sqrt(),
            Gauge::LInf => max_abs(v),
            Gauge::TopK(k) => {
                let mut a: Vec<f64> = v.iter().map(|x| x.abs()).collect();
                a.sort_by(|x, y| y.total_cmp(x));
                a.iter().take(k).sum()
            }
        }
    }
}

impl fmt::Display for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gauge::L1 => write!(f, "l1"),
            Gauge::L2 => write!(f, "l2"),
            Gauge::LInf => write!(f, "linf"),
            Gauge::TopK(k) => write!(f, "top{k}"),
        }
    }
}

impl FromStr for Gauge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(Gauge::L1),
            "l2" => Ok(Gauge::L2),
            "linf" => Ok(Gauge::LInf),
            _ => s
                .strip_prefix("top")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|k| *k >= 1)
                .map(Gauge::TopK)
                .ok_or_else(|| Error::UnknownGauge(s.to_string())),
        }
    }
}

/// Slack of `Φ(d(x·, z)) ≤ Φ(d(y·, z))` for a symmetric gauge `Φ`.
pub fn check_gauge(
    space: &Space,
    certificate: &MajorizationCertificate,
    z: &Point,
    gauge: Gauge,
    tol: f64,
) -> Result<SlackCheck> {
    require_equal_weight(certificate)?;
    if let Gauge::TopK(k) = gauge {
        if k == 0 || k > certificate.x_atoms.len() {
            return Err(Error::UnknownGauge(gauge.to_string()));
        }
    }
    let gx = gauge.eval(&distance_vector(space, &certificate.x_atoms, z)?);
    let gy = gauge.eval(&distance_vector(space, &certificate.y_atoms, z)?);
    Ok(slack_check(gx - gy, max_abs(&[gx, gy]), tol))
}

/// NPC comparison slacks for the triple `(x₀, x₁, z)`, in units of scale².
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NpcSlack {
    /// `d²(z, m) − ½d²(z,x₀) − ½d²(z,x₁) + ¼d²(x₀,x₁)` for the midpoint `m`.
    pub midpoint: f64,
    /// `d²(z, xₜ) − (1−t)d²(z,x₀) − t·d²(z,x₁) + t(1−t)d²(x₀,x₁)`.
    pub interpolated: f64,
    pub scale: f64,
}

pub fn npc_slack(space: &Space, x0: &Point, x1: &Point, z: &Point, t: f64) -> Result<NpcSlack> {
    let d01 = space.distance(x0, x1)?;
    let dz0 = space.distance(z, x0)?;
    let dz1 = space.distance(z, x1)?;
    let scale = d01.max(dz0).max(dz1).max(SCALE_FLOOR);
    let m = space.midpoint(x0, x1)?;
    let xt = space.geodesic_point(x0, x1, t)?;
    let dm = space.distance(z, &m)?;
    let dt = space.distance(z, &xt)?;
    let s2 = scale * scale;
    Ok(NpcSlack {
        midpoint: (dm * dm - 0.5 * dz0 * dz0 - 0.5 * dz1 * dz1 + 0.25 * d01 * d01) / s2,
        interpolated: (dt * dt - (1.0 - t) * dz0 * dz0 - t * dz1 * dz1 + t * (1.0 - t) * d01 * d01) / s2,
        scale,
    })
}

/// Slack of `d(γ(t), η(t)) ≤ (1−t)d(γ(0),η(0)) + t·d(γ(1),η(1))`.
pub fn joint_convexity_slack(space: &Space, g0: &Point, g1: &Point, h0: &Point, h1: &Point, t: f64) -> Result<SlackCheck> {
    let gt = space.geodesic_point(g0, g1, t)?;
    let ht = space.geodesic_point(h0, h1, t)?;
    let all = [g0, g1, h0, h1];
    let scale = barycenter::pairwise_scale(space, &all)?;
    let slack = space.distance(&gt, &ht)? - (1.0 - t) * space.distance(g0, h0)? - t * space.distance(g1, h1)?;
    Ok(slack_check(slack, scale, NPC_TOL))
}

/// Per-trial result: a normalized slack or a skip.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Outcome {
    /// `slack / scale` and the threshold it is compared against.
    Slack { normalized: f64, tol: f64 },
    Skip,
}

impl Outcome {
    pub fn from_check(c: &SlackCheck, tol: f64) -> Self {
        Outcome::Slack {
            normalized: c.slack / c.scale,
            tol,
        }
    }

    fn indicator(bad: bool) -> Self {
        Outcome::Slack {
            normalized: if bad { 1.0 } else { 0.0 },
            tol: 0.5,
        }
    }
}

/// Aggregated result of one check over many trials.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub functional: String,
    pub space: String,
    pub seed: u64,
    pub trials: u64,
    pub violations: u64,
    pub skipped: u64,
    /// Largest normalized slack seen; `None` if every trial was skipped.
    pub worst_slack: Option<f64>,
    pub tol: f64,
    /// Trial indices (replay with the same seed) that violated the check.
    pub instances: Vec<u64>,
    pub skipped_instances: Vec<u64>,
}

impl CheckReport {
    pub fn new(check: &str, functional: &str, space: &Space, seed: u64, tol: f64) -> Self {
        Self {
            check: check.to_string(),
            functional: functional.to_string(),
            space: space.label(),
            seed,
            trials: 0,
            violations: 0,
            skipped: 0,
            worst_slack: None,
            tol,
            instances: Vec::new(),
            skipped_instances: Vec::new(),
        }
    }

    pub fn record(&mut self, trial: u64, outcome: Outcome) {
        self.trials += 1;
        match outcome {
            Outcome::Skip => {
                self.skipped += 1;
                self.skipped_instances.push(trial);
            }
            Outcome::Slack { normalized, tol } => {
                self.tol = tol;
                self.worst_slack = Some(self.worst_slack.map_or(normalized, |w| w.max(normalized)));
                if !(normalized <= tol) {
                    self.violations += 1;
                    self.instances.push(trial);
                }
            }
        }
    }

    /// `check:functional`, the name used in CSV output.
    pub fn name(&self) -> String {
        format!("{}:{}", self.check, self.functional)
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Groups of checks selectable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Npc,
    Convexity,
    Jensen,
    Majorization,
    Weak,
    Entropy,
    Dispersion,
    Schur,
    Rado,
    Barycentric,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Npc,
        Suite::Convexity,
        Suite::Jensen,
        Suite::Majorization,
        Suite::Weak,
        Suite::Entropy,
        Suite::Dispersion,
        Suite::Schur,
        Suite::Rado,
        Suite::Barycentric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Npc => "npc",
            Suite::Convexity => "convexity",
            Suite::Jensen => "jensen",
            Suite::Majorization => "majorization",
            Suite::Weak => "weak",
            Suite::Entropy => "entropy",
            Suite::Dispersion => "dispersion",
            Suite::Schur => "schur",
            Suite::Rado => "rado",
            Suite::Barycentric => "barycentric",
        }
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
                format!("unknown suite '{s}' (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FuzzOptions {
    pub suites: Vec<Suite>,
    pub execution: Execution,
    /// Also run the negation of every registry functional; those reports
    /// are expected to show violations.
    pub negative_controls: bool,
    /// Anchors per instance.
    pub anchors: usize,
    /// Largest equal-weight tuple size.
    pub max_n: usize,
}

impl Default for FuzzOptions {
    fn default() -> Self {
        Self {
            suites: Suite::ALL.to_vec(),
            execution: Execution::default(),
            negative_controls: false,
            anchors: 2,
            max_n: 4,
        }
    }
}

impl FuzzOptions {
    pub fn only(suites: &[Suite]) -> Self {
        Self {
            suites: suites.to_vec(),
            ..Self::default()
        }
    }

    fn has(&self, s: Suite) -> bool {
        self.suites.contains(&s)
    }
}

struct Record {
    check: &'static str,
    functional: String,
    outcome: Outcome,
}

struct Recorder(Vec<Record>);

impl Recorder {
    fn push(&mut self, check: &'static str, functional: impl Into<String>, outcome: Outcome) {
        self.0.push(Record {
            check,
            functional: functional.into(),
            outcome,
        });
    }

    /// Records a checker result; `NotConverged` and `PreconditionNotMet`
    /// become skips, anything else is a harness error.
    fn result(&mut self, check: &'static str, functional: impl Into<String>, r: Result<SlackCheck>, tol: f64) -> Result<()> {
        let outcome = match r {
            Ok(c) => Outcome::from_check(&c, tol),
            Err(Error::NotConverged | Error::PreconditionNotMet(_)) => Outcome::Skip,
            Err(e) => return Err(e),
        };
        self.push(check, functional, outcome);
        Ok(())
    }
}

/// Random majorization instances for one trial.
struct Instance {
    /// General weights, `m×n` row-stochastic `A`.
    general: MajorizationCertificate,
    /// Equal weights, doubly stochastic `A`.
    equal: MajorizationCertificate,
    anchors: Vec<Point>,
    jensen: DiscreteMeasure,
}

fn build_instance<R: Rng + ?Sized>(space: &Space, opts: &FuzzOptions, tol: f64, rng: &mut R) -> Result<Instance> {
    let (m, n) = (rng.random_range(1..=4), rng.random_range(1..=4));
    let y: Vec<Point> = (0..n).map(|_| sampling::random_point(space, rng)).collect();
    let lambda = sampling::random_probability(m, rng);
    let a = sampling::random_row_stochastic(m, n, 0.3, rng);
    let general = stochastic::synthesize_majorized(space, &y, &lambda, &a, tol)?.certificate;

    let n = rng.random_range(2..=opts.max_n.max(2));
    let y: Vec<Point> = (0..n).map(|_| sampling::random_point(space, rng)).collect();
    let k = rng.random_range(1..=4);
    let (d, _) = sampling::random_doubly_stochastic(n, k, rng);
    let d = stochastic::RowStochasticMatrix::new(d)?;
    let uniform = vec![1.0 / n as f64; n];
    let equal = stochastic::synthesize_majorized(space, &y, &uniform, &d, tol)?.certificate;

    let center_measure = DiscreteMeasure::new(space, y.clone(), uniform)?;
    let center = barycenter::barycenter_with(space, &center_measure, SolverOptions::with_tol(1e-12))?;
    let scale = equal.scale.max(SCALE_FLOOR);
    let anchors = (0..opts.anchors)
        .map(|_| sampling::random_anchor(space, &center.point, 2.0 * scale, rng))
        .collect::<Result<Vec<_>>>()?;

    let k = rng.random_range(1..=4);
    let atoms: Vec<Point> = (0..k).map(|_| sampling::random_point(space, rng)).collect();
    let jensen = DiscreteMeasure::new(space, atoms, sampling::random_probability(k, rng))?;
    Ok(Instance {
        general,
        equal,
        anchors,
        jensen,
    })
}

fn run_trial(space: &Space, seed: u64, trial: u64, tol: f64, opts: &FuzzOptions) -> Result<Vec<Record>> {
    let mut rng = sampling::trial_rng(seed, trial);
    let mut rec = Recorder(Vec::new());

    if opts.has(Suite::Npc) {
        let (x0, x1, z) = (
            sampling::random_point(space, &mut rng),
            sampling::random_point(space, &mut rng),
            sampling::random_point(space, &mut rng),
        );
        let t = rng.random::<f64>();
        let s = npc_slack(space, &x0, &x1, &z, t)?;
        rec.push("npc", "midpoint", Outcome::Slack { normalized: s.midpoint, tol: NPC_TOL });
        rec.push("npc", "interpolated", Outcome::Slack { normalized: s.interpolated, tol: NPC_TOL });
        let (h0, h1) = (sampling::random_point(space, &mut rng), sampling::random_point(space, &mut rng));
        let c = joint_convexity_slack(space, &x0, &x1, &h0, &h1, t)?;
        rec.push("npc", "joint_distance", Outcome::from_check(&c, NPC_TOL));
    }

    let needs_instance = opts.suites.iter().any(|s| !matches!(s, Suite::Npc | Suite::Barycentric));
    let inst = if needs_instance {
        match build_instance(space, opts, tol, &mut rng) {
            Ok(i) => Some(i),
            Err(Error::NotConverged | Error::InvalidCertificate(_)) => {
                rec.push("setup", "synthesis", Outcome::Skip);
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    if let Some(inst) = &inst {
        let mut registry = builtin_registry(space, &inst.anchors);
        if opts.negative_controls {
            let controls: Vec<ConvexFunctional> = registry.iter().map(ConvexFunctional::negated).collect();
            registry.extend(controls);
        }
        let unary = || registry.iter().filter(|f| f.arity() == Arity::One);
        let tuple = || registry.iter().filter(|f| f.arity() == Arity::Many);

        if opts.has(Suite::Convexity) {
            for f in &registry {
                let (p, q) = random_endpoints(space, f.arity(), &mut rng)?;
                let t = rng.random::<f64>();
                rec.result("geodesic_convexity", f.id(), geodesic_convexity_slack(space, f, &p, &q, t, tol), tol)?;
            }
        }
        if opts.has(Suite::Jensen) {
            for f in unary() {
                rec.result("jensen", f.id(), check_jensen(space, f, &inst.jensen, tol), tol)?;
            }
        }
        if opts.has(Suite::Majorization) {
            for f in unary() {
                rec.result("majorization", f.id(), check_convex_majorization(space, &inst.general, f, tol), tol)?;
            }
        }
        let n = inst.equal.x_atoms.len();
        if opts.has(Suite::Weak) {
            for (k, z) in inst.anchors.iter().enumerate() {
                let wm = check_distance_weak_majorization(space, &inst.equal, z, tol)?;
                rec.push("weak_majorization", format!("z{k}"), Outcome::from_check(&wm, tol));
                let mut inconsistent = false;
                for g in Gauge::family(n) {
                    let gc = check_gauge(space, &inst.equal, z, g, tol)?;
                    inconsistent |= wm.ok && !gc.ok;
                    let name = match g {
                        Gauge::TopK(k) if k == n => "topn".to_string(),
                        _ => g.to_string(),
                    };
                    rec.push("gauge", name, Outcome::from_check(&gc, tol));
                }
                rec.push("gauge_consistency", format!("z{k}"), Outcome::indicator(inconsistent));
            }
        }
        if opts.has(Suite::Entropy) {
            for (k, z) in inst.anchors.iter().enumerate() {
                rec.result("entropy_product", format!("z{k}"), check_entropy_product(space, &inst.equal, z, tol), tol)?;
            }
        }
        if opts.has(Suite::Dispersion) {
            for alpha in [1.0, 2.0, 3.0] {
                rec.result("dispersion", format!("alpha{alpha}"), check_dispersion(space, &inst.equal, alpha, tol), tol)?;
            }
        }
        if opts.has(Suite::Schur) {
            for f in tuple() {
                rec.result("schur", f.id(), check_schur(space, &inst.equal, f, tol), tol)?;
            }
        }
        if opts.has(Suite::Rado) {
            let r = stochastic::rado_probe(space, &inst.equal.x_atoms, &inst.equal.y_atoms, Some(&inst.equal.a), RADO_TOL)?;
            rec.push(
                "rado_necessity",
                "permutation_barycenter",
                Outcome::Slack {
                    normalized: r.reconstruction_residual / r.scale.max(SCALE_FLOOR),
                    tol: RADO_TOL,
                },
            );
            if let Some(member) = r.hull_member {
                rec.push("rado_hull", "lp_membership", Outcome::indicator(!member));
            }
        }
    }

    if opts.has(Suite::Barycentric) {
        if let Space::Wasserstein1D { support_size } = space {
            let k = rng.random_range(1..=4);
            let measures: Vec<_> = (0..k).map(|_| sampling::random_measure_1d(*support_size, &mut rng)).collect();
            let weights = sampling::random_probability(k, &mut rng);
            let mut controls = wasserstein::w_functional_registry();
            for f in controls.drain(..) {
                let slack = wasserstein::barycentric_convexity_slack(&f, &measures, &weights)?;
                let bar = wasserstein::w2_barycenter_1d(&measures, &weights)?;
                let values: Vec<f64> = measures.iter().chain(std::iter::once(&bar)).map(|m| f.eval(m)).collect();
                let c = slack_check(slack, max_abs(&values), tol);
                rec.push("barycentric_convexity", f.id(), Outcome::from_check(&c, tol));
            }
        }
    }
    Ok(rec.0)
}

/// Runs every selected check over `trials` seeded random instances and
/// returns one report per (check, functional), sorted by name. Trial `i`
/// draws from the stream `(seed, i)`, so results do not depend on
/// scheduling.
pub fn fuzz_suite(space: &Space, seed: u64, trials: u64, tol: f64, opts: &FuzzOptions) -> Result<Vec<CheckReport>> {
    if trials == 0 {
        return Err(Error::ParameterOutOfRange("trials must be at least 1".into()));
    }
    let per_trial = opts.execution.map_trials(trials, |t| run_trial(space, seed, t, tol, opts));
    let mut reports: BTreeMap<(String, String), CheckReport> = BTreeMap::new();
    for (trial, records) in per_trial.into_iter().enumerate() {
        for r in records? {
            reports
                .entry((r.check.to_string(), r.functional.clone()))
                .or_insert_with(|| CheckReport::new(r.check, &r.functional, space, seed, tol))
                .record(trial as u64, r.outcome);
        }
    }
    Ok(reports.into_values().collect())
}
