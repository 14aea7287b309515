//! Model spaces of nonpositive curvature.
//!
//! Each [`Space`] carries closed-form distances, constant-speed geodesics on
//! `[0, 1]`, and log/exp maps. The supported kinds are Euclidean space, the
//! Poincaré upper half-plane, symmetric positive-definite matrices under the
//! trace (affine-invariant) metric, finite direct products with the ℓ²
//! product metric, and finitely supported measures on ℝ under W₂.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use crate::wasserstein::{self, DiscreteMeasure1D, QuantileFn};

/// Points with imaginary part below this are rejected.
pub const HALF_PLANE_MIN_IM: f64 = 1e-12;
/// Smallest eigenvalue accepted relative to the largest.
pub const SPD_MIN_REL_EIGENVALUE: f64 = 1e-12;

/// Geometry descriptor. Immutable once built; all constructors validate.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "SpaceRepr")]
pub enum Space {
    Euclidean { dim: usize },
    HalfPlane,
    Spd { order: usize },
    Product { factors: Vec<Space> },
    #[serde(rename = "wasserstein1d")]
    Wasserstein1D { support_size: usize },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum SpaceRepr {
    Euclidean { dim: usize },
    HalfPlane,
    Spd { order: usize },
    Product { factors: Vec<Space> },
    #[serde(rename = "wasserstein1d")]
    Wasserstein1D { support_size: usize },
}

impl TryFrom<SpaceRepr> for Space {
    type Error = Error;
    fn try_from(r: SpaceRepr) -> Result<Self> {
        let s = match r {
            SpaceRepr::Euclidean { dim } => Space::Euclidean { dim },
            SpaceRepr::HalfPlane => Space::HalfPlane,
            SpaceRepr::Spd { order } => Space::Spd { order },
            SpaceRepr::Product { factors } => Space::Product { factors },
            SpaceRepr::Wasserstein1D { support_size } => Space::Wasserstein1D { support_size },
        };
        s.validate()?;
        Ok(s)
    }
}

/// Element of a [`Space`].
#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    Euclidean(Vec<f64>),
    HalfPlane { re: f64, im: f64 },
    Spd(SymMatrix),
    Product(Vec<Point>),
    Measure(DiscreteMeasure1D),
}

/// Coordinates of a tangent vector, shaped like the space it lives in.
#[derive(Clone, Debug, PartialEq)]
pub enum Tangent {
    /// Euclidean vectors, and `(dx, dy)` for the half-plane.
    Vector(Vec<f64>),
    Matrix(SymMatrix),
    Product(Vec<Tangent>),
    Quantile(QuantileFn),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub base: Point,
    pub components: Tangent,
}

impl Space {
    pub fn euclidean(dim: usize) -> Result<Self> {
        let s = Space::Euclidean { dim };
        s.validate()?;
        Ok(s)
    }

    pub fn spd(order: usize) -> Result<Self> {
        let s = Space::Spd { order };
        s.validate()?;
        Ok(s)
    }

    pub fn product(factors: Vec<Space>) -> Result<Self> {
        let s = Space::Product { factors };
        s.validate()?;
        Ok(s)
    }

    pub fn wasserstein_1d(support_size: usize) -> Result<Self> {
        let s = Space::Wasserstein1D { support_size };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Space::Euclidean { dim: 0 } => Err(Error::InvalidSpace("euclidean dim must be >= 1".into())),
            Space::Spd { order: 0 } => Err(Error::InvalidSpace("spd order must be >= 1".into())),
            Space::Wasserstein1D { support_size: 0 } => {
                Err(Error::InvalidSpace("wasserstein support_size must be >= 1".into()))
            }
            Space::Product { factors } if factors.is_empty() => {
                Err(Error::InvalidSpace("product needs at least one factor".into()))
            }
            Space::Product { factors } => factors.iter().try_for_each(Space::validate),
            _ => Ok(()),
        }
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self, Space::Euclidean { .. })
    }

    /// Short label used in reports and on the command line.
    pub fn label(&self) -> String {
        match self {
            Space::Euclidean { dim } => format!("euclidean:{dim}"),
            Space::HalfPlane => "halfplane".into(),
            Space::Spd { order } => format!("spd:{order}"),
            Space::Product { factors } => {
                let inner: Vec<String> = factors.iter().map(Space::label).collect();
                format!("product({})", inner.join(","))
            }
            Space::Wasserstein1D { support_size } => format!("wasserstein1d:{support_size}"),
        }
    }

    /// Parses the label syntax: `euclidean:N`, `halfplane`, `spd:N`,
    /// `wasserstein1d:K`, `product(a,b,...)`.
    pub fn parse_label(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidSpace(format!("cannot parse space '{s}'"));
        if let Some(inner) = s.strip_prefix("product(").and_then(|r| r.strip_suffix(')')) {
            let mut factors = Vec::new();
            let mut depth = 0usize;
            let mut start = 0;
            for (i, c) in inner.char_indices() {
                match c {
                    '(' => depth += 1,
                    ')' => depth = depth.checked_sub(1).ok_or_else(bad)?,
                    ',' if depth == 0 => {
                        factors.push(Space::parse_label(&inner[start..i])?);
                        start = i + 1;
                    }
                    _ => {}
                }
            }
            factors.push(Space::parse_label(&inner[start..])?);
            return Space::product(factors);
        }
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>| -> Result<usize> { a.ok_or_else(bad)?.parse().map_err(|_| bad()) };
        match kind.to_ascii_lowercase().as_str() {
            "euclidean" => Space::euclidean(num(arg)?),
            "halfplane" | "half_plane" if arg.is_none() => Ok(Space::HalfPlane),
            "spd" => Space::spd(num(arg)?),
            "wasserstein1d" => Space::wasserstein_1d(num(arg)?),
            _ => Err(bad()),
        }
    }

    /// Returns the specific violated invariant, or `None` if `p` is a valid
    /// point of this space.
    pub fn validate_point(&self, p: &Point) -> Option<String> {
        match (self, p) {
            (Space::Euclidean { dim }, Point::Euclidean(v)) => {
                if v.len() != *dim {
                    Some(format!("expected {dim} coordinates, got {}", v.len()))
                } else if v.iter().any(|x| !x.is_finite()) {
                    Some("non-finite coordinate".into())
                } else {
                    None
                }
            }
            (Space::HalfPlane, Point::HalfPlane { re, im }) => {
                if !re.is_finite() || !im.is_finite() {
                    Some("non-finite coordinate".into())
                } else if *im <= 0.0 {
                    Some("im ≤ 0".into())
                } else if *im < HALF_PLANE_MIN_IM {
                    Some(format!("im < {HALF_PLANE_MIN_IM:e}"))
                } else {
                    None
                }
            }
            (Space::Spd { order }, Point::Spd(m)) => {
                if m.order() != *order {
                    return Some(format!("expected order {order}, got {}", m.order()));
                }
                if !m.is_finite() {
                    return Some("non-finite entry".into());
                }
                let ev = m.eigen().values;
                let lo = ev[0];
                let hi = ev[ev.len() - 1];
                if lo <= 0.0 {
                    Some("eigenvalue ≤ 0".into())
                } else if lo < SPD_MIN_REL_EIGENVALUE * hi {
                    Some("eigenvalue below 1e-12·λ_max (near singular)".into())
                } else {
                    None
                }
            }
            (Space::Product { factors }, Point::Product(parts)) => {
                if factors.len() != parts.len() {
                    return Some(format!("expected {} components, got {}", factors.len(), parts.len()));
                }
                factors
                    .iter()
                    .zip(parts)
                    .enumerate()
                    .find_map(|(i, (s, q))| s.validate_point(q).map(|d| format!("component {i}: {d}")))
            }
            (Space::Wasserstein1D { .. }, Point::Measure(_)) => None,
            _ => Some(format!("point kind does not belong to {}", self.label())),
        }
    }

    /// Ok if `p` is a valid point, otherwise `InvalidPoint`/`SpaceMismatch`.
    pub fn check_point(&self, p: &Point) -> Result<()> {
        match self.validate_point(p) {
            None => Ok(()),
            Some(d) if d.contains("does not belong") => Err(Error::SpaceMismatch(d)),
            Some(d) => Err(Error::InvalidPoint(d)),
        }
    }

    /// Structural check without eigendecompositions.
    fn check_shape(&self, p: &Point) -> Result<()> {
        match (self, p) {
            (Space::Spd { order }, Point::Spd(m)) if m.order() == *order && m.is_finite() => Ok(()),
            (Space::Spd { .. }, Point::Spd(_)) => self.check_point(p),
            (Space::Product { factors }, Point::Product(parts)) if factors.len() == parts.len() => {
                factors.iter().zip(parts).try_for_each(|(s, q)| s.check_shape(q))
            }
            _ => self.check_point(p),
        }
    }

    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64> {
        self.check_shape(p)?;
        self.check_shape(q)?;
        self.distance_unchecked(p, q)
    }

    fn distance_unchecked(&self, p: &Point, q: &Point) -> Result<f64> {
        if p == q {
            return Ok(0.0);
        }
        Ok(match (self, p, q) {
            (Space::Euclidean { .. }, Point::Euclidean(a), Point::Euclidean(b)) => {
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
            }
            (Space::HalfPlane, Point::HalfPlane { re: x1, im: y1 }, Point::HalfPlane { re: x2, im: y2 }) => {
                // cosh d = 1 + |z−w|²/(2 y₁y₂), written as 2·asinh(|z−w| / (2√(y₁y₂))) for accuracy.
                let chord = (x1 - x2).hypot(y1 - y2);
                2.0 * (chord / (2.0 * (y1 * y2).sqrt())).asinh()
            }
            (Space::Spd { .. }, Point::Spd(a), Point::Spd(b)) => {
                let frame = SpdFrame::new(a)?;
                let c = b.congruence(&frame.inv_sqrt);
                let ev = c.eigen().values;
                if ev[0] <= 0.0 {
                    return Err(Error::InvalidPoint("eigenvalue ≤ 0".into()));
                }
                ev.iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt()
            }
            (Space::Product { factors }, Point::Product(a), Point::Product(b)) => {
                let mut s = 0.0;
                for ((f, x), y) in factors.iter().zip(a).zip(b) {
                    s += f.distance_unchecked(x, y)?.powi(2);
                }
                s.sqrt()
            }
            (Space::Wasserstein1D { .. }, Point::Measure(a), Point::Measure(b)) => wasserstein::w2_quantile(a, b),
            _ => return Err(Error::SpaceMismatch(format!("points do not belong to {}", self.label()))),
        })
    }

    /// Point at parameter `t` on the geodesic from `p` (t = 0) to `q` (t = 1).
    pub fn geodesic_point(&self, p: &Point, q: &Point, t: f64) -> Result<Point> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::ParameterOutOfRange(format!("t = {t} not in [0, 1]")));
        }
        self.check_shape(p)?;
        self.check_shape(q)?;
        if t == 0.0 {
            return Ok(p.clone());
        }
        if t == 1.0 {
            return Ok(q.clone());
        }
        self.geodesic_unchecked(p, q, t)
    }

    fn geodesic_unchecked(&self, p: &Point, q: &Point, t: f64) -> Result<Point> {
        Ok(match (self, p, q) {
            (Space::Euclidean { .. }, Point::Euclidean(a), Point::Euclidean(b)) => {
                Point::Euclidean(a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect())
            }
            (Space::Spd { .. }, Point::Spd(a), Point::Spd(b)) => {
                let frame = SpdFrame::new(a)?;
                let c = b.congruence(&frame.inv_sqrt);
                let ct = c.map_spectrum(|l| l.powf(t));
                Point::Spd(ct.congruence(&frame.sqrt))
            }
            (Space::Product { factors }, Point::Product(a), Point::Product(b)) => Point::Product(
                factors
                    .iter()
                    .zip(a)
                    .zip(b)
                    .map(|((f, x), y)| f.geodesic_unchecked(x, y, t))
                    .collect::<Result<_>>()?,
            ),
            (Space::Wasserstein1D { .. }, Point::Measure(a), Point::Measure(b)) => {
                Point::Measure(wasserstein::w2_geodesic(a, b, t))
            }
            (Space::HalfPlane, _, _) => {
                let v = self.log_map_unchecked(p, q)?;
                self.exp_map_unchecked(p, &v.scale(t))?
            }
            _ => return Err(Error::SpaceMismatch(format!("points do not belong to {}", self.label()))),
        })
    }

    pub fn midpoint(&self, p: &Point, q: &Point) -> Result<Point> {
        self.geodesic_point(p, q, 0.5)
    }

    /// Initial velocity of the geodesic from `base` reaching `p` at time 1.
    pub fn log_map(&self, base: &Point, p: &Point) -> Result<TangentVector> {
        self.check_shape(base)?;
        self.check_shape(p)?;
        Ok(TangentVector {
            base: base.clone(),
            components: self.log_map_unchecked(base, p)?,
        })
    }

    fn log_map_unchecked(&self, base: &Point, p: &Point) -> Result<Tangent> {
        if base == p {
            return Ok(self.zero_tangent(base).components);
        }
        Ok(match (self, base, p) {
            (Space::Euclidean { .. }, Point::Euclidean(b), Point::Euclidean(x)) => {
                Tangent::Vector(x.iter().zip(b).map(|(xi, bi)| xi - bi).collect())
            }
            (Space::HalfPlane, Point::HalfPlane { re: bx, im: by }, Point::HalfPlane { re: px, im: py }) => {
                if bx == px && by == py {
                    return Ok(Tangent::Vector(vec![0.0, 0.0]));
                }
                // Normalize so the base sits at i; the geodesic through i and
                // w = u + iv leaves i in direction (2u, |w|² − 1).
                let u = (px - bx) / by;
                let v = py / by;
                let dist = 2.0 * (u.hypot(v - 1.0) / (2.0 * v.sqrt())).asinh();
                let dx = 2.0 * u;
                let dy = u * u + (v - 1.0) * (v + 1.0);
                let norm = dx.hypot(dy);
                if norm == 0.0 {
                    return Ok(Tangent::Vector(vec![0.0, 0.0]));
                }
                let s = by * dist / norm;
                Tangent::Vector(vec![s * dx, s * dy])
            }
            (Space::Spd { .. }, Point::Spd(b), Point::Spd(x)) => {
                let frame = SpdFrame::new(b)?;
                let c = x.congruence(&frame.inv_sqrt);
                let ev = c.eigen();
                if ev.values[0] <= 0.0 {
                    return Err(Error::InvalidPoint("eigenvalue ≤ 0".into()));
                }
                Tangent::Matrix(ev.rebuild(f64::ln).congruence(&frame.sqrt))
            }
            (Space::Product { factors }, Point::Product(b), Point::Product(x)) => Tangent::Product(
                factors
                    .iter()
                    .zip(b)
                    .zip(x)
                    .map(|((f, bi), xi)| f.log_map_unchecked(bi, xi))
                    .collect::<Result<_>>()?,
            ),
            (Space::Wasserstein1D { .. }, Point::Measure(b), Point::Measure(x)) => {
                let (qb, qx) = (b.quantile_function(), x.quantile_function());
                Tangent::Quantile(QuantileFn::combine(&[(1.0, &qx), (-1.0, &qb)]))
            }
            _ => return Err(Error::SpaceMismatch(format!("points do not belong to {}", self.label()))),
        })
    }

    pub fn exp_map(&self, base: &Point, v: &TangentVector) -> Result<Point> {
        if &v.base != base {
            return Err(Error::BaseMismatch);
        }
        self.check_shape(base)?;
        if !v.components.is_finite() {
            return Err(Error::NonFinite("tangent vector".into()));
        }
        if v.components.is_zero() {
            return Ok(base.clone());
        }
        let out = self.exp_map_unchecked(base, &v.components)?;
        if let Some(d) = self.validate_point_cheap(&out) {
            return Err(Error::InvalidPoint(format!("exp_map produced an invalid point: {d}")));
        }
        Ok(out)
    }

    fn validate_point_cheap(&self, p: &Point) -> Option<String> {
        match (self, p) {
            (Space::Spd { .. }, Point::Spd(m)) => (!m.is_finite()).then(|| "non-finite entry".into()),
            (Space::Product { factors }, Point::Product(parts)) => factors
                .iter()
                .zip(parts)
                .find_map(|(s, q)| s.validate_point_cheap(q)),
            _ => self.validate_point(p),
        }
    }

    fn exp_map_unchecked(&self, base: &Point, v: &Tangent) -> Result<Point> {
        Ok(match (self, base, v) {
            (Space::Euclidean { dim }, Point::Euclidean(b), Tangent::Vector(t)) if t.len() == *dim => {
                Point::Euclidean(b.iter().zip(t).map(|(x, y)| x + y).collect())
            }
            (Space::HalfPlane, Point::HalfPlane { re: bx, im: by }, Tangent::Vector(t)) if t.len() == 2 => {
                let speed = t[0].hypot(t[1]) / by;
                if speed == 0.0 {
                    return Ok(base.clone());
                }
                // Rotate the vertical geodesic i·e^s about i so that its
                // initial direction matches t, then undo the normalization.
                let alpha = 0.5 * (t[1].atan2(t[0]) - FRAC_PI_2);
                let (sa, ca) = alpha.sin_cos();
                let w = (0.0, speed.exp());
                let num = (ca * w.0 + sa, ca * w.1);
                let den = (ca - sa * w.0, -sa * w.1);
                let dd = den.0 * den.0 + den.1 * den.1;
                let r = (
                    (num.0 * den.0 + num.1 * den.1) / dd,
                    (num.1 * den.0 - num.0 * den.1) / dd,
                );
                Point::HalfPlane {
                    re: bx + by * r.0,
                    im: by * r.1,
                }
            }
            (Space::Spd { order }, Point::Spd(b), Tangent::Matrix(t)) if t.order() == *order => {
                let frame = SpdFrame::new(b)?;
                let inner = t.congruence(&frame.inv_sqrt).map_spectrum(f64::exp);
                Point::Spd(inner.congruence(&frame.sqrt))
            }
            (Space::Product { factors }, Point::Product(b), Tangent::Product(t)) if t.len() == factors.len() => {
                Point::Product(
                    factors
                        .iter()
                        .zip(b)
                        .zip(t)
                        .map(|((f, bi), ti)| f.exp_map_unchecked(bi, ti))
                        .collect::<Result<_>>()?,
                )
            }
            (Space::Wasserstein1D { .. }, Point::Measure(b), Tangent::Quantile(t)) => {
                let qb = b.quantile_function();
                let scale = b.max_abs_atom().max(t.l2_norm()).max(1e-300);
                Point::Measure(QuantileFn::combine(&[(1.0, &qb), (1.0, t)]).to_measure(1e-12 * scale)?)
            }
            _ => return Err(Error::SpaceMismatch("tangent vector shape does not match space".into())),
        })
    }

    pub fn zero_tangent(&self, base: &Point) -> TangentVector {
        TangentVector {
            base: base.clone(),
            components: self.zero_components(),
        }
    }

    fn zero_components(&self) -> Tangent {
        match self {
            Space::Euclidean { dim } => Tangent::Vector(vec![0.0; *dim]),
            Space::HalfPlane => Tangent::Vector(vec![0.0; 2]),
            Space::Spd { order } => Tangent::Matrix(SymMatrix::zeros(*order)),
            Space::Product { factors } => Tangent::Product(factors.iter().map(Space::zero_components).collect()),
            Space::Wasserstein1D { .. } => Tangent::Quantile(QuantileFn::zero()),
        }
    }

    /// Riemannian inner product at `v.base`.
    pub fn tangent_inner(&self, u: &TangentVector, v: &TangentVector) -> Result<f64> {
        if u.base != v.base {
            return Err(Error::BaseMismatch);
        }
        self.inner_at(&u.base, &u.components, &v.components)
    }

    fn inner_at(&self, base: &Point, u: &Tangent, v: &Tangent) -> Result<f64> {
        Ok(match (self, base, u, v) {
            (Space::Euclidean { .. }, _, Tangent::Vector(a), Tangent::Vector(b)) => {
                a.iter().zip(b).map(|(x, y)| x * y).sum()
            }
            (Space::HalfPlane, Point::HalfPlane { im, .. }, Tangent::Vector(a), Tangent::Vector(b)) => {
                (a[0] * b[0] + a[1] * b[1]) / (im * im)
            }
            (Space::Spd { .. }, Point::Spd(p), Tangent::Matrix(a), Tangent::Matrix(b)) => {
                let frame = SpdFrame::new(p)?;
                let (ua, ub) = (a.congruence(&frame.inv_sqrt), b.congruence(&frame.inv_sqrt));
                let n = ua.order();
                (0..n)
                    .flat_map(|i| (0..n).map(move |j| (i, j)))
                    .map(|(i, j)| ua.get(i, j) * ub.get(i, j))
                    .sum()
            }
            (Space::Product { factors }, Point::Product(b), Tangent::Product(a), Tangent::Product(c)) => {
                let mut s = 0.0;
                for (((f, bi), ai), ci) in factors.iter().zip(b).zip(a).zip(c) {
                    s += f.inner_at(bi, ai, ci)?;
                }
                s
            }
            (Space::Wasserstein1D { .. }, _, Tangent::Quantile(a), Tangent::Quantile(b)) => a.inner(b),
            _ => return Err(Error::SpaceMismatch("tangent vector shape does not match space".into())),
        })
    }

    pub fn tangent_norm(&self, v: &TangentVector) -> Result<f64> {
        match (&v.base, &v.components) {
            (Point::Spd(p), Tangent::Matrix(a)) => {
                let frame = SpdFrame::new(p)?;
                Ok(a.congruence(&frame.inv_sqrt).frobenius())
            }
            (_, Tangent::Quantile(q)) => Ok(q.l2_norm()),
            _ => Ok(self.tangent_inner(v, v)?.max(0.0).sqrt()),
        }
    }

    /// Nonnegative-weighted combination `Σ wₖ vₖ` of tangent vectors at one base.
    pub fn tangent_combination(&self, base: &Point, terms: &[(f64, &TangentVector)]) -> Result<TangentVector> {
        if terms.iter().any(|(_, v)| &v.base != base) {
            return Err(Error::BaseMismatch);
        }
        let comps: Vec<(f64, &Tangent)> = terms.iter().map(|(w, v)| (*w, &v.components)).collect();
        Ok(TangentVector {
            base: base.clone(),
            components: self.combine_components(&comps)?,
        })
    }

    fn combine_components(&self, terms: &[(f64, &Tangent)]) -> Result<Tangent> {
        if terms.is_empty() {
            return Ok(self.zero_components());
        }
        Ok(match self {
            Space::Euclidean { .. } | Space::HalfPlane => {
                let len = match terms[0].1 {
                    Tangent::Vector(v) => v.len(),
                    _ => return Err(Error::SpaceMismatch("tangent shape".into())),
                };
                let mut acc = vec![0.0; len];
                for (w, t) in terms {
                    match t {
                        Tangent::Vector(v) if v.len() == len => {
                            for (a, x) in acc.iter_mut().zip(v) {
                                *a += w * x;
                            }
                        }
                        _ => return Err(Error::SpaceMismatch("tangent shape".into())),
                    }
                }
                Tangent::Vector(acc)
            }
            Space::Spd { order } => {
                let mut acc = SymMatrix::zeros(*order);
                for (w, t) in terms {
                    match t {
                        Tangent::Matrix(m) if m.order() == *order => acc = acc.add(&m.scale(*w)),
                        _ => return Err(Error::SpaceMismatch("tangent shape".into())),
                    }
                }
                Tangent::Matrix(acc)
            }
            Space::Product { factors } => {
                let mut parts = Vec::with_capacity(factors.len());
                for (k, f) in factors.iter().enumerate() {
                    let sub: Vec<(f64, &Tangent)> = terms
                        .iter()
                        .map(|(w, t)| match t {
                            Tangent::Product(p) if p.len() == factors.len() => Ok((*w, &p[k])),
                            _ => Err(Error::SpaceMismatch("tangent shape".into())),
                        })
                        .collect::<Result<_>>()?;
                    parts.push(f.combine_components(&sub)?);
                }
                Tangent::Product(parts)
            }
            Space::Wasserstein1D { .. } => {
                let sub: Vec<(f64, &QuantileFn)> = terms
                    .iter()
                    .map(|(w, t)| match t {
                        Tangent::Quantile(q) => Ok((*w, q)),
                        _ => Err(Error::SpaceMismatch("tangent shape".into())),
                    })
                    .collect::<Result<_>>()?;
                Tangent::Quantile(QuantileFn::combine(&sub))
            }
        })
    }
}

impl Tangent {
    pub fn is_finite(&self) -> bool {
        match self {
            Tangent::Vector(v) => v.iter().all(|x| x.is_finite()),
            Tangent::Matrix(m) => m.is_finite(),
            Tangent::Product(p) => p.iter().all(Tangent::is_finite),
            Tangent::Quantile(q) => q.is_finite(),
        }
    }

    /// True when every component is exactly zero.
    pub fn is_zero(&self) -> bool {
        match self {
            Tangent::Vector(v) => v.iter().all(|x| *x == 0.0),
            Tangent::Matrix(m) => m.max_abs() == 0.0,
            Tangent::Product(p) => p.iter().all(Tangent::is_zero),
            Tangent::Quantile(q) => q.l2_norm() == 0.0,
        }
    }

    pub fn scale(&self, c: f64) -> Tangent {
        match self {
            Tangent::Vector(v) => Tangent::Vector(v.iter().map(|x| x * c).collect()),
            Tangent::Matrix(m) => Tangent::Matrix(m.scale(c)),
            Tangent::Product(p) => Tangent::Product(p.iter().map(|t| t.scale(c)).collect()),
            Tangent::Quantile(q) => Tangent::Quantile(q.scale(c)),
        }
    }
}

impl TangentVector {
    pub fn scale(&self, c: f64) -> TangentVector {
        TangentVector {
            base: self.base.clone(),
            components: self.components.scale(c),
        }
    }
}

impl Point {
    pub fn euclidean(coords: &[f64]) -> Point {
        Point::Euclidean(coords.to_vec())
    }

    pub fn half_plane(re: f64, im: f64) -> Point {
        Point::HalfPlane { re, im }
    }

    /// Symmetrizes the rows before storing them.
    pub fn spd(rows: &[Vec<f64>]) -> Result<Point> {
        SymMatrix::from_rows(rows)
            .map(Point::Spd)
            .ok_or_else(|| Error::InvalidPoint("spd matrix must be square".into()))
    }

    pub fn spd_diag(d: &[f64]) -> Point {
        Point::Spd(SymMatrix::diag(d))
    }
}

/// `P^{1/2}` and `P^{-1/2}` from one eigendecomposition.
struct SpdFrame {
    sqrt: SymMatrix,
    inv_sqrt: SymMatrix,
}

impl SpdFrame {
    fn new(p: &SymMatrix) -> Result<Self> {
        let ev = p.eigen();
        if ev.values[0] <= 0.0 {
            return Err(Error::InvalidPoint("eigenvalue ≤ 0".into()));
        }
        Ok(Self {
            sqrt: ev.rebuild(f64::sqrt),
            inv_sqrt: ev.rebuild(|l| 1.0 / l.sqrt()),
        })
    }
}

/// `A^{1/2}(A^{-1/2} B A^{-1/2})^{1/2} A^{1/2}`, written out directly.
pub fn spd_geometric_mean(a: &SymMatrix, b: &SymMatrix) -> Result<SymMatrix> {
    let frame = SpdFrame::new(a)?;
    let inner = b.congruence(&frame.inv_sqrt).map_spectrum(f64::sqrt);
    Ok(inner.congruence(&frame.sqrt))
}
