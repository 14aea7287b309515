//! JSON encodings of points.
//!
//! Euclidean points are arrays of numbers, half-plane points are
//! `{"re": r, "im": i}`, SPD matrices are row-major 2-D arrays, product points
//! are arrays of component encodings and measures on ℝ are
//! `{"atoms": [...], "weights": [...]}`. Decoding needs the space, since an
//! array alone does not say which kind it is.

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::{Point, Space};
use crate::wasserstein::DiscreteMeasure1D;

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Point::Euclidean(v) => v.serialize(s),
            Point::HalfPlane { re, im } => {
                let mut m = s.serialize_map(Some(2))?;
                m.serialize_entry("re", re)?;
                m.serialize_entry("im", im)?;
                m.end()
            }
            Point::Spd(m) => m.to_rows().serialize(s),
            Point::Product(parts) => {
                let mut seq = s.serialize_seq(Some(parts.len()))?;
                for p in parts {
                    seq.serialize_element(p)?;
                }
                seq.end()
            }
            Point::Measure(m) => m.serialize(s),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidPoint(msg.into())
}

fn number(v: &Value) -> Result<f64> {
    v.as_f64().ok_or_else(|| invalid(format!("expected a number, got {v}")))
}

fn numbers(v: &Value) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| invalid(format!("expected an array of numbers, got {v}")))?
        .iter()
        .map(number)
        .collect()
}

impl Space {
    /// Decodes and validates a point of this space.
    pub fn point_from_json(&self, v: &Value) -> Result<Point> {
        let p = self.decode(v)?;
        self.check_point(&p)?;
        Ok(p)
    }

    fn decode(&self, v: &Value) -> Result<Point> {
        match self {
            Space::Euclidean { .. } => Ok(Point::Euclidean(numbers(v)?)),
            Space::HalfPlane => {
                let obj = v
                    .as_object()
                    .ok_or_else(|| invalid(format!("expected {{\"re\", \"im\"}}, got {v}")))?;
                if let Some(k) = obj.keys().find(|k| *k != "re" && *k != "im") {
                    return Err(invalid(format!("unknown field '{k}' in half-plane point")));
                }
                let re = number(obj.get("re").ok_or_else(|| invalid("missing 're'"))?)?;
                let im = number(obj.get("im").ok_or_else(|| invalid("missing 'im'"))?)?;
                Ok(Point::HalfPlane { re, im })
            }
            Space::Spd { .. } => {
                let rows: Vec<Vec<f64>> = v
                    .as_array()
                    .ok_or_else(|| invalid(format!("expected a 2-D array, got {v}")))?
                    .iter()
                    .map(numbers)
                    .collect::<Result<_>>()?;
                Point::spd(&rows)
            }
            Space::Product { factors } => {
                let parts = v
                    .as_array()
                    .ok_or_else(|| invalid(format!("expected an array of components, got {v}")))?;
                if parts.len() != factors.len() {
                    return Err(invalid(format!(
                        "expected {} components, got {}",
                        factors.len(),
                        parts.len()
                    )));
                }
                Ok(Point::Product(
                    factors.iter().zip(parts).map(|(f, p)| f.decode(p)).collect::<Result<_>>()?,
                ))
            }
            Space::Wasserstein1D { .. } => {
                let m: DiscreteMeasure1D =
                    serde_json::from_value(v.clone()).map_err(|e| Error::InvalidMeasure(e.to_string()))?;
                Ok(Point::Measure(m))
            }
        }
    }
}
