//! Instance files: one JSON object describing a space, measures and matrices.

use serde::Deserialize;
use serde_json::Value;

use crate::geometry::{Point, Space};
use crate::linalg::Matrix;
use crate::wasserstein::PointCloud;

/// Everything a command may read from an instance file. Each command uses
/// the subset it needs and reports the first missing field.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub space: Option<Space>,
    /// Measure for `barycenter` and the measures for `wasserstein`.
    pub atoms: Option<Vec<Value>>,
    pub weights: Option<Vec<f64>>,
    pub x_atoms: Option<Vec<Value>>,
    pub lambda: Option<Vec<f64>>,
    pub y_atoms: Option<Vec<Value>>,
    pub mu: Option<Vec<f64>>,
    #[serde(rename = "A")]
    pub a: Option<Matrix>,
    /// Pair of point clouds in ℝᴺ for the transport LP.
    pub clouds: Option<Vec<PointCloud>>,
    /// Registry id of a functional to evaluate on a verified certificate.
    pub functional: Option<String>,
    /// Anchor points the distance functionals are built around.
    pub anchors: Option<Vec<Value>>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

/// Input problem with a message that points at the offending spot.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl InstanceFile {
    /// Parses `text`; syntax and schema errors carry `name:line:column`.
    pub fn parse(name: &str, text: &str) -> Result<Self, InputError> {
        serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            // serde_json appends " at line L column C"; keep only the cause.
            let cause = msg.split(" at line ").next().unwrap_or(&msg);
            InputError(format!("{name}:{}:{}: {cause}", e.line(), e.column()))
        })
    }

    /// The instance space, or the one given on the command line. When both
    /// are present they must agree.
    pub fn resolve_space(&self, flag: Option<&Space>) -> Result<Space, InputError> {
        match (&self.space, flag) {
            (Some(a), Some(b)) if a != b => Err(InputError(format!(
                "--space {} contradicts the instance space {}",
                b.label(),
                a.label()
            ))),
            (Some(a), _) => Ok(a.clone()),
            (None, Some(b)) => Ok(b.clone()),
            (None, None) => Err(InputError("no space: add \"space\" to the instance or pass --space".into())),
        }
    }

    pub fn points(space: &Space, field: &str, values: &Option<Vec<Value>>) -> Result<Vec<Point>, InputError> {
        let values = values
            .as_ref()
            .ok_or_else(|| InputError(format!("missing field '{field}'")))?;
        values
            .iter()
            .enumerate()
            .map(|(i, v)| space.point_from_json(v).map_err(|e| InputError(format!("{field}[{i}]: {e}"))))
            .collect()
    }

    pub fn require<'a, T>(field: &str, v: &'a Option<T>) -> Result<&'a T, InputError> {
        v.as_ref().ok_or_else(|| InputError(format!("missing field '{field}'")))
    }
}
