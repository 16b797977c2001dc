use std::collections::BTreeMap;
use std::f64::consts::PI;

use dconf::energy::VertexCondition;
use dconf::mesh::Triangulation;
use serde::Deserialize;

use crate::CliError;

/// Parses radians, accepting `pi` literals such as `2pi`, `pi/2`, `-3pi/4`
/// and `0.5*pi`.
pub fn parse_angle(text: &str) -> Result<f64, String> {
    let s: String = text.trim().to_lowercase().replace('π', "pi").replace(' ', "");
    let bad = || format!("cannot read angle {text:?}");
    let Some(at) = s.find("pi") else {
        return s.parse::<f64>().map_err(|_| bad());
    };
    let (head, tail) = (&s[..at], &s[at + 2..]);
    let head = head.strip_suffix('*').unwrap_or(head);
    let coef = match head {
        "" | "+" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().map_err(|_| bad())?,
    };
    let value = match tail {
        "" => coef * PI,
        t => {
            let d = t.strip_prefix('/').ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?;
            if d == 0.0 {
                return Err(bad());
            }
            coef * PI / d
        }
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(try_from = "RawAngle")]
pub struct Angle(pub f64);

#[derive(Deserialize)]
#[serde(untagged)]
enum RawAngle {
    Number(f64),
    Text(String),
}

impl TryFrom<RawAngle> for Angle {
    type Error = String;
    fn try_from(raw: RawAngle) -> Result<Self, String> {
        match raw {
            RawAngle::Number(x) => Ok(Angle(x)),
            RawAngle::Text(s) => parse_angle(&s).map(Angle),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexSpec {
    pub theta: Option<Angle>,
    pub u: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub i: usize,
    pub j: usize,
    pub phi: Angle,
}

/// Boundary-condition table read from `--boundary-file`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub schema_version: u32,
    #[serde(default)]
    pub vertices: BTreeMap<usize, VertexSpec>,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
    #[serde(default)]
    pub corners: Option<[usize; 4]>,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        ProblemSpec { schema_version: crate::SCHEMA_VERSION, vertices: BTreeMap::new(), edges: Vec::new(), corners: None }
    }
}

impl ProblemSpec {
    pub fn parse(text: &str, path: &str) -> Result<Self, CliError> {
        let spec: ProblemSpec = serde_json::from_str(text)
            .map_err(|e| CliError::Parse { path: path.into(), line: e.line(), message: e.to_string() })?;
        if spec.schema_version != crate::SCHEMA_VERSION {
            return Err(CliError::Validation(format!(
                "schema_version {} is not supported (expected {})",
                spec.schema_version,
                crate::SCHEMA_VERSION
            )));
        }
        Ok(spec)
    }

    /// Checks references against the mesh and that no vertex carries both
    /// or neither of `theta` and `u`.
    pub fn validate(&self, n_vertices: usize, tri: Option<&Triangulation>) -> Result<(), CliError> {
        for (&v, c) in &self.vertices {
            if v >= n_vertices {
                return Err(CliError::Validation(format!("vertex {v} does not exist ({n_vertices} vertices)")));
            }
            match (c.theta, c.u) {
                (Some(_), Some(_)) => {
                    return Err(CliError::Validation(format!("vertex {v} has both theta and u")));
                }
                (None, None) => return Err(CliError::Validation(format!("vertex {v} has neither theta nor u"))),
                _ => {}
            }
        }
        if let Some(c) = self.corners {
            if let Some(&v) = c.iter().find(|&&v| v >= n_vertices) {
                return Err(CliError::Validation(format!("corner {v} does not exist")));
            }
        }
        for e in &self.edges {
            let known = match tri {
                Some(t) => t.edge_index(e.i, e.j).is_some(),
                None => e.i < n_vertices && e.j < n_vertices && e.i != e.j,
            };
            if !known {
                return Err(CliError::Validation(format!("edge ({}, {}) does not exist", e.i, e.j)));
            }
        }
        Ok(())
    }

    pub fn condition(&self, v: usize) -> Option<VertexCondition> {
        let c = self.vertices.get(&v)?;
        match (c.theta, c.u) {
            (Some(t), None) => Some(VertexCondition::AngleSum(t.0)),
            (None, Some(u)) => Some(VertexCondition::Scale(u)),
            _ => None,
        }
    }
}
