use dconf::hypgeom::HypGeomError;
use dconf::mapping::MappingError;
use dconf::mesh::MeshError;
use dconf::solver::SolveError;
use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("face {face} has {arity} vertices, only triangles are supported here")]
    NonTriangleFace { face: usize, arity: usize },
    #[error("no length given for edge ({i}, {j})")]
    MissingEdgeLength { i: usize, j: usize },
    #[error("invalid problem: {0}")]
    Validation(String),
    #[error("prescribed data is infeasible: {message}")]
    Infeasible { message: String, detail: Value },
    #[error("minimizer has broken triangles {faces:?}")]
    Broken { faces: Vec<usize> },
    #[error("solve failed: {0}")]
    Solve(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::NonTriangleFace { .. } => "non-triangle-face",
            CliError::MissingEdgeLength { .. } => "missing-edge-length",
            CliError::Validation(_) => "validation",
            CliError::Infeasible { .. } => "infeasible",
            CliError::Broken { .. } => "broken-at-optimum",
            CliError::Solve(_) => "solve",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Infeasible { .. } | CliError::Broken { .. } | CliError::Solve(_) => 2,
            _ => 1,
        }
    }

    pub fn to_json(&self) -> Value {
        let mut error = json!({
            "kind": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        match self {
            CliError::Infeasible { detail, .. } => error["conditions"] = detail.clone(),
            CliError::Broken { faces } => error["faces"] = json!(faces),
            CliError::MissingEdgeLength { i, j } => error["edge"] = json!([i, j]),
            CliError::NonTriangleFace { face, .. } => error["face"] = json!(face),
            _ => {}
        }
        json!({ "schema_version": crate::SCHEMA_VERSION, "error": error })
    }

    pub fn io(path: impl AsRef<std::path::Path>, e: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.as_ref().display().to_string(), message: e.to_string() }
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::InfeasibleDetected(rep) => CliError::Infeasible {
                message: if rep.condition1 == Some(false) {
                    format!("angle sums miss the Gauss-Bonnet total by {:e}", rep.gauss_bonnet_residual)
                } else {
                    "no positive corner angles realize the angle sums".into()
                },
                detail: serde_json::to_value(&*rep).unwrap_or(Value::Null),
            },
            SolveError::BrokenAtOptimum { faces, .. } => CliError::Broken { faces },
            SolveError::Mesh(m) => m.into(),
            SolveError::Energy(e) => CliError::Validation(e.to_string()),
            other => CliError::Solve(other.to_string()),
        }
    }
}

impl From<MappingError> for CliError {
    fn from(e: MappingError) -> Self {
        match e {
            MappingError::Solve(s) => s.into(),
            MappingError::Mesh(m) => m.into(),
            MappingError::PolygonalInequalityViolated { face } => CliError::Infeasible {
                message: e.to_string(),
                detail: json!({ "polygon": face }),
            },
            MappingError::BrokenTriangle { face } => CliError::Broken { faces: vec![face] },
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<HypGeomError> for CliError {
    fn from(e: HypGeomError) -> Self {
        match e {
            HypGeomError::Mesh(m) => m.into(),
            HypGeomError::Solve(s) => s.into(),
            HypGeomError::Mapping(m) => m.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}
