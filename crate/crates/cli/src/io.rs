use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use dconf::mesh::{DiscreteMetric, Geometry, Triangulation};

use crate::CliError;

/// Polygons and vertex positions from an OBJ file. Vertex indices follow the
/// order of the `v` records.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjMesh {
    pub positions: Vec<[f64; 3]>,
    pub faces: Vec<Vec<usize>>,
}

pub fn read_obj(path: &Path) -> Result<ObjMesh, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_obj(&text, &path.display().to_string())
}

pub fn parse_obj(text: &str, path: &str) -> Result<ObjMesh, CliError> {
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let err = |message: String| CliError::Parse { path: path.into(), line: n + 1, message };
        let line = line.split('#').next().unwrap_or("");
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let xs = parts
                    .take(3)
                    .map(|s| s.parse::<f64>().map_err(|_| err(format!("bad coordinate {s:?}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                if xs.len() < 2 || xs.iter().any(|x| !x.is_finite()) {
                    return Err(err("vertex needs two or three finite coordinates".into()));
                }
                positions.push([xs[0], xs[1], xs.get(2).copied().unwrap_or(0.0)]);
            }
            Some("f") => {
                let mut face = Vec::new();
                for tok in parts {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|_| err(format!("bad face index {tok:?}")))?;
                    let count = positions.len() as i64;
                    let idx = if i > 0 { i - 1 } else { count + i };
                    if i == 0 || idx < 0 || idx >= count {
                        return Err(err(format!("face index {i} out of range")));
                    }
                    face.push(idx as usize);
                }
                if face.len() < 3 {
                    return Err(err("face needs at least three vertices".into()));
                }
                faces.push(face);
            }
            _ => {}
        }
    }
    if faces.is_empty() {
        return Err(CliError::Parse { path: path.into(), line: 0, message: "no faces".into() });
    }
    Ok(ObjMesh { positions, faces })
}

impl ObjMesh {
    pub fn triangles(&self) -> Result<Vec<[usize; 3]>, CliError> {
        self.faces
            .iter()
            .enumerate()
            .map(|(f, p)| match p[..] {
                [a, b, c] => Ok([a, b, c]),
                _ => Err(CliError::NonTriangleFace { face: f, arity: p.len() }),
            })
            .collect()
    }

    pub fn positions_vec(&self) -> Vec<Vec<f64>> {
        self.positions.iter().map(|p| p.to_vec()).collect()
    }
}

/// Texture coordinates, per vertex or per face corner.
pub enum Uv<'a> {
    PerVertex(&'a [[f64; 2]]),
    PerCorner(&'a [[[f64; 2]; 3]]),
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// OBJ text with 17 significant digits.
pub fn obj_text(positions: &[[f64; 3]], faces: &[Vec<usize>], uv: Option<Uv>) -> String {
    let mut s = String::new();
    for p in positions {
        let _ = writeln!(s, "v {} {} {}", num(p[0]), num(p[1]), num(p[2]));
    }
    match uv {
        None => {
            for f in faces {
                let idx: Vec<String> = f.iter().map(|v| (v + 1).to_string()).collect();
                let _ = writeln!(s, "f {}", idx.join(" "));
            }
        }
        Some(Uv::PerVertex(t)) => {
            for q in t {
                let _ = writeln!(s, "vt {} {}", num(q[0]), num(q[1]));
            }
            for f in faces {
                let idx: Vec<String> = f.iter().map(|v| format!("{0}/{0}", v + 1)).collect();
                let _ = writeln!(s, "f {}", idx.join(" "));
            }
        }
        Some(Uv::PerCorner(c)) => {
            for corner in c.iter().flatten() {
                let _ = writeln!(s, "vt {} {}", num(corner[0]), num(corner[1]));
            }
            for (k, f) in faces.iter().enumerate() {
                let idx: Vec<String> = f.iter().enumerate().map(|(s, v)| format!("{}/{}", v + 1, 3 * k + s + 1)).collect();
                let _ = writeln!(s, "f {}", idx.join(" "));
            }
        }
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Edge lengths from a CSV table `i,j,length`, with an optional header row.
pub fn read_edge_table(path: &Path, tri: &Triangulation) -> Result<Vec<f64>, CliError> {
    let name = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let mut lengths: Vec<Option<f64>> = vec![None; tri.n_edges()];
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Parse { path: name.clone(), line: n + 1, message: e.to_string() })?;
        let line = rec.position().map_or(n + 1, |p| p.line() as usize);
        let err = |message: String| CliError::Parse { path: name.clone(), line, message };
        if rec.len() != 3 {
            return Err(err(format!("expected i,j,length, got {} fields", rec.len())));
        }
        let (Ok(i), Ok(j)) = (rec[0].parse::<usize>(), rec[1].parse::<usize>()) else {
            if n == 0 {
                continue;
            }
            return Err(err(format!("bad vertex indices {:?}, {:?}", &rec[0], &rec[1])));
        };
        let l: f64 = rec[2].parse().map_err(|_| err(format!("bad length {:?}", &rec[2])))?;
        let e = tri.edge_index(i, j).ok_or_else(|| err(format!("({i}, {j}) is not an edge of the mesh")))?;
        if let Some(prev) = lengths[e] {
            if prev != l {
                return Err(err(format!("edge ({i}, {j}) given twice with different lengths")));
            }
        }
        lengths[e] = Some(l);
    }
    lengths
        .into_iter()
        .enumerate()
        .map(|(e, l)| {
            let [i, j] = tri.edge(e);
            l.ok_or(CliError::MissingEdgeLength { i, j })
        })
        .collect()
}

pub fn edge_table_text(tri: &Triangulation, lengths: &[f64]) -> String {
    let mut s = String::from("i,j,length\n");
    for (e, &[i, j]) in tri.edges().iter().enumerate() {
        let _ = writeln!(s, "{i},{j},{}", num(lengths[e]));
    }
    s
}

/// The euclidean input metric: table lengths when given, else distances
/// between the embedded positions.
pub fn ingest_metric(mesh: &ObjMesh, tri: &Triangulation, table: Option<&Path>) -> Result<DiscreteMetric, CliError> {
    match table {
        Some(p) => Ok(DiscreteMetric::from_lengths(Geometry::Euclidean, read_edge_table(p, tri)?)?),
        None => Ok(DiscreteMetric::from_positions(tri, &mesh.positions_vec())?),
    }
}

/// Lengths of polygon sides keyed by the sorted vertex pair.
pub fn polygon_lengths(mesh: &ObjMesh, table: Option<&Path>) -> Result<HashMap<[usize; 2], f64>, CliError> {
    let mut out = HashMap::new();
    let key = |a: usize, b: usize| [a.min(b), a.max(b)];
    for p in &mesh.faces {
        for i in 0..p.len() {
            let (a, b) = (p[i], p[(i + 1) % p.len()]);
            let d = mesh.positions[a].iter().zip(&mesh.positions[b]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            out.insert(key(a, b), d);
        }
    }
    if let Some(path) = table {
        let name = path.display().to_string();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| CliError::io(path, e))?;
        let mut seen: HashMap<[usize; 2], f64> = HashMap::new();
        for (n, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| CliError::Parse { path: name.clone(), line: n + 1, message: e.to_string() })?;
            let parsed = (rec.get(0).map(str::parse::<usize>), rec.get(1).map(str::parse::<usize>), rec.get(2).map(str::parse::<f64>));
            match parsed {
                (Some(Ok(i)), Some(Ok(j)), Some(Ok(l))) if rec.len() == 3 => {
                    if !out.contains_key(&key(i, j)) {
                        return Err(CliError::Parse {
                            path: name.clone(),
                            line: n + 1,
                            message: format!("({i}, {j}) is not a polygon side"),
                        });
                    }
                    seen.insert(key(i, j), l);
                }
                _ if n == 0 => {}
                _ => return Err(CliError::Parse { path: name.clone(), line: n + 1, message: "expected i,j,length".into() }),
            }
        }
        for k in out.keys() {
            if !seen.contains_key(k) {
                return Err(CliError::MissingEdgeLength { i: k[0], j: k[1] });
            }
        }
        out = seen;
    }
    Ok(out)
}
