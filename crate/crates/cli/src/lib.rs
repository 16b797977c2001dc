//! Command line driver: reads meshes and boundary tables, runs a mapping
//! pipeline and writes the resulting mesh with a JSON report.

mod error;
pub mod io;
pub mod spec;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dconf::energy::{BoundaryConditions, VertexCondition};
use dconf::hypgeom::realize_ideal_polyhedron;
use dconf::mapping::*;
use dconf::mesh::{length_cross_ratios, verify_conformal_equivalence, DiscreteMetric, Geometry, Triangulation};
use dconf::solver::{solve_problem, Gauge, SolveReport, SolveStatus, SolverConfig};
use rand::{RngExt, SeedableRng};
use serde_json::{json, Value};

pub use error::CliError;
use io::{ObjMesh, Uv};
use spec::ProblemSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "dconf", version, about = "Discrete conformal maps of triangle meshes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Args, Debug, Clone)]
pub struct Options {
    /// Edge-length table `i,j,length` used instead of the embedded positions.
    #[arg(long, global = true, value_name = "CSV")]
    pub lengths: Option<PathBuf>,
    /// JSON table of vertex conditions (`theta` or `u`), edge angles `phi` and corners.
    #[arg(long, global = true, value_name = "JSON")]
    pub boundary_file: Option<PathBuf>,
    /// Output mesh.
    #[arg(long, global = true, value_name = "OBJ")]
    pub out: Option<PathBuf>,
    /// Output edge lengths.
    #[arg(long, global = true, value_name = "CSV")]
    pub lengths_out: Option<PathBuf>,
    /// JSON report; printed to stdout when absent.
    #[arg(long, global = true, value_name = "JSON")]
    pub report: Option<PathBuf>,
    /// Newton gradient tolerance.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol: f64,
    /// Tolerance for the certificates in the report.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub cert_tol: f64,
    #[arg(long, global = true, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long, global = true, value_enum, default_value_t = GaugeArg::FixOneVertex)]
    pub gauge: GaugeArg,
    /// Distinguished vertex: the point at infinity or the north pole.
    #[arg(long, global = true)]
    pub apex: Option<usize>,
    /// Seed for random starting points.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Add per-face projective maps to the report (planar inputs only).
    #[arg(long, global = true)]
    pub projective: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GaugeArg {
    FixOneVertex,
    ProjectOutConstants,
    None,
}

fn angle_arg(s: &str) -> Result<f64, String> {
    spec::parse_angle(s)
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Flatten with prescribed angle sums or scale factors.
    Flatten {
        mesh: PathBuf,
        /// Angle sum at interior vertices without an entry in the boundary file.
        #[arg(long, default_value = "2pi", value_parser = angle_arg)]
        theta_interior: f64,
    },
    /// Map a disk to a rectangle.
    Rectangle {
        mesh: PathBuf,
        /// Four boundary vertices, in order.
        #[arg(long, value_delimiter = ',')]
        corners: Option<Vec<usize>>,
    },
    /// Map a disk to the unit disk.
    Disk { mesh: PathBuf },
    /// Map a closed genus-0 surface to a polyhedron inscribed in the unit sphere.
    Sphere { mesh: PathBuf },
    /// Uniformize a closed surface of higher genus in the Poincare disk.
    Uniformize { mesh: PathBuf },
    /// Solve for a circle pattern with intersection angles `phi`.
    CirclePattern { mesh: PathBuf },
    /// Make the polygons of a polygonal mesh cyclic.
    CircularMesh { mesh: PathBuf },
    /// Map a multiply connected genus-0 surface to a circle domain.
    CircleDomain { mesh: PathBuf },
    /// Realize Penner coordinates as an ideal polyhedron.
    RealizePolyhedron { mesh: PathBuf },
    /// Check whether two metrics on the same mesh are discretely conformal.
    Verify {
        mesh: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, value_name = "CSV")]
        target_lengths: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Flatten { .. } => "flatten",
            Command::Rectangle { .. } => "rectangle",
            Command::Disk { .. } => "disk",
            Command::Sphere { .. } => "sphere",
            Command::Uniformize { .. } => "uniformize",
            Command::CirclePattern { .. } => "circle-pattern",
            Command::CircularMesh { .. } => "circular-mesh",
            Command::CircleDomain { .. } => "circle-domain",
            Command::RealizePolyhedron { .. } => "realize-polyhedron",
            Command::Verify { .. } => "verify",
        }
    }

    fn mesh(&self) -> &Path {
        match self {
            Command::Flatten { mesh, .. }
            | Command::Rectangle { mesh, .. }
            | Command::Disk { mesh }
            | Command::Sphere { mesh }
            | Command::Uniformize { mesh }
            | Command::CirclePattern { mesh }
            | Command::CircularMesh { mesh }
            | Command::CircleDomain { mesh }
            | Command::RealizePolyhedron { mesh }
            | Command::Verify { mesh, .. } => mesh,
        }
    }
}

/// Report and whether every certificate is under tolerance.
pub struct Outcome {
    pub report: Value,
    pub ok: bool,
}

struct Input {
    mesh: ObjMesh,
    tri: Triangulation,
    metric: DiscreteMetric,
    spec: ProblemSpec,
}

impl Options {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            grad_tol: self.tol,
            max_iter: self.max_iter,
            gauge: match self.gauge {
                GaugeArg::FixOneVertex => Gauge::FixOneVertex,
                GaugeArg::ProjectOutConstants => Gauge::ProjectOutConstants,
                GaugeArg::None => Gauge::None,
            },
            ..SolverConfig::default()
        }
    }

    fn spec(&self) -> Result<ProblemSpec, CliError> {
        match &self.boundary_file {
            None => Ok(ProblemSpec::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                ProblemSpec::parse(&text, &p.display().to_string())
            }
        }
    }

    fn load(&self, path: &Path) -> Result<Input, CliError> {
        let mesh = io::read_obj(path)?;
        let spec = self.spec()?;
        let tri = Triangulation::new(&mesh.triangles()?)?;
        if tri.n_vertices() != mesh.positions.len() {
            return Err(CliError::Validation(format!(
                "{} of {} vertices are not used by any face",
                mesh.positions.len() - tri.n_vertices(),
                mesh.positions.len()
            )));
        }
        spec.validate(tri.n_vertices(), Some(&tri))?;
        let metric = io::ingest_metric(&mesh, &tri, self.lengths.as_deref())?;
        Ok(Input { mesh, tri, metric, spec })
    }

    fn apex(&self, n: usize, default: Option<usize>) -> Result<Option<usize>, CliError> {
        match self.apex.or(default) {
            Some(k) if k >= n => Err(CliError::Validation(format!("apex {k} does not exist ({n} vertices)"))),
            k => Ok(k),
        }
    }
}

fn input_json(inp: &Input, opts: &Options) -> Value {
    json!({
        "vertices": inp.tri.n_vertices(),
        "faces": inp.tri.n_faces(),
        "edges": inp.tri.n_edges(),
        "metric_source": if opts.lengths.is_some() { "edge-length-table" } else { "embedded-positions" },
        "broken_faces": inp.metric.broken_faces(&inp.tri),
    })
}

fn solver_json(r: &SolveReport) -> Value {
    let mut v = serde_json::to_value(r).unwrap_or(Value::Null);
    if let Some(m) = v.as_object_mut() {
        m.remove("x");
    }
    v
}

/// Per-edge lengths read off the layout corners, taking each edge from the
/// first face that holds it.
fn metric_from_corners(tri: &Triangulation, corners: &[[[f64; 2]; 3]]) -> Result<DiscreteMetric, CliError> {
    let mut lengths = vec![f64::NAN; tri.n_edges()];
    for (f, c) in corners.iter().enumerate() {
        for (s, &e) in tri.face_edges(f).iter().enumerate() {
            if lengths[e].is_nan() {
                let (p, q) = (c[(s + 1) % 3], c[(s + 2) % 3]);
                lengths[e] = (p[0] - q[0]).hypot(p[1] - q[1]);
            }
        }
    }
    Ok(DiscreteMetric::from_lengths(Geometry::Euclidean, lengths)?)
}

fn corners_of(tri: &Triangulation, pos: &[[f64; 2]]) -> Vec<[[f64; 2]; 3]> {
    tri.faces().iter().map(|f| f.map(|v| pos[v])).collect()
}

fn max_abs(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn angle_residual(tri: &Triangulation, out: &DiscreteMetric, targets: &[Option<f64>]) -> f64 {
    let sums = out.angle_sums(tri);
    max_abs((0..tri.n_vertices()).filter_map(|v| targets[v].map(|t| sums[v] - t)))
}

fn lcr_residual(tri: &Triangulation, a: &DiscreteMetric, b: &DiscreteMetric) -> f64 {
    length_cross_ratios(tri, a).max_difference(&length_cross_ratios(tri, b))
}

fn targets_of(bc: &BoundaryConditions) -> Vec<Option<f64>> {
    bc.vertices
        .iter()
        .map(|c| match c {
            VertexCondition::AngleSum(t) => Some(*t),
            VertexCondition::Scale(_) => None,
        })
        .collect()
}

fn status_str(s: SolveStatus) -> Value {
    serde_json::to_value(s).unwrap_or(Value::Null)
}

/// Texture coordinates per vertex when the layout closes up, else per corner.
fn planar_uv(tri: &Triangulation, layout: &PlanarLayout, tol: f64) -> (Vec<[f64; 2]>, bool) {
    let drift = max_abs(layout.edge_drift(tri));
    (layout.vertex_positions(tri), drift <= tol)
}

struct Emit<'a> {
    positions: &'a [[f64; 3]],
    faces: Vec<Vec<usize>>,
    uv: Option<Uv<'a>>,
    lengths: Option<(&'a Triangulation, Vec<f64>)>,
}

fn emit(opts: &Options, e: Emit) -> Result<(), CliError> {
    if let Some(p) = &opts.out {
        io::write_text(p, &io::obj_text(e.positions, &e.faces, e.uv))?;
    }
    if let (Some(p), Some((tri, l))) = (&opts.lengths_out, e.lengths) {
        io::write_text(p, &io::edge_table_text(tri, &l))?;
    }
    Ok(())
}

fn projective_json(inp: &Input, uv: &[[f64; 2]], u: &[f64]) -> Result<Value, CliError> {
    if inp.mesh.positions.iter().any(|p| p[2] != 0.0) {
        return Err(CliError::Validation("projective maps need a planar input mesh (z = 0)".into()));
    }
    let src: Vec<[f64; 2]> = inp.mesh.positions.iter().map(|p| [p[0], p[1]]).collect();
    let maps = projective_maps(&inp.tri, &src, uv, u)?;
    let discrepancy = max_edge_discrepancy(&inp.tri, &maps, &src, 8);
    Ok(json!({
        "matrices": maps.iter().map(|m| m.row_major().to_vec()).collect::<Vec<_>>(),
        "max_edge_discrepancy": discrepancy,
    }))
}

fn under(tol: f64, xs: &[f64]) -> bool {
    xs.iter().all(|x| x.is_finite() && *x <= tol)
}

fn run_planar(
    inp: &Input,
    opts: &Options,
    bc: &BoundaryConditions,
    metric: &DiscreteMetric,
    u: &[f64],
    report: &SolveReport,
    layout: &PlanarLayout,
) -> Result<(Value, bool), CliError> {
    let tri = &inp.tri;
    let (uv, consistent) = planar_uv(tri, layout, opts.cert_tol);
    let out = metric_from_corners(tri, &layout.corners)?;
    let angle = angle_residual(tri, &out, &targets_of(bc));
    let lcr = lcr_residual(tri, &inp.metric, &out);
    let length = layout.max_length_error(tri, metric);
    let mut certs = json!({
        "angle_residual": angle,
        "lcr_residual": lcr,
        "layout_length_error": length,
        "layout_closes": consistent,
    });
    if opts.projective {
        certs["projective"] = projective_json(inp, &uv, u)?;
    }
    let uvs = if consistent { Uv::PerVertex(&uv) } else { Uv::PerCorner(&layout.corners) };
    emit(
        opts,
        Emit {
            positions: &inp.mesh.positions,
            faces: inp.mesh.faces.clone(),
            uv: Some(uvs),
            lengths: Some((tri, out.lengths().to_vec())),
        },
    )?;
    let ok = report.status == SolveStatus::Converged && under(opts.cert_tol, &[angle, lcr, length]);
    Ok((json!({ "certificates": certs, "u": u, "solver": solver_json(report) }), ok))
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let opts = &cli.opts;
    let cfg = opts.config();
    let name = cli.command.name();
    let (body, ok, input) = match &cli.command {
        Command::Flatten { theta_interior, .. } => {
            let inp = opts.load(cli.command.mesh())?;
            let t = &inp.tri;
            let vertices = (0..t.n_vertices())
                .map(|v| {
                    inp.spec.condition(v).unwrap_or(if t.is_boundary_vertex(v) {
                        VertexCondition::AngleSum(PI)
                    } else {
                        VertexCondition::AngleSum(*theta_interior)
                    })
                })
                .collect();
            let bc = BoundaryConditions { vertices, phi: None, free_lambda: Vec::new() };
            let s = solve_problem(t, &inp.metric, &bc, &cfg)?;
            let layout = layout_euclidean(t, &s.metric, 0)?;
            let (body, ok) = run_planar(&inp, opts, &bc, &s.metric, &s.u, &s.report, &layout)?;
            (body, ok, input_json(&inp, opts))
        }
        Command::Rectangle { corners, .. } => {
            let inp = opts.load(cli.command.mesh())?;
            let t = &inp.tri;
            let corners: [usize; 4] = match (corners, inp.spec.corners) {
                (Some(c), _) => c
                    .as_slice()
                    .try_into()
                    .map_err(|_| CliError::Validation(format!("--corners needs four vertices, got {}", c.len())))?,
                (None, Some(c)) => c,
                (None, None) => return Err(CliError::Validation("rectangle needs four corners".into())),
            };
            if let Some(&v) = corners.iter().find(|&&v| v >= t.n_vertices() || !t.is_boundary_vertex(v)) {
                return Err(CliError::Validation(format!("corner {v} is not a boundary vertex")));
            }
            let mut boundary: BTreeMap<usize, VertexCondition> =
                corners.iter().map(|&c| (c, VertexCondition::AngleSum(PI / 2.0))).collect();
            for v in inp.spec.vertices.keys() {
                if let Some(c) = inp.spec.condition(*v) {
                    boundary.insert(*v, c);
                }
            }
            let bc = flattening_conditions(t, &boundary)?;
            let f = flatten(t, &inp.metric, &boundary, &cfg)?;
            let (mut body, ok) = run_planar(&inp, opts, &bc, &f.metric, &f.u, &f.report, &f.layout)?;
            body["corners"] = json!(corners);
            (body, ok, input_json(&inp, opts))
        }
        Command::Disk { .. } => {
            let inp = opts.load(cli.command.mesh())?;
            let t = &inp.tri;
            let k = opts
                .apex(t.n_vertices(), t.boundary_vertices().next())?
                .ok_or_else(|| CliError::Validation("disk map needs a boundary".into()))?;
            let d = map_to_disk(t, &inp.metric, k, &cfg)?;
            let out = metric_from_corners(t, &corners_of(t, &d.positions))?;
            let boundary: Vec<[f64; 2]> = t.boundary_vertices().map(|v| d.positions[v]).collect();
            let radius = max_abs(boundary.iter().map(|p| p[0].hypot(p[1]) - 1.0));
            let cocircular = cocircularity_residual(&boundary);
            let interior: Vec<Option<f64>> =
                (0..t.n_vertices()).map(|v| (!t.is_boundary_vertex(v)).then_some(2.0 * PI)).collect();
            let angle = angle_residual(t, &out, &interior);
            let lcr = lcr_residual(t, &inp.metric, &out);
            emit(
                opts,
                Emit {
                    positions: &inp.mesh.positions,
                    faces: inp.mesh.faces.clone(),
                    uv: Some(Uv::PerVertex(&d.positions)),
                    lengths: Some((t, out.lengths().to_vec())),
                },
            )?;
            let ok = d.report.status == SolveStatus::Converged && under(opts.cert_tol, &[radius, cocircular, angle, lcr]);
            let body = json!({
                "apex": k,
                "certificates": {
                    "boundary_radius_residual": radius,
                    "cocircularity_residual": cocircular,
                    "angle_residual": angle,
                    "lcr_residual": lcr,
                },
                "normalization": serde_json::to_value(d.normalization).unwrap_or(Value::Null),
                "u": d.u,
                "solver": solver_json(&d.report),
            });
            (body, ok, input_json(&inp, opts))
        }
        Command::Sphere { .. } => {
            let inp = opts.load(cli.command.mesh())?;
            let t = &inp.tri;
            let k = opts.apex(t.n_vertices(), Some(0))?.unwrap_or(0);
            let s = map_to_sphere(t, &inp.metric, k, &cfg)?;
            let pos = &s.polyhedron.positions;
            let norm = max_abs(pos.iter().map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() - 1.0));
            let out = s.polyhedron.chordal_metric(t)?;
            let lcr = lcr_residual(t, &inp.metric, &out);
            emit(
                opts,
                Emit { positions: pos, faces: inp.mesh.faces.clone(), uv: None, lengths: Some((t, out.lengths().to_vec())) },
            )?;
            let ok = s.report.status == SolveStatus::Converged && under(opts.cert_tol, &[norm, lcr]);
            let body = json!({
                "apex": k,
                "certificates": { "unit_norm_residual": norm, "lcr_residual": lcr },
                "normalization": serde_json::to_value(s.normalization).unwrap_or(Value::Null),
                "u": s.u,
                "solver": solver_json(&s.report),
            });
            (body, ok, input_json(&inp, opts))
        }
        Command::Uniformize { .. } => {
            let inp = opts.load(cli.command.mesh())?;
            let t = &inp.tri;
            let start: Option<Vec<f64>> = opts.seed.map(|seed| {
                let mut r = rand::rngs::StdRng::seed_from_u64(seed);
                (0..t.n_vertices()).map(|_| r.random_range(-0.5..0.5)).collect()
            });
            let a = uniformize_hyperbolic(t, &inp.metric, start.as_deref(), &cfg)?;
            let full: Vec<Option<f64>> = vec![Some(2.0 * PI); t.n_vertices()];
            let angle = angle_residual(t, &a.metric, &full);
            let area = hyperbolic_area(t, &a.metric);
            let area_residual = (area + 2.0 * PI * t.euler_characteristic() as f64).abs();
            let secant = DiscreteMetric::from_lengths(Geometry::Euclidean, a.metric.secant_lengths())?;
            let lcr = lcr_residual(t, &inp.metric, &secant);
            let layout_err = a.layout.max_length_error(t, &a.metric);
            emit(
                opts,
                Emit {
                    positions: &inp.mesh.positions,
                    faces: inp.mesh.faces.clone(),
                    uv: Some(Uv::PerCorner(&a.layout.corners)),
                    lengths: Some((t, a.metric.lengths().to_vec())),
                },
            )?;
            let ok = a.report.status == SolveStatus::Converged && under(opts.cert_tol, &[angle, lcr, layout_err])
                && area_residual <= 100.0 * opts.cert_tol;
            let body = json!({
                "certificates": {
                    "angle_residual": angle,
                    "area": area,
                    "area_residual": area_residual,
                    "lcr_residual": lcr,
                    "layout_length_error": layout_err,
                },
                "holonomy": serde_json::to_value(&a.layout.holonomy).unwrap_or(Value::Null),
                "u": a.u,
                "solver": solver_json(&a.report),
            });
            (body, ok, input_json(&inp, opts))
        }
        Command::CirclePattern { .. } => {
            let inp = opts.load(cli.command.mesh())?;
            let t = &inp.tri;
            if inp.spec.vertices.values().any(|c| c.u.is_some()) {
                return Err(CliError::Validation("circle patterns take theta, not u".into()));
            }
            let mut phi = intersection_angles(t, &inp.metric);
            for e in &inp.spec.edges {
                phi[t.edge_index(e.i, e.j).expect("validated edge")] = e.phi.0;
            }
            let mut theta = circle_pattern_theta(t, &phi);
            for (&v, c) in &inp.spec.vertices {
                if let Some(a) = c.theta {
                    theta[v] = a.0;
                }
            }
            let given = (!inp.spec.vertices.is_empty()).then_some(theta.as_slice());
            let cp = solve_circle_pattern(t, &phi, given, &cfg)?;
            let layout = layout_euclidean(t, &cp.metric, 0)?;
            let (uv, consistent) = planar_uv(t, &layout, opts.cert_tol);
            let out = metric_from_corners(t, &layout.corners)?;
            let phi_residual = max_diff(&intersection_angles(t, &out), &phi);
            let angle = angle_residual(t, &out, &cp.theta.iter().map(|&x| Some(x)).collect::<Vec<_>>());
            let uvs = if consistent { Uv::PerVertex(&uv) } else { Uv::PerCorner(&layout.corners) };
            emit(
                opts,
                Emit {
                    positions: &inp.mesh.positions,
                    faces: inp.mesh.faces.clone(),
                    uv: Some(uvs),
                    lengths: Some((t, out.lengths().to_vec())),
                },
            )?;
            let ok = cp.report.status == SolveStatus::Converged && under(opts.cert_tol, &[phi_residual, angle]);
            let body = json!({
                "certificates": {
                    "intersection_angle_residual": phi_residual,
                    "angle_residual": angle,
                    "layout_closes": consistent,
                },
                "phi": phi,
                "theta": cp.theta,
                "solver": solver_json(&cp.report),
            });
            (body, ok, input_json(&inp, opts))
        }
        Command::CircularMesh { .. } => {
            let mesh = io::read_obj(cli.command.mesh())?;
            let spec = opts.spec()?;
            let fan: Vec<[usize; 3]> =
                mesh.faces.iter().flat_map(|p| (1..p.len() - 1).map(move |i| [p[0], p[i], p[i + 1]])).collect();
            let ft = Triangulation::new(&fan)?;
            spec.validate(ft.n_vertices(), None)?;
            let conditions: Vec<VertexCondition> = (0..ft.n_vertices())
                .map(|v| {
                    spec.condition(v).unwrap_or(VertexCondition::AngleSum(if ft.is_boundary_vertex(v) { PI } else { 2.0 * PI }))
                })
                .collect();
            let surface = PolygonalSurface { polygons: mesh.faces.clone(), lengths: io::polygon_lengths(&mesh, opts.lengths.as_deref())? };
            let c = solve_circular_mesh(&surface, &conditions, &cfg)?;
            let layout = layout_euclidean(&c.tri, &c.metric, 0)?;
            let (uv, consistent) = planar_uv(&c.tri, &layout, opts.cert_tol);
            let out = metric_from_corners(&c.tri, &layout.corners)?;
            let targets: Vec<Option<f64>> = conditions
                .iter()
                .map(|c| match c {
                    VertexCondition::AngleSum(t) => Some(*t),
                    VertexCondition::Scale(_) => None,
                })
                .collect();
            let angle = angle_residual(&c.tri, &out, &targets);
            let cocircular = if consistent {
                mesh.faces
                    .iter()
                    .map(|p| cocircularity_residual(&p.iter().map(|&v| uv[v]).collect::<Vec<_>>()))
                    .fold(0.0, f64::max)
            } else {
                f64::NAN
            };
            emit(
                opts,
                Emit {
                    positions: &mesh.positions,
                    faces: mesh.faces.clone(),
                    uv: consistent.then_some(Uv::PerVertex(&uv)),
                    lengths: Some((&c.tri, out.lengths().to_vec())),
                },
            )?;
            let ok = c.report.status == SolveStatus::Converged && under(opts.cert_tol, &[angle, cocircular]);
            let body = json!({
                "certificates": {
                    "angle_residual": angle,
                    "cocircularity_residual": if cocircular.is_nan() { Value::Null } else { json!(cocircular) },
                    "layout_closes": consistent,
                },
                "u": c.u,
                "solver": solver_json(&c.report),
            });
            let input = json!({
                "vertices": ft.n_vertices(),
                "polygons": mesh.faces.len(),
                "metric_source": if opts.lengths.is_some() { "edge-length-table" } else { "embedded-positions" },
            });
            (body, ok, input)
        }
        Command::CircleDomain { .. } => {
            let inp = opts.load(cli.command.mesh())?;
            let t = &inp.tri;
            let k = opts.apex(t.n_vertices(), None)?;
            let d = map_to_circle_domain(t, &inp.metric, k, &cfg)?;
            let out = metric_from_corners(t, &corners_of(t, &d.positions))?;
            let cocircular: Vec<f64> = d
                .loops
                .iter()
                .map(|l| cocircularity_residual(&l.iter().map(|&v| d.positions[v]).collect::<Vec<_>>()))
                .collect();
            let interior: Vec<Option<f64>> =
                (0..t.n_vertices()).map(|v| (!t.is_boundary_vertex(v)).then_some(2.0 * PI)).collect();
            let angle = angle_residual(t, &out, &interior);
            let lcr = lcr_residual(t, &inp.metric, &out);
            emit(
                opts,
                Emit {
                    positions: &inp.mesh.positions,
                    faces: inp.mesh.faces.clone(),
                    uv: Some(Uv::PerVertex(&d.positions)),
                    lengths: Some((t, out.lengths().to_vec())),
                },
            )?;
            let mut all = cocircular.clone();
            all.extend([angle, lcr]);
            let ok = d.report.status == SolveStatus::Converged && under(opts.cert_tol, &all);
            let body = json!({
                "certificates": {
                    "cocircularity_residuals": cocircular,
                    "angle_residual": angle,
                    "lcr_residual": lcr,
                },
                "loops": d.loops,
                "u": d.u,
                "solver": solver_json(&d.report),
            });
            (body, ok, input_json(&inp, opts))
        }
        Command::RealizePolyhedron { .. } => {
            let inp = opts.load(cli.command.mesh())?;
            let t = &inp.tri;
            let k = opts.apex(t.n_vertices(), Some(0))?.unwrap_or(0);
            let p = realize_ideal_polyhedron(t, inp.metric.lambda(), k, &cfg)?;
            let pos = &p.polyhedron.positions;
            let norm = max_abs(pos.iter().map(|q| (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt() - 1.0));
            let faces: Vec<Vec<usize>> = p.polyhedron.faces.iter().map(|f| f.to_vec()).collect();
            emit(opts, Emit { positions: pos, faces, uv: None, lengths: None })?;
            let errs = [norm, p.vertex_sum_error, p.apex_length_error, p.edge_sum_error, p.gluing_error];
            let ok = p.report.status == SolveStatus::Converged && under(opts.cert_tol, &errs);
            let body = json!({
                "apex": k,
                "certificates": {
                    "unit_norm_residual": norm,
                    "vertex_sum_error": p.vertex_sum_error,
                    "apex_length_error": p.apex_length_error,
                    "edge_sum_error": p.edge_sum_error,
                    "gluing_error": p.gluing_error,
                    "star_shaped": p.star_shaped,
                },
                "tetrahedra": serde_json::to_value(&p.tetrahedra).unwrap_or(Value::Null),
                "u": p.u,
                "solver": solver_json(&p.report),
            });
            (body, ok, input_json(&inp, opts))
        }
        Command::Verify { target, target_lengths, .. } => {
            let inp = opts.load(cli.command.mesh())?;
            let t = &inp.tri;
            let other = io::read_obj(target)?;
            if other.faces != inp.mesh.faces {
                return Err(CliError::Validation("the two meshes have different faces".into()));
            }
            let m2 = io::ingest_metric(&other, t, target_lengths.as_deref())?;
            let eq = verify_conformal_equivalence(t, &inp.metric, &m2, opts.cert_tol)?;
            let body = json!({
                "certificates": {
                    "equivalent": eq.equivalent,
                    "lcr_residual": eq.max_lcr_difference,
                    "u_spread": eq.max_u_spread,
                },
                "u": eq.u,
            });
            (body, eq.equivalent, input_json(&inp, opts))
        }
    };
    let mut report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": name,
        "input": input,
        "tolerance": opts.cert_tol,
        "within_tolerance": ok,
    });
    if let (Some(r), Some(b)) = (report.as_object_mut(), body.as_object()) {
        for (k, v) in b {
            r.insert(k.clone(), v.clone());
        }
    }
    if let Some(s) = body.get("solver").and_then(|s| s.get("status")) {
        report["status"] = s.clone();
    } else {
        report["status"] = status_str(SolveStatus::Converged);
    }
    Ok(Outcome { report, ok })
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    max_abs(a.iter().zip(b).map(|(x, y)| x - y))
}

/// Runs the command, writes the report or error JSON and returns the exit
/// code. Reports go to `--report` or stdout, errors to stderr and `--report`.
pub fn main_with(cli: &Cli) -> i32 {
    let (text, code) = match run(cli) {
        Ok(o) => {
            let text = pretty(&o.report);
            if cli.opts.report.is_none() {
                println!("{text}");
            }
            (text, if o.ok { 0 } else { 2 })
        }
        Err(e) => {
            let text = pretty(&e.to_json());
            eprintln!("{text}");
            (text, e.exit_code())
        }
    };
    if let Some(p) = &cli.opts.report {
        if let Err(e) = io::write_text(p, &text) {
            eprintln!("{}", pretty(&e.to_json()));
            return 1;
        }
    }
    code
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).unwrap_or_else(|_| v.to_string())
}
