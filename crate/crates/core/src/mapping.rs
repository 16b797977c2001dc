//! Layouts and end-to-end mapping pipelines.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::energy::{
    check_circle_pattern_feasibility, phi_for_scale_problem, BoundaryConditions, ConditionReport, Problem,
    ProblemKind, VariableLayout, VertexCondition, FEASIBILITY_EPS,
};
use crate::mesh::{DiscreteMetric, Geometry, MeshError, Triangulation};
use crate::solver::{solve_energy, solve_problem, solve_problem_from, Gauge, SolveError, SolveReport, SolverConfig};

#[derive(Debug, Clone, thiserror::Error)]
pub enum MappingError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("triangle {face} violates the triangle inequality")]
    BrokenTriangle { face: usize },
    #[error("face {face} has two boundary edges")]
    EarDetected { face: usize },
    #[error("unsupported topology: {0}")]
    Topology(String),
    #[error("polygon {face} has a side at least as long as the others together")]
    PolygonalInequalityViolated { face: usize },
    #[error("degenerate triangle")]
    DegenerateFace,
    #[error("scale factors do not relate the two triangles (relative residual {residual:e})")]
    InconsistentU { residual: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

fn sub2(p: [f64; 2], q: [f64; 2]) -> [f64; 2] {
    [p[0] - q[0], p[1] - q[1]]
}

fn norm2(p: [f64; 2]) -> f64 {
    p[0].hypot(p[1])
}

fn cplx(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

/// Breadth-first development over the face adjacency graph. Returns corner
/// positions and, per edge, whether it was crossed by the spanning tree.
fn develop<P: Copy>(
    tri: &Triangulation,
    metric: &DiscreteMetric,
    root: usize,
    place_root: impl Fn(f64, f64, f64) -> [P; 3],
    place: impl Fn(P, P, f64, f64) -> P,
) -> Result<(Vec<Option<[P; 3]>>, Vec<bool>), MappingError> {
    if root >= tri.n_faces() {
        return Err(MappingError::InvalidInput(format!("root face {root} out of range")));
    }
    let lengths = metric.lengths();
    let angles = |f: usize| -> Result<[f64; 3], MappingError> {
        let a = metric.face_angles(tri, f);
        if a.is_broken() {
            Err(MappingError::BrokenTriangle { face: f })
        } else {
            Ok(a.angles)
        }
    };
    let mut corners: Vec<Option<[P; 3]>> = vec![None; tri.n_faces()];
    let mut tree = vec![false; tri.n_edges()];
    let fe = tri.face_edges(root);
    // slot 2 edge joins corners 0 and 1, slot 1 edge joins corners 0 and 2
    corners[root] = Some(place_root(lengths[fe[2]], lengths[fe[1]], angles(root)?[0]));
    let mut queue = VecDeque::from([root]);
    while let Some(f) = queue.pop_front() {
        let face = tri.face(f);
        let pf = corners[f].expect("queued faces are placed");
        let fe = tri.face_edges(f);
        for (s, g) in tri.face_neighbors(f).into_iter().enumerate() {
            let Some(g) = g else { continue };
            if corners[g].is_some() {
                continue;
            }
            // half-edge a -> b in f, so b -> a in g
            let (sa, sb) = ((s + 1) % 3, (s + 2) % 3);
            let (a, b) = (face[sa], face[sb]);
            let gface = tri.face(g);
            let tb = gface.iter().position(|&v| v == b).expect("shared edge");
            let ta = (tb + 1) % 3;
            let tc = (tb + 2) % 3;
            debug_assert_eq!(gface[ta], a);
            let ge = tri.face_edges(g);
            let pc = place(pf[sb], pf[sa], lengths[ge[ta]], angles(g)?[tb]);
            let mut pg = [pf[sa]; 3];
            pg[ta] = pf[sa];
            pg[tb] = pf[sb];
            pg[tc] = pc;
            corners[g] = Some(pg);
            tree[fe[s]] = true;
            queue.push_back(g);
        }
    }
    Ok((corners, tree))
}

/// Per-corner planar positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarLayout {
    pub corners: Vec<[[f64; 2]; 3]>,
    /// `+1` for counterclockwise faces, `-1` otherwise.
    pub orientation: Vec<f64>,
    /// Developed boundary loops, one point per boundary vertex.
    pub boundary: Vec<Vec<[f64; 2]>>,
    /// Edges crossed by the development tree.
    pub tree_edges: Vec<bool>,
}

impl PlanarLayout {
    pub fn from_corners(tri: &Triangulation, corners: Vec<[[f64; 2]; 3]>, tree_edges: Vec<bool>) -> Self {
        let orientation = corners
            .iter()
            .map(|c| {
                let (u, v) = (sub2(c[1], c[0]), sub2(c[2], c[0]));
                (u[0] * v[1] - u[1] * v[0]).signum()
            })
            .collect();
        let mut boundary = Vec::new();
        for lp in tri.boundary_loops() {
            let n = lp.len();
            let pts = (0..n)
                .map(|i| {
                    let (a, b) = (lp[i], lp[(i + 1) % n]);
                    let e = tri.edge_index(a, b).expect("loop edge");
                    let side = tri.edge_sides(e).into_iter().flatten().next().expect("boundary edge has a face");
                    let s = tri.face(side.face).iter().position(|&v| v == a).expect("vertex of face");
                    corners[side.face][s]
                })
                .collect();
            boundary.push(pts);
        }
        PlanarLayout { corners, orientation, boundary, tree_edges }
    }

    /// Layout whose corners are the given vertex positions.
    pub fn from_vertex_positions(tri: &Triangulation, positions: &[[f64; 2]]) -> Self {
        let corners = tri.faces().iter().map(|f| f.map(|v| positions[v])).collect();
        Self::from_corners(tri, corners, vec![false; tri.n_edges()])
    }

    /// Mean of the corner copies of each vertex.
    pub fn vertex_positions(&self, tri: &Triangulation) -> Vec<[f64; 2]> {
        let mut sum = vec![[0.0; 2]; tri.n_vertices()];
        let mut count = vec![0usize; tri.n_vertices()];
        for (f, c) in self.corners.iter().enumerate() {
            for (s, &v) in tri.face(f).iter().enumerate() {
                sum[v][0] += c[s][0];
                sum[v][1] += c[s][1];
                count[v] += 1;
            }
        }
        sum.iter()
            .zip(&count)
            .map(|(p, &c)| if c == 0 { [0.0; 2] } else { [p[0] / c as f64, p[1] / c as f64] })
            .collect()
    }

    /// Largest relative deviation of corner distances from the metric.
    pub fn max_length_error(&self, tri: &Triangulation, metric: &DiscreteMetric) -> f64 {
        let mut worst: f64 = 0.0;
        for (f, c) in self.corners.iter().enumerate() {
            for (s, &e) in tri.face_edges(f).iter().enumerate() {
                let d = norm2(sub2(c[(s + 1) % 3], c[(s + 2) % 3]));
                let l = metric.lengths()[e];
                worst = worst.max((d - l).abs() / l);
            }
        }
        worst
    }

    /// Per edge, the largest distance between the two copies of an endpoint
    /// in the adjacent faces (zero on boundary edges).
    pub fn edge_drift(&self, tri: &Triangulation) -> Vec<f64> {
        edge_drift(tri, &self.corners, |p, q| norm2(sub2(p, q)))
    }
}

fn edge_drift<P: Copy>(tri: &Triangulation, corners: &[[P; 3]], dist: impl Fn(P, P) -> f64) -> Vec<f64> {
    (0..tri.n_edges())
        .map(|e| {
            let [Some(l), Some(r)] = tri.edge_sides(e) else { return 0.0 };
            tri.edge(e)
                .iter()
                .map(|&v| {
                    let sl = tri.face(l.face).iter().position(|&w| w == v).expect("endpoint");
                    let sr = tri.face(r.face).iter().position(|&w| w == v).expect("endpoint");
                    dist(corners[l.face][sl], corners[r.face][sr])
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Develops a euclidean metric from `root`: its first vertex at the origin
/// and first edge along the positive x-axis.
pub fn layout_euclidean(tri: &Triangulation, metric: &DiscreteMetric, root: usize) -> Result<PlanarLayout, MappingError> {
    if metric.geometry() != Geometry::Euclidean {
        return Err(MeshError::FlavorMismatch.into());
    }
    let (corners, tree) = develop(
        tri,
        metric,
        root,
        |l01, l02, a0| [[0.0, 0.0], [l01, 0.0], [l02 * a0.cos(), l02 * a0.sin()]],
        |pb: [f64; 2], pa: [f64; 2], lbc, beta| {
            let d = sub2(pa, pb);
            let n = norm2(d);
            let (c, s) = (beta.cos(), beta.sin());
            let r = [(c * d[0] - s * d[1]) / n, (s * d[0] + c * d[1]) / n];
            [pb[0] + lbc * r[0], pb[1] + lbc * r[1]]
        },
    )?;
    let corners = corners.into_iter().map(|c| c.expect("connected triangulation")).collect();
    Ok(PlanarLayout::from_corners(tri, corners, tree))
}

/// Hyperbolic distance in the Poincare disk.
pub fn poincare_distance(p: [f64; 2], q: [f64; 2]) -> f64 {
    let (z, w) = (cplx(p), cplx(q));
    let r = ((z - w) / (Complex64::new(1.0, 0.0) - w.conj() * z)).norm();
    2.0 * r.min(1.0).atanh()
}

/// Orientation-preserving isometry of the disk as an SU(1,1) matrix
/// `[[a, b], [conj b, conj a]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct DiskIsometry {
    a: Complex64,
    b: Complex64,
}

impl DiskIsometry {
    /// Sends `p` to 0 and `q` to the positive real axis.
    fn normalizing(p: Complex64, q: Complex64) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let w = (q - p) / (one - p.conj() * q);
        let theta = w.arg();
        let s = (1.0 - p.norm_sqr()).sqrt();
        let e = Complex64::from_polar(1.0, -0.5 * theta);
        DiskIsometry { a: e / s, b: -p * e / s }
    }

    fn apply(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.b.conj() * z + self.a.conj())
    }

    fn inverse(&self) -> Self {
        DiskIsometry { a: self.a.conj(), b: -self.b }
    }

    fn compose(&self, other: &Self) -> Self {
        // self after other
        DiskIsometry { a: self.a * other.a + self.b * other.b.conj(), b: self.a * other.b + self.b * other.a.conj() }
    }

    fn trace(&self) -> f64 {
        2.0 * self.a.re
    }
}

/// Gluing isometry across a cut edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeHolonomy {
    pub edge: usize,
    /// Trace of the normalized SU(1,1) matrix.
    pub trace: f64,
    /// `2 acosh(|tr| / 2)`, zero for elliptic or parabolic elements.
    pub translation_length: f64,
}

/// Per-corner positions in the Poincare disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicLayout {
    pub corners: Vec<[[f64; 2]; 3]>,
    pub tree_edges: Vec<bool>,
    /// Gluing isometries of the edges not crossed by the development tree.
    pub holonomy: Vec<EdgeHolonomy>,
}

impl HyperbolicLayout {
    /// Largest relative deviation of hyperbolic corner distances from the metric.
    pub fn max_length_error(&self, tri: &Triangulation, metric: &DiscreteMetric) -> f64 {
        let mut worst: f64 = 0.0;
        for (f, c) in self.corners.iter().enumerate() {
            for (s, &e) in tri.face_edges(f).iter().enumerate() {
                let d = poincare_distance(c[(s + 1) % 3], c[(s + 2) % 3]);
                let l = metric.lengths()[e];
                worst = worst.max((d - l).abs() / l);
            }
        }
        worst
    }

    pub fn edge_drift(&self, tri: &Triangulation) -> Vec<f64> {
        edge_drift(tri, &self.corners, poincare_distance)
    }
}

/// Develops a hyperbolic metric in the Poincare disk: the root's first vertex
/// at the center and its first edge along the positive real axis.
pub fn layout_hyperbolic(tri: &Triangulation, metric: &DiscreteMetric, root: usize) -> Result<HyperbolicLayout, MappingError> {
    if metric.geometry() != Geometry::Hyperbolic {
        return Err(MeshError::FlavorMismatch.into());
    }
    let (corners, tree) = develop(
        tri,
        metric,
        root,
        |l01, l02, a0| {
            [
                Complex64::new(0.0, 0.0),
                Complex64::new((0.5 * l01).tanh(), 0.0),
                Complex64::from_polar((0.5 * l02).tanh(), a0),
            ]
        },
        |pb: Complex64, pa: Complex64, lbc, beta| {
            let t = DiskIsometry::normalizing(pb, pa);
            t.inverse().apply(Complex64::from_polar((0.5 * lbc).tanh(), beta))
        },
    )?;
    let corners: Vec<[Complex64; 3]> = corners.into_iter().map(|c| c.expect("connected triangulation")).collect();
    let mut holonomy = Vec::new();
    for e in 0..tri.n_edges() {
        if tree[e] {
            continue;
        }
        let [Some(l), Some(r)] = tri.edge_sides(e) else { continue };
        let [a, b] = tri.edge(e);
        let at = |f: usize, v: usize| corners[f][tri.face(f).iter().position(|&w| w == v).expect("endpoint")];
        let tl = DiskIsometry::normalizing(at(l.face, a), at(l.face, b));
        let tr = DiskIsometry::normalizing(at(r.face, a), at(r.face, b));
        let m = tr.inverse().compose(&tl);
        let trace = m.trace();
        let translation_length = if trace.abs() > 2.0 { 2.0 * (0.5 * trace.abs()).acosh() } else { 0.0 };
        holonomy.push(EdgeHolonomy { edge: e, trace, translation_length });
    }
    Ok(HyperbolicLayout { corners: corners.into_iter().map(|c| c.map(pair)).collect(), tree_edges: tree, holonomy })
}

/// Conditions for flattening a disk: `2 pi` at interior vertices, the given
/// condition at listed boundary vertices and `pi` at the others.
pub fn flattening_conditions(
    tri: &Triangulation,
    boundary: &BTreeMap<usize, VertexCondition>,
) -> Result<BoundaryConditions, MappingError> {
    if let Some((&v, _)) = boundary.iter().find(|(&v, _)| v >= tri.n_vertices() || !tri.is_boundary_vertex(v)) {
        return Err(MappingError::InvalidInput(format!("vertex {v} is not a boundary vertex")));
    }
    let vertices = (0..tri.n_vertices())
        .map(|v| {
            if !tri.is_boundary_vertex(v) {
                VertexCondition::AngleSum(2.0 * PI)
            } else {
                boundary.get(&v).copied().unwrap_or(VertexCondition::AngleSum(PI))
            }
        })
        .collect();
    Ok(BoundaryConditions { vertices, phi: None, free_lambda: Vec::new() })
}

/// Boundary conditions mapping a disk to a rectangle with the given corners.
pub fn rectangle_conditions(tri: &Triangulation, corners: [usize; 4]) -> Result<BoundaryConditions, MappingError> {
    let map = corners.iter().map(|&c| (c, VertexCondition::AngleSum(FRAC_PI_2))).collect();
    flattening_conditions(tri, &map)
}

#[derive(Debug, Clone)]
pub struct Flattening {
    pub metric: DiscreteMetric,
    pub u: Vec<f64>,
    pub report: SolveReport,
    pub conditions: ConditionReport,
    pub layout: PlanarLayout,
}

/// Flattens a disk with prescribed boundary conditions and lays it out.
pub fn flatten(
    tri: &Triangulation,
    metric: &DiscreteMetric,
    boundary: &BTreeMap<usize, VertexCondition>,
    config: &SolverConfig,
) -> Result<Flattening, MappingError> {
    if !tri.is_disk() {
        return Err(MappingError::Topology("flattening needs a disk".into()));
    }
    let bc = flattening_conditions(tri, boundary)?;
    let s = solve_problem(tri, metric, &bc, config)?;
    let layout = layout_euclidean(tri, &s.metric, 0)?;
    Ok(Flattening { metric: s.metric, u: s.u, report: s.report, conditions: s.conditions, layout })
}

/// Restricts edge data to a sub-triangulation.
pub(crate) fn restrict_edges(tri: &Triangulation, sub: &Triangulation, new_to_old: &[usize], data: &[f64]) -> Vec<f64> {
    sub.edges()
        .iter()
        .map(|&[a, b]| data[tri.edge_index(new_to_old[a], new_to_old[b]).expect("sub edge exists")])
        .collect()
}

/// Scale factors making all edges at `k` of unit length.
fn unit_star_scale(tri: &Triangulation, lambda: &[f64], k: usize) -> Vec<f64> {
    let mut u = vec![0.0; tri.n_vertices()];
    for j in tri.vertex_neighbors(k) {
        u[j] = -lambda[tri.edge_index(k, j).expect("neighbor edge")];
    }
    u
}

/// Sub-triangulation after removing the closed star of `k`, required to be a disk.
pub(crate) fn remove_star(tri: &Triangulation, k: usize) -> Result<(Triangulation, Vec<usize>), MappingError> {
    let faces = tri.faces_avoiding(k);
    if faces.is_empty() {
        return Err(MappingError::Topology(format!("nothing is left after removing the star of {k}")));
    }
    let (sub, map) = tri
        .sub_triangulation(&faces)
        .map_err(|e| MappingError::Topology(format!("removing the star of {k}: {e}")))?;
    if !sub.is_disk() {
        return Err(MappingError::Topology(format!("removing the star of {k} does not leave a disk")));
    }
    Ok((sub, map))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereNormalization {
    /// Applied to the planar layout before scaling.
    pub translation: [f64; 2],
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpherePolyhedron {
    pub positions: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
}

impl SpherePolyhedron {
    pub fn chordal_metric(&self, tri: &Triangulation) -> Result<DiscreteMetric, MeshError> {
        let pos: Vec<Vec<f64>> = self.positions.iter().map(|p| p.to_vec()).collect();
        DiscreteMetric::from_positions(tri, &pos)
    }
}

#[derive(Debug, Clone)]
pub struct SphereMap {
    pub polyhedron: SpherePolyhedron,
    /// Scale factors of the planar solve, per vertex of the input (zero at `k`).
    pub u: Vec<f64>,
    pub report: SolveReport,
    pub normalization: SphereNormalization,
}

/// Inverse stereographic projection from the north pole.
pub fn inverse_stereographic(p: [f64; 2]) -> [f64; 3] {
    let r2 = p[0] * p[0] + p[1] * p[1];
    let d = r2 + 1.0;
    [2.0 * p[0] / d, 2.0 * p[1] / d, (r2 - 1.0) / d]
}

/// Scale `s` with mean height of the projected points (plus the pole) zero.
fn centering_scale(points: &[[f64; 2]]) -> f64 {
    let mean_z = |ls: f64| {
        let s = ls.exp();
        let sum: f64 = points.iter().map(|p| inverse_stereographic([s * p[0], s * p[1]])[2]).sum();
        (sum + 1.0) / (points.len() + 1) as f64
    };
    let (mut lo, mut hi) = (-50.0, 50.0);
    if mean_z(lo) > 0.0 || mean_z(hi) < 0.0 {
        return 1.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_z(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Maps a triangulated sphere to a polyhedron inscribed in the unit sphere,
/// with `k` at the north pole.
pub fn map_to_sphere(
    tri: &Triangulation,
    metric: &DiscreteMetric,
    k: usize,
    config: &SolverConfig,
) -> Result<SphereMap, MappingError> {
    if !tri.is_sphere() {
        return Err(MappingError::Topology("sphere map needs a closed genus-0 surface".into()));
    }
    if k >= tri.n_vertices() {
        return Err(MeshError::VertexOutOfRange { index: k, count: tri.n_vertices() }.into());
    }
    if metric.geometry() != Geometry::Euclidean {
        return Err(MeshError::FlavorMismatch.into());
    }
    let u1 = unit_star_scale(tri, metric.lambda(), k);
    let m1 = metric.rescaled(tri, &u1)?;
    let (sub, map) = remove_star(tri, k)?;
    let lam = restrict_edges(tri, &sub, &map, m1.lambda());
    let sub_metric = DiscreteMetric::from_lambda(Geometry::Euclidean, lam)?;
    let vertices = (0..sub.n_vertices())
        .map(|v| if sub.is_boundary_vertex(v) { VertexCondition::Scale(0.0) } else { VertexCondition::AngleSum(2.0 * PI) })
        .collect();
    let bc = BoundaryConditions { vertices, phi: None, free_lambda: Vec::new() };
    let s = solve_problem(&sub, &sub_metric, &bc, config)?;
    let layout = layout_euclidean(&sub, &s.metric, 0)?;
    let planar = layout.vertex_positions(&sub);
    let bnd: Vec<usize> = sub.boundary_vertices().collect();
    let mut c = [0.0; 2];
    for &v in &bnd {
        c[0] += planar[v][0] / bnd.len() as f64;
        c[1] += planar[v][1] / bnd.len() as f64;
    }
    let centered: Vec<[f64; 2]> = planar.iter().map(|p| sub2(*p, c)).collect();
    let scale = centering_scale(&centered);
    let mut positions = vec![[0.0, 0.0, 1.0]; tri.n_vertices()];
    let mut u = vec![0.0; tri.n_vertices()];
    for (v, p) in centered.iter().enumerate() {
        positions[map[v]] = inverse_stereographic([scale * p[0], scale * p[1]]);
        u[map[v]] = s.u[v];
    }
    Ok(SphereMap {
        polyhedron: SpherePolyhedron { positions, faces: tri.faces().to_vec() },
        u,
        report: s.report,
        normalization: SphereNormalization { translation: [-c[0], -c[1]], scale },
    })
}

/// Solves for `u` and the free `lambda` with the circle pattern functional
/// and `Phi` equal to `pi` on interior and `pi/2` on boundary edges. Without
/// free edges this is the scale problem.
fn solve_mixed(
    tri: &Triangulation,
    lambda: &[f64],
    free: &[bool],
    bc: &BoundaryConditions,
    config: &SolverConfig,
) -> Result<(Vec<f64>, Vec<f64>, SolveReport), MappingError> {
    if !free.iter().any(|&f| f) {
        let m = DiscreteMetric::from_lambda(Geometry::Euclidean, lambda.to_vec())?;
        let s = solve_problem(tri, &m, bc, config)?;
        return Ok((s.u, lambda.to_vec(), s.report));
    }
    bc.validate(tri).map_err(SolveError::from)?;
    let mut fixed = bc.fixed_mask();
    let mut kernel = None;
    if !fixed.iter().any(|&f| f) {
        match config.gauge {
            Gauge::FixOneVertex => fixed[0] = true,
            Gauge::ProjectOutConstants => {
                let layout = VariableLayout::new(&fixed, free);
                let mut k = vec![0.0; layout.n];
                for i in layout.u_index.iter().flatten() {
                    k[*i] = 1.0;
                }
                kernel = Some(k);
            }
            Gauge::None => {}
        }
    }
    let problem = Problem {
        tri,
        kind: ProblemKind::CirclePattern,
        lambda: lambda.to_vec(),
        theta: bc.theta(),
        phi: Some(phi_for_scale_problem(tri)),
        u: bc.initial_u(),
        layout: VariableLayout::new(&fixed, free),
    };
    let (u, lambda, report) = solve_energy(&problem, kernel, config)?;
    Ok((u, lambda, report))
}

fn lambda_tilde(tri: &Triangulation, lambda: &[f64], u: &[f64]) -> Vec<f64> {
    tri.edges().iter().zip(lambda).map(|(&[a, b], l)| l + u[a] + u[b]).collect()
}

/// Affine normalization of the disk pipeline: the line through `a` and `b`
/// becomes the real axis with `a, b` at `-1, 1` and the mesh above it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskNormalization {
    /// `z -> rotation * (z - center) / half_length`, then `w = (z - i) / (z + i)`.
    pub center: [f64; 2],
    pub half_length: f64,
    pub rotation: [f64; 2],
    /// Boundary neighbors of `k` sent to `-1` and `1` on the line.
    pub line_ends: [usize; 2],
}

#[derive(Debug, Clone)]
pub struct DiskMap {
    /// Positions in the unit disk, `k` at `1`.
    pub positions: Vec<[f64; 2]>,
    pub layout: PlanarLayout,
    /// Metric of the mapped mesh.
    pub metric: DiscreteMetric,
    /// Scale factors of the planar solve (zero at `k`).
    pub u: Vec<f64>,
    pub report: SolveReport,
    pub normalization: DiskNormalization,
}

/// Disk pipeline on a surface that may carry free (diagonal) edges. The
/// boundary of `tri` must be a single loop through `k`.
fn disk_pipeline(
    tri: &Triangulation,
    lambda: &[f64],
    free: &[bool],
    k: usize,
    config: &SolverConfig,
) -> Result<(Vec<[f64; 2]>, Vec<f64>, SolveReport, DiskNormalization), MappingError> {
    if k >= tri.n_vertices() {
        return Err(MeshError::VertexOutOfRange { index: k, count: tri.n_vertices() }.into());
    }
    if !tri.is_boundary_vertex(k) {
        return Err(MappingError::InvalidInput(format!("vertex {k} is not on the boundary")));
    }
    if let Some(&face) = tri.ears().first() {
        return Err(MappingError::EarDetected { face });
    }
    let u1 = unit_star_scale(tri, lambda, k);
    let lam1 = lambda_tilde(tri, lambda, &u1);
    let (sub, map) = remove_star(tri, k)?;
    let old_to_new: HashMap<usize, usize> = map.iter().enumerate().map(|(n, &o)| (o, n)).collect();
    let neighbors = tri.vertex_neighbors(k);
    let ends: Vec<usize> =
        neighbors.iter().copied().filter(|&j| tri.is_boundary_edge(tri.edge_index(k, j).expect("edge"))).collect();
    let [a, b] = ends[..] else {
        return Err(MappingError::Topology(format!("vertex {k} does not have two boundary neighbors")));
    };
    let vertices = (0..sub.n_vertices())
        .map(|v| {
            if !sub.is_boundary_vertex(v) {
                VertexCondition::AngleSum(2.0 * PI)
            } else if neighbors.contains(&map[v]) {
                VertexCondition::Scale(0.0)
            } else {
                VertexCondition::AngleSum(PI)
            }
        })
        .collect();
    let bc = BoundaryConditions { vertices, phi: None, free_lambda: Vec::new() };
    let sub_lambda = restrict_edges(tri, &sub, &map, &lam1);
    let sub_free: Vec<bool> = sub
        .edges()
        .iter()
        .map(|&[p, q]| free[tri.edge_index(map[p], map[q]).expect("sub edge exists")])
        .collect();
    let (u2, lam2, report) = solve_mixed(&sub, &sub_lambda, &sub_free, &bc, config)?;
    let solved = DiscreteMetric::from_lambda(Geometry::Euclidean, lambda_tilde(&sub, &lam2, &u2))?;
    let layout = layout_euclidean(&sub, &solved, 0)?;
    let planar: Vec<Complex64> = layout.vertex_positions(&sub).into_iter().map(cplx).collect();
    let (za, zb) = (planar[old_to_new[&a]], planar[old_to_new[&b]]);
    let center = 0.5 * (za + zb);
    let half = 0.5 * (zb - za).norm();
    let mut rot = Complex64::from_polar(1.0, -(zb - za).arg());
    let mean_im: f64 = planar.iter().map(|z| (rot * (z - center)).im).sum();
    let mut line_ends = [a, b];
    if mean_im < 0.0 {
        rot = -rot;
        line_ends = [b, a];
    }
    let i = Complex64::new(0.0, 1.0);
    let mut positions = vec![[1.0, 0.0]; tri.n_vertices()];
    let mut u = vec![0.0; tri.n_vertices()];
    for (v, z) in planar.iter().enumerate() {
        let z = rot * (z - center) / half;
        positions[map[v]] = pair((z - i) / (z + i));
        u[map[v]] = u1[map[v]] + u2[v];
    }
    let normalization = DiskNormalization { center: pair(center), half_length: half, rotation: pair(rot), line_ends };
    Ok((positions, u, report, normalization))
}

/// Maps a disk to the unit disk with all boundary vertices on the unit
/// circle and `k` at `1`.
pub fn map_to_disk(
    tri: &Triangulation,
    metric: &DiscreteMetric,
    k: usize,
    config: &SolverConfig,
) -> Result<DiskMap, MappingError> {
    if !tri.is_disk() {
        return Err(MappingError::Topology("disk map needs a disk".into()));
    }
    if metric.geometry() != Geometry::Euclidean {
        return Err(MeshError::FlavorMismatch.into());
    }
    let free = vec![false; tri.n_edges()];
    let (positions, u, report, normalization) = disk_pipeline(tri, metric.lambda(), &free, k, config)?;
    let layout = PlanarLayout::from_vertex_positions(tri, &positions);
    let pos: Vec<Vec<f64>> = positions.iter().map(|p| p.to_vec()).collect();
    let metric = DiscreteMetric::from_positions(tri, &pos)?;
    Ok(DiskMap { positions, layout, metric, u, report, normalization })
}

#[derive(Debug, Clone)]
pub struct CirclePattern {
    pub metric: DiscreteMetric,
    /// Angle sums implied by `Phi`.
    pub theta: Vec<f64>,
    pub report: SolveReport,
    /// Corner angles certifying feasibility.
    pub certificate: Vec<[f64; 3]>,
}

/// Angle sums `pi * faces(i) - sum_j Phi_ij` forced by `Phi` when `u = 0`.
pub fn circle_pattern_theta(tri: &Triangulation, phi: &[f64]) -> Vec<f64> {
    let mut theta: Vec<f64> = (0..tri.n_vertices()).map(|v| PI * tri.vertex_corners(v).len() as f64).collect();
    for (e, &[a, b]) in tri.edges().iter().enumerate() {
        theta[a] -= phi[e];
        theta[b] -= phi[e];
    }
    theta
}

/// Intersection angles of a metric: the sum of the angles opposite each
/// interior edge, the single opposite angle on boundary edges.
pub fn intersection_angles(tri: &Triangulation, metric: &DiscreteMetric) -> Vec<f64> {
    let mut phi = vec![0.0; tri.n_edges()];
    for f in 0..tri.n_faces() {
        let a = metric.face_angles(tri, f).angles;
        for (s, &e) in tri.face_edges(f).iter().enumerate() {
            phi[e] += a[s];
        }
    }
    phi
}

/// Finds a euclidean metric with circumcircle intersection angles `phi`.
pub fn solve_circle_pattern(
    tri: &Triangulation,
    phi: &[f64],
    theta: Option<&[f64]>,
    config: &SolverConfig,
) -> Result<CirclePattern, MappingError> {
    let bc = BoundaryConditions { vertices: vec![VertexCondition::Scale(0.0); tri.n_vertices()], phi: Some(phi.to_vec()), free_lambda: Vec::new() };
    bc.validate(tri).map_err(SolveError::from)?;
    let implied = circle_pattern_theta(tri, phi);
    let gb = implied.iter().sum::<f64>() - PI * tri.n_faces() as f64;
    let infeasible = |certificate| {
        MappingError::Solve(SolveError::InfeasibleDetected(Box::new(ConditionReport {
            condition1: Some(gb.abs() <= 1e-9),
            gauss_bonnet_residual: gb,
            condition2: false,
            condition3: false,
            certificate,
            violating_faces: None,
            epsilon: FEASIBILITY_EPS,
        })))
    };
    if let Some(t) = theta {
        if t.len() != tri.n_vertices() {
            return Err(MeshError::SizeMismatch { expected: tri.n_vertices(), got: t.len() }.into());
        }
        if t.iter().zip(&implied).any(|(a, b)| (a - b).abs() > 1e-9) {
            return Err(infeasible(None));
        }
    }
    let (feasible, cert) = check_circle_pattern_feasibility(tri, phi);
    let Some(certificate) = cert.filter(|_| feasible) else {
        return Err(infeasible(None));
    };
    let mut free = vec![true; tri.n_edges()];
    let mut kernel = None;
    match config.gauge {
        Gauge::FixOneVertex => free[0] = false,
        Gauge::ProjectOutConstants => kernel = Some(vec![1.0; tri.n_edges()]),
        Gauge::None => {}
    }
    let problem = Problem {
        tri,
        kind: ProblemKind::CirclePattern,
        lambda: vec![0.0; tri.n_edges()],
        theta: implied.clone(),
        phi: Some(phi.to_vec()),
        u: vec![0.0; tri.n_vertices()],
        layout: VariableLayout::new(&vec![true; tri.n_vertices()], &free),
    };
    let (_, lambda, report) = solve_energy(&problem, kernel, config)?;
    let metric = DiscreteMetric::from_lambda(Geometry::Euclidean, lambda)?;
    Ok(CirclePattern { metric, theta: implied, report, certificate })
}

/// Surface glued from polygons, with a length per polygon edge.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalSurface {
    pub polygons: Vec<Vec<usize>>,
    /// Lengths keyed by the sorted vertex pair.
    pub lengths: HashMap<[usize; 2], f64>,
}

impl PolygonalSurface {
    pub fn from_positions(polygons: Vec<Vec<usize>>, positions: &[Vec<f64>]) -> Self {
        let mut lengths = HashMap::new();
        for p in &polygons {
            for i in 0..p.len() {
                let (a, b) = (p[i], p[(i + 1) % p.len()]);
                lengths.insert(key(a, b), crate::mesh::distance(&positions[a], &positions[b]));
            }
        }
        PolygonalSurface { polygons, lengths }
    }

    fn length(&self, a: usize, b: usize) -> Result<f64, MappingError> {
        self.lengths
            .get(&key(a, b))
            .copied()
            .ok_or_else(|| MappingError::InvalidInput(format!("missing length of edge ({a}, {b})")))
    }
}

fn key(a: usize, b: usize) -> [usize; 2] {
    [a.min(b), a.max(b)]
}

#[derive(Debug, Clone)]
pub struct CircularMesh {
    /// Fan triangulation of the polygons.
    pub tri: Triangulation,
    /// Diagonal edges of the fan triangulation.
    pub diagonals: Vec<bool>,
    /// Rescaled metric on the triangulation.
    pub metric: DiscreteMetric,
    pub u: Vec<f64>,
    pub report: SolveReport,
}

/// Fans each polygon from its first vertex; returns the triangles and, per
/// triangle, the index of its polygon.
fn fan_triangulate(polygons: &[Vec<usize>]) -> (Vec<[usize; 3]>, Vec<usize>) {
    let mut faces = Vec::new();
    let mut owner = Vec::new();
    for (pi, p) in polygons.iter().enumerate() {
        for i in 1..p.len() - 1 {
            faces.push([p[0], p[i], p[i + 1]]);
            owner.push(pi);
        }
    }
    (faces, owner)
}

/// Diagonal guess `s sin(pi d / n) / sin(pi / n)` from a regular polygon
/// with side `s`.
fn regular_diagonal(side: f64, n: usize, d: usize) -> f64 {
    side * (PI * d as f64 / n as f64).sin() / (PI / n as f64).sin()
}

/// Triangulates and solves a circular polyhedral surface: polygon edges keep
/// their `lambda`, diagonals are free with `Phi = pi`.
pub fn solve_circular_mesh(
    surface: &PolygonalSurface,
    conditions: &[VertexCondition],
    config: &SolverConfig,
) -> Result<CircularMesh, MappingError> {
    for (f, p) in surface.polygons.iter().enumerate() {
        if p.len() < 3 {
            return Err(MappingError::InvalidInput(format!("polygon {f} has fewer than three vertices")));
        }
        let sides = (0..p.len()).map(|i| surface.length(p[i], p[(i + 1) % p.len()])).collect::<Result<Vec<_>, _>>()?;
        let total: f64 = sides.iter().sum();
        if sides.iter().any(|&s| !(s > 0.0) || s >= total - s) {
            return Err(MappingError::PolygonalInequalityViolated { face: f });
        }
    }
    let (faces, _) = fan_triangulate(&surface.polygons);
    let nv = conditions.len();
    let tri = Triangulation::with_vertex_count(nv, &faces)?;
    let mut lambda = vec![0.0; tri.n_edges()];
    let mut free = vec![false; tri.n_edges()];
    for (e, &[a, b]) in tri.edges().iter().enumerate() {
        if let Some(l) = surface.lengths.get(&key(a, b)) {
            lambda[e] = 2.0 * l.ln();
        } else {
            free[e] = true;
        }
    }
    for p in &surface.polygons {
        let n = p.len();
        let mean = (0..n).map(|i| surface.lengths[&key(p[i], p[(i + 1) % n])]).sum::<f64>() / n as f64;
        for d in 2..n - 1 {
            let e = tri.edge_index(p[0], p[d]).expect("fan diagonal");
            if free[e] {
                lambda[e] = 2.0 * regular_diagonal(mean, n, d).ln();
            }
        }
    }
    let bc = BoundaryConditions { vertices: conditions.to_vec(), phi: None, free_lambda: Vec::new() };
    let (u, lam, report) = solve_mixed(&tri, &lambda, &free, &bc, config)?;
    let metric = DiscreteMetric::from_lambda(Geometry::Euclidean, lambda_tilde(&tri, &lam, &u))?;
    Ok(CircularMesh { tri, diagonals: free, metric, u, report })
}

#[derive(Debug, Clone)]
pub struct CircleDomain {
    /// Positions in the unit disk; the outer boundary is the unit circle.
    pub positions: Vec<[f64; 2]>,
    pub layout: PlanarLayout,
    pub metric: DiscreteMetric,
    /// Boundary loops, outer first.
    pub loops: Vec<Vec<usize>>,
    pub u: Vec<f64>,
    pub report: SolveReport,
    pub normalization: DiskNormalization,
}

/// Maps a genus-0 surface with boundary to a domain bounded by polygons
/// inscribed in circles. The longest boundary loop becomes the unit circle.
pub fn map_to_circle_domain(
    tri: &Triangulation,
    metric: &DiscreteMetric,
    k: Option<usize>,
    config: &SolverConfig,
) -> Result<CircleDomain, MappingError> {
    let mut loops = tri.boundary_loops();
    if loops.is_empty() || tri.genus() != 0 {
        return Err(MappingError::Topology("circle domains need genus 0 with boundary".into()));
    }
    if metric.geometry() != Geometry::Euclidean {
        return Err(MeshError::FlavorMismatch.into());
    }
    let outer = (0..loops.len()).max_by_key(|&i| loops[i].len()).expect("nonempty");
    loops.swap(0, outer);
    let mut faces = tri.faces().to_vec();
    let mut existing: std::collections::HashSet<[usize; 2]> = tri.edges().iter().map(|&[a, b]| key(a, b)).collect();
    for (h, lp) in loops.iter().enumerate().skip(1) {
        // filling polygon runs against the loop
        let rev: Vec<usize> = lp.iter().rev().copied().collect();
        let n = rev.len();
        let start = (0..n)
            .find(|&s| (2..n - 1).all(|d| !existing.contains(&key(rev[s], rev[(s + d) % n]))))
            .ok_or_else(|| MappingError::Topology(format!("hole {h} cannot be fanned without repeating an edge")))?;
        for i in 1..n - 1 {
            let (p, q) = (rev[(start + i) % n], rev[(start + i + 1) % n]);
            faces.push([rev[start], p, q]);
            existing.insert(key(rev[start], q));
        }
    }
    let filled = Triangulation::with_vertex_count(tri.n_vertices(), &faces)?;
    let mut lambda = vec![0.0; filled.n_edges()];
    let mut free = vec![false; filled.n_edges()];
    for (e, &[a, b]) in filled.edges().iter().enumerate() {
        match tri.edge_index(a, b) {
            Some(old) => lambda[e] = metric.lambda()[old],
            None => free[e] = true,
        }
    }
    for lp in loops.iter().skip(1) {
        let n = lp.len();
        let mean = (0..n)
            .map(|i| metric.lengths()[tri.edge_index(lp[i], lp[(i + 1) % n]).expect("loop edge")])
            .sum::<f64>()
            / n as f64;
        for (e, &[a, b]) in filled.edges().iter().enumerate() {
            if free[e] && lp.contains(&a) && lp.contains(&b) {
                let ia = lp.iter().position(|&v| v == a).expect("in loop");
                let ib = lp.iter().position(|&v| v == b).expect("in loop");
                let d = (ia + n - ib) % n;
                lambda[e] = 2.0 * regular_diagonal(mean, n, d.min(n - d)).ln();
            }
        }
    }
    let k_given = k;
    let candidates: Vec<usize> = match k {
        Some(k) => vec![k],
        None => loops[0].clone(),
    };
    let mut last = None;
    for k in candidates {
        match disk_pipeline(&filled, &lambda, &free, k, config) {
            Ok((positions, u, report, normalization)) => {
                let layout = PlanarLayout::from_vertex_positions(tri, &positions);
                let pos: Vec<Vec<f64>> = positions.iter().map(|p| p.to_vec()).collect();
                let metric = DiscreteMetric::from_positions(tri, &pos)?;
                return Ok(CircleDomain { positions, layout, metric, loops, u, report, normalization });
            }
            Err(e @ MappingError::Topology(_)) => last = Some(e),
            Err(e @ MappingError::Solve(SolveError::BrokenAtOptimum { .. })) if k_given.is_none() => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| MappingError::Topology("no usable boundary vertex".into())))
}

#[derive(Debug, Clone)]
pub struct Uniformization {
    pub metric: DiscreteMetric,
    pub u: Vec<f64>,
    pub report: SolveReport,
    pub layout: HyperbolicLayout,
}

/// Finds the hyperbolic metric with angle sums `2 pi`, discretely conformal
/// to a euclidean metric on a closed surface of negative Euler
/// characteristic, and develops it in the Poincare disk.
pub fn uniformize_hyperbolic(
    tri: &Triangulation,
    metric: &DiscreteMetric,
    start: Option<&[f64]>,
    config: &SolverConfig,
) -> Result<Uniformization, MappingError> {
    if !tri.is_closed() || tri.euler_characteristic() >= 0 {
        return Err(MappingError::Topology(format!(
            "hyperbolic uniformization needs a closed surface with negative Euler characteristic, got {}",
            tri.euler_characteristic()
        )));
    }
    if metric.geometry() != Geometry::Euclidean {
        return Err(MeshError::FlavorMismatch.into());
    }
    // sinh(l~/2) = e^{(u_i + u_j)/2} l, so lambda carries over unchanged
    let hyp = DiscreteMetric::from_lambda(Geometry::Hyperbolic, metric.lambda().to_vec())?;
    let bc = BoundaryConditions::angle_sums(&vec![2.0 * PI; tri.n_vertices()]);
    let s = solve_problem_from(tri, &hyp, &bc, start, config)?;
    let layout = layout_hyperbolic(tri, &s.metric, 0)?;
    Ok(Uniformization { metric: s.metric, u: s.u, report: s.report, layout })
}

/// Total area `sum (pi - alpha - beta - gamma)` of a hyperbolic metric.
pub fn hyperbolic_area(tri: &Triangulation, metric: &DiscreteMetric) -> f64 {
    (0..tri.n_faces()).map(|f| PI - metric.face_angles(tri, f).angles.iter().sum::<f64>()).sum()
}

/// Projective map of one triangle onto another, in homogeneous coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectiveTriangleMap {
    pub matrix: [[f64; 3]; 3],
}

impl ProjectiveTriangleMap {
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let h = self.apply_homogeneous(p);
        [h[0] / h[2], h[1] / h[2]]
    }

    pub fn apply_homogeneous(&self, p: [f64; 2]) -> [f64; 3] {
        let x = [p[0], p[1], 1.0];
        std::array::from_fn(|i| (0..3).map(|j| self.matrix[i][j] * x[j]).sum())
    }

    pub fn row_major(&self) -> [f64; 9] {
        std::array::from_fn(|i| self.matrix[i / 3][i % 3])
    }
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inverse3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let d = det3(m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let c = |i: usize, j: usize| {
        let (r0, r1) = ((i + 1) % 3, (i + 2) % 3);
        let (c0, c1) = ((j + 1) % 3, (j + 2) % 3);
        m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
    };
    Some(std::array::from_fn(|i| std::array::from_fn(|j| c(j, i) / d)))
}

fn signed_area(p: &[[f64; 2]; 3]) -> f64 {
    let (u, v) = (sub2(p[1], p[0]), sub2(p[2], p[0]));
    0.5 * (u[0] * v[1] - u[1] * v[0])
}

/// The projective map sending `src[i]` to `dst[i]` with homogeneous weight
/// `e^{-u_i}`, which carries the circumcircle of `src` onto that of `dst`.
pub fn projective_interpolation(
    src: [[f64; 2]; 3],
    dst: [[f64; 2]; 3],
    u: [f64; 3],
) -> Result<ProjectiveTriangleMap, MappingError> {
    for t in [&src, &dst] {
        let scale = (0..3).map(|i| norm2(sub2(t[i], t[(i + 1) % 3]))).fold(0.0, f64::max);
        if !(signed_area(t).abs() > 1e-14 * scale * scale) {
            return Err(MappingError::DegenerateFace);
        }
    }
    let mut residual: f64 = 0.0;
    for i in 0..3 {
        let j = (i + 1) % 3;
        let l = norm2(sub2(src[i], src[j]));
        let lt = norm2(sub2(dst[i], dst[j]));
        residual = residual.max((lt - (0.5 * (u[i] + u[j])).exp() * l).abs() / lt);
    }
    if residual > 1e-8 {
        return Err(MappingError::InconsistentU { residual });
    }
    let s: [[f64; 3]; 3] = std::array::from_fn(|r| std::array::from_fn(|c| if r < 2 { src[c][r] } else { 1.0 }));
    let d: [[f64; 3]; 3] = std::array::from_fn(|r| {
        std::array::from_fn(|c| (-u[c]).exp() * if r < 2 { dst[c][r] } else { 1.0 })
    });
    let si = inverse3(&s).ok_or(MappingError::DegenerateFace)?;
    let matrix = std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| d[i][k] * si[k][j]).sum()));
    Ok(ProjectiveTriangleMap { matrix })
}

/// Face-wise projective maps between two layouts of conformally equivalent
/// metrics.
pub fn projective_maps(
    tri: &Triangulation,
    src: &[[f64; 2]],
    dst: &[[f64; 2]],
    u: &[f64],
) -> Result<Vec<ProjectiveTriangleMap>, MappingError> {
    tri.faces()
        .iter()
        .map(|f| projective_interpolation(f.map(|v| src[v]), f.map(|v| dst[v]), f.map(|v| u[v])))
        .collect()
}

/// Largest distance between the images of `samples` points on each interior
/// edge under the maps of its two faces.
pub fn max_edge_discrepancy(
    tri: &Triangulation,
    maps: &[ProjectiveTriangleMap],
    src: &[[f64; 2]],
    samples: usize,
) -> f64 {
    let mut worst: f64 = 0.0;
    for e in tri.interior_edges() {
        let [Some(l), Some(r)] = tri.edge_sides(e) else { continue };
        let [a, b] = tri.edge(e);
        for i in 0..=samples {
            let t = i as f64 / samples as f64;
            let p = [src[a][0] + t * (src[b][0] - src[a][0]), src[a][1] + t * (src[b][1] - src[a][1])];
            worst = worst.max(norm2(sub2(maps[l.face].apply(p), maps[r.face].apply(p))));
        }
    }
    worst
}

/// Center and radius of the circle through three points.
pub fn circumcircle(p: [[f64; 2]; 3]) -> Option<([f64; 2], f64)> {
    let (ax, ay) = (p[0][0], p[0][1]);
    let (bx, by) = (p[1][0] - ax, p[1][1] - ay);
    let (cx, cy) = (p[2][0] - ax, p[2][1] - ay);
    let d = 2.0 * (bx * cy - by * cx);
    if d == 0.0 {
        return None;
    }
    let (b2, c2) = (bx * bx + by * by, cx * cx + cy * cy);
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    Some(([ax + ux, ay + uy], ux.hypot(uy)))
}

/// Largest deviation of `points` from their least-squares circle, relative
/// to its radius.
pub fn cocircularity_residual(points: &[[f64; 2]]) -> f64 {
    if points.len() < 4 {
        return 0.0;
    }
    // algebraic fit x^2 + y^2 + D x + E y + F = 0 by normal equations
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for p in points {
        let row = [p[0], p[1], 1.0];
        let rhs = -(p[0] * p[0] + p[1] * p[1]);
        for i in 0..3 {
            atb[i] += row[i] * rhs;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let Some(inv) = inverse3(&ata) else { return f64::INFINITY };
    let sol: [f64; 3] = std::array::from_fn(|i| (0..3).map(|j| inv[i][j] * atb[j]).sum());
    let c = [-0.5 * sol[0], -0.5 * sol[1]];
    let r = (c[0] * c[0] + c[1] * c[1] - sol[2]).sqrt();
    points.iter().map(|p| (norm2(sub2(*p, c)) - r).abs() / r).fold(0.0, f64::max)
}
