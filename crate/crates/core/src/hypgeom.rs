//! Decorated ideal triangles and tetrahedra, Penner and shear coordinates,
//! and realization of cusp metrics as ideal polyhedra.

use std::f64::consts::PI;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::energy::{BoundaryConditions, VertexCondition};
use crate::kernel::{euclidean_angles, lobachevsky};
use crate::mapping::{inverse_stereographic, layout_euclidean, remove_star, restrict_edges, MappingError, SpherePolyhedron};
use crate::mesh::{
    cross_ratio_edges, length_cross_ratios, recover_scale_factors, ConformalClass, DiscreteMetric, Geometry,
    MeshError, Triangulation,
};
use crate::solver::{solve_problem, SolveError, SolveReport, SolverConfig};

#[derive(Debug, thiserror::Error)]
pub enum HypGeomError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error("horospheric triangle violates the triangle inequality: lambda = {lambda:?}")]
    NoTetrahedron { lambda: [f64; 6] },
    #[error("{0}")]
    Topology(String),
}

/// Ideal triangle with horocycles at distances `lambda = [ij, jk, ki]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoratedIdealTriangle {
    pub lambda: [f64; 3],
}

impl DecoratedIdealTriangle {
    pub fn new(lambda_ij: f64, lambda_jk: f64, lambda_ki: f64) -> Self {
        DecoratedIdealTriangle { lambda: [lambda_ij, lambda_jk, lambda_ki] }
    }

    /// Distances from the feet of the heights to the horocycles,
    /// `[p_ij^k, p_jk^i, p_ki^j]`.
    pub fn symmetry_distances(&self) -> [f64; 3] {
        let [a, b, c] = self.lambda;
        [0.5 * (-a + b + c), 0.5 * (a - b + c), 0.5 * (a + b - c)]
    }

    pub fn from_symmetry_distances(p: [f64; 3]) -> Self {
        let [pk, pi, pj] = p;
        DecoratedIdealTriangle { lambda: [pi + pj, pj + pk, pk + pi] }
    }

    /// Horocyclic arc lengths `[c_ij^k, c_jk^i, c_ki^j]` inside the triangle.
    pub fn horocycle_arcs(&self) -> [f64; 3] {
        let [a, b, c] = self.lambda;
        [(0.5 * (a - b - c)).exp(), (0.5 * (b - c - a)).exp(), (0.5 * (c - a - b)).exp()]
    }
}

const TET_EDGES: [[usize; 2]; 6] = [[0, 1], [1, 2], [2, 0], [0, 3], [1, 3], [2, 3]];

fn tet_edge(a: usize, b: usize) -> usize {
    TET_EDGES
        .iter()
        .position(|&[p, q]| (p, q) == (a, b) || (p, q) == (b, a))
        .expect("distinct tetrahedron vertices")
}

/// Ideal tetrahedron `0123` with horospheres at distances
/// `lambda = [01, 12, 20, 03, 13, 23]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoratedIdealTetrahedron {
    pub lambda: [f64; 6],
}

impl DecoratedIdealTetrahedron {
    pub fn new(lambda: [f64; 6]) -> Result<Self, HypGeomError> {
        let t = DecoratedIdealTetrahedron { lambda };
        if t.horospheric_triangle(3).broken.is_some() || lambda.iter().any(|x| !x.is_finite()) {
            return Err(HypGeomError::NoTetrahedron { lambda });
        }
        Ok(t)
    }

    fn others(v: usize) -> [usize; 3] {
        match v {
            0 => [1, 2, 3],
            1 => [2, 0, 3],
            2 => [0, 1, 3],
            _ => [0, 1, 2],
        }
    }

    /// Sides of the horospheric section at `v`. For `others = [a, b, c]`
    /// the sides are `[c_bc, c_ca, c_ab]`, so side `s` is opposite the
    /// corner on edge `v a_s`.
    pub fn horospheric_sides(&self, v: usize) -> [f64; 3] {
        let l = |a: usize, b: usize| self.lambda[tet_edge(a, b)];
        let o = Self::others(v);
        let x = [0, 1, 2].map(|s| {
            let (a, b) = (o[(s + 1) % 3], o[(s + 2) % 3]);
            0.5 * (l(a, b) - l(a, v) - l(b, v))
        });
        x.map(f64::exp)
    }

    fn horospheric_triangle(&self, v: usize) -> crate::kernel::TriangleAngles {
        let x = self.horospheric_sides(v);
        let m = x.iter().copied().fold(0.0, f64::max);
        let [a, b, c] = x.map(|y| (y / m).max(f64::MIN_POSITIVE));
        euclidean_angles(a, b, c).expect("positive sides")
    }

    /// Dihedral angles at the edges in the order of `lambda`, read off the
    /// horospheric section at `v`.
    pub fn dihedral_angles_at(&self, v: usize) -> [f64; 6] {
        let o = Self::others(v);
        let ang = self.horospheric_triangle(v).angles;
        let mut out = [0.0; 6];
        for s in 0..3 {
            out[tet_edge(v, o[s])] = ang[s];
            out[tet_edge(o[(s + 1) % 3], o[(s + 2) % 3])] = ang[s];
        }
        out
    }

    pub fn dihedral_angles(&self) -> [f64; 6] {
        self.dihedral_angles_at(3)
    }

    pub fn volume(&self) -> f64 {
        let a = self.dihedral_angles();
        lobachevsky(a[3]) + lobachevsky(a[4]) + lobachevsky(a[5])
    }
}

/// Shear coordinates `Z_ij = 1/2 (lambda_il - lambda_lj + lambda_jk - lambda_ki)`
/// on interior edges.
pub fn penner_to_shear(tri: &Triangulation, lambda: &[f64]) -> Result<ConformalClass, MeshError> {
    if lambda.len() != tri.n_edges() {
        return Err(MeshError::SizeMismatch { expected: tri.n_edges(), got: lambda.len() });
    }
    let z = (0..tri.n_edges())
        .map(|e| cross_ratio_edges(tri, e).map(|[il, jk, lj, ki]| 0.5 * (lambda[il] - lambda[lj] + lambda[jk] - lambda[ki])))
        .collect();
    Ok(ConformalClass::from_log_lcr(z))
}

/// Shear coordinates of the cusp metric of a triangulation, with the
/// product of `exp Z` around each vertex (1 at boundary vertices).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CuspSignature {
    pub shear: ConformalClass,
    pub vertex_products: Vec<f64>,
}

impl CuspSignature {
    pub fn matches(&self, other: &CuspSignature, tol: f64) -> bool {
        let same_support = self
            .shear
            .log_lcr()
            .iter()
            .zip(other.shear.log_lcr())
            .all(|(a, b)| a.is_some() == b.is_some());
        same_support && self.shear.log_lcr().len() == other.shear.log_lcr().len() && self.shear.max_difference(&other.shear) <= tol
    }
}

pub fn cusp_metric_signature(tri: &Triangulation, metric: &DiscreteMetric) -> Result<CuspSignature, MeshError> {
    let shear = penner_to_shear(tri, metric.lambda())?;
    let vertex_products = shear.vertex_residuals(tri).into_iter().map(f64::exp).collect();
    Ok(CuspSignature { shear, vertex_products })
}

/// Dimension of the space of shear coordinates satisfying the vertex
/// product conditions.
pub fn teichmuller_dimension(tri: &Triangulation) -> usize {
    let interior: Vec<usize> = tri.interior_edges().collect();
    let inner: Vec<usize> = (0..tri.n_vertices()).filter(|&v| !tri.is_boundary_vertex(v)).collect();
    if inner.is_empty() {
        return interior.len();
    }
    let mut c = Mat::<f64>::zeros(inner.len(), interior.len());
    for (col, &e) in interior.iter().enumerate() {
        for v in tri.edge(e) {
            if let Some(row) = inner.iter().position(|&w| w == v) {
                c[(row, col)] += 1.0;
            }
        }
    }
    interior.len() - numerical_rank(&c)
}

pub(crate) fn numerical_rank(m: &Mat<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let s = m.singular_values().expect("svd converges");
    let top = s.iter().copied().fold(0.0, f64::max);
    s.iter().filter(|&&x| x > 1e-10 * top.max(1.0)).count()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdealTetrahedronRecord {
    /// `[i, j, k, l]` with `ijk` a face of `T` minus the star of `l`.
    pub vertices: [usize; 4],
    pub positions: [[f64; 3]; 4],
    /// `[ij, jk, ki, il, jl, kl]`.
    pub lambda: [f64; 6],
    pub dihedral: [f64; 6],
}

#[derive(Debug, Clone)]
pub struct IdealPolyhedron {
    /// Ideal vertices on the unit sphere, apex at the north pole.
    pub polyhedron: SpherePolyhedron,
    pub tetrahedra: Vec<IdealTetrahedronRecord>,
    /// `u` of the planar solve, zero at the apex.
    pub u: Vec<f64>,
    pub flat_metric: DiscreteMetric,
    pub report: SolveReport,
    /// The planar development has consistently oriented faces and a simple
    /// boundary.
    pub star_shaped: bool,
    /// Largest `|c_ij^l - l~_ij|` over the horospheric sections at the apex.
    pub apex_length_error: f64,
    /// Largest deviation of dihedral sums from `pi` at any ideal vertex.
    pub vertex_sum_error: f64,
    /// Largest deviation from `2 pi` of dihedral angles around an edge `il`
    /// with `i` interior.
    pub edge_sum_error: f64,
    /// Largest disagreement of horocyclic data on faces shared by two
    /// tetrahedra.
    pub gluing_error: f64,
}

fn segments_cross(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let orient = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    let (d1, d2) = (orient(a, b, c), orient(a, b, d));
    let (d3, d4) = (orient(c, d, a), orient(c, d, b));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn is_simple(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Realizes a cusp metric on a punctured sphere, given by Penner coordinates,
/// as an ideal polyhedron star-shaped with respect to `apex`.
pub fn realize_ideal_polyhedron(
    tri: &Triangulation,
    lambda: &[f64],
    apex: usize,
    config: &SolverConfig,
) -> Result<IdealPolyhedron, HypGeomError> {
    if !tri.is_sphere() {
        return Err(HypGeomError::Topology("ideal polyhedra need a triangulated sphere".into()));
    }
    if apex >= tri.n_vertices() {
        return Err(MeshError::VertexOutOfRange { index: apex, count: tri.n_vertices() }.into());
    }
    if lambda.len() != tri.n_edges() {
        return Err(MeshError::SizeMismatch { expected: tri.n_edges(), got: lambda.len() }.into());
    }
    let (sub, map) = remove_star(tri, apex)?;
    let lam = restrict_edges(tri, &sub, &map, lambda);
    let metric = DiscreteMetric::from_lambda(Geometry::Euclidean, lam.clone())?;
    let to_apex = |v: usize| lambda[tri.edge_index(map[v], apex).expect("boundary vertex joins the apex")];
    let vertices = (0..sub.n_vertices())
        .map(|v| {
            if sub.is_boundary_vertex(v) {
                VertexCondition::Scale(-to_apex(v))
            } else {
                VertexCondition::AngleSum(2.0 * PI)
            }
        })
        .collect();
    let bc = BoundaryConditions { vertices, phi: None, free_lambda: Vec::new() };
    let s = solve_problem(&sub, &metric, &bc, config)?;

    let layout = layout_euclidean(&sub, &s.metric, 0)?;
    let planar = layout.vertex_positions(&sub);
    let consistent = layout.orientation.iter().all(|&o| o == layout.orientation[0]);
    let star_shaped = consistent && layout.boundary.iter().all(|b| is_simple(b));
    let bnd: Vec<usize> = sub.boundary_vertices().collect();
    let mut c = [0.0; 2];
    for &v in &bnd {
        c[0] += planar[v][0] / bnd.len() as f64;
        c[1] += planar[v][1] / bnd.len() as f64;
    }
    let flip = if layout.orientation[0] < 0.0 { -1.0 } else { 1.0 };
    let mut positions = vec![[0.0, 0.0, 1.0]; tri.n_vertices()];
    let mut u = vec![0.0; tri.n_vertices()];
    for v in 0..sub.n_vertices() {
        let p = [planar[v][0] - c[0], flip * (planar[v][1] - c[1])];
        positions[map[v]] = inverse_stereographic(p);
        u[map[v]] = s.u[v];
    }

    let mut tetrahedra = Vec::with_capacity(sub.n_faces());
    let mut apex_length_error: f64 = 0.0;
    let mut vertex_sum_error: f64 = 0.0;
    let mut around = vec![0.0; sub.n_vertices()];
    let mut shared: std::collections::HashMap<(usize, usize), [f64; 3]> = std::collections::HashMap::new();
    let mut gluing_error: f64 = 0.0;
    for f in 0..sub.n_faces() {
        let [a, b, cc] = sub.face(f);
        let fe = sub.face_edges(f);
        // face_edges[s] is opposite slot s: ab is fe[2], bc is fe[0], ca is fe[1]
        let tl = [lam[fe[2]], lam[fe[0]], lam[fe[1]], -s.u[a], -s.u[b], -s.u[cc]];
        let tet = DecoratedIdealTetrahedron::new(tl)?;
        let flat = s.metric.lengths();
        let sides = tet.horospheric_sides(3);
        for (side, e) in sides.iter().zip([fe[0], fe[1], fe[2]]) {
            apex_length_error = apex_length_error.max((side - flat[e]).abs());
        }
        for v in 0..4 {
            let d = tet.dihedral_angles_at(v);
            let o = DecoratedIdealTetrahedron::others(v);
            let sum: f64 = o.iter().map(|&w| d[tet_edge(v, w)]).sum();
            vertex_sum_error = vertex_sum_error.max((sum - PI).abs());
        }
        let dihedral = tet.dihedral_angles();
        for (slot, &v) in [a, b, cc].iter().enumerate() {
            around[v] += dihedral[3 + slot];
        }
        // horocyclic arcs of face (x, y, apex) seen from this tetrahedron
        for (x, y) in [(0, 1), (1, 2), (2, 0)] {
            let (vx, vy) = ([a, b, cc][x], [a, b, cc][y]);
            let tri_face = DecoratedIdealTriangle::new(tl[tet_edge(x, y)], tl[tet_edge(y, 3)], tl[tet_edge(3, x)]);
            let arcs = tri_face.horocycle_arcs();
            let key = (vx.min(vy), vx.max(vy));
            let arcs = if vx < vy { arcs } else { [arcs[0], arcs[2], arcs[1]] };
            if let Some(prev) = shared.insert(key, arcs) {
                for i in 0..3 {
                    gluing_error = gluing_error.max((prev[i] - arcs[i]).abs());
                }
            }
        }
        let verts = [map[a], map[b], map[cc], apex];
        tetrahedra.push(IdealTetrahedronRecord {
            vertices: verts,
            positions: verts.map(|v| positions[v]),
            lambda: tl,
            dihedral,
        });
    }
    let edge_sum_error = (0..sub.n_vertices())
        .filter(|&v| !sub.is_boundary_vertex(v))
        .map(|v| (around[v] - 2.0 * PI).abs())
        .fold(0.0, f64::max);

    Ok(IdealPolyhedron {
        polyhedron: SpherePolyhedron { positions, faces: tri.faces().to_vec() },
        tetrahedra,
        u,
        flat_metric: s.metric,
        report: s.report,
        star_shaped,
        apex_length_error,
        vertex_sum_error,
        edge_sum_error,
        gluing_error,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixedEquivalence {
    pub equivalent: bool,
    /// `u` with `sinh(l~/2) = e^{(u_i + u_j)/2} l`.
    pub u: Option<Vec<f64>>,
    pub max_lcr_difference: f64,
    pub max_u_spread: f64,
}

/// Tests whether a hyperbolic metric is discretely conformal to a
/// euclidean one, comparing `lcr` of `l` with that of `2 sinh(l~/2)`.
pub fn mixed_equivalence_check(
    tri: &Triangulation,
    euclidean: &DiscreteMetric,
    hyperbolic: &DiscreteMetric,
    tol: f64,
) -> Result<MixedEquivalence, MeshError> {
    if euclidean.geometry() != Geometry::Euclidean || hyperbolic.geometry() != Geometry::Hyperbolic {
        return Err(MeshError::FlavorMismatch);
    }
    for m in [euclidean, hyperbolic] {
        if m.len() != tri.n_edges() {
            return Err(MeshError::SizeMismatch { expected: tri.n_edges(), got: m.len() });
        }
    }
    let diff = length_cross_ratios(tri, euclidean).max_difference(&length_cross_ratios(tri, hyperbolic));
    // hyperbolic lambda is 2 log sinh(l~/2), so the difference is u_i + u_j
    let (u, spread) = recover_scale_factors(tri, euclidean.lambda(), hyperbolic.lambda());
    let equivalent = diff <= tol && spread <= tol.max(1e-12) * 10.0;
    Ok(MixedEquivalence { equivalent, u: equivalent.then_some(u), max_lcr_difference: diff, max_u_spread: spread })
}
