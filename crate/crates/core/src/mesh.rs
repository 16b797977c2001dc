//! Triangulation combinatorics, discrete metrics and conformal classes.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::kernel;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("face {face} has a repeated vertex or the same vertex set as another face")]
    NonSimplicial { face: usize },
    #[error("non-manifold at {what}")]
    NonManifold { what: String },
    #[error("inconsistent orientation across edge ({0}, {1})")]
    NonOrientable(usize, usize),
    #[error("vertex {0} is not referenced by any face")]
    IsolatedVertex(usize),
    #[error("vertex index {index} out of range for {count} vertices")]
    VertexOutOfRange { index: usize, count: usize },
    #[error("triangulation has no faces")]
    Empty,
    #[error("triangulation is not connected")]
    Disconnected,
    #[error("edge length on edge {edge} is not positive and finite: {value}")]
    NonPositiveLength { edge: usize, value: f64 },
    #[error("expected {expected} values, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("metrics have different geometry flavors")]
    FlavorMismatch,
    #[error("length cross ratio product at vertex {vertex} is off by {residual:e} in log space")]
    ProductConditionViolated { vertex: usize, residual: f64 },
    #[error("vertex {0} lies at the inversion center")]
    VertexAtCenter(usize),
    #[error("face {0} degenerates under the transformation")]
    DegenerateFace(usize),
}

/// Reference from an edge to one incident face: the face index and the slot
/// of the corner opposite the edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSide {
    pub face: usize,
    pub opposite: usize,
}

#[derive(Debug, Clone)]
pub struct Triangulation {
    n_vertices: usize,
    faces: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    /// `face_edges[f][s]` is the edge opposite corner `s`.
    face_edges: Vec<[usize; 3]>,
    /// `[0]`: face traversing the edge as `v0 -> v1`; `[1]`: as `v1 -> v0`.
    edge_sides: Vec<[Option<EdgeSide>; 2]>,
    /// Corners around each vertex as `(face, slot)`, ordered around the star.
    vertex_corners: Vec<Vec<(usize, usize)>>,
    boundary_vertex: Vec<bool>,
    edge_lookup: HashMap<(usize, usize), usize>,
}

impl Triangulation {
    /// Builds a triangulation with vertex count inferred from the faces.
    pub fn new(faces: &[[usize; 3]]) -> Result<Self, MeshError> {
        let n = faces.iter().flat_map(|f| f.iter()).max().map_or(0, |m| m + 1);
        Self::with_vertex_count(n, faces)
    }

    pub fn with_vertex_count(n_vertices: usize, faces: &[[usize; 3]]) -> Result<Self, MeshError> {
        if faces.is_empty() {
            return Err(MeshError::Empty);
        }
        let mut seen_sets = HashMap::new();
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= n_vertices {
                    return Err(MeshError::VertexOutOfRange { index: v, count: n_vertices });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::NonSimplicial { face: fi });
            }
            let mut key = *f;
            key.sort_unstable();
            if seen_sets.insert(key, fi).is_some() {
                return Err(MeshError::NonSimplicial { face: fi });
            }
        }

        let mut half_edges: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        let mut edge_faces: HashMap<(usize, usize), usize> = HashMap::new();
        for (fi, f) in faces.iter().enumerate() {
            for s in 0..3 {
                let a = f[(s + 1) % 3];
                let b = f[(s + 2) % 3];
                *edge_faces.entry((a.min(b), a.max(b))).or_insert(0) += 1;
                if half_edges.insert((a, b), (fi, s)).is_some() {
                    let count = edge_faces[&(a.min(b), a.max(b))];
                    if count > 2 {
                        return Err(MeshError::NonManifold {
                            what: format!("edge ({}, {}) has more than two faces", a.min(b), a.max(b)),
                        });
                    }
                    return Err(MeshError::NonOrientable(a.min(b), a.max(b)));
                }
            }
        }
        for (&(a, b), &count) in &edge_faces {
            if count > 2 {
                return Err(MeshError::NonManifold {
                    what: format!("edge ({a}, {b}) has more than two faces"),
                });
            }
        }

        let mut edges = Vec::new();
        let mut edge_lookup = HashMap::new();
        let mut face_edges = vec![[0usize; 3]; faces.len()];
        let mut edge_sides: Vec<[Option<EdgeSide>; 2]> = Vec::new();
        for (fi, f) in faces.iter().enumerate() {
            for s in 0..3 {
                let a = f[(s + 1) % 3];
                let b = f[(s + 2) % 3];
                let key = (a.min(b), a.max(b));
                let e = *edge_lookup.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_sides.push([None, None]);
                    edges.len() - 1
                });
                face_edges[fi][s] = e;
                let side = if a == key.0 { 0 } else { 1 };
                edge_sides[e][side] = Some(EdgeSide { face: fi, opposite: s });
            }
        }

        let mut raw_corners: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_vertices];
        for (fi, f) in faces.iter().enumerate() {
            for s in 0..3 {
                raw_corners[f[s]].push((fi, s));
            }
        }
        let mut vertex_corners = Vec::with_capacity(n_vertices);
        let mut boundary_vertex = vec![false; n_vertices];
        for v in 0..n_vertices {
            if raw_corners[v].is_empty() {
                return Err(MeshError::IsolatedVertex(v));
            }
            let (ordered, is_boundary) = order_star(v, &raw_corners[v], faces, &half_edges)?;
            boundary_vertex[v] = is_boundary;
            vertex_corners.push(ordered);
        }

        let tri = Triangulation {
            n_vertices,
            faces: faces.to_vec(),
            edges,
            face_edges,
            edge_sides,
            vertex_corners,
            boundary_vertex,
            edge_lookup,
        };
        if !tri.is_connected() {
            return Err(MeshError::Disconnected);
        }
        Ok(tri)
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.faces.len()];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(f) = stack.pop() {
            for g in self.face_neighbors(f).into_iter().flatten() {
                if !seen[g] {
                    seen[g] = true;
                    count += 1;
                    stack.push(g);
                }
            }
        }
        count == self.faces.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> [usize; 3] {
        self.faces[f]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    pub fn face_edges(&self, f: usize) -> [usize; 3] {
        self.face_edges[f]
    }

    pub fn edge_sides(&self, e: usize) -> [Option<EdgeSide>; 2] {
        self.edge_sides[e]
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_lookup.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_sides[e].iter().any(Option::is_none)
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn interior_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| !self.is_boundary_edge(e))
    }

    pub fn boundary_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_vertices).filter(|&v| self.boundary_vertex[v])
    }

    /// Corners `(face, slot)` at `v`, in order around the vertex star. For
    /// boundary vertices the order starts at one end of the fan.
    pub fn vertex_corners(&self, v: usize) -> &[(usize, usize)] {
        &self.vertex_corners[v]
    }

    pub fn vertex_degree(&self, v: usize) -> usize {
        self.vertex_corners[v].len() + usize::from(self.boundary_vertex[v])
    }

    /// Neighboring vertices of `v` (each once).
    pub fn vertex_neighbors(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for &(f, s) in &self.vertex_corners[v] {
            let face = self.faces[f];
            for w in [face[(s + 1) % 3], face[(s + 2) % 3]] {
                if !out.contains(&w) {
                    out.push(w);
                }
            }
        }
        out
    }

    /// Faces across each edge of `f`, indexed by corner slot.
    pub fn face_neighbors(&self, f: usize) -> [Option<usize>; 3] {
        let mut out = [None; 3];
        for s in 0..3 {
            let e = self.face_edges[f][s];
            out[s] = self.edge_sides[e]
                .iter()
                .flatten()
                .map(|side| side.face)
                .find(|&g| g != f);
        }
        out
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    /// Boundary cycles, each oriented as the half-edges of its faces run.
    pub fn boundary_loops(&self) -> Vec<Vec<usize>> {
        let mut next = HashMap::new();
        for e in 0..self.edges.len() {
            let [a, b] = self.edges[e];
            match self.edge_sides[e] {
                [Some(_), None] => {
                    next.insert(a, b);
                }
                [None, Some(_)] => {
                    next.insert(b, a);
                }
                _ => {}
            }
        }
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        let mut used = vec![false; self.n_vertices];
        let mut loops = Vec::new();
        for s in starts {
            if used[s] {
                continue;
            }
            let mut cycle = vec![s];
            used[s] = true;
            let mut v = next[&s];
            while v != s {
                used[v] = true;
                cycle.push(v);
                v = next[&v];
            }
            loops.push(cycle);
        }
        loops
    }

    pub fn genus(&self) -> i64 {
        let b = self.boundary_loops().len() as i64;
        (2 - b - self.euler_characteristic()) / 2
    }

    pub fn is_closed(&self) -> bool {
        !self.boundary_vertex.iter().any(|&b| b)
    }

    pub fn is_disk(&self) -> bool {
        self.euler_characteristic() == 1 && self.boundary_loops().len() == 1
    }

    pub fn is_sphere(&self) -> bool {
        self.is_closed() && self.euler_characteristic() == 2
    }

    /// Faces with two or more boundary edges.
    pub fn ears(&self) -> Vec<usize> {
        (0..self.faces.len())
            .filter(|&f| {
                self.face_edges[f]
                    .iter()
                    .filter(|&&e| self.is_boundary_edge(e))
                    .count()
                    >= 2
            })
            .collect()
    }

    /// Triangulation on a subset of faces, with vertices renumbered.
    /// Returns the new triangulation and the old index of each new vertex.
    pub fn sub_triangulation(&self, faces: &[usize]) -> Result<(Triangulation, Vec<usize>), MeshError> {
        let mut old_to_new = HashMap::new();
        let mut new_to_old = Vec::new();
        let mut new_faces = Vec::with_capacity(faces.len());
        for &f in faces {
            let mut nf = [0; 3];
            for (s, &v) in self.faces[f].iter().enumerate() {
                nf[s] = *old_to_new.entry(v).or_insert_with(|| {
                    new_to_old.push(v);
                    new_to_old.len() - 1
                });
            }
            new_faces.push(nf);
        }
        let t = Triangulation::with_vertex_count(new_to_old.len(), &new_faces)?;
        Ok((t, new_to_old))
    }

    /// Faces not incident to `v`.
    pub fn faces_avoiding(&self, v: usize) -> Vec<usize> {
        (0..self.faces.len()).filter(|&f| !self.faces[f].contains(&v)).collect()
    }
}

fn order_star(
    v: usize,
    corners: &[(usize, usize)],
    faces: &[[usize; 3]],
    half_edges: &HashMap<(usize, usize), (usize, usize)>,
) -> Result<(Vec<(usize, usize)>, bool), MeshError> {
    // Around v, the face with corner (v, a, b) is followed by the face
    // containing the half-edge v -> b.
    let next_of = |(f, s): (usize, usize)| -> Option<(usize, usize)> {
        let b = faces[f][(s + 2) % 3];
        half_edges.get(&(v, b)).map(|&(g, _)| {
            let slot = faces[g].iter().position(|&w| w == v).unwrap_or(0);
            (g, slot)
        })
    };
    let prev_of = |(f, s): (usize, usize)| -> Option<(usize, usize)> {
        let a = faces[f][(s + 1) % 3];
        half_edges.get(&(a, v)).map(|&(g, _)| {
            let slot = faces[g].iter().position(|&w| w == v).unwrap_or(0);
            (g, slot)
        })
    };

    let mut start = corners[0];
    let mut is_boundary = false;
    let mut guard = 0;
    while let Some(p) = prev_of(start) {
        if p == corners[0] {
            break;
        }
        start = p;
        guard += 1;
        if guard > corners.len() {
            break;
        }
    }
    if prev_of(start).is_none() {
        is_boundary = true;
    }
    let mut ordered = vec![start];
    let mut cur = start;
    while let Some(n) = next_of(cur) {
        if n == start {
            break;
        }
        ordered.push(n);
        cur = n;
        if ordered.len() > corners.len() {
            break;
        }
    }
    if ordered.len() != corners.len() {
        return Err(MeshError::NonManifold {
            what: format!("vertex {v} has a disconnected link"),
        });
    }
    Ok((ordered, is_boundary))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Euclidean,
    Hyperbolic,
}

/// Positive edge lengths with cached logarithmic lengths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteMetric {
    geometry: Geometry,
    lengths: Vec<f64>,
    lambda: Vec<f64>,
}

pub fn lambda_of_length(geometry: Geometry, l: f64) -> f64 {
    match geometry {
        Geometry::Euclidean => 2.0 * l.ln(),
        Geometry::Hyperbolic => {
            let h = 0.5 * l;
            if h < 20.0 {
                2.0 * h.sinh().ln()
            } else {
                // 2 log sinh(h) = 2 (h - ln 2 + ln(1 - e^{-2h}))
                2.0 * (h - std::f64::consts::LN_2 + (-(-2.0 * h).exp()).ln_1p())
            }
        }
    }
}

pub fn length_of_lambda(geometry: Geometry, lambda: f64) -> f64 {
    match geometry {
        Geometry::Euclidean => (0.5 * lambda).exp(),
        Geometry::Hyperbolic => 2.0 * crate::kernel::asinh_exp(0.5 * lambda),
    }
}

impl DiscreteMetric {
    pub fn from_lengths(geometry: Geometry, lengths: Vec<f64>) -> Result<Self, MeshError> {
        for (e, &l) in lengths.iter().enumerate() {
            if !(l > 0.0 && l.is_finite()) {
                return Err(MeshError::NonPositiveLength { edge: e, value: l });
            }
        }
        let lambda = lengths.iter().map(|&l| lambda_of_length(geometry, l)).collect();
        Ok(DiscreteMetric { geometry, lengths, lambda })
    }

    pub fn from_lambda(geometry: Geometry, lambda: Vec<f64>) -> Result<Self, MeshError> {
        let lengths: Vec<f64> = lambda.iter().map(|&x| length_of_lambda(geometry, x)).collect();
        for (e, &l) in lengths.iter().enumerate() {
            if !(l > 0.0 && l.is_finite()) {
                return Err(MeshError::NonPositiveLength { edge: e, value: l });
            }
        }
        Ok(DiscreteMetric { geometry, lengths, lambda })
    }

    /// Edge lengths measured between embedded vertex positions.
    pub fn from_positions(tri: &Triangulation, positions: &[Vec<f64>]) -> Result<Self, MeshError> {
        let lengths = tri
            .edges()
            .iter()
            .map(|&[a, b]| distance(&positions[a], &positions[b]))
            .collect();
        Self::from_lengths(Geometry::Euclidean, lengths)
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    /// `lambda~_ij = lambda_ij + u_i + u_j`.
    pub fn rescaled(&self, tri: &Triangulation, u: &[f64]) -> Result<Self, MeshError> {
        if u.len() != tri.n_vertices() {
            return Err(MeshError::SizeMismatch { expected: tri.n_vertices(), got: u.len() });
        }
        let lambda = tri
            .edges()
            .iter()
            .zip(&self.lambda)
            .map(|(&[a, b], &l)| l + u[a] + u[b])
            .collect();
        Self::from_lambda(self.geometry, lambda)
    }

    /// Side lengths of face `f`, indexed by the opposite corner.
    pub fn face_lengths(&self, tri: &Triangulation, f: usize) -> [f64; 3] {
        tri.face_edges(f).map(|e| self.lengths[e])
    }

    pub fn face_angles(&self, tri: &Triangulation, f: usize) -> kernel::TriangleAngles {
        let [a, b, c] = self.face_lengths(tri, f);
        let r = match self.geometry {
            Geometry::Euclidean => kernel::euclidean_angles(a, b, c),
            Geometry::Hyperbolic => kernel::hyperbolic_angles(a, b, c),
        };
        r.expect("metric lengths are positive")
    }

    pub fn broken_faces(&self, tri: &Triangulation) -> Vec<usize> {
        (0..tri.n_faces())
            .filter(|&f| self.face_angles(tri, f).broken.is_some())
            .collect()
    }

    /// Sum of corner angles at every vertex.
    pub fn angle_sums(&self, tri: &Triangulation) -> Vec<f64> {
        let mut sums = vec![0.0; tri.n_vertices()];
        for f in 0..tri.n_faces() {
            let ang = self.face_angles(tri, f);
            for (s, &v) in tri.face(f).iter().enumerate() {
                sums[v] += ang.angles[s];
            }
        }
        sums
    }

    /// Lengths entering the cross ratios: `l` (euclidean) or `2 sinh(l/2)`.
    pub fn secant_lengths(&self) -> Vec<f64> {
        match self.geometry {
            Geometry::Euclidean => self.lengths.clone(),
            Geometry::Hyperbolic => self.lengths.iter().map(|&l| 2.0 * (0.5 * l).sinh()).collect(),
        }
    }
}

pub(crate) fn distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

/// Logarithmic length cross ratios on interior edges.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConformalClass {
    log_lcr: Vec<Option<f64>>,
}

impl ConformalClass {
    pub fn from_log_lcr(log_lcr: Vec<Option<f64>>) -> Self {
        ConformalClass { log_lcr }
    }

    pub fn log_lcr(&self) -> &[Option<f64>] {
        &self.log_lcr
    }

    pub fn lcr(&self, e: usize) -> Option<f64> {
        self.log_lcr[e].map(f64::exp)
    }

    /// `sum_j log lcr_ij` at each interior vertex, zero at boundary vertices.
    pub fn vertex_residuals(&self, tri: &Triangulation) -> Vec<f64> {
        let mut res = vec![0.0; tri.n_vertices()];
        for (e, z) in self.log_lcr.iter().enumerate() {
            if let Some(z) = z {
                let [a, b] = tri.edge(e);
                res[a] += z;
                res[b] += z;
            }
        }
        for v in tri.boundary_vertices() {
            res[v] = 0.0;
        }
        res
    }

    /// Largest difference of log cross ratios between two classes.
    pub fn max_difference(&self, other: &ConformalClass) -> f64 {
        self.log_lcr
            .iter()
            .zip(&other.log_lcr)
            .filter_map(|(a, b)| Some((a.as_ref()? - b.as_ref()?).abs()))
            .fold(0.0, f64::max)
    }
}

/// The four edges around interior edge `e = (i, j)`, as `[il, jk, lj, ki]`,
/// where `ijk` traverses `i -> j` and `jil` traverses `j -> i`.
pub(crate) fn cross_ratio_edges(tri: &Triangulation, e: usize) -> Option<[usize; 4]> {
    let [left, right] = tri.edge_sides(e);
    let (left, right) = (left?, right?);
    let [i, j] = tri.edge(e);
    let fk = tri.face(left.face);
    let k = fk[left.opposite];
    let fl = tri.face(right.face);
    let l = fl[right.opposite];
    let idx = |a, b| tri.edge_index(a, b).expect("edge of adjacent face");
    Some([idx(i, l), idx(j, k), idx(l, j), idx(k, i)])
}

pub fn length_cross_ratios(tri: &Triangulation, metric: &DiscreteMetric) -> ConformalClass {
    let sec = metric.secant_lengths();
    let log_lcr = (0..tri.n_edges())
        .map(|e| {
            cross_ratio_edges(tri, e).map(|[il, jk, lj, ki]| ((sec[il] * sec[jk]) / (sec[lj] * sec[ki])).ln())
        })
        .collect();
    ConformalClass { log_lcr }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Equivalence {
    pub equivalent: bool,
    /// Per-vertex scale factors, averaged over incident faces.
    pub u: Option<Vec<f64>>,
    pub max_lcr_difference: f64,
    /// Largest disagreement between per-face recoveries of the same `u_i`.
    pub max_u_spread: f64,
}

/// Per-face recovery `u_i = 1/2 (dl_ij - dl_jk + dl_ki)` with `dl = lambda2 - lambda1`.
pub(crate) fn recover_scale_factors(tri: &Triangulation, lambda1: &[f64], lambda2: &[f64]) -> (Vec<f64>, f64) {
    let n = tri.n_vertices();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut sum = vec![0.0; n];
    let mut cnt = vec![0usize; n];
    for f in 0..tri.n_faces() {
        let face = tri.face(f);
        let fe = tri.face_edges(f);
        let d: Vec<f64> = fe.iter().map(|&e| lambda2[e] - lambda1[e]).collect();
        for s in 0..3 {
            // edge opposite slot s is d[s]; u at slot s uses the two adjacent edges
            let ui = 0.5 * (d[(s + 1) % 3] + d[(s + 2) % 3] - d[s]);
            let v = face[s];
            lo[v] = lo[v].min(ui);
            hi[v] = hi[v].max(ui);
            sum[v] += ui;
            cnt[v] += 1;
        }
    }
    let spread = (0..n).map(|v| hi[v] - lo[v]).fold(0.0, f64::max);
    let u = (0..n).map(|v| sum[v] / cnt[v] as f64).collect();
    (u, spread)
}

pub fn verify_conformal_equivalence(
    tri: &Triangulation,
    m1: &DiscreteMetric,
    m2: &DiscreteMetric,
    tol: f64,
) -> Result<Equivalence, MeshError> {
    if m1.geometry() != m2.geometry() {
        return Err(MeshError::FlavorMismatch);
    }
    for m in [m1, m2] {
        if m.len() != tri.n_edges() {
            return Err(MeshError::SizeMismatch { expected: tri.n_edges(), got: m.len() });
        }
    }
    let c1 = length_cross_ratios(tri, m1);
    let c2 = length_cross_ratios(tri, m2);
    let diff = c1.max_difference(&c2);
    let (u, spread) = recover_scale_factors(tri, m1.lambda(), m2.lambda());
    let equivalent = diff <= tol && spread <= tol.max(1e-12) * 10.0;
    Ok(Equivalence {
        equivalent,
        u: equivalent.then_some(u),
        max_lcr_difference: diff,
        max_u_spread: spread,
    })
}

/// Reconstructs a euclidean metric from a conformal class by propagating the
/// corner parameters `c^i_jk = l_jk / (l_ij l_ki)` around each vertex star.
pub fn metric_from_lcr(tri: &Triangulation, class: &ConformalClass) -> Result<DiscreteMetric, MeshError> {
    let z = class.log_lcr();
    if z.len() != tri.n_edges() {
        return Err(MeshError::SizeMismatch { expected: tri.n_edges(), got: z.len() });
    }
    let mut worst = (0, 0.0f64);
    for (v, r) in class.vertex_residuals(tri).into_iter().enumerate() {
        if r.abs() > worst.1.abs() {
            worst = (v, r);
        }
    }
    if worst.1.abs() > 1e-10 {
        return Err(MeshError::ProductConditionViolated { vertex: worst.0, residual: worst.1 });
    }

    // log c per corner (face, slot)
    let mut log_c = vec![[0.0f64; 3]; tri.n_faces()];
    for v in 0..tri.n_vertices() {
        let corners = tri.vertex_corners(v);
        let mut cur = 0.0;
        log_c[corners[0].0][corners[0].1] = cur;
        for w in corners.windows(2) {
            let (f, s) = w[0];
            // shared edge: v -> face[s+2] in the next face, face[s+2] -> v here
            let b = tri.face(f)[(s + 2) % 3];
            let e = tri.edge_index(v, b).expect("star edge");
            let zi = z[e].expect("edge inside the star is interior");
            cur += zi;
            log_c[w[1].0][w[1].1] = cur;
        }
    }
    let mut lambda = vec![0.0; tri.n_edges()];
    let mut set = vec![false; tri.n_edges()];
    for f in 0..tri.n_faces() {
        for s in 0..3 {
            let e = tri.face_edges(f)[s];
            if set[e] {
                continue;
            }
            // edge opposite s joins slots s+1, s+2; l = (c c)^(-1/2)
            let lc = log_c[f][(s + 1) % 3] + log_c[f][(s + 2) % 3];
            lambda[e] = -lc;
            set[e] = true;
        }
    }
    DiscreteMetric::from_lambda(Geometry::Euclidean, lambda)
}

/// One step of a Möbius transformation of `R^n`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum MobiusStep {
    /// `x -> scale * R x + t` with `R` orthogonal (row-major, `n x n`).
    Similarity {
        scale: f64,
        rotation: Vec<Vec<f64>>,
        translation: Vec<f64>,
    },
    /// `x -> x / |x|^2`.
    UnitInversion,
}

impl MobiusStep {
    pub fn apply(&self, p: &[f64]) -> Option<Vec<f64>> {
        match self {
            MobiusStep::Similarity { scale, rotation, translation } => Some(
                rotation
                    .iter()
                    .zip(translation)
                    .map(|(row, t)| scale * row.iter().zip(p).map(|(r, x)| r * x).sum::<f64>() + t)
                    .collect(),
            ),
            MobiusStep::UnitInversion => {
                let r2: f64 = p.iter().map(|x| x * x).sum();
                if r2 < 1e-300 {
                    return None;
                }
                Some(p.iter().map(|x| x / r2).collect())
            }
        }
    }
}

pub fn mobius_image_metric(
    tri: &Triangulation,
    positions: &[Vec<f64>],
    transform: &[MobiusStep],
) -> Result<DiscreteMetric, MeshError> {
    let mut pts = positions.to_vec();
    for step in transform {
        for (v, p) in pts.iter_mut().enumerate() {
            *p = step.apply(p).ok_or(MeshError::VertexAtCenter(v))?;
        }
    }
    for f in 0..tri.n_faces() {
        let [a, b, c] = tri.face(f);
        let d1: Vec<f64> = pts[b].iter().zip(&pts[a]).map(|(x, y)| x - y).collect();
        let d2: Vec<f64> = pts[c].iter().zip(&pts[a]).map(|(x, y)| x - y).collect();
        let n11: f64 = d1.iter().map(|x| x * x).sum();
        let n22: f64 = d2.iter().map(|x| x * x).sum();
        let n12: f64 = d1.iter().zip(&d2).map(|(x, y)| x * y).sum();
        let gram = n11 * n22 - n12 * n12;
        if !(gram > 1e-24 * n11 * n22) {
            return Err(MeshError::DegenerateFace(f));
        }
    }
    DiscreteMetric::from_positions(tri, &pts)
}
