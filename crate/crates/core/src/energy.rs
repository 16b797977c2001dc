//! The convex functionals `E`, `E^h` and the circle pattern energy, with
//! gradients and sparse Hessians, plus the angle functional `S` and the
//! feasibility checks for prescribed angle sums.

use std::f64::consts::{FRAC_PI_2, PI};

use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::flow::FlowNetwork;
use crate::kernel::{self, TriangleDerivatives};
use crate::mesh::Triangulation;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnergyError {
    #[error("corner angle {angle} at face {face} slot {slot} is outside (0, pi)")]
    AngleOutOfRange { face: usize, slot: usize, angle: f64 },
    #[error("expected {expected} values for {what}, got {got}")]
    SizeMismatch { what: &'static str, expected: usize, got: usize },
    #[error("invalid boundary conditions: {0}")]
    InvalidConditions(String),
}

/// Condition at one vertex: a fixed scale factor (`V0`) or a prescribed
/// angle sum (`V1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexCondition {
    Scale(f64),
    AngleSum(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    pub vertices: Vec<VertexCondition>,
    /// Circumcircle intersection angles per edge.
    #[serde(default)]
    pub phi: Option<Vec<f64>>,
    /// Edges whose `lambda` is a variable. Empty means none.
    #[serde(default)]
    pub free_lambda: Vec<bool>,
}

impl BoundaryConditions {
    pub fn angle_sums(theta: &[f64]) -> Self {
        BoundaryConditions {
            vertices: theta.iter().map(|&t| VertexCondition::AngleSum(t)).collect(),
            phi: None,
            free_lambda: Vec::new(),
        }
    }

    pub fn validate(&self, tri: &Triangulation) -> Result<(), EnergyError> {
        if self.vertices.len() != tri.n_vertices() {
            return Err(EnergyError::SizeMismatch {
                what: "vertex conditions",
                expected: tri.n_vertices(),
                got: self.vertices.len(),
            });
        }
        for (v, c) in self.vertices.iter().enumerate() {
            match *c {
                VertexCondition::AngleSum(t) if !(t > 0.0 && t.is_finite()) => {
                    return Err(EnergyError::InvalidConditions(format!("angle sum {t} at vertex {v} is not positive")));
                }
                VertexCondition::Scale(u) if !u.is_finite() => {
                    return Err(EnergyError::InvalidConditions(format!("scale factor at vertex {v} is not finite")));
                }
                _ => {}
            }
        }
        if let Some(phi) = &self.phi {
            if phi.len() != tri.n_edges() {
                return Err(EnergyError::SizeMismatch { what: "phi", expected: tri.n_edges(), got: phi.len() });
            }
            if let Some((e, p)) = phi.iter().enumerate().find(|(_, &p)| !(p > 0.0 && p <= PI + 1e-12)) {
                return Err(EnergyError::InvalidConditions(format!("phi {p} on edge {e} is outside (0, pi]")));
            }
        }
        if !self.free_lambda.is_empty() && self.free_lambda.len() != tri.n_edges() {
            return Err(EnergyError::SizeMismatch {
                what: "free lambda mask",
                expected: tri.n_edges(),
                got: self.free_lambda.len(),
            });
        }
        Ok(())
    }

    pub fn fixed_mask(&self) -> Vec<bool> {
        self.vertices.iter().map(|c| matches!(c, VertexCondition::Scale(_))).collect()
    }

    /// Prescribed angle sums, zero on fixed vertices.
    pub fn theta(&self) -> Vec<f64> {
        self.vertices
            .iter()
            .map(|c| match c {
                VertexCondition::AngleSum(t) => *t,
                VertexCondition::Scale(_) => 0.0,
            })
            .collect()
    }

    /// Initial `u`: the fixed values on `V0`, zero elsewhere.
    pub fn initial_u(&self) -> Vec<f64> {
        self.vertices
            .iter()
            .map(|c| match c {
                VertexCondition::Scale(u) => *u,
                VertexCondition::AngleSum(_) => 0.0,
            })
            .collect()
    }
}

/// `phi` equal to `pi` on interior and `pi/2` on boundary edges, for which the
/// circle pattern energy coincides with `E`.
pub fn phi_for_scale_problem(tri: &Triangulation) -> Vec<f64> {
    (0..tri.n_edges())
        .map(|e| if tri.is_boundary_edge(e) { FRAC_PI_2 } else { PI })
        .collect()
}

/// Maps free `u` and free `lambda` to positions in the variable vector
/// (vertex variables first, then edge variables).
#[derive(Debug, Clone, PartialEq)]
pub struct VariableLayout {
    pub u_index: Vec<Option<usize>>,
    pub lambda_index: Vec<Option<usize>>,
    pub n: usize,
}

impl VariableLayout {
    pub fn new(fixed_u: &[bool], free_lambda: &[bool]) -> Self {
        let mut n = 0;
        let u_index = fixed_u
            .iter()
            .map(|&f| {
                (!f).then(|| {
                    n += 1;
                    n - 1
                })
            })
            .collect();
        let lambda_index = free_lambda
            .iter()
            .map(|&f| {
                f.then(|| {
                    n += 1;
                    n - 1
                })
            })
            .collect();
        VariableLayout { u_index, lambda_index, n }
    }

    pub fn gather(&self, u: &[f64], lambda: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (v, i) in self.u_index.iter().enumerate() {
            if let Some(i) = i {
                x[*i] = u[v];
            }
        }
        for (e, i) in self.lambda_index.iter().enumerate() {
            if let Some(i) = i {
                x[*i] = lambda[e];
            }
        }
        x
    }

    pub fn scatter(&self, x: &[f64], u: &mut [f64], lambda: &mut [f64]) {
        for (v, i) in self.u_index.iter().enumerate() {
            if let Some(i) = i {
                u[v] = x[*i];
            }
        }
        for (e, i) in self.lambda_index.iter().enumerate() {
            if let Some(i) = i {
                lambda[e] = x[*i];
            }
        }
    }
}

/// Symmetric sparse matrix in compressed column form, both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseHessian {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseHessian {
    /// Entries with equal `(row, col)` are summed.
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_by_key(|&(r, c, _)| (c, r));
        let mut col_ptr = vec![0; n + 1];
        let mut row_idx: Vec<usize> = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut cols: Vec<usize> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            if let (Some(&lr), Some(&lc)) = (row_idx.last(), cols.last()) {
                if lr == r && lc == c {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            row_idx.push(r);
            cols.push(c);
            values.push(v);
        }
        for &c in &cols {
            col_ptr[c + 1] += 1;
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        SparseHessian { n, col_ptr, row_idx, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = (self.col_ptr[j], self.col_ptr[j + 1]);
        match self.row_idx[lo..hi].binary_search(&i) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for c in 0..self.n {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[k]] += self.values[k] * x[c];
            }
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for c in 0..self.n {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                d[self.row_idx[k]][c] += self.values[k];
            }
        }
        d
    }

    /// Lower triangle of `H + shift I` restricted to the rows/columns in
    /// `keep` (renumbered in order), as a faer matrix.
    pub fn to_faer_lower(&self, shift: f64, keep: Option<&[Option<usize>]>) -> (SparseColMat<usize, f64>, usize) {
        let map = |i: usize| keep.map_or(Some(i), |k| k[i]);
        let m = keep.map_or(self.n, |k| k.iter().flatten().count());
        let mut trip = Vec::with_capacity(self.values.len() / 2 + m);
        for c in 0..self.n {
            let Some(cc) = map(c) else { continue };
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[k];
                let Some(rr) = map(r) else { continue };
                if rr >= cc {
                    trip.push(Triplet::new(rr, cc, self.values[k]));
                }
            }
        }
        for i in 0..m {
            trip.push(Triplet::new(i, i, shift));
        }
        let mat = SparseColMat::try_new_from_triplets(m, m, &trip).expect("indices in range");
        (mat, m)
    }

    /// Eigenvalues in increasing order (dense).
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.n == 0 {
            return Vec::new();
        }
        let d = self.to_dense();
        let m = Mat::from_fn(self.n, self.n, |i, j| d[i][j]);
        m.self_adjoint_eigenvalues(Side::Lower).unwrap_or_default()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for c in 0..self.n {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                worst = worst.max((self.values[k] - self.get(c, self.row_idx[k])).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct EnergyEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: SparseHessian,
    pub broken_faces: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Functional {
    Euclidean,
    Hyperbolic,
    CirclePattern,
}

struct FaceTerm {
    value: f64,
    /// Derivative with respect to `lambda~` per slot.
    grad: [f64; 3],
    /// Extra derivative with respect to each corner's `u`.
    extra_u: f64,
    deriv: TriangleDerivatives,
}

fn face_term(kind: Functional, lam: [f64; 3], uc: [f64; 3]) -> FaceTerm {
    // slot s: edge opposite corner s joins corners s+1, s+2
    let lt: [f64; 3] = std::array::from_fn(|s| lam[s] + uc[(s + 1) % 3] + uc[(s + 2) % 3]);
    match kind {
        Functional::Euclidean => {
            let (v, d) = kernel::euclidean_face(lt);
            FaceTerm {
                value: v - FRAC_PI_2 * (lt[0] + lt[1] + lt[2]),
                grad: d.gradient.map(|a| a - FRAC_PI_2),
                extra_u: 0.0,
                deriv: d,
            }
        }
        Functional::Hyperbolic => {
            let (_, d) = kernel::hyperbolic_face(lt);
            // literal prism summand 2 V_h(lambda_ij, -u_i)
            let p = kernel::prism_data(lam[2], lam[0], lam[1], -uc[0], -uc[1], -uc[2]);
            FaceTerm { value: p.value, grad: d.gradient, extra_u: -PI, deriv: d }
        }
        Functional::CirclePattern => {
            let (_, d) = kernel::euclidean_face(lt);
            // tetrahedron over the face with apex 4: lambda_i4 = -u_i
            let t = kernel::ideal_tet_vhat(lam[2], lam[0], lam[1], -uc[0], -uc[1], -uc[2]);
            FaceTerm { value: 2.0 * t.value, grad: d.gradient, extra_u: -PI, deriv: d }
        }
    }
}

struct Inputs<'a> {
    tri: &'a Triangulation,
    lambda: &'a [f64],
    theta: &'a [f64],
    phi: Option<&'a [f64]>,
    u: &'a [f64],
    layout: &'a VariableLayout,
}

fn assemble(kind: Functional, inp: &Inputs) -> EnergyEval {
    let tri = inp.tri;
    let layout = inp.layout;
    let mut value = 0.0;
    let mut gradient = vec![0.0; layout.n];
    let mut trip = Vec::with_capacity(tri.n_faces() * 36);
    let mut broken = Vec::new();
    for f in 0..tri.n_faces() {
        let face = tri.face(f);
        let fe = tri.face_edges(f);
        let lam = fe.map(|e| inp.lambda[e]);
        let uc = face.map(|v| inp.u[v]);
        let t = face_term(kind, lam, uc);
        value += t.value;
        if t.deriv.angles.is_broken() {
            broken.push(f);
        }
        // local variables: u of corners 0..3, lambda of slots 0..3
        let mut idx: [Option<usize>; 6] = [None; 6];
        for s in 0..3 {
            idx[s] = layout.u_index[face[s]];
            idx[3 + s] = layout.lambda_index.get(fe[s]).copied().flatten();
        }
        // d lambda~_s / d local_k
        let jac = |s: usize, k: usize| -> f64 {
            if k < 3 {
                if k != s {
                    1.0
                } else {
                    0.0
                }
            } else if k - 3 == s {
                1.0
            } else {
                0.0
            }
        };
        for k in 0..6 {
            let Some(i) = idx[k] else { continue };
            let mut g = (0..3).map(|s| t.grad[s] * jac(s, k)).sum::<f64>();
            if k < 3 {
                g += t.extra_u;
            }
            gradient[i] += g;
        }
        let h = &t.deriv.hessian;
        for a in 0..6 {
            let Some(i) = idx[a] else { continue };
            for b in 0..6 {
                let Some(j) = idx[b] else { continue };
                let mut v = 0.0;
                for s in 0..3 {
                    let ja = jac(s, a);
                    if ja == 0.0 {
                        continue;
                    }
                    for r in 0..3 {
                        v += ja * h[s][r] * jac(r, b);
                    }
                }
                trip.push((i, j, v));
            }
        }
    }
    for (v, i) in layout.u_index.iter().enumerate() {
        if let Some(i) = i {
            value += inp.theta[v] * inp.u[v];
            gradient[*i] += inp.theta[v];
        }
    }
    if let Some(phi) = inp.phi {
        for e in 0..tri.n_edges() {
            value -= phi[e] * inp.lambda[e];
            if let Some(Some(i)) = layout.lambda_index.get(e) {
                gradient[*i] -= phi[e];
            }
        }
    }
    EnergyEval { value, gradient, hessian: SparseHessian::from_triplets(layout.n, trip), broken_faces: broken }
}

/// `E(u) = sum_faces (2 f(lambda~/2) - pi/2 sum lambda~) + sum Theta_i u_i`
/// over the vertices not marked fixed.
pub fn energy_euclidean(tri: &Triangulation, lambda: &[f64], theta: &[f64], u: &[f64], fixed: &[bool]) -> EnergyEval {
    let layout = VariableLayout::new(fixed, &[]);
    assemble(
        Functional::Euclidean,
        &Inputs { tri, lambda, theta, phi: None, u, layout: &layout },
    )
}

/// `E^h(u) = sum_faces 2 V_h(lambda_ij, -u_i) + sum Theta_i u_i`.
pub fn energy_hyperbolic(tri: &Triangulation, lambda: &[f64], theta: &[f64], u: &[f64], fixed: &[bool]) -> EnergyEval {
    let layout = VariableLayout::new(fixed, &[]);
    assemble(
        Functional::Hyperbolic,
        &Inputs { tri, lambda, theta, phi: None, u, layout: &layout },
    )
}

/// Circle pattern energy `sum_faces 2 V(lambda, -u) - sum Phi lambda +
/// sum Theta u` in the joint free variables.
pub fn energy_circle_pattern(
    tri: &Triangulation,
    lambda: &[f64],
    phi: &[f64],
    theta: &[f64],
    u: &[f64],
    fixed_u: &[bool],
    free_lambda: &[bool],
) -> EnergyEval {
    let layout = VariableLayout::new(fixed_u, free_lambda);
    assemble(
        Functional::CirclePattern,
        &Inputs { tri, lambda, theta, phi: Some(phi), u, layout: &layout },
    )
}

/// Evaluates a functional on a packed variable vector.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub tri: &'a Triangulation,
    pub kind: ProblemKind,
    pub lambda: Vec<f64>,
    pub theta: Vec<f64>,
    pub phi: Option<Vec<f64>>,
    pub u: Vec<f64>,
    pub layout: VariableLayout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Euclidean,
    Hyperbolic,
    CirclePattern,
}

impl<'a> Problem<'a> {
    pub fn eval(&self, x: &[f64]) -> EnergyEval {
        let mut u = self.u.clone();
        let mut lambda = self.lambda.clone();
        self.layout.scatter(x, &mut u, &mut lambda);
        let kind = match self.kind {
            ProblemKind::Euclidean => Functional::Euclidean,
            ProblemKind::Hyperbolic => Functional::Hyperbolic,
            ProblemKind::CirclePattern => Functional::CirclePattern,
        };
        assemble(
            kind,
            &Inputs {
                tri: self.tri,
                lambda: &lambda,
                theta: &self.theta,
                phi: self.phi.as_deref(),
                u: &u,
                layout: &self.layout,
            },
        )
    }

    pub fn initial(&self) -> Vec<f64> {
        self.layout.gather(&self.u, &self.lambda)
    }

    /// Full `(u, lambda)` for a packed vector.
    pub fn unpack(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut u = self.u.clone();
        let mut lambda = self.lambda.clone();
        self.layout.scatter(x, &mut u, &mut lambda);
        (u, lambda)
    }
}

fn lambda_tilde(tri: &Triangulation, lambda: &[f64], u: &[f64]) -> Vec<f64> {
    tri.edges().iter().zip(lambda).map(|(&[a, b], l)| l + u[a] + u[b]).collect()
}

/// `sum_e w_e (e_i - e_j)(e_i - e_j)^T` with `w_e = 1/2 (cot + cot)` of the
/// angles opposite `e`, over the free vertices.
pub fn cotan_edge_hessian(tri: &Triangulation, lambda: &[f64], u: &[f64], fixed: &[bool]) -> SparseHessian {
    let layout = VariableLayout::new(fixed, &[]);
    let lt = lambda_tilde(tri, lambda, u);
    let mut w = vec![0.0; tri.n_edges()];
    for f in 0..tri.n_faces() {
        let fe = tri.face_edges(f);
        let (_, d) = kernel::euclidean_face(fe.map(|e| lt[e]));
        for s in 0..3 {
            w[fe[s]] += 0.5 * d.cot[s];
        }
    }
    edge_form(tri, &layout, &w, None)
}

/// `sum_e w_e [(e_i - e_j)(e_i - e_j)^T + tanh^2(l_e/2) (e_i + e_j)(e_i + e_j)^T]`
/// with `w_e = 1/2 (cot + cot)` of the prism edge angles at `e`.
pub fn hyperbolic_edge_hessian(tri: &Triangulation, lambda: &[f64], u: &[f64], fixed: &[bool]) -> SparseHessian {
    let layout = VariableLayout::new(fixed, &[]);
    let lt = lambda_tilde(tri, lambda, u);
    let mut w = vec![0.0; tri.n_edges()];
    for f in 0..tri.n_faces() {
        let fe = tri.face_edges(f);
        let (_, d) = kernel::hyperbolic_face(fe.map(|e| lt[e]));
        if d.angles.is_broken() {
            continue;
        }
        for s in 0..3 {
            w[fe[s]] += 0.5 * d.cot[s];
        }
    }
    let t2: Vec<f64> = lt
        .iter()
        .map(|&x| {
            let l = 2.0 * (0.5 * x).exp().asinh();
            (0.5 * l).tanh().powi(2)
        })
        .collect();
    edge_form(tri, &layout, &w, Some(&t2))
}

fn edge_form(tri: &Triangulation, layout: &VariableLayout, w: &[f64], plus: Option<&[f64]>) -> SparseHessian {
    let mut trip = Vec::new();
    for (e, &[a, b]) in tri.edges().iter().enumerate() {
        let (ia, ib) = (layout.u_index[a], layout.u_index[b]);
        let t = plus.map_or(0.0, |p| p[e]);
        let diag = w[e] * (1.0 + t);
        let off = w[e] * (t - 1.0);
        if let Some(i) = ia {
            trip.push((i, i, diag));
        }
        if let Some(j) = ib {
            trip.push((j, j, diag));
        }
        if let (Some(i), Some(j)) = (ia, ib) {
            trip.push((i, j, off));
            trip.push((j, i, off));
        }
    }
    SparseHessian::from_triplets(layout.n, trip)
}

/// `S(alpha) = sum_faces sum_corners (L(alpha) + 1/2 alpha lambda_opposite)`
/// and its gradient `-log(2 sin alpha) + lambda_opposite / 2` per corner.
pub fn s_functional(
    tri: &Triangulation,
    lambda: &[f64],
    alpha: &[[f64; 3]],
) -> Result<(f64, Vec<[f64; 3]>), EnergyError> {
    if alpha.len() != tri.n_faces() {
        return Err(EnergyError::SizeMismatch { what: "corner angles", expected: tri.n_faces(), got: alpha.len() });
    }
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(alpha.len());
    for f in 0..tri.n_faces() {
        let fe = tri.face_edges(f);
        let mut g = [0.0; 3];
        for s in 0..3 {
            let a = alpha[f][s];
            if !(a > 0.0 && a < PI) {
                return Err(EnergyError::AngleOutOfRange { face: f, slot: s, angle: a });
            }
            value += kernel::lobachevsky(a) + 0.5 * a * lambda[fe[s]];
            g[s] = -(2.0 * a.sin()).ln() + 0.5 * lambda[fe[s]];
        }
        grad.push(g);
    }
    Ok((value, grad))
}

/// Derivative of `S` along the cycle of interior edge `e = (i, j)`:
/// `d/d alpha^j_il - d/d alpha^i_lj + d/d alpha^i_jk - d/d alpha^j_ki`.
pub fn s_cycle_derivative(tri: &Triangulation, grad: &[[f64; 3]], e: usize) -> Option<f64> {
    let [left, right] = tri.edge_sides(e);
    let (left, right) = (left?, right?);
    let [i, j] = tri.edge(e);
    let slot = |f: usize, v: usize| tri.face(f).iter().position(|&w| w == v).expect("vertex of face");
    // left face ijk, right face jil
    let g_i_jk = grad[left.face][slot(left.face, i)];
    let g_j_ki = grad[left.face][slot(left.face, j)];
    let g_j_il = grad[right.face][slot(right.face, j)];
    let g_i_lj = grad[right.face][slot(right.face, i)];
    Some(g_j_il - g_i_lj + g_i_jk - g_j_ki)
}

pub const FEASIBILITY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `None` when some vertex has no prescribed angle sum.
    pub condition1: Option<bool>,
    pub gauss_bonnet_residual: f64,
    pub condition2: bool,
    /// Reported equal to Condition 2.
    pub condition3: bool,
    /// Corner angles `alpha^ >= eps` with face sums `pi` and vertex sums
    /// `Theta`, when feasible.
    pub certificate: Option<Vec<[f64; 3]>>,
    /// Faces `T1` violating Condition 3, when infeasible.
    pub violating_faces: Option<Vec<usize>>,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FaceSupply {
    Exact,
    AtMost,
}

fn corner_flow(tri: &Triangulation, theta: &[Option<f64>], supply: FaceSupply) -> (bool, Option<Vec<[f64; 3]>>, Option<Vec<usize>>) {
    let eps = FEASIBILITY_EPS;
    let nf = tri.n_faces();
    let nv = tri.n_vertices();
    // nodes: source, faces, vertices, pool, sink
    let src = 0;
    let face0 = 1;
    let vert0 = face0 + nf;
    let pool = vert0 + nv;
    let sink = pool + 1;
    let mut g = FlowNetwork::new(sink + 1, 1e-14);
    let face_cap = PI - 3.0 * eps;
    let corners: Vec<usize> = (0..nv).map(|v| tri.vertex_corners(v).len()).collect();
    let mut demand = 0.0;
    let mut arcs = vec![[(0, 0); 3]; nf];
    for f in 0..nf {
        g.add_arc(src, face0 + f, face_cap);
        for (s, &v) in tri.face(f).iter().enumerate() {
            arcs[f][s] = g.add_arc(face0 + f, vert0 + v, PI);
        }
    }
    let supply_total = face_cap * nf as f64;
    let mut fixed_demand = 0.0;
    for v in 0..nv {
        match theta[v] {
            Some(t) => {
                let cap = t - eps * corners[v] as f64;
                if cap < 0.0 {
                    return (false, None, Some(Vec::new()));
                }
                g.add_arc(vert0 + v, sink, cap);
                fixed_demand += cap;
            }
            None => {
                g.add_arc(vert0 + v, pool, f64::INFINITY);
            }
        }
    }
    demand += fixed_demand;
    let any_free = theta.iter().any(Option::is_none);
    if any_free {
        let rest = supply_total - fixed_demand;
        if rest < -1e-9 && supply == FaceSupply::Exact {
            return (false, None, Some(Vec::new()));
        }
        g.add_arc(pool, sink, rest.max(0.0));
        demand += rest.max(0.0);
    }
    let flow = g.max_flow(src, sink);
    let tol = 1e-9 * (1.0 + supply_total);
    let feasible = match supply {
        FaceSupply::Exact => flow >= supply_total - tol && flow >= demand - tol && (supply_total - demand).abs() <= tol,
        FaceSupply::AtMost => flow >= demand - tol,
    };
    if feasible {
        let cert = (0..nf)
            .map(|f| std::array::from_fn(|s| eps + g.flow(arcs[f][s])))
            .collect();
        (true, Some(cert), None)
    } else {
        let side = g.source_side(src);
        let t1 = (0..nf).filter(|&f| side[face0 + f]).collect();
        (false, None, Some(t1))
    }
}

/// Conditions 1 (discrete Gauss-Bonnet) and 2 (existence of positive angles
/// with face sums `pi` and vertex sums `Theta`). `None` entries of `theta`
/// leave the vertex sum free.
pub fn check_conditions(tri: &Triangulation, theta: &[Option<f64>]) -> ConditionReport {
    let all = theta.iter().all(Option::is_some);
    let total: f64 = theta.iter().flatten().sum();
    let residual = total - PI * tri.n_faces() as f64;
    let condition1 = all.then_some(residual.abs() <= 1e-9);
    let (mut feasible, cert, viol) = corner_flow(tri, theta, FaceSupply::Exact);
    if condition1 == Some(false) {
        feasible = false;
    }
    ConditionReport {
        condition1,
        gauss_bonnet_residual: residual,
        condition2: feasible,
        condition3: feasible,
        certificate: if feasible { cert } else { None },
        violating_faces: if feasible { None } else { viol },
        epsilon: FEASIBILITY_EPS,
    }
}

/// Hyperbolic analogue: angles `>= eps` with face sums below `pi` and vertex
/// sums `Theta`. Condition 1 becomes `sum Theta < pi |T|`.
pub fn check_conditions_hyperbolic(tri: &Triangulation, theta: &[Option<f64>]) -> ConditionReport {
    let all = theta.iter().all(Option::is_some);
    let total: f64 = theta.iter().flatten().sum();
    let residual = total - PI * tri.n_faces() as f64;
    let condition1 = all.then_some(residual < 0.0);
    let (mut feasible, cert, viol) = corner_flow(tri, theta, FaceSupply::AtMost);
    if condition1 == Some(false) {
        feasible = false;
    }
    ConditionReport {
        condition1,
        gauss_bonnet_residual: residual,
        condition2: feasible,
        condition3: feasible,
        certificate: if feasible { cert } else { None },
        violating_faces: if feasible { None } else { viol },
        epsilon: FEASIBILITY_EPS,
    }
}

/// Existence of corner angles `>= eps` with face sums `pi`, opposite-angle
/// sums `Phi` on interior edges and opposite angle `Phi` on boundary edges.
pub fn check_circle_pattern_feasibility(tri: &Triangulation, phi: &[f64]) -> (bool, Option<Vec<[f64; 3]>>) {
    let eps = FEASIBILITY_EPS;
    let nf = tri.n_faces();
    let ne = tri.n_edges();
    let src = 0;
    let face0 = 1;
    let edge0 = face0 + nf;
    let sink = edge0 + ne;
    let mut g = FlowNetwork::new(sink + 1, 1e-14);
    let mut arcs = vec![[(0, 0); 3]; nf];
    let face_cap = PI - 3.0 * eps;
    for f in 0..nf {
        g.add_arc(src, face0 + f, face_cap);
        for (s, &e) in tri.face_edges(f).iter().enumerate() {
            arcs[f][s] = g.add_arc(face0 + f, edge0 + e, PI);
        }
    }
    let mut demand = 0.0;
    for e in 0..ne {
        let k = if tri.is_boundary_edge(e) { 1.0 } else { 2.0 };
        let cap = phi[e] - k * eps;
        if cap < 0.0 {
            return (false, None);
        }
        g.add_arc(edge0 + e, sink, cap);
        demand += cap;
    }
    let supply = face_cap * nf as f64;
    let flow = g.max_flow(src, sink);
    let tol = 1e-9 * (1.0 + supply);
    if (supply - demand).abs() > tol || flow < supply - tol {
        return (false, None);
    }
    let cert = (0..nf).map(|f| std::array::from_fn(|s| eps + g.flow(arcs[f][s]))).collect();
    (true, Some(cert))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RayReport {
    pub direction: Vec<f64>,
    pub samples: Vec<(f64, f64)>,
    pub eventually_increasing: bool,
}

/// Samples `E(t d)` for each direction at the given `t` values.
pub fn coercivity_probe(
    tri: &Triangulation,
    lambda: &[f64],
    theta: &[f64],
    directions: &[Vec<f64>],
    ts: &[f64],
) -> Vec<RayReport> {
    let fixed = vec![false; tri.n_vertices()];
    directions
        .iter()
        .map(|d| {
            let samples: Vec<(f64, f64)> = ts
                .iter()
                .map(|&t| {
                    let u: Vec<f64> = d.iter().map(|x| t * x).collect();
                    (t, energy_euclidean(tri, lambda, theta, &u, &fixed).value)
                })
                .collect();
            let n = samples.len();
            let eventually_increasing = n >= 2 && {
                let (e0, e1) = (samples[n - 2].1, samples[n - 1].1);
                e1 - e0 > 1e-9 * (1.0 + e0.abs())
            };
            RayReport { direction: d.clone(), samples, eventually_increasing }
        })
        .collect()
}

/// Indicator of the vertices of the violating faces; `E` decreases along it
/// when the faces carry more than their vertices can absorb.
pub fn infeasibility_ray(tri: &Triangulation, violating_faces: &[usize]) -> Vec<f64> {
    let mut d = vec![0.0; tri.n_vertices()];
    for &f in violating_faces {
        for v in tri.face(f) {
            d[v] = 1.0;
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilateral_stationary() {
        let t = Triangulation::new(&[[0, 1, 2]]).unwrap();
        let th = [PI / 3.0; 3];
        let ev = energy_euclidean(&t, &[0.0; 3], &th, &[0.0; 3], &[false; 3]);
        assert!(ev.gradient.iter().all(|g| g.abs() < 1e-15));
    }

    #[test]
    fn conditions_single_triangle() {
        let t = Triangulation::new(&[[0, 1, 2]]).unwrap();
        let r = check_conditions(&t, &[Some(PI / 3.0); 3]);
        assert_eq!(r.condition1, Some(true));
        assert!(r.condition2);
        let r = check_conditions(&t, &[Some(PI); 3]);
        assert_eq!(r.condition1, Some(false));
        assert!(!r.condition2);
    }

    #[test]
    fn sparse_sums_duplicates() {
        let h = SparseHessian::from_triplets(2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, 1.0), (0, 1, 1.0)]);
        assert_eq!(h.get(0, 0), 3.0);
        assert_eq!(h.mul_vec(&[1.0, 1.0]), vec![4.0, 1.0]);
    }
}
