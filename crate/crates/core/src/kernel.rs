//! Per-triangle mathematics: the Lobachevsky function, triangle angles and
//! the convex triangle functions with their derivatives.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("side lengths must be positive and finite, got ({0}, {1}, {2})")]
    NonPositiveLength(f64, f64, f64),
}

const CLAUSEN_TERMS: usize = 30;

fn clausen_coefficients() -> &'static [f64; CLAUSEN_TERMS] {
    static TABLE: OnceLock<[f64; CLAUSEN_TERMS]> = OnceLock::new();
    TABLE.get_or_init(|| {
        // zeta(2k) / (k (2k+1) (2 pi)^{2k})
        let mut out = [0.0; CLAUSEN_TERMS];
        for (i, c) in out.iter_mut().enumerate() {
            let k = (i + 1) as i32;
            let z = zeta_even(k);
            *c = z / (f64::from(k) * f64::from(2 * k + 1) * (2.0 * PI).powi(2 * k));
        }
        out
    })
}

fn zeta_even(k: i32) -> f64 {
    match k {
        1 => PI * PI / 6.0,
        2 => PI.powi(4) / 90.0,
        _ => {
            let s = f64::from(2 * k);
            let n = 20.0f64;
            let mut sum = 0.0;
            for m in (1..20).rev() {
                sum += f64::from(m).powf(-s);
            }
            // Euler-Maclaurin tail from n
            sum + n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
        }
    }
}

/// Clausen's integral `Cl2(t) = -int_0^t log|2 sin(s/2)| ds`.
pub fn clausen(theta: f64) -> f64 {
    2.0 * lobachevsky(0.5 * theta)
}

/// `Cl2` on `[0, pi]` by its power series around zero.
fn clausen_small(theta: f64) -> f64 {
    if theta == 0.0 {
        return 0.0;
    }
    let t2 = theta * theta;
    let coef = clausen_coefficients();
    let mut acc = 0.0;
    for c in coef.iter().rev() {
        acc = acc * t2 + c;
    }
    theta - theta * theta.ln() + acc * t2 * theta
}

/// Milnor's Lobachevsky function `L(x) = -int_0^x log|2 sin t| dt`.
pub fn lobachevsky(x: f64) -> f64 {
    if !x.is_finite() {
        return f64::NAN;
    }
    let r = x - PI * (x / PI).round();
    let r = r.clamp(-FRAC_PI_2, FRAC_PI_2);
    if r < 0.0 {
        -0.5 * clausen_small(-2.0 * r)
    } else {
        0.5 * clausen_small(2.0 * r)
    }
}

/// Angles of a triangle, `angles[s]` opposite side `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleAngles {
    pub angles: [f64; 3],
    /// Index of the side that violates the triangle inequality.
    pub broken: Option<usize>,
}

impl TriangleAngles {
    fn broken_at(s: usize) -> Self {
        let mut angles = [0.0; 3];
        angles[s] = PI;
        TriangleAngles { angles, broken: Some(s) }
    }

    pub fn is_broken(&self) -> bool {
        self.broken.is_some()
    }
}

fn check_sides(a: f64, b: f64, c: f64) -> Result<[f64; 3], KernelError> {
    let s = [a, b, c];
    if s.iter().all(|x| *x > 0.0 && x.is_finite()) {
        Ok(s)
    } else {
        Err(KernelError::NonPositiveLength(a, b, c))
    }
}

fn longest(s: &[f64; 3]) -> usize {
    let mut m = 0;
    for i in 1..3 {
        if s[i] > s[m] {
            m = i;
        }
    }
    m
}

/// Euclidean angles by the half-angle formula; broken triangles get `pi`
/// opposite the side that is too long.
pub fn euclidean_angles(a: f64, b: f64, c: f64) -> Result<TriangleAngles, KernelError> {
    let s = check_sides(a, b, c)?;
    let m = longest(&s);
    let (p, q) = ((m + 1) % 3, (m + 2) % 3);
    if s[m] >= s[p] + s[q] {
        return Ok(TriangleAngles::broken_at(m));
    }
    let perim = a + b + c;
    let half = |i: usize| {
        let x = -s[i] + s[(i + 1) % 3] + s[(i + 2) % 3];
        let y = s[i] - s[(i + 1) % 3] + s[(i + 2) % 3];
        let z = s[i] + s[(i + 1) % 3] - s[(i + 2) % 3];
        2.0 * ((y * z) / (x * perim)).sqrt().atan()
    };
    let mut angles = [0.0; 3];
    angles[p] = half(p);
    angles[q] = half(q);
    angles[m] = PI - angles[p] - angles[q];
    Ok(TriangleAngles { angles, broken: None })
}

fn ln_sinh(t: f64) -> f64 {
    if t > 20.0 {
        t - std::f64::consts::LN_2 + (-(-2.0 * t).exp()).ln_1p()
    } else {
        t.sinh().ln()
    }
}

/// `asinh(e^h)` without overflow.
pub(crate) fn asinh_exp(h: f64) -> f64 {
    if h > 0.0 {
        h + (1.0 + (1.0 + (-2.0 * h).exp()).sqrt()).ln()
    } else {
        h.exp().asinh()
    }
}

/// Hyperbolic angles by the sinh half-angle formula; broken triangles get
/// `(0, 0, pi)`.
pub fn hyperbolic_angles(a: f64, b: f64, c: f64) -> Result<TriangleAngles, KernelError> {
    let s = check_sides(a, b, c)?;
    let m = longest(&s);
    if s[m] >= s[(m + 1) % 3] + s[(m + 2) % 3] {
        return Ok(TriangleAngles::broken_at(m));
    }
    let lsp = ln_sinh(0.5 * (a + b + c));
    let mut angles = [0.0; 3];
    for i in 0..3 {
        let (si, sj, sk) = (s[i], s[(i + 1) % 3], s[(i + 2) % 3]);
        let num = ln_sinh(0.5 * (si - sj + sk)) + ln_sinh(0.5 * (si + sj - sk));
        let den = ln_sinh(0.5 * (-si + sj + sk)) + lsp;
        angles[i] = 2.0 * (0.5 * (num - den)).exp().atan();
    }
    Ok(TriangleAngles { angles, broken: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleDerivatives {
    pub gradient: [f64; 3],
    pub hessian: [[f64; 3]; 3],
    /// `cot` of the three angles (zero for broken triangles).
    pub cot: [f64; 3],
    pub angles: TriangleAngles,
}

/// Hessian `cot_a (dy-dz)^2 + cot_b (dz-dx)^2 + cot_c (dx-dy)^2`.
fn cotan_form(cot: [f64; 3]) -> [[f64; 3]; 3] {
    let mut h = [[0.0; 3]; 3];
    for s in 0..3 {
        let (i, j) = ((s + 1) % 3, (s + 2) % 3);
        h[i][i] += cot[s];
        h[j][j] += cot[s];
        h[i][j] -= cot[s];
        h[j][i] -= cot[s];
    }
    h
}

/// `e^x` normalized by the largest entry, kept away from underflow.
fn exp_sides(x: [f64; 3]) -> [f64; 3] {
    let m = x[0].max(x[1]).max(x[2]);
    x.map(|t| (t - m).max(-700.0).exp())
}

/// `f(x, y, z) = a x + b y + c z + L(a) + L(b) + L(c)` for the triangle with
/// sides `(e^x, e^y, e^z)` and angles `(a, b, c)`.
pub fn f_value_grad_hess(x: f64, y: f64, z: f64) -> (f64, TriangleDerivatives) {
    let [sx, sy, sz] = exp_sides([x, y, z]);
    let ang = euclidean_angles(sx, sy, sz)
        .expect("exponentials are positive");
    let [a, b, c] = ang.angles;
    let value = a * x + b * y + c * z + lobachevsky(a) + lobachevsky(b) + lobachevsky(c);
    let cot = if ang.is_broken() {
        [0.0; 3]
    } else {
        ang.angles.map(|t| 1.0 / t.tan())
    };
    let hessian = if ang.is_broken() { [[0.0; 3]; 3] } else { cotan_form(cot) };
    (value, TriangleDerivatives { gradient: [a, b, c], hessian, cot, angles: ang })
}

/// Per-face term of the euclidean energy in terms of `lambda~`:
/// value `2 f(lambda~/2)`, gradient the angles, Hessian `H_f / 2`.
pub fn euclidean_face(lt: [f64; 3]) -> (f64, TriangleDerivatives) {
    let (v, mut d) = f_value_grad_hess(0.5 * lt[0], 0.5 * lt[1], 0.5 * lt[2]);
    for row in d.hessian.iter_mut() {
        for h in row.iter_mut() {
            *h *= 0.5;
        }
    }
    (2.0 * v, d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrismData {
    /// `2 V_h`.
    pub value: f64,
    /// Triangle angles at vertices 1, 2, 3.
    pub vertex_angles: [f64; 3],
    /// Angles at edges 12, 23, 31.
    pub edge_angles: [f64; 3],
    /// Finite edge lengths for 12, 23, 31.
    pub lengths: [f64; 3],
    pub broken: bool,
}

/// Data of the hyperbolic prism with parameters `(lambda12, lambda23,
/// lambda31, lambda1, lambda2, lambda3)`.
pub fn prism_data(l12: f64, l23: f64, l31: f64, l1: f64, l2: f64, l3: f64) -> PrismData {
    let lt = [l12 - l1 - l2, l23 - l2 - l3, l31 - l3 - l1];
    let lengths = lt.map(|x| 2.0 * asinh_exp(0.5 * x));
    // sides opposite vertices 1, 2, 3 are 23, 31, 12
    let ang = hyperbolic_angles(lengths[1], lengths[2], lengths[0]).expect("asinh of positive");
    let va = ang.angles;
    // edge 12 has opposite vertex 3, edge 23 vertex 1, edge 31 vertex 2
    let edge_angles = [
        0.5 * (PI - va[0] - va[1] + va[2]),
        0.5 * (PI - va[1] - va[2] + va[0]),
        0.5 * (PI - va[2] - va[0] + va[1]),
    ];
    let lam_v = [l1, l2, l3];
    let lam_e = [l12, l23, l31];
    let mut value = 0.0;
    for i in 0..3 {
        value += va[i] * lam_v[i] + edge_angles[i] * lam_e[i];
        value += lobachevsky(va[i]) + lobachevsky(edge_angles[i]);
    }
    value += lobachevsky(0.5 * (PI - va[0] - va[1] - va[2]));
    PrismData { value, vertex_angles: va, edge_angles, lengths, broken: ang.is_broken() }
}

/// Per-face term of the hyperbolic energy in `lambda~` (slot `s` is the edge
/// opposite corner `s`): value `2 V_h(lambda~, 0)`, gradient the prism edge
/// angles, and its Hessian.
pub fn hyperbolic_face(lt: [f64; 3]) -> (f64, TriangleDerivatives) {
    // slot order (0,1,2) = edges opposite corners; prism vertex i = corner i,
    // edge 12 = slot 2, edge 23 = slot 0, edge 31 = slot 1
    let p = prism_data(lt[2], lt[0], lt[1], 0.0, 0.0, 0.0);
    let va = p.vertex_angles;
    let grad = [p.edge_angles[1], p.edge_angles[2], p.edge_angles[0]];
    let len = [p.lengths[1], p.lengths[2], p.lengths[0]];
    let angles = TriangleAngles {
        angles: va,
        broken: if p.broken { Some(longest(&len)) } else { None },
    };
    if p.broken {
        return (p.value, TriangleDerivatives { gradient: grad, hessian: [[0.0; 3]; 3], cot: [0.0; 3], angles });
    }
    // d angle_m / d side_t
    let mut da = [[0.0; 3]; 3];
    let sinh = len.map(f64::sinh);
    for m in 0..3 {
        let (p1, p2) = ((m + 1) % 3, (m + 2) % 3);
        let d_own = sinh[m] / (sinh[p1] * sinh[p2] * va[m].sin());
        da[m][m] = d_own;
        // the angle at corner p2 is between sides m and p1
        da[m][p1] = -d_own * va[p2].cos();
        da[m][p2] = -d_own * va[p1].cos();
    }
    let dl = len.map(|l| (0.5 * l).tanh());
    let mut hessian = [[0.0; 3]; 3];
    for s in 0..3 {
        let (a, b) = ((s + 1) % 3, (s + 2) % 3);
        for t in 0..3 {
            hessian[s][t] = 0.5 * (da[s][t] - da[a][t] - da[b][t]) * dl[t];
        }
    }
    let cot = grad.map(|t| 1.0 / t.tan());
    (p.value, TriangleDerivatives { gradient: grad, hessian, cot, angles })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdealTetData {
    /// `V^ = 1/2 sum alpha lambda + V`.
    pub value: f64,
    /// Volume `L(a14) + L(a24) + L(a34)`.
    pub volume: f64,
    /// Dihedral angles at edges 12, 23, 31, 14, 24, 34.
    pub dihedral: [f64; 6],
    pub broken: bool,
}

/// Decorated ideal tetrahedron with Penner coordinates `lambda_ij`.
pub fn ideal_tet_vhat(l12: f64, l23: f64, l31: f64, l14: f64, l24: f64, l34: f64) -> IdealTetData {
    // horospheric triangle at 4: side c_ij opposite the corner on edge k4
    let x23 = 0.5 * (l23 - l24 - l34);
    let x31 = 0.5 * (l31 - l34 - l14);
    let x12 = 0.5 * (l12 - l14 - l24);
    let [s23, s31, s12] = exp_sides([x23, x31, x12]);
    let ang = euclidean_angles(s23, s31, s12).expect("exponentials are positive");
    let [a14, a24, a34] = ang.angles;
    let dihedral = [a34, a14, a24, a14, a24, a34];
    let lam = [l12, l23, l31, l14, l24, l34];
    let volume = lobachevsky(a14) + lobachevsky(a24) + lobachevsky(a34);
    let value = 0.5 * dihedral.iter().zip(&lam).map(|(a, l)| a * l).sum::<f64>() + volume;
    IdealTetData { value, volume, dihedral, broken: ang.is_broken() }
}
