//! Mesh generators and numerical oracles shared by the integration tests.
#![allow(dead_code)]

use dconf::mesh::{DiscreteMetric, Geometry, Triangulation};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub struct Mesh {
    pub faces: Vec<[usize; 3]>,
    pub positions: Vec<Vec<f64>>,
}

impl Mesh {
    pub fn tri(&self) -> Triangulation {
        Triangulation::with_vertex_count(self.positions.len(), &self.faces).unwrap()
    }

    pub fn metric(&self) -> DiscreteMetric {
        DiscreteMetric::from_positions(&self.tri(), &self.positions).unwrap()
    }
}

/// `cols x rows` vertex grid with each cell split along a diagonal chosen by
/// `diag(i, j)` (true: `00-11`).
pub fn grid(cols: usize, rows: usize, mut diag: impl FnMut(usize, usize) -> bool) -> Mesh {
    let id = |i: usize, j: usize| j * cols + i;
    let mut faces = Vec::new();
    for j in 0..rows - 1 {
        for i in 0..cols - 1 {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if diag(i, j) {
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            } else {
                faces.push([a, b, d]);
                faces.push([b, c, d]);
            }
        }
    }
    let positions = (0..rows)
        .flat_map(|j| (0..cols).map(move |i| vec![i as f64, j as f64]))
        .collect();
    Mesh { faces, positions }
}

/// Patch of the equilateral triangular lattice.
pub fn tri_lattice(cols: usize, rows: usize) -> Mesh {
    let mut m = grid(cols, rows, |_, _| false);
    for (k, p) in m.positions.iter_mut().enumerate() {
        let (i, j) = ((k % cols) as f64, (k / cols) as f64);
        *p = vec![i + 0.5 * j, j * 3f64.sqrt() / 2.0];
    }
    m
}

pub fn jitter(m: &mut Mesh, tri: &Triangulation, amount: f64, rng: &mut StdRng) {
    for v in 0..m.positions.len() {
        if !tri.is_boundary_vertex(v) {
            for x in m.positions[v].iter_mut() {
                *x += rng.random_range(-amount..amount);
            }
        }
    }
}

pub fn tetrahedron() -> Mesh {
    let s = 1.0 / 3f64.sqrt();
    Mesh {
        faces: vec![[0, 1, 2], [0, 2, 3], [0, 3, 1], [1, 3, 2]],
        positions: vec![
            vec![s, s, s],
            vec![s, -s, -s],
            vec![-s, s, -s],
            vec![-s, -s, s],
        ],
    }
}

pub fn octahedron() -> Mesh {
    Mesh {
        faces: vec![
            [0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
            [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5],
        ],
        positions: vec![
            vec![1.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, -1.0],
        ],
    }
}

/// Minimal triangulation of the genus 2 surface (10 vertices, 24 faces).
pub fn genus_two() -> Vec<[usize; 3]> {
    vec![
        [0, 3, 2], [1, 2, 4], [2, 3, 5], [2, 5, 4], [3, 4, 6], [3, 6, 5],
        [4, 5, 0], [4, 0, 6], [5, 6, 1], [5, 1, 0], [6, 0, 2], [6, 2, 1],
        [0, 1, 7], [7, 1, 3], [7, 3, 8], [1, 8, 9], [1, 9, 3], [8, 3, 0],
        [8, 0, 9], [9, 0, 7], [1, 4, 8], [8, 4, 7], [3, 9, 4], [7, 4, 9],
    ]
}

/// Seven-vertex torus.
pub fn torus() -> Vec<[usize; 3]> {
    let mut f = Vec::new();
    for i in 0..7 {
        f.push([i, (i + 1) % 7, (i + 3) % 7]);
        f.push([i, (i + 3) % 7, (i + 2) % 7]);
    }
    f
}

fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Convex hull of random points on the unit sphere (brute force).
pub fn random_sphere(n: usize, rng: &mut StdRng) -> Mesh {
    let mut pts = Vec::with_capacity(n);
    while pts.len() < n {
        let p: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = dot(&p, &p).sqrt();
        if r > 0.2 && r < 1.0 {
            pts.push(p.iter().map(|x| x / r).collect::<Vec<f64>>());
        }
    }
    let mut faces = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let nrm = cross(&sub(&pts[j], &pts[i]), &sub(&pts[k], &pts[i]));
                let side: Vec<f64> = (0..n)
                    .filter(|&m| m != i && m != j && m != k)
                    .map(|m| dot(&nrm, &sub(&pts[m], &pts[i])))
                    .collect();
                if side.iter().all(|&s| s < 0.0) {
                    faces.push([i, j, k]);
                } else if side.iter().all(|&s| s > 0.0) {
                    faces.push([i, k, j]);
                }
            }
        }
    }
    Mesh { faces, positions: pts }
}

/// Drops faces and renumbers the remaining vertices.
pub fn remove_faces(m: &Mesh, drop: impl Fn(usize, &[usize; 3]) -> bool) -> Mesh {
    let kept: Vec<[usize; 3]> = m
        .faces
        .iter()
        .enumerate()
        .filter(|(i, f)| !drop(*i, f))
        .map(|(_, f)| *f)
        .collect();
    let mut map = vec![usize::MAX; m.positions.len()];
    let mut positions = Vec::new();
    for f in &kept {
        for &v in f {
            if map[v] == usize::MAX {
                map[v] = positions.len();
                positions.push(m.positions[v].clone());
            }
        }
    }
    let faces = kept.iter().map(|f| f.map(|v| map[v])).collect();
    Mesh { faces, positions }
}

/// Random patch with at most 50 faces.
pub fn random_patch(rng: &mut StdRng) -> Triangulation {
    let cols = rng.random_range(3..=6);
    let rows = rng.random_range(3..=6);
    let m = grid(cols, rows, |_, _| rng.random_range(0..2) == 0);
    m.tri()
}

pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let fp = f(&y);
            y[i] = x[i] - h;
            let fm = f(&y);
            y[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn random_vec(rng: &mut StdRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn euclidean_from_lambda(lambda: Vec<f64>) -> DiscreteMetric {
    DiscreteMetric::from_lambda(Geometry::Euclidean, lambda).unwrap()
}

/// Polar grid: optional center vertex plus `rings` rings of `sectors`
/// vertices, with the ring quads split along one diagonal.
pub fn polar_disk(rings: usize, sectors: usize, center: bool) -> Mesh {
    let mut positions = Vec::new();
    if center {
        positions.push(vec![0.0, 0.0]);
    }
    let off = usize::from(center);
    for r in 1..=rings {
        for s in 0..sectors {
            let t = 2.0 * std::f64::consts::PI * (s as f64 + 0.5 * r as f64) / sectors as f64;
            positions.push(vec![r as f64 * t.cos(), r as f64 * t.sin()]);
        }
    }
    let id = |r: usize, s: usize| off + (r - 1) * sectors + s % sectors;
    let mut faces = Vec::new();
    if center {
        for s in 0..sectors {
            faces.push([0, id(1, s), id(1, s + 1)]);
        }
    }
    for r in 1..rings {
        for s in 0..sectors {
            faces.push([id(r, s), id(r + 1, s), id(r + 1, s + 1)]);
            faces.push([id(r, s), id(r + 1, s + 1), id(r, s + 1)]);
        }
    }
    Mesh { faces, positions }
}

/// Hexagonal patch of the triangular lattice of radius `r`, with the
/// reflection across the x-axis as a vertex permutation.
pub fn hex_patch(r: i64) -> (Mesh, Vec<usize>) {
    let mut coords = Vec::new();
    for q in -r..=r {
        for s in -r..=r {
            if (q + s).abs() <= r {
                coords.push((q, s));
            }
        }
    }
    let index = |q: i64, s: i64| coords.iter().position(|&c| c == (q, s));
    let mut faces = Vec::new();
    for (q, s) in (-r - 1..=r).flat_map(|q| (-r - 1..=r).map(move |s| (q, s))) {
        if let (Some(a), Some(b), Some(c)) = (index(q, s), index(q + 1, s), index(q, s + 1)) {
            faces.push([a, b, c]);
        }
        if let (Some(a), Some(b), Some(c)) = (index(q + 1, s), index(q + 1, s + 1), index(q, s + 1)) {
            faces.push([a, b, c]);
        }
    }
    let positions = coords
        .iter()
        .map(|&(q, s)| vec![q as f64 + 0.5 * s as f64, s as f64 * 3f64.sqrt() / 2.0])
        .collect();
    let mirror = coords.iter().map(|&(q, s)| index(q + s, -s).unwrap()).collect();
    (Mesh { faces, positions }, mirror)
}

/// Tanh-sinh quadrature of `f` over `[a, b]` with step `2^-level`. Nodes are
/// placed by their distance to the nearer endpoint, so integrable endpoint
/// singularities are handled.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64, level: u32) -> f64 {
    let h = 0.5f64.powi(level as i32);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    let n = (6.0 / h) as i64;
    for k in -n..=n {
        let t = k as f64 * h;
        let s = std::f64::consts::FRAC_PI_2 * t.sinh();
        // distance from the nearer endpoint: (b - a) / (1 + e^{2|s|})
        let d = (b - a) / (1.0 + (2.0 * s.abs()).exp());
        if d <= 0.0 || !d.is_finite() {
            continue;
        }
        let x = if s < 0.0 { a + d } else { b - d };
        let w = half * h * std::f64::consts::FRAC_PI_2 * t.cosh() / s.cosh().powi(2);
        if w.is_finite() && w > 0.0 {
            sum += w * f(x);
        }
    }
    sum
}

/// `L(x) = -int_0^x log|2 sin t| dt` by quadrature, for `0 <= x <= pi`.
pub fn lobachevsky_quadrature(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    -tanh_sinh(|t| (2.0 * t.sin()).abs().ln(), 0.0, x, 7)
}
