mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use common::*;
use dconf::energy::VertexCondition;
use dconf::mapping::*;
use dconf::mesh::{length_cross_ratios, verify_conformal_equivalence, DiscreteMetric, Geometry, Triangulation};
use dconf::solver::{SolveError, SolverConfig};
use rand::RngExt;

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

#[test]
fn square_layout_is_consistent() {
    let m = grid(2, 2, |_, _| true);
    let t = m.tri();
    let l = layout_euclidean(&t, &m.metric(), 0).unwrap();
    assert!(l.edge_drift(&t).iter().all(|&d| d <= 1e-12));
    let p = l.vertex_positions(&t);
    assert!((dist(p[0], p[3]) - 2f64.sqrt()).abs() < 1e-12);
    assert!(l.orientation.iter().all(|&s| s == 1.0));
}

#[test]
fn solved_disk_lays_out_isometrically() {
    let mut r = rng(5);
    let mut mesh = grid(11, 11, |i, j| (i + j) % 2 == 0);
    let t = mesh.tri();
    jitter(&mut mesh, &t, 0.25, &mut r);
    assert_eq!(t.n_faces(), 200);
    let m = mesh.metric();
    let mut boundary = BTreeMap::new();
    for v in t.boundary_vertices() {
        let th = m.angle_sums(&t)[v];
        boundary.insert(v, VertexCondition::AngleSum(th + r.random_range(-0.05..0.05)));
    }
    // restore Gauss-Bonnet
    let total: f64 = boundary.values().map(|c| if let VertexCondition::AngleSum(x) = c { *x } else { 0.0 }).sum();
    let n_int = t.n_vertices() - boundary.len();
    let excess = total + 2.0 * PI * n_int as f64 - PI * t.n_faces() as f64;
    let nb = boundary.len() as f64;
    for c in boundary.values_mut() {
        if let VertexCondition::AngleSum(x) = c {
            *x -= excess / nb;
        }
    }
    let f = flatten(&t, &m, &boundary, &cfg()).unwrap();
    assert!(f.layout.max_length_error(&t, &f.metric) <= 1e-8);
    assert!(f.layout.edge_drift(&t).iter().all(|&d| d <= 1e-6));
    let eq = verify_conformal_equivalence(&t, &m, &f.metric, 1e-8).unwrap();
    assert!(eq.equivalent);
}

#[test]
fn flat_disk_flattens_to_itself() {
    let mut r = rng(9);
    let mut mesh = grid(5, 4, |i, _| i % 2 == 0);
    let t = mesh.tri();
    jitter(&mut mesh, &t, 0.2, &mut r);
    let m = mesh.metric();
    let sums = m.angle_sums(&t);
    let boundary = t.boundary_vertices().map(|v| (v, VertexCondition::AngleSum(sums[v]))).collect();
    let f = flatten(&t, &m, &boundary, &cfg()).unwrap();
    let u0 = f.u[0];
    assert!(f.u.iter().all(|x| (x - u0).abs() < 1e-10));
    let p = f.layout.vertex_positions(&t);
    let s = u0.exp();
    for i in 0..p.len() {
        for j in 0..i {
            let orig = ((mesh.positions[i][0] - mesh.positions[j][0]).powi(2)
                + (mesh.positions[i][1] - mesh.positions[j][1]).powi(2))
            .sqrt();
            assert!((dist(p[i], p[j]) - s * orig).abs() < 1e-8);
        }
    }
}

#[test]
fn rectangle_map_has_right_corners() {
    let mut r = rng(21);
    let mut mesh = grid(9, 7, |i, j| (i * 7 + j * 3) % 5 < 2);
    let t = mesh.tri();
    jitter(&mut mesh, &t, 0.3, &mut r);
    let m = mesh.metric();
    let corners = [0, 8, 62, 54];
    let bc = rectangle_conditions(&t, corners).unwrap();
    let map = bc.vertices.iter().enumerate().filter(|(v, _)| t.is_boundary_vertex(*v)).map(|(v, c)| (v, *c)).collect();
    let f = flatten(&t, &m, &map, &cfg()).unwrap();
    let sums = f.metric.angle_sums(&t);
    for v in t.boundary_vertices() {
        let want = if corners.contains(&v) { PI / 2.0 } else { PI };
        assert!((sums[v] - want).abs() < 1e-8);
    }
    // each side of the developed boundary is straight
    let p = f.layout.vertex_positions(&t);
    let dir = |a: usize, b: usize| {
        let d = [p[b][0] - p[a][0], p[b][1] - p[a][1]];
        let n = d[0].hypot(d[1]);
        [d[0] / n, d[1] / n]
    };
    let side = dir(0, 8);
    for i in 0..8 {
        let d = dir(i, i + 1);
        assert!((d[0] * side[1] - d[1] * side[0]).abs() < 1e-8);
    }
    let up = dir(0, 54);
    assert!((side[0] * up[0] + side[1] * up[1]).abs() < 1e-8);
}

#[test]
fn gauss_bonnet_violation_is_rejected() {
    let mesh = grid(4, 4, |_, _| true);
    let t = mesh.tri();
    let boundary = [(0, VertexCondition::AngleSum(PI / 2.0)), (3, VertexCondition::AngleSum(PI / 2.0))].into();
    assert!(matches!(
        flatten(&t, &mesh.metric(), &boundary, &cfg()),
        Err(MappingError::Solve(SolveError::InfeasibleDetected(_)))
    ));
}

fn check_sphere(mesh: &Mesh, k: usize) -> SphereMap {
    let t = mesh.tri();
    let m = mesh.metric();
    let s = map_to_sphere(&t, &m, k, &cfg()).unwrap();
    for p in &s.polyhedron.positions {
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        assert!((n - 1.0).abs() <= 1e-10);
    }
    assert_eq!(s.polyhedron.positions[k], [0.0, 0.0, 1.0]);
    let out = s.polyhedron.chordal_metric(&t).unwrap();
    let d = length_cross_ratios(&t, &m).max_difference(&length_cross_ratios(&t, &out));
    assert!(d <= 1e-8, "lcr difference {d}");
    s
}

#[test]
fn octahedron_to_sphere() {
    let mut mesh = octahedron();
    // a non-regular octahedron
    mesh.positions[0] = vec![1.5, 0.2, 0.1];
    mesh.positions[4] = vec![0.1, -0.3, 0.7];
    for k in 0..6 {
        check_sphere(&mesh, k);
    }
    let s = check_sphere(&octahedron(), 4);
    // the regular octahedron comes back regular
    let c = s.polyhedron.chordal_metric(&octahedron().tri()).unwrap();
    let l0 = c.lengths()[0];
    assert!(c.lengths().iter().all(|l| (l - l0).abs() < 1e-8));
}

#[test]
fn tetrahedron_to_sphere_is_regular() {
    let mesh = tetrahedron();
    let s = check_sphere(&mesh, 2);
    let p = &s.polyhedron.positions;
    let d = |a: usize, b: usize| (0..3).map(|i| (p[a][i] - p[b][i]).powi(2)).sum::<f64>().sqrt();
    let d0 = d(0, 1);
    for a in 0..4 {
        for b in 0..a {
            assert!((d(a, b) - d0).abs() < 1e-9);
        }
    }
}

#[test]
fn random_convex_sphere() {
    let mut r = rng(100);
    let mesh = random_sphere(60, &mut r);
    check_sphere(&mesh, 0);
}

#[test]
fn sphere_rejects_other_topologies() {
    let t = Triangulation::new(&torus()).unwrap();
    let m = DiscreteMetric::from_lengths(Geometry::Euclidean, vec![1.0; t.n_edges()]).unwrap();
    assert!(matches!(map_to_sphere(&t, &m, 0, &cfg()), Err(MappingError::Topology(_))));
    let mesh = grid(3, 3, |_, _| true);
    assert!(matches!(map_to_sphere(&mesh.tri(), &mesh.metric(), 0, &cfg()), Err(MappingError::Topology(_))));
}

fn check_disk(t: &Triangulation, m: &DiscreteMetric, k: usize) -> DiskMap {
    let d = map_to_disk(t, m, k, &cfg()).unwrap();
    for v in t.boundary_vertices() {
        let p = d.positions[v];
        assert!((p[0].hypot(p[1]) - 1.0).abs() <= 1e-8);
    }
    assert!((d.positions[k][0] - 1.0).abs() < 1e-15);
    let sums = d.metric.angle_sums(t);
    for v in 0..t.n_vertices() {
        if !t.is_boundary_vertex(v) {
            assert!((sums[v] - 2.0 * PI).abs() <= 1e-8);
            let p = d.positions[v];
            assert!(p[0].hypot(p[1]) < 1.0);
        }
    }
    let eq = verify_conformal_equivalence(t, m, &d.metric, 1e-8).unwrap();
    assert!(eq.equivalent, "lcr difference {}", eq.max_lcr_difference);
    d
}

#[test]
fn coarse_disk_to_unit_disk() {
    let mut r = rng(2);
    let (mut mesh, _) = hex_patch(3);
    let t = mesh.tri();
    jitter(&mut mesh, &t, 0.12, &mut r);
    let m = mesh.metric();
    let k = t.boundary_vertices().next().unwrap();
    check_disk(&t, &m, k);
}

#[test]
fn disk_with_ear_is_rejected() {
    let mesh = grid(3, 3, |_, _| true);
    let t = mesh.tri();
    assert!(!t.ears().is_empty());
    assert!(matches!(map_to_disk(&t, &mesh.metric(), 1, &cfg()), Err(MappingError::EarDetected { .. })));
}

#[test]
fn symmetric_disk_stays_symmetric() {
    let (mut mesh, mirror) = hex_patch(3);
    let t = mesh.tri();
    let mut r = rng(8);
    for v in 0..mesh.positions.len() {
        let w = mirror[v];
        if t.is_boundary_vertex(v) || w < v {
            continue;
        }
        let (dx, dy) = (r.random_range(-0.15..0.15), r.random_range(-0.15..0.15));
        if w == v {
            mesh.positions[v][0] += dx;
        } else {
            mesh.positions[v][0] += dx;
            mesh.positions[v][1] += dy;
            mesh.positions[w][0] += dx;
            mesh.positions[w][1] -= dy;
        }
    }
    let m = mesh.metric();
    let k = (0..mesh.positions.len()).find(|&v| mesh.positions[v] == vec![3.0, 0.0]).unwrap();
    let d = check_disk(&t, &m, k);
    for v in 0..t.n_vertices() {
        let (p, q) = (d.positions[v], d.positions[mirror[v]]);
        assert!((p[0] - q[0]).abs() < 1e-8 && (p[1] + q[1]).abs() < 1e-8);
    }
}

#[test]
fn equilateral_circle_pattern_is_fixed_point() {
    let mesh = tri_lattice(5, 5);
    let t = mesh.tri();
    let phi: Vec<f64> = (0..t.n_edges()).map(|e| if t.is_boundary_edge(e) { PI / 3.0 } else { 2.0 * PI / 3.0 }).collect();
    let cp = solve_circle_pattern(&t, &phi, None, &cfg()).unwrap();
    let l0 = cp.metric.lengths()[0];
    assert!(cp.metric.lengths().iter().all(|l| (l / l0 - 1.0).abs() < 1e-8));
}

#[test]
fn circle_pattern_round_trip() {
    let mut r = rng(12);
    let mut mesh = tri_lattice(6, 5);
    let t = mesh.tri();
    jitter(&mut mesh, &t, 0.1, &mut r);
    let m = mesh.metric();
    let phi = intersection_angles(&t, &m);
    let theta = circle_pattern_theta(&t, &phi);
    let cp = solve_circle_pattern(&t, &phi, Some(&theta), &cfg()).unwrap();
    assert!(max_diff(&intersection_angles(&t, &cp.metric), &phi) <= 1e-8);
    // the pattern determines the shape up to scale
    let ratio = cp.metric.lengths()[0] / m.lengths()[0];
    assert!(cp.metric.lengths().iter().zip(m.lengths()).all(|(a, b)| (a / b / ratio - 1.0).abs() < 1e-7));
    let bad: Vec<f64> = theta.iter().map(|x| x + 0.1).collect();
    assert!(matches!(
        solve_circle_pattern(&t, &phi, Some(&bad), &cfg()),
        Err(MappingError::Solve(SolveError::InfeasibleDetected(_)))
    ));
}

#[test]
fn cocircular_pattern_is_flagged_or_solved() {
    // Phi = pi everywhere inside: every pair of neighbouring circumcircles coincides
    let mesh = polar_disk(1, 6, true);
    let t = mesh.tri();
    let phi: Vec<f64> = (0..t.n_edges()).map(|e| if t.is_boundary_edge(e) { PI / 3.0 } else { PI }).collect();
    match solve_circle_pattern(&t, &phi, None, &cfg()) {
        Ok(cp) => assert!(max_diff(&intersection_angles(&t, &cp.metric), &phi) <= 1e-8),
        Err(MappingError::Solve(SolveError::BrokenAtOptimum { .. } | SolveError::InfeasibleDetected(_))) => {}
        Err(e) => panic!("unexpected error {e}"),
    }
}

fn square_grid_surface(n: usize) -> (PolygonalSurface, usize) {
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut polygons = Vec::new();
    for j in 0..n {
        for i in 0..n {
            polygons.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let positions: Vec<Vec<f64>> = (0..=n).flat_map(|j| (0..=n).map(move |i| vec![i as f64, j as f64])).collect();
    (PolygonalSurface::from_positions(polygons, &positions), (n + 1) * (n + 1))
}

#[test]
fn unit_squares_get_square_diagonals() {
    let n = 3;
    let (surface, nv) = square_grid_surface(n);
    let corners = [0, n, nv - 1, nv - 1 - n];
    let conditions: Vec<VertexCondition> = (0..nv)
        .map(|v| {
            let (i, j) = (v % (n + 1), v / (n + 1));
            if corners.contains(&v) {
                VertexCondition::AngleSum(PI / 2.0)
            } else if i == 0 || j == 0 || i == n || j == n {
                VertexCondition::AngleSum(PI)
            } else {
                VertexCondition::AngleSum(2.0 * PI)
            }
        })
        .collect();
    let c = solve_circular_mesh(&surface, &conditions, &cfg()).unwrap();
    let scale = c.u[0].exp();
    for (e, &d) in c.diagonals.iter().enumerate() {
        if d {
            assert!((c.metric.lengths()[e] - 2f64.sqrt() * scale).abs() < 1e-8);
        }
    }
    assert!(c.u.iter().all(|x| (x - c.u[0]).abs() < 1e-8));
    // opposite angles across each diagonal sum to pi
    let phi = intersection_angles(&c.tri, &c.metric);
    for (e, &d) in c.diagonals.iter().enumerate() {
        if d {
            assert!((phi[e] - PI).abs() < 1e-8);
        }
    }
}

#[test]
fn irregular_circular_mesh_is_cocircular() {
    let mut r = rng(4);
    let n = 3;
    let (mut surface, nv) = square_grid_surface(n);
    for l in surface.lengths.values_mut() {
        *l *= r.random_range(0.8..1.2);
    }
    let conditions: Vec<VertexCondition> = (0..nv)
        .map(|v| {
            let (i, j) = (v % (n + 1), v / (n + 1));
            if i == 0 || j == 0 || i == n || j == n {
                VertexCondition::Scale(0.0)
            } else {
                VertexCondition::AngleSum(2.0 * PI)
            }
        })
        .collect();
    let c = solve_circular_mesh(&surface, &conditions, &cfg()).unwrap();
    let phi = intersection_angles(&c.tri, &c.metric);
    let sums = c.metric.angle_sums(&c.tri);
    for (e, &d) in c.diagonals.iter().enumerate() {
        if d {
            assert!((phi[e] - PI).abs() < 1e-8);
        }
    }
    for v in 0..nv {
        if let VertexCondition::AngleSum(th) = conditions[v] {
            assert!((sums[v] - th).abs() < 1e-8);
        }
    }
    // polygon edges scale by e^{(u_i + u_j)/2}
    for (&[a, b], &l) in &surface.lengths {
        let e = c.tri.edge_index(a, b).unwrap();
        assert!((c.metric.lengths()[e] - l * (0.5 * (c.u[a] + c.u[b])).exp()).abs() < 1e-12 * (1.0 + l));
    }
}

#[test]
fn triangular_polygons_reduce_to_scale_problem() {
    let (mesh, _) = hex_patch(2);
    let t = mesh.tri();
    let m = mesh.metric();
    let surface = PolygonalSurface::from_positions(mesh.faces.iter().map(|f| f.to_vec()).collect(), &mesh.positions);
    let mut conditions: Vec<VertexCondition> = vec![VertexCondition::AngleSum(2.0 * PI); t.n_vertices()];
    for v in t.boundary_vertices() {
        conditions[v] = VertexCondition::Scale(0.02 * v as f64);
    }
    let c = solve_circular_mesh(&surface, &conditions, &cfg()).unwrap();
    assert!(c.diagonals.iter().all(|&d| !d));
    let bc = dconf::energy::BoundaryConditions { vertices: conditions, phi: None, free_lambda: Vec::new() };
    let s = dconf::solver::solve_problem(&t, &m, &bc, &cfg()).unwrap();
    assert_eq!(c.u, s.u);
}

#[test]
fn polygonal_inequality_is_checked() {
    let surface = PolygonalSurface::from_positions(
        vec![vec![0, 1, 2, 3]],
        &[vec![0.0, 0.0], vec![10.0, 0.0], vec![10.0, 0.1], vec![0.0, 0.1]],
    );
    let mut bad = surface.clone();
    bad.lengths.insert([0, 1], 10.3);
    let conditions = vec![VertexCondition::Scale(0.0); 4];
    assert!(solve_circular_mesh(&surface, &conditions, &cfg()).is_ok());
    assert!(matches!(
        solve_circular_mesh(&bad, &conditions, &cfg()),
        Err(MappingError::PolygonalInequalityViolated { face: 0 })
    ));
}

fn check_circle_domain(mesh: &Mesh, holes: usize) -> CircleDomain {
    let t = mesh.tri();
    let m = mesh.metric();
    let d = map_to_circle_domain(&t, &m, None, &cfg()).unwrap();
    assert_eq!(d.loops.len(), holes + 1);
    for (i, lp) in d.loops.iter().enumerate() {
        let pts: Vec<[f64; 2]> = lp.iter().map(|&v| d.positions[v]).collect();
        assert!(cocircularity_residual(&pts) <= 1e-7, "loop {i}");
        if i == 0 {
            assert!(pts.iter().all(|p| (p[0].hypot(p[1]) - 1.0).abs() < 1e-8));
        } else {
            assert!(pts.iter().all(|p| p[0].hypot(p[1]) < 1.0));
        }
    }
    let eq = verify_conformal_equivalence(&t, &m, &d.metric, 1e-8).unwrap();
    assert!(eq.equivalent);
    d
}

#[test]
fn annulus_to_circle_domain() {
    let mut r = rng(31);
    let (full, _) = hex_patch(4);
    let mut mesh = remove_faces(&full, |_, f| f.iter().all(|&v| full.positions[v][0].hypot(full.positions[v][1]) < 1.1));
    let t = mesh.tri();
    jitter(&mut mesh, &t, 0.1, &mut r);
    check_circle_domain(&mesh, 1);
}

#[test]
fn two_holes_to_circle_domain() {
    let full = grid(8, 6, |i, j| (i < 4) == (j < 3));
    // cells (1,1)-(2,2) and (4,2)-(5,3)
    let hole = |f: &[usize; 3]| {
        let cell = |v: usize| (v % 8, v / 8);
        let inside = |(a, b): (usize, usize), x0: usize, y0: usize| a >= x0 && a <= x0 + 2 && b >= y0 && b <= y0 + 2;
        f.iter().all(|&v| inside(cell(v), 1, 1)) || f.iter().all(|&v| inside(cell(v), 4, 2))
    };
    let mut mesh = remove_faces(&full, |_, f| hole(f));
    let t = mesh.tri();
    assert_eq!(t.boundary_loops().len(), 3);
    let mut r = rng(32);
    jitter(&mut mesh, &t, 0.1, &mut r);
    check_circle_domain(&mesh, 2);
}

#[test]
fn circle_domain_without_holes_is_a_disk_map() {
    let (mesh, _) = hex_patch(3);
    let t = mesh.tri();
    let d = check_circle_domain(&mesh, 0);
    let k = d.loops[0][0];
    let disk = map_to_disk(&t, &mesh.metric(), k, &cfg()).unwrap();
    assert!(max_diff(&d.u, &disk.u) < 1e-8);
}

#[test]
fn genus_two_uniformization() {
    let t = Triangulation::new(&genus_two()).unwrap();
    assert_eq!((t.n_vertices(), t.n_faces()), (10, 24));
    let m = DiscreteMetric::from_lengths(Geometry::Euclidean, vec![1.0; t.n_edges()]).unwrap();
    let a = uniformize_hyperbolic(&t, &m, None, &cfg()).unwrap();
    for s in a.metric.angle_sums(&t) {
        assert!((s - 2.0 * PI).abs() <= 1e-8);
    }
    assert!((hyperbolic_area(&t, &a.metric) - 4.0 * PI).abs() <= 1e-6);
    assert!(a.layout.max_length_error(&t, &a.metric) < 1e-8);
    assert!(a.layout.holonomy.iter().any(|h| h.translation_length > 0.1));
    let mut r = rng(77);
    let start = random_vec(&mut r, t.n_vertices(), -0.5, 0.5);
    let b = uniformize_hyperbolic(&t, &m, Some(&start), &cfg()).unwrap();
    assert!(max_diff(&a.u, &b.u) <= 1e-8);
    let sec = DiscreteMetric::from_lengths(Geometry::Euclidean, a.metric.secant_lengths()).unwrap();
    assert!(verify_conformal_equivalence(&t, &m, &sec, 1e-8).unwrap().equivalent);
}

#[test]
fn torus_is_not_uniformized_hyperbolically() {
    let t = Triangulation::new(&torus()).unwrap();
    let m = DiscreteMetric::from_lengths(Geometry::Euclidean, vec![1.0; t.n_edges()]).unwrap();
    assert!(matches!(uniformize_hyperbolic(&t, &m, None, &cfg()), Err(MappingError::Topology(_))));
}

#[test]
fn similar_triangles_give_similarity() {
    let src = [[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]];
    let s: f64 = 2.5;
    let dst = src.map(|p| [s * p[0] + 1.0, s * p[1] - 2.0]);
    let u = [s.ln(); 3];
    let m = projective_interpolation(src, dst, u).unwrap();
    assert!(m.matrix[2][0].abs() < 1e-15 && m.matrix[2][1].abs() < 1e-15);
    for p in [[0.1, 0.1], [2.0, -1.0]] {
        let q = m.apply(p);
        assert!((q[0] - s * p[0] - 1.0).abs() < 1e-12 && (q[1] - s * p[1] + 2.0).abs() < 1e-12);
    }
}

fn random_triangle(r: &mut rand::rngs::StdRng) -> [[f64; 2]; 3] {
    loop {
        let t: [[f64; 2]; 3] = std::array::from_fn(|_| [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]);
        let a = (t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[1][1] - t[0][1]) * (t[2][0] - t[0][0]);
        if a.abs() > 0.1 {
            return t;
        }
    }
}

/// Lays out the triangle with sides `l01, l12, l20` from `p0` along `angle`.
fn place(l: [f64; 3], p0: [f64; 2], angle: f64, flip: bool) -> [[f64; 2]; 3] {
    let a0 = ((l[0] * l[0] + l[2] * l[2] - l[1] * l[1]) / (2.0 * l[0] * l[2])).acos();
    let s = if flip { -1.0 } else { 1.0 };
    [
        p0,
        [p0[0] + l[0] * angle.cos(), p0[1] + l[0] * angle.sin()],
        [p0[0] + l[2] * (angle + s * a0).cos(), p0[1] + l[2] * (angle + s * a0).sin()],
    ]
}

#[test]
fn circumcircle_is_preserved() {
    let mut r = rng(64);
    for _ in 0..50 {
        let src = random_triangle(&mut r);
        let u: [f64; 3] = std::array::from_fn(|_| r.random_range(-0.5..0.5));
        let l = [0, 1, 2].map(|i| {
            let j = (i + 1) % 3;
            dist(src[i], src[j]) * (0.5 * (u[i] + u[j])).exp()
        });
        if !(l[0] < l[1] + l[2] && l[1] < l[0] + l[2] && l[2] < l[0] + l[1]) {
            continue;
        }
        let orient = (src[1][0] - src[0][0]) * (src[2][1] - src[0][1]) - (src[1][1] - src[0][1]) * (src[2][0] - src[0][0]);
        let dst = place(l, [r.random_range(-1.0..1.0), 0.3], r.random_range(0.0..6.0), orient < 0.0);
        let m = projective_interpolation(src, dst, u).unwrap();
        for i in 0..3 {
            assert!(dist(m.apply(src[i]), dst[i]) < 1e-12);
        }
        let (c, rad) = circumcircle(src).unwrap();
        let (ct, radt) = circumcircle(dst).unwrap();
        for k in 0..64 {
            let t = 2.0 * PI * k as f64 / 64.0;
            let p = [c[0] + rad * t.cos(), c[1] + rad * t.sin()];
            let h = m.apply_homogeneous(p);
            if h[2].abs() < 1e-9 {
                continue;
            }
            let q = m.apply(p);
            assert!((dist(q, ct) - radt).abs() <= 1e-8 * radt.max(1.0));
        }
    }
}

#[test]
fn inconsistent_scale_factors_are_rejected() {
    let src = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    assert!(matches!(
        projective_interpolation(src, src, [0.1, 0.0, 0.0]),
        Err(MappingError::InconsistentU { .. })
    ));
    let flat = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
    assert!(matches!(projective_interpolation(flat, flat, [0.0; 3]), Err(MappingError::DegenerateFace)));
}

#[test]
fn piecewise_projective_map_is_continuous() {
    let mut r = rng(17);
    let mut mesh = grid(6, 6, |i, j| (i + j) % 2 == 1);
    let t = mesh.tri();
    jitter(&mut mesh, &t, 0.2, &mut r);
    let m = mesh.metric();
    let boundary = t
        .boundary_vertices()
        .map(|v| (v, VertexCondition::Scale(r.random_range(-0.3..0.3))))
        .collect();
    let f = flatten(&t, &m, &boundary, &cfg()).unwrap();
    let src: Vec<[f64; 2]> = mesh.positions.iter().map(|p| [p[0], p[1]]).collect();
    let dst = f.layout.vertex_positions(&t);
    // the layout may be a rigid motion of the source frame; any frame works
    let maps = projective_maps(&t, &src, &dst, &f.u).unwrap();
    assert!(max_edge_discrepancy(&t, &maps, &src, 16) <= 1e-9);
}
