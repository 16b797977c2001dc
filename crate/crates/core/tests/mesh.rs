mod common;

use common::*;
use dconf::mesh::*;
use proptest::prelude::*;

#[test]
fn triangulation_examples() {
    let t = Triangulation::new(&[[0, 1, 2]]).unwrap();
    assert_eq!(t.n_edges(), 3);
    assert!((0..3).all(|e| t.is_boundary_edge(e)));
    let t = Triangulation::new(&[[0, 1, 2], [0, 2, 3]]).unwrap();
    assert_eq!(t.n_edges(), 5);
    let e = t.edge_index(0, 2).unwrap();
    assert!(!t.is_boundary_edge(e));
    assert_eq!(t.interior_edges().collect::<Vec<_>>(), vec![e]);
    assert!(matches!(Triangulation::new(&[[0, 1, 2], [0, 1, 2]]), Err(MeshError::NonSimplicial { .. })));
    assert!(matches!(Triangulation::new(&[[0, 1, 1]]), Err(MeshError::NonSimplicial { .. })));
    assert!(matches!(Triangulation::new(&[[0, 1, 2], [0, 1, 3]]), Err(MeshError::NonOrientable(..))));
}

#[test]
fn topology_of_standard_meshes() {
    assert!(octahedron().tri().is_sphere());
    assert!(grid(4, 4, |_, _| true).tri().is_disk());
    let t = Triangulation::new(&torus()).unwrap();
    assert_eq!((t.euler_characteristic(), t.genus()), (0, 1));
    let t = Triangulation::new(&genus_two()).unwrap();
    assert_eq!((t.euler_characteristic(), t.genus()), (-2, 2));
    let (annulus, _) = hex_patch(3);
    let a = remove_faces(&annulus, |_, f| f.iter().all(|&v| annulus.positions[v][0].hypot(annulus.positions[v][1]) < 1.1));
    assert_eq!(a.tri().boundary_loops().len(), 2);
}

#[test]
fn cross_ratio_examples() {
    // unit square 0 1 2 3 with diagonal 0-2
    let t = Triangulation::new(&[[0, 1, 2], [0, 2, 3]]).unwrap();
    let pos = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
    let m = DiscreteMetric::from_positions(&t, &pos).unwrap();
    let d = t.edge_index(0, 2).unwrap();
    assert!((m.lengths()[d] - 2f64.sqrt()).abs() < 1e-15);
    let c = length_cross_ratios(&t, &m);
    assert!((c.lcr(d).unwrap() - 1.0).abs() < 1e-15);
    // l_il = 2, l = 1 elsewhere, with jil the face traversing j -> i
    let mut l = vec![1.0; 5];
    let [i, _] = t.edge(d);
    let right = t.edge_sides(d)[1].unwrap();
    let lv = t.face(right.face)[right.opposite];
    l[t.edge_index(i, lv).unwrap()] = 2.0;
    let m = DiscreteMetric::from_lengths(Geometry::Euclidean, l).unwrap();
    let r = length_cross_ratios(&t, &m).lcr(d).unwrap();
    assert!((r - 2.0).abs() < 1e-15);
}

fn jittered_lattice(seed: u64) -> Mesh {
    let mut r = rng(seed);
    let mut mesh = tri_lattice(6, 5);
    let t = mesh.tri();
    jitter(&mut mesh, &t, 0.2, &mut r);
    mesh
}

#[test]
fn equivalence_examples() {
    let mesh = jittered_lattice(1);
    let t = mesh.tri();
    let m = mesh.metric();
    let eq = verify_conformal_equivalence(&t, &m, &m, 1e-12).unwrap();
    assert!(eq.equivalent);
    assert!(eq.u.unwrap().iter().all(|&u| u.abs() < 1e-15));
    let mut u = vec![0.0; t.n_vertices()];
    u[0] = 1.0;
    u[1] = -1.0;
    let m2 = m.rescaled(&t, &u).unwrap();
    let eq = verify_conformal_equivalence(&t, &m, &m2, 1e-12).unwrap();
    assert!(eq.equivalent);
    assert!(max_diff(&eq.u.unwrap(), &u) < 1e-12);
    let mut l = m2.lengths().to_vec();
    l[t.interior_edges().next().unwrap()] *= 1.01;
    let m3 = DiscreteMetric::from_lengths(Geometry::Euclidean, l).unwrap();
    let eq = verify_conformal_equivalence(&t, &m, &m3, 1e-12).unwrap();
    assert!(!eq.equivalent && eq.u.is_none());
    assert!(eq.max_lcr_difference > 1e-3);
}

#[test]
fn reconstruction_from_cross_ratios() {
    let flat = tri_lattice(5, 5);
    let t = flat.tri();
    let ones = ConformalClass::from_log_lcr((0..t.n_edges()).map(|e| (!t.is_boundary_edge(e)).then_some(0.0)).collect());
    let m = metric_from_lcr(&t, &ones).unwrap();
    assert!(length_cross_ratios(&t, &m).max_difference(&ones) < 1e-12);

    let mesh = jittered_lattice(2);
    let t2 = mesh.tri();
    let m = mesh.metric();
    let m2 = metric_from_lcr(&t2, &length_cross_ratios(&t2, &m)).unwrap();
    assert!(verify_conformal_equivalence(&t2, &m, &m2, 1e-10).unwrap().equivalent);

    // interior edge from an interior vertex to the boundary carrying lcr 2
    let mut z = ones.log_lcr().to_vec();
    let e = (0..t.n_edges())
        .find(|&e| {
            let [a, b] = t.edge(e);
            !t.is_boundary_edge(e) && (t.is_boundary_vertex(a) != t.is_boundary_vertex(b))
        })
        .unwrap();
    z[e] = Some(2f64.ln());
    let err = metric_from_lcr(&t, &ConformalClass::from_log_lcr(z)).unwrap_err();
    assert!(matches!(err, MeshError::ProductConditionViolated { .. }));
}

#[test]
fn mobius_examples() {
    let mesh = jittered_lattice(3);
    let t = mesh.tri();
    let m = mesh.metric();
    let id = mobius_image_metric(&t, &mesh.positions, &[]).unwrap();
    assert!(max_diff(id.lengths(), m.lengths()) < 1e-15);
    let scale = MobiusStep::Similarity {
        scale: 2.5,
        rotation: vec![vec![0.6, -0.8], vec![0.8, 0.6]],
        translation: vec![1.0, -3.0],
    };
    let s = mobius_image_metric(&t, &mesh.positions, &[scale]).unwrap();
    for (a, b) in s.lengths().iter().zip(m.lengths()) {
        assert!((a / b - 2.5).abs() < 1e-13);
    }
    assert!(length_cross_ratios(&t, &s).max_difference(&length_cross_ratios(&t, &m)) < 1e-12);
    let shift = MobiusStep::Similarity {
        scale: 1.0,
        rotation: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        translation: vec![-1.3, -1.1],
    };
    let inv = mobius_image_metric(&t, &mesh.positions, &[shift, MobiusStep::UnitInversion]).unwrap();
    assert!(length_cross_ratios(&t, &inv).max_difference(&length_cross_ratios(&t, &m)) < 1e-10);
    // a vertex at the inversion center
    let at_origin = mobius_image_metric(&t, &mesh.positions, &[MobiusStep::UnitInversion]);
    assert!(matches!(at_origin, Err(MeshError::VertexAtCenter(0))));
}

#[test]
fn invalid_lengths_are_rejected() {
    assert!(matches!(
        DiscreteMetric::from_lengths(Geometry::Euclidean, vec![1.0, 0.0, 1.0]),
        Err(MeshError::NonPositiveLength { edge: 1, .. })
    ));
    assert!(DiscreteMetric::from_lengths(Geometry::Hyperbolic, vec![1.0, f64::NAN]).is_err());
    // broken triangles load fine and are flagged
    let t = Triangulation::new(&[[0, 1, 2]]).unwrap();
    let m = DiscreteMetric::from_lengths(Geometry::Euclidean, vec![1.0, 1.0, 3.0]).unwrap();
    assert_eq!(m.broken_faces(&t), vec![0]);
}

proptest! {
    #[test]
    fn lambda_and_length_agree(l in 1e-6f64..50.0) {
        for g in [Geometry::Euclidean, Geometry::Hyperbolic] {
            let lam = lambda_of_length(g, l);
            prop_assert!((length_of_lambda(g, lam) / l - 1.0).abs() < 1e-12);
        }
        prop_assert!((lambda_of_length(Geometry::Hyperbolic, l) - 2.0 * (0.5 * l).sinh().ln()).abs() < 1e-12 * (1.0 + l));
    }

    #[test]
    fn rescaling_preserves_cross_ratios(seed in 0u64..500) {
        let mesh = jittered_lattice(seed);
        let t = mesh.tri();
        let m = mesh.metric();
        let mut r = rng(seed + 1000);
        let u = random_vec(&mut r, t.n_vertices(), -2.0, 2.0);
        let m2 = m.rescaled(&t, &u).unwrap();
        let c1 = length_cross_ratios(&t, &m);
        prop_assert!(c1.max_difference(&length_cross_ratios(&t, &m2)) < 1e-12);
        prop_assert!(c1.vertex_residuals(&t).iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn inversion_preserves_cross_ratios(seed in 0u64..200, cx in -3.0f64..8.0, cy in 2.0f64..6.0) {
        let mesh = jittered_lattice(seed);
        let t = mesh.tri();
        // center above the patch, away from every vertex
        let shift = MobiusStep::Similarity {
            scale: 1.0,
            rotation: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            translation: vec![-cx, -(cy + 4.0)],
        };
        let inv = mobius_image_metric(&t, &mesh.positions, &[shift, MobiusStep::UnitInversion]).unwrap();
        let d = length_cross_ratios(&t, &inv).max_difference(&length_cross_ratios(&t, &mesh.metric()));
        prop_assert!(d < 1e-10);
    }
}
