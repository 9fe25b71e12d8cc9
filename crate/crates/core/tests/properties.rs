use gradlat_core::lattice::*;
use gradlat_core::scaling::{continuum_variance, HomogenizedMatrix, TestFunction};
use gradlat_core::stable::StableDensity;
use proptest::prelude::*;

fn lattice() -> impl Strategy<Value = TorusLattice> {
    prop_oneof![(3usize..9).prop_map(|n| (1, n)), (3usize..6).prop_map(|n| (2, n)), Just((3, 3)), Just((3, 4))]
        .prop_map(|(d, n)| TorusLattice::new(d, n).unwrap())
}

fn operator_and_vectors() -> impl Strategy<Value = (EdgeWeightedOperator, Vec<f64>, Vec<f64>)> {
    (lattice(), 0.0f64..1.0).prop_flat_map(|(lat, mass)| {
        let w = prop::collection::vec(-3.0f64..3.0, lat.num_edges());
        let f = prop::collection::vec(-1.0f64..1.0, lat.num_vertices());
        let g = prop::collection::vec(-1.0f64..1.0, lat.num_vertices());
        (w, f, g).prop_map(move |(t, f, g)| (EdgeWeightedOperator::from_t(lat, &t, 1.0, mass).unwrap(), f, g))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weighted_operator_is_symmetric_and_positive((op, f, g) in operator_and_vectors()) {
        let n = f.len();
        let (mut df, mut dg) = (vec![0.0; n], vec![0.0; n]);
        op.apply(&f, &mut df);
        op.apply(&g, &mut dg);
        let a: f64 = g.iter().zip(&df).map(|(x, y)| x * y).sum();
        let b: f64 = f.iter().zip(&dg).map(|(x, y)| x * y).sum();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        let ff: f64 = f.iter().map(|x| x * x).sum();
        prop_assert!(op.quadratic_form(&f) >= op.mass() * ff - 1e-12);
    }

    #[test]
    fn solve_is_a_right_inverse((op, f, _g) in operator_and_vectors()) {
        let v = TestVector::projected(f);
        let sol = op.solve(&v, SolverOptions::with_tol(1e-12)).unwrap();
        let mut back = vec![0.0; v.len()];
        op.apply(&sol.values, &mut back);
        let norm: f64 = v.values.iter().map(|x| x * x).sum::<f64>().sqrt();
        let err: f64 = back.iter().zip(&v.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-8 * norm.max(1e-300));
    }

    #[test]
    fn green_form_dominated_by_flow_bound((op, f, _g) in operator_and_vectors()) {
        let v = TestVector::projected(f);
        let r = green_form_bound_check(&op, &v, 1e-8).unwrap();
        prop_assert!(r.pass, "lhs {} rhs {}", r.lhs, r.rhs);
    }

    #[test]
    fn spectral_and_cg_solvers_agree(lat in lattice(), w in 0.2f64..5.0, seed in 0u64..1000) {
        let vals: Vec<f64> = (0..lat.num_vertices()).map(|i| ((i as u64 * 2654435761 + seed) % 97) as f64 / 97.0).collect();
        let v = TestVector::projected(vals);
        let spec = SpectralLaplacian::new(lat).solve(&v.values, w, 0.0);
        let cg = EdgeWeightedOperator::uniform(lat, w, 0.0).unwrap().solve(&v, SolverOptions::with_tol(1e-13)).unwrap();
        for (a, b) in spec.iter().zip(&cg.values) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn chemical_distance_is_a_metric_below_graph_distance(
        (lat, t) in lattice().prop_flat_map(|lat| (Just(lat), prop::collection::vec(-4.0f64..4.0, lat.num_edges()))),
        a in 0usize..1000, b in 0usize..1000, c in 0usize..1000,
    ) {
        let n = lat.num_vertices();
        let (x, y, z) = (a % n, b % n, c % n);
        let omega: Vec<f64> = t.iter().map(|t| 2.0 * t.exp()).collect();
        let dx = chemical_distances(&lat, &omega, x);
        let dy = chemical_distances(&lat, &omega, y);
        prop_assert!((dx[y] - dy[x]).abs() < 1e-12);
        prop_assert!(dx[z] <= dx[y] + dy[z] + 1e-12);
        prop_assert!(dx[y] <= lat.graph_distance(x, y) as f64 + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn laplace_transform_identity(alpha in 0.15f64..=0.5, lambda in 0.1f64..10.0) {
        let sd = StableDensity::with_alpha(alpha).unwrap();
        let est = sd.laplace_transform(lambda).unwrap();
        let exact = (-lambda.powf(alpha)).exp();
        prop_assert!((est.value / exact - 1.0).abs() < 1e-6, "{} vs {}", est.value, exact);
    }

    #[test]
    fn continuum_variance_is_rotation_equivariant(
        theta in 0.0f64..6.28, phi in 0.0f64..6.28,
        h in prop::array::uniform3(-0.6f64..0.6), q0 in prop::array::uniform3(0.3f64..2.0),
    ) {
        prop_assume!(h.iter().map(|x| x * x).sum::<f64>() > 0.01);
        // rotation about z by theta then about x by phi
        let (c1, s1, c2, s2) = (theta.cos(), theta.sin(), phi.cos(), phi.sin());
        let rz = [c1, -s1, 0.0, s1, c1, 0.0, 0.0, 0.0, 1.0];
        let rx = [1.0, 0.0, 0.0, 0.0, c2, -s2, 0.0, s2, c2];
        let r = matmul(&rx, &rz);
        let q = [q0[0], 0.1, 0.0, 0.1, q0[1], 0.05, 0.0, 0.05, q0[2]];
        let rq = matmul(&matmul(&r, &q), &transpose(&r));
        let f = TestFunction::dipole(h.to_vec(), 0.3, 1.0);
        let a = continuum_variance(&f, &HomogenizedMatrix::from_entries(3, q.to_vec()).unwrap()).unwrap();
        let b = continuum_variance(&f.rotated(&r), &HomogenizedMatrix::from_entries(3, rq.to_vec()).unwrap()).unwrap();
        prop_assert!((a.value - b.value).abs() < 1e-6 * a.value, "{} vs {}", a.value, b.value);
    }
}

fn matmul(a: &[f64; 9], b: &[f64; 9]) -> [f64; 9] {
    let mut c = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            c[i * 3 + j] = (0..3).map(|k| a[i * 3 + k] * b[k * 3 + j]).sum();
        }
    }
    c
}

fn transpose(a: &[f64; 9]) -> [f64; 9] {
    let mut c = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            c[j * 3 + i] = a[i * 3 + j];
        }
    }
    c
}
