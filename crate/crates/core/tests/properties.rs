use kirchhoff_core::energy::energy_eval;
use kirchhoff_core::mesh::{
    build_rectangle_mesh, h1_seminorm, l2_inner, laplacian_apply, poisson_solve,
};
use kirchhoff_core::problem::{classify_exponents, energy_lower_bound, membership_m};
use kirchhoff_core::reduction::{solve_h_root, RootProblem};
use kirchhoff_core::solvers::{build_barrier, SolverConfig};
use kirchhoff_core::{
    build_mesh, DomainKind, DomainMesh, GridFunction, KirchhoffError, MeshConstants,
    ProblemParams, Regime,
};
use proptest::prelude::*;

fn mesh_for(kind: u8) -> DomainMesh {
    match kind % 3 {
        0 => build_mesh(DomainKind::Interval { length: 1.3 }, 21).unwrap(),
        1 => build_mesh(DomainKind::RadialBall { dim: 3, radius: 0.8 }, 17).unwrap(),
        _ => build_rectangle_mesh(1.0, 0.7, 9, 7).unwrap(),
    }
}

/// A mesh together with a nodal field drawn from `range`.
fn mesh_and_field(range: std::ops::Range<f64>) -> impl Strategy<Value = (DomainMesh, GridFunction)> {
    (0u8..3).prop_flat_map(move |k| {
        let m = mesh_for(k);
        let n = m.len();
        prop::collection::vec(range.clone(), n).prop_map(move |vals| {
            let u = GridFunction::from_values(&m, vals).unwrap();
            (m.clone(), u)
        })
    })
}

fn mesh_and_two_fields() -> impl Strategy<Value = (DomainMesh, GridFunction, GridFunction)> {
    (0u8..3).prop_flat_map(|k| {
        let m = mesh_for(k);
        let n = m.len();
        (
            prop::collection::vec(-1.0..1.0f64, n),
            prop::collection::vec(-1.0..1.0f64, n),
        )
            .prop_map(move |(a, b)| {
                let u = GridFunction::from_values(&m, a).unwrap();
                let v = GridFunction::from_values(&m, b).unwrap();
                (m.clone(), u, v)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_is_self_adjoint((m, u, v) in mesh_and_two_fields()) {
        let a = l2_inner(&m, &laplacian_apply(&m, &u).unwrap(), &v).unwrap();
        let b = l2_inner(&m, &u, &laplacian_apply(&m, &v).unwrap()).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs().max(b.abs())));
    }

    #[test]
    fn laplacian_is_positive((m, u) in mesh_and_field(-1.0..1.0)) {
        let q = l2_inner(&m, &laplacian_apply(&m, &u).unwrap(), &u).unwrap();
        let semi = h1_seminorm(&m, &u).unwrap();
        prop_assert!(q > 0.0);
        prop_assert!((q - semi * semi).abs() <= 1e-10 * q);
    }

    #[test]
    fn poisson_inverts_laplacian((m, g) in mesh_and_field(-5.0..5.0)) {
        let u = poisson_solve(&m, &g).unwrap();
        let back = laplacian_apply(&m, &u).unwrap();
        prop_assert!(back.sup_distance(&g) <= 1e-9 * (1.0 + g.max_abs()));
    }

    #[test]
    fn nonnegative_data_gives_nonnegative_solution((m, g) in mesh_and_field(0.0..3.0)) {
        let u = poisson_solve(&m, &g).unwrap();
        prop_assert!(u.min_value() >= -1e-12 * (1.0 + u.max_abs()));
    }

    #[test]
    fn seminorm_is_homogeneous((m, u) in mesh_and_field(-2.0..2.0), c in -10.0..10.0f64) {
        let a = h1_seminorm(&m, &u.scaled(c)).unwrap();
        let b = c.abs() * h1_seminorm(&m, &u).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b));
    }

    #[test]
    fn membership_is_scale_invariant((m, f) in mesh_and_field(-1.0..3.0), c in 0.01..100.0f64) {
        let a = membership_m(&m, &f).unwrap().is_member();
        let b = membership_m(&m, &f.scaled(c)).unwrap().is_member();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn energy_parts_are_nonnegative((m, u) in mesh_and_field(-2.0..2.0), lambda in 0.0..10.0f64) {
        let f = GridFunction::constant(&m, 1.0);
        let params = ProblemParams::new(&m, 0.5, 1.0, 2.0, lambda, f).unwrap();
        let e = energy_eval(&m, &params, &u).unwrap();
        prop_assert!(e.dirichlet >= 0.0 && e.nonlocal >= 0.0 && e.potential >= 0.0);
        prop_assert!(e.total.is_finite());
    }

    #[test]
    fn energy_lower_bound_holds((m, u) in mesh_and_field(-3.0..3.0), lambda in 0.0..5.0f64, b in 0.1..5.0f64) {
        let f = GridFunction::from_fn(&m, |x| 1.0 - x[0]);
        let params = ProblemParams::new(&m, b, 1.0, 2.0, lambda, f).unwrap();
        let constants = MeshConstants::compute(&m, 2.0).unwrap();
        let floor = energy_lower_bound(&m, &params, &constants).unwrap();
        let e = energy_eval(&m, &params, &u).unwrap().total;
        prop_assert!(e >= floor - 1e-10 * floor.abs(), "E = {} below {}", e, floor);
    }

    #[test]
    fn root_solves_and_is_monotone(b in 0.01..10.0f64, alpha in 0.1..3.0f64, c in 0.0..100.0f64, dc in 0.001..10.0f64) {
        let rp = RootProblem { b, alpha, c };
        let y = solve_h_root(rp);
        prop_assert!(y >= 0.0);
        prop_assert!(rp.h(y).abs() <= 1e-10 * c.max(1.0));
        let y2 = solve_h_root(RootProblem { b, alpha, c: c + dc });
        prop_assert!(y2 > y);
    }

    #[test]
    fn regime_follows_exponents(alpha in 0.05..1.9f64, p in 1.01..12.0f64, dim in prop::sample::select(vec![1usize, 2, 3])) {
        let critical = 2.0 * alpha + 1.0;
        let star = if dim >= 3 { (dim as f64 + 2.0) / (dim as f64 - 2.0) } else { f64::INFINITY };
        prop_assume!(alpha < (star - 1.0) / 2.0);
        prop_assume!((p - critical).abs() > 1e-9 && (p - star).abs() > 1e-9);
        let expected = if p < critical {
            Regime::A
        } else if p < star {
            Regime::B
        } else {
            Regime::C
        };
        prop_assert_eq!(classify_exponents(p, alpha, dim).unwrap(), expected);
    }

    #[test]
    fn boundary_exponent_is_refused(alpha in 0.05..1.9f64) {
        let refused = matches!(
            classify_exponents(2.0 * alpha + 1.0, alpha, 1),
            Err(KirchhoffError::BoundaryExponent(_))
        );
        prop_assert!(refused);
    }

    #[test]
    fn barrier_dominates(lambda in 0.0..0.05f64, p in 5.2..8.0f64) {
        let m = build_mesh(DomainKind::RadialBall { dim: 3, radius: 1.0 }, 33).unwrap();
        let f = GridFunction::constant(&m, 1.0);
        let params = ProblemParams::new(&m, 1.0, 0.5, p, lambda, f).unwrap();
        if let Ok(barrier) = build_barrier(&m, &params) {
            let sup = barrier.psi0.max_abs();
            prop_assert!(barrier.m0 >= sup.powf(p) + lambda);
        }
    }

    #[test]
    fn config_rejects_bad_damping(damping in prop_oneof![-1.0..=0.0f64, 1.0001..5.0f64]) {
        let cfg = SolverConfig { damping, ..Default::default() };
        prop_assert!(cfg.validate().is_err());
    }
}
