use proptest::prelude::*;
use ricci_lab::flow::{check_rescaling_covariance, comparison_solution, integrate_flow, FlowControls};
use ricci_lab::geom::{compute_curvature, max_epsilon, pinching_margin, FrameMetric, HomogeneousModel};
use ricci_lab::rvol::{l_plus, flat_point, shoot_lplus_geodesic, BvpOptions, FlowBackground, ShootOptions};

fn named() -> impl Strategy<Value = HomogeneousModel<f64>> {
    prop_oneof![
        Just(HomogeneousModel::su2()),
        Just(HomogeneousModel::nil()),
        Just(HomogeneousModel::sol()),
        Just(HomogeneousModel::abelian()),
    ]
}

fn diag() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-1.5f64..1.5).prop_map(|l| l.map(f64::exp))
}

fn close(a: f64, b: f64, tol: f64, scale: f64) -> bool {
    (a - b).abs() <= tol * scale.max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn curvature_scales_inversely(model in named(), d in diag(), q in 0.05f64..20.0) {
        let g = FrameMetric::diagonal(d).unwrap();
        let a = compute_curvature(&model, &g);
        let b = compute_curvature(&model, &g.scaled(q).unwrap());
        let s = a.rc_norm.max(a.rm_norm);
        for i in 0..3 {
            prop_assert!(close(b.ricci_eigs[i] * q, a.ricci_eigs[i], 1e-12, s));
        }
        prop_assert!(close(b.rm_norm * q, a.rm_norm, 1e-12, s));
        prop_assert!(close(b.scalar * q, a.scalar, 1e-12, s));
    }

    #[test]
    fn curvature_follows_axis_permutations(model in named(), d in diag(), p in 0usize..6) {
        let perm = [[0, 1, 2], [1, 2, 0], [2, 0, 1], [0, 2, 1], [2, 1, 0], [1, 0, 2]][p];
        let g = FrameMetric::diagonal(d).unwrap();
        let a = compute_curvature(&model, &g);
        let b = compute_curvature(&model.permuted(perm), &g.permuted(perm));
        let s = a.rc_norm.max(1e-12);
        for i in 0..3 {
            prop_assert!(close(b.ricci_eigs[i], a.ricci_eigs[perm[i]], 1e-12, s));
        }
        prop_assert!(close(a.rm_norm, b.rm_norm, 1e-12, s));
    }

    #[test]
    fn max_epsilon_is_the_pinching_edge(d in prop::array::uniform3(-0.4f64..0.4)) {
        let rep = compute_curvature(&HomogeneousModel::su2(), &FrameMetric::diagonal(d.map(f64::exp)).unwrap());
        if let Some(e) = max_epsilon(&rep) {
            prop_assert!(e > 0.0 && e <= 1.0 / 3.0 + 1e-15);
            prop_assert!(pinching_margin(&rep, e).abs() <= 1e-12 * rep.scalar);
            prop_assert!(pinching_margin(&rep, 0.99 * e) > 0.0);
            prop_assert!(pinching_margin(&rep, 1.01 * e) < 0.0);
        }
    }

    #[test]
    fn comparison_solution_is_exact(sigma in 0.01f64..0.11, y0 in 1e-3f64..10.0, dt in 0.0f64..5.0) {
        let y = comparison_solution(sigma, 0.0, y0, dt);
        let lhs = y.powf(-1.0 / sigma);
        let rhs = y0.powf(-1.0 / sigma) + 2.0 / 3.0 * dt;
        prop_assert!(close(lhs, rhs, 1e-9, rhs));
    }

    #[test]
    fn flat_reduced_length_is_quadratic(v in prop::array::uniform3(-1.0f64..1.0), t in 0.05f64..2.0) {
        let bg = FlowBackground::flat(3);
        let path = shoot_lplus_geodesic(&v, t, &bg, &ShootOptions::default()).unwrap();
        let v2: f64 = v.iter().map(|x| x * x).sum();
        prop_assert!(close(path.length, 2.0 * t.sqrt() * v2, 1e-10, 1.0));
        // the endpoint of a straight ray sits at 2√t·V
        let x: Vec<f64> = v.iter().map(|c| 2.0 * t.sqrt() * c).collect();
        let sol = l_plus(&flat_point(&x), t, &bg, &BvpOptions::default()).unwrap();
        prop_assert!(close(sol.length, path.length, 1e-8, 1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn su2_flows_are_deterministic_and_covariant(d in prop::array::uniform3(-0.3f64..0.3), q in 0.2f64..5.0) {
        let g = FrameMetric::diagonal(d.map(f64::exp)).unwrap();
        let model = HomogeneousModel::su2();
        let a = integrate_flow(&model, &g, &FlowControls::default()).unwrap();
        let b = integrate_flow(&model, &g, &FlowControls::default()).unwrap();
        prop_assert_eq!(&a.times, &b.times);
        prop_assert_eq!(&a.metrics, &b.metrics);
        let t1 = a.t_last() * 0.3;
        let span = (a.t_last() * 0.5 - t1) * q;
        let samples: Vec<f64> = (1..=5).map(|k| span * k as f64 / 5.0).collect();
        prop_assert!(check_rescaling_covariance(&a, t1, q, &samples).unwrap() <= 1e-6);
        if max_epsilon(&a.reports[0]).is_some() {
            for w in a.reports.windows(2) {
                prop_assert!(w[1].scalar >= w[0].scalar - 1e-10 * w[0].scalar);
            }
        }
    }
}
