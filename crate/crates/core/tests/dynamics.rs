use eqlab::torusdyn::{
    leaf_segment, torus_dist, unstable_holonomy, LeafType, ModelSystem, TorusPoint,
};
use proptest::prelude::*;

fn systems() -> [ModelSystem; 2] {
    [ModelSystem::cat_map(), ModelSystem::default_skew()]
}

fn point(sys: &ModelSystem, x: f64, y: f64, th: f64) -> TorusPoint {
    if sys.dim() == 3 {
        TorusPoint::new3(x, y, th)
    } else {
        TorusPoint::new2(x, y)
    }
}

/// Largest center-direction Lipschitz constant of one application of the
/// cocycle along a unit displacement in the max metric.
fn center_lip(sys: &ModelSystem) -> f64 {
    sys.center_cocycle
        .as_ref()
        .map_or(0.0, |t| t.lipschitz_max_norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn f_maps_leaves_to_leaves(x in 0.0f64..1.0, y in 0.0f64..1.0, th in 0.0f64..1.0, t in -0.15f64..0.15) {
        for sys in systems() {
            let p = point(&sys, x, y, th);
            let fp = sys.forward(&p);
            let mut kinds = vec![(LeafType::U, sys.mu_u), (LeafType::S, sys.mu_s)];
            if sys.dim() == 3 {
                kinds.push((LeafType::C, 1.0));
            }
            for (kind, mu) in kinds {
                let here = leaf_segment(&sys, &p, kind, 0.5).unwrap();
                let there = leaf_segment(&sys, &fp, kind, 0.5).unwrap();
                let image = sys.forward(&here.point_at(&sys, &[t]));
                let target = there.point_at(&sys, &[mu * t]);
                let tol = sys.offset_tail_bound(t) + sys.offset_tail_bound(mu * t) + 1e-10;
                prop_assert!(torus_dist(&image, &target) <= tol, "{:?}: {}", kind, torus_dist(&image, &target));
            }
        }
    }

    #[test]
    fn stable_leaves_contract_forward_and_unstable_backward(
        x in 0.0f64..1.0, y in 0.0f64..1.0, th in 0.0f64..1.0, t in -0.3f64..0.3, n in 1usize..12
    ) {
        prop_assume!(t.abs() > 1e-6);
        for sys in systems() {
            let p = point(&sys, x, y, th);
            for (kind, step, v) in [(LeafType::S, 1i64, sys.v_s), (LeafType::U, -1i64, sys.v_u)] {
                let q = leaf_segment(&sys, &p, kind, 0.5).unwrap().point_at(&sys, &[t]);
                let d0 = torus_dist(&p, &q);
                let dn = torus_dist(&sys.apply(&p, step * n as i64), &sys.apply(&q, step * n as i64));
                let vmax = v[0].abs().max(v[1].abs());
                let c = 1.0 + center_lip(&sys) * sys.lambda / ((sys.lambda - 1.0) * vmax);
                // independent float orbits drift apart like λ^n · machine epsilon
                let roundoff = 1e-15 * sys.lambda.powi(n as i32);
                prop_assert!(dn <= c * sys.lambda.powi(-(n as i32)) * d0 + roundoff, "{:?} n={} {} {}", kind, n, dn, d0);
            }
        }
    }

    #[test]
    fn center_translations_are_isometric(x in 0.0f64..1.0, y in 0.0f64..1.0, th in 0.0f64..1.0, c in -0.4f64..0.4, n in 1i64..20) {
        let sys = ModelSystem::default_skew();
        let p = TorusPoint::new3(x, y, th);
        let q = p.shifted([0.0, 0.0], c);
        let d0 = torus_dist(&p, &q);
        let (fp, fq) = (sys.apply(&p, n), sys.apply(&q, n));
        prop_assert_eq!(fp.base, fq.base);
        prop_assert!((torus_dist(&fp, &fq) - d0).abs() < 1e-12);
    }

    #[test]
    fn unstable_holonomies_compose(
        x in 0.0f64..1.0, y in 0.0f64..1.0, th in 0.0f64..1.0,
        a in -0.2f64..0.2, b in -0.2f64..0.2, s in -0.2f64..0.2, dc in -0.3f64..0.3
    ) {
        for sys in systems() {
            let x0 = point(&sys, x, y, th);
            let y0 = leaf_segment(&sys, &x0, LeafType::U, 0.5).unwrap().point_at(&sys, &[a]);
            let z0 = leaf_segment(&sys, &y0, LeafType::U, 0.5).unwrap().point_at(&sys, &[b]);
            let w = x0.shifted(sys.from_eigen(0.0, s), if sys.dim() == 3 { dc } else { 0.0 });
            let direct = unstable_holonomy(&sys, &x0, &z0, &w).unwrap();
            let two_step = unstable_holonomy(&sys, &y0, &z0, &unstable_holonomy(&sys, &x0, &y0, &w).unwrap()).unwrap();
            prop_assert!(torus_dist(&direct, &two_step) < 1e-9, "{}", torus_dist(&direct, &two_step));
        }
    }
}
