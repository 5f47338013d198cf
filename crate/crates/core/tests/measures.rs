use eqlab::geometry::rect;
use eqlab::io::task_rng;
use eqlab::julienne::{julienne_measure, JulienneSpec};
use eqlab::leaf_measures::solve_leaf_state;
use eqlab::potentials::Potential;
use eqlab::pressure::metric_pressure;
use eqlab::product_states::{
    assemble_global, CoverSpec, GlobalState, ProductChart, ProductKind, ProductModel,
};
use eqlab::torusdyn::{leaf_segment, LeafType, ModelSystem, TorusPoint};
use rand::Rng;

fn state(sys: &ModelSystem, phi: &Potential, k: u32) -> GlobalState {
    let m = ProductModel::new(sys, phi, ProductKind::Equilibrium, k, 1e-12).unwrap();
    assemble_global(m.shared(), CoverSpec::default()).unwrap()
}

#[test]
fn linear_zero_potential_is_exactly_invariant() {
    let sys = ModelSystem::cat_map();
    let st = state(&sys, &Potential::zero(), 12);
    let r = st.invariance_residual().unwrap();
    assert!(r < 1e-12, "{r}");
}

#[test]
fn nested_charts_give_the_same_masses() {
    let sys = ModelSystem::cat_map();
    let model = ProductModel::new(
        &sys,
        &Potential::cos_x1(0.2),
        ProductKind::Equilibrium,
        14,
        1e-12,
    )
    .unwrap();
    let c = [0.3, 0.4];
    let (da, db) = (0.03, -0.02);
    let d = sys.from_eigen(da, db);
    let outer_c = [c[0] + d[0], c[1] + d[1]];
    let inner = ProductChart::centered(&model, c, 0.05, 0.05).unwrap();
    let outer = ProductChart::centered(&model, outer_c, 0.15, 0.15).unwrap();
    let mut worst = 0.0f64;
    for (x0, y0, h) in [
        (-0.03, -0.03, 0.06),
        (0.0, 0.01, 0.02),
        (-0.04, -0.01, 0.005),
    ] {
        let here = inner
            .integrate_polygon(&rect(x0, x0 + h, y0, y0 + h))
            .unwrap();
        let there = outer
            .integrate_polygon(&rect(x0 - da, x0 - da + h, y0 - db, y0 - db + h))
            .unwrap();
        worst = worst.max((here / there - 1.0).abs());
    }
    // measured 3.4e-4
    assert!(worst < 1e-3, "{worst}");
}

/// Points drawn cellwise-uniformly from the grid masses of a state.
fn sample(st: &GlobalState, count: usize, label: &str) -> Vec<TorusPoint> {
    let g = st.grid();
    let masses = st.grid_masses();
    let mut cdf = Vec::with_capacity(masses.len());
    let mut acc = 0.0;
    for m in &masses {
        acc += m;
        cdf.push(acc);
    }
    let mut rng = task_rng(11, label);
    (0..count)
        .map(|_| {
            let u: f64 = rng.gen::<f64>() * acc;
            let idx = cdf.partition_point(|&c| c < u).min(masses.len() - 1);
            let (i, j) = (idx % g, idx / g);
            TorusPoint::new2(
                (i as f64 + rng.gen::<f64>()) / g as f64,
                (j as f64 + rng.gen::<f64>()) / g as f64,
            )
        })
        .collect()
}

#[test]
fn equilibrium_samples_attain_the_pressure() {
    let sys = ModelSystem::cat_map();
    let window = leaf_segment(&sys, &TorusPoint::new2(0.0, 0.0), LeafType::U, 0.5).unwrap();
    for (name, phi) in [
        ("zero", Potential::zero()),
        ("trig", Potential::cos_x1(0.2)),
    ] {
        let st = state(&sys, &phi, 12);
        let pts = sample(&st, 200_000, name);
        let centres: Vec<TorusPoint> = pts.iter().step_by(4001).copied().collect();
        let m = metric_pressure(&sys, &phi, &pts, &centres, 0.1, &[2, 3, 4, 5]).unwrap();
        let p = solve_leaf_state(&sys, &phi, &window, 12, 1e-11)
            .unwrap()
            .p_estimate;
        assert!((m - p).abs() < 0.05, "{name}: metric {m} leaf {p}");
    }
}

#[test]
fn skew_julienne_mass_is_base_mass_times_fiber() {
    let base = ModelSystem::cat_map();
    let skew = ModelSystem::default_skew();
    let bs = state(&base, &Potential::zero(), 12);
    let ss = state(&skew, &Potential::zero(), 12);
    for n in 0..6 {
        let mb =
            julienne_measure(&bs, &JulienneSpec::new(TorusPoint::new2(0.37, 0.61), n)).unwrap();
        let ms = julienne_measure(
            &ss,
            &JulienneSpec::new(TorusPoint::new3(0.37, 0.61, 0.2), n),
        )
        .unwrap();
        let fiber = (2.0 * 0.5f64.powi(n as i32)).min(1.0);
        assert!((ms / (mb * fiber) - 1.0).abs() < 1e-12);
    }
}
