use eqlab::leaf_measures::{delta_density, nu_measure, solve_leaf_state, LeafState};
use eqlab::potentials::Potential;
use eqlab::torusdyn::{leaf_segment, LeafType, ModelSystem, TorusPoint};

fn potentials(sys: &ModelSystem) -> Vec<(&'static str, Potential)> {
    vec![
        ("zero", Potential::zero()),
        ("0.1", Potential::constant(0.1)),
        ("srb", Potential::srb(sys)),
        ("trig", Potential::cos_x1(0.2)),
    ]
}

fn solve(sys: &ModelSystem, phi: &Potential, at: TorusPoint, leaf: LeafType, k: u32) -> LeafState {
    let w = leaf_segment(sys, &at, leaf, 0.5).unwrap();
    solve_leaf_state(sys, phi, &w, k, 1e-11).unwrap()
}

#[test]
fn solved_densities_have_full_support() {
    let sys = ModelSystem::cat_map();
    for (name, phi) in potentials(&sys) {
        for leaf in [LeafType::U, LeafType::S] {
            let st = solve(&sys, &phi, TorusPoint::new2(0.0, 0.0), leaf, 12);
            let min = st
                .density
                .weights
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            assert!(min > 0.0, "{name} {}: min weight {min}", leaf.name());
        }
    }
}

#[test]
fn overlapping_windows_agree_on_blocks() {
    let sys = ModelSystem::cat_map();
    let phi = Potential::cos_x1(0.2);
    let shift = 0.25;
    let a = solve(&sys, &phi, TorusPoint::new2(0.0, 0.0), LeafType::U, 14);
    let b = solve(
        &sys,
        &phi,
        TorusPoint::new2(0.0, 0.0).shifted(sys.from_eigen(shift, 0.0), 0.0),
        LeafType::U,
        14,
    );
    // overlap is [−0.25, 0.5] in the first window's parameter
    let blocks = 24;
    let width = 0.75 / blocks as f64;
    let ratios: Vec<f64> = (0..blocks)
        .map(|i| {
            let lo = -0.25 + i as f64 * width;
            a.density.interval_mass(lo, lo + width)
                / b.density.interval_mass(lo - shift, lo - shift + width)
        })
        .collect();
    let mean = ratios.iter().sum::<f64>() / blocks as f64;
    let spread = ratios
        .iter()
        .map(|r| (r / mean - 1.0).abs())
        .fold(0.0, f64::max);
    // cellwise agreement is limited by partial-cell placement; blocks of many cells agree to 8.4e-5
    assert!(spread < 2e-4, "{spread}");
}

#[test]
fn nu_is_projective() {
    let sys = ModelSystem::cat_map();
    let phi = Potential::cos_x1(0.2);
    let st = solve(&sys, &phi, TorusPoint::new2(0.0, 0.0), LeafType::U, 12);
    let on_leaf = |t: f64| TorusPoint::new2(0.0, 0.0).shifted(sys.from_eigen(t, 0.0), 0.0);
    for (s, t) in [(0.1, -0.3), (-0.2, 0.25), (0.4, 0.05)] {
        let (x, xp) = (on_leaf(s), on_leaf(t));
        let nu_x = nu_measure(&sys, &phi, &st, &x).unwrap();
        let nu_xp = nu_measure(&sys, &phi, &st, &xp).unwrap();
        let d = delta_density(&sys, &phi, &xp, &x, sys.series_order).unwrap();
        let worst = nu_xp
            .weights
            .iter()
            .zip(&nu_x.weights)
            .map(|(p, q)| (p / (d.value * q) - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-12, "{worst}");
    }
}

#[test]
fn stable_states_are_unstable_states_of_the_inverse() {
    let sys = ModelSystem::cat_map();
    let rev = sys.reversed();
    for (name, phi) in potentials(&sys) {
        let s = solve(&sys, &phi, TorusPoint::new2(0.0, 0.0), LeafType::S, 12);
        let u = solve(&rev, &phi, TorusPoint::new2(0.0, 0.0), LeafType::U, 12);
        assert!(
            (s.p_estimate - u.p_estimate).abs() < 1e-8,
            "{name}: {} vs {}",
            s.p_estimate,
            u.p_estimate
        );
    }
}
