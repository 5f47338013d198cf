//! The unstable (horocyclic) flow of the two-dimensional models and its
//! quasi-invariant measures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leaf_measures::{backward_log_ratio, unstable_tail, CocycleValue, LeafKernel, Side};
use crate::potentials::Potential;
use crate::product_states::{
    assemble_global, square_in_chart, CoverSpec, GlobalState, ProductKind, ProductModel,
};
use crate::torusdyn::{torus_dist, wrap01, ModelSystem, TorusPoint};

pub const MAX_TIME: f64 = 1e7;
pub const DEFAULT_HORIZON: f64 = 1e4;
pub const DEFAULT_GRID: usize = 64;
/// Largest tolerated change between the last two horizons of the averaging route.
pub const CONVERGENCE_TV: f64 = 0.02;
/// Flow time between exact cocycle evaluations.
const NODE_STEP: f64 = 1.0 / 64.0;
/// Binning samples per node step.
const SUBSTEPS: usize = 8;
/// Backward iterates kept when streaming the cocycle.
const STREAM_TERMS: usize = 40;

#[derive(Debug, Clone)]
pub struct HoroFlow {
    pub system: ModelSystem,
    /// Unit unstable direction.
    pub direction: [f64; 2],
    /// `f ∘ Φ_t = Φ_{μ_u t} ∘ f`.
    pub stretch: f64,
}

impl HoroFlow {
    pub fn new(sys: &ModelSystem) -> Result<Self> {
        if sys.dim() != 2 {
            return Err(Error::InvalidSystem(
                "the horocyclic flow needs a 2-D system".into(),
            ));
        }
        Ok(Self {
            system: sys.clone(),
            direction: sys.v_u,
            stretch: sys.mu_u,
        })
    }

    #[inline]
    fn flow_base(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        [
            wrap01(x[0] + t * self.direction[0]),
            wrap01(x[1] + t * self.direction[1]),
        ]
    }

    pub fn flow(&self, x: &TorusPoint, t: f64) -> Result<TorusPoint> {
        if !(t.abs() <= MAX_TIME) {
            return Err(Error::Precondition(format!(
                "flow time {t} exceeds {MAX_TIME}"
            )));
        }
        let b = self.flow_base(x.base, t);
        Ok(TorusPoint::new2(b[0], b[1]))
    }

    /// Distance between `f(Φ_t x)` and `Φ_{μ_u t}(f x)`.
    pub fn renormalization_defect(&self, x: &TorusPoint, t: f64) -> Result<f64> {
        let lhs = self.system.forward(&self.flow(x, t)?);
        let rhs = self.flow(&self.system.forward(x), self.stretch * t)?;
        Ok(torus_dist(&lhs, &rhs))
    }
}

/// `J_t(x) = Δ_x(Φ_t x)`.
pub fn jacobian_cocycle(
    hf: &HoroFlow,
    phi: &Potential,
    x: &TorusPoint,
    t: f64,
    n_trunc: usize,
) -> Result<CocycleValue> {
    if n_trunc == 0 {
        return Err(Error::Precondition("N_trunc must be ≥ 1".into()));
    }
    if !(t.abs() <= MAX_TIME) {
        return Err(Error::Precondition(format!(
            "flow time {t} exceeds {MAX_TIME}"
        )));
    }
    let sys = &hf.system;
    Ok(CocycleValue {
        value: backward_log_ratio(sys, phi, x.base, t, n_trunc).exp(),
        log_tail_bound: unstable_tail(sys, phi, t, n_trunc),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    LeafProduct,
    ReweightedAverage,
}

/// Starting measure of the averaging route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Seed {
    /// `side × side` regular lattice of equal atoms.
    Lebesgue { side: usize },
    /// Uniform atoms in a square of half-width `spread` around `center`.
    AtomCloud {
        center: [f64; 2],
        count: usize,
        spread: f64,
        rng_seed: u64,
    },
}

impl Seed {
    pub fn atoms(&self) -> Vec<[f64; 2]> {
        match self {
            Seed::Lebesgue { side } => (0..side * side)
                .map(|i| {
                    let (a, b) = (i % side, i / side);
                    [
                        (a as f64 + 0.5) / *side as f64,
                        (b as f64 + 0.5) / *side as f64,
                    ]
                })
                .collect(),
            Seed::AtomCloud {
                center,
                count,
                spread,
                rng_seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*rng_seed);
                (0..*count)
                    .map(|_| {
                        [
                            wrap01(center[0] + rng.gen_range(-*spread..=*spread)),
                            wrap01(center[1] + rng.gen_range(-*spread..=*spread)),
                        ]
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateParams {
    pub grid: usize,
    /// Leaf resolution of the leaf-product route.
    pub k: u32,
    pub horizon: f64,
    pub seed: Seed,
}

impl Default for CandidateParams {
    fn default() -> Self {
        Self {
            grid: DEFAULT_GRID,
            k: 16,
            horizon: DEFAULT_HORIZON,
            seed: Seed::Lebesgue { side: 4 },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConformalCandidate {
    pub grid: usize,
    /// Cell masses, row-major in `y`.
    pub grid_masses: Vec<f64>,
    pub jacobian_source: Potential,
    pub construction_route: Route,
    /// `(T, TV change from the previous horizon)` for the averaging route.
    pub convergence: Vec<(f64, f64)>,
    #[serde(skip)]
    state: Option<GlobalState>,
}

impl ConformalCandidate {
    /// Wraps bare grid masses, e.g. for residual checks of arbitrary grids.
    pub fn from_grid(grid: usize, masses: Vec<f64>, phi: &Potential, route: Route) -> Result<Self> {
        if masses.len() != grid * grid || masses.iter().any(|m| !(*m >= 0.0)) {
            return Err(Error::Precondition(
                "grid masses must be nonnegative, grid × grid".into(),
            ));
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Precondition("grid masses sum to zero".into()));
        }
        Ok(Self {
            grid,
            grid_masses: masses.into_iter().map(|m| m / total).collect(),
            jacobian_source: phi.clone(),
            construction_route: route,
            convergence: Vec::new(),
            state: None,
        })
    }

    /// Wraps an assembled leaf-product state.
    pub fn from_state(state: GlobalState, phi: &Potential) -> Self {
        Self {
            grid: state.cover.boxes * state.cover.cells,
            grid_masses: state.grid_masses(),
            jacobian_source: phi.clone(),
            construction_route: Route::LeafProduct,
            convergence: Vec::new(),
            state: Some(state),
        }
    }

    pub fn state(&self) -> Option<&GlobalState> {
        self.state.as_ref()
    }
}

pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn build_conformal_candidate(
    hf: &HoroFlow,
    phi: &Potential,
    route: Route,
    params: &CandidateParams,
) -> Result<ConformalCandidate> {
    if params.grid == 0 {
        return Err(Error::Config("grid must be positive".into()));
    }
    match route {
        Route::LeafProduct => {
            let model =
                ProductModel::new(&hf.system, phi, ProductKind::LeafProduct, params.k, 1e-12)?;
            let cover = if params.grid % 4 == 0 {
                CoverSpec {
                    boxes: params.grid / 4,
                    cells: 4,
                    ..CoverSpec::default()
                }
            } else {
                CoverSpec {
                    boxes: params.grid,
                    cells: 1,
                    ..CoverSpec::default()
                }
            };
            Ok(ConformalCandidate::from_state(
                assemble_global(model.shared(), cover)?,
                phi,
            ))
        }
        Route::ReweightedAverage => {
            reweighted_average(hf, phi, &params.seed, params.horizon, params.grid)
        }
    }
}

/// Histograms of the Δ-weighted orbit segment `Φ_{[−T_m, T_m]} x`, one per
/// horizon `T_m` of `marks` (increasing), each normalized to mass 1.
fn segment_histograms(
    hf: &HoroFlow,
    kernel: &LeafKernel,
    x: [f64; 2],
    marks: &[f64],
    grid: usize,
) -> Vec<Vec<f64>> {
    let horizon = *marks.last().unwrap();
    let mut hist = vec![vec![0.0; grid * grid]; marks.len()];
    let constant = kernel.psi.constant_value().is_some();
    let v = hf.direction;
    let g = grid as f64;
    let nodes = (horizon / NODE_STEP).ceil() as usize;
    let dt = NODE_STEP / SUBSTEPS as f64;
    let mut base = Vec::with_capacity(STREAM_TERMS);
    let mut p = x;
    for k in 0..STREAM_TERMS {
        if k > 0 {
            p = kernel.backward(p);
        }
        base.push(p);
    }
    let scales: Vec<f64> = (0..STREAM_TERMS)
        .map(|k| kernel.expansion.powi(-(k as i32)))
        .collect();
    let eval = |s: f64| -> Vec<f64> {
        base.iter()
            .zip(&scales)
            .map(|(p, &c)| {
                kernel
                    .psi
                    .eval_base([p[0] + s * c * v[0], p[1] + s * c * v[1]])
            })
            .collect()
    };
    for dir in [1.0, -1.0] {
        let mut cur = if constant { Vec::new() } else { eval(0.0) };
        let mut log_j = 0.0;
        for n in 0..nodes {
            let s1 = dir * ((n + 1) as f64 * NODE_STEP);
            let (next, log_next) = if constant {
                (Vec::new(), 0.0)
            } else {
                let next = eval(s1);
                let inc: f64 = next.iter().zip(&cur).map(|(a, b)| a - b).sum();
                (next, log_j + inc)
            };
            for j in 0..SUBSTEPS {
                let frac = (j as f64 + 0.5) / SUBSTEPS as f64;
                let s = dir * (n as f64 + frac) * NODE_STEP;
                let level = marks.partition_point(|&m| m < s.abs());
                if level >= marks.len() {
                    break;
                }
                let y = [wrap01(x[0] + s * v[0]), wrap01(x[1] + s * v[1])];
                let i = ((y[0] * g) as usize).min(grid - 1);
                let jj = ((y[1] * g) as usize).min(grid - 1);
                let w = (log_j + frac * (log_next - log_j)).exp() * dt;
                hist[level][jj * grid + i] += w;
            }
            cur = next;
            log_j = log_next;
        }
    }
    for m in 1..marks.len() {
        let (lo, hi) = hist.split_at_mut(m);
        for (h, l) in hi[0].iter_mut().zip(&lo[m - 1]) {
            *h += l;
        }
    }
    for h in &mut hist {
        let s: f64 = h.iter().sum();
        h.iter_mut().for_each(|x| *x /= s);
    }
    hist
}

/// Averages Δ-weighted orbit segments of the seed atoms over `[−T, T]`.
pub fn reweighted_average(
    hf: &HoroFlow,
    phi: &Potential,
    seed: &Seed,
    horizon: f64,
    grid: usize,
) -> Result<ConformalCandidate> {
    if !(horizon > 0.0 && horizon <= MAX_TIME) || grid == 0 {
        return Err(Error::Config(format!(
            "bad horizon {horizon} or grid {grid}"
        )));
    }
    let atoms = seed.atoms();
    if atoms.is_empty() {
        return Err(Error::Config("seed measure has no atoms".into()));
    }
    let kernel = LeafKernel::new(&hf.system, phi, Side::Unstable);
    let marks = [0.25 * horizon, 0.5 * horizon, horizon];
    let parts: Vec<Vec<Vec<f64>>> = atoms
        .par_iter()
        .map(|&x| segment_histograms(hf, &kernel, x, &marks, grid))
        .collect();
    let mut sums = vec![vec![0.0; grid * grid]; marks.len()];
    for part in &parts {
        for (x, y) in sums.iter_mut().zip(part) {
            x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
        }
    }
    let n = atoms.len() as f64;
    let levels: Vec<Vec<f64>> = sums
        .into_iter()
        .map(|h| h.into_iter().map(|x| x / n).collect())
        .collect();
    let convergence: Vec<(f64, f64)> = (1..marks.len())
        .map(|m| (marks[m], tv_distance(&levels[m - 1], &levels[m])))
        .collect();
    let last = convergence.last().unwrap().1;
    if last >= CONVERGENCE_TV {
        return Err(Error::NonConvergence {
            iterations: marks.len(),
            residual: last,
        });
    }
    Ok(ConformalCandidate {
        grid,
        grid_masses: levels.into_iter().last().unwrap(),
        jacobian_source: phi.clone(),
        construction_route: Route::ReweightedAverage,
        convergence,
        state: None,
    })
}

/// Every `stride`-th grid square in each direction, offset to avoid the
/// coordinate axes.
fn test_cells(grid: usize, stride: usize) -> Vec<(usize, usize)> {
    let stride = stride.max(1);
    let mut out = Vec::new();
    for j in (stride / 2..grid).step_by(stride) {
        for i in (stride / 2..grid).step_by(stride) {
            out.push((i, j));
        }
    }
    out
}

/// `max |μ(Φ_t A) − ∫_A J_t dμ| / μ(A)` over test squares `A` and `t`.
///
/// Candidates carrying an assembled state are evaluated through their charts;
/// bare grids are treated as cellwise uniform.
pub fn conformality_residual(
    cand: &ConformalCandidate,
    hf: &HoroFlow,
    phi: &Potential,
    t_values: &[f64],
    stride: usize,
) -> Result<f64> {
    let sys = &hf.system;
    let g = cand.grid;
    let h = 1.0 / g as f64;
    let n = sys.series_order;
    let cells = test_cells(g, stride);
    let jobs: Vec<(usize, usize, f64)> = cells
        .iter()
        .flat_map(|&(i, j)| t_values.iter().map(move |&t| (i, j, t)))
        .collect();
    let res = jobs
        .par_iter()
        .map(|&(i, j, t)| {
            let own = cand.grid_masses[j * g + i];
            if own <= 0.0 {
                return Ok(0.0);
            }
            let (x0, y0) = (i as f64 * h, j as f64 * h);
            let (moved, weighted) = match &cand.state {
                Some(state) => {
                    let mid = [x0 + 0.5 * h, y0 + 0.5 * h];
                    let poly = square_in_chart(sys, mid, x0, y0, h);
                    let shifted = hf.flow_base(mid, t);
                    let moved = state.region_mass(shifted, &poly)?;
                    let weighted = state.weighted_region_mass(mid, &poly, |a, b| {
                        let y = [
                            mid[0] + a * sys.v_u[0] + b * sys.v_s[0],
                            mid[1] + a * sys.v_u[1] + b * sys.v_s[1],
                        ];
                        backward_log_ratio(sys, phi, y, t, n)
                    })?;
                    (moved, weighted)
                }
                None => grid_conformality(cand, hf, phi, i, j, t),
            };
            Ok((moved - weighted).abs() / own)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(res.into_iter().fold(0.0, f64::max))
}

fn grid_conformality(
    cand: &ConformalCandidate,
    hf: &HoroFlow,
    phi: &Potential,
    i: usize,
    j: usize,
    t: f64,
) -> (f64, f64) {
    let g = cand.grid;
    let h = 1.0 / g as f64;
    let sys = &hf.system;
    let (x0, y0) = (
        i as f64 * h + t * hf.direction[0],
        j as f64 * h + t * hf.direction[1],
    );
    let (fx, fy) = ((x0 / h).floor(), (y0 / h).floor());
    let (ox, oy) = ((x0 / h) - fx, (y0 / h) - fy);
    let mut moved = 0.0;
    for (di, wx) in [(0i64, 1.0 - ox), (1, ox)] {
        for (dj, wy) in [(0i64, 1.0 - oy), (1, oy)] {
            let ci = (fx as i64 + di).rem_euclid(g as i64) as usize;
            let cj = (fy as i64 + dj).rem_euclid(g as i64) as usize;
            moved += wx * wy * cand.grid_masses[cj * g + ci];
        }
    }
    let q = 4;
    let mut mean = 0.0;
    for a in 0..q {
        for b in 0..q {
            let y = [
                (i as f64 + (a as f64 + 0.5) / q as f64) * h,
                (j as f64 + (b as f64 + 0.5) / q as f64) * h,
            ];
            mean += backward_log_ratio(sys, phi, y, t, sys.series_order).exp();
        }
    }
    (moved, cand.grid_masses[j * g + i] * mean / (q * q) as f64)
}

/// The five trig test functions `cos 2π(k·x)`.
pub const TEST_MODES: [[i64; 2]; 5] = [[1, 0], [0, 1], [1, 1], [2, -1], [3, 2]];

/// Orbit average of `cos 2π(k·y)` over `Φ_{[−T, T]} x` by midpoint sampling.
pub fn orbit_average(hf: &HoroFlow, x: [f64; 2], k: [i64; 2], horizon: f64) -> f64 {
    let dt = NODE_STEP / SUBSTEPS as f64;
    let n = (horizon / dt).ceil() as usize;
    let dt = horizon / n as f64;
    let v = hf.direction;
    let mut s = 0.0;
    for i in 0..2 * n {
        let t = -horizon + (i as f64 + 0.5) * dt;
        let y = [x[0] + t * v[0], x[1] + t * v[1]];
        s += (std::f64::consts::TAU * (k[0] as f64 * y[0] + k[1] as f64 * y[1])).cos();
    }
    s / (2 * n) as f64
}

/// Sup over the test functions of `|orbit average − space average|`.
pub fn equidistribution_error(hf: &HoroFlow, x: [f64; 2], horizon: f64) -> f64 {
    TEST_MODES
        .par_iter()
        .map(|&k| orbit_average(hf, x, k, horizon).abs())
        .reduce(|| 0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub gap: f64,
    /// `(i, j, TV)` for each pair of seeds.
    pub pairs: Vec<(usize, usize, f64)>,
    /// Present for constant potentials, where the flow preserves Lebesgue.
    pub equidistribution: Option<f64>,
}

pub fn uniqueness_gap(
    hf: &HoroFlow,
    phi: &Potential,
    seeds: &[Seed],
    horizon: f64,
    grid: usize,
) -> Result<UniquenessReport> {
    if seeds.len() < 2 {
        return Err(Error::Precondition(
            "need at least two seed measures".into(),
        ));
    }
    let cands = seeds
        .iter()
        .map(|s| reweighted_average(hf, phi, s, horizon, grid))
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    for i in 0..cands.len() {
        for j in i + 1..cands.len() {
            pairs.push((
                i,
                j,
                tv_distance(&cands[i].grid_masses, &cands[j].grid_masses),
            ));
        }
    }
    let gap = pairs.iter().map(|p| p.2).fold(0.0, f64::max);
    let equidistribution = phi
        .constant_value()
        .map(|_| equidistribution_error(hf, seeds[0].atoms()[0], horizon));
    Ok(UniquenessReport {
        gap,
        pairs,
        equidistribution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn hf() -> HoroFlow {
        HoroFlow::new(&ModelSystem::cat_map()).unwrap()
    }

    #[test]
    fn flow_group_law_and_renormalization() {
        let hf = hf();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = TorusPoint::new2(rng.gen(), rng.gen());
            let t: f64 = rng.gen_range(-50.0..50.0);
            assert_eq!(hf.flow(&x, 0.0).unwrap(), x);
            let back = hf.flow(&hf.flow(&x, t).unwrap(), -t).unwrap();
            assert!(torus_dist(&back, &x) < 1e-12);
            assert!(hf.renormalization_defect(&x, 0.37).unwrap() < 1e-10);
        }
        assert!(hf.flow(&TorusPoint::new2(0.1, 0.1), 2e7).is_err());
        assert!(HoroFlow::new(&ModelSystem::default_skew()).is_err());
    }

    #[test]
    fn cocycle_law() {
        let hf = hf();
        let phi = Potential::cos_x1(0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x = TorusPoint::new2(rng.gen(), rng.gen());
            assert_eq!(jacobian_cocycle(&hf, &phi, &x, 0.0, 60).unwrap().value, 1.0);
            assert_eq!(
                jacobian_cocycle(&hf, &Potential::constant(0.7), &x, 0.4, 60)
                    .unwrap()
                    .value,
                1.0
            );
            let (t, s) = (0.25, 0.25);
            let lhs = jacobian_cocycle(&hf, &phi, &x, t + s, 60).unwrap();
            let a = jacobian_cocycle(&hf, &phi, &hf.flow(&x, s).unwrap(), t, 60).unwrap();
            let b = jacobian_cocycle(&hf, &phi, &x, s, 60).unwrap();
            assert!((lhs.value - a.value * b.value).abs() < 1e-6);
        }
    }

    #[test]
    fn orbit_average_matches_closed_form() {
        let hf = hf();
        let x = [0.3, 0.7];
        let v = hf.direction;
        for k in TEST_MODES {
            let kv = std::f64::consts::TAU * (k[0] as f64 * v[0] + k[1] as f64 * v[1]);
            let kx = std::f64::consts::TAU * (k[0] as f64 * x[0] + k[1] as f64 * x[1]);
            let t = 50.0;
            let exact = kx.cos() * (kv * t).sin() / (kv * t);
            assert!((orbit_average(&hf, x, k, t) - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn grid_residual_accepts_lebesgue_and_rejects_noise() {
        let hf = hf();
        let phi = Potential::zero();
        let g = 16;
        let leb =
            ConformalCandidate::from_grid(g, vec![1.0; g * g], &phi, Route::ReweightedAverage)
                .unwrap();
        assert!(conformality_residual(&leb, &hf, &phi, &[0.1, 0.3], 1).unwrap() < 1e-10);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let noise: Vec<f64> = (0..g * g).map(|_| rng.gen()).collect();
        let bad = ConformalCandidate::from_grid(g, noise, &phi, Route::ReweightedAverage).unwrap();
        assert!(conformality_residual(&bad, &hf, &phi, &[0.1, 0.3], 1).unwrap() > 0.1);
    }

    #[test]
    fn averaging_is_lebesgue_for_zero_potential() {
        let hf = hf();
        let c = reweighted_average(
            &hf,
            &Potential::zero(),
            &Seed::Lebesgue { side: 2 },
            2000.0,
            16,
        )
        .unwrap();
        let u = vec![1.0 / 256.0; 256];
        assert!(tv_distance(&c.grid_masses, &u) < 0.02);
    }
}
