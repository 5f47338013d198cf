//! Leaf measures on unstable and stable leaves.
//!
//! Both sides share one kernel. For a map `F` with expanding leaf direction
//! `v_e` (eigenvalue `e`), contracting direction `v_c` (eigenvalue `c`) and
//! weight `ψ`, the family satisfies
//!
//! ```text
//! μ_x(J) = e^{−P} ∫_{F J} e^{ψ} dμ_{F x}
//! μ_{p + b v_c}(d(p + b v_c)) = exp Σ_{k≥1} [ψ(F^k(p + b v_c)) − ψ(F^k p)] μ_p(dp)
//! ```
//!
//! The unstable side of `(f, φ)` uses `F = A`, `ψ = φ∘f⁻¹`; the stable side
//! uses `F = A⁻¹`, `ψ = φ`. The second line slides measures between parallel
//! leaves, which closes the first line on a single window: the image `F J`
//! of a window cell sits on the leaf of `F x`, and an integer translate of it
//! lies on a leaf parallel to the window.
//!
//! Displaced orbits are always evaluated as `F^k p + c^k b v_c` rather than by
//! iterating the displaced point, since independent floating-point orbits
//! separate at rate `λ^k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::torusdyn::{unstable_shift, wrap01, LeafSegment, LeafType, ModelSystem, TorusPoint};

/// Maximum power iterations.
pub const MAX_ITERATIONS: usize = 2000;
/// Lattice vectors considered when wrapping leaf pieces into a window.
const LATTICE_RADIUS: i64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Unstable,
    Stable,
}

impl Side {
    pub fn of(leaf_type: LeafType) -> Result<Self> {
        match leaf_type {
            LeafType::U | LeafType::Cu => Ok(Side::Unstable),
            LeafType::S | LeafType::Cs => Ok(Side::Stable),
            LeafType::C => Err(Error::Precondition(
                "leaf measures live on unstable or stable leaves".into(),
            )),
        }
    }
}

/// Shared data of the weighted pushforward on one side.
#[derive(Debug, Clone)]
pub struct LeafKernel {
    pub side: Side,
    pub map: [[i64; 2]; 2],
    pub inverse: [[i64; 2]; 2],
    pub v_e: [f64; 2],
    pub v_c: [f64; 2],
    pub dual_e: [f64; 2],
    pub dual_c: [f64; 2],
    pub expansion: f64,
    pub contraction: f64,
    pub lambda: f64,
    pub psi: Potential,
    pub n_trunc: usize,
    lattice: Vec<(f64, f64)>,
}

impl LeafKernel {
    pub fn new(sys: &ModelSystem, phi: &Potential, side: Side) -> Self {
        let (map, inverse, v_e, v_c, dual_e, dual_c, expansion, contraction, psi) = match side {
            Side::Unstable => (
                sys.base_matrix,
                sys.inverse_matrix,
                sys.v_u,
                sys.v_s,
                sys.dual_u,
                sys.dual_s,
                sys.mu_u,
                sys.mu_s,
                phi.compose_inverse(sys),
            ),
            Side::Stable => (
                sys.inverse_matrix,
                sys.base_matrix,
                sys.v_s,
                sys.v_u,
                sys.dual_s,
                sys.dual_u,
                1.0 / sys.mu_s,
                1.0 / sys.mu_u,
                phi.clone(),
            ),
        };
        let mut lattice = Vec::new();
        for i in -LATTICE_RADIUS..=LATTICE_RADIUS {
            for j in -LATTICE_RADIUS..=LATTICE_RADIUS {
                let z = [i as f64, j as f64];
                lattice.push((
                    dual_e[0] * z[0] + dual_e[1] * z[1],
                    dual_c[0] * z[0] + dual_c[1] * z[1],
                ));
            }
        }
        lattice.sort_by(|a, b| a.1.abs().total_cmp(&b.1.abs()));
        Self {
            side,
            map,
            inverse,
            v_e,
            v_c,
            dual_e,
            dual_c,
            expansion,
            contraction,
            lambda: expansion.abs(),
            psi,
            n_trunc: sys.series_order,
            lattice,
        }
    }

    pub fn with_truncation(mut self, n: usize) -> Self {
        self.n_trunc = n.max(1);
        self
    }

    #[inline]
    pub fn forward(&self, x: [f64; 2]) -> [f64; 2] {
        let y = ModelSystem::mat_vec(&self.map, x);
        [wrap01(y[0]), wrap01(y[1])]
    }

    #[inline]
    pub fn backward(&self, x: [f64; 2]) -> [f64; 2] {
        let y = ModelSystem::mat_vec(&self.inverse, x);
        [wrap01(y[0]), wrap01(y[1])]
    }

    #[inline]
    pub fn leaf_point(&self, x: [f64; 2], t: f64, b: f64) -> [f64; 2] {
        [
            x[0] + t * self.v_e[0] + b * self.v_c[0],
            x[1] + t * self.v_e[1] + b * self.v_c[1],
        ]
    }

    /// Log of the transverse Jacobian between the leaf of `p` and the
    /// parallel leaf through `p + b v_c`.
    pub fn log_transverse(&self, p: [f64; 2], b: f64) -> f64 {
        if b == 0.0 || self.psi.constant_value().is_some() {
            return 0.0;
        }
        let mut x = p;
        let mut scale = b;
        let mut s = 0.0;
        for _ in 0..self.n_trunc {
            x = self.forward(x);
            scale *= self.contraction;
            let y = [x[0] + scale * self.v_c[0], x[1] + scale * self.v_c[1]];
            s += self.psi.eval_base(y) - self.psi.eval_base(x);
        }
        s
    }

    /// Tail bound for `log_transverse` at displacement `b`.
    pub fn transverse_tail(&self, b: f64) -> f64 {
        let nc = self.v_c[0].abs().max(self.v_c[1].abs());
        self.psi.c_phi * b.abs() * nc * self.lambda.powf(-(self.n_trunc as f64))
            / (self.lambda - 1.0)
    }

    /// `log Δ` along the leaf of `x`: `Σ_{k≥0} [ψ(F^{−k}(x + t v_e)) − ψ(F^{−k}x)]`.
    pub fn log_delta(&self, x: [f64; 2], t: f64) -> f64 {
        if t == 0.0 || self.psi.constant_value().is_some() {
            return 0.0;
        }
        let mut p = x;
        let mut scale = t;
        let mut s = 0.0;
        for k in 0..self.n_trunc {
            if k > 0 {
                p = self.backward(p);
                scale /= self.expansion;
            }
            let y = [p[0] + scale * self.v_e[0], p[1] + scale * self.v_e[1]];
            s += self.psi.eval_base(y) - self.psi.eval_base(p);
        }
        s
    }

    /// Writes the leaf piece `q + [lo, hi] v_e` as `anchor + [lo+off, hi+off] v_e + b v_c`
    /// with the translated interval inside `window`. Returns `(off, b)`.
    pub fn place(
        &self,
        anchor: [f64; 2],
        q: [f64; 2],
        lo: f64,
        hi: f64,
        window: [f64; 2],
    ) -> Option<(f64, f64)> {
        let d = [q[0] - anchor[0], q[1] - anchor[1]];
        let de = self.dual_e[0] * d[0] + self.dual_e[1] * d[1];
        let dc = self.dual_c[0] * d[0] + self.dual_c[1] * d[1];
        let mut best: Option<(f64, f64)> = None;
        for &(alpha, beta) in &self.lattice {
            let off = de - alpha;
            if lo + off >= window[0] && hi + off <= window[1] {
                let b = dc - beta;
                if best.map_or(true, |(_, bb)| b.abs() < bb.abs()) {
                    best = Some((off, b));
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationTag {
    ProbabilityOnWindow,
    GlobalScale,
}

/// Cell-constant density against arc length on a leaf window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafDensity {
    pub segment: LeafSegment,
    pub resolution_k: u32,
    pub weights: Vec<f64>,
    pub normalization_tag: NormalizationTag,
}

impl LeafDensity {
    pub fn cells(&self) -> usize {
        self.weights.len()
    }

    pub fn window(&self) -> [f64; 2] {
        self.segment.interval()
    }

    pub fn cell_width(&self) -> f64 {
        self.segment.length() / self.cells() as f64
    }

    pub fn edge(&self, i: usize) -> f64 {
        self.window()[0] + i as f64 * self.cell_width()
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        self.window()[0] + (i as f64 + 0.5) * self.cell_width()
    }

    pub fn masses(&self) -> Vec<f64> {
        let w = self.cell_width();
        self.weights.iter().map(|d| d * w).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum::<f64>() * self.cell_width()
    }

    /// Mass of `[a, b]` under the piecewise-constant density.
    pub fn interval_mass(&self, a: f64, b: f64) -> f64 {
        let [lo, hi] = self.window();
        let (a, b) = (a.max(lo), b.min(hi));
        if b <= a {
            return 0.0;
        }
        let w = self.cell_width();
        let i0 = (((a - lo) / w).floor() as usize).min(self.cells() - 1);
        let i1 = (((b - lo) / w).floor() as usize).min(self.cells() - 1);
        (i0..=i1)
            .map(|i| {
                let e0 = self.edge(i).max(a);
                let e1 = self.edge(i + 1).min(b);
                (e1 - e0).max(0.0) * self.weights[i]
            })
            .sum()
    }
}

/// A solved pair `(P, μ)` on one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafState {
    pub side: Side,
    pub p_estimate: f64,
    pub density: LeafDensity,
    pub residual: f64,
    pub iterations: usize,
    /// Largest truncation bound of the transverse Jacobians in the operator.
    pub tail_bound: f64,
}

/// Sparse weighted pushforward on the cells of a window.
#[derive(Debug, Clone)]
pub struct LeafOperator {
    pub offsets: Vec<usize>,
    pub entries: Vec<(u32, f64)>,
    pub tail_bound: f64,
}

impl LeafOperator {
    pub fn build(kernel: &LeafKernel, anchor: [f64; 2], window: [f64; 2], k: u32) -> Result<Self> {
        let cells = 1usize << k;
        let w = (window[1] - window[0]) / cells as f64;
        let fx = kernel.forward(anchor);
        let rows: Vec<Result<(Vec<(u32, f64)>, f64)>> = (0..cells)
            .into_par_iter()
            .map(|j| {
                let e0 = window[0] + j as f64 * w;
                let e1 = e0 + w;
                let (s0, s1) = {
                    let (a, b) = (kernel.expansion * e0, kernel.expansion * e1);
                    (a.min(b), a.max(b))
                };
                let (off, b) = kernel
                    .place(anchor, fx, s0, s1, window)
                    .ok_or(Error::HolonomyExit)?;
                let (t0, t1) = (s0 + off, s1 + off);
                let i0 = (((t0 - window[0]) / w).floor().max(0.0) as usize).min(cells - 1);
                let i1 = (((t1 - window[0]) / w).floor().max(0.0) as usize).min(cells - 1);
                let mut row = Vec::with_capacity(i1 - i0 + 1);
                for i in i0..=i1 {
                    let a = (window[0] + i as f64 * w).max(t0);
                    let c = (window[0] + (i + 1) as f64 * w).min(t1);
                    if c <= a {
                        continue;
                    }
                    let tm = 0.5 * (a + c);
                    let p = kernel.leaf_point(anchor, tm, 0.0);
                    let q = kernel.leaf_point(anchor, tm, b);
                    let lw = kernel.psi.eval_base(q) + kernel.log_transverse(p, b);
                    row.push((i as u32, (c - a) / w * lw.exp()));
                }
                Ok((row, kernel.transverse_tail(b)))
            })
            .collect();
        let mut offsets = Vec::with_capacity(cells + 1);
        let mut entries = Vec::new();
        let mut tail_bound = 0.0f64;
        offsets.push(0);
        for r in rows {
            let (row, tail) = r?;
            entries.extend(row);
            offsets.push(entries.len());
            tail_bound = tail_bound.max(tail);
        }
        Ok(Self {
            offsets,
            entries,
            tail_bound,
        })
    }

    pub fn apply(&self, m: &[f64]) -> Vec<f64> {
        (0..self.offsets.len() - 1)
            .into_par_iter()
            .map(|j| {
                self.entries[self.offsets[j]..self.offsets[j + 1]]
                    .iter()
                    .map(|&(i, c)| c * m[i as usize])
                    .sum()
            })
            .collect()
    }

    /// `(P, residual)` for the cell masses `m` (unit total).
    pub fn defect(&self, m: &[f64]) -> (f64, f64) {
        let tm = self.apply(m);
        let r: f64 = tm.iter().sum();
        let res = tm
            .iter()
            .zip(m)
            .map(|(t, mi)| ((t / r - mi) / mi).abs())
            .fold(0.0f64, f64::max);
        (r.ln(), res)
    }
}

fn check_window(window: &LeafSegment, k: u32) -> Result<Side> {
    if !(8..=24).contains(&k) {
        return Err(Error::Precondition(format!(
            "resolution_k = {k} outside [8, 24]"
        )));
    }
    if window.length() < 1.0 - 1e-12 {
        return Err(Error::DegenerateWindow(format!(
            "window length {} is below 1",
            window.length()
        )));
    }
    Side::of(window.leaf_type)
}

/// Solves `μ_{Fx} = e^{P−ψ} F_* μ_x` on the window by power iteration.
pub fn solve_leaf_state(
    sys: &ModelSystem,
    phi: &Potential,
    window: &LeafSegment,
    resolution_k: u32,
    tol: f64,
) -> Result<LeafState> {
    let side = check_window(window, resolution_k)?;
    let kernel = LeafKernel::new(sys, phi, side);
    solve_with_kernel(&kernel, window, resolution_k, tol)
}

pub fn solve_with_kernel(
    kernel: &LeafKernel,
    window: &LeafSegment,
    resolution_k: u32,
    tol: f64,
) -> Result<LeafState> {
    check_window(window, resolution_k)?;
    let interval = window.interval();
    let op = LeafOperator::build(kernel, window.base_point.base, interval, resolution_k)?;
    let cells = 1usize << resolution_k;
    let mut m = vec![1.0 / cells as f64; cells];
    let mut last = f64::INFINITY;
    for it in 0..MAX_ITERATIONS {
        let tm = op.apply(&m);
        let r: f64 = tm.iter().sum();
        let res = tm
            .iter()
            .zip(&m)
            .map(|(t, mi)| ((t / r - mi) / mi).abs())
            .fold(0.0f64, f64::max);
        last = res;
        if res < tol {
            let w = window.length() / cells as f64;
            return Ok(LeafState {
                side: kernel.side,
                p_estimate: r.ln(),
                density: LeafDensity {
                    segment: window.clone(),
                    resolution_k,
                    weights: m.iter().map(|mi| mi / w).collect(),
                    normalization_tag: NormalizationTag::ProbabilityOnWindow,
                },
                residual: res,
                iterations: it,
                tail_bound: op.tail_bound,
            });
        }
        m = tm.into_iter().map(|t| t / r).collect();
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
        residual: last,
    })
}

/// Sup over cells of the relative quasi-invariance defect of a solved state.
pub fn quasi_invariance_residual(
    sys: &ModelSystem,
    phi: &Potential,
    state: &LeafState,
) -> Result<f64> {
    let kernel = LeafKernel::new(sys, phi, state.side);
    let d = &state.density;
    let op = LeafOperator::build(
        &kernel,
        d.segment.base_point.base,
        d.window(),
        d.resolution_k,
    )?;
    let m = d.masses();
    let total: f64 = m.iter().sum();
    let m: Vec<f64> = m.iter().map(|x| x / total).collect();
    let tm = op.apply(&m);
    let scale = state.p_estimate.exp();
    Ok(tm
        .iter()
        .zip(&m)
        .map(|(t, mi)| ((t - scale * mi) / (scale * mi)).abs())
        .fold(0.0f64, f64::max))
}

/// A truncated multiplicative cocycle with the bound on its omitted log-tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CocycleValue {
    pub value: f64,
    pub log_tail_bound: f64,
}

pub(crate) fn backward_log_ratio(
    sys: &ModelSystem,
    phi: &Potential,
    x: [f64; 2],
    a: f64,
    n: usize,
) -> f64 {
    if phi.constant_value().is_some() || a == 0.0 {
        return 0.0;
    }
    let mut p = x;
    let mut scale = a;
    let mut s = 0.0;
    for _ in 0..n {
        p = sys.base_backward(p);
        scale /= sys.mu_u;
        let y = [p[0] + scale * sys.v_u[0], p[1] + scale * sys.v_u[1]];
        s += phi.eval_base(y) - phi.eval_base(p);
    }
    s
}

pub(crate) fn unstable_tail(sys: &ModelSystem, phi: &Potential, a: f64, n: usize) -> f64 {
    let nu = sys.v_u[0].abs().max(sys.v_u[1].abs());
    phi.c_phi * (a.abs() * nu).powf(phi.alpha) * sys.lambda.powf(-phi.alpha * n as f64)
        / (sys.lambda.powf(phi.alpha) - 1.0)
}

/// `Δ_x(y) = Π_{k≥1} e^{φ(f^{−k}y) − φ(f^{−k}x)}` for `y` on `W^u(x)`.
pub fn delta_density(
    sys: &ModelSystem,
    phi: &Potential,
    x: &TorusPoint,
    y: &TorusPoint,
    n_trunc: usize,
) -> Result<CocycleValue> {
    if n_trunc == 0 {
        return Err(Error::Precondition("N_trunc must be ≥ 1".into()));
    }
    let a = unstable_shift(sys, x, y)?;
    Ok(CocycleValue {
        value: backward_log_ratio(sys, phi, x.base, a, n_trunc).exp(),
        log_tail_bound: unstable_tail(sys, phi, a, n_trunc),
    })
}

/// `Jac^u(w) = Π_{j≥1} e^{φ(f^{−j} hol^u w) − φ(f^{−j} w)}`.
pub fn holonomy_jacobian(
    sys: &ModelSystem,
    phi: &Potential,
    x0: &TorusPoint,
    y0: &TorusPoint,
    w: &TorusPoint,
    n_trunc: usize,
) -> Result<CocycleValue> {
    let hw = crate::torusdyn::unstable_holonomy(sys, x0, y0, w)?;
    let a = unstable_shift(sys, x0, y0)?;
    if n_trunc == 0 {
        return Err(Error::Precondition("N_trunc must be ≥ 1".into()));
    }
    debug_assert!(crate::torusdyn::torus_dist(&hw, &w.shifted(sys.from_eigen(a, 0.0), 0.0)) < 1.0);
    Ok(CocycleValue {
        value: backward_log_ratio(sys, phi, w.base, a, n_trunc).exp(),
        log_tail_bound: unstable_tail(sys, phi, a, n_trunc),
    })
}

/// `ν_x = Δ_x · μ` on the window of an unstable state; `x` must lie on the
/// window's leaf.
pub fn nu_measure(
    sys: &ModelSystem,
    phi: &Potential,
    state: &LeafState,
    x: &TorusPoint,
) -> Result<LeafDensity> {
    if state.side != Side::Unstable {
        return Err(Error::Precondition(
            "ν is defined on unstable leaves".into(),
        ));
    }
    let d = &state.density;
    let anchor = d.segment.base_point;
    let a_x = unstable_shift(sys, &anchor, x)?;
    let n = sys.series_order;
    let log_dx = backward_log_ratio(sys, phi, anchor.base, a_x, n);
    let weights = (0..d.cells())
        .into_par_iter()
        .map(|i| {
            let t = d.midpoint(i);
            (backward_log_ratio(sys, phi, anchor.base, t, n) - log_dx).exp() * d.weights[i]
        })
        .collect();
    Ok(LeafDensity {
        weights,
        ..d.clone()
    })
}

/// The whole family `{μ_q}` obtained from one solved window by sliding along
/// the transverse direction.
#[derive(Debug, Clone)]
pub struct LeafFamily {
    pub kernel: LeafKernel,
    pub state: LeafState,
    /// Pieces shorter than this many window cells are integrated after
    /// pushing them forward.
    pub zoom_cells: f64,
}

impl LeafFamily {
    pub fn new(kernel: LeafKernel, state: LeafState) -> Self {
        Self {
            kernel,
            state,
            zoom_cells: 16.0,
        }
    }

    pub fn solve(sys: &ModelSystem, phi: &Potential, side: Side, k: u32, tol: f64) -> Result<Self> {
        let leaf = match side {
            Side::Unstable => LeafType::U,
            Side::Stable => LeafType::S,
        };
        let anchor = if sys.dim() == 3 {
            TorusPoint::new3(0.0, 0.0, 0.0)
        } else {
            TorusPoint::new2(0.0, 0.0)
        };
        let window = crate::torusdyn::leaf_segment(sys, &anchor, leaf, 0.5)?;
        let kernel = LeafKernel::new(sys, phi, side);
        let state = solve_with_kernel(&kernel, &window, k, tol)?;
        Ok(Self::new(kernel, state))
    }

    pub fn pressure(&self) -> f64 {
        self.state.p_estimate
    }

    fn anchor(&self) -> [f64; 2] {
        self.state.density.segment.base_point.base
    }

    /// `∫_{[lo,hi]} e^{g(t)} dμ_q(t)` along the leaf `t ↦ q + t v_e`.
    pub fn integrate<G: Fn(f64) -> f64>(&self, q: [f64; 2], lo: f64, hi: f64, g: G) -> Result<f64> {
        if hi <= lo {
            return Ok(0.0);
        }
        let d = &self.state.density;
        let window = d.window();
        let w = d.cell_width();
        let pieces = ((hi - lo) / 0.25).ceil().max(1.0) as usize;
        let step = (hi - lo) / pieces as f64;
        let anchor = self.anchor();
        let mut total = 0.0;
        for piece in 0..pieces {
            let a = lo + piece as f64 * step;
            let c = if piece + 1 == pieces { hi } else { a + step };
            let (off, b) = self
                .kernel
                .place(anchor, q, a, c, window)
                .ok_or(Error::HolonomyExit)?;
            let (t0, t1) = (a + off, c + off);
            let i0 = (((t0 - window[0]) / w).floor().max(0.0) as usize).min(d.cells() - 1);
            let i1 = (((t1 - window[0]) / w).floor().max(0.0) as usize).min(d.cells() - 1);
            for i in i0..=i1 {
                let e0 = d.edge(i).max(t0);
                let e1 = d.edge(i + 1).min(t1);
                if e1 <= e0 {
                    continue;
                }
                let tm = 0.5 * (e0 + e1);
                let lj = self
                    .kernel
                    .log_transverse(self.kernel.leaf_point(anchor, tm, 0.0), b);
                total += (e1 - e0) * d.weights[i] * (lj + g(tm - off)).exp();
            }
        }
        Ok(total)
    }

    /// `μ_q([lo, hi])`, pushing short pieces forward until they span
    /// several window cells.
    pub fn segment_mass(&self, q: [f64; 2], lo: f64, hi: f64) -> Result<f64> {
        self.weighted_mass(q, lo, hi, |_| 0.0)
    }

    /// `∫_{[lo,hi]} e^{g} dμ_q` with the same zoom as `segment_mass`; `g` must
    /// be nearly constant at the scale of `hi − lo` when zooming.
    pub fn weighted_mass<G: Fn(f64) -> f64>(
        &self,
        q: [f64; 2],
        lo: f64,
        hi: f64,
        g: G,
    ) -> Result<f64> {
        if hi <= lo {
            return Ok(0.0);
        }
        let w = self.state.density.cell_width();
        let len = hi - lo;
        let target = self.zoom_cells * w;
        if len >= target {
            return self.integrate(q, lo, hi, g);
        }
        let k = self.kernel.clone();
        let m = ((target / len).ln() / k.lambda.ln()).ceil() as usize;
        let mut orbit = Vec::with_capacity(m + 1);
        let mut p = q;
        orbit.push(p);
        for _ in 0..m {
            p = k.forward(p);
            orbit.push(p);
        }
        let em = k.expansion.powi(m as i32);
        let (s0, s1) = {
            let (a, b) = (em * lo, em * hi);
            (a.min(b), a.max(b))
        };
        let psi = &k.psi;
        let p_est = self.state.p_estimate;
        let mass = self.integrate(orbit[m], s0, s1, |s| {
            let mut acc = -(m as f64) * p_est + g(s / em);
            let mut scale = s;
            for i in (1..=m).rev() {
                let y = [
                    orbit[i][0] + scale * k.v_e[0],
                    orbit[i][1] + scale * k.v_e[1],
                ];
                acc += psi.eval_base(y);
                scale /= k.expansion;
            }
            acc
        })?;
        Ok(mass)
    }

    /// Density of `μ_q` against arc length on `[−R, R]` with `2^k` cells.
    pub fn chart_density(&self, q: &TorusPoint, radius: f64, k: u32) -> Result<LeafDensity> {
        let leaf = match self.kernel.side {
            Side::Unstable => LeafType::U,
            Side::Stable => LeafType::S,
        };
        let segment = LeafSegment {
            leaf_type: leaf,
            base_point: *q,
            param_intervals: vec![[-radius, radius]],
            series_order: self.kernel.n_trunc,
            tail_bound: self.state.tail_bound,
        };
        let cells = 1usize << k;
        let w = 2.0 * radius / cells as f64;
        let weights: Result<Vec<f64>> = (0..cells)
            .into_par_iter()
            .map(|i| {
                let a = -radius + i as f64 * w;
                Ok(self.segment_mass(q.base, a, a + w)? / w)
            })
            .collect();
        Ok(LeafDensity {
            segment,
            resolution_k: k,
            weights: weights?,
            normalization_tag: NormalizationTag::GlobalScale,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torusdyn::leaf_segment;

    fn window(sys: &ModelSystem, leaf: LeafType) -> LeafSegment {
        leaf_segment(sys, &TorusPoint::new2(0.0, 0.0), leaf, 0.5).unwrap()
    }

    #[test]
    fn zero_potential_gives_log_lambda_and_uniform_density() {
        let sys = ModelSystem::cat_map();
        let st = solve_leaf_state(
            &sys,
            &Potential::zero(),
            &window(&sys, LeafType::U),
            10,
            1e-12,
        )
        .unwrap();
        assert!((st.p_estimate - sys.lambda.ln()).abs() < 1e-12);
        let (mn, mx) = st
            .density
            .weights
            .iter()
            .fold((f64::MAX, 0.0f64), |(a, b), &w| (a.min(w), b.max(w)));
        assert!((mx - mn) / mn < 1e-8);
        assert!(quasi_invariance_residual(&sys, &Potential::zero(), &st).unwrap() < 1e-10);
    }

    #[test]
    fn constant_shift() {
        let sys = ModelSystem::cat_map();
        let w = window(&sys, LeafType::U);
        let phi = Potential::cos_x1(0.2);
        let a = solve_leaf_state(&sys, &phi, &w, 10, 1e-11).unwrap();
        let b = solve_leaf_state(&sys, &phi.shifted(0.3), &w, 10, 1e-11).unwrap();
        assert!((b.p_estimate - a.p_estimate - 0.3).abs() < 1e-9);
        for (x, y) in a.density.weights.iter().zip(&b.density.weights) {
            assert!((x - y).abs() / x < 1e-9);
        }
    }

    #[test]
    fn perturbed_cell_raises_residual() {
        let sys = ModelSystem::cat_map();
        let phi = Potential::cos_x1(0.2);
        let mut st = solve_leaf_state(&sys, &phi, &window(&sys, LeafType::U), 10, 1e-10).unwrap();
        st.density.weights[300] *= 1.1;
        assert!(quasi_invariance_residual(&sys, &phi, &st).unwrap() >= 0.05);
    }

    #[test]
    fn stable_side_zero_potential() {
        let sys = ModelSystem::cat_map();
        let st = solve_leaf_state(
            &sys,
            &Potential::zero(),
            &window(&sys, LeafType::S),
            10,
            1e-12,
        )
        .unwrap();
        assert!((st.p_estimate - sys.lambda.ln()).abs() < 1e-12);
        assert!(quasi_invariance_residual(&sys, &Potential::zero(), &st).unwrap() < 1e-10);
    }

    #[test]
    fn generic_delta_matches_explicit_formula() {
        let sys = ModelSystem::cat_map();
        let phi = Potential::cos_x1(0.2);
        let k = LeafKernel::new(&sys, &phi, Side::Unstable);
        let x = TorusPoint::new2(0.13, 0.72);
        let y = x.shifted(sys.from_eigen(0.1, 0.0), 0.0);
        let d = delta_density(&sys, &phi, &x, &y, 60).unwrap();
        assert!((d.value.ln() - k.log_delta(x.base, 0.1)).abs() < 1e-12);
    }

    #[test]
    fn delta_trivial_cases() {
        let sys = ModelSystem::cat_map();
        let x = TorusPoint::new2(0.2, 0.3);
        let y = x.shifted(sys.from_eigen(-0.2, 0.0), 0.0);
        let phi = Potential::cos_x1(0.2);
        assert_eq!(delta_density(&sys, &phi, &x, &x, 60).unwrap().value, 1.0);
        assert!(
            (delta_density(&sys, &Potential::constant(0.4), &x, &y, 60)
                .unwrap()
                .value
                - 1.0)
                .abs()
                < 1e-12
        );
        let off = x.shifted(sys.from_eigen(0.0, 0.1), 0.0);
        assert!(delta_density(&sys, &phi, &x, &off, 60).is_err());
    }

    #[test]
    fn family_reproduces_master_window() {
        let sys = ModelSystem::cat_map();
        let phi = Potential::cos_x1(0.2);
        let fam = LeafFamily::solve(&sys, &phi, Side::Unstable, 10, 1e-11).unwrap();
        let d = &fam.state.density;
        let direct = d.interval_mass(-0.1, 0.2);
        let via = fam.integrate([0.0, 0.0], -0.1, 0.2, |_| 0.0).unwrap();
        assert!((direct - via).abs() / direct < 1e-12);
    }
}
