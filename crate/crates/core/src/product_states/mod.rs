//! Equilibrium states glued from leaf measures on product charts.
//!
//! A chart centred at `c` uses eigen-coordinates `(a, b)` for the point
//! `c + a v_u + b v_s` and carries the measure
//! `G(a, b) μ^u_c(da) μ^s_c(db)`, where `G` collects the transverse Jacobian
//! of the unstable family and the Δ-density along unstable plaques.

mod global;

pub use global::*;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Pt};
use crate::leaf_measures::{LeafFamily, LeafKernel, Side};
use crate::potentials::Potential;
use crate::torusdyn::{ModelSystem, TorusPoint, CHART_SCALE};

/// A view must resolve its range with at least this many master cells.
pub const VIEW_CELLS: f64 = 256.0;
/// Longest forward push used to resolve a short range.
pub const MAX_ZOOM: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductKind {
    /// `μ^u × μ^s` with Jacobians: the equilibrium state.
    Equilibrium,
    /// `Leb^u × μ^s` with Δ: the horocycle-conformal candidate.
    LeafProduct,
}

/// A one-dimensional leaf measure on a parameter range, cell by cell.
#[derive(Debug, Clone)]
pub struct LeafView {
    edges: Vec<f64>,
    masses: Vec<f64>,
    m0: Vec<f64>,
    m1: Vec<f64>,
    /// Width of the coarsest cell.
    pub resolution: f64,
}

impl LeafView {
    fn from_cells(edges: Vec<f64>, masses: Vec<f64>) -> Self {
        let mut m0 = Vec::with_capacity(masses.len() + 1);
        let mut m1 = Vec::with_capacity(masses.len() + 1);
        let (mut s0, mut s1) = (0.0, 0.0);
        m0.push(0.0);
        m1.push(0.0);
        let mut resolution: f64 = 0.0;
        for (i, &m) in masses.iter().enumerate() {
            s0 += m;
            s1 += m * 0.5 * (edges[i] + edges[i + 1]);
            m0.push(s0);
            m1.push(s1);
            resolution = resolution.max(edges[i + 1] - edges[i]);
        }
        Self {
            edges,
            masses,
            m0,
            m1,
            resolution,
        }
    }

    /// Arc length on `[lo, hi]`.
    pub fn arc_length(lo: f64, hi: f64) -> Self {
        Self::from_cells(vec![lo, hi], vec![hi - lo])
    }

    /// `μ_q` on `[lo, hi]`, read off the master window of `fam`.
    pub fn transported(fam: &LeafFamily, q: [f64; 2], lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::Precondition(format!(
                "empty leaf range [{lo}, {hi}]"
            )));
        }
        let d = &fam.state.density;
        let k = &fam.kernel;
        let window = d.window();
        let w = d.cell_width();
        let anchor = d.segment.base_point.base;
        let pieces = ((hi - lo) / 0.25).ceil().max(1.0) as usize;
        let step = (hi - lo) / pieces as f64;
        let mut edges = vec![lo];
        let mut masses = Vec::new();
        for piece in 0..pieces {
            let a = lo + piece as f64 * step;
            let c = if piece + 1 == pieces { hi } else { a + step };
            let (off, b) = k
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
                let lj = k.log_transverse(k.leaf_point(anchor, 0.5 * (e0 + e1), 0.0), b);
                masses.push((e1 - e0) * d.weights[i] * lj.exp());
                edges.push(if i == i1 { c } else { e1 - off });
            }
            if *edges.last().unwrap() != c {
                *edges.last_mut().unwrap() = c;
            }
        }
        Ok(Self::from_cells(edges, masses))
    }

    /// Like `transported`, pushing the range forward first until it spans
    /// at least `min_cells` master cells.
    pub fn zoomed(fam: &LeafFamily, q: [f64; 2], lo: f64, hi: f64, min_cells: f64) -> Result<Self> {
        let w = fam.state.density.cell_width();
        let len = hi - lo;
        if !(len > 0.0) {
            return Err(Error::Precondition(format!(
                "empty leaf range [{lo}, {hi}]"
            )));
        }
        let k = &fam.kernel;
        if len >= min_cells * w {
            return Self::transported(fam, q, lo, hi);
        }
        let m = ((min_cells * w / len).ln() / k.lambda.ln()).ceil() as usize;
        if m > MAX_ZOOM {
            return Err(Error::Starvation {
                found: (len / w * k.lambda.powi(MAX_ZOOM as i32)) as usize,
                needed: min_cells as usize,
            });
        }
        let mut orbit = Vec::with_capacity(m + 1);
        let mut p = q;
        orbit.push(p);
        for _ in 0..m {
            p = k.forward(p);
            orbit.push(p);
        }
        let em = k.expansion.powi(m as i32);
        let (s0, s1) = if em > 0.0 {
            (em * lo, em * hi)
        } else {
            (em * hi, em * lo)
        };
        let base = Self::transported(fam, orbit[m], s0, s1)?;
        let p_est = fam.pressure();
        let weight = |s: f64| {
            let mut acc = -(m as f64) * p_est;
            let mut scale = s;
            for i in (1..=m).rev() {
                let y = [
                    orbit[i][0] + scale * k.v_e[0],
                    orbit[i][1] + scale * k.v_e[1],
                ];
                acc += k.psi.eval_base(y);
                scale /= k.expansion;
            }
            acc
        };
        let constant = k
            .psi
            .constant_value()
            .map(|c| c * m as f64 - m as f64 * p_est);
        let mut edges: Vec<f64> = base.edges.iter().map(|s| s / em).collect();
        let mut masses: Vec<f64> = base
            .masses
            .iter()
            .enumerate()
            .map(|(i, mass)| {
                let lw = match constant {
                    Some(c) => c,
                    None => weight(0.5 * (base.edges[i] + base.edges[i + 1])),
                };
                mass * lw.exp()
            })
            .collect();
        if em < 0.0 {
            edges.reverse();
            masses.reverse();
        }
        edges[0] = lo;
        *edges.last_mut().unwrap() = hi;
        Ok(Self::from_cells(edges, masses))
    }

    pub fn range(&self) -> [f64; 2] {
        [self.edges[0], *self.edges.last().unwrap()]
    }

    pub fn cells(&self) -> usize {
        self.masses.len()
    }

    pub fn total_mass(&self) -> f64 {
        *self.m0.last().unwrap()
    }

    fn cumulative(&self, x: f64) -> (f64, f64) {
        let [lo, hi] = self.range();
        if x <= lo {
            return (0.0, 0.0);
        }
        if x >= hi {
            return (*self.m0.last().unwrap(), *self.m1.last().unwrap());
        }
        let i = self.edges.partition_point(|&e| e <= x) - 1;
        let (e0, e1) = (self.edges[i], self.edges[i + 1]);
        let part = self.masses[i] * (x - e0) / (e1 - e0);
        (self.m0[i] + part, self.m1[i] + part * 0.5 * (e0 + x))
    }

    /// Mass and first moment of `[a, b]`.
    pub fn moments(&self, a: f64, b: f64) -> (f64, f64) {
        let (p0, p1) = self.cumulative(a);
        let (q0, q1) = self.cumulative(b);
        (q0 - p0, q1 - p1)
    }

    pub fn mass(&self, a: f64, b: f64) -> f64 {
        self.moments(a, b).0
    }

    /// Cells meeting `[a, b]`, clipped, as `(lo, hi, mass)`.
    pub fn cells_between(&self, a: f64, b: f64) -> Vec<(f64, f64, f64)> {
        let [lo, hi] = self.range();
        let (a, b) = (a.max(lo), b.min(hi));
        if b <= a {
            return Vec::new();
        }
        let i0 = self.edges.partition_point(|&e| e <= a) - 1;
        let mut out = Vec::new();
        let mut i = i0;
        while i < self.masses.len() && self.edges[i] < b {
            let (e0, e1) = (self.edges[i], self.edges[i + 1]);
            let (c0, c1) = (e0.max(a), e1.min(b));
            if c1 > c0 {
                out.push((c0, c1, self.masses[i] * (c1 - c0) / (e1 - e0)));
            }
            i += 1;
        }
        out
    }
}

/// Spacings used to tabulate the chart density. `fine` applies along the
/// direction in which a factor of the density is only Hölder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartResolution {
    pub fine: f64,
    pub coarse: f64,
}

impl Default for ChartResolution {
    fn default() -> Self {
        Self {
            fine: 1.0 / 4096.0,
            coarse: 1.0 / 256.0,
        }
    }
}

impl ChartResolution {
    /// Fine spacing of sixteen master cells at leaf resolution `k`.
    pub fn for_level(k: u32) -> Self {
        Self {
            fine: (2.0f64).powi(4 - k as i32).min(1.0 / 256.0),
            ..Self::default()
        }
    }

    pub fn refined(self) -> Self {
        Self {
            fine: 0.5 * self.fine,
            ..self
        }
    }
}

/// Solved leaf data shared by all charts of one product measure.
#[derive(Debug, Clone)]
pub struct ProductModel {
    pub sys: ModelSystem,
    pub phi: Potential,
    pub kind: ProductKind,
    pub u_family: Option<LeafFamily>,
    pub s_family: LeafFamily,
    /// Unstable kernel, used for the Δ-densities and transverse Jacobians.
    pub u_kernel: LeafKernel,
    pub resolution_k: u32,
    pub chart_resolution: ChartResolution,
}

impl ProductModel {
    pub fn new(
        sys: &ModelSystem,
        phi: &Potential,
        kind: ProductKind,
        k: u32,
        tol: f64,
    ) -> Result<Self> {
        let s_family = LeafFamily::solve(sys, phi, Side::Stable, k, tol)?;
        let u_family = match kind {
            ProductKind::Equilibrium => Some(LeafFamily::solve(sys, phi, Side::Unstable, k, tol)?),
            ProductKind::LeafProduct => None,
        };
        Ok(Self {
            sys: sys.clone(),
            phi: phi.clone(),
            kind,
            u_family,
            s_family,
            u_kernel: LeafKernel::new(sys, phi, Side::Unstable),
            resolution_k: k,
            chart_resolution: ChartResolution::for_level(k),
        })
    }

    pub fn with_chart_resolution(mut self, r: ChartResolution) -> Self {
        self.chart_resolution = r;
        self
    }

    pub fn shared(self) -> Arc<Self> {
        Arc::new(self)
    }

    /// Transfer-operator pressure of the leaf solution.
    pub fn pressure(&self) -> f64 {
        self.u_family
            .as_ref()
            .map_or_else(|| self.s_family.pressure(), LeafFamily::pressure)
    }

    /// Transverse part of `log G`: rough in `a`, smooth in `b`.
    pub fn log_transverse_part(&self, c: [f64; 2], a: f64, b: f64) -> f64 {
        match self.kind {
            ProductKind::Equilibrium => {
                let k = &self.u_kernel;
                k.log_transverse(k.leaf_point(c, a, 0.0), b)
            }
            ProductKind::LeafProduct => 0.0,
        }
    }

    /// Δ part of `log G`: smooth in `a`, rough in `b`.
    pub fn log_delta_part(&self, c: [f64; 2], a: f64, b: f64) -> f64 {
        let k = &self.u_kernel;
        k.log_delta(k.leaf_point(c, 0.0, b), a)
    }

    /// `log G(a, b)` for the chart centred at `c`.
    pub fn log_density(&self, c: [f64; 2], a: f64, b: f64) -> f64 {
        self.log_transverse_part(c, a, b) + self.log_delta_part(c, a, b)
    }

    fn u_view(&self, c: [f64; 2], lo: f64, hi: f64) -> Result<LeafView> {
        match &self.u_family {
            Some(fam) => LeafView::zoomed(fam, c, lo, hi, VIEW_CELLS),
            None => Ok(LeafView::arc_length(lo, hi)),
        }
    }

    fn s_view(&self, c: [f64; 2], lo: f64, hi: f64) -> Result<LeafView> {
        LeafView::zoomed(&self.s_family, c, lo, hi, VIEW_CELLS)
    }
}

fn nodes(range: [f64; 2], spacing: f64) -> (usize, f64) {
    let n = (((range[1] - range[0]) / spacing).ceil() as usize).max(1);
    (n, (range[1] - range[0]) / n as f64)
}

#[inline]
fn locate(x: f64, origin: f64, step: f64, n: usize) -> (usize, f64) {
    if n == 0 || step == 0.0 {
        return (0, 0.0);
    }
    let u = ((x - origin) / step).clamp(0.0, n as f64);
    let i = (u.floor() as usize).min(n - 1);
    (i, u - i as f64)
}

/// Bilinear table over a parameter rectangle.
#[derive(Debug, Clone)]
struct NodeGrid {
    origin: [f64; 2],
    step: [f64; 2],
    /// Intervals per axis; nodes are one more.
    shape: [usize; 2],
    values: Vec<f64>,
}

impl NodeGrid {
    fn build(a: [f64; 2], b: [f64; 2], spacing: [f64; 2], f: impl Fn(f64, f64) -> f64) -> Self {
        let (na, ha) = nodes(a, spacing[0]);
        let (nb, hb) = nodes(b, spacing[1]);
        let mut values = Vec::with_capacity((na + 1) * (nb + 1));
        for j in 0..=nb {
            for i in 0..=na {
                values.push(f(a[0] + i as f64 * ha, b[0] + j as f64 * hb));
            }
        }
        Self {
            origin: [a[0], b[0]],
            step: [ha, hb],
            shape: [na, nb],
            values,
        }
    }

    fn add(&mut self, f: impl Fn(f64, f64) -> f64) {
        let row = self.shape[0] + 1;
        for (idx, v) in self.values.iter_mut().enumerate() {
            let (i, j) = (idx % row, idx / row);
            *v += f(
                self.origin[0] + i as f64 * self.step[0],
                self.origin[1] + j as f64 * self.step[1],
            );
        }
    }

    fn eval(&self, a: f64, b: f64) -> f64 {
        let row = self.shape[0] + 1;
        let (i, fa) = locate(a, self.origin[0], self.step[0], self.shape[0]);
        let (j, fb) = locate(b, self.origin[1], self.step[1], self.shape[1]);
        let v = |i: usize, j: usize| self.values[j * row + i];
        (1.0 - fb) * ((1.0 - fa) * v(i, j) + fa * v(i + 1, j))
            + fb * ((1.0 - fa) * v(i, j + 1) + fa * v(i + 1, j + 1))
    }
}

/// `μ^u_c` reweighted by the transverse factor, as cumulative sums over fine
/// `a`-bins at each `b`-node.
#[derive(Debug, Clone)]
struct TransverseTable {
    a0: f64,
    ha: f64,
    bins: usize,
    b0: f64,
    hb: f64,
    b_nodes: usize,
    /// `exp` of the transverse factor, `(b_nodes+1) × bins`.
    factor: Vec<f64>,
    /// Cumulative mass and first moment, `(b_nodes+1) × (bins+1)`.
    c0: Vec<f64>,
    c1: Vec<f64>,
}

impl TransverseTable {
    fn build(
        u_view: &LeafView,
        a: [f64; 2],
        b: [f64; 2],
        spacing: [f64; 2],
        f: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let (bins, ha) = nodes(a, spacing[0]);
        let (b_nodes, hb) = nodes(b, spacing[1]);
        let cells: Vec<(f64, f64)> = (0..bins)
            .map(|i| {
                let lo = a[0] + i as f64 * ha;
                let hi = if i + 1 == bins { a[1] } else { lo + ha };
                u_view.moments(lo, hi)
            })
            .collect();
        let mut factor = Vec::with_capacity((b_nodes + 1) * bins);
        let mut c0 = Vec::with_capacity((b_nodes + 1) * (bins + 1));
        let mut c1 = Vec::with_capacity((b_nodes + 1) * (bins + 1));
        for j in 0..=b_nodes {
            let bj = b[0] + j as f64 * hb;
            let (mut s0, mut s1) = (0.0, 0.0);
            c0.push(0.0);
            c1.push(0.0);
            for (i, &(m0, m1)) in cells.iter().enumerate() {
                let e = f(a[0] + (i as f64 + 0.5) * ha, bj).exp();
                factor.push(e);
                s0 += m0 * e;
                s1 += m1 * e;
                c0.push(s0);
                c1.push(s1);
            }
        }
        Self {
            a0: a[0],
            ha,
            bins,
            b0: b[0],
            hb,
            b_nodes,
            factor,
            c0,
            c1,
        }
    }

    /// Cumulative weighted mass and moment up to `x` at `b`.
    fn cumulative(&self, u_view: &LeafView, x: f64, b: f64) -> (f64, f64) {
        let (i, _) = locate(x, self.a0, self.ha, self.bins);
        let lo = self.a0 + i as f64 * self.ha;
        let (p0, p1) = u_view.moments(lo, x);
        let (j, fb) = locate(b, self.b0, self.hb, self.b_nodes);
        let at = |j: usize| {
            let e = self.factor[j * self.bins + i];
            let k = j * (self.bins + 1) + i;
            (self.c0[k] + p0 * e, self.c1[k] + p1 * e)
        };
        let (x0, x1) = at(j);
        if fb == 0.0 {
            return (x0, x1);
        }
        let (y0, y1) = at(j + 1);
        ((1.0 - fb) * x0 + fb * y0, (1.0 - fb) * x1 + fb * y1)
    }
}

/// One foliation box: parameter rectangle, leaf views and density tables.
#[derive(Debug, Clone)]
pub struct ProductChart {
    pub box_center: TorusPoint,
    pub a_range: [f64; 2],
    pub b_range: [f64; 2],
    pub u_view: LeafView,
    pub s_view: LeafView,
    transverse: TransverseTable,
    delta: NodeGrid,
    coarse_a: f64,
    /// Cell masses of `m_{U,W}` on an `n_u × n_s` grid of the parameter
    /// rectangle, row-major in `b`.
    pub mass_grid: Vec<f64>,
    pub grid_shape: [usize; 2],
}

impl ProductChart {
    /// Chart centred at `c` over the parameter rectangle `a_range × b_range`.
    pub fn new(
        model: &ProductModel,
        c: [f64; 2],
        a_range: [f64; 2],
        b_range: [f64; 2],
    ) -> Result<Self> {
        let radius = a_range[0]
            .abs()
            .max(a_range[1].abs())
            .max(b_range[0].abs())
            .max(b_range[1].abs());
        if radius > CHART_SCALE {
            return Err(Error::ChartOverflow {
                radius,
                max: CHART_SCALE,
            });
        }
        let u_view = model.u_view(c, a_range[0], a_range[1])?;
        let s_view = model.s_view(c, b_range[0], b_range[1])?;
        let res = model.chart_resolution;
        let (la, lb) = (a_range[1] - a_range[0], b_range[1] - b_range[0]);
        let fine = [res.fine.min(la / 64.0), res.fine.min(lb / 64.0)];
        let coarse = [res.coarse.min(la / 8.0), res.coarse.min(lb / 8.0)];
        let constant = model.phi.constant_value().is_some();
        let transverse = if constant || model.kind == ProductKind::LeafProduct {
            TransverseTable::build(&u_view, a_range, b_range, [coarse[0], lb], |_, _| 0.0)
        } else {
            TransverseTable::build(&u_view, a_range, b_range, [fine[0], coarse[1]], |a, b| {
                model.log_transverse_part(c, a, b)
            })
        };
        let delta = if constant {
            NodeGrid::build(a_range, b_range, [la, lb], |_, _| 0.0)
        } else {
            NodeGrid::build(a_range, b_range, [coarse[0], fine[1]], |a, b| {
                model.log_delta_part(c, a, b)
            })
        };
        let box_center = if model.sys.dim() == 3 {
            TorusPoint::new3(c[0], c[1], 0.0)
        } else {
            TorusPoint::new2(c[0], c[1])
        };
        Ok(Self {
            box_center,
            a_range,
            b_range,
            u_view,
            s_view,
            transverse,
            delta,
            coarse_a: coarse[0],
            mass_grid: Vec::new(),
            grid_shape: [0, 0],
        })
    }

    /// Symmetric chart of radii `(u_radius, s_radius)`.
    pub fn centered(
        model: &ProductModel,
        c: [f64; 2],
        u_radius: f64,
        s_radius: f64,
    ) -> Result<Self> {
        Self::new(model, c, [-u_radius, u_radius], [-s_radius, s_radius])
    }

    /// Smallest chart at `c` containing the polygon, padded by `pad`.
    pub fn around(model: &ProductModel, c: [f64; 2], poly: &[Pt], pad: f64) -> Result<Self> {
        let (a0, a1) = geometry::extent(poly, [1.0, 0.0])
            .ok_or_else(|| Error::Precondition("empty region".into()))?;
        let (b0, b1) = geometry::extent(poly, [0.0, 1.0]).unwrap();
        let (pa, pb) = (pad * (a1 - a0), pad * (b1 - b0));
        Self::new(model, c, [a0 - pa, a1 + pa], [b0 - pb, b1 + pb])
    }

    pub fn center(&self) -> [f64; 2] {
        self.box_center.base
    }

    /// Multiplies the density by `exp(f(a, b))`; `f` must be smooth in `a`.
    pub fn reweighted(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = self.clone();
        out.delta.add(f);
        out.mass_grid.clear();
        out.grid_shape = [0, 0];
        out
    }

    /// `∫_{[a0, a1]} G(·, b) dμ^u_c`: the plaque measure through `c + b v_s`.
    pub fn plaque_mass(&self, a0: f64, a1: f64, b: f64) -> f64 {
        if a1 <= a0 {
            return 0.0;
        }
        let n = ((a1 - a0) / self.coarse_a).ceil().max(1.0) as usize;
        let h = (a1 - a0) / n as f64;
        let mut prev = self.transverse.cumulative(&self.u_view, a0, b);
        let mut total = 0.0;
        for i in 1..=n {
            let x = if i == n { a1 } else { a0 + i as f64 * h };
            let next = self.transverse.cumulative(&self.u_view, x, b);
            let (m0, m1) = (next.0 - prev.0, next.1 - prev.1);
            if m0 > 0.0 {
                total += m0 * self.delta.eval(m1 / m0, b).exp();
            }
            prev = next;
        }
        total
    }

    /// Mass of a convex polygon in chart coordinates.
    pub fn integrate_polygon(&self, poly: &[Pt]) -> Result<f64> {
        let Some((b0, b1)) = geometry::extent(poly, [0.0, 1.0]) else {
            return Ok(0.0);
        };
        if poly.len() < 3 || b1 <= b0 {
            return Ok(0.0);
        }
        let (a0, a1) = geometry::extent(poly, [1.0, 0.0]).unwrap();
        let tol = 1e-12;
        let [ua, ub] = self.u_view.range();
        let [sa, sb] = self.s_view.range();
        if a0 < ua - tol || a1 > ub + tol || b0 < sa - tol || b1 > sb + tol {
            return Err(Error::Precondition(format!(
                "region [{a0:.4e}, {a1:.4e}] × [{b0:.4e}, {b1:.4e}] leaves the chart"
            )));
        }
        let mut kinks: Vec<f64> = poly.iter().map(|p| p[1]).collect();
        kinks.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for (e0, e1, m) in self.s_view.cells_between(b0, b1) {
            let mut lo = e0;
            let first = kinks.partition_point(|&k| k <= e0);
            for &cut in kinks[first..]
                .iter()
                .take_while(|&&k| k < e1)
                .chain([e1].iter())
            {
                if cut <= lo {
                    continue;
                }
                let bm = 0.5 * (lo + cut);
                if let Some((a0, a1)) = geometry::chord(poly, bm) {
                    total += m * (cut - lo) / (e1 - e0) * self.plaque_mass(a0, a1, bm);
                }
                lo = cut;
            }
        }
        Ok(total)
    }

    /// `α_{U,W,A}(w)` for `A` the union of the listed `u`-cells of the mass
    /// grid layout and `w = c + b v_s`.
    pub fn alpha_function(&self, n_u: usize, cells: &[usize], b: f64) -> f64 {
        let h = (self.a_range[1] - self.a_range[0]) / n_u as f64;
        cells
            .iter()
            .map(|&i| {
                let lo = self.a_range[0] + i as f64 * h;
                self.plaque_mass(lo, lo + h, b)
            })
            .sum()
    }

    /// Fills `mass_grid` with the masses of an `n_u × n_s` cell grid.
    pub fn assemble(mut self, n_u: usize, n_s: usize) -> Result<Self> {
        if n_u == 0 || n_s == 0 {
            return Err(Error::Precondition(
                "mass grid needs at least one cell".into(),
            ));
        }
        let ha = (self.a_range[1] - self.a_range[0]) / n_u as f64;
        let hb = (self.b_range[1] - self.b_range[0]) / n_s as f64;
        let mut grid = vec![0.0; n_u * n_s];
        for j in 0..n_s {
            let lo = self.b_range[0] + j as f64 * hb;
            let hi = if j + 1 == n_s {
                self.b_range[1]
            } else {
                lo + hb
            };
            for (e0, e1, m) in self.s_view.cells_between(lo, hi) {
                let bm = 0.5 * (e0 + e1);
                for i in 0..n_u {
                    let a = self.a_range[0] + i as f64 * ha;
                    let a1 = if i + 1 == n_u {
                        self.a_range[1]
                    } else {
                        a + ha
                    };
                    grid[j * n_u + i] += m * self.plaque_mass(a, a1, bm);
                }
            }
        }
        self.mass_grid = grid;
        self.grid_shape = [n_u, n_s];
        Ok(self)
    }

    pub fn total_mass(&self) -> f64 {
        self.mass_grid.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(phi: Potential, k: u32) -> ProductModel {
        ProductModel::new(
            &ModelSystem::cat_map(),
            &phi,
            ProductKind::Equilibrium,
            k,
            1e-12,
        )
        .unwrap()
    }

    #[test]
    fn lebesgue_chart_masses_are_areas() {
        let m = model(Potential::zero(), 12);
        let ch = ProductChart::centered(&m, [0.3, 0.6], 0.05, 0.04)
            .unwrap()
            .assemble(4, 4)
            .unwrap();
        let scale = ch.total_mass() / (0.1 * 0.08);
        for &x in &ch.mass_grid {
            assert!((x / scale - 0.025 * 0.02).abs() < 1e-12);
        }
        let tri = vec![[-0.05, -0.04], [0.05, -0.04], [-0.05, 0.04]];
        let t = ch.integrate_polygon(&tri).unwrap() / scale;
        assert!((t - geometry::area(&tri)).abs() < 1e-8, "{t}");
    }

    #[test]
    fn alpha_function_examples() {
        let m = model(Potential::zero(), 10);
        let ch = ProductChart::centered(&m, [0.1, 0.2], 0.1, 0.1).unwrap();
        assert_eq!(ch.alpha_function(8, &[], 0.01), 0.0);
        let full = ch.alpha_function(8, &(0..8).collect::<Vec<_>>(), 0.01);
        assert!((full - ch.plaque_mass(-0.1, 0.1, 0.01)).abs() < 1e-14);
        let half = ch.alpha_function(8, &[0, 1, 2, 3], 0.01);
        assert!((half / full - 0.5).abs() < 1e-8);
    }

    #[test]
    fn single_cell_mass_is_alpha_integrated() {
        let m = model(Potential::cos_x1(0.2), 10);
        let ch = ProductChart::centered(&m, [0.4, 0.3], 0.05, 0.05)
            .unwrap()
            .assemble(4, 2)
            .unwrap();
        let direct: f64 = ch
            .s_view
            .cells_between(0.0, 0.05)
            .iter()
            .map(|&(e0, e1, mass)| mass * ch.alpha_function(4, &[2], 0.5 * (e0 + e1)))
            .sum();
        assert!((direct - ch.mass_grid[4 + 2]).abs() < 1e-12 * direct);
    }

    #[test]
    fn zoomed_view_matches_direct_view() {
        let m = model(Potential::cos_x1(0.2), 12);
        let fam = m.u_family.as_ref().unwrap();
        let q = [0.37, 0.81];
        let direct = LeafView::transported(fam, q, -0.1, 0.2).unwrap();
        let zoom = LeafView::zoomed(fam, q, -0.1, 0.2, 20_000.0).unwrap();
        assert!(zoom.cells() > 4 * direct.cells());
        let rel = (zoom.total_mass() - direct.total_mass()).abs() / direct.total_mass();
        assert!(rel < 2e-4, "{rel}");
    }

    #[test]
    fn tiny_ranges_starve() {
        let m = model(Potential::zero(), 10);
        let fam = m.u_family.as_ref().unwrap();
        assert!(matches!(
            LeafView::zoomed(fam, [0.1, 0.1], 0.0, 1e-30, VIEW_CELLS),
            Err(Error::Starvation { .. })
        ));
    }
}
