use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ProductChart, ProductKind, ProductModel};
use crate::error::{Error, Result};
use crate::geometry::{self, Pt};
use crate::potentials::birkhoff_sum;
use crate::pressure::linear_fit;
use crate::torusdyn::{ModelSystem, TorusPoint};

/// Largest tolerated relative disagreement of neighbouring charts.
pub const OVERLAP_TOLERANCE: f64 = 5e-3;

/// A lattice of `boxes × boxes` foliation boxes, each split into
/// `cells × cells` coordinate squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverSpec {
    pub boxes: usize,
    pub cells: usize,
    /// Relative padding of each chart beyond its box.
    pub overlap: f64,
}

impl Default for CoverSpec {
    fn default() -> Self {
        Self {
            boxes: 16,
            cells: 4,
            overlap: 0.1,
        }
    }
}

impl CoverSpec {
    pub fn grid(&self) -> usize {
        self.boxes * self.cells
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartRecord {
    pub center: [f64; 2],
    pub a_range: [f64; 2],
    pub b_range: [f64; 2],
    /// Normalized masses of the box squares, row-major in `y`.
    pub cell_masses: Vec<f64>,
}

/// The glued probability measure, stored as masses of a coordinate grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlobalState {
    pub cover: CoverSpec,
    pub kind: ProductKind,
    pub resolution_k: u32,
    pub pressure: f64,
    pub normalization_c: f64,
    pub normalized: bool,
    pub overlap_discrepancy: f64,
    pub charts: Vec<ChartRecord>,
    #[serde(skip)]
    model: Option<Arc<ProductModel>>,
}

/// Corners of the square `[x0, x0+h] × [y0, y0+h]` in eigen-coordinates
/// around `c`, without wrapping.
pub fn square_in_chart(sys: &ModelSystem, c: [f64; 2], x0: f64, y0: f64, h: f64) -> Vec<Pt> {
    [[x0, y0], [x0 + h, y0], [x0 + h, y0 + h], [x0, y0 + h]]
        .iter()
        .map(|p| {
            let (a, b) = sys.eigen_coords([p[0] - c[0], p[1] - c[1]]);
            [a, b]
        })
        .collect()
}

/// Assembles and normalizes the product measure over a lattice cover.
pub fn assemble_global(model: Arc<ProductModel>, cover: CoverSpec) -> Result<GlobalState> {
    if cover.boxes == 0 || cover.cells == 0 || !(cover.overlap >= 0.0) {
        return Err(Error::Config(
            "cover needs boxes ≥ 1, cells ≥ 1, overlap ≥ 0".into(),
        ));
    }
    let nb = cover.boxes;
    let hb = 1.0 / nb as f64;
    let hc = hb / cover.cells as f64;
    let sys = &model.sys;
    let charts: Result<Vec<ChartRecord>> = (0..nb * nb)
        .into_par_iter()
        .map(|idx| {
            let (bi, bj) = (idx % nb, idx / nb);
            let c = [(bi as f64 + 0.5) * hb, (bj as f64 + 0.5) * hb];
            let outline = square_in_chart(sys, c, bi as f64 * hb, bj as f64 * hb, hb);
            let chart = ProductChart::around(&model, c, &outline, cover.overlap)?;
            let mut cell_masses = Vec::with_capacity(cover.cells * cover.cells);
            for j in 0..cover.cells {
                for i in 0..cover.cells {
                    let x0 = bi as f64 * hb + i as f64 * hc;
                    let y0 = bj as f64 * hb + j as f64 * hc;
                    cell_masses
                        .push(chart.integrate_polygon(&square_in_chart(sys, c, x0, y0, hc))?);
                }
            }
            Ok(ChartRecord {
                center: c,
                a_range: chart.a_range,
                b_range: chart.b_range,
                cell_masses,
            })
        })
        .collect();
    let mut charts = charts?;
    let total: f64 = charts.iter().flat_map(|r| r.cell_masses.iter()).sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Precondition(format!(
            "total mass {total} is not positive"
        )));
    }
    let c = 1.0 / total;
    for r in &mut charts {
        for m in &mut r.cell_masses {
            *m *= c;
        }
    }
    let mut state = GlobalState {
        cover,
        kind: model.kind,
        resolution_k: model.resolution_k,
        pressure: model.pressure(),
        normalization_c: c,
        normalized: true,
        overlap_discrepancy: 0.0,
        charts,
        model: Some(model),
    };
    let (disc, i, j) = state.overlap_check()?;
    state.overlap_discrepancy = disc;
    if disc > OVERLAP_TOLERANCE {
        return Err(Error::InconsistentOverlap {
            discrepancy: disc,
            i,
            j,
        });
    }
    Ok(state)
}

impl GlobalState {
    pub fn model(&self) -> Result<&Arc<ProductModel>> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::Precondition("state carries no solved leaf data".into()))
    }

    pub fn grid(&self) -> usize {
        self.cover.grid()
    }

    /// Mass of the grid square `(i, j)`, i.e. `[i/g, (i+1)/g] × [j/g, (j+1)/g]`.
    pub fn cell_mass(&self, i: usize, j: usize) -> f64 {
        let k = self.cover.cells;
        let rec = &self.charts[(j / k) * self.cover.boxes + i / k];
        rec.cell_masses[(j % k) * k + i % k]
    }

    /// All grid masses, row-major in `y`.
    pub fn grid_masses(&self) -> Vec<f64> {
        let g = self.grid();
        (0..g * g)
            .map(|idx| self.cell_mass(idx % g, idx / g))
            .collect()
    }

    /// Coarsens the grid masses to `n × n` (`n` must divide the grid).
    pub fn coarse_masses(&self, n: usize) -> Result<Vec<f64>> {
        let g = self.grid();
        if n == 0 || g % n != 0 {
            return Err(Error::Precondition(format!("{n} does not divide grid {g}")));
        }
        let r = g / n;
        let mut out = vec![0.0; n * n];
        for j in 0..g {
            for i in 0..g {
                out[(j / r) * n + i / r] += self.cell_mass(i, j);
            }
        }
        Ok(out)
    }

    /// Total-variation distance of the grid masses from uniform.
    pub fn lebesgue_tv(&self) -> f64 {
        let g = self.grid();
        let u = 1.0 / (g * g) as f64;
        0.5 * self
            .grid_masses()
            .iter()
            .map(|m| (m - u).abs())
            .sum::<f64>()
    }

    /// A copy with the normalization dropped, for precondition checks.
    pub fn unnormalized(&self) -> Self {
        let mut s = self.clone();
        let c = s.normalization_c;
        for r in &mut s.charts {
            for m in &mut r.cell_masses {
                *m /= c;
            }
        }
        s.normalization_c = 1.0;
        s.normalized = false;
        s
    }

    /// Normalized mass of a convex region given in eigen-coordinates around `c`.
    pub fn region_mass(&self, c: [f64; 2], poly: &[Pt]) -> Result<f64> {
        let model = self.model()?;
        let chart = ProductChart::around(model, c, poly, 0.01)?;
        Ok(self.normalization_c * chart.integrate_polygon(poly)?)
    }

    /// Same, with the density multiplied by `exp(f(a, b))`.
    /// Masses of several pieces of `hull`, integrated in one chart around `hull`.
    pub fn piece_masses(&self, c: [f64; 2], hull: &[Pt], pieces: &[Vec<Pt>]) -> Result<Vec<f64>> {
        let model = self.model()?;
        let chart = ProductChart::around(model, c, hull, 0.01)?;
        pieces
            .iter()
            .map(|p| Ok(self.normalization_c * chart.integrate_polygon(p)?))
            .collect()
    }

    pub fn weighted_region_mass(
        &self,
        c: [f64; 2],
        poly: &[Pt],
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<f64> {
        let model = self.model()?;
        let chart = ProductChart::around(model, c, poly, 0.01)?.reweighted(f);
        Ok(self.normalization_c * chart.integrate_polygon(poly)?)
    }

    /// Recomputes one square of every box in the chart of its right-hand
    /// neighbour; returns the worst relative discrepancy and its grid cell.
    fn overlap_check(&self) -> Result<(f64, usize, usize)> {
        let model = self.model()?;
        let sys = &model.sys;
        let nb = self.cover.boxes;
        let k = self.cover.cells;
        let hb = 1.0 / nb as f64;
        let hc = hb / k as f64;
        let worst = (0..nb * nb)
            .into_par_iter()
            .map(|idx| {
                let (bi, bj) = (idx % nb, idx / nb);
                let (i, j) = (bi * k + k - 1, bj * k + k / 2);
                let (x0, y0) = (i as f64 * hc, j as f64 * hc);
                let c = [(bi as f64 + 1.5) * hb, (bj as f64 + 0.5) * hb];
                let poly = square_in_chart(sys, c, x0, y0, hc);
                let m = self.region_mass(c, &poly)?;
                let own = self.cell_mass(i, j);
                Ok(((m - own).abs() / own, i, j))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(worst
            .into_iter()
            .fold((0.0, 0, 0), |acc, x| if x.0 > acc.0 { x } else { acc }))
    }

    /// `sup_A |μ(f⁻¹A) − μ(A)| / μ(A)` over the grid squares.
    pub fn invariance_residual(&self) -> Result<f64> {
        if !self.normalized {
            return Err(Error::Precondition(
                "invariance needs a normalized state".into(),
            ));
        }
        let model = self.model()?;
        let sys = &model.sys;
        let g = self.grid();
        let h = 1.0 / g as f64;
        let res = (0..g * g)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx % g, idx / g);
                let mid = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
                let pre = sys.base_backward(mid);
                let poly: Vec<Pt> = square_in_chart(sys, mid, i as f64 * h, j as f64 * h, h)
                    .iter()
                    .map(|p| [p[0] / sys.mu_u, p[1] / sys.mu_s])
                    .collect();
                let m = self.region_mass(pre, &poly)?;
                let own = self.cell_mass(i, j);
                Ok((m - own).abs() / own)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(res.into_iter().fold(0.0, f64::max))
    }

    /// Bowen ball `B(x, ε, n)` in eigen-coordinates around `x`.
    pub fn bowen_polygon(sys: &ModelSystem, epsilon: f64, n: usize) -> Vec<Pt> {
        let r = 4.0 * epsilon;
        let mut poly = geometry::rect(-r, r, -r, r);
        let (mut gu, mut gs) = (1.0, 1.0);
        for _ in 0..n {
            for i in 0..2 {
                poly = geometry::clip_slab(
                    &poly,
                    [gu * sys.v_u[i], gs * sys.v_s[i]],
                    -epsilon,
                    epsilon,
                );
            }
            gu *= sys.mu_u;
            gs *= sys.mu_s;
        }
        poly
    }

    /// `r_n = log μ(B(x, ε, n)) − (S_nφ(x) − nP)` with the fitted slope.
    pub fn gibbs_ratio(
        &self,
        x: &TorusPoint,
        epsilon: f64,
        n_values: &[usize],
    ) -> Result<GibbsReport> {
        let model = self.model()?;
        let sys = &model.sys;
        if sys.dim() != 2 {
            return Err(Error::Precondition(
                "Bowen-ball masses are computed on the base".into(),
            ));
        }
        if !(epsilon > 0.0 && epsilon <= 0.1) {
            return Err(Error::Precondition(format!(
                "epsilon {epsilon} outside (0, 0.1]"
            )));
        }
        let mut distinct = n_values.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < 2 || distinct[0] == 0 {
            return Err(Error::DegenerateFit("need at least two positive n".into()));
        }
        let p = self.pressure;
        let r: Vec<f64> = n_values
            .par_iter()
            .map(|&n| {
                let poly = Self::bowen_polygon(sys, epsilon, n);
                let m = self.region_mass(x.base, &poly)?;
                Ok(m.ln() - (birkhoff_sum(sys, &model.phi, x, n) - n as f64 * p))
            })
            .collect::<Result<_>>()?;
        let xs: Vec<f64> = n_values.iter().map(|&n| n as f64).collect();
        let (slope, _, _) = linear_fit(&xs, &r)?;
        let (lo, hi) = r
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        Ok(GibbsReport {
            point: x.base,
            epsilon,
            n_values: n_values.to_vec(),
            r,
            k_hat: -slope,
            range: hi - lo,
            c_epsilon: lo.abs().max(hi.abs()),
        })
    }

    /// Compares plaque conditionals of the state with `ν^u` on the plaque.
    pub fn conditional_density_compare(&self, spec: &PlaquePartition) -> Result<ConditionalReport> {
        let model = self.model()?;
        if spec.cells < 2 || !(spec.thickness > 0.0) {
            return Err(Error::Precondition(
                "partition needs ≥ 2 cells and positive thickness".into(),
            ));
        }
        let c = spec.center;
        let r = spec.u_radius;
        let (b0, h) = (spec.b0, spec.thickness);
        let chart = ProductChart::new(model, c, [-r, r], [b0 - h, b0 + h])?;
        let step = 2.0 * r / spec.cells as f64;
        let edges: Vec<f64> = (0..=spec.cells).map(|i| -r + i as f64 * step).collect();
        let cond: Vec<f64> = edges
            .windows(2)
            .map(|e| chart.integrate_polygon(&geometry::rect(e[0], e[1], b0 - h, b0 + h)))
            .collect::<Result<_>>()?;
        let w = model.u_kernel.leaf_point(c, 0.0, b0);
        let w = [crate::torusdyn::wrap01(w[0]), crate::torusdyn::wrap01(w[1])];
        let k = &model.u_kernel;
        let nu: Vec<f64> = match &model.u_family {
            Some(fam) => edges
                .windows(2)
                .map(|e| fam.integrate(w, e[0], e[1], |t| k.log_delta(w, t)))
                .collect::<Result<_>>()?,
            None => edges
                .windows(2)
                .map(|e| simpson(|t| k.log_delta(w, t).exp(), e[0], e[1], 64))
                .collect(),
        };
        let arc = vec![step; spec.cells];
        let normalize = |v: &[f64]| {
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect::<Vec<_>>()
        };
        let (cond, nu, arc) = (normalize(&cond), normalize(&nu), normalize(&arc));
        let sup = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x / y - 1.0).abs())
                .fold(0.0, f64::max)
        };
        Ok(ConditionalReport {
            deviation: sup(&cond, &nu),
            arc_length_deviation: sup(&cond, &arc),
            conditional: cond,
            reference: nu,
        })
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsReport {
    pub point: [f64; 2],
    pub epsilon: f64,
    pub n_values: Vec<usize>,
    pub r: Vec<f64>,
    pub k_hat: f64,
    pub range: f64,
    /// Uniform bound on `|r_n|` over the tested `n`.
    pub c_epsilon: f64,
}

/// Thin rectangles `[a_i, a_{i+1}] × [b0 − h, b0 + h]` subordinate to the
/// plaque through `center + b0 v_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaquePartition {
    pub center: [f64; 2],
    pub u_radius: f64,
    pub cells: usize,
    pub b0: f64,
    pub thickness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalReport {
    pub deviation: f64,
    pub arc_length_deviation: f64,
    pub conditional: Vec<f64>,
    pub reference: Vec<f64>,
}

/// Relative sup gap between the mass grids of the box `[−R_u, R_u] × [−R_s, R_s]`
/// at `c` computed from the slice through `c` and from the slice through
/// `c + a0 v_u`.
pub fn slice_independence_gap(
    model: &ProductModel,
    c: [f64; 2],
    radii: [f64; 2],
    shape: [usize; 2],
    a0: f64,
) -> Result<f64> {
    let [ru, rs] = radii;
    let first = ProductChart::new(model, c, [-ru, ru], [-rs, rs])?.assemble(shape[0], shape[1])?;
    if a0 == 0.0 {
        return Ok(0.0);
    }
    let c2 = model.u_kernel.leaf_point(c, a0, 0.0);
    let second = ProductChart::new(model, c2, [-ru - a0, ru - a0], [-rs, rs])?
        .assemble(shape[0], shape[1])?;
    Ok(first
        .mass_grid
        .iter()
        .zip(&second.mass_grid)
        .map(|(x, y)| (x - y).abs() / x)
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Potential;

    fn state(phi: Potential, k: u32, cover: CoverSpec) -> GlobalState {
        let m = ProductModel::new(
            &ModelSystem::cat_map(),
            &phi,
            ProductKind::Equilibrium,
            k,
            1e-12,
        )
        .unwrap();
        assemble_global(m.shared(), cover).unwrap()
    }

    #[test]
    fn zero_potential_assembles_lebesgue() {
        let cover = CoverSpec {
            boxes: 4,
            cells: 2,
            overlap: 0.1,
        };
        let s = state(Potential::zero(), 10, cover);
        assert!(s.lebesgue_tv() < 1e-9, "{}", s.lebesgue_tv());
        assert!((s.grid_masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s.invariance_residual().unwrap() < 1e-9);
        assert!(matches!(
            s.unnormalized().invariance_residual(),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn gibbs_rejects_single_n() {
        let cover = CoverSpec {
            boxes: 4,
            cells: 1,
            overlap: 0.1,
        };
        let s = state(Potential::zero(), 8, cover);
        let x = TorusPoint::new2(0.3, 0.3);
        assert!(matches!(
            s.gibbs_ratio(&x, 0.1, &[1]),
            Err(Error::DegenerateFit(_))
        ));
        let g = s.gibbs_ratio(&x, 0.1, &[2, 3, 4, 5]).unwrap();
        assert!(g.range < 0.1, "{g:?}");
    }

    #[test]
    fn slice_gap_vanishes_for_same_slice_and_constants() {
        let sys = ModelSystem::cat_map();
        let m = ProductModel::new(
            &sys,
            &Potential::constant(0.4),
            ProductKind::Equilibrium,
            10,
            1e-12,
        )
        .unwrap();
        assert_eq!(
            slice_independence_gap(&m, [0.2, 0.3], [0.05, 0.05], [4, 4], 0.0).unwrap(),
            0.0
        );
        let g = slice_independence_gap(&m, [0.2, 0.3], [0.05, 0.05], [4, 4], 0.03).unwrap();
        assert!(g < 1e-10, "{g}");
    }
}
