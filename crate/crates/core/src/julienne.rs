//! Dynamically scaled product neighbourhoods and density-point diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{clip_slab, rect, Pt};
use crate::product_states::GlobalState;
use crate::torusdyn::{ModelSystem, TorusPoint};

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_SIGMA: f64 = 0.5;
pub const MAX_EPSILON: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JulienneSpec {
    pub x: TorusPoint,
    pub n: usize,
    pub epsilon: f64,
    pub sigma: f64,
}

impl JulienneSpec {
    pub fn new(x: TorusPoint, n: usize) -> Self {
        Self {
            x,
            n,
            epsilon: DEFAULT_EPSILON,
            sigma: DEFAULT_SIGMA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Precondition(format!("epsilon {} ≤ 0", self.epsilon)));
        }
        if self.epsilon > MAX_EPSILON {
            return Err(Error::ChartOverflow {
                radius: self.epsilon,
                max: MAX_EPSILON,
            });
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::Precondition(format!(
                "sigma {} outside (0, 1)",
                self.sigma
            )));
        }
        Ok(())
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JulienneKind {
    U,
    S,
    C,
    Cu,
    Scu,
}

impl JulienneKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "u" => Ok(Self::U),
            "s" => Ok(Self::S),
            "c" => Ok(Self::C),
            "cu" => Ok(Self::Cu),
            "scu" => Ok(Self::Scu),
            _ => Err(Error::Config(format!("unknown julienne kind `{s}`"))),
        }
    }
}

/// A julienne as parameter half-widths around its base point.
///
/// Points are reached by moving `a` along the unstable leaf, then `c` along
/// the center circle, then `b` along the stable leaf; center offsets of the
/// leaves are added along the way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JulienneRegion {
    pub kind: JulienneKind,
    pub center: TorusPoint,
    pub u_extent: f64,
    pub s_extent: f64,
    /// `None` on `T^2`.
    pub c_extent: Option<f64>,
}

impl JulienneRegion {
    /// Whether all extents are at most `factor` times those of `other`.
    pub fn nested_in(&self, other: &JulienneRegion, factor: f64) -> bool {
        let c_ok = match (self.c_extent, other.c_extent) {
            (Some(a), Some(b)) => a <= factor * b,
            (None, None) => true,
            _ => false,
        };
        self.center == other.center
            && self.u_extent <= factor * other.u_extent
            && self.s_extent <= factor * other.s_extent
            && c_ok
    }

    pub fn point_at(&self, sys: &ModelSystem, a: f64, c: f64, b: f64) -> TorusPoint {
        let x = self.center;
        let three = x.center.is_some();
        let du = if three {
            sys.unstable_offset(x.base, a)
        } else {
            0.0
        };
        let y = x.shifted([a * sys.v_u[0], a * sys.v_u[1]], du + c);
        let ds = if three {
            sys.stable_offset(y.base, b)
        } else {
            0.0
        };
        y.shifted([b * sys.v_s[0], b * sys.v_s[1]], ds)
    }

    /// Base projection as a rectangle in eigen-coordinates around the center.
    pub fn base_polygon(&self) -> Vec<Pt> {
        rect(-self.u_extent, self.u_extent, -self.s_extent, self.s_extent)
    }

    /// Length of every center fiber of the region.
    pub fn fiber_length(&self) -> f64 {
        self.c_extent.map_or(1.0, |c| (2.0 * c).min(1.0))
    }
}

pub fn julienne(
    sys: &ModelSystem,
    spec: &JulienneSpec,
    kind: JulienneKind,
) -> Result<JulienneRegion> {
    spec.validate()?;
    if spec.x.dim() != sys.dim() {
        return Err(Error::InvalidPoint(format!(
            "point of dimension {} for a system of dimension {}",
            spec.x.dim(),
            sys.dim()
        )));
    }
    let three = sys.dim() == 3;
    if kind == JulienneKind::C && !three {
        return Err(Error::InvalidSystem(
            "the center julienne is trivial on T^2".into(),
        ));
    }
    let leaf = spec.epsilon * sys.lambda.powi(-(spec.n as i32));
    let ball = spec.sigma.powi(spec.n as i32).min(0.5);
    let (u, s, c) = match kind {
        JulienneKind::U => (leaf, 0.0, 0.0),
        JulienneKind::S => (0.0, leaf, 0.0),
        JulienneKind::C => (0.0, 0.0, ball),
        JulienneKind::Cu => (leaf, 0.0, ball),
        JulienneKind::Scu => (leaf, leaf, ball),
    };
    Ok(JulienneRegion {
        kind,
        center: spec.x,
        u_extent: u,
        s_extent: s,
        c_extent: three.then_some(c),
    })
}

/// A union of cells of a regular grid on the base torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSet {
    pub grid: usize,
    /// Row-major in `y`.
    pub mask: Vec<bool>,
}

impl CellSet {
    pub fn from_fn(grid: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mask = (0..grid * grid)
            .map(|idx| f(idx % grid, idx / grid))
            .collect();
        Self { grid, mask }
    }

    pub fn full(grid: usize) -> Self {
        Self::from_fn(grid, |_, _| true)
    }

    pub fn empty(grid: usize) -> Self {
        Self::from_fn(grid, |_, _| false)
    }

    /// Cells whose centers have `x₁ ∈ [lo, hi)`.
    pub fn band(grid: usize, lo: f64, hi: f64) -> Self {
        Self::from_fn(grid, |i, _| {
            let x = (i as f64 + 0.5) / grid as f64;
            x >= lo && x < hi
        })
    }

    pub fn contains_cell(&self, i: i64, j: i64) -> bool {
        let g = self.grid as i64;
        self.mask[(j.rem_euclid(g) * g + i.rem_euclid(g)) as usize]
    }
}

/// `μ(J^{scu}_n(x))`.
pub fn julienne_measure(state: &GlobalState, spec: &JulienneSpec) -> Result<f64> {
    let sys = &state.model()?.sys;
    let region = julienne(sys, spec, JulienneKind::Scu)?;
    let m = state.region_mass(region.center.base, &region.base_polygon())?;
    if !(m > 0.0) {
        return Err(Error::Starvation {
            found: 0,
            needed: 1,
        });
    }
    Ok(m * region.fiber_length())
}

/// `μ(X ∩ J^{scu}_n(x)) / μ(J^{scu}_n(x))` for a set `X` constant along the
/// center direction.
pub fn density_ratio(state: &GlobalState, set: &CellSet, spec: &JulienneSpec) -> Result<f64> {
    if set.grid == 0 || set.mask.len() != set.grid * set.grid {
        return Err(Error::Precondition(
            "cell set mask does not match its grid".into(),
        ));
    }
    let whole = julienne_measure(state, spec)?;
    if set.mask.iter().all(|&b| b) {
        return Ok(1.0);
    }
    if !set.mask.iter().any(|&b| b) {
        return Ok(0.0);
    }
    let sys = &state.model()?.sys;
    let region = julienne(sys, spec, JulienneKind::Scu)?;
    let c = region.center.base;
    let poly = region.base_polygon();
    let h = 1.0 / set.grid as f64;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &poly {
        let q = sys.from_eigen(p[0], p[1]);
        for d in 0..2 {
            lo[d] = lo[d].min(c[d] + q[d]);
            hi[d] = hi[d].max(c[d] + q[d]);
        }
    }
    let normal = |d: usize| [sys.v_u[d], sys.v_s[d]];
    let mut pieces = Vec::new();
    for j in (lo[1] / h).floor() as i64..=(hi[1] / h).floor() as i64 {
        for i in (lo[0] / h).floor() as i64..=(hi[0] / h).floor() as i64 {
            if !set.contains_cell(i, j) {
                continue;
            }
            let (x0, y0) = (i as f64 * h - c[0], j as f64 * h - c[1]);
            let piece = clip_slab(
                &clip_slab(&poly, normal(0), x0, x0 + h),
                normal(1),
                y0,
                y0 + h,
            );
            if piece.len() >= 3 {
                pieces.push(piece);
            }
        }
    }
    let inside: f64 = state.piece_masses(c, &poly, &pieces)?.iter().sum();
    Ok((inside * region.fiber_length() / whole).clamp(0.0, 1.0))
}

/// `(n, ratio)` for each `n` in `ns`.
pub fn density_trace(
    state: &GlobalState,
    set: &CellSet,
    spec: &JulienneSpec,
    ns: &[usize],
) -> Result<Vec<(usize, f64)>> {
    ns.iter()
        .map(|&n| Ok((n, density_ratio(state, set, &spec.with_n(n))?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cat_map_extents_scale_exactly() {
        let sys = ModelSystem::cat_map();
        let x = TorusPoint::new2(0.3, 0.4);
        let r0 = julienne(&sys, &JulienneSpec::new(x, 0), JulienneKind::U).unwrap();
        assert_eq!(r0.u_extent, 0.1);
        for n in 1..8 {
            let r = julienne(&sys, &JulienneSpec::new(x, n), JulienneKind::Scu).unwrap();
            let want = 0.1 * sys.lambda.powi(-(n as i32));
            assert!((r.u_extent - want).abs() < 1e-12 && (r.s_extent - want).abs() < 1e-12);
            assert_eq!(r.c_extent, None);
        }
        assert!(julienne(&sys, &JulienneSpec::new(x, 1), JulienneKind::C).is_err());
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let sys = ModelSystem::cat_map();
        let mut spec = JulienneSpec::new(TorusPoint::new2(0.3, 0.4), 2);
        spec.epsilon = 0.3;
        assert!(matches!(
            julienne(&sys, &spec, JulienneKind::U),
            Err(Error::ChartOverflow { .. })
        ));
        spec.epsilon = 0.1;
        spec.sigma = 1.0;
        assert!(julienne(&sys, &spec, JulienneKind::U).is_err());
    }

    #[test]
    fn skew_center_ball_at_zero_is_clipped() {
        let sys = ModelSystem::default_skew();
        let x = TorusPoint::new3(0.1, 0.2, 0.3);
        let r = julienne(&sys, &JulienneSpec::new(x, 0), JulienneKind::C).unwrap();
        assert_eq!(r.c_extent, Some(0.5));
        assert_eq!(r.fiber_length(), 1.0);
    }

    #[test]
    fn skew_boundary_points_land_on_scaled_leaves() {
        use crate::torusdyn::{circle_dist, torus_dist};
        let sys = ModelSystem::default_skew();
        let x = TorusPoint::new3(0.31, 0.72, 0.15);
        let n = 5;
        let r = julienne(&sys, &JulienneSpec::new(x, n), JulienneKind::Scu).unwrap();
        assert!((r.u_extent - 0.1 * sys.lambda.powi(-5)).abs() < 1e-12);
        assert!((r.s_extent - 0.1 * sys.lambda.powi(-5)).abs() < 1e-12);
        assert_eq!(r.c_extent, Some(0.5f64.powi(5)));
        for sign in [1.0, -1.0] {
            let fx = sys.apply(&x, n as i64);
            let p = sys.apply(&r.point_at(&sys, sign * r.u_extent, 0.0, 0.0), n as i64);
            let (a, b) = sys.local_coords(fx.base, p.base);
            assert!((a.abs() - 0.1).abs() < 1e-10 && b.abs() < 1e-10);
            let want = fx.center.unwrap() + sys.unstable_offset(fx.base, a);
            assert!(circle_dist(p.center.unwrap(), want) < 1e-9);

            let bx = sys.apply(&x, -(n as i64));
            let q = sys.apply(&r.point_at(&sys, 0.0, 0.0, sign * r.s_extent), -(n as i64));
            let (a, b) = sys.local_coords(bx.base, q.base);
            assert!((b.abs() - 0.1).abs() < 1e-10 && a.abs() < 1e-10);
            let want = bx.center.unwrap() + sys.stable_offset(bx.base, b);
            assert!(circle_dist(q.center.unwrap(), want) < 1e-9);

            let c = r.point_at(&sys, 0.0, sign * r.c_extent.unwrap(), 0.0);
            assert!((torus_dist(&c, &x) - 0.5f64.powi(5)).abs() < 1e-12);
        }
    }

    #[test]
    fn nesting() {
        let sys = ModelSystem::default_skew();
        let x = TorusPoint::new3(0.1, 0.2, 0.3);
        for n in 0..10 {
            let a = julienne(&sys, &JulienneSpec::new(x, n), JulienneKind::Scu).unwrap();
            let b = julienne(&sys, &JulienneSpec::new(x, n + 1), JulienneKind::Scu).unwrap();
            assert!(b.nested_in(&a, 1.0) && !a.nested_in(&b, 1.0));
        }
    }

    #[test]
    fn band_cells() {
        let b = CellSet::band(4, 0.0, 0.5);
        assert!(b.contains_cell(0, 3) && b.contains_cell(1, 0) && !b.contains_cell(2, 0));
        assert!(b.contains_cell(-4, 7));
    }
}
