//! Explicit center isometries on tori.
//!
//! Two model families are provided: hyperbolic toral automorphisms of `T^2`
//! (`E^c = 0`) and skew products `(x, θ) ↦ (Ax, θ + τ(x))` on `T^3` whose
//! center direction is the fibre circle. Because the base is linear every
//! invariant foliation has a closed form: unstable and stable leaves are
//! lines in the base directions `v_u`, `v_s` lifted to the fibre by a
//! convergent center-offset series, and center leaves are the fibres.
//!
//! Leaves are parametrized by base arc length. For the skew product this is
//! arc length for the adapted metric that measures `E^u`/`E^s` vectors by
//! their base component and the fibre by `dθ`, which makes `f` an exact
//! isometry on `E^c`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trig::TrigPoly;

/// Largest leaf radius for which a chart is considered valid.
pub const CHART_SCALE: f64 = 0.5;
/// Largest admissible Bowen-ball radius.
pub const INJECTIVITY_SCALE: f64 = 0.25;
/// Default truncation order of the center-offset series.
pub const DEFAULT_SERIES_ORDER: usize = 60;

/// Reduces a real number into `[0, 1)`.
#[inline]
pub fn wrap01(v: f64) -> f64 {
    let r = v.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Representative of `v` mod 1 in `[-1/2, 1/2)`.
#[inline]
pub fn min_image(v: f64) -> f64 {
    let r = wrap01(v + 0.5) - 0.5;
    if r < -0.5 {
        r + 1.0
    } else {
        r
    }
}

#[inline]
pub fn circle_dist(a: f64, b: f64) -> f64 {
    min_image(a - b).abs()
}

/// A point of `T^2` or `T^3`; the center coordinate comes last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub base: [f64; 2],
    pub center: Option<f64>,
}

impl TorusPoint {
    pub fn new2(x: f64, y: f64) -> Self {
        Self {
            base: [wrap01(x), wrap01(y)],
            center: None,
        }
    }

    pub fn new3(x: f64, y: f64, theta: f64) -> Self {
        Self {
            base: [wrap01(x), wrap01(y)],
            center: Some(wrap01(theta)),
        }
    }

    pub fn from_coords(coords: &[f64]) -> Result<Self> {
        match coords {
            [x, y] => Ok(Self::new2(*x, *y)),
            [x, y, t] => Ok(Self::new3(*x, *y, *t)),
            _ => Err(Error::InvalidPoint(format!(
                "expected 2 or 3 coordinates, got {}",
                coords.len()
            ))),
        }
    }

    pub fn dim(&self) -> usize {
        if self.center.is_some() {
            3
        } else {
            2
        }
    }

    pub fn coords(&self) -> Vec<f64> {
        let mut v = self.base.to_vec();
        if let Some(t) = self.center {
            v.push(t);
        }
        v
    }

    /// Adds a base displacement and (optionally) a center displacement.
    pub fn shifted(&self, d: [f64; 2], dc: f64) -> Self {
        Self {
            base: [wrap01(self.base[0] + d[0]), wrap01(self.base[1] + d[1])],
            center: self.center.map(|t| wrap01(t + dc)),
        }
    }
}

/// Max over coordinate-wise circle distances.
pub fn torus_dist(p: &TorusPoint, q: &TorusPoint) -> f64 {
    let mut d = circle_dist(p.base[0], q.base[0]).max(circle_dist(p.base[1], q.base[1]));
    if let (Some(a), Some(b)) = (p.center, q.center) {
        d = d.max(circle_dist(a, b));
    }
    d
}

/// An explicit center isometry: hyperbolic base automorphism plus an
/// optional circle cocycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSystem {
    pub base_matrix: [[i64; 2]; 2],
    pub inverse_matrix: [[i64; 2]; 2],
    pub center_cocycle: Option<TrigPoly>,
    /// Leading eigenvalue modulus, `> 1`.
    pub lambda: f64,
    /// Signed eigenvalues on `v_u` and `v_s`.
    pub mu_u: f64,
    pub mu_s: f64,
    pub v_u: [f64; 2],
    pub v_s: [f64; 2],
    /// Rows of `[v_u v_s]⁻¹`: `d = (dual_u·d) v_u + (dual_s·d) v_s`.
    pub dual_u: [f64; 2],
    pub dual_s: [f64; 2],
    pub series_order: usize,
}

fn unit_eigenvector(m: [[i64; 2]; 2], mu: f64) -> [f64; 2] {
    let (a, b, c, d) = (
        m[0][0] as f64,
        m[0][1] as f64,
        m[1][0] as f64,
        m[1][1] as f64,
    );
    let v = if b.abs() >= c.abs() && b != 0.0 {
        [b, mu - a]
    } else if c != 0.0 {
        [mu - d, c]
    } else {
        // diagonal matrix
        if (mu - a).abs() < (mu - d).abs() {
            [1.0, 0.0]
        } else {
            [0.0, 1.0]
        }
    };
    let n = v[0].hypot(v[1]);
    let mut v = [v[0] / n, v[1] / n];
    let lead = if v[0].abs() > 1e-14 { v[0] } else { v[1] };
    if lead < 0.0 {
        v = [-v[0], -v[1]];
    }
    v
}

impl ModelSystem {
    /// Hyperbolic automorphism of `T^2` with no center.
    pub fn from_matrix(m: [[i64; 2]; 2]) -> Result<Self> {
        Self::build(m, None, DEFAULT_SERIES_ORDER)
    }

    /// Arnold's cat map `[[2,1],[1,1]]`.
    pub fn cat_map() -> Self {
        Self::from_matrix([[2, 1], [1, 1]]).expect("cat map is hyperbolic")
    }

    /// Skew product over the cat map with the given cocycle.
    pub fn skew_product(cocycle: TrigPoly) -> Self {
        Self::build([[2, 1], [1, 1]], Some(cocycle), DEFAULT_SERIES_ORDER)
            .expect("cat map is hyperbolic")
    }

    /// Skew product with the default cocycle `0.3 cos(2π x₁)`.
    pub fn default_skew() -> Self {
        Self::skew_product(TrigPoly::cos_x1(0.3))
    }

    pub fn build(m: [[i64; 2]; 2], cocycle: Option<TrigPoly>, series_order: usize) -> Result<Self> {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let tr = m[0][0] + m[1][1];
        if det.abs() != 1 {
            return Err(Error::InvalidSystem(format!("|det| = {} ≠ 1", det.abs())));
        }
        if tr.abs() <= 2 {
            return Err(Error::InvalidSystem(format!(
                "|trace| = {} is not > 2, matrix is not hyperbolic",
                tr.abs()
            )));
        }
        if series_order == 0 {
            return Err(Error::InvalidSystem("series_order must be ≥ 1".into()));
        }
        let trf = tr as f64;
        let disc = (trf * trf - 4.0 * det as f64).sqrt();
        let (mu_u, mu_s) = if tr > 0 {
            ((trf + disc) / 2.0, (trf - disc) / 2.0)
        } else {
            ((trf - disc) / 2.0, (trf + disc) / 2.0)
        };
        let v_u = unit_eigenvector(m, mu_u);
        let v_s = unit_eigenvector(m, mu_s);
        let dv = v_u[0] * v_s[1] - v_s[0] * v_u[1];
        let dual_u = [v_s[1] / dv, -v_s[0] / dv];
        let dual_s = [-v_u[1] / dv, v_u[0] / dv];
        let inverse_matrix = [
            [m[1][1] * det, -m[0][1] * det],
            [-m[1][0] * det, m[0][0] * det],
        ];
        Ok(Self {
            base_matrix: m,
            inverse_matrix,
            center_cocycle: cocycle,
            lambda: mu_u.abs(),
            mu_u,
            mu_s,
            v_u,
            v_s,
            dual_u,
            dual_s,
            series_order,
        })
    }

    pub fn with_series_order(mut self, n: usize) -> Self {
        self.series_order = n.max(1);
        self
    }

    pub fn dim(&self) -> usize {
        if self.center_cocycle.is_some() {
            3
        } else {
            2
        }
    }

    /// The system `f⁻¹`: base `A⁻¹`, cocycle `x ↦ −τ(A⁻¹x)`. Its unstable
    /// direction is the stable direction of `f`.
    pub fn reversed(&self) -> Self {
        let cocycle = self
            .center_cocycle
            .as_ref()
            .map(|t| t.compose_linear(self.inverse_matrix).scaled(-1.0));
        let mut r = Self::build(self.inverse_matrix, cocycle, self.series_order)
            .expect("inverse of a hyperbolic automorphism is hyperbolic");
        // keep the eigenvector orientation of the forward system
        if r.v_u[0] * self.v_s[0] + r.v_u[1] * self.v_s[1] < 0.0 {
            r.v_u = [-r.v_u[0], -r.v_u[1]];
            r.dual_u = [-r.dual_u[0], -r.dual_u[1]];
        }
        if r.v_s[0] * self.v_u[0] + r.v_s[1] * self.v_u[1] < 0.0 {
            r.v_s = [-r.v_s[0], -r.v_s[1]];
            r.dual_s = [-r.dual_s[0], -r.dual_s[1]];
        }
        r
    }

    #[inline]
    pub fn mat_vec(m: &[[i64; 2]; 2], x: [f64; 2]) -> [f64; 2] {
        [
            m[0][0] as f64 * x[0] + m[0][1] as f64 * x[1],
            m[1][0] as f64 * x[0] + m[1][1] as f64 * x[1],
        ]
    }

    #[inline]
    pub fn base_forward(&self, x: [f64; 2]) -> [f64; 2] {
        let y = Self::mat_vec(&self.base_matrix, x);
        [wrap01(y[0]), wrap01(y[1])]
    }

    #[inline]
    pub fn base_backward(&self, x: [f64; 2]) -> [f64; 2] {
        let y = Self::mat_vec(&self.inverse_matrix, x);
        [wrap01(y[0]), wrap01(y[1])]
    }

    #[inline]
    pub fn cocycle(&self, x: [f64; 2]) -> f64 {
        self.center_cocycle.as_ref().map_or(0.0, |t| t.eval(x))
    }

    pub fn forward(&self, p: &TorusPoint) -> TorusPoint {
        TorusPoint {
            base: self.base_forward(p.base),
            center: p.center.map(|t| wrap01(t + self.cocycle(p.base))),
        }
    }

    pub fn backward(&self, p: &TorusPoint) -> TorusPoint {
        let base = self.base_backward(p.base);
        TorusPoint {
            base,
            center: p.center.map(|t| wrap01(t - self.cocycle(base))),
        }
    }

    /// `f^k(p)`; negative `k` iterates the inverse.
    pub fn apply(&self, p: &TorusPoint, k: i64) -> TorusPoint {
        let mut q = *p;
        if k >= 0 {
            for _ in 0..k {
                q = self.forward(&q);
            }
        } else {
            for _ in 0..(-k) {
                q = self.backward(&q);
            }
        }
        q
    }

    /// Eigen-coordinates `(a, b)` of a base displacement, `d = a v_u + b v_s`.
    #[inline]
    pub fn eigen_coords(&self, d: [f64; 2]) -> (f64, f64) {
        (
            self.dual_u[0] * d[0] + self.dual_u[1] * d[1],
            self.dual_s[0] * d[0] + self.dual_s[1] * d[1],
        )
    }

    #[inline]
    pub fn from_eigen(&self, a: f64, b: f64) -> [f64; 2] {
        [
            a * self.v_u[0] + b * self.v_s[0],
            a * self.v_u[1] + b * self.v_s[1],
        ]
    }

    /// Eigen-coordinates of the minimal-image displacement from `p` to `q`.
    pub fn local_coords(&self, p: [f64; 2], q: [f64; 2]) -> (f64, f64) {
        self.eigen_coords([min_image(q[0] - p[0]), min_image(q[1] - p[1])])
    }

    fn center_lipschitz(&self) -> f64 {
        self.center_cocycle
            .as_ref()
            .map_or(0.0, TrigPoly::lipschitz_max_norm)
    }

    /// Bound on the omitted tail of a center-offset series for a leaf
    /// displacement of arc length `t`.
    pub fn offset_tail_bound(&self, t: f64) -> f64 {
        let n = self.series_order as f64;
        self.center_lipschitz() * t.abs() * self.lambda.powf(-n) / (self.lambda - 1.0)
    }

    /// Center offset of the unstable leaf through base point `x` at
    /// parameter `t`: `Σ_{k≥1} [τ(A^{-k}(x + t v_u)) − τ(A^{-k}x)]`.
    pub fn unstable_offset(&self, x: [f64; 2], t: f64) -> f64 {
        let Some(tau) = self.center_cocycle.as_ref() else {
            return 0.0;
        };
        let mut xb = x;
        let mut scale = t;
        let mut sum = 0.0;
        for _ in 0..self.series_order {
            xb = self.base_backward(xb);
            scale /= self.mu_u;
            let y = [xb[0] + scale * self.v_u[0], xb[1] + scale * self.v_u[1]];
            sum += tau.eval(y) - tau.eval(xb);
        }
        sum
    }

    /// Center offset of the stable leaf through `x` at parameter `t`:
    /// `−Σ_{k≥0} [τ(A^k(x + t v_s)) − τ(A^k x)]`.
    pub fn stable_offset(&self, x: [f64; 2], t: f64) -> f64 {
        let Some(tau) = self.center_cocycle.as_ref() else {
            return 0.0;
        };
        let mut xb = x;
        let mut scale = t;
        let mut sum = 0.0;
        for _ in 0..self.series_order {
            let y = [xb[0] + scale * self.v_s[0], xb[1] + scale * self.v_s[1]];
            sum += tau.eval(y) - tau.eval(xb);
            xb = self.base_forward(xb);
            scale *= self.mu_s;
        }
        -sum
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LeafType {
    #[serde(rename = "u")]
    U,
    #[serde(rename = "s")]
    S,
    #[serde(rename = "c")]
    C,
    #[serde(rename = "cs")]
    Cs,
    #[serde(rename = "cu")]
    Cu,
}

impl LeafType {
    pub fn name(self) -> &'static str {
        match self {
            LeafType::U => "u",
            LeafType::S => "s",
            LeafType::C => "c",
            LeafType::Cs => "cs",
            LeafType::Cu => "cu",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "u" => Ok(Self::U),
            "s" => Ok(Self::S),
            "c" => Ok(Self::C),
            "cs" => Ok(Self::Cs),
            "cu" => Ok(Self::Cu),
            _ => Err(Error::Config(format!("unknown leaf type `{s}`"))),
        }
    }

    /// Number of leaf parameters in a system of dimension `dim`.
    pub fn param_count(self, dim: usize) -> usize {
        match (self, dim) {
            (LeafType::Cs | LeafType::Cu, 3) => 2,
            _ => 1,
        }
    }
}

/// A unit-speed parametrized piece of an invariant leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafSegment {
    pub leaf_type: LeafType,
    pub base_point: TorusPoint,
    /// One interval per leaf parameter; for `cs`/`cu` on `T^3` the second
    /// parameter is the center displacement.
    pub param_intervals: Vec<[f64; 2]>,
    pub series_order: usize,
    /// Bound on the center-offset truncation error over the segment.
    pub tail_bound: f64,
}

impl LeafSegment {
    pub fn interval(&self) -> [f64; 2] {
        self.param_intervals[0]
    }

    pub fn length(&self) -> f64 {
        let [a, b] = self.interval();
        b - a
    }

    /// Point of the leaf at the given parameters.
    pub fn point_at(&self, sys: &ModelSystem, params: &[f64]) -> TorusPoint {
        let x = self.base_point;
        let t = params.first().copied().unwrap_or(0.0);
        let c = params.get(1).copied().unwrap_or(0.0);
        match self.leaf_type {
            LeafType::U | LeafType::Cu => {
                let off = if x.center.is_some() {
                    sys.unstable_offset(x.base, t)
                } else {
                    0.0
                };
                x.shifted([t * sys.v_u[0], t * sys.v_u[1]], off + c)
            }
            LeafType::S | LeafType::Cs => {
                let off = if x.center.is_some() {
                    sys.stable_offset(x.base, t)
                } else {
                    0.0
                };
                x.shifted([t * sys.v_s[0], t * sys.v_s[1]], off + c)
            }
            LeafType::C => x.shifted([0.0, 0.0], t),
        }
    }
}

/// Builds the segment of `W^type(x)` covering parameters `[−radius, radius]`.
pub fn leaf_segment(
    sys: &ModelSystem,
    x: &TorusPoint,
    leaf_type: LeafType,
    radius: f64,
) -> Result<LeafSegment> {
    if !(radius > 0.0) {
        return Err(Error::DegenerateWindow(format!("radius {radius} ≤ 0")));
    }
    if radius > CHART_SCALE {
        return Err(Error::ChartOverflow {
            radius,
            max: CHART_SCALE,
        });
    }
    if x.dim() != sys.dim() {
        return Err(Error::InvalidPoint(format!(
            "point of dimension {} for a system of dimension {}",
            x.dim(),
            sys.dim()
        )));
    }
    if leaf_type == LeafType::C && sys.dim() == 2 {
        return Err(Error::InvalidSystem(
            "the center leaf is trivial on T^2".into(),
        ));
    }
    let n = leaf_type.param_count(sys.dim());
    let tail = match leaf_type {
        LeafType::C => 0.0,
        _ => sys.offset_tail_bound(radius),
    };
    Ok(LeafSegment {
        leaf_type,
        base_point: *x,
        param_intervals: vec![[-radius, radius]; n],
        series_order: sys.series_order,
        tail_bound: tail,
    })
}

/// Unstable holonomy from `W^cs(x0)` to `W^cs(y0)` along `W^u`, applied to `w`.
pub fn unstable_holonomy(
    sys: &ModelSystem,
    x0: &TorusPoint,
    y0: &TorusPoint,
    w: &TorusPoint,
) -> Result<TorusPoint> {
    let shift = unstable_shift(sys, x0, y0)?;
    let (aw, bw) = sys.local_coords(x0.base, w.base);
    if aw.abs() > 1e-9 {
        return Err(Error::NotOnLeaf {
            leaf: "cs",
            defect: aw.abs(),
        });
    }
    if bw.abs() > CHART_SCALE {
        return Err(Error::HolonomyExit);
    }
    let off = if w.center.is_some() {
        sys.unstable_offset(w.base, shift)
    } else {
        0.0
    };
    Ok(w.shifted([shift * sys.v_u[0], shift * sys.v_u[1]], off))
}

/// Arc-length parameter `a` with `y0 = x0 + a v_u` on `W^u(x0)`, after the
/// backward-contraction membership test.
pub fn unstable_shift(sys: &ModelSystem, x0: &TorusPoint, y0: &TorusPoint) -> Result<f64> {
    let (a, b) = sys.local_coords(x0.base, y0.base);
    if b.abs() > 1e-9 {
        return Err(Error::NotOnLeaf {
            leaf: "u",
            defect: b.abs(),
        });
    }
    if a.abs() > CHART_SCALE {
        return Err(Error::HolonomyExit);
    }
    if let (Some(cx), Some(cy)) = (x0.center, y0.center) {
        let expected = wrap01(cx + sys.unstable_offset(x0.base, a));
        let defect = circle_dist(expected, cy);
        if defect > 1e-9 + sys.offset_tail_bound(a) {
            return Err(Error::NotOnLeaf { leaf: "u", defect });
        }
    }
    Ok(a)
}

/// Center, radius and length of a Bowen ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BowenBallSpec {
    pub center: TorusPoint,
    pub epsilon: f64,
    pub n: usize,
}

impl BowenBallSpec {
    pub fn new(center: TorusPoint, epsilon: f64, n: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= INJECTIVITY_SCALE) {
            return Err(Error::Precondition(format!(
                "Bowen radius {epsilon} must lie in (0, {INJECTIVITY_SCALE}]"
            )));
        }
        if n == 0 {
            return Err(Error::Precondition(
                "Bowen ball length n must be ≥ 1".into(),
            ));
        }
        Ok(Self { center, epsilon, n })
    }
}

/// `d(f^j x, f^j y) < ε` for `j = 0..n−1`.
pub fn bowen_ball_contains(sys: &ModelSystem, spec: &BowenBallSpec, y: &TorusPoint) -> bool {
    let mut p = spec.center;
    let mut q = *y;
    for j in 0..spec.n {
        if torus_dist(&p, &q) >= spec.epsilon {
            return false;
        }
        if j + 1 < spec.n {
            p = sys.forward(&p);
            q = sys.forward(&q);
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cat_map_examples() {
        let sys = ModelSystem::cat_map();
        let p = TorusPoint::new2(0.5, 0.5);
        let q = sys.apply(&p, 1);
        assert_eq!(q, TorusPoint::new2(0.5, 0.0));
        assert_eq!(sys.apply(&p, 0), p);
    }

    #[test]
    fn skew_origin_shifts_by_cocycle() {
        let sys = ModelSystem::default_skew();
        let q = sys.apply(&TorusPoint::new3(0.0, 0.0, 0.2), 1);
        assert_eq!(q.base, [0.0, 0.0]);
        assert!((q.center.unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn eigen_data_is_consistent() {
        let sys = ModelSystem::cat_map();
        let lam = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((sys.lambda - lam).abs() < 1e-14);
        let av = ModelSystem::mat_vec(&sys.base_matrix, sys.v_u);
        assert!((av[0] - lam * sys.v_u[0]).abs() < 1e-12);
        assert!((av[1] - lam * sys.v_u[1]).abs() < 1e-12);
        let sv = ModelSystem::mat_vec(&sys.base_matrix, sys.v_s);
        assert!((sv[0] - sys.mu_s * sys.v_s[0]).abs() < 1e-12);
        assert!((sys.mu_s.abs() - 1.0 / lam).abs() < 1e-12);
        let (a, b) = sys.eigen_coords(sys.from_eigen(0.3, -0.7));
        assert!((a - 0.3).abs() < 1e-14 && (b + 0.7).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_hyperbolic() {
        assert!(ModelSystem::from_matrix([[1, 1], [0, 1]]).is_err());
        assert!(ModelSystem::from_matrix([[2, 0], [0, 1]]).is_err());
    }

    #[test]
    fn reversed_swaps_directions() {
        let sys = ModelSystem::cat_map();
        let r = sys.reversed();
        assert!((r.v_u[0] - sys.v_s[0]).abs() < 1e-14 && (r.v_u[1] - sys.v_s[1]).abs() < 1e-14);
        assert!((r.lambda - sys.lambda).abs() < 1e-12);
        let p = TorusPoint::new2(0.31, 0.77);
        let q = r.forward(&sys.forward(&p));
        assert!(torus_dist(&p, &q) < 1e-14);
    }

    #[test]
    fn reversed_skew_inverts() {
        let sys = ModelSystem::default_skew();
        let r = sys.reversed();
        let p = TorusPoint::new3(0.31, 0.77, 0.4);
        let q = r.forward(&sys.forward(&p));
        assert!(torus_dist(&p, &q) < 1e-13);
    }

    #[test]
    fn leaf_segment_rejects_large_radius() {
        let sys = ModelSystem::cat_map();
        let x = TorusPoint::new2(0.0, 0.0);
        assert!(matches!(
            leaf_segment(&sys, &x, LeafType::U, 0.6),
            Err(Error::ChartOverflow { .. })
        ));
        assert!(leaf_segment(&sys, &x, LeafType::C, 0.1).is_err());
    }

    #[test]
    fn vanishing_cocycle_gives_flat_leaves() {
        let sys = ModelSystem::skew_product(TrigPoly::zero());
        let x = TorusPoint::new3(0.1, 0.2, 0.3);
        let seg = leaf_segment(&sys, &x, LeafType::U, 0.4).unwrap();
        let p = seg.point_at(&sys, &[0.25]);
        assert_eq!(p.center, Some(0.3));
    }

    #[test]
    fn bowen_ball_single_step_is_ordinary_ball() {
        let sys = ModelSystem::cat_map();
        let x = TorusPoint::new2(0.2, 0.2);
        let spec = BowenBallSpec::new(x, 0.1, 1).unwrap();
        assert!(bowen_ball_contains(
            &sys,
            &spec,
            &TorusPoint::new2(0.29, 0.11)
        ));
        assert!(!bowen_ball_contains(
            &sys,
            &spec,
            &TorusPoint::new2(0.31, 0.2)
        ));
        assert!(bowen_ball_contains(&sys, &spec, &x));
        assert!(BowenBallSpec::new(x, 0.3, 2).is_err());
    }

    #[test]
    fn holonomy_identity_and_translation() {
        let sys = ModelSystem::cat_map();
        let x0 = TorusPoint::new2(0.0, 0.0);
        let w = TorusPoint::new2(0.1, 0.2);
        let w_cs = x0.shifted(sys.from_eigen(0.0, 0.15), 0.0);
        assert_eq!(unstable_holonomy(&sys, &x0, &x0, &w_cs).unwrap(), w_cs);
        let y0 = x0.shifted(sys.from_eigen(0.05, 0.0), 0.0);
        // w off the cs leaf of x0 is rejected
        assert!(unstable_holonomy(&sys, &x0, &y0, &w).is_err());
        let h = unstable_holonomy(&sys, &x0, &y0, &w_cs).unwrap();
        let expect = w_cs.shifted(sys.from_eigen(0.05, 0.0), 0.0);
        assert!(torus_dist(&h, &expect) < 1e-14);
    }
}
