//! Lipschitz potentials depending only on the base coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torusdyn::{ModelSystem, TorusPoint};
use crate::trig::TrigPoly;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PotentialKind {
    Zero,
    Constant {
        c: f64,
    },
    Trig {
        poly: TrigPoly,
    },
    /// `−log |det Df|E^u|`, constant `−log λ` on the linear models.
    Srb {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub kind: PotentialKind,
    pub alpha: f64,
    pub c_phi: f64,
}

impl Potential {
    pub fn zero() -> Self {
        Self::from_kind(PotentialKind::Zero)
    }

    pub fn constant(c: f64) -> Self {
        Self::from_kind(PotentialKind::Constant { c })
    }

    pub fn trig(poly: TrigPoly) -> Self {
        Self::from_kind(PotentialKind::Trig { poly })
    }

    /// `amplitude · cos(2π x₁)`.
    pub fn cos_x1(amplitude: f64) -> Self {
        Self::trig(TrigPoly::cos_x1(amplitude))
    }

    pub fn srb(sys: &ModelSystem) -> Self {
        Self::from_kind(PotentialKind::Srb {
            value: -sys.lambda.ln(),
        })
    }

    fn from_kind(kind: PotentialKind) -> Self {
        let c_phi = match &kind {
            PotentialKind::Trig { poly } => poly.lipschitz_max_norm(),
            _ => 0.0,
        };
        Self {
            kind,
            alpha: 1.0,
            c_phi,
        }
    }

    /// Parses `zero`, `constant:<c>`, `srb`, or `trig:<k1 k2 cos sin; ...>`.
    /// A bare `trig` is `0.2 cos(2π x₁)`.
    pub fn parse(spec: &str, sys: &ModelSystem) -> Result<Self> {
        let spec = spec.trim();
        let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
        match head.trim() {
            "zero" => Ok(Self::zero()),
            "srb" => Ok(Self::srb(sys)),
            "constant" => rest
                .trim()
                .parse::<f64>()
                .map(Self::constant)
                .map_err(|_| Error::Config(format!("bad constant potential `{spec}`"))),
            "trig" if rest.trim().is_empty() => Ok(Self::cos_x1(0.2)),
            "trig" => Ok(Self::trig(TrigPoly::parse(rest)?)),
            other => Err(Error::Config(format!("unknown potential kind `{other}`"))),
        }
    }

    /// Value at a base point.
    #[inline]
    pub fn eval_base(&self, x: [f64; 2]) -> f64 {
        match &self.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Constant { c } => *c,
            PotentialKind::Trig { poly } => poly.eval(x),
            PotentialKind::Srb { value } => *value,
        }
    }

    #[inline]
    pub fn eval(&self, p: &TorusPoint) -> f64 {
        self.eval_base(p.base)
    }

    /// The constant value, when the potential is constant.
    pub fn constant_value(&self) -> Option<f64> {
        match &self.kind {
            PotentialKind::Zero => Some(0.0),
            PotentialKind::Constant { c } => Some(*c),
            PotentialKind::Srb { value } => Some(*value),
            PotentialKind::Trig { poly } if poly.is_zero() => Some(0.0),
            PotentialKind::Trig { .. } => None,
        }
    }

    /// `φ + c`.
    pub fn shifted(&self, c: f64) -> Self {
        match &self.kind {
            PotentialKind::Trig { poly } => {
                let mut poly = poly.clone();
                poly.terms.push(crate::trig::TrigTerm {
                    k: [0, 0],
                    cos: c,
                    sin: 0.0,
                });
                Self::trig(poly)
            }
            _ => Self::constant(self.constant_value().unwrap_or(0.0) + c),
        }
    }

    /// `φ ∘ f⁻¹`, the potential paired with the reversed system.
    pub fn compose_inverse(&self, sys: &ModelSystem) -> Self {
        match &self.kind {
            PotentialKind::Trig { poly } => Self::trig(poly.compose_linear(sys.inverse_matrix)),
            _ => self.clone(),
        }
    }

    /// Uniform bound on `|φ|`.
    pub fn sup_norm(&self) -> f64 {
        match &self.kind {
            PotentialKind::Trig { poly } => poly.sup_norm_bound(),
            _ => self.constant_value().unwrap_or(0.0).abs(),
        }
    }

    /// Space mean with respect to Lebesgue measure.
    pub fn lebesgue_mean(&self) -> f64 {
        match &self.kind {
            PotentialKind::Trig { poly } => poly.mean(),
            _ => self.constant_value().unwrap_or(0.0),
        }
    }
}

/// `Σ_{i<n} φ(f^i p)`.
pub fn birkhoff_sum(sys: &ModelSystem, phi: &Potential, p: &TorusPoint, n: usize) -> f64 {
    if let Some(c) = phi.constant_value() {
        return c * n as f64;
    }
    let mut x = p.base;
    let mut s = 0.0;
    for i in 0..n {
        s += phi.eval_base(x);
        if i + 1 < n {
            x = sys.base_forward(x);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torusdyn::torus_dist;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn eval_examples() {
        let sys = ModelSystem::cat_map();
        let p = TorusPoint::new2(0.3, 0.6);
        assert_eq!(Potential::zero().eval(&p), 0.0);
        assert!((Potential::srb(&sys).eval(&p) + 0.962_423_650_119_206_9).abs() < 1e-12);
        assert!((Potential::cos_x1(0.2).eval(&TorusPoint::new2(0.0, 0.0)) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn birkhoff_examples() {
        let sys = ModelSystem::cat_map();
        let o = TorusPoint::new2(0.0, 0.0);
        assert_eq!(birkhoff_sum(&sys, &Potential::constant(0.7), &o, 5), 3.5);
        assert_eq!(birkhoff_sum(&sys, &Potential::cos_x1(0.2), &o, 0), 0.0);
        assert!((birkhoff_sum(&sys, &Potential::cos_x1(0.2), &o, 3) - 0.6).abs() < 1e-14);
    }

    #[test]
    fn parse_forms() {
        let sys = ModelSystem::cat_map();
        assert_eq!(Potential::parse("zero", &sys).unwrap(), Potential::zero());
        assert_eq!(
            Potential::parse("constant: 0.25", &sys)
                .unwrap()
                .constant_value(),
            Some(0.25)
        );
        let t = Potential::parse("trig: 1 0 0.2 0", &sys).unwrap();
        assert!((t.eval_base([0.0, 0.3]) - 0.2).abs() < 1e-15);
        assert!(Potential::parse("wavy", &sys).is_err());
    }

    #[test]
    fn lipschitz_bound_holds_on_random_pairs() {
        let phi = Potential::trig(TrigPoly::parse("1 0 0.2 0; 1 1 0.05 0.03").unwrap());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let p = TorusPoint::new2(rng.gen(), rng.gen());
            let q = TorusPoint::new2(rng.gen(), rng.gen());
            let d = torus_dist(&p, &q);
            assert!((phi.eval(&p) - phi.eval(&q)).abs() <= phi.c_phi * d.powf(phi.alpha) + 1e-14);
        }
    }

    #[test]
    fn center_invariance() {
        let sys = ModelSystem::default_skew();
        for phi in [Potential::cos_x1(0.2), Potential::srb(&sys)] {
            let a = phi.eval(&TorusPoint::new3(0.2, 0.4, 0.1));
            let b = phi.eval(&TorusPoint::new3(0.2, 0.4, 0.9));
            assert_eq!(a, b);
        }
    }

    proptest! {
        #[test]
        fn birkhoff_additivity(x in 0.0f64..1.0, y in 0.0f64..1.0, n in 0usize..12, m in 0usize..12) {
            let sys = ModelSystem::cat_map();
            let phi = Potential::cos_x1(0.2);
            let p = TorusPoint::new2(x, y);
            let lhs = birkhoff_sum(&sys, &phi, &p, n + m);
            let rhs = birkhoff_sum(&sys, &phi, &p, n) + birkhoff_sum(&sys, &phi, &sys.apply(&p, n as i64), m);
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }
    }
}
