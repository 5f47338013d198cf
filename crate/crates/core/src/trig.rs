//! Real trigonometric polynomials on the base torus T^2.
//!
//! Used both for the center cocycle of the skew product and for the
//! trigonometric potentials. A term `(k, a, b)` contributes
//! `a cos(2π k·x) + b sin(2π k·x)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub k: [i64; 2],
    pub cos: f64,
    pub sin: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrigPoly {
    pub terms: Vec<TrigTerm>,
}

impl TrigPoly {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    /// `amplitude · cos(2π x₁)`.
    pub fn cos_x1(amplitude: f64) -> Self {
        Self {
            terms: vec![TrigTerm {
                k: [1, 0],
                cos: amplitude,
                sin: 0.0,
            }],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.cos == 0.0 && t.sin == 0.0)
    }

    #[inline]
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let arg = TAU * (t.k[0] as f64 * x[0] + t.k[1] as f64 * x[1]);
                let mut v = t.cos * arg.cos();
                if t.sin != 0.0 {
                    v += t.sin * arg.sin();
                }
                v
            })
            .sum()
    }

    /// Lipschitz constant with respect to the max-norm on the torus:
    /// `sup |∇p|₁ ≤ Σ 2π (|a|+|b|) |k|₁`.
    pub fn lipschitz_max_norm(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| TAU * (t.cos.abs() + t.sin.abs()) * (t.k[0].abs() + t.k[1].abs()) as f64)
            .sum()
    }

    pub fn sup_norm_bound(&self) -> f64 {
        self.terms.iter().map(|t| t.cos.abs() + t.sin.abs()).sum()
    }

    /// Mean over the torus (the constant-mode coefficient).
    pub fn mean(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.k == [0, 0])
            .map(|t| t.cos)
            .sum()
    }

    /// The polynomial `x ↦ p(M x)` for an integer matrix `M`; mode `k`
    /// becomes `Mᵀ k`.
    pub fn compose_linear(&self, m: [[i64; 2]; 2]) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| TrigTerm {
                k: [
                    m[0][0] * t.k[0] + m[1][0] * t.k[1],
                    m[0][1] * t.k[0] + m[1][1] * t.k[1],
                ],
                cos: t.cos,
                sin: t.sin,
            })
            .collect();
        Self { terms }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| TrigTerm {
                    k: t.k,
                    cos: s * t.cos,
                    sin: s * t.sin,
                })
                .collect(),
        }
    }

    /// Parses `"k1 k2 a b; k1 k2 a b"`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for chunk in s.split(';').map(str::trim).filter(|c| !c.is_empty()) {
            let parts: Vec<&str> = chunk.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(Error::Config(format!(
                    "trig term `{chunk}` must have the form `k1 k2 cos sin`"
                )));
            }
            let int = |p: &str| {
                p.parse::<i64>()
                    .map_err(|_| Error::Config(format!("bad frequency `{p}`")))
            };
            let real = |p: &str| {
                p.parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad coefficient `{p}`")))
            };
            terms.push(TrigTerm {
                k: [int(parts[0])?, int(parts[1])?],
                cos: real(parts[2])?,
                sin: real(parts[3])?,
            });
        }
        Ok(Self { terms })
    }
}
