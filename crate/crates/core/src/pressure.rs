//! Pressure from spanning sums and Bowen-ball masses.
//!
//! Spanning sets come from a lattice of tile centers in eigen-coordinates.
//! A tile `{c + a v_u + b v_s : |a| ≤ ρ_u, |b| ≤ ρ_s}` is contained in the
//! Bowen ball `D(c, ε, n)` once
//! `λ^{n−1} ρ_u ‖v_u‖∞ + ρ_s ‖v_s‖∞ < ε`, because the linear base moves the
//! two eigen-components independently. Tiles placed edge to edge cover the
//! plane, so the centers meeting the unit square form a certified spanning
//! set. On the skew product the fibre is tiled separately and the radii are
//! shrunk so that the accumulated cocycle drift stays below `ε`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry;
use crate::potentials::{birkhoff_sum, Potential};
use crate::torusdyn::{wrap01, BowenBallSpec, ModelSystem, TorusPoint};

/// Smallest admissible unstable tile radius.
pub const MIN_SPACING: f64 = 1e-13;
/// Largest number of lattice centers enumerated for a non-constant potential.
pub const MAX_CENTERS: u64 = 400_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureEstimate {
    pub epsilon: f64,
    pub n_values: Vec<usize>,
    pub log_sums: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the linear fit.
    pub slope_ci: f64,
}

/// Least-squares line through `(x, y)`: returns `(slope, intercept, rms)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::DegenerateFit("length mismatch".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if xs.len() < 2 || sxx <= 0.0 {
        return Err(Error::DegenerateFit(
            "a slope needs at least two distinct abscissae".into(),
        ));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok((slope, intercept, rms))
}

/// A certified spanning set for `(ε, n)`.
#[derive(Debug, Clone)]
pub struct SpanningLattice {
    pub rho_u: f64,
    pub rho_s: f64,
    pub rho_c: f64,
    /// Number of fibre centers (1 on `T^2`).
    pub fibre_count: usize,
    /// `(j, i_lo, i_hi)` for each row of tiles.
    pub rows: Vec<(i64, i64, i64)>,
}

impl SpanningLattice {
    pub fn build(sys: &ModelSystem, epsilon: f64, n: usize) -> Result<Self> {
        let nu = sys.v_u[0].abs().max(sys.v_u[1].abs());
        let ns = sys.v_s[0].abs().max(sys.v_s[1].abs());
        let safety = 0.999;
        let (share, rho_c, fibre_count) = if sys.dim() == 3 {
            let c_tau = sys
                .center_cocycle
                .as_ref()
                .map_or(0.0, |t| t.lipschitz_max_norm());
            let drift = c_tau * sys.lambda / (sys.lambda - 1.0);
            let share = if drift > 0.0 {
                (1.0f64).min(1.0 / (2.0 * drift))
            } else {
                1.0
            };
            let rho_c = 0.5 * safety * epsilon;
            (share, rho_c, (1.0 / (2.0 * rho_c)).ceil() as usize)
        } else {
            (1.0, 0.0, 1)
        };
        let rho_s = safety * share * epsilon / (2.0 * ns);
        let rho_u = safety * share * epsilon / (2.0 * nu * sys.lambda.powi(n as i32 - 1));
        if rho_u < MIN_SPACING {
            return Err(Error::ResolutionExhausted(format!(
                "unstable spacing {rho_u:.3e} below {MIN_SPACING:.0e} at n = {n}"
            )));
        }
        let (h_a, h_b) = (2.0 * rho_u, 2.0 * rho_s);
        let square = geometry::rect(0.0, 1.0, 0.0, 1.0);
        let (bmin, bmax) = geometry::extent(&square, sys.dual_s).expect("square");
        let j_lo = ((bmin - rho_s) / h_b).ceil() as i64;
        let j_hi = ((bmax + rho_s) / h_b).floor() as i64;
        let mut rows = Vec::new();
        for j in j_lo..=j_hi {
            let bj = j as f64 * h_b;
            let strip = geometry::clip_slab(&square, sys.dual_s, bj - rho_s, bj + rho_s);
            if let Some((alo, ahi)) = geometry::extent(&strip, sys.dual_u) {
                let i_lo = ((alo - rho_u) / h_a).ceil() as i64;
                let i_hi = ((ahi + rho_u) / h_a).floor() as i64;
                if i_hi >= i_lo {
                    rows.push((j, i_lo, i_hi));
                }
            }
        }
        Ok(Self {
            rho_u,
            rho_s,
            rho_c,
            fibre_count,
            rows,
        })
    }

    pub fn base_count(&self) -> u64 {
        self.rows.iter().map(|(_, a, b)| (b - a + 1) as u64).sum()
    }

    pub fn center(&self, sys: &ModelSystem, i: i64, j: i64) -> [f64; 2] {
        let d = sys.from_eigen(i as f64 * 2.0 * self.rho_u, j as f64 * 2.0 * self.rho_s);
        [wrap01(d[0]), wrap01(d[1])]
    }

    /// The selected center whose tile contains `p`.
    pub fn locate(&self, sys: &ModelSystem, p: &TorusPoint) -> TorusPoint {
        let (a, b) = sys.eigen_coords(p.base);
        let i = (a / (2.0 * self.rho_u)).round() as i64;
        let j = (b / (2.0 * self.rho_s)).round() as i64;
        let base = self.center(sys, i, j);
        let center = p.center.map(|t| {
            let k = (t / (2.0 * self.rho_c)).round();
            wrap01(k * 2.0 * self.rho_c)
        });
        TorusPoint { base, center }
    }

    /// `log Σ_{x∈E} e^{S_nφ(x)}`.
    pub fn log_sum(&self, sys: &ModelSystem, phi: &Potential, n: usize) -> Result<f64> {
        let count = self.base_count();
        let fibre = (self.fibre_count as f64).ln();
        if let Some(c) = phi.constant_value() {
            return Ok((count as f64).ln() + fibre + n as f64 * c);
        }
        if count > MAX_CENTERS {
            return Err(Error::ResolutionExhausted(format!(
                "{count} lattice centers at n = {n} exceed the limit {MAX_CENTERS}"
            )));
        }
        let shift = n as f64 * phi.sup_norm();
        let partial: Vec<f64> = self
            .rows
            .par_iter()
            .map(|&(j, i_lo, i_hi)| {
                (i_lo..=i_hi)
                    .map(|i| {
                        let p = TorusPoint {
                            base: self.center(sys, i, j),
                            center: None,
                        };
                        (birkhoff_sum(sys, phi, &p, n) - shift).exp()
                    })
                    .sum::<f64>()
            })
            .collect();
        Ok(partial.iter().sum::<f64>().ln() + shift + fibre)
    }
}

/// Fits `P` as the slope of `log S(ε, n)` against `n`.
pub fn spanning_pressure(
    sys: &ModelSystem,
    phi: &Potential,
    epsilon: f64,
    n_values: &[usize],
) -> Result<PressureEstimate> {
    if !(epsilon > 0.0 && epsilon <= 0.2) {
        return Err(Error::Precondition(format!(
            "spanning radius {epsilon} must lie in (0, 0.2]"
        )));
    }
    let mut log_sums = Vec::with_capacity(n_values.len());
    for &n in n_values {
        if n == 0 {
            return Err(Error::Precondition("n must be ≥ 1".into()));
        }
        let lattice = SpanningLattice::build(sys, epsilon, n)?;
        log_sums.push(lattice.log_sum(sys, phi, n)?);
    }
    let xs: Vec<f64> = n_values.iter().map(|&n| n as f64).collect();
    let (slope, intercept, rms) = linear_fit(&xs, &log_sums)?;
    Ok(PressureEstimate {
        epsilon,
        n_values: n_values.to_vec(),
        log_sums,
        slope,
        intercept,
        slope_ci: rms,
    })
}

/// Number of samples in `B(x, ε, n)` for each `n` of `n_values`.
pub fn ball_counts(
    sys: &ModelSystem,
    samples: &[TorusPoint],
    x: &TorusPoint,
    epsilon: f64,
    n_values: &[usize],
) -> Result<Vec<usize>> {
    let n_max = n_values.iter().copied().max().unwrap_or(1).max(1);
    BowenBallSpec::new(*x, epsilon, n_max)?;
    let mut orbit = Vec::with_capacity(n_max);
    let mut p = *x;
    for _ in 0..n_max {
        orbit.push(p);
        p = sys.forward(&p);
    }
    // number of leading iterates inside the ε-ball, per sample
    let stay: Vec<usize> = samples
        .par_iter()
        .map(|y| {
            let mut q = *y;
            for (j, o) in orbit.iter().enumerate() {
                if crate::torusdyn::torus_dist(o, &q) >= epsilon {
                    return j;
                }
                q = sys.forward(&q);
            }
            n_max
        })
        .collect();
    Ok(n_values
        .iter()
        .map(|&n| stay.iter().filter(|&&s| s >= n).count())
        .collect())
}

/// Fitted slope of `−log μ̂(B(x, ε, n))` in `n`.
pub fn local_entropy(
    sys: &ModelSystem,
    samples: &[TorusPoint],
    x: &TorusPoint,
    epsilon: f64,
    n_values: &[usize],
) -> Result<f64> {
    const MIN_CLOUD: usize = 100_000;
    const MIN_IN_BALL: usize = 50;
    if samples.len() < MIN_CLOUD {
        return Err(Error::Precondition(format!(
            "point cloud has {} samples, need at least {MIN_CLOUD}",
            samples.len()
        )));
    }
    let counts = ball_counts(sys, samples, x, epsilon, n_values)?;
    let smallest = counts.iter().copied().min().unwrap_or(0);
    if smallest < MIN_IN_BALL {
        return Err(Error::Starvation {
            found: smallest,
            needed: MIN_IN_BALL,
        });
    }
    let total = samples.len() as f64;
    let xs: Vec<f64> = n_values.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| -(c as f64 / total).ln()).collect();
    Ok(linear_fit(&xs, &ys)?.0)
}

/// Mean local entropy over `centers` plus the sample mean of `φ`.
pub fn metric_pressure(
    sys: &ModelSystem,
    phi: &Potential,
    samples: &[TorusPoint],
    centers: &[TorusPoint],
    epsilon: f64,
    n_values: &[usize],
) -> Result<f64> {
    if centers.is_empty() {
        return Err(Error::Precondition("no ball centers given".into()));
    }
    let mut h = 0.0;
    for x in centers {
        h += local_entropy(sys, samples, x, epsilon, n_values)?;
    }
    h /= centers.len() as f64;
    let mean_phi = samples.iter().map(|p| phi.eval(p)).sum::<f64>() / samples.len() as f64;
    Ok(h + mean_phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torusdyn::bowen_ball_contains;
    use rand::{Rng, SeedableRng};

    fn log_lambda() -> f64 {
        ((3.0 + 5f64.sqrt()) / 2.0).ln()
    }

    #[test]
    fn fit_rejects_single_point() {
        assert!(linear_fit(&[1.0], &[2.0]).is_err());
        let (s, i, r) = linear_fit(&[1.0, 2.0, 3.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((s - 2.0).abs() < 1e-14 && (i + 1.0).abs() < 1e-14 && r < 1e-14);
    }

    #[test]
    fn entropy_of_cat_map() {
        let sys = ModelSystem::cat_map();
        let n: Vec<usize> = (6..=16).collect();
        let est = spanning_pressure(&sys, &Potential::zero(), 0.05, &n).unwrap();
        assert!((est.slope - log_lambda()).abs() < 0.02, "{}", est.slope);
    }

    #[test]
    fn constant_shift_is_exact() {
        let sys = ModelSystem::cat_map();
        let n: Vec<usize> = (6..=12).collect();
        let a = spanning_pressure(&sys, &Potential::zero(), 0.05, &n).unwrap();
        let b = spanning_pressure(&sys, &Potential::constant(0.3), 0.05, &n).unwrap();
        assert!((b.slope - a.slope - 0.3).abs() < 1e-9);
        for ((&k, x), y) in n.iter().zip(&a.log_sums).zip(&b.log_sums) {
            assert!((y - x - 0.3 * k as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn srb_pressure_vanishes() {
        let sys = ModelSystem::cat_map();
        let n: Vec<usize> = (6..=16).collect();
        let est = spanning_pressure(&sys, &Potential::srb(&sys), 0.05, &n).unwrap();
        assert!(est.slope.abs() < 0.02);
    }

    #[test]
    fn trig_pressure_matches_quadrature_value() {
        // reference from an independent leaf-quadrature computation
        let sys = ModelSystem::cat_map();
        let n: Vec<usize> = (4..=12).collect();
        let est = spanning_pressure(&sys, &Potential::cos_x1(0.2), 0.2, &n).unwrap();
        assert!((est.slope - 0.972_403).abs() < 0.02, "{}", est.slope);
    }

    #[test]
    fn log_sums_nonincreasing_in_epsilon() {
        let sys = ModelSystem::cat_map();
        let mut prev = f64::INFINITY;
        for eps in [0.02, 0.05, 0.1, 0.15, 0.2] {
            let l = SpanningLattice::build(&sys, eps, 8).unwrap();
            let v = l.log_sum(&sys, &Potential::zero(), 8).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn lattice_is_a_certified_cover() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for sys in [ModelSystem::cat_map(), ModelSystem::default_skew()] {
            let (eps, n) = (0.1, 6);
            let lat = SpanningLattice::build(&sys, eps, n).unwrap();
            for _ in 0..2000 {
                let p = if sys.dim() == 3 {
                    TorusPoint::new3(rng.gen(), rng.gen(), rng.gen())
                } else {
                    TorusPoint::new2(rng.gen(), rng.gen())
                };
                let c = lat.locate(&sys, &p);
                let spec = BowenBallSpec::new(c, eps, n).unwrap();
                assert!(bowen_ball_contains(&sys, &spec, &p));
            }
        }
    }

    #[test]
    fn rejects_bad_epsilon_and_tiny_spacing() {
        let sys = ModelSystem::cat_map();
        assert!(spanning_pressure(&sys, &Potential::zero(), 0.3, &[4, 5]).is_err());
        assert!(matches!(
            spanning_pressure(&sys, &Potential::zero(), 0.1, &[80, 81]),
            Err(Error::ResolutionExhausted(_))
        ));
    }

    #[test]
    fn atom_has_zero_entropy() {
        let sys = ModelSystem::cat_map();
        let o = TorusPoint::new2(0.0, 0.0);
        let cloud = vec![o; 100_000];
        let h = local_entropy(&sys, &cloud, &o, 0.1, &[1, 2, 3, 4]).unwrap();
        assert!(h.abs() < 1e-12);
        let phi = Potential::cos_x1(0.2);
        let m = metric_pressure(&sys, &phi, &cloud, &[o], 0.1, &[1, 2, 3]).unwrap();
        assert!((m - 0.2).abs() < 1e-12);
        assert!(matches!(
            local_entropy(&sys, &cloud, &o, 0.1, &[3]),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn lebesgue_local_entropy() {
        let sys = ModelSystem::cat_map();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let cloud: Vec<TorusPoint> = (0..400_000)
            .map(|_| TorusPoint::new2(rng.gen(), rng.gen()))
            .collect();
        let x = TorusPoint::new2(0.37, 0.61);
        let h = local_entropy(&sys, &cloud, &x, 0.2, &[2, 3, 4, 5, 6]).unwrap();
        assert!((h - log_lambda()).abs() < 0.05, "{h}");
    }
}
