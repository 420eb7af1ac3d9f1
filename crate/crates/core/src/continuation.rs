//! Three-ball exponents and constants, the growth condition, doubling
//! indices, and the homogeneous-polynomial family on which the growth
//! condition fails.

use serde::{Deserialize, Serialize};

use crate::elliptic::harmonic_polynomial;
use crate::error::{Error, Result};
use crate::fields::{ball_integral, ball_mean, DomainGrid, ScalarField, DEFAULT_SUBSAMPLES};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThreeBallExponent {
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub s: f64,
}

/// `alpha = 1 - 2 e^{-4 lambda}`, `beta = 2 (e^{-4 lambda} - e^{-81 lambda / 16})`,
/// `s = alpha / (alpha + beta)`. `alpha` is negative for `lambda < ln 2 / 4`.
pub fn alpha_beta_s(lambda: f64) -> Result<ThreeBallExponent> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let e4 = (-4.0 * lambda).exp();
    let alpha = 1.0 - 2.0 * e4;
    let beta = 2.0 * (e4 - (-81.0 / 16.0 * lambda).exp());
    Ok(ThreeBallExponent { lambda, alpha, beta, s: alpha / (alpha + beta) })
}

fn l2_norm(u: &ScalarField, r: f64) -> Result<f64> {
    Ok(ball_integral(&u.map(|v| v * v), r, DEFAULT_SUBSAMPLES)?.sqrt())
}

/// `|u|_{B_{r2}} / (|u|_{B_{r1}}^s |u|_{B_{r3}}^{1-s})` in `L2`.
pub fn three_ball_constant(u: &ScalarField, s: f64, radii: [f64; 3]) -> Result<f64> {
    let [r1, r2, r3] = radii;
    if !(0.0 < r1 && r1 < r2 && r2 < r3) {
        return Err(Error::Config(format!("three-ball radii must increase, got {radii:?}")));
    }
    let (n1, n2, n3) = (l2_norm(u, r1)?, l2_norm(u, r2)?, l2_norm(u, r3)?);
    if !(n1 > 0.0) {
        return Err(Error::Degenerate(format!("u vanishes on B_{r1}")));
    }
    Ok(n2 / (n1.powf(s) * n3.powf(1.0 - s)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TauBranch {
    Balanced,
    Small,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TauBound {
    pub tau_tilde: f64,
    pub branch: TauBranch,
    /// Upper bound for `Q` implied by `Q <= e^{alpha tau} P + e^{-beta tau} R`.
    pub bound: f64,
}

/// Balances `e^{alpha tau} P` against `e^{-beta tau} R` at
/// `tau~ = ln(R/P) / (alpha + beta)`. There both terms equal
/// `P^{1-s} R^s`, so `Q <= 2 P^{1-s} R^s`; below `tau0` the bound is taken
/// at `tau0` instead.
pub fn optimal_tau_bound(p: f64, q: f64, r: f64, alpha: f64, beta: f64, tau0: f64) -> Result<TauBound> {
    if !(p > 0.0 && q > 0.0 && r > 0.0) {
        return Err(Error::Domain(format!("P, Q, R must be positive, got ({p}, {q}, {r})")));
    }
    if !(alpha + beta > 0.0) {
        return Err(Error::Domain(format!("alpha + beta must be positive, got {}", alpha + beta)));
    }
    let tau_tilde = (r / p).ln() / (alpha + beta);
    if tau_tilde >= tau0 {
        let s = alpha / (alpha + beta);
        Ok(TauBound { tau_tilde, branch: TauBranch::Balanced, bound: 2.0 * p.powf(1.0 - s) * r.powf(s) })
    } else {
        Ok(TauBound {
            tau_tilde,
            branch: TauBranch::Small,
            bound: (alpha * tau0).exp() * p + (-beta * tau0).exp() * r,
        })
    }
}

/// Growth condition parameters `M`, `N1`, `N2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthParams {
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "N1")]
    pub n1: f64,
    #[serde(rename = "N2")]
    pub n2: f64,
}

impl GrowthParams {
    pub fn new(m: f64, n1: f64, n2: f64) -> Result<Self> {
        let p = Self { m, n1, n2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m > 0.0 && self.n1 >= 1.0 && self.n2 >= 1.0 && self.m.is_finite() && self.n1.is_finite() && self.n2.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("growth parameters need M > 0, N1 >= 1, N2 >= 1; got {self:?}")))
        }
    }

    /// `M max(x^{N1}, x^{1/N2})`.
    pub fn bound(&self, x: f64) -> f64 {
        self.m * x.powf(self.n1).max(x.powf(1.0 / self.n2))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthOutcome {
    pub holds: bool,
    /// `rhs / lhs`; infinite when `u` vanishes on `B_3`.
    pub margin: f64,
    /// `int_{B_3} u^2`
    pub lhs: f64,
    /// `M max((int_{B_2} u^2)^{N1}, (int_{B_2} u^2)^{1/N2})`
    pub rhs: f64,
}

fn growth_from(b3: f64, b2: f64, params: &GrowthParams) -> GrowthOutcome {
    let rhs = params.bound(b2);
    let margin = if b3 > 0.0 { rhs / b3 } else { f64::INFINITY };
    GrowthOutcome { holds: b3 <= rhs, margin, lhs: b3, rhs }
}

/// Evaluates the growth condition on the raw (unnormalized) integrals; the
/// outcome therefore depends on how `u` is scaled.
pub fn growth_check(u: &ScalarField, params: &GrowthParams) -> Result<GrowthOutcome> {
    params.validate()?;
    let sq = u.map(|v| v * v);
    let b3 = ball_integral(&sq, 3.0, DEFAULT_SUBSAMPLES)?;
    let b2 = ball_integral(&sq, 2.0, DEFAULT_SUBSAMPLES)?;
    Ok(growth_from(b3, b2, params))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MacroscopicDoubling {
    pub outer_radius: f64,
    pub inner_radius: f64,
    /// `mean_{B_outer} u^2 / mean_{B_inner} u^2`
    pub ratio: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DoublingReport {
    pub radii: Vec<f64>,
    /// `mean_{B_r} u^2 / mean_{B_{r/2}} u^2`
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub macroscopic: MacroscopicDoubling,
}

/// Mean-normalized doubling ratios at each radius, and the macroscopic check
/// `mean_{B_R} u^2 <= M mean_{B_{R sqrt(mu) / 2}} u^2` with `R = min(4, L)`.
pub fn doubling_report(u: &ScalarField, radii: &[f64], mu: f64, m: f64) -> Result<DoublingReport> {
    if radii.is_empty() || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::Config(format!("doubling radii must be positive and nonempty, got {radii:?}")));
    }
    if !(mu > 0.0 && mu <= 1.0 && m > 0.0) {
        return Err(Error::Config(format!("need 0 < mu <= 1 and M > 0, got ({mu}, {m})")));
    }
    let sq = u.map(|v| v * v);
    let mean = |r: f64| -> Result<f64> {
        let v = ball_mean(&sq, r, DEFAULT_SUBSAMPLES)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::Degenerate(format!("u vanishes on B_{r}")))
        }
    };
    let ratios = radii.iter().map(|&r| Ok(mean(r)? / mean(0.5 * r)?)).collect::<Result<Vec<_>>>()?;
    let outer = u.grid().half_extent().min(4.0);
    let inner = outer * mu.sqrt() / 2.0;
    let ratio = mean(outer)? / mean(inner)?;
    Ok(DoublingReport {
        radii: radii.to_vec(),
        max_ratio: ratios.iter().copied().fold(0.0, f64::max),
        ratios,
        macroscopic: MacroscopicDoubling { outer_radius: outer, inner_radius: inner, ratio, holds: ratio <= m },
    })
}

/// `(r, C_r)` with `C_r` the three-ball constant on `(r, 2r, 4r)`.
pub fn multiscale_three_ball(u: &ScalarField, s: f64, rs: &[f64]) -> Result<Vec<(f64, f64)>> {
    rs.iter()
        .map(|&r| {
            if !(r > 0.0 && r <= 0.5) {
                return Err(Error::Config(format!("multiscale radii must lie in (0, 1/2], got {r}")));
            }
            Ok((r, three_ball_constant(u, s, [r, 2.0 * r, 4.0 * r])?))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CounterexampleRow {
    pub k: u32,
    /// `3^{-(2k+2)}`
    pub exact: f64,
    /// `int_{B_1} u_k^2 / int_{B_3} u_k^2` by quadrature
    pub quadrature: f64,
    pub rel_err: f64,
    pub growth: GrowthOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub rows: Vec<CounterexampleRow>,
    /// Smallest tested `k` from which the growth condition fails for every
    /// larger tested degree.
    pub threshold: Option<u32>,
}

/// Homogeneous harmonic polynomials `Re z^k` scaled to unit mass on `B_3`:
/// the mass on `B_1` decays like `3^{-(2k+2)}`, so no fixed `(M, N1, N2)`
/// covers the whole family.
pub fn counterexample_study(
    grid: DomainGrid,
    ks: &[u32],
    params: &GrowthParams,
    subsamples: usize,
) -> Result<CounterexampleReport> {
    params.validate()?;
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let sq = harmonic_polynomial(k).sample(grid)?.map(|v| v * v);
        let b3 = ball_integral(&sq, 3.0, subsamples)?;
        let (b2, b1) = (ball_integral(&sq, 2.0, subsamples)? / b3, ball_integral(&sq, 1.0, subsamples)? / b3);
        let exact = 3f64.powi(-(2 * k as i32 + 2));
        rows.push(CounterexampleRow {
            k,
            exact,
            quadrature: b1,
            rel_err: (b1 - exact).abs() / exact,
            growth: growth_from(1.0, b2, params),
        });
    }
    rows.sort_by_key(|r| r.k);
    let threshold = rows
        .iter()
        .rposition(|r| r.growth.holds)
        .map_or(rows.first().map(|r| r.k), |i| rows.get(i + 1).map(|r| r.k));
    Ok(CounterexampleReport { rows, threshold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn exponents_at_lambda_one() {
        let e = alpha_beta_s(1.0).unwrap();
        assert!((e.alpha - 0.963369).abs() < 1e-6);
        assert!((e.beta - 0.0239716).abs() < 1e-6);
        assert!((e.s - 0.97572).abs() < 1e-5);
        let big = alpha_beta_s(40.0).unwrap();
        assert!(big.beta > 0.0 && (1.0 - big.s) < 1e-12);
        assert!(alpha_beta_s(0.0).is_err());
    }

    #[test]
    fn tau_selection() {
        let e = alpha_beta_s(1.0).unwrap();
        let t = optimal_tau_bound(1.0, 1.0, 100.0, e.alpha, e.beta, 1.0).unwrap();
        assert!((t.tau_tilde - 100f64.ln() / 0.987341).abs() < 1e-3);
        assert_eq!(t.branch, TauBranch::Balanced);
        let same = optimal_tau_bound(2.0, 1.0, 2.0, e.alpha, e.beta, 5.0).unwrap();
        assert_eq!((same.tau_tilde, same.branch), (0.0, TauBranch::Small));
        let tau0 = 5.0;
        let r = (2.0 * tau0 * (e.alpha + e.beta)).exp();
        let b = optimal_tau_bound(1.0, 1.0, r, e.alpha, e.beta, tau0).unwrap();
        assert!((b.tau_tilde - 2.0 * tau0).abs() < 1e-9);
        assert!(optimal_tau_bound(0.0, 1.0, 1.0, e.alpha, e.beta, 5.0).is_err());
    }

    #[test]
    fn constant_field_constants() {
        let grid = DomainGrid::new(3.0, 384).unwrap();
        let one = ScalarField::from_fn(grid, |_| 1.0).unwrap();
        let s = 0.97572;
        let c = three_ball_constant(&one, s, [1.0, 2.0, 3.0]).unwrap();
        let exact = (4.0 * PI).sqrt() / (PI.powf(s / 2.0) * (9.0 * PI).powf((1.0 - s) / 2.0));
        assert!((c / exact - 1.0).abs() < 1e-3);
        let g = growth_check(&one, &GrowthParams::new(9.0 / 4.0, 1.0, 1.0).unwrap()).unwrap();
        assert!((g.margin - 1.0).abs() < 2e-3);
        let d = doubling_report(&one, &[1.0, 0.5], 0.5, 2.0).unwrap();
        assert!(d.ratios.iter().all(|r| (r - 1.0).abs() < 1e-2));
    }

    #[test]
    fn counterexample_threshold() {
        let grid = DomainGrid::new(3.0, 256).unwrap();
        let rep = counterexample_study(grid, &[0, 1, 2, 3, 4, 5, 6], &GrowthParams::new(10.0, 2.0, 2.0).unwrap(), 4)
            .unwrap();
        assert_eq!(rep.threshold, Some(5));
        assert!((rep.rows[0].exact - 1.0 / 9.0).abs() < 1e-15);
        assert!((rep.rows[1].exact - 1.0 / 81.0).abs() < 1e-15);
    }
}
