use serde::Serialize;

use crate::cell::CorrectorSampler;
use crate::continuation::{growth_check, GrowthOutcome, GrowthParams};
use crate::elliptic::oscillating_flux;
use crate::error::{Error, Result};
use crate::fields::{ball_integral, integrate_weighted, Annulus, CoefficientField, ScalarField, DEFAULT_SUBSAMPLES};

use super::cutoff::Cutoff;
use super::weight::{log_spaced, CarlemanConstants, CarlemanWeight};

/// Number of `tau` points per `lambda` in a sweep.
pub const TAU_POINTS: usize = 8;

fn same_grid(fields: &[&ScalarField], cutoff: &Cutoff) -> Result<()> {
    let g = cutoff.eta.grid();
    if fields.iter().all(|f| f.grid() == g) {
        Ok(())
    } else {
        Err(Error::Consistency("fields and cutoff live on different grids".into()))
    }
}

fn support(cutoff: &Cutoff) -> Result<Annulus> {
    Annulus::new(cutoff.profile.a, cutoff.profile.d)
}

/// Nodal values of the expanded remainder
///
/// ```text
/// R = 2 A grad u . grad eta + u A : D2 eta + u (A grad_y chi_j) . grad d_j eta
///   + 2 (A grad u) . grad_y chi_j d_j eta + u div_y(A chi_j) . grad d_j eta
///   + eps u chi_j A : D2 d_j eta + 2 eps chi_j (A grad d_j eta) . grad u
/// ```
///
/// with `A`, `chi` and their cell derivatives evaluated at `x / eps`, and
/// cutoff derivatives taken analytically. `grad u` uses centred differences.
pub fn expansion_remainder(
    u: &ScalarField,
    chi: &CorrectorSampler,
    eps: f64,
    a: &CoefficientField,
    cutoff: &Cutoff,
) -> Result<ScalarField> {
    same_grid(&[u], cutoff)?;
    let grid = *u.grid();
    let [ux, uy] = u.gradient();
    let n = grid.n();
    let (lo, hi) = grid.node_range(cutoff.profile.d);
    let mut out = vec![0.0; u.values().len()];
    for j in lo..=hi {
        for i in lo..=hi {
            let x = grid.coord(i, j);
            let eta = cutoff.jet(x);
            if eta.grad == [0.0; 2] && eta.hess == [[0.0; 2]; 2] {
                continue;
            }
            debug_assert!(i > 0 && j > 0 && i < n && j < n);
            let p = grid.index(i, j);
            let (uv, g) = (u.values()[p], [ux.values()[p], uy.values()[p]]);
            let y = [x[0] / eps, x[1] / eps];
            let m = a.eval(y);
            let s = chi.sample(y);
            let (h, t) = (eta.hess, eta.third);
            let mut r = 0.0;
            for i in 0..2 {
                for k in 0..2 {
                    let aik = m.get(i, k);
                    r += 2.0 * aik * g[k] * eta.grad[i] + uv * aik * h[i][k];
                    for jj in 0..2 {
                        r += uv * aik * s.grad[jj][k] * h[i][jj];
                        r += 2.0 * aik * g[k] * s.grad[jj][i] * eta.grad[jj];
                        r += eps * s.chi[jj] * uv * aik * t[i][k][jj];
                        r += 2.0 * eps * s.chi[jj] * aik * h[k][jj] * g[i];
                    }
                }
            }
            for jj in 0..2 {
                for k in 0..2 {
                    r += uv * s.div[jj][k] * h[k][jj];
                }
            }
            out[p] = r;
        }
    }
    ScalarField::from_values(grid, out)
}

/// `C` with `R^2 <= C (u^2 + |grad u|^2)` pointwise, from `|a_ik| <= 1/mu`,
/// the sup norms of the corrector data, and the cutoff derivative maxima on
/// the grid.
pub fn remainder_bound_constant(mu: f64, chi: &CorrectorSampler, eps: f64, cutoff: &Cutoff) -> f64 {
    let grid = *cutoff.eta.grid();
    let (lo, hi) = grid.node_range(cutoff.profile.d);
    let (mut e1, mut e2, mut e3) = (0.0f64, 0.0f64, 0.0f64);
    for j in lo..=hi {
        for i in lo..=hi {
            let jet = cutoff.jet(grid.coord(i, j));
            e1 = jet.grad.iter().fold(e1, |m, v| m.max(v.abs()));
            e2 = jet.hess.iter().flatten().fold(e2, |m, v| m.max(v.abs()));
            e3 = jet.third.iter().flatten().flatten().fold(e3, |m, v| m.max(v.abs()));
        }
    }
    let a = 1.0 / mu;
    let (c0, c1, c2) = chi.sup_norms();
    let cu = 4.0 * a * e2 + 8.0 * a * c1 * e2 + 4.0 * c2 * e2 + 8.0 * eps * c0 * a * e3;
    let cg = 8.0 * a * e1 + 16.0 * a * c1 * e1 + 16.0 * eps * c0 * a * e2;
    cu * cu + cg * cg
}

/// `u_eps - eps chi_j(x/eps) d_j u0`.
fn corrected(u: &ScalarField, u0: &ScalarField, chi: &CorrectorSampler, eps: f64) -> Result<ScalarField> {
    if chi.is_zero() {
        return Ok(u.clone());
    }
    let grid = *u.grid();
    let [gx, gy] = u0.gradient();
    let np = grid.nodes_per_side();
    let values = (0..u.values().len())
        .map(|p| {
            let x = grid.coord(p % np, p / np);
            let c = chi.chi([x[0] / eps, x[1] / eps]);
            u.values()[p] - eps * (c[0] * gx.values()[p] + c[1] * gy.values()[p])
        })
        .collect();
    ScalarField::from_values(grid, values)
}

/// `((u eta)^2, |grad((u - eps chi_j d_j u0) eta)|^2)` at the nodes.
fn lhs_integrands(
    u: &ScalarField,
    u0: &ScalarField,
    chi: &CorrectorSampler,
    eps: f64,
    cutoff: &Cutoff,
) -> Result<(ScalarField, ScalarField)> {
    same_grid(&[u, u0], cutoff)?;
    let eta = &cutoff.eta;
    let zero_order = u.zip_map(eta, |v, e| (v * e) * (v * e));
    let z_eta = corrected(u, u0, chi, eps)?.zip_map(eta, |v, e| v * e);
    let [gx, gy] = z_eta.gradient();
    Ok((zero_order, gx.zip_map(&gy, |p, q| p * p + q * q)))
}

/// Nodal integrands shared by every `(lambda, tau)` point.
pub struct CarlemanIntegrands {
    /// `(u eta)^2`
    zero_order: ScalarField,
    /// `|grad((u - eps chi d u0) eta)|^2`
    gradient: ScalarField,
    /// `R^2`
    remainder: ScalarField,
    region: Annulus,
    subsamples: usize,
}

impl CarlemanIntegrands {
    pub fn new(
        u: &ScalarField,
        u0: &ScalarField,
        chi: &CorrectorSampler,
        eps: f64,
        a: &CoefficientField,
        cutoff: &Cutoff,
    ) -> Result<Self> {
        let (zero_order, gradient) = lhs_integrands(u, u0, chi, eps, cutoff)?;
        let remainder = expansion_remainder(u, chi, eps, a, cutoff)?.map(|r| r * r);
        Ok(Self { zero_order, gradient, remainder, region: support(cutoff)?, subsamples: DEFAULT_SUBSAMPLES })
    }

    pub fn with_subsamples(mut self, m: usize) -> Self {
        self.subsamples = m;
        self
    }

    /// `[int phi^3 (u eta)^2 w, int phi |grad(z eta)|^2 w, int R^2 w]`.
    pub fn integrals(&self, weight: &CarlemanWeight) -> Result<[f64; 3]> {
        integrate_weighted(
            [&self.zero_order, &self.gradient, &self.remainder],
            self.region,
            self.subsamples,
            |r2| {
                let (phi, w) = weight.eval(r2);
                [phi * phi * phi * w, phi * w, w]
            },
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CarlemanLhs {
    pub zero_order: f64,
    pub gradient: f64,
    pub combined: f64,
}

fn lhs_from(i0: f64, i1: f64, weight: &CarlemanWeight, c0: f64) -> CarlemanLhs {
    let (l, t) = (weight.lambda, weight.tau);
    let zero_order = l.powi(4) * t.powi(3) * i0;
    let gradient = l * l * t * i1;
    CarlemanLhs { zero_order, gradient, combined: 0.5 * c0 * (zero_order + gradient) }
}

/// Left-hand side of the weighted inequality: `lambda^4 tau^3 int phi^3 (u
/// eta)^2 w`, `lambda^2 tau int phi |grad((u - eps chi_j d_j u0) eta)|^2 w`
/// and `C0/2` times their sum.
pub fn carleman_lhs(
    u: &ScalarField,
    u0: &ScalarField,
    chi: &CorrectorSampler,
    eps: f64,
    weight: &CarlemanWeight,
    cutoff: &Cutoff,
    c0: f64,
) -> Result<CarlemanLhs> {
    let (zero_order, gradient) = lhs_integrands(u, u0, chi, eps, cutoff)?;
    let [i0, i1] = integrate_weighted([&zero_order, &gradient], support(cutoff)?, DEFAULT_SUBSAMPLES, |r2| {
        let (phi, w) = weight.eval(r2);
        [phi * phi * phi * w, phi * w]
    })?;
    Ok(lhs_from(i0, i1, weight, c0))
}

/// `int R^2 w` with `R` from [`expansion_remainder`].
pub fn carleman_rhs(
    u: &ScalarField,
    chi: &CorrectorSampler,
    eps: f64,
    a: &CoefficientField,
    cutoff: &Cutoff,
    weight: &CarlemanWeight,
) -> Result<f64> {
    let r2 = expansion_remainder(u, chi, eps, a, cutoff)?.map(|r| r * r);
    Ok(integrate_weighted([&r2], support(cutoff)?, DEFAULT_SUBSAMPLES, |s| [weight.eval(s).1])?[0])
}

/// Relative `L2(B_3)` mismatch between `L_h(u eta + eps chi_j d_j eta u)` and
/// `-R`. Zero for `u = 0`.
pub fn lemma31_residual(
    u: &ScalarField,
    chi: &CorrectorSampler,
    eps: f64,
    a: &CoefficientField,
    cutoff: &Cutoff,
) -> Result<f64> {
    same_grid(&[u], cutoff)?;
    let grid = *u.grid();
    grid.require_ball(3.0)?;
    let np = grid.nodes_per_side();
    let w: Vec<f64> = (0..u.values().len())
        .map(|p| {
            let x = grid.coord(p % np, p / np);
            let jet = cutoff.jet(x);
            let c = chi.chi([x[0] / eps, x[1] / eps]);
            let uv = u.values()[p];
            uv * jet.value + eps * (c[0] * jet.grad[0] + c[1] * jet.grad[1]) * uv
        })
        .collect();
    let mut lw = vec![0.0; w.len()];
    oscillating_flux(a, eps, grid).apply(&w, &mut lw);
    drop(w);
    let r = expansion_remainder(u, chi, eps, a, cutoff)?;
    let diff = ScalarField::from_values(grid, lw.iter().zip(r.values()).map(|(l, r)| (l + r) * (l + r)).collect())?;
    let den = ball_integral(&r.map(|v| v * v), 3.0, DEFAULT_SUBSAMPLES)?;
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok((ball_integral(&diff, 3.0, DEFAULT_SUBSAMPLES)? / den).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CarlemanRow {
    pub lambda: f64,
    pub tau: f64,
    pub zero_order: f64,
    pub gradient: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; `NaN` when both sides vanish.
    pub ratio: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CarlemanReport {
    pub eps: f64,
    pub constants: CarlemanConstants,
    pub tau_range: (f64, f64),
    pub growth: Option<GrowthOutcome>,
    pub rows: Vec<CarlemanRow>,
    pub max_ratio: f64,
    /// Points with `lhs / rhs > 1`.
    pub violations: usize,
    pub degenerate: bool,
}

/// Sweeps `lambda` over `lambdas` and `tau` over [`TAU_POINTS`] log-spaced
/// points of the admissible range, recording both sides at each point.
#[allow(clippy::too_many_arguments)]
pub fn carleman_check(
    u: &ScalarField,
    u0: &ScalarField,
    chi: &CorrectorSampler,
    eps: f64,
    a: &CoefficientField,
    constants: &CarlemanConstants,
    lambdas: &[f64],
    cutoff: &Cutoff,
    growth: Option<&GrowthParams>,
) -> Result<CarlemanReport> {
    constants.validate()?;
    if lambdas.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    for &l in lambdas {
        constants.require_lambda(l)?;
    }
    let sq = u.map(|v| v * v);
    let (b1, b3) = (ball_integral(&sq, 1.0, DEFAULT_SUBSAMPLES)?, ball_integral(&sq, 3.0, DEFAULT_SUBSAMPLES)?);
    drop(sq);
    let tau_range = constants.tau_range(b3.sqrt(), b1.sqrt())?;
    let growth = growth.map(|g| growth_check(u, g)).transpose()?;
    let integrands = CarlemanIntegrands::new(u, u0, chi, eps, a, cutoff)?;
    let taus = log_spaced(tau_range.0, tau_range.1, TAU_POINTS);
    let mut rows = Vec::with_capacity(lambdas.len() * taus.len());
    for &lambda in lambdas {
        for &tau in &taus {
            let weight = CarlemanWeight::normalized_at(lambda, tau, cutoff.profile.a)?;
            let [i0, i1, rhs] = integrands.integrals(&weight)?;
            let lhs = lhs_from(i0, i1, &weight, constants.c0);
            let ratio = if rhs > 0.0 {
                lhs.combined / rhs
            } else if lhs.combined == 0.0 {
                f64::NAN
            } else {
                f64::INFINITY
            };
            rows.push(CarlemanRow {
                lambda,
                tau,
                zero_order: lhs.zero_order,
                gradient: lhs.gradient,
                lhs: lhs.combined,
                rhs,
                ratio,
                margin: rhs - lhs.combined,
            });
        }
    }
    let degenerate = rows.iter().any(|r| r.ratio.is_nan());
    let max_ratio = rows.iter().map(|r| r.ratio).filter(|r| !r.is_nan()).fold(0.0, f64::max);
    let violations = rows.iter().filter(|r| r.ratio > 1.0).count();
    Ok(CarlemanReport { eps, constants: *constants, tau_range, growth, rows, max_ratio, violations, degenerate })
}
