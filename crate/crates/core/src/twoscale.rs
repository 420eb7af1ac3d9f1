//! Recovery of the homogenized solution from `u_eps` on a well-chosen disc,
//! the first-order two-scale expansion, and convergence rates in `eps`.

use serde::Serialize;

use crate::cell::CorrectorSampler;
use crate::elliptic::{
    assemble, assemble_homogenized, solve_dirichlet_with_stats, BoundaryData, BoundaryMask,
};
use crate::error::{Error, Result};
use crate::fields::{ball_integral, CoefficientField, DomainGrid, Mat2, ScalarField, DEFAULT_SUBSAMPLES};
use crate::linalg::CgStats;

/// Radii between which the recovery disc is chosen.
pub const R0_RANGE: (f64, f64) = (2.75, 2.875);
pub const R0_CANDIDATES: usize = 16;
/// `u_eps - u0` is measured on this ball.
pub const L2_RADIUS: f64 = 2.75;
/// The two-scale gradient error is measured on this ball.
pub const H1_RADIUS: f64 = 2.5;

#[derive(Clone, Debug)]
pub struct RecoveredU0 {
    pub u0: ScalarField,
    pub r0: f64,
    pub ring_energy: f64,
    /// `(radius, ring energy)` for every candidate.
    pub candidates: Vec<(f64, f64)>,
    pub stats: CgStats,
}

/// Discrete `int_{|x| = r} (u^2 + |grad u|^2)`: the sum over nodes in the
/// one-cell ring `r - h/2 <= |x| < r + h/2`, times `h`.
fn ring_energy(u: &ScalarField, grad: &[ScalarField; 2], r: f64) -> f64 {
    let grid = u.grid();
    let h = grid.h();
    let (lo2, hi2) = ((r - 0.5 * h).powi(2), (r + 0.5 * h).powi(2));
    let (lo, hi) = grid.node_range(r + h);
    let mut sum = 0.0;
    for j in lo..=hi {
        for i in lo..=hi {
            let x = grid.coord(i, j);
            let r2 = x[0] * x[0] + x[1] * x[1];
            if r2 >= lo2 && r2 < hi2 {
                let p = grid.index(i, j);
                let (v, gx, gy) = (u.values()[p], grad[0].values()[p], grad[1].values()[p]);
                sum += v * v + gx * gx + gy * gy;
            }
        }
    }
    sum * h
}

/// Picks `r0` among equally spaced candidates in [`R0_RANGE`] by minimal
/// ring energy (first candidate on ties), then solves the homogenized
/// problem on `B_{r0}` with `u_eps` interpolated onto the circle.
pub fn recover_u0(u_eps: &ScalarField, a_hat: Mat2, tol: f64) -> Result<RecoveredU0> {
    let grid = *u_eps.grid();
    if grid.half_extent() < R0_RANGE.1 + 2.0 * grid.h() {
        return Err(Error::Geometry(format!(
            "recovering u0 needs L >= {} + 2h, got L = {}",
            R0_RANGE.1,
            grid.half_extent()
        )));
    }
    let grad = u_eps.gradient();
    let step = (R0_RANGE.1 - R0_RANGE.0) / (R0_CANDIDATES - 1) as f64;
    let candidates: Vec<(f64, f64)> = (0..R0_CANDIDATES)
        .map(|k| {
            let r = R0_RANGE.0 + k as f64 * step;
            (r, ring_energy(u_eps, &grad, r))
        })
        .collect();
    drop(grad);
    let (r0, energy) = candidates
        .iter()
        .copied()
        .fold((f64::NAN, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best });
    let op = assemble_homogenized(a_hat, grid, BoundaryMask::Disc { radius: r0 })?;
    let g = BoundaryData::from_field("u_eps", u_eps.clone());
    let (u0, stats) = solve_dirichlet_with_stats(&op, &g, tol)?;
    Ok(RecoveredU0 { u0, r0, ring_energy: energy, candidates, stats })
}

/// `u0 + eps chi_j(x/eps) d_j u0` with centred differences for `grad u0`.
pub fn expansion(u0: &ScalarField, chi: &CorrectorSampler, eps: f64) -> ScalarField {
    if chi.is_zero() {
        return u0.clone();
    }
    let grid = *u0.grid();
    let [gx, gy] = u0.gradient();
    let np = grid.nodes_per_side();
    let values = (0..u0.values().len())
        .map(|p| {
            let x = grid.coord(p % np, p / np);
            let c = chi.chi([x[0] / eps, x[1] / eps]);
            u0.values()[p] + eps * (c[0] * gx.values()[p] + c[1] * gy.values()[p])
        })
        .collect();
    ScalarField::from_values_unchecked(grid, values)
}

/// `(|u_eps - u0|_{L2(B_{11/4})}, |grad(u_eps - u0 - eps chi_j d_j u0)|_{L2(B_{5/2})})`.
pub fn two_scale_errors(u_eps: &ScalarField, u0: &ScalarField, chi: &CorrectorSampler, eps: f64) -> Result<(f64, f64)> {
    if u_eps.grid() != u0.grid() {
        return Err(Error::Consistency("u_eps and u0 live on different grids".into()));
    }
    let m = DEFAULT_SUBSAMPLES;
    let l2 = ball_integral(&u_eps.zip_map(u0, |a, b| (a - b) * (a - b)), L2_RADIUS, m)?.sqrt();
    let w = u_eps.zip_map(&expansion(u0, chi, eps), |a, b| a - b);
    let [gx, gy] = w.gradient();
    let h1 = ball_integral(&gx.zip_map(&gy, |a, b| a * a + b * b), H1_RADIUS, m)?.sqrt();
    Ok((l2, h1))
}

/// `u_eps` on the square and the recovered `u0` for one `eps`.
#[derive(Clone, Debug)]
pub struct SolvedPair {
    pub eps: f64,
    pub u_eps: ScalarField,
    pub recovered: RecoveredU0,
    pub stats: CgStats,
}

pub fn solve_pair(
    a: &CoefficientField,
    a_hat: Mat2,
    g: &BoundaryData,
    eps: f64,
    grid: DomainGrid,
    tol: f64,
) -> Result<SolvedPair> {
    let op = assemble(a, eps, grid, BoundaryMask::Square)?;
    let (u_eps, stats) = solve_dirichlet_with_stats(&op, g, tol)?;
    drop(op);
    let recovered = recover_u0(&u_eps, a_hat, tol)?;
    Ok(SolvedPair { eps, u_eps, recovered, stats })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub n: usize,
    pub r0: f64,
    pub l2_err: f64,
    pub h1_err: f64,
    /// `|u_eps|_{L2(B_3)}`
    pub norm_b3: f64,
    /// `l2_err / (sqrt(eps) |u_eps|_{L2(B_3)})`
    pub constant: f64,
}

impl ConvergenceRow {
    pub fn from_pair(pair: &SolvedPair, chi: &CorrectorSampler) -> Result<Self> {
        let (l2_err, h1_err) = two_scale_errors(&pair.u_eps, &pair.recovered.u0, chi, pair.eps)?;
        let norm_b3 = ball_integral(&pair.u_eps.map(|v| v * v), 3.0, DEFAULT_SUBSAMPLES)?.sqrt();
        let constant = if norm_b3 > 0.0 { l2_err / (pair.eps.sqrt() * norm_b3) } else { 0.0 };
        Ok(Self {
            eps: pair.eps,
            n: pair.u_eps.grid().n(),
            r0: pair.recovered.r0,
            l2_err,
            h1_err,
            norm_b3,
            constant,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    /// Sorted by decreasing `eps`.
    pub rows: Vec<ConvergenceRow>,
    pub l2_slope: f64,
    pub h1_slope: f64,
    /// Errors sit at the discretization floor (constant coefficients), so
    /// the slopes carry no information.
    pub floor: bool,
}

/// Least-squares slope of `ln y` against `ln x`; `NaN` if any value is
/// non-positive or fewer than two points are given.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return f64::NAN;
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Collects rows (in any order) into a study with fitted slopes.
pub fn summarize_convergence(mut rows: Vec<ConvergenceRow>, constant_coefficients: bool) -> ConvergenceStudy {
    rows.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let l2: Vec<_> = rows.iter().map(|r| (r.eps, r.l2_err)).collect();
    let h1: Vec<_> = rows.iter().map(|r| (r.eps, r.h1_err)).collect();
    let (l2_slope, h1_slope) = (log_log_slope(&l2), log_log_slope(&h1));
    ConvergenceStudy { floor: constant_coefficients || l2_slope.is_nan(), rows, l2_slope, h1_slope }
}

/// Solves and measures every `(eps, grid)` case; `cases` must be ordered by
/// decreasing `eps`.
pub fn convergence_study(
    a: &CoefficientField,
    a_hat: Mat2,
    chi: &CorrectorSampler,
    g: &BoundaryData,
    cases: &[(f64, DomainGrid)],
    tol: f64,
) -> Result<ConvergenceStudy> {
    if cases.is_empty() {
        return Err(Error::Config("empty eps list".into()));
    }
    if cases.windows(2).any(|w| w[1].0 >= w[0].0) {
        return Err(Error::Config("eps list must be strictly decreasing".into()));
    }
    let rows = cases
        .iter()
        .map(|&(eps, grid)| ConvergenceRow::from_pair(&solve_pair(a, a_hat, g, eps, grid, tol)?, chi))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_convergence(rows, a.is_constant()))
}
