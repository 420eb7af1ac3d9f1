//! Quadrature over discs and annuli centred at the origin.
//!
//! Each node owns its dual cell `[x - h/2, x + h/2]^2`. The cell is split into
//! `m x m` sub-squares; a sub-square contributes when its midpoint lies in the
//! region. Inside the cell the integrand is reconstructed from a local
//! quadratic Taylor model built with centered differences and clamped to the
//! range of the 3x3 neighbourhood, so non-negative data stay non-negative and
//! the integral is monotone in the outer radius. Radial weights are evaluated
//! exactly at the sub-square midpoints.

use serde::Serialize;

use crate::error::{Error, Result};

use super::field::ScalarField;
use super::grid::{DomainGrid, Grid};

pub const DEFAULT_SUBSAMPLES: usize = 4;

/// `{ r_in <= |x| < r_out }`; `r_in = 0` gives the open ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Annulus {
    pub r_in: f64,
    pub r_out: f64,
}

impl Annulus {
    pub fn ball(r: f64) -> Self {
        Self { r_in: 0.0, r_out: r }
    }

    pub fn new(r_in: f64, r_out: f64) -> Result<Self> {
        if !(r_in >= 0.0 && r_out > r_in) {
            return Err(Error::Geometry(format!("invalid annulus [{r_in}, {r_out})")));
        }
        Ok(Self { r_in, r_out })
    }
}

/// Power of `phi` (and `|x|^2`) multiplying the normalized Carleman weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum WeightPower {
    /// `w`
    W,
    /// `w phi`
    WPhi,
    /// `w phi^3`
    WPhi3,
    /// `w |x|^2 phi^2`
    WX2Phi2,
}

impl WeightPower {
    #[inline]
    pub fn factor(self, r2: f64, phi: f64) -> f64 {
        match self {
            WeightPower::W => 1.0,
            WeightPower::WPhi => phi,
            WeightPower::WPhi3 => phi * phi * phi,
            WeightPower::WX2Phi2 => r2 * phi * phi,
        }
    }
}

#[derive(Clone, Copy)]
struct LocalModel {
    v: f64,
    gx: f64,
    gy: f64,
    hxx: f64,
    hyy: f64,
    hxy: f64,
    lo: f64,
    hi: f64,
}

impl LocalModel {
    #[inline]
    fn build(f: &[f64], g: &DomainGrid, i: usize, j: usize) -> Self {
        let n = g.n();
        let at = |a: usize, b: usize| f[g.index(a, b)];
        let v = at(i, j);
        let (mut lo, mut hi) = (v, v);
        for b in j.saturating_sub(1)..=(j + 1).min(n) {
            for a in i.saturating_sub(1)..=(i + 1).min(n) {
                let w = at(a, b);
                lo = lo.min(w);
                hi = hi.max(w);
            }
        }
        if i == 0 || j == 0 || i == n || j == n {
            return Self { v, gx: 0.0, gy: 0.0, hxx: 0.0, hyy: 0.0, hxy: 0.0, lo, hi };
        }
        let h = g.h();
        let (e, w, nn, s) = (at(i + 1, j), at(i - 1, j), at(i, j + 1), at(i, j - 1));
        Self {
            v,
            gx: (e - w) / (2.0 * h),
            gy: (nn - s) / (2.0 * h),
            hxx: (e - 2.0 * v + w) / (h * h),
            hyy: (nn - 2.0 * v + s) / (h * h),
            hxy: (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1))
                / (4.0 * h * h),
            lo,
            hi,
        }
    }

    #[inline]
    fn eval(&self, dx: f64, dy: f64) -> f64 {
        let q = self.v
            + self.gx * dx
            + self.gy * dy
            + 0.5 * (self.hxx * dx * dx + self.hyy * dy * dy)
            + self.hxy * dx * dy;
        q.clamp(self.lo, self.hi)
    }
}

fn check_inputs(grid: &DomainGrid, region: Annulus, m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::Config(format!("need at least 2 subsamples per axis, got {m}")));
    }
    if !(region.r_in >= 0.0 && region.r_out > region.r_in) {
        return Err(Error::Geometry(format!(
            "invalid annulus [{}, {})",
            region.r_in, region.r_out
        )));
    }
    grid.require_ball(region.r_out)
}

/// Integrates `K` nodal fields over `region`, each against its own radial
/// weight. `weight` receives `|x|^2` and returns the `K` weight values; one
/// evaluation is shared by all fields.
pub fn integrate_weighted<const K: usize>(
    fields: [&ScalarField; K],
    region: Annulus,
    m: usize,
    weight: impl Fn(f64) -> [f64; K],
) -> Result<[f64; K]> {
    let grid = *fields
        .first()
        .ok_or_else(|| Error::Config("no fields to integrate".into()))?
        .grid();
    if fields.iter().any(|f| *f.grid() != grid) {
        return Err(Error::Consistency("fields live on different grids".into()));
    }
    check_inputs(&grid, region, m)?;

    let h = grid.h();
    let half = 0.5 * h;
    let delta = h / m as f64;
    let cell_area = delta * delta;
    let offsets: Vec<f64> = (0..m).map(|a| -half + (a as f64 + 0.5) * delta).collect();
    let (rin2, rout2) = (region.r_in * region.r_in, region.r_out * region.r_out);
    let (lo, hi) = grid.node_range(region.r_out);

    let mut total = [0.0; K];
    for j in lo..=hi {
        let mut row = [0.0; K];
        for i in lo..=hi {
            let [x, y] = grid.coord(i, j);
            let near = |c: f64| if c.abs() <= half { 0.0 } else { c.abs() - half };
            let far = |c: f64| c.abs() + half;
            let (nx, ny) = (near(x), near(y));
            if nx * nx + ny * ny >= rout2 {
                continue;
            }
            let (fx, fy) = (far(x), far(y));
            if fx * fx + fy * fy < rin2 {
                continue;
            }
            let models: [LocalModel; K] =
                std::array::from_fn(|k| LocalModel::build(fields[k].values(), &grid, i, j));
            for &dy in &offsets {
                let py = y + dy;
                for &dx in &offsets {
                    let px = x + dx;
                    let r2 = px * px + py * py;
                    if r2 < rin2 || r2 >= rout2 {
                        continue;
                    }
                    let w = weight(r2);
                    for k in 0..K {
                        if w[k] != 0.0 {
                            row[k] += models[k].eval(dx, dy) * w[k];
                        }
                    }
                }
            }
        }
        for k in 0..K {
            total[k] += row[k] * cell_area;
        }
    }
    Ok(total)
}

/// Measure of the region as seen by the subsample indicator.
pub fn region_area(grid: &DomainGrid, region: Annulus, m: usize) -> Result<f64> {
    let ones = ScalarField::from_values_unchecked(*grid, vec![1.0; grid.node_count()]);
    Ok(integrate_weighted([&ones], region, m, |_| [1.0])?[0])
}

pub fn ball_integral(f: &ScalarField, r: f64, m: usize) -> Result<f64> {
    Ok(integrate_weighted([f], Annulus::ball(r), m, |_| [1.0])?[0])
}

pub fn annulus_integral(f: &ScalarField, r_in: f64, r_out: f64, m: usize) -> Result<f64> {
    Ok(integrate_weighted([f], Annulus::new(r_in, r_out)?, m, |_| [1.0])?[0])
}

/// Ball average `(1/|B_r|) int_{B_r} f`, with `|B_r|` measured by the same
/// indicator so that constants average to themselves exactly.
pub fn ball_mean(f: &ScalarField, r: f64, m: usize) -> Result<f64> {
    Ok(ball_integral(f, r, m)? / region_area(f.grid(), Annulus::ball(r), m)?)
}

/// `int_{r_in <= |x| < r_out} f * power * exp(2 tau (phi - 1))` with
/// `phi = exp(-lambda |x|^2)`.
pub fn annulus_weighted_integral(
    f: &ScalarField,
    r_in: f64,
    r_out: f64,
    lambda: f64,
    tau: f64,
    power: WeightPower,
    m: usize,
) -> Result<f64> {
    if !(lambda >= 0.0 && tau >= 0.0) {
        return Err(Error::Domain(format!("weight needs lambda, tau >= 0 (got {lambda}, {tau})")));
    }
    let region = Annulus::new(r_in, r_out)?;
    Ok(integrate_weighted([f], region, m, |r2| {
        let phi = (-lambda * r2).exp();
        [power.factor(r2, phi) * (2.0 * tau * (phi - 1.0)).exp()]
    })?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn harmonic(k: i32) -> impl Fn([f64; 2]) -> f64 {
        move |x| {
            let r = x[0].hypot(x[1]);
            r.powi(k) * (k as f64 * x[1].atan2(x[0])).cos()
        }
    }

    #[test]
    fn unit_disc_area() {
        let g = DomainGrid::new(3.0, 256).unwrap();
        let one = ScalarField::from_fn(g, |_| 1.0).unwrap();
        let a = ball_integral(&one, 1.0, 4).unwrap();
        assert!((a - PI).abs() < 1e-3, "area {a}");
    }

    #[test]
    fn zero_integrates_to_zero() {
        let g = DomainGrid::new(3.0, 64).unwrap();
        assert_eq!(ball_integral(&ScalarField::zeros(g), 2.0, 4).unwrap(), 0.0);
    }

    #[test]
    fn homogeneity_ratio_degree_two() {
        let g = DomainGrid::new(3.0, 512).unwrap();
        let p = harmonic(2);
        let f = ScalarField::from_fn(g, |x| p(x).powi(2)).unwrap();
        let ratio = ball_integral(&f, 1.0, 4).unwrap() / ball_integral(&f, 3.0, 4).unwrap();
        let exact = 3f64.powi(-6);
        assert!((ratio / exact - 1.0).abs() < 1e-3, "ratio {ratio} vs {exact}");
    }

    #[test]
    fn ball_exceeding_domain_is_geometry_error() {
        let g = DomainGrid::new(2.0, 32).unwrap();
        let f = ScalarField::zeros(g);
        assert!(matches!(ball_integral(&f, 2.5, 4), Err(Error::Geometry(_))));
    }

    #[test]
    fn weighted_tau_zero_is_annulus_area() {
        let g = DomainGrid::new(3.0, 256).unwrap();
        let one = ScalarField::from_fn(g, |_| 1.0).unwrap();
        let w = annulus_weighted_integral(&one, 1.0, 2.0, 1.0, 0.0, WeightPower::W, 4).unwrap();
        let plain = annulus_integral(&one, 1.0, 2.0, 4).unwrap();
        assert_eq!(w, plain);
        assert!((w - 3.0 * PI).abs() < 2e-3);
    }

    #[test]
    fn weighted_matches_radial_oracle() {
        // 2 pi int_1^2 rho exp(2 (exp(-rho^2) - 1)) d rho, composite Simpson
        let n = 20_000;
        let f = |rho: f64| rho * (2.0 * ((-rho * rho).exp() - 1.0)).exp();
        let h = 1.0 / n as f64;
        let mut s = f(1.0) + f(2.0);
        for k in 1..n {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(1.0 + k as f64 * h);
        }
        let oracle = 2.0 * PI * s * h / 3.0;
        let g = DomainGrid::new(3.0, 256).unwrap();
        let one = ScalarField::from_fn(g, |_| 1.0).unwrap();
        let q = annulus_weighted_integral(&one, 1.0, 2.0, 1.0, 1.0, WeightPower::W, 4).unwrap();
        assert!((q - oracle).abs() < 1e-3, "{q} vs {oracle}");
    }

    #[test]
    fn large_lambda_kills_weight() {
        let g = DomainGrid::new(3.0, 128).unwrap();
        let one = ScalarField::from_fn(g, |_| 1.0).unwrap();
        let q = annulus_weighted_integral(&one, 1.0, 2.0, 50.0, 5.0, WeightPower::W, 4).unwrap();
        // phi ~ 0 on the annulus, so the weight is ~ exp(-2 tau)
        let area = annulus_integral(&one, 1.0, 2.0, 4).unwrap();
        assert!((q - area * (-10f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn ball_mean_of_constant_is_exact() {
        let g = DomainGrid::new(3.0, 96).unwrap();
        let c = ScalarField::from_fn(g, |_| 2.5).unwrap();
        assert!((ball_mean(&c, 1.3, 4).unwrap() - 2.5).abs() < 1e-14);
    }
}
