use serde::{Deserialize, Serialize};

use crate::elliptic::harmonic_polynomial;
use crate::error::{Error, Result};
use crate::fields::{
    annulus_weighted_integral, integrate_weighted, Annulus, DomainGrid, Mat2, ScalarField, WeightPower,
    DEFAULT_SUBSAMPLES,
};

use super::cutoff::Cutoff;
use super::weight::{CarlemanConstants, CarlemanWeight};

/// Empirical admissible `C0` for the constant-coefficient weighted estimate:
/// `int [L0(v eta)]^2 w / int (lambda^4 tau^3 phi^3 (v eta)^2 + lambda^2 tau
/// phi |grad(v eta)|^2) w`, with `L0 = -div(a_hat grad .)` applied by centred
/// second differences.
pub fn classical_carleman_ratio(v: &ScalarField, cutoff: &Cutoff, a_hat: Mat2, lambda: f64, tau: f64) -> Result<f64> {
    if v.grid() != cutoff.eta.grid() {
        return Err(Error::Consistency("field and cutoff live on different grids".into()));
    }
    let weight = CarlemanWeight::normalized_at(lambda, tau, cutoff.profile.a)?;
    let p = v.zip_map(&cutoff.eta, |a, b| a * b);
    let [px, py] = p.gradient();
    let grad2 = px.zip_map(&py, |a, b| a * a + b * b);
    drop((px, py));
    let [hxx, hyy, hxy] = p.hessian();
    let a = a_hat.symmetrized();
    let (a11, a12, a22) = (a.get(0, 0), a.get(0, 1), a.get(1, 1));
    let l0 = ScalarField::from_values(
        *v.grid(),
        (0..hxx.values().len())
            .map(|k| {
                let l = -(a11 * hxx.values()[k] + 2.0 * a12 * hxy.values()[k] + a22 * hyy.values()[k]);
                l * l
            })
            .collect(),
    )?;
    drop((hxx, hyy, hxy));
    let p2 = p.map(|x| x * x);
    let region = Annulus::new(cutoff.profile.a, cutoff.profile.d)?;
    let [i0, i1, rhs] = integrate_weighted([&p2, &grad2, &l0], region, DEFAULT_SUBSAMPLES, |r2| {
        let (phi, w) = weight.eval(r2);
        [phi * phi * phi * w, phi * w, w]
    })?;
    let lhs = lambda.powi(4) * tau.powi(3) * i0 + lambda * lambda * tau * i1;
    if !(lhs > 0.0) {
        return Err(Error::Degenerate("v eta vanishes identically on the cutoff support".into()));
    }
    Ok(rhs / lhs)
}

/// `a_hat^{-1/2}` for a symmetric positive definite `a_hat`.
fn inverse_sqrt(a: Mat2) -> Result<Mat2> {
    let a = a.symmetrized();
    let det = a.get(0, 0) * a.get(1, 1) - a.get(0, 1) * a.get(0, 1);
    let tr = a.get(0, 0) + a.get(1, 1);
    if !(det > 0.0 && tr > 0.0) {
        return Err(Error::Consistency(format!("tensor {a:?} is not positive definite")));
    }
    // sqrt(A) = (A + sqrt(det) I) / sqrt(tr + 2 sqrt(det))
    let sd = det.sqrt();
    let t = (tr + 2.0 * sd).sqrt();
    let s = Mat2::symmetric((a.get(0, 0) + sd) / t, a.get(0, 1) / t, (a.get(1, 1) + sd) / t);
    let ds = s.get(0, 0) * s.get(1, 1) - s.get(0, 1) * s.get(0, 1);
    Ok(Mat2::symmetric(s.get(1, 1) / ds, -s.get(0, 1) / ds, s.get(0, 0) / ds))
}

/// `p_k(a_hat^{-1/2} x)` with `p_k = Re (x1 + i x2)^k`: a solution of
/// `div(a_hat grad v) = 0`.
pub fn probe_field(a_hat: Mat2, k: u32, grid: DomainGrid) -> Result<ScalarField> {
    let t = inverse_sqrt(a_hat)?;
    let p = harmonic_polynomial(k);
    ScalarField::from_fn(grid, |x| p.value(t.mul_vec(x)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub degree: u32,
    pub lambda: f64,
    pub tau: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Calibration {
    pub constants: CarlemanConstants,
    pub rows: Vec<ProbeRow>,
}

impl Calibration {
    /// Minimum probe ratio at each `(lambda, tau)`, in sweep order.
    pub fn per_point_minima(&self) -> Vec<(f64, f64, f64)> {
        let mut out: Vec<(f64, f64, f64)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|(l, t, _)| *l == r.lambda && *t == r.tau) {
                Some(e) => e.2 = e.2.min(r.ratio),
                None => out.push((r.lambda, r.tau, r.ratio)),
            }
        }
        out
    }

    /// Largest over `lambda` of `max_tau / min_tau` of the per-point minima.
    pub fn tau_spread(&self) -> f64 {
        let minima = self.per_point_minima();
        let mut spread: f64 = 1.0;
        let mut lambdas: Vec<f64> = minima.iter().map(|m| m.0).collect();
        lambdas.dedup();
        for l in lambdas {
            let vals: Vec<f64> = minima.iter().filter(|m| m.0 == l).map(|m| m.2).collect();
            let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
            spread = spread.max(hi / lo);
        }
        spread
    }
}

/// Probe suite for `C0`: `a_hat`-harmonic polynomials of the given degrees
/// against the standard cutoff on `grid`; `C0 = 0.5 * min ratio`.
pub fn calibrate_c0(
    a_hat: Mat2,
    grid: DomainGrid,
    degrees: &[u32],
    lambdas: &[f64],
    taus: &[f64],
    base: CarlemanConstants,
) -> Result<Calibration> {
    if degrees.is_empty() || lambdas.is_empty() || taus.is_empty() {
        return Err(Error::Config("calibration probe suite is empty".into()));
    }
    for &l in lambdas {
        base.require_lambda(l)?;
    }
    if let Some(t) = taus.iter().find(|&&t| t < base.tau0) {
        return Err(Error::Config(format!("tau = {t} is below tau0 = {}", base.tau0)));
    }
    let cutoff = super::make_cutoff(grid)?;
    let mut rows = Vec::new();
    for &k in degrees {
        let v = probe_field(a_hat, k, grid)?;
        for &lambda in lambdas {
            for &tau in taus {
                let ratio = classical_carleman_ratio(&v, &cutoff, a_hat, lambda, tau)?;
                rows.push(ProbeRow { degree: k, lambda, tau, ratio });
            }
        }
    }
    let min = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    if !(min > 0.0 && min.is_finite()) {
        return Err(Error::Consistency(format!("calibration produced a non-positive ratio {min}")));
    }
    Ok(Calibration { constants: base.with_c0(0.5 * min), rows })
}

/// Empirical constant of the weighted Caccioppoli inequality on the annuli
/// `s1 < s2 < s3 < s4`:
/// `int_{s2<|x|<s3} |grad u|^2 w / ( ((s4-s3)^-1 + (s2-s1)^-1)^2 int_{s1<|x|<s4} u^2 w
///  + lambda^2 tau^2 int_{s1<|x|<s4} |x|^2 u^2 phi^2 w )`, with `w = exp(2 tau (phi - 1))`.
pub fn caccioppoli_constant(u: &ScalarField, radii: [f64; 4], lambda: f64, tau: f64) -> Result<f64> {
    let [s1, s2, s3, s4] = radii;
    if !(0.0 <= s1 && s1 < s2 && s2 < s3 && s3 < s4 && s4 <= 3.0) {
        return Err(Error::Config(format!("need 0 <= s1 < s2 < s3 < s4 <= 3, got {radii:?}")));
    }
    let [gx, gy] = u.gradient();
    let g2 = gx.zip_map(&gy, |a, b| a * a + b * b);
    let u2 = u.map(|v| v * v);
    let m = DEFAULT_SUBSAMPLES;
    let num = annulus_weighted_integral(&g2, s2, s3, lambda, tau, WeightPower::W, m)?;
    let outer = annulus_weighted_integral(&u2, s1, s4, lambda, tau, WeightPower::W, m)?;
    let moment = annulus_weighted_integral(&u2, s1, s4, lambda, tau, WeightPower::WX2Phi2, m)?;
    let c = 1.0 / (s4 - s3) + 1.0 / (s2 - s1);
    let den = c * c * outer + lambda * lambda * tau * tau * moment;
    if !(den > 0.0) {
        return Err(Error::Degenerate("u vanishes on the outer annulus".into()));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carleman::make_cutoff;
    use std::f64::consts::PI;

    #[test]
    fn inverse_square_root() {
        let a = Mat2::symmetric(2.0, 0.3, 0.7);
        let t = inverse_sqrt(a).unwrap();
        // t a t = I
        let mul = |p: Mat2, q: Mat2| {
            let mut m = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] = (0..2).map(|k| p.get(i, k) * q.get(k, j)).sum();
                }
            }
            Mat2(m)
        };
        let id = mul(mul(t, a), t);
        assert!(id.sub(&Mat2::IDENTITY).max_abs_entry() < 1e-12);
    }

    #[test]
    fn classical_ratio_is_scale_invariant_and_positive() {
        let grid = DomainGrid::new(3.0, 192).unwrap();
        let cutoff = make_cutoff(grid).unwrap();
        let v = probe_field(Mat2::IDENTITY, 2, grid).unwrap();
        let r = classical_carleman_ratio(&v, &cutoff, Mat2::IDENTITY, 2.0, 10.0).unwrap();
        let r10 = classical_carleman_ratio(&v.scaled(10.0), &cutoff, Mat2::IDENTITY, 2.0, 10.0).unwrap();
        assert!(r > 0.0);
        assert!((r / r10 - 1.0).abs() < 1e-10);
        let zero = ScalarField::zeros(grid);
        assert!(matches!(
            classical_carleman_ratio(&zero, &cutoff, Mat2::IDENTITY, 2.0, 10.0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn probes_solve_the_constant_coefficient_equation() {
        let a = Mat2::diag(0.5, 1.0 / 3f64.sqrt());
        let grid = DomainGrid::new(1.0, 64).unwrap();
        let v = probe_field(a, 2, grid).unwrap();
        let [hxx, hyy, _] = v.hessian();
        let l = hxx.zip_map(&hyy, |p, q| a.get(0, 0) * p + a.get(1, 1) * q);
        assert!(l.max_abs() < 1e-9);
    }

    #[test]
    fn caccioppoli_closed_form_for_a_linear_field() {
        // u = x1, tau = 0: numerator pi (s3^2 - s2^2),
        // denominator c^2 pi (s4^4 - s1^4) / 4
        let grid = DomainGrid::new(3.0, 384).unwrap();
        let u = ScalarField::from_fn(grid, |x| x[0]).unwrap();
        let s = [0.5, 1.0, 2.0, 2.5];
        let got = caccioppoli_constant(&u, s, 1.0, 0.0).unwrap();
        let c = 1.0 / (s[3] - s[2]) + 1.0 / (s[1] - s[0]);
        let exact = PI * (s[2] * s[2] - s[1] * s[1]) / (c * c * PI * (s[3].powi(4) - s[0].powi(4)) / 4.0);
        assert!((got / exact - 1.0).abs() < 1e-3, "{got} vs {exact}");
        let one = ScalarField::from_fn(grid, |_| 1.0).unwrap();
        assert_eq!(caccioppoli_constant(&one, s, 1.0, 5.0).unwrap(), 0.0);
    }
}
