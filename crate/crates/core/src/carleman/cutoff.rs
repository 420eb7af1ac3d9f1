use crate::error::Result;
use crate::fields::{DomainGrid, ScalarField};

use super::jet::Jet;

/// Radial profile `eta(r) = psi((r - a)/(b - a)) psi((d - r)/(d - c))`, with
/// the smooth step `psi(t) = f(t) / (f(t) + f(1 - t))`, `f(t) = exp(-1/t)`
/// for `t > 0`. Zero for `r <= a` and `r >= d`, one on `[b, c]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffProfile {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl CutoffProfile {
    /// Vanishes inside `B_{1/2}` and outside `B_{5/2}`, one on
    /// `2/3 <= |x| <= 7/3`.
    pub const STANDARD: CutoffProfile = CutoffProfile { a: 0.5, b: 2.0 / 3.0, c: 7.0 / 3.0, d: 2.5 };

    /// Radial jet `[eta, eta', eta'', eta''']` at `r`.
    pub fn radial(&self, r: f64) -> [f64; 4] {
        if r <= self.a || r >= self.d {
            return [0.0; 4];
        }
        let up = step(Jet::affine((r - self.a) / (self.b - self.a), 1.0 / (self.b - self.a)));
        let down = step(Jet::affine((self.d - r) / (self.d - self.c), -1.0 / (self.d - self.c)));
        (up * down).derivatives()
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.radial(x[0].hypot(x[1]))[0]
    }

    /// Cartesian value, gradient, Hessian and third derivatives at `x`.
    pub fn jet(&self, x: [f64; 2]) -> CutoffJet {
        let r = x[0].hypot(x[1]);
        let [g0, g1, g2, g3] = self.radial(r);
        if g0 == 0.0 && g1 == 0.0 && g2 == 0.0 && g3 == 0.0 {
            return CutoffJet::default();
        }
        let n = [x[0] / r, x[1] / r];
        // hess = A n n + B I,  A = g'' - g'/r,  B = g'/r
        let a = g2 - g1 / r;
        let b = g1 / r;
        let da = g3 - g2 / r + g1 / (r * r);
        let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
        let mut jet = CutoffJet { value: g0, grad: [g1 * n[0], g1 * n[1]], ..Default::default() };
        for i in 0..2 {
            for j in 0..2 {
                jet.hess[i][j] = a * n[i] * n[j] + b * delta(i, j);
                for k in 0..2 {
                    jet.third[i][j][k] = (da - 2.0 * a / r) * n[i] * n[j] * n[k]
                        + a / r * (delta(i, k) * n[j] + delta(j, k) * n[i] + delta(i, j) * n[k]);
                }
            }
        }
        jet
    }
}

fn step(t: Jet) -> Jet {
    let t0 = t.value();
    if t0 <= 0.0 {
        Jet::default()
    } else if t0 >= 1.0 {
        Jet::constant(1.0)
    } else {
        let f = (-t.recip()).exp();
        let g = (-(Jet::constant(1.0) - t).recip()).exp();
        f / (f + g)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CutoffJet {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
    /// `third[i][j][k] = d_i d_j d_k eta`
    pub third: [[[f64; 2]; 2]; 2],
}

/// A radial cutoff together with its samples on a domain grid.
#[derive(Clone, Debug)]
pub struct Cutoff {
    pub profile: CutoffProfile,
    pub eta: ScalarField,
}

impl Cutoff {
    pub fn new(grid: DomainGrid, profile: CutoffProfile) -> Result<Self> {
        grid.require_ball(profile.d)?;
        let eta = ScalarField::from_fn(grid, |x| profile.value(x))?;
        Ok(Self { profile, eta })
    }

    pub fn jet(&self, x: [f64; 2]) -> CutoffJet {
        self.profile.jet(x)
    }
}

/// The standard cutoff sampled on `grid`.
pub fn make_cutoff(grid: DomainGrid) -> Result<Cutoff> {
    Cutoff::new(grid, CutoffProfile::STANDARD)
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: CutoffProfile = CutoffProfile::STANDARD;

    #[test]
    fn support_and_plateau() {
        assert_eq!(P.value([0.0, 0.0]), 0.0);
        assert_eq!(P.value([1.0, 0.0]), 1.0);
        assert_eq!(P.value([0.0, 2.6]), 0.0);
        assert!((P.value([7.0 / 12.0, 0.0]) - 0.5).abs() < 1e-14);
        for k in 0..=200 {
            let r = 3.0 * k as f64 / 200.0;
            let v = P.value([r, 0.0]);
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn radial_derivatives_match_differences() {
        let h = 1e-4;
        for r in [0.55, 0.6, 0.64, 2.4, 2.45] {
            let j = P.radial(r);
            let (m, p) = (P.radial(r - h), P.radial(r + h));
            for k in 0..3 {
                let fd = (p[k] - m[k]) / (2.0 * h);
                assert!((fd - j[k + 1]).abs() < 1e-4 * (1.0 + j[k + 1].abs()), "r={r} k={k}: {fd} vs {}", j[k + 1]);
            }
        }
    }

    #[test]
    fn cartesian_derivatives_match_differences() {
        let h = 1e-5;
        for x in [[0.4, 0.3], [-0.2, 0.6], [1.5, -1.8], [2.2, 0.5]] {
            let j = P.jet(x);
            for k in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let (jp, jm) = (P.jet(xp), P.jet(xm));
                assert!((j.grad[k] - (jp.value - jm.value) / (2.0 * h)).abs() < 1e-5);
                for i in 0..2 {
                    let fd = (jp.grad[i] - jm.grad[i]) / (2.0 * h);
                    assert!((j.hess[i][k] - fd).abs() < 1e-4 * (1.0 + fd.abs()));
                    for l in 0..2 {
                        let fd = (jp.hess[i][l] - jm.hess[i][l]) / (2.0 * h);
                        assert!((j.third[i][l][k] - fd).abs() < 1e-3 * (1.0 + fd.abs()), "{x:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn gradient_bound_on_grid() {
        let grid = DomainGrid::new(3.0, 240).unwrap();
        let c = make_cutoff(grid).unwrap();
        let [gx, gy] = c.eta.gradient();
        let max_grad = gx.zip_map(&gy, |a, b| a.hypot(b)).max_abs();
        // psi' peaks at t = 1/2 with value 2
        let t = 1e-3;
        let max_psi = (0..1000)
            .map(|k| {
                let s = (k as f64 + 0.5) / 1000.0;
                let sp = |s: f64| step(Jet::affine(s, 1.0)).derivatives()[1];
                sp(s).max(sp((s + t).min(1.0 - t)))
            })
            .fold(0.0, f64::max);
        assert!(max_grad <= 12.0 * max_psi);
    }
}
