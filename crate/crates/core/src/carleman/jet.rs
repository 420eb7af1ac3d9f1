//! Truncated Taylor arithmetic to third order, enough for the cutoff's
//! analytic derivatives.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Taylor coefficients `c_k = f^(k)(r) / k!`, `k = 0..=3`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct Jet(pub [f64; 4]);

impl Jet {
    pub fn constant(v: f64) -> Self {
        Jet([v, 0.0, 0.0, 0.0])
    }

    /// The affine map `r -> slope (r - r0)` evaluated at `r`.
    pub fn affine(value: f64, slope: f64) -> Self {
        Jet([value, slope, 0.0, 0.0])
    }

    pub fn value(self) -> f64 {
        self.0[0]
    }

    /// `[f, f', f'', f''']`.
    pub fn derivatives(self) -> [f64; 4] {
        let c = self.0;
        [c[0], c[1], 2.0 * c[2], 6.0 * c[3]]
    }

    pub fn exp(self) -> Self {
        let c = self.0;
        let mut e = [c[0].exp(), 0.0, 0.0, 0.0];
        for k in 1..4 {
            e[k] = (1..=k).map(|j| j as f64 * c[j] * e[k - j]).sum::<f64>() / k as f64;
        }
        Jet(e)
    }

    pub fn recip(self) -> Self {
        Jet::constant(1.0) / self
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|k| self.0[k] + o.0[k]))
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|k| self.0[k] - o.0[k]))
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet(self.0.map(|v| -v))
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        Jet(std::array::from_fn(|k| (0..=k).map(|j| self.0[j] * o.0[k - j]).sum()))
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let (a, b) = (self.0, o.0);
        let mut q = [0.0; 4];
        for k in 0..4 {
            let s: f64 = (0..k).map(|j| q[j] * b[k - j]).sum();
            q[k] = (a[k] - s) / b[0];
        }
        Jet(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: [f64; 4], b: [f64; 4]) {
        for k in 0..4 {
            assert!((a[k] - b[k]).abs() < 1e-12 * (1.0 + b[k].abs()), "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn exp_of_identity() {
        let r: f64 = 0.3;
        let e = r.exp();
        close(Jet::affine(r, 1.0).exp().derivatives(), [e; 4]);
    }

    #[test]
    fn reciprocal_and_products() {
        let r: f64 = 1.7;
        let x = Jet::affine(r, 1.0);
        // 1/r
        close(
            x.recip().derivatives(),
            [1.0 / r, -1.0 / r.powi(2), 2.0 / r.powi(3), -6.0 / r.powi(4)],
        );
        // r^3
        close((x * x * x).derivatives(), [r.powi(3), 3.0 * r * r, 6.0 * r, 6.0]);
        // exp(-1/r)
        let f = (-x.recip()).exp().derivatives();
        let e = (-1.0 / r).exp();
        let d1 = e / r.powi(2);
        let d2 = e * (1.0 / r.powi(4) - 2.0 / r.powi(3));
        let d3 = e * (1.0 / r.powi(6) - 6.0 / r.powi(5) + 6.0 / r.powi(4));
        close(f, [e, d1, d2, d3]);
    }
}
