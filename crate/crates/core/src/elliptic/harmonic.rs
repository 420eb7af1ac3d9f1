use crate::error::Result;
use crate::fields::{DomainGrid, ScalarField};

/// `Re (x1 + i x2)^k = r^k cos(k theta)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HarmonicPolynomial {
    pub degree: u32,
}

pub fn harmonic_polynomial(k: u32) -> HarmonicPolynomial {
    HarmonicPolynomial { degree: k }
}

#[inline]
fn cpow(x: f64, y: f64, k: u32) -> (f64, f64) {
    let (mut re, mut im) = (1.0, 0.0);
    for _ in 0..k {
        (re, im) = (re * x - im * y, re * y + im * x);
    }
    (re, im)
}

impl HarmonicPolynomial {
    #[inline]
    pub fn value(&self, x: [f64; 2]) -> f64 {
        cpow(x[0], x[1], self.degree).0
    }

    /// `(d1, d2) = (Re k z^{k-1}, -Im k z^{k-1})`.
    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        if self.degree == 0 {
            return [0.0, 0.0];
        }
        let (re, im) = cpow(x[0], x[1], self.degree - 1);
        let k = self.degree as f64;
        [k * re, -k * im]
    }

    pub fn sample(&self, grid: DomainGrid) -> Result<ScalarField> {
        ScalarField::from_fn(grid, |x| self.value(x))
    }
}
