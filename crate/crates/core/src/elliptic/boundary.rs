use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::ScalarField;

use super::harmonic::harmonic_polynomial;

type Evaluator = dyn Fn([f64; 2]) -> f64 + Send + Sync;

/// Dirichlet data, evaluated wherever the boundary of the mask needs it
/// (square boundary nodes or points on an embedded circle).
#[derive(Clone)]
pub struct BoundaryData {
    label: String,
    eval: Arc<Evaluator>,
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("BoundaryData").field(&self.label).finish()
    }
}

impl BoundaryData {
    pub fn from_fn(label: impl Into<String>, f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        Self { label: label.into(), eval: Arc::new(f) }
    }

    pub fn zero() -> Self {
        Self::from_fn("zero", |_| 0.0)
    }

    /// Trace of `Re (x1 + i x2)^k`.
    pub fn harmonic(k: u32) -> Self {
        let p = harmonic_polynomial(k);
        Self::from_fn(format!("harmonic(k={k})"), move |x| p.value(x))
    }

    /// `sum_{k <= modes} a_k cos(k theta) + b_k sin(k theta)` in the polar
    /// angle of the boundary point, with `a_k, b_k` uniform in
    /// `[-1, 1] / (1 + k)` drawn from a ChaCha8 stream seeded by `seed`.
    pub fn fourier(seed: u64, modes: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs: Vec<(f64, f64)> = (0..=modes)
            .map(|k| {
                let s = 1.0 / (1.0 + k as f64);
                (s * rng.random_range(-1.0..=1.0), s * rng.random_range(-1.0..=1.0))
            })
            .collect();
        Self::from_fn(format!("fourier(seed={seed}, modes={modes})"), move |x| {
            let theta = x[1].atan2(x[0]);
            coeffs
                .iter()
                .enumerate()
                .map(|(k, (a, b))| {
                    let t = k as f64 * theta;
                    a * t.cos() + b * t.sin()
                })
                .sum()
        })
    }

    /// Bilinear interpolation of a computed field.
    pub fn from_field(label: impl Into<String>, u: ScalarField) -> Self {
        Self::from_fn(label, move |x| u.interpolate(x))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, x: [f64; 2]) -> Result<f64> {
        let v = (self.eval)(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Config(format!("boundary data '{}' is not finite at {x:?}", self.label)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_data_is_reproducible() {
        let a = BoundaryData::fourier(7, 4);
        let b = BoundaryData::fourier(7, 4);
        let c = BoundaryData::fourier(8, 4);
        let x = [3.0, 1.2];
        assert_eq!(a.eval(x).unwrap(), b.eval(x).unwrap());
        assert_ne!(a.eval(x).unwrap(), c.eval(x).unwrap());
        assert!(a.label().contains("seed=7"));
    }

    #[test]
    fn non_finite_data_is_rejected() {
        let g = BoundaryData::from_fn("bad", |_| f64::NAN);
        assert!(g.eval([0.0, 1.0]).is_err());
    }
}
