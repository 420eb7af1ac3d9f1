use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major 2x2 real matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);
    pub const ZERO: Mat2 = Mat2([[0.0, 0.0], [0.0, 0.0]]);

    pub fn diag(a: f64, b: f64) -> Self {
        Mat2([[a, 0.0], [0.0, b]])
    }

    pub fn scalar(a: f64) -> Self {
        Self::diag(a, a)
    }

    pub fn symmetric(a11: f64, a12: f64, a22: f64) -> Self {
        Mat2([[a11, a12], [a12, a22]])
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    pub fn transpose(&self) -> Self {
        let m = self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn asymmetry(&self) -> f64 {
        (self.0[0][1] - self.0[1][0]).abs()
    }

    pub fn symmetrized(&self) -> Self {
        let off = 0.5 * (self.0[0][1] + self.0[1][0]);
        Self::symmetric(self.0[0][0], off, self.0[1][1])
    }

    #[inline]
    pub fn mul_vec(&self, v: [f64; 2]) -> [f64; 2] {
        let m = self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    /// Eigenvalues `(min, max)` of the symmetric part.
    pub fn sym_eigenvalues(&self) -> (f64, f64) {
        let s = self.symmetrized().0;
        let mean = 0.5 * (s[0][0] + s[1][1]);
        let rad = (0.25 * (s[0][0] - s[1][1]).powi(2) + s[0][1] * s[0][1]).sqrt();
        (mean - rad, mean + rad)
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sub(&self, other: &Mat2) -> Mat2 {
        let (a, b) = (self.0, other.0);
        Mat2([
            [a[0][0] - b[0][0], a[0][1] - b[0][1]],
            [a[1][0] - b[1][0], a[1][1] - b[1][1]],
        ])
    }
}

type Evaluator = dyn Fn([f64; 2]) -> Mat2 + Send + Sync;

/// A 1-periodic matrix field `A(y)` together with the certified ellipticity
/// constant `mu` (`mu |xi|^2 <= A xi.xi <= |xi|^2 / mu`) and Lipschitz
/// constant `lip`.
#[derive(Clone)]
pub struct CoefficientField {
    name: String,
    eval: Arc<Evaluator>,
    mu: f64,
    lip: f64,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("name", &self.name)
            .field("mu", &self.mu)
            .field("lip", &self.lip)
            .finish()
    }
}

impl CoefficientField {
    pub fn new(
        name: impl Into<String>,
        mu: f64,
        lip: f64,
        eval: impl Fn([f64; 2]) -> Mat2 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::Config(format!("ellipticity constant must lie in (0, 1], got {mu}")));
        }
        if !(lip >= 0.0 && lip.is_finite()) {
            return Err(Error::Config(format!("Lipschitz constant must be finite and >= 0, got {lip}")));
        }
        Ok(Self {
            name: name.into(),
            eval: Arc::new(eval),
            mu,
            lip,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lip(&self) -> f64 {
        self.lip
    }

    #[inline]
    pub fn eval(&self, y: [f64; 2]) -> Mat2 {
        (self.eval)(y)
    }

    /// True when `A` is the same matrix at every probe point of a coarse lattice.
    pub fn is_constant(&self) -> bool {
        let a0 = self.eval([0.0, 0.0]);
        (0..17).all(|k| {
            let t = k as f64 / 17.0;
            self.eval([t, (3.0 * t) % 1.0]).sub(&a0).max_abs_entry() == 0.0
        })
    }
}

/// Shipped coefficient families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinCoefficient {
    Identity,
    Laminate,
    Smooth2d,
}

impl FromStr for BuiltinCoefficient {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "laminate" => Ok(Self::Laminate),
            "smooth2d" => Ok(Self::Smooth2d),
            other => Err(Error::Config(format!(
                "unknown coefficient family '{other}' (expected identity, laminate or smooth2d)"
            ))),
        }
    }
}

/// Layer profile `a(t) = 1 / (2 + sin 2 pi t)` of the laminate.
#[inline]
pub fn laminate_profile(t: f64) -> f64 {
    1.0 / (2.0 + (TAU * t).sin())
}

/// `max |a'(t)|`. The maximum of `cos x / (2 + sin x)^2` sits at
/// `sin x = 1 - sqrt 3`.
fn laminate_lipschitz() -> f64 {
    let r3 = 3f64.sqrt();
    TAU * (2.0 * r3 - 3.0).sqrt() / (3.0 - r3).powi(2)
}

pub fn builtin_coefficient(name: &str) -> Result<CoefficientField> {
    match name.parse::<BuiltinCoefficient>()? {
        BuiltinCoefficient::Identity => CoefficientField::new("identity", 1.0, 0.0, |_| Mat2::IDENTITY),
        BuiltinCoefficient::Laminate => CoefficientField::new("laminate", 1.0 / 3.0, laminate_lipschitz(), |y| {
            Mat2::scalar(laminate_profile(y[0]))
        }),
        BuiltinCoefficient::Smooth2d => CoefficientField::new("smooth2d", 0.5, PI, |y| {
            Mat2::scalar(1.5 + 0.5 * (TAU * y[0]).sin() * (TAU * y[1]).sin())
        }),
    }
}

/// Samples `A` on a uniform lattice of the unit cell and returns the observed
/// `(mu_hat, lip_hat)`. `mu_hat` is the smallest `t` with
/// `t |xi|^2 <= A xi.xi <= |xi|^2 / t` at every sample; `lip_hat` is the
/// largest entrywise difference quotient between lattice neighbours.
pub fn verify_assumptions(a: &CoefficientField, samples: usize) -> Result<(f64, f64)> {
    if samples < 10_000 {
        return Err(Error::Config(format!("at least 10^4 samples required, got {samples}")));
    }
    let q = (samples as f64).sqrt().ceil() as usize;
    let dy = 1.0 / q as f64;
    let grid: Vec<Mat2> = (0..q * q)
        .map(|k| a.eval([(k % q) as f64 * dy, (k / q) as f64 * dy]))
        .collect();

    let mut mu_hat = f64::INFINITY;
    let mut lip_hat: f64 = 0.0;
    for (k, m) in grid.iter().enumerate() {
        let scale = 1.0 + m.max_abs_entry();
        if !m.0.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::AssumptionViolation {
                condition: "finiteness",
                detail: format!("non-finite entry at sample {k}"),
            });
        }
        if m.asymmetry() > 1e-12 * scale {
            return Err(Error::AssumptionViolation {
                condition: "symmetry",
                detail: format!("|a12 - a21| = {:.3e} at y = {:?}", m.asymmetry(), [(k % q) as f64 * dy, (k / q) as f64 * dy]),
            });
        }
        let (lo, hi) = m.sym_eigenvalues();
        mu_hat = mu_hat.min(lo).min(1.0 / hi);
        let (i, j) = (k % q, k / q);
        let right = &grid[j * q + (i + 1) % q];
        let up = &grid[((j + 1) % q) * q + i];
        lip_hat = lip_hat
            .max(right.sub(m).max_abs_entry() / dy)
            .max(up.sub(m).max_abs_entry() / dy);
    }
    if !(mu_hat > 0.0) {
        return Err(Error::AssumptionViolation {
            condition: "ellipticity",
            detail: format!("smallest sampled eigenvalue bound is {mu_hat:.3e}"),
        });
    }
    for (k, y) in [[0.137, 0.911], [0.5, 0.25], [0.73, 0.02]].iter().enumerate() {
        let base = a.eval(*y);
        for shift in [[1.0, 0.0], [0.0, 1.0], [-2.0, 3.0]] {
            let moved = a.eval([y[0] + shift[0], y[1] + shift[1]]);
            if moved.sub(&base).max_abs_entry() > 1e-10 * (1.0 + base.max_abs_entry()) {
                return Err(Error::AssumptionViolation {
                    condition: "periodicity",
                    detail: format!("A(y + {shift:?}) differs from A(y) at probe {k}"),
                });
            }
        }
    }
    if a.mu() > mu_hat * (1.0 + 1e-9) {
        return Err(Error::AssumptionViolation {
            condition: "ellipticity",
            detail: format!("declared mu = {} but samples only support {mu_hat}", a.mu()),
        });
    }
    if lip_hat > a.lip() * (1.0 + 1e-6) + 1e-12 {
        return Err(Error::AssumptionViolation {
            condition: "lipschitz",
            detail: format!("declared constant {} but observed slope {lip_hat}", a.lip()),
        });
    }
    Ok((mu_hat, lip_hat))
}
