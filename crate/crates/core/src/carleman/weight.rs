use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `phi = exp(-lambda |x|^2)` and the weight `exp(2 tau phi)`, stored
/// divided by `exp(2 tau phi(r_ref))` so that it never overflows. The common
/// factor cancels from every ratio of weighted integrals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarlemanWeight {
    pub lambda: f64,
    pub tau: f64,
    r_ref: f64,
}

impl CarlemanWeight {
    /// Normalized at the origin: `w = exp(2 tau (phi - 1))` lies in `(0, 1]`.
    pub fn new(lambda: f64, tau: f64) -> Result<Self> {
        Self::normalized_at(lambda, tau, 0.0)
    }

    /// Normalized at radius `r_ref`; `w <= 1` for `|x| >= r_ref`. Useful for
    /// very large `tau` on integrands supported away from the origin, where
    /// origin normalization would underflow.
    pub fn normalized_at(lambda: f64, tau: f64, r_ref: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) || !(tau >= 0.0 && tau.is_finite()) || !(r_ref >= 0.0) {
            return Err(Error::Config(format!(
                "weight needs lambda > 0, tau >= 0, r_ref >= 0; got ({lambda}, {tau}, {r_ref})"
            )));
        }
        Ok(Self { lambda, tau, r_ref })
    }

    pub fn r_ref(&self) -> f64 {
        self.r_ref
    }

    #[inline]
    pub fn phi(&self, r2: f64) -> f64 {
        (-self.lambda * r2).exp()
    }

    /// `(phi, w)` at squared radius `r2`.
    #[inline]
    pub fn eval(&self, r2: f64) -> (f64, f64) {
        let phi = self.phi(r2);
        let phi_ref = self.phi(self.r_ref * self.r_ref);
        (phi, (2.0 * self.tau * (phi - phi_ref)).exp())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Configured,
    Calibrated,
}

/// `C0`, `lambda0`, `tau0` and the `tau`-range constant `C(lambda0, tau0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlemanConstants {
    pub c0: f64,
    pub lambda0: f64,
    pub tau0: f64,
    pub c_l0t0: f64,
    pub provenance: Provenance,
}

impl Default for CarlemanConstants {
    /// `lambda0 = 1`, `tau0 = 5`, `C(lambda0, tau0) = tau0`; `C0 = 1` until
    /// calibrated.
    fn default() -> Self {
        Self { c0: 1.0, lambda0: 1.0, tau0: 5.0, c_l0t0: 5.0, provenance: Provenance::Configured }
    }
}

impl CarlemanConstants {
    pub fn validate(&self) -> Result<()> {
        let all = [self.c0, self.lambda0, self.tau0, self.c_l0t0];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!("Carleman constants must be positive, got {all:?}")))
        }
    }

    pub fn with_c0(self, c0: f64) -> Self {
        Self { c0, provenance: Provenance::Calibrated, ..self }
    }

    pub fn require_lambda(&self, lambda: f64) -> Result<()> {
        if lambda >= self.lambda0 {
            Ok(())
        } else {
            Err(Error::Config(format!("lambda = {lambda} is below lambda0 = {}", self.lambda0)))
        }
    }

    /// `[tau0, 100 tau0 + C(lambda0, tau0) |u|_{B3} / |u|_{B1}]`.
    pub fn tau_range(&self, norm_b3: f64, norm_b1: f64) -> Result<(f64, f64)> {
        if !(norm_b1 > 0.0) {
            return Err(Error::Degenerate(
                "|u|_{L2(B_1)} = 0, so the admissible tau-range is undefined".into(),
            ));
        }
        Ok((self.tau0, 100.0 * self.tau0 + self.c_l0t0 * norm_b3 / norm_b1))
    }
}

/// `count` log-spaced points spanning `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count)
            .map(|k| (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (count - 1) as f64).exp())
            .collect(),
    }
}
