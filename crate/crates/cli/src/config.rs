//! Experiment configuration. Every field has a default except the seed of
//! random boundary data, which must be given explicitly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use homlab_core::continuation::GrowthParams;
use homlab_core::elliptic::BoundaryData;
use homlab_core::fields::{builtin_coefficient, CoefficientField, DomainGrid};
use homlab_core::{CarlemanConstants, Error, Provenance, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Built-in coefficient family: `identity`, `laminate` or `smooth2d`.
    pub coefficient: String,
    /// Half-extent `L` of the square `[-L, L]^2`.
    pub half_extent: f64,
    pub cell_n: usize,
    pub eps_list: Vec<f64>,
    /// Grid cells per period used to size each `eps` grid (at least 8).
    pub cells_per_period: usize,
    /// Grid sizes are rounded up to a multiple of this (multigrid depth).
    pub grid_multiple: usize,
    pub lambda_grid: Vec<f64>,
    pub growth: GrowthParams,
    pub constants: ConstantOverrides,
    pub boundary: BoundarySpec,
    pub outdir: PathBuf,
    pub tolerances: Tolerances,
    pub calibration: CalibrationConfig,
    pub carleman: CarlemanConfig,
    pub caccioppoli: CaccioppoliConfig,
    pub threeball: ThreeBallConfig,
    pub doubling: DoublingConfig,
    pub counterexample: CounterexampleConfig,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantOverrides {
    pub c0: Option<f64>,
    pub lambda0: Option<f64>,
    pub tau0: Option<f64>,
    pub c_l0t0: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BoundarySpec {
    /// Trace of `Re (x1 + i x2)^degree`.
    Harmonic { degree: u32 },
    /// Seeded random Fourier series in the polar angle.
    Fourier {
        seed: Option<u64>,
        #[serde(default = "default_modes")]
        modes: usize,
    },
    Zero,
}

fn default_modes() -> usize {
    4
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub cell: f64,
    pub solve: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    pub n: usize,
    pub degrees: Vec<u32>,
    pub lambdas: Vec<f64>,
    pub taus: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CarlemanConfig {
    /// Smallest grid for a family sweep; large `tau` concentrates the weight
    /// in a layer of width about `1/tau` that coarser grids do not resolve.
    pub min_n: usize,
    /// Grid for the constant-coefficient harmonic-polynomial sweep.
    pub identity_n: usize,
    pub identity_degrees: Vec<u32>,
    /// Sweeps at `eps` at or below this value must pass.
    pub required_eps: f64,
    /// Acceptance bound on `lhs / rhs`.
    pub ratio_bound: f64,
    /// `eps` of the expansion residual refinement study.
    pub residual_eps: f64,
    pub residual_drop: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaccioppoliConfig {
    pub radii: [f64; 4],
    pub lambda: f64,
    pub tau: f64,
    pub max_spread: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThreeBallConfig {
    pub lambda: f64,
    pub radii: [f64; 3],
    /// Grid of the `A = I` baseline solve.
    pub baseline_n: usize,
    pub multiscale_radii: Vec<f64>,
    pub baseline_factor: f64,
    pub multiscale_factor: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DoublingConfig {
    pub radii: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CounterexampleConfig {
    pub n: usize,
    pub k_max: u32,
    pub subsamples: usize,
    pub tolerance: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            coefficient: "laminate".into(),
            half_extent: 3.0,
            cell_n: 256,
            eps_list: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            cells_per_period: 8,
            grid_multiple: 64,
            lambda_grid: vec![1.0, 2.0],
            growth: GrowthParams { m: 10.0, n1: 2.0, n2: 2.0 },
            constants: ConstantOverrides::default(),
            boundary: BoundarySpec::Fourier { seed: None, modes: 4 },
            outdir: PathBuf::from("homlab-out"),
            tolerances: Tolerances::default(),
            calibration: CalibrationConfig::default(),
            carleman: CarlemanConfig::default(),
            caccioppoli: CaccioppoliConfig::default(),
            threeball: ThreeBallConfig::default(),
            doubling: DoublingConfig::default(),
            counterexample: CounterexampleConfig::default(),
        }
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { cell: 1e-10, solve: 1e-10 }
    }
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { n: 512, degrees: vec![1, 2, 3, 4], lambdas: vec![1.0, 2.0], taus: vec![5.0, 10.0, 20.0, 40.0] }
    }
}

impl Default for CarlemanConfig {
    fn default() -> Self {
        Self {
            min_n: 1536,
            identity_n: 1024,
            identity_degrees: vec![0, 1, 2, 3],
            required_eps: 1.0 / 32.0,
            ratio_bound: 1.1,
            residual_eps: 1.0 / 8.0,
            residual_drop: 1.8,
        }
    }
}

impl Default for CaccioppoliConfig {
    fn default() -> Self {
        Self { radii: [0.5, 2.0 / 3.0, 7.0 / 3.0, 2.5], lambda: 1.0, tau: 5.0, max_spread: 5.0 }
    }
}

impl Default for ThreeBallConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            radii: [1.0, 2.0, 3.0],
            baseline_n: 384,
            multiscale_radii: vec![0.5, 0.25, 0.125],
            baseline_factor: 10.0,
            multiscale_factor: 2.0,
        }
    }
}

impl Default for DoublingConfig {
    fn default() -> Self {
        Self { radii: vec![0.25, 0.5, 1.0, 2.0] }
    }
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self { n: 512, k_max: 6, subsamples: 4, tolerance: 1e-3 }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(config_err(format!("{name} must be positive, got {v}")))
    }
}

fn nonempty<T>(name: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        Err(config_err(format!("{name} must not be empty")))
    } else {
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config_err(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        builtin_coefficient(&self.coefficient)?;
        positive("half_extent", self.half_extent)?;
        if self.half_extent < 2.75 {
            return Err(config_err(format!("half_extent must be at least 2.75, got {}", self.half_extent)));
        }
        nonempty("eps_list", &self.eps_list)?;
        nonempty("lambda_grid", &self.lambda_grid)?;
        for &e in &self.eps_list {
            if !(e > 0.0 && e <= 1.0) {
                return Err(config_err(format!("eps must lie in (0, 1], got {e}")));
            }
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(config_err("eps_list must be strictly decreasing"));
        }
        if self.cells_per_period < 8 {
            return Err(config_err(format!(
                "cells_per_period = {} violates the resolution rule h <= eps/8",
                self.cells_per_period
            )));
        }
        if self.grid_multiple == 0 {
            return Err(config_err("grid_multiple must be positive"));
        }
        for &e in &self.eps_list {
            self.domain_grid(e)?;
        }
        self.growth.validate()?;
        let k = self.base_constants()?;
        for &l in self.lambda_grid.iter().chain(&self.calibration.lambdas) {
            k.require_lambda(l)?;
        }
        if let Some(t) = self.calibration.taus.iter().find(|&&t| t < k.tau0) {
            return Err(config_err(format!("calibration tau = {t} is below tau0 = {}", k.tau0)));
        }
        nonempty("calibration.degrees", &self.calibration.degrees)?;
        nonempty("calibration.taus", &self.calibration.taus)?;
        nonempty("carleman.identity_degrees", &self.carleman.identity_degrees)?;
        nonempty("threeball.multiscale_radii", &self.threeball.multiscale_radii)?;
        nonempty("doubling.radii", &self.doubling.radii)?;
        match self.boundary {
            BoundarySpec::Fourier { seed: None, .. } => {
                return Err(config_err("boundary.seed is required for Fourier boundary data"))
            }
            BoundarySpec::Fourier { modes: 0, .. } => return Err(config_err("boundary.modes must be positive")),
            _ => {}
        }
        for (name, v) in [
            ("tolerances.cell", self.tolerances.cell),
            ("tolerances.solve", self.tolerances.solve),
            ("carleman.ratio_bound", self.carleman.ratio_bound),
            ("carleman.required_eps", self.carleman.required_eps),
            ("carleman.residual_eps", self.carleman.residual_eps),
            ("caccioppoli.max_spread", self.caccioppoli.max_spread),
            ("threeball.lambda", self.threeball.lambda),
            ("threeball.baseline_factor", self.threeball.baseline_factor),
            ("threeball.multiscale_factor", self.threeball.multiscale_factor),
            ("counterexample.tolerance", self.counterexample.tolerance),
        ] {
            positive(name, v)?;
        }
        Ok(())
    }

    pub fn coefficient_field(&self) -> Result<CoefficientField> {
        builtin_coefficient(&self.coefficient)
    }

    pub fn boundary_data(&self) -> Result<BoundaryData> {
        match self.boundary {
            BoundarySpec::Harmonic { degree } => Ok(BoundaryData::harmonic(degree)),
            BoundarySpec::Fourier { seed: Some(seed), modes } => Ok(BoundaryData::fourier(seed, modes)),
            BoundarySpec::Fourier { seed: None, .. } => Err(config_err("boundary.seed is required")),
            BoundarySpec::Zero => Ok(BoundaryData::zero()),
        }
    }

    /// Grid resolving `eps` on `[-L, L]^2`.
    pub fn domain_grid(&self, eps: f64) -> Result<DomainGrid> {
        DomainGrid::resolving(self.half_extent, eps, self.cells_per_period, self.grid_multiple)
    }

    /// Configured constants; `C0` is replaced by calibration unless given.
    pub fn base_constants(&self) -> Result<CarlemanConstants> {
        let d = CarlemanConstants::default();
        let o = self.constants;
        let k = CarlemanConstants {
            c0: o.c0.unwrap_or(d.c0),
            lambda0: o.lambda0.unwrap_or(d.lambda0),
            tau0: o.tau0.unwrap_or(d.tau0),
            c_l0t0: o.c_l0t0.unwrap_or(d.c_l0t0),
            provenance: Provenance::Configured,
        };
        k.validate()?;
        Ok(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_need_a_seed() {
        let err = ExperimentConfig::parse("{}").unwrap_err();
        assert!(err.to_string().contains("seed"));
        let cfg = ExperimentConfig::parse(r#"{"boundary": {"kind": "fourier", "seed": 7}}"#).unwrap();
        assert_eq!(cfg.eps_list.len(), 4);
        assert_eq!(cfg.domain_grid(1.0 / 64.0).unwrap().n(), 3072);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            r#"{"boundary": {"kind": "zero"}, "lambda_grid": [0.5]}"#,
            r#"{"boundary": {"kind": "zero"}, "eps_list": [0.1, 0.2]}"#,
            r#"{"boundary": {"kind": "zero"}, "cells_per_period": 4}"#,
            r#"{"boundary": {"kind": "zero"}, "coefficient": "marble"}"#,
            r#"{"boundary": {"kind": "zero"}, "bogus": 1}"#,
            r#"{"boundary": {"kind": "zero"}, "growth": {"M": 1, "N1": 0.5, "N2": 1}}"#,
        ] {
            assert!(matches!(ExperimentConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }
}
