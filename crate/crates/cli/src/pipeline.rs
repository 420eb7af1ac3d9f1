//! The experiment pipelines and the state they share within one run.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use homlab_core::carleman::{
    caccioppoli_constant, calibrate_c0, carleman_check, expansion_remainder, lemma31_residual, make_cutoff,
    Calibration, CarlemanReport, Cutoff,
};
use homlab_core::cell::{flux_correctors, homogenize, solve_corrector, Corrector, CorrectorSampler};
use homlab_core::continuation::{
    alpha_beta_s, counterexample_study, doubling_report, growth_check, multiscale_three_ball, optimal_tau_bound,
    three_ball_constant,
};
use homlab_core::elliptic::{assemble_homogenized, harmonic_polynomial, solve_dirichlet, BoundaryData, BoundaryMask};
use homlab_core::fields::{
    ball_integral, builtin_coefficient, CoefficientField, DomainGrid, Mat2, PeriodicGrid, ScalarField,
    DEFAULT_SUBSAMPLES,
};
use homlab_core::twoscale::{solve_pair, summarize_convergence, ConvergenceRow, SolvedPair};
use homlab_core::{CarlemanConstants, Error, HomogenizedTensor, Result};

use crate::config::ExperimentConfig;
use crate::report::{num, Check, Table, VERSION};
use crate::svg::{Chart, Series};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Pipeline {
    Cell,
    Calibrate,
    Convergence,
    Carleman,
    ThreeBall,
    Doubling,
    Counterexample,
}

impl Pipeline {
    /// Dependency order used by `all`.
    pub const ALL: [Pipeline; 7] = [
        Pipeline::Cell,
        Pipeline::Calibrate,
        Pipeline::Convergence,
        Pipeline::Carleman,
        Pipeline::ThreeBall,
        Pipeline::Doubling,
        Pipeline::Counterexample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Cell => "cell",
            Pipeline::Calibrate => "calibrate",
            Pipeline::Convergence => "convergence",
            Pipeline::Carleman => "carleman",
            Pipeline::ThreeBall => "threeball",
            Pipeline::Doubling => "doubling",
            Pipeline::Counterexample => "counterexample",
        }
    }
}

/// What a pipeline produced, before it is written out.
#[derive(Default)]
pub struct StageOutput {
    pub checks: Vec<Check>,
    pub metrics: serde_json::Value,
    pub tables: Vec<Table>,
    pub charts: Vec<(String, Chart)>,
}

struct CellState {
    corrector: Corrector,
    sampler: CorrectorSampler,
    a_hat: HomogenizedTensor,
}

/// Calibrated constants for the configured family and for `A = I`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstantsFile {
    pub homlab_version: String,
    pub coefficient: String,
    pub a_hat: Mat2,
    pub family: Calibration,
    pub identity: Calibration,
}

impl ConstantsFile {
    pub const NAME: &'static str = "constants.json";
}

/// Shared state for one invocation: the cell solution, the constants and
/// every solved `(eps, grid)` pair.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub outdir: PathBuf,
    pub use_cached: bool,
    a: CoefficientField,
    g: BoundaryData,
    cell: Option<CellState>,
    constants: Option<ConstantsFile>,
    constants_cached: Option<bool>,
    pairs: BTreeMap<(u64, usize), Arc<SolvedPair>>,
}

impl Context {
    pub fn new(cfg: ExperimentConfig, outdir: PathBuf, use_cached: bool) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            a: cfg.coefficient_field()?,
            g: cfg.boundary_data()?,
            cfg,
            outdir,
            use_cached,
            cell: None,
            constants: None,
            constants_cached: None,
            pairs: BTreeMap::new(),
        })
    }

    /// Constants used by the family checks, if known.
    pub fn constants(&self) -> Option<CarlemanConstants> {
        self.constants.as_ref().map(|c| c.family.constants)
    }

    pub fn run(&mut self, p: Pipeline) -> Result<StageOutput> {
        match p {
            Pipeline::Cell => self.cell_stage(),
            Pipeline::Calibrate => self.calibrate_stage(),
            Pipeline::Convergence => self.convergence_stage(),
            Pipeline::Carleman => self.carleman_stage(),
            Pipeline::ThreeBall => self.threeball_stage(),
            Pipeline::Doubling => self.doubling_stage(),
            Pipeline::Counterexample => self.counterexample_stage(),
        }
    }

    fn ensure_cell(&mut self) -> Result<&CellState> {
        if self.cell.is_none() {
            let grid = PeriodicGrid::new(self.cfg.cell_n)?;
            let corrector = solve_corrector(&self.a, grid, self.cfg.tolerances.cell)?;
            let a_hat = homogenize(&self.a, &corrector)?;
            let sampler = CorrectorSampler::new(&self.a, &corrector)?;
            self.cell = Some(CellState { corrector, sampler, a_hat });
        }
        Ok(self.cell.as_ref().expect("cell state"))
    }

    /// Requires a prior `ensure_cell`.
    fn sampler(&self) -> &CorrectorSampler {
        &self.cell.as_ref().expect("cell state").sampler
    }

    fn a_hat(&mut self) -> Result<Mat2> {
        Ok(self.ensure_cell()?.a_hat.a_hat)
    }

    fn load_cached_constants(&mut self, a_hat: Mat2) -> Result<Option<ConstantsFile>> {
        let path = self.outdir.join(ConstantsFile::NAME);
        if !self.use_cached || !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let file: ConstantsFile = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid {}: {e}", path.display())))?;
        if file.coefficient != self.cfg.coefficient || file.a_hat.sub(&a_hat).max_abs_entry() > 1e-12 {
            return Err(Error::Config(format!(
                "{} was calibrated for a different coefficient; rerun without --use-cached",
                path.display()
            )));
        }
        Ok(Some(file))
    }

    /// Calibrated constants, loaded with `--use-cached` or from the probe
    /// suite (then also written to the output directory). Returns whether
    /// they came from the cache.
    fn ensure_constants(&mut self) -> Result<bool> {
        if let Some(cached) = self.constants_cached {
            return Ok(cached);
        }
        let a_hat = self.a_hat()?;
        if let Some(file) = self.load_cached_constants(a_hat)? {
            self.constants = Some(file);
            self.constants_cached = Some(true);
            return Ok(true);
        }
        let c = &self.cfg.calibration;
        let grid = DomainGrid::new(self.cfg.half_extent, c.n)?;
        let base = self.cfg.base_constants()?;
        let run = |t: Mat2| -> Result<Calibration> {
            let mut cal = calibrate_c0(t, grid, &c.degrees, &c.lambdas, &c.taus, base)?;
            if self.cfg.constants.c0.is_some() {
                cal.constants = base;
            }
            Ok(cal)
        };
        let family = run(a_hat)?;
        let identity = if a_hat == Mat2::IDENTITY { family.clone() } else { run(Mat2::IDENTITY)? };
        self.constants = Some(ConstantsFile {
            homlab_version: VERSION.into(),
            coefficient: self.cfg.coefficient.clone(),
            a_hat,
            family,
            identity,
        });
        self.constants_cached = Some(false);
        let file = self.constants.as_ref().expect("constants");
        crate::report::write_json(&self.outdir.join(ConstantsFile::NAME), file)
            .map_err(|e| Error::Consistency(format!("writing constants: {e:#}")))?;
        Ok(false)
    }

    fn pair(&mut self, eps: f64, grid: DomainGrid) -> Result<Arc<SolvedPair>> {
        let key = (eps.to_bits(), grid.n());
        if let Some(p) = self.pairs.get(&key) {
            return Ok(p.clone());
        }
        let a_hat = self.a_hat()?;
        let p = Arc::new(solve_pair(&self.a, a_hat, &self.g, eps, grid, self.cfg.tolerances.solve)?);
        self.pairs.insert(key, p.clone());
        Ok(p)
    }

    /// Solves the missing pairs on the worker pool.
    fn prefetch(&mut self, cases: &[(f64, DomainGrid)]) -> Result<()> {
        let a_hat = self.a_hat()?;
        let missing: Vec<_> =
            cases.iter().copied().filter(|(e, g)| !self.pairs.contains_key(&(e.to_bits(), g.n()))).collect();
        let (a, g, tol) = (&self.a, &self.g, self.cfg.tolerances.solve);
        let solved = missing
            .par_iter()
            .map(|&(eps, grid)| solve_pair(a, a_hat, g, eps, grid, tol))
            .collect::<Result<Vec<_>>>()?;
        for ((eps, grid), p) in missing.into_iter().zip(solved) {
            self.pairs.insert((eps.to_bits(), grid.n()), Arc::new(p));
        }
        Ok(())
    }

    fn sweep_cases(&self) -> Result<Vec<(f64, DomainGrid)>> {
        self.cfg.eps_list.iter().map(|&e| Ok((e, self.cfg.domain_grid(e)?))).collect()
    }

    fn cell_stage(&mut self) -> Result<StageOutput> {
        let tol = self.cfg.tolerances.cell;
        let family = self.cfg.coefficient.clone();
        let (mu, constant) = (self.a.mu(), self.a.is_constant());
        self.ensure_cell()?;
        let a = self.a.clone();
        let cell = self.cell.as_ref().expect("cell state");
        let flux = flux_correctors(&a, &cell.corrector, &cell.a_hat, tol)?;
        let m = cell.a_hat.a_hat;
        let chi = &cell.corrector.chi;
        let mean = |f: &homlab_core::CellField| f.values().iter().sum::<f64>() / f.values().len() as f64;
        let (mean_chi, max_chi) = ([mean(&chi[0]), mean(&chi[1])], [chi[0].max_abs(), chi[1].max_abs()]);
        let max_b = flux.b.iter().flatten().map(|s| s.field.max_abs()).fold(0.0, f64::max);
        let max_f = flux.f.iter().flatten().flatten().map(|s| s.field.max_abs()).fold(0.0, f64::max);
        let mean_b = flux.b.iter().flatten().map(|s| mean(&s.field).abs()).fold(0.0, f64::max);
        let (lo, hi) = m.sym_eigenvalues();

        let mut checks = vec![
            Check::at_most("corrector_residual", cell.corrector.residual_norm, tol),
            Check::at_most("corrector_mean", mean_chi[0].abs().max(mean_chi[1].abs()), 1e-10),
            Check::at_most("flux_corrector_mean", mean_b, 1e-10),
            Check::at_most("a_hat_asymmetry", cell.a_hat.asymmetry, 1e-8),
            Check::at_least("a_hat_min_eigenvalue", lo, mu - 1e-8),
            Check::at_most("a_hat_max_eigenvalue", hi, 1.0 / mu + 1e-8),
        ];
        match family.as_str() {
            "laminate" => {
                let err = m.sub(&Mat2::diag(0.5, 1.0 / 3f64.sqrt())).max_abs_entry();
                checks.push(Check::at_most("laminate_oracle_error", err, 1e-3));
            }
            _ if constant => {
                checks.push(Check::at_most("corrector_max", max_chi[0].max(max_chi[1]), 0.0));
                checks.push(Check::at_most("a_hat_error", m.sub(&a.eval([0.0, 0.0])).max_abs_entry(), 0.0));
                checks.push(Check::at_most("flux_corrector_max", max_b.max(max_f), 0.0));
            }
            _ => {}
        }

        let mut t = Table::new(
            "cell",
            &[
                "coefficient", "n", "a11", "a12", "a21", "a22", "asymmetry", "residual", "iterations_1", "iterations_2",
                "mean_chi_1", "mean_chi_2", "max_chi_1", "max_chi_2", "max_b", "max_f", "flux_divergence_residual",
            ],
        );
        t.push(vec![
            family.clone(),
            self.cfg.cell_n.to_string(),
            num(m.get(0, 0)),
            num(m.get(0, 1)),
            num(m.get(1, 0)),
            num(m.get(1, 1)),
            num(cell.a_hat.asymmetry),
            num(cell.corrector.residual_norm),
            cell.corrector.iterations[0].to_string(),
            cell.corrector.iterations[1].to_string(),
            num(mean_chi[0]),
            num(mean_chi[1]),
            num(max_chi[0]),
            num(max_chi[1]),
            num(max_b),
            num(max_f),
            num(flux.divergence_residual),
        ]);
        Ok(StageOutput {
            checks,
            metrics: json!({
                "coefficient": family,
                "n": self.cfg.cell_n,
                "a_hat": m,
                "eigenvalues": [lo, hi],
                "mu": mu,
                "corrector_residual": cell.corrector.residual_norm,
                "flux_divergence_residual": flux.divergence_residual,
            }),
            tables: vec![t],
            charts: vec![],
        })
    }

    fn calibrate_stage(&mut self) -> Result<StageOutput> {
        let cached = self.ensure_constants()?;
        let file = self.constants.as_ref().expect("constants");
        let mut checks = vec![];
        let mut table = Table::new("calibrate", &["tensor", "degree", "lambda", "tau", "ratio"]);
        let mut series = vec![];
        for (label, cal) in [("family", &file.family), ("identity", &file.identity)] {
            checks.push(Check::at_least(&format!("{label}_c0_positive"), cal.constants.c0, f64::MIN_POSITIVE));
            checks.push(Check::at_most(&format!("{label}_tau_spread"), cal.tau_spread(), 10.0));
            for r in &cal.rows {
                table.push(vec![label.into(), r.degree.to_string(), num(r.lambda), num(r.tau), num(r.ratio)]);
            }
            let minima = cal.per_point_minima();
            let mut lambdas: Vec<f64> = minima.iter().map(|m| m.0).collect();
            lambdas.dedup();
            for l in lambdas {
                series.push(Series {
                    label: format!("{label}, lambda={l}"),
                    points: minima.iter().filter(|m| m.0 == l).map(|m| (m.1, m.2)).collect(),
                });
            }
        }
        let chart = Chart {
            title: "Smallest classical weighted ratio over the probes".into(),
            x_label: "tau".into(),
            y_label: "ratio".into(),
            log_x: true,
            log_y: true,
            series,
        };
        Ok(StageOutput {
            checks,
            metrics: json!({
                "cached": cached,
                "family": file.family.constants,
                "identity": file.identity.constants,
                "family_tau_spread": file.family.tau_spread(),
                "identity_tau_spread": file.identity.tau_spread(),
                "a_hat": file.a_hat,
            }),
            tables: vec![table],
            charts: vec![("calibrate".into(), chart)],
        })
    }

    fn convergence_rows(&mut self) -> Result<Vec<ConvergenceRow>> {
        let cases = self.sweep_cases()?;
        self.prefetch(&cases)?;
        let mut rows = Vec::with_capacity(cases.len());
        for (eps, grid) in cases {
            let pair = self.pair(eps, grid)?;
            rows.push(ConvergenceRow::from_pair(&pair, &self.ensure_cell()?.sampler)?);
        }
        Ok(rows)
    }

    fn convergence_stage(&mut self) -> Result<StageOutput> {
        let rows = self.convergence_rows()?;
        let study = summarize_convergence(rows, self.a.is_constant());
        let mut checks = vec![];
        if study.floor {
            checks.push(Check::holds("discretization_floor", true));
        } else {
            let cs: Vec<f64> = study.rows.iter().map(|r| r.constant).collect();
            let spread = cs.iter().copied().fold(0.0, f64::max) / cs.iter().copied().fold(f64::INFINITY, f64::min);
            let decreasing = study.rows.windows(2).all(|w| w[1].h1_err < w[0].h1_err);
            checks.push(Check::at_least("l2_slope", study.l2_slope, 0.5));
            checks.push(Check::at_most("constant_spread", spread, 3.0));
            checks.push(Check::holds("h1_strictly_decreasing", decreasing));
        }
        let mut t = Table::new(
            "convergence",
            &["eps", "n", "r0", "l2_err", "h1_err", "norm_b3", "constant", "iterations", "disc_iterations"],
        );
        for r in &study.rows {
            let pair = &self.pairs[&(r.eps.to_bits(), r.n)];
            t.push(vec![
                num(r.eps),
                r.n.to_string(),
                num(r.r0),
                num(r.l2_err),
                num(r.h1_err),
                num(r.norm_b3),
                num(r.constant),
                pair.stats.iterations.to_string(),
                pair.recovered.stats.iterations.to_string(),
            ]);
        }
        let pts = |f: fn(&ConvergenceRow) -> f64| study.rows.iter().map(|r| (r.eps, f(r))).collect::<Vec<_>>();
        let reference: Vec<(f64, f64)> = study
            .rows
            .first()
            .map(|r0| study.rows.iter().map(|r| (r.eps, r0.l2_err * (r.eps / r0.eps).sqrt())).collect())
            .unwrap_or_default();
        let chart = Chart {
            title: "Homogenization error".into(),
            x_label: "eps".into(),
            y_label: "error".into(),
            log_x: true,
            log_y: true,
            series: vec![
                Series { label: "L2 error".into(), points: pts(|r| r.l2_err) },
                Series { label: "two-scale H1 error".into(), points: pts(|r| r.h1_err) },
                Series { label: "sqrt(eps) reference".into(), points: reference },
            ],
        };
        Ok(StageOutput {
            checks,
            metrics: json!({
                "l2_slope": study.l2_slope,
                "h1_slope": study.h1_slope,
                "floor": study.floor,
                "rows": study.rows,
            }),
            tables: vec![t],
            charts: vec![("convergence".into(), chart)],
        })
    }

    /// Grid for a family Carleman sweep at `eps`: the sweep grid, refined to
    /// at least `carleman.min_n`.
    fn carleman_grid(&self, eps: f64) -> Result<DomainGrid> {
        let g = self.cfg.domain_grid(eps)?;
        let min = self.cfg.carleman.min_n;
        if g.n() >= min {
            return Ok(g);
        }
        let m = self.cfg.grid_multiple;
        DomainGrid::new(self.cfg.half_extent, min.div_ceil(m) * m)
    }

    fn carleman_stage(&mut self) -> Result<StageOutput> {
        self.ensure_cell()?;
        self.ensure_constants()?;
        let consts = self.constants.clone().expect("constants");
        let cc = self.cfg.carleman.clone();
        let lambdas = self.cfg.lambda_grid.clone();
        let growth = self.cfg.growth;
        let mut checks = vec![];
        let mut sweep = Table::new(
            "carleman",
            &["case", "eps", "degree", "n", "lambda", "tau", "zero_order", "gradient", "lhs", "rhs", "ratio"],
        );
        let mut push_rows = |case: &str, eps: f64, degree: String, n: usize, rep: &CarlemanReport| {
            for r in &rep.rows {
                sweep.push(vec![
                    case.into(),
                    num(eps),
                    degree.clone(),
                    n.to_string(),
                    num(r.lambda),
                    num(r.tau),
                    num(r.zero_order),
                    num(r.gradient),
                    num(r.lhs),
                    num(r.rhs),
                    num(r.ratio),
                ]);
            }
        };
        let mut series = vec![];

        // family sweep
        let mut family = vec![];
        let mut cutoffs: BTreeMap<usize, Arc<Cutoff>> = BTreeMap::new();
        for eps in self.cfg.eps_list.clone() {
            let grid = self.carleman_grid(eps)?;
            let pair = self.pair(eps, grid)?;
            let cutoff = cutoffs.entry(grid.n()).or_insert_with(|| Arc::new(make_cutoff(grid).expect("cutoff"))).clone();
            let sampler = self.sampler();
            let rep = carleman_check(
                &pair.u_eps,
                &pair.recovered.u0,
                sampler,
                eps,
                &self.a,
                &consts.family.constants,
                &lambdas,
                &cutoff,
                Some(&growth),
            )?;
            push_rows("family", eps, String::new(), grid.n(), &rep);
            for &l in &lambdas {
                series.push(Series {
                    label: format!("eps={eps}, lambda={l}"),
                    points: rep.rows.iter().filter(|r| r.lambda == l).map(|r| (r.tau, r.ratio)).collect(),
                });
            }
            family.push((eps, grid.n(), rep));
        }
        for (eps, _, rep) in &family {
            if *eps <= cc.required_eps * (1.0 + 1e-12) {
                checks.push(Check::at_most(&format!("family_max_ratio_eps_{eps}"), ratio_or_nan(rep), cc.ratio_bound));
            }
        }
        let largest_passing =
            family.iter().filter(|(_, _, r)| ratio_or_nan(r) <= cc.ratio_bound).map(|(e, _, _)| *e).fold(None, |m: Option<f64>, e| {
                Some(m.map_or(e, |m| m.max(e)))
            });

        // constant-coefficient harmonic data
        let id_grid = DomainGrid::new(self.cfg.half_extent, cc.identity_n)?;
        let id_cutoff = make_cutoff(id_grid)?;
        let identity = builtin_coefficient("identity")?;
        let zero = CorrectorSampler::zero(PeriodicGrid::new(8)?);
        let mut identity_max: f64 = 0.0;
        let mut identity_rows = vec![];
        for &k in &cc.identity_degrees {
            let u = harmonic_polynomial(k).sample(id_grid)?;
            let rep = carleman_check(&u, &u, &zero, 1.0, &identity, &consts.identity.constants, &lambdas, &id_cutoff, None)?;
            push_rows("identity", 1.0, k.to_string(), id_grid.n(), &rep);
            identity_max = identity_max.max(ratio_or_nan(&rep));
            identity_rows.push(json!({"degree": k, "max_ratio": rep.max_ratio, "tau_range": rep.tau_range}));
        }
        checks.push(Check::at_most("identity_max_ratio", identity_max, cc.ratio_bound));

        // expansion residual under refinement, and the support property
        let g1 = self.cfg.domain_grid(cc.residual_eps)?;
        let g2 = DomainGrid::new(self.cfg.half_extent, 2 * g1.n())?;
        let mut residual = Table::new("carleman_residual", &["eps", "n", "residual", "plateau_ratio"]);
        let mut res = vec![];
        for grid in [g1, g2] {
            let u = solve_family(&self.a, &self.g, cc.residual_eps, grid, self.cfg.tolerances.solve)?;
            let cutoff = make_cutoff(grid)?;
            let sampler = self.sampler();
            let r = lemma31_residual(&u, sampler, cc.residual_eps, &self.a, &cutoff)?;
            let plateau = plateau_ratio(&expansion_remainder(&u, sampler, cc.residual_eps, &self.a, &cutoff)?, &cutoff);
            residual.push(vec![num(cc.residual_eps), grid.n().to_string(), num(r), num(plateau)]);
            res.push((r, plateau));
        }
        checks.push(Check::at_least("residual_drop", res[0].0 / res[1].0, cc.residual_drop));
        checks.push(Check::at_most("support_property", res[0].1.max(res[1].1), 1e-12));

        // weighted Caccioppoli across the sweep
        let cac = self.cfg.caccioppoli.clone();
        let mut cac_table = Table::new("caccioppoli", &["eps", "n", "lambda", "tau", "constant"]);
        let mut cac_values = vec![];
        for (eps, grid) in self.sweep_cases()? {
            let pair = self.pair(eps, grid)?;
            let c = caccioppoli_constant(&pair.u_eps, cac.radii, cac.lambda, cac.tau)?;
            cac_table.push(vec![num(eps), grid.n().to_string(), num(cac.lambda), num(cac.tau), num(c)]);
            cac_values.push(c);
        }
        let spread = cac_values.iter().copied().fold(0.0, f64::max) / cac_values.iter().copied().fold(f64::INFINITY, f64::min);
        checks.push(Check::at_most("caccioppoli_spread", spread, cac.max_spread));

        let family_json: Vec<_> = family
            .iter()
            .map(|(eps, n, r)| {
                json!({"eps": eps, "n": n, "max_ratio": r.max_ratio, "violations": r.violations,
                       "degenerate": r.degenerate, "tau_range": r.tau_range, "growth": r.growth})
            })
            .collect();
        let chart = Chart {
            title: "Weighted inequality: lhs / rhs".into(),
            x_label: "tau".into(),
            y_label: "lhs / rhs".into(),
            log_x: true,
            log_y: true,
            series,
        };
        Ok(StageOutput {
            checks,
            metrics: json!({
                "constants": consts.family.constants,
                "identity_constants": consts.identity.constants,
                "family": family_json,
                "largest_passing_eps": largest_passing,
                "identity": identity_rows,
                "residual": res.iter().map(|r| r.0).collect::<Vec<_>>(),
                "residual_drop": res[0].0 / res[1].0,
                "caccioppoli": cac_values,
                "caccioppoli_spread": spread,
            }),
            tables: vec![sweep, residual, cac_table],
            charts: vec![("carleman".into(), chart)],
        })
    }

    fn threeball_stage(&mut self) -> Result<StageOutput> {
        let tb = self.cfg.threeball.clone();
        let mut checks = vec![];
        let one = alpha_beta_s(1.0)?;
        let exp_err =
            [(one.alpha, 0.963369), (one.beta, 0.0239716), (one.s, 0.97572)].iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        checks.push(Check::at_most("exponents_at_lambda_1", exp_err, 1e-5));
        let beta_ok = (0..50).all(|i| alpha_beta_s(0.05 * 1.15f64.powi(i)).map(|e| e.beta > 0.0).unwrap_or(false));
        checks.push(Check::holds("beta_positive_on_grid", beta_ok));

        let e = alpha_beta_s(tb.lambda)?;
        let tau0 = self.cfg.base_constants()?.tau0;
        let base_grid = DomainGrid::new(self.cfg.half_extent, tb.baseline_n)?;
        let op = assemble_homogenized(Mat2::IDENTITY, base_grid, BoundaryMask::Square)?;
        let baseline_u = solve_dirichlet(&op, &self.g, self.cfg.tolerances.solve)?;
        drop(op);
        let baseline = three_ball_constant(&baseline_u, e.s, tb.radii)?;

        let [r1, r2, r3] = tb.radii;
        let mut t = Table::new("threeball", &["case", "eps", "n", "r1", "r2", "r3", "s", "constant"]);
        t.push(vec!["baseline".into(), String::new(), base_grid.n().to_string(), num(r1), num(r2), num(r3), num(e.s), num(baseline)]);
        let mut tau_table = Table::new("threeball_tau", &["eps", "p", "q", "r", "tau_tilde", "branch", "bound", "q_over_bound"]);
        let mut family = vec![];
        let cases = self.sweep_cases()?;
        self.prefetch(&cases)?;
        for &(eps, grid) in &cases {
            let pair = self.pair(eps, grid)?;
            let c = three_ball_constant(&pair.u_eps, e.s, tb.radii)?;
            t.push(vec!["family".into(), num(eps), grid.n().to_string(), num(r1), num(r2), num(r3), num(e.s), num(c)]);
            let sq = pair.u_eps.map(|v| v * v);
            let [p, q, r] = [r1, r2, r3].map(|rad| ball_integral(&sq, rad, DEFAULT_SUBSAMPLES));
            let (p, q, r) = (p?, q?, r?);
            let b = optimal_tau_bound(p, q, r, e.alpha, e.beta, tau0)?;
            tau_table.push(vec![
                num(eps),
                num(p),
                num(q),
                num(r),
                num(b.tau_tilde),
                serde_json::to_value(b.branch).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                num(b.bound),
                num(q / b.bound),
            ]);
            family.push((eps, c));
        }
        let max_c = family.iter().map(|f| f.1).fold(0.0, f64::max);
        checks.push(Check::at_most("family_over_baseline", max_c / baseline, tb.baseline_factor));

        let &(eps_min, grid_min) = cases.last().expect("nonempty sweep");
        let pair = self.pair(eps_min, grid_min)?;
        let macro_c = family.last().expect("nonempty sweep").1;
        let multi = multiscale_three_ball(&pair.u_eps, e.s, &tb.multiscale_radii)?;
        for &(r, c) in &multi {
            t.push(vec!["multiscale".into(), num(eps_min), grid_min.n().to_string(), num(r), num(2.0 * r), num(4.0 * r), num(e.s), num(c)]);
        }
        let max_multi = multi.iter().map(|m| m.1).fold(0.0, f64::max);
        checks.push(Check::at_most("multiscale_over_macroscopic", max_multi / macro_c, tb.multiscale_factor));
        let chart = Chart {
            title: format!("Three-ball constant at eps = {eps_min}"),
            x_label: "r".into(),
            y_label: "C_r".into(),
            log_x: true,
            log_y: false,
            series: vec![
                Series { label: "C_r".into(), points: multi.clone() },
                Series {
                    label: "macroscopic".into(),
                    points: multi.iter().map(|&(r, _)| (r, macro_c)).collect(),
                },
            ],
        };
        Ok(StageOutput {
            checks,
            metrics: json!({
                "exponents": e,
                "exponents_at_1": one,
                "baseline": baseline,
                "family": family.iter().map(|(eps, c)| json!({"eps": eps, "constant": c})).collect::<Vec<_>>(),
                "multiscale": multi.iter().map(|(r, c)| json!({"r": r, "constant": c})).collect::<Vec<_>>(),
            }),
            tables: vec![t, tau_table],
            charts: vec![("threeball".into(), chart)],
        })
    }

    fn doubling_stage(&mut self) -> Result<StageOutput> {
        let radii = self.cfg.doubling.radii.clone();
        let growth = self.cfg.growth;
        let cases = self.sweep_cases()?;
        self.prefetch(&cases)?;
        let mut t = Table::new("doubling", &["eps", "n", "radius", "ratio"]);
        let mut macro_table =
            Table::new("doubling_macroscopic", &["eps", "outer_radius", "inner_radius", "ratio", "holds", "growth_margin", "growth_holds"]);
        let mut series = vec![];
        let (mut all_macro, mut all_finite) = (true, true);
        let mut rows = vec![];
        for (eps, grid) in cases {
            let pair = self.pair(eps, grid)?;
            let d = doubling_report(&pair.u_eps, &radii, self.a.mu(), growth.m)?;
            let gc = growth_check(&pair.u_eps, &growth)?;
            for (r, q) in d.radii.iter().zip(&d.ratios) {
                t.push(vec![num(eps), grid.n().to_string(), num(*r), num(*q)]);
                all_finite &= q.is_finite() && *q > 0.0;
            }
            let m = d.macroscopic;
            macro_table.push(vec![
                num(eps),
                num(m.outer_radius),
                num(m.inner_radius),
                num(m.ratio),
                m.holds.to_string(),
                num(gc.margin),
                gc.holds.to_string(),
            ]);
            all_macro &= m.holds;
            series.push(Series { label: format!("eps={eps}"), points: d.radii.iter().copied().zip(d.ratios.iter().copied()).collect() });
            rows.push(json!({"eps": eps, "max_ratio": d.max_ratio, "macroscopic": m, "growth": gc}));
        }
        let chart = Chart {
            title: "Doubling ratio mean_{B_r} u^2 / mean_{B_{r/2}} u^2".into(),
            x_label: "r".into(),
            y_label: "ratio".into(),
            log_x: true,
            log_y: false,
            series,
        };
        Ok(StageOutput {
            checks: vec![Check::holds("ratios_finite_positive", all_finite), Check::holds("macroscopic_doubling", all_macro)],
            metrics: json!({ "rows": rows }),
            tables: vec![t, macro_table],
            charts: vec![("doubling".into(), chart)],
        })
    }

    fn counterexample_stage(&mut self) -> Result<StageOutput> {
        let c = self.cfg.counterexample.clone();
        let grid = DomainGrid::new(self.cfg.half_extent, c.n)?;
        let ks: Vec<u32> = (0..=c.k_max).collect();
        let rep = counterexample_study(grid, &ks, &self.cfg.growth, c.subsamples)?;
        let max_err = rep.rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
        let threshold_ok = rep.threshold.is_some_and(|k| k <= c.k_max);
        let mut t = Table::new("counterexample", &["k", "exact", "quadrature", "rel_err", "b2_over_b3", "growth_holds"]);
        for r in &rep.rows {
            t.push(vec![
                r.k.to_string(),
                num(r.exact),
                num(r.quadrature),
                num(r.rel_err),
                num(r.growth.rhs),
                r.growth.holds.to_string(),
            ]);
        }
        let chart = Chart {
            title: "Mass ratio on B_1 over B_3".into(),
            x_label: "k".into(),
            y_label: "ratio".into(),
            log_x: false,
            log_y: true,
            series: vec![
                Series { label: "quadrature".into(), points: rep.rows.iter().map(|r| (r.k as f64, r.quadrature)).collect() },
                Series { label: "3^-(2k+2)".into(), points: rep.rows.iter().map(|r| (r.k as f64, r.exact)).collect() },
            ],
        };
        Ok(StageOutput {
            checks: vec![Check::at_most("homogeneity_rel_err", max_err, c.tolerance), Check::holds("growth_fails_from_threshold", threshold_ok)],
            metrics: json!({ "threshold": rep.threshold, "max_rel_err": max_err, "rows": rep.rows }),
            tables: vec![t],
            charts: vec![("counterexample".into(), chart)],
        })
    }
}

/// Worst ratio, or `NaN` if both sides vanished somewhere.
fn ratio_or_nan(r: &CarlemanReport) -> f64 {
    if r.degenerate {
        f64::NAN
    } else {
        r.max_ratio
    }
}

fn solve_family(a: &CoefficientField, g: &BoundaryData, eps: f64, grid: DomainGrid, tol: f64) -> Result<ScalarField> {
    let op = homlab_core::elliptic::assemble(a, eps, grid, BoundaryMask::Square)?;
    solve_dirichlet(&op, g, tol)
}

/// `max |R|` where the cutoff is constant, relative to `max |R|`.
fn plateau_ratio(r: &ScalarField, cutoff: &Cutoff) -> f64 {
    let grid = r.grid();
    let np = grid.nodes_per_side();
    let p = cutoff.profile;
    let mut inside: f64 = 0.0;
    for (k, v) in r.values().iter().enumerate() {
        let x = grid.coord(k % np, k / np);
        let rad = x[0].hypot(x[1]);
        if (rad > p.b && rad < p.c) || rad <= p.a || rad >= p.d {
            inside = inside.max(v.abs());
        }
    }
    let max = r.max_abs();
    if max > 0.0 {
        inside / max
    } else {
        0.0
    }
}
