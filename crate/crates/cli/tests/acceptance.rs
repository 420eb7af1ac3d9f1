//! Acceptance suite: runs every pipeline at the pinned settings and prints
//! one PASS/FAIL line per criterion. Exits non-zero if any criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use homlab::config::{BoundarySpec, ExperimentConfig};
use homlab::pipeline::Pipeline;
use homlab::report::{num, Check, StageReport, Summary};
use homlab::{run, Command, RunOptions};

const RUNTIME_BUDGET: Duration = Duration::from_secs(20 * 60);

fn outdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("homlab-acceptance-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn stage<'a>(s: &'a Summary, name: &str) -> Option<&'a StageReport> {
    s.stages.iter().find(|st| st.name == name)
}

fn checks<'a>(s: &'a Summary, st: &str, names: &[&str]) -> Vec<Option<&'a Check>> {
    names.iter().map(|n| stage(s, st).and_then(|x| x.checks.iter().find(|c| c.name == *n))).collect()
}

fn prefixed<'a>(s: &'a Summary, st: &str, prefix: &str) -> Vec<Option<&'a Check>> {
    stage(s, st).map(|x| x.checks.iter().filter(|c| c.name.starts_with(prefix)).map(Some).collect()).unwrap_or_default()
}

struct Criterion {
    id: &'static str,
    what: &'static str,
    checks: Vec<Option<Check>>,
    extra: Option<(bool, String)>,
}

impl Criterion {
    fn new(id: &'static str, what: &'static str, checks: Vec<Option<&Check>>) -> Self {
        Self { id, what, checks: checks.into_iter().map(|c| c.cloned()).collect(), extra: None }
    }

    fn pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.as_ref().is_some_and(|c| c.pass)) && self.extra.as_ref().is_none_or(|e| e.0)
    }

    fn detail(&self) -> String {
        let mut parts: Vec<String> = self
            .checks
            .iter()
            .map(|c| match c {
                Some(c) => format!("{}={} ({} {})", c.name, num(c.value), c.relation.symbol(), num(c.bound)),
                None => "missing check".into(),
            })
            .collect();
        if let Some((_, e)) = &self.extra {
            parts.push(e.clone());
        }
        parts.join("; ")
    }
}

fn main() -> ExitCode {
    let mut cfg = ExperimentConfig { boundary: BoundarySpec::Fourier { seed: Some(7), modes: 4 }, ..Default::default() };
    cfg.validate().expect("acceptance config is valid");
    let opts = RunOptions { outdir: Some(outdir("all")), plots: true, use_cached: false };
    let start = Instant::now();
    let all = run(Command::All, cfg.clone(), &opts);
    let elapsed = start.elapsed();
    if let Some(e) = &all.summary.error {
        println!("error in stage {} ({}): {}", e.stage, e.kind, e.message);
    }

    cfg.coefficient = "identity".into();
    let id_opts = RunOptions { outdir: Some(outdir("identity")), plots: false, use_cached: false };
    let identity = run(Command::Single(Pipeline::Cell), cfg, &id_opts);

    let s = &all.summary;
    let cell_seconds = stage(s, "cell").map_or(f64::INFINITY, |c| c.seconds);
    let mut criteria = vec![
        Criterion::new("1", "laminate homogenized tensor oracle at n = 256", checks(s, "cell", &["laminate_oracle_error"])),
        Criterion::new(
            "2",
            "A = I: zero correctors, identity tensor, zero flux correctors",
            checks(&identity.summary, "cell", &["corrector_residual", "corrector_max", "a_hat_error", "flux_corrector_max"]),
        ),
        Criterion::new("3", "L2 slope >= 0.5 and C max/min <= 3", checks(s, "convergence", &["l2_slope", "constant_spread"])),
        Criterion::new("4", "two-scale H1 error strictly decreasing", checks(s, "convergence", &["h1_strictly_decreasing"])),
        Criterion::new("5", "expansion residual drop >= 1.8 and support property", checks(s, "carleman", &["residual_drop", "support_property"])),
        Criterion::new("6", "weighted inequality lhs/rhs <= 1.1 (A = I and eps <= 1/32)", {
            let mut v = checks(s, "carleman", &["identity_max_ratio"]);
            v.extend(prefixed(s, "carleman", "family_max_ratio_eps_"));
            v
        }),
        Criterion::new(
            "7",
            "calibrated C0 > 0 and tau-spread <= 10",
            checks(s, "calibrate", &["family_c0_positive", "family_tau_spread", "identity_c0_positive", "identity_tau_spread"]),
        ),
        Criterion::new("8", "weighted Caccioppoli max/min <= 5 across eps", checks(s, "carleman", &["caccioppoli_spread"])),
        Criterion::new("9", "three-ball constant <= 10x the A = I baseline", checks(s, "threeball", &["family_over_baseline"])),
        Criterion::new("10", "multiscale three-ball <= 2x macroscopic", checks(s, "threeball", &["multiscale_over_macroscopic"])),
        Criterion::new(
            "11",
            "counterexample ratios within 1e-3 and growth failure threshold",
            checks(s, "counterexample", &["homogeneity_rel_err", "growth_fails_from_threshold"]),
        ),
        Criterion::new("12", "exponents at lambda = 1 and beta > 0", checks(s, "threeball", &["exponents_at_lambda_1", "beta_positive_on_grid"])),
    ];
    criteria[0].extra = Some((cell_seconds < 30.0, format!("cell stage {cell_seconds:.1}s (< 30s)")));
    let runtime = Criterion {
        id: "runtime",
        what: "full pipeline within 20 minutes",
        checks: vec![],
        extra: Some((elapsed <= RUNTIME_BUDGET, format!("{:.1}s", elapsed.as_secs_f64()))),
    };

    let mut failed = 0;
    for c in &criteria {
        let ok = c.pass();
        failed += usize::from(!ok);
        println!("{} criterion {}: {} [{}]", if ok { "PASS" } else { "FAIL" }, c.id, c.what, c.detail());
    }
    let ok = runtime.extra.as_ref().is_some_and(|e| e.0) && all.summary.error.is_none();
    failed += usize::from(!ok);
    println!("{} {}: {} [{}]", if ok { "PASS" } else { "FAIL" }, runtime.id, runtime.what, runtime.detail());
    if let Some(lp) = stage(s, "carleman").and_then(|c| c.metrics.get("largest_passing_eps")) {
        println!("note: largest eps passing the weighted inequality: {lp}");
    }
    for dir in [opts.outdir, id_opts.outdir].into_iter().flatten() {
        let _ = std::fs::remove_dir_all(dir);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
