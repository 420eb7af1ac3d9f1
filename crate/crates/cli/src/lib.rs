//! `homlab` experiment driver: runs the pipelines of the numerical
//! laboratory and writes CSV tables, `summary.json`, `constants.json` and
//! optional SVG charts.

pub mod config;
pub mod pipeline;
pub mod report;
pub mod svg;

use std::path::PathBuf;
use std::time::Instant;

use homlab_core::Error;

use crate::config::ExperimentConfig;
use crate::pipeline::{Context, Pipeline};
use crate::report::{ErrorReport, StageReport, Status, Summary, CONVENTIONS, VERSION};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Single(Pipeline),
    All,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Single(p) => p.name(),
            Command::All => "all",
        }
    }

    pub fn pipelines(self) -> Vec<Pipeline> {
        match self {
            Command::Single(p) => vec![p],
            Command::All => Pipeline::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides the configured output directory.
    pub outdir: Option<PathBuf>,
    pub plots: bool,
    pub use_cached: bool,
}

pub struct RunOutcome {
    pub summary: Summary,
    pub exit_code: i32,
}

fn error_kind(e: &Error) -> (&'static str, i32) {
    match e {
        Error::Config(_) | Error::Resolution { .. } => ("config", EXIT_CONFIG),
        Error::Degenerate(_) => ("degenerate", EXIT_NUMERICAL),
        Error::Solver { .. } => ("solver", EXIT_NUMERICAL),
        Error::AssumptionViolation { .. } => ("assumption", EXIT_NUMERICAL),
        _ => ("numerical", EXIT_NUMERICAL),
    }
}

/// Runs `command` and writes every output. Stages run in order; the first
/// error stops the run and is recorded in the summary.
pub fn run(command: Command, cfg: ExperimentConfig, opts: &RunOptions) -> RunOutcome {
    let outdir = opts.outdir.clone().unwrap_or_else(|| cfg.outdir.clone());
    let mut summary = Summary {
        homlab_version: VERSION,
        command: command.name().into(),
        status: Status::Pass,
        conventions: CONVENTIONS.to_vec(),
        config: cfg.clone(),
        constants: None,
        stages: vec![],
        error: None,
    };
    let fail = |mut summary: Summary, stage: &str, kind: &'static str, message: String, code: i32| {
        summary.status = Status::Error;
        summary.error = Some(ErrorReport { stage: stage.into(), kind, message });
        RunOutcome { summary, exit_code: code }
    };
    if let Err(e) = std::fs::create_dir_all(&outdir) {
        return fail(summary, "setup", "config", format!("cannot create {}: {e}", outdir.display()), EXIT_CONFIG);
    }
    let mut ctx = match Context::new(cfg, outdir.clone(), opts.use_cached) {
        Ok(c) => c,
        Err(e) => {
            let (kind, code) = error_kind(&e);
            return fail(summary, "setup", kind, e.to_string(), code);
        }
    };
    let mut exit_code = EXIT_PASS;
    for p in command.pipelines() {
        let start = Instant::now();
        let out = match ctx.run(p) {
            Ok(o) => o,
            Err(e) => {
                let (kind, code) = error_kind(&e);
                summary.constants = ctx.constants();
                let outcome = fail(summary, p.name(), kind, e.to_string(), code);
                let _ = report::write_json(&outdir.join("summary.json"), &outcome.summary);
                return outcome;
            }
        };
        let mut files = vec![];
        let written: anyhow::Result<()> = (|| {
            for t in &out.tables {
                files.push(t.write(&outdir)?);
            }
            if opts.plots {
                for (name, chart) in &out.charts {
                    let file = format!("{name}.svg");
                    std::fs::write(outdir.join(&file), chart.render())?;
                    files.push(file);
                }
            }
            Ok(())
        })();
        if let Err(e) = written {
            return fail(summary, p.name(), "io", format!("{e:#}"), EXIT_NUMERICAL);
        }
        let pass = out.checks.iter().all(|c| c.pass);
        if !pass {
            summary.status = Status::Fail;
            exit_code = EXIT_FAIL;
        }
        summary.stages.push(StageReport {
            name: p.name().into(),
            status: if pass { Status::Pass } else { Status::Fail },
            seconds: start.elapsed().as_secs_f64(),
            checks: out.checks,
            metrics: out.metrics,
            files,
        });
    }
    summary.constants = ctx.constants();
    if let Err(e) = report::write_json(&outdir.join("summary.json"), &summary) {
        return fail(summary, "summary", "io", format!("{e:#}"), EXIT_NUMERICAL);
    }
    RunOutcome { summary, exit_code }
}
