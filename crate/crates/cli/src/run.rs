//! Command implementations. Each returns an [`Outcome`] instead of exiting so
//! that the commands can be driven from tests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cellflow::abstraction::{
    check_complete, check_over_approximation, check_under_approximation, conservativeness_volume, verify_safety,
    ApproximationReport, ConservativenessOptions, SafetyQuery, SafetyVerdict,
};
use cellflow::rng::derive_seed;
use cellflow::{dynamics, CellId, DiscreteSystem, Error, Soundness};

use crate::artifacts::{self, Csv};
use crate::config::{self, CheckKind, RunConfig};
use crate::model::{self, streams, Extra, Model, Prepared};
use crate::plot;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Abstract,
    Check,
    Verify,
    Plot,
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass = 0,
    Config = 2,
    Failure = 3,
    Unsafe = 4,
    Precondition = 5,
    Unsupported = 6,
}

impl Status {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    /// Overrides the config seed.
    pub seed: Option<u64>,
    /// Explicit output directory; wins over the config.
    pub out: Option<PathBuf>,
    /// Used when neither `out` nor the config names a directory.
    pub default_out: Option<PathBuf>,
    /// `phi.csv` to check instead of the constructed phi.
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    /// Human-readable report lines.
    pub report: Vec<String>,
    /// Error message when `status` is not `Pass`.
    pub error: Option<String>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    fn fail(status: Status, msg: impl Into<String>, report: Vec<String>, files: Vec<PathBuf>) -> Self {
        Self {
            status,
            report,
            error: Some(msg.into()),
            files,
        }
    }
}

struct Ctx {
    cfg: RunConfig,
    prepared: Prepared,
    hash: String,
    out: PathBuf,
    report: Vec<String>,
    files: Vec<PathBuf>,
}

impl Ctx {
    fn write(&mut self, csv: &Csv, name: &str) -> Result<(), Outcome> {
        match csv.write(&self.out, name, &self.hash) {
            Ok(p) => {
                self.files.push(p);
                Ok(())
            }
            Err(e) => Err(self.fail(Status::Failure, format!("cannot write {name}: {e}"))),
        }
    }

    fn fail(&self, status: Status, msg: impl Into<String>) -> Outcome {
        Outcome::fail(status, msg, self.report.clone(), self.files.clone())
    }

    fn seed(&self, stream: u64) -> u64 {
        derive_seed(self.cfg.seed, stream)
    }

    fn timed<T>(&mut self, phase: &str, f: impl FnOnce(&mut Self) -> T) -> T {
        let start = Instant::now();
        let r = f(self);
        self.report
            .push(format!("phase {phase}: {:.3} s", start.elapsed().as_secs_f64()));
        r
    }
}

/// Parses and validates `path`, applying the seed override.
pub fn load(path: &Path, seed: Option<u64>) -> Result<(RunConfig, Prepared, String), config::ConfigError> {
    let text = fs::read_to_string(path)
        .map_err(|e| config::ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = config::parse(&text)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let prepared = model::prepare(&cfg, &text)?;
    Ok((cfg, prepared, text))
}

pub fn run(cmd: Command, path: &Path, opts: &Options) -> Outcome {
    let (cfg, prepared, text) = match load(path, opts.seed) {
        Ok(v) => v,
        Err(e) => {
            return Outcome::fail(
                Status::Config,
                format!("{}: {e}", path.display()),
                Vec::new(),
                Vec::new(),
            )
        }
    };
    let hash = artifacts::config_hash(&text, cfg.seed);
    let out = opts
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .or_else(|| opts.default_out.clone())
        .unwrap_or_else(|| PathBuf::from("cellflow-out"));
    let mut ctx = Ctx {
        report: vec![format!("config-hash: {hash}")],
        cfg,
        prepared,
        hash,
        out,
        files: Vec::new(),
    };
    if cmd == Command::Validate {
        ctx.report.push("config is valid".into());
        return finish(ctx, Status::Pass);
    }
    if cmd == Command::Plot && ctx.prepared.space.dim() > 2 {
        let dim = ctx.prepared.space.dim();
        return ctx.fail(
            Status::Unsupported,
            format!("plotting supports dimension 1 or 2; this space has dimension {dim}"),
        );
    }
    let built = ctx.timed("build", |c| model::build(&c.cfg, &c.prepared));
    let mut m = match built {
        Ok(m) => m,
        Err(e) => return ctx.fail(Status::Failure, format!("construction failed: {e}")),
    };
    summarize(&mut ctx, &m);
    let result = match cmd {
        Command::Validate => unreachable!(),
        Command::Abstract => write_abstraction(&mut ctx, &m).map(|_| Status::Pass),
        Command::Check => write_abstraction(&mut ctx, &m).and_then(|_| check(&mut ctx, &mut m, opts)),
        Command::Verify => write_abstraction(&mut ctx, &m).and_then(|_| verify(&mut ctx, &mut m)),
        Command::Plot => plot_data(&mut ctx, &m),
    };
    match result {
        Ok(status) => finish(ctx, status),
        Err(o) => o,
    }
}

fn finish(ctx: Ctx, status: Status) -> Outcome {
    let error = match status {
        Status::Pass => None,
        Status::Failure => Some("one or more checks failed".into()),
        Status::Unsafe => Some("possibly unsafe".into()),
        _ => Some(format!("{status:?}")),
    };
    Outcome {
        status,
        report: ctx.report,
        error,
        files: ctx.files,
    }
}

fn summarize(ctx: &mut Ctx, m: &Model) {
    let r = &mut ctx.report;
    r.push(format!(
        "construction: {} |Z| = {} grid times = {} tag = {}",
        ctx.cfg.construction.name(),
        m.d.n_states(),
        m.grid.len(),
        m.d.soundness().name()
    ));
    match &m.extra {
        Extra::Cover { inclusion } => r.push(format!(
            "inclusion: {} (checked {}, worst residual {:e})",
            if inclusion.holds { "verified" } else { "not verified" },
            inclusion.checked,
            inclusion.worst_residual
        )),
        Extra::Contraction {
            certificate, centers, ..
        } => r.push(format!(
            "certificate: passed (checked {}, worst margin {:e}), {centers} disks",
            certificate.checked_points, certificate.worst_margin
        )),
        Extra::Morse {
            decomposition: dm,
            invariance,
            ..
        } => {
            let pairs: Vec<String> = dm
                .cells
                .iter()
                .map(|c| format!("({},{})", dm.elements[c.source].label, dm.elements[c.sink].label))
                .collect();
            r.push(format!("order: {}", pairs.join(" ")));
            r.push(format!(
                "unresolved: {:.4} of {} samples",
                dm.unresolved_fraction(),
                dm.samples
            ));
            r.push(format!(
                "invariance: {} checked, {} mismatches, {} unresolved",
                invariance.checked,
                invariance.mismatches.len(),
                invariance.unresolved
            ));
        }
        Extra::Levels { abstraction, descent } => r.push(format!(
            "levels: {} nonempty cells, phi mode {}, descent worst {:e}",
            abstraction.cells().len(),
            abstraction.mode.name(),
            descent.worst_value
        )),
    }
}

fn label_of(m: &Model) -> impl Fn(CellId) -> String + '_ {
    move |z| match &m.extra {
        Extra::Morse { decomposition, .. } => decomposition.cell_label(z),
        Extra::Levels { abstraction, .. } => format!(
            "[{}]",
            abstraction.cells()[z.0]
                .iter()
                .map(|k| k.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        ),
        _ => format!("cell{}", z.0),
    }
}

fn write_abstraction(ctx: &mut Ctx, m: &Model) -> Result<(), Outcome> {
    let cells = artifacts::cells_csv(&m.cover, &label_of(m));
    ctx.write(&cells, "cells.csv")?;
    let phi = ctx.timed("phi", |_| artifacts::phi_csv(&m.d));
    let phi = phi.map_err(|e| ctx.fail(Status::Failure, format!("phi evaluation failed: {e}")))?;
    ctx.write(&phi, "phi.csv")?;
    match &m.extra {
        Extra::Levels { abstraction, .. } => {
            let t = artifacts::boxmap_csv(&abstraction.boxes, abstraction.family.len());
            ctx.write(&t, "boxmap.csv")?;
        }
        Extra::Morse { decomposition, .. } => ctx.write(&artifacts::order_csv(decomposition), "order.csv")?,
        _ => {}
    }
    Ok(())
}

fn report_line(r: &ApproximationReport) -> String {
    format!(
        "{}: {} (checked {}, violations {})",
        r.kind.name(),
        r.outcome(),
        r.checked,
        r.violations.len()
    )
}

fn check(ctx: &mut Ctx, m: &mut Model, opts: &Options) -> Result<Status, Outcome> {
    let mut d = m.d.clone();
    if let Some(p) = &opts.replay {
        let text =
            fs::read_to_string(p).map_err(|e| ctx.fail(Status::Config, format!("cannot read {}: {e}", p.display())))?;
        let (grid, table) = artifacts::read_phi_csv(&text, m.cover.len())
            .map_err(|e| ctx.fail(Status::Config, format!("{}: {e}", p.display())))?;
        d = DiscreteSystem::from_table(grid, table)
            .map_err(|e| ctx.fail(Status::Config, format!("{}: {e}", p.display())))?
            .with_soundness(m.d.soundness());
        ctx.report.push(format!("replaying phi from {}", p.display()));
    }
    let grid = d.time_grid().to_vec();
    let checks = if ctx.cfg.checks.is_empty() {
        vec![CheckKind::Over]
    } else {
        ctx.cfg.checks.clone()
    };
    let n = ctx.cfg.numerics.n_points;
    let seed = ctx.seed(streams::CHECK);
    let mut status = Status::Pass;
    let mut reports: Vec<ApproximationReport> = Vec::new();
    for &c in &checks {
        let r = match c {
            CheckKind::Over => ctx.timed("over", |_| {
                check_over_approximation(&m.sys, &d, &m.cover, n, &grid, seed)
            }),
            CheckKind::Under => ctx.timed("under", |_| {
                check_under_approximation(&m.sys, &d, &m.cover, n, &grid, seed)
            }),
            CheckKind::Complete => ctx.timed("complete", |_| {
                check_complete(&m.sys, &d, &m.cover, n, &grid, seed).map(|(c, _, _)| c)
            }),
            CheckKind::Conservativeness | CheckKind::Safety => continue,
        };
        let r = r.map_err(|e| ctx.fail(Status::Failure, format!("{} check failed to run: {e}", c.name())))?;
        ctx.report.push(report_line(&r));
        if !r.verdict {
            status = Status::Failure;
        } else if c == CheckKind::Complete && d.soundness() == Soundness::Unknown {
            d.set_soundness(Soundness::Complete);
        } else if c == CheckKind::Over && d.soundness() == Soundness::Unknown {
            d.set_soundness(Soundness::Over);
        }
        reports.push(r);
    }
    if !reports.is_empty() {
        let named: Vec<(&str, &[_])> = reports
            .iter()
            .map(|r| (r.kind.name(), r.violations.as_slice()))
            .collect();
        ctx.write(&artifacts::violations_csv(&named), "violations.csv")?;
    }
    if checks.contains(&CheckKind::Conservativeness) {
        let copts = ConservativenessOptions {
            preimage_samples: ctx.cfg.numerics.preimage_samples,
            bloat: ctx.cfg.numerics.conservativeness_bloat,
        };
        let (mc, cseed) = (ctx.cfg.numerics.mc_samples, ctx.seed(streams::CONSERVATIVENESS));
        let est = ctx.timed("conservativeness", |_| {
            conservativeness_volume(&m.sys, &d, &m.cover, &grid, mc, cseed, copts)
        });
        let est = est.map_err(|e| ctx.fail(Status::Failure, format!("conservativeness failed to run: {e}")))?;
        ctx.report.push(format!(
            "conservativeness: {:e} +- {:e} (at {:?})",
            est.value, est.std_error, est.argmax
        ));
        ctx.write(&artifacts::conservativeness_csv(&est.per_cell), "conservativeness.csv")?;
    }
    if checks.contains(&CheckKind::Safety) {
        m.d = d;
        let s = verify(ctx, m)?;
        if status == Status::Pass {
            status = s;
        }
    }
    Ok(status)
}

fn verify(ctx: &mut Ctx, m: &mut Model) -> Result<Status, Outcome> {
    let Some((init, bad, horizon, samples)) = ctx.prepared.safety.clone() else {
        return Err(ctx.fail(Status::Config, "verify needs a [safety] table"));
    };
    let n = ctx.cfg.numerics.n_points;
    let seed = ctx.seed(streams::CHECK);
    if !m.d.soundness().is_over() {
        // Constructions without an a-priori tag earn one from a passing check.
        let gate = match &m.extra {
            Extra::Morse { .. } => Some(CheckKind::Complete),
            Extra::Levels { .. } => Some(CheckKind::Over),
            _ => None,
        };
        let Some(gate) = gate else {
            return Err(ctx.fail(Status::Precondition, Error::NotOverApproximation.to_string()));
        };
        let grid = m.grid.clone();
        let r = ctx.timed("gate", |_| match gate {
            CheckKind::Complete => check_complete(&m.sys, &m.d, &m.cover, n, &grid, seed).map(|(c, _, _)| c),
            _ => check_over_approximation(&m.sys, &m.d, &m.cover, n, &grid, seed),
        });
        let r = r.map_err(|e| ctx.fail(Status::Failure, format!("gating check failed to run: {e}")))?;
        ctx.report.push(format!("gate {}", report_line(&r)));
        if !r.verdict {
            return Err(ctx.fail(Status::Precondition, Error::NotOverApproximation.to_string()));
        }
        m.d.set_soundness(if gate == CheckKind::Complete {
            Soundness::Complete
        } else {
            Soundness::Over
        });
    }
    let query = SafetyQuery {
        init,
        unsafe_region: bad,
        horizon,
        samples_per_cell: samples,
    };
    let sseed = ctx.seed(streams::SAFETY);
    let grid = m.grid.clone();
    let v = ctx.timed("safety", |_| verify_safety(&m.d, &m.cover, &query, &grid, sseed));
    match v {
        Ok(SafetyVerdict::Safe) => {
            ctx.report.push(format!("safety: Safe up to t = {horizon}"));
            Ok(Status::Pass)
        }
        Ok(SafetyVerdict::PossiblyUnsafe { t, cells }) => {
            ctx.report.push(format!(
                "safety: PossiblyUnsafe at t = {t}, cells {}",
                artifacts::fmt_cells(&cells)
            ));
            Ok(Status::Unsafe)
        }
        Err(Error::NotOverApproximation) => {
            Err(ctx.fail(Status::Precondition, Error::NotOverApproximation.to_string()))
        }
        Err(e) => Err(ctx.fail(Status::Failure, format!("safety query failed: {e}"))),
    }
}

fn plot_data(ctx: &mut Ctx, m: &Model) -> Result<Status, Outcome> {
    let space = &m.sys.space;
    let starts = space.quasi_uniform(ctx.cfg.plot.trajectories, ctx.seed(streams::PLOT));
    let runs: Vec<Vec<(f64, Vec<f64>)>> = starts
        .iter()
        .map(|x| {
            let mut run = Vec::new();
            let (mut t, mut y) = (0.0, x.clone());
            for &target in &m.grid {
                match dynamics::flow(&m.sys.field, space, &m.sys.flow, target - t, &y) {
                    Ok(next) => {
                        y = next;
                        t = target;
                        run.push((t, y.clone()));
                    }
                    Err(_) => break,
                }
            }
            run
        })
        .collect();
    ctx.write(&artifacts::trajectories_csv(space.dim(), &runs), "trajectories.csv")?;
    if space.dim() == 2 {
        let t = ctx.cfg.plot.t.unwrap_or(m.grid[m.grid.len() / 2]);
        let phi = m
            .cover
            .cells()
            .map(|z| m.d.phi(t, z))
            .collect::<cellflow::Result<Vec<_>>>()
            .map_err(|e| ctx.fail(Status::Failure, format!("phi evaluation failed: {e}")))?;
        let centroids = plot::centroids(&m.cover, 50, derive_seed(ctx.seed(streams::PLOT), 1));
        let svg = plot::render_svg(&m.cover, &phi, &centroids, t, ctx.cfg.plot.resolution);
        let path = ctx.out.join("cells_2d.svg");
        fs::create_dir_all(&ctx.out)
            .and_then(|_| fs::write(&path, svg))
            .map_err(|e| ctx.fail(Status::Failure, format!("cannot write cells_2d.svg: {e}")))?;
        ctx.files.push(path);
    } else {
        ctx.report
            .push("dimension 1: trajectories only, no cell picture".into());
    }
    Ok(Status::Pass)
}
