//! Turns a parsed configuration into a continuous system, a cover and a discrete system.

use cellflow::abstraction::{log_time_grid, uniform_time_grid};
use cellflow::contraction::{self, AlphaFn, ContractionCertificate, Envelope, FinslerLyapunovSpec, FinslerReport};
use cellflow::cover::{self, AlphaNorm, Ex1Options, InclusionReport, LinearFamily};
use cellflow::expr::Expr;
use cellflow::geometry::grid_partition;
use cellflow::levelset::{self, DescentReport, LevelAbstraction, LevelFamily, LevelFunction, PhiMode, TimingOptions};
use cellflow::linalg;
use cellflow::morse::{self, InvarianceReport, MorseDecomposition, MorseOptions, SingularElement, Stability};
use cellflow::rng::derive_seed;
use cellflow::{
    Builtin, ContinuousSystem, DiscreteSystem, Error, FlowConfig, Metric, OrderedCover, Region, ScalarField, Soundness,
    SpaceKind, StateSpace, VectorField,
};
use nalgebra::DMatrix;

use crate::config::*;

/// Seed streams derived from the root seed.
pub mod streams {
    pub const CONSTRUCTION: u64 = 1;
    pub const CHECK: u64 = 2;
    pub const CONSERVATIVENESS: u64 = 3;
    pub const SAFETY: u64 = 4;
    pub const PLOT: u64 = 5;
}

/// Everything that can be set up without simulation; doubles as semantic validation.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub field: VectorField,
    pub space: StateSpace,
    pub flow: FlowConfig,
    pub grid: Vec<f64>,
    pub safety: Option<(Region, Region, f64, usize)>,
}

/// Construction-specific results kept for reporting and artifacts.
#[derive(Debug, Clone)]
pub enum Extra {
    Cover {
        inclusion: InclusionReport,
    },
    Contraction {
        certificate: ContractionCertificate,
        finsler: FinslerReport,
        centers: usize,
    },
    Morse {
        decomposition: MorseDecomposition,
        invariance: InvarianceReport,
        options: MorseOptions,
    },
    Levels {
        abstraction: LevelAbstraction,
        descent: DescentReport,
    },
}

#[derive(Debug)]
pub struct Model {
    pub sys: ContinuousSystem,
    pub cover: OrderedCover,
    pub d: DiscreteSystem,
    pub grid: Vec<f64>,
    pub extra: Extra,
}

fn matrix(rows: &[Vec<f64>], dim: usize, what: &str) -> Result<DMatrix<f64>, String> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(format!("{what} must be {dim}x{dim}"));
    }
    Ok(DMatrix::from_fn(dim, dim, |r, c| rows[r][c]))
}

fn bounds(b: &[[f64; 2]]) -> Vec<(f64, f64)> {
    b.iter().map(|&[lo, hi]| (lo, hi)).collect()
}

fn scalar(src: &str, gradient: Option<&[String]>, dim: usize) -> Result<ScalarField, String> {
    if src.trim() == "squared_norm" {
        return Ok(ScalarField::squared_norm());
    }
    let e = Expr::parse_state(src, dim).map_err(|e| e.to_string())?;
    let g = gradient
        .map(|g| {
            if g.len() != dim {
                return Err(format!("gradient needs {dim} components"));
            }
            g.iter()
                .map(|s| Expr::parse_state(s, dim).map_err(|e| e.to_string()))
                .collect()
        })
        .transpose()?;
    Ok(ScalarField::from_expr(e, g))
}

pub fn region(spec: &RegionSpec, dim: usize) -> Result<Region, String> {
    let need = |v: &[f64]| {
        if v.len() == dim {
            Ok(())
        } else {
            Err(format!("region needs {dim} coordinates, got {}", v.len()))
        }
    };
    Ok(match spec {
        RegionSpec::Rect { bounds: b } => {
            if b.len() != dim || b.iter().any(|[lo, hi]| lo > hi) {
                return Err(format!("rect needs {dim} ordered [lo, hi] pairs"));
            }
            Region::rect(bounds(b))
        }
        RegionSpec::Ball { center, radius } => {
            need(center)?;
            if *radius <= 0.0 {
                return Err("ball radius must be positive".into());
            }
            Region::ball(center.clone(), *radius, Metric::euclidean())
        }
        RegionSpec::OutsideBall { center, radius } => {
            need(center)?;
            let (c, r) = (center.clone(), *radius);
            Region::predicate(format!("outside_ball(r={r})"), move |x| linalg::dist(&c, x) >= r)
        }
        RegionSpec::Sublevel { expr, level } => {
            let e = Expr::parse_state(expr, dim).map_err(|e| e.to_string())?;
            let a = *level;
            Region::predicate(format!("{expr} <= {a}"), move |x| e.eval(x) <= a)
        }
    })
}

fn element(e: &ElementSpec) -> SingularElement {
    let stability = match e.stability {
        StabilitySpec::Attracting => Stability::Attracting,
        StabilitySpec::Repelling => Stability::Repelling,
        StabilitySpec::Saddle => Stability::Saddle,
    };
    let el = match e.period {
        Some(p) => SingularElement::periodic(e.label.clone(), e.point.clone(), p, stability),
        None => SingularElement::equilibrium(e.label.clone(), e.point.clone(), stability),
    };
    match e.capture_radius {
        Some(r) => el.with_capture_radius(r),
        None => el,
    }
}

fn time_grid(n: &Numerics) -> Result<Vec<f64>, String> {
    let grid = match &n.time_grid {
        TimeGridSpec::Log { count, t_max } => {
            let t = t_max.unwrap_or(n.t_max);
            if *count == 0 || t <= 0.0 {
                return Err("log time grid needs count >= 1 and t_max > 0".into());
            }
            log_time_grid(t, *count)
        }
        TimeGridSpec::Uniform { step, count } => {
            if *step <= 0.0 || *count == 0 {
                return Err("uniform time grid needs step > 0 and count >= 1".into());
            }
            uniform_time_grid(*step, *count)
        }
        TimeGridSpec::Explicit { times } => times.clone(),
    };
    if grid.is_empty() || grid[0] < 0.0 || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err("time grid must be nonempty, nonnegative and nondecreasing".into());
    }
    Ok(grid)
}

/// Semantic validation plus the cheap parts of the build.
pub fn prepare(cfg: &RunConfig, text: &str) -> Result<Prepared, ConfigError> {
    let err =
        |table: &str, key: &str, msg: String| ConfigError::new(format!("{table}.{key}: {msg}")).at(text, table, key);

    let b = bounds(&cfg.space.bounds);
    let kind = match cfg.space.kind {
        SpaceKindSpec::Box => SpaceKind::Box,
        SpaceKindSpec::Torus => SpaceKind::Torus,
    };
    let space = StateSpace::new(kind, b).map_err(|e| err("space", "bounds", e.to_string()))?;
    let dim = space.dim();

    let field = match &cfg.system {
        SystemSpec::Radial {} => VectorField::builtin(Builtin::RadialContraction { dim }),
        SystemSpec::Rotation {} => VectorField::builtin(Builtin::Rotation),
        SystemSpec::DampedPendulum { damping } => VectorField::builtin(Builtin::DampedPendulum { damping: *damping }),
        SystemSpec::CircleGradient {} => VectorField::builtin(Builtin::Gradient1DCircle),
        SystemSpec::Linear { matrix: m } => VectorField::builtin(Builtin::LinearStable(
            matrix(m, dim, "matrix").map_err(|e| err("system", "matrix", e))?,
        )),
        SystemSpec::Expressions { rhs } => {
            let exprs = rhs
                .iter()
                .map(|s| Expr::parse_state(s, dim))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err("system", "rhs", e.to_string()))?;
            VectorField::from_exprs(exprs).map_err(|e| err("system", "rhs", e.to_string()))?
        }
    };
    if field.dim() != dim {
        return Err(err(
            "system",
            "kind",
            format!("field has dimension {} but the space has {dim}", field.dim()),
        ));
    }

    let n = &cfg.numerics;
    let flow = FlowConfig::new(n.step, n.t_max).map_err(|e| err("numerics", "step", e.to_string()))?;
    let grid = time_grid(n).map_err(|e| err("numerics", "time_grid", e))?;
    if n.n_points == 0 {
        return Err(err("numerics", "n_points", "must be >= 1".into()));
    }

    match &cfg.construction {
        ConstructionSpec::Example1(e) => {
            match (&e.partition, &e.regions) {
                (Some(p), None) => {
                    if p.len() != dim || p.contains(&0) {
                        return Err(err("construction", "partition", format!("needs {dim} positive counts")));
                    }
                }
                (None, Some(rs)) => {
                    for r in rs {
                        region(r, dim).map_err(|m| err("construction", "regions", m))?;
                    }
                }
                _ => {
                    return Err(err(
                        "construction",
                        "partition",
                        "exactly one of `partition` and `regions` is required".into(),
                    ))
                }
            }
            if e.matrices.is_empty() {
                return Err(err(
                    "construction",
                    "matrices",
                    "at least one matrix is required".into(),
                ));
            }
            for m in &e.matrices {
                matrix(m, dim, "each matrix").map_err(|m| err("construction", "matrices", m))?;
            }
        }
        ConstructionSpec::Example2(e) => {
            if e.radius.is_nan() || e.radius <= 0.0 {
                return Err(err("construction", "radius", "must be positive".into()));
            }
            AlphaFn::parse(&e.alpha).map_err(|m| err("construction", "alpha", m.to_string()))?;
            if let Some(b) = &e.envelope {
                Envelope::parse(b).map_err(|m| err("construction", "envelope", m.to_string()))?;
            }
            if let Some(p) = &e.metric {
                let m = matrix(p, dim, "metric").map_err(|m| err("construction", "metric", m))?;
                Metric::quadratic(m).map_err(|m| err("construction", "metric", m.to_string()))?;
            }
            if let Some(f) = &e.finsler {
                FinslerLyapunovSpec::user_defined(f, dim, e.degree)
                    .map_err(|m| err("construction", "finsler", m.to_string()))?;
            }
        }
        ConstructionSpec::Example3(e) => {
            if e.elements.is_empty() {
                return Err(err(
                    "construction",
                    "elements",
                    "at least one element is required".into(),
                ));
            }
            for (k, el) in e.elements.iter().enumerate() {
                let table = format!("construction.elements[{k}]");
                if el.point.len() != dim {
                    return Err(err(&table, "point", format!("needs {dim} coordinates")));
                }
                if el.period.is_some_and(|p| p.is_nan() || p <= 0.0) {
                    return Err(err(&table, "period", "must be positive".into()));
                }
            }
        }
        ConstructionSpec::Example4(e) => {
            if e.functions.is_empty() {
                return Err(err(
                    "construction",
                    "functions",
                    "at least one level function is required".into(),
                ));
            }
            for (k, f) in e.functions.iter().enumerate() {
                let table = format!("construction.functions[{k}]");
                if f.levels.len() < 2 || f.levels.windows(2).any(|w| w[0].is_nan() || w[0] >= w[1]) {
                    return Err(err(
                        &table,
                        "levels",
                        "level lists A^i must be strictly increasing (a_1 < a_2 < ...) with at least two entries"
                            .into(),
                    ));
                }
                scalar(&f.v, f.gradient.as_deref(), dim).map_err(|m| err(&table, "v", m))?;
            }
            for (k, el) in e.elements.iter().enumerate() {
                if el.point.len() != dim {
                    return Err(err(
                        &format!("construction.elements[{k}]"),
                        "point",
                        format!("needs {dim} coordinates"),
                    ));
                }
            }
        }
    }

    let safety = match &cfg.safety {
        Some(s) => {
            let init = region(&s.init, dim).map_err(|m| err("safety", "init", m))?;
            let bad = region(&s.unsafe_region, dim).map_err(|m| err("safety", "unsafe", m))?;
            let horizon = s.horizon.unwrap_or(*grid.last().unwrap_or(&0.0));
            Some((init, bad, horizon, s.samples_per_cell.max(1)))
        }
        None => None,
    };
    if cfg.checks.contains(&CheckKind::Safety) && safety.is_none() {
        return Err(
            ConfigError::new("checks: `safety` requested but no [safety] table is given").at(text, "", "checks"),
        );
    }

    Ok(Prepared {
        field,
        space,
        flow,
        grid,
        safety,
    })
}

/// Runs the configured construction.
pub fn build(cfg: &RunConfig, p: &Prepared) -> Result<Model, Error> {
    let seed = derive_seed(cfg.seed, streams::CONSTRUCTION);
    let sys = ContinuousSystem::new(p.field.clone(), p.space.clone(), p.flow)?;
    let space = &p.space;
    let dim = space.dim();
    let grid = p.grid.clone();
    let n = &cfg.numerics;
    let bad = |m: String| Error::InvalidInput(m);
    match &cfg.construction {
        ConstructionSpec::Example1(e) => {
            let regions = match (&e.partition, &e.regions) {
                (Some(per_dim), _) => grid_partition(space, per_dim),
                (None, Some(rs)) => rs
                    .iter()
                    .map(|r| region(r, dim))
                    .collect::<Result<_, _>>()
                    .map_err(bad)?,
                (None, None) => unreachable!("checked by prepare"),
            };
            let cover = OrderedCover::build(space.clone(), regions, n.coverage_samples, derive_seed(seed, 1))?;
            let mats = e
                .matrices
                .iter()
                .map(|m| matrix(m, dim, "matrix"))
                .collect::<Result<Vec<_>, _>>()
                .map_err(bad)?;
            let fam = LinearFamily::new(mats)?;
            let inclusion = cover::check_inclusion(
                &p.field,
                space,
                &fam,
                e.inclusion_samples,
                e.inclusion_tol,
                derive_seed(seed, 2),
            )?;
            let opts = Ex1Options {
                vertex_samples: e.vertex_samples,
                alpha_samples: e.alpha_samples,
                bloat: e.bloat,
                ball_samples: e.ball_samples,
                alpha_norm: match e.alpha_norm {
                    AlphaNormSpec::Sphere => AlphaNorm::Sphere,
                    AlphaNormSpec::Simplex => AlphaNorm::Simplex,
                },
                step: n.step,
            };
            let d = cover::build_ex1_system(
                cover.clone(),
                fam,
                opts,
                grid.clone(),
                derive_seed(seed, 3),
                inclusion.holds,
            );
            Ok(Model {
                sys,
                cover,
                d,
                grid,
                extra: Extra::Cover { inclusion },
            })
        }
        ConstructionSpec::Example2(e) => {
            let form = match &e.metric {
                Some(m) => Some(matrix(m, dim, "metric").map_err(bad)?),
                None => None,
            };
            let spec = match (&e.finsler, &form) {
                (Some(src), _) => FinslerLyapunovSpec::user_defined(src, dim, e.degree)?,
                (None, Some(m)) => FinslerLyapunovSpec::quadratic(m.clone())?,
                (None, None) => FinslerLyapunovSpec::euclidean(dim),
            };
            let finsler =
                contraction::check_finsler_conditions(&spec, space, e.certificate_samples, 1e-9, derive_seed(seed, 1));
            if !finsler.holds() {
                return Err(Error::InvalidInput(format!(
                    "Finsler-Lyapunov conditions fail: {finsler:?}"
                )));
            }
            let alpha = AlphaFn::parse(&e.alpha)?;
            let envelope = e.envelope.as_deref().map(Envelope::parse).transpose()?;
            let certificate = contraction::check_contraction_inequality(
                &p.field,
                space,
                &p.flow,
                &spec,
                alpha,
                envelope,
                e.certificate_samples,
                e.certificate_tol,
                derive_seed(seed, 2),
            )?;
            certificate.require()?;
            let metric = match (spec.induced_metric(), form) {
                (Some(m), _) => m,
                (None, Some(f)) => Metric::quadratic(f)?,
                (None, None) => Metric::euclidean(),
            }
            .on(space);
            let disks =
                contraction::build_disk_cover(space, metric, e.radius, n.coverage_samples, derive_seed(seed, 3))?;
            let centers = disks.centers().len();
            let cover = disks.cover().clone();
            let d = contraction::build_ex2_system(disks, &sys, certificate.clone(), grid.clone())?;
            Ok(Model {
                sys,
                cover,
                d,
                grid,
                extra: Extra::Contraction {
                    certificate,
                    finsler,
                    centers,
                },
            })
        }
        ConstructionSpec::Example3(e) => {
            let elements: Vec<SingularElement> = e.elements.iter().map(element).collect();
            morse::validate_elements(&p.field, space, &p.flow, &elements, e.tol_eq, e.tol_orbit)?;
            let options = MorseOptions {
                n_samples: e.n_samples,
                t_max: e.t_max,
                dwell: e.dwell,
                unresolved_threshold: e.unresolved_threshold,
            };
            let decomposition = morse::build_partial_order(&p.field, space, &p.flow, &elements, &options, seed)?;
            let invariance = morse::check_flow_invariance(
                &decomposition,
                &p.field,
                space,
                &p.flow,
                &options,
                &e.invariance_times,
                e.invariance_per_cell,
            )?;
            let cover = morse::connection_cover(&decomposition, &p.field, space, &p.flow, &options)?;
            // The complete tag is only granted after a complete check passes.
            let d = morse::build_ms_system(&decomposition, grid.clone()).with_soundness(Soundness::Unknown);
            Ok(Model {
                sys,
                cover,
                d,
                grid,
                extra: Extra::Morse {
                    decomposition,
                    invariance,
                    options,
                },
            })
        }
        ConstructionSpec::Example4(e) => {
            let functions = e
                .functions
                .iter()
                .map(|f| LevelFunction::new(scalar(&f.v, f.gradient.as_deref(), dim).map_err(bad)?, f.levels.clone()))
                .collect::<Result<Vec<_>, _>>()?;
            let family = LevelFamily::new(functions)?;
            let descent = levelset::check_descent(
                &p.field,
                space,
                &family,
                e.descent_samples,
                e.descent_tol,
                derive_seed(seed, 1),
            );
            if !descent.holds {
                return Err(Error::InvalidInput(format!(
                    "level function {} increases along the flow (dV = {:e} at {:?})",
                    descent.worst_function, descent.worst_value, descent.worst_point
                )));
            }
            let elements: Vec<SingularElement> = e.elements.iter().map(element).collect();
            levelset::check_levels_against_elements(&family, &elements)?;
            let opts = TimingOptions {
                n_trajectories: e.n_trajectories,
                emptiness_probes: e.emptiness_probes,
            };
            let boxes = levelset::build_box_map(&p.field, space, &p.flow, &family, &opts, derive_seed(seed, 2))?;
            let mode = match e.phi_mode {
                PhiModeSpec::Verbatim => PhiMode::Verbatim,
                PhiModeSpec::Bounds => PhiMode::Bounds,
            };
            let abstraction = LevelAbstraction::new(family, boxes, mode, e.chain_tol);
            let cover = abstraction.cover(space);
            let d = abstraction.discrete_system(grid.clone());
            Ok(Model {
                sys,
                cover,
                d,
                grid,
                extra: Extra::Levels { abstraction, descent },
            })
        }
    }
}
