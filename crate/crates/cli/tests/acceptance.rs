//! Acceptance gate: one pass/fail line per criterion, with its runtime.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always printed.

use std::f64::consts::{LN_2, PI};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use cellflow::abstraction::{
    check_over_approximation, conservativeness_volume, discrete_reach, inflate, log_time_grid, verify_safety,
    ConservativenessOptions, SafetyQuery, SafetyVerdict,
};
use cellflow::contraction::{self, AlphaFn, FinslerLyapunovSpec};
use cellflow::cover::{self, Ex1Options, LinearFamily};
use cellflow::dynamics;
use cellflow::geometry::grid_partition;
use cellflow::levelset::{self, LevelAbstraction, LevelFamily, LevelFunction, PhiMode, TimingOptions};
use cellflow::linalg::dist;
use cellflow::morse::{self, MorseOptions, SingularElement, Stability};
use cellflow::rng::{derive_seed, CounterRng};
use cellflow::{
    Builtin, CellId, CellSet, ContinuousSystem, DiscreteSystem, Error, FlowConfig, Metric, OrderedCover, Region,
    ScalarField, Soundness, StateSpace, VectorField,
};
use cellflow_cli::{run, Command, Options, Status};
use nalgebra::{DMatrix, DVector};

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s(e: Error) -> String {
    e.to_string()
}

// 1. Integrator fidelity.

fn criterion_1() -> Verdict {
    let space = StateSpace::cube(2, -10.0, 10.0).map_err(e2s)?;
    let cfg = FlowConfig::new(1e-3, 10.0).map_err(e2s)?;
    let radial = VectorField::builtin(Builtin::RadialContraction { dim: 2 });
    let rot = VectorField::builtin(Builtin::Rotation);
    let exact_radial = |t: f64, x: &[f64]| vec![x[0] * (-t).exp(), x[1] * (-t).exp()];
    let exact_rot = |t: f64, x: &[f64]| vec![x[0] * t.cos() + x[1] * t.sin(), -x[0] * t.sin() + x[1] * t.cos()];
    let mut worst = 0.0f64;
    let mut r = CounterRng::new(1);
    for _ in 0..50 {
        let x = [r.uniform(-2.0, 2.0), r.uniform(-2.0, 2.0)];
        for t in [0.1, 0.5, 1.0, 2.0, 3.3, 5.0] {
            let a = dynamics::flow(&radial, &space, &cfg, t, &x).map_err(e2s)?;
            let b = dynamics::flow(&rot, &space, &cfg, t, &x).map_err(e2s)?;
            worst = worst
                .max(dist(&a, &exact_radial(t, &x)))
                .max(dist(&b, &exact_rot(t, &x)));
        }
    }
    ensure(worst <= 1e-6, || format!("max error {worst:e} > 1e-6"))?;
    // Step halving at steps where truncation error dominates roundoff.
    let x = [1.0, 0.5];
    let err = |f: &VectorField, exact: &dyn Fn(f64, &[f64]) -> Vec<f64>, h: f64| -> Result<f64, String> {
        let c = FlowConfig::new(h, 10.0).map_err(e2s)?;
        Ok(dist(
            &dynamics::flow(f, &space, &c, 5.0, &x).map_err(e2s)?,
            &exact(5.0, &x),
        ))
    };
    let mut factors = Vec::new();
    for (f, exact) in [
        (&radial, &exact_radial as &dyn Fn(f64, &[f64]) -> Vec<f64>),
        (&rot, &exact_rot as &dyn Fn(f64, &[f64]) -> Vec<f64>),
    ] {
        factors.push(err(f, exact, 0.2)? / err(f, exact, 0.1)?);
    }
    let min_factor = factors.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(min_factor >= 8.0, || format!("order factors {factors:?} < 8"))?;
    Ok(format!(
        "max error {worst:.2e}, order factors {:.1} / {:.1}",
        factors[0], factors[1]
    ))
}

// 2. Min-index abstraction.

fn criterion_2() -> Verdict {
    let n = 10_000;
    let space = StateSpace::cube(2, -1.0, 1.0).map_err(e2s)?;
    let overlapping = OrderedCover::build(
        space.clone(),
        vec![
            Region::rect(vec![(-0.5, 0.5), (-0.5, 0.5)]),
            Region::ball(vec![0.3, 0.3], 0.6, Metric::euclidean()),
            Region::rect(vec![(-1.0, 1.0), (-1.0, 1.0)]),
        ],
        1000,
        1,
    )
    .map_err(e2s)?;
    // Idempotence: a point of the cell [A(x)] maps back to A(x), and A picks the least containing index.
    for (k, x) in space.sample_uniform(n, 2).iter().enumerate() {
        let z = overlapping.abstract_point(x).map_err(e2s)?;
        ensure(overlapping.containing(x).first() == Some(&z), || {
            format!("not least index at {x:?}")
        })?;
        if k % 100 == 0 {
            for y in overlapping.sample_preimage(z, 5, k as u64).map_err(e2s)? {
                ensure(overlapping.abstract_point(&y).map_err(e2s)? == z, || {
                    format!("A not idempotent at {y:?}")
                })?;
            }
        }
    }
    // Torus periodicity.
    let torus = StateSpace::torus(vec![(0.0, 1.0), (0.0, 2.0)]).map_err(e2s)?;
    let tc = OrderedCover::build(torus.clone(), grid_partition(&torus, &[3, 4]), 1000, 3).map_err(e2s)?;
    let mut r = CounterRng::new(4);
    for x in torus.sample_uniform(n, 5) {
        let (kx, ky) = (r.below(7) as f64 - 3.0, r.below(7) as f64 - 3.0);
        let shifted = [x[0] + kx, x[1] + 2.0 * ky];
        ensure(
            tc.abstract_point(&x).map_err(e2s)? == tc.abstract_point(&shifted).map_err(e2s)?,
            || format!("periodicity fails at {x:?} + ({kx}, {ky})"),
        )?;
    }
    // Partition order independence off the tile boundaries.
    let tiles = grid_partition(&space, &[4, 4]);
    let mut shuffled = tiles.clone();
    for i in (1..shuffled.len()).rev() {
        shuffled.swap(i, r.below(i + 1));
    }
    let a = OrderedCover::new_unchecked(space.clone(), tiles);
    let b = OrderedCover::new_unchecked(space.clone(), shuffled);
    let mut checked = 0;
    for x in space.sample_uniform(n, 6) {
        if x.iter()
            .any(|&c| ((c + 1.0) * 2.0 - ((c + 1.0) * 2.0).round()).abs() < 1e-9)
        {
            continue;
        }
        let ra = a.region(a.abstract_point(&x).map_err(e2s)?).corners();
        let rb = b.region(b.abstract_point(&x).map_err(e2s)?).corners();
        ensure(ra == rb, || format!("order dependence at {x:?}"))?;
        checked += 1;
    }
    Ok(format!(
        "{n} points per property, {checked} off-boundary partition points"
    ))
}

// 3. Example 1 soundness.

fn quadrants() -> Result<(ContinuousSystem, OrderedCover), String> {
    let space = StateSpace::cube(2, -1.0, 1.0).map_err(e2s)?;
    let cover = OrderedCover::build(space.clone(), grid_partition(&space, &[2, 2]), 2000, 1).map_err(e2s)?;
    let sys = ContinuousSystem::new(
        VectorField::builtin(Builtin::RadialContraction { dim: 2 }),
        space,
        FlowConfig::new(1e-3, 5.0).map_err(e2s)?,
    )
    .map_err(e2s)?;
    Ok((sys, cover))
}

fn criterion_3() -> Verdict {
    let (sys, cover) = quadrants()?;
    let fam = LinearFamily::new(vec![-DMatrix::<f64>::identity(2, 2)]).map_err(e2s)?;
    let inc = cover::check_inclusion(&sys.field, &sys.space, &fam, 2000, 1e-12, 2).map_err(e2s)?;
    ensure(inc.holds, || format!("inclusion fails: {inc:?}"))?;
    // 32 grid times: 0 plus 31 log-spaced times up to 5.
    let grid = log_time_grid(5.0, 31);
    // Documented bloat: 2 h^2 max|L| t.
    let opts = Ex1Options::default();
    let d = cover::build_ex1_system(cover.clone(), fam, opts, grid.clone(), 3, inc.holds);
    let n_points = 313;
    let r = check_over_approximation(&sys, &d, &cover, n_points, &grid, 4).map_err(e2s)?;
    ensure(grid.len() == 32 && r.checked >= 10_000, || {
        format!("only {} checks", r.checked)
    })?;
    ensure(r.violations.is_empty(), || {
        format!("{} violations, first {:?}", r.violations.len(), r.violations.first())
    })?;
    Ok(format!(
        "{} (t, x) checks on {} grid times, 0 violations, bloat 2h^2|L|t = {:.1e} at t = 5",
        r.checked,
        grid.len(),
        cover::default_bloat(
            &LinearFamily::new(vec![-DMatrix::<f64>::identity(2, 2)]).map_err(e2s)?,
            1e-3,
            5.0
        )
    ))
}

// 4. Example 2 contraction.

fn criterion_4() -> Verdict {
    let space = StateSpace::cube(2, -1.0, 1.0).map_err(e2s)?;
    let cfg = FlowConfig::new(1e-3, 10.0).map_err(e2s)?;
    let field = VectorField::builtin(Builtin::RadialContraction { dim: 2 });
    let spec = FinslerLyapunovSpec::euclidean(2);
    // Oracle: V(w(t)) = |w|^2 e^{-2t}, so dV/dt = -2 V.
    let mut r = CounterRng::new(9);
    let mut worst_fd = 0.0f64;
    for x in space.sample_uniform(1000, 8) {
        let w: Vec<f64> = r.unit_vector(2).iter().map(|c| c * r.uniform(0.2, 2.0)).collect();
        let d = contraction::finsler_derivative(&field, &space, &cfg, &spec, &x, &w).map_err(e2s)?;
        worst_fd = worst_fd.max((d + 2.0 * spec.value(&x, &w)).abs());
    }
    ensure(worst_fd <= 1e-4, || {
        format!("finite-difference derivative off by {worst_fd:e}")
    })?;
    let cert = contraction::check_contraction_inequality(
        &field,
        &space,
        &cfg,
        &spec,
        AlphaFn::parse("2*s").map_err(e2s)?,
        None,
        1000,
        1e-4,
        10,
    )
    .map_err(e2s)?;
    cert.require().map_err(e2s)?;
    // Envelope on 10^3 pairs: rho(phi_t x1, phi_t x2) <= e^{-t} rho(x1, x2) + 1e-4.
    let mut worst_env = f64::NEG_INFINITY;
    let xs = space.sample_uniform(2000, 11);
    for pair in xs.chunks(2) {
        let t = r.uniform(0.0, 5.0);
        let a = dynamics::flow(&field, &space, &cfg, t, &pair[0]).map_err(e2s)?;
        let b = dynamics::flow(&field, &space, &cfg, t, &pair[1]).map_err(e2s)?;
        let r0 = dist(&pair[0], &pair[1]);
        let env = cert.envelope.eval(t, r0);
        ensure((env - (-t).exp() * r0).abs() <= 1e-12, || {
            format!("envelope {env} is not e^-t r")
        })?;
        worst_env = worst_env.max(dist(&a, &b) - env);
    }
    ensure(worst_env <= 1e-4, || format!("envelope exceeded by {worst_env:e}"))?;
    let rot = VectorField::builtin(Builtin::Rotation);
    let rc = contraction::check_contraction_inequality(
        &rot,
        &space,
        &cfg,
        &spec,
        AlphaFn::parse("2*s").map_err(e2s)?,
        None,
        1000,
        1e-4,
        10,
    )
    .map_err(e2s)?;
    ensure(matches!(rc.require(), Err(Error::NotContractive { .. })), || {
        "rotation accepted".into()
    })?;
    Ok(format!(
        "fd error {worst_fd:.1e}, certificate margin {:.1e}, envelope slack {worst_env:.1e}, rotation NotContractive",
        cert.worst_margin
    ))
}

// 5. Example 3 decomposition.

fn criterion_5() -> Verdict {
    let field = VectorField::builtin(Builtin::Gradient1DCircle);
    let space = StateSpace::torus(vec![(0.0, 2.0 * PI)]).map_err(e2s)?;
    let cfg = FlowConfig::new(1e-2, 60.0).map_err(e2s)?;
    let elements = vec![
        SingularElement::equilibrium("0", vec![0.0], Stability::Attracting),
        SingularElement::equilibrium("pi", vec![PI], Stability::Repelling),
    ];
    let opts = MorseOptions::default();
    let d = morse::build_partial_order(&field, &space, &cfg, &elements, &opts, 3).map_err(e2s)?;
    let pairs: Vec<(String, String)> = d
        .order
        .pairs
        .iter()
        .map(|&(i, j)| (elements[i].label.clone(), elements[j].label.clone()))
        .collect();
    let want: Vec<(String, String)> = [("0", "0"), ("pi", "0"), ("pi", "pi")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    ensure(pairs == want, || format!("pairs {pairs:?}"))?;
    ensure(d.unresolved_fraction() <= 0.01, || {
        format!("unresolved {}", d.unresolved_fraction())
    })?;
    let fwd = log_time_grid(10.0, 8);
    let times: Vec<f64> = fwd
        .iter()
        .rev()
        .map(|t| -t)
        .chain(fwd.iter().skip(1).copied())
        .collect();
    let inv = morse::check_flow_invariance(&d, &field, &space, &cfg, &opts, &times, usize::MAX).map_err(e2s)?;
    ensure(inv.mismatches.is_empty() && inv.unresolved == 0, || format!("{inv:?}"))?;
    Ok(format!(
        "pairs (pi,0) (0,0) (pi,pi), unresolved {:.4}, {} invariance checks at |t| <= 10",
        d.unresolved_fraction(),
        inv.checked
    ))
}

// 6. Example 4 exactness.

fn radial_levels(levels: Vec<f64>) -> Result<(ContinuousSystem, LevelFamily), String> {
    let sys = ContinuousSystem::new(
        VectorField::builtin(Builtin::RadialContraction { dim: 2 }),
        StateSpace::cube(2, -2.0, 2.0).map_err(e2s)?,
        FlowConfig::new(1e-3, 20.0).map_err(e2s)?,
    )
    .map_err(e2s)?;
    let fam = LevelFamily::new(vec![
        LevelFunction::new(ScalarField::squared_norm(), levels).map_err(e2s)?
    ])
    .map_err(e2s)?;
    Ok((sys, fam))
}

/// Radial abstraction on levels extended by `-inf` and `inf` so the slabs cover the box.
fn radial_abstraction() -> Result<(ContinuousSystem, LevelAbstraction), String> {
    let inf = f64::INFINITY;
    let (sys, fam) = radial_levels(vec![-inf, 0.0625, 0.25, 1.0, 4.0, inf])?;
    let opts = TimingOptions {
        n_trajectories: 100,
        ..Default::default()
    };
    let boxes = levelset::build_box_map(&sys.field, &sys.space, &sys.flow, &fam, &opts, 2).map_err(e2s)?;
    Ok((
        sys,
        LevelAbstraction::new(fam, boxes, PhiMode::Bounds, levelset::DEFAULT_CHAIN_TOL),
    ))
}

/// Grid clear of multiples of the transit time.
const SLIVER_FREE_GRID: [f64; 5] = [0.0, 0.25, 0.5, 1.5, 2.5];

fn criterion_6() -> Verdict {
    // Boxes on exactly the levels {0.0625, 0.25, 1, 4}.
    let (sys, fam) = radial_levels(vec![0.0625, 0.25, 1.0, 4.0])?;
    let opts = TimingOptions::default();
    let boxes = levelset::build_box_map(&sys.field, &sys.space, &sys.flow, &fam, &opts, 1).map_err(e2s)?;
    let mut worst = 0.0f64;
    for z in boxes.cells() {
        let b = boxes.get_box(&z).ok_or("missing box")?;
        for &(lo, hi) in &b.intervals {
            worst = worst.max((lo - LN_2).abs()).max((hi - LN_2).abs());
        }
    }
    ensure(boxes.cells().len() == 3 && worst <= 1e-4, || {
        format!("box error {worst:e}")
    })?;

    let (sys, a) = radial_abstraction()?;
    let (complete, over, under) = levelset::completeness_suite(&sys, &a, 1000, &SLIVER_FREE_GRID, 5).map_err(e2s)?;
    ensure(complete.verdict, || {
        format!(
            "complete false: over {} under {} violations",
            over.violations.len(),
            under.violations.len()
        )
    })?;

    // diag(-1, -2): measured boxes against closed-form transit times.
    let diag = VectorField::linear(DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0])));
    let levels = [0.0625, 0.25, 1.0, 4.0];
    let (_, fam) = radial_levels(levels.to_vec())?;
    let opts = TimingOptions {
        n_trajectories: 2000,
        ..Default::default()
    };
    let dboxes = levelset::build_box_map(&diag, &sys.space, &sys.flow, &fam, &opts, 6).map_err(e2s)?;
    let tol_t = 1e-4;
    let mut r = CounterRng::new(7);
    let mut outside = 0;
    for _ in 0..1000 {
        let k = 1 + r.below(3);
        let (a_lo, a_hi) = (levels[k - 1], levels[k]);
        let th = r.uniform(0.0, 2.0 * PI);
        let (x0, y0) = (a_hi.sqrt() * th.cos(), a_hi.sqrt() * th.sin());
        let g = |t: f64| x0 * x0 * (-2.0 * t).exp() + y0 * y0 * (-4.0 * t).exp() - a_lo;
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if g(m) > 0.0 {
                lo = m
            } else {
                hi = m
            }
        }
        let (b_lo, b_hi) = dboxes.get_box(&[k]).ok_or("missing diag box")?.intervals[0];
        if lo < b_lo - tol_t || lo > b_hi + tol_t {
            outside += 1;
        }
    }
    ensure(outside == 0, || {
        format!("{outside} of 1000 transit times outside their boxes")
    })?;
    Ok(format!(
        "radial box error {worst:.1e}, complete at 1000 points ({} checks), diag boxes bracket 1000 transits",
        complete.checked
    ))
}

// 7. Conservativeness.

/// Oracle: excess volume of Phi = Z for the quadrants under x' = -x, on a midpoint grid.
fn brute_force_quadrant_excess(cover: &OrderedCover, grid: &[f64]) -> Result<f64, String> {
    let m = 200;
    let h = 2.0 / m as f64;
    let pts: Vec<[f64; 2]> = (0..m * m)
        .map(|k| [-1.0 + (k / m) as f64 * h + h / 2.0, -1.0 + (k % m) as f64 * h + h / 2.0])
        .collect();
    let cells: Vec<CellId> = pts
        .iter()
        .map(|p| cover.abstract_point(p))
        .collect::<Result<_, _>>()
        .map_err(e2s)?;
    let mut worst = 0.0f64;
    for &t in grid {
        for z in cover.cells() {
            let reached: CellSet = pts
                .iter()
                .zip(&cells)
                .filter(|(_, &c)| c == z)
                .map(|(p, _)| cover.abstract_point(&[p[0] * (-t).exp(), p[1] * (-t).exp()]))
                .collect::<Result<_, _>>()
                .map_err(e2s)?;
            let excess = cells.iter().filter(|c| !reached.contains(c)).count() as f64 * h * h;
            worst = worst.max(excess);
        }
    }
    Ok(worst)
}

fn criterion_7() -> Verdict {
    let (sys, a) = radial_abstraction()?;
    let cover = a.cover(&sys.space);
    let d = a.discrete_system(SLIVER_FREE_GRID.to_vec());
    let est = conservativeness_volume(
        &sys,
        &d,
        &cover,
        &SLIVER_FREE_GRID,
        10_000,
        8,
        ConservativenessOptions::default(),
    )
    .map_err(e2s)?;
    ensure(est.value <= 3.0 * est.std_error, || {
        format!("radial excess {} > 3 SE {}", est.value, est.std_error)
    })?;

    let (qsys, qcover) = quadrants()?;
    let grid = log_time_grid(5.0, 8);
    let oracle = brute_force_quadrant_excess(&qcover, &grid)?;
    ensure((oracle - 3.0).abs() < 1e-9, || format!("oracle excess {oracle} != 3"))?;
    let exact = DiscreteSystem::new(4, grid.clone(), |_, z| Ok([z].into_iter().collect()));
    let full = inflate(&exact, 1.0, 9).map_err(e2s)?;
    let q = conservativeness_volume(
        &qsys,
        &full,
        &qcover,
        &grid,
        10_000,
        10,
        ConservativenessOptions::default(),
    )
    .map_err(e2s)?;
    let rel = (q.value - oracle).abs() / oracle;
    ensure(rel <= 0.1, || {
        format!("inflated estimate {} vs oracle {oracle}", q.value)
    })?;
    Ok(format!(
        "radial {:.1e} +- {:.1e}, inflated {:.4} vs oracle {oracle:.4} ({:.2}% off)",
        est.value,
        est.std_error,
        q.value,
        100.0 * rel
    ))
}

// 8. Safety.

fn criterion_8() -> Verdict {
    let (sys, a) = radial_abstraction()?;
    let cover = a.cover(&sys.space);
    let grid = SLIVER_FREE_GRID.to_vec();
    let mut d = a.discrete_system(grid.clone());
    ensure(
        matches!(
            verify_safety(&d, &cover, &query(0.2, 1.5), &grid, 1),
            Err(Error::NotOverApproximation)
        ),
        || "untagged system accepted".into(),
    )?;
    // The level abstraction earns its over tag from a passing over check.
    let over = check_over_approximation(&sys, &d, &cover, 1000, &grid, 2).map_err(e2s)?;
    ensure(over.verdict, || "over check failed".into())?;
    d.set_soundness(Soundness::Over);

    let safe = verify_safety(&d, &cover, &query(0.2, 1.5), &grid, 3).map_err(e2s)?;
    ensure(safe == SafetyVerdict::Safe, || format!("inner ball: {safe:?}"))?;
    let overlap = verify_safety(&d, &cover, &query(1.7, 1.5), &grid, 3).map_err(e2s)?;
    ensure(
        matches!(overlap, SafetyVerdict::PossiblyUnsafe { t, .. } if t == 0.0),
        || format!("overlap: {overlap:?}"),
    )?;

    let mut r = CounterRng::new(12);
    let mut flipped = 0;
    for k in 0..20u64 {
        let big = inflate(&d, r.uniform(0.0, 0.5), derive_seed(13, k)).map_err(e2s)?;
        for z in d.states() {
            for &t in &grid {
                let small: CellSet = [z].into_iter().collect();
                ensure(
                    discrete_reach(&d, &small, t)
                        .map_err(e2s)?
                        .is_subset(&discrete_reach(&big, &small, t).map_err(e2s)?),
                    || "inflation shrank a reach set".into(),
                )?;
            }
        }
        let v_safe = verify_safety(&big, &cover, &query(0.2, 1.5), &grid, 3).map_err(e2s)?;
        let v_bad = verify_safety(&big, &cover, &query(1.7, 1.5), &grid, 3).map_err(e2s)?;
        ensure(
            matches!(v_bad, SafetyVerdict::PossiblyUnsafe { t, .. } if t == 0.0),
            || "inflation made overlap safe".into(),
        )?;
        if !v_safe.is_safe() {
            flipped += 1;
        }
    }
    Ok(format!(
        "Safe / PossiblyUnsafe at t = 0; 20 inflations monotone ({flipped} lost safety)"
    ))
}

fn query(init_radius: f64, unsafe_radius: f64) -> SafetyQuery {
    let c = vec![0.0, 0.0];
    let cc = c.clone();
    SafetyQuery {
        init: Region::ball(c, init_radius, Metric::euclidean()),
        unsafe_region: Region::predicate("outside", move |x| dist(&cc, x) >= unsafe_radius),
        horizon: 2.5,
        samples_per_cell: 200,
    }
}

// 9. Reproducibility.

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .map(|rd| {
            rd.flatten()
                .filter(|e| e.path().extension().is_some_and(|x| x == "csv"))
                .map(|e| {
                    (
                        e.file_name().to_string_lossy().into_owned(),
                        fs::read(e.path()).unwrap_or_default(),
                    )
                })
                .collect()
        })
        .unwrap_or_default();
    v.sort();
    v
}

fn criterion_9() -> Verdict {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let names = ["quadrants_cover", "contraction_disks", "circle_morse", "radial_levels"];
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for name in names {
        let path = configs.join(format!("{name}.toml"));
        let mut runs: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
        for (k, parallel) in [true, true, false].into_iter().enumerate() {
            cellflow::par::set_parallel(parallel);
            let out: PathBuf = tmp.path().join(format!("{name}-{k}"));
            for cmd in [Command::Check, Command::Plot] {
                let o = run(
                    cmd,
                    &path,
                    &Options {
                        out: Some(out.clone()),
                        ..Default::default()
                    },
                );
                ensure(o.status == Status::Pass, || {
                    format!("{name} {cmd:?}: {:?} {:?}", o.status, o.error)
                })?;
            }
            runs.push(csv_files(&out));
        }
        cellflow::par::set_parallel(true);
        ensure(!runs[0].is_empty(), || format!("{name}: no CSV written"))?;
        for other in &runs[1..] {
            ensure(other == &runs[0], || format!("{name}: artifacts differ between runs"))?;
        }
        files += runs[0].len();
    }
    Ok(format!(
        "{files} CSV files byte-identical across 3 runs (2 parallel, 1 sequential)"
    ))
}

fn main() {
    type Criterion = (u32, &'static str, Duration, fn() -> Verdict);
    let criteria: [Criterion; 9] = [
        (1, "integrator fidelity", Duration::from_secs(1), criterion_1),
        (2, "min-index abstraction", Duration::from_secs(5), criterion_2),
        (3, "example 1 soundness", Duration::from_secs(60), criterion_3),
        (4, "example 2 contraction", Duration::from_secs(30), criterion_4),
        (5, "example 3 decomposition", Duration::from_secs(30), criterion_5),
        (6, "example 4 exactness", Duration::from_secs(60), criterion_6),
        (7, "conservativeness", Duration::from_secs(60), criterion_7),
        (8, "safety", Duration::from_secs(30), criterion_8),
        (9, "reproducibility", Duration::from_secs(600), criterion_9),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, limit, f) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let verdict = f();
        let took = start.elapsed();
        let verdict = match verdict {
            Ok(msg) if took > limit => Err(format!(
                "{msg}; runtime {:.2} s over the {} s limit",
                took.as_secs_f64(),
                limit.as_secs()
            )),
            v => v,
        };
        match verdict {
            Ok(msg) => println!("criterion {id} ({name}): PASS [{:.2} s] {msg}", took.as_secs_f64()),
            Err(msg) => {
                failed += 1;
                println!("criterion {id} ({name}): FAIL [{:.2} s] {msg}", took.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
