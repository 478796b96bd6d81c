//! Timed abstraction on slabs cut out by descent functions.
//!
//! Functions `V_1 .. V_l` that do not increase along the flow, each with an
//! increasing list of levels, split the state space into slab cells indexed
//! by `z = (z_1, .., z_l)`, where cell `z` is `a_i(z_i - 1) <= V_i <= a_i(z_i)`.
//! Every cell carries a timing box: per function, the least and greatest time
//! a trajectory needs to cross the slab from its upper level to its lower one.
//! The discrete flow follows chains of cells shifted one level at a time.

use std::collections::BTreeMap;

use crate::abstraction::{check_complete, ApproximationReport, ContinuousSystem, DiscreteSystem, Soundness};
use crate::dynamics::{self, FlowConfig};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::geometry::{CellId, CellSet, OrderedCover, Region, SlabCell, SpaceKind, StateSpace};
use crate::linalg;
use crate::morse::{ElementKind, SingularElement};
use crate::par;
use crate::rng;

/// Relative tolerance of the projection onto a level set.
pub const PROJECTION_TOL: f64 = 1e-10;
/// Default slack on chain-time comparisons in [`PhiMode::Bounds`].
pub const DEFAULT_CHAIN_TOL: f64 = 1e-6;

/// One function with its levels; `-inf` and `+inf` are allowed at the ends.
#[derive(Debug, Clone)]
pub struct LevelFunction {
    pub v: ScalarField,
    pub levels: Vec<f64>,
}

impl LevelFunction {
    pub fn new(v: ScalarField, levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "{}: at least two levels required",
                v.name()
            )));
        }
        if levels.iter().any(|a| a.is_nan()) || levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "{}: levels must be strictly increasing",
                v.name()
            )));
        }
        Ok(Self { v, levels })
    }

    /// Number of slabs; valid indices are `1..=n_slabs()`.
    pub fn n_slabs(&self) -> usize {
        self.levels.len() - 1
    }

    /// `(a(k - 1), a(k))`.
    pub fn slab(&self, k: usize) -> (f64, f64) {
        (self.levels[k - 1], self.levels[k])
    }

    /// Slab index holding value `v`; shared levels go to the lower slab.
    pub fn index_of(&self, v: f64) -> Option<usize> {
        (1..=self.n_slabs()).find(|&k| {
            let (lo, hi) = self.slab(k);
            v >= lo && v <= hi
        })
    }
}

#[derive(Debug, Clone)]
pub struct LevelFamily {
    functions: Vec<LevelFunction>,
}

impl LevelFamily {
    pub fn new(functions: Vec<LevelFunction>) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::InvalidInput("level family needs at least one function".into()));
        }
        Ok(Self { functions })
    }

    pub fn functions(&self) -> &[LevelFunction] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Every index vector, lexicographically (last coordinate fastest).
    pub fn index_vectors(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new()];
        for f in &self.functions {
            out = out
                .into_iter()
                .flat_map(|z| {
                    (1..=f.n_slabs()).map(move |k| {
                        let mut w = z.clone();
                        w.push(k);
                        w
                    })
                })
                .collect();
        }
        out
    }

    pub fn is_valid(&self, z: &[usize]) -> bool {
        z.len() == self.len() && z.iter().zip(&self.functions).all(|(&k, f)| k >= 1 && k <= f.n_slabs())
    }

    pub fn ranges(&self, z: &[usize]) -> Vec<(f64, f64)> {
        z.iter().zip(&self.functions).map(|(&k, f)| f.slab(k)).collect()
    }

    pub fn slab_cell(&self, z: &[usize]) -> SlabCell {
        SlabCell {
            functions: self.functions.iter().map(|f| f.v.clone()).collect(),
            ranges: self.ranges(z),
            index: z.to_vec(),
        }
    }

    pub fn contains(&self, z: &[usize], x: &[f64]) -> bool {
        self.functions
            .iter()
            .zip(z)
            .all(|(f, &k)| in_range(f.v.eval(x), f.slab(k)))
    }

    /// Index vector of the cell holding `x`, lower slabs winning on shared levels.
    pub fn index_of(&self, x: &[f64]) -> Option<Vec<usize>> {
        self.functions.iter().map(|f| f.index_of(f.v.eval(x))).collect()
    }

    /// All constraints of cell `z` except the one on function `skip`.
    fn contains_except(&self, z: &[usize], skip: usize, x: &[f64]) -> bool {
        self.functions
            .iter()
            .zip(z)
            .enumerate()
            .all(|(i, (f, &k))| i == skip || in_range(f.v.eval(x), f.slab(k)))
    }
}

fn in_range(v: f64, (lo, hi): (f64, f64)) -> bool {
    v >= lo && v <= hi
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentReport {
    pub holds: bool,
    pub checked: usize,
    /// Largest `dV_i(xi)(x)` over the samples.
    pub worst_value: f64,
    pub worst_point: Option<Vec<f64>>,
    pub worst_function: usize,
}

/// `grad V_i(x) . xi(x) <= tol` on quasi-uniform samples.
pub fn check_descent(
    field: &VectorField,
    space: &StateSpace,
    family: &LevelFamily,
    n_samples: usize,
    tol: f64,
    seed: u64,
) -> DescentReport {
    let pts = space.quasi_uniform(n_samples, seed);
    let vals = par::map_slice(&pts, |x| {
        let xi = field.eval(x);
        family
            .functions()
            .iter()
            .enumerate()
            .map(|(i, f)| (linalg::dot(&f.v.gradient(x), &xi), i))
            .fold((f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 { b } else { a })
    });
    let worst = vals.iter().enumerate().max_by(|a, b| a.1 .0.total_cmp(&b.1 .0));
    let worst_value = worst.map_or(f64::NEG_INFINITY, |w| w.1 .0);
    DescentReport {
        holds: worst_value <= tol,
        checked: n_samples,
        worst_value,
        worst_point: worst.map(|w| pts[w.0].clone()),
        worst_function: worst.map_or(0, |w| w.1 .1),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub holds: bool,
    /// Smallest `|grad V_i|` seen on each finite level set, `None` when no point was found.
    pub min_gradient: Vec<Vec<Option<f64>>>,
}

/// `|grad V_i| >= eps` on projected points of every finite level.
pub fn check_regular_levels(
    space: &StateSpace,
    family: &LevelFamily,
    eps: f64,
    n_samples: usize,
    seed: u64,
) -> RegularityReport {
    let mut holds = true;
    let mut min_gradient = Vec::new();
    for (i, f) in family.functions().iter().enumerate() {
        let mut per_level = Vec::new();
        for (k, &a) in f.levels.iter().enumerate() {
            if !a.is_finite() {
                per_level.push(None);
                continue;
            }
            let pts = space.sample_uniform(n_samples, rng::derive_seed2(seed, i as u64, k as u64));
            let m = pts
                .iter()
                .filter_map(|x| project_to_level(&f.v, x, a))
                .filter(|y| space.contains(y))
                .map(|y| linalg::norm(&f.v.gradient(&y)))
                .fold(None, |acc: Option<f64>, g| Some(acc.map_or(g, |m| m.min(g))));
            if m.is_some_and(|g| g < eps) {
                holds = false;
            }
            per_level.push(m);
        }
        min_gradient.push(per_level);
    }
    RegularityReport { holds, min_gradient }
}

/// Newton steps along the gradient onto `V = a`, to `PROJECTION_TOL * max(1, |a|)`.
pub fn project_to_level(v: &ScalarField, x: &[f64], a: f64) -> Option<Vec<f64>> {
    let tol = PROJECTION_TOL * a.abs().max(1.0);
    let mut y = x.to_vec();
    for _ in 0..100 {
        let r = v.eval(&y) - a;
        if r.abs() <= tol {
            return Some(y);
        }
        let g = v.gradient(&y);
        let g2 = linalg::dot(&g, &g);
        if g2.is_nan() || g2 <= 1e-300 || !r.is_finite() {
            return None;
        }
        for (c, gi) in y.iter_mut().zip(&g) {
            *c -= r * gi / g2;
        }
    }
    None
}

/// Per-function transit-time interval `[lower, upper]`; `+inf` when no crossing happens.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingBox {
    pub intervals: Vec<(f64, f64)>,
}

impl TimingBox {
    pub fn widths(&self) -> Vec<f64> {
        apply_l(std::slice::from_ref(self))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoxEntry {
    Box(TimingBox),
    Empty,
}

impl BoxEntry {
    pub fn as_box(&self) -> Option<&TimingBox> {
        match self {
            BoxEntry::Box(b) => Some(b),
            BoxEntry::Empty => None,
        }
    }
}

/// Timing box of every index vector, in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxMap {
    entries: BTreeMap<Vec<usize>, BoxEntry>,
}

impl BoxMap {
    pub fn from_entries(entries: impl IntoIterator<Item = (Vec<usize>, BoxEntry)>) -> Self {
        Self {
            entries: entries.into_iter().collect(),
        }
    }

    pub fn get(&self, z: &[usize]) -> Option<&BoxEntry> {
        self.entries.get(z)
    }

    pub fn get_box(&self, z: &[usize]) -> Option<&TimingBox> {
        self.get(z).and_then(BoxEntry::as_box)
    }

    pub fn set(&mut self, z: Vec<usize>, entry: BoxEntry) {
        self.entries.insert(z, entry);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<usize>, &BoxEntry)> {
        self.entries.iter()
    }

    /// Nonempty cells in lexicographic order.
    pub fn cells(&self) -> Vec<Vec<usize>> {
        self.entries
            .iter()
            .filter(|(_, e)| matches!(e, BoxEntry::Box(_)))
            .map(|(z, _)| z.clone())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingOptions {
    pub n_trajectories: usize,
    /// Probes used to decide whether a cell is empty.
    pub emptiness_probes: usize,
}

impl Default for TimingOptions {
    fn default() -> Self {
        Self {
            n_trajectories: 200,
            emptiness_probes: 20_000,
        }
    }
}

/// Up to `n` points of `V = a` inside the space that satisfy `keep`.
fn level_points(
    space: &StateSpace,
    v: &ScalarField,
    a: f64,
    n: usize,
    seed: u64,
    keep: &dyn Fn(&[f64]) -> bool,
) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    for round in 0..50u64 {
        for x in space.sample_uniform(n, rng::derive_seed(seed, round)) {
            if let Some(mut y) = project_to_level(v, &x, a) {
                space.canonicalize(&mut y);
                if space.contains(&y) && keep(&y) {
                    out.push(y);
                    if out.len() == n {
                        return out;
                    }
                }
            }
        }
    }
    out
}

/// Up to `n` points of the space satisfying `keep`, plus the box corners that do.
fn interior_points(space: &StateSpace, n: usize, seed: u64, keep: &dyn Fn(&[f64]) -> bool) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    if space.kind() == SpaceKind::Box {
        let corners = Region::rect(space.bounds().to_vec()).corners().unwrap_or_default();
        out.extend(corners.into_iter().filter(|c| keep(c)));
    }
    for round in 0..50u64 {
        for x in space.sample_uniform(n, rng::derive_seed(seed, round)) {
            if keep(&x) {
                out.push(x);
                if out.len() >= n {
                    return out;
                }
            }
        }
    }
    out
}

/// Least and greatest first-crossing time of `V = a_lower` over `starts`.
fn crossing_interval(
    field: &VectorField,
    space: &StateSpace,
    cfg: &FlowConfig,
    v: &ScalarField,
    a_lower: f64,
    starts: &[Vec<f64>],
) -> Result<(f64, f64)> {
    if a_lower == f64::NEG_INFINITY {
        return Ok((f64::INFINITY, f64::INFINITY));
    }
    let g = |y: &[f64]| v.eval(y);
    let times = par::try_map_slice(starts, |x| {
        dynamics::first_crossing_time(field, space, cfg, x, &g, a_lower, cfg.t_max)
    })?;
    let lo = times.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let hi = if times.iter().any(Option::is_none) {
        f64::INFINITY
    } else {
        times.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    };
    Ok((lo, hi))
}

/// Transit-time interval through `V^{-1}([a_lower, a_upper])`.
///
/// Starts are projected onto `V = a_upper` and flowed until they first reach
/// `a_lower`. Trajectories that never get there within `cfg.t_max` make the
/// upper end `+inf`; the lower end is `+inf` when none does.
#[allow(clippy::too_many_arguments)]
pub fn compute_timing_interval(
    field: &VectorField,
    space: &StateSpace,
    cfg: &FlowConfig,
    v: &ScalarField,
    a_upper: f64,
    a_lower: f64,
    n_trajectories: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if a_lower.is_nan() || a_upper.is_nan() || a_lower >= a_upper {
        return Err(Error::InvalidInput("timing interval needs a_lower < a_upper".into()));
    }
    let starts = if a_upper.is_finite() {
        level_points(space, v, a_upper, n_trajectories, seed, &|_| true)
    } else {
        interior_points(space, n_trajectories, seed, &|x| v.eval(x) >= a_lower)
    };
    if starts.is_empty() {
        return Err(Error::LevelSetEmpty { level: a_upper });
    }
    crossing_interval(field, space, cfg, v, a_lower, &starts)
}

/// Timing boxes of all cells.
///
/// For function `i` of cell `z`, starts lie on the upper face `V_i = a_i(z_i)`
/// within the other constraints of the cell. When that face is infinite or
/// empty, points of the cell itself are used. Cells without any sampled point
/// are marked empty.
pub fn build_box_map(
    field: &VectorField,
    space: &StateSpace,
    cfg: &FlowConfig,
    family: &LevelFamily,
    opts: &TimingOptions,
    seed: u64,
) -> Result<BoxMap> {
    let cells = family.index_vectors();
    let probes = space.quasi_uniform(opts.emptiness_probes, rng::derive_seed(seed, u64::MAX));
    let occupied: Vec<bool> = par::map_slice(&cells, |z| probes.iter().any(|x| family.contains(z, x)));
    let l = family.len();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .filter(|&c| occupied[c])
        .flat_map(|c| (0..l).map(move |i| (c, i)))
        .collect();
    let intervals = par::try_map_slice(&jobs, |&(c, i)| -> Result<(f64, f64)> {
        let z = &cells[c];
        let f = &family.functions()[i];
        let (a_lower, a_upper) = f.slab(z[i]);
        let s = rng::derive_seed2(seed, c as u64, i as u64);
        let mut starts = Vec::new();
        if a_upper.is_finite() {
            starts = level_points(space, &f.v, a_upper, opts.n_trajectories, s, &|x| {
                family.contains_except(z, i, x)
            });
        }
        if starts.is_empty() {
            starts = interior_points(space, opts.n_trajectories, s, &|x| family.contains(z, x));
        }
        if starts.is_empty() {
            return Err(Error::LevelSetEmpty { level: a_upper });
        }
        crossing_interval(field, space, cfg, &f.v, a_lower, &starts)
    })?;
    let mut per_cell: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for (&(c, _), iv) in jobs.iter().zip(intervals) {
        per_cell.entry(c).or_default().push(iv);
    }
    Ok(BoxMap::from_entries(cells.into_iter().enumerate().map(|(c, z)| {
        let entry = match per_cell.remove(&c) {
            Some(intervals) => BoxEntry::Box(TimingBox { intervals }),
            None => BoxEntry::Empty,
        };
        (z, entry)
    })))
}

/// Widths of the Minkowski sum of `boxes`, per coordinate; `+inf` is absorbing.
pub fn apply_l(boxes: &[TimingBox]) -> Vec<f64> {
    let l = boxes.first().map_or(0, |b| b.intervals.len());
    (0..l)
        .map(|i| {
            let (lo, hi) = boxes
                .iter()
                .fold((0.0, 0.0), |(lo, hi), b| (lo + b.intervals[i].0, hi + b.intervals[i].1));
            if hi == f64::INFINITY {
                f64::INFINITY
            } else {
                hi - lo
            }
        })
        .collect()
}

/// How chains of timing boxes are turned into the discrete flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhiMode {
    /// The width condition taken literally: the end of the longest ascending
    /// chain whose summed box widths stay within `t`.
    #[default]
    Verbatim,
    /// Every cell a point can occupy at time `t`, from the summed interval
    /// bounds of the chain descending along the flow.
    Bounds,
}

impl PhiMode {
    pub fn name(self) -> &'static str {
        match self {
            PhiMode::Verbatim => "verbatim",
            PhiMode::Bounds => "bounds",
        }
    }
}

fn shifted(z: &[usize], up: bool) -> Option<Vec<usize>> {
    z.iter()
        .map(|&k| {
            if up {
                Some(k + 1)
            } else {
                k.checked_sub(1).filter(|&k| k >= 1)
            }
        })
        .collect()
}

/// Longest chain `z = z^0, .., z^m` with `z^{i-1} = sigma z^i` and
/// `L(box(z^0) + .. + box(z^m)) <= (t, .., t)`; returns `z^m`.
pub fn phi_chain_verbatim(boxes: &BoxMap, family: &LevelFamily, t: f64, z: &[usize]) -> Result<Vec<usize>> {
    let mut chain: Vec<TimingBox> = Vec::new();
    let mut best = None;
    let mut cur = Some(z.to_vec());
    while let Some(c) = cur.filter(|c| family.is_valid(c)) {
        let Some(b) = boxes.get_box(&c) else { break };
        chain.push(b.clone());
        if apply_l(&chain).iter().all(|&w| w <= t) {
            best = Some(c.clone());
        }
        cur = shifted(&c, true);
    }
    best.ok_or_else(|| Error::NoAdmissibleChain { cell: z.to_vec(), t })
}

/// Cells `z^m = z - m (1, .., 1)` a point of `[z]` can occupy at time `t`.
///
/// With exit time `tau` from `[z]` in `[0, upper_z]` and full transits of the
/// following cells bounded by their boxes, `z^m` is reachable iff
/// `sum_{0<i<m} lower_i < t < sum_{0<=i<=m} upper_i` per coordinate (slack `tol`).
pub fn phi_chain_bounds(boxes: &BoxMap, family: &LevelFamily, t: f64, z: &[usize], tol: f64) -> Vec<Vec<usize>> {
    let l = z.len();
    let mut out = Vec::new();
    let mut lower = vec![0.0; l];
    let mut upper = vec![0.0; l];
    let mut prev: Option<&TimingBox> = None;
    let mut cur = Some(z.to_vec());
    let mut m = 0usize;
    while let Some(c) = cur.filter(|c| family.is_valid(c)) {
        let Some(b) = boxes.get_box(&c) else { break };
        if m >= 2 {
            let p = prev.expect("chain has a previous box");
            for (lo, iv) in lower.iter_mut().zip(&p.intervals) {
                *lo += iv.0;
            }
        }
        for (hi, iv) in upper.iter_mut().zip(&b.intervals) {
            *hi += iv.1;
        }
        let entered = m == 0 || lower.iter().all(|&s| s < t - tol);
        if !entered {
            break;
        }
        if upper.iter().all(|&s| t < s - tol) {
            out.push(c.clone());
        }
        prev = Some(b);
        cur = shifted(&c, false);
        m += 1;
    }
    out
}

/// Discrete image of cell `z` at time `t` as index vectors.
///
/// In verbatim mode a chain that is inadmissible already at `m = 0` yields
/// `{z}` with a warning.
pub fn compute_phi_ex4(
    boxes: &BoxMap,
    family: &LevelFamily,
    t: f64,
    z: &[usize],
    mode: PhiMode,
    tol: f64,
) -> Result<Vec<Vec<usize>>> {
    if !family.is_valid(z) || boxes.get_box(z).is_none() {
        return Err(Error::InvalidInput(format!("{z:?} is not a nonempty cell")));
    }
    match mode {
        PhiMode::Verbatim => match phi_chain_verbatim(boxes, family, t, z) {
            Ok(end) => Ok(vec![end]),
            Err(Error::NoAdmissibleChain { .. }) => {
                log::warn!("no admissible chain from {z:?} at t = {t}; using the cell itself");
                Ok(vec![z.to_vec()])
            }
            Err(e) => Err(e),
        },
        PhiMode::Bounds => Ok(phi_chain_bounds(boxes, family, t, z, tol)),
    }
}

/// Slab cells as an ordered cover plus the discrete flow over them.
#[derive(Debug, Clone)]
pub struct LevelAbstraction {
    pub family: LevelFamily,
    pub boxes: BoxMap,
    pub mode: PhiMode,
    pub chain_tol: f64,
    cells: Vec<Vec<usize>>,
    ids: BTreeMap<Vec<usize>, CellId>,
}

impl LevelAbstraction {
    pub fn new(family: LevelFamily, boxes: BoxMap, mode: PhiMode, chain_tol: f64) -> Self {
        let cells = boxes.cells();
        let ids = cells.iter().enumerate().map(|(k, z)| (z.clone(), CellId(k))).collect();
        Self {
            family,
            boxes,
            mode,
            chain_tol,
            cells,
            ids,
        }
    }

    /// Nonempty index vectors; position is the cell id.
    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn id_of(&self, z: &[usize]) -> Option<CellId> {
        self.ids.get(z).copied()
    }

    pub fn cover(&self, space: &StateSpace) -> OrderedCover {
        let regions = self
            .cells
            .iter()
            .map(|z| Region::Slab(self.family.slab_cell(z)))
            .collect();
        OrderedCover::new_unchecked(space.clone(), regions)
    }

    pub fn phi(&self, t: f64, z: CellId) -> Result<CellSet> {
        let idx = &self.cells[z.0];
        Ok(
            compute_phi_ex4(&self.boxes, &self.family, t, idx, self.mode, self.chain_tol)?
                .iter()
                .filter_map(|w| self.id_of(w))
                .collect(),
        )
    }

    pub fn discrete_system(&self, time_grid: Vec<f64>) -> DiscreteSystem {
        let me = self.clone();
        DiscreteSystem::new(self.cells.len(), time_grid, move |t, z| me.phi(t, z)).with_soundness(Soundness::Unknown)
    }
}

/// Complete, over and under reports for the abstraction on its own slab cover.
pub fn completeness_suite(
    sys: &ContinuousSystem,
    abstraction: &LevelAbstraction,
    n_points: usize,
    time_grid: &[f64],
    seed: u64,
) -> Result<(ApproximationReport, ApproximationReport, ApproximationReport)> {
    let cover = abstraction.cover(&sys.space);
    let d = abstraction.discrete_system(time_grid.to_vec());
    check_complete(sys, &d, &cover, n_points, time_grid, seed)
}

/// Each declared equilibrium's value must not lie strictly between two finite levels.
pub fn check_levels_against_elements(family: &LevelFamily, elements: &[SingularElement]) -> Result<()> {
    for e in elements {
        let ElementKind::Equilibrium(p) = &e.kind else { continue };
        for f in family.functions() {
            let v = f.v.eval(p);
            let inside = (1..=f.n_slabs()).any(|k| {
                let (lo, hi) = f.slab(k);
                lo.is_finite() && hi.is_finite() && v > lo && v < hi
            });
            if inside {
                return Err(Error::InvalidInput(format!(
                    "equilibrium {} has {} = {v} strictly inside a slab",
                    e.label,
                    f.v.name()
                )));
            }
        }
    }
    Ok(())
}
