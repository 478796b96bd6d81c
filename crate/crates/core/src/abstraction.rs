//! The combinatorial system `(Z, phi)`, soundness checkers, conservativeness
//! estimation and discrete safety queries.
//!
//! All checkers work on a finite time grid. Seeds for per-point and per-cell
//! work are derived from the root seed with [`rng::derive_seed`] keyed by the
//! point or cell index, so results do not depend on thread scheduling.

use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::dynamics::{self, FlowConfig};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::geometry::{CellId, CellSet, OrderedCover, Region, StateSpace};
use crate::par;
use crate::rng::{self, CounterRng};

/// Vector field, state space and integrator settings bundled together.
#[derive(Debug, Clone)]
pub struct ContinuousSystem {
    pub field: VectorField,
    pub space: StateSpace,
    pub flow: FlowConfig,
}

impl ContinuousSystem {
    pub fn new(field: VectorField, space: StateSpace, flow: FlowConfig) -> Result<Self> {
        if field.dim() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: field.dim(),
            });
        }
        Ok(Self { field, space, flow })
    }

    pub fn flow_point(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        dynamics::flow(&self.field, &self.space, &self.flow, t, x)
    }

    pub fn flow_at_times(&self, x: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
        dynamics::flow_at_times(&self.field, &self.space, &self.flow, x, times)
    }
}

/// What a discrete system is known to be, by construction or by a passed check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Soundness {
    Unknown,
    Over,
    Under,
    Complete,
}

impl Soundness {
    pub fn is_over(self) -> bool {
        matches!(self, Soundness::Over | Soundness::Complete)
    }

    pub fn is_under(self) -> bool {
        matches!(self, Soundness::Under | Soundness::Complete)
    }

    pub fn name(self) -> &'static str {
        match self {
            Soundness::Unknown => "unknown",
            Soundness::Over => "over",
            Soundness::Under => "under",
            Soundness::Complete => "complete",
        }
    }
}

pub type PhiFn = Arc<dyn Fn(f64, CellId) -> Result<CellSet> + Send + Sync>;

/// Finite state set `Z = {0, .., n-1}` with a discrete flow map.
///
/// Values on the time grid are cached; each cache slot is written once.
#[derive(Clone)]
pub struct DiscreteSystem {
    n_states: usize,
    phi: PhiFn,
    time_grid: Vec<f64>,
    cache: Arc<Vec<Vec<OnceLock<CellSet>>>>,
    soundness: Soundness,
}

impl fmt::Debug for DiscreteSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteSystem")
            .field("n_states", &self.n_states)
            .field("time_grid", &self.time_grid)
            .field("soundness", &self.soundness)
            .finish()
    }
}

impl DiscreteSystem {
    pub fn new<F>(n_states: usize, time_grid: Vec<f64>, phi: F) -> Self
    where
        F: Fn(f64, CellId) -> Result<CellSet> + Send + Sync + 'static,
    {
        let cache = (0..time_grid.len())
            .map(|_| (0..n_states).map(|_| OnceLock::new()).collect())
            .collect();
        Self {
            n_states,
            phi: Arc::new(phi),
            time_grid,
            cache: Arc::new(cache),
            soundness: Soundness::Unknown,
        }
    }

    /// System defined only on its grid by an explicit table `table[k][z]`.
    pub fn from_table(time_grid: Vec<f64>, table: Vec<Vec<CellSet>>) -> Result<Self> {
        if table.len() != time_grid.len() {
            return Err(Error::InvalidInput("table rows must match the time grid".into()));
        }
        let n = table.first().map_or(0, Vec::len);
        if table.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidInput("ragged phi table".into()));
        }
        let grid = time_grid.clone();
        let table = Arc::new(table);
        Ok(Self::new(n, time_grid, move |t, z| {
            let k = grid_index(&grid, t)
                .ok_or_else(|| Error::InvalidInput(format!("tabulated phi queried off its grid at t = {t}")))?;
            Ok(table[k][z.0].clone())
        }))
    }

    pub fn with_soundness(mut self, s: Soundness) -> Self {
        self.soundness = s;
        self
    }

    pub fn set_soundness(&mut self, s: Soundness) {
        self.soundness = s;
    }

    pub fn soundness(&self) -> Soundness {
        self.soundness
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn states(&self) -> impl Iterator<Item = CellId> {
        (0..self.n_states).map(CellId)
    }

    pub fn time_grid(&self) -> &[f64] {
        &self.time_grid
    }

    /// `phi(t, z)`, a subset of `Z`.
    pub fn phi(&self, t: f64, z: CellId) -> Result<CellSet> {
        if z.0 >= self.n_states {
            return Err(Error::InvalidInput(format!("cell {z} is not a state")));
        }
        if t < 0.0 {
            return Err(Error::InvalidInput("discrete flow is defined for t >= 0".into()));
        }
        if let Some(k) = grid_index(&self.time_grid, t) {
            if let Some(v) = self.cache[k][z.0].get() {
                return Ok(v.clone());
            }
            let v = self.eval(t, z)?;
            return Ok(self.cache[k][z.0].get_or_init(|| v).clone());
        }
        self.eval(t, z)
    }

    fn eval(&self, t: f64, z: CellId) -> Result<CellSet> {
        let v = (self.phi)(t, z)?;
        if let Some(bad) = v.iter().find(|c| c.0 >= self.n_states) {
            return Err(Error::InvalidInput(format!("phi({t}, {z}) contains non-state {bad}")));
        }
        Ok(v)
    }

    /// Evaluate every `(grid time, cell)` pair, in parallel.
    pub fn tabulate(&self) -> Result<Vec<Vec<CellSet>>> {
        let n = self.n_states;
        let flat = par::try_map_range(self.time_grid.len() * n, |i| {
            self.phi(self.time_grid[i / n], CellId(i % n))
        })?;
        let mut it = flat.into_iter();
        Ok((0..self.time_grid.len())
            .map(|_| it.by_ref().take(n).collect())
            .collect())
    }

    /// Tabulated copy with every entry transformed by `f(grid index, cell, set)`.
    pub fn map_table<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(usize, CellId, CellSet) -> CellSet,
    {
        let table = self
            .tabulate()?
            .into_iter()
            .enumerate()
            .map(|(k, row)| row.into_iter().enumerate().map(|(z, s)| f(k, CellId(z), s)).collect())
            .collect();
        Ok(Self::from_table(self.time_grid.clone(), table)?.with_soundness(Soundness::Unknown))
    }
}

/// Index of `t` in `grid`, allowing relative slack `1e-12`.
pub fn grid_index(grid: &[f64], t: f64) -> Option<usize> {
    grid.iter().position(|&g| (g - t).abs() <= 1e-12 * g.abs().max(1.0))
}

/// `{0} ∪ count` log-spaced times in `[t_max * 1e-3, t_max]`.
pub fn log_time_grid(t_max: f64, count: usize) -> Vec<f64> {
    let mut g = vec![0.0];
    if count == 1 {
        g.push(t_max);
    } else if count > 1 {
        let lo = (t_max * 1e-3).ln();
        let hi = t_max.ln();
        g.extend((0..count).map(|k| (lo + (hi - lo) * k as f64 / (count - 1) as f64).exp()));
        *g.last_mut().expect("nonempty") = t_max;
    }
    g
}

/// `{0, step, 2 step, .., count * step}`.
pub fn uniform_time_grid(step: f64, count: usize) -> Vec<f64> {
    (0..=count).map(|k| k as f64 * step).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproximationKind {
    Over,
    Under,
    Complete,
}

impl ApproximationKind {
    pub fn name(self) -> &'static str {
        match self {
            ApproximationKind::Over => "over",
            ApproximationKind::Under => "under",
            ApproximationKind::Complete => "complete",
        }
    }
}

/// A refuted inclusion.
///
/// For an over-approximation violation `cell` is the cell actually reached
/// from `point`; for an under-approximation violation it is a predicted
/// cell that no sample of `[source]` reached, and `point` is a sample of `[source]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ApproximationKind,
    pub t: f64,
    pub source: CellId,
    pub point: Vec<f64>,
    pub cell: CellId,
    pub predicted: CellSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproximationReport {
    pub kind: ApproximationKind,
    /// Number of `(t, x)` pairs examined.
    pub checked: usize,
    pub violations: Vec<Violation>,
    pub verdict: bool,
}

impl ApproximationReport {
    fn new(kind: ApproximationKind, checked: usize, violations: Vec<Violation>) -> Self {
        let verdict = violations.is_empty();
        Self {
            kind,
            checked,
            violations,
            verdict,
        }
    }

    /// Human wording: under-approximation checks can only refute.
    pub fn outcome(&self) -> &'static str {
        match (self.kind, self.verdict) {
            (ApproximationKind::Over, true) => "holds on all samples",
            (ApproximationKind::Complete, true) => "holds on all samples (under part: not refuted)",
            (ApproximationKind::Under, true) => "not refuted",
            (ApproximationKind::Under, false) => "refuted",
            (_, false) => "violated",
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.windows(2).any(|w| w[1] < w[0]) || grid.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidInput("time grid must be nondecreasing and >= 0".into()));
    }
    Ok(())
}

/// Checks `A(phi(t, x)) ∈ Phi(t, A(x))` on `n_points` quasi-uniform points
/// of the state space and every grid time.
pub fn check_over_approximation(
    sys: &ContinuousSystem,
    d: &DiscreteSystem,
    cover: &OrderedCover,
    n_points: usize,
    time_grid: &[f64],
    seed: u64,
) -> Result<ApproximationReport> {
    if n_points == 0 {
        return Err(Error::InvalidInput("n_points must be >= 1".into()));
    }
    check_grid(time_grid)?;
    let points = sys.space.quasi_uniform(n_points, seed);
    let per_point = par::try_map_slice(&points, |x| -> Result<Vec<Violation>> {
        let z = cover.abstract_point(x)?;
        let images = sys.flow_at_times(x, time_grid)?;
        let mut out = Vec::new();
        for (&t, y) in time_grid.iter().zip(&images) {
            let reached = cover.abstract_point(y)?;
            let predicted = d.phi(t, z)?;
            if !predicted.contains(&reached) {
                out.push(Violation {
                    kind: ApproximationKind::Over,
                    t,
                    source: z,
                    point: x.clone(),
                    cell: reached,
                    predicted,
                });
            }
        }
        Ok(out)
    })?;
    Ok(ApproximationReport::new(
        ApproximationKind::Over,
        n_points * time_grid.len(),
        per_point.into_iter().flatten().collect(),
    ))
}

/// Hit sets `hits[k][z]` and one representative per cell.
type SampledImages = (Vec<Vec<CellSet>>, Vec<Option<Vec<f64>>>);

/// Image cells of `n_points` samples of every cell, per grid time: `hits[k][z]`.
///
/// Cells with an empty preimage get empty hit sets.
fn sampled_images(
    sys: &ContinuousSystem,
    cover: &OrderedCover,
    n_points: usize,
    time_grid: &[f64],
    seed: u64,
    bloat: f64,
) -> Result<SampledImages> {
    let per_cell = par::try_map_range(cover.len(), |zi| -> Result<(Vec<CellSet>, Option<Vec<f64>>)> {
        let z = CellId(zi);
        let samples = match cover.sample_preimage(z, n_points, rng::derive_seed(seed, zi as u64)) {
            Ok(s) => s,
            Err(Error::EmptyRegion { .. }) => return Ok((vec![CellSet::new(); time_grid.len()], None)),
            Err(e) => return Err(e),
        };
        let mut hits = vec![CellSet::new(); time_grid.len()];
        for x in &samples {
            for (k, y) in sys.flow_at_times(x, time_grid)?.iter().enumerate() {
                hits[k].insert(cover.abstract_point(y)?);
                if bloat > 0.0 {
                    for d in 0..y.len() {
                        for s in [-bloat, bloat] {
                            let mut q = y.clone();
                            q[d] += s;
                            let q = sys.space.clamp(&q);
                            hits[k].insert(cover.abstract_point(&q)?);
                        }
                    }
                }
            }
        }
        Ok((hits, samples.into_iter().next()))
    })?;
    let mut hits = vec![Vec::with_capacity(cover.len()); time_grid.len()];
    let mut reps = Vec::with_capacity(cover.len());
    for (cell_hits, rep) in per_cell {
        for (k, h) in cell_hits.into_iter().enumerate() {
            hits[k].push(h);
        }
        reps.push(rep);
    }
    Ok((hits, reps))
}

/// Every `z' ∈ Phi(t, z)` must be reached by some sampled `x ∈ [z]`.
/// Sampling can only refute this inclusion.
pub fn check_under_approximation(
    sys: &ContinuousSystem,
    d: &DiscreteSystem,
    cover: &OrderedCover,
    n_points: usize,
    time_grid: &[f64],
    seed: u64,
) -> Result<ApproximationReport> {
    if n_points == 0 {
        return Err(Error::InvalidInput("n_points must be >= 1".into()));
    }
    check_grid(time_grid)?;
    let (hits, reps) = sampled_images(sys, cover, n_points, time_grid, seed, 0.0)?;
    let mut violations = Vec::new();
    for (k, &t) in time_grid.iter().enumerate() {
        for z in d.states() {
            let Some(rep) = &reps[z.0] else { continue };
            let predicted = d.phi(t, z)?;
            for &c in predicted.difference(&hits[k][z.0]) {
                violations.push(Violation {
                    kind: ApproximationKind::Under,
                    t,
                    source: z,
                    point: rep.clone(),
                    cell: c,
                    predicted: predicted.clone(),
                });
            }
        }
    }
    let checked = n_points * time_grid.len() * reps.iter().filter(|r| r.is_some()).count();
    Ok(ApproximationReport::new(ApproximationKind::Under, checked, violations))
}

/// Both checks on identical seeds; the verdict is their conjunction.
pub fn check_complete(
    sys: &ContinuousSystem,
    d: &DiscreteSystem,
    cover: &OrderedCover,
    n_points: usize,
    time_grid: &[f64],
    seed: u64,
) -> Result<(ApproximationReport, ApproximationReport, ApproximationReport)> {
    let over = check_over_approximation(sys, d, cover, n_points, time_grid, seed)?;
    let under = check_under_approximation(sys, d, cover, n_points, time_grid, seed)?;
    let mut violations = over.violations.clone();
    violations.extend(under.violations.iter().cloned());
    let complete = ApproximationReport::new(ApproximationKind::Complete, over.checked + under.checked, violations);
    Ok((complete, over, under))
}

/// Per-cell excess volume at one grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct CellVolume {
    pub t: f64,
    pub cell: CellId,
    pub volume: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConservativenessEstimate {
    /// `max_t max_z vol(Phi(t,z) \ A(phi(t,[z])))`.
    pub value: f64,
    /// Standard error of the maximizing entry.
    pub std_error: f64,
    pub argmax: Option<(f64, CellId)>,
    pub per_cell: Vec<CellVolume>,
    pub mc_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservativenessOptions {
    /// Preimage samples forward-mapped per cell to approximate `A(phi(t,[z]))`.
    pub preimage_samples: usize,
    /// Axis offsets added around each image point before abstraction.
    pub bloat: f64,
}

impl Default for ConservativenessOptions {
    fn default() -> Self {
        Self {
            preimage_samples: 1000,
            bloat: 0.0,
        }
    }
}

/// Monte Carlo estimate of the conservativeness volume.
///
/// Uniform points of the state space whose cell lies in `Phi(t, z)` but was
/// not reached by any forward-mapped sample of `[z]` count toward the excess.
pub fn conservativeness_volume(
    sys: &ContinuousSystem,
    d: &DiscreteSystem,
    cover: &OrderedCover,
    time_grid: &[f64],
    mc_samples: usize,
    seed: u64,
    opts: ConservativenessOptions,
) -> Result<ConservativenessEstimate> {
    if mc_samples < 100 {
        return Err(Error::InvalidInput("mc_samples must be >= 100".into()));
    }
    check_grid(time_grid)?;
    let (hits, _) = sampled_images(
        sys,
        cover,
        opts.preimage_samples,
        time_grid,
        rng::derive_seed(seed, 1),
        opts.bloat,
    )?;
    let mc = sys.space.sample_uniform(mc_samples, rng::derive_seed(seed, 2));
    let mc_cells = par::try_map_slice(&mc, |p| cover.abstract_point(p))?;
    let vol = sys.space.volume();
    let n = mc_samples as f64;
    let mut per_cell = Vec::with_capacity(time_grid.len() * d.n_states());
    for (k, &t) in time_grid.iter().enumerate() {
        for z in d.states() {
            let predicted = d.phi(t, z)?;
            let excess: CellSet = predicted.difference(&hits[k][z.0]).copied().collect();
            let count = if excess.is_empty() {
                0
            } else {
                mc_cells.iter().filter(|c| excess.contains(c)).count()
            };
            let p = count as f64 / n;
            per_cell.push(CellVolume {
                t,
                cell: z,
                volume: p * vol,
                std_error: vol * (p * (1.0 - p) / n).sqrt(),
            });
        }
    }
    let best = per_cell.iter().fold(None::<&CellVolume>, |b, c| match b {
        Some(b) if b.volume >= c.volume => Some(b),
        _ => Some(c),
    });
    Ok(ConservativenessEstimate {
        value: best.map_or(0.0, |b| b.volume),
        std_error: best.map_or(0.0, |b| b.std_error),
        argmax: best.map(|b| (b.t, b.cell)),
        per_cell,
        mc_samples,
    })
}

/// `⋃_{z ∈ init} Phi(t, z)`.
pub fn discrete_reach(d: &DiscreteSystem, init: &CellSet, t: f64) -> Result<CellSet> {
    let mut out = CellSet::new();
    for &z in init {
        out.extend(d.phi(t, z)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SafetyVerdict {
    Safe,
    PossiblyUnsafe { t: f64, cells: CellSet },
}

impl SafetyVerdict {
    pub fn is_safe(&self) -> bool {
        matches!(self, SafetyVerdict::Safe)
    }
}

/// Cells meeting `region`: cells with a region sample inside it, plus the
/// cells of samples drawn from the region itself.
pub fn cells_meeting(cover: &OrderedCover, region: &Region, samples: usize, seed: u64) -> Result<CellSet> {
    let space = cover.space();
    let from_cells = par::try_map_range(cover.len(), |zi| -> Result<bool> {
        match cover.sample_cell(CellId(zi), samples, rng::derive_seed(seed, zi as u64)) {
            Ok(pts) => Ok(pts.iter().any(|p| region.contains(p))),
            Err(Error::EmptyRegion { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    })?;
    let mut out: CellSet = from_cells
        .iter()
        .enumerate()
        .filter(|(_, &hit)| hit)
        .map(|(i, _)| CellId(i))
        .collect();
    match region.sample(space, samples, rng::derive_seed(seed, u64::MAX), usize::MAX) {
        Ok(pts) => {
            for p in pts {
                out.insert(cover.abstract_point(&p)?);
            }
        }
        Err(Error::EmptyRegion { .. }) => {}
        Err(e) => return Err(e),
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SafetyQuery {
    pub init: Region,
    pub unsafe_region: Region,
    pub horizon: f64,
    pub samples_per_cell: usize,
}

/// Safe iff no grid time `t <= horizon` lets the discrete reach set of the
/// initial cells meet the unsafe cells.
pub fn verify_safety(
    d: &DiscreteSystem,
    cover: &OrderedCover,
    query: &SafetyQuery,
    time_grid: &[f64],
    seed: u64,
) -> Result<SafetyVerdict> {
    if !d.soundness().is_over() {
        return Err(Error::NotOverApproximation);
    }
    let init = cells_meeting(cover, &query.init, query.samples_per_cell, rng::derive_seed(seed, 11))?;
    let bad = cells_meeting(
        cover,
        &query.unsafe_region,
        query.samples_per_cell,
        rng::derive_seed(seed, 13),
    )?;
    let mut times: Vec<f64> = time_grid.iter().copied().filter(|&t| t <= query.horizon).collect();
    if times.first() != Some(&0.0) {
        times.insert(0, 0.0);
    }
    for t in times {
        let reach = discrete_reach(d, &init, t)?;
        let hit: CellSet = reach.intersection(&bad).copied().collect();
        if !hit.is_empty() {
            return Ok(SafetyVerdict::PossiblyUnsafe { t, cells: hit });
        }
    }
    Ok(SafetyVerdict::Safe)
}

/// Uniformly random superset of every entry: each absent cell is added with probability `p`.
pub fn inflate(d: &DiscreteSystem, p: f64, seed: u64) -> Result<DiscreteSystem> {
    let n = d.n_states();
    let out = d.map_table(|k, z, mut s| {
        let mut r = CounterRng::new(rng::derive_seed2(seed, k as u64, z.0 as u64));
        for c in 0..n {
            if r.next_f64() < p {
                s.insert(CellId(c));
            }
        }
        s
    })?;
    Ok(out.with_soundness(d.soundness()))
}
