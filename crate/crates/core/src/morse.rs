//! Morse-Smale decomposition into connection cells.
//!
//! Given the singular elements (equilibria and closed orbits) of a
//! Morse-Smale field, every point is classified by the pair
//! `(alpha-limit, omega-limit)`. The sets `W(b_i, b_j)` of points sharing a
//! pair are flow invariant, so the discrete flow is the identity on them.

use std::collections::{BTreeMap, BTreeSet};

use crate::abstraction::{DiscreteSystem, Soundness};
use crate::dynamics::{self, FlowConfig};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::geometry::{CellId, Metric, OrderedCover, Region, StateSpace};
use crate::par;

/// Samples taken along a closed orbit to form its capture tube.
pub const ORBIT_TUBE_POINTS: usize = 64;
/// Dwell time inside an equilibrium's capture ball.
pub const DEFAULT_DWELL: f64 = 10.0;
/// Distance at which a query point counts as sitting on an equilibrium.
const ON_ELEMENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum ElementKind {
    Equilibrium(Vec<f64>),
    PeriodicOrbit { seed: Vec<f64>, period: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    Attracting,
    Repelling,
    Saddle,
}

impl Stability {
    pub fn name(self) -> &'static str {
        match self {
            Stability::Attracting => "attracting",
            Stability::Repelling => "repelling",
            Stability::Saddle => "saddle",
        }
    }
}

/// A declared equilibrium or closed orbit. Hyperbolicity is assumed, not checked.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularElement {
    pub label: String,
    pub kind: ElementKind,
    pub stability: Stability,
    /// `None` uses 5% of the state-space diameter.
    pub capture_radius: Option<f64>,
}

impl SingularElement {
    pub fn equilibrium(label: impl Into<String>, point: Vec<f64>, stability: Stability) -> Self {
        Self {
            label: label.into(),
            kind: ElementKind::Equilibrium(point),
            stability,
            capture_radius: None,
        }
    }

    pub fn periodic(label: impl Into<String>, seed: Vec<f64>, period: f64, stability: Stability) -> Self {
        Self {
            label: label.into(),
            kind: ElementKind::PeriodicOrbit { seed, period },
            stability,
            capture_radius: None,
        }
    }

    pub fn with_capture_radius(mut self, r: f64) -> Self {
        self.capture_radius = Some(r);
        self
    }

    /// The equilibrium, or the orbit seed.
    pub fn anchor(&self) -> &[f64] {
        match &self.kind {
            ElementKind::Equilibrium(p) => p,
            ElementKind::PeriodicOrbit { seed, .. } => seed,
        }
    }
}

/// Checks `|xi(p)| <= tol_eq` for equilibria and `|flow(T, s) - s| <= tol_orbit` for orbits.
pub fn validate_elements(
    field: &VectorField,
    space: &StateSpace,
    cfg: &FlowConfig,
    elements: &[SingularElement],
    tol_eq: f64,
    tol_orbit: f64,
) -> Result<()> {
    if elements.is_empty() {
        return Err(Error::InvalidInput("no singular elements declared".into()));
    }
    let metric = Metric::euclidean().on(space);
    for e in elements {
        if e.anchor().len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: e.anchor().len(),
            });
        }
        match &e.kind {
            ElementKind::Equilibrium(p) => {
                let speed = crate::linalg::norm(&field.eval(p));
                if speed > tol_eq {
                    return Err(Error::InvalidInput(format!(
                        "element {} is not an equilibrium (|xi| = {speed:e})",
                        e.label
                    )));
                }
            }
            ElementKind::PeriodicOrbit { seed, period } => {
                if period.is_nan() || *period <= 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "element {} needs a positive period",
                        e.label
                    )));
                }
                let back = dynamics::flow(field, space, cfg, *period, seed)?;
                let gap = metric.distance(seed, &back);
                if gap > tol_orbit {
                    return Err(Error::InvalidInput(format!(
                        "element {} does not close after its period (gap {gap:e})",
                        e.label
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Result of a limit-set classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Limit {
    Element(usize),
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorseOptions {
    pub n_samples: usize,
    pub t_max: f64,
    /// Dwell for equilibria; closed orbits use twice their period.
    pub dwell: f64,
    pub unresolved_threshold: f64,
}

impl Default for MorseOptions {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            t_max: 60.0,
            dwell: DEFAULT_DWELL,
            unresolved_threshold: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Backward,
}

/// Capture ball or tube of one element.
#[derive(Debug, Clone)]
struct Capture {
    points: Vec<Vec<f64>>,
    radius: f64,
    dwell: f64,
    /// Must hold the trajectory until `t_max` to count as a limit.
    strict: bool,
}

/// Everything needed to classify points; cheap to clone into predicates.
#[derive(Debug, Clone)]
struct Classifier {
    field: VectorField,
    space: StateSpace,
    cfg: FlowConfig,
    metric: Metric,
    equilibria: Vec<(usize, Vec<f64>)>,
    forward: Vec<Capture>,
    backward: Vec<Capture>,
    t_max: f64,
}

impl Classifier {
    fn new(
        field: &VectorField,
        space: &StateSpace,
        cfg: &FlowConfig,
        elements: &[SingularElement],
        opts: &MorseOptions,
    ) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidInput("no singular elements declared".into()));
        }
        let default_radius = 0.05 * space.diameter();
        let mut forward = Vec::with_capacity(elements.len());
        let mut backward = Vec::with_capacity(elements.len());
        for e in elements {
            let (points, dwell) = match &e.kind {
                ElementKind::Equilibrium(p) => (vec![space.canonical(p)], opts.dwell),
                ElementKind::PeriodicOrbit { seed, period } => {
                    let times: Vec<f64> = (0..ORBIT_TUBE_POINTS)
                        .map(|k| period * k as f64 / ORBIT_TUBE_POINTS as f64)
                        .collect();
                    (dynamics::flow_at_times(field, space, cfg, seed, &times)?, 2.0 * period)
                }
            };
            let radius = e.capture_radius.unwrap_or(default_radius);
            let cap = |strict| Capture {
                points: points.clone(),
                radius,
                dwell,
                strict,
            };
            forward.push(cap(e.stability != Stability::Attracting));
            backward.push(cap(e.stability != Stability::Repelling));
        }
        Ok(Self {
            field: field.clone(),
            space: space.clone(),
            cfg: *cfg,
            metric: Metric::euclidean().on(space),
            equilibria: elements
                .iter()
                .enumerate()
                .filter_map(|(i, e)| match &e.kind {
                    ElementKind::Equilibrium(p) => Some((i, p.clone())),
                    ElementKind::PeriodicOrbit { .. } => None,
                })
                .collect(),
            forward,
            backward,
            t_max: opts.t_max,
        })
    }

    fn captured_by(&self, caps: &[Capture], y: &[f64]) -> Option<usize> {
        caps.iter()
            .position(|c| c.points.iter().any(|p| self.metric.distance(p, y) < c.radius))
    }

    fn classify(&self, x: &[f64], dir: Direction) -> Result<Limit> {
        if let Some((i, _)) = self
            .equilibria
            .iter()
            .find(|(_, p)| self.metric.distance(p, x) <= ON_ELEMENT_TOL)
        {
            return Ok(Limit::Element(*i));
        }
        let caps = match dir {
            Direction::Forward => &self.forward,
            Direction::Backward => &self.backward,
        };
        let min_dwell = caps.iter().map(|c| c.dwell).fold(f64::INFINITY, f64::min);
        let chunk = self.cfg.step.max((min_dwell / 20.0).min(0.05));
        let sign = if dir == Direction::Forward { 1.0 } else { -1.0 };
        let mut y = self.space.canonical(x);
        let mut t = 0.0;
        let mut current: Option<(usize, f64)> = None;
        loop {
            let here = self.captured_by(caps, &y);
            current = match (here, current) {
                (Some(i), Some((j, since))) if i == j => Some((j, since)),
                (Some(i), _) => Some((i, t)),
                (None, _) => None,
            };
            if let Some((i, since)) = current {
                if !caps[i].strict && t - since >= caps[i].dwell {
                    return Ok(Limit::Element(i));
                }
            }
            if t >= self.t_max {
                return Ok(match current {
                    Some((i, _)) if caps[i].strict => Limit::Element(i),
                    _ => Limit::Unresolved,
                });
            }
            let dt = chunk.min(self.t_max - t);
            y = dynamics::flow(&self.field, &self.space, &self.cfg, sign * dt, &y)?;
            t += dt;
        }
    }

    /// `(alpha, omega)`; divergence out of the space counts as unresolved.
    fn pair(&self, x: &[f64]) -> Result<(Limit, Limit)> {
        let tolerant = |r: Result<Limit>| match r {
            Err(Error::Divergence { .. }) => Ok(Limit::Unresolved),
            other => other,
        };
        Ok((
            tolerant(self.classify(x, Direction::Backward))?,
            tolerant(self.classify(x, Direction::Forward))?,
        ))
    }
}

/// Element whose capture set holds the forward trajectory of `x` long enough.
///
/// Attracting elements need a dwell (a fixed constant for equilibria, two
/// periods for orbits); repelling and saddle elements only count when they
/// still hold the trajectory at `t_max`.
pub fn classify_omega_limit(
    field: &VectorField,
    space: &StateSpace,
    cfg: &FlowConfig,
    x: &[f64],
    elements: &[SingularElement],
    opts: &MorseOptions,
) -> Result<Limit> {
    Classifier::new(field, space, cfg, elements, opts)?.classify(x, Direction::Forward)
}

/// As [`classify_omega_limit`] along the reversed field, with the roles of
/// attracting and repelling elements exchanged.
pub fn classify_alpha_limit(
    field: &VectorField,
    space: &StateSpace,
    cfg: &FlowConfig,
    x: &[f64],
    elements: &[SingularElement],
    opts: &MorseOptions,
) -> Result<Limit> {
    Classifier::new(field, space, cfg, elements, opts)?.classify(x, Direction::Backward)
}

/// The cell `W(b_source, b_sink)` and the sampled points found in it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionCell {
    pub source: usize,
    pub sink: usize,
    pub representatives: Vec<Vec<f64>>,
}

/// Witnessed pairs `(i, j)` with `b_i > b_j`, reflexive pairs included.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConnectionOrder {
    pub pairs: BTreeSet<(usize, usize)>,
}

impl ConnectionOrder {
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.pairs.contains(&(i, j))
    }
}

#[derive(Debug, Clone)]
pub struct MorseDecomposition {
    pub elements: Vec<SingularElement>,
    pub order: ConnectionOrder,
    /// One per pair of the order, in pair order.
    pub cells: Vec<ConnectionCell>,
    pub samples: usize,
    pub unresolved: usize,
}

impl MorseDecomposition {
    pub fn unresolved_fraction(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.unresolved as f64 / self.samples as f64
        }
    }

    pub fn cell_of(&self, source: usize, sink: usize) -> Option<CellId> {
        self.cells
            .iter()
            .position(|c| c.source == source && c.sink == sink)
            .map(CellId)
    }

    pub fn cell_label(&self, z: CellId) -> String {
        let c = &self.cells[z.0];
        format!("W({},{})", self.elements[c.source].label, self.elements[c.sink].label)
    }
}

/// Classifies quasi-uniform samples of the space and collects the witnessed order.
pub fn build_partial_order(
    field: &VectorField,
    space: &StateSpace,
    cfg: &FlowConfig,
    elements: &[SingularElement],
    opts: &MorseOptions,
    seed: u64,
) -> Result<MorseDecomposition> {
    let cls = Classifier::new(field, space, cfg, elements, opts)?;
    let pts = space.quasi_uniform(opts.n_samples, seed);
    let pairs = par::try_map_slice(&pts, |x| cls.pair(x))?;
    let mut cells: BTreeMap<(usize, usize), Vec<Vec<f64>>> = BTreeMap::new();
    for (i, e) in elements.iter().enumerate() {
        cells.insert((i, i), vec![space.canonical(e.anchor())]);
    }
    let mut unresolved = 0;
    for (x, p) in pts.iter().zip(&pairs) {
        match *p {
            (Limit::Element(i), Limit::Element(j)) => cells.entry((i, j)).or_default().push(x.clone()),
            _ => unresolved += 1,
        }
    }
    let fraction = if pts.is_empty() {
        0.0
    } else {
        unresolved as f64 / pts.len() as f64
    };
    if fraction > opts.unresolved_threshold {
        return Err(Error::TooManyUnresolved {
            fraction,
            threshold: opts.unresolved_threshold,
        });
    }
    if let Some(&(i, j)) = cells.keys().find(|&&(i, j)| i != j && cells.contains_key(&(j, i))) {
        return Err(Error::OrderViolation { i, j });
    }
    Ok(MorseDecomposition {
        elements: elements.to_vec(),
        order: ConnectionOrder {
            pairs: cells.keys().copied().collect(),
        },
        cells: cells
            .into_iter()
            .map(|((source, sink), representatives)| ConnectionCell {
                source,
                sink,
                representatives,
            })
            .collect(),
        samples: pts.len(),
        unresolved,
    })
}

/// `Z` = connection cells, `phi(t, z) = {z}`.
pub fn build_ms_system(decomp: &MorseDecomposition, time_grid: Vec<f64>) -> DiscreteSystem {
    DiscreteSystem::new(decomp.cells.len(), time_grid, |_, z| Ok([z].into_iter().collect()))
        .with_soundness(Soundness::Complete)
}

/// Cover whose region `z` holds the points classified into cell `z`.
///
/// Membership integrates both directions, so each lookup is expensive. The
/// reflexive cell of an equilibrium is the point itself (no homoclinic
/// orbits), tested by distance alone.
pub fn connection_cover(
    decomp: &MorseDecomposition,
    field: &VectorField,
    space: &StateSpace,
    cfg: &FlowConfig,
    opts: &MorseOptions,
) -> Result<OrderedCover> {
    let cls = Classifier::new(field, space, cfg, &decomp.elements, opts)?;
    let regions = decomp
        .cells
        .iter()
        .map(|c| {
            if let (true, ElementKind::Equilibrium(p)) = (c.source == c.sink, &decomp.elements[c.source].kind) {
                let (p, metric) = (space.canonical(p), Metric::euclidean().on(space));
                return Region::predicate(format!("W({0},{0})", c.source), move |x| {
                    metric.distance(&p, x) <= ON_ELEMENT_TOL
                });
            }
            let cls = cls.clone();
            let want = (Limit::Element(c.source), Limit::Element(c.sink));
            Region::predicate(format!("W({},{})", c.source, c.sink), move |x| {
                cls.pair(x).map(|p| p == want).unwrap_or(false)
            })
        })
        .collect();
    Ok(OrderedCover::new_unchecked(space.clone(), regions))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    pub checked: usize,
    pub mismatches: Vec<(CellId, f64, Vec<f64>)>,
    pub unresolved: usize,
}

impl InvarianceReport {
    pub fn holds(&self, threshold: f64) -> bool {
        self.mismatches.is_empty() && self.unresolved as f64 <= threshold * self.checked.max(1) as f64
    }
}

/// Re-classifies `flow(t, x)` for up to `per_cell` representatives of every cell
/// at each time in `times` (either sign).
pub fn check_flow_invariance(
    decomp: &MorseDecomposition,
    field: &VectorField,
    space: &StateSpace,
    cfg: &FlowConfig,
    opts: &MorseOptions,
    times: &[f64],
    per_cell: usize,
) -> Result<InvarianceReport> {
    let cls = Classifier::new(field, space, cfg, &decomp.elements, opts)?;
    let jobs: Vec<(CellId, &Vec<f64>, f64)> = decomp
        .cells
        .iter()
        .enumerate()
        .flat_map(|(z, c)| {
            c.representatives
                .iter()
                .take(per_cell)
                .flat_map(move |x| times.iter().map(move |&t| (CellId(z), x, t)))
        })
        .collect();
    let outcomes = par::try_map_slice(&jobs, |&(z, x, t)| -> Result<Option<bool>> {
        let y = match dynamics::flow(field, space, cfg, t, x) {
            Ok(y) => y,
            Err(Error::Divergence { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let c = &decomp.cells[z.0];
        Ok(match cls.pair(&y)? {
            (Limit::Element(i), Limit::Element(j)) => Some(i == c.source && j == c.sink),
            _ => None,
        })
    })?;
    let mut rep = InvarianceReport {
        checked: jobs.len(),
        mismatches: Vec::new(),
        unresolved: 0,
    };
    for (&(z, x, t), o) in jobs.iter().zip(outcomes) {
        match o {
            None => rep.unresolved += 1,
            Some(false) => rep.mismatches.push((z, t, x.clone())),
            Some(true) => {}
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::check_complete;
    use crate::field::Builtin;
    use std::f64::consts::PI;

    fn circle() -> (VectorField, StateSpace, FlowConfig, Vec<SingularElement>) {
        let f = VectorField::builtin(Builtin::Gradient1DCircle);
        let s = StateSpace::torus(vec![(0.0, 2.0 * PI)]).unwrap();
        let cfg = FlowConfig::new(1e-2, 60.0).unwrap();
        let el = vec![
            SingularElement::equilibrium("0", vec![0.0], Stability::Attracting),
            SingularElement::equilibrium("pi", vec![PI], Stability::Repelling),
        ];
        (f, s, cfg, el)
    }

    fn opts(n: usize) -> MorseOptions {
        MorseOptions {
            n_samples: n,
            ..Default::default()
        }
    }

    #[test]
    fn circle_limits() {
        let (f, s, cfg, el) = circle();
        let o = opts(0);
        assert_eq!(
            classify_omega_limit(&f, &s, &cfg, &[PI / 2.0], &el, &o).unwrap(),
            Limit::Element(0)
        );
        assert_eq!(
            classify_alpha_limit(&f, &s, &cfg, &[PI / 2.0], &el, &o).unwrap(),
            Limit::Element(1)
        );
        assert_eq!(
            classify_omega_limit(&f, &s, &cfg, &[4.0], &el, &o).unwrap(),
            Limit::Element(0)
        );
        assert_eq!(
            classify_omega_limit(&f, &s, &cfg, &[PI], &el, &o).unwrap(),
            Limit::Element(1)
        );
        assert_eq!(
            classify_alpha_limit(&f, &s, &cfg, &[PI], &el, &o).unwrap(),
            Limit::Element(1)
        );
        assert_eq!(
            classify_alpha_limit(&f, &s, &cfg, &[0.0], &el, &o).unwrap(),
            Limit::Element(0)
        );
        let short = MorseOptions { t_max: 1.0, ..o };
        assert_eq!(
            classify_omega_limit(&f, &s, &cfg, &[PI / 2.0], &el, &short).unwrap(),
            Limit::Unresolved
        );
        assert_eq!(
            classify_alpha_limit(&f, &s, &cfg, &[PI / 2.0], &el, &short).unwrap(),
            Limit::Unresolved
        );
    }

    #[test]
    fn near_repeller_is_not_its_omega_limit() {
        // Leaves the repeller's capture ball after about ln(1e7) time units.
        let (f, s, cfg, el) = circle();
        let x = [PI - 1e-7];
        assert_eq!(
            classify_omega_limit(&f, &s, &cfg, &x, &el, &opts(0)).unwrap(),
            Limit::Element(0)
        );
    }

    #[test]
    fn circle_order() {
        let (f, s, cfg, el) = circle();
        let d = build_partial_order(&f, &s, &cfg, &el, &opts(500), 3).unwrap();
        let want: BTreeSet<_> = [(1, 0), (0, 0), (1, 1)].into_iter().collect();
        assert_eq!(d.order.pairs, want);
        assert!(d.unresolved_fraction() <= 0.01);
        // Oracle: sign of -sin on each open arc.
        let arc = d.cell_of(1, 0).unwrap();
        let reps = &d.cells[arc.0].representatives;
        assert!(reps.iter().any(|x| x[0] < PI) && reps.iter().any(|x| x[0] > PI));
        let sys = build_ms_system(&d, vec![0.0, 1.0, 5.0]);
        assert_eq!(sys.n_states(), 3);
        for z in sys.states() {
            for t in [0.0, 1.0, 5.0] {
                assert_eq!(sys.phi(t, z).unwrap(), [z].into_iter().collect());
            }
        }
    }

    #[test]
    fn circle_cells_are_flow_invariant() {
        let (f, s, cfg, el) = circle();
        let d = build_partial_order(&f, &s, &cfg, &el, &opts(200), 4).unwrap();
        let times = [-10.0, -2.0, -0.5, 0.0, 0.5, 2.0, 10.0];
        let r = check_flow_invariance(&d, &f, &s, &cfg, &opts(200), &times, 20).unwrap();
        assert!(r.holds(0.01), "{r:?}");
    }

    #[test]
    fn reparameterized_query_keeps_its_limit() {
        let (f, s, cfg, el) = circle();
        for x in [0.3, 1.0, 2.5, 4.0, 6.0] {
            let w = classify_omega_limit(&f, &s, &cfg, &[x], &el, &opts(0)).unwrap();
            for dt in [0.01, 0.1] {
                let y = dynamics::flow(&f, &s, &cfg, dt, &[x]).unwrap();
                assert_eq!(classify_omega_limit(&f, &s, &cfg, &y, &el, &opts(0)).unwrap(), w);
            }
        }
    }

    #[test]
    fn reversing_field_swaps_limits() {
        let (f, s, cfg, el) = circle();
        let r = f.reversed();
        let swapped: Vec<SingularElement> = el
            .iter()
            .map(|e| {
                let st = match e.stability {
                    Stability::Attracting => Stability::Repelling,
                    Stability::Repelling => Stability::Attracting,
                    Stability::Saddle => Stability::Saddle,
                };
                SingularElement {
                    stability: st,
                    ..e.clone()
                }
            })
            .collect();
        for x in s.quasi_uniform(50, 2) {
            let a = classify_alpha_limit(&f, &s, &cfg, &x, &el, &opts(0)).unwrap();
            let w = classify_omega_limit(&f, &s, &cfg, &x, &el, &opts(0)).unwrap();
            assert_eq!(classify_omega_limit(&r, &s, &cfg, &x, &swapped, &opts(0)).unwrap(), a);
            assert_eq!(classify_alpha_limit(&r, &s, &cfg, &x, &swapped, &opts(0)).unwrap(), w);
        }
    }

    #[test]
    fn misdeclared_field_violates_order() {
        // theta' = sin^2 theta: both arcs flow the same way around the circle.
        let f = VectorField::from_fn(1, "sin^2", |x, o| o[0] = x[0].sin().powi(2));
        let s = StateSpace::torus(vec![(0.0, 2.0 * PI)]).unwrap();
        let cfg = FlowConfig::new(1e-2, 60.0).unwrap();
        let el = vec![
            SingularElement::equilibrium("0", vec![0.0], Stability::Saddle),
            SingularElement::equilibrium("pi", vec![PI], Stability::Saddle),
        ];
        let o = MorseOptions {
            unresolved_threshold: 1.0,
            ..opts(200)
        };
        assert!(matches!(
            build_partial_order(&f, &s, &cfg, &el, &o, 1),
            Err(Error::OrderViolation { i: 0, j: 1 })
        ));
    }

    #[test]
    fn escaping_alpha_limits_are_unresolved() {
        // x' = -x on a box: backward trajectories leave the space.
        let f = VectorField::builtin(Builtin::RadialContraction { dim: 2 });
        let s = StateSpace::cube(2, -1.0, 1.0).unwrap();
        let cfg = FlowConfig::new(1e-2, 30.0).unwrap();
        let el = vec![SingularElement::equilibrium("o", vec![0.0, 0.0], Stability::Attracting)];
        assert!(matches!(
            build_partial_order(&f, &s, &cfg, &el, &opts(100), 1),
            Err(Error::TooManyUnresolved { .. })
        ));
    }

    #[test]
    fn invalid_elements_rejected() {
        let (f, s, cfg, _) = circle();
        let bad = [SingularElement::equilibrium("x", vec![1.0], Stability::Attracting)];
        assert!(validate_elements(&f, &s, &cfg, &bad, 1e-8, 1e-6).is_err());
        let (_, _, _, good) = circle();
        assert!(validate_elements(&f, &s, &cfg, &good, 1e-8, 1e-6).is_ok());
    }

    fn cylinder() -> (VectorField, StateSpace, FlowConfig, Vec<SingularElement>) {
        // x' = 1, y' = -sin y on the torus: closed orbits at y = 0 (attracting) and y = pi.
        let f = VectorField::from_fn(2, "cylinder", |x, o| {
            o[0] = 1.0;
            o[1] = -x[1].sin();
        });
        let s = StateSpace::torus(vec![(0.0, 2.0 * PI), (0.0, 2.0 * PI)]).unwrap();
        let cfg = FlowConfig::new(1e-2, 60.0).unwrap();
        let el = vec![
            SingularElement::periodic("low", vec![0.0, 0.0], 2.0 * PI, Stability::Attracting),
            SingularElement::periodic("high", vec![0.0, PI], 2.0 * PI, Stability::Repelling),
        ];
        (f, s, cfg, el)
    }

    #[test]
    fn periodic_orbits_capture() {
        let (f, s, cfg, el) = cylinder();
        validate_elements(&f, &s, &cfg, &el, 1e-8, 1e-6).unwrap();
        let x = [1.0, 2.0];
        assert_eq!(
            classify_omega_limit(&f, &s, &cfg, &x, &el, &opts(0)).unwrap(),
            Limit::Element(0)
        );
        assert_eq!(
            classify_alpha_limit(&f, &s, &cfg, &x, &el, &opts(0)).unwrap(),
            Limit::Element(1)
        );
        let d = build_partial_order(&f, &s, &cfg, &el, &opts(100), 2).unwrap();
        let want: BTreeSet<_> = [(1, 0), (0, 0), (1, 1)].into_iter().collect();
        assert_eq!(d.order.pairs, want);
    }

    #[test]
    fn identity_system_is_complete_on_connection_cover() {
        let (f, s, cfg, el) = circle();
        let o = opts(100);
        let d = build_partial_order(&f, &s, &cfg, &el, &o, 5).unwrap();
        let cover = connection_cover(&d, &f, &s, &cfg, &o).unwrap();
        let sys = crate::abstraction::ContinuousSystem::new(f.clone(), s.clone(), cfg).unwrap();
        let grid = vec![0.0, 1.0, 4.0];
        let ds = build_ms_system(&d, grid.clone());
        let (complete, over, under) = check_complete(&sys, &ds, &cover, 40, &grid, 9).unwrap();
        assert!(
            complete.verdict && over.verdict && under.verdict,
            "{:?}",
            complete.violations
        );
    }
}
