//! State spaces, regions, ordered covers and the min-index abstraction map.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::linalg;
use crate::rng::{self, CounterRng};

/// Rejection sampling gives up after this many attempts per requested point.
pub const REJECTION_ATTEMPTS_PER_POINT: usize = 1000;
const MIN_REJECTION_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    /// Axis-aligned box, asserted forward invariant under the flow.
    Box,
    /// Flat torus: coordinates identified modulo `upper - lower`.
    Torus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    kind: SpaceKind,
    bounds: Vec<(f64, f64)>,
}

impl StateSpace {
    pub fn new(kind: SpaceKind, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidInput("state space needs at least one dimension".into()));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidInput(format!(
                    "dimension {i}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { kind, bounds })
    }

    pub fn boxed(bounds: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(SpaceKind::Box, bounds)
    }

    pub fn torus(bounds: Vec<(f64, f64)>) -> Result<Self> {
        Self::new(SpaceKind::Torus, bounds)
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::boxed(vec![(lo, hi); dim])
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn is_torus(&self) -> bool {
        self.kind == SpaceKind::Torus
    }

    pub fn periods(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| hi - lo).collect()
    }

    /// Map torus coordinates to their representative in `[lower, upper)`. No-op on boxes.
    pub fn canonicalize(&self, x: &mut [f64]) {
        if self.kind == SpaceKind::Torus {
            for (c, &(lo, hi)) in x.iter_mut().zip(&self.bounds) {
                let p = hi - lo;
                let mut v = (*c - lo).rem_euclid(p);
                if v >= p {
                    v = 0.0;
                }
                *c = lo + v;
            }
        }
    }

    pub fn canonical(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.canonicalize(&mut y);
        y
    }

    /// Membership with absolute slack `tol` on box faces; tori contain everything.
    pub fn contains_with_tol(&self, x: &[f64], tol: f64) -> bool {
        match self.kind {
            SpaceKind::Torus => true,
            SpaceKind::Box => x
                .iter()
                .zip(&self.bounds)
                .all(|(&c, &(lo, hi))| c >= lo - tol && c <= hi + tol),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_with_tol(x, 0.0)
    }

    /// Nearest point of a box; canonical representative on a torus.
    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        match self.kind {
            SpaceKind::Torus => self.canonical(x),
            SpaceKind::Box => x
                .iter()
                .zip(&self.bounds)
                .map(|(&c, &(lo, hi))| c.clamp(lo, hi))
                .collect(),
        }
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).product()
    }

    /// Largest distance between two points (Euclidean, shortest representative on tori).
    pub fn diameter(&self) -> f64 {
        let f = if self.is_torus() { 0.5 } else { 1.0 };
        self.bounds
            .iter()
            .map(|(lo, hi)| (f * (hi - lo)).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Coordinate difference `b - a`, using the shortest representative on tori.
    pub fn delta(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(b)
            .zip(&self.bounds)
            .map(|((&x, &y), &(lo, hi))| {
                let d = y - x;
                if self.is_torus() {
                    let p = hi - lo;
                    d - p * (d / p).round()
                } else {
                    d
                }
            })
            .collect()
    }

    fn unit_to_space(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.bounds)
            .map(|(&t, &(lo, hi))| lo + t * (hi - lo))
            .collect()
    }

    /// Quasi-uniform points (shifted Halton half, uniform half).
    pub fn quasi_uniform(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        rng::quasi_uniform(n, self.dim(), seed)
            .iter()
            .map(|u| self.unit_to_space(u))
            .collect()
    }

    /// Independent uniform points.
    pub fn sample_uniform(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = CounterRng::new(seed);
        (0..n)
            .map(|_| self.bounds.iter().map(|&(lo, hi)| r.uniform(lo, hi)).collect())
            .collect()
    }
}

/// Distance on the state space: Euclidean or a constant quadratic form,
/// taken modulo the lattice when built for a torus.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    form: Option<DMatrix<f64>>,
    periods: Option<Vec<f64>>,
}

impl Metric {
    pub fn euclidean() -> Self {
        Self {
            form: None,
            periods: None,
        }
    }

    /// `sqrt(d^T P d)`; `P` must be symmetric positive definite.
    pub fn quadratic(p: DMatrix<f64>) -> Result<Self> {
        if !p.is_square() {
            return Err(Error::InvalidInput("quadratic form must be square".into()));
        }
        if (&p - p.transpose()).amax() > 1e-12 * (1.0 + p.amax()) {
            return Err(Error::InvalidInput("quadratic form must be symmetric".into()));
        }
        if linalg::min_sym_eigenvalue(&p) <= 0.0 {
            return Err(Error::InvalidInput("quadratic form must be positive definite".into()));
        }
        Ok(Self {
            form: Some(p),
            periods: None,
        })
    }

    /// Quotient by the torus lattice when `space` is a torus.
    pub fn on(mut self, space: &StateSpace) -> Self {
        self.periods = space.is_torus().then(|| space.periods());
        self
    }

    pub fn form(&self) -> Option<&DMatrix<f64>> {
        self.form.as_ref()
    }

    pub fn is_quotient(&self) -> bool {
        self.periods.is_some()
    }

    fn length(&self, d: &[f64]) -> f64 {
        match &self.form {
            None => linalg::norm(d),
            Some(p) => linalg::quad_form(p, d).max(0.0).sqrt(),
        }
    }

    /// Largest stretch factor `sup |d|_metric / |d|_2`.
    pub fn stretch(&self) -> f64 {
        self.form.as_ref().map_or(1.0, |p| linalg::max_sym_eigenvalue(p).sqrt())
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut d: Vec<f64> = b.iter().zip(a).map(|(y, x)| y - x).collect();
        let Some(periods) = &self.periods else {
            return self.length(&d);
        };
        for (c, p) in d.iter_mut().zip(periods) {
            *c -= p * (*c / p).round();
        }
        if self.form.is_none() {
            return self.length(&d);
        }
        // A skewed form may prefer a neighbouring lattice translate.
        let n = d.len();
        let mut best = f64::INFINITY;
        let mut shift = vec![0.0; n];
        for code in 0..3usize.pow(n as u32) {
            let mut k = code;
            for (i, s) in shift.iter_mut().enumerate() {
                *s = d[i] + ((k % 3) as f64 - 1.0) * periods[i];
                k /= 3;
            }
            best = best.min(self.length(&shift));
        }
        best
    }
}

type PredicateFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;
type Draw = Box<dyn Fn(&mut CounterRng) -> Vec<f64>>;

/// Named membership test.
#[derive(Clone)]
pub struct Predicate {
    name: String,
    test: PredicateFn,
}

impl Predicate {
    pub fn new<F>(name: impl Into<String>, test: F) -> Self
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            test: Arc::new(test),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Predicate({})", self.name)
    }
}

/// Intersection of bands `V_i^{-1}([lower_i, upper_i])`; infinite ends are unconstrained.
#[derive(Debug, Clone)]
pub struct SlabCell {
    pub functions: Vec<ScalarField>,
    pub ranges: Vec<(f64, f64)>,
    pub index: Vec<usize>,
}

impl SlabCell {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.functions.iter().zip(&self.ranges).all(|(v, &(lo, hi))| {
            let val = v.eval(x);
            val >= lo && val <= hi
        })
    }
}

#[derive(Debug, Clone)]
pub enum Region {
    HyperRect(Vec<(f64, f64)>),
    MetricBall {
        center: Vec<f64>,
        radius: f64,
        metric: Metric,
    },
    Slab(SlabCell),
    Predicate(Predicate),
}

impl Region {
    pub fn rect(bounds: Vec<(f64, f64)>) -> Self {
        Region::HyperRect(bounds)
    }

    pub fn ball(center: Vec<f64>, radius: f64, metric: Metric) -> Self {
        Region::MetricBall { center, radius, metric }
    }

    pub fn predicate<F>(name: impl Into<String>, test: F) -> Self
    where
        F: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        Region::Predicate(Predicate::new(name, test))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Region::HyperRect(_) => "hyperrect",
            Region::MetricBall { .. } => "ball",
            Region::Slab(_) => "slab",
            Region::Predicate(_) => "predicate",
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::HyperRect(b) => x.iter().zip(b).all(|(&c, &(lo, hi))| c >= lo && c <= hi),
            Region::MetricBall { center, radius, metric } => metric.distance(center, x) < *radius,
            Region::Slab(s) => s.contains(x),
            Region::Predicate(p) => (p.test)(x),
        }
    }

    /// Corners of a hyper-rectangle, in binary-counter order.
    pub fn corners(&self) -> Option<Vec<Vec<f64>>> {
        let Region::HyperRect(b) = self else {
            return None;
        };
        let n = b.len();
        Some(
            (0..1usize << n)
                .map(|mask| {
                    (0..n)
                        .map(|i| if mask >> i & 1 == 1 { b[i].1 } else { b[i].0 })
                        .collect()
                })
                .collect(),
        )
    }

    /// `n` points of the region inside `space`, reproducible for a fixed seed.
    ///
    /// `cell` only labels the error.
    pub fn sample(&self, space: &StateSpace, n: usize, seed: u64, cell: usize) -> Result<Vec<Vec<f64>>> {
        let mut rng = CounterRng::new(seed);
        let dim = space.dim();
        let draw: Draw = match self {
            Region::HyperRect(b) => {
                let b = b.clone();
                Box::new(move |r| b.iter().map(|&(lo, hi)| r.uniform(lo, hi)).collect())
            }
            Region::MetricBall { center, radius, metric } => {
                // Uniform in the unit ball, mapped by the inverse Cholesky factor.
                let transform = match metric.form() {
                    None => None,
                    Some(p) => {
                        let chol = p
                            .clone()
                            .cholesky()
                            .ok_or_else(|| Error::InvalidInput("ball form not positive definite".into()))?;
                        let lt = chol.l().transpose();
                        Some(
                            lt.try_inverse()
                                .expect("triangular factor of a PD matrix is invertible"),
                        )
                    }
                };
                let (c, r0) = (center.clone(), *radius);
                Box::new(move |r| {
                    let u = r.in_unit_ball(dim);
                    let d = match &transform {
                        None => u,
                        Some(m) => linalg::mat_vec(m, &u),
                    };
                    c.iter().zip(d).map(|(ci, di)| ci + r0 * di).collect()
                })
            }
            Region::Slab(_) | Region::Predicate(_) => {
                let bounds = space.bounds().to_vec();
                Box::new(move |r| bounds.iter().map(|&(lo, hi)| r.uniform(lo, hi)).collect())
            }
        };
        let budget = (REJECTION_ATTEMPTS_PER_POINT * n).max(MIN_REJECTION_ATTEMPTS);
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0;
        while out.len() < n {
            if attempts >= budget {
                return Err(Error::EmptyRegion { cell, attempts });
            }
            attempts += 1;
            let mut p = draw(&mut rng);
            space.canonicalize(&mut p);
            if space.contains(&p) && self.contains(&p) {
                out.push(p);
            }
        }
        Ok(out)
    }
}

/// Discrete state: index into an ordered cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId(pub usize);

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub type CellSet = BTreeSet<CellId>;

/// Overlap witness returned when a cover is not a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Overlap {
    pub point: Vec<f64>,
    pub first: CellId,
    pub second: CellId,
}

/// Finite indexed family of regions covering the state space.
#[derive(Debug, Clone)]
pub struct OrderedCover {
    space: StateSpace,
    regions: Vec<Region>,
}

impl OrderedCover {
    /// Build a cover, checking on `coverage_samples` quasi-uniform points that
    /// every point lies in some region. The order on Z is the input order.
    pub fn build(space: StateSpace, regions: Vec<Region>, coverage_samples: usize, seed: u64) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::InvalidInput("cover needs at least one region".into()));
        }
        if coverage_samples == 0 {
            return Err(Error::InvalidInput("coverage_samples must be >= 1".into()));
        }
        let cover = Self { space, regions };
        let pts = cover.space.quasi_uniform(coverage_samples, seed);
        let gaps = crate::par::map_slice(&pts, |p| cover.first_containing(p).is_none());
        if let Some(i) = gaps.iter().position(|&g| g) {
            return Err(Error::CoverageGap { point: pts[i].clone() });
        }
        Ok(cover)
    }

    /// Skip the coverage check, for constructions that cover by design.
    pub fn new_unchecked(space: StateSpace, regions: Vec<Region>) -> Self {
        Self { space, regions }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region(&self, z: CellId) -> &Region {
        &self.regions[z.0]
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = CellId> {
        (0..self.regions.len()).map(CellId)
    }

    fn first_containing(&self, x: &[f64]) -> Option<CellId> {
        self.regions.iter().position(|r| r.contains(x)).map(CellId)
    }

    /// The least `z` (in cover order) whose region contains `x`.
    pub fn abstract_point(&self, x: &[f64]) -> Result<CellId> {
        let y = self.space.canonical(x);
        self.first_containing(&y).ok_or(Error::NotCovered { point: y })
    }

    /// All cells whose region contains `x`.
    pub fn containing(&self, x: &[f64]) -> Vec<CellId> {
        let y = self.space.canonical(x);
        self.regions
            .iter()
            .enumerate()
            .filter(|(_, r)| r.contains(&y))
            .map(|(i, _)| CellId(i))
            .collect()
    }

    /// `Ok(())` when no sampled point lies in two regions; otherwise the first overlap found.
    pub fn is_partition(&self, samples: usize, seed: u64) -> std::result::Result<(), Overlap> {
        let pts = self.space.quasi_uniform(samples, seed);
        let hits = crate::par::map_slice(&pts, |p| {
            let c = self.containing(p);
            (c.len() >= 2).then(|| (c[0], c[1]))
        });
        match hits.into_iter().enumerate().find_map(|(i, h)| h.map(|h| (i, h))) {
            None => Ok(()),
            Some((i, (first, second))) => Err(Overlap {
                point: pts[i].clone(),
                first,
                second,
            }),
        }
    }

    /// `n` points of region `z`.
    pub fn sample_cell(&self, z: CellId, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let region = self
            .regions
            .get(z.0)
            .ok_or_else(|| Error::InvalidInput(format!("cell {z} out of range")))?;
        region.sample(&self.space, n, seed, z.0)
    }

    /// Points of the cell `[z] = A^{-1}(z)`: region samples whose min-index cell is `z`.
    pub fn sample_preimage(&self, z: CellId, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(n);
        let mut round = 0u64;
        while out.len() < n {
            let batch = self.sample_cell(z, n, rng::derive_seed(seed, round))?;
            out.extend(
                batch
                    .into_iter()
                    .filter(|p| self.first_containing(p) == Some(z))
                    .take(n - out.len()),
            );
            round += 1;
            if round > 64 && out.is_empty() {
                return Err(Error::EmptyRegion {
                    cell: z.0,
                    attempts: 64 * n,
                });
            }
        }
        Ok(out)
    }
}

/// `n_per_dim^dim` axis-aligned tiles of a box or torus, in row-major order.
pub fn grid_partition(space: &StateSpace, per_dim: &[usize]) -> Vec<Region> {
    let dim = space.dim();
    assert_eq!(per_dim.len(), dim);
    let total: usize = per_dim.iter().product();
    (0..total)
        .map(|mut k| {
            let mut idx = vec![0usize; dim];
            for d in (0..dim).rev() {
                idx[d] = k % per_dim[d];
                k /= per_dim[d];
            }
            let bounds = idx
                .iter()
                .zip(space.bounds())
                .zip(per_dim)
                .map(|((&i, &(lo, hi)), &n)| {
                    let w = (hi - lo) / n as f64;
                    (lo + i as f64 * w, lo + (i + 1) as f64 * w)
                })
                .collect();
            Region::HyperRect(bounds)
        })
        .collect()
}
