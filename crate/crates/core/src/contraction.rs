//! Contraction-based abstraction over a cover by metric disks.
//!
//! A Finsler-Lyapunov function `V(x, w)` decreasing along the variational flow
//! certifies that trajectories approach each other, so the image of a disk
//! is bounded by one simulated center trajectory plus a shrinking radius.

use nalgebra::DMatrix;

use crate::abstraction::{ContinuousSystem, DiscreteSystem, Soundness};
use crate::dynamics::{self, FlowConfig};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::field::VectorField;
use crate::geometry::{CellId, CellSet, Metric, OrderedCover, Region, StateSpace};
use crate::linalg;
use crate::par;
use crate::rng::{self, CounterRng};

#[derive(Debug, Clone)]
pub enum FinslerForm {
    /// `V(x, w) = w^T P w`, `p = 2`.
    Quadratic(DMatrix<f64>),
    /// Expression in `x0..`, `w0..`.
    UserDefined(Expr),
}

#[derive(Debug, Clone)]
pub struct FinslerLyapunovSpec {
    form: FinslerForm,
    p: u32,
    dim: usize,
}

impl FinslerLyapunovSpec {
    pub fn quadratic(p: DMatrix<f64>) -> Result<Self> {
        Metric::quadratic(p.clone())?;
        let dim = p.nrows();
        Ok(Self {
            form: FinslerForm::Quadratic(p),
            p: 2,
            dim,
        })
    }

    /// `V = |w|^2`.
    pub fn euclidean(dim: usize) -> Self {
        Self {
            form: FinslerForm::Quadratic(DMatrix::identity(dim, dim)),
            p: 2,
            dim,
        }
    }

    /// Parses `src` over the variables `x0..x{dim-1}` and `w0..w{dim-1}`.
    pub fn user_defined(src: &str, dim: usize, p: u32) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidInput("homogeneity degree must be positive".into()));
        }
        let names: Vec<(String, usize)> = (0..dim)
            .map(|i| (format!("x{i}"), i))
            .chain((0..dim).map(|i| (format!("w{i}"), dim + i)))
            .collect();
        let vars: Vec<(&str, usize)> = names.iter().map(|(n, i)| (n.as_str(), *i)).collect();
        Ok(Self {
            form: FinslerForm::UserDefined(Expr::parse(src, &vars)?),
            p,
            dim,
        })
    }

    pub fn form(&self) -> &FinslerForm {
        &self.form
    }

    pub fn degree(&self) -> u32 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &[f64], w: &[f64]) -> f64 {
        match &self.form {
            FinslerForm::Quadratic(p) => linalg::quad_form(p, w),
            FinslerForm::UserDefined(e) => {
                let vars: Vec<f64> = x.iter().chain(w).copied().collect();
                e.eval(&vars)
            }
        }
    }

    /// Distance induced by `V^{1/p}`; only constant quadratic forms have a closed form.
    pub fn induced_metric(&self) -> Option<Metric> {
        match &self.form {
            FinslerForm::Quadratic(p) => Metric::quadratic(p.clone()).ok(),
            FinslerForm::UserDefined(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinslerReport {
    pub samples: usize,
    pub positivity: bool,
    pub homogeneity: bool,
    pub triangle: bool,
    /// Smallest `V(x, w)` seen on unit vectors.
    pub min_value: f64,
    pub worst_homogeneity: f64,
    /// Largest `V(v+w)^{1/p} - V(v)^{1/p} - V(w)^{1/p}`.
    pub worst_triangle: f64,
}

impl FinslerReport {
    pub fn holds(&self) -> bool {
        self.positivity && self.homogeneity && self.triangle
    }
}

const HOMOGENEITY_SCALES: [f64; 3] = [0.5, 2.0, 10.0];

/// Samples base points in `space` and unit vectors to test positivity,
/// degree-`p` homogeneity and the `p`-th-root triangle inequality.
pub fn check_finsler_conditions(
    spec: &FinslerLyapunovSpec,
    space: &StateSpace,
    n_samples: usize,
    tol: f64,
    seed: u64,
) -> FinslerReport {
    let xs = space.sample_uniform(n_samples, rng::derive_seed(seed, 1));
    let mut r = CounterRng::new(rng::derive_seed(seed, 2));
    let p = spec.p as f64;
    let mut rep = FinslerReport {
        samples: n_samples,
        positivity: true,
        homogeneity: true,
        triangle: true,
        min_value: f64::INFINITY,
        worst_homogeneity: 0.0,
        worst_triangle: f64::NEG_INFINITY,
    };
    for x in &xs {
        let w = r.unit_vector(spec.dim);
        let u: Vec<f64> = r
            .unit_vector(spec.dim)
            .into_iter()
            .map(|c| c * r.uniform(0.1, 3.0))
            .collect();
        let v = spec.value(x, &w);
        rep.min_value = rep.min_value.min(v);
        for lam in HOMOGENEITY_SCALES {
            let scaled: Vec<f64> = w.iter().map(|c| lam * c).collect();
            let expect = lam.powf(p) * v;
            let err = (spec.value(x, &scaled) - expect).abs() / (1.0 + expect.abs());
            rep.worst_homogeneity = rep.worst_homogeneity.max(err);
        }
        let sum: Vec<f64> = w.iter().zip(&u).map(|(a, b)| a + b).collect();
        let root = |q: f64| q.max(0.0).powf(1.0 / p);
        let gap = root(spec.value(x, &sum)) - root(v) - root(spec.value(x, &u));
        rep.worst_triangle = rep.worst_triangle.max(gap);
    }
    rep.positivity = rep.min_value > 0.0;
    rep.homogeneity = rep.worst_homogeneity <= tol;
    rep.triangle = rep.worst_triangle <= tol;
    rep
}

/// The rate function `alpha` of the contraction inequality, an expression in `s`.
#[derive(Debug, Clone)]
pub struct AlphaFn {
    expr: Option<Expr>,
    rate: Option<f64>,
}

impl AlphaFn {
    pub fn linear(c: f64) -> Self {
        Self {
            expr: None,
            rate: Some(c),
        }
    }

    /// Parses `src` in the variable `s`; linear expressions are recognized by probing.
    pub fn parse(src: &str) -> Result<Self> {
        let e = Expr::parse(src, &[("s", 0)])?;
        let c = e.eval(&[1.0]);
        let linear = [0.0, 0.25, 0.5, 2.0, 10.0, 100.0]
            .iter()
            .all(|&s| (e.eval(&[s]) - c * s).abs() <= 1e-12 * (1.0 + (c * s).abs()));
        Ok(Self {
            rate: linear.then_some(c),
            expr: Some(e),
        })
    }

    pub fn eval(&self, s: f64) -> f64 {
        match (&self.expr, self.rate) {
            (Some(e), _) => e.eval(&[s]),
            (None, Some(c)) => c * s,
            (None, None) => 0.0,
        }
    }

    /// `c` when `alpha(s) = c s`.
    pub fn linear_rate(&self) -> Option<f64> {
        self.rate
    }

    pub fn source(&self) -> String {
        match (&self.expr, self.rate) {
            (Some(e), _) => e.source().to_string(),
            (None, Some(c)) => format!("{c}*s"),
            (None, None) => "0".into(),
        }
    }

    /// `alpha(0) = 0` and nondecreasing on a grid over `[0, s_max]`.
    fn validate(&self, s_max: f64) -> Result<()> {
        if self.eval(0.0).abs() > 1e-12 {
            return Err(Error::InvalidInput("alpha(0) must be 0".into()));
        }
        let mut prev = self.eval(0.0);
        for k in 1..=200 {
            let v = self.eval(s_max * k as f64 / 200.0);
            if !v.is_finite() || v < prev - 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "alpha({}) is not nondecreasing",
                    self.source()
                )));
            }
            prev = v;
        }
        Ok(())
    }
}

/// Bound `beta(t, r)` on the distance at time `t` of points initially `r` apart.
#[derive(Debug, Clone)]
pub enum Envelope {
    /// `r`: no decay claimed.
    Static,
    /// `exp(-rate t) r`.
    Exponential { rate: f64 },
    /// Expression in `t`, `r`.
    User(Expr),
}

impl Envelope {
    pub fn parse(src: &str) -> Result<Self> {
        let e = Expr::parse(src, &[("t", 0), ("r", 1)])?;
        for r in [0.1, 1.0, 3.0] {
            if (e.eval(&[0.0, r]) - r).abs() > 1e-9 * (1.0 + r) {
                return Err(Error::InvalidInput("envelope must satisfy beta(0, r) = r".into()));
            }
        }
        Ok(Envelope::User(e))
    }

    /// `exp(-c t / p)` for `alpha(s) = c s`, otherwise static.
    pub fn from_alpha(alpha: &AlphaFn, degree: u32) -> Self {
        match alpha.linear_rate() {
            Some(c) if c > 0.0 => Envelope::Exponential {
                rate: c / degree as f64,
            },
            _ => Envelope::Static,
        }
    }

    pub fn eval(&self, t: f64, r: f64) -> f64 {
        match self {
            Envelope::Static => r,
            Envelope::Exponential { rate } => (-rate * t).exp() * r,
            Envelope::User(e) => e.eval(&[t, r]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ContractionCertificate {
    pub alpha: AlphaFn,
    pub envelope: Envelope,
    pub checked_points: usize,
    /// Largest `dV/dt + alpha(V)` over the samples.
    pub worst_margin: f64,
    pub worst_point: Option<(Vec<f64>, Vec<f64>)>,
    pub verdict: bool,
}

impl ContractionCertificate {
    pub fn require(&self) -> Result<()> {
        if self.verdict {
            Ok(())
        } else {
            Err(Error::NotContractive {
                worst_margin: self.worst_margin,
            })
        }
    }
}

/// `d/dt V(x(t), w(t))` at `t = 0` along the variational flow.
///
/// Central difference with `h = min(step, 1e-3)`. When one direction leaves
/// the state space a second-order one-sided difference is used; when both do
/// (near a box corner) the central difference is taken in a box widened by
/// its own span on each side.
pub fn finsler_derivative(
    field: &VectorField,
    space: &StateSpace,
    cfg: &FlowConfig,
    spec: &FinslerLyapunovSpec,
    x: &[f64],
    w: &[f64],
) -> Result<f64> {
    let h = cfg.step.min(1e-3);
    let fine = FlowConfig { step: h / 4.0, ..*cfg };
    let v_in = |sp: &StateSpace, t: f64| -> Result<f64> {
        let (y, u) = dynamics::variational_flow(field, sp, &fine, t, x, w)?;
        Ok(spec.value(&y, &u))
    };
    let diverged = |r: &Result<f64>| matches!(r, Err(Error::Divergence { .. }));
    let (fwd, back) = (v_in(space, h), v_in(space, -h));
    if !diverged(&fwd) && !diverged(&back) {
        return Ok((fwd? - back?) / (2.0 * h));
    }
    let v0 = spec.value(x, w);
    if !diverged(&fwd) {
        if let Ok(fwd2) = v_in(space, 2.0 * h) {
            return Ok((-3.0 * v0 + 4.0 * fwd? - fwd2) / (2.0 * h));
        }
    } else if !diverged(&back) {
        if let Ok(back2) = v_in(space, -2.0 * h) {
            return Ok((3.0 * v0 - 4.0 * back? + back2) / (2.0 * h));
        }
    }
    if space.is_torus() {
        return fwd.and(back);
    }
    let wide = StateSpace::boxed(
        space
            .bounds()
            .iter()
            .map(|&(lo, hi)| (lo - (hi - lo), hi + (hi - lo)))
            .collect(),
    )?;
    Ok((v_in(&wide, h)? - v_in(&wide, -h)?) / (2.0 * h))
}

/// Tests `dV/dt <= -alpha(V) + tol` on sampled `(x, w)` with `|w| = 1`.
///
/// The envelope is `user_envelope` when given, otherwise derived from `alpha`.
#[allow(clippy::too_many_arguments)]
pub fn check_contraction_inequality(
    field: &VectorField,
    space: &StateSpace,
    cfg: &FlowConfig,
    spec: &FinslerLyapunovSpec,
    alpha: AlphaFn,
    user_envelope: Option<Envelope>,
    n_samples: usize,
    tol: f64,
    seed: u64,
) -> Result<ContractionCertificate> {
    if field.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: field.dim(),
        });
    }
    let xs = space.quasi_uniform(n_samples, rng::derive_seed(seed, 1));
    let mut r = CounterRng::new(rng::derive_seed(seed, 2));
    let ws: Vec<Vec<f64>> = (0..n_samples).map(|_| r.unit_vector(spec.dim())).collect();
    let s_max = xs.iter().zip(&ws).map(|(x, w)| spec.value(x, w)).fold(1.0, f64::max);
    alpha.validate(2.0 * s_max)?;
    let margins = par::try_map_range(n_samples, |i| {
        let d = finsler_derivative(field, space, cfg, spec, &xs[i], &ws[i])?;
        Ok(d + alpha.eval(spec.value(&xs[i], &ws[i])))
    })?;
    let worst = margins.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1));
    let worst_margin = worst.map_or(f64::NEG_INFINITY, |w| *w.1);
    let envelope = user_envelope.unwrap_or_else(|| Envelope::from_alpha(&alpha, spec.degree()));
    Ok(ContractionCertificate {
        alpha,
        envelope,
        checked_points: n_samples,
        worst_margin,
        worst_point: worst.map(|w| (xs[w.0].clone(), ws[w.0].clone())),
        verdict: worst_margin <= tol,
    })
}

/// Ordered cover by disks `D(x_z, r_z)`.
#[derive(Debug, Clone)]
pub struct DiskCover {
    cover: OrderedCover,
    centers: Vec<Vec<f64>>,
    radii: Vec<f64>,
    metric: Metric,
}

impl DiskCover {
    /// Disks at explicit centers; coverage of the space is verified by sampling.
    pub fn from_centers(
        space: StateSpace,
        metric: Metric,
        centers: Vec<Vec<f64>>,
        radii: Vec<f64>,
        coverage_samples: usize,
        seed: u64,
    ) -> Result<Self> {
        if centers.len() != radii.len() {
            return Err(Error::InvalidInput("one radius per center required".into()));
        }
        if radii.iter().any(|&r| r.is_nan() || r <= 0.0) {
            return Err(Error::InvalidInput("disk radii must be positive".into()));
        }
        if let Some(c) = centers.iter().find(|c| c.len() != space.dim()) {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: c.len(),
            });
        }
        let metric = metric.on(&space);
        let regions = centers
            .iter()
            .zip(&radii)
            .map(|(c, &r)| Region::ball(c.clone(), r, metric.clone()))
            .collect();
        let cover = OrderedCover::build(space, regions, coverage_samples, seed)?;
        Ok(Self {
            cover,
            centers,
            radii,
            metric,
        })
    }

    pub fn cover(&self) -> &OrderedCover {
        &self.cover
    }

    pub fn into_cover(self) -> OrderedCover {
        self.cover
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn center(&self, z: CellId) -> &[f64] {
        &self.centers[z.0]
    }

    pub fn radius(&self, z: CellId) -> f64 {
        self.radii[z.0]
    }

    /// Cells whose disk can meet `D(y, r)`.
    pub fn cells_near(&self, y: &[f64], r: f64) -> CellSet {
        (0..self.centers.len())
            .filter(|&i| self.metric.distance(&self.centers[i], y) < self.radii[i] + r)
            .map(CellId)
            .collect()
    }
}

/// Uniform grid of centers with one radius.
///
/// Per axis `n = floor(L sqrt(d) / (2 r')) + 1` centers sit at cell midpoints,
/// where `r' = r / sqrt(lambda_max(P))` is a Euclidean radius contained in
/// the metric disk. Centers are ordered lexicographically by grid index.
pub fn build_disk_cover(
    space: &StateSpace,
    metric: Metric,
    radius: f64,
    coverage_samples: usize,
    seed: u64,
) -> Result<DiskCover> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::InvalidInput("disk radius must be positive".into()));
    }
    let dim = space.dim();
    let r_eff = radius / metric.stretch();
    let counts: Vec<usize> = space
        .bounds()
        .iter()
        .map(|&(lo, hi)| ((hi - lo) * (dim as f64).sqrt() / (2.0 * r_eff)).floor() as usize + 1)
        .collect();
    let total: usize = counts.iter().product();
    let mut centers = Vec::with_capacity(total);
    for k in 0..total {
        let mut rem = k;
        let mut idx = vec![0usize; dim];
        for d in (0..dim).rev() {
            idx[d] = rem % counts[d];
            rem /= counts[d];
        }
        centers.push(
            (0..dim)
                .map(|d| {
                    let (lo, hi) = space.bounds()[d];
                    lo + (idx[d] as f64 + 0.5) * (hi - lo) / counts[d] as f64
                })
                .collect(),
        );
    }
    DiskCover::from_centers(
        space.clone(),
        metric,
        centers,
        vec![radius; total],
        coverage_samples,
        seed,
    )
}

/// Cells meeting `D(flow(t, x_z), beta(t, r_z))`, together with the cell of the center image.
pub fn compute_phi_ex2(
    disks: &DiskCover,
    field: &VectorField,
    cfg: &FlowConfig,
    cert: &ContractionCertificate,
    t: f64,
    z: CellId,
) -> Result<CellSet> {
    cert.require()?;
    let y = dynamics::flow(field, disks.cover().space(), cfg, t, disks.center(z))?;
    let mut out = disks.cells_near(&y, cert.envelope.eval(t, disks.radius(z)));
    out.insert(disks.cover().abstract_point(&y)?);
    Ok(out)
}

/// Discrete system over the disk cover, tagged over-approximating.
pub fn build_ex2_system(
    disks: DiskCover,
    sys: &ContinuousSystem,
    cert: ContractionCertificate,
    time_grid: Vec<f64>,
) -> Result<DiscreteSystem> {
    cert.require()?;
    let n = disks.cover().len();
    let field = sys.field.clone();
    let cfg = sys.flow;
    let d = DiscreteSystem::new(n, time_grid, move |t, z| {
        compute_phi_ex2(&disks, &field, &cfg, &cert, t, z)
    });
    Ok(d.with_soundness(Soundness::Over))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Builtin;

    fn unit_square() -> StateSpace {
        StateSpace::cube(2, -1.0, 1.0).unwrap()
    }

    #[test]
    fn derivative_at_a_corner_where_the_flow_exits_both_ways() {
        let s = unit_square();
        let cfg = FlowConfig::new(1e-3, 1.0).unwrap();
        let spec = FinslerLyapunovSpec::euclidean(2);
        let rot = VectorField::builtin(Builtin::Rotation);
        let d = finsler_derivative(&rot, &s, &cfg, &spec, &[1.0, -1.0], &[0.6, 0.8]).unwrap();
        assert!(d.abs() < 1e-9, "{d}");
    }

    #[test]
    fn finsler_examples() {
        let s = unit_square();
        assert!(check_finsler_conditions(&FinslerLyapunovSpec::euclidean(2), &s, 500, 1e-9, 1).holds());
        let p = FinslerLyapunovSpec::quadratic(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0])))
            .unwrap();
        let r = check_finsler_conditions(&p, &s, 500, 1e-9, 1);
        assert!(r.holds() && r.worst_homogeneity < 1e-12);
        let off = FinslerLyapunovSpec::user_defined("w0^2 + w1^2 + 1", 2, 2).unwrap();
        let r = check_finsler_conditions(&off, &s, 500, 1e-9, 1);
        assert!(r.positivity && !r.homogeneity);
        let user = FinslerLyapunovSpec::user_defined("(1 + x0^2) * (w0^2 + w1^2)", 2, 2).unwrap();
        assert!(check_finsler_conditions(&user, &s, 500, 1e-9, 1).holds());
    }

    #[test]
    fn quadratic_spec_rejects_indefinite() {
        assert!(FinslerLyapunovSpec::quadratic(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err());
    }

    #[test]
    fn derivative_matches_hand_computation() {
        // d/dt |w|^2 = 2 w^T (-w) = -2 |w|^2 for x' = -x.
        let s = unit_square();
        let f = VectorField::builtin(Builtin::RadialContraction { dim: 2 });
        let spec = FinslerLyapunovSpec::euclidean(2);
        let cfg = FlowConfig::default();
        for (x, w) in [
            ([0.3, -0.2], [0.6, 0.8]),
            ([0.9999, 0.5], [1.0, 0.0]),
            ([-1.0, -1.0], [0.0, 2.0]),
        ] {
            let d = finsler_derivative(&f, &s, &cfg, &spec, &x, &w).unwrap();
            let v = linalg::dot(&w, &w);
            assert!((d + 2.0 * v).abs() < 1e-5 * v, "{d}");
        }
    }

    #[test]
    fn contraction_examples() {
        let s = unit_square();
        let cfg = FlowConfig::default();
        let spec = FinslerLyapunovSpec::euclidean(2);
        let f = VectorField::builtin(Builtin::RadialContraction { dim: 2 });
        let c = check_contraction_inequality(&f, &s, &cfg, &spec, AlphaFn::parse("2*s").unwrap(), None, 300, 1e-4, 3)
            .unwrap();
        assert!(c.verdict && c.worst_margin.abs() < 1e-4);
        assert!(matches!(c.envelope, Envelope::Exponential { rate } if (rate - 1.0).abs() < 1e-15));
        let weak =
            check_contraction_inequality(&f, &s, &cfg, &spec, AlphaFn::parse("0*s").unwrap(), None, 100, 1e-4, 3)
                .unwrap();
        assert!(weak.verdict);
        let rot = VectorField::builtin(Builtin::Rotation);
        let torus = StateSpace::torus(vec![(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let bad = check_contraction_inequality(
            &rot,
            &torus,
            &cfg,
            &spec,
            AlphaFn::parse("s").unwrap(),
            None,
            100,
            1e-4,
            3,
        )
        .unwrap();
        assert!(!bad.verdict && bad.require().is_err());
    }

    #[test]
    fn alpha_preconditions() {
        let s = unit_square();
        let f = VectorField::builtin(Builtin::RadialContraction { dim: 2 });
        let spec = FinslerLyapunovSpec::euclidean(2);
        let cfg = FlowConfig::default();
        for src in ["s + 1", "-s", "sin(10*s)"] {
            let a = AlphaFn::parse(src).unwrap();
            assert!(
                check_contraction_inequality(&f, &s, &cfg, &spec, a, None, 10, 1e-4, 1).is_err(),
                "{src}"
            );
        }
        assert_eq!(AlphaFn::parse("s^2").unwrap().linear_rate(), None);
        assert_eq!(AlphaFn::parse("3*s").unwrap().linear_rate(), Some(3.0));
    }

    #[test]
    fn envelope_properties() {
        let e = Envelope::Exponential { rate: 1.0 };
        assert_eq!(e.eval(0.0, 0.7), 0.7);
        assert!(e.eval(1.0, 0.7) < e.eval(0.5, 0.7));
        assert!(Envelope::parse("r * exp(-t)").is_ok());
        assert!(Envelope::parse("r + t + 1").is_err());
    }

    #[test]
    fn envelope_bounds_sampled_pairs() {
        let s = unit_square();
        let f = VectorField::builtin(Builtin::RadialContraction { dim: 2 });
        let cfg = FlowConfig::default();
        let e = Envelope::Exponential { rate: 1.0 };
        let a = s.sample_uniform(200, 1);
        let b = s.sample_uniform(200, 2);
        for t in [0.0, 0.5, 2.0] {
            for (x1, x2) in a.iter().zip(&b) {
                let y1 = dynamics::flow(&f, &s, &cfg, t, x1).unwrap();
                let y2 = dynamics::flow(&f, &s, &cfg, t, x2).unwrap();
                assert!(linalg::dist(&y1, &y2) <= e.eval(t, linalg::dist(x1, x2)) + 1e-4);
            }
        }
    }

    #[test]
    fn disk_cover_examples() {
        let line = StateSpace::boxed(vec![(0.0, 1.0)]).unwrap();
        let c = build_disk_cover(&line, Metric::euclidean(), 0.3, 2000, 1).unwrap();
        assert!(c.centers().len() >= 2);
        let sq = StateSpace::cube(2, 0.0, 1.0).unwrap();
        let c = build_disk_cover(&sq, Metric::euclidean(), 0.5, 4000, 1).unwrap();
        assert!(c.centers().len() <= 9);
        let ring = StateSpace::torus(vec![(0.0, 1.0)]).unwrap();
        let c = build_disk_cover(&ring, Metric::euclidean(), 0.26, 2000, 1).unwrap();
        assert_eq!(c.centers().len(), 2);
        // Wraparound: 0.0 is 0.25 from the center at 0.75 through 1.0.
        assert!(c.cover().containing(&[0.0]).contains(&CellId(1)));
    }

    #[test]
    fn disk_cover_quadratic_metric() {
        let sq = StateSpace::cube(2, -1.0, 1.0).unwrap();
        let m = Metric::quadratic(DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 2.0])).unwrap();
        let c = build_disk_cover(&sq, m, 0.8, 5000, 2).unwrap();
        // Lexicographic order: the first two centers share the first coordinate.
        assert_eq!(c.centers()[0][0], c.centers()[1][0]);
        assert!(c.centers()[0][1] < c.centers()[1][1]);
    }

    #[test]
    fn explicit_centers_with_gap_fail() {
        let sq = StateSpace::cube(2, 0.0, 1.0).unwrap();
        let r = DiskCover::from_centers(sq, Metric::euclidean(), vec![vec![0.0, 0.0]], vec![0.5], 500, 1);
        assert!(matches!(r, Err(Error::CoverageGap { .. })));
    }

    #[test]
    fn metric_axioms_on_sampled_triples() {
        let sq = StateSpace::cube(2, -1.0, 1.0).unwrap();
        let torus = StateSpace::torus(vec![(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.7, 0.7, 1.0]);
        let cases = [
            (Metric::euclidean(), &sq),
            (Metric::quadratic(q.clone()).unwrap(), &sq),
            (Metric::euclidean().on(&torus), &torus),
            (Metric::quadratic(q).unwrap().on(&torus), &torus),
        ];
        for (m, s) in cases {
            let a = s.sample_uniform(1000, 1);
            let b = s.sample_uniform(1000, 2);
            let c = s.sample_uniform(1000, 3);
            for i in 0..1000 {
                let (ab, ba) = (m.distance(&a[i], &b[i]), m.distance(&b[i], &a[i]));
                assert!(ab >= 0.0 && (ab - ba).abs() < 1e-12);
                assert!(m.distance(&a[i], &a[i]) < 1e-12);
                assert!(m.distance(&a[i], &c[i]) <= ab + m.distance(&b[i], &c[i]) + 1e-12);
            }
        }
        let shifted = Metric::euclidean().on(&torus);
        assert!(shifted.distance(&[-1.0, 0.0], &[1.0, 0.0]) < 1e-12);
    }

    fn radial_setup() -> (DiskCover, VectorField, FlowConfig, ContractionCertificate) {
        let s = unit_square();
        let f = VectorField::builtin(Builtin::RadialContraction { dim: 2 });
        let cfg = FlowConfig::default();
        let spec = FinslerLyapunovSpec::euclidean(2);
        let cert = check_contraction_inequality(&f, &s, &cfg, &spec, AlphaFn::linear(2.0), None, 100, 1e-4, 1).unwrap();
        let disks = build_disk_cover(&s, Metric::euclidean(), 0.4, 4000, 1).unwrap();
        (disks, f, cfg, cert)
    }

    #[test]
    fn phi_at_zero_is_overlapping_disks() {
        let (disks, f, cfg, cert) = radial_setup();
        for z in disks.cover().cells() {
            let phi = compute_phi_ex2(&disks, &f, &cfg, &cert, 0.0, z).unwrap();
            assert!(phi.contains(&z));
            assert_eq!(phi, disks.cells_near(disks.center(z), disks.radius(z)));
        }
    }

    #[test]
    fn phi_at_large_time_is_origin_disks() {
        let (disks, f, cfg, cert) = radial_setup();
        let origin: CellSet = disks.cover().containing(&[0.0, 0.0]).into_iter().collect();
        for z in disks.cover().cells() {
            let phi = compute_phi_ex2(&disks, &f, &cfg, &cert, 12.0, z).unwrap();
            assert_eq!(phi, origin);
        }
        // Oracle: direct simulation of 10^3 points of one disk.
        let z = CellId(0);
        let phi = compute_phi_ex2(&disks, &f, &cfg, &cert, 12.0, z).unwrap();
        let coarse = FlowConfig { step: 1e-2, ..cfg };
        for x in disks.cover().sample_cell(z, 1000, 5).unwrap() {
            let y = dynamics::flow(&f, disks.cover().space(), &coarse, 12.0, &x).unwrap();
            assert!(phi.contains(&disks.cover().abstract_point(&y).unwrap()));
        }
    }

    #[test]
    fn phi_contains_center_image_cell() {
        let (disks, f, cfg, cert) = radial_setup();
        for t in [0.1, 0.7, 3.0] {
            for z in disks.cover().cells() {
                let y = dynamics::flow(&f, disks.cover().space(), &cfg, t, disks.center(z)).unwrap();
                let phi = compute_phi_ex2(&disks, &f, &cfg, &cert, t, z).unwrap();
                assert!(phi.contains(&disks.cover().abstract_point(&y).unwrap()));
            }
        }
    }

    #[test]
    fn failed_certificate_refuses() {
        let (disks, f, cfg, mut cert) = radial_setup();
        cert.verdict = false;
        assert!(matches!(
            compute_phi_ex2(&disks, &f, &cfg, &cert, 1.0, CellId(0)),
            Err(Error::NotContractive { .. })
        ));
    }
}
