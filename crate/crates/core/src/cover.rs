//! Ordered-cover abstraction with images through a family of linear fields.
//!
//! The vector field is assumed to lie in `pol L(x) = { sum a_i L_i x : a_i >= 0, sum a_i^2 = 1 }`.
//! The image of a cell is then approximated by flowing cell samples under each
//! linear field exactly (`exp(t L_i)`), combining the results with sampled
//! coefficients, bloating, and abstracting every resulting point.

use nalgebra::{DMatrix, DVector};

use crate::abstraction::{DiscreteSystem, Soundness};
use crate::dynamics;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::geometry::{CellId, CellSet, OrderedCover, Region, StateSpace};
use crate::linalg;
use crate::par;
use crate::rng::{self, CounterRng};

/// Linear fields `L_1 .. L_l` sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFamily {
    matrices: Vec<DMatrix<f64>>,
}

impl LinearFamily {
    pub fn new(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = matrices.first() else {
            return Err(Error::InvalidInput("linear family needs at least one matrix".into()));
        };
        let n = first.nrows();
        if matrices.iter().any(|m| m.nrows() != n || m.ncols() != n) {
            return Err(Error::InvalidInput(
                "family matrices must be square and share a dimension".into(),
            ));
        }
        Ok(Self { matrices })
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    /// Largest induced 2-norm over the family.
    pub fn max_norm(&self) -> f64 {
        self.matrices.iter().map(linalg::spectral_norm).fold(0.0, f64::max)
    }
}

/// Normalization of the combination coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaNorm {
    /// `a >= 0, sum a_i^2 = 1`.
    #[default]
    Sphere,
    /// `a >= 0, sum a_i = 1` (convex hull).
    Simplex,
}

/// Nonnegative coefficients normalized per [`AlphaNorm`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolCoefficients(Vec<f64>);

impl PolCoefficients {
    pub fn new(alphas: Vec<f64>, norm: AlphaNorm) -> Result<Self> {
        if alphas.iter().any(|&a| a < 0.0 || !a.is_finite()) {
            return Err(Error::InvalidInput(
                "coefficients must be finite and nonnegative".into(),
            ));
        }
        let s = match norm {
            AlphaNorm::Sphere => alphas.iter().map(|a| a * a).sum::<f64>(),
            AlphaNorm::Simplex => alphas.iter().sum::<f64>(),
        };
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("coefficients not normalized (got {s})")));
        }
        Ok(Self(alphas))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn combine(&self, vectors: &[Vec<f64>]) -> Vec<f64> {
        let dim = vectors[0].len();
        let mut out = vec![0.0; dim];
        for (a, v) in self.0.iter().zip(vectors) {
            for (o, c) in out.iter_mut().zip(v) {
                *o += a * c;
            }
        }
        out
    }
}

/// The `l` vertices `e_i` followed by `n` random draws.
///
/// Sphere draws are `|g| / ||g||_2` for a Gaussian vector `g`; simplex draws
/// normalize exponential variates.
pub fn sample_alphas(l: usize, n: usize, seed: u64, norm: AlphaNorm) -> Vec<PolCoefficients> {
    let mut r = CounterRng::new(seed);
    let mut out: Vec<PolCoefficients> = (0..l)
        .map(|i| {
            let mut e = vec![0.0; l];
            e[i] = 1.0;
            PolCoefficients(e)
        })
        .collect();
    for _ in 0..n {
        let raw: Vec<f64> = match norm {
            AlphaNorm::Sphere => (0..l).map(|_| r.normal().abs()).collect(),
            AlphaNorm::Simplex => (0..l).map(|_| -(1.0 - r.next_f64()).ln()).collect(),
        };
        let s = match norm {
            AlphaNorm::Sphere => raw.iter().map(|a| a * a).sum::<f64>().sqrt(),
            AlphaNorm::Simplex => raw.iter().sum::<f64>(),
        };
        if s > 0.0 {
            out.push(PolCoefficients(raw.into_iter().map(|a| a / s).collect()));
        } else {
            out.push(out[0].clone());
        }
    }
    out
}

/// Points of `pol{v_1 .. v_l}`: the `l` vertices plus `n` sampled combinations.
pub fn pol_sample(vectors: &[Vec<f64>], n: usize, seed: u64, norm: AlphaNorm) -> Vec<Vec<f64>> {
    sample_alphas(vectors.len(), n, seed, norm)
        .iter()
        .map(|a| a.combine(vectors))
        .collect()
}

/// Nonnegative least squares `min_{a >= 0} |A a - b|` by the Lawson-Hanson active-set method.
pub fn nnls(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let (m, l) = a.shape();
    assert_eq!(m, b.len(), "nnls: row mismatch");
    let bv = DVector::from_column_slice(b);
    let scale = a.amax().max(bv.amax()).max(1.0);
    let tol = 1e-12 * scale * scale * (m.max(l) as f64);
    let mut x = DVector::<f64>::zeros(l);
    let mut passive = vec![false; l];
    let gradient = |x: &DVector<f64>| a.transpose() * (&bv - a * x);
    let mut w = gradient(&x);
    for _ in 0..(3 * l + 10) {
        let candidate = (0..l)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..l).filter(|&i| passive[i]).collect();
            let sub = DMatrix::from_fn(m, idx.len(), |r, c| a[(r, idx[c])]);
            let sol = sub
                .svd(true, true)
                .solve(&bv, 1e-14)
                .unwrap_or_else(|_| DVector::zeros(idx.len()));
            let mut s = DVector::<f64>::zeros(l);
            for (k, &i) in idx.iter().enumerate() {
                s[i] = sol[k];
            }
            if idx.iter().all(|&i| s[i] > 0.0) {
                x = s;
                break;
            }
            let step = idx
                .iter()
                .filter(|&&i| s[i] <= 0.0)
                .map(|&i| x[i] / (x[i] - s[i]))
                .fold(f64::INFINITY, f64::min);
            x += (&s - &x) * step;
            for &i in &idx {
                if x[i] <= 1e-14 {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
        w = gradient(&x);
    }
    x.as_slice().to_vec()
}

#[derive(Debug, Clone, PartialEq)]
pub struct InclusionReport {
    pub holds: bool,
    pub checked: usize,
    pub worst_residual: f64,
    pub worst_point: Option<Vec<f64>>,
}

/// Residual of representing `xi` by sphere-normalized combinations of `L_i x`.
///
/// Solves the NNLS problem, rescales the minimizer onto `sum a^2 = 1` and
/// returns the remaining misfit. A zero minimizer falls back to the best vertex.
pub fn inclusion_residual(fam: &LinearFamily, x: &[f64], xi: &[f64]) -> f64 {
    let cols: Vec<Vec<f64>> = fam.matrices().iter().map(|m| linalg::mat_vec(m, x)).collect();
    let a = DMatrix::from_fn(x.len(), cols.len(), |r, c| cols[c][r]);
    let alpha = nnls(&a, xi);
    let norm = linalg::norm(&alpha);
    let misfit = |coef: &[f64]| {
        let p = PolCoefficients(coef.to_vec()).combine(&cols);
        linalg::dist(&p, xi)
    };
    if norm > 1e-300 {
        let unit: Vec<f64> = alpha.iter().map(|v| v / norm).collect();
        misfit(&unit)
    } else {
        (0..cols.len())
            .map(|i| {
                let mut e = vec![0.0; cols.len()];
                e[i] = 1.0;
                misfit(&e)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Checks `xi(x) ∈ pol L(x)` on `n_points` quasi-uniform points with
/// residual tolerance `tol * (1 + |xi(x)|)`.
pub fn check_inclusion(
    field: &VectorField,
    space: &StateSpace,
    fam: &LinearFamily,
    n_points: usize,
    tol: f64,
    seed: u64,
) -> Result<InclusionReport> {
    if field.dim() != fam.dim() || space.dim() != fam.dim() {
        return Err(Error::DimensionMismatch {
            expected: fam.dim(),
            got: field.dim(),
        });
    }
    let pts = space.quasi_uniform(n_points, seed);
    let res = par::map_slice(&pts, |x| {
        let xi = field.eval(x);
        let r = inclusion_residual(fam, x, &xi);
        (r, r <= tol * (1.0 + linalg::norm(&xi)))
    });
    let worst = res.iter().enumerate().max_by(|a, b| a.1 .0.total_cmp(&b.1 .0));
    Ok(InclusionReport {
        holds: res.iter().all(|r| r.1),
        checked: n_points,
        worst_residual: worst.map_or(0.0, |w| w.1 .0),
        worst_point: worst.map(|w| pts[w.0].clone()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ex1Options {
    pub vertex_samples: usize,
    pub alpha_samples: usize,
    /// Radius of the ball added around each image point; `None` uses [`default_bloat`].
    pub bloat: Option<f64>,
    pub ball_samples: usize,
    pub alpha_norm: AlphaNorm,
    /// Integrator step the default bloat is scaled from.
    pub step: f64,
}

impl Default for Ex1Options {
    fn default() -> Self {
        Self {
            vertex_samples: 64,
            alpha_samples: 16,
            bloat: None,
            ball_samples: 4,
            alpha_norm: AlphaNorm::Sphere,
            step: dynamics::DEFAULT_STEP,
        }
    }
}

/// `2 h^2 max_i |L_i| t`.
pub fn default_bloat(fam: &LinearFamily, step: f64, t: f64) -> f64 {
    2.0 * step * step * fam.max_norm() * t
}

/// Image of cell `z` after time `t` through the linear family.
///
/// Cell samples (plus rectangle corners lying in `[z]`) are mapped by each `exp(t L_i)`,
/// combined with sampled coefficients, bloated, clamped into the state space
/// and abstracted.
pub fn compute_phi_ex1(
    cover: &OrderedCover,
    fam: &LinearFamily,
    t: f64,
    z: CellId,
    opts: &Ex1Options,
    seed: u64,
) -> Result<CellSet> {
    if t < 0.0 {
        return Err(Error::InvalidInput("compute_phi_ex1 needs t >= 0".into()));
    }
    let space = cover.space();
    // Corners pulled just inside the rectangle; a shared corner otherwise abstracts to a lower index.
    let mut starts: Vec<Vec<f64>> = match cover.region(z) {
        Region::HyperRect(b) => cover
            .region(z)
            .corners()
            .unwrap_or_default()
            .into_iter()
            .map(|c| {
                c.iter()
                    .zip(b)
                    .map(|(&x, &(lo, hi))| x + (0.5 * (lo + hi) - x) * 1e-9)
                    .collect::<Vec<f64>>()
            })
            .filter(|c| cover.abstract_point(c).is_ok_and(|w| w == z))
            .collect(),
        _ => Vec::new(),
    };
    starts.extend(cover.sample_cell(z, opts.vertex_samples, rng::derive_seed(seed, 1))?);
    let flows: Vec<DMatrix<f64>> = fam.matrices().iter().map(|m| linalg::expm(&(m * t))).collect();
    let alphas = sample_alphas(
        fam.len(),
        opts.alpha_samples,
        rng::derive_seed(seed, 2),
        opts.alpha_norm,
    );
    let bloat = opts.bloat.unwrap_or_else(|| default_bloat(fam, opts.step, t));
    let dim = space.dim();
    let mut ball = CounterRng::new(rng::derive_seed(seed, 3));
    let mut offsets: Vec<Vec<f64>> = Vec::new();
    if bloat > 0.0 {
        for d in 0..dim {
            for s in [-bloat, bloat] {
                let mut e = vec![0.0; dim];
                e[d] = s;
                offsets.push(e);
            }
        }
        if dim > 1 {
            let diag = bloat / (dim as f64).sqrt();
            for mask in 0..1usize << dim {
                offsets.push(
                    (0..dim)
                        .map(|d| if mask >> d & 1 == 1 { diag } else { -diag })
                        .collect(),
                );
            }
        }
        for _ in 0..opts.ball_samples {
            offsets.push(ball.in_unit_ball(dim).into_iter().map(|c| c * bloat).collect());
        }
    }
    let mut out = CellSet::new();
    for x in &starts {
        let images: Vec<Vec<f64>> = flows.iter().map(|e| linalg::mat_vec(e, x)).collect();
        for a in &alphas {
            let p = a.combine(&images);
            out.insert(cover.abstract_point(&space.clamp(&p))?);
            for off in &offsets {
                let q: Vec<f64> = p.iter().zip(off).map(|(c, o)| c + o).collect();
                out.insert(cover.abstract_point(&space.clamp(&q))?);
            }
        }
    }
    Ok(out)
}

/// Discrete system over the cover. Tagged over-approximating when `inclusion_verified`.
pub fn build_ex1_system(
    cover: OrderedCover,
    fam: LinearFamily,
    opts: Ex1Options,
    time_grid: Vec<f64>,
    seed: u64,
    inclusion_verified: bool,
) -> DiscreteSystem {
    let n = cover.len();
    let d = DiscreteSystem::new(n, time_grid, move |t, z| {
        compute_phi_ex1(
            &cover,
            &fam,
            t,
            z,
            &opts,
            rng::derive_seed2(seed, t.to_bits(), z.0 as u64),
        )
    });
    d.with_soundness(if inclusion_verified {
        Soundness::Over
    } else {
        Soundness::Unknown
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Builtin;
    use crate::geometry::grid_partition;

    fn quadrant_cover() -> OrderedCover {
        let s = StateSpace::cube(2, -1.0, 1.0).unwrap();
        let r = grid_partition(&s, &[2, 2]);
        OrderedCover::build(s, r, 1000, 1).unwrap()
    }

    #[test]
    fn phi_at_zero_is_the_cell_itself() {
        let c = quadrant_cover();
        let fam = LinearFamily::new(vec![-DMatrix::<f64>::identity(2, 2)]).unwrap();
        for z in c.cells() {
            let s = compute_phi_ex1(&c, &fam, 0.0, z, &Ex1Options::default(), 1).unwrap();
            assert_eq!(s, [z].into_iter().collect());
        }
    }

    #[test]
    fn family_validation() {
        assert!(LinearFamily::new(vec![]).is_err());
        assert!(LinearFamily::new(vec![DMatrix::identity(2, 2), DMatrix::identity(3, 3)]).is_err());
        assert!(PolCoefficients::new(vec![0.6, 0.8], AlphaNorm::Sphere).is_ok());
        assert!(PolCoefficients::new(vec![0.5, 0.5], AlphaNorm::Sphere).is_err());
        assert!(PolCoefficients::new(vec![-0.6, 0.8], AlphaNorm::Sphere).is_err());
    }

    #[test]
    fn pol_of_unit_vectors_is_quarter_circle() {
        let v = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        for p in pol_sample(&v, 200, 3, AlphaNorm::Sphere) {
            assert!((linalg::norm(&p) - 1.0).abs() < 1e-12);
            assert!(p[0] >= 0.0 && p[1] >= 0.0);
        }
    }

    #[test]
    fn pol_of_single_vector_is_the_vector() {
        let v = vec![vec![0.3, -2.0]];
        assert!(pol_sample(&v, 20, 1, AlphaNorm::Sphere).iter().all(|p| p == &v[0]));
    }

    #[test]
    fn pol_of_repeated_vector_scales_between_one_and_sqrt2() {
        // Oracle: maximize/minimize a1 + a2 over a dense grid of the quarter circle.
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for k in 0..=10_000 {
            let th = std::f64::consts::FRAC_PI_2 * k as f64 / 10_000.0;
            let s = th.cos() + th.sin();
            lo = lo.min(s);
            hi = hi.max(s);
        }
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 2f64.sqrt()).abs() < 1e-7);
        let v = vec![vec![2.0, 1.0], vec![2.0, 1.0]];
        for p in pol_sample(&v, 500, 9, AlphaNorm::Sphere) {
            let lambda = p[0] / 2.0;
            assert!((p[1] - lambda).abs() < 1e-12);
            assert!(lambda >= lo - 1e-12 && lambda <= hi + 1e-12);
        }
    }

    #[test]
    fn sampled_alphas_satisfy_constraints() {
        for a in sample_alphas(4, 300, 17, AlphaNorm::Sphere) {
            let s: f64 = a.as_slice().iter().map(|v| v * v).sum();
            assert!(a.as_slice().iter().all(|&v| v >= -1e-12));
            assert!((s - 1.0).abs() <= 1e-9);
        }
        for a in sample_alphas(3, 100, 17, AlphaNorm::Simplex) {
            assert!((a.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn nnls_matches_brute_force() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, 0.2, 1.0, -0.3, 0.4]);
        let b = [0.7, -0.4, 1.1];
        let x = nnls(&a, &b);
        let f = |p: &[f64]| {
            let r = &a * DVector::from_column_slice(p) - DVector::from_column_slice(&b);
            r.norm_squared()
        };
        let mut best = f64::INFINITY;
        for i in 0..=400 {
            for j in 0..=400 {
                best = best.min(f(&[i as f64 * 0.01, j as f64 * 0.01]));
            }
        }
        assert!(x.iter().all(|&v| v >= 0.0));
        assert!(f(&x) <= best + 1e-9);
    }

    #[test]
    fn inclusion_examples() {
        let s = StateSpace::cube(2, -1.0, 1.0).unwrap();
        let contract = VectorField::builtin(Builtin::RadialContraction { dim: 2 });
        let neg = LinearFamily::new(vec![-DMatrix::<f64>::identity(2, 2)]).unwrap();
        let r = check_inclusion(&contract, &s, &neg, 500, 1e-9, 1).unwrap();
        assert!(r.holds && r.worst_residual < 1e-12);
        let pos = LinearFamily::new(vec![DMatrix::<f64>::identity(2, 2)]).unwrap();
        assert!(!check_inclusion(&contract, &s, &pos, 500, 1e-9, 1).unwrap().holds);
        let rot = VectorField::builtin(Builtin::Rotation);
        let fam = LinearFamily::new(vec![
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            -DMatrix::<f64>::identity(2, 2) * 0.1,
        ])
        .unwrap();
        assert!(check_inclusion(&rot, &s, &fam, 500, 1e-9, 1).unwrap().holds);
    }

    #[test]
    fn inclusion_residual_oracle_for_rotation() {
        // Oracle: minimize the misfit over a dense grid of the nonnegative quarter circle.
        let fam = LinearFamily::new(vec![
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            -DMatrix::<f64>::identity(2, 2) * 0.1,
        ])
        .unwrap();
        let x = [0.4, -0.7];
        let xi = [x[1], -x[0]];
        let cols: Vec<Vec<f64>> = fam.matrices().iter().map(|m| linalg::mat_vec(m, &x)).collect();
        let mut best = f64::INFINITY;
        for k in 0..=20_000 {
            let th = std::f64::consts::FRAC_PI_2 * k as f64 / 20_000.0;
            let p = PolCoefficients(vec![th.cos(), th.sin()]).combine(&cols);
            best = best.min(linalg::dist(&p, &xi));
        }
        assert!(best < 1e-12);
        assert!(inclusion_residual(&fam, &x, &xi) < 1e-12);
    }

    #[test]
    fn phi_at_zero_contains_cell() {
        let c = quadrant_cover();
        let fam = LinearFamily::new(vec![-DMatrix::<f64>::identity(2, 2)]).unwrap();
        for z in c.cells() {
            assert!(compute_phi_ex1(&c, &fam, 0.0, z, &Ex1Options::default(), 5)
                .unwrap()
                .contains(&z));
        }
    }

    #[test]
    fn contraction_keeps_quadrants() {
        // e^{-t}[z] stays in its closed quadrant; shared edges resolve to lower indices.
        let c = quadrant_cover();
        let fam = LinearFamily::new(vec![-DMatrix::<f64>::identity(2, 2)]).unwrap();
        let opts = Ex1Options {
            bloat: Some(0.0),
            ..Default::default()
        };
        for z in c.cells() {
            let phi = compute_phi_ex1(&c, &fam, 8.0, z, &opts, 5).unwrap();
            assert!(phi.contains(&z));
            assert!(phi.iter().all(|w| *w <= z));
        }
    }

    #[test]
    fn contraction_reaches_origin_cells_on_fine_grid() {
        // 4x4 grid on [-1,1]^2: an outer corner cell contracts toward the origin.
        let s = StateSpace::cube(2, -1.0, 1.0).unwrap();
        let c = OrderedCover::build(s.clone(), grid_partition(&s, &[4, 4]), 1000, 1).unwrap();
        let fam = LinearFamily::new(vec![-DMatrix::<f64>::identity(2, 2)]).unwrap();
        let opts = Ex1Options {
            bloat: Some(0.0),
            ..Default::default()
        };
        let outer = c.abstract_point(&[0.9, 0.9]).unwrap();
        let inner = c.abstract_point(&[0.1, 0.1]).unwrap();
        let phi = compute_phi_ex1(&c, &fam, 5.0, outer, &opts, 2).unwrap();
        assert_eq!(phi, [inner].into_iter().collect());
        // Oracle: direct image sampling.
        let direct: CellSet = c
            .sample_cell(outer, 500, 4)
            .unwrap()
            .iter()
            .map(|x| {
                c.abstract_point(&dynamics::linear_flow(&fam.matrices()[0], 5.0, x))
                    .unwrap()
            })
            .collect();
        assert_eq!(direct, phi);
    }

    #[test]
    fn single_matrix_equals_direct_image() {
        let c = quadrant_cover();
        let a = DMatrix::from_row_slice(2, 2, &[-0.5, 0.3, -0.2, -0.4]);
        let fam = LinearFamily::new(vec![a.clone()]).unwrap();
        let opts = Ex1Options {
            bloat: Some(0.0),
            vertex_samples: 200,
            ..Default::default()
        };
        let z = CellId(3);
        let phi = compute_phi_ex1(&c, &fam, 1.0, z, &opts, 7).unwrap();
        // Corners of the upper-right quadrant, just inside it.
        let (e, f) = (0.5e-9, 1.0 - 0.5e-9);
        let mut direct: CellSet = [[e, e], [e, f], [f, e], [f, f]]
            .iter()
            .map(|x| {
                c.abstract_point(&c.space().clamp(&dynamics::linear_flow(&a, 1.0, x)))
                    .unwrap()
            })
            .collect();
        for x in c.sample_cell(z, 200, rng::derive_seed(7, 1)).unwrap() {
            direct.insert(
                c.abstract_point(&c.space().clamp(&dynamics::linear_flow(&a, 1.0, &x)))
                    .unwrap(),
            );
        }
        assert_eq!(phi, direct);
    }

    #[test]
    fn bloat_is_monotone() {
        let c = quadrant_cover();
        let fam = LinearFamily::new(vec![DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, -0.5, -1.0])]).unwrap();
        let z = CellId(1);
        let mut prev = CellSet::new();
        for b in [0.0, 0.05, 0.2, 0.8] {
            let opts = Ex1Options {
                bloat: Some(b),
                ..Default::default()
            };
            let phi = compute_phi_ex1(&c, &fam, 0.5, z, &opts, 3).unwrap();
            assert!(prev.is_subset(&phi));
            prev = phi;
        }
    }

    #[test]
    fn corner_images_bound_interior_images() {
        // exp(tL) is linear, so the image of a rectangle is the parallelogram spanned by its corners.
        let a = DMatrix::from_row_slice(2, 2, &[-0.3, 1.0, -0.8, -0.2]);
        let e = linalg::expm(&(&a * 1.3));
        let rect = crate::geometry::Region::rect(vec![(0.1, 0.7), (-0.4, 0.2)]);
        let corners: Vec<Vec<f64>> = rect.corners().unwrap().iter().map(|x| linalg::mat_vec(&e, x)).collect();
        // Binary-counter corner order: 0=(lo,lo), 1=(hi,lo), 3=(hi,hi), 2=(lo,hi) walks the boundary.
        let poly = [&corners[0], &corners[1], &corners[3], &corners[2]];
        let cross = |o: &[f64], a: &[f64], b: &[f64]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
        let s = StateSpace::cube(2, -1.0, 1.0).unwrap();
        for x in rect.sample(&s, 500, 3, 0).unwrap() {
            let p = linalg::mat_vec(&e, &x);
            let signs: Vec<f64> = (0..4).map(|k| cross(poly[k], poly[(k + 1) % 4], &p)).collect();
            assert!(signs.iter().all(|&v| v >= -1e-12) || signs.iter().all(|&v| v <= 1e-12));
        }
    }
}
