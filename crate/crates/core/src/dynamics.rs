//! Numerical flow maps: fixed-step RK4, linear flows, variational dynamics
//! and level-crossing detection.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::geometry::StateSpace;
use crate::linalg;

/// Default RK4 step in time units.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Integration settings. The only method is classical fixed-step RK4.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub step: f64,
    pub t_max: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            t_max: 10.0,
        }
    }
}

impl FlowConfig {
    pub fn new(step: f64, t_max: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidInput(format!("step must be positive, got {step}")));
        }
        if !(t_max >= step && t_max.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "need step <= t_max, got step {step}, t_max {t_max}"
            )));
        }
        Ok(Self { step, t_max })
    }
}

/// Reusable RK4 stage buffers.
struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    fn step(&mut self, f: &dyn Fn(&[f64], &mut [f64]), x: &mut [f64], h: f64) {
        f(x, &mut self.k1);
        axpy(&mut self.tmp, x, 0.5 * h, &self.k1);
        f(&self.tmp, &mut self.k2);
        axpy(&mut self.tmp, x, 0.5 * h, &self.k2);
        f(&self.tmp, &mut self.k3);
        axpy(&mut self.tmp, x, h, &self.k3);
        f(&self.tmp, &mut self.k4);
        let ks = self.k1.iter().zip(&self.k2).zip(&self.k3).zip(&self.k4);
        for (xi, (((a, b), c), d)) in x.iter_mut().zip(ks) {
            *xi += h / 6.0 * (a + 2.0 * b + 2.0 * c + d);
        }
    }
}

/// `out = x + a k`.
fn axpy(out: &mut [f64], x: &[f64], a: f64, k: &[f64]) {
    for ((o, xi), ki) in out.iter_mut().zip(x).zip(k) {
        *o = xi + a * ki;
    }
}

fn escape_tol(space: &StateSpace) -> f64 {
    1e-9 * space.diameter().max(1.0)
}

/// Post-step bookkeeping: canonicalize on tori, detect leaving a box.
fn settle(space: &StateSpace, x: &mut [f64], t: f64) -> Result<()> {
    if x.iter().any(|c| !c.is_finite()) {
        return Err(Error::Divergence { t, point: x.to_vec() });
    }
    let pos = &mut x[..space.dim()];
    space.canonicalize(pos);
    if !space.contains_with_tol(pos, escape_tol(space)) {
        return Err(Error::Divergence { t, point: pos.to_vec() });
    }
    Ok(())
}

/// Advance `x` from time `t0` by `duration >= 0` in steps of `cfg.step`,
/// shortening the last step to land exactly.
fn advance(
    f: &dyn Fn(&[f64], &mut [f64]),
    space: &StateSpace,
    cfg: &FlowConfig,
    rk: &mut Rk4,
    x: &mut [f64],
    t0: f64,
    duration: f64,
) -> Result<()> {
    let full = (duration / cfg.step).floor();
    let n = full as u64;
    let rem = duration - full * cfg.step;
    for k in 0..n {
        rk.step(f, x, cfg.step);
        settle(space, x, t0 + (k + 1) as f64 * cfg.step)?;
    }
    if rem > 1e-12 * cfg.step {
        rk.step(f, x, rem);
        settle(space, x, t0 + duration)?;
    }
    Ok(())
}

fn oriented(field: &VectorField, backward: bool) -> VectorField {
    if backward {
        field.reversed()
    } else {
        field.clone()
    }
}

/// `phi(t, x)`. Negative `t` integrates the reversed field.
pub fn flow(field: &VectorField, space: &StateSpace, cfg: &FlowConfig, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(field, x)?;
    let f = oriented(field, t < 0.0);
    let mut y = space.canonical(x);
    let mut rk = Rk4::new(y.len());
    advance(&|p, o| f.eval_into(p, o), space, cfg, &mut rk, &mut y, 0.0, t.abs())?;
    Ok(y)
}

/// `phi(t_k, x)` for an increasing list of nonnegative times, in one sweep.
pub fn flow_at_times(
    field: &VectorField,
    space: &StateSpace,
    cfg: &FlowConfig,
    x: &[f64],
    times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    check_dim(field, x)?;
    let mut y = space.canonical(x);
    let mut rk = Rk4::new(y.len());
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        if target < t {
            return Err(Error::InvalidInput(
                "flow_at_times needs nondecreasing times >= 0".into(),
            ));
        }
        advance(
            &|p, o| field.eval_into(p, o),
            space,
            cfg,
            &mut rk,
            &mut y,
            t,
            target - t,
        )?;
        t = target;
        out.push(y.clone());
    }
    Ok(out)
}

/// States at every integration step up to `t_end` (inclusive), as `(t, x)`.
pub fn trajectory(
    field: &VectorField,
    space: &StateSpace,
    cfg: &FlowConfig,
    x: &[f64],
    t_end: f64,
) -> Result<Vec<(f64, Vec<f64>)>> {
    check_dim(field, x)?;
    let f = oriented(field, t_end < 0.0);
    let sign = if t_end < 0.0 { -1.0 } else { 1.0 };
    let mut y = space.canonical(x);
    let mut rk = Rk4::new(y.len());
    let mut out = vec![(0.0, y.clone())];
    let mut t = 0.0;
    let horizon = t_end.abs();
    while t < horizon {
        let h = cfg.step.min(horizon - t);
        if h <= 1e-12 * cfg.step {
            break;
        }
        rk.step(&|p, o| f.eval_into(p, o), &mut y, h);
        t += h;
        settle(space, &mut y, sign * t)?;
        out.push((sign * t, y.clone()));
    }
    Ok(out)
}

/// `exp(t A) x`.
pub fn linear_flow(a: &DMatrix<f64>, t: f64, x: &[f64]) -> Vec<f64> {
    assert!(a.is_square() && a.nrows() == x.len(), "linear_flow: dimension mismatch");
    if t == 0.0 {
        return x.to_vec();
    }
    linalg::mat_vec(&linalg::expm(&(a * t)), x)
}

/// Joint integration of `x' = xi(x)` and `w' = D xi(x) w`; returns `(phi(t,x), w(t))`.
pub fn variational_flow(
    field: &VectorField,
    space: &StateSpace,
    cfg: &FlowConfig,
    t: f64,
    x: &[f64],
    w: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_dim(field, x)?;
    if w.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: w.len(),
        });
    }
    if linalg::norm(w) == 0.0 {
        return Err(Error::InvalidInput(
            "variational_flow needs a nonzero perturbation".into(),
        ));
    }
    let n = x.len();
    let f = oriented(field, t < 0.0);
    let aug = |s: &[f64], o: &mut [f64]| {
        let (p, v) = s.split_at(n);
        f.eval_into(p, &mut o[..n]);
        let j = f.jacobian(p);
        for r in 0..n {
            o[n + r] = (0..n).map(|c| j[(r, c)] * v[c]).sum();
        }
    };
    let mut s: Vec<f64> = space.canonical(x).into_iter().chain(w.iter().copied()).collect();
    let mut rk = Rk4::new(2 * n);
    advance(&aug, space, cfg, &mut rk, &mut s, 0.0, t.abs())?;
    let v = s.split_off(n);
    Ok((s, v))
}

/// Least `t` in `[0, t_max]` with `g(phi(t, x)) = level`.
///
/// Scans for a sign change of `g - level` at integration steps, then bisects
/// inside the bracketing step (re-integrating a shortened RK4 step) down to
/// `1e-9 * t_max`. `None` when no crossing happens within `t_max`.
pub fn first_crossing_time(
    field: &VectorField,
    space: &StateSpace,
    cfg: &FlowConfig,
    x: &[f64],
    g: &dyn Fn(&[f64]) -> f64,
    level: f64,
    t_max: f64,
) -> Result<Option<f64>> {
    check_dim(field, x)?;
    let mut y = space.canonical(x);
    let s0 = g(&y) - level;
    if s0.abs() <= 1e-12 * (1.0 + level.abs()) {
        return Ok(Some(0.0));
    }
    let f = |p: &[f64], o: &mut [f64]| field.eval_into(p, o);
    let mut rk = Rk4::new(y.len());
    let tol = 1e-9 * t_max;
    let mut t = 0.0;
    let mut s_prev = s0;
    while t < t_max {
        let h = cfg.step.min(t_max - t);
        let start = y.clone();
        rk.step(&f, &mut y, h);
        settle(space, &mut y, t + h)?;
        let s = g(&y) - level;
        if s == 0.0 || s.signum() != s_prev.signum() {
            let (mut lo, mut hi) = (0.0, h);
            let mut probe = start.clone();
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                probe.copy_from_slice(&start);
                rk.step(&f, &mut probe, mid);
                space.canonicalize(&mut probe);
                let sm = g(&probe) - level;
                if sm == 0.0 || sm.signum() != s_prev.signum() {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Some(t + hi));
        }
        s_prev = s;
        t += h;
        if h < cfg.step {
            break;
        }
    }
    Ok(None)
}

fn check_dim(field: &VectorField, x: &[f64]) -> Result<()> {
    if field.dim() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: field.dim(),
            got: x.len(),
        });
    }
    Ok(())
}
