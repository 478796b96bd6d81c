//! Vector fields and scalar functions on the state space.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expr::Expr;

pub type RhsFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Analytic systems with known flows, used as oracles throughout the test suites.
#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    /// `x' = A x`.
    LinearStable(DMatrix<f64>),
    /// `x' = y, y' = -x`.
    Rotation,
    /// `theta' = omega, omega' = -sin(theta) - damping * omega`.
    DampedPendulum { damping: f64 },
    /// `x' = -x` in any dimension.
    RadialContraction { dim: usize },
    /// `theta' = -sin(theta)` on the circle.
    Gradient1DCircle,
}

/// Right-hand side of an autonomous ODE, optionally with its Jacobian.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    name: String,
    rhs: RhsFn,
    jacobian: Option<JacobianFn>,
    builtin: Option<Builtin>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("dim", &self.dim)
            .field("name", &self.name)
            .field("analytic_jacobian", &self.jacobian.is_some())
            .finish()
    }
}

impl VectorField {
    pub fn from_fn<F>(dim: usize, name: impl Into<String>, rhs: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            dim,
            name: name.into(),
            rhs: Arc::new(rhs),
            jacobian: None,
            builtin: None,
        }
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jacobian = Some(Arc::new(jac));
        self
    }

    /// `x' = A x`.
    pub fn linear(a: DMatrix<f64>) -> Self {
        assert!(a.is_square(), "linear field needs a square matrix");
        let dim = a.nrows();
        let m = a.clone();
        let jac = a.clone();
        let mut f = Self::from_fn(dim, "linear", move |x, out| {
            for (r, o) in out.iter_mut().enumerate() {
                *o = (0..dim).map(|c| m[(r, c)] * x[c]).sum();
            }
        })
        .with_jacobian(move |_| jac.clone());
        f.builtin = Some(Builtin::LinearStable(a));
        f
    }

    pub fn builtin(b: Builtin) -> Self {
        let mut f = match &b {
            Builtin::LinearStable(a) => return Self::linear(a.clone()),
            Builtin::Rotation => Self::from_fn(2, "rotation", |x, o| {
                o[0] = x[1];
                o[1] = -x[0];
            })
            .with_jacobian(|_| DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])),
            Builtin::DampedPendulum { damping } => {
                let d = *damping;
                Self::from_fn(2, "damped_pendulum", move |x, o| {
                    o[0] = x[1];
                    o[1] = -x[0].sin() - d * x[1];
                })
                .with_jacobian(move |x| DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -x[0].cos(), -d]))
            }
            Builtin::RadialContraction { dim } => {
                let n = *dim;
                Self::from_fn(n, "radial", |x, o| {
                    for (oi, xi) in o.iter_mut().zip(x) {
                        *oi = -xi;
                    }
                })
                .with_jacobian(move |_| -DMatrix::<f64>::identity(n, n))
            }
            Builtin::Gradient1DCircle => Self::from_fn(1, "circle_gradient", |x, o| {
                o[0] = -x[0].sin();
            })
            .with_jacobian(|x| DMatrix::from_element(1, 1, -x[0].cos())),
        };
        f.builtin = Some(b);
        f
    }

    /// Field given by one expression per component, over `x0..`.
    pub fn from_exprs(exprs: Vec<Expr>) -> Result<Self> {
        let dim = exprs.len();
        if dim == 0 {
            return Err(Error::InvalidInput("vector field needs at least one component".into()));
        }
        if let Some(e) = exprs.iter().find(|e| e.arity() > dim) {
            return Err(Error::Expr(format!("{e} references a variable beyond dimension {dim}")));
        }
        let name = exprs
            .iter()
            .map(|e| e.source().to_string())
            .collect::<Vec<_>>()
            .join(", ");
        Ok(Self::from_fn(dim, format!("[{name}]"), move |x, o| {
            for (oi, e) in o.iter_mut().zip(&exprs) {
                *oi = e.eval(x);
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn builtin_kind(&self) -> Option<&Builtin> {
        self.builtin.as_ref()
    }

    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.rhs)(x, out)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out);
        out
    }

    /// Analytic Jacobian when supplied, else central differences with `h = 1e-6 (1 + |x|)`.
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        if let Some(j) = &self.jacobian {
            return j(x);
        }
        let n = self.dim;
        let h = 1e-6 * (1.0 + crate::linalg::norm(x));
        let mut jac = DMatrix::zeros(n, n);
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; n];
        let mut fm = vec![0.0; n];
        for c in 0..n {
            xp[c] = x[c] + h;
            self.eval_into(&xp, &mut fp);
            xp[c] = x[c] - h;
            self.eval_into(&xp, &mut fm);
            xp[c] = x[c];
            for r in 0..n {
                jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        jac
    }

    /// The field `-xi`, whose forward flow is the backward flow of `self`.
    pub fn reversed(&self) -> Self {
        let rhs = self.rhs.clone();
        let jac = self.jacobian.clone();
        Self {
            dim: self.dim,
            name: format!("-({})", self.name),
            rhs: Arc::new(move |x, o| {
                rhs(x, o);
                for v in o.iter_mut() {
                    *v = -*v;
                }
            }),
            jacobian: jac.map(|j| -> JacobianFn { Arc::new(move |x| -j(x)) }),
            builtin: None,
        }
    }
}

/// Scalar function on the state space with an optional analytic gradient.
#[derive(Clone)]
pub struct ScalarField {
    name: String,
    f: ScalarFn,
    grad: Option<GradientFn>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({})", self.name)
    }
}

impl ScalarField {
    pub fn from_fn<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            f: Arc::new(f),
            grad: None,
        }
    }

    pub fn with_gradient<G>(mut self, g: G) -> Self
    where
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.grad = Some(Arc::new(g));
        self
    }

    /// `|x|^2` with its exact gradient.
    pub fn squared_norm() -> Self {
        Self::from_fn("|x|^2", |x| x.iter().map(|c| c * c).sum()).with_gradient(|x| x.iter().map(|c| 2.0 * c).collect())
    }

    pub fn from_expr(expr: Expr, gradient: Option<Vec<Expr>>) -> Self {
        let name = expr.source().to_string();
        let mut s = Self::from_fn(name, move |x| expr.eval(x));
        if let Some(g) = gradient {
            s = s.with_gradient(move |x| g.iter().map(|e| e.eval(x)).collect());
        }
        s
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    /// Analytic gradient when supplied, else central differences.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        if let Some(g) = &self.grad {
            return g(x);
        }
        let h = 1e-6 * (1.0 + crate::linalg::norm(x));
        let mut xp = x.to_vec();
        (0..x.len())
            .map(|i| {
                xp[i] = x[i] + h;
                let fp = self.eval(&xp);
                xp[i] = x[i] - h;
                let fm = self.eval(&xp);
                xp[i] = x[i];
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }
}
