//! Solvers for the four recovery programs.
//!
//! | program | objective | constraints |
//! |---|---|---|
//! | fully penalized | `½‖y−Φx−v‖² + τ₁f(x) + τ₂g(v)` | none |
//! | partially penalized | `f(x) + λg(v)` | `‖y−Φx−v‖ ≤ δ` |
//! | constrained signal | `f(x)` | `g(v) ≤ g(v⋆)`, `‖y−Φx−v‖ ≤ δ` |
//! | constrained corruption | `g(v)` | `f(x) ≤ f(x⋆)`, `‖y−Φx−v‖ ≤ δ` |
//!
//! The penalized program is solved by proximal gradient (FISTA with adaptive restart) on the
//! joint variable; the other three share one linearized ADMM.

mod admm;
mod fista;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{norm2, Matrix};
use crate::model::ProblemInstance;
use crate::regularizer::Regularizer;
use crate::rng::stream_rng;
use crate::scalar::Scalar;

pub use admm::{solve_constrained_corruption, solve_constrained_signal, solve_partially_penalized};
pub use fista::solve_fully_penalized;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    /// Initial ADMM penalty.
    pub rho: f64,
    /// FISTA momentum; off gives the monotone proximal gradient method.
    pub accel: bool,
    /// Residual-balancing updates of `rho`.
    pub adapt_rho: bool,
    /// Power-method iterations for `‖Φ‖`.
    pub power_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 50_000,
            tol_primal: 1e-8,
            tol_dual: 1e-8,
            rho: 1.0,
            accel: true,
            adapt_rho: true,
            power_iters: 100,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("tol_primal", self.tol_primal)?;
        check_positive("tol_dual", self.tol_dual)?;
        check_positive("rho", self.rho)?;
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iters",
                requirement: "at least 1",
                value: 0.0,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SolverResult<T> {
    pub x_hat: Vec<T>,
    pub v_hat: Vec<T>,
    pub iters: usize,
    pub converged: bool,
    pub primal_residual: T,
    pub dual_residual: T,
    /// Program objective at the returned point (indicator terms omitted).
    pub objective: T,
    pub objective_trace: Vec<T>,
}

/// Which program to solve, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "procedure", rename_all = "snake_case")]
pub enum Procedure {
    Full { tau1: f64, tau2: f64 },
    Partial { lambda: f64, delta: f64 },
    ConstrainedF { g_budget: f64, delta: f64 },
    ConstrainedG { f_budget: f64, delta: f64 },
}

impl Procedure {
    pub fn name(&self) -> &'static str {
        match self {
            Procedure::Full { .. } => "full",
            Procedure::Partial { .. } => "partial",
            Procedure::ConstrainedF { .. } => "constrained_f",
            Procedure::ConstrainedG { .. } => "constrained_g",
        }
    }
}

pub fn solve<T: Scalar>(
    inst: &ProblemInstance<T>,
    f: &Regularizer,
    g: &Regularizer,
    procedure: &Procedure,
    cfg: &SolverConfig,
) -> Result<SolverResult<T>> {
    match *procedure {
        Procedure::Full { tau1, tau2 } => {
            solve_fully_penalized(inst, f, g, T::lit(tau1), T::lit(tau2), cfg)
        }
        Procedure::Partial { lambda, delta } => {
            solve_partially_penalized(inst, f, g, T::lit(lambda), T::lit(delta), cfg)
        }
        Procedure::ConstrainedF { g_budget, delta } => {
            solve_constrained_signal(inst, f, g, T::lit(g_budget), T::lit(delta), cfg)
        }
        Procedure::ConstrainedG { f_budget, delta } => {
            solve_constrained_corruption(inst, f, g, T::lit(f_budget), T::lit(delta), cfg)
        }
    }
}

/// The map `(a, b) ↦ Φa + b` with its adjoint `w ↦ (Φᵀw, w)`.
#[derive(Debug, Clone)]
pub struct JointLinearMap<'a, T> {
    phi: &'a Matrix<T>,
    phi_norm: T,
}

impl<'a, T: Scalar> JointLinearMap<'a, T> {
    pub fn new(phi: &'a Matrix<T>, power_iters: usize) -> Result<Self> {
        let phi_norm = power_norm(phi, power_iters.max(10))?;
        Ok(Self { phi, phi_norm })
    }

    pub fn phi(&self) -> &Matrix<T> {
        self.phi
    }

    pub fn n(&self) -> usize {
        self.phi.cols()
    }

    pub fn m(&self) -> usize {
        self.phi.rows()
    }

    /// Cached power-method estimate of `‖Φ‖`.
    pub fn phi_norm(&self) -> T {
        self.phi_norm
    }

    /// Safe upper estimate of `‖[Φ I]‖² = 1 + ‖Φ‖²`.
    pub fn lipschitz(&self) -> T {
        (T::one() + self.phi_norm * self.phi_norm) * T::lit(1.01)
    }

    pub fn apply(&self, a: &[T], b: &[T]) -> Result<Vec<T>> {
        check_len("JointLinearMap::apply (a)", self.n(), a.len())?;
        check_len("JointLinearMap::apply (b)", self.m(), b.len())?;
        let mut out = vec![T::zero(); self.m()];
        self.apply_into(a, b, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_into(&self, a: &[T], b: &[T], out: &mut [T]) {
        self.phi.mul_vec_into(a, out);
        for (o, &bi) in out.iter_mut().zip(b) {
            *o = *o + bi;
        }
    }

    pub fn adjoint(&self, w: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        check_len("JointLinearMap::adjoint", self.m(), w.len())?;
        Ok((self.phi.tr_mul_vec(w)?, w.to_vec()))
    }
}

/// Power-method estimate of `‖Φ‖` from the joint map's matrix.
pub fn operator_norm<T: Scalar>(map: &JointLinearMap<'_, T>, iters: usize) -> Result<T> {
    power_norm(map.phi, iters)
}

fn power_norm<T: Scalar>(phi: &Matrix<T>, iters: usize) -> Result<T> {
    if iters < 10 {
        return Err(Error::InvalidParameter {
            name: "iters",
            requirement: "at least 10",
            value: iters as f64,
        });
    }
    let (m, n) = (phi.rows(), phi.cols());
    let mut rng = stream_rng(0x5eed, 0);
    let mut v: Vec<T> = (0..n).map(|_| T::standard_normal(&mut rng)).collect();
    let mut av = vec![T::zero(); m];
    let mut sigma = T::zero();
    for _ in 0..iters {
        let nv = norm2(&v);
        if nv == T::zero() {
            return Ok(T::zero());
        }
        v.iter_mut().for_each(|x| *x = *x / nv);
        phi.mul_vec_into(&v, &mut av);
        let next = norm2(&av);
        phi.tr_mul_vec_into(&av, &mut v);
        let done = (next - sigma).abs() <= T::lit(1e-13) * next;
        sigma = next;
        if done {
            break;
        }
    }
    Ok(sigma)
}

fn check_positive<T: Scalar>(name: &'static str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            requirement: "positive",
            value: v.as_f64(),
        })
    }
}

fn check_nonneg<T: Scalar>(name: &'static str, v: T) -> Result<()> {
    if v >= T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            requirement: "nonnegative",
            value: v.as_f64(),
        })
    }
}

fn check_dims<T>(inst: &ProblemInstance<T>, f: &Regularizer, g: &Regularizer) -> Result<()> {
    check_len("signal regularizer", inst.n, f.dim)?;
    check_len("corruption regularizer", inst.m, g.dim)
}
