use crate::error::{Error, Result};
use crate::linalg::{norm2, norm2_sq};
use crate::model::ProblemInstance;
use crate::regularizer::Regularizer;
use crate::scalar::Scalar;

use super::{check_dims, check_nonneg, check_positive, JointLinearMap, SolverConfig, SolverResult};

/// How one variable block enters the program.
#[derive(Debug, Clone, Copy)]
enum Term<T> {
    /// `weight · reg(·)` in the objective.
    Penalty(T),
    /// `reg(·) ≤ radius` as a constraint.
    Ball(T),
}

impl<T: Scalar> Term<T> {
    fn step(&self, reg: &Regularizer, w: &[T], scale: T, out: &mut [T]) {
        match *self {
            Term::Penalty(weight) => reg.prox_into(w, weight * scale, out),
            Term::Ball(radius) => reg.project_ball_into(w, radius, out),
        }
    }

    fn value(&self, reg: &Regularizer, w: &[T]) -> T {
        match *self {
            Term::Penalty(weight) => weight * reg.value_unchecked(w),
            Term::Ball(_) => T::zero(),
        }
    }
}

/// Minimize `f(x) + λ·g(v)` subject to `‖y − Φx − v‖₂ ≤ δ`.
pub fn solve_partially_penalized<T: Scalar>(
    inst: &ProblemInstance<T>,
    f: &Regularizer,
    g: &Regularizer,
    lambda: T,
    delta: T,
    cfg: &SolverConfig,
) -> Result<SolverResult<T>> {
    check_positive("lambda", lambda)?;
    linearized_admm(
        inst,
        f,
        g,
        Term::Penalty(T::one()),
        Term::Penalty(lambda),
        delta,
        cfg,
    )
}

/// Minimize `f(x)` subject to `g(v) ≤ g_budget` and `‖y − Φx − v‖₂ ≤ δ`.
pub fn solve_constrained_signal<T: Scalar>(
    inst: &ProblemInstance<T>,
    f: &Regularizer,
    g: &Regularizer,
    g_budget: T,
    delta: T,
    cfg: &SolverConfig,
) -> Result<SolverResult<T>> {
    check_nonneg("g_budget", g_budget)?;
    linearized_admm(
        inst,
        f,
        g,
        Term::Penalty(T::one()),
        Term::Ball(g_budget),
        delta,
        cfg,
    )
}

/// Minimize `g(v)` subject to `f(x) ≤ f_budget` and `‖y − Φx − v‖₂ ≤ δ`.
pub fn solve_constrained_corruption<T: Scalar>(
    inst: &ProblemInstance<T>,
    f: &Regularizer,
    g: &Regularizer,
    f_budget: T,
    delta: T,
    cfg: &SolverConfig,
) -> Result<SolverResult<T>> {
    check_nonneg("f_budget", f_budget)?;
    linearized_admm(
        inst,
        f,
        g,
        Term::Ball(f_budget),
        Term::Penalty(T::one()),
        delta,
        cfg,
    )
}

fn project_l2_ball<T: Scalar>(w: &mut [T], radius: T) {
    if radius == T::zero() {
        w.iter_mut().for_each(|x| *x = T::zero());
        return;
    }
    let nrm = norm2(w);
    if nrm > radius {
        let c = radius / nrm;
        w.iter_mut().for_each(|x| *x = *x * c);
    }
}

/// ADMM on `Φx + v + r = y` with `r` in the δ-ball.
///
/// The `(x, v)` block takes one prox-linearized step on the augmented Lagrangian with step
/// `1/(ρμ)`, `μ ≥ ‖[Φ I]‖²`, so both variables use only their own prox or ball projection;
/// the `r` block is an exact projection. Penalty `ρ` is rebalanced (×2 / ÷2 when one
/// residual exceeds the other tenfold) during the first half of the run.
///
/// Stops when `‖Φx + v + r − y‖ ≤ tol_primal·(1 + ‖y‖)` and the dual residual
/// `ρ‖(μI − KᵀK)Δz − KᵀΔr‖ ≤ tol_dual·(1 + ρ‖Kᵀu‖)`.
fn linearized_admm<T: Scalar>(
    inst: &ProblemInstance<T>,
    f: &Regularizer,
    g: &Regularizer,
    x_term: Term<T>,
    v_term: Term<T>,
    delta: T,
    cfg: &SolverConfig,
) -> Result<SolverResult<T>> {
    check_dims(inst, f, g)?;
    check_nonneg("delta", delta)?;
    cfg.validate()?;
    let (n, m) = (inst.n, inst.m);
    let y = &inst.observation;
    let map = JointLinearMap::new(&inst.sensing, cfg.power_iters)?;
    let mu = map.lipschitz();
    let phi = map.phi();

    let y_scale = T::one() + norm2(y);
    let tol_p = T::lit(cfg.tol_primal) * y_scale;
    let tol_d = T::lit(cfg.tol_dual);
    let adapt_until = if cfg.adapt_rho { cfg.max_iters / 2 } else { 0 };

    let mut rho = T::lit(cfg.rho);
    let mut x = vec![T::zero(); n];
    let mut v = vec![T::zero(); m];
    let mut kz = vec![T::zero(); m];
    let mut r = y.clone();
    project_l2_ball(&mut r, delta);
    let mut u = vec![T::zero(); m];

    let mut s = vec![T::zero(); m];
    let mut buf_n = vec![T::zero(); n];
    let mut buf_m = vec![T::zero(); m];
    let mut x_new = vec![T::zero(); n];
    let mut v_new = vec![T::zero(); m];
    let mut kz_new = vec![T::zero(); m];
    let mut r_new = vec![T::zero(); m];
    let mut q = vec![T::zero(); m];

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iters = 0;
    let mut primal = T::infinity();
    let mut dual = T::infinity();

    for k in 0..cfg.max_iters {
        iters = k + 1;
        let inv_mu = T::one() / mu;
        let prox_scale = T::one() / (rho * mu);
        for i in 0..m {
            s[i] = kz[i] + r[i] - y[i] + u[i];
        }
        phi.tr_mul_vec_into(&s, &mut buf_n);
        for i in 0..n {
            buf_n[i] = x[i] - inv_mu * buf_n[i];
        }
        x_term.step(f, &buf_n, prox_scale, &mut x_new);
        for i in 0..m {
            buf_m[i] = v[i] - inv_mu * s[i];
        }
        v_term.step(g, &buf_m, prox_scale, &mut v_new);

        map.apply_into(&x_new, &v_new, &mut kz_new);
        for i in 0..m {
            r_new[i] = y[i] - kz_new[i] - u[i];
        }
        project_l2_ball(&mut r_new, delta);

        let mut p_sq = T::zero();
        for i in 0..m {
            let e = kz_new[i] + r_new[i] - y[i];
            u[i] = u[i] + e;
            p_sq = p_sq + e * e;
            q[i] = (kz_new[i] - kz[i]) + (r_new[i] - r[i]);
        }
        primal = p_sq.sqrt();

        // dual residual ρ[(μI − KᵀK)Δz − KᵀΔr] = ρ[μΔz − Kᵀq]
        phi.tr_mul_vec_into(&q, &mut buf_n);
        let mut d_sq = T::zero();
        for i in 0..n {
            let e = mu * (x_new[i] - x[i]) - buf_n[i];
            d_sq = d_sq + e * e;
        }
        for i in 0..m {
            let e = mu * (v_new[i] - v[i]) - q[i];
            d_sq = d_sq + e * e;
        }
        dual = rho * d_sq.sqrt();

        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut v, &mut v_new);
        std::mem::swap(&mut kz, &mut kz_new);
        std::mem::swap(&mut r, &mut r_new);

        let obj = x_term.value(f, &x) + v_term.value(g, &v);
        if !(obj.is_finite() && primal.is_finite() && dual.is_finite()) {
            return Err(Error::Divergence { iter: k });
        }
        trace.push(obj);

        if primal <= tol_p {
            // the multiplier scale costs one product, so only compute it near the end
            phi.tr_mul_vec_into(&u, &mut buf_n);
            let ktu = (norm2_sq(&buf_n) + norm2_sq(&u)).sqrt();
            if dual <= tol_d * (T::one() + rho * ktu) {
                converged = true;
                break;
            }
        }

        if k < adapt_until && k % 10 == 9 {
            let ten = T::lit(10.0);
            let two = T::lit(2.0);
            if primal > ten * dual {
                rho = rho * two;
                u.iter_mut().for_each(|ui| *ui = *ui / two);
            } else if dual > ten * primal {
                rho = rho / two;
                u.iter_mut().for_each(|ui| *ui = *ui * two);
            }
        }
    }

    let objective = *trace.last().expect("at least one iteration");
    Ok(SolverResult {
        x_hat: x,
        v_hat: v,
        iters,
        converged,
        primal_residual: primal,
        dual_residual: dual,
        objective,
        objective_trace: trace,
    })
}
