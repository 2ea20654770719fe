use crate::error::{Error, Result};
use crate::linalg::{norm2, norm2_sq};
use crate::model::ProblemInstance;
use crate::regularizer::Regularizer;
use crate::scalar::Scalar;

use super::{check_dims, check_positive, JointLinearMap, SolverConfig, SolverResult};

/// Minimize `½‖y − Φx − v‖² + τ₁f(x) + τ₂g(v)` by proximal gradient on `(x, v)`.
///
/// Step `1/L` with `L ≥ 1 + ‖Φ‖²`. With `cfg.accel` the iteration uses Nesterov momentum
/// with gradient-based adaptive restart; without it, the objective is non-increasing.
/// Stops when the composite gradient mapping `L·(w − prox(w − ∇/L))` has norm at most
/// `tol_dual·(1 + ‖[Φ I]ᵀy‖)`. On `max_iters` the best iterate seen is returned.
pub fn solve_fully_penalized<T: Scalar>(
    inst: &ProblemInstance<T>,
    f: &Regularizer,
    g: &Regularizer,
    tau1: T,
    tau2: T,
    cfg: &SolverConfig,
) -> Result<SolverResult<T>> {
    check_dims(inst, f, g)?;
    check_positive("tau1", tau1)?;
    check_positive("tau2", tau2)?;
    cfg.validate()?;
    let (n, m) = (inst.n, inst.m);
    let y = &inst.observation;
    let map = JointLinearMap::new(&inst.sensing, cfg.power_iters)?;
    let lip = map.lipschitz();
    let step = T::one() / lip;

    let aty = map.phi().tr_mul_vec(y)?;
    let scale = T::one() + (norm2_sq(&aty) + norm2_sq(y)).sqrt();
    let tol = T::lit(cfg.tol_dual) * scale;

    let objective = |kz: &[T], x: &[T], v: &[T]| -> T {
        let res: T = y.iter().zip(kz).map(|(&a, &b)| (a - b) * (a - b)).sum();
        T::lit(0.5) * res + tau1 * f.value_unchecked(x) + tau2 * g.value_unchecked(v)
    };

    let mut x = vec![T::zero(); n];
    let mut v = vec![T::zero(); m];
    let mut kz = vec![T::zero(); m];
    let mut x_prev = x.clone();
    let mut v_prev = v.clone();
    let mut kz_prev = kz.clone();

    let mut wx = vec![T::zero(); n];
    let mut wv = vec![T::zero(); m];
    let mut resid = vec![T::zero(); m];
    let mut grad_x = vec![T::zero(); n];
    let mut x_new = vec![T::zero(); n];
    let mut v_new = vec![T::zero(); m];
    let mut kz_new = vec![T::zero(); m];

    let mut best = (objective(&kz, &x, &v), x.clone(), v.clone());
    let mut trace = Vec::new();
    let mut t_mom = T::one();
    let mut momentum = T::zero();
    let mut gm_norm = T::infinity();
    let mut converged = false;
    let mut iters = 0;

    for k in 0..cfg.max_iters {
        iters = k + 1;
        // extrapolated point w and its image K·w (linear, so no extra product)
        for i in 0..n {
            wx[i] = x[i] + momentum * (x[i] - x_prev[i]);
        }
        for i in 0..m {
            wv[i] = v[i] + momentum * (v[i] - v_prev[i]);
            resid[i] = y[i] - (kz[i] + momentum * (kz[i] - kz_prev[i]));
        }
        // ∇ = −(Φᵀr, r)
        map.phi().tr_mul_vec_into(&resid, &mut grad_x);
        for i in 0..n {
            grad_x[i] = wx[i] + step * grad_x[i];
        }
        f.prox_into(&grad_x, tau1 * step, &mut x_new);
        for i in 0..m {
            resid[i] = wv[i] + step * resid[i];
        }
        g.prox_into(&resid, tau2 * step, &mut v_new);

        let mut gm_sq = T::zero();
        let mut restart_ip = T::zero();
        for i in 0..n {
            let d = wx[i] - x_new[i];
            gm_sq = gm_sq + d * d;
            restart_ip = restart_ip + d * (x_new[i] - x[i]);
        }
        for i in 0..m {
            let d = wv[i] - v_new[i];
            gm_sq = gm_sq + d * d;
            restart_ip = restart_ip + d * (v_new[i] - v[i]);
        }
        gm_norm = lip * gm_sq.sqrt();

        map.apply_into(&x_new, &v_new, &mut kz_new);
        let obj = objective(&kz_new, &x_new, &v_new);
        if !obj.is_finite() {
            return Err(Error::Divergence { iter: k });
        }
        trace.push(obj);
        if obj < best.0 {
            best = (obj, x_new.clone(), v_new.clone());
        }

        std::mem::swap(&mut x_prev, &mut x);
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut v_prev, &mut v);
        std::mem::swap(&mut v, &mut v_new);
        std::mem::swap(&mut kz_prev, &mut kz);
        std::mem::swap(&mut kz, &mut kz_new);

        if gm_norm <= tol {
            converged = true;
            break;
        }

        if cfg.accel {
            if restart_ip > T::zero() {
                t_mom = T::one();
                momentum = T::zero();
            } else {
                let t_next =
                    (T::one() + (T::one() + T::lit(4.0) * t_mom * t_mom).sqrt()) / T::lit(2.0);
                momentum = (t_mom - T::one()) / t_next;
                t_mom = t_next;
            }
        }
    }

    let (objective, x_hat, v_hat) = if converged {
        let obj = *trace.last().expect("at least one iteration");
        (obj, x, v)
    } else {
        best
    };
    let mut kx = vec![T::zero(); m];
    map.apply_into(&x_hat, &v_hat, &mut kx);
    let primal: Vec<T> = y.iter().zip(&kx).map(|(&a, &b)| a - b).collect();
    Ok(SolverResult {
        x_hat,
        v_hat,
        iters,
        converged,
        primal_residual: norm2(&primal),
        dual_residual: gm_norm,
        objective,
        objective_trace: trace,
    })
}
