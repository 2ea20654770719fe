//! Sample-size conditions, recovery-error bounds and regularization recipes.
//!
//! Universal constants are never hard-coded: every function takes a fitted `C`
//! together with the ensemble's ψ₂ budget `K`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::check_beta;
use crate::linalg::norm2;
use crate::model::ProblemInstance;
use crate::regularizer::Regularizer;
use crate::scalar::Scalar;
use crate::solver::Procedure;

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            requirement: "finite and positive",
            value: v,
        })
    }
}

fn check_nonneg(name: &'static str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            requirement: "finite and nonnegative",
            value: v,
        })
    }
}

fn required_m(gamma: f64, c_fit: f64, k: f64, epsilon: f64) -> Result<f64> {
    check_nonneg("gamma", gamma)?;
    check_nonneg("C", c_fit)?;
    check_nonneg("K", k)?;
    check_nonneg("epsilon", epsilon)?;
    Ok((c_fit * k * k * gamma + epsilon).powi(2))
}

/// `(C K² γ(C₁∩S) + ε)²`
pub fn required_m_constrained(gamma_c1: f64, c_fit: f64, k: f64, epsilon: f64) -> Result<f64> {
    required_m(gamma_c1, c_fit, k, epsilon)
}

/// `(C K² γ(C₂∩S) + ε)²`
pub fn required_m_partial(gamma_c2: f64, c_fit: f64, k: f64, epsilon: f64) -> Result<f64> {
    required_m(gamma_c2, c_fit, k, epsilon)
}

/// `(C K² γ(C₃∩S) + ε)²`
pub fn required_m_full(gamma_c3: f64, c_fit: f64, k: f64, epsilon: f64) -> Result<f64> {
    required_m(gamma_c3, c_fit, k, epsilon)
}

/// `2δ√m / ε`
pub fn error_bound_constrained(m: usize, delta: f64, epsilon: f64) -> Result<f64> {
    check_positive("epsilon", epsilon)?;
    check_nonneg("delta", delta)?;
    Ok(2.0 * delta * (m as f64).sqrt() / epsilon)
}

/// Same form as [`error_bound_constrained`].
pub fn error_bound_partial(m: usize, delta: f64, epsilon: f64) -> Result<f64> {
    error_bound_constrained(m, delta, epsilon)
}

/// `2m · (β+1)/β · (τ₁α_f + τ₂α_g) / ε²`
pub fn error_bound_full(
    m: usize,
    beta: f64,
    tau1: f64,
    tau2: f64,
    alpha_f: f64,
    alpha_g: f64,
    epsilon: f64,
) -> Result<f64> {
    check_beta(beta)?;
    check_positive("epsilon", epsilon)?;
    check_nonneg("tau1", tau1)?;
    check_nonneg("tau2", tau2)?;
    Ok(
        2.0 * m as f64 * (beta + 1.0) / beta * (tau1 * alpha_f + tau2 * alpha_g)
            / (epsilon * epsilon),
    )
}

/// Ingredients shared by both regularization recipes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecipeInputs {
    /// Ensemble ψ₂ budget.
    pub k: f64,
    pub beta: f64,
    pub c_fit: f64,
    /// Gaussian complexity of the unit f-ball.
    pub gamma_ball_f: f64,
    pub r_f: f64,
    /// Gaussian complexity of the unit g-ball.
    pub gamma_ball_g: f64,
    pub r_g: f64,
}

impl RecipeInputs {
    fn validate(&self) -> Result<()> {
        check_beta(self.beta)?;
        check_nonneg("K", self.k)?;
        check_nonneg("C", self.c_fit)?;
        check_nonneg("gamma_ball_f", self.gamma_ball_f)?;
        check_nonneg("gamma_ball_g", self.gamma_ball_g)?;
        check_nonneg("r_f", self.r_f)?;
        check_nonneg("r_g", self.r_g)
    }
}

/// Bounded noise `‖z‖ ≤ δ`: `τ₁ = βCKδ/√m·(γ(B_f) + √m·r_f)`, `τ₂ = βδ·r_g`.
pub fn tau_recipe_bounded(delta: f64, m: usize, p: &RecipeInputs) -> Result<(f64, f64)> {
    p.validate()?;
    check_nonneg("delta", delta)?;
    let sm = (m as f64).sqrt();
    let tau1 = p.beta * p.c_fit * p.k * delta / sm * (p.gamma_ball_f + sm * p.r_f);
    Ok((tau1, p.beta * delta * p.r_g))
}

/// Sub-Gaussian noise with entry budget `L`: `τ₁ = CK(1+L²)β(γ(B_f) + √m·r_f)`,
/// `τ₂ = CLβ(γ(B_g) + √m·r_g)`.
pub fn tau_recipe_subgaussian(l: f64, m: usize, p: &RecipeInputs) -> Result<(f64, f64)> {
    p.validate()?;
    check_nonneg("L", l)?;
    let sm = (m as f64).sqrt();
    let tau1 = p.c_fit * p.k * (1.0 + l * l) * p.beta * (p.gamma_ball_f + sm * p.r_f);
    let tau2 = p.c_fit * l * p.beta * (p.gamma_ball_g + sm * p.r_g);
    Ok((tau1, tau2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assumption1 {
    pub pass: bool,
    /// `f*(Φᵀz)`
    pub dual_f: f64,
    /// `g*(z)`
    pub dual_g: f64,
    /// `τ₁ − β f*(Φᵀz)`
    pub margin_f: f64,
    /// `τ₂ − β g*(z)`
    pub margin_g: f64,
}

/// Check `τ₁ ≥ β f*(Φᵀz)` and `τ₂ ≥ β g*(z)` on the instance's realized noise.
pub fn assumption1_check<T: Scalar>(
    inst: &ProblemInstance<T>,
    f: &Regularizer,
    g: &Regularizer,
    tau1: f64,
    tau2: f64,
    beta: f64,
) -> Result<Assumption1> {
    check_beta(beta)?;
    let dual_f = f
        .dual_value(&inst.sensing.tr_mul_vec(&inst.noise)?)?
        .as_f64();
    let dual_g = g.dual_value(&inst.noise)?.as_f64();
    let margin_f = tau1 - beta * dual_f;
    let margin_g = tau2 - beta * dual_g;
    Ok(Assumption1 {
        pass: margin_f >= 0.0 && margin_g >= 0.0,
        dual_f,
        dual_g,
        margin_f,
        margin_g,
    })
}

/// Inputs for evaluating a theorem on one concrete run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundContext {
    pub n: usize,
    pub m: usize,
    /// Signal sparsity.
    pub s: usize,
    /// Corruption sparsity.
    pub k: usize,
    /// Noise budget used when the procedure carries none.
    pub delta: f64,
    /// Complexity estimate of the procedure's cone.
    pub gamma_hat: f64,
    pub c_fit: f64,
    /// Ensemble ψ₂ budget.
    pub k_psi2: f64,
    /// Only used by the fully penalized program.
    pub beta: f64,
    pub alpha_f: f64,
    pub alpha_g: f64,
    /// Slack demanded by the measurement condition when computing `m_required`.
    pub epsilon_design: f64,
}

/// One configuration's theorem evaluation, flattened for CSV output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub procedure: String,
    pub n: usize,
    pub m: usize,
    pub s: usize,
    pub k: usize,
    pub delta: f64,
    pub lambda: Option<f64>,
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    pub beta: Option<f64>,
    pub gamma_hat: f64,
    pub m_required: f64,
    #[serde(with = "extended_float")]
    pub error_bound: f64,
    #[serde(with = "extended_float")]
    pub error_observed: f64,
    pub satisfied: bool,
    pub epsilon: f64,
    pub c_fit: f64,
    pub k_psi2: f64,
}

pub const CSV_HEADER: [&str; 15] = [
    "procedure",
    "n",
    "m",
    "s",
    "k",
    "delta",
    "lambda",
    "tau1",
    "tau2",
    "beta",
    "gamma_hat",
    "m_required",
    "error_bound",
    "error_observed",
    "satisfied",
];

impl BoundReport {
    /// Evaluate the matching theorem. `m_required` uses the design slack; the error bound
    /// uses the realized slack `ε = √m − C K² γ̂` and is infinite when that is not positive.
    pub fn evaluate(
        procedure: &Procedure,
        ctx: &BoundContext,
        error_observed: f64,
    ) -> Result<Self> {
        check_nonneg("gamma_hat", ctx.gamma_hat)?;
        let epsilon = (ctx.m as f64).sqrt() - ctx.c_fit * ctx.k_psi2.powi(2) * ctx.gamma_hat;
        let m_required = required_m(ctx.gamma_hat, ctx.c_fit, ctx.k_psi2, ctx.epsilon_design)?;
        let satisfied = ctx.m as f64 >= m_required && epsilon > 0.0;
        let (mut lambda, mut tau1, mut tau2, mut beta) = (None, None, None, None);
        let (delta, error_bound) = match *procedure {
            Procedure::Full { tau1: t1, tau2: t2 } => {
                check_beta(ctx.beta)?;
                (tau1, tau2, beta) = (Some(t1), Some(t2), Some(ctx.beta));
                let bound = if epsilon > 0.0 {
                    error_bound_full(ctx.m, ctx.beta, t1, t2, ctx.alpha_f, ctx.alpha_g, epsilon)?
                } else {
                    f64::INFINITY
                };
                (ctx.delta, bound)
            }
            Procedure::Partial { lambda: l, delta } => {
                lambda = Some(l);
                (delta, slack_bound(ctx.m, delta, epsilon)?)
            }
            Procedure::ConstrainedF { delta, .. } | Procedure::ConstrainedG { delta, .. } => {
                (delta, slack_bound(ctx.m, delta, epsilon)?)
            }
        };
        Ok(Self {
            procedure: procedure.name().to_string(),
            n: ctx.n,
            m: ctx.m,
            s: ctx.s,
            k: ctx.k,
            delta,
            lambda,
            tau1,
            tau2,
            beta,
            gamma_hat: ctx.gamma_hat,
            m_required,
            error_bound,
            error_observed,
            satisfied,
            epsilon,
            c_fit: ctx.c_fit,
            k_psi2: ctx.k_psi2,
        })
    }

    /// Whether the observed error respects the bound.
    pub fn holds(&self) -> bool {
        self.error_observed <= self.error_bound
    }

    /// Fields in [`CSV_HEADER`] order; absent parameters are empty.
    pub fn csv_fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.procedure.clone(),
            self.n.to_string(),
            self.m.to_string(),
            self.s.to_string(),
            self.k.to_string(),
            self.delta.to_string(),
            opt(self.lambda),
            opt(self.tau1),
            opt(self.tau2),
            opt(self.beta),
            self.gamma_hat.to_string(),
            self.m_required.to_string(),
            self.error_bound.to_string(),
            self.error_observed.to_string(),
            self.satisfied.to_string(),
        ]
    }

    pub fn write_csv<W: std::io::Write>(reports: &[Self], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER).map_err(csv_err)?;
        for r in reports {
            w.write_record(r.csv_fields()).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// JSON has no infinities: non-finite values travel as the strings `inf`, `-inf`, `NaN`.
mod extended_float {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(D::Error::custom),
        }
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn slack_bound(m: usize, delta: f64, epsilon: f64) -> Result<f64> {
    if epsilon > 0.0 {
        error_bound_constrained(m, delta, epsilon)
    } else {
        Ok(f64::INFINITY)
    }
}

/// Joint Euclidean error `√(‖x̂ − x⋆‖² + ‖v̂ − v⋆‖²)`.
pub fn joint_error<T: Scalar>(x_hat: &[T], v_hat: &[T], inst: &ProblemInstance<T>) -> f64 {
    let dx: Vec<T> = x_hat
        .iter()
        .zip(&inst.signal)
        .map(|(a, b)| *a - *b)
        .collect();
    let dv: Vec<T> = v_hat
        .iter()
        .zip(&inst.corruption)
        .map(|(a, b)| *a - *b)
        .collect();
    (norm2(&dx).as_f64().powi(2) + norm2(&dv).as_f64().powi(2)).sqrt()
}

/// Joint error relative to `√(‖x⋆‖² + ‖v⋆‖²)` (absolute when the truth is zero).
pub fn joint_relative_error<T: Scalar>(x_hat: &[T], v_hat: &[T], inst: &ProblemInstance<T>) -> f64 {
    let scale =
        (norm2(&inst.signal).as_f64().powi(2) + norm2(&inst.corruption).as_f64().powi(2)).sqrt();
    let err = joint_error(x_hat, v_hat, inst);
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

/// Smallest constant `C` in `[lo, hi]` whose implied measurement count reaches the target
/// success rate, by bisection. `success_rate(m)` runs the reference configuration at `m`
/// measurements; `implied_m(C)` maps a constant to a measurement count.
pub fn calibrate_c(
    lo: f64,
    hi: f64,
    iters: usize,
    target: f64,
    implied_m: impl Fn(f64) -> usize,
    mut success_rate: impl FnMut(usize) -> Result<f64>,
) -> Result<f64> {
    check_nonneg("lo", lo)?;
    check_positive("hi", hi - lo)?;
    if success_rate(implied_m(hi))? < target {
        return Err(Error::InvalidSpec(format!(
            "calibration bracket too small: C = {hi} does not reach the target rate"
        )));
    }
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if success_rate(implied_m(mid))? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn required_m_examples() {
        assert_eq!(required_m_constrained(0.0, 3.0, 2.0, 1.0).unwrap(), 1.0);
        assert_eq!(required_m_constrained(3.0, 1.0, 1.0, 2.0).unwrap(), 25.0);
        assert_eq!(required_m_partial(0.0, 1.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(required_m_partial(4.0, 1.0, 1.0, 1.0).unwrap(), 25.0);
        assert_eq!(required_m_full(0.0, 1.0, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(required_m_full(3.0, 1.0, 1.0, 2.0).unwrap(), 25.0);
        assert!(required_m_full(-1.0, 1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn error_bound_examples() {
        assert_eq!(error_bound_constrained(100, 0.0, 3.0).unwrap(), 0.0);
        assert!((error_bound_constrained(100, 0.1, 5.0).unwrap() - 0.4).abs() < 1e-15);
        assert!((error_bound_partial(100, 0.1, 5.0).unwrap() - 0.4).abs() < 1e-15);
        assert!(error_bound_constrained(100, 0.1, 0.0).is_err());
        assert_eq!(
            error_bound_full(100, 2.0, 0.0, 0.0, 1.0, 1.0, 10.0).unwrap(),
            0.0
        );
        assert!(
            (error_bound_full(100, 2.0, 1.0, 1.0, 1.0, 1.0, 10.0).unwrap() - 6.0).abs() < 1e-12
        );
        assert!(error_bound_full(100, 1.0, 1.0, 1.0, 1.0, 1.0, 10.0).is_err());
    }

    fn inputs() -> RecipeInputs {
        RecipeInputs {
            k: 1.0,
            beta: 2.0,
            c_fit: 1.0,
            gamma_ball_f: 3.0,
            r_f: 1.0,
            gamma_ball_g: 3.0,
            r_g: 1.0,
        }
    }

    #[test]
    fn recipe_examples() {
        assert_eq!(tau_recipe_bounded(0.0, 100, &inputs()).unwrap(), (0.0, 0.0));
        let (t1, t2) = tau_recipe_bounded(1.0, 100, &inputs()).unwrap();
        assert!((t1 - 2.6).abs() < 1e-12);
        assert_eq!(t2, 2.0);
        let (t1, _) = tau_recipe_subgaussian(1.0, 100, &inputs()).unwrap();
        assert!((t1 - 52.0).abs() < 1e-12);
        assert_eq!(tau_recipe_subgaussian(0.0, 100, &inputs()).unwrap().1, 0.0);
        let mut half = inputs();
        half.beta = 0.5;
        assert!(tau_recipe_bounded(1.0, 100, &half).is_err());
        assert!(tau_recipe_subgaussian(1.0, 100, &half).is_err());
    }

    #[test]
    fn calibration_finds_threshold() {
        // success iff m ≥ 50, implied m = 10·C
        let c = calibrate_c(
            0.0,
            20.0,
            40,
            0.95,
            |c| (10.0 * c).ceil() as usize,
            |m| Ok(if m >= 50 { 1.0 } else { 0.0 }),
        )
        .unwrap();
        assert!((c - 4.9).abs() < 0.11 && (10.0 * c).ceil() as usize >= 50);
        assert!(calibrate_c(0.0, 1.0, 10, 0.95, |c| c as usize, |_| Ok(0.0)).is_err());
    }

    #[test]
    fn infinite_bound_round_trips_through_json() {
        let ctx = BoundContext {
            n: 10,
            m: 4,
            s: 1,
            k: 1,
            delta: 0.1,
            gamma_hat: 100.0,
            c_fit: 1.0,
            k_psi2: 1.0,
            beta: 2.0,
            alpha_f: 1.0,
            alpha_g: 1.0,
            epsilon_design: 1.0,
        };
        let proc = Procedure::Partial {
            lambda: 1.0,
            delta: 0.1,
        };
        let r = BoundReport::evaluate(&proc, &ctx, 0.5).unwrap();
        assert!(r.error_bound.is_infinite());
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains(r#""error_bound":"inf""#));
        assert_eq!(serde_json::from_str::<BoundReport>(&text).unwrap(), r);
    }

    #[test]
    fn csv_row_layout() {
        let ctx = BoundContext {
            n: 10,
            m: 100,
            s: 2,
            k: 1,
            delta: 0.0,
            gamma_hat: 2.0,
            c_fit: 1.0,
            k_psi2: 1.0,
            beta: 2.0,
            alpha_f: 1.0,
            alpha_g: 1.0,
            epsilon_design: 1.0,
        };
        let rep = BoundReport::evaluate(
            &Procedure::Partial {
                lambda: 1.0,
                delta: 0.1,
            },
            &ctx,
            0.01,
        )
        .unwrap();
        // ε = 10 − 2 = 8, bound = 2·0.1·10/8
        assert_eq!(rep.epsilon, 8.0);
        assert!((rep.error_bound - 0.25).abs() < 1e-15);
        assert_eq!(rep.m_required, 9.0);
        assert!(rep.satisfied && rep.holds());
        let mut buf = Vec::new();
        BoundReport::write_csv(&[rep], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "partial,10,100,2,1,0.1,1,,,,2,9,0.25,0.01,true"
        );
    }
}
