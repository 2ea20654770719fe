use serde::{Deserialize, Serialize};

use super::{check_samples, gaussian_vec, sample_par, EstimateKind, GeometryEstimate};
use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::optim1d::minimize_by_slope;
use crate::regularizer::{Regularizer, SubdiffAnchor};

/// Largest `n + m` for which the non-convex cone is estimated directly.
pub const MAX_DIRECT_DIM: usize = 64;

/// A closed convex cone with an exact Euclidean projection.
pub trait ConvexCone: Sync {
    fn dim(&self) -> usize;
    fn project_into(&self, w: &[f64], out: &mut [f64]);

    fn project(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; w.len()];
        self.project_into(w, &mut out);
        out
    }

    /// `sup |⟨w, u⟩|` over the cone intersected with the unit sphere.
    fn sup_abs_on_sphere(&self, w: &[f64]) -> f64 {
        let neg: Vec<f64> = w.iter().map(|v| -v).collect();
        norm2(&self.project(w)).max(norm2(&self.project(&neg)))
    }
}

pub struct FullSpace(pub usize);

impl ConvexCone for FullSpace {
    fn dim(&self) -> usize {
        self.0
    }
    fn project_into(&self, w: &[f64], out: &mut [f64]) {
        out.copy_from_slice(w);
    }
}

pub struct ZeroCone(pub usize);

impl ConvexCone for ZeroCone {
    fn dim(&self) -> usize {
        self.0
    }
    fn project_into(&self, _: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Tangent cone of `reg` at the anchor: the polar of `cone(∂f(anchor))`.
pub struct TangentCone<'a> {
    pub reg: &'a Regularizer,
    pub anchor: &'a SubdiffAnchor<f64>,
}

impl ConvexCone for TangentCone<'_> {
    fn dim(&self) -> usize {
        self.reg.dim
    }
    fn project_into(&self, w: &[f64], out: &mut [f64]) {
        // Moreau: Π_T(w) = w − Π_{T°}(w)
        let (tau, _) = self.reg.descent_cone_scale(w, self.anchor);
        self.reg
            .nearest_in_scaled_subdiff_into(w, tau, self.anchor, out);
        out.iter_mut().zip(w).for_each(|(o, &x)| *o = x - *o);
    }
}

/// Cartesian product `A × B` acting on stacked vectors.
pub struct ProductCone<A, B>(pub A, pub B);

impl<A: ConvexCone, B: ConvexCone> ConvexCone for ProductCone<A, B> {
    fn dim(&self) -> usize {
        self.0.dim() + self.1.dim()
    }
    fn project_into(&self, w: &[f64], out: &mut [f64]) {
        let n = self.0.dim();
        let (oa, ob) = out.split_at_mut(n);
        self.0.project_into(&w[..n], oa);
        self.1.project_into(&w[n..], ob);
    }
}

/// `{(a, b) : c₁⟨a, u − p⟩ + c₂⟨b, s − q⟩ ≤ 0 for all u ∈ ∂f, s ∈ ∂g}`, the polar of
/// `cone{(c₁(u − p), c₂(s − q))}` for fixed shifts `p`, `q`. With zero shifts and `c₂/c₁ = λ` this is the
/// cone of the partially penalized program.
struct JointPolarCone<'a> {
    f: &'a Regularizer,
    g: &'a Regularizer,
    anchor_f: &'a SubdiffAnchor<f64>,
    anchor_g: &'a SubdiffAnchor<f64>,
    scale_f: f64,
    scale_g: f64,
    shift_f: Vec<f64>,
    shift_g: Vec<f64>,
}

impl JointPolarCone<'_> {
    // nearest point of the generator scaled by t, and the residual w − nearest
    fn nearest_into(&self, w: &[f64], t: f64, near: &mut [f64], resid: &mut [f64]) {
        let n = self.f.dim;
        let (nf, ng) = near.split_at_mut(n);
        let (rf, rg) = resid.split_at_mut(n);
        let sides = [
            (
                self.f,
                self.anchor_f,
                self.scale_f,
                &self.shift_f,
                &w[..n],
                nf,
                rf,
            ),
            (
                self.g,
                self.anchor_g,
                self.scale_g,
                &self.shift_g,
                &w[n..],
                ng,
                rg,
            ),
        ];
        for (reg, anchor, scale, shift, wp, near, resid) in sides {
            let c = t * scale;
            let moved: Vec<f64> = wp.iter().zip(shift).map(|(&x, &p)| x + c * p).collect();
            reg.nearest_in_scaled_subdiff_into(&moved, c, anchor, near);
            for (((nr, r), &x), &p) in near.iter_mut().zip(resid.iter_mut()).zip(&moved).zip(shift)
            {
                *r = x - *nr;
                *nr -= c * p;
            }
        }
    }
}

impl ConvexCone for JointPolarCone<'_> {
    fn dim(&self) -> usize {
        self.f.dim + self.g.dim
    }
    fn project_into(&self, w: &[f64], out: &mut [f64]) {
        // d/dt ‖w − P(t)‖² = −2⟨w − P(t), P(t)⟩ / t for P(t) the nearest point of the scaled set
        let slope = |t: f64| {
            let mut near = vec![0.0; w.len()];
            let mut r = vec![0.0; w.len()];
            self.nearest_into(w, t, &mut near, &mut r);
            -2.0 * crate::linalg::dot(&r, &near) / t
        };
        let n = self.f.dim;
        let hi = (self.f.dual_value_unchecked(&w[..n]) / self.scale_f)
            .max(self.g.dual_value_unchecked(&w[n..]) / self.scale_g)
            .max(f64::MIN_POSITIVE);
        let t = minimize_by_slope(slope, hi);
        let mut near = vec![0.0; w.len()];
        self.nearest_into(w, t, &mut near, out);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cone", rename_all = "snake_case")]
pub enum ConeKind {
    C1,
    C2 { lambda: f64 },
    C3 { tau1: f64, tau2: f64, beta: f64 },
    TangentF,
    TangentG,
}

/// Limits for the inner maximization over the non-convex cone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerConfig {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-9,
        }
    }
}

/// One of the recovery cones at a concrete `(x⋆, v⋆)`.
#[derive(Debug, Clone)]
pub struct ConeSpec {
    pub kind: ConeKind,
    pub f: Regularizer,
    pub g: Regularizer,
    pub anchor_f: SubdiffAnchor<f64>,
    pub anchor_g: SubdiffAnchor<f64>,
}

impl ConeSpec {
    pub fn new(
        kind: ConeKind,
        f: Regularizer,
        g: Regularizer,
        signal: &[f64],
        corruption: &[f64],
    ) -> Result<Self> {
        let anchor_f = f.anchor(signal)?;
        let anchor_g = g.anchor(corruption)?;
        let positive = |name, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    requirement: "finite and positive",
                    value: v,
                })
            }
        };
        match kind {
            ConeKind::C2 { lambda } => positive("lambda", lambda)?,
            ConeKind::C3 { tau1, tau2, beta } => {
                positive("tau1", tau1)?;
                positive("tau2", tau2)?;
                super::check_beta(beta)?;
            }
            _ => {}
        }
        Ok(Self {
            kind,
            f,
            g,
            anchor_f,
            anchor_g,
        })
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ConeKind::TangentF => self.f.dim,
            ConeKind::TangentG => self.g.dim,
            _ => self.f.dim + self.g.dim,
        }
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self.kind, ConeKind::C3 { .. })
    }

    /// Membership test with slack `tol·‖u‖`.
    pub fn contains(&self, u: &[f64], tol: f64) -> bool {
        let n = self.f.dim;
        let slack = tol * norm2(u);
        let df = |a: &[f64]| self.f.directional_derivative(&self.anchor_f, a);
        let dg = |b: &[f64]| self.g.directional_derivative(&self.anchor_g, b);
        match self.kind {
            ConeKind::TangentF => df(u) <= slack,
            ConeKind::TangentG => dg(u) <= slack,
            ConeKind::C1 => df(&u[..n]) <= slack && dg(&u[n..]) <= slack,
            ConeKind::C2 { lambda } => df(&u[..n]) + lambda * dg(&u[n..]) <= slack,
            ConeKind::C3 { tau1, tau2, beta } => {
                let (a, b) = u.split_at(n);
                let lhs = tau1 * df(a) + tau2 * dg(b);
                let rhs =
                    (tau1 * self.f.value_unchecked(a) + tau2 * self.g.value_unchecked(b)) / beta;
                lhs - rhs <= slack * (tau1 + tau2)
            }
        }
    }

    fn joint(
        &self,
        scale_f: f64,
        scale_g: f64,
        shift_f: Vec<f64>,
        shift_g: Vec<f64>,
    ) -> JointPolarCone<'_> {
        JointPolarCone {
            f: &self.f,
            g: &self.g,
            anchor_f: &self.anchor_f,
            anchor_g: &self.anchor_g,
            scale_f,
            scale_g,
            shift_f,
            shift_g,
        }
    }

    /// Exact projection for the convex kinds; `None` for the penalized cone.
    pub fn project(&self, w: &[f64]) -> Option<Vec<f64>> {
        let tf = TangentCone {
            reg: &self.f,
            anchor: &self.anchor_f,
        };
        let tg = TangentCone {
            reg: &self.g,
            anchor: &self.anchor_g,
        };
        match self.kind {
            ConeKind::TangentF => Some(tf.project(w)),
            ConeKind::TangentG => Some(tg.project(w)),
            ConeKind::C1 => Some(ProductCone(tf, tg).project(w)),
            ConeKind::C2 { lambda } => Some(
                self.joint(1.0, lambda, vec![0.0; self.f.dim], vec![0.0; self.g.dim])
                    .project(w),
            ),
            ConeKind::C3 { .. } => None,
        }
    }

    /// `sup |⟨w, u⟩|` over the cone intersected with the unit sphere, with a maximizing
    /// unit vector (zero vector when the intersection is trivial).
    ///
    /// Exact for the convex kinds. For the penalized cone this is a lower bound found by
    /// alternating maximization, and `None` signals that the inner loop did not settle.
    pub fn sup_abs(&self, w: &[f64], inner: &InnerConfig) -> Option<(f64, Vec<f64>)> {
        let neg: Vec<f64> = w.iter().map(|v| -v).collect();
        let (pos, negs) = match self.kind {
            ConeKind::C3 { tau1, tau2, beta } => (
                self.maximize_penalized(w, tau1, tau2, beta, inner)?,
                self.maximize_penalized(&neg, tau1, tau2, beta, inner)?,
            ),
            _ => (self.project(w)?, self.project(&neg)?),
        };
        let best = if norm2(&pos) >= norm2(&negs) {
            pos
        } else {
            negs
        };
        let val = norm2(&best);
        let dir = if val > 0.0 {
            best.iter().map(|v| v / val).collect()
        } else {
            best
        };
        Some((val, dir))
    }

    // The penalized cone is the union over dual-ball points (p, q) of the convex cones
    // {τ₁(f'(a) − ⟨p,a⟩/β) + τ₂(g'(b) − ⟨q,b⟩/β) ≤ 0}. Alternately project onto one
    // of them and re-pick (p, q) attaining f(a), g(b) at the new point; the value
    // never decreases. Returns the projection with the largest norm.
    fn maximize_penalized(
        &self,
        w: &[f64],
        tau1: f64,
        tau2: f64,
        beta: f64,
        inner: &InnerConfig,
    ) -> Option<Vec<f64>> {
        let n = self.f.dim;
        let starts = [
            (vec![0.0; n], vec![0.0; self.g.dim]),
            (
                self.f.norm_subgradient(&w[..n]),
                self.g.norm_subgradient(&w[n..]),
            ),
        ];
        let mut best: Option<Vec<f64>> = None;
        let mut settled_any = false;
        for (mut p, mut q) in starts {
            let mut prev = -1.0;
            let mut settled = false;
            let mut cur = vec![0.0; w.len()];
            for _ in 0..inner.max_iters {
                let shift_f: Vec<f64> = p.iter().map(|v| v / beta).collect();
                let shift_g: Vec<f64> = q.iter().map(|v| v / beta).collect();
                self.joint(tau1, tau2, shift_f, shift_g)
                    .project_into(w, &mut cur);
                let val = norm2(&cur);
                if val <= prev * (1.0 + inner.tol) || val == 0.0 {
                    settled = true;
                    break;
                }
                prev = val;
                p = self.f.norm_subgradient(&cur[..n]);
                q = self.g.norm_subgradient(&cur[n..]);
            }
            settled_any |= settled;
            if best.as_ref().is_none_or(|b| norm2(&cur) > norm2(b)) {
                best = Some(cur);
            }
        }
        settled_any.then_some(best).flatten()
    }
}

/// `E sup |⟨g, u⟩|` over a convex cone intersected with the sphere; exact per draw.
pub fn mc_gamma_convex(
    cone: &impl ConvexCone,
    samples: usize,
    seed: u64,
) -> Result<GeometryEstimate> {
    check_samples(samples)?;
    let values = sample_par(samples, seed, |rng| {
        cone.sup_abs_on_sphere(&gaussian_vec(rng, cone.dim()))
    });
    GeometryEstimate::from_samples(EstimateKind::Complexity, &values)
}

/// Direct Monte Carlo estimate of the Gaussian complexity of `spec` intersected with the
/// sphere. Convex cones are exact per draw at any size; the penalized cone uses the
/// alternating lower bound, is limited to `n + m ≤ 64`, and discards draws whose inner
/// loop does not settle (more than 5% discarded is an error).
pub fn mc_gamma_cone(
    spec: &ConeSpec,
    samples: usize,
    seed: u64,
    inner: &InnerConfig,
) -> Result<GeometryEstimate> {
    check_samples(samples)?;
    if !spec.is_convex() && spec.dim() > MAX_DIRECT_DIM {
        return Err(Error::InvalidParameter {
            name: "n+m",
            requirement: "at most 64 for the penalized cone",
            value: spec.dim() as f64,
        });
    }
    let raw = sample_par(samples, seed, |rng| {
        let w = gaussian_vec(rng, spec.dim());
        spec.sup_abs(&w, inner).map_or(f64::NAN, |(v, _)| v)
    });
    let kept: Vec<f64> = raw.iter().copied().filter(|v| !v.is_nan()).collect();
    let discarded = raw.len() - kept.len();
    if discarded * 20 > raw.len() {
        return Err(Error::TooManyDiscards {
            discarded,
            total: raw.len(),
        });
    }
    GeometryEstimate::from_samples(EstimateKind::Complexity, &kept)
}
