//! Structured norms `f`, `g` and every quantity derived from them: dual norm, proximal map,
//! ball projections, distances to scaled subdifferentials and to the cone they generate.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm2};
use crate::optim1d::minimize_by_slope;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegKind {
    L1,
    /// Sum of ℓ₂ norms over contiguous, equal-size blocks.
    #[serde(alias = "block-l1l2")]
    BlockL1L2,
}

/// A structured norm on `R^dim`. Serializes as `{"kind":"l1"|"block_l1l2","dim":N,"block":B}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Regularizer {
    pub kind: RegKind,
    pub dim: usize,
    #[serde(default = "one")]
    pub block: usize,
}

fn one() -> usize {
    1
}

/// The point at which a subdifferential is taken, with its support and sign pattern.
///
/// For ℓ1, `support` lists nonzero coordinates and `signs` their signs. For block norms,
/// `support` lists active blocks and `signs` concatenates the unit directions `x_B/‖x_B‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdiffAnchor<T> {
    pub anchor: Vec<T>,
    pub support: Vec<usize>,
    pub signs: Vec<T>,
}

impl Regularizer {
    pub fn l1(dim: usize) -> Self {
        Self {
            kind: RegKind::L1,
            dim,
            block: 1,
        }
    }

    pub fn block_l1l2(dim: usize, block: usize) -> Result<Self> {
        let r = Self {
            kind: RegKind::BlockL1L2,
            dim,
            block,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidSpec(
                "regularizer dimension must be positive".into(),
            ));
        }
        if self.kind == RegKind::BlockL1L2
            && (self.block == 0 || !self.dim.is_multiple_of(self.block))
        {
            return Err(Error::InvalidSpec(format!(
                "block size {} does not divide dimension {}",
                self.block, self.dim
            )));
        }
        Ok(())
    }

    /// Same norm family on a different dimension.
    pub fn with_dim(&self, dim: usize) -> Self {
        Self { dim, ..*self }
    }

    #[inline]
    fn block_len(&self) -> usize {
        match self.kind {
            RegKind::L1 => 1,
            RegKind::BlockL1L2 => self.block,
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.dim / self.block_len()
    }

    fn check<T>(&self, w: &[T]) -> Result<()> {
        check_len("regularizer", self.dim, w.len())
    }

    pub fn value<T: Scalar>(&self, w: &[T]) -> Result<T> {
        self.check(w)?;
        Ok(self.value_unchecked(w))
    }

    pub(crate) fn value_unchecked<T: Scalar>(&self, w: &[T]) -> T {
        match self.kind {
            RegKind::L1 => w.iter().fold(T::zero(), |s, x| s + x.abs()),
            RegKind::BlockL1L2 => w
                .chunks_exact(self.block)
                .fold(T::zero(), |s, b| s + norm2(b)),
        }
    }

    /// Dual norm: ℓ∞ for ℓ1, largest block ℓ₂ norm for block-ℓ1,2.
    pub fn dual_value<T: Scalar>(&self, w: &[T]) -> Result<T> {
        self.check(w)?;
        Ok(self.dual_value_unchecked(w))
    }

    pub(crate) fn dual_value_unchecked<T: Scalar>(&self, w: &[T]) -> T {
        match self.kind {
            RegKind::L1 => w.iter().fold(T::zero(), |m, x| m.max(x.abs())),
            RegKind::BlockL1L2 => w
                .chunks_exact(self.block)
                .fold(T::zero(), |m, b| m.max(norm2(b))),
        }
    }

    /// A point `u` with `value(u) = 1` and `⟨w, u⟩ = dual_value(w)`.
    pub fn dual_attaining<T: Scalar>(&self, w: &[T]) -> Result<Vec<T>> {
        self.check(w)?;
        let bl = self.block_len();
        let mut best = 0;
        let mut best_val = -T::one();
        for (b, chunk) in w.chunks_exact(bl).enumerate() {
            let v = norm2(chunk);
            if v > best_val {
                best_val = v;
                best = b;
            }
        }
        let mut u = vec![T::zero(); self.dim];
        let chunk = &w[best * bl..(best + 1) * bl];
        if best_val > T::zero() {
            for (ui, &wi) in u[best * bl..(best + 1) * bl].iter_mut().zip(chunk) {
                *ui = wi / best_val;
            }
        } else {
            u[0] = T::one();
        }
        Ok(u)
    }

    /// A subgradient of the norm at `w`: a dual-ball point `p` with `⟨p, w⟩ = value(w)`,
    /// zero on blocks where `w` vanishes.
    pub(crate) fn norm_subgradient(&self, w: &[f64]) -> Vec<f64> {
        let bl = self.block_len();
        let mut p = vec![0.0; w.len()];
        for (pb, wb) in p.chunks_exact_mut(bl).zip(w.chunks_exact(bl)) {
            let nrm = norm2(wb);
            if nrm > 0.0 {
                pb.iter_mut().zip(wb).for_each(|(p, &x)| *p = x / nrm);
            }
        }
        p
    }

    /// `argmin_u ½‖u − w‖² + t·value(u)`
    pub fn prox<T: Scalar>(&self, w: &[T], t: T) -> Result<Vec<T>> {
        self.check(w)?;
        check_nonneg("t", t)?;
        let mut out = vec![T::zero(); self.dim];
        self.prox_into(w, t, &mut out);
        Ok(out)
    }

    pub(crate) fn prox_into<T: Scalar>(&self, w: &[T], t: T, out: &mut [T]) {
        match self.kind {
            RegKind::L1 => {
                for (o, &x) in out.iter_mut().zip(w) {
                    let a = x.abs() - t;
                    *o = if a > T::zero() {
                        x.signum() * a
                    } else {
                        T::zero()
                    };
                }
            }
            RegKind::BlockL1L2 => {
                for (ob, wb) in out
                    .chunks_exact_mut(self.block)
                    .zip(w.chunks_exact(self.block))
                {
                    let nrm = norm2(wb);
                    let c = if nrm > t {
                        T::one() - t / nrm
                    } else {
                        T::zero()
                    };
                    for (o, &x) in ob.iter_mut().zip(wb) {
                        *o = c * x;
                    }
                }
            }
        }
    }

    /// Euclidean projection onto `{u : value(u) ≤ radius}`.
    pub fn project_ball<T: Scalar>(&self, w: &[T], radius: T) -> Result<Vec<T>> {
        self.check(w)?;
        check_nonneg("R", radius)?;
        let mut out = vec![T::zero(); self.dim];
        self.project_ball_into(w, radius, &mut out);
        Ok(out)
    }

    pub(crate) fn project_ball_into<T: Scalar>(&self, w: &[T], radius: T, out: &mut [T]) {
        match self.kind {
            RegKind::L1 => project_l1_ball(w, radius, out),
            RegKind::BlockL1L2 => {
                let norms: Vec<T> = w.chunks_exact(self.block).map(norm2).collect();
                let mut shrunk = vec![T::zero(); norms.len()];
                project_l1_ball(&norms, radius, &mut shrunk);
                for ((ob, wb), (&old, &new)) in out
                    .chunks_exact_mut(self.block)
                    .zip(w.chunks_exact(self.block))
                    .zip(norms.iter().zip(&shrunk))
                {
                    let c = if old > T::zero() {
                        new / old
                    } else {
                        T::zero()
                    };
                    for (o, &x) in ob.iter_mut().zip(wb) {
                        *o = c * x;
                    }
                }
            }
        }
    }

    /// Euclidean projection onto `{u : dual_value(u) ≤ radius}`.
    pub fn project_dual_ball<T: Scalar>(&self, w: &[T], radius: T) -> Result<Vec<T>> {
        self.check(w)?;
        check_nonneg("R", radius)?;
        Ok(match self.kind {
            RegKind::L1 => w.iter().map(|x| x.max(-radius).min(radius)).collect(),
            RegKind::BlockL1L2 => {
                let mut out = w.to_vec();
                for b in out.chunks_exact_mut(self.block) {
                    let nrm = norm2(b);
                    if nrm > radius {
                        let c = radius / nrm;
                        b.iter_mut().for_each(|x| *x = *x * c);
                    }
                }
                out
            }
        })
    }

    /// `sup_{u≠0} value(u)/‖u‖₂`
    pub fn compatibility_alpha(&self) -> f64 {
        (self.num_blocks() as f64).sqrt()
    }

    /// `sup {‖u‖₂ : value(u) ≤ 1}`
    pub fn ball_radius_r(&self) -> f64 {
        1.0
    }

    /// Support and sign pattern of `x`.
    pub fn anchor<T: Scalar>(&self, x: &[T]) -> Result<SubdiffAnchor<T>> {
        self.check(x)?;
        let bl = self.block_len();
        let mut support = Vec::new();
        let mut signs = Vec::new();
        for (b, chunk) in x.chunks_exact(bl).enumerate() {
            let nrm = norm2(chunk);
            if nrm > T::zero() {
                support.push(b);
                match self.kind {
                    RegKind::L1 => signs.push(chunk[0].signum()),
                    RegKind::BlockL1L2 => signs.extend(chunk.iter().map(|&v| v / nrm)),
                }
            }
        }
        Ok(SubdiffAnchor {
            anchor: x.to_vec(),
            support,
            signs,
        })
    }

    /// Check that a (possibly hand-built) anchor matches its own nonzero pattern.
    pub fn validate_anchor<T: Scalar>(&self, anchor: &SubdiffAnchor<T>) -> Result<()> {
        let fresh = self.anchor(&anchor.anchor)?;
        if fresh.support != anchor.support {
            return Err(Error::InconsistentAnchor(format!(
                "support {:?} does not match nonzero pattern {:?}",
                anchor.support, fresh.support
            )));
        }
        let tol = T::lit(1e-9);
        if fresh.signs.len() != anchor.signs.len()
            || fresh
                .signs
                .iter()
                .zip(&anchor.signs)
                .any(|(a, b)| (*a - *b).abs() > tol)
        {
            return Err(Error::InconsistentAnchor(
                "sign pattern does not match anchor".into(),
            ));
        }
        Ok(())
    }

    /// Nearest point of `tau·∂f(anchor)` to `gauss`, written into `out`.
    pub(crate) fn nearest_in_scaled_subdiff_into<T: Scalar>(
        &self,
        gauss: &[T],
        tau: T,
        anchor: &SubdiffAnchor<T>,
        out: &mut [T],
    ) {
        let bl = self.block_len();
        // inactive blocks: projection onto the τ-radius dual ball
        for (ob, gb) in out.chunks_exact_mut(bl).zip(gauss.chunks_exact(bl)) {
            let nrm = norm2(gb);
            let c = if nrm > tau { tau / nrm } else { T::one() };
            for (o, &g) in ob.iter_mut().zip(gb) {
                *o = c * g;
            }
        }
        // active blocks: the single point τ·direction
        for (k, &b) in anchor.support.iter().enumerate() {
            for j in 0..bl {
                out[b * bl + j] = tau * anchor.signs[k * bl + j];
            }
        }
    }

    pub(crate) fn dist_sq_to_scaled_subdiff_unchecked<T: Scalar>(
        &self,
        gauss: &[T],
        tau: T,
        anchor: &SubdiffAnchor<T>,
    ) -> T {
        let bl = self.block_len();
        let mut total = T::zero();
        let mut k = 0;
        for (b, gb) in gauss.chunks_exact(bl).enumerate() {
            if k < anchor.support.len() && anchor.support[k] == b {
                let dir = &anchor.signs[k * bl..(k + 1) * bl];
                total = total
                    + gb.iter().zip(dir).fold(T::zero(), |s, (&g, &d)| {
                        let e = g - tau * d;
                        s + e * e
                    });
                k += 1;
            } else {
                let excess = norm2(gb) - tau;
                if excess > T::zero() {
                    total = total + excess * excess;
                }
            }
        }
        total
    }

    /// Euclidean distance from `gauss` to `tau·∂f(anchor)`.
    pub fn dist_to_scaled_subdiff<T: Scalar>(
        &self,
        gauss: &[T],
        tau: T,
        anchor: &SubdiffAnchor<T>,
    ) -> Result<T> {
        self.check(gauss)?;
        check_nonneg("tau", tau)?;
        self.validate_anchor(anchor)?;
        Ok(self
            .dist_sq_to_scaled_subdiff_unchecked(gauss, tau, anchor)
            .sqrt())
    }

    /// Minimizing scale `τ⋆ ≥ 0` and squared distance from `gauss` to `cone(∂f(anchor))`.
    pub(crate) fn descent_cone_scale<T: Scalar>(
        &self,
        gauss: &[T],
        anchor: &SubdiffAnchor<T>,
    ) -> (T, T) {
        let hi = self.dual_value_unchecked(gauss);
        if hi == T::zero() {
            return (T::zero(), T::zero());
        }
        // d/dτ dist²(g, τ∂f) = −2⟨g − P, P⟩/τ with P the nearest point of τ∂f
        let slope = |tau: T| {
            let mut p = vec![T::zero(); gauss.len()];
            self.nearest_in_scaled_subdiff_into(gauss, tau, anchor, &mut p);
            let ip = gauss
                .iter()
                .zip(&p)
                .fold(T::zero(), |s, (&g, &q)| s + (g - q) * q);
            -T::lit(2.0) * ip / tau
        };
        let tau = minimize_by_slope(slope, hi);
        (
            tau,
            self.dist_sq_to_scaled_subdiff_unchecked(gauss, tau, anchor),
        )
    }

    /// Distance from `gauss` to the cone generated by `∂f(anchor)`, the polar of the tangent
    /// cone; its mean over Gaussian `gauss` is the width of the tangent cone within the unit ball.
    pub fn dist_to_descent_cone<T: Scalar>(
        &self,
        gauss: &[T],
        anchor: &SubdiffAnchor<T>,
    ) -> Result<T> {
        self.check(gauss)?;
        self.validate_anchor(anchor)?;
        Ok(self
            .descent_cone_scale(gauss, anchor)
            .1
            .max(T::zero())
            .sqrt())
    }

    /// `f'(anchor; a) = max_{u ∈ ∂f(anchor)} ⟨u, a⟩`
    pub fn directional_derivative<T: Scalar>(&self, anchor: &SubdiffAnchor<T>, a: &[T]) -> T {
        let bl = self.block_len();
        let mut total = T::zero();
        let mut k = 0;
        for (b, ab) in a.chunks_exact(bl).enumerate() {
            if k < anchor.support.len() && anchor.support[k] == b {
                total = total + dot(ab, &anchor.signs[k * bl..(k + 1) * bl]);
                k += 1;
            } else {
                total = total + norm2(ab);
            }
        }
        total
    }
}

fn check_nonneg<T: Scalar>(name: &'static str, v: T) -> Result<()> {
    if v >= T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            requirement: "finite and nonnegative",
            value: v.as_f64(),
        })
    }
}

/// Sort-and-threshold projection onto the ℓ1 ball; ties keep their input order.
fn project_l1_ball<T: Scalar>(w: &[T], radius: T, out: &mut [T]) {
    let l1 = w.iter().fold(T::zero(), |s, x| s + x.abs());
    if l1 <= radius {
        out.copy_from_slice(w);
        return;
    }
    if radius == T::zero() {
        out.iter_mut().for_each(|o| *o = T::zero());
        return;
    }
    let mut mags: Vec<T> = w.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (j, &u) in mags.iter().enumerate() {
        cumsum = cumsum + u;
        let cand = (cumsum - radius) / T::lit((j + 1) as f64);
        if u - cand > T::zero() {
            theta = cand;
        } else {
            break;
        }
    }
    for (o, &x) in out.iter_mut().zip(w) {
        let a = x.abs() - theta;
        *o = if a > T::zero() {
            x.signum() * a
        } else {
            T::zero()
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn blk(dim: usize, b: usize) -> Regularizer {
        Regularizer::block_l1l2(dim, b).unwrap()
    }

    #[test]
    fn value_examples() {
        assert_eq!(Regularizer::l1(3).value(&[1.0, -2.0, 3.0]).unwrap(), 6.0);
        assert_eq!(blk(4, 2).value(&[3.0, 4.0, 0.0, 0.0]).unwrap(), 5.0);
        assert_eq!(Regularizer::l1(3).value(&[0.0f64; 3]).unwrap(), 0.0);
        assert!(matches!(
            Regularizer::l1(3).value(&[1.0f64]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dual_examples() {
        assert_eq!(
            Regularizer::l1(3).dual_value(&[1.0, -2.0, 3.0]).unwrap(),
            3.0
        );
        assert_eq!(blk(4, 2).dual_value(&[3.0, 4.0, 1.0, 0.0]).unwrap(), 5.0);
        assert_eq!(blk(4, 2).dual_value(&[0.0f32; 4]).unwrap(), 0.0);
        assert!(Regularizer::l1(2).dual_value(&[0.0f64; 3]).is_err());
    }

    #[test]
    fn block_needs_divisible_dim() {
        assert!(Regularizer::block_l1l2(5, 2).is_err());
        assert!(Regularizer::block_l1l2(4, 0).is_err());
    }

    #[test]
    fn prox_examples() {
        let r = Regularizer::l1(3);
        assert_eq!(r.prox(&[3.0, -0.5, 1.0], 1.0).unwrap(), vec![2.0, 0.0, 0.0]);
        let w = [0.3, -1.2, 5.0];
        assert_eq!(r.prox(&w, 0.0).unwrap(), w.to_vec());
        assert!(r.prox(&w, -1.0).is_err());
        let b = blk(4, 2);
        let p = b.prox(&[3.0f64, 4.0, 0.3, 0.4], 1.0).unwrap();
        assert!((p[0] - 2.4).abs() < 1e-15 && (p[1] - 3.2).abs() < 1e-15);
        assert_eq!(&p[2..], &[0.0, 0.0]);
    }

    #[test]
    fn ball_projection_examples() {
        let r = Regularizer::l1(3);
        let w = [0.1, -0.2, 0.3];
        assert_eq!(r.project_ball(&w, 1.0).unwrap(), w.to_vec());
        assert_eq!(r.project_ball(&w, 0.0).unwrap(), vec![0.0; 3]);
        assert!(r.project_ball(&w, -0.5).is_err());
        let p = r.project_ball(&[3.0, -1.0, 0.0], 1.0).unwrap();
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn subdiff_distance_examples() {
        let r = Regularizer::l1(2);
        let anchor = r.anchor(&[1.0, 0.0]).unwrap();
        let g = [0.7f64, -2.0];
        assert!((r.dist_to_scaled_subdiff(&g, 0.0, &anchor).unwrap() - norm2(&g)).abs() < 1e-15);
        assert_eq!(
            r.dist_to_scaled_subdiff(&[0.8, 0.0], 0.8, &anchor).unwrap(),
            0.0
        );
        let bad = SubdiffAnchor {
            anchor: vec![1.0, 0.0],
            support: vec![1],
            signs: vec![1.0],
        };
        assert!(matches!(
            r.dist_to_scaled_subdiff(&g, 1.0, &bad),
            Err(Error::InconsistentAnchor(_))
        ));
        let flipped = SubdiffAnchor {
            anchor: vec![1.0, 0.0],
            support: vec![0],
            signs: vec![-1.0],
        };
        assert!(r.dist_to_scaled_subdiff(&g, 1.0, &flipped).is_err());
    }

    #[test]
    fn compatibility_and_radius() {
        assert_eq!(Regularizer::l1(1).compatibility_alpha(), 1.0);
        assert_eq!(Regularizer::l1(9).compatibility_alpha(), 3.0);
        assert_eq!(blk(8, 2).compatibility_alpha(), 2.0);
        assert_eq!(Regularizer::l1(5).ball_radius_r(), 1.0);
        assert_eq!(blk(8, 2).ball_radius_r(), 1.0);
    }

    #[test]
    fn compatibility_block_by_random_search() {
        // maximize f(u)/‖u‖ over random u; all-equal block norms attain √4
        let r = blk(8, 2);
        let mut rng = crate::rng::stream_rng(3, 0);
        let mut best = 0.0f64;
        for _ in 0..20_000 {
            let u: Vec<f64> = (0..8).map(|_| f64::standard_normal(&mut rng)).collect();
            best = best.max(r.value(&u).unwrap() / norm2(&u));
        }
        assert!(best <= 2.0 + 1e-12 && best > 1.9, "{best}");
        let flat = [1.0f64, 0.0, 0.0, 1.0, 0.6, 0.8, 1.0, 0.0];
        assert!((r.value(&flat).unwrap() / norm2(&flat) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn radius_by_random_unit_norm_points() {
        let mut rng = crate::rng::stream_rng(4, 0);
        for r in [Regularizer::l1(6), blk(6, 3)] {
            let mut best = 0.0f64;
            for _ in 0..100_000 {
                // sparse-ish draws get close to the extreme points
                let u: Vec<f64> = (0..6)
                    .map(|_| f64::standard_normal(&mut rng).powi(5))
                    .collect();
                let f = r.value(&u).unwrap();
                if f > 0.0 {
                    best = best.max(norm2(&u) / f);
                }
            }
            assert!(best <= 1.0 + 1e-12 && best > 0.95, "{best}");
        }
    }

    #[test]
    fn descent_cone_examples() {
        let r = Regularizer::l1(3);
        let anchor = r.anchor(&[2.0, 0.0, -1.0]).unwrap();
        // gauss inside ∂f: sign on support, |·| ≤ 1 off support
        assert!(r.dist_to_descent_cone(&[1.0, 0.5, -1.0], &anchor).unwrap() < 1e-6);
        // dense anchor: normal cone is the ray spanned by the sign vector
        let dense = r.anchor(&[1.0, -3.0, 0.5]).unwrap();
        let sign = [1.0, -1.0, 1.0];
        for g in [[0.3, -1.2, 0.4], [-2.0, 0.5, 0.1], [0.0, 0.0, 0.0]] {
            let t = (dot(&g, &sign) / 3.0f64).max(0.0);
            let expect = norm2(&[g[0] - t, g[1] + t, g[2] - t]);
            let got = r.dist_to_descent_cone(&g, &dense).unwrap();
            assert!((got - expect).abs() < 1e-7, "{got} vs {expect}");
        }
    }

    #[test]
    fn block_subdiff_distance_formula() {
        let r = blk(4, 2);
        let anchor = r.anchor(&[3.0, 4.0, 0.0, 0.0]).unwrap();
        let g = [1.0, 1.0, 2.0, 0.0];
        let tau = 1.5;
        let d = r.dist_to_scaled_subdiff(&g, tau, &anchor).unwrap();
        let expect =
            ((1.0 - 1.5 * 0.6f64).powi(2) + (1.0 - 1.5 * 0.8f64).powi(2) + 0.5f64.powi(2)).sqrt();
        assert!((d - expect).abs() < 1e-14);
    }

    #[test]
    fn directional_derivative_matches_definition() {
        let r = Regularizer::l1(3);
        let x = [1.0, 0.0, -2.0];
        let anchor = r.anchor(&x).unwrap();
        let a = [0.3, -0.7, 0.2];
        let h = 1e-7;
        let xp: Vec<f64> = x.iter().zip(&a).map(|(x, a)| x + h * a).collect();
        let fd = (r.value(&xp).unwrap() - r.value(&x).unwrap()) / h;
        assert!((r.directional_derivative(&anchor, &a) - fd).abs() < 1e-6);
    }

    #[test]
    fn works_in_f32() {
        let r = Regularizer::l1(3);
        let p = r.prox(&[3.0f32, -0.5, 1.0], 1.0).unwrap();
        assert_eq!(p, vec![2.0f32, 0.0, 0.0]);
        let anchor = r.anchor(&[1.0f32, 0.0, 0.0]).unwrap();
        assert!(
            r.dist_to_descent_cone(&[1.0f32, 0.2, -0.3], &anchor)
                .unwrap()
                < 1e-3
        );
    }

    fn vec_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-5.0f64..5.0, len)
    }

    fn regs() -> impl Strategy<Value = Regularizer> {
        prop_oneof![Just(Regularizer::l1(6)), Just(blk(6, 2)), Just(blk(6, 3))]
    }

    proptest! {
        #[test]
        fn norm_axioms(r in regs(), a in vec_strategy(6), b in vec_strategy(6), c in -3.0f64..3.0) {
            let fa = r.value(&a).unwrap();
            let fb = r.value(&b).unwrap();
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            prop_assert!(fa >= 0.0);
            prop_assert!(r.value(&sum).unwrap() <= fa + fb + 1e-12);
            let sc: Vec<f64> = a.iter().map(|x| c * x).collect();
            prop_assert!((r.value(&sc).unwrap() - c.abs() * fa).abs() <= 1e-12 * (1.0 + fa));
        }

        #[test]
        fn duality_holds(r in regs(), w in vec_strategy(6), u in vec_strategy(6)) {
            let lhs = dot(&w, &u);
            prop_assert!(lhs <= r.value(&u).unwrap() * r.dual_value(&w).unwrap() + 1e-12);
            let star = r.dual_attaining(&w).unwrap();
            prop_assert!((r.value(&star).unwrap() - 1.0).abs() < 1e-12);
            prop_assert!((dot(&w, &star) - r.dual_value(&w).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn moreau_decomposition(r in regs(), w in vec_strategy(6), t in 0.01f64..4.0) {
            let p = r.prox(&w, t).unwrap();
            let scaled: Vec<f64> = w.iter().map(|x| x / t).collect();
            let q = r.project_dual_ball(&scaled, 1.0).unwrap();
            for i in 0..6 {
                prop_assert!((w[i] - p[i] - t * q[i]).abs() < 1e-10);
            }
        }

        #[test]
        fn l1_prox_subgradient_condition(w in vec_strategy(6), t in 0.0f64..3.0) {
            let p = Regularizer::l1(6).prox(&w, t).unwrap();
            for i in 0..6 {
                let r = w[i] - p[i];
                if p[i] != 0.0 {
                    prop_assert!((r - t * p[i].signum()).abs() < 1e-12);
                } else {
                    prop_assert!(r.abs() <= t + 1e-12);
                }
            }
        }

        #[test]
        fn projection_idempotent(r in regs(), w in vec_strategy(6), radius in 0.0f64..6.0) {
            let p = r.project_ball(&w, radius).unwrap();
            prop_assert!(r.value(&p).unwrap() <= radius * (1.0 + 1e-12) + 1e-12);
            let pp = r.project_ball(&p, radius).unwrap();
            for i in 0..6 {
                prop_assert!((p[i] - pp[i]).abs() < 1e-12);
            }
        }

        #[test]
        fn subdiff_distance_is_lipschitz(w in vec_strategy(6), v in vec_strategy(6), tau in 0.0f64..3.0) {
            let r = Regularizer::l1(6);
            let anchor = r.anchor(&[1.0, 0.0, -1.0, 0.0, 0.0, 2.0]).unwrap();
            let dw = r.dist_to_scaled_subdiff(&w, tau, &anchor).unwrap();
            let dv = r.dist_to_scaled_subdiff(&v, tau, &anchor).unwrap();
            prop_assert!((dw - dv).abs() <= crate::linalg::dist2(&w, &v) + 1e-12);
        }
    }
}
