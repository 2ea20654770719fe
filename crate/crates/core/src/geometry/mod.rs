//! Monte Carlo estimates and plug-in bounds for Gaussian widths, complexities and
//! squared distances of the cones that govern recovery.
//!
//! Every estimator keys sample `i` to its own random stream, so the estimates do not
//! depend on the number of worker threads. Sums use pairwise reduction.

mod cone;
mod deviation;

pub use cone::{
    mc_gamma_cone, mc_gamma_convex, ConeKind, ConeSpec, ConvexCone, FullSpace, InnerConfig,
    ProductCone, TangentCone, ZeroCone,
};
pub use deviation::{
    check_deviation_inequality, check_sup_ip, fit_constant, DeviationSet, ViolationRate,
    ViolationReport,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;
use crate::regularizer::{Regularizer, SubdiffAnchor};
use crate::rng::{stream_rng, StreamRng};
use crate::scalar::Scalar;

pub const MIN_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    Width,
    Complexity,
    SqDistance,
    Radius,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
    pub kind: EstimateKind,
}

#[derive(Serialize)]
struct GeometryRecord<'a> {
    kind: EstimateKind,
    mean: f64,
    std_error: f64,
    samples: usize,
    config_hash: &'a str,
}

impl GeometryEstimate {
    pub fn from_samples(kind: EstimateKind, values: &[f64]) -> Result<Self> {
        check_samples(values.len())?;
        let n = values.len() as f64;
        let mean = pairwise_sum(values) / n;
        let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
        let var = pairwise_sum(&sq) / (n - 1.0);
        Ok(Self {
            mean,
            std_error: (var / n).sqrt(),
            samples: values.len(),
            kind,
        })
    }

    /// Exact value with zero sampling error.
    pub fn exact(kind: EstimateKind, value: f64, samples: usize) -> Self {
        Self {
            mean: value,
            std_error: 0.0,
            samples,
            kind,
        }
    }

    /// `{kind, mean, std_error, samples, config_hash}` with the hash of `config`.
    pub fn to_json(&self, config: &impl Serialize) -> Result<String> {
        let hash = config_hash(config)?;
        Ok(serde_json::to_string(&GeometryRecord {
            kind: self.kind,
            mean: self.mean,
            std_error: self.std_error,
            samples: self.samples,
            config_hash: &hash,
        })?)
    }
}

/// Hex SHA-256 of the compact JSON form of `config`.
pub fn config_hash(config: &impl Serialize) -> Result<String> {
    let digest = Sha256::digest(serde_json::to_vec(config)?);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter {
            name: "samples",
            requirement: "at least 100",
            value: samples as f64,
        });
    }
    Ok(())
}

pub(crate) fn gaussian_vec(rng: &mut StreamRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| f64::standard_normal(rng)).collect()
}

/// Evaluate `f` on `samples` independent streams of `seed`, in sample order.
pub(crate) fn sample_par<F>(samples: usize, seed: u64, f: F) -> Vec<f64>
where
    F: Fn(&mut StreamRng) -> f64 + Sync,
{
    (0..samples)
        .into_par_iter()
        .map(|i| f(&mut stream_rng(seed, i as u64)))
        .collect()
}

/// Gaussian squared distance to `tau·∂f(anchor)`.
pub fn mc_eta_sq(
    reg: &Regularizer,
    tau: f64,
    anchor: &SubdiffAnchor<f64>,
    samples: usize,
    seed: u64,
) -> Result<GeometryEstimate> {
    check_samples(samples)?;
    reg.validate_anchor(anchor)?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "tau",
            requirement: "finite and nonnegative",
            value: tau,
        });
    }
    let values = sample_par(samples, seed, |rng| {
        let g = gaussian_vec(rng, reg.dim);
        reg.dist_sq_to_scaled_subdiff_unchecked(&g, tau, anchor)
    });
    GeometryEstimate::from_samples(EstimateKind::SqDistance, &values)
}

/// Squared distances `η²(λ₁∂f)` and `η²(λλ₁∂g)` at the scale `λ₁ ≥ 0` minimizing their
/// sum, which gives the tightest partially penalized complexity bound. All scales share
/// the same Gaussian draws.
pub fn mc_eta_sq_pair_best(
    f: &Regularizer,
    g: &Regularizer,
    anchor_f: &SubdiffAnchor<f64>,
    anchor_g: &SubdiffAnchor<f64>,
    lambda: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, GeometryEstimate, GeometryEstimate)> {
    check_samples(samples)?;
    f.validate_anchor(anchor_f)?;
    g.validate_anchor(anchor_g)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            requirement: "finite and positive",
            value: lambda,
        });
    }
    let draws: Vec<(Vec<f64>, Vec<f64>)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            (gaussian_vec(&mut rng, f.dim), gaussian_vec(&mut rng, g.dim))
        })
        .collect();
    let parts = |l1: f64| -> (Vec<f64>, Vec<f64>) {
        draws
            .par_iter()
            .map(|(a, b)| {
                (
                    f.dist_sq_to_scaled_subdiff_unchecked(a, l1, anchor_f),
                    g.dist_sq_to_scaled_subdiff_unchecked(b, lambda * l1, anchor_g),
                )
            })
            .unzip()
    };
    let total = |l1: f64| {
        let (a, b) = parts(l1);
        pairwise_sum(&a) + pairwise_sum(&b)
    };
    let hi = (f.dim as f64).sqrt().max(1.0);
    let (l1, _) = crate::optim1d::minimize_nonneg(total, hi, 1e-6);
    let (a, b) = parts(l1);
    Ok((
        l1,
        GeometryEstimate::from_samples(EstimateKind::SqDistance, &a)?,
        GeometryEstimate::from_samples(EstimateKind::SqDistance, &b)?,
    ))
}

/// Width of the tangent cone of `reg` at the anchor, through `E dist(g, cone(∂f))`.
///
/// This is exactly the width of the tangent cone intersected with the unit ball, which
/// upper-bounds the width of its intersection with the sphere.
pub fn mc_width_tangent(
    reg: &Regularizer,
    anchor: &SubdiffAnchor<f64>,
    samples: usize,
    seed: u64,
) -> Result<GeometryEstimate> {
    check_samples(samples)?;
    reg.validate_anchor(anchor)?;
    let values = sample_par(samples, seed, |rng| {
        let g = gaussian_vec(rng, reg.dim);
        reg.descent_cone_scale(&g, anchor).1.max(0.0).sqrt()
    });
    GeometryEstimate::from_samples(EstimateKind::Width, &values)
}

/// `2·(ω_f + ω_g + 1)`
pub fn gamma_bound_c1(width_f: &GeometryEstimate, width_g: &GeometryEstimate) -> f64 {
    2.0 * (width_f.mean + width_g.mean + 1.0)
}

/// `2·√(η_f² + η_g²) + 1`, with the squared distances taken at scales `λ₁` and `λ₂ = λ·λ₁`.
pub fn gamma_bound_c2(eta_f: &GeometryEstimate, eta_g: &GeometryEstimate) -> f64 {
    2.0 * (eta_f.mean + eta_g.mean).max(0.0).sqrt() + 1.0
}

/// `2·[√(η_f² + η_g²) + (τ₁α_f + τ₂α_g)/β] + 1`, squared distances at scales `τ₁`, `τ₂`.
pub fn gamma_bound_c3(
    eta_f: &GeometryEstimate,
    eta_g: &GeometryEstimate,
    tau1: f64,
    tau2: f64,
    alpha_f: f64,
    alpha_g: f64,
    beta: f64,
) -> Result<f64> {
    check_beta(beta)?;
    let root = (eta_f.mean + eta_g.mean).max(0.0).sqrt();
    Ok(2.0 * (root + (tau1 * alpha_f + tau2 * alpha_g) / beta) + 1.0)
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if beta > 1.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "beta",
            requirement: "finite and > 1",
            value: beta,
        })
    }
}

/// Radius of the unit `reg`-ball and its Gaussian complexity `E f*(g)`, exact per draw.
pub fn rad_and_gamma_ball(
    reg: &Regularizer,
    samples: usize,
    seed: u64,
) -> Result<(f64, GeometryEstimate)> {
    check_samples(samples)?;
    reg.validate()?;
    let values = sample_par(samples, seed, |rng| {
        let g = gaussian_vec(rng, reg.dim);
        reg.dual_value_unchecked(&g)
    });
    Ok((
        reg.ball_radius_r(),
        GeometryEstimate::from_samples(EstimateKind::Complexity, &values)?,
    ))
}

/// `E χ_d`, the mean norm of a standard Gaussian vector in `d` dimensions.
pub fn chi_mean(d: usize) -> f64 {
    // E χ_d · E χ_{d+1} = d
    let mut c = (2.0 / std::f64::consts::PI).sqrt();
    if d == 0 {
        return 0.0;
    }
    for k in 1..d {
        c = k as f64 / c;
    }
    c
}
