use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    chi_mean, gaussian_vec, mc_gamma_cone, rad_and_gamma_ball, sample_par, ConeSpec, InnerConfig,
};
use crate::error::{Error, Result};
use crate::linalg::{norm2, orthonormalize, symmetric_eigenvalues, Matrix};
use crate::model::{gen_sensing_matrix, EnsembleSpec};
use crate::regularizer::Regularizer;
use crate::rng::{derive_seed, stream_rng};

const GAMMA_SAMPLES: usize = 10_000;
const SALT_GAMMA: u64 = 0x6761;
const SALT_DIRECTIONS: u64 = 0x6469;
const SALT_TRIALS: u64 = 0x7472;

/// A subset of `Rⁿ × Rᵐ` over whose unit-sphere part the deviation is taken.
#[derive(Debug, Clone)]
pub enum DeviationSet {
    /// Unit sphere of a linear subspace; the supremum is exact through extreme singular values.
    Subspace { n: usize, basis: Vec<Vec<f64>> },
    /// Finitely many directions, normalized on construction.
    Points { n: usize, points: Vec<Vec<f64>> },
    /// A recovery cone, represented by `directions` fixed maximizers of Gaussian draws;
    /// the supremum over them is a lower bound of the supremum over the cone.
    Cone {
        spec: Box<ConeSpec>,
        directions: usize,
    },
}

impl DeviationSet {
    pub fn subspace(n: usize, spanning: &[Vec<f64>]) -> Result<Self> {
        let basis = orthonormalize(spanning);
        if basis.is_empty() {
            return Err(Error::InvalidSpec(
                "subspace spanned by no nonzero vector".into(),
            ));
        }
        Ok(Self::Subspace { n, basis })
    }

    pub fn points(n: usize, points: &[Vec<f64>]) -> Result<Self> {
        let mut out = Vec::with_capacity(points.len());
        for p in points {
            let nrm = norm2(p);
            if nrm == 0.0 || !nrm.is_finite() {
                return Err(Error::InvalidSpec(
                    "deviation point must be nonzero and finite".into(),
                ));
            }
            out.push(p.iter().map(|v| v / nrm).collect());
        }
        if out.is_empty() {
            return Err(Error::InvalidSpec("empty point set".into()));
        }
        Ok(Self::Points { n, points: out })
    }

    fn signal_dim(&self) -> usize {
        match self {
            Self::Subspace { n, .. } | Self::Points { n, .. } => *n,
            Self::Cone { spec, .. } => spec.f.dim,
        }
    }

    fn total_dim(&self) -> usize {
        match self {
            Self::Subspace { basis, .. } => basis[0].len(),
            Self::Points { points, .. } => points[0].len(),
            Self::Cone { spec, .. } => spec.f.dim + spec.g.dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViolationRate {
    pub t: f64,
    /// Fraction of trials above the fitted threshold.
    pub rate: f64,
    /// Tail level `e^{−t²}`.
    pub allowed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub trials: usize,
    /// Ensemble ψ₂ budget used in the threshold.
    pub k: f64,
    pub gamma_hat: f64,
    pub radius: f64,
    pub fitted_c: f64,
    pub rates: Vec<ViolationRate>,
    /// Per-trial suprema, in trial order.
    #[serde(skip)]
    pub values: Vec<f64>,
}

impl ViolationReport {
    pub fn within_tail_bound(&self) -> bool {
        self.rates.iter().all(|r| r.rate <= r.allowed)
    }

    pub fn non_increasing(&self) -> bool {
        self.rates.windows(2).all(|w| w[1].rate <= w[0].rate)
    }
}

/// Smallest `C` with `#{v > C·scale(t)} ≤ ⌊e^{−t²}·N⌋` for every `t` in the grid.
pub fn fit_constant(values: &[f64], t_grid: &[f64], scale: impl Fn(f64) -> f64) -> f64 {
    let mut desc = values.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    t_grid
        .iter()
        .filter_map(|&t| {
            let allowed = ((-t * t).exp() * desc.len() as f64).floor() as usize;
            desc.get(allowed).map(|v| v / scale(t))
        })
        .fold(0.0, f64::max)
}

fn build_report(
    values: Vec<f64>,
    t_grid: &[f64],
    k: f64,
    gamma_hat: f64,
    radius: f64,
    scale: impl Fn(f64) -> f64,
) -> ViolationReport {
    let fitted_c = fit_constant(&values, t_grid, &scale);
    let n = values.len() as f64;
    let rates = t_grid
        .iter()
        .map(|&t| {
            let s = scale(t);
            let over = values.iter().filter(|&&v| v / s > fitted_c).count();
            ViolationRate {
                t,
                rate: over as f64 / n,
                allowed: (-t * t).exp(),
            }
        })
        .collect();
    ViolationReport {
        trials: values.len(),
        k,
        gamma_hat,
        radius,
        fitted_c,
        rates,
        values,
    }
}

fn check_grid(t_grid: &[f64], trials: usize) -> Result<()> {
    if t_grid.is_empty() || t_grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::InvalidSpec(
            "t grid must be non-empty with finite t ≥ 0".into(),
        ));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter {
            name: "trials",
            requirement: "at least 1",
            value: 0.0,
        });
    }
    Ok(())
}

/// Empirical check of the deviation event
/// `sup |‖A a + √m b‖ − √m| ≤ C K² (γ + t)` over the unit-sphere part of `set`, with
/// `A = √m·Φ` the unit-variance sensing matrix. `m` is the corruption dimension of `set`.
pub fn check_deviation_inequality(
    set: &DeviationSet,
    ensemble: &EnsembleSpec,
    t_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<ViolationReport> {
    ensemble.validate()?;
    check_grid(t_grid, trials)?;
    let n = set.signal_dim();
    let m = set.total_dim() - n;
    if m == 0 {
        return Err(Error::InvalidSpec(
            "deviation set needs a corruption part".into(),
        ));
    }
    let gamma_seed = derive_seed(seed, SALT_GAMMA);
    let (gamma_hat, directions) = match set {
        DeviationSet::Subspace { basis, .. } => (chi_mean(basis.len()), Vec::new()),
        DeviationSet::Points { points, .. } => {
            let vals = sample_par(GAMMA_SAMPLES, gamma_seed, |rng| {
                let w = gaussian_vec(rng, n + m);
                points
                    .iter()
                    .map(|p| crate::linalg::dot(p, &w).abs())
                    .fold(0.0, f64::max)
            });
            (
                crate::linalg::pairwise_sum(&vals) / vals.len() as f64,
                points.clone(),
            )
        }
        DeviationSet::Cone { spec, directions } => {
            let inner = InnerConfig::default();
            let est = mc_gamma_cone(spec, GAMMA_SAMPLES, gamma_seed, &inner)?;
            let dir_seed = derive_seed(seed, SALT_DIRECTIONS);
            let dirs: Vec<Vec<f64>> = (0..*directions)
                .filter_map(|i| {
                    let w = gaussian_vec(&mut stream_rng(dir_seed, i as u64), n + m);
                    spec.sup_abs(&w, &inner)
                        .map(|(_, d)| d)
                        .filter(|d| norm2(d) > 0.0)
                })
                .collect();
            if dirs.is_empty() {
                return Err(Error::InvalidSpec("cone yielded no unit directions".into()));
            }
            (est.mean, dirs)
        }
    };
    let sqrt_m = (m as f64).sqrt();
    let trial_seed = derive_seed(seed, SALT_TRIALS);
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let phi: Matrix<f64> =
                gen_sensing_matrix(m, n, ensemble, derive_seed(trial_seed, i as u64))?;
            // ‖A a + √m b‖ = √m ‖Φ a + b‖
            let image = |u: &[f64]| -> Vec<f64> {
                let mut out = vec![0.0; m];
                phi.mul_vec_into(&u[..n], &mut out);
                out.iter_mut()
                    .zip(&u[n..])
                    .for_each(|(o, b)| *o = (*o + b) * sqrt_m);
                out
            };
            Ok(match set {
                DeviationSet::Subspace { basis, .. } => {
                    let images: Vec<Vec<f64>> = basis.iter().map(|b| image(b)).collect();
                    let d = images.len();
                    let gram =
                        Matrix::from_fn(d, d, |r, c| crate::linalg::dot(&images[r], &images[c]));
                    let eig = symmetric_eigenvalues(&gram);
                    let lo = eig[0].max(0.0).sqrt();
                    let hi = eig[d - 1].max(0.0).sqrt();
                    (hi - sqrt_m).max(sqrt_m - lo)
                }
                _ => directions
                    .iter()
                    .map(|u| (norm2(&image(u)) - sqrt_m).abs())
                    .fold(0.0, f64::max),
            })
        })
        .collect::<Result<_>>()?;
    let k = ensemble.k();
    let k2 = k * k;
    Ok(build_report(values, t_grid, k, gamma_hat, 1.0, |t| {
        k2 * (gamma_hat + t)
    }))
}

/// Empirical check of `sup_{u ∈ B} ⟨A u, w⟩ ≤ C K ‖w‖ (γ(B) + t·rad(B))` for the unit ball
/// `B` of `ball`, with `A = √m·Φ`. The supremum is the dual norm of `Aᵀw`, exact per trial.
pub fn check_sup_ip(
    ensemble: &EnsembleSpec,
    w: &[f64],
    ball: &Regularizer,
    t_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<ViolationReport> {
    ensemble.validate()?;
    ball.validate()?;
    check_grid(t_grid, trials)?;
    let (n, m) = (ball.dim, w.len());
    let (radius, gamma) = rad_and_gamma_ball(ball, GAMMA_SAMPLES, derive_seed(seed, SALT_GAMMA))?;
    let sqrt_m = (m as f64).sqrt();
    let trial_seed = derive_seed(seed, SALT_TRIALS);
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let phi: Matrix<f64> =
                gen_sensing_matrix(m, n, ensemble, derive_seed(trial_seed, i as u64))?;
            let atw: Vec<f64> = phi.tr_mul_vec(w)?.iter().map(|v| v * sqrt_m).collect();
            Ok(ball.dual_value_unchecked(&atw))
        })
        .collect::<Result<_>>()?;
    let k = ensemble.k();
    let wn = norm2(w);
    if wn == 0.0 {
        let rates = t_grid
            .iter()
            .map(|&t| ViolationRate {
                t,
                rate: 0.0,
                allowed: (-t * t).exp(),
            })
            .collect();
        return Ok(ViolationReport {
            trials,
            k,
            gamma_hat: gamma.mean,
            radius,
            fitted_c: 0.0,
            rates,
            values,
        });
    }
    let g = gamma.mean;
    Ok(build_report(values, t_grid, k, g, radius, |t| {
        k * wn * (g + t * radius)
    }))
}
