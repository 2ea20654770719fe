//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF by quadrature of the density.
pub fn normal_cdf(x: f64) -> f64 {
    if x >= 0.0 {
        0.5 + simpson(normal_pdf, 0.0, x, 2000)
    } else {
        0.5 - simpson(normal_pdf, 0.0, -x, 2000)
    }
}

/// Lanczos approximation of ln Γ(x), x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, &c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `E‖g‖₂` for `g ~ N(0, I_d)`.
pub fn chi_mean_oracle(d: usize) -> f64 {
    let d = d as f64;
    (2f64.ln() / 2.0 + ln_gamma((d + 1.0) / 2.0) - ln_gamma(d / 2.0)).exp()
}

/// `E(|g| − τ)₊²` by quadrature.
pub fn soft_excess_sq(tau: f64) -> f64 {
    2.0 * simpson(|x| (x - tau).powi(2) * normal_pdf(x), tau, tau + 40.0, 8000)
}

/// `s(1 + τ²) + (n − s)·E(|g| − τ)₊²`
pub fn l1_eta_sq_oracle(n: usize, s: usize, tau: f64) -> f64 {
    s as f64 * (1.0 + tau * tau) + (n - s) as f64 * soft_excess_sq(tau)
}

fn block_objective(u: &[f64], w: &[f64], t: f64) -> f64 {
    let sq: f64 = u.iter().zip(w).map(|(a, b)| (a - b).powi(2)).sum();
    0.5 * sq + t * u.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Nonzero stationary point of `½‖u − w‖² + t‖u‖₂` by damped Newton, if one exists.
fn newton_block(w: &[f64], t: f64) -> Option<Vec<f64>> {
    use nalgebra::{DMatrix, DVector};
    let d = w.len();
    let mut u = DVector::from_column_slice(w);
    let wv = DVector::from_column_slice(w);
    if u.norm() == 0.0 {
        return None;
    }
    for _ in 0..200 {
        let r = u.norm();
        if r == 0.0 {
            return None;
        }
        let grad = &u - &wv + &u * (t / r);
        if grad.norm() < 1e-14 * (1.0 + wv.norm()) {
            break;
        }
        let h =
            DMatrix::<f64>::identity(d, d) * (1.0 + t / r) - (&u * u.transpose()) * (t / r.powi(3));
        let step = h.lu().solve(&grad)?;
        let f0 = block_objective(u.as_slice(), w, t);
        let mut a = 1.0;
        loop {
            let cand = &u - &step * a;
            if block_objective(cand.as_slice(), w, t) <= f0 || a < 1e-12 {
                u = cand;
                break;
            }
            a *= 0.5;
        }
    }
    let r = u.norm();
    let grad = &u - &wv + &u * (t / r.max(f64::MIN_POSITIVE));
    (r > 0.0 && grad.norm() < 1e-10 * (1.0 + wv.norm())).then(|| u.as_slice().to_vec())
}

/// Minimizer of `½‖u − w‖² + t·Σ_b ‖u_b‖₂`: per block, the better of zero and the Newton
/// stationary point.
pub fn prox_oracle(w: &[f64], block: usize, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(w.len());
    for wb in w.chunks(block) {
        let zero = vec![0.0; wb.len()];
        let best = match newton_block(wb, t) {
            Some(u) if block_objective(&u, wb, t) < block_objective(&zero, wb, t) => u,
            _ => zero,
        };
        out.extend(best);
    }
    out
}

/// Projection onto `{Σ_b ‖u_b‖₂ ≤ R}` by enumerating every set of active blocks and keeping
/// the nearest feasible KKT candidate.
pub fn ball_projection_oracle(w: &[f64], block: usize, radius: f64) -> Vec<f64> {
    let norms: Vec<f64> = w
        .chunks(block)
        .map(|b| b.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if norms.iter().sum::<f64>() <= radius {
        return w.to_vec();
    }
    if radius == 0.0 {
        return vec![0.0; w.len()];
    }
    let nb = norms.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << nb) {
        let active: Vec<usize> = (0..nb).filter(|b| mask >> b & 1 == 1).collect();
        let theta = (active.iter().map(|&b| norms[b]).sum::<f64>() - radius) / active.len() as f64;
        if theta < 0.0 || active.iter().any(|&b| norms[b] <= theta) {
            continue;
        }
        let mut u = vec![0.0; w.len()];
        for &b in &active {
            let c = 1.0 - theta / norms[b];
            for i in b * block..(b + 1) * block {
                u[i] = c * w[i];
            }
        }
        let d: f64 = u.iter().zip(w).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, u));
        }
    }
    best.expect("some active set is feasible").1
}

/// Distance from `g` to `τ·∂‖·‖₁(x)`, written as a box: fixed entries on the support,
/// `[−τ, τ]` elsewhere.
pub fn l1_subdiff_dist_oracle(g: &[f64], x: &[f64], tau: f64) -> f64 {
    g.iter()
        .zip(x)
        .map(|(&gi, &xi)| {
            let p = if xi != 0.0 {
                tau * xi.signum()
            } else {
                gi.clamp(-tau, tau)
            };
            (gi - p).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// `min_τ≥0` of [`l1_subdiff_dist_oracle`] by a dense τ grid followed by ternary refinement.
pub fn l1_descent_dist_oracle(g: &[f64], x: &[f64]) -> f64 {
    let hi = 10.0 * g.iter().fold(0.0f64, |a, v| a.max(v.abs())) + 1.0;
    let steps = 4000;
    let h = hi / steps as f64;
    let d = |t: f64| l1_subdiff_dist_oracle(g, x, t);
    let best = (0..=steps)
        .min_by(|&a, &b| d(a as f64 * h).total_cmp(&d(b as f64 * h)))
        .unwrap();
    let (mut lo, mut up) = (((best as f64) - 1.0).max(0.0) * h, (best as f64 + 1.0) * h);
    for _ in 0..200 {
        let a = lo + (up - lo) / 3.0;
        let b = up - (up - lo) / 3.0;
        if d(a) <= d(b) {
            up = b;
        } else {
            lo = a;
        }
    }
    d(0.5 * (lo + up)).min(d(0.0))
}
