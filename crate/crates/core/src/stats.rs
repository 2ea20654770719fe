//! Small aggregation helpers for experiment summaries.

use crate::linalg::pairwise_sum;

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(values) / values.len() as f64
}

/// Standard error of a success proportion over `n` trials.
pub fn binomial_se(rate: f64, n: usize) -> f64 {
    (rate * (1.0 - rate) / n as f64).sqrt()
}

/// Weighted least-squares non-decreasing fit (pool adjacent violators).
pub fn isotonic_increasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    // blocks of (weighted mean, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (b, a) = (blocks[blocks.len() - 1], blocks[blocks.len() - 2]);
            if a.0 <= b.0 {
                break;
            }
            let w = a.1 + b.1;
            let merged = ((a.0 * a.1 + b.0 * b.1) / w, w, a.2 + b.2);
            blocks.truncate(blocks.len() - 2);
            blocks.push(merged);
        }
    }
    blocks
        .iter()
        .flat_map(|&(v, _, len)| std::iter::repeat_n(v, len))
        .collect()
}

/// Least-squares slope of `y ≈ b·x` and its coefficient of determination against the
/// centered total sum of squares.
pub fn fit_through_origin(x: &[f64], y: &[f64]) -> (f64, f64) {
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let slope = sxy / sxx;
    let my = mean(y);
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    (slope, 1.0 - ss_res / ss_tot)
}

/// First abscissa where the piecewise-linear curve through `(xs, ys)` reaches `level`.
pub fn first_crossing(xs: &[f64], ys: &[f64], level: f64) -> Option<f64> {
    if ys.first().is_some_and(|&y| y >= level) {
        return xs.first().copied();
    }
    xs.windows(2).zip(ys.windows(2)).find_map(|(x, y)| {
        (y[0] < level && y[1] >= level)
            .then(|| x[0] + (level - y[0]) / (y[1] - y[0]) * (x[1] - x[0]))
    })
}
