//! Small statistics helpers shared by the estimators.

#[allow(unused_imports)]
use nalgebra::ComplexField;
use serde::{Deserialize, Serialize};

/// Weighted least-squares line `y = intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero for exact fits or fewer than three points.
    pub slope_se: f64,
}

/// Fits a line; `weights = None` means ordinary least squares.
pub fn linear_fit(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n || weights.is_some_and(|w| w.len() != n) {
        return None;
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..n).map(w).sum();
    if !(sw > 0.0) {
        return None;
    }
    let mx = (0..n).map(|i| w(i) * xs[i]).sum::<f64>() / sw;
    let my = (0..n).map(|i| w(i) * ys[i]).sum::<f64>() / sw;
    let sxx: f64 = (0..n).map(|i| w(i) * (xs[i] - mx) * (xs[i] - mx)).sum();
    let sxy: f64 = (0..n).map(|i| w(i) * (xs[i] - mx) * (ys[i] - my)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if n > 2 {
        let rss: f64 = (0..n)
            .map(|i| {
                let r = ys[i] - intercept - slope * xs[i];
                w(i) * r * r
            })
            .sum();
        (rss / (n as f64 - 2.0) / sxx).max(0.0).sqrt()
    } else {
        0.0
    };
    Some(LinearFit {
        slope,
        intercept,
        slope_se,
    })
}

/// Sample mean with its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub count: usize,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se, count: n }
    }

    /// `|mean − target| ≤ k·se`, with an exact comparison when `se = 0`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se
    }
}

/// Means of `batches` contiguous blocks (the tail block absorbs the remainder).
pub fn batch_means(values: &[f64], batches: usize) -> alloc::vec::Vec<f64> {
    let batches = batches.max(1).min(values.len().max(1));
    let size = values.len() / batches;
    (0..batches)
        .map(|b| {
            let lo = b * size;
            let hi = if b + 1 == batches { values.len() } else { lo + size };
            let block = &values[lo..hi];
            block.iter().sum::<f64>() / block.len().max(1) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let fit = linear_fit(&xs, &ys, None).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14);
        assert!((fit.intercept - 1.0).abs() < 1e-14);
        assert!(fit.slope_se < 1e-12);
    }

    #[test]
    fn mean_and_error() {
        let m = MeanSe::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.se - (5.0f64 / 12.0).sqrt()).abs() < 1e-14);
        assert_eq!(batch_means(&[1.0, 2.0, 3.0, 4.0, 5.0], 2), alloc::vec![1.5, 4.0]);
    }
}
