//! Small numerical helpers shared by the estimators.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, DefaultHasher};

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

/// Hash map with a fixed hasher: iteration order, and so floating-point
/// accumulation order, is the same in every run.
pub type DetMap<K, V> = HashMap<K, V, BuildHasherDefault<DefaultHasher>>;

/// `DetMap` holding a single entry.
pub fn det_map_of<K: std::hash::Hash + Eq, V>(k: K, v: V) -> DetMap<K, V> {
    let mut m = DetMap::default();
    m.insert(k, v);
    m
}

/// 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Neumaier-compensated sum.
pub fn stable_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean and the half-width of its normal 95% interval.
pub fn mean_ci(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = stable_sum(xs.iter().copied()) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = stable_sum(xs.iter().map(|x| (x - mean).powi(2))) / (n - 1.0);
    (mean, Z95 * (var / n).sqrt())
}

/// Sample standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// A Bernoulli frequency with its normal 95% half-width.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Proportion {
    pub events: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_halfwidth: f64,
}

impl Proportion {
    pub fn new(events: u64, trials: u64) -> Proportion {
        let estimate = if trials == 0 { 0.0 } else { events as f64 / trials as f64 };
        let ci_halfwidth = if trials == 0 { 0.0 } else { Z95 * (estimate * (1.0 - estimate) / trials as f64).sqrt() };
        Proportion { events, trials, estimate, ci_halfwidth }
    }
}

/// A multinomial resample of `counts`, drawn as a chain of conditional binomials.
pub fn multinomial_resample<R: Rng + ?Sized>(counts: &[u64], rng: &mut R) -> Vec<u64> {
    let total: u64 = counts.iter().sum();
    let mut left = total;
    let mut mass = total;
    let mut out = Vec::with_capacity(counts.len());
    for &c in counts {
        if left == 0 || mass == 0 {
            out.push(0);
            continue;
        }
        let q = (c as f64 / mass as f64).min(1.0);
        let x = if q >= 1.0 { left } else { Binomial::new(left, q).expect("valid binomial").sample(rng) };
        out.push(x);
        left -= x;
        mass -= c;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walks::stream_rng;

    #[test]
    fn compensated_sum() {
        let xs = [1e16, 1.0, -1e16];
        assert_eq!(stable_sum(xs), 1.0);
    }

    #[test]
    fn slope_of_a_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0 * i as f64 - 1.0)).collect();
        assert!((ols_slope(&pts) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn resample_preserves_total() {
        let mut rng = stream_rng(1, 0);
        let counts = [5, 0, 17, 3, 1];
        for _ in 0..50 {
            let r = multinomial_resample(&counts, &mut rng);
            assert_eq!(r.iter().sum::<u64>(), 26);
            assert_eq!(r[1], 0);
        }
    }
}
