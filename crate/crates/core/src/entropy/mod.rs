//! Entropy estimators, exact convolution entropies, and the entropy-side
//! experiments. Natural logarithms throughout.

mod prefix;
mod sweep;

pub use prefix::{
    prefix_conditional_rate, prefix_flip_rate, stankov_check, PrefixConditional, PrefixFlip, StankovReport,
};
pub use sweep::{irs_entropy_sweep, norm_entropy_decay, DecayRow, SweepReport, SweepRow};

use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::hash::Hash;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::schreier::{act, GraphOracle, VertexAddr};
use crate::stats::{det_map_of, multinomial_resample, stable_sum, std_dev, DetMap, Z95};
use crate::walks::{stream_rng, StepLaw};
use crate::words::ReducedWord;

/// Bootstrap resamples used when the caller does not choose.
pub const DEFAULT_RESAMPLES: usize = 200;

/// Support-size cap for exact convolutions.
pub const DEFAULT_SUPPORT_CAP: usize = 5_000_000;

#[derive(Clone, Debug, Serialize)]
pub struct EntropyEstimate {
    /// Miller–Madow corrected entropy in nats.
    pub value: f64,
    pub plug_in: f64,
    pub bias_corrected: bool,
    pub sample_count: u64,
    pub distinct_count: usize,
    /// Half-width of the 95% bootstrap interval.
    pub ci_halfwidth: f64,
}

impl EntropyEstimate {
    pub fn bits(&self) -> f64 {
        self.value / LN_2
    }
}

/// `-Σ p log p` over the nonzero counts.
pub fn plug_in_entropy(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let h = stable_sum(counts.iter().filter(|&&c| c > 0).map(|&c| {
        let p = c as f64 / nf;
        -p * p.ln()
    }));
    h.max(0.0)
}

fn miller_madow(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let k = counts.iter().filter(|&&c| c > 0).count();
    plug_in_entropy(counts) + (k as f64 - 1.0) / (2.0 * n as f64)
}

/// Entropy of an outcome histogram, with a multinomial bootstrap interval.
pub fn entropy_from_counts(counts: &[u64], resamples: usize, seed: u64) -> EntropyEstimate {
    let sample_count: u64 = counts.iter().sum();
    let distinct_count = counts.iter().filter(|&&c| c > 0).count();
    let reps: Vec<f64> = (0..resamples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            miller_madow(&multinomial_resample(counts, &mut rng))
        })
        .collect();
    EntropyEstimate {
        value: miller_madow(counts),
        plug_in: plug_in_entropy(counts),
        bias_corrected: true,
        sample_count,
        distinct_count,
        ci_halfwidth: Z95 * std_dev(&reps),
    }
}

/// Histogram of a sample, in first-occurrence order.
pub fn count_outcomes<T: Hash + Eq, I: IntoIterator<Item = T>>(samples: I) -> Vec<u64> {
    let mut index: HashMap<T, usize> = HashMap::new();
    let mut counts = Vec::new();
    for s in samples {
        let next = counts.len();
        let i = *index.entry(s).or_insert(next);
        if i == counts.len() {
            counts.push(0);
        }
        counts[i] += 1;
    }
    counts
}

/// Entropy of a sample of discrete outcomes.
pub fn empirical_entropy<T: Hash + Eq>(samples: &[T], seed: u64) -> Result<EntropyEstimate> {
    if samples.is_empty() {
        return Err(Error::Input("entropy of an empty sample".into()));
    }
    Ok(entropy_from_counts(&count_outcomes(samples.iter()), DEFAULT_RESAMPLES, seed))
}

/// Dense ids for hashable values.
#[derive(Debug)]
pub struct Interner<T: Hash + Eq> {
    ids: HashMap<T, u32>,
}

impl<T: Hash + Eq> Default for Interner<T> {
    fn default() -> Self {
        Interner { ids: HashMap::new() }
    }
}

impl<T: Hash + Eq> Interner<T> {
    pub fn id(&mut self, x: T) -> u32 {
        let next = self.ids.len() as u32;
        *self.ids.entry(x).or_insert(next)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MutualInformation {
    /// `H(X) + H(Y) - H(X,Y)`, each term Miller–Madow corrected.
    pub value: f64,
    pub plug_in: f64,
    pub ci_halfwidth: f64,
    pub sample_count: u64,
    pub joint_cells: usize,
}

fn mi_terms(cells: &[(u32, u32)], counts: &[u64], nx: usize, ny: usize) -> (f64, f64) {
    let mut cx = vec![0u64; nx];
    let mut cy = vec![0u64; ny];
    for (&(x, y), &c) in cells.iter().zip(counts) {
        cx[x as usize] += c;
        cy[y as usize] += c;
    }
    let plug = plug_in_entropy(&cx) + plug_in_entropy(&cy) - plug_in_entropy(counts);
    let mm = miller_madow(&cx) + miller_madow(&cy) - miller_madow(counts);
    (mm, plug)
}

/// Mutual information of paired dense ids, with a bootstrap over joint cells.
pub fn mutual_information(pairs: &[(u32, u32)], resamples: usize, seed: u64) -> MutualInformation {
    let mut joint: HashMap<(u32, u32), u64> = HashMap::new();
    for &p in pairs {
        *joint.entry(p).or_default() += 1;
    }
    let mut cells: Vec<((u32, u32), u64)> = joint.into_iter().collect();
    cells.sort_unstable();
    let keys: Vec<(u32, u32)> = cells.iter().map(|c| c.0).collect();
    let counts: Vec<u64> = cells.iter().map(|c| c.1).collect();
    let nx = keys.iter().map(|k| k.0 as usize + 1).max().unwrap_or(0);
    let ny = keys.iter().map(|k| k.1 as usize + 1).max().unwrap_or(0);
    let (value, plug_in) = mi_terms(&keys, &counts, nx, ny);
    let reps: Vec<f64> = (0..resamples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            mi_terms(&keys, &multinomial_resample(&counts, &mut rng), nx, ny).0
        })
        .collect();
    MutualInformation {
        value,
        plug_in,
        ci_halfwidth: Z95 * std_dev(&reps),
        sample_count: pairs.len() as u64,
        joint_cells: keys.len(),
    }
}

/// Entropy of a probability vector.
pub fn entropy_of_probs<I: IntoIterator<Item = f64>>(probs: I) -> f64 {
    stable_sum(probs.into_iter().filter(|&p| p > 0.0).map(|p| -p * p.ln()))
}

/// `δ_t = H_t - H_{t-1}` for `t = 1..`.
pub fn increments(h: &[f64]) -> Vec<f64> {
    h.windows(2).map(|w| w[1] - w[0]).collect()
}

fn support_exceeded(size: usize, cap: usize, t: usize) -> Error {
    Error::Resource(format!(
        "exact convolution support {size} exceeds cap {cap} at t = {t}; use the Monte Carlo estimators instead"
    ))
}

/// The exact law of `X_t` on `F_d`.
pub fn exact_distribution(law: &StepLaw, t: usize, cap: usize) -> Result<DetMap<ReducedWord, f64>> {
    let mut out = None;
    exact_convolution_walk(law, t, cap, |s, dist| {
        if s == t {
            out = Some(dist.clone());
        }
    })?;
    Ok(out.expect("at least one step"))
}

fn exact_convolution_walk<F: FnMut(usize, &DetMap<ReducedWord, f64>)>(
    law: &StepLaw,
    t: usize,
    cap: usize,
    mut visit: F,
) -> Result<()> {
    let atoms = law.atoms(cap)?;
    let mut dist = det_map_of(ReducedWord::identity(), 1.0);
    visit(0, &dist);
    for s in 1..=t {
        let mut next: DetMap<ReducedWord, f64> = DetMap::with_capacity_and_hasher(dist.len() * 3, Default::default());
        for (w, p) in &dist {
            for (u, q) in &atoms {
                *next.entry(w.mul(u)).or_default() += p * q;
            }
            if next.len() > cap {
                return Err(support_exceeded(next.len(), cap, s));
            }
        }
        dist = next;
        visit(s, &dist);
    }
    Ok(())
}

/// Exact `H(X_0), …, H(X_t)` on `F_d`.
pub fn exact_convolution_entropy(law: &StepLaw, t: usize, cap: usize) -> Result<Vec<f64>> {
    let mut h = Vec::with_capacity(t + 1);
    exact_convolution_walk(law, t, cap, |_, dist| h.push(entropy_of_probs(dist.values().copied())))?;
    Ok(h)
}

/// Exact `H(K X_0), …, H(K X_t)` for the coset walk on a Schreier graph.
pub fn exact_coset_entropy<O: GraphOracle + ?Sized>(oracle: &O, law: &StepLaw, t: usize, cap: usize) -> Result<Vec<f64>> {
    let atoms = law.atoms(cap)?;
    let mut dist = det_map_of(oracle.root(), 1.0);
    let mut h = vec![0.0];
    for s in 1..=t {
        let mut next: DetMap<VertexAddr, f64> = DetMap::with_capacity_and_hasher(dist.len() * 3, Default::default());
        for (v, p) in &dist {
            for (u, q) in &atoms {
                *next.entry(act(oracle, v, u)?).or_default() += p * q;
            }
            if next.len() > cap {
                return Err(support_exceeded(next.len(), cap, s));
            }
        }
        dist = next;
        h.push(entropy_of_probs(dist.values().copied()));
    }
    Ok(h)
}

/// Upper and lower estimates of the entropy rate `h`.
#[derive(Clone, Debug, Serialize)]
pub struct RateBracket {
    /// `δ_t` at `t = t_used`.
    pub upper: f64,
    pub upper_ci: f64,
    /// Prefix-conditional lower estimate.
    pub lower: f64,
    pub lower_ci: f64,
    pub t_used: usize,
    pub lower_t: usize,
    pub r_used: usize,
    pub n_used: usize,
}

impl RateBracket {
    /// Exact upper bound from `δ_t`, lower from a prefix-conditional run.
    pub fn from_parts(law: &StepLaw, t_upper: usize, lower: &PrefixConditional, cap: usize) -> Result<RateBracket> {
        if t_upper == 0 {
            return Err(Error::Input("upper bound needs t >= 1".into()));
        }
        let h = exact_convolution_entropy(law, t_upper, cap)?;
        Ok(RateBracket {
            upper: h[t_upper] - h[t_upper - 1],
            upper_ci: 0.0,
            lower: lower.value,
            lower_ci: lower.ci_halfwidth,
            t_used: t_upper,
            lower_t: lower.t,
            r_used: lower.r,
            n_used: lower.n,
        })
    }

    /// `lower ≤ target ≤ upper`, each side allowed its interval.
    pub fn contains(&self, target: f64) -> bool {
        self.lower - self.lower_ci <= target && target <= self.upper + self.upper_ci
    }

    /// `(upper - lower) / target`.
    pub fn relative_width(&self, target: f64) -> f64 {
        (self.upper - self.lower) / target
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schreier::{Lambda, Zs};
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn constant_sample_has_zero_entropy() {
        let e = empirical_entropy(&[7u8; 50], 1).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.distinct_count, 1);
        assert!(empirical_entropy::<u8>(&[], 1).is_err());
    }

    #[test]
    fn uniform_four() {
        let xs: Vec<u8> = (0..40_000).map(|i| (i % 4) as u8).collect();
        let e = empirical_entropy(&xs, 2).unwrap();
        assert_abs_diff_eq!(e.plug_in, 4f64.ln(), epsilon = 1e-12);
        assert!(e.plug_in <= (e.distinct_count as f64).ln() + 1e-12);
        assert!((e.bits() - 2.0).abs() < 1e-3);
    }

    #[test]
    fn bernoulli_quarter() {
        let mut rng = stream_rng(3, 0);
        let xs: Vec<bool> = (0..100_000).map(|_| rng.random::<f64>() < 0.25).collect();
        let e = empirical_entropy(&xs, 3).unwrap();
        let exact = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
        assert_abs_diff_eq!(exact, 0.5623, epsilon = 1e-4);
        assert!((e.value - exact).abs() <= e.ci_halfwidth, "{e:?}");
        assert!(e.ci_halfwidth > 0.0);
    }

    /// `H(X_2)` for SRW on `F_2` by listing all 16 two-step paths.
    #[test]
    fn two_steps_by_path_enumeration() {
        let mut paths: HashMap<ReducedWord, f64> = HashMap::new();
        for x in crate::words::Letter::all(2) {
            for y in crate::words::Letter::all(2) {
                *paths.entry(ReducedWord::reduce([x, y])).or_default() += 1.0 / 16.0;
            }
        }
        let oracle = entropy_of_probs(paths.values().copied());
        assert_abs_diff_eq!(oracle, 2.4260, epsilon = 1e-4);
        let h = exact_convolution_entropy(&StepLaw::srw(2), 2, 1000).unwrap();
        assert_abs_diff_eq!(h[1], 4f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(h[2], oracle, epsilon = 1e-12);
    }

    #[test]
    fn exact_law_is_normalized_and_symmetric() {
        let dist = exact_distribution(&StepLaw::srw(2), 7, 1 << 20).unwrap();
        assert_abs_diff_eq!(stable_sum(dist.values().copied()), 1.0, epsilon = 1e-12);
        for (w, p) in &dist {
            assert!((p - dist[&w.inverse()]).abs() <= 1e-12 * p);
        }
    }

    #[test]
    fn increments_do_not_increase() {
        let h = exact_convolution_entropy(&StepLaw::srw(2), 9, 1 << 22).unwrap();
        let d = increments(&h);
        for w in d.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        assert!(d[8] > 0.5493);
    }

    /// `δ_t = H(X_t) - H(X_t | X_1) = I(X_1; X_t)`, computed from the exact joint law.
    #[test]
    fn increment_is_mutual_information_with_first_step() {
        let law = StepLaw::srw(2);
        let t = 4;
        let rest = exact_distribution(&law, t - 1, 1 << 20).unwrap();
        let mut joint: HashMap<(ReducedWord, ReducedWord), f64> = HashMap::new();
        let mut marg: HashMap<ReducedWord, f64> = HashMap::new();
        for (u, q) in law.atoms(10).unwrap() {
            for (w, p) in &rest {
                let x = u.mul(w);
                *joint.entry((u.clone(), x.clone())).or_default() += p * q;
                *marg.entry(x).or_default() += p * q;
            }
        }
        let hx1 = 4f64.ln();
        let mi = hx1 + entropy_of_probs(marg.values().copied()) - entropy_of_probs(joint.values().copied());
        let h = exact_convolution_entropy(&law, t, 1 << 20).unwrap();
        assert_abs_diff_eq!(mi, h[t] - h[t - 1], epsilon = 1e-10);
    }

    #[test]
    fn coset_entropy_matches_free_group_at_two_steps() {
        let h = exact_coset_entropy(&Lambda::new(2), &StepLaw::srw(2), 2, 1000).unwrap();
        assert_abs_diff_eq!(h[2], 2.4260, epsilon = 1e-4);
        let z = exact_coset_entropy(&Zs::new(2, 1).unwrap(), &StepLaw::srw(2), 1, 100).unwrap();
        // X_1 ∈ {-1, 0, 0, +1} on the a-line
        assert_abs_diff_eq!(z[1], -(0.5f64 * 0.5f64.ln() + 0.5 * 0.25f64.ln()), epsilon = 1e-12);
    }

    #[test]
    fn exact_cap_is_a_resource_error() {
        let err = exact_convolution_entropy(&StepLaw::srw(2), 6, 50).unwrap_err();
        assert!(matches!(err, Error::Resource(_)));
    }

    #[test]
    fn mutual_information_extremes() {
        let same: Vec<(u32, u32)> = (0..10_000).map(|i| (i % 8, i % 8)).collect();
        let mi = mutual_information(&same, 50, 1);
        assert_abs_diff_eq!(mi.plug_in, 8f64.ln(), epsilon = 1e-9);
        let indep: Vec<(u32, u32)> = (0..10_000).map(|i| (i % 3, 0)).collect();
        let mi = mutual_information(&indep, 50, 1);
        assert_abs_diff_eq!(mi.value, 0.0, epsilon = 1e-12);
    }
}
