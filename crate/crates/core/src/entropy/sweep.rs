use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{count_outcomes, entropy_from_counts, miller_madow, EntropyEstimate, DEFAULT_RESAMPLES};
use crate::error::{Error, Result};
use crate::schreier::{act, bfs_ball, GraphOracle, VertexAddr};
use crate::stats::mean_ci;
use crate::walks::{stream_rng, StepLaw, Walker};
use crate::words::{Letter, ReducedWord};

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub p: f64,
    /// Mean over window draws of `H(Core_A(K) X_t) / t`.
    pub h: f64,
    pub ci: f64,
    pub empty_draws: usize,
    pub mean_roots: f64,
    pub mean_classes: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub t: usize,
    pub window_radius: usize,
    pub window_size: usize,
    /// Window vertices that induce pairwise distinct, non-trivial partitions of the sampled words.
    pub distinct_columns: usize,
    pub distinct_words: usize,
    pub walk_samples: usize,
    pub core_samples: usize,
    /// `H(X_t)` on the same walk samples.
    pub walk_entropy: EntropyEstimate,
    /// Draws in which adding roots lowered the tuple entropy (expected 0).
    pub refinement_violations: usize,
}

impl SweepReport {
    /// `H(X_t) / t` with its interval.
    pub fn walk_rate(&self) -> (f64, f64) {
        (self.walk_entropy.value / self.t as f64, self.walk_entropy.ci_halfwidth / self.t as f64)
    }
}

/// Canonical form of `j ↦ v.w_j`: coset labels renumbered by first occurrence.
fn column<O: GraphOracle + ?Sized>(oracle: &O, v: &VertexAddr, words: &[ReducedWord]) -> Result<Option<Vec<u32>>> {
    let mut ids: HashMap<VertexAddr, u32> = HashMap::new();
    let mut col = Vec::with_capacity(words.len());
    for w in words {
        let next = ids.len() as u32;
        col.push(*ids.entry(act(oracle, v, w)?).or_insert(next));
    }
    Ok((ids.len() > 1).then_some(col))
}

/// Split every class of `class` by the values of `col`; returns the new class count.
fn refine(class: &mut [u32], col: &[u32]) -> u32 {
    let mut ids: HashMap<(u32, u32), u32> = HashMap::new();
    for (c, &x) in class.iter_mut().zip(col) {
        let next = ids.len() as u32;
        *c = *ids.entry((*c, x)).or_insert(next);
    }
    ids.len() as u32
}

fn class_entropy(class: &[u32], classes: u32, counts: &[u64]) -> f64 {
    let mut mass = vec![0u64; classes as usize];
    for (&c, &k) in class.iter().zip(counts) {
        mass[c as usize] += k;
    }
    miller_madow(&mass)
}

/// `p ↦ ĥ(p)` for the intersectional IRS over the radius-`R` window.
///
/// All window draws share one set of walk samples, and for each draw the
/// subsets for increasing `p` are nested (one uniform per vertex), so the
/// curve of a single draw can only go up.
#[allow(clippy::too_many_arguments)]
pub fn irs_entropy_sweep<O: GraphOracle + ?Sized>(
    oracle: &O,
    law: &StepLaw,
    window_radius: usize,
    p_grid: &[f64],
    t: usize,
    walk_samples: usize,
    core_samples: usize,
    seed: u64,
    cap: usize,
) -> Result<SweepReport> {
    if t == 0 || walk_samples == 0 {
        return Err(Error::Input("sweep needs t >= 1 and at least one walk".into()));
    }
    if p_grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Input("p grid must lie in [0,1]".into()));
    }
    let mut grid = p_grid.to_vec();
    grid.sort_by(f64::total_cmp);

    let ends: Vec<ReducedWord> = (0..walk_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let mut w = Walker::new();
            for _ in 0..t {
                w.advance(law, &mut rng);
            }
            w.position().clone()
        })
        .collect();
    let mut tally: HashMap<&ReducedWord, u64> = HashMap::new();
    for w in &ends {
        *tally.entry(w).or_default() += 1;
    }
    let mut distinct: Vec<(ReducedWord, u64)> = tally.into_iter().map(|(w, c)| (w.clone(), c)).collect();
    distinct.sort_unstable();
    let words: Vec<ReducedWord> = distinct.iter().map(|d| d.0.clone()).collect();
    let counts: Vec<u64> = distinct.iter().map(|d| d.1).collect();
    let walk_entropy = entropy_from_counts(&counts, DEFAULT_RESAMPLES, seed);

    let window: Vec<VertexAddr> = bfs_ball(oracle, &oracle.root(), window_radius, cap)?.into_iter().map(|x| x.0).collect();
    let cols: Vec<Option<Vec<u32>>> =
        window.par_iter().map(|v| column(oracle, v, &words)).collect::<Result<_>>()?;
    let mut col_index: HashMap<Vec<u32>, u32> = HashMap::new();
    let mut columns: Vec<Vec<u32>> = Vec::new();
    let vertex_col: Vec<Option<u32>> = cols
        .into_iter()
        .map(|c| {
            c.map(|c| {
                *col_index.entry(c.clone()).or_insert_with(|| {
                    columns.push(c);
                    columns.len() as u32 - 1
                })
            })
        })
        .collect();

    let full = words.len() as u32;
    let draws: Vec<Vec<(f64, usize, u32)>> = (0..core_samples as u64)
        .into_par_iter()
        .map(|d| {
            let mut rng = stream_rng(seed, walk_samples as u64 + d);
            let mut order: Vec<(f64, usize)> = (0..window.len()).map(|i| (rng.random::<f64>(), i)).collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut class = vec![0u32; words.len()];
            let mut classes = 1u32;
            let mut used = vec![false; columns.len()];
            let mut next = 0;
            let mut out = Vec::with_capacity(grid.len());
            for &p in &grid {
                while next < order.len() && order[next].0 < p {
                    if let Some(c) = vertex_col[order[next].1] {
                        if classes < full && !used[c as usize] {
                            used[c as usize] = true;
                            classes = refine(&mut class, &columns[c as usize]);
                        }
                    }
                    next += 1;
                }
                out.push((class_entropy(&class, classes, &counts) / t as f64, next, classes));
            }
            out
        })
        .collect();

    let refinement_violations =
        draws.iter().filter(|d| d.windows(2).any(|w| w[1].0 < w[0].0 - 1e-12)).count();
    let rows = grid
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let hs: Vec<f64> = draws.iter().map(|d| d[k].0).collect();
            let (h, ci) = mean_ci(&hs);
            let m = draws.len().max(1) as f64;
            SweepRow {
                p,
                h,
                ci,
                empty_draws: draws.iter().filter(|d| d[k].1 == 0).count(),
                mean_roots: draws.iter().map(|d| d[k].1 as f64).sum::<f64>() / m,
                mean_classes: draws.iter().map(|d| d[k].2 as f64).sum::<f64>() / m,
            }
        })
        .collect();
    Ok(SweepReport {
        rows,
        t,
        window_radius,
        window_size: window.len(),
        distinct_columns: columns.len(),
        distinct_words: words.len(),
        walk_samples,
        core_samples,
        walk_entropy,
        refinement_violations,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayRow {
    pub t: usize,
    pub entropy: f64,
    pub ci: f64,
    /// `H(K X_t) - H(K X_{t-1})`; zero at `t = 0`.
    pub increment: f64,
    pub increment_ci: f64,
}

/// Monte Carlo `H(K X_t)` for `t = 0..=t_max` on a quotient oracle.
pub fn norm_entropy_decay<O: GraphOracle + ?Sized>(
    oracle: &O,
    law: &StepLaw,
    t_max: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<DecayRow>> {
    if samples == 0 {
        return Err(Error::Input("need at least one sample".into()));
    }
    let paths: Vec<Vec<VertexAddr>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| -> Result<Vec<VertexAddr>> {
            let mut rng = stream_rng(seed, i);
            let mut v = oracle.root();
            let mut letters: Vec<Letter> = Vec::new();
            let mut out = vec![v.clone()];
            for _ in 0..t_max {
                letters.clear();
                law.sample_letters(&mut rng, &mut letters);
                for &x in &letters {
                    oracle.step(&mut v, x)?;
                }
                out.push(v.clone());
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let estimates: Vec<EntropyEstimate> = (0..=t_max)
        .map(|t| entropy_from_counts(&count_outcomes(paths.iter().map(|p| &p[t])), DEFAULT_RESAMPLES, seed ^ t as u64))
        .collect();
    Ok(estimates
        .iter()
        .enumerate()
        .map(|(t, e)| {
            let (increment, increment_ci) = if t == 0 {
                (0.0, 0.0)
            } else {
                let prev = &estimates[t - 1];
                (e.value - prev.value, e.ci_halfwidth.hypot(prev.ci_halfwidth))
            };
            DecayRow { t, entropy: e.value, ci: e.ci_halfwidth, increment, increment_ci }
        })
        .collect())
}
