use rayon::prelude::*;
use serde::Serialize;

use super::{count_outcomes, entropy_from_counts, mutual_information, EntropyEstimate, Interner, DEFAULT_RESAMPLES};
use crate::error::{Error, Result};
use crate::schreier::{bfs_ball, graph_prefix, GraphOracle, VertexAddr, TAIL_TOLERANCE};
use crate::stats::{mean_ci, Proportion};
use crate::walks::{stream_rng, StepLaw, Walker};
use crate::words::{Letter, ReducedWord};

/// `(H(X_t) - H(X_t | pref_r(X_{T_n}))) / t`, a lower estimate of `h`.
#[derive(Clone, Debug, Serialize)]
pub struct PrefixConditional {
    pub value: f64,
    pub ci_halfwidth: f64,
    /// `H(X_t)` on the retained samples.
    pub marginal: EntropyEstimate,
    pub t: usize,
    pub r: usize,
    pub n: usize,
    pub samples: usize,
    /// Walks that did not leave the radius-`n` ball within the horizon.
    pub excluded: usize,
    pub exclusion_rate: f64,
}

pub fn prefix_conditional_rate(
    law: &StepLaw,
    r: usize,
    t: usize,
    n: usize,
    samples: usize,
    horizon: usize,
    seed: u64,
) -> Result<PrefixConditional> {
    if t == 0 || r > n {
        return Err(Error::Input(format!("need t >= 1 and r <= n (got t={t}, r={r}, n={n})")));
    }
    let draws: Vec<Option<(ReducedWord, ReducedWord)>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let mut walker = Walker::new();
            let (mut xt, mut exit) = (None, None);
            for s in 1..=horizon.max(t) {
                walker.advance(law, &mut rng);
                if s == t {
                    xt = Some(walker.position().clone());
                }
                if exit.is_none() && walker.position().len() > n {
                    exit = Some(walker.position().prefix(r));
                }
                if xt.is_some() && exit.is_some() {
                    break;
                }
            }
            xt.zip(exit)
        })
        .collect();
    let excluded = draws.iter().filter(|d| d.is_none()).count();
    let kept: Vec<(ReducedWord, ReducedWord)> = draws.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::Domain(format!("no walk left radius {n} within {horizon} steps")));
    }
    let (mut xs, mut ps) = (Interner::default(), Interner::default());
    let pairs: Vec<(u32, u32)> = kept.iter().map(|(x, p)| (xs.id(x), ps.id(p))).collect();
    let mi = mutual_information(&pairs, DEFAULT_RESAMPLES, seed);
    let marginal = entropy_from_counts(&count_outcomes(kept.iter().map(|k| &k.0)), DEFAULT_RESAMPLES, seed);
    Ok(PrefixConditional {
        value: mi.value / t as f64,
        ci_halfwidth: mi.ci_halfwidth / t as f64,
        marginal,
        t,
        r,
        n,
        samples,
        excluded,
        exclusion_rate: excluded as f64 / samples.max(1) as f64,
    })
}

/// Prefix stability of the coset walk after the free walk exits radius `n`.
#[derive(Clone, Debug, Serialize)]
pub struct PrefixFlip {
    /// `pref_r(K X_t)` changes at some `T_n <= t <= horizon`.
    pub changed_after_exit: Proportion,
    /// `pref_r(X_{T_n}) ≠ pref_r(K X_{T_n})`.
    pub differs_at_exit: Proportion,
    /// `|X_{T_n}| > rad(K)`, the only way the previous event can happen.
    pub dominating: Proportion,
    pub r: usize,
    pub n: usize,
    pub rad: usize,
    pub horizon: usize,
    pub excluded: usize,
    /// Flips after the horizon are not seen, so the first rate is a lower estimate.
    pub caveat: String,
}

pub fn prefix_flip_rate<O: GraphOracle + ?Sized>(
    oracle: &O,
    law: &StepLaw,
    r: usize,
    n: usize,
    samples: usize,
    horizon: usize,
    seed: u64,
) -> Result<PrefixFlip> {
    let rad = oracle.certified_rad();
    if r > rad {
        return Err(Error::Contract(format!("prefix radius {r} exceeds certified rad {rad} of {}", oracle.name())));
    }
    let outcomes: Vec<Option<(bool, bool, bool)>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| -> Result<Option<(bool, bool, bool)>> {
            let mut rng = stream_rng(seed, i);
            let mut walker = Walker::new();
            let mut v = oracle.root();
            let mut at_exit: Option<(ReducedWord, bool, bool)> = None;
            for _ in 0..horizon {
                for &x in walker.advance(law, &mut rng) {
                    oracle.step(&mut v, x)?;
                }
                let p = graph_prefix(oracle, &v, r)?;
                match &at_exit {
                    None if walker.position().len() > n => {
                        let differs = walker.position().prefix(r) != p;
                        at_exit = Some((p, differs, walker.position().len() > rad));
                    }
                    Some((q, differs, dom)) if *q != p => return Ok(Some((true, *differs, *dom))),
                    _ => {}
                }
            }
            Ok(at_exit.map(|(_, differs, dom)| (false, differs, dom)))
        })
        .collect::<Result<_>>()?;
    let kept: Vec<(bool, bool, bool)> = outcomes.iter().flatten().copied().collect();
    let m = kept.len() as u64;
    let count = |f: fn(&(bool, bool, bool)) -> bool| kept.iter().filter(|k| f(k)).count() as u64;
    Ok(PrefixFlip {
        changed_after_exit: Proportion::new(count(|k| k.0), m),
        differs_at_exit: Proportion::new(count(|k| k.1), m),
        dominating: Proportion::new(count(|k| k.2), m),
        r,
        n,
        rad,
        horizon,
        excluded: samples - kept.len(),
        caveat: format!("prefix changes after step {horizon} are not observed"),
    })
}

/// Both sides of the component-crossing bound for `A = B(root, a)`.
#[derive(Clone, Debug, Serialize)]
pub struct StankovReport {
    /// Expected number of `t` in `[m, horizon)` with `X_t`, `X_{t+1}` in different components of `Γ \ A`.
    pub lhs: f64,
    pub lhs_ci: f64,
    /// `|A| · E[|X_1| · visits to B(root, a + |X_1|) during [m, horizon)]`.
    pub rhs: f64,
    pub rhs_ci: f64,
    pub a_radius: usize,
    pub a_size: usize,
    pub m: usize,
    pub horizon: usize,
    pub samples: usize,
    pub holds: bool,
    pub rhs_tail_share: f64,
    pub warning: Option<String>,
}

/// Component of `Γ \ B(root, a)` containing `v`, or `None` inside the ball.
///
/// With `rad ≥ a + 1` the ball of radius `a + 1` is a tree, and two outside
/// vertices with different `(a+1)`-prefixes lie in different components.
fn component<O: GraphOracle + ?Sized>(oracle: &O, v: &VertexAddr, a: usize) -> Result<Option<ReducedWord>> {
    if oracle.root_distance(v, a)?.is_some() {
        return Ok(None);
    }
    graph_prefix(oracle, v, a + 1).map(Some)
}

#[allow(clippy::too_many_arguments)]
pub fn stankov_check<O: GraphOracle + ?Sized>(
    oracle: &O,
    a_radius: usize,
    m: usize,
    law: &StepLaw,
    samples: usize,
    horizon: usize,
    seed: u64,
) -> Result<StankovReport> {
    if a_radius + 1 > oracle.certified_rad() {
        return Err(Error::Contract(format!(
            "component labels need rad >= {}; {} certifies {}",
            a_radius + 1,
            oracle.name(),
            oracle.certified_rad()
        )));
    }
    let a_size = bfs_ball(oracle, &oracle.root(), a_radius, usize::MAX)?.len();
    let tail_start = horizon - horizon / 4;
    let per: Vec<(f64, f64, f64, f64)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64, f64, f64)> {
            let mut letters: Vec<Letter> = Vec::new();
            let mut rng = stream_rng(seed, 2 * i);
            let mut v = oracle.root();
            let mut label = component(oracle, &v, a_radius)?;
            let mut crossings = 0.0;
            for t in 0..horizon {
                letters.clear();
                law.sample_letters(&mut rng, &mut letters);
                for &x in &letters {
                    oracle.step(&mut v, x)?;
                }
                let next = component(oracle, &v, a_radius)?;
                if t >= m && label.is_some() && next.is_some() && label != next {
                    crossings += 1.0;
                }
                label = next;
            }

            let mut rng = stream_rng(seed, 2 * i + 1);
            let len = law.sample_step(&mut rng).len();
            let mut v = oracle.root();
            let (mut visits, mut tail) = (0.0, 0.0);
            for t in 0..horizon {
                if t >= m && oracle.root_distance(&v, a_radius + len)?.is_some() {
                    visits += 1.0;
                    if t >= tail_start {
                        tail += 1.0;
                    }
                }
                letters.clear();
                law.sample_letters(&mut rng, &mut letters);
                for &x in &letters {
                    oracle.step(&mut v, x)?;
                }
            }
            Ok((crossings, len as f64 * visits, visits, tail))
        })
        .collect::<Result<_>>()?;
    let lhs_xs: Vec<f64> = per.iter().map(|p| p.0).collect();
    let rhs_xs: Vec<f64> = per.iter().map(|p| a_size as f64 * p.1).collect();
    let (lhs, lhs_ci) = mean_ci(&lhs_xs);
    let (rhs, rhs_ci) = mean_ci(&rhs_xs);
    let total: f64 = per.iter().map(|p| p.2).sum();
    let rhs_tail_share = if total > 0.0 { per.iter().map(|p| p.3).sum::<f64>() / total } else { 0.0 };
    let warning = (rhs_tail_share > TAIL_TOLERANCE).then(|| {
        format!("{:.1}% of ball visits in the last quarter; the right side may diverge", 100.0 * rhs_tail_share)
    });
    Ok(StankovReport {
        lhs,
        lhs_ci,
        rhs,
        rhs_ci,
        a_radius,
        a_size,
        m,
        horizon,
        samples,
        holds: lhs <= rhs + lhs_ci.hypot(rhs_ci),
        rhs_tail_share,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schreier::{Glued, Zs};
    use crate::walks::LawFamily;

    #[test]
    fn trivial_prefix_gives_zero() {
        let p = prefix_conditional_rate(&StepLaw::srw(2), 0, 3, 10, 5000, 1000, 1).unwrap();
        assert!(p.value.abs() < 1e-12, "{p:?}");
        assert_eq!(p.excluded, 0);
    }

    #[test]
    fn prefix_bound_is_positive_and_below_the_increment() {
        let law = StepLaw::srw(2);
        let lo = prefix_conditional_rate(&law, 2, 3, 20, 40_000, 2000, 2).unwrap();
        let hi = prefix_conditional_rate(&law, 4, 3, 20, 40_000, 2000, 2).unwrap();
        // δ_3 = 0.8815 for this law
        assert!(lo.value > 0.0 && lo.value < 0.8815, "{lo:?}");
        assert!(hi.value + hi.ci_halfwidth + lo.ci_halfwidth >= lo.value, "{lo:?} {hi:?}");
        assert!(prefix_conditional_rate(&law, 5, 3, 4, 10, 10, 2).is_err());
    }

    #[test]
    fn exclusions_are_counted() {
        let p = prefix_conditional_rate(&StepLaw::srw(2), 1, 2, 30, 200, 20, 3).unwrap_err();
        assert!(matches!(p, Error::Domain(_)));
        let p = prefix_conditional_rate(&StepLaw::srw(2), 1, 2, 10, 2000, 25, 3).unwrap();
        assert!(p.excluded > 0 && p.excluded < 2000);
    }

    #[test]
    fn nearest_neighbour_walk_never_differs_at_exit() {
        let n = 4;
        let g = Glued::new(n * n * n, 2).unwrap();
        let f = prefix_flip_rate(&g, &StepLaw::srw(2), 3, n, 2000, 200, 4).unwrap();
        assert_eq!(f.differs_at_exit.events, 0);
        assert_eq!(f.dominating.events, 0);
        let z = prefix_flip_rate(&g, &StepLaw::srw(2), 0, n, 500, 100, 4).unwrap();
        assert_eq!((z.changed_after_exit.events, z.differs_at_exit.events), (0, 0));
    }

    #[test]
    fn shallow_glued_graph_shows_differences() {
        let law = StepLaw::new(LawFamily::GeodesicTail { beta: 1.5, l_max: 60 }, 2).unwrap();
        let g = Glued::new(3, 2).unwrap();
        let f = prefix_flip_rate(&g, &law, 2, 2, 4000, 100, 5).unwrap();
        assert!(f.differs_at_exit.events <= f.dominating.events);
        assert!(f.dominating.events > 0);
        assert!(prefix_flip_rate(&g, &law, 4, 2, 10, 10, 5).is_err());
    }

    #[test]
    fn stankov_bound_on_glued_graph() {
        let g = Glued::new(4, 2).unwrap();
        // nearest-neighbour steps cannot jump over A, so the left side vanishes
        let srw = stankov_check(&g, 2, 0, &StepLaw::srw(2), 2000, 200, 6).unwrap();
        assert_eq!(srw.a_size, 1 + 4 + 12);
        assert!(srw.holds && srw.lhs == 0.0, "{srw:?}");
        let law = StepLaw::new(LawFamily::GeodesicTail { beta: 6.0, l_max: 16 }, 2).unwrap();
        let rep = stankov_check(&g, 2, 0, &law, 4000, 200, 6).unwrap();
        assert!(rep.holds && rep.lhs > 0.0, "{rep:?}");
        let late = stankov_check(&g, 2, 30, &law, 4000, 200, 6).unwrap();
        assert!(late.lhs < rep.lhs && late.rhs < rep.rhs);
    }

    #[test]
    fn stankov_single_root() {
        let g = Glued::new(4, 2).unwrap();
        let rep = stankov_check(&g, 0, 0, &StepLaw::srw(2), 4000, 200, 7).unwrap();
        assert_eq!(rep.a_size, 1);
        assert!(rep.holds, "{rep:?}");
        assert!(stankov_check(&Zs::new(2, 1).unwrap(), 0, 0, &StepLaw::srw(2), 10, 10, 7).is_err());
    }
}
