use rayon::prelude::*;
use serde::Serialize;

use super::{GraphOracle, VertexAddr};
use crate::error::Result;
use crate::stats::{mean_ci, ols_slope};
use crate::walks::{stream_rng, StepLaw};
use crate::words::Letter;

/// Share of visits allowed in the last quarter of the horizon before the
/// estimate is flagged as not stabilized.
pub const TAIL_TOLERANCE: f64 = 0.02;

#[derive(Clone, Debug, Serialize)]
pub struct GreenEstimate {
    pub mean: f64,
    /// Half-width of the normal 95% interval.
    pub ci: f64,
    pub samples: usize,
    /// Fraction of counted visits that happened in the last quarter of the horizon.
    pub tail_share: f64,
    pub stabilized: bool,
    pub warning: Option<String>,
}

/// Monte Carlo `g^{m+}(α, β)`: start at `source` (β), count the times
/// `t ∈ [m, horizon]` spent in `target` (α).
#[allow(clippy::too_many_arguments)]
pub fn green_estimate<O, F>(
    oracle: &O,
    source: &VertexAddr,
    target: F,
    m: usize,
    law: &StepLaw,
    samples: usize,
    horizon: usize,
    seed: u64,
) -> Result<GreenEstimate>
where
    O: GraphOracle + ?Sized,
    F: Fn(&VertexAddr) -> bool + Sync,
{
    if m > horizon {
        return Ok(GreenEstimate {
            mean: 0.0,
            ci: 0.0,
            samples,
            tail_share: 0.0,
            stabilized: false,
            warning: Some(format!("m = {m} beyond horizon {horizon}")),
        });
    }
    let tail_start = horizon - horizon / 4;
    let counts: Vec<(f64, f64)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let mut rng = stream_rng(seed, i);
            let mut v = source.clone();
            let mut letters: Vec<Letter> = Vec::new();
            let (mut total, mut tail) = (0.0, 0.0);
            for t in 0..=horizon {
                if t >= m && target(&v) {
                    total += 1.0;
                    if t >= tail_start {
                        tail += 1.0;
                    }
                }
                if t < horizon {
                    letters.clear();
                    law.sample_letters(&mut rng, &mut letters);
                    for &x in &letters {
                        oracle.step(&mut v, x)?;
                    }
                }
            }
            Ok((total, tail))
        })
        .collect::<Result<_>>()?;
    let totals: Vec<f64> = counts.iter().map(|c| c.0).collect();
    let tail_sum: f64 = counts.iter().map(|c| c.1).sum();
    let total_sum: f64 = totals.iter().sum();
    let (mean, ci) = mean_ci(&totals);
    let tail_share = if total_sum > 0.0 { tail_sum / total_sum } else { 0.0 };
    let stabilized = tail_share <= TAIL_TOLERANCE;
    let warning = (!stabilized).then(|| format!("{:.1}% of visits in the last quarter of the horizon", 100.0 * tail_share));
    Ok(GreenEstimate { mean, ci, samples, tail_share, stabilized, warning })
}

#[derive(Clone, Debug, Serialize)]
pub struct VisitProfile {
    /// `(r, mean, ci)` rows of `Σ_t P[|X_t| <= r]`.
    pub rows: Vec<(usize, f64, f64)>,
    /// Least-squares slope of `log mean` against `log r` over `r >= 1`.
    pub exponent: f64,
    pub tail_share: f64,
}

/// Expected time spent in `B(root, r)` for each `r`, up to `horizon`.
pub fn visit_count_profile<O: GraphOracle + ?Sized>(
    law: &StepLaw,
    oracle: &O,
    r_values: &[usize],
    samples: usize,
    horizon: usize,
    seed: u64,
) -> Result<VisitProfile> {
    let r_max = r_values.iter().copied().max().unwrap_or(0);
    let tail_start = horizon - horizon / 4;
    let per: Vec<(Vec<f64>, f64)> = (0..samples as u64)
        .into_par_iter()
        .map(|i| -> Result<(Vec<f64>, f64)> {
            let mut rng = stream_rng(seed, i);
            let mut v = oracle.root();
            let mut letters: Vec<Letter> = Vec::new();
            let mut counts = vec![0.0; r_values.len()];
            let mut tail = 0.0;
            for t in 0..=horizon {
                if let Some(k) = oracle.root_distance(&v, r_max)? {
                    for (c, &r) in counts.iter_mut().zip(r_values) {
                        if k <= r {
                            *c += 1.0;
                        }
                    }
                    if t >= tail_start {
                        tail += 1.0;
                    }
                }
                if t < horizon {
                    letters.clear();
                    law.sample_letters(&mut rng, &mut letters);
                    for &x in &letters {
                        oracle.step(&mut v, x)?;
                    }
                }
            }
            Ok((counts, tail))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (j, &r) in r_values.iter().enumerate() {
        let xs: Vec<f64> = per.iter().map(|p| p.0[j]).collect();
        let (mean, ci) = mean_ci(&xs);
        rows.push((r, mean, ci));
    }
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|row| row.0 >= 1 && row.1 > 0.0).map(|row| ((row.0 as f64).ln(), row.1.ln())).collect();
    let exponent = ols_slope(&pts);
    let top: f64 = per.iter().map(|p| p.0.last().copied().unwrap_or(0.0)).sum();
    let tail: f64 = per.iter().map(|p| p.1).sum();
    Ok(VisitProfile { rows, exponent, tail_share: if top > 0.0 { tail / top } else { 0.0 } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nilquot::nil_project;
    use crate::schreier::{Abelian, Free, Glued, Lambda, Zs};
    use crate::walks::Walker;

    #[test]
    fn glued_root_visits_stabilize() {
        let g = Glued::new(3, 2).unwrap();
        let root = g.root();
        let est = green_estimate(&g, &root, |v| *v == root, 0, &StepLaw::srw(2), 4000, 400, 1).unwrap();
        assert!(est.stabilized, "{est:?}");
        assert!(est.mean >= 1.0 && est.mean < 3.0, "{est:?}");
    }

    #[test]
    fn recurrent_line_is_flagged() {
        let z = Zs::new(2, 1).unwrap();
        let est = green_estimate(&z, &z.root(), |v| *v == VertexAddr::Line(0), 0, &StepLaw::srw(2), 500, 4000, 2).unwrap();
        assert!(!est.stabilized);
        assert!(est.warning.is_some());
    }

    #[test]
    fn m_beyond_horizon() {
        let z = Zs::new(2, 1).unwrap();
        let est = green_estimate(&z, &z.root(), |_| true, 11, &StepLaw::srw(2), 10, 10, 3).unwrap();
        assert_eq!(est.mean, 0.0);
        assert!(est.warning.is_some());
    }

    #[test]
    fn free_group_profile_is_monotone() {
        let rs: Vec<usize> = (0..=5).collect();
        let p = visit_count_profile(&StepLaw::srw(2), &Free::new(2), &rs, 3000, 300, 4).unwrap();
        // G(e,e) = 3/2 for SRW on F_2
        assert!((p.rows[0].1 - 1.5).abs() < 3.0 * p.rows[0].2 + 0.02, "{:?}", p.rows[0]);
        for w in p.rows.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
        assert!(p.exponent < 3.0);
    }

    /// Pathwise: `Z^2` is a quotient of `Λ`, so the `Λ`-distance dominates.
    #[test]
    fn lambda_visits_at_most_abelian_visits() {
        let law = StepLaw::srw(2);
        let (lam, ab) = (Lambda::new(2), Abelian::new(2));
        for rep in 0..200 {
            let mut rng = stream_rng(6, rep);
            let mut w = Walker::new();
            let (mut nl, mut na) = (0, 0);
            for _ in 0..300 {
                w.advance(&law, &mut rng);
                let x = w.position();
                let vl = VertexAddr::Nil(nil_project(x, 2));
                let va = VertexAddr::Abel(vec![crate::nilquot::pi_s(x, 1).0, crate::nilquot::pi_s(x, 2).0]);
                nl += usize::from(lam.root_distance(&vl, 3).unwrap().is_some());
                na += usize::from(ab.root_distance(&va, 3).unwrap().is_some());
            }
            assert!(nl <= na);
        }
    }
}
