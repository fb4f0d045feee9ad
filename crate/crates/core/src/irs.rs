//! Intersectional IRS primitives over a finite window of a Schreier graph.
//!
//! Conjugates `K^θ` are represented by vertices: `g ∈ K^θ` iff `g` fixes the
//! vertex `θ`. All conjugacy-class quantities are computed over the ball of
//! radius `R` about the root, which stands in for `Θ`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::schreier::{act, bfs_ball, GraphOracle, VertexAddr};
use crate::walks::stream_rng;
use crate::words::ReducedWord;

/// Default gap between the two radii compared for stabilization.
pub const DEFAULT_DELTA: usize = 2;

/// `g ∈ Stab(v)`, i.e. `v ∈ Ω_g`.
pub fn omega_test<O: GraphOracle + ?Sized>(oracle: &O, v: &VertexAddr, g: &ReducedWord) -> Result<bool> {
    Ok(act(oracle, v, g)? == *v)
}

/// Number of window vertices moved by `g`.
#[derive(Clone, Debug, Serialize)]
pub struct NormCount {
    pub word: String,
    pub radius: usize,
    pub delta: usize,
    pub count: usize,
    /// Count at radius `radius - delta`.
    pub inner_count: usize,
    pub stabilized: bool,
    /// Radius beyond which the oracle guarantees `g` moves nothing.
    pub support_radius: Option<usize>,
    /// The window covers `support_radius`, so `count = ||g||_K` exactly.
    pub certified: bool,
}

/// Truncated `||g||_K`, compared against the radius `R - Δ`.
pub fn norm_truncated<O: GraphOracle + ?Sized>(
    oracle: &O,
    g: &ReducedWord,
    radius: usize,
    delta: usize,
    cap: usize,
) -> Result<NormCount> {
    let window = bfs_ball(oracle, &oracle.root(), radius, cap)?;
    norm_on_window(oracle, g, &window, radius, delta)
}

/// As [`norm_truncated`], over a precomputed `(vertex, distance)` window.
pub fn norm_on_window<O: GraphOracle + ?Sized>(
    oracle: &O,
    g: &ReducedWord,
    window: &[(VertexAddr, usize)],
    radius: usize,
    delta: usize,
) -> Result<NormCount> {
    if delta > radius {
        return Err(Error::Input(format!("delta {delta} exceeds radius {radius}")));
    }
    let inner = radius - delta;
    let (mut count, mut inner_count) = (0, 0);
    for (v, k) in window {
        if *k > radius {
            continue;
        }
        if !omega_test(oracle, v, g)? {
            count += 1;
            if *k <= inner {
                inner_count += 1;
            }
        }
    }
    let support_radius = oracle.support_radius(g);
    Ok(NormCount {
        word: g.render(oracle.rank()),
        radius,
        delta,
        count,
        inner_count,
        stabilized: count == inner_count,
        support_radius,
        certified: support_radius.is_some_and(|s| s <= radius),
    })
}

/// A Bernoulli-`p` subset of the radius-`R` window.
#[derive(Clone, Debug)]
pub struct CoreWindow {
    pub included_roots: Vec<VertexAddr>,
    pub p: f64,
    pub window_radius: usize,
    pub window_size: usize,
    pub seed: u64,
    pub replicate: u64,
}

/// Include every vertex of `window` independently with probability `p`.
pub fn draw_core_window<R: Rng + ?Sized>(window: &[VertexAddr], p: f64, rng: &mut R) -> Vec<VertexAddr> {
    window.iter().filter(|_| rng.random::<f64>() < p).cloned().collect()
}

pub fn sample_core_window<O: GraphOracle + ?Sized>(
    oracle: &O,
    p: f64,
    radius: usize,
    cap: usize,
    seed: u64,
    replicate: u64,
) -> Result<CoreWindow> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Input(format!("p = {p} outside [0,1]")));
    }
    let window: Vec<VertexAddr> = bfs_ball(oracle, &oracle.root(), radius, cap)?.into_iter().map(|x| x.0).collect();
    let mut rng = stream_rng(seed, replicate);
    let included_roots = draw_core_window(&window, p, &mut rng);
    Ok(CoreWindow { included_roots, p, window_radius: radius, window_size: window.len(), seed, replicate })
}

/// `g ∈ Core_A(K)`: `g` fixes every included root. Empty windows contain everything.
pub fn core_contains<O: GraphOracle + ?Sized>(oracle: &O, window: &CoreWindow, g: &ReducedWord) -> Result<bool> {
    for v in &window.included_roots {
        if !omega_test(oracle, v, g)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The window translated by `γ`: every included root `v` becomes `v.γ`.
pub fn translate_window<O: GraphOracle + ?Sized>(oracle: &O, window: &CoreWindow, gamma: &ReducedWord) -> Result<CoreWindow> {
    let mut out = window.clone();
    for v in out.included_roots.iter_mut() {
        *v = act(oracle, v, gamma)?;
    }
    Ok(out)
}

/// Which of a batch of words move each window vertex, as a bit mask.
///
/// Only vertices moved by some word are kept; the others cannot affect
/// `core_contains` for any word of the batch.
#[derive(Clone, Debug)]
pub struct MovedTable {
    pub words: Vec<ReducedWord>,
    pub masks: Vec<u64>,
    pub window_size: usize,
}

impl MovedTable {
    pub fn build<O: GraphOracle + ?Sized>(oracle: &O, window: &[VertexAddr], words: &[ReducedWord]) -> Result<MovedTable> {
        if words.len() > 64 {
            return Err(Error::Input("at most 64 words per table".into()));
        }
        let masks: Vec<u64> = window
            .par_iter()
            .map(|v| -> Result<u64> {
                let mut mask = 0u64;
                for (i, g) in words.iter().enumerate() {
                    if !omega_test(oracle, v, g)? {
                        mask |= 1 << i;
                    }
                }
                Ok(mask)
            })
            .collect::<Result<Vec<u64>>>()?
            .into_iter()
            .filter(|&m| m != 0)
            .collect();
        Ok(MovedTable { words: words.to_vec(), masks, window_size: window.len() })
    }

    pub fn norm(&self, i: usize) -> usize {
        self.masks.iter().filter(|m| *m & (1 << i) != 0).count()
    }

    /// One Bernoulli-`p` window draw, restricted to the moved vertices:
    /// bit `i` of the result is set iff word `i` lies in `Core_A(K)`.
    pub fn draw_contains<R: Rng + ?Sized>(&self, p: f64, rng: &mut R) -> u64 {
        let all = if self.words.len() == 64 { u64::MAX } else { (1u64 << self.words.len()) - 1 };
        let mut hit = 0u64;
        for &m in &self.masks {
            if rng.random::<f64>() < p {
                hit |= m;
            }
        }
        all & !hit
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schreier::{Glued, Zs};
    use crate::words::ball;

    fn w(s: &str) -> ReducedWord {
        ReducedWord::parse(s, 2).unwrap()
    }

    fn aab() -> ReducedWord {
        let (a, b) = (w("a"), w("b"));
        ReducedWord::commutator(&a, &ReducedWord::commutator(&a, &b))
    }

    #[test]
    fn omega_examples() {
        let za = Zs::new(2, 1).unwrap();
        assert!(omega_test(&za, &VertexAddr::Line(0), &ReducedWord::identity()).unwrap());
        assert!(omega_test(&za, &VertexAddr::Line(0), &w("b")).unwrap());
        assert!(!omega_test(&za, &VertexAddr::Line(0), &w("a")).unwrap());
    }

    #[test]
    fn norms() {
        let g = Glued::new(4, 2).unwrap();
        let id = norm_truncated(&g, &ReducedWord::identity(), 6, 2, 1 << 20).unwrap();
        assert_eq!((id.count, id.stabilized), (0, true));
        let c = aab();
        let r = 4 + c.len() + 1;
        let nc = norm_truncated(&g, &c, r + 2, 2, 1 << 22).unwrap();
        assert!(nc.stabilized && nc.certified && nc.count > 0, "{nc:?}");
        let za = Zs::new(2, 1).unwrap();
        let counts: Vec<usize> = [4, 8, 16].iter().map(|&r| norm_truncated(&za, &w("a"), r, 2, 1000).unwrap().count).collect();
        assert_eq!(counts, vec![9, 17, 33]);
        assert!(!norm_truncated(&za, &w("a"), 16, 2, 1000).unwrap().stabilized);
    }

    #[test]
    fn window_sizes() {
        let g = Glued::new(3, 2).unwrap();
        assert!(sample_core_window(&g, 0.0, 5, 100_000, 1, 0).unwrap().included_roots.is_empty());
        let full = sample_core_window(&g, 1.0, 5, 100_000, 1, 0).unwrap();
        assert_eq!(full.included_roots.len(), full.window_size);
        let half: Vec<f64> =
            (0..50).map(|i| sample_core_window(&g, 0.5, 5, 100_000, 2, i).unwrap().included_roots.len() as f64).collect();
        let wsize = full.window_size as f64;
        for h in half {
            assert!((h - wsize / 2.0).abs() <= 3.0 * (wsize / 4.0).sqrt() + 1.0);
        }
        assert!(sample_core_window(&g, 1.5, 5, 100, 1, 0).is_err());
    }

    #[test]
    fn core_membership() {
        let g = Glued::new(3, 2).unwrap();
        let empty = sample_core_window(&g, 0.0, 4, 100_000, 3, 0).unwrap();
        assert!(core_contains(&g, &empty, &w("a b")).unwrap());
        let win = sample_core_window(&g, 0.3, 4, 100_000, 3, 1).unwrap();
        assert!(core_contains(&g, &win, &ReducedWord::identity()).unwrap());
        let mut with_root = win.clone();
        with_root.included_roots.push(g.root());
        assert!(!core_contains(&g, &with_root, &w("a")).unwrap());
    }

    #[test]
    fn core_is_a_subgroup_and_equivariant() {
        let g = Glued::new(3, 2).unwrap();
        let words = ball(2, 4, 1000).unwrap();
        let c = aab();
        let mut cands: Vec<ReducedWord> = vec![c.clone(), c.inverse(), c.mul(&c)];
        cands.extend(words.iter().take(40).map(|h| c.conjugate_by(h)));
        for rep in 0..20 {
            let win = sample_core_window(&g, 0.05, 6, 1 << 20, 9, rep).unwrap();
            let inside: Vec<&ReducedWord> = cands.iter().filter(|x| core_contains(&g, &win, x).unwrap()).collect();
            for x in &inside {
                assert!(core_contains(&g, &win, &x.inverse()).unwrap());
                for y in &inside {
                    assert!(core_contains(&g, &win, &x.mul(y)).unwrap());
                }
            }
            for gamma in words.iter().step_by(37) {
                let moved = translate_window(&g, &win, gamma).unwrap();
                for x in cands.iter().take(10) {
                    assert_eq!(
                        core_contains(&g, &moved, &x.conjugate_by(gamma)).unwrap(),
                        core_contains(&g, &win, x).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn norm_triangle_and_symmetry() {
        let g = Glued::new(3, 2).unwrap();
        let window = bfs_ball(&g, &g.root(), 7, 1 << 20).unwrap();
        let ws = ball(2, 3, 1000).unwrap();
        let pick = |i: usize| ws[(i * 7919) % ws.len()].clone();
        for i in 0..40 {
            let (x, y) = (pick(i), pick(i + 13));
            let n = |h: &ReducedWord| norm_on_window(&g, h, &window, 7, 2).unwrap().count;
            assert!(n(&x.mul(&y)) <= n(&x) + n(&y));
            assert_eq!(n(&x), n(&x.inverse()));
        }
    }

    #[test]
    fn moved_table_matches_direct_count() {
        let g = Glued::new(4, 2).unwrap();
        let window: Vec<VertexAddr> = bfs_ball(&g, &g.root(), 10, 1 << 20).unwrap().into_iter().map(|x| x.0).collect();
        let c = aab();
        let words = vec![c.clone(), c.conjugate_by(&w("b")), ReducedWord::identity()];
        let t = MovedTable::build(&g, &window, &words).unwrap();
        let direct = norm_truncated(&g, &c, 10, 2, 1 << 20).unwrap().count;
        assert_eq!(t.norm(0), direct);
        assert_eq!(t.norm(2), 0);
        let mut rng = stream_rng(4, 0);
        assert_eq!(t.draw_contains(0.0, &mut rng), 0b111);
        assert_eq!(t.draw_contains(1.0, &mut rng), 0b100);
    }
}
