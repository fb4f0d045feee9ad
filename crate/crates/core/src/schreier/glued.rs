use std::collections::{HashMap, VecDeque};
use std::sync::OnceLock;

use super::{check_letter, malformed, GraphOracle, VertexAddr};
use crate::error::{Error, Result};
use crate::nilquot::{nil_project, NilElement};
use crate::words::{Letter, ReducedWord};

/// Radius of the cached seam-distance table in each `Λ`-copy.
const DEFAULT_SEAM_RADIUS: usize = 16;

/// A Schreier graph whose ball of radius `n` is the ball of `F_d` and whose
/// far part looks locally like `Λ` or one of the `Z_s`.
///
/// Each leaf `f` of the depth-`n` tree, with last letter `t`, receives:
/// * a one-way `t`-ray continuing away from the root;
/// * a two-sided `σ`-line through `f` for every generator `σ` other than
///   `t`'s generator and, unless `t` is `a = a_1` or its inverse, other than `a`;
/// * when `t ∉ {a, a⁻¹}`, a copy of the Cayley graph of `Λ` with its edge
///   `e → a` removed, spliced so that `f.a = nil(a)` and `e.a = f`.
///
/// Every edge not mentioned is a loop.
#[derive(Debug)]
pub struct Glued {
    n: usize,
    d: usize,
    nil_a: NilElement,
    seam_radius: usize,
    seam: OnceLock<HashMap<NilElement, usize>>,
}

impl Glued {
    pub fn new(n: usize, d: usize) -> Result<Glued> {
        Glued::with_seam_radius(n, d, DEFAULT_SEAM_RADIUS)
    }

    pub fn with_seam_radius(n: usize, d: usize, seam_radius: usize) -> Result<Glued> {
        if n == 0 {
            return Err(Error::Input("glued graph needs depth n >= 1".into()));
        }
        if !(2..=crate::words::MAX_RANK).contains(&d) {
            return Err(Error::Input(format!("rank {d} out of range")));
        }
        Ok(Glued { n, d, nil_a: NilElement::generator(d, Letter::gen(1)), seam_radius, seam: OnceLock::new() })
    }

    pub fn depth(&self) -> usize {
        self.n
    }

    /// Distance in `Λ` from the seam pair `{e, nil(a)}`, cached to `seam_radius`.
    fn seam_table(&self) -> &HashMap<NilElement, usize> {
        self.seam.get_or_init(|| {
            let mut dist = HashMap::new();
            let mut queue = VecDeque::new();
            for s in [NilElement::identity(self.d), self.nil_a.clone()] {
                dist.insert(s.clone(), 0);
                queue.push_back(s);
            }
            while let Some(v) = queue.pop_front() {
                let k = dist[&v];
                if k == self.seam_radius {
                    continue;
                }
                for x in Letter::all(self.d) {
                    let mut u = v.clone();
                    u.mul_letter(x);
                    dist.entry(u.clone()).or_insert_with(|| {
                        queue.push_back(u);
                        k + 1
                    });
                }
            }
            dist
        })
    }

    /// Distance from the seam pair, searched up to `limit`.
    fn seam_distance(&self, y: &NilElement, limit: usize) -> Option<usize> {
        let table = self.seam_table();
        if let Some(&k) = table.get(y) {
            return Some(k).filter(|&k| k <= limit);
        }
        if limit <= self.seam_radius {
            return None;
        }
        let mut seen: HashMap<NilElement, usize> = HashMap::from([(y.clone(), 0)]);
        let mut queue = VecDeque::from([y.clone()]);
        let mut best: Option<usize> = None;
        while let Some(v) = queue.pop_front() {
            let k = seen[&v];
            if let Some(&s) = table.get(&v) {
                best = Some(best.map_or(k + s, |b| b.min(k + s)));
            }
            if k >= limit || best.is_some_and(|b| k + self.seam_radius >= b) {
                continue;
            }
            for x in Letter::all(self.d) {
                let mut u = v.clone();
                u.mul_letter(x);
                if !seen.contains_key(&u) {
                    seen.insert(u.clone(), k + 1);
                    queue.push_back(u);
                }
            }
        }
        best.filter(|&b| b <= limit)
    }

    /// Leaf rewiring, for a step off leaf `f` along `x` that leaves the tree.
    fn leave(&self, f: ReducedWord, x: Letter) -> VertexAddr {
        let t = f.last().expect("leaf of positive depth");
        let a = Letter::gen(1);
        if x != t && t.index() != 1 && x.index() == 1 {
            let element = if x == a { self.nil_a.clone() } else { NilElement::identity(self.d) };
            VertexAddr::Copy { leaf: f, element }
        } else {
            VertexAddr::Ray { leaf: f, label: x, position: 1 }
        }
    }

    fn valid_leaf(&self, f: &ReducedWord) -> bool {
        f.len() == self.n
    }
}

impl GraphOracle for Glued {
    fn rank(&self) -> usize {
        self.d
    }

    fn root(&self) -> VertexAddr {
        VertexAddr::Tree(ReducedWord::identity())
    }

    fn step(&self, v: &mut VertexAddr, x: Letter) -> Result<()> {
        check_letter(x, self.d)?;
        match v {
            VertexAddr::Tree(w) if w.len() <= self.n => {
                if w.len() < self.n || w.last() == Some(x.inverse()) {
                    w.push(x);
                } else {
                    let f = std::mem::take(w);
                    *v = self.leave(f, x);
                }
            }
            VertexAddr::Ray { leaf, label, position } if *position >= 1 && self.valid_leaf(leaf) => {
                if x == *label {
                    *position += 1;
                } else if x == label.inverse() {
                    if *position == 1 {
                        let f = std::mem::take(leaf);
                        *v = VertexAddr::Tree(f);
                    } else {
                        *position -= 1;
                    }
                }
            }
            VertexAddr::Copy { leaf, element } if self.valid_leaf(leaf) && element.rank() == self.d => {
                let a = Letter::gen(1);
                if (x == a && element.is_identity()) || (x == a.inverse() && *element == self.nil_a) {
                    let f = std::mem::take(leaf);
                    *v = VertexAddr::Tree(f);
                } else {
                    element.mul_letter(x);
                }
            }
            _ => return Err(malformed(&self.name(), v)),
        }
        Ok(())
    }

    fn certified_rad(&self) -> usize {
        self.n
    }

    fn root_distance(&self, v: &VertexAddr, limit: usize) -> Result<Option<usize>> {
        let dist = match v {
            VertexAddr::Tree(w) => Some(w.len()),
            VertexAddr::Ray { position, .. } => Some(self.n + *position as usize),
            VertexAddr::Copy { element, .. } => {
                if limit < self.n + 1 {
                    None
                } else {
                    self.seam_distance(element, limit - self.n - 1).map(|k| self.n + 1 + k)
                }
            }
            _ => return Err(malformed(&self.name(), v)),
        };
        Ok(dist.filter(|&k| k <= limit))
    }

    fn fast_prefix(&self, v: &VertexAddr, r: usize) -> Option<ReducedWord> {
        if r > self.n {
            return None;
        }
        match v {
            VertexAddr::Tree(w) => Some(w.prefix(r)),
            VertexAddr::Ray { leaf, .. } | VertexAddr::Copy { leaf, .. } => Some(leaf.prefix(r)),
            _ => None,
        }
    }

    /// For `g ∈ N`: rays and lines see `g` through `π_σ(g) = 0` and copies
    /// through `nil(g) = 1`, so only vertices whose `g`-path can reach a leaf
    /// or a seam, all within `n + |g| + 1` of the root, can move.
    fn support_radius(&self, g: &ReducedWord) -> Option<usize> {
        nil_project(g, self.d).is_identity().then_some(self.n + g.len() + 1)
    }

    fn name(&self) -> String {
        format!("Glued(n={},d={})", self.n, self.d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schreier::{act, bfs_distance};
    use crate::words::ball;

    fn w(s: &str) -> ReducedWord {
        ReducedWord::parse(s, 2).unwrap()
    }

    #[test]
    fn tree_addresses_are_words() {
        let g = Glued::new(4, 2).unwrap();
        for f in ball(2, 4, 1000).unwrap() {
            assert_eq!(act(&g, &g.root(), &f).unwrap(), VertexAddr::Tree(f));
        }
    }

    #[test]
    fn leaf_ending_in_b_round_trips_through_copy() {
        let g = Glued::new(3, 2).unwrap();
        let f = VertexAddr::Tree(w("a a b"));
        let up = act(&g, &f, &w("a")).unwrap();
        assert!(matches!(up, VertexAddr::Copy { .. }));
        assert_eq!(act(&g, &up, &w("A")).unwrap(), f);
        let down = act(&g, &f, &w("A")).unwrap();
        assert_eq!(down, VertexAddr::Copy { leaf: w("a a b"), element: NilElement::identity(2) });
        assert_eq!(act(&g, &down, &w("a")).unwrap(), f);
    }

    #[test]
    fn leaf_ending_in_a_gets_lines() {
        let g = Glued::new(2, 2).unwrap();
        let f = VertexAddr::Tree(w("b a"));
        let r3 = act(&g, &f, &w("a a a")).unwrap();
        assert_eq!(r3, VertexAddr::Ray { leaf: w("b a"), label: Letter::gen(1), position: 3 });
        assert_eq!(act(&g, &r3, &w("b")).unwrap(), r3);
        let down = act(&g, &f, &w("B B")).unwrap();
        assert_eq!(down, VertexAddr::Ray { leaf: w("b a"), label: Letter::gen_inv(2), position: 2 });
        assert_eq!(act(&g, &f, &w("b B")).unwrap(), f);
        assert_eq!(act(&g, &f, &w("B b")).unwrap(), f);
    }

    #[test]
    fn root_distance_matches_bfs() {
        let g = Glued::with_seam_radius(2, 2, 2).unwrap();
        let probes = ["a b", "a b a a", "a b A b", "a b A b a B", "b a b b", "b a B B", "a b b a b A"];
        for p in probes {
            let v = act(&g, &g.root(), &w(p)).unwrap();
            let fast = g.root_distance(&v, 12).unwrap();
            let slow = bfs_distance(&g, &v, &g.root(), 12).unwrap();
            assert_eq!(fast, slow, "{p} -> {v}");
        }
    }

    #[test]
    fn fast_prefix_examples() {
        let g = Glued::new(5, 2).unwrap();
        let v = VertexAddr::Tree(w("a b a b a"));
        assert_eq!(g.fast_prefix(&v, 2), Some(w("a b")));
        let c = VertexAddr::Copy { leaf: w("b a b a b"), element: NilElement::generator(2, Letter::gen(2)) };
        assert_eq!(g.fast_prefix(&c, 3), Some(w("b a b")));
        assert_eq!(g.fast_prefix(&g.root(), 4), Some(ReducedWord::identity()));
        assert_eq!(g.fast_prefix(&v, 6), None);
    }

    #[test]
    fn bad_addresses_rejected() {
        let g = Glued::new(2, 2).unwrap();
        let mut deep = VertexAddr::Tree(w("a a a"));
        assert!(g.step(&mut deep, Letter::gen(1)).is_err());
        let mut ray0 = VertexAddr::Ray { leaf: w("a a"), label: Letter::gen(1), position: 0 };
        assert!(g.step(&mut ray0, Letter::gen(1)).is_err());
        assert!(Glued::new(0, 2).is_err());
    }
}
