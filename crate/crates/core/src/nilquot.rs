//! The abelian characters `π_s : F_d → Z` and the free 2-step nilpotent
//! quotient `Λ = F_d / [F_d, [F_d, F_d]]`.
//!
//! Elements of `Λ` are pairs `(x, y)` with `x ∈ Z^d` and `y ∈ Z^{d(d-1)/2}`,
//! multiplied by
//!
//! ```text
//! (x, y) · (x', y') = (x + x', y + y' + Q(x, x')),   Q(x, x')_{ij} = x_i x'_j  (i < j)
//! ```
//!
//! For `d = 2` this is exactly the upper unitriangular 3×3 matrix product
//! with `a ↦ E_12`, `b ↦ E_23` and `y` the corner entry.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::words::{Letter, ReducedWord};

/// Image of a word under `π_s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AbelianImage(pub i64);

/// Signed exponent sum of generator `s` (1-based) in `g`.
pub fn pi_s(g: &ReducedWord, s: usize) -> AbelianImage {
    AbelianImage(g.letters().iter().filter(|x| x.index() == s).map(|x| x.sign()).sum())
}

/// Element of the free 2-step nilpotent group of rank `d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NilElement {
    x: Vec<i64>,
    y: Vec<i64>,
}

/// Position of the pair `(i, j)`, `0 ≤ i < j < d`, in the `y` vector.
#[inline]
fn pair_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < d);
    i * (2 * d - i - 1) / 2 + (j - i - 1)
}

impl NilElement {
    pub fn identity(d: usize) -> NilElement {
        NilElement { x: vec![0; d], y: vec![0; d * (d - 1) / 2] }
    }

    pub fn from_parts(x: Vec<i64>, y: Vec<i64>) -> Result<NilElement> {
        let d = x.len();
        if d < 2 || y.len() != d * (d - 1) / 2 {
            return Err(Error::Input(format!("bad nil coordinates: |x|={}, |y|={}", d, y.len())));
        }
        Ok(NilElement { x, y })
    }

    /// Image of a single letter.
    pub fn generator(d: usize, letter: Letter) -> NilElement {
        let mut e = NilElement::identity(d);
        e.x[letter.index() - 1] = letter.sign();
        e
    }

    pub fn rank(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[i64] {
        &self.x
    }

    pub fn y(&self) -> &[i64] {
        &self.y
    }

    /// Commutator coordinate for generators `i < j` (1-based).
    pub fn commutator_coord(&self, i: usize, j: usize) -> i64 {
        self.y[pair_index(self.rank(), i - 1, j - 1)]
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().all(|&v| v == 0) && self.y.iter().all(|&v| v == 0)
    }

    pub fn mul(&self, rhs: &NilElement) -> NilElement {
        let mut out = self.clone();
        out.mul_assign(rhs);
        out
    }

    pub fn mul_assign(&mut self, rhs: &NilElement) {
        let d = self.rank();
        assert_eq!(d, rhs.rank(), "rank mismatch");
        for i in 0..d {
            if self.x[i] == 0 {
                continue;
            }
            for j in i + 1..d {
                self.y[pair_index(d, i, j)] += self.x[i] * rhs.x[j];
            }
        }
        for (a, b) in self.y.iter_mut().zip(&rhs.y) {
            *a += b;
        }
        for (a, b) in self.x.iter_mut().zip(&rhs.x) {
            *a += b;
        }
    }

    /// Right-multiply by the image of one letter, without allocating.
    #[inline]
    pub fn mul_letter(&mut self, letter: Letter) {
        let d = self.rank();
        let j = letter.index() - 1;
        let s = letter.sign();
        for i in 0..j {
            self.y[pair_index(d, i, j)] += self.x[i] * s;
        }
        self.x[j] += s;
    }

    pub fn inverse(&self) -> NilElement {
        let d = self.rank();
        let mut y: Vec<i64> = self.y.iter().map(|v| -v).collect();
        for i in 0..d {
            for j in i + 1..d {
                y[pair_index(d, i, j)] += self.x[i] * self.x[j];
            }
        }
        NilElement { x: self.x.iter().map(|v| -v).collect(), y }
    }
}

impl fmt::Display for NilElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[i64]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";");
        write!(f, "({}|{})", join(&self.x), join(&self.y))
    }
}

/// The quotient map `F_d → Λ`.
pub fn nil_project(g: &ReducedWord, d: usize) -> NilElement {
    let mut e = NilElement::identity(d);
    for &x in g.letters() {
        e.mul_letter(x);
    }
    e
}

/// Cayley-graph ball of radius `r` in `Λ`, each element with its distance.
pub fn nil_ball(d: usize, r: usize, cap: usize) -> Result<Vec<(NilElement, usize)>> {
    let mut seen: HashMap<NilElement, usize> = HashMap::new();
    let mut order = Vec::new();
    let mut queue = VecDeque::new();
    let e = NilElement::identity(d);
    seen.insert(e.clone(), 0);
    order.push((e.clone(), 0));
    queue.push_back(e);
    while let Some(v) = queue.pop_front() {
        let dist = seen[&v];
        if dist == r {
            continue;
        }
        for x in Letter::all(d) {
            let mut w = v.clone();
            w.mul_letter(x);
            if !seen.contains_key(&w) {
                if order.len() >= cap {
                    return Err(Error::Resource(format!("nil ball of radius {r} exceeds cap {cap}")));
                }
                seen.insert(w.clone(), dist + 1);
                order.push((w.clone(), dist + 1));
                queue.push_back(w);
            }
        }
    }
    Ok(order)
}

/// CSV dump of a nil ball: `distance,x...,y...`.
pub fn nil_ball_csv(ball: &[(NilElement, usize)]) -> String {
    let mut out = String::new();
    if let Some((e, _)) = ball.first() {
        let d = e.rank();
        out.push_str("distance");
        for i in 1..=d {
            out.push_str(&format!(",x{i}"));
        }
        for i in 1..=d {
            for j in i + 1..=d {
                out.push_str(&format!(",y{i}{j}"));
            }
        }
        out.push('\n');
    }
    for (e, dist) in ball {
        out.push_str(&dist.to_string());
        for v in e.x.iter().chain(&e.y) {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::ball;
    use proptest::prelude::*;
    use std::collections::HashSet;

    type M3 = [[i64; 3]; 3];

    fn m_mul(p: &M3, q: &M3) -> M3 {
        let mut r = [[0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    r[i][j] += p[i][k] * q[k][j];
                }
            }
        }
        r
    }

    /// Heisenberg representation, independent of the collection formula.
    fn heis(g: &ReducedWord) -> M3 {
        let a = [[1, 1, 0], [0, 1, 0], [0, 0, 1]];
        let ai = [[1, -1, 0], [0, 1, 0], [0, 0, 1]];
        let b = [[1, 0, 0], [0, 1, 1], [0, 0, 1]];
        let bi = [[1, 0, 0], [0, 1, -1], [0, 0, 1]];
        let mut m = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];
        for x in g.letters() {
            let step = match (x.index(), x.is_positive()) {
                (1, true) => a,
                (1, false) => ai,
                (2, true) => b,
                _ => bi,
            };
            m = m_mul(&m, &step);
        }
        m
    }

    fn w(s: &str) -> ReducedWord {
        ReducedWord::parse(s, 2).unwrap()
    }

    #[test]
    fn pi_examples() {
        assert_eq!(pi_s(&w("a b a B"), 1), AbelianImage(2));
        assert_eq!(pi_s(&ReducedWord::identity(), 1), AbelianImage(0));
        assert_eq!(pi_s(&w("a B A"), 2), AbelianImage(-1));
    }

    #[test]
    fn commutator_projection() {
        assert!(nil_project(&ReducedWord::identity(), 2).is_identity());
        let ab = nil_project(&w("a b A B"), 2);
        assert_eq!(ab.x(), &[0, 0]);
        assert_eq!(ab.y().len(), 1);
        assert_eq!(ab.y()[0].abs(), 1);
        let ba = nil_project(&w("b a B A"), 2);
        assert!(ab.mul(&ba).is_identity());
        // c_12 = a^-1 b^-1 a b
        assert_eq!(nil_project(&w("A B a b"), 2).commutator_coord(1, 2), 1);
    }

    #[test]
    fn double_commutators_vanish() {
        let a = w("a");
        let b = w("b");
        let ab = ReducedWord::commutator(&a, &b);
        for g in [&a, &b, &w("ab"), &w("aaB")] {
            let dc = ReducedWord::commutator(g, &ab);
            assert!(nil_project(&dc, 2).is_identity(), "{dc}");
        }
        let w3 = |s: &str| ReducedWord::parse(s, 3).unwrap();
        let c3 = ReducedWord::commutator(&w3("c"), &ReducedWord::commutator(&w3("a"), &w3("b")));
        assert!(nil_project(&c3, 3).is_identity());
    }

    #[test]
    fn small_balls() {
        assert_eq!(nil_ball(2, 0, 10).unwrap().len(), 1);
        assert_eq!(nil_ball(2, 1, 10).unwrap().len(), 5);
        let brute: HashSet<NilElement> = ball(2, 2, 100).unwrap().iter().map(|g| nil_project(g, 2)).collect();
        assert_eq!(nil_ball(2, 2, 1000).unwrap().len(), brute.len());
        assert!(nil_ball(2, 6, 50).is_err());
    }

    #[test]
    fn ball_csv_header() {
        let csv = nil_ball_csv(&nil_ball(2, 1, 10).unwrap());
        assert!(csv.starts_with("distance,x1,x2,y12\n0,0,0,0\n"));
    }

    fn arb_word(d: usize, max: usize) -> impl Strategy<Value = ReducedWord> {
        prop::collection::vec((1..=d as i64, any::<bool>()), 0..max).prop_map(move |v| {
            ReducedWord::from_indices(&v.iter().map(|&(i, s)| if s { i } else { -i }).collect::<Vec<_>>(), d).unwrap()
        })
    }

    fn arb_nil(d: usize) -> impl Strategy<Value = NilElement> {
        (prop::collection::vec(-5i64..5, d), prop::collection::vec(-5i64..5, d * (d - 1) / 2))
            .prop_map(|(x, y)| NilElement::from_parts(x, y).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn matrix_oracle_agrees(g in arb_word(2, 30)) {
            let e = nil_project(&g, 2);
            let m = heis(&g);
            prop_assert_eq!(m[0][1], e.x()[0]);
            prop_assert_eq!(m[1][2], e.x()[1]);
            prop_assert_eq!(m[0][2], e.y()[0]);
        }

        #[test]
        fn projection_is_homomorphism(u in arb_word(4, 20), v in arb_word(4, 20)) {
            prop_assert_eq!(nil_project(&u.mul(&v), 4), nil_project(&u, 4).mul(&nil_project(&v, 4)));
        }

        #[test]
        fn group_laws(p in arb_nil(3), q in arb_nil(3), r in arb_nil(3)) {
            prop_assert_eq!(p.mul(&q).mul(&r), p.mul(&q.mul(&r)));
            prop_assert!(p.mul(&p.inverse()).is_identity());
            prop_assert!(p.inverse().mul(&p).is_identity());
        }

        #[test]
        fn pure_commutators_are_central(y in prop::collection::vec(-5i64..5, 3), g in arb_word(3, 10)) {
            let z = NilElement::from_parts(vec![0; 3], y).unwrap();
            let h = nil_project(&g, 3);
            prop_assert_eq!(h.inverse().mul(&z).mul(&h), z);
        }

        #[test]
        fn pi_is_homomorphism(u in arb_word(3, 20), v in arb_word(3, 20), s in 1usize..=3) {
            prop_assert_eq!(pi_s(&u.mul(&v), s).0, pi_s(&u, s).0 + pi_s(&v, s).0);
        }
    }
}
