//! Free group arithmetic on freely reduced words.
//!
//! Generators are numbered `1..=d`; a [`Letter`] is a generator or its
//! inverse, stored as a signed byte. Words are kept freely reduced at all
//! times, so `len()` is the word length `|g|` in the free basis.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

/// Hard upper bound on the rank; letters are stored in an `i8`.
pub const MAX_RANK: usize = 26;

/// A free generator `a_i` (positive) or its inverse (negative).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(i8);

impl Letter {
    /// Positive letter `a_index`, 1-based.
    pub fn gen(index: usize) -> Letter {
        assert!((1..=MAX_RANK).contains(&index), "generator index {index} out of range");
        Letter(index as i8)
    }

    /// Inverse letter `a_index^{-1}`.
    pub fn gen_inv(index: usize) -> Letter {
        Letter::gen(index).inverse()
    }

    /// Checked constructor against a rank `d`.
    pub fn checked(index: i64, d: usize) -> Result<Letter> {
        if index == 0 || index.unsigned_abs() as usize > d || d > MAX_RANK {
            return Err(Error::Input(format!("generator index {index} outside [1,{d}]")));
        }
        Ok(Letter(index as i8))
    }

    /// 1-based generator index.
    #[inline]
    pub fn index(self) -> usize {
        self.0.unsigned_abs() as usize
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    /// `+1` or `-1`.
    #[inline]
    pub fn sign(self) -> i64 {
        if self.0 > 0 {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn inverse(self) -> Letter {
        Letter(-self.0)
    }

    #[inline]
    pub fn raw(self) -> i8 {
        self.0
    }

    /// All `2d` letters in the canonical order `a_1, a_1^{-1}, a_2, ...`.
    pub fn all(d: usize) -> impl Iterator<Item = Letter> + Clone {
        (1..=d).flat_map(|i| [Letter::gen(i), Letter::gen_inv(i)])
    }

    fn symbol(self, d: usize) -> String {
        let base = (b'a' + (self.index() as u8 - 1)) as char;
        let c = if self.is_positive() { base } else { base.to_ascii_uppercase() };
        if d <= MAX_RANK {
            c.to_string()
        } else {
            format!("{c}{}", self.index())
        }
    }
}

/// An element of `F_d` as a freely reduced letter sequence.
///
/// The empty word is the identity.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ReducedWord {
    letters: Vec<Letter>,
}

impl ReducedWord {
    pub fn identity() -> ReducedWord {
        ReducedWord { letters: Vec::new() }
    }

    pub fn letter(x: Letter) -> ReducedWord {
        ReducedWord { letters: vec![x] }
    }

    /// Free reduction of an arbitrary letter sequence.
    pub fn reduce<I: IntoIterator<Item = Letter>>(letters: I) -> ReducedWord {
        let mut w = ReducedWord::identity();
        for x in letters {
            w.push(x);
        }
        w
    }

    /// Free reduction of signed generator indices, validated against `d`.
    pub fn from_indices(indices: &[i64], d: usize) -> Result<ReducedWord> {
        let mut w = ReducedWord::identity();
        for &i in indices {
            w.push(Letter::checked(i, d)?);
        }
        Ok(w)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    #[inline]
    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    #[inline]
    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    #[inline]
    pub fn last(&self) -> Option<Letter> {
        self.letters.last().copied()
    }

    #[inline]
    pub fn first(&self) -> Option<Letter> {
        self.letters.first().copied()
    }

    /// Largest generator index used (0 for the identity).
    pub fn max_index(&self) -> usize {
        self.letters.iter().map(|x| x.index()).max().unwrap_or(0)
    }

    /// Right-multiply by one letter, cancelling if needed.
    #[inline]
    pub fn push(&mut self, x: Letter) {
        if self.letters.last() == Some(&x.inverse()) {
            self.letters.pop();
        } else {
            self.letters.push(x);
        }
    }

    /// Right-multiply in place by a reduced word.
    pub fn mul_assign(&mut self, rhs: &ReducedWord) {
        for &x in &rhs.letters {
            self.push(x);
        }
    }

    pub fn mul(&self, rhs: &ReducedWord) -> ReducedWord {
        let mut out = self.clone();
        out.mul_assign(rhs);
        out
    }

    pub fn inverse(&self) -> ReducedWord {
        ReducedWord { letters: self.letters.iter().rev().map(|x| x.inverse()).collect() }
    }

    /// `g^{-1} h g`.
    pub fn conjugate_by(&self, g: &ReducedWord) -> ReducedWord {
        g.inverse().mul(self).mul(g)
    }

    /// `[g, h] = g^{-1} h^{-1} g h`.
    pub fn commutator(g: &ReducedWord, h: &ReducedWord) -> ReducedWord {
        g.inverse().mul(&h.inverse()).mul(g).mul(h)
    }

    pub fn pow(&self, k: i64) -> ReducedWord {
        let base = if k < 0 { self.inverse() } else { self.clone() };
        let mut out = ReducedWord::identity();
        for _ in 0..k.unsigned_abs() {
            out.mul_assign(&base);
        }
        out
    }

    /// The first `min(r, |g|)` letters.
    pub fn prefix(&self, r: usize) -> ReducedWord {
        ReducedWord { letters: self.letters[..r.min(self.len())].to_vec() }
    }

    /// Largest `k` with `s_1..s_k = (s_{n-k+1}..s_n)^{-1}`.
    ///
    /// Undefined for the identity. The result is always `< |g|/2`.
    pub fn rad(&self) -> Result<usize> {
        if self.is_identity() {
            return Err(Error::Domain("rad is undefined for the identity".into()));
        }
        let n = self.len();
        let mut k = 0;
        while 2 * (k + 1) <= n && self.letters[k] == self.letters[n - 1 - k].inverse() {
            k += 1;
        }
        Ok(k)
    }

    /// Uniformly random reduced word of exact length `len`.
    pub fn random<R: Rng + ?Sized>(d: usize, len: usize, rng: &mut R) -> ReducedWord {
        let mut letters: Vec<Letter> = Vec::with_capacity(len);
        for i in 0..len {
            let x = if i == 0 {
                letter_from_slot(rng.random_range(0..2 * d))
            } else {
                // 2d - 1 choices avoiding the inverse of the previous letter
                let prev_inv = letters[i - 1].inverse();
                let mut slot = rng.random_range(0..2 * d - 1);
                if slot >= slot_of(prev_inv) {
                    slot += 1;
                }
                letter_from_slot(slot)
            };
            letters.push(x);
        }
        ReducedWord { letters }
    }

    /// Render with a given rank; `1` denotes the identity.
    pub fn render(&self, d: usize) -> String {
        if self.is_identity() {
            return "1".into();
        }
        self.letters.iter().map(|x| x.symbol(d)).collect::<Vec<_>>().join(" ")
    }

    /// Parse `"a b A B"`, `"abAB"`, `"a1 a2 A1"` or `"1"`; reduces the result.
    pub fn parse(text: &str, d: usize) -> Result<ReducedWord> {
        let mut out = ReducedWord::identity();
        let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        if chars.is_empty() || chars == ['1'] {
            return Ok(out);
        }
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if !c.is_ascii_alphabetic() {
                return Err(Error::Input(format!("unexpected character {c:?} in word {text:?}")));
            }
            i += 1;
            let mut digits = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                digits.push(chars[i]);
                i += 1;
            }
            let index = if digits.is_empty() {
                (c.to_ascii_lowercase() as u8 - b'a') as i64 + 1
            } else {
                if !c.eq_ignore_ascii_case(&'a') {
                    return Err(Error::Input(format!("indexed letters must use a/A, got {c}{digits}")));
                }
                digits.parse::<i64>().map_err(|e| Error::Input(e.to_string()))?
            };
            let signed = if c.is_ascii_uppercase() { -index } else { index };
            out.push(Letter::checked(signed, d)?);
        }
        Ok(out)
    }
}

impl fmt::Display for ReducedWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.max_index().max(2);
        f.write_str(&self.render(d))
    }
}

impl FromStr for ReducedWord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReducedWord::parse(s, MAX_RANK)
    }
}

#[inline]
fn slot_of(x: Letter) -> usize {
    2 * (x.index() - 1) + usize::from(!x.is_positive())
}

#[inline]
fn letter_from_slot(slot: usize) -> Letter {
    let index = slot / 2 + 1;
    if slot.is_multiple_of(2) {
        Letter::gen(index)
    } else {
        Letter::gen_inv(index)
    }
}

/// `|B_r|` in `F_d`: `1 + 2d((2d-1)^r - 1)/(2d-2)`.
pub fn ball_size(d: usize, r: usize) -> u128 {
    let q = (2 * d - 1) as u128;
    1 + (2 * d as u128) * (q.pow(r as u32) - 1) / (q - 1)
}

/// Number of reduced words of length exactly `k`.
pub fn sphere_size(d: usize, k: usize) -> u128 {
    if k == 0 {
        1
    } else {
        2 * d as u128 * ((2 * d - 1) as u128).pow(k as u32 - 1)
    }
}

/// Every reduced word of length at most `r`, in order of length.
pub fn ball(d: usize, r: usize, cap: usize) -> Result<Vec<ReducedWord>> {
    if !(2..=MAX_RANK).contains(&d) {
        return Err(Error::Input(format!("rank {d} outside [2,{MAX_RANK}]")));
    }
    let size = ball_size(d, r);
    if size > cap as u128 {
        return Err(Error::Resource(format!("ball of radius {r} in F_{d} has {size} words, cap is {cap}")));
    }
    let mut out = Vec::with_capacity(size as usize);
    out.push(ReducedWord::identity());
    let mut start = 0;
    for _ in 0..r {
        let end = out.len();
        for i in start..end {
            for x in Letter::all(d) {
                if out[i].last() == Some(x.inverse()) {
                    continue;
                }
                let mut w = out[i].clone();
                w.letters.push(x);
                out.push(w);
            }
        }
        start = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use std::collections::HashSet;

    fn w(s: &str) -> ReducedWord {
        ReducedWord::parse(s, 2).unwrap()
    }

    #[test]
    fn cancellation_and_inverse() {
        assert!(w("a").mul(&w("A")).is_identity());
        assert_eq!(w("ab").inverse(), w("B A"));
        let raw = [Letter::gen(1), Letter::gen(2), Letter::gen_inv(2), Letter::gen(1)];
        assert_eq!(ReducedWord::reduce(raw), w("aa"));
        assert_eq!(w("abBa"), w("aa"));
    }

    #[test]
    fn out_of_range_generator() {
        assert!(ReducedWord::from_indices(&[1, 3], 2).is_err());
        assert!(ReducedWord::from_indices(&[0], 2).is_err());
        assert!(ReducedWord::parse("c", 2).is_err());
    }

    #[test]
    fn rad_examples() {
        assert_eq!(w("a").rad().unwrap(), 0);
        assert_eq!(w("a b A").rad().unwrap(), 1);
        assert_eq!(w("a b").rad().unwrap(), 0);
        assert!(matches!(ReducedWord::identity().rad(), Err(Error::Domain(_))));
    }

    #[test]
    fn ball_sizes() {
        assert_eq!(ball(2, 0, 10).unwrap().len(), 1);
        assert_eq!(ball(2, 1, 10).unwrap().len(), 5);
        assert_eq!(ball(2, 6, 10_000).unwrap().len(), 1457);
        for d in 2..=3 {
            for r in 0..=6 {
                let b = ball(d, r, 1 << 22).unwrap();
                assert_eq!(b.len() as u128, ball_size(d, r));
                let distinct: HashSet<_> = b.iter().collect();
                assert_eq!(distinct.len(), b.len());
                assert!(b.iter().all(|g| g.len() <= r));
            }
        }
        assert!(matches!(ball(2, 12, 1000), Err(Error::Resource(_))));
    }

    #[test]
    fn prefixes() {
        assert_eq!(w("abab").prefix(2), w("ab"));
        assert_eq!(w("a").prefix(5), w("a"));
        assert_eq!(ReducedWord::identity().prefix(3), ReducedWord::identity());
    }

    #[test]
    fn render_and_parse() {
        let g = w("a b A B");
        assert_eq!(g.render(2), "a b A B");
        assert_eq!(ReducedWord::parse("a1 a2 A1 A2", 2).unwrap(), g);
        assert_eq!(ReducedWord::parse("1", 2).unwrap(), ReducedWord::identity());
        assert_eq!(ReducedWord::identity().render(2), "1");
    }

    #[test]
    fn random_words_are_reduced_and_uniform_in_first_letter() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut first = [0usize; 4];
        for _ in 0..4000 {
            let g = ReducedWord::random(2, 7, &mut rng);
            assert_eq!(g.len(), 7);
            assert_eq!(ReducedWord::reduce(g.letters().iter().copied()), g);
            first[slot_of(g.first().unwrap())] += 1;
        }
        assert!(first.iter().all(|&c| (850..1150).contains(&c)), "{first:?}");
    }

    fn arb_word(d: usize, max: usize) -> impl Strategy<Value = ReducedWord> {
        prop::collection::vec((1..=d as i64, any::<bool>()), 0..max).prop_map(move |v| {
            ReducedWord::from_indices(&v.iter().map(|&(i, s)| if s { i } else { -i }).collect::<Vec<_>>(), d).unwrap()
        })
    }

    proptest! {
        #[test]
        fn mul_is_associative(u in arb_word(3, 12), v in arb_word(3, 12), x in arb_word(3, 12)) {
            prop_assert_eq!(u.mul(&v).mul(&x), u.mul(&v.mul(&x)));
        }

        #[test]
        fn inverse_and_length_bound(u in arb_word(2, 20), v in arb_word(2, 20)) {
            prop_assert!(u.mul(&u.inverse()).is_identity());
            prop_assert!(u.mul(&v).len() <= u.len() + v.len());
        }

        #[test]
        fn rad_symmetric_and_bounded(u in arb_word(2, 24)) {
            prop_assume!(!u.is_identity());
            let r = u.rad().unwrap();
            prop_assert_eq!(r, u.inverse().rad().unwrap());
            prop_assert!(2 * r < u.len());
        }

        #[test]
        fn parse_round_trip(u in arb_word(4, 16)) {
            prop_assert_eq!(ReducedWord::parse(&u.render(4), 4).unwrap(), u);
        }
    }
}
