//! `SL2(Z)`, its free subgroup `F = ⟨A, B⟩` with `A = [[1,2],[0,1]]` and
//! `B = [[1,0],[2,1]]`, and the hitting measure of `F` under the walk on
//! `{S^{±1}, T^{±1}}`.
//!
//! Words over `F_2` are reused in two roles: letter 1/2 stand for `S`/`T`
//! when they describe steps in `G`, and for `A`/`B` when they are witnesses
//! in `F`.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::entropy::{count_outcomes, entropy_from_counts, entropy_of_probs, increments, EntropyEstimate};
use crate::error::{Error, Result};
use crate::stats::{det_map_of, mean_ci, ols_slope, stable_sum, DetMap};
use crate::walks::{stream_rng, StepLaw};
use crate::words::{Letter, ReducedWord};

/// Cap on the number of cosets explored while building the table.
pub const COSET_CAP: usize = 10_000;

/// Default cap on the length of a single excursion.
pub const DEFAULT_STEP_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mat2 {
    pub a: BigInt,
    pub b: BigInt,
    pub c: BigInt,
    pub d: BigInt,
}

impl Mat2 {
    pub fn new(a: BigInt, b: BigInt, c: BigInt, d: BigInt) -> Result<Mat2> {
        let m = Mat2 { a, b, c, d };
        if !m.det().is_one() {
            return Err(Error::Input(format!("{m} has determinant {}", m.det())));
        }
        Ok(m)
    }

    pub fn from_i64(a: i64, b: i64, c: i64, d: i64) -> Result<Mat2> {
        Mat2::new(a.into(), b.into(), c.into(), d.into())
    }

    fn raw(a: i64, b: i64, c: i64, d: i64) -> Mat2 {
        Mat2 { a: a.into(), b: b.into(), c: c.into(), d: d.into() }
    }

    pub fn identity() -> Mat2 {
        Mat2::raw(1, 0, 0, 1)
    }

    pub fn neg_identity() -> Mat2 {
        Mat2::raw(-1, 0, 0, -1)
    }

    pub fn det(&self) -> BigInt {
        &self.a * &self.d - &self.b * &self.c
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2 {
            a: &self.a * &o.a + &self.b * &o.c,
            b: &self.a * &o.b + &self.b * &o.d,
            c: &self.c * &o.a + &self.d * &o.c,
            d: &self.c * &o.b + &self.d * &o.d,
        }
    }

    pub fn inverse(&self) -> Mat2 {
        Mat2 { a: self.d.clone(), b: -&self.b, c: -&self.c, d: self.a.clone() }
    }

    pub fn neg(&self) -> Mat2 {
        Mat2 { a: -&self.a, b: -&self.b, c: -&self.c, d: -&self.d }
    }

    pub fn is_identity(&self) -> bool {
        *self == Mat2::identity()
    }

    pub fn max_abs(&self) -> BigInt {
        [&self.a, &self.b, &self.c, &self.d].into_iter().map(|x| x.abs()).max().expect("four entries")
    }

    pub fn entries(&self) -> [&BigInt; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    /// Entries reduced into `0..q`.
    pub fn reduce_mod(&self, q: u32) -> ModMat {
        let qb = BigInt::from(q);
        let r = |x: &BigInt| x.mod_floor(&qb).to_u32().expect("residue fits");
        ModMat { e: [r(&self.a), r(&self.b), r(&self.c), r(&self.d)], q }
    }

    /// Left multiplication by `A^k` (`top`) or `B^k` (bottom row update).
    fn shear(&self, top: bool, k: &BigInt) -> Mat2 {
        let two_k = k * 2;
        if top {
            Mat2 { a: &self.a + &two_k * &self.c, b: &self.b + &two_k * &self.d, c: self.c.clone(), d: self.d.clone() }
        } else {
            Mat2 { a: self.a.clone(), b: self.b.clone(), c: &self.c + &two_k * &self.a, d: &self.d + &two_k * &self.b }
        }
    }

    fn size(&self) -> (BigInt, BigInt) {
        let sum = self.entries().into_iter().map(|x| x.abs()).fold(BigInt::zero(), |s, x| s + x);
        (self.max_abs(), sum)
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{},{}],[{},{}]]", self.a, self.b, self.c, self.d)
    }
}

/// `S = [[0,-1],[1,0]]`.
pub fn mat_s() -> Mat2 {
    Mat2::raw(0, -1, 1, 0)
}

/// `T = [[1,1],[0,1]]`.
pub fn mat_t() -> Mat2 {
    Mat2::raw(1, 1, 0, 1)
}

pub fn sanov_a() -> Mat2 {
    Mat2::raw(1, 2, 0, 1)
}

pub fn sanov_b() -> Mat2 {
    Mat2::raw(1, 0, 2, 1)
}

/// Letter 1 ↦ `S`, letter 2 ↦ `T`.
pub fn g_matrix(x: Letter) -> Mat2 {
    let m = if x.index() == 1 { mat_s() } else { mat_t() };
    if x.is_positive() {
        m
    } else {
        m.inverse()
    }
}

/// Letter 1 ↦ `A`, letter 2 ↦ `B`.
pub fn f_matrix(x: Letter) -> Mat2 {
    let m = if x.index() == 1 { sanov_a() } else { sanov_b() };
    if x.is_positive() {
        m
    } else {
        m.inverse()
    }
}

pub fn evaluate_g(w: &ReducedWord) -> Mat2 {
    w.letters().iter().fold(Mat2::identity(), |m, &x| m.mul(&g_matrix(x)))
}

pub fn evaluate_f(w: &ReducedWord) -> Mat2 {
    w.letters().iter().fold(Mat2::identity(), |m, &x| m.mul(&f_matrix(x)))
}

/// Candidate exponents `k ≠ 0` making `x + 2k·y` small.
fn exponents(x: &BigInt, y: &BigInt, out: &mut Vec<BigInt>) {
    if y.is_zero() {
        return;
    }
    let k = (-x).div_floor(&(y * 2));
    for c in [k.clone(), k + 1] {
        if !c.is_zero() {
            out.push(c);
        }
    }
}

/// The reduced word `w(A, B)` evaluating to `m`, or `None` if `m ∉ F`.
///
/// Greedy: repeatedly left-multiply by the power of `A` or `B` that most
/// decreases `(max |entry|, Σ |entry|)`; members reach `I`.
pub fn sanov_membership(m: &Mat2) -> Option<ReducedWord> {
    if !m.det().is_one() {
        return None;
    }
    let odd = |x: &BigInt| x.is_odd();
    if !odd(&m.a) || odd(&m.b) || odd(&m.c) || !odd(&m.d) {
        return None;
    }
    let mut cur = m.clone();
    let mut moves: Vec<(bool, BigInt)> = Vec::new();
    let mut ks = Vec::new();
    while !cur.is_identity() {
        let size = cur.size();
        let mut best: Option<(Mat2, bool, BigInt, (BigInt, BigInt))> = None;
        for top in [true, false] {
            ks.clear();
            if top {
                exponents(&cur.a, &cur.c, &mut ks);
                exponents(&cur.b, &cur.d, &mut ks);
            } else {
                exponents(&cur.c, &cur.a, &mut ks);
                exponents(&cur.d, &cur.b, &mut ks);
            }
            for k in &ks {
                let next = cur.shear(top, k);
                let s = next.size();
                if s < size && best.as_ref().is_none_or(|b| s < b.3) {
                    best = Some((next, top, k.clone(), s));
                }
            }
        }
        match best {
            Some((next, top, k, _)) => {
                moves.push((top, k));
                cur = next;
            }
            None => return None,
        }
    }
    // X_m ⋯ X_1 m = I, so m = X_1^{-1} ⋯ X_m^{-1}
    let mut letters = Vec::new();
    for (top, k) in moves {
        let n = k.abs().to_usize()?;
        let gen = if top { 1 } else { 2 };
        let x = if k.is_positive() { Letter::gen_inv(gen) } else { Letter::gen(gen) };
        letters.extend(std::iter::repeat_n(x, n));
    }
    Some(ReducedWord::reduce(letters))
}

/// A matrix with entries in `Z/q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModMat {
    pub e: [u32; 4],
    pub q: u32,
}

impl ModMat {
    pub fn identity(q: u32) -> ModMat {
        ModMat { e: [1 % q, 0, 0, 1 % q], q }
    }

    pub fn mul(&self, o: &ModMat) -> ModMat {
        let q = self.q as u64;
        let [a, b, c, d] = self.e.map(u64::from);
        let [x, y, z, w] = o.e.map(u64::from);
        let r = |v: u64| (v % q) as u32;
        ModMat { e: [r(a * x + b * z), r(a * y + b * w), r(c * x + d * z), r(c * y + d * w)], q: self.q }
    }
}

/// Right action of `G = SL2(Z)` on `F \ G` by the generators `S`, `T`.
#[derive(Clone, Debug, Serialize)]
pub struct CosetTable {
    pub index: usize,
    /// `perms[0]` for `S`, `perms[1]` for `T`: coset `i` times generator.
    pub perms: [Vec<usize>; 2],
    pub inverse_perms: [Vec<usize>; 2],
    #[serde(skip)]
    pub representatives: Vec<Mat2>,
}

impl CosetTable {
    /// Enumerate `F \ G` breadth-first, comparing cosets by membership of `g h^{-1}`.
    pub fn build() -> Result<CosetTable> {
        let mut reps = vec![Mat2::identity()];
        let mut perms: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        let mut i = 0;
        while i < reps.len() {
            for (k, gen) in [mat_s(), mat_t()].iter().enumerate() {
                let g = reps[i].mul(gen);
                let j = match reps.iter().position(|h| sanov_membership(&g.mul(&h.inverse())).is_some()) {
                    Some(j) => j,
                    None => {
                        if reps.len() >= COSET_CAP {
                            return Err(Error::Resource(format!("more than {COSET_CAP} cosets; membership is broken")));
                        }
                        reps.push(g);
                        reps.len() - 1
                    }
                };
                perms[k].push(j);
            }
            i += 1;
        }
        let index = reps.len();
        let mut inverse_perms = [vec![0; index], vec![0; index]];
        for k in 0..2 {
            for (i, &j) in perms[k].iter().enumerate() {
                inverse_perms[k][j] = i;
            }
        }
        Ok(CosetTable { index, perms, inverse_perms, representatives: reps })
    }

    /// `(F g) x` for a generator letter `x`.
    #[inline]
    pub fn step(&self, coset: usize, x: Letter) -> usize {
        let k = x.index() - 1;
        if x.is_positive() {
            self.perms[k][coset]
        } else {
            self.inverse_perms[k][coset]
        }
    }

    /// Coset of `m` by membership tests against the stored representatives.
    pub fn coset_of_matrix(&self, m: &Mat2) -> Option<usize> {
        self.representatives.iter().position(|h| sanov_membership(&m.mul(&h.inverse())).is_some())
    }

    pub fn is_transitive(&self) -> bool {
        let mut seen = vec![false; self.index];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for k in 0..2 {
                for j in [self.perms[k][i], self.inverse_perms[k][i]] {
                    if !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// One excursion of the walk on `G` until its first return to `F`.
#[derive(Clone, Debug)]
pub struct HittingSample {
    pub time: usize,
    pub matrix: Mat2,
    /// `X_T` as a word in `A`, `B`; `None` when censored.
    pub witness: Option<ReducedWord>,
    pub censored: bool,
}

/// Walk until `T = inf{t ≥ 1 : X_t ∈ F}`, or `cap` steps.
pub fn hitting_sample<R: Rng + ?Sized>(table: &CosetTable, law: &StepLaw, rng: &mut R, cap: usize) -> HittingSample {
    let mut m = Mat2::identity();
    let mut coset = 0;
    let mut letters = Vec::new();
    for t in 1..=cap {
        letters.clear();
        law.sample_letters(rng, &mut letters);
        for &x in &letters {
            m = m.mul(&g_matrix(x));
            coset = table.step(coset, x);
        }
        if coset == 0 {
            let witness = sanov_membership(&m);
            return HittingSample { time: t, matrix: m, witness, censored: false };
        }
    }
    HittingSample { time: cap, matrix: m, witness: None, censored: true }
}

/// Empirical `μ_F` atom.
#[derive(Clone, Debug, Serialize)]
pub struct Atom {
    pub word: String,
    pub matrix: String,
    pub count: u64,
    pub probability: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KacReport {
    pub index: usize,
    pub samples: usize,
    pub censored: usize,
    pub mean_time: f64,
    pub ci: f64,
    /// Slope of `log Pr[T > t]` against `t`.
    pub tail_slope: f64,
    /// `(t, Pr[T > t])` while at least 100 samples survive.
    pub survival: Vec<(usize, f64)>,
    /// `E|X_T|^4` in `A`, `B` letters over the first half and the whole sample.
    pub fourth_moment_half: f64,
    pub fourth_moment: f64,
    /// Largest `|z|` over the 20 heaviest atoms comparing `μ̂(x)` with `μ̂(x^{-1})`.
    pub symmetry_max_z: f64,
    pub symmetry_pairs: usize,
    /// Samples whose return matrix failed the membership test (expected 0).
    pub witness_failures: usize,
    #[serde(skip)]
    pub atoms: Vec<(ReducedWord, u64)>,
}

/// Kac identity, tail, moment and symmetry diagnostics from `samples` excursions.
pub fn kac_check(table: &CosetTable, law: &StepLaw, samples: usize, cap: usize, seed: u64) -> Result<KacReport> {
    if samples == 0 {
        return Err(Error::Input("need at least one sample".into()));
    }
    let draws: Vec<HittingSample> =
        (0..samples as u64).into_par_iter().map(|i| hitting_sample(table, law, &mut stream_rng(seed, i), cap)).collect();
    let censored = draws.iter().filter(|d| d.censored).count();
    let times: Vec<f64> = draws.iter().map(|d| d.time as f64).collect();
    let (mean_time, ci) = mean_ci(&times);
    let mut survival = Vec::new();
    let mut sorted: Vec<usize> = draws.iter().map(|d| d.time).collect();
    sorted.sort_unstable();
    let mut t = 1;
    loop {
        let alive = samples - sorted.partition_point(|&x| x <= t);
        if alive < 100 {
            break;
        }
        survival.push((t, alive as f64 / samples as f64));
        t += 1;
    }
    let start = survival.len() / 4;
    let pts: Vec<(f64, f64)> = survival[start..].iter().map(|&(t, s)| (t as f64, s.ln())).collect();
    let tail_slope = ols_slope(&pts);
    let witness_failures = draws.iter().filter(|d| !d.censored && d.witness.is_none()).count();
    let lens: Vec<f64> = draws.iter().filter_map(|d| d.witness.as_ref()).map(|w| (w.len() as f64).powi(4)).collect();
    let half = lens.len() / 2;
    let fourth_moment_half = lens[..half.max(1).min(lens.len())].iter().sum::<f64>() / half.max(1) as f64;
    let fourth_moment = lens.iter().sum::<f64>() / lens.len().max(1) as f64;
    let mut tally: HashMap<ReducedWord, u64> = HashMap::new();
    for w in draws.iter().filter_map(|d| d.witness.clone()) {
        *tally.entry(w).or_default() += 1;
    }
    let mut atoms: Vec<(ReducedWord, u64)> = tally.into_iter().collect();
    atoms.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
    let (symmetry_max_z, symmetry_pairs) = symmetry_z(&atoms, 20);
    Ok(KacReport {
        index: table.index,
        samples,
        censored,
        mean_time,
        ci,
        tail_slope,
        survival,
        fourth_moment_half,
        fourth_moment,
        symmetry_max_z,
        symmetry_pairs,
        witness_failures,
        atoms,
    })
}

/// Largest `|c(x) - c(x^{-1})| / sqrt(c(x) + c(x^{-1}))` over the `top` heaviest atoms.
pub fn symmetry_z(atoms: &[(ReducedWord, u64)], top: usize) -> (f64, usize) {
    let lookup: HashMap<&ReducedWord, u64> = atoms.iter().map(|(w, c)| (w, *c)).collect();
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for (w, c) in atoms.iter().take(top) {
        let ci = lookup.get(&w.inverse()).copied().unwrap_or(0);
        let total = (*c + ci) as f64;
        if total > 0.0 {
            worst = worst.max((*c as f64 - ci as f64).abs() / total.sqrt());
            pairs += 1;
        }
    }
    (worst, pairs)
}

/// `μ_F` atoms as CSV: word, matrix, count, probability.
pub fn mu_f_csv(atoms: &[(ReducedWord, u64)]) -> String {
    let total: u64 = atoms.iter().map(|a| a.1).sum();
    let mut out = String::from("word,a,b,c,d,count,probability\n");
    for (w, c) in atoms {
        let m = evaluate_f(w);
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.9}\n",
            w.render(2),
            m.a,
            m.b,
            m.c,
            m.d,
            c,
            *c as f64 / total.max(1) as f64
        ));
    }
    out
}

/// Matched-block entropy rates on `G` and on `F` under the hitting walk.
#[derive(Clone, Debug, Serialize)]
pub struct AbramovReport {
    pub index: usize,
    pub k: usize,
    pub samples: usize,
    /// `(H(X_{ik}) - H(X_{i(k-1)})) / i` with `i = [G:F]`.
    pub h_g: f64,
    pub h_g_ci: f64,
    /// `H(Y_k) - H(Y_{k-1})` for `Y_j = X_{T_j}`.
    pub h_f: f64,
    pub h_f_ci: f64,
    /// `ĥ_F / ĥ_G`, which should be close to `[G:F]`.
    pub ratio: f64,
    pub ratio_ci: f64,
    pub entropies: Vec<(String, EntropyEstimate)>,
    pub censored: usize,
}

/// Block estimates at step `k`; censored walks are dropped.
pub fn abramov_check(
    table: &CosetTable,
    law: &StepLaw,
    k: usize,
    samples: usize,
    resamples: usize,
    seed: u64,
) -> Result<AbramovReport> {
    if k == 0 || samples == 0 {
        return Err(Error::Input("need k >= 1 and samples >= 1".into()));
    }
    let block = table.index;
    let runs: Vec<Option<[Mat2; 4]>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let mut m = Mat2::identity();
            let mut coset = 0;
            let mut returns = 0;
            let mut letters = Vec::new();
            let (mut g_prev, mut g_cur, mut f_prev, mut f_cur) = (None, None, None, None);
            if k == 1 {
                f_prev = Some(Mat2::identity());
                g_prev = Some(Mat2::identity());
            }
            for t in 1..=DEFAULT_STEP_CAP {
                letters.clear();
                law.sample_letters(&mut rng, &mut letters);
                for &x in &letters {
                    m = m.mul(&g_matrix(x));
                    coset = table.step(coset, x);
                }
                if t == block * (k - 1) {
                    g_prev = Some(m.clone());
                }
                if t == block * k {
                    g_cur = Some(m.clone());
                }
                if coset == 0 {
                    returns += 1;
                    if returns == k - 1 {
                        f_prev = Some(m.clone());
                    }
                    if returns == k {
                        f_cur = Some(m.clone());
                    }
                }
                if g_cur.is_some() && f_cur.is_some() {
                    break;
                }
            }
            Some([g_prev?, g_cur?, f_prev?, f_cur?])
        })
        .collect();
    let censored = runs.iter().filter(|r| r.is_none()).count();
    let kept: Vec<[Mat2; 4]> = runs.into_iter().flatten().collect();
    let names = ["H(X_prev)", "H(X_cur)", "H(Y_prev)", "H(Y_cur)"];
    let est: Vec<EntropyEstimate> = (0..4)
        .map(|j| entropy_from_counts(&count_outcomes(kept.iter().map(|r| &r[j])), resamples, seed ^ (j as u64 + 1)))
        .collect();
    let b = block as f64;
    let h_g = (est[1].value - est[0].value) / b;
    let h_g_ci = est[1].ci_halfwidth.hypot(est[0].ci_halfwidth) / b;
    let h_f = est[3].value - est[2].value;
    let h_f_ci = est[3].ci_halfwidth.hypot(est[2].ci_halfwidth);
    let ratio = h_f / h_g;
    let ratio_ci = ratio.abs() * ((h_f_ci / h_f).powi(2) + (h_g_ci / h_g).powi(2)).sqrt();
    Ok(AbramovReport {
        index: block,
        k,
        samples,
        h_g,
        h_g_ci,
        h_f,
        h_f_ci,
        ratio,
        ratio_ci,
        entropies: names.iter().map(|s| s.to_string()).zip(est).collect(),
        censored,
    })
}

/// `T_k / k` over independent runs of the coset chain.
pub fn return_time_ratio(table: &CosetTable, law: &StepLaw, k: usize, runs: usize, seed: u64) -> (f64, f64) {
    let xs: Vec<f64> = (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let mut letters = Vec::new();
            let (mut coset, mut returns, mut t) = (0, 0, 0usize);
            while returns < k {
                letters.clear();
                law.sample_letters(&mut rng, &mut letters);
                for &x in &letters {
                    coset = table.step(coset, x);
                }
                t += 1;
                if coset == 0 {
                    returns += 1;
                }
            }
            t as f64 / k as f64
        })
        .collect();
    mean_ci(&xs)
}

/// Exact entropies on the finite quotient `SL2(Z/q)`.
#[derive(Clone, Debug, Serialize)]
pub struct QuotientDecay {
    pub q: u32,
    /// Order of the image of `G`.
    pub g_support: usize,
    /// `H` of the projected `G`-walk at `t = 0..=t_max`.
    pub g_entropy: Vec<f64>,
    /// `H` of the projected `F`-walk with the hitting law, `k = 0..=k_max`.
    pub f_entropy: Vec<f64>,
    /// Mass of `μ_F` left unresolved when the excursion recursion stopped.
    pub f_law_residual: f64,
}

impl QuotientDecay {
    pub fn g_increments(&self) -> Vec<f64> {
        increments(&self.g_entropy)
    }

    pub fn f_increments(&self) -> Vec<f64> {
        increments(&self.f_entropy)
    }
}

fn convolve(dist: &DetMap<ModMat, f64>, step: &[(ModMat, f64)]) -> DetMap<ModMat, f64> {
    let mut next: DetMap<ModMat, f64> = DetMap::default();
    for (m, p) in dist {
        for (u, q) in step {
            *next.entry(m.mul(u)).or_default() += p * q;
        }
    }
    next
}

/// The degenerate relation with `N` the kernel of reduction mod `q`: both
/// walks live on finite groups, so both entropy rates are 0.
pub fn finite_quotient_decay(table: &CosetTable, law: &StepLaw, q: u32, t_max: usize, k_max: usize) -> Result<QuotientDecay> {
    if q < 2 {
        return Err(Error::Input("modulus must be at least 2".into()));
    }
    let atoms = law.atoms(1 << 16)?;
    let step: Vec<(ModMat, f64)> = atoms.iter().map(|(w, p)| (evaluate_g(w).reduce_mod(q), *p)).collect();
    let mut dist = det_map_of(ModMat::identity(q), 1.0);
    let mut g_entropy = vec![0.0];
    for _ in 0..t_max {
        dist = convolve(&dist, &step);
        g_entropy.push(entropy_of_probs(dist.values().copied()));
    }
    let g_support = dist.len();

    // law of X_T mod q, by pushing mass through excursions until it is negligible
    let moves: Vec<(ReducedWord, ModMat, f64)> = atoms.iter().map(|(w, p)| (w.clone(), evaluate_g(w).reduce_mod(q), *p)).collect();
    let mut live = det_map_of((0usize, ModMat::identity(q)), 1.0);
    let mut hit: DetMap<ModMat, f64> = DetMap::default();
    let mut residual = 1.0;
    for _ in 0..100_000 {
        let mut next: DetMap<(usize, ModMat), f64> = DetMap::default();
        for ((c, m), p) in &live {
            for (w, u, pw) in &moves {
                let c2 = w.letters().iter().fold(*c, |c, &x| table.step(c, x));
                let m2 = m.mul(u);
                if c2 == 0 {
                    *hit.entry(m2).or_default() += p * pw;
                } else {
                    *next.entry((c2, m2)).or_default() += p * pw;
                }
            }
        }
        live = next;
        residual = stable_sum(live.values().copied());
        if residual < 1e-15 {
            break;
        }
    }
    let f_step: Vec<(ModMat, f64)> = hit.into_iter().collect();
    let mut fdist = det_map_of(ModMat::identity(q), 1.0);
    let mut f_entropy = vec![0.0];
    for _ in 0..k_max {
        fdist = convolve(&fdist, &f_step);
        f_entropy.push(entropy_of_probs(fdist.values().copied()));
    }
    Ok(QuotientDecay { q, g_support, g_entropy, f_entropy, f_law_residual: residual })
}
