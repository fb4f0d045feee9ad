//! Library results against independent reference computations written here.

use std::collections::{HashMap, HashSet, VecDeque};

use irs_core::entropy::{exact_convolution_entropy, exact_coset_entropy};
use irs_core::nilquot::{nil_ball, nil_project};
use irs_core::schreier::{bfs_ball, Free, Glued, GraphOracle, Lambda};
use irs_core::sl2::{evaluate_g, sanov_membership, CosetTable};
use irs_core::walks::{LawFamily, StepLaw};
use irs_core::words::{ball_size, Letter, ReducedWord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Letters as signed integers, reduced with a stack.
fn naive_reduce(letters: &[i8]) -> Vec<i8> {
    let mut out: Vec<i8> = Vec::new();
    for &x in letters {
        if out.last() == Some(&-x) {
            out.pop();
        } else {
            out.push(x);
        }
    }
    out
}

const LETTERS: [i8; 4] = [1, -1, 2, -2];

fn to_word(letters: &[i8]) -> ReducedWord {
    ReducedWord::reduce(letters.iter().map(|&x| if x > 0 { Letter::gen(x as usize) } else { Letter::gen_inv((-x) as usize) }))
}

#[test]
fn free_ball_sizes_by_enumeration() {
    let mut seen: HashSet<Vec<i8>> = HashSet::from([vec![]]);
    let mut layer: Vec<Vec<i8>> = vec![vec![]];
    for r in 1..=6 {
        let mut next = Vec::new();
        for s in &layer {
            for x in LETTERS {
                let mut t = s.clone();
                t.push(x);
                next.push(t);
            }
        }
        for s in &next {
            seen.insert(naive_reduce(s));
        }
        layer = next;
        assert_eq!(seen.len() as u128, ball_size(2, r), "r={r}");
        let free = Free::new(2);
        assert_eq!(bfs_ball(&free, &free.root(), r, 1 << 20).unwrap().len(), seen.len());
    }
    // the glued graph of depth 6 agrees with the free ball up to its depth
    let g = Glued::new(6, 2).unwrap();
    assert_eq!(bfs_ball(&g, &g.root(), 6, 1 << 20).unwrap().len() as u128, ball_size(2, 6));
}

fn entropy(dist: &HashMap<Vec<i8>, f64>) -> f64 {
    dist.values().map(|p| -p * p.ln()).sum()
}

/// Law of `X_t` by enumerating every path of single-letter steps; `lazy`
/// adds an identity step of probability `alpha`.
fn path_law(t: usize, alpha: f64) -> HashMap<Vec<i8>, f64> {
    let mut steps: Vec<(Option<i8>, f64)> = LETTERS.iter().map(|&x| (Some(x), (1.0 - alpha) / 4.0)).collect();
    if alpha > 0.0 {
        steps.push((None, alpha));
    }
    let mut paths: Vec<(Vec<i8>, f64)> = vec![(vec![], 1.0)];
    for _ in 0..t {
        let mut next = Vec::with_capacity(paths.len() * steps.len());
        for (p, q) in &paths {
            for &(x, w) in &steps {
                let mut s = p.clone();
                s.extend(x);
                next.push((s, q * w));
            }
        }
        paths = next;
    }
    let mut dist = HashMap::new();
    for (p, q) in paths {
        *dist.entry(naive_reduce(&p)).or_insert(0.0) += q;
    }
    dist
}

#[test]
fn exact_entropy_matches_path_enumeration() {
    let h = exact_convolution_entropy(&StepLaw::srw(2), 6, 1 << 20).unwrap();
    for (t, ht) in h.iter().enumerate() {
        assert!((ht - entropy(&path_law(t, 0.0))).abs() < 1e-12, "t={t}");
    }
    let lazy = StepLaw::new(LawFamily::Lazy { alpha: 0.3 }, 2).unwrap();
    let h = exact_convolution_entropy(&lazy, 5, 1 << 20).unwrap();
    for (t, ht) in h.iter().enumerate() {
        assert!((ht - entropy(&path_law(t, 0.3))).abs() < 1e-12, "lazy t={t}");
    }
}

type M3 = [[i64; 3]; 3];

fn mul3(a: &M3, b: &M3) -> M3 {
    let mut c = [[0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

/// The Heisenberg group as integer matrices: `a`, `b` are elementary
/// unipotents and `A`, `B` their inverses.
fn heis(x: i8) -> M3 {
    let s = x.signum() as i64;
    if x.abs() == 1 {
        [[1, s, 0], [0, 1, 0], [0, 0, 1]]
    } else {
        [[1, 0, 0], [0, 1, s], [0, 0, 1]]
    }
}

const I3: M3 = [[1, 0, 0], [0, 1, 0], [0, 0, 1]];

#[test]
fn rank_two_nilpotent_quotient_is_heisenberg() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut pairs = Vec::new();
    for _ in 0..3000 {
        let len = rng.random_range(0..14);
        let s: Vec<i8> = (0..len).map(|_| LETTERS[rng.random_range(0..4)]).collect();
        let m = s.iter().fold(I3, |acc, &x| mul3(&acc, &heis(x)));
        let w = to_word(&s);
        assert_eq!(nil_project(&w, 2).is_identity(), m == I3, "{}", w.render(2));
        pairs.push((nil_project(&w, 2), m));
    }
    // equal images in one model iff equal in the other
    let mut by_nil: HashMap<_, M3> = HashMap::new();
    for (n, m) in &pairs {
        assert_eq!(*by_nil.entry(n.clone()).or_insert(*m), *m);
    }
    let distinct_m: HashSet<M3> = pairs.iter().map(|p| p.1).collect();
    assert_eq!(distinct_m.len(), by_nil.len());

    // ball sizes by breadth-first search over matrices
    let mut dist: HashMap<M3, usize> = HashMap::from([(I3, 0)]);
    let mut queue = VecDeque::from([I3]);
    while let Some(m) = queue.pop_front() {
        let k = dist[&m];
        if k == 6 {
            continue;
        }
        for x in LETTERS {
            let n = mul3(&m, &heis(x));
            if let std::collections::hash_map::Entry::Vacant(e) = dist.entry(n) {
                e.insert(k + 1);
                queue.push_back(n);
            }
        }
    }
    for r in 0..=6 {
        let want = dist.values().filter(|&&k| k <= r).count();
        assert_eq!(nil_ball(2, r, 1 << 20).unwrap().len(), want, "r={r}");
        let lam = Lambda::new(2);
        assert_eq!(bfs_ball(&lam, &lam.root(), r, 1 << 20).unwrap().len(), want);
    }
}

#[test]
fn heisenberg_coset_entropy_by_enumeration() {
    let lam = Lambda::new(2);
    let h = exact_coset_entropy(&lam, &StepLaw::srw(2), 5, 1 << 20).unwrap();
    for (t, ht) in h.iter().enumerate() {
        let mut law: HashMap<M3, f64> = HashMap::new();
        for (w, p) in path_law(t, 0.0) {
            *law.entry(w.iter().fold(I3, |acc, &x| mul3(&acc, &heis(x)))).or_insert(0.0) += p;
        }
        let want: f64 = law.values().map(|p| -p * p.ln()).sum();
        assert!((ht - want).abs() < 1e-12, "t={t}");
    }
}

fn mul2(a: [i64; 4], b: [i64; 4]) -> [i64; 4] {
    [a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]]
}

/// `S` and `T` as plain integer matrices.
fn st(x: i8) -> [i64; 4] {
    match x {
        1 => [0, -1, 1, 0],
        -1 => [0, 1, -1, 0],
        2 => [1, 1, 0, 1],
        _ => [1, -1, 0, 1],
    }
}

#[test]
fn sanov_index_from_congruence() {
    // ±F is the level-2 congruence subgroup, so M is in ±F iff M ≡ I mod 2,
    // and [SL2(Z) : F] = 2 · |SL2(Z/2)| = 12
    let table = CosetTable::build().unwrap();
    assert_eq!(table.index, 2 * 6);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..2000 {
        let len = rng.random_range(0..16);
        let s: Vec<i8> = (0..len).map(|_| LETTERS[rng.random_range(0..4)]).collect();
        let m = s.iter().fold([1, 0, 0, 1], |acc, &x| mul2(acc, st(x)));
        let level2 = m.iter().zip([1, 0, 0, 1]).all(|(a, b)| (a - b).rem_euclid(2) == 0);
        let w = to_word(&s);
        let big = evaluate_g(&w);
        let in_f = sanov_membership(&big).is_some();
        let in_minus_f = sanov_membership(&big.neg()).is_some();
        assert_eq!(in_f || in_minus_f, level2, "{}", w.render(2));
        assert!(!(in_f && in_minus_f));
        let coset = w.letters().iter().fold(0, |c, &x| table.step(c, x));
        assert_eq!(coset == 0, in_f, "{}", w.render(2));
    }
}
