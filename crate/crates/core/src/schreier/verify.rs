use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use super::{GraphOracle, SeamedLambda, VertexAddr, Zs};
use crate::error::{Error, Result};
use crate::schreier::Lambda;
use crate::words::{ball_size, Letter, ReducedWord};

/// Default cap on vertices visited by breadth-first searches.
pub const BFS_CAP: usize = 2_000_000;

/// Ball of radius `r` about `v`, in canonical discovery order.
///
/// Expansion visits labels in the order `a_1, a_1^{-1}, a_2, ...`, so the
/// order depends only on the rooted labeled ball.
pub fn bfs_ball<O: GraphOracle + ?Sized>(
    oracle: &O,
    v: &VertexAddr,
    r: usize,
    cap: usize,
) -> Result<Vec<(VertexAddr, usize)>> {
    let mut index: HashMap<VertexAddr, usize> = HashMap::from([(v.clone(), 0)]);
    let mut order = vec![(v.clone(), 0usize)];
    let mut head = 0;
    while head < order.len() {
        let (u, k) = order[head].clone();
        head += 1;
        if k == r {
            continue;
        }
        for x in Letter::all(oracle.rank()) {
            let mut w = u.clone();
            oracle.step(&mut w, x)?;
            if !index.contains_key(&w) {
                if order.len() >= cap {
                    return Err(Error::Resource(format!("ball of radius {r} exceeds {cap} vertices")));
                }
                index.insert(w.clone(), order.len());
                order.push((w, k + 1));
            }
        }
    }
    Ok(order)
}

/// Canonical encoding of the rooted labeled ball `B(v, r)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signature(Vec<u8>);

impl Signature {
    pub fn hex(&self) -> String {
        hex::encode(&self.0)
    }

    pub fn bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.hex())
    }
}

const OUTSIDE: u32 = u32::MAX;

/// For every ball vertex in discovery order, the index of its successor under
/// each positive generator, or an outside marker.
pub fn ball_signature<O: GraphOracle + ?Sized>(oracle: &O, v: &VertexAddr, r: usize) -> Result<Signature> {
    let ball = bfs_ball(oracle, v, r, BFS_CAP)?;
    let index: HashMap<&VertexAddr, u32> = ball.iter().enumerate().map(|(i, (u, _))| (u, i as u32)).collect();
    let d = oracle.rank();
    let mut bytes = Vec::with_capacity(8 + 4 * d * ball.len());
    bytes.extend_from_slice(&(d as u32).to_le_bytes());
    bytes.extend_from_slice(&(r as u32).to_le_bytes());
    for (u, _) in &ball {
        for s in 1..=d {
            let mut w = u.clone();
            oracle.step(&mut w, Letter::gen(s))?;
            let j = index.get(&w).copied().unwrap_or(OUTSIDE);
            bytes.extend_from_slice(&j.to_le_bytes());
        }
    }
    Ok(Signature(bytes))
}

#[derive(Clone, Debug, Default)]
pub struct PropernessReport {
    pub checked: usize,
    pub violations: Vec<String>,
}

impl PropernessReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check that every positive label acts bijectively around the window.
pub fn verify_properness<O: GraphOracle + ?Sized>(oracle: &O, window: &[VertexAddr]) -> PropernessReport {
    let mut report = PropernessReport::default();
    for v in window {
        for s in 1..=oracle.rank() {
            report.checked += 1;
            let x = Letter::gen(s);
            for (first, second) in [(x, x.inverse()), (x.inverse(), x)] {
                let mut u = v.clone();
                let ok = oracle.step(&mut u, first).and_then(|_| oracle.step(&mut u, second)).map(|_| u);
                match ok {
                    Ok(u) if u == *v => {}
                    Ok(u) => report.violations.push(format!(
                        "{v} .{} .{} = {u}",
                        ReducedWord::letter(first),
                        ReducedWord::letter(second)
                    )),
                    Err(e) => report.violations.push(format!("{v}: {e}")),
                }
            }
        }
    }
    report
}

/// Tree-shape check at the root: the ball of radius `n` has exactly
/// `|B_n(F_d)|` vertices, so distinct words of length `<= n` reach distinct
/// vertices.
///
/// This is necessary for `rad(K) >= n`, not sufficient, and it is the
/// property the prefix machinery relies on.
pub fn verify_rad<O: GraphOracle + ?Sized>(oracle: &O, n: usize) -> Result<bool> {
    let expected = ball_size(oracle.rank(), n);
    if expected > BFS_CAP as u128 {
        return Err(Error::Resource(format!("ball of radius {n} has {expected} vertices")));
    }
    match bfs_ball(oracle, &oracle.root(), n, expected as usize + 1) {
        Ok(b) => Ok(b.len() as u128 == expected),
        Err(Error::Resource(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Word read along a breadth-first geodesic from the root to `v`.
pub fn geodesic_word<O: GraphOracle + ?Sized>(oracle: &O, v: &VertexAddr, cap: usize) -> Result<ReducedWord> {
    let root = oracle.root();
    if *v == root {
        return Ok(ReducedWord::identity());
    }
    let mut parent: HashMap<VertexAddr, (VertexAddr, Letter)> = HashMap::new();
    let mut queue = VecDeque::from([root.clone()]);
    parent.insert(root.clone(), (root.clone(), Letter::gen(1)));
    while let Some(u) = queue.pop_front() {
        for x in Letter::all(oracle.rank()) {
            let mut w = u.clone();
            oracle.step(&mut w, x)?;
            if parent.contains_key(&w) {
                continue;
            }
            parent.insert(w.clone(), (u.clone(), x));
            if w == *v {
                let mut letters = Vec::new();
                let mut cur = w;
                while cur != root {
                    let (p, x) = parent[&cur].clone();
                    letters.push(x);
                    cur = p;
                }
                letters.reverse();
                return Ok(ReducedWord::reduce(letters));
            }
            if parent.len() >= cap {
                return Err(Error::Resource(format!("geodesic search exceeded {cap} vertices")));
            }
            queue.push_back(w);
        }
    }
    Err(Error::Input(format!("{v} is not reachable from the root")))
}

/// `pref_r(v)`; uses the address when possible and a geodesic otherwise.
pub fn graph_prefix<O: GraphOracle + ?Sized>(oracle: &O, v: &VertexAddr, r: usize) -> Result<ReducedWord> {
    if r > oracle.certified_rad() {
        return Err(Error::Contract(format!(
            "prefix of length {r} needs rad >= {r}; {} certifies {}",
            oracle.name(),
            oracle.certified_rad()
        )));
    }
    if r == 0 {
        return Ok(ReducedWord::identity());
    }
    if let Some(p) = oracle.fast_prefix(v, r) {
        return Ok(p);
    }
    graph_prefix_bfs(oracle, v, r)
}

/// `pref_r(v)` from a breadth-first geodesic, without the address shortcut.
pub fn graph_prefix_bfs<O: GraphOracle + ?Sized>(oracle: &O, v: &VertexAddr, r: usize) -> Result<ReducedWord> {
    Ok(geodesic_word(oracle, v, BFS_CAP)?.prefix(r))
}

/// Named reference signatures for the locality check.
#[derive(Clone, Debug, Default)]
pub struct ReferenceSet {
    by_sig: HashMap<Signature, String>,
}

impl ReferenceSet {
    pub fn insert(&mut self, name: impl Into<String>, sig: Signature) {
        self.by_sig.entry(sig).or_insert_with(|| name.into());
    }

    pub fn lookup(&self, sig: &Signature) -> Option<&str> {
        self.by_sig.get(sig).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.by_sig.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_sig.is_empty()
    }

    /// Balls of radius `r` in `Λ` and every `Z_s`, plus the seam variants:
    /// `Λ`-balls that reach the cut edge `e -> a` but not the leaf.
    pub fn for_glued(d: usize, r: usize) -> Result<ReferenceSet> {
        let mut refs = ReferenceSet::default();
        let lambda = Lambda::new(d);
        refs.insert("Lambda", ball_signature(&lambda, &lambda.root(), r)?);
        for s in 1..=d {
            let z = Zs::new(d, s)?;
            refs.insert(format!("Z_{s}"), ball_signature(&z, &z.root(), r)?);
        }
        let seamed = SeamedLambda::new(d);
        for (v, k) in bfs_ball(&seamed, &seamed.root(), 2 * r + 1, BFS_CAP)? {
            if k > r {
                refs.insert(format!("Lambda-seam@{k}"), ball_signature(&seamed, &v, r)?);
            }
        }
        Ok(refs)
    }
}

#[derive(Clone, Debug, Default)]
pub struct LocalityReport {
    pub checked: usize,
    pub excluded: usize,
    pub matched: BTreeMap<String, usize>,
    /// `(vertex, signature hex)` of the first violators.
    pub violations: Vec<(String, String)>,
    pub violation_count: usize,
}

impl LocalityReport {
    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }
}

/// Check that every vertex farther than `big_r` from the root has an
/// `r`-ball isomorphic to one of the references.
pub fn verify_locality<O: GraphOracle + ?Sized>(
    oracle: &O,
    r: usize,
    big_r: usize,
    refs: &ReferenceSet,
    vertices: &[VertexAddr],
) -> Result<LocalityReport> {
    let mut report = LocalityReport::default();
    for v in vertices {
        if oracle.root_distance(v, big_r)?.is_some() {
            report.excluded += 1;
            continue;
        }
        report.checked += 1;
        let sig = ball_signature(oracle, v, r)?;
        match refs.lookup(&sig) {
            Some(name) => *report.matched.entry(name.to_string()).or_default() += 1,
            None => {
                report.violation_count += 1;
                if report.violations.len() < 10 {
                    report.violations.push((v.to_string(), sig.hex()));
                }
            }
        }
    }
    Ok(report)
}

/// CSV dump of a breadth-first ball: `index,address,distance,succ_1,...`.
pub fn bfs_csv<O: GraphOracle + ?Sized>(oracle: &O, v: &VertexAddr, r: usize) -> Result<String> {
    let ball = bfs_ball(oracle, v, r, BFS_CAP)?;
    let index: HashMap<&VertexAddr, usize> = ball.iter().enumerate().map(|(i, (u, _))| (u, i)).collect();
    let mut out = String::from("index,address,distance");
    for s in 1..=oracle.rank() {
        out.push_str(&format!(",succ_{s}"));
    }
    out.push('\n');
    for (i, (u, k)) in ball.iter().enumerate() {
        out.push_str(&format!("{i},\"{u}\",{k}"));
        for s in 1..=oracle.rank() {
            let mut w = u.clone();
            oracle.step(&mut w, Letter::gen(s))?;
            match index.get(&w) {
                Some(j) => out.push_str(&format!(",{j}")),
                None => out.push_str(",-"),
            }
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nilquot::NilElement;

    fn copy_vertex(leaf: ReducedWord, element: NilElement) -> VertexAddr {
        VertexAddr::Copy { leaf, element }
    }

    use crate::nilquot::nil_project;
    use crate::schreier::{act, Glued};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn w(s: &str) -> ReducedWord {
        ReducedWord::parse(s, 2).unwrap()
    }

    /// `Z_a` with the `a`-edge out of 3 redirected to 5.
    struct Corrupted(Zs);

    impl GraphOracle for Corrupted {
        fn rank(&self) -> usize {
            2
        }
        fn root(&self) -> VertexAddr {
            VertexAddr::Line(0)
        }
        fn step(&self, v: &mut VertexAddr, x: Letter) -> Result<()> {
            if *v == VertexAddr::Line(3) && x == Letter::gen(1) {
                *v = VertexAddr::Line(5);
                return Ok(());
            }
            self.0.step(v, x)
        }
        fn name(&self) -> String {
            "corrupted".into()
        }
    }

    #[test]
    fn properness_of_zs_and_negative_control() {
        let za = Zs::new(2, 1).unwrap();
        let window: Vec<VertexAddr> = (-5..=5).map(VertexAddr::Line).collect();
        assert!(verify_properness(&za, &window).passed());
        let bad = Corrupted(za);
        let rep = verify_properness(&bad, &window);
        assert!(!rep.passed());
        assert!(rep.violations.iter().any(|s| s.contains("Z[3]")), "{:?}", rep.violations);
    }

    #[test]
    fn glued_properness_on_ball() {
        let g = Glued::new(4, 2).unwrap();
        let window: Vec<VertexAddr> = bfs_ball(&g, &g.root(), 7, BFS_CAP).unwrap().into_iter().map(|p| p.0).collect();
        let rep = verify_properness(&g, &window);
        assert!(rep.passed(), "{:?}", rep.violations);
    }

    #[test]
    fn rad_checks() {
        for n in 2..=6 {
            assert!(verify_rad(&Glued::new(n, 2).unwrap(), n).unwrap());
        }
        assert_eq!(bfs_ball(&Glued::new(6, 2).unwrap(), &VertexAddr::Tree(ReducedWord::identity()), 6, BFS_CAP).unwrap().len(), 1457);
        assert!(!verify_rad(&Zs::new(2, 1).unwrap(), 1).unwrap());
        // the leaf attachments branch once more before the first loop
        assert!(verify_rad(&Glued::new(3, 2).unwrap(), 4).unwrap());
        assert!(!verify_rad(&Glued::new(3, 2).unwrap(), 5).unwrap());
    }

    #[test]
    fn signature_examples() {
        let za = Zs::new(2, 1).unwrap();
        let zb = Zs::new(2, 2).unwrap();
        assert_eq!(
            ball_signature(&za, &VertexAddr::Line(0), 3).unwrap(),
            ball_signature(&za, &VertexAddr::Line(17), 3).unwrap()
        );
        assert_ne!(
            ball_signature(&za, &VertexAddr::Line(0), 1).unwrap(),
            ball_signature(&zb, &VertexAddr::Line(0), 1).unwrap()
        );
        let l = Lambda::new(2);
        let far = VertexAddr::Nil(nil_project(&w("a b b A b a"), 2));
        assert_eq!(ball_signature(&l, &l.root(), 2).unwrap(), ball_signature(&l, &far, 2).unwrap());
        assert!(!ball_signature(&l, &l.root(), 1).unwrap().hex().is_empty());
    }

    #[test]
    fn prefix_examples_and_contract() {
        let g = Glued::new(5, 2).unwrap();
        assert_eq!(graph_prefix(&g, &VertexAddr::Tree(w("a b a b a")), 2).unwrap(), w("a b"));
        let c = copy_vertex(w("b a b a b"), nil_project(&w("b b a"), 2));
        assert_eq!(graph_prefix(&g, &c, 3).unwrap(), w("b a b"));
        assert_eq!(graph_prefix_bfs(&g, &c, 3).unwrap(), w("b a b"));
        assert_eq!(graph_prefix(&g, &g.root(), 4).unwrap(), ReducedWord::identity());
        assert!(matches!(graph_prefix(&g, &g.root(), 6), Err(Error::Contract(_))));
        let za = Zs::new(2, 1).unwrap();
        assert!(matches!(graph_prefix(&za, &VertexAddr::Line(4), 1), Err(Error::Contract(_))));
    }

    #[test]
    fn fast_prefix_matches_geodesic_on_random_vertices() {
        let g = Glued::new(3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let len = rng.random_range(0..9);
            let v = act(&g, &g.root(), &ReducedWord::random(2, len, &mut rng)).unwrap();
            for r in 0..=3 {
                let fast = graph_prefix(&g, &v, r).unwrap();
                assert_eq!(fast, graph_prefix_bfs(&g, &v, r).unwrap(), "{v} r={r}");
            }
        }
    }

    #[test]
    fn locality_on_rays_and_copies() {
        let n = 6;
        let g = Glued::new(n, 2).unwrap();
        let refs = ReferenceSet::for_glued(2, 2).unwrap();
        let mut window = Vec::new();
        for leaf in ["a b a b a b", "a a a a a a", "b b b b b B"] {
            let Ok(leaf) = ReducedWord::parse(leaf, 2) else { continue };
            if leaf.len() != n {
                continue;
            }
            for x in Letter::all(2) {
                for k in 1..6 {
                    window.push(act(&g, &VertexAddr::Tree(leaf.clone()), &ReducedWord::letter(x).pow(k)).unwrap());
                }
            }
        }
        window.push(copy_vertex(w("a b a b a b"), nil_project(&w("b b b a a B"), 2)));
        window.push(VertexAddr::Tree(w("a b")));
        let rep = verify_locality(&g, 2, n + 2, &refs, &window).unwrap();
        assert!(rep.passed(), "{:?}", rep.violations);
        assert!(rep.excluded > 0);
        assert!(rep.matched.contains_key("Z_1") && rep.matched.contains_key("Z_2"));
        assert!(rep.matched.keys().any(|k| k.starts_with("Lambda")));
        let tight = verify_locality(&g, 2, n + 1, &refs, &window).unwrap();
        assert!(!tight.passed());
    }

    #[test]
    fn csv_dump() {
        let za = Zs::new(2, 1).unwrap();
        let csv = bfs_csv(&za, &VertexAddr::Line(0), 1).unwrap();
        assert!(csv.starts_with("index,address,distance,succ_1,succ_2\n0,\"Z[0]\",0,1,0\n"), "{csv}");
    }
}
