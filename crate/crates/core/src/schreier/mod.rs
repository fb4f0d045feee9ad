//! Lazy Schreier graphs of subgroups of `F_d`.
//!
//! A graph is given by an oracle that moves a vertex address along one
//! labeled edge at a time. Nothing is materialized: the glued graph of depth
//! `n` costs the same for `n = 3` as for `n = 10^5`.
//!
//! Orientation: `v.x` for a letter `x` follows the outgoing `x` edge when `x`
//! is positive and the incoming edge backwards when it is negative.

mod glued;
mod green;
mod verify;

pub use glued::Glued;
pub use green::{green_estimate, visit_count_profile, GreenEstimate, VisitProfile, TAIL_TOLERANCE};
pub use verify::{
    ball_signature, bfs_ball, bfs_csv, graph_prefix, verify_locality, BFS_CAP, verify_properness, verify_rad,
    LocalityReport, PropernessReport, ReferenceSet, Signature,
};

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::nilquot::NilElement;
use crate::words::{Letter, ReducedWord};

/// A vertex of one of the graph families below.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VertexAddr {
    /// Vertex of the depth-`n` tree at the root of a glued graph.
    Tree(ReducedWord),
    /// `position` steps from `leaf` along `label`-edges.
    Ray { leaf: ReducedWord, label: Letter, position: u64 },
    /// A vertex of the `Λ`-copy hanging at `leaf`.
    Copy { leaf: ReducedWord, element: NilElement },
    /// Position on `Z_s`.
    Line(i64),
    /// Element of `Λ`.
    Nil(NilElement),
    /// Element of `Z^d`.
    Abel(Vec<i64>),
    /// Element of `F_d`.
    Word(ReducedWord),
    /// Stand-in for the outside of a seamed `Λ`-copy.
    Hub,
    /// Vertex of a product graph, one coordinate per factor.
    Tuple(Vec<VertexAddr>),
}

impl fmt::Display for VertexAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexAddr::Tree(w) => write!(f, "T[{w}]"),
            VertexAddr::Ray { leaf, label, position } => {
                write!(f, "R[{leaf}|{}|{position}]", ReducedWord::letter(*label))
            }
            VertexAddr::Copy { leaf, element } => write!(f, "C[{leaf}|{element}]"),
            VertexAddr::Line(p) => write!(f, "Z[{p}]"),
            VertexAddr::Nil(e) => write!(f, "N{e}"),
            VertexAddr::Abel(x) => write!(f, "A{x:?}"),
            VertexAddr::Word(w) => write!(f, "W[{w}]"),
            VertexAddr::Hub => write!(f, "H"),
            VertexAddr::Tuple(v) => {
                write!(f, "(")?;
                for (i, c) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A proper rooted `S`-labeled oriented multigraph given by its edge oracle.
pub trait GraphOracle: Send + Sync {
    fn rank(&self) -> usize;

    fn root(&self) -> VertexAddr;

    /// Move `v` along the edge labeled `x`.
    fn step(&self, v: &mut VertexAddr, x: Letter) -> Result<()>;

    /// A radius `r` for which the ball at the root is known, by construction,
    /// to be the ball of `F_d`.
    fn certified_rad(&self) -> usize {
        0
    }

    /// Distance from the root if it is at most `limit`.
    fn root_distance(&self, v: &VertexAddr, limit: usize) -> Result<Option<usize>> {
        bfs_distance(self, v, &self.root(), limit)
    }

    /// Prefix computed from the address alone, when the family allows it.
    fn fast_prefix(&self, _v: &VertexAddr, _r: usize) -> Option<ReducedWord> {
        None
    }

    /// A radius outside which `g` is known to fix every vertex.
    fn support_radius(&self, _g: &ReducedWord) -> Option<usize> {
        None
    }

    fn name(&self) -> String;
}

impl<T: GraphOracle + ?Sized> GraphOracle for Arc<T> {
    fn rank(&self) -> usize {
        (**self).rank()
    }
    fn root(&self) -> VertexAddr {
        (**self).root()
    }
    fn step(&self, v: &mut VertexAddr, x: Letter) -> Result<()> {
        (**self).step(v, x)
    }
    fn certified_rad(&self) -> usize {
        (**self).certified_rad()
    }
    fn root_distance(&self, v: &VertexAddr, limit: usize) -> Result<Option<usize>> {
        (**self).root_distance(v, limit)
    }
    fn fast_prefix(&self, v: &VertexAddr, r: usize) -> Option<ReducedWord> {
        (**self).fast_prefix(v, r)
    }
    fn support_radius(&self, g: &ReducedWord) -> Option<usize> {
        (**self).support_radius(g)
    }
    fn name(&self) -> String {
        (**self).name()
    }
}

fn malformed(oracle: &str, v: &VertexAddr) -> Error {
    Error::Input(format!("address {v} is not a vertex of {oracle}"))
}

fn check_letter(x: Letter, d: usize) -> Result<()> {
    if x.index() > d {
        return Err(Error::Input(format!("letter index {} exceeds rank {d}", x.index())));
    }
    Ok(())
}

/// Apply the letters of `g` to `v`, left to right.
pub fn act<O: GraphOracle + ?Sized>(oracle: &O, v: &VertexAddr, g: &ReducedWord) -> Result<VertexAddr> {
    let mut u = v.clone();
    act_in_place(oracle, &mut u, g)?;
    Ok(u)
}

pub fn act_in_place<O: GraphOracle + ?Sized>(oracle: &O, v: &mut VertexAddr, g: &ReducedWord) -> Result<()> {
    for &x in g.letters() {
        oracle.step(v, x)?;
    }
    Ok(())
}

/// Breadth-first distance from `from` to `to`, searching up to `limit`.
pub fn bfs_distance<O: GraphOracle + ?Sized>(
    oracle: &O,
    from: &VertexAddr,
    to: &VertexAddr,
    limit: usize,
) -> Result<Option<usize>> {
    if from == to {
        return Ok(Some(0));
    }
    let mut seen: HashMap<VertexAddr, usize> = HashMap::new();
    seen.insert(from.clone(), 0);
    let mut queue = VecDeque::from([from.clone()]);
    while let Some(v) = queue.pop_front() {
        let d = seen[&v];
        if d >= limit {
            continue;
        }
        for x in Letter::all(oracle.rank()) {
            let mut u = v.clone();
            oracle.step(&mut u, x)?;
            if &u == to {
                return Ok(Some(d + 1));
            }
            if !seen.contains_key(&u) {
                seen.insert(u.clone(), d + 1);
                queue.push_back(u);
            }
        }
    }
    Ok(None)
}

/// The Schreier graph `Z_s` of `K_s = ker(π_s)`: a line of `s`-edges with
/// loops for every other generator.
#[derive(Clone, Debug)]
pub struct Zs {
    d: usize,
    s: usize,
}

impl Zs {
    pub fn new(d: usize, s: usize) -> Result<Zs> {
        if d < 2 || s == 0 || s > d {
            return Err(Error::Input(format!("Z_s needs 1 <= s <= d, d >= 2 (s={s}, d={d})")));
        }
        Ok(Zs { d, s })
    }
}

impl GraphOracle for Zs {
    fn rank(&self) -> usize {
        self.d
    }
    fn root(&self) -> VertexAddr {
        VertexAddr::Line(0)
    }
    fn step(&self, v: &mut VertexAddr, x: Letter) -> Result<()> {
        check_letter(x, self.d)?;
        match v {
            VertexAddr::Line(p) => {
                if x.index() == self.s {
                    *p += x.sign();
                }
                Ok(())
            }
            _ => Err(malformed(&self.name(), v)),
        }
    }
    fn root_distance(&self, v: &VertexAddr, limit: usize) -> Result<Option<usize>> {
        match v {
            VertexAddr::Line(p) => Ok(Some(p.unsigned_abs() as usize).filter(|&k| k <= limit)),
            _ => Err(malformed(&self.name(), v)),
        }
    }
    fn name(&self) -> String {
        format!("Z_{}(d={})", self.s, self.d)
    }
}

/// Cayley graph of `Λ`, the free 2-step nilpotent quotient.
#[derive(Clone, Debug)]
pub struct Lambda {
    d: usize,
}

impl Lambda {
    pub fn new(d: usize) -> Lambda {
        Lambda { d }
    }
}

impl GraphOracle for Lambda {
    fn rank(&self) -> usize {
        self.d
    }
    fn root(&self) -> VertexAddr {
        VertexAddr::Nil(NilElement::identity(self.d))
    }
    fn step(&self, v: &mut VertexAddr, x: Letter) -> Result<()> {
        check_letter(x, self.d)?;
        match v {
            VertexAddr::Nil(e) if e.rank() == self.d => {
                e.mul_letter(x);
                Ok(())
            }
            _ => Err(malformed(&self.name(), v)),
        }
    }
    fn name(&self) -> String {
        format!("Lambda(d={})", self.d)
    }
}

/// Cayley graph of the abelianization `Z^d`.
#[derive(Clone, Debug)]
pub struct Abelian {
    d: usize,
}

impl Abelian {
    pub fn new(d: usize) -> Abelian {
        Abelian { d }
    }
}

impl GraphOracle for Abelian {
    fn rank(&self) -> usize {
        self.d
    }
    fn root(&self) -> VertexAddr {
        VertexAddr::Abel(vec![0; self.d])
    }
    fn step(&self, v: &mut VertexAddr, x: Letter) -> Result<()> {
        check_letter(x, self.d)?;
        match v {
            VertexAddr::Abel(p) if p.len() == self.d => {
                p[x.index() - 1] += x.sign();
                Ok(())
            }
            _ => Err(malformed(&self.name(), v)),
        }
    }
    fn root_distance(&self, v: &VertexAddr, limit: usize) -> Result<Option<usize>> {
        match v {
            VertexAddr::Abel(p) => {
                let k: u64 = p.iter().map(|c| c.unsigned_abs()).sum();
                Ok(Some(k as usize).filter(|&k| k <= limit))
            }
            _ => Err(malformed(&self.name(), v)),
        }
    }
    fn name(&self) -> String {
        format!("Z^{}", self.d)
    }
}

/// Cayley graph of `F_d` itself (the Schreier graph of the trivial subgroup).
#[derive(Clone, Debug)]
pub struct Free {
    d: usize,
}

impl Free {
    pub fn new(d: usize) -> Free {
        Free { d }
    }
}

impl GraphOracle for Free {
    fn rank(&self) -> usize {
        self.d
    }
    fn root(&self) -> VertexAddr {
        VertexAddr::Word(ReducedWord::identity())
    }
    fn step(&self, v: &mut VertexAddr, x: Letter) -> Result<()> {
        check_letter(x, self.d)?;
        match v {
            VertexAddr::Word(w) => {
                w.push(x);
                Ok(())
            }
            _ => Err(malformed(&self.name(), v)),
        }
    }
    fn certified_rad(&self) -> usize {
        usize::MAX
    }
    fn root_distance(&self, v: &VertexAddr, limit: usize) -> Result<Option<usize>> {
        match v {
            VertexAddr::Word(w) => Ok(Some(w.len()).filter(|&k| k <= limit)),
            _ => Err(malformed(&self.name(), v)),
        }
    }
    fn fast_prefix(&self, v: &VertexAddr, r: usize) -> Option<ReducedWord> {
        match v {
            VertexAddr::Word(w) => Some(w.prefix(r)),
            _ => None,
        }
    }
    fn name(&self) -> String {
        format!("F_{}", self.d)
    }
}

/// `Λ` with its edge `e -> a_1` cut and both ends wired through an extra
/// vertex, mimicking a `Λ`-copy seen from inside a glued graph.
#[derive(Clone, Debug)]
pub struct SeamedLambda {
    d: usize,
    a: NilElement,
}

impl SeamedLambda {
    pub fn new(d: usize) -> SeamedLambda {
        SeamedLambda { d, a: NilElement::generator(d, Letter::gen(1)) }
    }
}

impl GraphOracle for SeamedLambda {
    fn rank(&self) -> usize {
        self.d
    }
    fn root(&self) -> VertexAddr {
        VertexAddr::Hub
    }
    fn step(&self, v: &mut VertexAddr, x: Letter) -> Result<()> {
        check_letter(x, self.d)?;
        let a = Letter::gen(1);
        match v {
            VertexAddr::Hub => {
                if x == a {
                    *v = VertexAddr::Nil(self.a.clone());
                } else if x == a.inverse() {
                    *v = VertexAddr::Nil(NilElement::identity(self.d));
                }
                Ok(())
            }
            VertexAddr::Nil(e) if e.rank() == self.d => {
                if (x == a && e.is_identity()) || (x == a.inverse() && *e == self.a) {
                    *v = VertexAddr::Hub;
                } else {
                    e.mul_letter(x);
                }
                Ok(())
            }
            _ => Err(malformed(&self.name(), v)),
        }
    }
    fn name(&self) -> String {
        format!("SeamedLambda(d={})", self.d)
    }
}

/// Product of Schreier graphs: the Schreier graph of the intersection of
/// the factors' subgroups, restricted to the orbit of the tuple of roots.
#[derive(Clone)]
pub struct Product {
    d: usize,
    factors: Vec<Arc<dyn GraphOracle>>,
}

impl Product {
    pub fn new(factors: Vec<Arc<dyn GraphOracle>>) -> Result<Product> {
        let d = factors.first().map(|f| f.rank()).ok_or_else(|| Error::Input("empty product".into()))?;
        if factors.iter().any(|f| f.rank() != d) {
            return Err(Error::Input("product factors disagree on rank".into()));
        }
        Ok(Product { d, factors })
    }

    pub fn factors(&self) -> &[Arc<dyn GraphOracle>] {
        &self.factors
    }
}

impl GraphOracle for Product {
    fn rank(&self) -> usize {
        self.d
    }
    fn root(&self) -> VertexAddr {
        VertexAddr::Tuple(self.factors.iter().map(|f| f.root()).collect())
    }
    fn step(&self, v: &mut VertexAddr, x: Letter) -> Result<()> {
        match v {
            VertexAddr::Tuple(parts) if parts.len() == self.factors.len() => {
                for (f, p) in self.factors.iter().zip(parts.iter_mut()) {
                    f.step(p, x)?;
                }
                Ok(())
            }
            _ => Err(malformed(&self.name(), v)),
        }
    }
    /// The ball of the intersection maps onto each factor's ball, so any
    /// factor with a tree ball certifies the product.
    fn certified_rad(&self) -> usize {
        self.factors.iter().map(|f| f.certified_rad()).max().unwrap_or(0)
    }
    fn fast_prefix(&self, v: &VertexAddr, r: usize) -> Option<ReducedWord> {
        let VertexAddr::Tuple(parts) = v else { return None };
        let (f, p) = self
            .factors
            .iter()
            .zip(parts)
            .filter(|(f, _)| f.certified_rad() >= r)
            .max_by_key(|(f, _)| f.certified_rad())?;
        f.fast_prefix(p, r)
    }
    fn name(&self) -> String {
        let names: Vec<String> = self.factors.iter().map(|f| f.name()).collect();
        format!("Product[{}]", names.join(" x "))
    }
}

/// Quotients whose Cayley graph is available as an oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quotient {
    Lambda,
    Zs(usize),
    Abelian,
}

pub fn cayley_oracle(quotient: Quotient, d: usize) -> Result<Arc<dyn GraphOracle>> {
    Ok(match quotient {
        Quotient::Lambda => Arc::new(Lambda::new(d)),
        Quotient::Zs(s) => Arc::new(Zs::new(d, s)?),
        Quotient::Abelian => Arc::new(Abelian::new(d)),
    })
}

pub fn zs_oracle(d: usize, s: usize) -> Result<Zs> {
    Zs::new(d, s)
}

/// Glued graph of depth `n`.
pub fn build_glued(n: usize, d: usize) -> Result<Glued> {
    Glued::new(n, d)
}

/// The intersection `∩_{j ≤ m} K'_j` of glued subgroups of depths `1..=m`.
pub fn glued_intersection(m: usize, d: usize) -> Result<Product> {
    let mut factors: Vec<Arc<dyn GraphOracle>> = Vec::new();
    for j in 1..=m {
        factors.push(Arc::new(Glued::new(j, d)?));
    }
    Product::new(factors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nilquot::{nil_project, pi_s};
    use proptest::prelude::*;

    fn w(s: &str) -> ReducedWord {
        ReducedWord::parse(s, 2).unwrap()
    }

    #[test]
    fn zs_examples() {
        let za = Zs::new(2, 1).unwrap();
        assert_eq!(act(&za, &za.root(), &w("a")).unwrap(), VertexAddr::Line(1));
        assert_eq!(act(&za, &za.root(), &w("b")).unwrap(), VertexAddr::Line(0));
        assert_eq!(act(&za, &za.root(), &w("aaabA")).unwrap(), VertexAddr::Line(2));
        let zb = Zs::new(2, 2).unwrap();
        for k in -5..=5 {
            assert_eq!(act(&zb, &zb.root(), &w("a").pow(k)).unwrap(), VertexAddr::Line(0));
        }
        assert!(Zs::new(2, 3).is_err());
    }

    #[test]
    fn malformed_address_is_input_error() {
        let za = Zs::new(2, 1).unwrap();
        let bad = VertexAddr::Tree(w("a"));
        assert!(matches!(act(&za, &bad, &w("a")), Err(Error::Input(_))));
        let mut v = za.root();
        assert!(za.step(&mut v, Letter::gen(3)).is_err());
    }

    #[test]
    fn lambda_commutator_moves_identity() {
        let l = Lambda::new(2);
        let v = act(&l, &l.root(), &w("a b A B")).unwrap();
        assert_ne!(v, l.root());
        assert_eq!(v, VertexAddr::Nil(nil_project(&w("a b A B"), 2)));
    }

    #[test]
    fn seamed_lambda_is_lambda_away_from_hub() {
        let s = SeamedLambda::new(2);
        let e = VertexAddr::Nil(NilElement::identity(2));
        assert_eq!(act(&s, &e, &w("a")).unwrap(), VertexAddr::Hub);
        assert_eq!(act(&s, &e, &w("A a")).unwrap(), e);
        assert_eq!(act(&s, &VertexAddr::Hub, &w("a A")).unwrap(), VertexAddr::Hub);
        assert_eq!(act(&s, &VertexAddr::Hub, &w("b")).unwrap(), VertexAddr::Hub);
        assert_eq!(act(&s, &e, &w("b a")).unwrap(), VertexAddr::Nil(nil_project(&w("b a"), 2)));
    }

    #[test]
    fn product_is_componentwise() {
        let p = Product::new(vec![Arc::new(Zs::new(2, 1).unwrap()), Arc::new(Zs::new(2, 2).unwrap())]).unwrap();
        let v = act(&p, &p.root(), &w("a a b A")).unwrap();
        assert_eq!(v, VertexAddr::Tuple(vec![VertexAddr::Line(1), VertexAddr::Line(1)]));
        assert_eq!(p.certified_rad(), 0);
        let k = glued_intersection(3, 2).unwrap();
        assert_eq!(k.certified_rad(), 3);
    }

    #[test]
    fn bfs_distance_on_lambda() {
        let l = Lambda::new(2);
        let c = VertexAddr::Nil(nil_project(&w("a b A B"), 2));
        assert_eq!(bfs_distance(&l, &l.root(), &c, 6).unwrap(), Some(4));
        assert_eq!(bfs_distance(&l, &l.root(), &c, 3).unwrap(), None);
    }

    fn arb_word(d: usize, max: usize) -> impl Strategy<Value = ReducedWord> {
        prop::collection::vec((1..=d as i64, any::<bool>()), 0..max).prop_map(move |v| {
            ReducedWord::from_indices(&v.iter().map(|&(i, s)| if s { i } else { -i }).collect::<Vec<_>>(), d).unwrap()
        })
    }

    proptest! {
        #[test]
        fn zs_position_is_pi(g in arb_word(3, 40), s in 1usize..=3) {
            let z = Zs::new(3, s).unwrap();
            prop_assert_eq!(act(&z, &z.root(), &g).unwrap(), VertexAddr::Line(pi_s(&g, s).0));
        }

        #[test]
        fn action_law_on_every_family(g in arb_word(2, 25), h in arb_word(2, 25), v0 in arb_word(2, 12)) {
            let oracles: Vec<Arc<dyn GraphOracle>> = vec![
                Arc::new(Zs::new(2, 1).unwrap()),
                Arc::new(Lambda::new(2)),
                Arc::new(Abelian::new(2)),
                Arc::new(Free::new(2)),
                Arc::new(SeamedLambda::new(2)),
                Arc::new(Glued::new(3, 2).unwrap()),
                Arc::new(glued_intersection(3, 2).unwrap()),
            ];
            for o in &oracles {
                let v = act(o, &o.root(), &v0).unwrap();
                let gh = g.mul(&h);
                prop_assert_eq!(act(o, &v, &gh).unwrap(), act(o, &act(o, &v, &g).unwrap(), &h).unwrap());
                let mut u = v.clone();
                act_in_place(o, &mut u, &g).unwrap();
                act_in_place(o, &mut u, &g.inverse()).unwrap();
                prop_assert_eq!(u, v);
            }
        }
    }
}
