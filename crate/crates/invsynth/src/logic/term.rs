use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::sort::{Name, Sort};

/// Exact rational numeral.
pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn q_frac(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Hash-consed, immutable, sorted term. Equality is pointer equality, which
/// coincides with structural equality because every node is interned.
#[derive(Clone)]
pub struct Term(Arc<Node>);

struct Node {
    kind: TermKind,
    sort: Sort,
    hash: u64,
}

#[derive(Clone, Debug)]
pub enum TermKind {
    Var(Name),
    /// Function application; constants are nullary applications.
    App(Name, Vec<Term>),
    Num(Q),
    /// Canonical linear sum `c1*t1 + ... + cn*tn + k`: atoms are variables or
    /// applications, strictly increasing, coefficients nonzero, and the sum is
    /// not collapsible to a numeral or a single atom.
    Lin(Vec<(Q, Term)>, Q),
}

const SHARDS: usize = 32;

struct Shallow(Term);

impl PartialEq for Shallow {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = (&*self.0 .0, &*other.0 .0);
        a.hash == b.hash && a.sort == b.sort && shallow_eq(&a.kind, &b.kind)
    }
}
impl Eq for Shallow {}
impl Hash for Shallow {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0 .0.hash);
    }
}

fn shallow_eq(a: &TermKind, b: &TermKind) -> bool {
    match (a, b) {
        (TermKind::Var(x), TermKind::Var(y)) => x == y,
        (TermKind::App(f, xs), TermKind::App(g, ys)) => {
            f == g && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| x.ptr_eq(y))
        }
        (TermKind::Num(x), TermKind::Num(y)) => x == y,
        (TermKind::Lin(xs, c), TermKind::Lin(ys, d)) => {
            c == d && xs.len() == ys.len() && xs.iter().zip(ys).all(|((p, x), (r, y))| p == r && x.ptr_eq(y))
        }
        _ => false,
    }
}

fn table() -> &'static [Mutex<HashSet<Shallow>>] {
    static TABLE: OnceLock<Vec<Mutex<HashSet<Shallow>>>> = OnceLock::new();
    TABLE.get_or_init(|| (0..SHARDS).map(|_| Mutex::new(HashSet::new())).collect())
}

fn node_hash(kind: &TermKind, sort: &Sort) -> u64 {
    let mut h = DefaultHasher::new();
    sort.hash(&mut h);
    match kind {
        TermKind::Var(x) => {
            0u8.hash(&mut h);
            x.hash(&mut h);
        }
        TermKind::App(f, args) => {
            1u8.hash(&mut h);
            f.hash(&mut h);
            for a in args {
                h.write_u64(a.0.hash);
            }
        }
        TermKind::Num(n) => {
            2u8.hash(&mut h);
            n.hash(&mut h);
        }
        TermKind::Lin(xs, c) => {
            3u8.hash(&mut h);
            for (k, t) in xs {
                k.hash(&mut h);
                h.write_u64(t.0.hash);
            }
            c.hash(&mut h);
        }
    }
    h.finish()
}

fn intern(kind: TermKind, sort: Sort) -> Term {
    let hash = node_hash(&kind, &sort);
    let fresh = Term(Arc::new(Node { kind, sort, hash }));
    let mut shard = table()[(hash as usize) % SHARDS].lock().unwrap_or_else(|e| e.into_inner());
    let key = Shallow(fresh);
    if let Some(existing) = shard.get(&key) {
        return existing.0.clone();
    }
    let out = key.0.clone();
    shard.insert(key);
    out
}

impl Term {
    pub fn var(name: Name, sort: Sort) -> Term {
        intern(TermKind::Var(name), sort)
    }

    pub fn app(name: Name, args: Vec<Term>, sort: Sort) -> Term {
        intern(TermKind::App(name, args), sort)
    }

    pub fn constant(name: Name, sort: Sort) -> Term {
        Term::app(name, Vec::new(), sort)
    }

    pub fn num(value: Q, sort: Sort) -> Term {
        intern(TermKind::Num(value), sort)
    }

    pub fn int(value: i64, sort: Sort) -> Term {
        Term::num(q(value), sort)
    }

    /// Builds the canonical form of `sum(coef * term) + constant`.
    pub fn linear<I>(summands: I, constant: Q, sort: Sort) -> Term
    where
        I: IntoIterator<Item = (Q, Term)>,
    {
        let mut acc: BTreeMap<Term, Q> = BTreeMap::new();
        let mut k = constant;
        for (c, t) in summands {
            if c.is_zero() {
                continue;
            }
            match t.kind() {
                TermKind::Num(n) => k += &c * n,
                TermKind::Lin(xs, d) => {
                    k += &c * d;
                    for (e, u) in xs {
                        *acc.entry(u.clone()).or_insert_with(Q::zero) += &c * e;
                    }
                }
                _ => *acc.entry(t).or_insert_with(Q::zero) += c,
            }
        }
        let xs: Vec<(Q, Term)> = acc.into_iter().filter(|(_, c)| !c.is_zero()).map(|(t, c)| (c, t)).collect();
        if xs.is_empty() {
            return Term::num(k, sort);
        }
        if xs.len() == 1 && k.is_zero() && xs[0].0.is_one() {
            return xs.into_iter().next().map(|(_, t)| t).unwrap_or_else(|| unreachable!());
        }
        intern(TermKind::Lin(xs, k), sort)
    }

    pub fn add(&self, other: &Term) -> Term {
        Term::linear([(Q::one(), self.clone()), (Q::one(), other.clone())], Q::zero(), self.sort().clone())
    }

    pub fn sub(&self, other: &Term) -> Term {
        Term::linear([(Q::one(), self.clone()), (-Q::one(), other.clone())], Q::zero(), self.sort().clone())
    }

    pub fn neg(&self) -> Term {
        self.scale(&-Q::one())
    }

    pub fn scale(&self, c: &Q) -> Term {
        Term::linear([(c.clone(), self.clone())], Q::zero(), self.sort().clone())
    }

    pub fn add_const(&self, c: &Q) -> Term {
        Term::linear([(Q::one(), self.clone())], c.clone(), self.sort().clone())
    }

    pub fn kind(&self) -> &TermKind {
        &self.0.kind
    }

    pub fn sort(&self) -> &Sort {
        &self.0.sort
    }

    pub fn ptr_eq(&self, other: &Term) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    pub fn as_num(&self) -> Option<&Q> {
        match self.kind() {
            TermKind::Num(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<&Name> {
        match self.kind() {
            TermKind::Var(x) => Some(x),
            _ => None,
        }
    }

    pub fn head(&self) -> Option<&Name> {
        match self.kind() {
            TermKind::App(f, _) => Some(f),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self.kind() {
            TermKind::App(_, args) => args,
            _ => &[],
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind(), TermKind::App(_, a) if a.is_empty())
    }

    /// Splits into linear summands and a numeric constant.
    pub fn linear_parts(&self) -> (Vec<(Q, Term)>, Q) {
        match self.kind() {
            TermKind::Num(n) => (Vec::new(), n.clone()),
            TermKind::Lin(xs, k) => (xs.clone(), k.clone()),
            _ => (vec![(Q::one(), self.clone())], Q::zero()),
        }
    }

    /// Immediate subterms: application arguments or linear-sum atoms.
    pub fn children(&self) -> Vec<Term> {
        match self.kind() {
            TermKind::App(_, args) => args.clone(),
            TermKind::Lin(xs, _) => xs.iter().map(|(_, t)| t.clone()).collect(),
            _ => Vec::new(),
        }
    }

    pub fn is_ground(&self) -> bool {
        match self.kind() {
            TermKind::Var(_) => false,
            TermKind::Num(_) => true,
            TermKind::App(_, args) => args.iter().all(Term::is_ground),
            TermKind::Lin(xs, _) => xs.iter().all(|(_, t)| t.is_ground()),
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeMap<Name, Sort>) {
        match self.kind() {
            TermKind::Var(x) => {
                out.insert(x.clone(), self.sort().clone());
            }
            TermKind::Num(_) => {}
            _ => {
                for c in self.children() {
                    c.collect_vars(out);
                }
            }
        }
    }

    /// All subterms including `self`, each visited once.
    pub fn collect_subterms(&self, out: &mut BTreeSet<Term>) {
        if out.contains(self) {
            return;
        }
        for c in self.children() {
            c.collect_subterms(out);
        }
        out.insert(self.clone());
    }

    /// Function symbols occurring in the term (constants included).
    pub fn collect_symbols(&self, out: &mut BTreeSet<Name>) {
        if let TermKind::App(f, _) = self.kind() {
            out.insert(f.clone());
        }
        for c in self.children() {
            c.collect_symbols(out);
        }
    }

    /// Maximum nesting depth of applications of symbols satisfying `pred`.
    pub fn app_depth(&self, pred: &dyn Fn(&str) -> bool) -> usize {
        let inner = self.children().iter().map(|c| c.app_depth(pred)).max().unwrap_or(0);
        match self.kind() {
            TermKind::App(f, args) if !args.is_empty() && pred(f) => inner + 1,
            _ => inner,
        }
    }

    /// Bottom-up rewriting; `f` sees each node after its children were rewritten
    /// and returns `None` to keep the rebuilt node.
    pub fn rewrite(&self, f: &mut dyn FnMut(&Term) -> Option<Term>) -> Term {
        let rebuilt = match self.kind() {
            TermKind::Var(_) | TermKind::Num(_) => self.clone(),
            TermKind::App(g, args) => {
                let new: Vec<Term> = args.iter().map(|a| a.rewrite(f)).collect();
                if new.iter().zip(args).all(|(x, y)| x.ptr_eq(y)) {
                    self.clone()
                } else {
                    Term::app(g.clone(), new, self.sort().clone())
                }
            }
            TermKind::Lin(xs, k) => {
                let new: Vec<(Q, Term)> = xs.iter().map(|(c, t)| (c.clone(), t.rewrite(f))).collect();
                if new.iter().zip(xs).all(|((_, x), (_, y))| x.ptr_eq(y)) {
                    self.clone()
                } else {
                    Term::linear(new, k.clone(), self.sort().clone())
                }
            }
        };
        f(&rebuilt).unwrap_or(rebuilt)
    }

    /// Replaces variables by name.
    pub fn subst(&self, map: &BTreeMap<Name, Term>) -> Term {
        if map.is_empty() {
            return self.clone();
        }
        self.rewrite(&mut |t| t.as_var().and_then(|x| map.get(x).cloned()))
    }

    /// Replaces whole subterms (matched structurally).
    pub fn replace(&self, map: &BTreeMap<Term, Term>) -> Term {
        if map.is_empty() {
            return self.clone();
        }
        if let Some(r) = map.get(self) {
            return r.clone();
        }
        self.rewrite(&mut |t| map.get(t).cloned())
    }

    /// Renames function symbols (used by priming).
    pub fn rename_symbols(&self, map: &BTreeMap<Name, Name>) -> Term {
        if map.is_empty() {
            return self.clone();
        }
        self.rewrite(&mut |t| match t.kind() {
            TermKind::App(f, args) => map.get(f).map(|g| Term::app(g.clone(), args.clone(), t.sort().clone())),
            _ => None,
        })
    }

    fn rank(&self) -> u8 {
        match self.kind() {
            TermKind::Num(_) => 0,
            TermKind::Var(_) => 1,
            TermKind::App(..) => 2,
            TermKind::Lin(..) => 3,
        }
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        self.ptr_eq(other)
    }
}
impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.ptr_eq(other) {
            return Ordering::Equal;
        }
        let r = self.rank().cmp(&other.rank());
        if r != Ordering::Equal {
            return r;
        }
        let by_kind = match (self.kind(), other.kind()) {
            (TermKind::Num(a), TermKind::Num(b)) => a.cmp(b),
            (TermKind::Var(a), TermKind::Var(b)) => a.cmp(b),
            (TermKind::App(f, xs), TermKind::App(g, ys)) => f.cmp(g).then_with(|| xs.cmp(ys)),
            (TermKind::Lin(xs, c), TermKind::Lin(ys, d)) => {
                let l = xs.len().cmp(&ys.len());
                l.then_with(|| {
                    for ((p, x), (r, y)) in xs.iter().zip(ys) {
                        let o = x.cmp(y).then_with(|| p.cmp(r));
                        if o != Ordering::Equal {
                            return o;
                        }
                    }
                    c.cmp(d)
                })
            }
            _ => Ordering::Equal,
        };
        by_kind.then_with(|| self.sort().cmp(other.sort()))
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Writes a numeral so that the problem-file parser reads it back unchanged.
pub fn fmt_q(f: &mut fmt::Formatter<'_>, n: &Q) -> fmt::Result {
    if n.is_integer() {
        write!(f, "{}", n.numer())
    } else {
        write!(f, "{}/{}", n.numer(), n.denom())
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            TermKind::Var(x) => f.write_str(x),
            TermKind::Num(n) => fmt_q(f, n),
            TermKind::App(g, args) => {
                f.write_str(g)?;
                if !args.is_empty() {
                    f.write_str("(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            f.write_str(", ")?;
                        }
                        write!(f, "{}", a)?;
                    }
                    f.write_str(")")?;
                }
                Ok(())
            }
            TermKind::Lin(xs, k) => {
                for (i, (c, t)) in xs.iter().enumerate() {
                    let mag = c.abs();
                    if i == 0 {
                        if c.is_negative() {
                            f.write_str("-")?;
                        }
                    } else if c.is_negative() {
                        f.write_str(" - ")?;
                    } else {
                        f.write_str(" + ")?;
                    }
                    if !mag.is_one() {
                        fmt_q(f, &mag)?;
                        f.write_str("*")?;
                    }
                    write!(f, "{}", t)?;
                }
                if k.is_negative() {
                    f.write_str(" - ")?;
                    fmt_q(f, &k.abs())?;
                } else if !k.is_zero() {
                    f.write_str(" + ")?;
                    fmt_q(f, k)?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::sort::name;

    fn int() -> Sort {
        Sort::int()
    }

    #[test]
    fn linear_sums_are_canonical() {
        let i = Term::var(name("i"), int());
        let one = Term::int(1, int());
        let a = |t: Term| Term::app(name("a"), vec![t], int());
        assert_eq!(a(i.add(&one)), a(one.add(&i)));
        assert_eq!(i.add(&one).sub(&one), i);
        assert_eq!(i.sub(&i), Term::int(0, int()));
        assert_eq!(format!("{}", a(i.add(&one))), "a(i + 1)");
    }

    #[test]
    fn display_coefficients() {
        let r = Sort::real();
        let d = Term::constant(name("d3"), r.clone());
        let t = Term::linear([(q_frac(1, 2), d.clone())], q(-3), r);
        assert_eq!(t.to_string(), "1/2*d3 - 3");
        assert_eq!(d.neg().to_string(), "-d3");
    }

    #[test]
    fn hash_consing_shares_nodes() {
        let x = Term::constant(name("x"), int());
        let y = Term::constant(name("x"), int());
        assert!(x.ptr_eq(&y));
    }
}
