use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use super::sort::{Name, Role, Signature, Sort, SortKind};
use super::term::{Term, TermKind, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Eq,
    Le,
    Lt,
    Ge,
    Gt,
}

impl Rel {
    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Eq => "=",
            Rel::Le => "<=",
            Rel::Lt => "<",
            Rel::Ge => ">=",
            Rel::Gt => ">",
        }
    }

    /// Relation obtained by swapping the two sides.
    pub fn flip(self) -> Rel {
        match self {
            Rel::Eq => Rel::Eq,
            Rel::Le => Rel::Ge,
            Rel::Lt => Rel::Gt,
            Rel::Ge => Rel::Le,
            Rel::Gt => Rel::Lt,
        }
    }

    /// Complement of an ordering relation; `None` for equality.
    pub fn complement(self) -> Option<Rel> {
        match self {
            Rel::Eq => None,
            Rel::Le => Some(Rel::Gt),
            Rel::Lt => Some(Rel::Ge),
            Rel::Ge => Some(Rel::Lt),
            Rel::Gt => Some(Rel::Le),
        }
    }

    pub fn holds(self, o: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            Rel::Eq => o == Equal,
            Rel::Le => o != Greater,
            Rel::Lt => o == Less,
            Rel::Ge => o != Less,
            Rel::Gt => o == Greater,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    Cmp(Rel, Term, Term),
    Pred(Name, Vec<Term>),
    /// `k | t` over the integers, produced by integer quantifier elimination.
    Dvd(BigInt, Term),
}

impl Atom {
    pub fn terms(&self) -> Vec<&Term> {
        match self {
            Atom::Cmp(_, a, b) => vec![a, b],
            Atom::Pred(_, args) => args.iter().collect(),
            Atom::Dvd(_, t) => vec![t],
        }
    }

    pub fn map_terms(&self, f: &mut dyn FnMut(&Term) -> Term) -> Atom {
        match self {
            Atom::Cmp(r, a, b) => Atom::Cmp(*r, f(a), f(b)),
            Atom::Pred(p, args) => Atom::Pred(p.clone(), args.iter().map(|t| f(t)).collect()),
            Atom::Dvd(k, t) => Atom::Dvd(k.clone(), f(t)),
        }
    }
}

/// Atom with polarity. Ordering comparisons are always stored positively:
/// negating `s <= t` yields `s > t`, so only equalities and predicate atoms
/// appear negated.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub atom: Atom,
    pub positive: bool,
}

impl Literal {
    pub fn new(atom: Atom, positive: bool) -> Literal {
        match (&atom, positive) {
            (Atom::Cmp(r, a, b), false) => match r.complement() {
                Some(c) => Literal { atom: Atom::Cmp(c, a.clone(), b.clone()), positive: true },
                None => Literal { atom, positive: false },
            },
            _ => Literal { atom, positive },
        }
    }

    pub fn cmp(rel: Rel, a: Term, b: Term) -> Literal {
        Literal::new(Atom::Cmp(rel, a, b), true)
    }

    pub fn eq(a: Term, b: Term) -> Literal {
        Literal::cmp(Rel::Eq, a, b)
    }

    pub fn neq(a: Term, b: Term) -> Literal {
        Literal::new(Atom::Cmp(Rel::Eq, a, b), false)
    }

    pub fn negate(&self) -> Literal {
        Literal::new(self.atom.clone(), !self.positive)
    }

    pub fn map_terms(&self, f: &mut dyn FnMut(&Term) -> Term) -> Literal {
        Literal::new(self.atom.map_terms(f), self.positive)
    }

    pub fn subst(&self, map: &BTreeMap<Name, Term>) -> Literal {
        self.map_terms(&mut |t| t.subst(map))
    }

    pub fn replace(&self, map: &BTreeMap<Term, Term>) -> Literal {
        self.map_terms(&mut |t| t.replace(map))
    }

    pub fn rename_symbols(&self, map: &BTreeMap<Name, Name>) -> Literal {
        self.map_terms(&mut |t| t.rename_symbols(map))
    }

    pub fn terms(&self) -> Vec<&Term> {
        self.atom.terms()
    }

    pub fn is_ground(&self) -> bool {
        self.terms().iter().all(|t| t.is_ground())
    }

    pub fn collect_vars(&self, out: &mut BTreeMap<Name, Sort>) {
        for t in self.terms() {
            t.collect_vars(out);
        }
    }

    pub fn collect_symbols(&self, out: &mut BTreeSet<Name>) {
        for t in self.terms() {
            t.collect_symbols(out);
        }
        if let Atom::Pred(p, _) = &self.atom {
            out.insert(p.clone());
        }
    }

    pub fn collect_subterms(&self, out: &mut BTreeSet<Term>) {
        for t in self.terms() {
            t.collect_subterms(out);
        }
    }

    /// Arithmetic normal form `e REL k`, with `e` a canonical linear term whose
    /// first coefficient is 1, or `None` when not an arithmetic comparison.
    /// Negative equalities are reported through the polarity flag.
    pub fn linear_form(&self) -> Option<(Term, Rel, Q, bool)> {
        let Atom::Cmp(rel, a, b) = &self.atom else { return None };
        if !a.sort().is_arith() {
            return None;
        }
        let diff = a.sub(b);
        let (xs, k) = diff.linear_parts();
        let mut rhs = -k;
        let mut rel = *rel;
        if xs.is_empty() {
            return Some((Term::num(Q::zero(), a.sort().clone()), rel, rhs, self.positive));
        }
        let lead = xs[0].0.clone();
        if lead.is_negative() {
            rel = rel.flip();
        }
        let inv = Q::one() / &lead;
        rhs *= &inv;
        let e = Term::linear(xs.into_iter().map(|(c, t)| (c * &inv, t)), Q::zero(), a.sort().clone());
        Some((e, rel, rhs, self.positive))
    }

    /// Truth value when decidable without interpretation of symbols.
    pub fn eval_trivial(&self) -> Option<bool> {
        match &self.atom {
            Atom::Cmp(rel, a, b) => {
                let v = if a == b {
                    Some(rel.holds(std::cmp::Ordering::Equal))
                } else if a.sort().is_arith() {
                    let d = a.sub(b);
                    d.as_num().map(|n| rel.holds(n.cmp(&Q::zero())))
                } else {
                    None
                };
                v.map(|x| x == self.positive)
            }
            Atom::Pred(..) => None,
            Atom::Dvd(k, t) => t.as_num().map(|n| (n.is_integer() && (n.numer() % k).is_zero()) == self.positive),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.atom {
            Atom::Cmp(Rel::Eq, a, b) if !self.positive => write!(f, "{} != {}", a, b),
            Atom::Cmp(r, a, b) => write!(f, "{} {} {}", a, r.symbol(), b),
            Atom::Dvd(k, t) => write!(f, "{}dvd({}, {})", if self.positive { "" } else { "!" }, k, t),
            Atom::Pred(p, args) => {
                if !self.positive {
                    f.write_str("!")?;
                }
                f.write_str(p)?;
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
        }
    }
}

/// Universally closed disjunction of literals.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Clause {
    pub lits: Vec<Literal>,
    pub vars: Vec<(Name, Sort)>,
}

impl Clause {
    /// Builds a clause whose quantifier prefix is exactly its free variables.
    pub fn new(lits: Vec<Literal>) -> Clause {
        let mut vars = BTreeMap::new();
        for l in &lits {
            l.collect_vars(&mut vars);
        }
        Clause { lits, vars: vars.into_iter().collect() }
    }

    pub fn is_ground(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn instantiate(&self, map: &BTreeMap<Name, Term>) -> Clause {
        Clause::new(self.lits.iter().map(|l| l.subst(map)).collect())
    }

    pub fn map_lits(&self, f: &mut dyn FnMut(&Literal) -> Literal) -> Clause {
        Clause::new(self.lits.iter().map(|l| f(l)).collect())
    }

    pub fn collect_symbols(&self, out: &mut BTreeSet<Name>) {
        for l in &self.lits {
            l.collect_symbols(out);
        }
    }

    /// Removes trivially false literals and duplicates; `None` when trivially true.
    pub fn simplify(&self) -> Option<Clause> {
        let mut lits: Vec<Literal> = Vec::new();
        for l in &self.lits {
            match l.eval_trivial() {
                Some(true) => return None,
                Some(false) => continue,
                None => {}
            }
            if lits.contains(&l.negate()) {
                return None;
            }
            if !lits.contains(l) {
                lits.push(l.clone());
            }
        }
        Some(Clause::new(lits))
    }

    /// Extension, parameter and primed symbols are applied only to variables,
    /// constants or numerals.
    pub fn is_flat(&self, sig: &Signature) -> bool {
        let mut subs = BTreeSet::new();
        for l in &self.lits {
            l.collect_subterms(&mut subs);
        }
        subs.iter().all(|t| match t.kind() {
            TermKind::App(f, args) if !args.is_empty() && !matches!(sig.role(f), Some(Role::Base) | None) => {
                args.iter().all(|a| matches!(a.kind(), TermKind::Var(_) | TermKind::Num(_)) || a.is_constant())
            }
            _ => true,
        })
    }

    /// No variable is shared between two extension-symbol applications or
    /// repeated inside one.
    pub fn is_linear(&self, sig: &Signature) -> bool {
        let mut subs = BTreeSet::new();
        for l in &self.lits {
            l.collect_subterms(&mut subs);
        }
        let mut seen: BTreeSet<Name> = BTreeSet::new();
        for t in &subs {
            if let TermKind::App(f, args) = t.kind() {
                if args.is_empty() || matches!(sig.role(f), Some(Role::Base) | None) {
                    continue;
                }
                let mut vars = BTreeMap::new();
                let mut count = 0;
                for a in args {
                    if let Some(x) = a.as_var() {
                        count += 1;
                        vars.insert(x.clone(), a.sort().clone());
                    }
                }
                if vars.len() != count {
                    return false;
                }
                for x in vars.keys() {
                    if !seen.insert(x.clone()) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.vars.is_empty() {
            f.write_str("forall ")?;
            for (i, (x, s)) in self.vars.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{}:{}", x, s)?;
            }
            f.write_str(" . ")?;
        }
        if self.lits.is_empty() {
            return f.write_str("false");
        }
        for (i, l) in self.lits.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "{}", l)?;
        }
        Ok(())
    }
}

/// Conjunction of universally closed clauses.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct ClauseSet {
    pub clauses: Vec<Clause>,
}

impl ClauseSet {
    pub fn new(clauses: Vec<Clause>) -> ClauseSet {
        ClauseSet { clauses }
    }

    pub fn empty() -> ClauseSet {
        ClauseSet::default()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    /// Maximal number of variables in one clause.
    pub fn max_vars(&self) -> usize {
        self.clauses.iter().map(Clause::num_vars).max().unwrap_or(0)
    }

    pub fn max_len(&self) -> usize {
        self.clauses.iter().map(|c| c.lits.len()).max().unwrap_or(0)
    }

    pub fn conjoin(&self, other: &ClauseSet) -> ClauseSet {
        let mut clauses = self.clauses.clone();
        clauses.extend(other.clauses.iter().cloned());
        ClauseSet { clauses }
    }

    pub fn symbols(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        for c in &self.clauses {
            c.collect_symbols(&mut out);
        }
        out
    }

    pub fn is_flat(&self, sig: &Signature) -> bool {
        self.clauses.iter().all(|c| c.is_flat(sig))
    }

    pub fn is_linear(&self, sig: &Signature) -> bool {
        self.clauses.iter().all(|c| c.is_linear(sig))
    }
}

impl fmt::Display for ClauseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.clauses.is_empty() {
            return f.write_str("true");
        }
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{}", c)?;
        }
        Ok(())
    }
}

/// Origin of a Skolem constant: which clause and which variable it replaced.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SkolemOrigin {
    pub constant: Name,
    pub sort: Sort,
    pub clause: usize,
    pub var: Name,
}

/// Ground conjunction of literals with the Skolem constants it introduced.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct GroundConj {
    pub lits: Vec<Literal>,
    pub skolems: Vec<SkolemOrigin>,
}

impl GroundConj {
    pub fn new(lits: Vec<Literal>) -> GroundConj {
        GroundConj { lits, skolems: Vec::new() }
    }

    pub fn conjoin(&self, other: &GroundConj) -> GroundConj {
        let mut lits = self.lits.clone();
        for l in &other.lits {
            if !lits.contains(l) {
                lits.push(l.clone());
            }
        }
        let mut skolems = self.skolems.clone();
        skolems.extend(other.skolems.iter().cloned());
        GroundConj { lits, skolems }
    }

    pub fn symbols(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        for l in &self.lits {
            l.collect_symbols(&mut out);
        }
        out
    }
}

impl fmt::Display for GroundConj {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lits.is_empty() {
            return f.write_str("true");
        }
        for (i, l) in self.lits.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{}", l)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NormalFormError {
    #[error("normal form exceeds {cap} conjuncts/disjuncts at {site}")]
    Blowup { cap: usize, site: String },
}

/// Quantifier-free Boolean combination of literals.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Lit(Literal),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
}

pub type Dnf = Vec<Vec<Literal>>;

impl Formula {
    pub fn and(fs: Vec<Formula>) -> Formula {
        let mut out = Vec::new();
        for f in fs {
            match f {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap_or(Formula::True),
            _ => Formula::And(out),
        }
    }

    pub fn or(fs: Vec<Formula>) -> Formula {
        let mut out = Vec::new();
        for f in fs {
            match f {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap_or(Formula::False),
            _ => Formula::Or(out),
        }
    }

    pub fn not(f: Formula) -> Formula {
        match f {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Lit(l) => Formula::Lit(l.negate()),
            Formula::Not(inner) => *inner,
            other => Formula::Not(Box::new(other)),
        }
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::or(vec![Formula::not(a), b])
    }

    pub fn from_dnf(d: &Dnf) -> Formula {
        Formula::or(d.iter().map(|c| Formula::and(c.iter().cloned().map(Formula::Lit).collect())).collect())
    }

    pub fn from_cnf(c: &Dnf) -> Formula {
        Formula::and(c.iter().map(|d| Formula::or(d.iter().cloned().map(Formula::Lit).collect())).collect())
    }

    pub fn nnf(&self) -> Formula {
        self.nnf_pol(true)
    }

    fn nnf_pol(&self, pos: bool) -> Formula {
        match self {
            Formula::True => {
                if pos {
                    Formula::True
                } else {
                    Formula::False
                }
            }
            Formula::False => {
                if pos {
                    Formula::False
                } else {
                    Formula::True
                }
            }
            Formula::Lit(l) => Formula::Lit(if pos { l.clone() } else { l.negate() }),
            Formula::Not(f) => f.nnf_pol(!pos),
            Formula::And(fs) => {
                let inner = fs.iter().map(|f| f.nnf_pol(pos)).collect();
                if pos {
                    Formula::and(inner)
                } else {
                    Formula::or(inner)
                }
            }
            Formula::Or(fs) => {
                let inner = fs.iter().map(|f| f.nnf_pol(pos)).collect();
                if pos {
                    Formula::or(inner)
                } else {
                    Formula::and(inner)
                }
            }
        }
    }

    /// Disjunctive normal form with trivially inconsistent disjuncts pruned.
    pub fn to_dnf(&self, cap: usize) -> Result<Dnf, NormalFormError> {
        let mut out = dnf_of(&self.nnf(), cap)?;
        out.retain(|c| !conj_trivially_unsat(c));
        Ok(out)
    }

    /// Conjunctive normal form with tautological clauses removed.
    pub fn to_cnf(&self, cap: usize) -> Result<Dnf, NormalFormError> {
        let neg = Formula::not(self.clone()).nnf();
        let d = dnf_of(&neg, cap)?;
        let mut out = Vec::new();
        for conj in d {
            let clause: Vec<Literal> = conj.iter().map(Literal::negate).collect();
            if let Some(c) = Clause::new(clause).simplify() {
                if !out.contains(&c.lits) {
                    out.push(c.lits);
                }
            }
        }
        Ok(out)
    }

    pub fn map_lits(&self, f: &mut dyn FnMut(&Literal) -> Formula) -> Formula {
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Lit(l) => f(l),
            Formula::Not(g) => Formula::not(g.map_lits(f)),
            Formula::And(fs) => Formula::and(fs.iter().map(|g| g.map_lits(f)).collect()),
            Formula::Or(fs) => Formula::or(fs.iter().map(|g| g.map_lits(f)).collect()),
        }
    }

    pub fn literals(&self) -> Vec<&Literal> {
        let mut out = Vec::new();
        self.walk_lits(&mut |l| out.push(l));
        out
    }

    fn walk_lits<'a>(&'a self, f: &mut dyn FnMut(&'a Literal)) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Lit(l) => f(l),
            Formula::Not(g) => g.walk_lits(f),
            Formula::And(fs) | Formula::Or(fs) => {
                for g in fs {
                    g.walk_lits(f);
                }
            }
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Lit(_) => 1,
            Formula::Not(g) => 1 + g.size(),
            Formula::And(fs) | Formula::Or(fs) => 1 + fs.iter().map(Formula::size).sum::<usize>(),
        }
    }

    pub fn eval(&self, lit: &mut dyn FnMut(&Literal) -> bool) -> bool {
        match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Lit(l) => lit(l),
            Formula::Not(g) => !g.eval(lit),
            Formula::And(fs) => fs.iter().all(|g| g.eval(lit)),
            Formula::Or(fs) => fs.iter().any(|g| g.eval(lit)),
        }
    }
}

fn dnf_of(f: &Formula, cap: usize) -> Result<Dnf, NormalFormError> {
    match f {
        Formula::True => Ok(vec![Vec::new()]),
        Formula::False => Ok(Vec::new()),
        Formula::Lit(l) => Ok(vec![vec![l.clone()]]),
        Formula::Not(_) => dnf_of(&f.nnf(), cap),
        Formula::Or(fs) => {
            let mut out = Vec::new();
            for g in fs {
                out.extend(dnf_of(g, cap)?);
                if out.len() > cap {
                    return Err(NormalFormError::Blowup { cap, site: "disjunction".into() });
                }
            }
            Ok(out)
        }
        Formula::And(fs) => {
            let mut acc: Dnf = vec![Vec::new()];
            for g in fs {
                let part = dnf_of(g, cap)?;
                acc = product(&acc, &part, cap)?;
            }
            Ok(acc)
        }
    }
}

/// Pairwise conjunction of two DNFs, pruning inconsistent combinations early.
const PRODUCT_WORK_FACTOR: usize = 8;

pub fn product(a: &Dnf, b: &Dnf, cap: usize) -> Result<Dnf, NormalFormError> {
    let mut out = Vec::new();
    // Pruned candidates count too, at a discount.
    let budget = cap.saturating_mul(PRODUCT_WORK_FACTOR);
    let mut examined = 0usize;
    for x in a {
        for y in b {
            examined += 1;
            if examined > budget {
                return Err(NormalFormError::Blowup { cap, site: "conjunction product".into() });
            }
            let mut c = x.clone();
            for l in y {
                if !c.contains(l) {
                    c.push(l.clone());
                }
            }
            if conj_trivially_unsat(&c) {
                continue;
            }
            out.push(c);
            if out.len() > cap {
                return Err(NormalFormError::Blowup { cap, site: "conjunction product".into() });
            }
        }
    }
    Ok(out)
}

#[derive(Default, Clone)]
struct Bounds {
    lo: Option<(Q, bool)>,
    hi: Option<(Q, bool)>,
    eq: Option<Q>,
    neq: Vec<Q>,
}

impl Bounds {
    fn add(&mut self, rel: Rel, k: Q, positive: bool, integral: bool) -> bool {
        match (rel, positive) {
            (Rel::Eq, false) => {
                self.neq.push(k);
            }
            (Rel::Eq, true) => {
                if let Some(e) = &self.eq {
                    if *e != k {
                        return false;
                    }
                }
                self.eq = Some(k);
            }
            (Rel::Le, _) => self.tighten_hi(k, false),
            (Rel::Lt, _) => self.tighten_hi(k, true),
            (Rel::Ge, _) => self.tighten_lo(k, false),
            (Rel::Gt, _) => self.tighten_lo(k, true),
        }
        self.consistent(integral)
    }

    fn tighten_hi(&mut self, k: Q, strict: bool) {
        let replace = match &self.hi {
            None => true,
            Some((h, s)) => k < *h || (k == *h && strict && !s),
        };
        if replace {
            self.hi = Some((k, strict));
        }
    }

    fn tighten_lo(&mut self, k: Q, strict: bool) {
        let replace = match &self.lo {
            None => true,
            Some((l, s)) => k > *l || (k == *l && strict && !s),
        };
        if replace {
            self.lo = Some((k, strict));
        }
    }

    fn consistent(&self, integral: bool) -> bool {
        if let Some(e) = &self.eq {
            if self.neq.contains(e) {
                return false;
            }
            if let Some((l, s)) = &self.lo {
                if e < l || (e == l && *s) {
                    return false;
                }
            }
            if let Some((h, s)) = &self.hi {
                if e > h || (e == h && *s) {
                    return false;
                }
            }
            if integral && !e.is_integer() {
                return false;
            }
        }
        if let (Some((l, sl)), Some((h, sh))) = (&self.lo, &self.hi) {
            if l > h || (l == h && (*sl || *sh || self.neq.contains(l))) {
                return false;
            }
            if integral {
                let lo = if *sl { (l + Q::one()).floor() } else { l.ceil() };
                let hi = if *sh { (h - Q::one()).ceil() } else { h.floor() };
                if lo > hi {
                    return false;
                }
            }
        }
        true
    }
}

/// Cheap, incomplete inconsistency test for a conjunction: trivially false
/// literals, complementary pairs, and contradictory bounds on one linear form.
pub fn conj_trivially_unsat(lits: &[Literal]) -> bool {
    let mut forms: BTreeMap<Term, Bounds> = BTreeMap::new();
    let mut seen: BTreeSet<&Literal> = BTreeSet::new();
    for l in lits {
        match l.eval_trivial() {
            Some(false) => return true,
            Some(true) => continue,
            None => {}
        }
        if seen.contains(&l.negate()) {
            return true;
        }
        seen.insert(l);
        if let Some((e, rel, k, pos)) = l.linear_form() {
            let integral = e.sort().kind == SortKind::Int
                && e.linear_parts().0.iter().all(|(c, _)| c.is_integer());
            if !forms.entry(e).or_default().add(rel, k, pos, integral) {
                return true;
            }
        }
    }
    false
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Lit(l) => write!(f, "{}", l),
            Formula::Not(g) => write!(f, "!({})", g),
            Formula::And(fs) | Formula::Or(fs) => {
                let sep = if matches!(self, Formula::And(_)) { " & " } else { " | " };
                for (i, g) in fs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    match g {
                        Formula::And(_) | Formula::Or(_) => write!(f, "({})", g)?,
                        _ => write!(f, "{}", g)?,
                    }
                }
                Ok(())
            }
        }
    }
}
