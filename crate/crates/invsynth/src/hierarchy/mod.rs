//! Hierarchical reasoning in chains of local theory extensions: instantiate
//! extension axioms at the ground extension terms of a query, purify the
//! result into the base theory and keep the definitions for later
//! back-substitution.

mod dump;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::logic::{Clause, ClauseSet, GroundConj, Literal, Name, Rel, Sort, Term, TermKind};
use crate::specfile::Closure;
pub use dump::{dump_smt2, dump_text};

pub const DEFAULT_INSTANCE_CAP: usize = 200_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HierarchyError {
    #[error("variable `{var}` of clause `{clause}` occurs below no extension symbol")]
    VariableNotUnderExtension { clause: String, var: String },
    #[error("instance count exceeds {cap} at level `{level}`")]
    Blowup { cap: usize, level: String },
}

/// One extension level of a chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Level {
    pub name: String,
    pub clauses: Vec<Clause>,
    pub closure: Closure,
    /// Symbols whose ground terms drive instantiation. Empty means every
    /// function symbol applied to arguments in the level's clauses.
    pub keys: BTreeSet<Name>,
    /// The level was recognised as a local extension. Reductions over an
    /// unverified level carry the "locality assumed" caveat.
    pub local: bool,
}

impl Level {
    pub fn new(name: &str, clauses: Vec<Clause>) -> Level {
        Level { name: name.to_string(), clauses, closure: Closure::Identity, keys: BTreeSet::new(), local: true }
    }

    pub fn from_set(name: &str, cs: &ClauseSet) -> Level {
        Level::new(name, cs.clauses.clone())
    }

    pub fn with_keys<I: IntoIterator<Item = Name>>(mut self, keys: I) -> Level {
        self.keys = keys.into_iter().collect();
        self
    }

    pub fn with_closure(mut self, closure: Closure) -> Level {
        self.closure = closure;
        self
    }

    pub fn unverified(mut self) -> Level {
        self.local = false;
        self
    }

    fn effective_keys(&self) -> BTreeSet<Name> {
        if !self.keys.is_empty() {
            return self.keys.clone();
        }
        let mut out = BTreeSet::new();
        for c in &self.clauses {
            for t in subterms(c) {
                if let TermKind::App(f, args) = t.kind() {
                    if !args.is_empty() {
                        out.insert(f.clone());
                    }
                }
            }
        }
        out
    }
}

/// Chain of extensions, innermost level first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Chain {
    pub levels: Vec<Level>,
}

impl Chain {
    pub fn new(levels: Vec<Level>) -> Chain {
        Chain { levels }
    }

    pub fn push_outer(&mut self, level: Level) {
        self.levels.push(level);
    }

    pub fn locality_assumed(&self) -> bool {
        self.levels.iter().any(|l| !l.local && !l.clauses.is_empty())
    }
}

/// A ground instance with its provenance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub level: String,
    pub clause: usize,
    pub subst: Vec<(Name, Term)>,
    pub result: Clause,
}

fn subterms(c: &Clause) -> BTreeSet<Term> {
    let mut out = BTreeSet::new();
    for l in &c.lits {
        l.collect_subterms(&mut out);
    }
    out
}

fn is_ext_app(t: &Term) -> bool {
    matches!(t.kind(), TermKind::App(_, args) if !args.is_empty())
}

/// Ground extension terms (applications with arguments) of the given clauses.
pub fn ground_ext_terms<'a, I: IntoIterator<Item = &'a Clause>>(clauses: I) -> BTreeSet<Term> {
    let mut out = BTreeSet::new();
    for c in clauses {
        for t in subterms(c) {
            if is_ext_app(&t) && t.is_ground() {
                out.insert(t);
            }
        }
    }
    out
}

fn var_term(x: &Name, s: &Sort) -> Term {
    Term::var(x.clone(), s.clone())
}

/// Candidate value for `x` when pattern argument `p` must equal ground `t`.
fn solve_arg(p: &Term, x: &Term, t: &Term) -> Option<Term> {
    if p == x {
        return Some(t.clone());
    }
    if !p.sort().is_arith() {
        return None;
    }
    let (sum, _) = p.linear_parts();
    let ok = sum.len() == 1 && &sum[0].1 == x && sum[0].0 == crate::logic::q(1);
    if !ok {
        return None;
    }
    let rest = p.sub(x);
    rest.is_ground().then(|| t.sub(&rest))
}

/// Ground terms of index sort used by the array-property closure: arguments
/// of ground applications plus ground terms compared with variables.
fn index_terms(c: &Clause, terms: &BTreeSet<Term>, sort: &Sort) -> BTreeSet<Term> {
    let mut out = BTreeSet::new();
    for t in terms {
        for a in t.args() {
            if a.sort() == sort && a.is_ground() {
                out.insert(a.clone());
            }
        }
    }
    for l in &c.lits {
        if let crate::logic::Atom::Cmp(_, a, b) = &l.atom {
            for (u, v) in [(a, b), (b, a)] {
                if u.as_var().is_some() && v.is_ground() && v.sort() == sort {
                    out.insert(v.clone());
                }
            }
        }
    }
    out
}

/// All instances of `clauses` whose key extension terms fall into `terms`.
/// Under the array-property closure, index variables range over the index
/// set instead and no membership filter is applied.
pub fn instantiate(level: &Level, terms: &BTreeSet<Term>, cap: usize) -> Result<Vec<Instance>, HierarchyError> {
    let keys = level.effective_keys();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (ci, c) in level.clauses.iter().enumerate() {
        if c.is_ground() {
            if let Some(s) = c.simplify() {
                if seen.insert(s.clone()) {
                    out.push(Instance { level: level.name.clone(), clause: ci, subst: Vec::new(), result: s });
                }
            }
            continue;
        }
        let subs = subterms(c);
        let patterns: Vec<&Term> = subs.iter().filter(|t| is_ext_app(t) && !t.is_ground()).collect();
        let mut cands: Vec<(Name, Vec<Term>)> = Vec::new();
        for (x, s) in &c.vars {
            let xv = var_term(x, s);
            let occurs = |p: &&Term| {
                let mut vs = BTreeMap::new();
                p.collect_vars(&mut vs);
                vs.contains_key(x)
            };
            let under: Vec<&Term> = patterns.iter().copied().filter(occurs).collect();
            let apf_index = level.closure == Closure::Apf && s.is_int();
            if under.is_empty() && !apf_index {
                return Err(HierarchyError::VariableNotUnderExtension { clause: c.to_string(), var: x.to_string() });
            }
            let mut set = BTreeSet::new();
            if apf_index {
                set = index_terms(c, terms, s);
            } else {
                let keyed: Vec<&Term> = under.iter().copied().filter(|p| p.head().is_some_and(|h| keys.contains(h))).collect();
                let source = if keyed.is_empty() { &under } else { &keyed };
                for p in source {
                    for t in terms.iter().filter(|t| t.head() == p.head() && t.args().len() == p.args().len()) {
                        for (pa, ta) in p.args().iter().zip(t.args()) {
                            if let Some(v) = solve_arg(pa, &xv, ta) {
                                set.insert(v);
                            }
                        }
                    }
                }
            }
            cands.push((x.clone(), set.into_iter().collect()));
        }
        if cands.iter().any(|(_, v)| v.is_empty()) {
            continue;
        }
        let total: usize = cands.iter().map(|(_, v)| v.len()).try_fold(1usize, |a, b| a.checked_mul(b)).unwrap_or(usize::MAX);
        if total > cap {
            return Err(HierarchyError::Blowup { cap, level: level.name.clone() });
        }
        let keyed_patterns: Vec<&Term> = patterns.iter().copied().filter(|p| p.head().is_some_and(|h| keys.contains(h))).collect();
        let mut idx = vec![0usize; cands.len()];
        loop {
            let map: BTreeMap<Name, Term> = cands.iter().zip(&idx).map(|((x, v), &i)| (x.clone(), v[i].clone())).collect();
            let admissible = level.closure == Closure::Apf || keyed_patterns.iter().all(|p| terms.contains(&p.subst(&map)));
            if admissible {
                if let Some(s) = c.instantiate(&map).simplify() {
                    if seen.insert(s.clone()) {
                        out.push(Instance {
                            level: level.name.clone(),
                            clause: ci,
                            subst: map.into_iter().collect(),
                            result: s,
                        });
                        if out.len() > cap {
                            return Err(HierarchyError::Blowup { cap, level: level.name.clone() });
                        }
                    }
                }
            }
            let mut k = 0;
            loop {
                if k == idx.len() {
                    break;
                }
                idx[k] += 1;
                if idx[k] < cands[k].1.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }
    }
    Ok(out)
}

/// Definition `constant = head(args)` introduced by purification; `args`
/// are already purified.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Def {
    pub constant: Term,
    pub head: Name,
    pub args: Vec<Term>,
    /// The original, unpurified term.
    pub term: Term,
}

impl Def {
    pub fn literal(&self) -> Literal {
        Literal::eq(self.constant.clone(), Term::app(self.head.clone(), self.args.clone(), self.constant.sort().clone()))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Purified {
    /// Clauses over base symbols and constants only.
    pub clauses: Vec<Clause>,
    pub defs: Vec<Def>,
    /// Congruence instances `args = args' -> c = c'` between definitions.
    pub con0: Vec<Clause>,
}

impl Purified {
    /// Replaces definition constants by the terms they stand for.
    pub fn unpurify_map(&self) -> BTreeMap<Term, Term> {
        self.defs.iter().map(|d| (d.constant.clone(), d.term.clone())).collect()
    }

    pub fn unpurify(&self, c: &Clause) -> Clause {
        let map = self.unpurify_map();
        c.map_lits(&mut |l| l.replace(&map))
    }

    pub fn all_clauses(&self) -> Vec<Clause> {
        self.clauses.iter().chain(self.con0.iter()).cloned().collect()
    }

    pub fn def_of(&self, constant: &Term) -> Option<&Def> {
        self.defs.iter().find(|d| &d.constant == constant)
    }
}

/// Stateful purifier so that several clause groups share definitions.
#[derive(Clone, Debug, Default)]
pub struct Purifier {
    defs: Vec<Def>,
    by_term: BTreeMap<Term, Term>,
    used: BTreeSet<Name>,
    counter: usize,
}

impl Purifier {
    /// `used` lists names that fresh constants must avoid.
    pub fn new(used: BTreeSet<Name>) -> Purifier {
        Purifier { used, ..Default::default() }
    }

    fn fresh(&mut self, head: &str) -> Name {
        loop {
            self.counter += 1;
            let n: Name = format!("{}_{}", head, self.counter).into();
            if !self.used.contains(&n) {
                self.used.insert(n.clone());
                return n;
            }
        }
    }

    /// Bottom-up: every application with arguments becomes a constant.
    pub fn term(&mut self, t: &Term) -> Term {
        if let Some(c) = self.by_term.get(t) {
            return c.clone();
        }
        match t.kind() {
            TermKind::App(f, args) if !args.is_empty() => {
                let pargs: Vec<Term> = args.iter().map(|a| self.term(a)).collect();
                let name = self.fresh(f);
                let c = Term::constant(name, t.sort().clone());
                self.defs.push(Def { constant: c.clone(), head: f.clone(), args: pargs, term: t.clone() });
                self.by_term.insert(t.clone(), c.clone());
                c
            }
            TermKind::App(..) | TermKind::Var(_) | TermKind::Num(_) => t.clone(),
            TermKind::Lin(xs, k) => {
                let xs: Vec<(crate::logic::Q, Term)> = xs.iter().map(|(c, a)| (c.clone(), self.term(a))).collect();
                Term::linear(xs, k.clone(), t.sort().clone())
            }
        }
    }

    pub fn literal(&mut self, l: &Literal) -> Literal {
        l.map_terms(&mut |t| self.term(t))
    }

    pub fn clause(&mut self, c: &Clause) -> Clause {
        Clause::new(c.lits.iter().map(|l| self.literal(l)).collect())
    }

    pub fn defs(&self) -> &[Def] {
        &self.defs
    }

    /// Congruence instances between definitions with the same head symbol
    /// accepted by `want`, skipping pairs whose argument disequality is
    /// literally present in `facts` (as `!=` or as a strict comparison).
    pub fn con0(&self, facts: &[Literal], want: &dyn Fn(&str) -> bool) -> Vec<Clause> {
        let distinct = |a: &Term, b: &Term| {
            facts.iter().any(|l| match (&l.atom, l.positive) {
                (crate::logic::Atom::Cmp(Rel::Eq, x, y), false) => (x == a && y == b) || (x == b && y == a),
                (crate::logic::Atom::Cmp(Rel::Lt | Rel::Gt, x, y), true) => (x == a && y == b) || (x == b && y == a),
                _ => false,
            })
        };
        let mut out = Vec::new();
        for (i, d) in self.defs.iter().enumerate() {
            if !want(&d.head) {
                continue;
            }
            for e in &self.defs[i + 1..] {
                if e.head != d.head || e.args.len() != d.args.len() {
                    continue;
                }
                if d.args.iter().zip(&e.args).any(|(a, b)| distinct(a, b)) {
                    continue;
                }
                let mut lits: Vec<Literal> =
                    d.args.iter().zip(&e.args).filter(|(a, b)| a != b).map(|(a, b)| Literal::neq(a.clone(), b.clone())).collect();
                lits.push(Literal::eq(d.constant.clone(), e.constant.clone()));
                if let Some(c) = Clause::new(lits).simplify() {
                    out.push(c);
                }
            }
        }
        out
    }
}

/// Purifies ground clauses, with congruence instances for every symbol.
pub fn purify(clauses: &[Clause]) -> Purified {
    let mut used = BTreeSet::new();
    for c in clauses {
        c.collect_symbols(&mut used);
    }
    let mut p = Purifier::new(used);
    let pure: Vec<Clause> = clauses.iter().map(|c| p.clause(c)).collect();
    let facts: Vec<Literal> = pure.iter().filter(|c| c.lits.len() == 1).map(|c| c.lits[0].clone()).collect();
    let con0 = p.con0(&facts, &|_| true);
    Purified { clauses: pure, defs: p.defs.clone(), con0 }
}

/// Result of reducing a ground query over a chain.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Reduction {
    pub goal: Vec<Clause>,
    pub instances: Vec<Instance>,
    pub purified: Purified,
    pub locality_assumed: bool,
}

impl Reduction {
    /// Query clauses and all instances, before purification.
    pub fn ground_clauses(&self) -> Vec<Clause> {
        self.goal.iter().cloned().chain(self.instances.iter().map(|i| i.result.clone())).collect()
    }
}

/// Instantiates every level, outermost first, feeding the ground extension
/// terms created by outer instances into inner levels.
pub fn instantiate_chain(chain: &Chain, goal: &[Clause], cap: usize) -> Result<Vec<Instance>, HierarchyError> {
    let mut terms = ground_ext_terms(goal);
    for l in &chain.levels {
        terms.extend(ground_ext_terms(l.clauses.iter().filter(|c| c.is_ground())));
    }
    let mut all = Vec::new();
    for level in chain.levels.iter().rev() {
        let inst = instantiate(level, &terms, cap)?;
        terms.extend(ground_ext_terms(inst.iter().map(|i| &i.result)));
        all.extend(inst);
    }
    Ok(all)
}

/// Full reduction: instances of the chain plus the goal, purified with
/// definitions and congruence instances.
pub fn reduce_chain(chain: &Chain, goal: &[Clause]) -> Result<Reduction, HierarchyError> {
    let instances = instantiate_chain(chain, goal, DEFAULT_INSTANCE_CAP)?;
    let mut ground: Vec<Clause> = goal.to_vec();
    ground.extend(instances.iter().map(|i| i.result.clone()));
    Ok(Reduction {
        goal: goal.to_vec(),
        instances,
        purified: purify(&ground),
        locality_assumed: chain.locality_assumed(),
    })
}

/// Unit clauses of a ground conjunction.
pub fn unit_clauses(g: &GroundConj) -> Vec<Clause> {
    g.lits.iter().map(|l| Clause::new(vec![l.clone()])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfile::parse_clauses;
    use crate::logic::{FunDecl, Role, Signature, SortKind};

    fn sig() -> Signature {
        let mut s = Signature::new();
        let int = Sort::new("int", SortKind::Int);
        s.add_sort(int.clone()).unwrap();
        for (n, r, a) in [("f", Role::Parameter, 1), ("h", Role::Parameter, 1), ("g", Role::Extension, 1), ("c", Role::Parameter, 0), ("c1", Role::Base, 0), ("c2", Role::Base, 0)] {
            s.add_function(FunDecl { name: n.into(), args: vec![int.clone(); a], result: int.clone(), role: r }).unwrap();
        }
        s
    }

    fn bridge() -> ClauseSet {
        parse_clauses("forall x:int . x <= c -> g(x) = f(x)\nforall x:int . c < x -> g(x) = h(x)\n", &sig()).unwrap()
    }

    #[test]
    fn bridge_instances() {
        let g = parse_clauses("c1 <= c2\ng(c1) > g(c2)\n", &sig()).unwrap();
        let level = Level::from_set("K", &bridge()).with_keys(["g".into()]);
        let terms = ground_ext_terms(&g.clauses);
        let inst = instantiate(&level, &terms, 1000).unwrap();
        assert_eq!(inst.len(), 4);
        assert!(inst.iter().all(|i| i.subst.len() == 1));
    }

    #[test]
    fn unguarded_variable_is_rejected() {
        let k = parse_clauses("forall x:int . x <= c | g(c) = 0\n", &sig()).unwrap();
        let level = Level::from_set("K", &k);
        let e = instantiate(&level, &BTreeSet::new(), 10).unwrap_err();
        assert!(matches!(e, HierarchyError::VariableNotUnderExtension { .. }));
    }

    #[test]
    fn purification_names_and_round_trip() {
        let g = parse_clauses("c1 <= c2\ng(f(c1)) > g(c2)\n", &sig()).unwrap();
        let p = purify(&g.clauses);
        let names: Vec<String> = p.defs.iter().map(|d| d.constant.to_string()).collect();
        assert_eq!(names, vec!["f_1", "g_2", "g_3"]);
        for (orig, pure) in g.clauses.iter().zip(&p.clauses) {
            assert_eq!(&p.unpurify(pure), orig);
        }
        assert_eq!(p.con0.len(), 1);
    }

    #[test]
    fn con0_pruned_by_literal_disequality() {
        let g = parse_clauses("c1 < c2\ng(c1) > g(c2)\n", &sig()).unwrap();
        assert!(purify(&g.clauses).con0.is_empty());
    }

    #[test]
    fn shifted_patterns_are_solved() {
        let k = parse_clauses("forall x:int . g(x) <= g(x + 1)\n", &sig()).unwrap();
        let g = parse_clauses("g(c1) > g(c1 + 1)\n", &sig()).unwrap();
        let level = Level::from_set("K", &k);
        let inst = instantiate(&level, &ground_ext_terms(&g.clauses), 100).unwrap();
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].result.to_string(), "g(c1) <= g(c1 + 1)");
    }

    #[test]
    fn literally_false_guards_are_dropped() {
        let k = parse_clauses("forall x:int . x > 5 | g(x) = 0\n", &sig()).unwrap();
        let g = parse_clauses("g(7) > 0\n", &sig()).unwrap();
        let level = Level::from_set("K", &k);
        assert!(instantiate(&level, &ground_ext_terms(&g.clauses), 100).unwrap().is_empty());
    }
}
