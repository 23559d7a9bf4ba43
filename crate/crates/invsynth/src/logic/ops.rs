use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::formula::{conj_trivially_unsat, Clause, ClauseSet, Dnf, GroundConj, Literal, NormalFormError, SkolemOrigin};
use super::sort::{Name, Signature, SignatureError, Sort};
use super::term::Term;

fn prime_map(f: &BTreeSet<Name>, sig: &Signature) -> Result<BTreeMap<Name, Name>, SignatureError> {
    f.iter()
        .map(|s| {
            sig.prime_of(s)
                .map(|p| (s.clone(), p.clone()))
                .ok_or_else(|| SignatureError::UnknownSymbol(format!("{} (no primed partner)", s)))
        })
        .collect()
}

/// Replaces every symbol of `f` by its primed partner.
pub fn prime_clauses(cs: &ClauseSet, f: &BTreeSet<Name>, sig: &Signature) -> Result<ClauseSet, SignatureError> {
    let map = prime_map(f, sig)?;
    Ok(ClauseSet::new(
        cs.clauses
            .iter()
            .map(|c| Clause { lits: c.lits.iter().map(|l| l.rename_symbols(&map)).collect(), vars: c.vars.clone() })
            .collect(),
    ))
}

pub fn prime_ground(g: &GroundConj, f: &BTreeSet<Name>, sig: &Signature) -> Result<GroundConj, SignatureError> {
    let map = prime_map(f, sig)?;
    Ok(GroundConj { lits: g.lits.iter().map(|l| l.rename_symbols(&map)).collect(), skolems: g.skolems.clone() })
}

pub fn prime_literals(lits: &[Literal], f: &BTreeSet<Name>, sig: &Signature) -> Result<Vec<Literal>, SignatureError> {
    let map = prime_map(f, sig)?;
    Ok(lits.iter().map(|l| l.rename_symbols(&map)).collect())
}

/// Negation of a clause set as a disjunction of ground conjunctions, one per
/// clause, with variables replaced by fresh `sk_<clause>_<var>` constants.
pub fn skolemize_negation(psi: &ClauseSet) -> Vec<GroundConj> {
    skolemize_negation_with(psi, "sk")
}

pub fn skolemize_negation_with(psi: &ClauseSet, prefix: &str) -> Vec<GroundConj> {
    psi.clauses
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut map = BTreeMap::new();
            let mut skolems = Vec::new();
            for (x, s) in &c.vars {
                let k: Name = format!("{}_{}_{}", prefix, i, x).into();
                map.insert(x.clone(), Term::constant(k.clone(), s.clone()));
                skolems.push(SkolemOrigin { constant: k, sort: s.clone(), clause: i, var: x.clone() });
            }
            let lits = c.lits.iter().map(|l| l.subst(&map).negate()).collect();
            GroundConj { lits, skolems }
        })
        .collect()
}

/// One case `guard -> effect` of a definition by case distinction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GuardedCase {
    pub guard: Vec<Literal>,
    pub effect: Vec<Literal>,
}

/// Case definition `forall x. AND_i (guard_i(x) -> effect_i(x))` of one function.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GuardedSystem {
    pub function: Name,
    pub vars: Vec<(Name, Sort)>,
    pub cases: Vec<GuardedCase>,
    /// Guards were proven pairwise exclusive and jointly exhaustive.
    pub certified: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GuardError {
    #[error("guards of `{0}` are not certified exclusive and exhaustive")]
    NotCertified(String),
    #[error("instance of `{function}` has {got} arguments, expected {expected}")]
    Arity { function: String, expected: usize, got: usize },
    #[error(transparent)]
    Blowup(#[from] NormalFormError),
}

impl GuardedSystem {
    /// Clause form `guard_i -> effect_i` for every case and effect literal.
    pub fn clauses(&self) -> Vec<Clause> {
        let mut out = Vec::new();
        for case in &self.cases {
            for e in &case.effect {
                let mut lits: Vec<Literal> = case.guard.iter().map(Literal::negate).collect();
                lits.push(e.clone());
                out.push(Clause::new(lits));
            }
        }
        out
    }

    pub fn instance(&self, case: &GuardedCase, args: &[Term]) -> Vec<Literal> {
        let map: BTreeMap<Name, Term> = self.vars.iter().map(|(x, _)| x.clone()).zip(args.iter().cloned()).collect();
        case.guard.iter().chain(case.effect.iter()).map(|l| l.subst(&map)).collect()
    }
}

/// Rewrites the conjunction over instances of a certified case definition into
/// the disjunction over case choices, pruning inconsistent disjuncts.
pub fn to_dnf_guarded(sys: &GuardedSystem, instances: &[Vec<Term>], cap: usize) -> Result<Dnf, GuardError> {
    if !sys.certified {
        return Err(GuardError::NotCertified(sys.function.to_string()));
    }
    let mut acc: Dnf = vec![Vec::new()];
    for inst in instances {
        if inst.len() != sys.vars.len() {
            return Err(GuardError::Arity { function: sys.function.to_string(), expected: sys.vars.len(), got: inst.len() });
        }
        let mut next = Vec::new();
        for conj in &acc {
            for case in &sys.cases {
                let mut c = conj.clone();
                for l in sys.instance(case, inst) {
                    if l.eval_trivial() == Some(true) {
                        continue;
                    }
                    if !c.contains(&l) {
                        c.push(l);
                    }
                }
                if conj_trivially_unsat(&c) {
                    continue;
                }
                next.push(c);
                if next.len() > cap {
                    return Err(NormalFormError::Blowup { cap, site: format!("case expansion of `{}`", sys.function) }.into());
                }
            }
        }
        acc = next;
    }
    Ok(acc)
}

/// Ground terms of `k` and `g` headed by a symbol of `ext`, closed under subterms.
pub fn collect_est(k: &ClauseSet, g: &GroundConj, ext: &BTreeSet<Name>) -> BTreeSet<Term> {
    let mut subs = BTreeSet::new();
    for c in &k.clauses {
        for l in &c.lits {
            l.collect_subterms(&mut subs);
        }
    }
    for l in &g.lits {
        l.collect_subterms(&mut subs);
    }
    subs.into_iter().filter(|t| t.is_ground() && t.head().is_some_and(|h| ext.contains(h))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::formula::Rel;
    use crate::logic::sort::{name, FunDecl, Role};

    fn sig() -> Signature {
        let mut s = Signature::new();
        s.add_sort(Sort::int()).unwrap();
        for (n, ar) in [("d1", 0), ("d2", 0), ("a", 1)] {
            s.add_function(FunDecl { name: name(n), args: vec![Sort::int(); ar], result: Sort::int(), role: Role::Extension })
                .unwrap();
        }
        s.add_primed("d1").unwrap();
        s.add_primed("d2").unwrap();
        s
    }

    #[test]
    fn priming_renames_only_requested_symbols() {
        let s = sig();
        let d = |n: &str| Term::constant(name(n), Sort::int());
        let cs = ClauseSet::new(vec![Clause::new(vec![Literal::cmp(Rel::Ge, d("d2"), d("d1"))])]);
        let f: BTreeSet<Name> = [name("d1"), name("d2")].into();
        assert_eq!(prime_clauses(&cs, &f, &s).unwrap().to_string(), "d2' >= d1'");
        assert_eq!(prime_clauses(&cs, &BTreeSet::new(), &s).unwrap(), cs);
        let bad: BTreeSet<Name> = [name("a")].into();
        assert!(prime_clauses(&cs, &bad, &s).is_err());
    }

    #[test]
    fn skolemization_is_per_clause() {
        let x = Term::var(name("x"), Sort::int());
        let a = |t: Term| Term::app(name("a"), vec![t], Sort::int());
        let one = Term::int(1, Sort::int());
        let cs = ClauseSet::new(vec![
            Clause::new(vec![Literal::cmp(Rel::Le, a(x.clone()), a(x.add(&one)))]),
            Clause::new(vec![Literal::cmp(Rel::Ge, a(x.clone()), one.clone())]),
        ]);
        let gs = skolemize_negation(&cs);
        assert_eq!(gs.len(), 2);
        assert_eq!(gs[0].to_string(), "a(sk_0_x) > a(sk_0_x + 1)");
        assert_ne!(gs[0].skolems[0].constant, gs[1].skolems[0].constant);
    }
}
