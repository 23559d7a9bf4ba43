//! Syntactic classifiers: array property fragment membership of generated
//! constraints and the class of problems with guaranteed termination.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::logic::{collect_est, Atom, Clause, ClauseSet, GroundConj, Literal, Name, Rel, Role, Signature, Term, TermKind};
use crate::specfile::{BaseTheory, ProblemSpec};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Fragment {
    InFragment,
    OutOfFragment(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Termination {
    GuaranteedTerminating,
    NoGuarantee(String),
}

/// Application of a non-base function symbol to at least one argument.
fn is_read(sig: &Signature, t: &Term) -> bool {
    matches!(t.kind(), TermKind::App(f, args) if !args.is_empty() && !matches!(sig.role(f), Some(Role::Base) | None))
}

fn subterms(l: &Literal) -> BTreeSet<Term> {
    let mut s = BTreeSet::new();
    l.collect_subterms(&mut s);
    s
}

fn has_vars(t: &Term) -> bool {
    !t.is_ground()
}

fn apf_clause(c: &Clause, sig: &Signature) -> Result<(), String> {
    if c.is_ground() {
        return Ok(());
    }
    if let Some((x, _)) = c.vars.iter().find(|(_, s)| !s.is_int()) {
        return Err(format!("non-integer index variable `{}`", x));
    }
    for l in &c.lits {
        let subs = subterms(l);
        let reads: Vec<&Term> = subs.iter().filter(|t| is_read(sig, t) && has_vars(t)).collect();
        for r in &reads {
            let mut inner = BTreeSet::new();
            for a in r.args() {
                a.collect_subterms(&mut inner);
            }
            if inner.iter().any(|t| is_read(sig, t)) {
                return Err("nested read".into());
            }
        }
        if reads.is_empty() {
            if l.is_ground() {
                continue;
            }
            // An index guard, negated in clause form.
            if let Atom::Cmp(Rel::Eq, _, _) = l.atom {
                if l.positive {
                    return Err(format!("disequality in index guard `{}`", l.negate()));
                }
            }
            continue;
        }
        if reads.iter().any(|r| r.args().iter().any(|a| has_vars(a) && a.as_var().is_none())) {
            return Err(format!("index variable under arithmetic in a read in `{}`", l));
        }
        let map: BTreeMap<Term, Term> =
            reads.iter().map(|r| ((*r).clone(), Term::constant("#read".into(), r.sort().clone()))).collect();
        if !l.replace(&map).is_ground() {
            return Err(format!("index variable outside a read in value constraint `{}`", l));
        }
    }
    Ok(())
}

/// Syntactic membership of `gamma` in the array property fragment.
pub fn apf_guard(gamma: &ClauseSet, sig: &Signature) -> Fragment {
    match gamma.clauses.iter().map(|c| apf_clause(c, sig)).find_map(Result::err) {
        None => Fragment::InFragment,
        Some(r) => Fragment::OutOfFragment(r),
    }
}

/// Sufficient condition for the strengthening of `g` to stay in the array
/// property fragment: at most one ground term of an updated array.
pub fn predicts_apf(g: &GroundConj, sig: &Signature) -> bool {
    let ext: BTreeSet<Name> =
        sig.functions().filter(|d| d.role == Role::Primed && !d.args.is_empty()).map(|d| d.name.clone()).collect();
    collect_est(&ClauseSet::empty(), g, &ext).len() <= 1
}

fn is_const(t: &Term) -> bool {
    t.as_num().is_some() || t.is_constant()
}

fn is_var_app(t: &Term) -> bool {
    !t.args().is_empty() && t.args().iter().all(|a| a.as_var().is_some())
}

fn literal_in_class(l: &Literal) -> Result<(), String> {
    let Atom::Cmp(_, a, b) = &l.atom else { return Err(format!("non-arithmetic literal `{}`", l)) };
    let side = |t: &Term| t.as_var().is_some() || is_const(t) || is_var_app(t);
    let ok = match (a, b) {
        (a, b) if a.as_var().is_some() && is_const(b) => true,
        (a, b) if is_const(a) && b.as_var().is_some() => true,
        (a, b) if is_const(a) && is_const(b) => true,
        (a, b) if is_var_app(a) && (is_const(b) || b.as_var().is_some()) => true,
        (a, b) if is_var_app(b) && (is_const(a) || a.as_var().is_some()) => true,
        _ => false,
    };
    if ok {
        return Ok(());
    }
    if side(a) && side(b) {
        Err(format!("literal `{}` relates two function terms", l))
    } else {
        Err(format!("ground terms outside fixed family: `{}`", l))
    }
}

/// Whether the loop is guaranteed to terminate on `spec` with `keep`:
/// every unprimed symbol kept, rational base theory and every literal of
/// the shape variable or constant against constant, or a function applied
/// to variables against a constant or variable.
pub fn classify_termination(spec: &ProblemSpec, keep: &BTreeSet<Name>) -> Termination {
    let sig = &spec.signature;
    if let Some(d) = sig.functions().find(|d| matches!(d.role, Role::Parameter | Role::Extension) && !keep.contains(&d.name)) {
        return Termination::NoGuarantee(format!("`{}` is not kept", d.name));
    }
    if spec.base_theory() != BaseTheory::Lra {
        return Termination::NoGuarantee("base theory is not linear rational arithmetic".into());
    }
    let mut lits: Vec<Literal> = Vec::new();
    for cs in [&spec.property, &spec.init, &spec.theory()] {
        lits.extend(cs.clauses.iter().flat_map(|c| c.lits.iter().cloned()));
    }
    for u in &spec.updates {
        for case in &u.cases {
            lits.extend(case.guard.iter().chain(case.effect.iter()).cloned());
        }
    }
    match lits.iter().map(literal_in_class).find_map(Result::err) {
        None => Termination::GuaranteedTerminating,
        Some(r) => Termination::NoGuarantee(r),
    }
}
