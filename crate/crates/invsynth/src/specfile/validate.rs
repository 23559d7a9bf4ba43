//! Semantic checks on parsed problem files: guard exclusivity and
//! exhaustiveness, effect satisfiability, and a syntactic locality class
//! for every theory level.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{Closure, ProblemSpec, TheoryLevel, UpdateSpec};
use crate::logic::{Atom, Clause, Literal, Name, Rel, Signature, Term, TermKind};
use crate::smt::{Expr, SmtClient, Status};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Pass,
    Fail,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ObligationKind {
    /// Cases `i` and `j` cannot fire together.
    Exclusive(usize, usize),
    /// Some case always fires.
    Exhaustive,
    /// The effect of case `i` is satisfiable under its guard.
    EffectSatisfiable(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Obligation {
    pub function: String,
    pub kind: ObligationKind,
    pub verdict: Verdict,
}

fn ground_vars(u: &UpdateSpec) -> BTreeMap<Name, Term> {
    u.vars.iter().map(|(x, s)| (x.clone(), Term::constant(format!("{}#arg", x).into(), s.clone()))).collect()
}

fn verdict(status: Status, pass_when_unsat: bool) -> Verdict {
    match (status, pass_when_unsat) {
        (Status::Unsat, true) | (Status::Sat, false) => Verdict::Pass,
        (Status::Sat, true) | (Status::Unsat, false) => Verdict::Fail,
        _ => Verdict::Unknown,
    }
}

/// Exclusivity for every pair of cases, exhaustiveness once and effect
/// satisfiability per case, for every update. Ground theory clauses act as
/// hypotheses. A timeout yields `Unknown`, never `Pass`.
pub fn validate_guards(spec: &ProblemSpec, client: &SmtClient) -> Vec<Obligation> {
    let hyps: Vec<Expr> = spec.theory().clauses.iter().filter(|c| c.is_ground()).map(Expr::clause).collect();
    let mut out = Vec::new();
    for u in &spec.updates {
        let map = ground_vars(u);
        let inst = |ls: &[Literal]| Expr::literals(&ls.iter().map(|l| l.subst(&map)).collect::<Vec<_>>());
        let guards: Vec<Expr> = u.cases.iter().map(|c| inst(&c.guard)).collect();
        let check = |extra: Vec<Expr>| {
            let mut a = hyps.clone();
            a.extend(extra);
            client.check_sat(&a, false).status
        };
        for i in 0..guards.len() {
            for j in i + 1..guards.len() {
                let s = check(vec![guards[i].clone(), guards[j].clone()]);
                out.push(Obligation { function: u.function.to_string(), kind: ObligationKind::Exclusive(i, j), verdict: verdict(s, true) });
            }
        }
        let none = guards.iter().map(|g| Expr::not(g.clone())).collect();
        let s = check(none);
        out.push(Obligation { function: u.function.to_string(), kind: ObligationKind::Exhaustive, verdict: verdict(s, true) });
        for (i, c) in u.cases.iter().enumerate() {
            let s = check(vec![guards[i].clone(), inst(&c.effect)]);
            out.push(Obligation {
                function: u.function.to_string(),
                kind: ObligationKind::EffectSatisfiable(i),
                verdict: verdict(s, false),
            });
        }
    }
    out
}

/// Whether every obligation of `function` passed.
pub fn certified(obligations: &[Obligation], function: &str) -> bool {
    obligations.iter().filter(|o| o.function == function).all(|o| o.verdict == Verdict::Pass)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum LocalityClass {
    FreeFunctions,
    Monotone,
    CaseDefinition,
    ArrayProperty,
    Unverified(String),
}

impl LocalityClass {
    pub fn is_local(&self) -> bool {
        !matches!(self, LocalityClass::Unverified(_))
    }
}

fn is_ext(sig: &Signature, t: &Term) -> bool {
    matches!(t.kind(), TermKind::App(f, args) if !args.is_empty() && sig.function(f).is_some())
}

fn ext_terms(sig: &Signature, c: &Clause) -> Vec<Term> {
    let mut subs = std::collections::BTreeSet::new();
    for l in &c.lits {
        l.collect_subterms(&mut subs);
    }
    subs.into_iter().filter(|t| is_ext(sig, t)).collect()
}

fn nested(sig: &Signature, t: &Term) -> bool {
    t.args().iter().any(|a| {
        let mut subs = std::collections::BTreeSet::new();
        a.collect_subterms(&mut subs);
        subs.iter().any(|s| is_ext(sig, s) && !s.is_ground())
    })
}

/// Argument list consisting of distinct variables.
fn var_args(t: &Term) -> bool {
    let vs: Vec<_> = t.args().iter().filter_map(|a| a.as_var()).collect();
    vs.len() == t.args().len() && vs.iter().collect::<std::collections::BTreeSet<_>>().len() == vs.len()
}

fn monotone_clause(sig: &Signature, c: &Clause) -> bool {
    let ext = ext_terms(sig, c);
    if ext.len() != 2 || !ext.iter().all(|t| t.args().len() == 1 && t.args()[0].as_var().is_some()) || ext[0].head() != ext[1].head() {
        return false;
    }
    c.lits.iter().any(|l| match &l.atom {
        Atom::Cmp(r, a, b) => matches!(r, Rel::Le | Rel::Lt | Rel::Ge | Rel::Gt) && ext.contains(a) && ext.contains(b),
        _ => false,
    })
}

fn case_clause(sig: &Signature, c: &Clause) -> bool {
    let ext = ext_terms(sig, c);
    let non_ground: Vec<&Term> = ext.iter().filter(|t| !t.is_ground()).collect();
    let heads: std::collections::BTreeSet<_> = non_ground.iter().filter_map(|t| t.head()).collect();
    heads.len() == 1 && non_ground.iter().all(|t| var_args(t))
}

fn apf_clause(sig: &Signature, c: &Clause) -> Result<(), String> {
    for l in &c.lits {
        let mut subs = std::collections::BTreeSet::new();
        l.collect_subterms(&mut subs);
        let reads: Vec<&Term> = subs.iter().filter(|t| is_ext(sig, t) && !t.is_ground()).collect();
        if reads.iter().any(|t| nested(sig, t)) {
            return Err("nested read".into());
        }
        if reads.iter().any(|t| !var_args(t)) {
            return Err("index variable under arithmetic in a read".into());
        }
    }
    Ok(())
}

/// Syntactic recognition of the locality classes the engine relies on.
pub fn check_locality_class(level: &TheoryLevel, sig: &Signature) -> LocalityClass {
    let cs = &level.clauses.clauses;
    for c in cs {
        if let Some(t) = ext_terms(sig, c).into_iter().find(|t| !t.is_ground() && nested(sig, t)) {
            return LocalityClass::Unverified(format!("nested extension term `{}`", t));
        }
    }
    if cs.iter().all(Clause::is_ground) {
        return LocalityClass::FreeFunctions;
    }
    if level.closure == Closure::Apf {
        return match cs.iter().map(|c| apf_clause(sig, c)).find_map(Result::err) {
            None => LocalityClass::ArrayProperty,
            Some(r) => LocalityClass::Unverified(r),
        };
    }
    if cs.iter().all(|c| c.is_ground() || monotone_clause(sig, c)) {
        return LocalityClass::Monotone;
    }
    if cs.iter().all(|c| c.is_ground() || case_clause(sig, c)) {
        return LocalityClass::CaseDefinition;
    }
    LocalityClass::Unverified("no recognised locality class".into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfile::parse;

    const SPEC: &str = "version 1
sorts
  int : integer
end
signature
  parameter x, y : int
  parameter b : int -> int
  primed x
end
theory level sorted closure identity
  forall i:int, j:int . i <= j -> b(i) <= b(j)
end
theory level nest closure identity
  forall i:int . b(b(i)) >= 0
end
update x
  case x <= y : x' = x + 1
  case x >= y : x' = x
end
property
  x <= y + 1
end
";

    #[test]
    fn overlapping_guards_fail_exclusivity() {
        let spec = parse(SPEC).unwrap();
        let obs = validate_guards(&spec, &SmtClient::default());
        assert_eq!(obs.len(), 1 + 1 + 2);
        let excl = obs.iter().find(|o| o.kind == ObligationKind::Exclusive(0, 1)).unwrap();
        assert_eq!(excl.verdict, Verdict::Fail);
        assert!(obs.iter().filter(|o| o.kind != ObligationKind::Exclusive(0, 1)).all(|o| o.verdict == Verdict::Pass));
        assert!(!certified(&obs, "x"));
    }

    #[test]
    fn locality_classes() {
        let spec = parse(SPEC).unwrap();
        assert_eq!(check_locality_class(&spec.levels[0], &spec.signature), LocalityClass::Monotone);
        assert!(matches!(check_locality_class(&spec.levels[1], &spec.signature), LocalityClass::Unverified(r) if r.contains("nested")));
    }
}
