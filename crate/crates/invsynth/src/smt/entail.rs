use std::time::Duration;

use serde::Serialize;

use super::{Expr, Model, SmtClient, SolverVerdict, Status};
use crate::hierarchy::{reduce_chain, Chain, Level, Reduction};
use crate::logic::{skolemize_negation, Clause, ClauseSet};

/// Theory levels shared by a family of checks, innermost first.
pub type Background = Chain;

/// Timeout cap for the quantified cross-check that confirms a satisfiable
/// reduction when locality is only assumed.
const CONFIRM_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Equivalence {
    Equivalent,
    Inequivalent(Model),
    Unknown(String),
}

fn translate(model: Option<Model>, r: &Reduction) -> Option<Model> {
    let mut m = model?;
    for d in &r.purified.defs {
        let key = d.constant.to_string();
        if let Some(v) = m.values.remove(&key) {
            m.values.insert(d.term.to_string(), v);
        }
    }
    Some(m)
}

fn all_clauses(chain: &Chain) -> Vec<Clause> {
    chain.levels.iter().flat_map(|l| l.clauses.iter().cloned()).collect()
}

impl SmtClient {
    /// Satisfiability of `ground` over `chain` through hierarchical reduction.
    pub fn check_reduced(&self, chain: &Chain, ground: &[Clause], want_model: bool) -> (SolverVerdict, Option<Reduction>) {
        let r = match reduce_chain(chain, ground) {
            Ok(r) => r,
            Err(e) => {
                let v = SolverVerdict {
                    status: Status::Unknown,
                    model: None,
                    stats: Default::default(),
                    diagnostic: format!("reduction failed: {}", e),
                };
                return (v, None);
            }
        };
        let asserts: Vec<Expr> = r.purified.all_clauses().iter().map(Expr::clause).collect();
        let mut v = self.check_sat(&asserts, want_model);
        v.model = translate(v.model.take(), &r);
        (v, Some(r))
    }

    /// Satisfiability of the quantified axioms and ground clauses handed
    /// directly to the solver, without instantiation.
    pub fn check_direct(&self, chain: &Chain, ground: &[Clause], want_model: bool, timeout: Duration) -> SolverVerdict {
        let mut asserts: Vec<Expr> = all_clauses(chain).iter().map(Expr::clause).collect();
        asserts.extend(ground.iter().map(Expr::clause));
        match Expr::and(asserts.clone()) {
            Expr::True => return SolverVerdict::trivial(Status::Sat),
            Expr::False => return SolverVerdict::trivial(Status::Unsat),
            _ => {}
        }
        let script = self.script(&asserts, want_model);
        self.run_script_with(&script, want_model, timeout)
    }

    /// Satisfiability of `ground` over `chain`. An unsatisfiable reduction is
    /// final. A satisfiable one over levels whose locality is only assumed is
    /// cross-checked by a direct quantified query.
    pub fn check_ground(&self, chain: &Chain, ground: &[Clause], want_model: bool) -> SolverVerdict {
        let (v, _) = self.check_reduced(chain, ground, want_model);
        if v.unsat() {
            return v;
        }
        if v.sat() && !chain.locality_assumed() {
            return v;
        }
        let d = self.check_direct(chain, ground, want_model, CONFIRM_TIMEOUT.min(self.config.timeout));
        if d.status.is_decided() {
            return d;
        }
        v
    }

    /// Whether the levels of `chain` entail every clause of `goal`. Unsat
    /// means the entailment holds; Sat carries a countermodel.
    pub fn check_entailment(&self, chain: &Chain, goal: &ClauseSet) -> SolverVerdict {
        let mut last = SolverVerdict::trivial(Status::Unsat);
        let mut undecided: Option<SolverVerdict> = None;
        for g in skolemize_negation(goal) {
            let ground: Vec<Clause> = g.lits.iter().map(|l| Clause::new(vec![l.clone()])).collect();
            let v = self.check_ground(chain, &ground, true);
            match v.status {
                Status::Unsat => last = v,
                Status::Sat => return v,
                _ => undecided = Some(v),
            }
        }
        undecided.unwrap_or(last)
    }

    /// Equivalence of two clause sets over `background` by two entailments.
    pub fn check_equivalence(&self, background: &Chain, a: &ClauseSet, b: &ClauseSet) -> Equivalence {
        let with = |h: &ClauseSet| {
            let mut c = background.clone();
            c.push_outer(Level::from_set("hypothesis", h).unverified());
            c
        };
        let ab = self.check_entailment(&with(a), b);
        let ba = self.check_entailment(&with(b), a);
        for v in [&ab, &ba] {
            if v.sat() {
                return Equivalence::Inequivalent(v.model.clone().unwrap_or_default());
            }
        }
        if ab.unsat() && ba.unsat() {
            return Equivalence::Equivalent;
        }
        let d = [&ab, &ba].iter().find(|v| !v.unsat()).map(|v| format!("{:?} {}", v.status, v.diagnostic)).unwrap_or_default();
        Equivalence::Unknown(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{Signature, Sort, SortKind, FunDecl, Role};
    use crate::specfile::parse_clauses;

    fn sig() -> Signature {
        let mut s = Signature::new();
        let int = Sort::new("int", SortKind::Int);
        s.add_sort(int.clone()).unwrap();
        for n in ["x", "y"] {
            s.add_function(FunDecl { name: n.into(), args: vec![], result: int.clone(), role: Role::Parameter }).unwrap();
        }
        s
    }

    fn cs(src: &str) -> ClauseSet {
        parse_clauses(src, &sig()).unwrap()
    }

    #[test]
    fn failed_entailment_has_countermodel() {
        let c = SmtClient::default();
        let chain = Chain::new(vec![Level::from_set("h", &cs("x = 0\n"))]);
        let v = c.check_entailment(&chain, &cs("x = 1\n"));
        assert_eq!(v.status, Status::Sat);
        assert_eq!(v.model.unwrap().get("x"), Some("0"));
    }

    #[test]
    fn equivalence_examples() {
        let c = SmtClient::default();
        let bg = Chain::default();
        assert_eq!(c.check_equivalence(&bg, &cs("x <= y\n"), &cs("y >= x\n")), Equivalence::Equivalent);
        match c.check_equivalence(&bg, &cs("x < y\n"), &cs("x <= y\n")) {
            Equivalence::Inequivalent(m) => assert_eq!(m.get("x"), m.get("y")),
            e => panic!("{:?}", e),
        }
        let swapped = c.check_equivalence(&bg, &cs("x <= y\n"), &cs("x < y\n"));
        assert!(matches!(swapped, Equivalence::Inequivalent(_)));
    }
}
