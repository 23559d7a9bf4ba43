//! Symbol elimination in theory extensions: reduce a ground query over a
//! chain of extensions to the base theory, eliminate every constant that
//! does not stand for a parameter term, restore parameter terms and return
//! the negation as a universally closed clause set.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::hierarchy::{self, Chain, HierarchyError, Level, Purifier};
use crate::logic::{
    product, to_dnf_guarded, Clause, ClauseSet, Dnf, GuardError, GuardedSystem, Literal, Name, Role,
    Signature, Term, TermKind,
};
use crate::qelim::{self, Conj, QeConfig, QeError};
use crate::smt::{SmtClient, SolverVerdict};

pub const DEFAULT_CAP: usize = 50_000;
const PRUNE_LIMIT: usize = 4096;
const CONJOIN_WORK_FACTOR: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ElimError {
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error(transparent)]
    Qe(#[from] QeError),
    #[error(transparent)]
    Guard(#[from] GuardError),
    #[error("normal form exceeds {0} disjuncts before quantifier elimination")]
    Blowup(usize),
    #[error("result mentions `{0}`, which is neither a base nor a kept symbol")]
    Impure(String),
    #[error("`{0}` is both kept and eliminated")]
    KeepConflict(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum ElimMode {
    /// Parameter axioms are instantiated together with the extension.
    #[default]
    Full,
    /// Parameter axioms are left out of instantiation and elimination.
    Split,
}

#[derive(Clone, Debug)]
pub struct ElimRequest {
    pub signature: Signature,
    /// Axioms over base and kept symbols only.
    pub parameter_axioms: Vec<Clause>,
    /// Extension levels, innermost first.
    pub chain: Chain,
    /// Ground query clauses.
    pub goal: Vec<Clause>,
    pub keep: BTreeSet<Name>,
    /// Constants, or function symbols, eliminated even though kept.
    pub eliminate: BTreeSet<Name>,
    /// Certified case definitions, keyed by the name of the level holding
    /// their clauses; their instances expand by case choice.
    pub guarded: BTreeMap<String, GuardedSystem>,
    /// Preferred variable names for generalized constants.
    pub var_names: BTreeMap<Name, Name>,
    pub mode: ElimMode,
    pub cap: usize,
}

impl ElimRequest {
    pub fn new(signature: Signature, chain: Chain, goal: Vec<Clause>, keep: BTreeSet<Name>) -> ElimRequest {
        ElimRequest {
            signature,
            parameter_axioms: Vec::new(),
            chain,
            goal,
            keep,
            eliminate: BTreeSet::new(),
            guarded: BTreeMap::new(),
            var_names: BTreeMap::new(),
            mode: ElimMode::Full,
            cap: DEFAULT_CAP,
        }
    }

    /// Base symbols and kept symbols not marked for elimination.
    pub fn is_kept(&self, name: &str) -> bool {
        if self.eliminate.contains(name) {
            return false;
        }
        self.keep.contains(name) || self.signature.role(name) == Some(Role::Base)
    }

    /// Levels used for instantiation: parameter axioms first in full mode.
    pub fn working_chain(&self) -> Chain {
        let mut levels = Vec::new();
        if self.mode == ElimMode::Full && !self.parameter_axioms.is_empty() {
            levels.push(Level::new("parameters", self.parameter_axioms.clone()));
        }
        levels.extend(self.chain.levels.iter().cloned());
        Chain::new(levels)
    }
}

/// Per-step artifacts of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ElimTrace {
    pub instances: Vec<String>,
    pub definitions: Vec<String>,
    pub congruence: usize,
    pub kept_constants: Vec<String>,
    pub existential: Vec<String>,
    pub generalized: Vec<(String, String)>,
    pub disjuncts_before_qe: usize,
    pub disjuncts_after_qe: usize,
    pub ground_terms: usize,
    pub instance_bound: f64,
    pub within_bound: bool,
    pub locality_assumed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElimResult {
    pub gamma: ClauseSet,
    pub trace: ElimTrace,
}

fn constants_of(lits: &[Literal], out: &mut BTreeSet<Term>) {
    let mut subs = BTreeSet::new();
    for l in lits {
        l.collect_subterms(&mut subs);
    }
    out.extend(subs.into_iter().filter(|t| matches!(t.kind(), TermKind::App(_, a) if a.is_empty())));
}

fn dedupe(dnf: Dnf) -> Dnf {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for mut c in dnf {
        c.sort();
        c.dedup();
        if seen.insert(c.clone()) {
            out.push(c);
        }
    }
    out
}

/// Drops disjuncts containing another disjunct.
fn absorb(dnf: Dnf) -> Dnf {
    let mut dnf = dedupe(dnf);
    dnf.sort_by_key(Vec::len);
    let mut out: Vec<Vec<Literal>> = Vec::new();
    for c in dnf {
        let set: BTreeSet<&Literal> = c.iter().collect();
        if !out.iter().any(|o| o.iter().all(|l| set.contains(l))) {
            out.push(c);
        }
    }
    out
}

fn feasible(c: &[Literal]) -> bool {
    Conj::from_literals(c).is_some_and(|c| qelim::lra_feasible(&c))
}

/// Conjunction of DNF factors, smallest first, pruned as it grows.
fn conjoin(mut factors: Vec<Dnf>, cap: usize) -> Result<Dnf, ElimError> {
    factors.sort_by_key(Vec::len);
    let mut acc: Dnf = vec![Vec::new()];
    // Candidates examined across all products, pruned ones included.
    let mut work = 0usize;
    for f in factors {
        work = work.saturating_add(acc.len().saturating_mul(f.len()));
        if work > cap.saturating_mul(CONJOIN_WORK_FACTOR) {
            return Err(ElimError::Blowup(cap));
        }
        acc = product(&acc, &f, cap).map_err(|_| ElimError::Blowup(cap))?;
        // Pruning is quadratic; past a few thousand disjuncts the cap decides.
        if acc.len() > 32 && acc.len() <= PRUNE_LIMIT {
            acc = absorb(acc);
            acc.retain(|c| feasible(c));
        } else if acc.len() > PRUNE_LIMIT {
            acc = dedupe(acc);
        }
        if acc.is_empty() {
            break;
        }
    }
    Ok(if acc.len() <= PRUNE_LIMIT { absorb(acc) } else { acc })
}

/// Canonical orientation of a comparison: integer strict bounds become
/// non-strict, and `>`/`>=` are flipped to `<`/`<=`.
pub fn tidy_literal(l: &Literal) -> Literal {
    use crate::logic::{q, Atom, Rel};
    let Atom::Cmp(r, a, b) = &l.atom else { return l.clone() };
    if !l.positive || !a.sort().is_arith() {
        return l.clone();
    }
    let int = a.sort().is_int();
    match (r, int) {
        (Rel::Lt, true) => Literal::cmp(Rel::Le, a.clone(), b.add_const(&q(-1))),
        (Rel::Gt, true) => Literal::cmp(Rel::Le, b.clone(), a.add_const(&q(-1))),
        (Rel::Gt, false) => Literal::cmp(Rel::Lt, b.clone(), a.clone()),
        (Rel::Ge, _) => Literal::cmp(Rel::Le, b.clone(), a.clone()),
        _ => l.clone(),
    }
}

/// Removes tautologies and syntactically subsumed clauses.
pub fn cleanup(clauses: Vec<Clause>) -> Vec<Clause> {
    let mut cs: Vec<Clause> = clauses.iter().filter_map(Clause::simplify).collect();
    cs.sort_by_key(|c| c.lits.len());
    let mut out: Vec<Clause> = Vec::new();
    for c in cs {
        let set: BTreeSet<&Literal> = c.lits.iter().collect();
        if !out.iter().any(|o| o.lits.iter().all(|l| set.contains(l))) {
            out.push(c);
        }
    }
    out
}

fn fresh_var_name(base: &str, taken: &BTreeSet<String>) -> String {
    let base = base.trim_end_matches('\'');
    if !taken.contains(base) {
        return base.to_string();
    }
    (1..).map(|i| format!("{}{}", base, i)).find(|n| !taken.contains(n)).unwrap_or_default()
}

/// Runs the five elimination steps on `req`.
pub fn eliminate_symbols(req: &ElimRequest) -> Result<ElimResult, ElimError> {
    if let Some(n) = req.keep.iter().find(|n| req.signature.role(n) == Some(Role::Primed)) {
        return Err(ElimError::KeepConflict(n.to_string()));
    }
    let mut trace = ElimTrace::default();
    let chain = req.working_chain();
    trace.locality_assumed = chain.locality_assumed();

    // Step 1: instances and purification.
    let instances = hierarchy::instantiate_chain(&chain, &req.goal, req.cap.max(hierarchy::DEFAULT_INSTANCE_CAP))?;
    let mut used = BTreeSet::new();
    for c in req.goal.iter().chain(instances.iter().map(|i| &i.result)) {
        c.collect_symbols(&mut used);
    }
    used.extend(req.signature.functions().map(|d| d.name.clone()));
    let mut pur = Purifier::new(used);
    let mut factors: Vec<Dnf> = Vec::new();
    let mut guarded_args: BTreeMap<String, Vec<Vec<Term>>> = BTreeMap::new();
    for c in &req.goal {
        factors.push(pur.clause(c).lits.into_iter().map(|l| vec![l]).collect());
    }
    for i in &instances {
        trace.instances.push(format!("[{}#{}] {}", i.level, i.clause, i.result));
        if let Some(sys) = req.guarded.get(&i.level) {
            let args: Vec<Term> = sys
                .vars
                .iter()
                .map(|(x, _)| i.subst.iter().find(|(y, _)| y == x).map(|(_, t)| t.clone()))
                .collect::<Option<Vec<_>>>()
                .unwrap_or_default();
            if args.len() == sys.vars.len() {
                let e = guarded_args.entry(i.level.clone()).or_default();
                if !e.contains(&args) {
                    e.push(args);
                }
                continue;
            }
        }
        factors.push(pur.clause(&i.result).lits.into_iter().map(|l| vec![l]).collect());
    }
    for (level, args) in &guarded_args {
        let sys = &req.guarded[level];
        let dnf = to_dnf_guarded(sys, args, req.cap)?;
        factors.push(dnf.iter().map(|c| c.iter().map(|l| pur.literal(l)).collect()).collect());
    }
    let total_terms = hierarchy::ground_ext_terms(req.goal.iter().chain(instances.iter().map(|i| &i.result))).len();
    let occ = chain
        .levels
        .iter()
        .flat_map(|l| l.clauses.iter())
        .map(|c| {
            let mut subs = BTreeSet::new();
            for l in &c.lits {
                l.collect_subterms(&mut subs);
            }
            subs.iter().filter(|t| !t.is_ground() && !t.args().is_empty()).count()
        })
        .max()
        .unwrap_or(0);
    let axioms: usize = chain.levels.iter().map(|l| l.clauses.len()).sum();
    trace.ground_terms = total_terms;
    trace.instance_bound = (total_terms.max(1) as f64).powi(occ as i32) * axioms.max(1) as f64;
    trace.within_bound = instances.len() as f64 <= trace.instance_bound;

    // Step 2: partition constants.
    let defs = pur.defs().to_vec();
    let mut eliminated_defs: BTreeSet<Term> = BTreeSet::new();
    let mut arg_constants: BTreeSet<Term> = BTreeSet::new();
    let def_constants: BTreeSet<Term> = defs.iter().map(|d| d.constant.clone()).collect();
    for d in &defs {
        let mut args = BTreeSet::new();
        for a in &d.args {
            a.collect_subterms(&mut args);
        }
        let depends = args.iter().any(|a| eliminated_defs.contains(a) || (a.is_constant() && !def_constants.contains(a) && req.eliminate.contains(a.head().map(|h| h.as_ref()).unwrap_or(""))));
        if !req.is_kept(&d.head) || depends {
            eliminated_defs.insert(d.constant.clone());
        } else {
            arg_constants.extend(args.into_iter().filter(|a| a.is_constant() && !def_constants.contains(a)));
        }
    }
    let con0 = pur.con0(&[], &|h| !req.is_kept(h));
    let con0: Vec<Clause> = con0
        .into_iter()
        .filter(|c| c.lits.iter().any(|l| {
            let mut s = BTreeSet::new();
            constants_of(std::slice::from_ref(l), &mut s);
            s.iter().any(|t| eliminated_defs.contains(t))
        }))
        .collect();
    trace.congruence = con0.len();
    for c in &con0 {
        factors.push(c.lits.iter().map(|l| vec![l.clone()]).collect());
    }
    for d in &defs {
        trace.definitions.push(format!("{} = {}", d.constant, d.term));
    }
    let mut all_constants = BTreeSet::new();
    for f in &factors {
        for c in f {
            constants_of(c, &mut all_constants);
        }
    }
    all_constants.extend(arg_constants.iter().cloned());
    let mut existential: Vec<Term> = Vec::new();
    let mut generalize: Vec<Term> = Vec::new();
    for t in &all_constants {
        let name = t.head().cloned().unwrap_or_else(|| "".into());
        if def_constants.contains(t) {
            if eliminated_defs.contains(t) {
                existential.push(t.clone());
            } else {
                trace.kept_constants.push(t.to_string());
            }
        } else if req.eliminate.contains(&name) {
            existential.push(t.clone());
        } else if req.is_kept(&name) {
            trace.kept_constants.push(t.to_string());
        } else if arg_constants.contains(t) {
            generalize.push(t.clone());
        } else {
            existential.push(t.clone());
        }
    }
    trace.existential = existential.iter().map(Term::to_string).collect();

    // Step 3: quantifier elimination over the DNF.
    let dnf = conjoin(factors, req.cap)?;
    trace.disjuncts_before_qe = dnf.len();
    let cfg = QeConfig { cap: req.cap, ..QeConfig::default() };
    let conjs = qelim::eliminate_to_conjs(&existential, &dnf, &cfg)?;
    trace.disjuncts_after_qe = conjs.len();

    // Step 4: restore parameter terms, generalize argument constants.
    let mut restore: BTreeMap<Term, Term> = BTreeMap::new();
    for d in &defs {
        if !eliminated_defs.contains(&d.constant) {
            restore.insert(d.constant.clone(), d.term.clone());
        }
    }
    let mut taken: BTreeSet<String> = BTreeSet::new();
    let mut symbols = BTreeSet::new();
    for c in &conjs {
        for l in c.to_literals() {
            l.replace(&restore).collect_symbols(&mut symbols);
        }
    }
    taken.extend(symbols.iter().map(|s| s.to_string()));
    let mut gen_map: BTreeMap<Term, Term> = BTreeMap::new();
    for t in &generalize {
        let name = t.head().cloned().unwrap_or_else(|| "y".into());
        let base = req.var_names.get(&name).cloned().unwrap_or(name);
        let v = fresh_var_name(&base, &taken);
        taken.insert(v.clone());
        trace.generalized.push((t.to_string(), v.clone()));
        gen_map.insert(t.clone(), Term::var(v.into(), t.sort().clone()));
    }

    // Step 5: negate and close universally.
    let mut clauses = Vec::new();
    for c in &conjs {
        let lits: Vec<Literal> =
            c.to_literals().iter().map(|l| tidy_literal(&l.replace(&restore).replace(&gen_map).negate())).collect();
        clauses.push(Clause::new(lits));
    }
    let gamma = ClauseSet::new(cleanup(clauses));
    for s in gamma.symbols() {
        if !req.is_kept(&s) {
            return Err(ElimError::Impure(s.to_string()));
        }
    }
    Ok(ElimResult { gamma, trace })
}

/// Checks that `gamma` together with the axioms refutes the query.
pub fn verify_gamma(req: &ElimRequest, gamma: &ClauseSet, client: &SmtClient) -> SolverVerdict {
    let mut levels = vec![Level::new("parameters", req.parameter_axioms.clone())];
    levels.extend(req.chain.levels.iter().cloned());
    levels.push(Level::from_set("constraint", gamma).unverified());
    client.check_ground(&Chain::new(levels), &req.goal, true)
}

/// Whether the clause is free of extension terms below other extension
/// terms containing variables, and every variable-carrying application has
/// variables as its direct arguments.
pub fn is_flat_nonground(c: &Clause) -> bool {
    let mut subs = BTreeSet::new();
    for l in &c.lits {
        l.collect_subterms(&mut subs);
    }
    subs.iter().filter(|t| !t.args().is_empty() && !t.is_ground()).all(|t| t.args().iter().all(|a| a.as_var().is_some() || a.is_ground()))
}
