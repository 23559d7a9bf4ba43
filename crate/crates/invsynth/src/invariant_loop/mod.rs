//! Iterated strengthening of a safety property into a universally
//! quantified inductive invariant: initiation and consecution checks over the
//! theory chain, symbol elimination on every violating disjunct, fixpoint
//! detection, fragment guards and the flatness and variable-count monitors.

mod classify;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

pub use classify::{apf_guard, classify_termination, predicts_apf, Fragment, Termination};

use crate::hierarchy::{unit_clauses, Chain, Level};
use crate::logic::{
    prime_clauses, skolemize_negation_with, Clause, ClauseSet, GroundConj, GuardedSystem, Name, Role, Signature,
    SignatureError, TermKind,
};
use crate::par::par_map;
use crate::smt::{ClientStats, Model, SmtClient, SolverVerdict, Status};
use crate::specfile::{certified, check_locality_class, validate_guards, Closure, Mode, ProblemSpec, TheoryLevel};
use crate::symbol_elim::{cleanup, eliminate_symbols, is_flat_nonground, verify_gamma, ElimMode, ElimRequest, ElimTrace};

pub const DEFAULT_MAX_ITERATIONS: usize = 20;

/// Which kept constants are eliminated on top of primed and non-kept symbols.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum EliminatePolicy {
    #[default]
    None,
    /// Kept constants that never occur below a kept function symbol.
    Unguarded,
    Explicit(Vec<Name>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopConfig {
    pub max_iterations: usize,
    pub mode: Mode,
    /// Kept symbols; `None` keeps every unprimed symbol.
    pub keep: Option<Vec<Name>>,
    pub eliminate: EliminatePolicy,
    pub apf_guard: bool,
    pub fixpoint_check: bool,
    /// Re-check every strengthening constraint against the query it refutes.
    pub verify: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            mode: Mode::Naive,
            keep: None,
            eliminate: EliminatePolicy::None,
            apf_guard: false,
            fixpoint_check: true,
            verify: false,
        }
    }
}

impl LoopConfig {
    /// Defaults overridden by the options block of `spec`.
    pub fn from_spec(spec: &ProblemSpec) -> LoopConfig {
        let o = &spec.options;
        LoopConfig {
            max_iterations: o.max_iterations.unwrap_or(DEFAULT_MAX_ITERATIONS),
            mode: o.mode.unwrap_or_default(),
            keep: o.keep.clone(),
            eliminate: if o.eliminate.is_empty() { EliminatePolicy::None } else { EliminatePolicy::Explicit(o.eliminate.clone()) },
            apf_guard: o.apf_guard.unwrap_or(false),
            ..LoopConfig::default()
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LoopError {
    #[error("max_iterations must be at least 1")]
    ZeroIterations,
    #[error(transparent)]
    Signature(#[from] SignatureError),
    #[error("`{0}` has no update block")]
    MissingUpdate(String),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoopOutcome {
    Invariant {
        #[serde(serialize_with = "clause_strings")]
        invariant: ClauseSet,
        iterations: usize,
    },
    NoUniversalInvariant { countermodel: Model, iteration: usize },
    Diverged { reason: String, iteration: usize },
    BudgetExhausted { iterations: usize, diagnostic: String },
    Unknown { reason: String, iteration: usize },
}

fn clause_strings<S: serde::Serializer>(cs: &ClauseSet, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(cs.clauses.iter().map(Clause::to_string))
}

/// Process exit codes shared by the command-line front end.
pub mod exit {
    pub const OK: i32 = 0;
    pub const NOT_INDUCTIVE: i32 = 1;
    pub const NO_UNIVERSAL_INVARIANT: i32 = 10;
    pub const BUDGET: i32 = 20;
    pub const UNKNOWN: i32 = 30;
    pub const SPEC_ERROR: i32 = 64;
}

impl LoopOutcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            LoopOutcome::Invariant { .. } => exit::OK,
            LoopOutcome::NoUniversalInvariant { .. } => exit::NO_UNIVERSAL_INVARIANT,
            LoopOutcome::Diverged { .. } | LoopOutcome::BudgetExhausted { .. } => exit::BUDGET,
            LoopOutcome::Unknown { .. } => exit::UNKNOWN,
        }
    }

    pub fn keyword(&self) -> &'static str {
        match self {
            LoopOutcome::Invariant { .. } => "invariant",
            LoopOutcome::NoUniversalInvariant { .. } => "no_universal_invariant",
            LoopOutcome::Diverged { .. } => "diverged",
            LoopOutcome::BudgetExhausted { .. } => "budget_exhausted",
            LoopOutcome::Unknown { .. } => "unknown",
        }
    }
}

/// A satisfiable disjunct of the negated goal together with the update
/// symbols it mentions.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub disjunct: GroundConj,
    pub updates: Vec<Name>,
    pub model: Option<Model>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Check {
    Holds,
    Fails(Vec<Violation>),
    Unknown(String),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LengthDiagnostics {
    /// Number of updated symbols.
    pub updates: usize,
    /// Largest number of cases of one update.
    pub max_cases: usize,
    /// Largest number of variables of a property clause.
    pub max_vars: usize,
    /// Growth factor bound on the clause count per iteration.
    pub growth_factor: f64,
}

/// One line of the trace.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub invariant: Vec<String>,
    pub initiation: String,
    pub consecution: String,
    pub violating_updates: Vec<String>,
    pub violations: Vec<String>,
    pub gamma: Vec<String>,
    pub gamma_clauses: usize,
    pub gamma_max_len: usize,
    pub gamma_max_vars: usize,
    pub max_coefficient: f64,
    pub clause_bound: Option<f64>,
    pub within_clause_bound: Option<bool>,
    pub apf: Option<Fragment>,
    pub apf_predicted: Option<bool>,
    pub verified: Option<bool>,
    pub fixpoint: Option<String>,
    pub alarms: Vec<String>,
    pub elimination: Vec<ElimTrace>,
    pub solver: ClientStats,
    pub millis: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Synthesis {
    pub outcome: LoopOutcome,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    pub length: LengthDiagnostics,
    /// Whether the flatness and variable-count hypotheses hold for this run.
    pub monitored: bool,
    pub alarms: Vec<String>,
    /// Levels whose locality could not be recognised.
    pub caveats: Vec<String>,
    pub keep: Vec<String>,
    pub eliminated: Vec<String>,
}

/// The problem instance prepared for the loop.
pub struct Problem<'a> {
    pub spec: &'a ProblemSpec,
    pub config: LoopConfig,
    pub client: &'a SmtClient,
    pub signature: Signature,
    pub keep: BTreeSet<Name>,
    pub eliminate: BTreeSet<Name>,
    theory: Vec<Level>,
    /// Theory clauses over base and kept symbols only.
    parameter_axioms: Vec<Clause>,
    /// Theory levels without the parameter axioms.
    extension: Vec<Level>,
    updates: Vec<Level>,
    guarded: BTreeMap<String, GuardedSystem>,
    updated: BTreeSet<Name>,
    certified_all: bool,
    pub caveats: Vec<String>,
}

fn clauses_symbols(cs: &[Clause]) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    for c in cs {
        c.collect_symbols(&mut out);
    }
    out
}

fn make_level(name: &str, clauses: Vec<Clause>, closure: Closure, sig: &Signature) -> Level {
    let tl = TheoryLevel { name: name.into(), clauses: ClauseSet::new(clauses.clone()), closure };
    let mut l = Level::new(name, clauses).with_closure(closure);
    l.local = check_locality_class(&tl, sig).is_local();
    l
}

fn update_level_name(f: &str) -> String {
    format!("update {}", f)
}

/// Kept constants that never occur as an argument of a kept function.
fn unguarded_constants(spec: &ProblemSpec, keep: &BTreeSet<Name>) -> BTreeSet<Name> {
    let mut all: Vec<Clause> = spec.theory().clauses;
    all.extend(spec.property.clauses.iter().cloned());
    all.extend(spec.init.clauses.iter().cloned());
    all.extend(spec.update_clauses().clauses);
    let mut guarded = BTreeSet::new();
    for c in &all {
        let mut subs = BTreeSet::new();
        for l in &c.lits {
            l.collect_subterms(&mut subs);
        }
        for t in &subs {
            if let TermKind::App(f, args) = t.kind() {
                if !args.is_empty() && keep.contains(f) {
                    for a in args {
                        let mut inner = BTreeSet::new();
                        a.collect_symbols(&mut inner);
                        guarded.extend(inner);
                    }
                }
            }
        }
    }
    spec.signature
        .functions()
        .filter(|d| d.args.is_empty() && keep.contains(&d.name) && d.role != Role::Base && !guarded.contains(&d.name))
        .map(|d| d.name.clone())
        .collect()
}

fn max_coefficient(cs: &ClauseSet) -> f64 {
    use num_traits::{Signed, ToPrimitive};
    let mut best = crate::logic::q(0);
    for c in &cs.clauses {
        for l in &c.lits {
            for t in l.terms() {
                let (parts, k) = t.linear_parts();
                for v in parts.iter().map(|(c, _)| c.abs()).chain(std::iter::once(k.abs())) {
                    if v > best {
                        best = v;
                    }
                }
            }
        }
    }
    best.to_f64().unwrap_or(f64::INFINITY)
}

impl<'a> Problem<'a> {
    pub fn new(spec: &'a ProblemSpec, config: LoopConfig, client: &'a SmtClient) -> Result<Problem<'a>, LoopError> {
        if config.max_iterations == 0 {
            return Err(LoopError::ZeroIterations);
        }
        let sig0 = &spec.signature;
        for f in sig0.updatable() {
            if !spec.updates.iter().any(|u| &u.function == f) {
                return Err(LoopError::MissingUpdate(f.to_string()));
            }
        }
        let keep: BTreeSet<Name> = match &config.keep {
            Some(k) => k.iter().cloned().collect(),
            None => sig0
                .functions()
                .filter(|d| matches!(d.role, Role::Parameter | Role::Extension))
                .map(|d| d.name.clone())
                .collect(),
        };
        let signature = sig0.with_keep(keep.iter().map(|n| n.as_ref()))?;
        let eliminate: BTreeSet<Name> = match &config.eliminate {
            EliminatePolicy::None => BTreeSet::new(),
            EliminatePolicy::Unguarded => unguarded_constants(spec, &keep),
            EliminatePolicy::Explicit(v) => {
                for n in v {
                    if sig0.role(n).is_none() {
                        return Err(SignatureError::UnknownSymbol(n.to_string()).into());
                    }
                }
                v.iter().cloned().collect()
            }
        };
        let kept = |n: &Name| (keep.contains(n) && !eliminate.contains(n)) || signature.role(n) == Some(Role::Base);
        let mut theory = Vec::new();
        let mut extension = Vec::new();
        let mut parameter_axioms = Vec::new();
        let mut caveats = Vec::new();
        let mut seen: BTreeSet<Name> = BTreeSet::new();
        for tl in &spec.levels {
            let level = make_level(&tl.name, tl.clauses.clauses.clone(), tl.closure, sig0);
            if !level.local {
                caveats.push(format!("level `{}`: {:?}", tl.name, check_locality_class(tl, sig0)));
            }
            let (p, e): (Vec<Clause>, Vec<Clause>) =
                tl.clauses.clauses.iter().cloned().partition(|c| clauses_symbols(std::slice::from_ref(c)).iter().all(kept));
            parameter_axioms.extend(p);
            if !e.is_empty() {
                // Instantiation is driven by the symbols this level introduces.
                let keys: BTreeSet<Name> = clauses_symbols(&e)
                    .into_iter()
                    .filter(|n| !kept(n) && !seen.contains(n) && sig0.function(n).is_some_and(|d| !d.args.is_empty()))
                    .collect();
                let mut l = Level::new(&tl.name, e).with_closure(tl.closure).with_keys(keys);
                l.local = level.local;
                extension.push(l);
            }
            seen.extend(clauses_symbols(&tl.clauses.clauses));
            theory.push(level);
        }
        let obligations = validate_guards(spec, client);
        let mut updates = Vec::new();
        let mut guarded = BTreeMap::new();
        let mut certified_all = true;
        for u in &spec.updates {
            let ok = certified(&obligations, &u.function);
            certified_all &= ok;
            let sys = u.system(ok);
            let name = update_level_name(&u.function);
            let primed = sig0.prime_of(&u.function).cloned().ok_or_else(|| SignatureError::UnknownSymbol(u.function.to_string()))?;
            let mut l = Level::new(&name, sys.clauses());
            if !u.vars.is_empty() {
                l = l.with_keys([primed]);
            }
            if !ok {
                caveats.push(format!("update `{}`: guards not certified exclusive and exhaustive", u.function));
            }
            if ok && !u.vars.is_empty() {
                guarded.insert(name, sys);
            }
            updates.push(l);
        }
        Ok(Problem {
            spec,
            config,
            client,
            signature,
            keep,
            eliminate,
            theory,
            parameter_axioms,
            extension,
            updates,
            guarded,
            updated: spec.updated(),
            certified_all,
            caveats,
        })
    }

    fn closure(&self) -> Closure {
        if self.spec.uses_apf() {
            Closure::Apf
        } else {
            Closure::Identity
        }
    }

    fn candidate_level(&self, i: &ClauseSet) -> Level {
        make_level("invariant", i.clauses.clone(), self.closure(), &self.spec.signature)
    }

    /// Whether `Init` entails `i`.
    pub fn check_initiation(&self, i: &ClauseSet) -> SolverVerdict {
        let mut levels = self.theory.clone();
        levels.push(make_level("init", self.spec.init.clauses.clone(), self.closure(), &self.spec.signature));
        self.client.check_entailment(&Chain::new(levels), i)
    }

    fn consecution_chain(&self, i: &ClauseSet) -> Chain {
        let mut levels = self.theory.clone();
        levels.push(self.candidate_level(i));
        levels.extend(self.updates.iter().cloned());
        Chain::new(levels)
    }

    /// Whether `i` and the updates entail the primed copy of `goal`; every
    /// satisfiable disjunct of its negation is reported.
    pub fn check_consecution(&self, i: &ClauseSet, goal: &ClauseSet, prefix: &str) -> Result<Check, LoopError> {
        let primed = prime_clauses(goal, &self.updated, &self.spec.signature)?;
        let chain = self.consecution_chain(i);
        let disjuncts = skolemize_negation_with(&primed, prefix);
        let verdicts = par_map(&disjuncts, |g| self.client.check_ground(&chain, &unit_clauses(g), true));
        let mut out = Vec::new();
        for (g, v) in disjuncts.into_iter().zip(verdicts) {
            match v.status {
                Status::Unsat => {}
                Status::Sat => {
                    let syms = g.symbols();
                    let updates = self
                        .updated
                        .iter()
                        .filter(|f| self.spec.signature.prime_of(f).is_some_and(|p| syms.contains(p)))
                        .cloned()
                        .collect();
                    out.push(Violation { disjunct: g, updates, model: v.model });
                }
                s => return Ok(Check::Unknown(format!("{} on `{}`: {}", s.keyword(), g, v.diagnostic.trim()))),
            }
        }
        Ok(if out.is_empty() { Check::Holds } else { Check::Fails(out) })
    }

    pub fn request(&self, i: &ClauseSet, v: &Violation) -> ElimRequest {
        let mut levels = self.extension.clone();
        let mode = match self.config.mode {
            Mode::Naive => {
                levels.push(self.candidate_level(i));
                ElimMode::Full
            }
            Mode::Refined => ElimMode::Split,
        };
        levels.extend(self.updates.iter().cloned());
        let mut req = ElimRequest::new(self.signature.clone(), Chain::new(levels), unit_clauses(&v.disjunct), self.keep.clone());
        req.parameter_axioms = self.parameter_axioms.clone();
        req.eliminate = self.eliminate.clone();
        req.guarded = self.guarded.clone();
        req.var_names = v.disjunct.skolems.iter().map(|s| (s.constant.clone(), s.var.clone())).collect();
        req.mode = mode;
        req
    }

    /// Elimination requests for one strengthening step of the property: one
    /// per satisfiable disjunct of the negated primed property or, for a
    /// problem without updates, one per disjunct of the negated
    /// property over the theory.
    pub fn property_requests(&self) -> Result<Vec<ElimRequest>, String> {
        let psi = &self.spec.property;
        if self.spec.updates.is_empty() {
            let mode = match self.config.mode {
                Mode::Naive => ElimMode::Full,
                Mode::Refined => ElimMode::Split,
            };
            return Ok(skolemize_negation_with(psi, "sk")
                .iter()
                .map(|g| {
                    let mut req =
                        ElimRequest::new(self.signature.clone(), Chain::new(self.extension.clone()), unit_clauses(g), self.keep.clone());
                    req.parameter_axioms = self.parameter_axioms.clone();
                    req.eliminate = self.eliminate.clone();
                    req.var_names = g.skolems.iter().map(|s| (s.constant.clone(), s.var.clone())).collect();
                    req.mode = mode;
                    req
                })
                .collect());
        }
        match self.check_consecution(psi, psi, "sk").map_err(|e| e.to_string())? {
            Check::Holds => Ok(Vec::new()),
            Check::Unknown(r) => Err(r),
            Check::Fails(vs) => Ok(vs.iter().map(|v| self.request(psi, v)).collect()),
        }
    }

    /// Symbol elimination on every violation; the conjunction of the results.
    pub fn strengthen(&self, i: &ClauseSet, violations: &[Violation]) -> Result<Strengthening, String> {
        let results = par_map(violations, |v| {
            let req = self.request(i, v);
            let res = eliminate_symbols(&req).map_err(|e| format!("symbol elimination on `{}`: {}", v.disjunct, e))?;
            let verified = self.config.verify.then(|| verify_gamma(&req, &res.gamma, self.client));
            Ok::<_, String>((res, verified))
        });
        let mut clauses = Vec::new();
        let mut traces = Vec::new();
        let mut verified = None;
        for r in results {
            let (res, v) = r?;
            clauses.extend(res.gamma.clauses.iter().cloned());
            traces.push(res.trace);
            if let Some(v) = v {
                if !v.status.is_decided() {
                    return Err(format!("verification: {} {}", v.status.keyword(), v.diagnostic.trim()));
                }
                verified = Some(verified.unwrap_or(true) && v.unsat());
            }
        }
        Ok(Strengthening { gamma: ClauseSet::new(cleanup(clauses)), traces, verified })
    }

    /// Both inductiveness conditions for `i`, checked from scratch.
    pub fn recheck(&self, i: &ClauseSet) -> Result<Check, LoopError> {
        let v = self.check_initiation(i);
        match v.status {
            Status::Unsat => {}
            Status::Sat => {
                return Ok(Check::Fails(vec![Violation { disjunct: GroundConj::default(), updates: vec![], model: v.model }]))
            }
            s => return Ok(Check::Unknown(format!("initiation {}: {}", s.keyword(), v.diagnostic.trim()))),
        }
        self.check_consecution(i, i, "rc")
    }

    /// Whether the preconditions of the flatness and variable-count
    /// monitors hold.
    pub fn monitored(&self) -> bool {
        let sig = &self.spec.signature;
        let all_kept = sig.functions().filter(|d| d.role != Role::Primed && d.role != Role::Base).all(|d| self.keep.contains(&d.name));
        let upd = self.spec.update_clauses();
        all_kept
            && self.eliminate.is_empty()
            && self.certified_all
            && self.spec.property.is_flat(sig)
            && self.spec.property.is_linear(sig)
            && upd.is_flat(sig)
            && upd.is_linear(sig)
    }

    pub fn length_diagnostics(&self) -> LengthDiagnostics {
        let updates = self.spec.updates.len();
        let max_cases = self.spec.updates.iter().map(|u| u.cases.len()).max().unwrap_or(0);
        let max_vars = self.spec.property.max_vars();
        let m = max_vars.max(1) as f64;
        let growth_factor = updates.max(1) as f64 * (max_cases.max(1) as f64).powi(max_vars as i32) * m * m;
        LengthDiagnostics { updates, max_cases, max_vars, growth_factor }
    }
}

pub struct Strengthening {
    pub gamma: ClauseSet,
    pub traces: Vec<ElimTrace>,
    pub verified: Option<bool>,
}

fn strings(cs: &ClauseSet) -> Vec<String> {
    cs.clauses.iter().map(Clause::to_string).collect()
}

fn monitor_alarms(gamma: &ClauseSet, m: usize) -> Vec<String> {
    let mut out = Vec::new();
    for c in &gamma.clauses {
        if !is_flat_nonground(c) {
            out.push(format!("clause not flat: {}", c));
        }
        if c.num_vars() > m {
            out.push(format!("clause has {} variables, more than {}: {}", c.num_vars(), m, c));
        }
    }
    out
}

fn growth_diagnostic(records: &[IterationRecord]) -> String {
    let coeffs: Vec<f64> = records.iter().filter(|r| !r.gamma.is_empty()).map(|r| r.max_coefficient).collect();
    let counts: Vec<usize> = records.iter().map(|r| r.invariant.len()).collect();
    let growing = coeffs.len() >= 3 && coeffs.windows(2).rev().take(2).all(|w| w[1] > w[0]);
    if growing {
        format!("growing coefficients in generated constraints: {:?}", coeffs)
    } else {
        format!("invariant clause counts per iteration: {:?}", counts)
    }
}

/// Runs the strengthening loop.
pub fn synthesize(spec: &ProblemSpec, config: LoopConfig, client: &SmtClient) -> Result<Synthesis, LoopError> {
    let problem = Problem::new(spec, config, client)?;
    Ok(run(&problem))
}

pub fn run(p: &Problem<'_>) -> Synthesis {
    let monitored = p.monitored();
    let length = p.length_diagnostics();
    let m = length.max_vars;
    let mut syn = Synthesis {
        outcome: LoopOutcome::BudgetExhausted { iterations: 0, diagnostic: String::new() },
        records: Vec::new(),
        termination: classify_termination(p.spec, &p.keep),
        length: length.clone(),
        monitored,
        alarms: Vec::new(),
        caveats: p.caveats.clone(),
        keep: p.keep.iter().map(|n| n.to_string()).collect(),
        eliminated: p.eliminate.iter().map(|n| n.to_string()).collect(),
    };
    let mut inv = p.spec.property.clone();
    if inv.is_empty() {
        syn.outcome = LoopOutcome::Invariant { invariant: inv, iterations: 1 };
        return syn;
    }
    let mut last_gamma: Option<ClauseSet> = None;
    for n in 1..=p.config.max_iterations {
        let start = Instant::now();
        let before = p.client.stats();
        let mut rec = IterationRecord { iteration: n, invariant: strings(&inv), ..Default::default() };
        let finish = |rec: &mut IterationRecord| {
            let after = p.client.stats();
            rec.solver = ClientStats {
                calls: after.calls - before.calls,
                sat: after.sat - before.sat,
                unsat: after.unsat - before.unsat,
                undecided: after.undecided - before.undecided,
                wall_ms: after.wall_ms - before.wall_ms,
            };
            rec.millis = start.elapsed().as_secs_f64() * 1000.0;
        };

        // Initiation, for the clauses added since the last iteration.
        let fresh = last_gamma.clone().unwrap_or_else(|| inv.clone());
        let v = p.check_initiation(&fresh);
        rec.initiation = v.status.keyword().to_string();
        match v.status {
            Status::Unsat => {}
            Status::Sat => {
                finish(&mut rec);
                syn.records.push(rec);
                syn.outcome = LoopOutcome::NoUniversalInvariant { countermodel: v.model.unwrap_or_default(), iteration: n };
                return syn;
            }
            s => {
                finish(&mut rec);
                syn.records.push(rec);
                syn.outcome =
                    LoopOutcome::Unknown { reason: format!("initiation {}: {}", s.keyword(), v.diagnostic.trim()), iteration: n };
                return syn;
            }
        }

        // Consecution; in refined mode only for the last strengthening first.
        let goal = match (p.config.mode, &last_gamma) {
            (Mode::Refined, Some(g)) => g.clone(),
            _ => inv.clone(),
        };
        let prefix = format!("sk{}", n);
        let mut check = match p.check_consecution(&inv, &goal, &prefix) {
            Ok(c) => c,
            Err(e) => {
                syn.outcome = LoopOutcome::Unknown { reason: e.to_string(), iteration: n };
                return syn;
            }
        };
        if check == Check::Holds && goal != inv {
            check = p.check_consecution(&inv, &inv, &prefix).unwrap_or_else(|e| Check::Unknown(e.to_string()));
        }
        let violations = match check {
            Check::Holds => {
                rec.consecution = "holds".into();
                let outcome = match p.recheck(&inv) {
                    Ok(Check::Holds) => LoopOutcome::Invariant { invariant: inv.clone(), iterations: n },
                    Ok(Check::Fails(_)) => {
                        LoopOutcome::Unknown { reason: "independent re-check found a violation".into(), iteration: n }
                    }
                    Ok(Check::Unknown(r)) => LoopOutcome::Unknown { reason: format!("re-check: {}", r), iteration: n },
                    Err(e) => LoopOutcome::Unknown { reason: e.to_string(), iteration: n },
                };
                finish(&mut rec);
                syn.records.push(rec);
                syn.outcome = outcome;
                return syn;
            }
            Check::Unknown(r) => {
                rec.consecution = "unknown".into();
                finish(&mut rec);
                syn.records.push(rec);
                syn.outcome = LoopOutcome::Unknown { reason: format!("consecution {}", r), iteration: n };
                return syn;
            }
            Check::Fails(v) => v,
        };
        rec.consecution = "fails".into();
        let mut fs: BTreeSet<String> = BTreeSet::new();
        for v in &violations {
            fs.extend(v.updates.iter().map(|f| f.to_string()));
        }
        rec.violating_updates = fs.into_iter().collect();
        rec.violations = violations.iter().map(|v| v.disjunct.to_string()).collect();
        if p.spec.uses_apf() {
            rec.apf_predicted = Some(violations.iter().all(|v| predicts_apf(&v.disjunct, &p.spec.signature)));
        }

        // Strengthening.
        let s = match p.strengthen(&inv, &violations) {
            Ok(s) => s,
            Err(r) => {
                finish(&mut rec);
                syn.records.push(rec);
                syn.outcome = LoopOutcome::Unknown { reason: r, iteration: n };
                return syn;
            }
        };
        let gamma = s.gamma;
        rec.elimination = s.traces;
        rec.verified = s.verified;
        rec.gamma = strings(&gamma);
        rec.gamma_clauses = gamma.len();
        rec.gamma_max_len = gamma.max_len();
        rec.gamma_max_vars = gamma.max_vars();
        rec.max_coefficient = max_coefficient(&gamma);
        if let Some(prev) = syn.records.last().filter(|r| r.gamma_clauses > 0) {
            let bound = length.growth_factor * prev.gamma_clauses as f64;
            rec.clause_bound = Some(bound);
            rec.within_clause_bound = Some(gamma.len() as f64 <= bound);
        }
        if monitored {
            rec.alarms = monitor_alarms(&gamma, m);
            syn.alarms.extend(rec.alarms.iter().map(|a| format!("iteration {}: {}", n, a)));
        }
        if s.verified == Some(false) {
            finish(&mut rec);
            syn.records.push(rec);
            syn.outcome = LoopOutcome::Unknown { reason: "strengthening constraint failed verification".into(), iteration: n };
            return syn;
        }
        if p.config.apf_guard {
            let frag = apf_guard(&gamma, &p.spec.signature);
            rec.apf = Some(frag.clone());
            if let Fragment::OutOfFragment(r) = frag {
                finish(&mut rec);
                syn.records.push(rec);
                syn.outcome = LoopOutcome::Diverged { reason: format!("left the array property fragment: {}", r), iteration: n };
                return syn;
            }
        }

        // Fixpoint detection.
        if gamma.is_empty() {
            rec.fixpoint = Some("empty".into());
            finish(&mut rec);
            syn.records.push(rec);
            syn.outcome = LoopOutcome::Diverged { reason: "no progress: empty strengthening".into(), iteration: n };
            return syn;
        }
        if p.config.fixpoint_check {
            let mut chain = Chain::new(p.theory.clone());
            chain.push_outer(p.candidate_level(&inv));
            let v = p.client.check_entailment(&chain, &gamma);
            rec.fixpoint = Some(v.status.keyword().to_string());
            if v.unsat() {
                finish(&mut rec);
                syn.records.push(rec);
                syn.outcome = LoopOutcome::Diverged { reason: "no progress: the invariant already entails the strengthening".into(), iteration: n };
                return syn;
            }
        }

        let mut next = inv.clauses.clone();
        next.extend(gamma.clauses.iter().filter(|c| !inv.clauses.contains(c)).cloned());
        inv = ClauseSet::new(next);
        last_gamma = Some(gamma);
        finish(&mut rec);
        syn.records.push(rec);
    }
    let diagnostic = growth_diagnostic(&syn.records);
    syn.outcome = LoopOutcome::BudgetExhausted { iterations: p.config.max_iterations, diagnostic };
    syn
}

/// Trace as JSON lines, one record per iteration.
pub fn trace_lines(syn: &Synthesis) -> String {
    let mut out = String::new();
    for r in &syn.records {
        out.push_str(&serde_json::to_string(r).unwrap_or_default());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests;
