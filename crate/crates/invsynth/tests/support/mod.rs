//! Corpus loading and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Duration;

use invsynth::hierarchy::{Chain, Level};
use invsynth::invariant_loop::{EliminatePolicy, LoopConfig, Problem};
use invsynth::logic::{Atom, Clause, ClauseSet, Literal, Name, Rel, Term, TermKind, Q};
use invsynth::smt::{SmtClient, SolverConfig};
use invsynth::specfile::sidecar::{parse_sidecar, ExpectedRun};
use invsynth::specfile::{parse, parse_clauses, ProblemSpec};
use invsynth::symbol_elim::{cleanup, eliminate_symbols, ElimRequest};
use num_traits::Zero;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn load(name: &str) -> (ProblemSpec, Vec<ExpectedRun>) {
    let dir = corpus_dir();
    let src = std::fs::read_to_string(dir.join(format!("{name}.tcs"))).unwrap();
    let spec = parse(&src).unwrap_or_else(|e| panic!("{name}: {e}"));
    let side = std::fs::read_to_string(dir.join(format!("{name}.expected"))).unwrap();
    (spec, parse_sidecar(&side).unwrap())
}

pub fn corpus_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .filter_map(|e| {
            let p = e.ok()?.path();
            (p.extension()? == "tcs").then(|| p.file_stem().map(|s| s.to_string_lossy().into_owned()))?
        })
        .collect();
    names.sort();
    names
}

pub fn run_named<'a>(runs: &'a [ExpectedRun], name: &str) -> &'a ExpectedRun {
    runs.iter().find(|r| r.name == name).unwrap_or_else(|| panic!("no run `{name}`"))
}

/// Solver with the ten second limit used for every equivalence judgement.
pub fn client() -> SmtClient {
    SmtClient::new(SolverConfig::from_env().with_timeout(Duration::from_secs(10)).unwrap())
}

pub fn config(spec: &ProblemSpec, run: &ExpectedRun) -> LoopConfig {
    let mut cfg = LoopConfig::from_spec(spec);
    if let Some(m) = run.mode {
        cfg.mode = m;
    }
    if let Some(k) = &run.keep {
        cfg.keep = Some(k.iter().map(|s| Name::from(s.as_str())).collect());
    }
    if !run.eliminate.is_empty() {
        cfg.eliminate = EliminatePolicy::Explicit(run.eliminate.iter().map(|s| Name::from(s.as_str())).collect());
    }
    if let Some(n) = run.max_iterations {
        cfg.max_iterations = n;
    }
    if let Some(g) = run.apf_guard {
        cfg.apf_guard = g;
    }
    cfg
}

/// Every theory level of the problem, innermost first.
pub fn background(spec: &ProblemSpec) -> Chain {
    Chain::new(spec.levels.iter().map(|l| Level::from_set(&l.name, &l.clauses).unverified()).collect())
}

pub fn expected(spec: &ProblemSpec, run: &ExpectedRun) -> ClauseSet {
    clauses(spec, &run.expect)
}

pub fn clauses<S: AsRef<str>>(spec: &ProblemSpec, lines: &[S]) -> ClauseSet {
    let src: String = lines.iter().map(|l| format!("{}\n", l.as_ref())).collect();
    parse_clauses(&src, &spec.signature).unwrap_or_else(|e| panic!("{e}"))
}

/// Requests of one elimination step on the property and their joint result.
pub fn eliminate_property(p: &Problem<'_>) -> (Vec<ElimRequest>, ClauseSet) {
    let reqs = p.property_requests().unwrap();
    let mut all = Vec::new();
    for r in &reqs {
        all.extend(eliminate_symbols(r).unwrap().gamma.clauses);
    }
    (reqs, ClauseSet::new(cleanup(all)))
}

/// Interpretation of constants, bound variables and unary or binary
/// function tables over rationals.
#[derive(Clone, Debug, Default)]
pub struct Interp {
    pub consts: BTreeMap<String, Q>,
    pub vars: BTreeMap<String, Q>,
    pub funcs: BTreeMap<String, BTreeMap<Vec<Q>, Q>>,
    /// Value of a function outside its table.
    pub default: Q,
}

impl Interp {
    pub fn term(&self, t: &Term) -> Q {
        match t.kind() {
            TermKind::Var(x) => self.vars.get(x.as_ref()).cloned().unwrap_or_else(|| panic!("unbound {x}")),
            TermKind::Num(q) => q.clone(),
            TermKind::App(f, args) if args.is_empty() => {
                self.consts.get(f.as_ref()).cloned().unwrap_or_else(|| panic!("no value for {f}"))
            }
            TermKind::App(f, args) => {
                let key: Vec<Q> = args.iter().map(|a| self.term(a)).collect();
                self.funcs.get(f.as_ref()).and_then(|tab| tab.get(&key)).cloned().unwrap_or_else(|| self.default.clone())
            }
            TermKind::Lin(parts, k) => parts.iter().fold(k.clone(), |acc, (c, t)| acc + c * self.term(t)),
        }
    }

    pub fn literal(&self, l: &Literal) -> bool {
        let v = match &l.atom {
            Atom::Cmp(r, a, b) => {
                let (x, y) = (self.term(a), self.term(b));
                match r {
                    Rel::Eq => x == y,
                    Rel::Le => x <= y,
                    Rel::Lt => x < y,
                    Rel::Ge => x >= y,
                    Rel::Gt => x > y,
                }
            }
            Atom::Dvd(k, t) => {
                let v = self.term(t);
                v.is_integer() && (v.to_integer() % k).is_zero()
            }
            Atom::Pred(p, _) => panic!("uninterpreted predicate {p}"),
        };
        v == l.positive
    }

    pub fn conj(&self, lits: &[Literal]) -> bool {
        lits.iter().all(|l| self.literal(l))
    }

    /// A clause with its variables ranging over `domain`.
    pub fn clause(&self, c: &Clause, domain: &[Q]) -> bool {
        let vars: Vec<String> = c.vars.iter().map(|(x, _)| x.to_string()).collect();
        let mut env = self.clone();
        let mut idx = vec![0usize; vars.len()];
        loop {
            for (x, &i) in vars.iter().zip(&idx) {
                env.vars.insert(x.clone(), domain[i].clone());
            }
            if !c.lits.iter().any(|l| env.literal(l)) {
                return false;
            }
            let mut k = 0;
            while k < idx.len() {
                idx[k] += 1;
                if idx[k] < domain.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                return true;
            }
        }
    }
}

pub fn qi(v: i64) -> Q {
    Q::from_integer(v.into())
}

/// Random linear constraint `sum coeffs[i] * v_i + k REL 0` over eliminated
/// symbols followed by parameters, with integer data for fast evaluation.
#[derive(Clone, Debug)]
pub struct LinLit {
    pub coeffs: Vec<i64>,
    pub k: i64,
    /// 0: <=, 1: <, 2: =, 3: !=
    pub rel: u8,
}

impl LinLit {
    pub fn holds(&self, point: &[i64]) -> bool {
        let s: i64 = self.coeffs.iter().zip(point).map(|(c, v)| c * v).sum::<i64>() + self.k;
        match self.rel {
            0 => s <= 0,
            1 => s < 0,
            2 => s == 0,
            _ => s != 0,
        }
    }

    pub fn literal(&self, symbols: &[Term]) -> Literal {
        let zero = Term::num(Q::zero(), symbols[0].sort().clone());
        let mut lhs = Term::num(qi(self.k), symbols[0].sort().clone());
        for (c, t) in self.coeffs.iter().zip(symbols) {
            if *c != 0 {
                lhs = lhs.add(&t.scale(&qi(*c)));
            }
        }
        match self.rel {
            0 => Literal::cmp(Rel::Le, lhs, zero),
            1 => Literal::cmp(Rel::Lt, lhs, zero),
            2 => Literal::cmp(Rel::Eq, lhs, zero),
            _ => Literal::new(Atom::Cmp(Rel::Eq, lhs, zero), false),
        }
    }
}

/// Disjunction of conjunctions of linear constraints.
#[derive(Clone, Debug)]
pub struct LinTask {
    pub eliminated: usize,
    pub params: usize,
    pub dnf: Vec<Vec<LinLit>>,
}

impl LinTask {
    pub fn random<R: rand::Rng>(rng: &mut R, eliminated: usize, params: usize, max_coeff: i64, max_k: i64, rels: u8) -> LinTask {
        let n = eliminated + params;
        let disjuncts = rng.gen_range(1..=2);
        let dnf = (0..disjuncts)
            .map(|_| {
                (0..rng.gen_range(1..=3))
                    .map(|_| {
                        let mut coeffs: Vec<i64> = (0..n).map(|_| rng.gen_range(-max_coeff..=max_coeff)).collect();
                        if coeffs[..eliminated].iter().all(|c| *c == 0) {
                            coeffs[rng.gen_range(0..eliminated)] = if rng.gen_bool(0.5) { 1 } else { -1 };
                        }
                        LinLit { coeffs, k: rng.gen_range(-max_k..=max_k), rel: rng.gen_range(0..rels) }
                    })
                    .collect()
            })
            .collect();
        LinTask { eliminated, params, dnf }
    }

    pub fn holds(&self, point: &[i64]) -> bool {
        self.dnf.iter().any(|c| c.iter().all(|l| l.holds(point)))
    }

    pub fn formula(&self, symbols: &[Term]) -> invsynth::logic::Formula {
        use invsynth::logic::Formula;
        Formula::or(
            self.dnf.iter().map(|c| Formula::and(c.iter().map(|l| Formula::Lit(l.literal(symbols))).collect())).collect(),
        )
    }
}

impl LinTask {
    /// Whether some witness for the eliminated symbols lies in
    /// `[-window, window]`. The last eliminated symbol is solved exactly, the
    /// others are enumerated.
    pub fn witness_in_window(&self, params: &[i64], window: i64) -> bool {
        let mut point = vec![0; self.eliminated];
        point.extend_from_slice(params);
        self.search(&mut point, 0, window)
    }

    fn search(&self, point: &mut [i64], i: usize, window: i64) -> bool {
        if i + 1 < self.eliminated {
            for v in -window..=window {
                point[i] = v;
                if self.search(point, i + 1, window) {
                    return true;
                }
            }
            return false;
        }
        self.dnf.iter().any(|c| last_solvable(c, point, i, window))
    }
}

/// A value of `point[i]` in the window satisfying every literal of `conj`.
fn last_solvable(conj: &[LinLit], point: &[i64], i: usize, window: i64) -> bool {
    let (mut lo, mut hi) = (-window, window);
    let mut fixed: Option<i64> = None;
    let mut excluded = Vec::new();
    for l in conj {
        let c = l.coeffs[i];
        let s: i64 = l.coeffs.iter().zip(point).enumerate().filter(|(j, _)| *j != i).map(|(_, (a, v))| a * v).sum::<i64>() + l.k;
        if c == 0 {
            let mut q = point.to_vec();
            q[i] = 0;
            if !l.holds(&q) {
                return false;
            }
            continue;
        }
        // c*v + s REL 0
        match l.rel {
            0 | 1 => {
                let rhs = -s - i64::from(l.rel == 1);
                if c > 0 {
                    hi = hi.min(rhs.div_euclid(c));
                } else {
                    // v >= ceil(-rhs / -c)
                    lo = lo.max(-(rhs.div_euclid(-c)));
                }
            }
            2 => {
                if (-s) % c != 0 {
                    return false;
                }
                let v = -s / c;
                if fixed.is_some_and(|w| w != v) {
                    return false;
                }
                fixed = Some(v);
            }
            _ => {
                if (-s) % c == 0 {
                    excluded.push(-s / c);
                }
            }
        }
    }
    match fixed {
        Some(v) => lo <= v && v <= hi && !excluded.contains(&v),
        None => lo <= hi && (lo..=hi).any(|v| !excluded.contains(&v)),
    }
}
