//! Quantifier elimination for linear rational and integer arithmetic and
//! their disjoint two-sorted combination, working disjunct by disjunct.

mod engine;
pub mod linatom;
pub mod simplify;

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::logic::{Dnf, Formula, Literal, NormalFormError, SortKind, Term, Q};
use crate::par;
pub use linatom::{LinAtom, LinExpr, LinRel, Norm};
pub use simplify::{lra_feasible, simplify_conj, simplify_dnf};

pub const DEFAULT_CAP: usize = 50_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QeError {
    #[error("disjunct count exceeds {cap} ({site})")]
    Blowup { cap: usize, site: String },
    #[error("`{var}` occurs below a function symbol and has no defining equality")]
    NonLinearOccurrence { var: String },
    #[error("cannot eliminate `{var}`: {reason}")]
    Unsupported { var: String, reason: String },
    #[error("`{var}` has sort {got}, expected {expected}")]
    WrongSort { var: String, got: String, expected: String },
    #[error("divisibility constraint `{atom}` cannot be expanded: {reason}")]
    Divisibility { atom: String, reason: String },
}

impl From<NormalFormError> for QeError {
    fn from(e: NormalFormError) -> Self {
        match e {
            NormalFormError::Blowup { cap, site } => QeError::Blowup { cap, site },
        }
    }
}

#[derive(Clone, Debug)]
pub struct QeConfig {
    pub cap: usize,
    /// Drop disjuncts whose rational relaxation is infeasible.
    pub feasibility_filter: bool,
    pub parallel: bool,
}

impl Default for QeConfig {
    fn default() -> Self {
        QeConfig { cap: DEFAULT_CAP, feasibility_filter: true, parallel: true }
    }
}

/// Conjunction of linear atoms plus literals outside linear arithmetic.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Conj {
    pub atoms: Vec<LinAtom>,
    pub opaque: Vec<Literal>,
}

impl Conj {
    pub fn from_literals(lits: &[Literal]) -> Option<Conj> {
        let mut c = Conj::default();
        for l in lits {
            match LinAtom::from_literal(l) {
                Some(a) => c.atoms.push(a),
                None => c.opaque.push(l.clone()),
            }
        }
        simplify_conj(c)
    }

    pub fn to_literals(&self) -> Vec<Literal> {
        let mut out: Vec<Literal> = self.atoms.iter().map(LinAtom::to_literal).collect();
        out.extend(self.opaque.iter().cloned());
        out
    }
}

/// Existential elimination task over a DNF matrix.
#[derive(Clone, Debug)]
pub struct QeTask {
    pub eliminate: Vec<Term>,
    pub matrix: Dnf,
}

/// `exists vars. formula`, returned as a DNF without the eliminated symbols.
pub fn eliminate(vars: &[Term], f: &Formula, cfg: &QeConfig) -> Result<Dnf, QeError> {
    let dnf = f.to_dnf(cfg.cap)?;
    eliminate_dnf(vars, &dnf, cfg)
}

pub fn eliminate_dnf(vars: &[Term], dnf: &Dnf, cfg: &QeConfig) -> Result<Dnf, QeError> {
    let conjs = eliminate_to_conjs(vars, dnf, cfg)?;
    Ok(conjs.iter().map(Conj::to_literals).collect())
}

pub fn eliminate_lra(vars: &[Term], dnf: &Dnf, cfg: &QeConfig) -> Result<Dnf, QeError> {
    check_sorts(vars, SortKind::Real)?;
    eliminate_dnf(vars, dnf, cfg)
}

pub fn eliminate_lia(vars: &[Term], dnf: &Dnf, cfg: &QeConfig) -> Result<Dnf, QeError> {
    check_sorts(vars, SortKind::Int)?;
    eliminate_dnf(vars, dnf, cfg)
}

fn check_sorts(vars: &[Term], kind: SortKind) -> Result<(), QeError> {
    for v in vars {
        if v.sort().kind != kind {
            return Err(QeError::WrongSort {
                var: v.to_string(),
                got: v.sort().to_string(),
                expected: format!("{:?}", kind).to_lowercase(),
            });
        }
    }
    Ok(())
}

/// Core entry: per-disjunct elimination (in parallel when enabled), merged
/// in input order, then simplified.
pub fn eliminate_to_conjs(vars: &[Term], dnf: &Dnf, cfg: &QeConfig) -> Result<Vec<Conj>, QeError> {
    let inputs: Vec<Conj> = dnf.iter().filter_map(|c| Conj::from_literals(c)).collect();
    let run = |c: &Conj| -> Result<Vec<Conj>, QeError> {
        let mut out = Vec::new();
        for r in engine::eliminate_conj(vars, c.clone(), cfg.cap)? {
            if let Some(s) = simplify_conj(r) {
                if !cfg.feasibility_filter || lra_feasible(&s) {
                    out.push(s);
                }
            }
        }
        Ok(out)
    };
    let results = if cfg.parallel { par::par_map(&inputs, run) } else { par::seq_map(&inputs, run) };
    let mut all = Vec::new();
    for r in results {
        all.extend(r?);
        if all.len() > cfg.cap {
            return Err(QeError::Blowup { cap: cfg.cap, site: "merging disjuncts".into() });
        }
    }
    Ok(simplify_dnf(all))
}

/// Replaces divisibility atoms by explicit values when the constrained term is
/// bounded in its disjunct and the modulus is at most `max_modulus`.
pub fn eliminate_divisibility(conjs: Vec<Conj>, max_modulus: u32) -> Result<Vec<Conj>, QeError> {
    const MAX_WIDTH: i64 = 256;
    let mut out = Vec::new();
    let mut work = conjs;
    while let Some(c) = work.pop() {
        let Some(i) = c.atoms.iter().position(|a| matches!(a.rel, LinRel::Dvd(_) | LinRel::NDvd(_))) else {
            out.push(c);
            continue;
        };
        let a = c.atoms[i].clone();
        let (LinRel::Dvd(k) | LinRel::NDvd(k)) = &a.rel else { unreachable!() };
        let fail = |reason: &str| QeError::Divisibility { atom: a.to_literal().to_string(), reason: reason.into() };
        if k.to_u32().is_none_or(|k| k > max_modulus) {
            return Err(fail("modulus too large"));
        }
        if a.coeffs.len() != 1 {
            return Err(fail("more than one unknown"));
        }
        let (t, coef) = a.coeffs.iter().next().map(|(t, c)| (t.clone(), c.clone())).unwrap_or_else(|| unreachable!());
        let (lo, hi) = bounds_of(&t, &c);
        let (Some(lo), Some(hi)) = (lo, hi) else { return Err(fail("unbounded term")) };
        if (&hi - &lo) > BigInt::from(MAX_WIDTH) {
            return Err(fail("range too wide"));
        }
        let is_dvd = matches!(a.rel, LinRel::Dvd(_));
        let mut v = lo.clone();
        while v <= hi {
            let val = Q::from_integer(v.clone()) * &coef + &a.constant;
            let holds = val.is_integer() && (val.numer() % k).is_zero();
            if holds == is_dvd {
                let mut atoms = c.atoms.clone();
                atoms[i] = LinAtom::new([(t.clone(), Q::one())].into(), -Q::from_integer(v.clone()), LinRel::Eq, a.sort.clone());
                if let Some(s) = simplify_conj(Conj { atoms, opaque: c.opaque.clone() }) {
                    work.push(s);
                }
            }
            v += 1;
        }
    }
    out.reverse();
    Ok(simplify_dnf(out))
}

/// Integer bounds on a single summand from the unit bounds in a conjunction.
fn bounds_of(t: &Term, c: &Conj) -> (Option<BigInt>, Option<BigInt>) {
    let mut lo: Option<BigInt> = None;
    let mut hi: Option<BigInt> = None;
    for a in &c.atoms {
        if a.coeffs.len() != 1 {
            continue;
        }
        let Some(k) = a.coeff(t) else { continue };
        let v = -(&a.constant / k);
        match a.rel {
            LinRel::Eq => {
                let f = v.floor().to_integer();
                lo = Some(lo.map_or(f.clone(), |l| l.max(f.clone())));
                hi = Some(hi.map_or(f.clone(), |h| h.min(f)));
            }
            LinRel::Le | LinRel::Lt => {
                if k.is_positive() {
                    let f = v.floor().to_integer();
                    hi = Some(hi.map_or(f.clone(), |h| h.min(f)));
                } else {
                    let f = v.ceil().to_integer();
                    lo = Some(lo.map_or(f.clone(), |l| l.max(f)));
                }
            }
            _ => {}
        }
    }
    (lo, hi)
}

/// Symbols remaining free after elimination.
pub fn free_symbols(dnf: &Dnf) -> BTreeSet<crate::logic::Name> {
    let mut out = BTreeSet::new();
    for c in dnf {
        for l in c {
            l.collect_symbols(&mut out);
        }
    }
    out
}
