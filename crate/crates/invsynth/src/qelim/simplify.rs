use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};

use super::linatom::{LinAtom, LinExpr, LinRel, Norm};
use super::Conj;
use crate::logic::{Literal, Sort, Term, Q};

#[derive(Default)]
struct Bounds {
    lo: Option<(Q, bool)>,
    hi: Option<(Q, bool)>,
    eq: Option<Q>,
    neq: BTreeSet<Q>,
    sort: Option<Sort>,
}

impl Bounds {
    fn add_hi(&mut self, v: Q, strict: bool) {
        let better = match &self.hi {
            None => true,
            Some((h, s)) => v < *h || (v == *h && strict && !s),
        };
        if better {
            self.hi = Some((v, strict));
        }
    }

    fn add_lo(&mut self, v: Q, strict: bool) {
        let better = match &self.lo {
            None => true,
            Some((l, s)) => v > *l || (v == *l && strict && !s),
        };
        if better {
            self.lo = Some((v, strict));
        }
    }

    fn below_hi(&self, v: &Q) -> bool {
        match &self.hi {
            None => true,
            Some((h, s)) => v < h || (v == h && !s),
        }
    }

    fn above_lo(&self, v: &Q) -> bool {
        match &self.lo {
            None => true,
            Some((l, s)) => v > l || (v == l && !s),
        }
    }
}

/// Merges bounds on identical linear forms, drops implied bounds and
/// disequalities, detects contradictions. `None` means the conjunction is false.
pub fn simplify_conj(conj: Conj) -> Option<Conj> {
    let mut forms: BTreeMap<BTreeMap<Term, Q>, Bounds> = BTreeMap::new();
    let mut dvd: BTreeSet<LinAtom> = BTreeSet::new();
    for a in conj.atoms {
        let a = match a.normalize() {
            Norm::True => continue,
            Norm::False => return None,
            Norm::Atom(a) => a,
        };
        if matches!(a.rel, LinRel::Dvd(_) | LinRel::NDvd(_)) {
            if dvd.contains(&a.negate()) {
                return None;
            }
            dvd.insert(a);
            continue;
        }
        let lead = a.coeffs.values().next().cloned().unwrap_or_else(Q::one);
        let key: BTreeMap<Term, Q> = a.coeffs.iter().map(|(t, c)| (t.clone(), c / &lead)).collect();
        let v = -(&a.constant / &lead);
        let b = forms.entry(key).or_default();
        b.sort = Some(a.sort.clone());
        match a.rel {
            LinRel::Eq => {
                if b.eq.as_ref().is_some_and(|e| *e != v) {
                    return None;
                }
                b.eq = Some(v);
            }
            LinRel::Ne => {
                b.neq.insert(v);
            }
            LinRel::Le | LinRel::Lt => {
                let strict = a.rel == LinRel::Lt;
                if lead.is_positive() {
                    b.add_hi(v, strict);
                } else {
                    b.add_lo(v, strict);
                }
            }
            _ => unreachable!(),
        }
    }
    let mut atoms = Vec::new();
    for (key, b) in forms {
        let sort = b.sort.clone().unwrap_or_else(Sort::real);
        let mk = |v: &Q, rel: LinRel, sign: Q| -> Norm {
            let e = LinExpr { coeffs: key.clone(), constant: -v.clone() }.scaled(&sign);
            LinAtom::new(e.coeffs, e.constant, rel, sort.clone()).normalize()
        };
        let mut push = |n: Norm| -> bool {
            match n {
                Norm::True => true,
                Norm::False => false,
                Norm::Atom(a) => {
                    atoms.push(a);
                    true
                }
            }
        };
        if let Some(e) = &b.eq {
            if !b.above_lo(e) || !b.below_hi(e) || b.neq.contains(e) {
                return None;
            }
            if !push(mk(e, LinRel::Eq, Q::one())) {
                return None;
            }
            continue;
        }
        if let (Some((l, sl)), Some((h, sh))) = (&b.lo, &b.hi) {
            if l > h || (l == h && (*sl || *sh)) {
                return None;
            }
            if l == h {
                if b.neq.contains(l) {
                    return None;
                }
                if !push(mk(l, LinRel::Eq, Q::one())) {
                    return None;
                }
                continue;
            }
        }
        if let Some((h, s)) = &b.hi {
            if !push(mk(h, if *s { LinRel::Lt } else { LinRel::Le }, Q::one())) {
                return None;
            }
        }
        if let Some((l, s)) = &b.lo {
            if !push(mk(l, if *s { LinRel::Lt } else { LinRel::Le }, -Q::one())) {
                return None;
            }
        }
        for v in &b.neq {
            if b.above_lo(v) && b.below_hi(v) && !push(mk(v, LinRel::Ne, Q::one())) {
                return None;
            }
        }
    }
    atoms.extend(dvd);
    atoms.sort();
    atoms.dedup();
    let mut opaque: Vec<Literal> = Vec::new();
    for l in conj.opaque {
        match l.eval_trivial() {
            Some(true) => continue,
            Some(false) => return None,
            None => {}
        }
        if opaque.contains(&l.negate()) {
            return None;
        }
        if !opaque.contains(&l) {
            opaque.push(l);
        }
    }
    opaque.sort();
    Some(Conj { atoms, opaque })
}

const FM_LIMIT: usize = 400;

/// Rational relaxation feasibility by Fourier-Motzkin over every summand.
/// Returns `true` when feasible or when the check gives up.
pub fn lra_feasible(conj: &Conj) -> bool {
    let mut rows: Vec<(LinExpr, bool)> = Vec::new();
    for a in &conj.atoms {
        match a.rel {
            LinRel::Le => rows.push((a.expr(), false)),
            LinRel::Lt => rows.push((a.expr(), true)),
            LinRel::Eq => {
                rows.push((a.expr(), false));
                rows.push((a.expr().scaled(&-Q::one()), false));
            }
            _ => {}
        }
    }
    loop {
        for (e, strict) in &rows {
            if e.coeffs.is_empty() && (e.constant.is_positive() || (*strict && e.constant.is_zero())) {
                return false;
            }
        }
        rows.retain(|(e, _)| !e.coeffs.is_empty());
        let mut count: BTreeMap<&Term, usize> = BTreeMap::new();
        for (e, _) in &rows {
            for t in e.coeffs.keys() {
                *count.entry(t).or_default() += 1;
            }
        }
        let Some(x) = count.into_iter().min_by_key(|(_, n)| *n).map(|(t, _)| t.clone()) else { return true };
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut rest = Vec::new();
        for (e, s) in rows {
            match e.coeffs.get(&x).cloned() {
                Some(c) if c.is_positive() => upper.push((e.scaled(&(Q::one() / c)), s)),
                Some(c) => lower.push((e.scaled(&(Q::one() / -c)), s)),
                None => rest.push((e, s)),
            }
        }
        for (u, su) in &upper {
            for (l, sl) in &lower {
                let mut e = u.clone();
                e.add_scaled(l, &Q::one());
                e.coeffs.remove(&x);
                rest.push((e, *su || *sl));
            }
        }
        if rest.len() > FM_LIMIT {
            return true;
        }
        rows = rest;
    }
}

/// Removes duplicate disjuncts and disjuncts subsumed by a weaker one.
pub fn simplify_dnf(mut conjs: Vec<Conj>) -> Vec<Conj> {
    conjs.sort();
    conjs.dedup();
    if conjs.iter().any(|c| c.atoms.is_empty() && c.opaque.is_empty()) {
        return vec![Conj::default()];
    }
    if conjs.len() > 3000 {
        return conjs;
    }
    let keep: Vec<bool> = (0..conjs.len())
        .map(|i| {
            !conjs.iter().enumerate().any(|(j, other)| {
                j != i
                    && other.atoms.len() + other.opaque.len() < conjs[i].atoms.len() + conjs[i].opaque.len()
                    && other.atoms.iter().all(|a| conjs[i].atoms.contains(a))
                    && other.opaque.iter().all(|l| conjs[i].opaque.contains(l))
            })
        })
        .collect();
    conjs.into_iter().zip(keep).filter(|(_, k)| *k).map(|(c, _)| c).collect()
}
