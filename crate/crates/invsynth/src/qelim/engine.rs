use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed};

use super::linatom::{LinAtom, LinExpr, LinRel, Norm};
use super::{Conj, QeError};
use crate::logic::{Atom, Literal, Rel, SortKind, Term, Q};

fn occurs(x: &Term, t: &Term) -> bool {
    t == x || t.children().iter().any(|c| occurs(x, c))
}

fn lit_occurs(x: &Term, l: &Literal) -> bool {
    l.terms().iter().any(|t| occurs(x, t))
}

fn push_norm(out: &mut Vec<LinAtom>, a: LinAtom) -> bool {
    match a.normalize() {
        Norm::True => true,
        Norm::False => false,
        Norm::Atom(a) => {
            if !out.contains(&a) {
                out.push(a);
            }
            true
        }
    }
}

/// Rebuilds a conjunction from atoms, dropping it when an atom is false.
fn rebuild(atoms: Vec<LinAtom>, opaque: Vec<Literal>) -> Option<Conj> {
    let mut out = Vec::new();
    for a in atoms {
        if !push_norm(&mut out, a) {
            return None;
        }
    }
    Some(Conj { atoms: out, opaque })
}

/// Substitutes `x := e` everywhere, including nested occurrences.
fn substitute(conj: &Conj, x: &Term, e: &LinExpr) -> Option<Conj> {
    let term = e.to_term(x.sort());
    let map: BTreeMap<Term, Term> = [(x.clone(), term)].into();
    let mut atoms = Vec::new();
    for a in &conj.atoms {
        if a.contains_nested(x) {
            let l = a.to_literal().replace(&map);
            match LinAtom::from_literal(&l) {
                Some(b) => atoms.push(b.substitute(x, e)),
                None => return None,
            }
        } else {
            atoms.push(a.substitute(x, e));
        }
    }
    let opaque = conj.opaque.iter().map(|l| l.replace(&map)).collect();
    rebuild(atoms, opaque)
}

fn occurrences(x: &Term, conj: &Conj) -> usize {
    conj.atoms.iter().filter(|a| a.contains(x) || a.contains_nested(x)).count()
        + conj.opaque.iter().filter(|l| lit_occurs(x, l)).count()
}

fn nested_anywhere(x: &Term, conj: &Conj) -> bool {
    conj.atoms.iter().any(|a| a.contains_nested(x)) || conj.opaque.iter().any(|l| lit_occurs(x, l))
}

/// Eliminates `vars` from one conjunction; the result is a disjunction.
pub fn eliminate_conj(vars: &[Term], conj: Conj, cap: usize) -> Result<Vec<Conj>, QeError> {
    let mut work = vec![conj];
    let mut done = Vec::new();
    while let Some(c) = work.pop() {
        let present: Vec<(&Term, usize)> =
            vars.iter().map(|x| (x, occurrences(x, &c))).filter(|(_, n)| *n > 0).collect();
        let Some((x, _)) = present.iter().min_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(b.0))).cloned() else {
            done.push(c);
            continue;
        };
        let next = match x.sort().kind {
            SortKind::Real => step_real(x, c)?,
            SortKind::Int => step_int(x, c)?,
            SortKind::Uninterpreted => step_uninterpreted(x, c)?,
        };
        work.extend(next);
        if work.len() + done.len() > cap {
            return Err(QeError::Blowup { cap, site: format!("eliminating `{}`", x) });
        }
    }
    Ok(done)
}

fn find_eq<'a>(x: &Term, conj: &'a Conj, unit_only: bool) -> Option<(usize, &'a LinAtom)> {
    let mut best: Option<(usize, &LinAtom)> = None;
    for (i, a) in conj.atoms.iter().enumerate() {
        if a.rel != LinRel::Eq {
            continue;
        }
        let Some(c) = a.coeff(x) else { continue };
        if a.contains_nested(x) {
            continue;
        }
        let unit = c.abs().is_one();
        if unit_only && !unit {
            continue;
        }
        if best.is_none() || (unit && !best.is_some_and(|(_, b)| b.coeff(x).is_some_and(|d| d.abs().is_one()))) {
            best = Some((i, a));
        }
    }
    best
}

/// `x = e` solved from an equality atom with coefficient `c` on `x`.
fn solve(a: &LinAtom, x: &Term) -> LinExpr {
    let c = a.coeff(x).cloned().unwrap_or_else(Q::one);
    let mut rest = a.expr();
    rest.coeffs.remove(x);
    rest.scaled(&(-Q::one() / c))
}

fn split_ne(x: &Term, conj: &Conj) -> Option<Vec<Conj>> {
    let i = conj.atoms.iter().position(|a| a.rel == LinRel::Ne && a.contains(x))?;
    let a = &conj.atoms[i];
    let mut out = Vec::new();
    for neg in [false, true] {
        let e = if neg { a.expr().scaled(&-Q::one()) } else { a.expr() };
        let mut atoms = conj.atoms.clone();
        atoms[i] = a.with_expr(e, LinRel::Lt);
        if let Some(c) = rebuild(atoms, conj.opaque.clone()) {
            out.push(c);
        }
    }
    Some(out)
}

fn nonlinear(x: &Term) -> QeError {
    QeError::NonLinearOccurrence { var: x.to_string() }
}

fn step_real(x: &Term, conj: Conj) -> Result<Vec<Conj>, QeError> {
    if let Some((_, a)) = find_eq(x, &conj, false) {
        let e = solve(a, x);
        return substitute(&conj, x, &e).map(|c| vec![c]).map_or(Ok(Vec::new()), Ok);
    }
    if nested_anywhere(x, &conj) {
        return Err(nonlinear(x));
    }
    if let Some(split) = split_ne(x, &conj) {
        return Ok(split);
    }
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut rest = Vec::new();
    for a in conj.atoms {
        match a.coeff(x).cloned() {
            None => rest.push(a),
            Some(c) => {
                let strict = a.rel == LinRel::Lt;
                let mut e = a.expr().scaled(&(Q::one() / c.abs()));
                e.coeffs.remove(x);
                if c.is_positive() {
                    upper.push((e, strict, a.sort.clone()));
                } else {
                    lower.push((e, strict, a.sort.clone()));
                }
            }
        }
    }
    for (u, su, sort) in &upper {
        for (l, sl, _) in &lower {
            let mut e = u.clone();
            e.add_scaled(l, &Q::one());
            rest.push(LinAtom::new(e.coeffs, e.constant, if *su || *sl { LinRel::Lt } else { LinRel::Le }, sort.clone()));
        }
    }
    Ok(rebuild(rest, conj.opaque).into_iter().collect())
}

fn modulus(rel: &LinRel) -> Option<&BigInt> {
    match rel {
        LinRel::Dvd(k) | LinRel::NDvd(k) => Some(k),
        _ => None,
    }
}

fn scale_mod(rel: &LinRel, s: &BigInt) -> LinRel {
    match rel {
        LinRel::Dvd(k) => LinRel::Dvd(k * s),
        LinRel::NDvd(k) => LinRel::NDvd(k * s),
        r => r.clone(),
    }
}

fn step_int(x: &Term, conj: Conj) -> Result<Vec<Conj>, QeError> {
    if let Some((_, a)) = find_eq(x, &conj, true) {
        let e = solve(a, x);
        return Ok(substitute(&conj, x, &e).into_iter().collect());
    }
    if nested_anywhere(x, &conj) {
        return Err(nonlinear(x));
    }
    if let Some((i, a)) = find_eq(x, &conj, false) {
        // c*x + r = 0 with |c| > 1: scale every atom on x by |c|, replace c*x by -r, add |c| | r.
        let c = a.coeff(x).cloned().unwrap_or_else(Q::one);
        let cabs = c.abs();
        let e = solve(a, x);
        let mut rest = a.expr();
        rest.coeffs.remove(x);
        let mut atoms = Vec::new();
        for (j, b) in conj.atoms.iter().enumerate() {
            if j == i {
                continue;
            }
            if !b.contains(x) {
                atoms.push(b.clone());
                continue;
            }
            let scaled = b.with_expr(b.expr().scaled(&cabs), scale_mod(&b.rel, cabs.numer()));
            atoms.push(scaled.substitute(x, &e));
        }
        atoms.push(LinAtom::new(rest.coeffs, rest.constant, LinRel::Dvd(cabs.to_integer()), x.sort().clone()));
        return Ok(rebuild(atoms, conj.opaque).into_iter().collect());
    }
    if let Some(split) = split_ne(x, &conj) {
        return Ok(split);
    }
    cooper(x, conj)
}

/// One bound or divisibility constraint on `y = l*x` with unit coefficient.
struct Row {
    sign: i8,
    rest: LinExpr,
    rel: LinRel,
}

fn cooper(x: &Term, conj: Conj) -> Result<Vec<Conj>, QeError> {
    let mut rows = Vec::new();
    let mut others = Vec::new();
    for a in conj.atoms {
        if a.contains(x) {
            rows.push(a);
        } else {
            others.push(a);
        }
    }
    let l = rows.iter().fold(BigInt::one(), |acc, a| acc.lcm(a.coeff(x).map(|c| c.numer()).unwrap_or(&BigInt::one())));
    let mut ys: Vec<Row> = Vec::new();
    for a in &rows {
        let c = a.coeff(x).cloned().unwrap_or_else(Q::one);
        let m = Q::from_integer(&l / c.numer().abs());
        let mut rest = a.expr().scaled(&m);
        rest.coeffs.remove(x);
        let rel = match &a.rel {
            LinRel::Le => LinRel::Le,
            LinRel::Lt => {
                rest.constant += Q::one();
                LinRel::Le
            }
            other => scale_mod(other, m.numer()),
        };
        ys.push(Row { sign: if c.is_positive() { 1 } else { -1 }, rest, rel });
    }
    if !l.is_one() {
        ys.push(Row { sign: 1, rest: LinExpr::default(), rel: LinRel::Dvd(l.clone()) });
    }
    let delta = ys.iter().filter_map(|r| modulus(&r.rel)).fold(BigInt::one(), |acc, k| acc.lcm(k));
    let lowers: Vec<&Row> = ys.iter().filter(|r| r.rel == LinRel::Le && r.sign < 0).collect();
    let uppers: Vec<&Row> = ys.iter().filter(|r| r.rel == LinRel::Le && r.sign > 0).collect();
    let sort = x.sort().clone();
    // Candidate values for y, plus which bound family is dropped at infinity.
    let mut candidates: Vec<LinExpr> = Vec::new();
    let mut drop_sign: i8 = 0;
    let steps: Vec<Q> = num_iter(&delta);
    if lowers.is_empty() {
        drop_sign = 1;
        candidates.extend(steps.iter().map(|j| LinExpr::constant(j.clone())));
    } else if uppers.is_empty() {
        drop_sign = -1;
        candidates.extend(steps.iter().map(|j| LinExpr::constant(-j.clone())));
    } else if lowers.len() <= uppers.len() {
        // -y + r <= 0 gives y >= r; test y = r + j - 1.
        for b in &lowers {
            for j in &steps {
                let mut e = b.rest.clone();
                e.constant += j - Q::one();
                candidates.push(e);
            }
        }
    } else {
        // y + r <= 0 gives y <= -r; test y = -r - j + 1.
        for b in &uppers {
            for j in &steps {
                let mut e = b.rest.scaled(&-Q::one());
                e.constant += Q::one() - j;
                candidates.push(e);
            }
        }
    }
    let mut out: Vec<Conj> = Vec::new();
    for t in candidates {
        let mut atoms = others.clone();
        for r in &ys {
            if r.rel == LinRel::Le && r.sign == drop_sign {
                continue;
            }
            let mut e = r.rest.clone();
            e.add_scaled(&t, &Q::from_integer(BigInt::from(r.sign)));
            atoms.push(LinAtom::new(e.coeffs, e.constant, r.rel.clone(), sort.clone()));
        }
        if let Some(c) = rebuild(atoms, conj.opaque.clone()) {
            if !out.contains(&c) {
                out.push(c);
            }
        }
    }
    Ok(out)
}

fn num_iter(delta: &BigInt) -> Vec<Q> {
    let mut out = Vec::new();
    let mut j = BigInt::one();
    while &j <= delta {
        out.push(Q::from_integer(j.clone()));
        j += 1;
    }
    out
}

fn step_uninterpreted(x: &Term, conj: Conj) -> Result<Vec<Conj>, QeError> {
    for l in &conj.opaque {
        if !l.positive {
            continue;
        }
        if let Atom::Cmp(Rel::Eq, a, b) = &l.atom {
            let other = if a == x && !occurs(x, b) {
                Some(b)
            } else if b == x && !occurs(x, a) {
                Some(a)
            } else {
                None
            };
            if let Some(t) = other {
                let map: BTreeMap<Term, Term> = [(x.clone(), t.clone())].into();
                let opaque = conj.opaque.iter().map(|m| m.replace(&map)).collect();
                let atoms: Vec<LinAtom> = conj
                    .atoms
                    .iter()
                    .map(|a| LinAtom::from_literal(&a.to_literal().replace(&map)).unwrap_or_else(|| a.clone()))
                    .collect();
                return Ok(rebuild(atoms, opaque).into_iter().collect());
            }
        }
    }
    Err(QeError::Unsupported { var: x.to_string(), reason: "no defining equality over an uninterpreted sort".into() })
}
