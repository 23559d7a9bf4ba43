use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::logic::{Atom, Literal, Rel, Sort, Term, Q};

/// Relation of a linear atom against zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LinRel {
    Eq,
    Ne,
    Le,
    Lt,
    /// `k | e`
    Dvd(BigInt),
    /// `not k | e`
    NDvd(BigInt),
}

/// `sum(coeffs) + constant REL 0` over one arithmetic sort. Keys are the
/// non-numeric atoms of the sum (variables, constants, function terms).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinAtom {
    pub coeffs: BTreeMap<Term, Q>,
    pub constant: Q,
    pub rel: LinRel,
    pub sort: Sort,
}

/// Outcome of normalizing an atom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Norm {
    True,
    False,
    Atom(LinAtom),
}

pub fn lcm_denoms<'a, I: IntoIterator<Item = &'a Q>>(it: I) -> BigInt {
    it.into_iter().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()))
}

fn gcd_all<'a, I: IntoIterator<Item = &'a BigInt>>(it: I) -> BigInt {
    it.into_iter().fold(BigInt::zero(), |acc, x| acc.gcd(x))
}

fn floor_div(a: &BigInt, b: &BigInt) -> BigInt {
    a.div_floor(b)
}

fn ceil_div(a: &BigInt, b: &BigInt) -> BigInt {
    -((-a).div_floor(b))
}

impl LinAtom {
    pub fn new(coeffs: BTreeMap<Term, Q>, constant: Q, rel: LinRel, sort: Sort) -> LinAtom {
        LinAtom { coeffs, constant, rel, sort }
    }

    /// Linear view of an arithmetic literal; `None` for predicates and
    /// comparisons over uninterpreted sorts.
    pub fn from_literal(l: &Literal) -> Option<LinAtom> {
        match &l.atom {
            Atom::Cmp(rel, a, b) => {
                if !a.sort().is_arith() {
                    return None;
                }
                let (lhs, rhs, rel) = match rel {
                    Rel::Ge => (b, a, Rel::Le),
                    Rel::Gt => (b, a, Rel::Lt),
                    r => (a, b, *r),
                };
                let (xs, k) = lhs.sub(rhs).linear_parts();
                let rel = match (rel, l.positive) {
                    (Rel::Eq, true) => LinRel::Eq,
                    (Rel::Eq, false) => LinRel::Ne,
                    (Rel::Le, _) => LinRel::Le,
                    (Rel::Lt, _) => LinRel::Lt,
                    _ => unreachable!("ordering literals are stored positively"),
                };
                Some(LinAtom::new(xs.into_iter().map(|(c, t)| (t, c)).collect(), k, rel, a.sort().clone()))
            }
            Atom::Dvd(k, t) => {
                let (xs, c) = t.linear_parts();
                let rel = if l.positive { LinRel::Dvd(k.clone()) } else { LinRel::NDvd(k.clone()) };
                Some(LinAtom::new(xs.into_iter().map(|(c, t)| (t, c)).collect(), c, rel, t.sort().clone()))
            }
            Atom::Pred(..) => None,
        }
    }

    pub fn coeff(&self, x: &Term) -> Option<&Q> {
        self.coeffs.get(x)
    }

    pub fn contains(&self, x: &Term) -> bool {
        self.coeffs.contains_key(x)
    }

    /// True when `x` occurs strictly inside one of the atom's summands.
    pub fn contains_nested(&self, x: &Term) -> bool {
        self.coeffs.keys().any(|t| t != x && occurs_in(x, t))
    }

    /// Linear expression (coefficients and constant) without the relation.
    pub fn expr(&self) -> LinExpr {
        LinExpr { coeffs: self.coeffs.clone(), constant: self.constant.clone() }
    }

    pub fn with_expr(&self, e: LinExpr, rel: LinRel) -> LinAtom {
        LinAtom { coeffs: e.coeffs, constant: e.constant, rel, sort: self.sort.clone() }
    }

    /// Replaces `x` by the linear expression `e`.
    pub fn substitute(&self, x: &Term, e: &LinExpr) -> LinAtom {
        let mut out = self.clone();
        if let Some(a) = out.coeffs.remove(x) {
            let mut ex = out.expr();
            ex.add_scaled(e, &a);
            out.coeffs = ex.coeffs;
            out.constant = ex.constant;
        }
        out
    }

    /// Negation; ordering atoms become their complements.
    pub fn negate(&self) -> LinAtom {
        let mut out = self.clone();
        match &self.rel {
            LinRel::Eq => out.rel = LinRel::Ne,
            LinRel::Ne => out.rel = LinRel::Eq,
            LinRel::Dvd(k) => out.rel = LinRel::NDvd(k.clone()),
            LinRel::NDvd(k) => out.rel = LinRel::Dvd(k.clone()),
            LinRel::Le => {
                let e = self.expr().scaled(&-Q::one());
                out = self.with_expr(e, LinRel::Lt);
            }
            LinRel::Lt => {
                let e = self.expr().scaled(&-Q::one());
                out = self.with_expr(e, LinRel::Le);
            }
        }
        out
    }

    pub fn normalize(mut self) -> Norm {
        self.coeffs.retain(|_, c| !c.is_zero());
        if self.sort.is_int() {
            normalize_int(self)
        } else {
            normalize_real(self)
        }
    }

    pub fn to_literal(&self) -> Literal {
        let mut coeffs = self.coeffs.clone();
        let mut constant = self.constant.clone();
        let scale = Q::from_integer(lcm_denoms(coeffs.values().chain(std::iter::once(&constant))));
        if !scale.is_one() && !matches!(self.rel, LinRel::Dvd(_) | LinRel::NDvd(_)) {
            for c in coeffs.values_mut() {
                *c *= &scale;
            }
            constant *= &scale;
        }
        if let LinRel::Dvd(k) | LinRel::NDvd(k) = &self.rel {
            let t = Term::linear(coeffs.into_iter().map(|(t, c)| (c, t)), constant, self.sort.clone());
            return Literal::new(Atom::Dvd(k.clone(), t), matches!(self.rel, LinRel::Dvd(_)));
        }
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (t, c) in coeffs {
            if c.is_positive() {
                pos.push((c, t));
            } else {
                neg.push((-c, t));
            }
        }
        let (kp, kn) = if constant.is_positive() { (constant, Q::zero()) } else { (Q::zero(), -constant) };
        let swap = pos.is_empty();
        let lhs = Term::linear(pos, kp, self.sort.clone());
        let rhs = Term::linear(neg, kn, self.sort.clone());
        let (rel, positive) = match self.rel {
            LinRel::Eq => (Rel::Eq, true),
            LinRel::Ne => (Rel::Eq, false),
            LinRel::Le => (Rel::Le, true),
            LinRel::Lt => (Rel::Lt, true),
            _ => unreachable!(),
        };
        if swap {
            Literal::new(Atom::Cmp(rel.flip(), rhs, lhs), positive)
        } else {
            Literal::new(Atom::Cmp(rel, lhs, rhs), positive)
        }
    }
}

fn occurs_in(x: &Term, t: &Term) -> bool {
    t == x || t.children().iter().any(|c| occurs_in(x, c))
}

fn eval(rel: &LinRel, k: &Q) -> bool {
    match rel {
        LinRel::Eq => k.is_zero(),
        LinRel::Ne => !k.is_zero(),
        LinRel::Le => !k.is_positive(),
        LinRel::Lt => k.is_negative(),
        LinRel::Dvd(m) => k.is_integer() && (k.numer() % m).is_zero(),
        LinRel::NDvd(m) => !(k.is_integer() && (k.numer() % m).is_zero()),
    }
}

fn normalize_real(mut a: LinAtom) -> Norm {
    if a.coeffs.is_empty() {
        return if eval(&a.rel, &a.constant) { Norm::True } else { Norm::False };
    }
    let lead = a.coeffs.values().next().cloned().unwrap_or_else(Q::one);
    let factor = match a.rel {
        LinRel::Le | LinRel::Lt => Q::one() / lead.abs(),
        _ => Q::one() / lead,
    };
    for c in a.coeffs.values_mut() {
        *c *= &factor;
    }
    a.constant *= &factor;
    Norm::Atom(a)
}

fn normalize_int(mut a: LinAtom) -> Norm {
    let d = lcm_denoms(a.coeffs.values().chain(std::iter::once(&a.constant)));
    if let LinRel::Dvd(k) | LinRel::NDvd(k) = &mut a.rel {
        *k *= &d;
    }
    let dq = Q::from_integer(d);
    let mut cs: BTreeMap<Term, BigInt> = a.coeffs.iter().map(|(t, c)| (t.clone(), (c * &dq).to_integer())).collect();
    let mut k = (&a.constant * &dq).to_integer();
    if a.rel == LinRel::Lt {
        k += 1;
        a.rel = LinRel::Le;
    }
    if cs.is_empty() {
        return if eval(&a.rel, &Q::from_integer(k)) { Norm::True } else { Norm::False };
    }
    let g = gcd_all(cs.values());
    match a.rel.clone() {
        LinRel::Le => {
            for c in cs.values_mut() {
                *c = &*c / &g;
            }
            k = ceil_div(&k, &g);
        }
        LinRel::Eq | LinRel::Ne => {
            if !(&k % &g).is_zero() {
                return if a.rel == LinRel::Eq { Norm::False } else { Norm::True };
            }
            let sign = if cs.values().next().is_some_and(|c| c.is_negative()) { -BigInt::one() } else { BigInt::one() };
            let div = &g * &sign;
            for c in cs.values_mut() {
                *c = &*c / &div;
            }
            k = &k / &div;
        }
        LinRel::Dvd(m) | LinRel::NDvd(m) => {
            let is_dvd = matches!(a.rel, LinRel::Dvd(_));
            let m = m.abs();
            for c in cs.values_mut() {
                *c = c.mod_floor(&m);
            }
            cs.retain(|_, c| !c.is_zero());
            k = k.mod_floor(&m);
            if cs.is_empty() {
                let holds = k.is_zero();
                return if holds == is_dvd { Norm::True } else { Norm::False };
            }
            let g = gcd_all(cs.values().chain([&k, &m]));
            let m = &m / &g;
            for c in cs.values_mut() {
                *c = &*c / &g;
            }
            k = &k / &g;
            if m.is_one() {
                return if is_dvd { Norm::True } else { Norm::False };
            }
            a.rel = if is_dvd { LinRel::Dvd(m) } else { LinRel::NDvd(m) };
        }
        LinRel::Lt => unreachable!(),
    }
    a.coeffs = cs.into_iter().map(|(t, c)| (t, Q::from_integer(c))).collect();
    a.constant = Q::from_integer(k);
    Norm::Atom(a)
}

/// Linear expression over term keys.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LinExpr {
    pub coeffs: BTreeMap<Term, Q>,
    pub constant: Q,
}

impl LinExpr {
    pub fn constant(k: Q) -> LinExpr {
        LinExpr { coeffs: BTreeMap::new(), constant: k }
    }

    pub fn add_scaled(&mut self, other: &LinExpr, s: &Q) {
        for (t, c) in &other.coeffs {
            let e = self.coeffs.entry(t.clone()).or_insert_with(Q::zero);
            *e += c * s;
        }
        self.coeffs.retain(|_, c| !c.is_zero());
        self.constant += &other.constant * s;
    }

    pub fn scaled(&self, s: &Q) -> LinExpr {
        let mut out = LinExpr::default();
        out.add_scaled(self, s);
        out
    }

    pub fn to_term(&self, sort: &Sort) -> Term {
        Term::linear(self.coeffs.iter().map(|(t, c)| (c.clone(), t.clone())), self.constant.clone(), sort.clone())
    }
}

impl fmt::Display for LinAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_literal())
    }
}

pub fn floor_q(a: &Q) -> BigInt {
    floor_div(a.numer(), a.denom())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::name;

    fn x() -> Term {
        Term::constant(name("x"), Sort::int())
    }

    #[test]
    fn integer_strict_bounds_are_tightened() {
        let a = LinAtom::new([(x(), Q::from_integer(2.into()))].into(), Q::from_integer((-3).into()), LinRel::Lt, Sort::int());
        // 2x - 3 < 0  <=>  x <= 1
        let Norm::Atom(n) = a.normalize() else { panic!() };
        assert_eq!(n.to_literal().to_string(), "x <= 1");
    }

    #[test]
    fn divisibility_normalizes() {
        let a = LinAtom::new([(x(), Q::from_integer(4.into()))].into(), Q::from_integer(2.into()), LinRel::Dvd(6.into()), Sort::int());
        // 6 | 4x + 2  <=>  3 | 2x + 1
        let Norm::Atom(n) = a.normalize() else { panic!() };
        assert_eq!(n.rel, LinRel::Dvd(3.into()));
        let b = LinAtom::new(BTreeMap::new(), Q::from_integer(4.into()), LinRel::Dvd(2.into()), Sort::int());
        assert_eq!(b.normalize(), Norm::True);
    }

    #[test]
    fn literal_round_trip_keeps_meaning() {
        let y = Term::constant(name("y"), Sort::int());
        let l = Literal::cmp(Rel::Ge, x(), y.clone());
        let a = LinAtom::from_literal(&l).unwrap();
        assert_eq!(a.to_literal().to_string(), "y <= x");
    }
}
