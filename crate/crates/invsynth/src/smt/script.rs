use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use super::expr::Expr;
use crate::logic::{Atom, Literal, Name, Rel, Sort, SortKind, Term, TermKind, Q};

const RESERVED: &[&str] = &[
    "abs", "and", "as", "assert", "check-sat", "declare-fun", "define-fun", "distinct", "div", "divisible", "exists",
    "false", "forall", "is_int", "ite", "let", "match", "mod", "not", "or", "par", "select", "store", "to_int", "to_real",
    "true", "xor", "Int", "Real", "Bool", "Array", "_", "!",
];

fn simple(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// SMT-LIB spelling of a user symbol. Reserved words get a `#` suffix, which
/// cannot occur in source identifiers.
pub fn symbol(name: &str) -> String {
    if RESERVED.contains(&name) {
        format!("|{}#|", name)
    } else if simple(name) {
        name.to_string()
    } else {
        format!("|{}|", name)
    }
}

/// Inverse of [`symbol`].
pub fn unsymbol(s: &str) -> String {
    let s = s.strip_prefix('|').and_then(|s| s.strip_suffix('|')).unwrap_or(s);
    s.strip_suffix('#').unwrap_or(s).to_string()
}

fn sort_name(s: &Sort) -> String {
    match s.kind {
        SortKind::Int => "Int".into(),
        SortKind::Real => "Real".into(),
        SortKind::Uninterpreted => symbol(&s.name),
    }
}

fn numeral(n: &BigInt, real: bool) -> String {
    let digits = n.abs().to_string();
    let body = if real { format!("{}.0", digits) } else { digits };
    if n.is_negative() {
        format!("(- {})", body)
    } else {
        body
    }
}

fn rational(v: &Q, sort: &Sort) -> String {
    let real = !sort.is_int();
    if v.denom().is_one() {
        return numeral(v.numer(), real);
    }
    let frac = format!("(/ {} {})", numeral(&v.numer().abs(), true), numeral(v.denom(), true));
    if v.is_negative() {
        format!("(- {})", frac)
    } else {
        frac
    }
}

/// Incrementally built SMT-LIB script with declarations derived from the
/// sorts carried by terms.
#[derive(Default)]
pub struct Script {
    sorts: BTreeSet<String>,
    funs: BTreeMap<String, String>,
    asserts: Vec<String>,
    fresh: usize,
    quantified: bool,
    ints: bool,
    reals: bool,
}

impl Script {
    pub fn new() -> Script {
        Script::default()
    }

    pub fn is_quantified(&self) -> bool {
        self.quantified
    }

    fn declare_sort(&mut self, s: &Sort) {
        if s.kind == SortKind::Uninterpreted {
            self.sorts.insert(symbol(&s.name));
        }
    }

    fn declare(&mut self, name: &str, args: &[&Sort], result: &str) {
        let sym = symbol(name);
        let args: Vec<String> = args.iter().map(|s| sort_name(s)).collect();
        self.funs.entry(sym.clone()).or_insert_with(|| format!("(declare-fun {} ({}) {})", sym, args.join(" "), result));
    }

    fn term(&mut self, t: &Term) -> String {
        self.declare_sort(t.sort());
        match t.sort().kind {
            SortKind::Int => self.ints = true,
            SortKind::Real => self.reals = true,
            SortKind::Uninterpreted => {}
        }
        match t.kind() {
            TermKind::Var(x) => symbol(x),
            TermKind::Num(v) => rational(v, t.sort()),
            TermKind::App(f, args) => {
                let sorts: Vec<&Sort> = args.iter().map(|a| a.sort()).collect();
                self.declare(f, &sorts, &sort_name(t.sort()));
                if args.is_empty() {
                    symbol(f)
                } else {
                    let parts: Vec<String> = args.iter().map(|a| self.term(a)).collect();
                    format!("({} {})", symbol(f), parts.join(" "))
                }
            }
            TermKind::Lin(sum, k) => {
                let mut parts = Vec::new();
                for (c, a) in sum {
                    let s = self.term(a);
                    if c.is_one() {
                        parts.push(s);
                    } else {
                        parts.push(format!("(* {} {})", rational(c, t.sort()), s));
                    }
                }
                if !k.is_zero() {
                    parts.push(rational(k, t.sort()));
                }
                if parts.len() == 1 {
                    parts.pop().unwrap_or_default()
                } else {
                    format!("(+ {})", parts.join(" "))
                }
            }
        }
    }

    fn atom(&mut self, a: &Atom, positive: bool, under_forall: bool) -> String {
        match a {
            Atom::Cmp(r, x, y) => {
                let (x, y) = (self.term(x), self.term(y));
                let op = match r {
                    Rel::Eq => "=",
                    Rel::Le => "<=",
                    Rel::Lt => "<",
                    Rel::Ge => ">=",
                    Rel::Gt => ">",
                };
                let s = format!("({} {} {})", op, x, y);
                if positive {
                    s
                } else {
                    format!("(not {})", s)
                }
            }
            Atom::Pred(p, args) => {
                let sorts: Vec<&Sort> = args.iter().map(|a| a.sort()).collect();
                self.declare(p, &sorts, "Bool");
                let s = if args.is_empty() {
                    symbol(p)
                } else {
                    let parts: Vec<String> = args.iter().map(|a| self.term(a)).collect();
                    format!("({} {})", symbol(p), parts.join(" "))
                };
                if positive {
                    s
                } else {
                    format!("(not {})", s)
                }
            }
            Atom::Dvd(k, t) => {
                let ts = self.term(t);
                let ks = numeral(k, false);
                if under_forall {
                    let s = format!("(= (mod {} {}) 0)", ts, ks);
                    return if positive { s } else { format!("(not {})", s) };
                }
                // Quotient (and remainder) constants: k | t iff t = k*q.
                self.fresh += 1;
                let q = format!("|#q{}|", self.fresh);
                self.funs.insert(q.clone(), format!("(declare-fun {} () Int)", q));
                if positive {
                    format!("(= {} (* {} {}))", ts, ks, q)
                } else {
                    let r = format!("|#r{}|", self.fresh);
                    self.funs.insert(r.clone(), format!("(declare-fun {} () Int)", r));
                    format!(
                        "(and (= {} (+ (* {} {}) {})) (<= 1 {}) (<= {} {}))",
                        ts,
                        ks,
                        q,
                        r,
                        r,
                        r,
                        numeral(&(k - BigInt::one()), false)
                    )
                }
            }
        }
    }

    fn literal(&mut self, l: &Literal, under_forall: bool) -> String {
        self.atom(&l.atom, l.positive, under_forall)
    }

    fn expr(&mut self, e: &Expr, under_forall: bool) -> String {
        match e {
            Expr::True => "true".into(),
            Expr::False => "false".into(),
            Expr::Lit(l) => self.literal(l, under_forall),
            Expr::And(es) | Expr::Or(es) => {
                let op = if matches!(e, Expr::And(_)) { "and" } else { "or" };
                let parts: Vec<String> = es.iter().map(|e| self.expr(e, under_forall)).collect();
                format!("({} {})", op, parts.join(" "))
            }
            Expr::Not(inner) => {
                // Only reached for non-NNF input; encode divisibility inside by `mod`.
                format!("(not {})", self.expr(inner, true))
            }
            Expr::Forall(vs, body) | Expr::Exists(vs, body) => {
                self.quantified = true;
                let q = if matches!(e, Expr::Forall(..)) { "forall" } else { "exists" };
                let binders: Vec<String> = vs
                    .iter()
                    .map(|(x, s)| {
                        self.declare_sort(s);
                        format!("({} {})", symbol(x), sort_name(s))
                    })
                    .collect();
                let b = self.expr(body, true);
                format!("({} ({}) {})", q, binders.join(" "), b)
            }
        }
    }

    pub fn assert(&mut self, e: &Expr) {
        let nnf = e.nnf();
        let s = self.expr(&nnf, false);
        self.asserts.push(format!("(assert {})", s));
    }

    /// Names of all declared nullary symbols, as given in the source.
    pub fn constants(&self) -> Vec<Name> {
        self.funs
            .iter()
            .filter(|(k, d)| d.contains(" () ") && !k.starts_with("|#"))
            .map(|(k, _)| unsymbol(k).into())
            .collect()
    }

    /// Logic chosen from the sorts present and whether quantifiers occur.
    pub fn logic(&self) -> &'static str {
        if self.quantified {
            return "ALL";
        }
        match (self.ints || self.fresh > 0, self.reals) {
            (true, true) => "QF_UFLIRA",
            (false, true) => "QF_UFLRA",
            _ => "QF_UFLIA",
        }
    }

    pub fn render(&self, want_model: bool) -> String {
        let mut out = String::new();
        out.push_str("(set-option :produce-models true)\n");
        let _ = writeln!(out, "(set-logic {})", self.logic());
        for s in &self.sorts {
            let _ = writeln!(out, "(declare-sort {} 0)", s);
        }
        for d in self.funs.values() {
            let _ = writeln!(out, "{}", d);
        }
        for a in &self.asserts {
            let _ = writeln!(out, "{}", a);
        }
        out.push_str("(check-sat)\n");
        if want_model {
            out.push_str("(get-model)\n");
        }
        out.push_str("(exit)\n");
        out
    }
}

/// Renders a complete script for the conjunction of `assertions`.
pub fn render_script(assertions: &[Expr], want_model: bool) -> (String, bool) {
    let mut s = Script::new();
    for a in assertions {
        s.assert(a);
    }
    (s.render(want_model), s.is_quantified())
}
