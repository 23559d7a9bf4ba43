use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::error::{ErrorKind, SpecError};
use super::lexer::{lex, Tok, Token};
use super::{Closure, Mode, ProblemSpec, SpecOptions, TheoryLevel, UpdateSpec};
use crate::logic::{
    Atom, Clause, ClauseSet, Formula, FunDecl, GuardedCase, Literal, Name, PredDecl, Rel, Role, Signature,
    SignatureError, Sort, SortKind, Term, Q,
};

/// Intermediate term: numerals stay unsorted until context fixes their sort.
#[derive(Clone, Debug)]
enum PTerm {
    Num(Q),
    T(Term),
}

/// Where a formula occurs; controls which symbols are admissible.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Context {
    /// Only unprimed symbols.
    State,
    /// Update guard: unprimed symbols only, reported as a guard violation.
    Guard,
    /// Update effect of the given function: its primed copy is allowed.
    Effect,
    /// Anything declared.
    Any,
}

pub struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    sig: &'a Signature,
    scope: Vec<(Name, Sort)>,
    context: Context,
    allowed_primed: Option<Name>,
}

fn sig_err(e: SignatureError, line: usize, col: usize) -> SpecError {
    let kind = match &e {
        SignatureError::UnknownSymbol(_) | SignatureError::UnknownSort(_) => ErrorKind::Undeclared,
        _ => ErrorKind::RoleConflict,
    };
    SpecError::new(kind, line, col, e.to_string())
}

impl<'a> Parser<'a> {
    pub fn new(src: &str, sig: &'a Signature) -> Result<Parser<'a>, SpecError> {
        Ok(Parser { toks: lex(src)?, pos: 0, sig, scope: Vec::new(), context: Context::Any, allowed_primed: None })
    }

    fn from_tokens(toks: Vec<Token>, sig: &'a Signature) -> Parser<'a> {
        Parser { toks, pos: 0, sig, scope: Vec::new(), context: Context::Any, allowed_primed: None }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        match self.toks.get(self.pos).or(self.toks.last()) {
            Some(t) => (t.line, t.col),
            None => (1, 1),
        }
    }

    fn err(&self, kind: ErrorKind, msg: impl Into<String>) -> SpecError {
        let (l, c) = self.here();
        SpecError::new(kind, l, c, msg)
    }

    fn unexpected(&self, expected: &[&str]) -> SpecError {
        let found = self.peek().map(Tok::describe).unwrap_or_else(|| "end of input".into());
        self.err(ErrorKind::Syntax, format!("unexpected {}", found)).expecting(expected)
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok) -> Result<(), SpecError> {
        if self.eat(t) {
            Ok(())
        } else {
            let d = t.describe();
            Err(self.unexpected(&[d.as_str()]))
        }
    }

    fn ident(&mut self) -> Result<String, SpecError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SpecError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&[kw]))
        }
    }

    fn end_line(&mut self) -> Result<(), SpecError> {
        if self.peek().is_none() || self.eat(&Tok::Newline) {
            Ok(())
        } else {
            Err(self.unexpected(&["end of line"]))
        }
    }

    fn skip_newlines(&mut self) {
        while self.eat(&Tok::Newline) {}
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn sort_named(&self, name: &str) -> Result<Sort, SpecError> {
        self.sig.sort(name).cloned().ok_or_else(|| self.err(ErrorKind::Undeclared, format!("unknown sort `{}`", name)))
    }

    fn var_decls(&mut self) -> Result<Vec<(Name, Sort)>, SpecError> {
        let mut out = Vec::new();
        loop {
            let x = self.ident()?;
            self.expect(&Tok::Colon)?;
            let s = self.ident()?;
            let sort = self.sort_named(&s)?;
            out.push((Name::from(x.as_str()), sort));
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        Ok(out)
    }

    /// `[forall x:s, ... .] formula`, clausified.
    pub fn clause_statement(&mut self) -> Result<Vec<Clause>, SpecError> {
        let mark = self.scope.len();
        if self.eat_kw("forall") {
            let vs = self.var_decls()?;
            self.expect(&Tok::Dot)?;
            self.scope.extend(vs);
        }
        let f = self.formula();
        self.scope.truncate(mark);
        let f = f?;
        let cnf = f.to_cnf(100_000).map_err(|e| self.err(ErrorKind::Shape, e.to_string()))?;
        Ok(cnf.into_iter().map(Clause::new).collect())
    }

    pub fn formula(&mut self) -> Result<Formula, SpecError> {
        let lhs = self.implication()?;
        if self.eat(&Tok::Iff) {
            let rhs = self.implication()?;
            return Ok(Formula::and(vec![
                Formula::implies(lhs.clone(), rhs.clone()),
                Formula::implies(rhs, lhs),
            ]));
        }
        Ok(lhs)
    }

    fn implication(&mut self) -> Result<Formula, SpecError> {
        let lhs = self.disjunction()?;
        if self.eat(&Tok::Implies) {
            let rhs = self.implication()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula, SpecError> {
        let mut parts = vec![self.conjunction()?];
        while self.eat(&Tok::Or) {
            parts.push(self.conjunction()?);
        }
        Ok(Formula::or(parts))
    }

    fn conjunction(&mut self) -> Result<Formula, SpecError> {
        let mut parts = vec![self.negation()?];
        while self.eat(&Tok::And) {
            parts.push(self.negation()?);
        }
        Ok(Formula::and(parts))
    }

    fn negation(&mut self) -> Result<Formula, SpecError> {
        if self.eat(&Tok::Not) {
            return Ok(Formula::not(self.negation()?));
        }
        self.atom_formula()
    }

    fn atom_formula(&mut self) -> Result<Formula, SpecError> {
        if self.eat_kw("true") {
            return Ok(Formula::True);
        }
        if self.eat_kw("false") {
            return Ok(Formula::False);
        }
        if self.is_kw("dvd") && self.peek_at(1) == Some(&Tok::LParen) {
            self.pos += 2;
            let k = match self.peek() {
                Some(Tok::Num(n)) => n.clone(),
                _ => return Err(self.unexpected(&["numeral"])),
            };
            self.pos += 1;
            self.expect(&Tok::Comma)?;
            let t = self.term()?;
            self.expect(&Tok::RParen)?;
            let t = self.finish(t, &Sort::int())?;
            if !t.sort().is_int() || k <= BigInt::zero() {
                return Err(self.err(ErrorKind::Sort, "divisibility needs a positive modulus over an integer sort"));
            }
            return Ok(Formula::Lit(Literal::new(Atom::Dvd(k, t), true)));
        }
        if let Some(Tok::Ident(p)) = self.peek() {
            if let Some(decl) = self.sig.predicate(p).cloned() {
                self.pos += 1;
                let mut args = Vec::new();
                if !decl.args.is_empty() {
                    args = self.arguments(&decl.name, &decl.args)?;
                }
                return Ok(Formula::Lit(Literal::new(Atom::Pred(decl.name.clone(), args), true)));
            }
        }
        if self.peek() == Some(&Tok::LParen) {
            let save = self.pos;
            if let Ok(f) = self.comparison() {
                return Ok(f);
            }
            self.pos = save;
            self.pos += 1;
            let f = self.formula()?;
            self.expect(&Tok::RParen)?;
            return Ok(f);
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Formula, SpecError> {
        let lhs = self.term()?;
        let rel = match self.peek() {
            Some(Tok::Eq) => (Rel::Eq, true),
            Some(Tok::Ne) => (Rel::Eq, false),
            Some(Tok::Le) => (Rel::Le, true),
            Some(Tok::Lt) => (Rel::Lt, true),
            Some(Tok::Ge) => (Rel::Ge, true),
            Some(Tok::Gt) => (Rel::Gt, true),
            _ => return Err(self.unexpected(&["=", "!=", "<=", "<", ">=", ">"])),
        };
        self.pos += 1;
        let rhs = self.term()?;
        let sort = match (&lhs, &rhs) {
            (PTerm::T(a), PTerm::T(b)) => {
                if a.sort() != b.sort() {
                    return Err(self.err(ErrorKind::Sort, format!("cannot compare {} with {}", a.sort(), b.sort())));
                }
                a.sort().clone()
            }
            (PTerm::T(a), _) | (_, PTerm::T(a)) => a.sort().clone(),
            (PTerm::Num(a), PTerm::Num(b)) => {
                if a.is_integer() && b.is_integer() {
                    self.sig.sorts().find(|s| s.is_int()).cloned().unwrap_or_else(Sort::int)
                } else {
                    self.sig.sorts().find(|s| s.kind == SortKind::Real).cloned().unwrap_or_else(Sort::real)
                }
            }
        };
        if !sort.is_arith() && rel.0 != Rel::Eq {
            return Err(self.err(ErrorKind::Sort, format!("ordering on uninterpreted sort {}", sort)));
        }
        let a = self.finish(lhs, &sort)?;
        let b = self.finish(rhs, &sort)?;
        Ok(Formula::Lit(Literal::new(Atom::Cmp(rel.0, a, b), rel.1)))
    }

    fn finish(&self, t: PTerm, sort: &Sort) -> Result<Term, SpecError> {
        match t {
            PTerm::T(t) => Ok(t),
            PTerm::Num(n) => {
                if !sort.is_arith() {
                    return Err(self.err(ErrorKind::Sort, format!("numeral at uninterpreted sort {}", sort)));
                }
                if sort.is_int() && !n.is_integer() {
                    return Err(self.err(ErrorKind::Sort, format!("non-integral numeral at sort {}", sort)));
                }
                Ok(Term::num(n, sort.clone()))
            }
        }
    }

    fn term(&mut self) -> Result<PTerm, SpecError> {
        let mut acc = self.product()?;
        loop {
            let neg = if self.eat(&Tok::Plus) {
                false
            } else if self.eat(&Tok::Minus) {
                true
            } else {
                break;
            };
            let rhs = self.product()?;
            let rhs = if neg { self.scale(rhs, &-Q::one())? } else { rhs };
            acc = self.add(acc, rhs)?;
        }
        Ok(acc)
    }

    fn add(&self, a: PTerm, b: PTerm) -> Result<PTerm, SpecError> {
        Ok(match (a, b) {
            (PTerm::Num(x), PTerm::Num(y)) => PTerm::Num(x + y),
            (PTerm::Num(k), PTerm::T(t)) | (PTerm::T(t), PTerm::Num(k)) => {
                self.arith(&t)?;
                PTerm::T(t.add_const(&k))
            }
            (PTerm::T(x), PTerm::T(y)) => {
                self.arith(&x)?;
                if x.sort() != y.sort() {
                    return Err(self.err(ErrorKind::Sort, format!("cannot add {} and {}", x.sort(), y.sort())));
                }
                PTerm::T(x.add(&y))
            }
        })
    }

    fn arith(&self, t: &Term) -> Result<(), SpecError> {
        if t.sort().is_arith() {
            Ok(())
        } else {
            Err(self.err(ErrorKind::Sort, format!("arithmetic on uninterpreted sort {}", t.sort())))
        }
    }

    fn scale(&self, t: PTerm, k: &Q) -> Result<PTerm, SpecError> {
        Ok(match t {
            PTerm::Num(n) => PTerm::Num(n * k),
            PTerm::T(t) => {
                self.arith(&t)?;
                if t.sort().is_int() && !k.is_integer() {
                    return Err(self.err(ErrorKind::Sort, format!("fractional coefficient at integer sort {}", t.sort())));
                }
                PTerm::T(t.scale(k))
            }
        })
    }

    fn product(&mut self) -> Result<PTerm, SpecError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(&Tok::Star) {
                let rhs = self.unary()?;
                acc = match (acc, rhs) {
                    (PTerm::Num(k), t) | (t, PTerm::Num(k)) => self.scale(t, &k)?,
                    _ => return Err(self.err(ErrorKind::Sort, "nonlinear product")),
                };
            } else if self.eat(&Tok::Slash) {
                let rhs = self.unary()?;
                match rhs {
                    PTerm::Num(k) if !k.is_zero() => acc = self.scale(acc, &(Q::one() / k))?,
                    PTerm::Num(_) => return Err(self.err(ErrorKind::Sort, "division by zero")),
                    PTerm::T(_) => return Err(self.err(ErrorKind::Sort, "division by a non-numeral")),
                }
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<PTerm, SpecError> {
        if self.eat(&Tok::Minus) {
            let t = self.unary()?;
            return self.scale(t, &-Q::one());
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<PTerm, SpecError> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(PTerm::Num(Q::from_integer(n)))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let t = self.term()?;
                self.expect(&Tok::RParen)?;
                Ok(t)
            }
            Some(Tok::Ident(x)) => {
                if let Some((n, s)) = self.scope.iter().rev().find(|(n, _)| n.as_ref() == x.as_str()).cloned() {
                    self.pos += 1;
                    return Ok(PTerm::T(Term::var(n, s)));
                }
                let Some(decl) = self.sig.function(&x).cloned() else {
                    return Err(self.err(ErrorKind::Undeclared, format!("undeclared symbol `{}`", x)));
                };
                self.check_role(&decl)?;
                self.pos += 1;
                if decl.args.is_empty() {
                    return Ok(PTerm::T(Term::constant(decl.name.clone(), decl.result.clone())));
                }
                let args = self.arguments(&decl.name, &decl.args)?;
                Ok(PTerm::T(Term::app(decl.name.clone(), args, decl.result.clone())))
            }
            _ => Err(self.unexpected(&["term"])),
        }
    }

    fn check_role(&self, decl: &FunDecl) -> Result<(), SpecError> {
        if decl.role != Role::Primed {
            return Ok(());
        }
        match self.context {
            Context::Any => Ok(()),
            Context::Guard => Err(self.err(ErrorKind::Shape, format!("primed symbol in guard: `{}`", decl.name))),
            Context::Effect if self.allowed_primed.as_ref() == Some(&decl.name) => Ok(()),
            Context::Effect => Err(self.err(
                ErrorKind::Shape,
                format!("effect mentions `{}`; only the updated symbol may be primed", decl.name),
            )),
            Context::State => Err(self.err(ErrorKind::Shape, format!("primed symbol outside an update: `{}`", decl.name))),
        }
    }

    fn arguments(&mut self, f: &Name, sorts: &[Sort]) -> Result<Vec<Term>, SpecError> {
        let close = if self.eat(&Tok::LBrack) {
            Tok::RBrack
        } else if self.eat(&Tok::LParen) {
            Tok::RParen
        } else {
            return Err(self.unexpected(&["(", "["]));
        };
        let mut args = Vec::new();
        loop {
            let t = self.term()?;
            let i = args.len();
            let Some(s) = sorts.get(i) else {
                return Err(self.err(ErrorKind::Sort, format!("`{}` takes {} arguments", f, sorts.len())));
            };
            let t = self.finish(t, s)?;
            if t.sort() != s {
                return Err(self.err(
                    ErrorKind::Sort,
                    format!("argument {} of `{}` has sort {}, expected {}", i + 1, f, t.sort(), s),
                ));
            }
            args.push(t);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(&close)?;
        if args.len() != sorts.len() {
            return Err(self.err(ErrorKind::Sort, format!("`{}` takes {} arguments, got {}", f, sorts.len(), args.len())));
        }
        Ok(args)
    }

    fn statements_until_end(&mut self) -> Result<Vec<Clause>, SpecError> {
        let mut out = Vec::new();
        loop {
            self.skip_newlines();
            if self.eat_kw("end") {
                self.end_line()?;
                return Ok(out);
            }
            if self.at_end() {
                return Err(self.unexpected(&["end"]));
            }
            out.extend(self.clause_statement()?);
            self.end_line()?;
        }
    }

    /// A conjunction of literals (`true` gives the empty conjunction).
    fn literal_conjunction(&mut self, what: &str) -> Result<Vec<Literal>, SpecError> {
        let f = self.disjunction()?.nnf();
        let mut out = Vec::new();
        let parts = match f {
            Formula::True => Vec::new(),
            Formula::And(fs) => fs,
            other => vec![other],
        };
        for p in parts {
            match p {
                Formula::Lit(l) => out.push(l),
                _ => return Err(self.err(ErrorKind::Shape, format!("{} must be a conjunction of literals", what))),
            }
        }
        Ok(out)
    }
}

/// Parses a formula over `sig` with the given free variables in scope.
pub fn parse_formula(src: &str, sig: &Signature, vars: &[(Name, Sort)]) -> Result<Formula, SpecError> {
    let mut p = Parser::new(src, sig)?;
    p.scope = vars.to_vec();
    p.skip_newlines();
    let f = p.formula()?;
    p.skip_newlines();
    if !p.at_end() {
        return Err(p.unexpected(&["end of input"]));
    }
    Ok(f)
}

/// Parses newline-separated clause statements (each optionally `forall`-prefixed).
pub fn parse_clauses(src: &str, sig: &Signature) -> Result<ClauseSet, SpecError> {
    let mut p = Parser::new(src, sig)?;
    let mut out = Vec::new();
    loop {
        p.skip_newlines();
        if p.at_end() {
            break;
        }
        out.extend(p.clause_statement()?);
        p.end_line()?;
    }
    Ok(ClauseSet::new(out))
}

/// Parses one term (numerals default to the first integer sort).
pub fn parse_term(src: &str, sig: &Signature, vars: &[(Name, Sort)]) -> Result<Term, SpecError> {
    let mut p = Parser::new(src, sig)?;
    p.scope = vars.to_vec();
    let t = p.term()?;
    p.skip_newlines();
    if !p.at_end() {
        return Err(p.unexpected(&["end of input"]));
    }
    let default = sig.sorts().find(|s| s.is_int()).cloned().unwrap_or_else(Sort::int);
    p.finish(t, &default)
}

fn parse_role(s: &str) -> Option<Role> {
    match s {
        "parameter" => Some(Role::Parameter),
        "extension" => Some(Role::Extension),
        "base" => Some(Role::Base),
        _ => None,
    }
}

/// Parses a complete problem file.
pub fn parse_spec(src: &str) -> Result<ProblemSpec, SpecError> {
    let empty = Signature::new();
    let toks = lex(src)?;
    let mut p = Parser::from_tokens(toks.clone(), &empty);
    p.skip_newlines();
    p.expect_kw("version")?;
    match p.peek().cloned() {
        Some(Tok::Num(n)) if n == BigInt::one() => p.pos += 1,
        Some(Tok::Num(n)) => return Err(p.err(ErrorKind::Version, format!("unsupported version {}", n))),
        _ => return Err(p.unexpected(&["version number"])),
    }
    p.end_line()?;
    let mut sig = Signature::new();
    let mut primed_order: Vec<Name> = Vec::new();
    // First pass: sorts and signature, which every later block depends on.
    let mut pos = p.pos;
    let mut seen_sig = false;
    loop {
        let mut q = Parser::from_tokens(toks.clone(), &empty);
        q.pos = pos;
        q.skip_newlines();
        if q.at_end() {
            break;
        }
        let (line, col) = q.here();
        let kw = q.ident()?;
        match kw.as_str() {
            "sorts" => {
                q.end_line()?;
                loop {
                    q.skip_newlines();
                    if q.eat_kw("end") {
                        q.end_line()?;
                        break;
                    }
                    let (l, c) = q.here();
                    let n = q.ident()?;
                    q.expect(&Tok::Colon)?;
                    let kind = match q.ident()?.as_str() {
                        "integer" => SortKind::Int,
                        "rational" => SortKind::Real,
                        "uninterpreted" => SortKind::Uninterpreted,
                        _ => return Err(q.unexpected(&["integer", "rational", "uninterpreted"])),
                    };
                    sig.add_sort(Sort::new(&n, kind)).map_err(|e| sig_err(e, l, c))?;
                    q.end_line()?;
                }
            }
            "signature" => {
                seen_sig = true;
                q.end_line()?;
                loop {
                    q.skip_newlines();
                    if q.eat_kw("end") {
                        q.end_line()?;
                        break;
                    }
                    let (l, c) = q.here();
                    let head = q.ident()?;
                    if head == "primed" {
                        while let Some(Tok::Ident(_)) = q.peek() {
                            let (l, c) = q.here();
                            let n = q.ident()?;
                            sig.add_primed(&n).map_err(|e| sig_err(e, l, c))?;
                            primed_order.push(Name::from(n.as_str()));
                            q.eat(&Tok::Comma);
                        }
                        q.end_line()?;
                        continue;
                    }
                    let pred = head == "predicate";
                    let role = parse_role(&head);
                    if role.is_none() && !pred {
                        return Err(SpecError::new(ErrorKind::Syntax, l, c, format!("unexpected `{}`", head))
                            .expecting(&["parameter", "extension", "base", "primed", "predicate"]));
                    }
                    let mut names = vec![(q.here(), q.ident()?)];
                    while q.eat(&Tok::Comma) {
                        names.push((q.here(), q.ident()?));
                    }
                    q.expect(&Tok::Colon)?;
                    let mut sorts = vec![q.ident()?];
                    while q.eat(&Tok::Comma) {
                        sorts.push(q.ident()?);
                    }
                    let (args, result) = if q.eat(&Tok::Implies) {
                        (sorts, Some(q.ident()?))
                    } else if pred {
                        (sorts, None)
                    } else if sorts.len() == 1 {
                        (Vec::new(), sorts.pop())
                    } else {
                        return Err(q.unexpected(&["->"]));
                    };
                    let lookup = |s: &str| {
                        sig.sort(s).cloned().ok_or_else(|| SpecError::new(ErrorKind::Undeclared, l, c, format!("unknown sort `{}`", s)))
                    };
                    let args: Vec<Sort> = args.iter().map(|s| lookup(s)).collect::<Result<_, _>>()?;
                    let result = result.map(|s| lookup(&s)).transpose()?;
                    for ((l, c), n) in names {
                        let r = match (&result, role) {
                            (Some(res), Some(role)) => sig.add_function(FunDecl {
                                name: Name::from(n.as_str()),
                                args: args.clone(),
                                result: res.clone(),
                                role,
                            }),
                            _ => sig.add_predicate(PredDecl { name: Name::from(n.as_str()), args: args.clone() }),
                        };
                        r.map_err(|e| sig_err(e, l, c))?;
                    }
                    q.end_line()?;
                }
            }
            "theory" | "init" | "update" | "property" | "options" => {
                // Skip to the matching `end` line.
                loop {
                    if q.at_end() {
                        return Err(q.unexpected(&["end"]));
                    }
                    let at_line_start = q.pos == 0 || q.toks[q.pos - 1].tok == Tok::Newline;
                    if at_line_start && q.is_kw("end") {
                        q.pos += 1;
                        q.end_line()?;
                        break;
                    }
                    q.pos += 1;
                }
            }
            other => {
                return Err(SpecError::new(ErrorKind::Syntax, line, col, format!("unexpected `{}`", other)).expecting(&[
                    "sorts",
                    "signature",
                    "theory",
                    "init",
                    "update",
                    "property",
                    "options",
                ]))
            }
        }
        pos = q.pos;
    }
    if !seen_sig {
        return Err(SpecError::new(ErrorKind::Syntax, 1, 1, "missing signature block"));
    }
    // Second pass: formulas against the complete signature.
    let mut q = Parser::from_tokens(toks, &sig);
    q.pos = p.pos;
    let mut levels = Vec::new();
    let mut init = Vec::new();
    let mut updates: Vec<UpdateSpec> = Vec::new();
    let mut property = Vec::new();
    let mut options = SpecOptions::default();
    loop {
        q.skip_newlines();
        if q.at_end() {
            break;
        }
        let kw = q.ident()?;
        match kw.as_str() {
            "sorts" | "signature" => loop {
                let at_line_start = q.toks[q.pos - 1].tok == Tok::Newline;
                if at_line_start && q.is_kw("end") {
                    q.pos += 1;
                    q.end_line()?;
                    break;
                }
                q.pos += 1;
            },
            "theory" => {
                q.expect_kw("level")?;
                let name = q.ident()?;
                q.expect_kw("closure")?;
                let closure = match q.ident()?.as_str() {
                    "identity" => Closure::Identity,
                    "apf" => Closure::Apf,
                    _ => return Err(q.unexpected(&["identity", "apf"])),
                };
                q.end_line()?;
                q.context = Context::State;
                let clauses = q.statements_until_end()?;
                levels.push(TheoryLevel { name: Name::from(name.as_str()), clauses: ClauseSet::new(clauses), closure });
            }
            "init" => {
                q.end_line()?;
                q.context = Context::State;
                init.extend(q.statements_until_end()?);
            }
            "property" => {
                q.end_line()?;
                q.context = Context::State;
                property.extend(q.statements_until_end()?);
            }
            "update" => {
                let (l, c) = q.here();
                let f = q.ident()?;
                let Some(decl) = sig.function(&f).cloned() else {
                    return Err(SpecError::new(ErrorKind::Undeclared, l, c, format!("undeclared symbol `{}`", f)));
                };
                let Some(fp) = sig.prime_of(&f).cloned() else {
                    return Err(SpecError::new(ErrorKind::RoleConflict, l, c, format!("`{}` is updated but has no primed partner", f)));
                };
                if updates.iter().any(|u| u.function.as_ref() == f) {
                    return Err(SpecError::new(ErrorKind::Shape, l, c, format!("second update block for `{}`", f)));
                }
                q.end_line()?;
                q.skip_newlines();
                let mut vars = Vec::new();
                if q.eat_kw("forall") {
                    vars = q.var_decls()?;
                    q.eat(&Tok::Dot);
                    q.end_line()?;
                }
                if vars.len() != decl.args.len() || vars.iter().zip(&decl.args).any(|((_, s), t)| s != t) {
                    return Err(SpecError::new(
                        ErrorKind::Sort,
                        l,
                        c,
                        format!("update of `{}` must quantify {} variables matching its argument sorts", f, decl.args.len()),
                    ));
                }
                let mut cases = Vec::new();
                loop {
                    q.skip_newlines();
                    if q.eat_kw("end") {
                        q.end_line()?;
                        break;
                    }
                    q.expect_kw("case")?;
                    q.scope = vars.clone();
                    q.context = Context::Guard;
                    let guard = q.literal_conjunction("a guard")?;
                    q.expect(&Tok::Colon)?;
                    q.context = Context::Effect;
                    q.allowed_primed = Some(fp.clone());
                    let (el, ec) = q.here();
                    let effect = q.literal_conjunction("an effect")?;
                    q.allowed_primed = None;
                    q.scope.clear();
                    let mentions = effect.iter().any(|l| {
                        let mut syms = std::collections::BTreeSet::new();
                        l.collect_symbols(&mut syms);
                        syms.contains(&fp)
                    });
                    if !mentions {
                        return Err(SpecError::new(ErrorKind::Shape, el, ec, format!("effect does not constrain `{}`", fp)));
                    }
                    cases.push(GuardedCase { guard, effect });
                    q.end_line()?;
                }
                if cases.is_empty() {
                    return Err(SpecError::new(ErrorKind::Shape, l, c, format!("update of `{}` has no cases", f)));
                }
                updates.push(UpdateSpec { function: decl.name.clone(), vars, cases });
            }
            "options" => {
                q.end_line()?;
                loop {
                    q.skip_newlines();
                    if q.eat_kw("end") {
                        q.end_line()?;
                        break;
                    }
                    let (l, c) = q.here();
                    let key = q.ident()?;
                    match key.as_str() {
                        "keep" | "eliminate" => {
                            let mut names = Vec::new();
                            while let Some(Tok::Ident(_)) = q.peek() {
                                let (l, c) = q.here();
                                let n = q.ident()?;
                                if sig.function(&n).is_none() {
                                    return Err(SpecError::new(ErrorKind::Undeclared, l, c, format!("undeclared symbol `{}`", n)));
                                }
                                names.push(Name::from(n.as_str()));
                                q.eat(&Tok::Comma);
                            }
                            if key == "keep" {
                                options.keep = Some(names);
                            } else {
                                options.eliminate = names;
                            }
                        }
                        "max_iterations" => match q.peek().cloned() {
                            Some(Tok::Num(n)) if n >= BigInt::one() => {
                                q.pos += 1;
                                options.max_iterations = Some(n.try_into().unwrap_or(usize::MAX));
                            }
                            _ => return Err(q.unexpected(&["positive numeral"])),
                        },
                        "mode" => {
                            options.mode = Some(match q.ident()?.as_str() {
                                "naive" => Mode::Naive,
                                "refined" => Mode::Refined,
                                _ => return Err(q.unexpected(&["naive", "refined"])),
                            })
                        }
                        "apf_guard" => {
                            options.apf_guard = Some(match q.ident()?.as_str() {
                                "on" => true,
                                "off" => false,
                                _ => return Err(q.unexpected(&["on", "off"])),
                            })
                        }
                        other => {
                            return Err(SpecError::new(ErrorKind::Syntax, l, c, format!("unknown option `{}`", other))
                                .expecting(&["keep", "eliminate", "max_iterations", "mode", "apf_guard"]))
                        }
                    }
                    q.end_line()?;
                }
            }
            _ => return Err(q.unexpected(&["block keyword"])),
        }
        q.context = Context::Any;
    }
    for f in &primed_order {
        if !updates.iter().any(|u| &u.function == f) {
            return Err(SpecError::new(ErrorKind::Shape, 1, 1, format!("primed symbol `{}'` has no update block", f)));
        }
    }
    Ok(ProblemSpec {
        signature: sig,
        levels,
        init: ClauseSet::new(init),
        updates,
        property: ClauseSet::new(property),
        options,
        primed_order,
    })
}
