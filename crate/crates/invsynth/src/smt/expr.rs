use std::fmt;

use crate::logic::{Clause, ClauseSet, Formula, GroundConj, Literal, Name, Sort};

/// First-order formula handed to the solver.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    True,
    False,
    Lit(Literal),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Not(Box<Expr>),
    Forall(Vec<(Name, Sort)>, Box<Expr>),
    Exists(Vec<(Name, Sort)>, Box<Expr>),
}

impl Expr {
    pub fn and(parts: Vec<Expr>) -> Expr {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Expr::True => {}
                Expr::False => return Expr::False,
                Expr::And(ps) => out.extend(ps),
                p => out.push(p),
            }
        }
        match out.len() {
            0 => Expr::True,
            1 => out.pop().unwrap_or(Expr::True),
            _ => Expr::And(out),
        }
    }

    pub fn or(parts: Vec<Expr>) -> Expr {
        let mut out = Vec::new();
        for p in parts {
            match p {
                Expr::False => {}
                Expr::True => return Expr::True,
                Expr::Or(ps) => out.extend(ps),
                p => out.push(p),
            }
        }
        match out.len() {
            0 => Expr::False,
            1 => out.pop().unwrap_or(Expr::False),
            _ => Expr::Or(out),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Expr {
        match e {
            Expr::True => Expr::False,
            Expr::False => Expr::True,
            Expr::Not(inner) => *inner,
            e => Expr::Not(Box::new(e)),
        }
    }

    pub fn literals(lits: &[Literal]) -> Expr {
        Expr::and(lits.iter().cloned().map(Expr::Lit).collect())
    }

    pub fn clause(c: &Clause) -> Expr {
        let body = Expr::or(c.lits.iter().cloned().map(Expr::Lit).collect());
        if c.vars.is_empty() {
            body
        } else {
            Expr::Forall(c.vars.clone(), Box::new(body))
        }
    }

    pub fn clauses(cs: &ClauseSet) -> Expr {
        Expr::and(cs.clauses.iter().map(Expr::clause).collect())
    }

    pub fn ground(g: &GroundConj) -> Expr {
        Expr::literals(&g.lits)
    }

    pub fn formula(f: &Formula) -> Expr {
        match f {
            Formula::True => Expr::True,
            Formula::False => Expr::False,
            Formula::Lit(l) => Expr::Lit(l.clone()),
            Formula::And(fs) => Expr::and(fs.iter().map(Expr::formula).collect()),
            Formula::Or(fs) => Expr::or(fs.iter().map(Expr::formula).collect()),
            Formula::Not(f) => Expr::not(Expr::formula(f)),
        }
    }

    /// Negation normal form: negations only on literals.
    pub fn nnf(&self) -> Expr {
        self.nnf_pol(true)
    }

    fn nnf_pol(&self, pos: bool) -> Expr {
        match (self, pos) {
            (Expr::True, true) | (Expr::False, false) => Expr::True,
            (Expr::True, false) | (Expr::False, true) => Expr::False,
            (Expr::Lit(l), true) => Expr::Lit(l.clone()),
            (Expr::Lit(l), false) => Expr::Lit(l.negate()),
            (Expr::And(es), true) | (Expr::Or(es), false) => Expr::and(es.iter().map(|e| e.nnf_pol(pos)).collect()),
            (Expr::Or(es), true) | (Expr::And(es), false) => Expr::or(es.iter().map(|e| e.nnf_pol(pos)).collect()),
            (Expr::Not(e), _) => e.nnf_pol(!pos),
            (Expr::Forall(vs, e), true) | (Expr::Exists(vs, e), false) => {
                Expr::Forall(vs.clone(), Box::new(e.nnf_pol(pos)))
            }
            (Expr::Exists(vs, e), true) | (Expr::Forall(vs, e), false) => {
                Expr::Exists(vs.clone(), Box::new(e.nnf_pol(pos)))
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, es: &[Expr], sep: &str| -> fmt::Result {
            for (i, e) in es.iter().enumerate() {
                if i > 0 {
                    f.write_str(sep)?;
                }
                write!(f, "({})", e)?;
            }
            Ok(())
        };
        match self {
            Expr::True => f.write_str("true"),
            Expr::False => f.write_str("false"),
            Expr::Lit(l) => write!(f, "{}", l),
            Expr::And(es) => join(f, es, " & "),
            Expr::Or(es) => join(f, es, " | "),
            Expr::Not(e) => write!(f, "!({})", e),
            Expr::Forall(vs, e) | Expr::Exists(vs, e) => {
                let q = if matches!(self, Expr::Forall(..)) { "forall" } else { "exists" };
                let vs: Vec<String> = vs.iter().map(|(x, s)| format!("{}:{}", x, s)).collect();
                write!(f, "{} {} . {}", q, vs.join(", "), e)
            }
        }
    }
}
