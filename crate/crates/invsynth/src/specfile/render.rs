use std::fmt::Write;

use super::{Closure, Mode, ProblemSpec};
use crate::logic::{Literal, Role, SortKind};

fn conj(lits: &[Literal]) -> String {
    if lits.is_empty() {
        return "true".into();
    }
    lits.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" & ")
}

fn names(ns: &[crate::logic::Name]) -> String {
    ns.iter().map(|n| n.as_ref()).collect::<Vec<_>>().join(", ")
}

/// Pretty-prints a problem so that parsing the output yields it again.
pub fn render(spec: &ProblemSpec) -> String {
    let mut out = String::from("version 1\n");
    let sig = &spec.signature;
    out.push_str("sorts\n");
    for s in sig.sorts() {
        let kind = match s.kind {
            SortKind::Int => "integer",
            SortKind::Real => "rational",
            SortKind::Uninterpreted => "uninterpreted",
        };
        let _ = writeln!(out, "  {} : {}", s.name, kind);
    }
    out.push_str("end\nsignature\n");
    for d in sig.functions() {
        if d.role == Role::Primed {
            if let Some(u) = sig.unprime_of(&d.name) {
                let _ = writeln!(out, "  primed {}", u);
            }
            continue;
        }
        let rank = if d.args.is_empty() {
            d.result.to_string()
        } else {
            format!("{} -> {}", d.args.iter().map(|s| s.name.as_ref()).collect::<Vec<_>>().join(", "), d.result)
        };
        let _ = writeln!(out, "  {} {} : {}", d.role.keyword(), d.name, rank);
    }
    for p in sig.predicates() {
        let _ = writeln!(out, "  predicate {} : {}", p.name, p.args.iter().map(|s| s.name.as_ref()).collect::<Vec<_>>().join(", "));
    }
    out.push_str("end\n");
    for l in &spec.levels {
        let closure = match l.closure {
            Closure::Identity => "identity",
            Closure::Apf => "apf",
        };
        let _ = writeln!(out, "theory level {} closure {}", l.name, closure);
        for c in &l.clauses.clauses {
            let _ = writeln!(out, "  {}", c);
        }
        out.push_str("end\n");
    }
    if !spec.init.is_empty() {
        out.push_str("init\n");
        for c in &spec.init.clauses {
            let _ = writeln!(out, "  {}", c);
        }
        out.push_str("end\n");
    }
    for u in &spec.updates {
        let _ = writeln!(out, "update {}", u.function);
        if !u.vars.is_empty() {
            let vs: Vec<String> = u.vars.iter().map(|(x, s)| format!("{}:{}", x, s)).collect();
            let _ = writeln!(out, "  forall {}", vs.join(", "));
        }
        for c in &u.cases {
            let _ = writeln!(out, "  case {} : {}", conj(&c.guard), conj(&c.effect));
        }
        out.push_str("end\n");
    }
    if !spec.property.is_empty() {
        out.push_str("property\n");
        for c in &spec.property.clauses {
            let _ = writeln!(out, "  {}", c);
        }
        out.push_str("end\n");
    }
    let o = &spec.options;
    if *o != Default::default() {
        out.push_str("options\n");
        if let Some(k) = &o.keep {
            let _ = writeln!(out, "  keep {}", names(k));
        }
        if !o.eliminate.is_empty() {
            let _ = writeln!(out, "  eliminate {}", names(&o.eliminate));
        }
        if let Some(n) = o.max_iterations {
            let _ = writeln!(out, "  max_iterations {}", n);
        }
        if let Some(m) = o.mode {
            let _ = writeln!(out, "  mode {}", if m == Mode::Refined { "refined" } else { "naive" });
        }
        if let Some(g) = o.apf_guard {
            let _ = writeln!(out, "  apf_guard {}", if g { "on" } else { "off" });
        }
        out.push_str("end\n");
    }
    out
}
