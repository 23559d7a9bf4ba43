use std::fmt::Write;

use super::Reduction;
use crate::smt::{Expr, Script};

/// Human-readable listing of a reduction: instances with provenance,
/// definitions, congruence instances and the purified query.
pub fn dump_text(r: &Reduction) -> String {
    let mut out = String::new();
    if r.locality_assumed {
        out.push_str("; locality assumed\n");
    }
    out.push_str("goal:\n");
    for c in &r.goal {
        let _ = writeln!(out, "  {}", c);
    }
    out.push_str("instances:\n");
    for i in &r.instances {
        let s: Vec<String> = i.subst.iter().map(|(x, t)| format!("{}:={}", x, t)).collect();
        let _ = writeln!(out, "  [{}#{} {}] {}", i.level, i.clause, s.join(" "), i.result);
    }
    out.push_str("definitions:\n");
    for d in &r.purified.defs {
        let _ = writeln!(out, "  {} = {}", d.constant, d.term);
    }
    out.push_str("congruence:\n");
    for c in &r.purified.con0 {
        let _ = writeln!(out, "  {}", c);
    }
    out.push_str("purified:\n");
    for c in &r.purified.clauses {
        let _ = writeln!(out, "  {}", c);
    }
    out
}

/// The purified base-theory query as an SMT-LIB script.
pub fn dump_smt2(r: &Reduction) -> String {
    let mut s = Script::new();
    for c in r.purified.all_clauses() {
        s.assert(&Expr::clause(&c));
    }
    s.render(true)
}
