//! Randomised invariants of the logic, reduction and elimination layers.

mod support;

use std::collections::BTreeSet;

use invsynth::hierarchy::purify;
use invsynth::logic::{collect_est, prime_clauses, skolemize_negation, ClauseSet, GroundConj, Name, Sort, SortKind, Term};
use invsynth::qelim::{eliminate, free_symbols, QeConfig};
use invsynth::specfile::{parse, parse_clauses, render, ProblemSpec};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;
use support::*;

const SIG_SPEC: &str = "version 1
sorts
  int : integer
end
signature
  parameter c1, c2 : int
  extension f, g : int -> int
  primed c1 f
end
property
  c1 <= c2
end
update c1
  case c1 <= c2 : c1' = c1 + 1
  case c2 < c1 : c1' = c1
end
update f
  forall x:int
  case x <= c2 : f'(x) = f(x)
  case c2 < x : f'(x) = 0
end
";

fn spec() -> ProblemSpec {
    parse(SIG_SPEC).unwrap()
}

fn ground_term() -> BoxedStrategy<String> {
    let leaf = prop_oneof![Just("c1".to_string()), Just("c2".to_string()), (-3i64..=3).prop_map(|k| k.to_string())];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (prop_oneof![Just("f"), Just("g")], inner.clone()).prop_map(|(h, t)| format!("{h}({t})")),
            (inner.clone(), -3i64..=3).prop_map(|(t, k)| format!("{t} + {k}")),
        ]
    })
    .boxed()
}

fn open_term() -> BoxedStrategy<String> {
    prop_oneof![
        ground_term(),
        Just("x".to_string()),
        (prop_oneof![Just("f"), Just("g")], prop_oneof![Just("x"), Just("c1"), Just("c2")]).prop_map(|(h, t)| format!("{h}({t})")),
    ]
    .boxed()
}

fn rel() -> impl Strategy<Value = &'static str> {
    prop_oneof![Just("<="), Just("<"), Just("="), Just("!=")]
}

fn literal(term: BoxedStrategy<String>) -> impl Strategy<Value = String> {
    (term.clone(), rel(), term).prop_map(|(a, r, b)| format!("{a} {r} {b}"))
}

fn ground_clauses() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::collection::vec(literal(ground_term()), 1..=3).prop_map(|ls| ls.join(" | ")), 1..=4)
}

fn open_clauses() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(
        prop::collection::vec(literal(open_term()), 1..=3).prop_map(|ls| {
            let body = ls.join(" | ");
            if body.contains('x') {
                format!("forall x:int . {body}")
            } else {
                body
            }
        }),
        1..=3,
    )
}

fn parsed(lines: &[String]) -> ClauseSet {
    parse_clauses(&(lines.join("\n") + "\n"), &spec().signature).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unpurify_inverts_purify(lines in ground_clauses()) {
        let cs = parsed(&lines);
        let p = purify(&cs.clauses);
        for (orig, pure) in cs.clauses.iter().zip(&p.clauses) {
            prop_assert_eq!(&p.unpurify(pure), orig);
        }
        let defined: BTreeSet<Name> = p.defs.iter().map(|d| d.head.clone()).collect();
        for c in &p.clauses {
            for l in &c.lits {
                let mut subs = BTreeSet::new();
                l.collect_subterms(&mut subs);
                prop_assert!(subs.iter().all(|t| t.args().is_empty() || t.head().is_none_or(|h| !defined.contains(h))));
            }
        }
    }

    #[test]
    fn priming_is_idempotent(lines in open_clauses()) {
        let s = spec();
        let cs = parsed(&lines);
        let f: BTreeSet<Name> = [Name::from("c1"), Name::from("f")].into_iter().collect();
        let once = prime_clauses(&cs, &f, &s.signature).unwrap();
        let twice = prime_clauses(&once, &f, &s.signature).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(&prime_clauses(&cs, &BTreeSet::new(), &s.signature).unwrap(), &cs);
        let syms = once.symbols();
        prop_assert!(!syms.contains("c1") && !syms.contains("f"));
    }

    #[test]
    fn skolemized_negation_falsifies_the_clause(lines in open_clauses(), seed in any::<u64>()) {
        use rand::Rng;
        let cs = parsed(&lines);
        let disjuncts = skolemize_negation(&cs);
        prop_assert_eq!(disjuncts.len(), cs.clauses.len());
        let mut rng = StdRng::seed_from_u64(seed);
        let domain: Vec<_> = (-2..=2).map(qi).collect();
        for _ in 0..32 {
            let mut env = Interp { default: qi(0), ..Interp::default() };
            for c in ["c1", "c2"] {
                env.consts.insert(c.into(), qi(rng.gen_range(-2..=2)));
            }
            for d in &disjuncts {
                for s in &d.skolems {
                    env.consts.insert(s.constant.to_string(), qi(rng.gen_range(-2..=2)));
                }
            }
            for h in ["f", "g"] {
                let table = (-12..=12).map(|v| (vec![qi(v)], qi(rng.gen_range(-2..=2)))).collect();
                env.funcs.insert(h.into(), table);
            }
            for (clause, d) in cs.clauses.iter().zip(&disjuncts) {
                if env.conj(&d.lits) {
                    let mut at = env.clone();
                    for s in &d.skolems {
                        at.vars.insert(s.var.to_string(), at.consts[s.constant.as_ref()].clone());
                    }
                    prop_assert!(!clause.lits.iter().any(|l| at.literal(l)));
                }
                // A clause that holds everywhere has no satisfiable negation.
                if env.clause(clause, &domain) && clause.vars.is_empty() {
                    prop_assert!(!env.conj(&d.lits));
                }
            }
        }
    }

    #[test]
    fn ground_extension_terms_are_closed(k in open_clauses(), g in ground_clauses()) {
        let k = parsed(&k);
        let goal = GroundConj { lits: parsed(&g).clauses.iter().flat_map(|c| c.lits.clone()).collect(), skolems: Vec::new() };
        let ext: BTreeSet<Name> = [Name::from("f"), Name::from("g")].into_iter().collect();
        let est = collect_est(&k, &goal, &ext);
        for t in &est {
            prop_assert!(t.head().is_some_and(|h| ext.contains(h)));
            let mut subs = BTreeSet::new();
            t.collect_subterms(&mut subs);
            for s in subs.iter().filter(|s| s.is_ground() && s.head().is_some_and(|h| ext.contains(h))) {
                prop_assert!(est.contains(s));
            }
        }
    }

    /// With one eliminated integer and bounded data every endpoint of the
    /// solution set lies well inside [-200, 200], so the search is exact.
    #[test]
    fn integer_projection_of_one_symbol_is_exact(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let task = LinTask::random(&mut rng, 1, 2, 4, 6, 4);
        let int = Sort::new("int", SortKind::Int);
        let syms: Vec<Term> = ["x", "a", "b"].iter().map(|s| Term::constant(Name::from(*s), int.clone())).collect();
        let result = eliminate(&syms[..1], &task.formula(&syms), &QeConfig::default()).unwrap();
        prop_assert!(free_symbols(&result).iter().all(|s| s.as_ref() == "a" || s.as_ref() == "b"));
        for a in -8..=8 {
            for b in -8..=8 {
                let mut env = Interp::default();
                env.consts.insert("a".into(), qi(a));
                env.consts.insert("b".into(), qi(b));
                prop_assert_eq!(result.iter().any(|c| env.conj(c)), task.witness_in_window(&[a, b], 200), "a={} b={}", a, b);
            }
        }
    }
}

#[test]
fn corpus_specs_survive_rendering() {
    for name in corpus_names() {
        let (spec, _) = load(&name);
        let again = parse(&render(&spec)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(again, spec, "{name}");
    }
}

#[test]
fn exit_codes_follow_the_outcome_table() {
    use invsynth::invariant_loop::{exit, LoopOutcome};
    use invsynth::smt::Model;
    let table = [
        (LoopOutcome::Invariant { invariant: ClauseSet::default(), iterations: 1 }, exit::OK, "invariant"),
        (LoopOutcome::NoUniversalInvariant { countermodel: Model::default(), iteration: 1 }, exit::NO_UNIVERSAL_INVARIANT, ""),
        (LoopOutcome::Diverged { reason: String::new(), iteration: 1 }, exit::BUDGET, ""),
        (LoopOutcome::BudgetExhausted { iterations: 1, diagnostic: String::new() }, exit::BUDGET, ""),
        (LoopOutcome::Unknown { reason: String::new(), iteration: 1 }, exit::UNKNOWN, ""),
    ];
    let codes: Vec<i32> = table.iter().map(|(o, _, _)| o.exit_code()).collect();
    assert_eq!(codes, vec![0, 10, 20, 20, 30]);
    let mut words = BTreeSet::new();
    for (o, c, w) in &table {
        assert_eq!(o.exit_code(), *c);
        assert!(w.is_empty() || o.keyword() == *w);
        words.insert(o.keyword());
    }
    assert_eq!(words.len(), table.len());
    assert_eq!((exit::NOT_INDUCTIVE, exit::SPEC_ERROR), (1, 64));
}
