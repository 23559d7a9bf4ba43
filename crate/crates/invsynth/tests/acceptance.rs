//! Acceptance criteria, one test per criterion. Equivalence always means the
//! solver proved both entailments within ten seconds.

mod support;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use invsynth::hierarchy::{Chain, Level};
use invsynth::invariant_loop::{apf_guard, synthesize, Check, Fragment, LoopOutcome, Problem, Synthesis};
use invsynth::logic::{
    to_dnf_guarded, Atom, Clause, ClauseSet, GuardedCase, GuardedSystem, Literal, Name, Rel, Sort, SortKind, Term,
};
use invsynth::qelim::{eliminate, QeConfig};
use invsynth::smt::{Equivalence, Expr, Status};
use invsynth::specfile::parse_clauses;
use invsynth::specfile::sidecar::ExpectedRun;
use invsynth::symbol_elim::{eliminate_symbols, verify_gamma, ElimRequest};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use support::*;

fn equivalent(bg: &Chain, a: &ClauseSet, b: &ClauseSet) -> Result<(), String> {
    match client().check_equivalence(bg, a, b) {
        Equivalence::Equivalent => Ok(()),
        e => Err(format!("{:?}\n  got: {}\n  expected: {}", e, a, b)),
    }
}

fn synth(name: &str, run: &str) -> (invsynth::specfile::ProblemSpec, ExpectedRun, Synthesis) {
    let (spec, runs) = load(name);
    let r = run_named(&runs, run).clone();
    let syn = synthesize(&spec, config(&spec, &r), &client()).unwrap();
    (spec, r, syn)
}

fn invariant_of(syn: &Synthesis) -> (&ClauseSet, usize) {
    match &syn.outcome {
        LoopOutcome::Invariant { invariant, iterations } => (invariant, *iterations),
        o => panic!("expected an invariant, got {:?}", o),
    }
}

fn gamma_of(spec: &invsynth::specfile::ProblemSpec, syn: &Synthesis, iteration: usize) -> ClauseSet {
    clauses(spec, &syn.records[iteration - 1].gamma)
}

#[test]
fn criterion_01_monotone_bridge_constraint() {
    let (spec, runs) = load("monotone_bridge");
    let run = run_named(&runs, "elim");
    let c = client();
    let start = Instant::now();
    let p = Problem::new(&spec, config(&spec, run), &c).unwrap();
    let (reqs, gamma) = eliminate_property(&p);
    let elapsed = start.elapsed();
    for r in &reqs {
        assert_eq!(verify_gamma(r, &gamma, &c).status, Status::Unsat);
    }
    let halves = Chain::new(vec![Level::from_set("halves", &spec.levels[0].clauses)]);
    equivalent(&halves, &gamma, &expected(&spec, run)).unwrap();
    assert!(elapsed < Duration::from_secs(5), "took {:?}", elapsed);
}

#[test]
fn criterion_02_step_by_two_invariant() {
    let (spec, run, syn) = synth("step_by_two", "default");
    let (inv, iterations) = invariant_of(&syn);
    assert!(iterations <= run.iterations_at_most.unwrap());
    equivalent(&background(&spec), inv, &expected(&spec, &run)).unwrap();
}

#[test]
fn criterion_03_sorted_copy_refined_and_counter_kept() {
    let (spec, run, syn) = synth("sorted_copy", "loop-counter-eliminated");
    let (inv, iterations) = invariant_of(&syn);
    assert_eq!(iterations, 2);
    equivalent(&background(&spec), inv, &expected(&spec, &run)).unwrap();

    let (spec, _, syn) = synth("sorted_copy", "loop-counter-kept");
    assert!(matches!(syn.outcome, LoopOutcome::BudgetExhausted { .. }), "{:?}", syn.outcome);
    // Each round only relates the next pair of neighbours.
    for k in 1..=syn.records.len() {
        let pair = clauses(&spec, &[format!("a(i + {}) <= a(i + {})", k - 1, k)]);
        equivalent(&background(&spec), &gamma_of(&spec, &syn, k), &pair).unwrap();
    }
}

#[test]
fn criterion_04_halving_reads() {
    let (spec, run, syn) = synth("halving_reads", "reads-eliminated");
    let (inv, _) = invariant_of(&syn);
    equivalent(&background(&spec), inv, &expected(&spec, &run)).unwrap();

    let (_, _, syn) = synth("halving_reads", "default");
    assert!(matches!(syn.outcome, LoopOutcome::BudgetExhausted { .. }), "{:?}", syn.outcome);
}

fn water_tank_first_round() -> (invsynth::specfile::ProblemSpec, ExpectedRun, Synthesis) {
    let (spec, runs) = load("water_tank");
    let run = run_named(&runs, "refined").clone();
    let mut cfg = config(&spec, &run);
    cfg.max_iterations = 1;
    let syn = synthesize(&spec, cfg, &client()).unwrap();
    (spec, run, syn)
}

#[test]
fn criterion_05_water_tank_first_strengthening() {
    let (spec, run, syn) = water_tank_first_round();
    let gamma = gamma_of(&spec, &syn, 1);
    let four: Vec<String> = run.expect[1..].to_vec();
    equivalent(&background(&spec), &gamma, &clauses(&spec, &four)).unwrap();
    assert_eq!(syn.records[0].apf, Some(Fragment::InFragment));
    assert_eq!(apf_guard(&gamma, &spec.signature), Fragment::InFragment);
    let c = client();
    let p = Problem::new(&spec, config(&spec, &run), &c).unwrap();
    assert_eq!(p.check_initiation(&gamma).status, Status::Unsat, "initial states violate the first strengthening");
}

/// The full criterion also asks the second candidate to be inductive within
/// two rounds. The level is itself updated, so the strengthening is not
/// preserved: alarm 10, overflow 20, level 0, switch time 5, lower inflow 5
/// and upper inflow 20 at time 0, with a step of 5, yields level 5 where the
/// first clause needs 5 + 20 <= 20.
#[test]
#[ignore = "unattainable: the second candidate is not inductive; see water_tank_level_update_breaks_second_candidate"]
fn criterion_05_water_tank_second_candidate_inductive() {
    let (spec, run, syn) = synth("water_tank", "refined");
    let (inv, iterations) = invariant_of(&syn);
    assert!(iterations <= 2);
    equivalent(&background(&spec), inv, &expected(&spec, &run)).unwrap();
}

#[test]
fn water_tank_level_update_breaks_second_candidate() {
    let (spec, run, syn) = water_tank_first_round();
    let mut second = spec.property.clone();
    second.clauses.extend(gamma_of(&spec, &syn, 1).clauses);
    let c = client();
    let p = Problem::new(&spec, config(&spec, &run), &c).unwrap();
    let Check::Fails(violations) = p.check_consecution(&second, &second, "sk").unwrap() else {
        panic!("the second candidate unexpectedly passed consecution")
    };
    assert!(violations.iter().all(|v| v.updates.iter().any(|u| u.as_ref() == "L")));
    // The concrete witness from the doc comment: a pre-state satisfying
    // the candidate, one step of the first update case, and a post-state
    // falsifying the first clause of the strengthening.
    let mut chain = background(&spec);
    chain.push_outer(Level::from_set("candidate", &second).unverified());
    let step = clauses(
        &spec,
        &[
            "L_alarm = 10", "L_ov = 20", "L = 0", "t0 = 5", "t = 0", "in1m(0) = 5", "in1M(0) = 20", "in1m(1) = 5",
            "in1M(1) = 20", "L' = L + 5", "t' = t + 1", "in1m(t) <= L' - L", "L' - L <= in1M(t)", "L' <= L_alarm",
            "t' <= t0", "in1m(t') <= in1M(t')", "in1M(t') > L_ov - L'",
        ],
    );
    let v = c.check_direct(&chain, &step.clauses, false, Duration::from_secs(10));
    assert_eq!(v.status, Status::Sat, "{}", v.diagnostic);
}

#[test]
fn criterion_06_bounded_update_constraint() {
    let (spec, runs) = load("bounded_update");
    let run = run_named(&runs, "elim");
    let c = client();
    let p = Problem::new(&spec, config(&spec, run), &c).unwrap();
    let (reqs, gamma) = eliminate_property(&p);
    for r in &reqs {
        assert_eq!(verify_gamma(r, &gamma, &c).status, Status::Unsat);
    }
    equivalent(&background(&spec), &gamma, &expected(&spec, run)).unwrap();
}

#[test]
fn criterion_07_counter_programs() {
    for (name, run) in [("drift_counter", "eliminate-z"), ("doubling_counter", "eliminate-x")] {
        let (spec, _, syn) = synth(name, "default");
        match &syn.outcome {
            LoopOutcome::BudgetExhausted { diagnostic, .. } => assert!(diagnostic.contains("growing"), "{diagnostic}"),
            o => panic!("{name}: {:?}", o),
        }
        assert!(syn.length.growth_factor > 0.0);
        let (_, r, syn) = synth(name, run);
        let (inv, _) = invariant_of(&syn);
        equivalent(&background(&spec), inv, &expected(&spec, &r)).unwrap();
    }
}

const EXT_SPEC: &str = "version 1
sorts
  int : integer
end
signature
  parameter c1, c2, c3 : int
  extension f : int -> int
end
property
  c1 <= c1
end
";

/// Axioms of a local extension: a free function or a definition by cases
/// with exclusive and exhaustive guards.
fn random_axioms(rng: &mut StdRng) -> Vec<String> {
    let k = |rng: &mut StdRng| rng.gen_range(-3..=3);
    let def = |rng: &mut StdRng| match rng.gen_range(0..3) {
        0 => format!("x + {}", k(rng)),
        1 => format!("{}", k(rng)),
        _ => format!("c{} + {}", rng.gen_range(1..=3), k(rng)),
    };
    match rng.gen_range(0..3) {
        0 => Vec::new(),
        1 => vec![
            format!("forall x:int . x <= c3 -> f(x) = {}", def(rng)),
            format!("forall x:int . c3 < x -> f(x) = {}", def(rng)),
        ],
        _ => vec![
            format!("forall x:int . x <= c1 -> f(x) = {}", def(rng)),
            format!("forall x:int . c1 < x & x <= c1 + 2 -> f(x) = {}", def(rng)),
            format!("forall x:int . c1 + 2 < x -> f(x) = {}", def(rng)),
        ],
    }
}

/// Ground goal with at most three extension terms.
fn random_goal(rng: &mut StdRng) -> Vec<String> {
    let rels = ["<=", "<", "=", "!="];
    let c = |rng: &mut StdRng| format!("c{}", rng.gen_range(1..=3));
    let mut ext = 0;
    (0..rng.gen_range(2..=4))
        .map(|_| {
            let rel = rels[rng.gen_range(0..rels.len())];
            let k = rng.gen_range(-3..=3);
            let shape = if ext >= 2 { 2 } else { rng.gen_range(0..4) };
            ext += [2, 1, 0, 1][shape];
            match shape {
                0 => format!("f({}) {} f({})", c(rng), rel, c(rng)),
                1 => format!("f({}) {} {} + {}", c(rng), rel, c(rng), k),
                2 => format!("{} {} {} + {}", c(rng), rel, c(rng), k),
                _ => format!("f({} + 1) {} {}", c(rng), rel, k),
            }
        })
        .collect()
}

#[test]
fn criterion_08_reduction_is_equisatisfiable() {
    let spec = invsynth::specfile::parse(EXT_SPEC).unwrap();
    let c = client();
    let mut rng = StdRng::seed_from_u64(8);
    let (mut decided, mut unknown) = (0, 0);
    for n in 0..100 {
        let axioms = parse_clauses(&(random_axioms(&mut rng).join("\n") + "\n"), &spec.signature).unwrap();
        let goal: Vec<Clause> = parse_clauses(&(random_goal(&mut rng).join("\n") + "\n"), &spec.signature).unwrap().clauses;
        let chain = Chain::new(vec![Level::from_set("ext", &axioms)]);
        let (reduced, _) = c.check_reduced(&chain, &goal, false);
        let direct = c.check_direct(&chain, &goal, false, Duration::from_secs(10));
        if !reduced.status.is_decided() || !direct.status.is_decided() {
            unknown += 1;
            continue;
        }
        decided += 1;
        assert_eq!(reduced.status, direct.status, "instance {n}: axioms {axioms} goal {:?}", goal);
    }
    assert!(unknown * 10 < 100, "{unknown} undecided, {decided} decided");
}

fn int() -> Sort {
    Sort::new("int", SortKind::Int)
}

fn real() -> Sort {
    Sort::new("real", SortKind::Real)
}

/// `exists eliminated . f` differs from `qe`, with the eliminated symbols
/// rebound as variables.
fn qe_differs(f: &invsynth::logic::Formula, eliminated: &[Term], result: &[Vec<Literal>], sort: &Sort) -> Expr {
    let bound: Vec<(Name, Sort)> = eliminated.iter().map(|t| (t.head().unwrap().clone(), sort.clone())).collect();
    let rename: BTreeMap<Term, Term> =
        eliminated.iter().map(|t| (t.clone(), Term::var(t.head().unwrap().clone(), sort.clone()))).collect();
    let exists = Expr::Exists(bound, Box::new(rebind(&Expr::formula(f), &rename)));
    let qe = Expr::or(result.iter().map(|c| Expr::literals(c)).collect());
    Expr::or(vec![Expr::and(vec![exists.clone(), Expr::not(qe.clone())]), Expr::and(vec![Expr::not(exists), qe])])
}

#[test]
fn criterion_09_qe_oracles() {
    let mut rng = StdRng::seed_from_u64(9);
    let cfg = QeConfig::default();
    let names = ["x", "y", "a", "b"];
    let c = client();

    // Integer tasks: a witness found by search in [-64, 64] must be matched by
    // the output, and the solver must find no parameter valuation at all on
    // which output and projection differ. The window alone is not complete:
    // a true projection can have all its witnesses outside it.
    let (mut unknown, mut outside) = (0, 0);
    for n in 0..500 {
        let ne = 1 + n % 2;
        let task = LinTask::random(&mut rng, ne, 2, 4, 6, 4);
        let all: Vec<Term> = names.iter().map(|s| Term::constant(Name::from(*s), int())).collect();
        let syms: Vec<Term> = if ne == 1 { vec![all[0].clone(), all[2].clone(), all[3].clone()] } else { all };
        let f = task.formula(&syms);
        let Ok(result) = eliminate(&syms[..ne], &f, &cfg) else {
            unknown += 1;
            continue;
        };
        let mut used = std::collections::BTreeSet::new();
        result.iter().flatten().for_each(|l| l.collect_symbols(&mut used));
        assert!(used.iter().all(|s| s.as_ref() == "a" || s.as_ref() == "b"), "task {n}: output mentions {used:?}");
        let mut checked = false;
        for a in -8..=8 {
            for b in -8..=8 {
                let mut env = Interp::default();
                env.consts.insert("a".into(), qi(a));
                env.consts.insert("b".into(), qi(b));
                let qe = result.iter().any(|c| env.conj(c));
                let window = task.witness_in_window(&[a, b], 64);
                if window {
                    assert!(qe, "task {n} at a={a}, b={b}: {f} has a witness but gave {:?}", result);
                } else if qe {
                    outside += 1;
                }
                checked |= qe != window;
            }
        }
        match c.check_sat(&[qe_differs(&f, &syms[..ne], &result, &int())], false).status {
            Status::Unsat => {}
            Status::Sat => panic!("integer task {n}: {f} gave {:?}", result),
            _ if checked => panic!("integer task {n}: window miss left unconfirmed"),
            _ => unknown += 1,
        }
    }
    assert!(unknown * 10 < 500, "{unknown} integer tasks undecided");
    eprintln!("integer tasks: {unknown} undecided, {outside} valuations with witnesses only outside the window");

    // Rational tasks against the solver.
    let mut unknown = 0;
    for n in 0..200 {
        let ne = 1 + n % 2;
        let all: Vec<Term> = names.iter().map(|s| Term::constant(Name::from(*s), real())).collect();
        let syms: Vec<Term> = if ne == 1 { vec![all[0].clone(), all[2].clone(), all[3].clone()] } else { all };
        let task = LinTask::random(&mut rng, ne, 2, 4, 6, 4);
        let f = task.formula(&syms);
        let Ok(result) = eliminate(&syms[..ne], &f, &cfg) else {
            unknown += 1;
            continue;
        };
        match c.check_sat(&[qe_differs(&f, &syms[..ne], &result, &real())], false).status {
            Status::Unsat => {}
            Status::Sat => panic!("rational task {n}: {f} gave {:?}", result),
            _ => unknown += 1,
        }
    }
    assert!(unknown * 10 < 200, "{unknown} rational tasks undecided");
}

fn rebind(e: &Expr, map: &BTreeMap<Term, Term>) -> Expr {
    match e {
        Expr::Lit(l) => Expr::Lit(l.replace(map)),
        Expr::And(v) => Expr::And(v.iter().map(|x| rebind(x, map)).collect()),
        Expr::Or(v) => Expr::Or(v.iter().map(|x| rebind(x, map)).collect()),
        Expr::Not(x) => Expr::Not(Box::new(rebind(x, map))),
        other => other.clone(),
    }
}

fn random_system(rng: &mut StdRng) -> GuardedSystem {
    let x = Term::var("x".into(), int());
    let fx = Term::app("f".into(), vec![x.clone()], int());
    let n = |v: i64| Term::int(v, int());
    let t1 = rng.gen_range(0..=2);
    let t2 = rng.gen_range(t1 + 1..=3);
    let guards: Vec<Vec<Literal>> = if rng.gen_bool(0.5) {
        vec![vec![Literal::cmp(Rel::Le, x.clone(), n(t1))], vec![Literal::cmp(Rel::Lt, n(t1), x.clone())]]
    } else {
        vec![
            vec![Literal::cmp(Rel::Le, x.clone(), n(t1))],
            vec![Literal::cmp(Rel::Lt, n(t1), x.clone()), Literal::cmp(Rel::Le, x.clone(), n(t2))],
            vec![Literal::cmp(Rel::Lt, n(t2), x.clone())],
        ]
    };
    let cases = guards
        .into_iter()
        .map(|guard| {
            let effect = (0..rng.gen_range(1..=2))
                .map(|_| {
                    let k = n(rng.gen_range(0..=3));
                    match rng.gen_range(0..5) {
                        0 => Literal::cmp(Rel::Eq, fx.clone(), k),
                        1 => Literal::cmp(Rel::Le, fx.clone(), k),
                        2 => Literal::cmp(Rel::Le, k, fx.clone()),
                        3 => Literal::cmp(Rel::Eq, fx.clone(), x.clone()),
                        _ => Literal::new(Atom::Cmp(Rel::Eq, fx.clone(), k), false),
                    }
                })
                .collect();
            GuardedCase { guard, effect }
        })
        .collect();
    GuardedSystem { function: "f".into(), vars: vec![("x".into(), int())], cases, certified: true }
}

#[test]
fn criterion_10_guarded_dnf_is_equivalent() {
    let mut rng = StdRng::seed_from_u64(10);
    let consts = ["c1", "c2"];
    let domain: Vec<i64> = (0..4).collect();
    for n in 0..100 {
        let sys = random_system(&mut rng);
        let args: Vec<Vec<Term>> = (0..rng.gen_range(1..=3))
            .map(|_| {
                vec![match rng.gen_range(0..3) {
                    0 => Term::int(rng.gen_range(0..=3), int()),
                    i => Term::constant(Name::from(consts[i - 1]), int()),
                }]
            })
            .collect();
        let dnf = to_dnf_guarded(&sys, &args, 10_000).unwrap();
        let instances: Vec<Clause> = args
            .iter()
            .flat_map(|a| {
                let map: BTreeMap<Name, Term> = [(Name::from("x"), a[0].clone())].into();
                sys.clauses().into_iter().map(move |c| c.instantiate(&map))
            })
            .collect();
        let mut checked = 0;
        for c1 in &domain {
            for c2 in &domain {
                for table in 0..256usize {
                    let mut env = Interp { default: qi(0), ..Interp::default() };
                    env.consts.insert("c1".into(), qi(*c1));
                    env.consts.insert("c2".into(), qi(*c2));
                    let f: BTreeMap<Vec<_>, _> = domain.iter().map(|d| (vec![qi(*d)], qi(((table >> (2 * d)) & 3) as i64))).collect();
                    env.funcs.insert("f".into(), f);
                    let lhs = instances.iter().all(|c| env.clause(c, &[]));
                    let rhs = dnf.iter().any(|c| env.conj(c));
                    assert_eq!(lhs, rhs, "system {n} ({:?}) at c1={c1} c2={c2} table={table}", sys.cases);
                    checked += 1;
                }
            }
        }
        assert_eq!(checked, 4 * 4 * 256);
    }
}

const LOOP_RUNS: [(&str, &str); 10] = [
    ("step_by_two", "default"),
    ("sorted_copy", "loop-counter-eliminated"),
    ("sorted_copy", "loop-counter-kept"),
    ("halving_reads", "reads-eliminated"),
    ("halving_reads", "default"),
    ("drift_counter", "default"),
    ("drift_counter", "eliminate-z"),
    ("doubling_counter", "default"),
    ("doubling_counter", "eliminate-x"),
    ("water_tank", "refined"),
];

#[test]
fn criterion_11_monitors_stay_silent_under_hypotheses() {
    let mut monitored = 0;
    for (name, run) in LOOP_RUNS {
        let (_, _, syn) = synth(name, run);
        if syn.monitored {
            monitored += 1;
            assert!(syn.alarms.is_empty(), "{name}/{run}: {:?}", syn.alarms);
            assert!(syn.records.iter().all(|r| r.alarms.is_empty()));
        }
    }
    assert!(monitored > 0);
}

/// Some clause of a verified constraint is necessary for refutation.
fn has_necessary_clause(req: &ElimRequest, gamma: &ClauseSet) -> bool {
    let c = client();
    (0..gamma.clauses.len()).any(|i| {
        let mut weaker = gamma.clone();
        weaker.clauses.remove(i);
        verify_gamma(req, &weaker, &c).status == Status::Sat
    })
}

#[test]
fn criterion_12_every_constraint_is_tight() {
    let c = client();
    let mut seen = 0;
    for name in corpus_names() {
        let (spec, runs) = load(&name);
        for run in &runs {
            let p = Problem::new(&spec, config(&spec, run), &c).unwrap();
            let reqs: Vec<ElimRequest> = if run.outcome == "constraint" {
                p.property_requests().unwrap()
            } else {
                let goal = spec.property.clone();
                match p.check_consecution(&goal, &goal, "sk").unwrap() {
                    Check::Fails(vs) => vs.iter().map(|v| p.request(&goal, v)).collect(),
                    other => panic!("{name}/{}: {:?}", run.name, other),
                }
            };
            for req in &reqs {
                let gamma = eliminate_symbols(req).unwrap().gamma;
                assert_eq!(verify_gamma(req, &gamma, &c).status, Status::Unsat, "{name}/{}", run.name);
                assert!(has_necessary_clause(req, &gamma), "{name}/{}: {}", run.name, gamma);
                seen += 1;
            }
        }
    }
    assert!(seen >= 10);
}
