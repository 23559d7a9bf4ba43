use super::*;
use crate::smt::Equivalence;
use crate::specfile::{parse, parse_clauses};

const STEP2: &str = "version 1
sorts
  int : integer
end
signature
  parameter x, y : int
  primed x
end
init
  x = y | x = y + 2
end
update x
  case x <= y + 1 : x' = x + 2
  case x > y + 1 : x' = x
end
property
  y <= x
  x <= y + 2
end
";

#[test]
fn step_by_two_strengthens_once() {
    let spec = parse(STEP2).unwrap();
    let client = SmtClient::default();
    let syn = synthesize(&spec, LoopConfig::default(), &client).unwrap();
    let LoopOutcome::Invariant { invariant, iterations } = &syn.outcome else { panic!("{:?}", syn.outcome) };
    assert!(*iterations <= 3);
    let expected = parse_clauses("x = y | x = y + 2\n", &spec.signature).unwrap();
    assert_eq!(client.check_equivalence(&Chain::default(), invariant, &expected), Equivalence::Equivalent);
    let gamma = parse_clauses("x <= y | x > y + 1\n", &spec.signature).unwrap();
    let first = parse_clauses(&format!("{}\n", syn.records[0].gamma.join("\n")), &spec.signature).unwrap();
    assert_eq!(client.check_equivalence(&Chain::default(), &first, &gamma), Equivalence::Equivalent);
    assert!(syn.monitored);
    assert!(syn.alarms.is_empty());
}

#[test]
fn refined_mode_agrees() {
    let spec = parse(STEP2).unwrap();
    let client = SmtClient::default();
    let cfg = LoopConfig { mode: Mode::Refined, ..LoopConfig::default() };
    let syn = synthesize(&spec, cfg, &client).unwrap();
    assert_eq!(syn.outcome.keyword(), "invariant");
}

#[test]
fn failed_initiation_is_reported_at_first_iteration() {
    let src = STEP2.replace("x = y | x = y + 2", "x = y + 5");
    let spec = parse(&src).unwrap();
    let syn = synthesize(&spec, LoopConfig::default(), &SmtClient::default()).unwrap();
    match syn.outcome {
        LoopOutcome::NoUniversalInvariant { iteration, countermodel } => {
            assert_eq!(iteration, 1);
            assert!(countermodel.get("x").is_some());
        }
        o => panic!("{:?}", o),
    }
}

#[test]
fn empty_property_needs_no_solver() {
    let src = STEP2.replace("property\n  y <= x\n  x <= y + 2\nend\n", "");
    let spec = parse(&src).unwrap();
    let client = SmtClient::default();
    let syn = run(&Problem::new(&spec, LoopConfig::default(), &client).unwrap());
    assert_eq!(syn.outcome, LoopOutcome::Invariant { invariant: ClauseSet::empty(), iterations: 1 });
    assert_eq!(syn.records.len(), 0);
}

#[test]
fn zero_budget_is_rejected() {
    let spec = parse(STEP2).unwrap();
    let cfg = LoopConfig { max_iterations: 0, ..LoopConfig::default() };
    assert!(matches!(synthesize(&spec, cfg, &SmtClient::default()), Err(LoopError::ZeroIterations)));
}

#[test]
fn strengthening_grows_monotonically() {
    let spec = parse(STEP2).unwrap();
    let syn = synthesize(&spec, LoopConfig::default(), &SmtClient::default()).unwrap();
    for w in syn.records.windows(2) {
        assert!(w[1].invariant.starts_with(&w[0].invariant));
        let mut grown = w[0].invariant.clone();
        grown.extend(w[0].gamma.iter().filter(|g| !w[0].invariant.contains(g)).cloned());
        assert_eq!(w[1].invariant, grown);
    }
    let lines = trace_lines(&syn);
    assert_eq!(lines.lines().count(), syn.records.len());
    let first: serde_json::Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert_eq!(first["iteration"], 1);
}

const ARRAYS: &str = "version 1
sorts
  int : integer
end
signature
  parameter a : int -> int
  parameter c : int
end
property
  c <= c
end
";

#[test]
fn fragment_membership() {
    let spec = parse(ARRAYS).unwrap();
    let sig = &spec.signature;
    let ok = parse_clauses("forall i:int, j:int . i <= j -> a(i) <= a(j)\nforall i:int . i < c | a(i) >= 0\n", sig).unwrap();
    assert_eq!(apf_guard(&ok, sig), Fragment::InFragment);
    let nested = parse_clauses("forall i:int . a(a(i)) >= 0\n", sig).unwrap();
    assert_eq!(apf_guard(&nested, sig), Fragment::OutOfFragment("nested read".into()));
    let outside = parse_clauses("forall i:int . a(i) >= i\n", sig).unwrap();
    assert!(matches!(apf_guard(&outside, sig), Fragment::OutOfFragment(_)));
    let diseq = parse_clauses("forall i:int, j:int . i = j | a(i) <= a(j)\n", sig).unwrap();
    assert!(matches!(apf_guard(&diseq, sig), Fragment::OutOfFragment(r) if r.contains("disequality")));
}

#[test]
fn termination_classes() {
    let spec = parse(STEP2).unwrap();
    let keep: BTreeSet<Name> = ["x".into(), "y".into()].into();
    assert!(matches!(classify_termination(&spec, &keep), Termination::NoGuarantee(r) if r.contains("rational")));
    let rat = STEP2.replace("integer", "rational").replace("x = y | x = y + 2", "x = y").replace("x' = x + 2", "x' = y");
    let rat = rat.replace("x <= y + 1", "x <= y").replace("x > y + 1", "x > y").replace("x <= y + 2", "x <= y");
    let spec = parse(&rat).unwrap();
    assert_eq!(classify_termination(&spec, &keep), Termination::GuaranteedTerminating);
    let keep_x: BTreeSet<Name> = ["x".into()].into();
    assert!(matches!(classify_termination(&spec, &keep_x), Termination::NoGuarantee(_)));
}
