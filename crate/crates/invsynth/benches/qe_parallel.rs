//! Independent quantifier elimination tasks mapped sequentially and in parallel.

use criterion::{criterion_group, criterion_main, Criterion};
use invsynth::logic::{Formula, Literal, Name, Rel, Sort, SortKind, Term, Q};
use invsynth::par::{par_map, seq_map};
use invsynth::qelim::{eliminate, QeConfig};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn task(rng: &mut StdRng, syms: &[Term]) -> Formula {
    let zero = Term::int(0, syms[0].sort().clone());
    let conj = |rng: &mut StdRng| {
        let lits = (0..4)
            .map(|_| {
                let mut lhs = Term::int(rng.gen_range(-6..=6), syms[0].sort().clone());
                for s in syms {
                    lhs = lhs.add(&s.scale(&Q::from_integer(rng.gen_range(-3i64..=3).into())));
                }
                let rel = if rng.gen_bool(0.2) { Rel::Eq } else { Rel::Le };
                Formula::Lit(Literal::cmp(rel, lhs, zero.clone()))
            })
            .collect();
        Formula::and(lits)
    };
    Formula::or((0..3).map(|_| conj(rng)).collect())
}

fn bench(c: &mut Criterion) {
    let int = Sort::new("int", SortKind::Int);
    let syms: Vec<Term> = ["x", "y", "a", "b"].iter().map(|s| Term::constant(Name::from(*s), int.clone())).collect();
    let mut rng = StdRng::seed_from_u64(1);
    let tasks: Vec<Formula> = (0..16).map(|_| task(&mut rng, &syms)).collect();
    let cfg = QeConfig::default();
    let run = |f: &Formula| eliminate(&syms[..2], f, &cfg).map(|d| d.len()).unwrap_or(0);
    let mut g = c.benchmark_group("qe_batch");
    g.sample_size(10);
    g.bench_function("sequential", |b| b.iter(|| seq_map(&tasks, run)));
    g.bench_function("parallel", |b| b.iter(|| par_map(&tasks, run)));
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
