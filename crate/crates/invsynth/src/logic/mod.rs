//! Many-sorted terms, literals, clauses and the syntactic transformations
//! shared by every other module.

pub mod formula;
pub mod ops;
pub mod sort;
pub mod term;

pub use formula::{
    conj_trivially_unsat, product, Atom, Clause, ClauseSet, Dnf, Formula, GroundConj, Literal, NormalFormError, Rel,
    SkolemOrigin,
};
pub use ops::{
    collect_est, prime_clauses, prime_ground, prime_literals, skolemize_negation, skolemize_negation_with,
    to_dnf_guarded, GuardError, GuardedCase, GuardedSystem,
};
pub use sort::{name, FunDecl, Name, PredDecl, Role, Signature, SignatureError, Sort, SortKind};
pub use term::{fmt_q, q, q_frac, Term, TermKind, Q};
