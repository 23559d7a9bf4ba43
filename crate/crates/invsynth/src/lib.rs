//! Synthesis of universally quantified inductive invariants for parametric
//! transition systems by iterated strengthening with symbol elimination in
//! local theory extensions.

pub mod hierarchy;
pub mod invariant_loop;
pub mod logic;
pub mod par;
pub mod qelim;
pub mod smt;
pub mod specfile;
pub mod symbol_elim;
