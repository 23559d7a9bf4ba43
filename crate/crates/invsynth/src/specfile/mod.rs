//! Text format for parametric transition systems: signature with roles, a
//! chain of theory levels, initial states, guarded updates, the safety
//! property and run options.

mod error;
mod lexer;
mod parser;
mod render;
pub mod sidecar;
pub mod validate;

use std::collections::BTreeSet;

pub use error::{ErrorKind, SpecError};
pub use parser::{parse_clauses, parse_formula, parse_spec as parse, parse_term};
pub use render::render;
pub use validate::{certified, check_locality_class, validate_guards, LocalityClass, Obligation, ObligationKind, Verdict};

use crate::logic::{Clause, ClauseSet, GuardedCase, GuardedSystem, Name, Signature, Sort, SortKind};

/// How instances are closed for a level: plain ground terms, or the index
/// closure of the array property fragment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Closure {
    Identity,
    Apf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Naive,
    Refined,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TheoryLevel {
    pub name: Name,
    pub clauses: ClauseSet,
    pub closure: Closure,
}

/// Guarded definition of the post-state of one updated symbol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateSpec {
    pub function: Name,
    pub vars: Vec<(Name, Sort)>,
    pub cases: Vec<GuardedCase>,
}

impl UpdateSpec {
    pub fn system(&self, certified: bool) -> GuardedSystem {
        GuardedSystem { function: self.function.clone(), vars: self.vars.clone(), cases: self.cases.clone(), certified }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SpecOptions {
    pub keep: Option<Vec<Name>>,
    pub eliminate: Vec<Name>,
    pub max_iterations: Option<usize>,
    pub mode: Option<Mode>,
    pub apf_guard: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseTheory {
    Lia,
    Lra,
    Mixed,
}

/// Parsed problem file. Levels are listed innermost first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProblemSpec {
    pub signature: Signature,
    pub levels: Vec<TheoryLevel>,
    pub init: ClauseSet,
    pub updates: Vec<UpdateSpec>,
    pub property: ClauseSet,
    pub options: SpecOptions,
    pub primed_order: Vec<Name>,
}

impl ProblemSpec {
    pub fn base_theory(&self) -> BaseTheory {
        let ints = self.signature.sorts().any(|s| s.kind == SortKind::Int);
        let reals = self.signature.sorts().any(|s| s.kind == SortKind::Real);
        match (ints, reals) {
            (true, true) => BaseTheory::Mixed,
            (false, true) => BaseTheory::Lra,
            _ => BaseTheory::Lia,
        }
    }

    /// Symbols with a primed partner.
    pub fn updated(&self) -> BTreeSet<Name> {
        self.updates.iter().map(|u| u.function.clone()).collect()
    }

    /// All theory axioms, innermost level first.
    pub fn theory(&self) -> ClauseSet {
        ClauseSet::new(self.levels.iter().flat_map(|l| l.clauses.clauses.iter().cloned()).collect())
    }

    /// Update axioms as clauses `guard -> effect`.
    pub fn update_clauses(&self) -> ClauseSet {
        ClauseSet::new(self.updates.iter().flat_map(|u| u.system(false).clauses()).collect())
    }

    pub fn uses_apf(&self) -> bool {
        self.levels.iter().any(|l| l.closure == Closure::Apf)
    }

    /// Property clauses that mention no function symbol besides constants.
    pub fn is_ground_property(&self) -> bool {
        self.property.clauses.iter().all(Clause::is_ground)
    }
}
