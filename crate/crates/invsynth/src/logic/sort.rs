use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Interned-by-value symbol and sort names.
pub type Name = Arc<str>;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SortKind {
    /// Integer arithmetic; used for index sorts and integer elements.
    Int,
    /// Rational arithmetic.
    Real,
    Uninterpreted,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sort {
    pub name: Name,
    pub kind: SortKind,
}

impl Sort {
    pub fn new(name: &str, kind: SortKind) -> Sort {
        Sort { name: Arc::from(name), kind }
    }

    pub fn int() -> Sort {
        Sort::new("int", SortKind::Int)
    }

    pub fn real() -> Sort {
        Sort::new("real", SortKind::Real)
    }

    pub fn is_arith(&self) -> bool {
        matches!(self.kind, SortKind::Int | SortKind::Real)
    }

    pub fn is_int(&self) -> bool {
        self.kind == SortKind::Int
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    /// Symbols of the base theory signature (uninterpreted constants included).
    Base,
    /// Symbols allowed to occur in synthesized constraints.
    Parameter,
    /// Non-parametric symbols, eliminated by symbol elimination.
    Extension,
    /// Post-state copy of an updated symbol.
    Primed,
}

impl Role {
    pub fn keyword(self) -> &'static str {
        match self {
            Role::Base => "base",
            Role::Parameter => "parameter",
            Role::Extension => "extension",
            Role::Primed => "primed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunDecl {
    pub name: Name,
    pub args: Vec<Sort>,
    pub result: Sort,
    pub role: Role,
}

impl FunDecl {
    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredDecl {
    pub name: Name,
    pub args: Vec<Sort>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SignatureError {
    #[error("duplicate sort `{0}`")]
    DuplicateSort(String),
    #[error("duplicate symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("unknown sort `{0}`")]
    UnknownSort(String),
    #[error("role conflict for `{symbol}`: {reason}")]
    RoleConflict { symbol: String, reason: String },
}

/// Sorts plus function and predicate symbols partitioned by role.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    sorts: BTreeMap<Name, Sort>,
    functions: BTreeMap<Name, FunDecl>,
    predicates: BTreeMap<Name, PredDecl>,
    primes: BTreeMap<Name, Name>,
    unprimes: BTreeMap<Name, Name>,
    order: Vec<Name>,
}

impl Signature {
    pub fn new() -> Signature {
        Signature::default()
    }

    pub fn add_sort(&mut self, sort: Sort) -> Result<(), SignatureError> {
        if self.sorts.contains_key(&sort.name) {
            return Err(SignatureError::DuplicateSort(sort.name.to_string()));
        }
        self.sorts.insert(sort.name.clone(), sort);
        Ok(())
    }

    pub fn sort(&self, name: &str) -> Option<&Sort> {
        self.sorts.get(name)
    }

    pub fn sorts(&self) -> impl Iterator<Item = &Sort> {
        self.sorts.values()
    }

    pub fn add_function(&mut self, decl: FunDecl) -> Result<(), SignatureError> {
        if self.functions.contains_key(&decl.name) || self.predicates.contains_key(&decl.name) {
            return Err(SignatureError::DuplicateSymbol(decl.name.to_string()));
        }
        if decl.role == Role::Primed {
            return Err(SignatureError::RoleConflict {
                symbol: decl.name.to_string(),
                reason: "primed symbols are declared through their unprimed partner".into(),
            });
        }
        if decl.name.ends_with('\'') {
            return Err(SignatureError::RoleConflict {
                symbol: decl.name.to_string(),
                reason: "a primed name cannot carry a non-primed role".into(),
            });
        }
        for s in decl.args.iter().chain(std::iter::once(&decl.result)) {
            if !self.sorts.contains_key(&s.name) {
                return Err(SignatureError::UnknownSort(s.name.to_string()));
            }
        }
        self.order.push(decl.name.clone());
        self.functions.insert(decl.name.clone(), decl);
        Ok(())
    }

    pub fn add_predicate(&mut self, decl: PredDecl) -> Result<(), SignatureError> {
        if self.functions.contains_key(&decl.name) || self.predicates.contains_key(&decl.name) {
            return Err(SignatureError::DuplicateSymbol(decl.name.to_string()));
        }
        self.predicates.insert(decl.name.clone(), decl);
        Ok(())
    }

    /// Declares `f'` as the post-state copy of `f`, with identical rank.
    pub fn add_primed(&mut self, base: &str) -> Result<Name, SignatureError> {
        let decl = self
            .functions
            .get(base)
            .cloned()
            .ok_or_else(|| SignatureError::UnknownSymbol(base.to_string()))?;
        match decl.role {
            Role::Primed => {
                return Err(SignatureError::RoleConflict {
                    symbol: base.to_string(),
                    reason: "cannot prime a primed symbol".into(),
                })
            }
            Role::Base => {
                return Err(SignatureError::RoleConflict {
                    symbol: base.to_string(),
                    reason: "base symbols are never updated".into(),
                })
            }
            _ => {}
        }
        let primed: Name = Arc::from(format!("{}'", base).as_str());
        if self.functions.contains_key(&primed) {
            return Err(SignatureError::DuplicateSymbol(primed.to_string()));
        }
        self.functions.insert(
            primed.clone(),
            FunDecl { name: primed.clone(), args: decl.args.clone(), result: decl.result.clone(), role: Role::Primed },
        );
        self.order.push(primed.clone());
        self.primes.insert(decl.name.clone(), primed.clone());
        self.unprimes.insert(primed.clone(), decl.name.clone());
        Ok(primed)
    }

    pub fn function(&self, name: &str) -> Option<&FunDecl> {
        self.functions.get(name)
    }

    pub fn predicate(&self, name: &str) -> Option<&PredDecl> {
        self.predicates.get(name)
    }

    /// Function symbols in declaration order.
    pub fn functions(&self) -> impl Iterator<Item = &FunDecl> {
        self.order.iter().filter_map(move |n| self.functions.get(n))
    }

    pub fn predicates(&self) -> impl Iterator<Item = &PredDecl> {
        self.predicates.values()
    }

    pub fn role(&self, name: &str) -> Option<Role> {
        self.functions.get(name).map(|d| d.role)
    }

    pub fn prime_of(&self, name: &str) -> Option<&Name> {
        self.primes.get(name)
    }

    pub fn unprime_of(&self, name: &str) -> Option<&Name> {
        self.unprimes.get(name)
    }

    /// Symbols with a primed partner (the updated set F).
    pub fn updatable(&self) -> impl Iterator<Item = &Name> {
        self.primes.keys()
    }

    pub fn is_parameter(&self, name: &str) -> bool {
        self.role(name) == Some(Role::Parameter)
    }

    pub fn is_base(&self, name: &str) -> bool {
        self.role(name) == Some(Role::Base)
    }

    /// Symbols that may occur in synthesized constraints: base and parameter roles.
    pub fn is_kept(&self, name: &str) -> bool {
        matches!(self.role(name), Some(Role::Base | Role::Parameter))
    }

    /// Returns a copy where exactly the symbols in `keep` (plus base symbols) are parameters
    /// and every other non-primed, non-base symbol is an extension symbol.
    pub fn with_keep<'a, I>(&self, keep: I) -> Result<Signature, SignatureError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let keep: Vec<&str> = keep.into_iter().collect();
        for k in &keep {
            match self.role(k) {
                None => return Err(SignatureError::UnknownSymbol(k.to_string())),
                Some(Role::Primed) => {
                    return Err(SignatureError::RoleConflict {
                        symbol: k.to_string(),
                        reason: "primed symbols cannot be kept".into(),
                    })
                }
                _ => {}
            }
        }
        let mut out = self.clone();
        for decl in out.functions.values_mut() {
            match decl.role {
                Role::Base | Role::Primed => {}
                _ => {
                    decl.role = if keep.contains(&decl.name.as_ref()) { Role::Parameter } else { Role::Extension };
                }
            }
        }
        Ok(out)
    }

    pub fn parameters(&self) -> Vec<Name> {
        self.functions().filter(|d| d.role == Role::Parameter).map(|d| d.name.clone()).collect()
    }
}
