use std::fmt;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Lexical,
    Syntax,
    Sort,
    Undeclared,
    RoleConflict,
    Version,
    Shape,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKind::Lexical => "lexical error",
            ErrorKind::Syntax => "syntax error",
            ErrorKind::Sort => "sort error",
            ErrorKind::Undeclared => "undeclared symbol",
            ErrorKind::RoleConflict => "role conflict",
            ErrorKind::Version => "version error",
            ErrorKind::Shape => "shape error",
        })
    }
}

/// Diagnostic with position and, for syntax errors, the expected tokens.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct SpecError {
    pub kind: ErrorKind,
    pub line: usize,
    pub col: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl SpecError {
    pub fn new(kind: ErrorKind, line: usize, col: usize, message: impl Into<String>) -> SpecError {
        SpecError { kind, line, col, message: message.into(), expected: Vec::new() }
    }

    pub fn expecting(mut self, expected: &[&str]) -> SpecError {
        self.expected = expected.iter().map(|s| s.to_string()).collect();
        self
    }
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.line, self.col, self.kind, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(" or "))?;
        }
        Ok(())
    }
}
