//! Minimal s-expression reader for solver responses.

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            Sexp::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(l) => Some(l),
            Sexp::Atom(_) => None,
        }
    }
}

impl std::fmt::Display for Sexp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::List(l) => {
                f.write_str("(")?;
                for (i, s) in l.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{}", s)?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Parses every top-level expression; `None` on unbalanced input.
pub fn parse_all(src: &str) -> Option<Vec<Sexp>> {
    let chars: Vec<char> = src.chars().collect();
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '(' => {
                stack.push(Vec::new());
                i += 1;
            }
            ')' => {
                let done = stack.pop()?;
                stack.last_mut()?.push(Sexp::List(done));
                i += 1;
            }
            ';' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            c if c.is_whitespace() => i += 1,
            '|' => {
                let start = i;
                i += 1;
                while i < chars.len() && chars[i] != '|' {
                    i += 1;
                }
                i += 1;
                stack.last_mut()?.push(Sexp::Atom(chars[start..i.min(chars.len())].iter().collect()));
            }
            '"' => {
                let start = i;
                i += 1;
                while i < chars.len() {
                    if chars[i] == '"' {
                        if i + 1 < chars.len() && chars[i + 1] == '"' {
                            i += 2;
                            continue;
                        }
                        break;
                    }
                    i += 1;
                }
                i += 1;
                stack.last_mut()?.push(Sexp::Atom(chars[start..i.min(chars.len())].iter().collect()));
            }
            _ => {
                let start = i;
                while i < chars.len() && !chars[i].is_whitespace() && !matches!(chars[i], '(' | ')' | ';') {
                    i += 1;
                }
                stack.last_mut()?.push(Sexp::Atom(chars[start..i].iter().collect()));
            }
        }
    }
    if stack.len() != 1 {
        return None;
    }
    stack.pop()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_lists() {
        let v = parse_all("sat\n(\n (define-fun x () Int\n  (- 3))\n (define-fun |a'| () Real (/ 1.0 2.0)))").unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[1].to_string(), "((define-fun x () Int (- 3)) (define-fun |a'| () Real (/ 1.0 2.0)))");
        assert!(parse_all("((").is_none());
    }
}
