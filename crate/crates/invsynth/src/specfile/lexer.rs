use num_bigint::BigInt;

use super::error::{ErrorKind, SpecError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Num(BigInt),
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Colon,
    Dot,
    Plus,
    Minus,
    Star,
    Slash,
    Eq,
    Ne,
    Le,
    Lt,
    Ge,
    Gt,
    And,
    Or,
    Not,
    Implies,
    Iff,
    Newline,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{}`", s),
            Tok::Num(n) => format!("`{}`", n),
            Tok::Newline => "end of line".into(),
            other => format!("`{}`", other.text()),
        }
    }

    pub fn text(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrack => "[",
            Tok::RBrack => "]",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Dot => ".",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Eq => "=",
            Tok::Ne => "!=",
            Tok::Le => "<=",
            Tok::Lt => "<",
            Tok::Ge => ">=",
            Tok::Gt => ">",
            Tok::And => "&",
            Tok::Or => "|",
            Tok::Not => "!",
            Tok::Implies => "->",
            Tok::Iff => "<->",
            Tok::Ident(_) | Tok::Num(_) | Tok::Newline => "",
        }
    }

    /// Tokens after which a line break does not end the statement.
    fn continues(&self) -> bool {
        matches!(
            self,
            Tok::LParen
                | Tok::LBrack
                | Tok::Comma
                | Tok::Plus
                | Tok::Minus
                | Tok::Star
                | Tok::Slash
                | Tok::Eq
                | Tok::Ne
                | Tok::Le
                | Tok::Lt
                | Tok::Ge
                | Tok::Gt
                | Tok::And
                | Tok::Or
                | Tok::Not
                | Tok::Implies
                | Tok::Iff
                | Tok::Dot
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

/// Splits source text into tokens. Line breaks are significant only at
/// bracket depth zero and when the previous token does not expect a continuation.
pub fn lex(src: &str) -> Result<Vec<Token>, SpecError> {
    let mut out: Vec<Token> = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    let mut depth: usize = 0;
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let push = |tok: Tok, out: &mut Vec<Token>| out.push(Token { tok, line: l0, col: c0 });
        if c == '\n' {
            let suppress = depth > 0 || out.last().is_none_or(|t| t.tok.continues() || t.tok == Tok::Newline);
            if !suppress {
                push(Tok::Newline, &mut out);
            }
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            while i < chars.len() && chars[i] == '\'' {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            push(Tok::Ident(s), &mut out);
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            let n: BigInt = s.parse().map_err(|_| SpecError::new(ErrorKind::Lexical, l0, c0, "bad numeral"))?;
            push(Tok::Num(n), &mut out);
            continue;
        }
        let two: String = chars[i..(i + 3).min(chars.len())].iter().collect();
        let (tok, len) = if two.starts_with("<->") {
            (Tok::Iff, 3)
        } else if two.starts_with("->") {
            (Tok::Implies, 2)
        } else if two.starts_with("!=") {
            (Tok::Ne, 2)
        } else if two.starts_with("<=") {
            (Tok::Le, 2)
        } else if two.starts_with(">=") {
            (Tok::Ge, 2)
        } else {
            let t = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBrack,
                ']' => Tok::RBrack,
                ',' => Tok::Comma,
                ':' => Tok::Colon,
                '.' => Tok::Dot,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                '=' => Tok::Eq,
                '<' => Tok::Lt,
                '>' => Tok::Gt,
                '&' => Tok::And,
                '|' => Tok::Or,
                '!' => Tok::Not,
                other => {
                    return Err(SpecError::new(ErrorKind::Lexical, l0, c0, format!("unexpected character `{}`", other)));
                }
            };
            (t, 1)
        };
        match tok {
            Tok::LParen | Tok::LBrack => depth += 1,
            Tok::RParen | Tok::RBrack => depth = depth.saturating_sub(1),
            _ => {}
        }
        push(tok, &mut out);
        i += len;
        col += len;
    }
    if out.last().is_some_and(|t| t.tok != Tok::Newline) {
        out.push(Token { tok: Tok::Newline, line, col });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn continuation_after_operator() {
        let toks = lex("a <=\n b\nc").unwrap();
        let nl = toks.iter().filter(|t| t.tok == Tok::Newline).count();
        assert_eq!(nl, 2);
    }

    #[test]
    fn primes_are_part_of_identifiers() {
        let toks = lex("d1' = a'(i)").unwrap();
        assert_eq!(toks[0].tok, Tok::Ident("d1'".into()));
        assert_eq!(toks[2].tok, Tok::Ident("a'".into()));
    }

    #[test]
    fn rejects_stray_characters() {
        let e = lex("x @ y").unwrap_err();
        assert_eq!(e.kind, ErrorKind::Lexical);
        assert_eq!((e.line, e.col), (1, 3));
    }
}
