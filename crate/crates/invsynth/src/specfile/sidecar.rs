//! Expected-outcome files stored next to corpus problem files.
//!
//! ```text
//! run refined
//!   mode refined
//!   keep d1, d2
//!   outcome invariant
//!   iterations_at_most 2
//!   expect forall x:int . x < d1 | a(x) <= a(x + 1)
//! end
//! ```

use super::{ErrorKind, Mode, SpecError};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExpectedRun {
    pub name: String,
    pub mode: Option<Mode>,
    pub keep: Option<Vec<String>>,
    pub eliminate: Vec<String>,
    pub max_iterations: Option<usize>,
    pub apf_guard: Option<bool>,
    pub outcome: String,
    pub iterations_at_most: Option<usize>,
    /// Clause statements the resulting invariant must be equivalent to, in source syntax.
    pub expect: Vec<String>,
}

fn list(rest: &str) -> Vec<String> {
    rest.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

pub fn parse_sidecar(src: &str) -> Result<Vec<ExpectedRun>, SpecError> {
    let mut runs = Vec::new();
    let mut cur: Option<ExpectedRun> = None;
    for (i, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: String| SpecError::new(ErrorKind::Syntax, i + 1, 1, m);
        let (key, rest) = line.split_once(char::is_whitespace).map(|(k, r)| (k, r.trim())).unwrap_or((line, ""));
        let num = |r: &str| r.parse::<usize>().map_err(|_| err(format!("expected a number, found `{}`", r)));
        match (key, cur.as_mut()) {
            ("run", None) => cur = Some(ExpectedRun { name: rest.to_string(), ..Default::default() }),
            ("end", Some(_)) => runs.push(cur.take().unwrap_or_default()),
            ("mode", Some(r)) => {
                r.mode = Some(match rest {
                    "naive" => Mode::Naive,
                    "refined" => Mode::Refined,
                    _ => return Err(err(format!("unknown mode `{}`", rest))),
                })
            }
            ("keep", Some(r)) => r.keep = Some(list(rest)),
            ("eliminate", Some(r)) => r.eliminate = list(rest),
            ("max_iterations", Some(r)) => r.max_iterations = Some(num(rest)?),
            ("apf_guard", Some(r)) => r.apf_guard = Some(rest == "on"),
            ("outcome", Some(r)) => r.outcome = rest.to_string(),
            ("iterations_at_most", Some(r)) => r.iterations_at_most = Some(num(rest)?),
            ("expect", Some(r)) => r.expect.push(rest.to_string()),
            _ => return Err(err(format!("unexpected `{}`", key))),
        }
    }
    if cur.is_some() {
        return Err(SpecError::new(ErrorKind::Syntax, src.lines().count(), 1, "unterminated run block"));
    }
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_runs() {
        let runs = parse_sidecar("run a\n  keep x, y\n  outcome invariant\n  expect x <= y\nend\nrun b\n  outcome budget_exhausted\nend\n").unwrap();
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[0].keep, Some(vec!["x".to_string(), "y".to_string()]));
        assert_eq!(runs[0].expect, vec!["x <= y".to_string()]);
        assert_eq!(runs[1].outcome, "budget_exhausted");
    }
}
