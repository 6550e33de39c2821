//! SQL script splitting.
//!
//! Embedded engines usually execute one statement per call, so scripts are
//! cut on top-level `;` before they are handed over. Semicolons inside
//! quoted literals, quoted identifiers and comments never split.

use std::fs;
use std::path::Path;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlScript {
    text: String,
    statements: Vec<String>,
}

impl SqlScript {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let statements = split_statements(&text);
        SqlScript { text, statements }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Ok(SqlScript::new(fs::read_to_string(path)?))
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn statements(&self) -> &[String] {
        &self.statements
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Code,
    Quoted(char),
    Bracket,
    LineComment,
    BlockComment,
}

/// Splits `script` into statements on top-level semicolons.
///
/// Statements are returned trimmed and without their terminating `;`.
/// Pieces that hold nothing but whitespace and comments are dropped.
/// `CREATE TRIGGER ... BEGIN ... END;` bodies are kept whole.
pub fn split_statements(script: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    // code-only view of the current statement, used for trigger detection
    let mut words = String::new();
    let mut has_code = false;
    let mut state = State::Code;
    let mut chars = script.chars().peekable();

    while let Some(c) = chars.next() {
        match state {
            State::Code => match c {
                ';' if !inside_trigger_body(&words) => {
                    if has_code {
                        out.push(current.trim().to_string());
                    }
                    current.clear();
                    words.clear();
                    has_code = false;
                    continue;
                }
                '\'' | '"' | '`' => {
                    state = State::Quoted(c);
                    has_code = true;
                    words.push(' ');
                }
                '[' => {
                    state = State::Bracket;
                    has_code = true;
                    words.push(' ');
                }
                '-' if chars.peek() == Some(&'-') => state = State::LineComment,
                '/' if chars.peek() == Some(&'*') => {
                    current.push(c);
                    current.push(chars.next().unwrap());
                    state = State::BlockComment;
                    continue;
                }
                _ => {
                    if !c.is_whitespace() {
                        has_code = true;
                    }
                    words.push(c);
                }
            },
            // a doubled quote char is an escaped quote and re-enters the literal
            State::Quoted(q) => {
                if c == q {
                    state = State::Code;
                }
            }
            State::Bracket => {
                if c == ']' {
                    state = State::Code;
                }
            }
            State::LineComment => {
                if c == '\n' {
                    state = State::Code;
                }
            }
            State::BlockComment => {
                if c == '*' && chars.peek() == Some(&'/') {
                    current.push(c);
                    current.push(chars.next().unwrap());
                    state = State::Code;
                    continue;
                }
            }
        }
        current.push(c);
    }
    if has_code {
        out.push(current.trim().to_string());
    }
    out
}

fn inside_trigger_body(words: &str) -> bool {
    let mut tokens = words.split_whitespace().map(|t| t.to_ascii_uppercase());
    let is_trigger = match tokens.next().as_deref() {
        Some("CREATE") => tokens
            .take(2)
            .any(|t| t == "TRIGGER"),
        _ => false,
    };
    if !is_trigger {
        return false;
    }
    let last = words
        .split(|c: char| !c.is_ascii_alphanumeric() && c != '_')
        .rfind(|t| !t.is_empty())
        .unwrap_or("");
    !last.eq_ignore_ascii_case("END")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basic_split() {
        assert_eq!(
            split_statements("CREATE TABLE a(x INT); INSERT INTO a VALUES (1);"),
            vec!["CREATE TABLE a(x INT)", "INSERT INTO a VALUES (1)"]
        );
        assert_eq!(split_statements("SELECT 1"), vec!["SELECT 1"]);
        assert!(split_statements("").is_empty());
        assert!(split_statements(" ;; \n ; ").is_empty());
    }

    #[test]
    fn quoted_semicolons_do_not_split() {
        assert_eq!(
            split_statements("INSERT INTO t VALUES ('a;b');"),
            vec!["INSERT INTO t VALUES ('a;b')"]
        );
        assert_eq!(split_statements("INSERT INTO t VALUES ('it''s;');").len(), 1);
        assert_eq!(split_statements("SELECT \"a;b\" FROM t; SELECT 2").len(), 2);
        assert_eq!(split_statements("SELECT `a;b` FROM [c;d];").len(), 1);
    }

    #[test]
    fn comments_do_not_split() {
        assert_eq!(split_statements("-- c;\nSELECT 1;"), vec!["-- c;\nSELECT 1"]);
        assert_eq!(split_statements("/* a; b */ SELECT 1; SELECT 2;").len(), 2);
        assert_eq!(split_statements("SELECT 1; -- trailing;").len(), 1);
        assert_eq!(split_statements("SELECT 1; /* only; comment */").len(), 1);
        // a dash that is not a comment
        assert_eq!(split_statements("SELECT 3-1; SELECT 2").len(), 2);
    }

    #[test]
    fn trigger_bodies_stay_whole() {
        let sql = "CREATE TABLE t(x); \
                   CREATE TRIGGER trg AFTER INSERT ON t BEGIN UPDATE t SET x = 1; DELETE FROM t WHERE x = 2; END; \
                   SELECT 1;";
        let got = split_statements(sql);
        assert_eq!(got.len(), 3);
        assert!(got[1].ends_with("END"));
    }

    proptest! {
        // inserting line comments between statements never changes the count
        #[test]
        fn comment_insertion_invariant(
            n in 1usize..8,
            comments in proptest::collection::vec("[a-z ;']{0,12}", 8),
        ) {
            let stmts: Vec<String> = (0..n).map(|i| format!("INSERT INTO t VALUES ({i}, 'x;{i}')")).collect();
            let plain = stmts.join(";\n") + ";";
            let mut commented = String::new();
            for (i, s) in stmts.iter().enumerate() {
                commented.push_str(&format!("-- {}\n{};\n", comments[i], s));
            }
            prop_assert_eq!(split_statements(&plain).len(), n);
            prop_assert_eq!(split_statements(&commented).len(), n);
        }
    }
}
