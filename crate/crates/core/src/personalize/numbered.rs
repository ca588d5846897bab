//! The numbered-list batch format exchanged with rewrite adapters:
//! `1. <text>\n2. <text>...`.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NumberedListError {
    #[error("text before item 1: {0:?}")]
    Preamble(String),
    #[error("expected item {expected}, found {found}")]
    OutOfSequence { expected: usize, found: usize },
    #[error("item {0} is empty")]
    EmptyItem(usize),
}

pub fn render_numbered<S: AsRef<str>>(texts: &[S]) -> String {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| format!("{}. {}", i + 1, t.as_ref()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// `N.` or `N)` at the start of a (left-trimmed) line.
fn item_start(line: &str) -> Option<(usize, &str)> {
    let digits = line.len() - line.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return None;
    }
    let rest = &line[digits..];
    let rest = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')'))?;
    let n = line[..digits].parse().ok()?;
    Some((n, rest))
}

/// Parses a numbered list. Numbering must run 1, 2, 3, ... ; lines without
/// a number continue the previous item; blank lines are ignored.
pub fn parse_numbered(text: &str) -> Result<Vec<String>, NumberedListError> {
    let mut items: Vec<String> = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        match item_start(line) {
            Some((n, rest)) => {
                if n != items.len() + 1 {
                    return Err(NumberedListError::OutOfSequence {
                        expected: items.len() + 1,
                        found: n,
                    });
                }
                items.push(rest.trim().to_string());
            }
            None => match items.last_mut() {
                Some(current) => {
                    if !current.is_empty() {
                        current.push('\n');
                    }
                    current.push_str(line);
                }
                None => return Err(NumberedListError::Preamble(line.to_string())),
            },
        }
    }
    if let Some(i) = items.iter().position(String::is_empty) {
        return Err(NumberedListError::EmptyItem(i + 1));
    }
    Ok(items)
}
