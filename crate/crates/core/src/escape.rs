//! Backslash escaping for tab-separated text records.
//!
//! `\\`, `\t`, `\n` and `\r` are escaped so a field never contains a tab or a
//! line break. Context fields additionally escape spaces as `\s` so lexemes can
//! be joined with single spaces.

use crate::error::{Error, Result};

pub fn escape_field(s: &str) -> String {
    escape_impl(s, false)
}

pub fn escape_context_item(s: &str) -> String {
    escape_impl(s, true)
}

fn escape_impl(s: &str, spaces: bool) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            ' ' if spaces => out.push_str("\\s"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_field(s: &str) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('s') => out.push(' '),
            other => {
                return Err(Error::parse(
                    "escaped field",
                    0,
                    format!("bad escape sequence \\{}", other.map(String::from).unwrap_or_default()),
                ))
            }
        }
    }
    Ok(out)
}

/// Joins lexemes into one space-separated, escaped context field.
pub fn join_context<S: AsRef<str>>(items: &[S]) -> String {
    items
        .iter()
        .map(|s| escape_context_item(s.as_ref()))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn split_context(field: &str) -> Result<Vec<String>> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field.split(' ').map(unescape_field).collect()
}
