//! Declarative lexer specifications and their line-oriented file format.
//!
//! ```text
//! # comment
//! language = c
//! case_sensitive = true
//! line_comment = //
//! block_comment = /* */
//! string = " " \
//! ident_start = a-z A-Z _
//! ident_continue = a-z A-Z 0-9 _
//! operator = <<= >>= << >> + - ;
//! ```
//!
//! List-valued keys may repeat. `block_comment` takes `open close [nesting]`,
//! `string` takes `open close [escape|none]`. Character classes are
//! whitespace-separated items: a range `a-z`, a named class `@alpha`,
//! `@digit` or `@alnum`, or literal characters.

use std::borrow::Cow;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::LanguageId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NamedClass {
    Alpha,
    Digit,
    Alnum,
}

impl NamedClass {
    fn contains(self, c: char) -> bool {
        match self {
            NamedClass::Alpha => c.is_alphabetic(),
            NamedClass::Digit => c.is_ascii_digit(),
            NamedClass::Alnum => c.is_alphabetic() || c.is_ascii_digit(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            NamedClass::Alpha => "@alpha",
            NamedClass::Digit => "@digit",
            NamedClass::Alnum => "@alnum",
        }
    }
}

/// A set of characters built from ranges, literals and named classes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharClass {
    pub ranges: Vec<(char, char)>,
    pub named: Vec<NamedClass>,
}

impl CharClass {
    pub fn contains(&self, c: char) -> bool {
        self.ranges.iter().any(|&(lo, hi)| lo <= c && c <= hi) || self.named.iter().any(|n| n.contains(c))
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty() && self.named.is_empty()
    }

    pub fn parse(value: &str) -> std::result::Result<Self, String> {
        let mut class = CharClass::default();
        for item in value.split_whitespace() {
            let chars: Vec<char> = item.chars().collect();
            if let Some(name) = item.strip_prefix('@').filter(|n| !n.is_empty()) {
                class.named.push(match name {
                    "alpha" => NamedClass::Alpha,
                    "digit" => NamedClass::Digit,
                    "alnum" => NamedClass::Alnum,
                    other => return Err(format!("unknown character class @{other}")),
                });
            } else if chars.len() == 3 && chars[1] == '-' {
                if chars[0] > chars[2] {
                    return Err(format!("inverted range {item}"));
                }
                class.ranges.push((chars[0], chars[2]));
            } else {
                class.ranges.extend(chars.iter().map(|&c| (c, c)));
            }
        }
        Ok(class)
    }

    fn to_spec_value(&self) -> String {
        let mut items: Vec<String> = self
            .ranges
            .iter()
            .map(|&(lo, hi)| if lo == hi { lo.to_string() } else { format!("{lo}-{hi}") })
            .collect();
        items.extend(self.named.iter().map(|n| n.name().to_string()));
        items.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockComment {
    pub open: String,
    pub close: String,
    pub nesting: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StringDelimiter {
    pub open: String,
    pub close: String,
    pub escape: Option<char>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexerSpec {
    pub language: LanguageId,
    pub line_comment_prefixes: Vec<String>,
    pub block_comments: Vec<BlockComment>,
    pub string_delimiters: Vec<StringDelimiter>,
    pub ident_start: CharClass,
    pub ident_continue: CharClass,
    pub operators: Vec<String>,
    pub case_sensitive: bool,
}

impl LexerSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |message: String| Error::LexerSpec {
            language: self.language.to_string(),
            message,
        };
        let openers: Vec<&str> = self
            .line_comment_prefixes
            .iter()
            .map(String::as_str)
            .chain(self.block_comments.iter().map(|b| b.open.as_str()))
            .collect();
        for (i, a) in openers.iter().enumerate() {
            if a.is_empty() {
                return Err(fail("empty comment delimiter".into()));
            }
            for (j, b) in openers.iter().enumerate() {
                if i != j && b.starts_with(a) {
                    return Err(fail(format!("comment opener `{a}` is a prefix of `{b}`")));
                }
            }
        }
        if self.block_comments.iter().any(|b| b.close.is_empty()) {
            return Err(fail("empty block comment terminator".into()));
        }
        if self.string_delimiters.iter().any(|s| s.open.is_empty() || s.close.is_empty()) {
            return Err(fail("empty string delimiter".into()));
        }
        if self.operators.iter().any(String::is_empty) {
            return Err(fail("empty operator".into()));
        }
        if self.ident_start.is_empty() {
            return Err(fail("identifier start class is empty".into()));
        }
        Ok(())
    }

    /// Canonical string form of a lexeme for vocabulary identity. Specs
    /// that are not case sensitive fold everything but string literals to
    /// lower case.
    pub fn vocab_key<'a>(&self, lexeme: &'a str, kind: super::TokenKind) -> Cow<'a, str> {
        if self.case_sensitive || kind == super::TokenKind::String || !lexeme.chars().any(char::is_uppercase) {
            Cow::Borrowed(lexeme)
        } else {
            Cow::Owned(lexeme.to_lowercase())
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut language = None;
        let mut case_sensitive = true;
        let mut line_comment_prefixes = Vec::new();
        let mut block_comments = Vec::new();
        let mut string_delimiters = Vec::new();
        let mut ident_start = None;
        let mut ident_continue = None;
        let mut operators = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::parse("lexer spec", lineno, "expected `key = value`"))?;
            let err = |m: String| Error::parse("lexer spec", lineno, m);
            let fields: Vec<&str> = value.split_whitespace().collect();
            match key {
                "language" => language = Some(LanguageId::new(value)?),
                "case_sensitive" => {
                    case_sensitive = value
                        .parse()
                        .map_err(|_| err(format!("expected true/false, got `{value}`")))?
                }
                "line_comment" => {
                    if fields.len() != 1 {
                        return Err(err("line_comment takes one prefix".into()));
                    }
                    line_comment_prefixes.push(fields[0].to_string());
                }
                "block_comment" => match fields.as_slice() {
                    [open, close] | [open, close, "nesting"] => block_comments.push(BlockComment {
                        open: open.to_string(),
                        close: close.to_string(),
                        nesting: fields.len() == 3,
                    }),
                    _ => return Err(err("block_comment takes `open close [nesting]`".into())),
                },
                "string" => {
                    let escape = match fields.get(2) {
                        None | Some(&"none") => None,
                        Some(e) => {
                            let mut chars = e.chars();
                            match (chars.next(), chars.next()) {
                                (Some(c), None) => Some(c),
                                _ => return Err(err(format!("escape must be one character, got `{e}`"))),
                            }
                        }
                    };
                    if !(2..=3).contains(&fields.len()) {
                        return Err(err("string takes `open close [escape|none]`".into()));
                    }
                    string_delimiters.push(StringDelimiter {
                        open: fields[0].to_string(),
                        close: fields[1].to_string(),
                        escape,
                    });
                }
                "ident_start" => ident_start = Some(CharClass::parse(value).map_err(err)?),
                "ident_continue" => ident_continue = Some(CharClass::parse(value).map_err(err)?),
                "operator" => operators.extend(fields.iter().map(|s| s.to_string())),
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }

        let language = language.ok_or_else(|| Error::parse("lexer spec", 0, "missing `language`"))?;
        let ident_start = ident_start.ok_or_else(|| Error::parse("lexer spec", 0, "missing `ident_start`"))?;
        let ident_continue = ident_continue.unwrap_or_else(|| ident_start.clone());
        let spec = LexerSpec {
            language,
            line_comment_prefixes,
            block_comments,
            string_delimiters,
            ident_start,
            ident_continue,
            operators,
            case_sensitive,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_spec_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "language = {}", self.language);
        let _ = writeln!(out, "case_sensitive = {}", self.case_sensitive);
        for p in &self.line_comment_prefixes {
            let _ = writeln!(out, "line_comment = {p}");
        }
        for b in &self.block_comments {
            let nesting = if b.nesting { " nesting" } else { "" };
            let _ = writeln!(out, "block_comment = {} {}{nesting}", b.open, b.close);
        }
        for s in &self.string_delimiters {
            let escape = s.escape.map(String::from).unwrap_or_else(|| "none".into());
            let _ = writeln!(out, "string = {} {} {escape}", s.open, s.close);
        }
        let _ = writeln!(out, "ident_start = {}", self.ident_start.to_spec_value());
        let _ = writeln!(out, "ident_continue = {}", self.ident_continue.to_spec_value());
        for chunk in self.operators.chunks(16) {
            let _ = writeln!(out, "operator = {}", chunk.join(" "));
        }
        out
    }
}
