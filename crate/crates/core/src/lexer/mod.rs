//! Comment-aware tokenization driven by [`LexerSpec`]s.
//!
//! At each position the lexer tries, in order: string literal, comment,
//! number, identifier, operator. Each rule takes the longest delimiter or
//! operator that matches. Anything else becomes a one-character `OTHER`
//! token. Whitespace is skipped and never tokenized.

mod builtin;
mod spec;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use builtin::{builtin, builtin_names};
pub use spec::{BlockComment, CharClass, LexerSpec, NamedClass, StringDelimiter};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TokenKind {
    Identifier,
    Number,
    String,
    Operator,
    Comment,
    Other,
}

impl TokenKind {
    pub const ALL: [TokenKind; 6] = [
        TokenKind::Identifier,
        TokenKind::Number,
        TokenKind::String,
        TokenKind::Operator,
        TokenKind::Comment,
        TokenKind::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TokenKind::Identifier => "IDENTIFIER",
            TokenKind::Number => "NUMBER",
            TokenKind::String => "STRING",
            TokenKind::Operator => "OPERATOR",
            TokenKind::Comment => "COMMENT",
            TokenKind::Other => "OTHER",
        }
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TokenKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TokenKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::parse("token kind", 0, format!("unknown token kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub lexeme: String,
    pub kind: TokenKind,
    /// Byte offsets `[start, end)` into the source.
    pub start: usize,
    pub end: usize,
    /// 1-based.
    pub line: usize,
}

impl Token {
    pub fn is_comment(&self) -> bool {
        self.kind == TokenKind::Comment
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unterminated {
    String,
    BlockComment,
}

/// A non-fatal problem found while lexing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexDiagnostic {
    pub kind: Unterminated,
    pub line: usize,
    pub start: usize,
}

impl fmt::Display for LexDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            Unterminated::String => "string literal",
            Unterminated::BlockComment => "block comment",
        };
        write!(f, "line {}: unterminated {what} extends to end of file", self.line)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexed {
    pub tokens: Vec<Token>,
    pub diagnostics: Vec<LexDiagnostic>,
}

/// A validated spec with its delimiter tables sorted for longest match.
#[derive(Debug, Clone)]
pub struct Lexer {
    spec: LexerSpec,
    line_comments: Vec<String>,
    block_comments: Vec<BlockComment>,
    strings: Vec<StringDelimiter>,
    operators: Vec<String>,
}

fn by_length_desc<T>(mut items: Vec<T>, key: impl Fn(&T) -> usize) -> Vec<T> {
    items.sort_by_key(|item| std::cmp::Reverse(key(item)));
    items
}

impl Lexer {
    pub fn new(spec: LexerSpec) -> Result<Self> {
        spec.validate()?;
        let mut operators = spec.operators.clone();
        operators.sort();
        operators.dedup();
        Ok(Lexer {
            line_comments: by_length_desc(spec.line_comment_prefixes.clone(), String::len),
            block_comments: by_length_desc(spec.block_comments.clone(), |b| b.open.len()),
            strings: by_length_desc(spec.string_delimiters.clone(), |s| s.open.len()),
            operators: by_length_desc(operators, String::len),
            spec,
        })
    }

    pub fn spec(&self) -> &LexerSpec {
        &self.spec
    }

    pub fn tokenize(&self, source: &str) -> Lexed {
        let mut out = Lexed::default();
        let bytes = source.as_bytes();
        let mut pos = 0;
        let mut line = 1;

        while pos < source.len() {
            let rest = &source[pos..];
            let c = rest.chars().next().expect("pos is on a char boundary");
            if c.is_whitespace() {
                if c == '\n' {
                    line += 1;
                }
                pos += c.len_utf8();
                continue;
            }

            let (len, kind, unterminated) = self.scan(rest, c);
            let end = pos + len;
            let lexeme = &source[pos..end];
            if let Some(kind) = unterminated {
                out.diagnostics.push(LexDiagnostic { kind, line, start: pos });
            }
            out.tokens.push(Token {
                lexeme: lexeme.to_string(),
                kind,
                start: pos,
                end,
                line,
            });
            line += bytes[pos..end].iter().filter(|&&b| b == b'\n').count();
            pos = end;
        }
        out
    }

    /// Like [`Lexer::tokenize`] but rejects sources that look binary.
    pub fn tokenize_checked(&self, source: &str, path: &Path) -> Result<Lexed> {
        if source.contains('\0') {
            return Err(Error::Lex {
                path: path.to_path_buf(),
                message: "NUL byte in source (binary file?)".into(),
            });
        }
        Ok(self.tokenize(source))
    }

    fn scan(&self, rest: &str, first: char) -> (usize, TokenKind, Option<Unterminated>) {
        if let Some(delim) = self.strings.iter().find(|s| rest.starts_with(s.open.as_str())) {
            let (len, closed) = scan_string(rest, delim);
            return (len, TokenKind::String, (!closed).then_some(Unterminated::String));
        }
        if let Some(prefix) = self.line_comments.iter().find(|p| rest.starts_with(p.as_str())) {
            let mut len = rest.find('\n').unwrap_or(rest.len());
            if rest[..len].ends_with('\r') && len > prefix.len() {
                len -= 1;
            }
            return (len, TokenKind::Comment, None);
        }
        if let Some(block) = self.block_comments.iter().find(|b| rest.starts_with(b.open.as_str())) {
            let (len, closed) = scan_block_comment(rest, block);
            return (len, TokenKind::Comment, (!closed).then_some(Unterminated::BlockComment));
        }
        if first.is_ascii_digit() {
            return (scan_number(rest), TokenKind::Number, None);
        }
        if self.spec.ident_start.contains(first) {
            let len = first.len_utf8()
                + rest[first.len_utf8()..]
                    .chars()
                    .take_while(|&c| self.spec.ident_continue.contains(c))
                    .map(char::len_utf8)
                    .sum::<usize>();
            return (len, TokenKind::Identifier, None);
        }
        if let Some(op) = self.operators.iter().find(|op| rest.starts_with(op.as_str())) {
            return (op.len(), TokenKind::Operator, None);
        }
        (first.len_utf8(), TokenKind::Other, None)
    }
}

fn scan_string(rest: &str, delim: &StringDelimiter) -> (usize, bool) {
    let mut pos = delim.open.len();
    while pos < rest.len() {
        let tail = &rest[pos..];
        if tail.starts_with(delim.close.as_str()) {
            return (pos + delim.close.len(), true);
        }
        let c = tail.chars().next().expect("char boundary");
        pos += c.len_utf8();
        if Some(c) == delim.escape {
            if let Some(next) = rest[pos..].chars().next() {
                pos += next.len_utf8();
            }
        }
    }
    (rest.len(), false)
}

fn scan_block_comment(rest: &str, block: &BlockComment) -> (usize, bool) {
    let mut depth = 1usize;
    let mut pos = block.open.len();
    while pos < rest.len() {
        let tail = &rest[pos..];
        if tail.starts_with(block.close.as_str()) {
            pos += block.close.len();
            depth -= 1;
            if depth == 0 {
                return (pos, true);
            }
        } else if block.nesting && tail.starts_with(block.open.as_str()) {
            pos += block.open.len();
            depth += 1;
        } else {
            pos += tail.chars().next().expect("char boundary").len_utf8();
        }
    }
    (rest.len(), false)
}

/// Digits, letters and underscores; a `.` only when a digit follows; a sign
/// only right after an exponent marker of a non-hex literal.
fn scan_number(rest: &str) -> usize {
    let bytes = rest.as_bytes();
    let hex = rest.starts_with("0x") || rest.starts_with("0X");
    let mut pos = 1;
    while pos < bytes.len() {
        let b = bytes[pos];
        let next_is_digit = bytes.get(pos + 1).is_some_and(u8::is_ascii_digit);
        let ok = b.is_ascii_alphanumeric()
            || b == b'_'
            || (b == b'.' && next_is_digit)
            || ((b == b'+' || b == b'-') && !hex && matches!(bytes[pos - 1], b'e' | b'E') && next_is_digit);
        if !ok {
            break;
        }
        pos += 1;
    }
    pos
}

/// Tokenizes `source` with a freshly built lexer.
///
/// Invalid specs yield no tokens; build a [`Lexer`] once to lex many files
/// and to see validation errors.
pub fn tokenize(source: &str, spec: &LexerSpec) -> Vec<Token> {
    match Lexer::new(spec.clone()) {
        Ok(lexer) => lexer.tokenize(source).tokens,
        Err(_) => Vec::new(),
    }
}

pub fn strip_comments(tokens: &[Token]) -> Vec<Token> {
    tokens.iter().filter(|t| !t.is_comment()).cloned().collect()
}

/// Loads a spec from a path, or a built-in spec when `name_or_path` names one.
pub fn load_spec(name_or_path: &str) -> Result<LexerSpec> {
    if let Some(spec) = builtin(name_or_path) {
        return Ok(spec);
    }
    let text = std::fs::read_to_string(name_or_path).map_err(|e| Error::io(name_or_path, e))?;
    LexerSpec::parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c() -> Lexer {
        Lexer::new(builtin("c").unwrap()).unwrap()
    }

    fn kinds(lexed: &Lexed) -> Vec<(TokenKind, &str)> {
        lexed.tokens.iter().map(|t| (t.kind, t.lexeme.as_str())).collect()
    }

    #[test]
    fn c_statement_with_trailing_comment() {
        let lexed = c().tokenize("int x; // hi");
        assert_eq!(
            kinds(&lexed),
            vec![
                (TokenKind::Identifier, "int"),
                (TokenKind::Identifier, "x"),
                (TokenKind::Operator, ";"),
                (TokenKind::Comment, "// hi"),
            ]
        );
        assert_eq!(strip_comments(&lexed.tokens).len(), 3);
    }

    #[test]
    fn comment_marker_inside_string_is_not_a_comment() {
        let lexed = c().tokenize("\"// not a comment\"");
        assert_eq!(kinds(&lexed), vec![(TokenKind::String, "\"// not a comment\"")]);
    }

    #[test]
    fn empty_source() {
        assert!(c().tokenize("").tokens.is_empty());
        assert!(c().tokenize(" \n\t ").tokens.is_empty());
    }

    #[test]
    fn unterminated_block_comment_runs_to_eof() {
        let lexed = c().tokenize("a /* open\n b");
        assert_eq!(lexed.tokens.len(), 2);
        assert_eq!(lexed.tokens[1].kind, TokenKind::Comment);
        assert_eq!(lexed.tokens[1].end, 12);
        assert_eq!(lexed.diagnostics.len(), 1);
        assert_eq!(lexed.diagnostics[0].kind, Unterminated::BlockComment);
    }

    #[test]
    fn escaped_quote_stays_inside_string() {
        let lexed = c().tokenize(r#""a\"b" c"#);
        assert_eq!(kinds(&lexed), vec![(TokenKind::String, r#""a\"b""#), (TokenKind::Identifier, "c")]);
    }

    #[test]
    fn line_numbers_and_spans() {
        let lexed = c().tokenize("a\n/* x\ny */ b\r\n// z\r\nc");
        let lines: Vec<usize> = lexed.tokens.iter().map(|t| t.line).collect();
        assert_eq!(lines, vec![1, 2, 3, 4, 5]);
        assert_eq!(lexed.tokens[3].lexeme, "// z");
    }

    #[test]
    fn numbers() {
        let lexed = c().tokenize("1.5e-3 0x1F 3.x");
        assert_eq!(
            kinds(&lexed),
            vec![
                (TokenKind::Number, "1.5e-3"),
                (TokenKind::Number, "0x1F"),
                (TokenKind::Number, "3"),
                (TokenKind::Operator, "."),
                (TokenKind::Identifier, "x"),
            ]
        );
    }

    #[test]
    fn unknown_punctuation_is_other() {
        let lexed = c().tokenize("a @ b é");
        assert_eq!(lexed.tokens[1].kind, TokenKind::Other);
        assert_eq!(lexed.tokens[3].kind, TokenKind::Other);
        assert_eq!(lexed.tokens[3].lexeme, "é");
    }

    #[test]
    fn nesting_block_comments() {
        let lexer = Lexer::new(builtin("lisp").unwrap()).unwrap();
        let lexed = lexer.tokenize("#| a #| b |# c |# d");
        assert_eq!(lexed.tokens.len(), 2);
        assert_eq!(lexed.tokens[0].lexeme, "#| a #| b |# c |#");
    }

    #[test]
    fn binary_files_are_rejected() {
        assert!(c().tokenize_checked("a\0b", Path::new("x.bin")).is_err());
    }

    #[test]
    fn case_folding_for_vocabulary() {
        let cobol = builtin("cobol").unwrap();
        assert_eq!(cobol.vocab_key("MOVE", TokenKind::Identifier), "move");
        assert_eq!(cobol.vocab_key("'ABC'", TokenKind::String), "'ABC'");
        let c = builtin("c").unwrap();
        assert_eq!(c.vocab_key("MOVE", TokenKind::Identifier), "MOVE");
    }

    fn reconstruct(source: &str, tokens: &[Token]) -> bool {
        let mut pos = 0;
        for t in tokens {
            if t.start < pos || t.end <= t.start || source[t.start..t.end] != t.lexeme {
                return false;
            }
            if !source[pos..t.start].chars().all(char::is_whitespace) {
                return false;
            }
            pos = t.end;
        }
        source[pos..].chars().all(char::is_whitespace)
    }

    proptest! {
        #[test]
        fn reconstruction_holds_for_every_builtin(
            source in "[ -~\t\nλé]{0,80}",
            which in 0usize..12,
        ) {
            let names = builtin_names();
            let lexer = Lexer::new(builtin(names[which % names.len()]).unwrap()).unwrap();
            let lexed = lexer.tokenize(&source);
            prop_assert!(reconstruct(&source, &lexed.tokens));
        }

        #[test]
        fn strip_comments_is_idempotent(source in "[ -~\n]{0,80}") {
            let tokens = c().tokenize(&source).tokens;
            let once = strip_comments(&tokens);
            prop_assert_eq!(strip_comments(&once), once.clone());
            prop_assert!(once.iter().all(|t| t.kind != TokenKind::Comment));
        }
    }
}
