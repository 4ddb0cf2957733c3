//! Seeded toy languages for experiments and tests.
//!
//! Both grammars render the same small imperative programs: [`Grammar::CLike`]
//! with braces and infix operators, [`Grammar::LispLike`] as s-expressions.
//! Identifiers, numbers, arithmetic operators and parentheses are shared, so
//! the two languages have a sizeable common vocabulary while the contexts
//! around those tokens differ.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{LanguageCorpus, LanguageId};
use crate::error::{Error, Result};

const VARS: &[&str] = &[
    "a", "b", "c", "i", "j", "k", "n", "m", "x", "y", "z", "count", "total", "value", "left", "right", "size", "index",
    "result", "tmp",
];
const FUNCS: &[&str] = &["add", "scale", "clamp", "step", "merge", "walk", "fold", "sum", "shift", "mix"];
const WORDS: &[&str] = &[
    "update", "the", "counter", "keep", "value", "small", "check", "bounds", "fast", "path", "loop", "until", "done",
];
const ARITH: &[&str] = &["+", "-", "*"];
const CMP: &[&str] = &["<", ">"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grammar {
    CLike,
    LispLike,
}

impl Grammar {
    /// Name of the builtin lexer spec for the rendered text.
    pub fn lexer_spec(self) -> &'static str {
        match self {
            Grammar::CLike => "c",
            Grammar::LispLike => "lisp",
        }
    }

    pub fn file_extension(self) -> &'static str {
        match self {
            Grammar::CLike => "c",
            Grammar::LispLike => "lisp",
        }
    }
}

impl FromStr for Grammar {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c-like" | "c" => Ok(Grammar::CLike),
            "lisp-like" | "lisp" => Ok(Grammar::LispLike),
            _ => Err(Error::Unknown {
                what: "grammar",
                name: s.to_string(),
            }),
        }
    }
}

enum Expr {
    Var(&'static str),
    Num(u32),
    Bin(&'static str, Box<Expr>, Box<Expr>),
    Call(&'static str, Vec<Expr>),
}

struct Cond(&'static str, Expr, Expr);

enum Stmt {
    Let(&'static str, Expr),
    Set(&'static str, Expr),
    If(Cond, Vec<Stmt>),
    While(Cond, Vec<Stmt>),
    Return(Expr),
    Comment(String),
}

struct Func {
    name: &'static str,
    params: Vec<&'static str>,
    body: Vec<Stmt>,
}

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
}

impl Gen<'_> {
    fn pick(&mut self, list: &[&'static str]) -> &'static str {
        list.choose(self.rng).expect("non-empty")
    }

    fn expr(&mut self, depth: usize) -> Expr {
        let roll = self.rng.random_range(0..10);
        match roll {
            0..=3 => Expr::Var(self.pick(VARS)),
            4..=5 => Expr::Num(self.rng.random_range(0..10)),
            _ if depth == 0 => Expr::Var(self.pick(VARS)),
            6..=8 => {
                let op = self.pick(ARITH);
                Expr::Bin(op, Box::new(self.expr(depth - 1)), Box::new(self.expr(depth - 1)))
            }
            _ => {
                let f = self.pick(FUNCS);
                Expr::Call(f, vec![self.expr(depth - 1), self.expr(depth - 1)])
            }
        }
    }

    fn cond(&mut self) -> Cond {
        Cond(self.pick(CMP), self.expr(1), self.expr(1))
    }

    fn comment(&mut self) -> String {
        let n = self.rng.random_range(2..5);
        (0..n).map(|_| self.pick(WORDS)).collect::<Vec<_>>().join(" ")
    }

    fn block(&mut self, depth: usize, len: usize) -> Vec<Stmt> {
        (0..len).map(|_| self.stmt(depth)).collect()
    }

    fn stmt(&mut self, depth: usize) -> Stmt {
        let roll = self.rng.random_range(0..12);
        match roll {
            0..=3 => Stmt::Let(self.pick(VARS), self.expr(2)),
            4..=6 => Stmt::Set(self.pick(VARS), self.expr(2)),
            7 => Stmt::Comment(self.comment()),
            8..=9 if depth > 0 => {
                let len = self.rng.random_range(1..3);
                Stmt::If(self.cond(), self.block(depth - 1, len))
            }
            10..=11 if depth > 0 => {
                let len = self.rng.random_range(1..3);
                Stmt::While(self.cond(), self.block(depth - 1, len))
            }
            _ => Stmt::Set(self.pick(VARS), self.expr(1)),
        }
    }

    fn func(&mut self) -> Func {
        let name = self.pick(FUNCS);
        let mut params: Vec<&'static str> = VARS.choose_multiple(self.rng, 2).copied().collect();
        params.sort_unstable();
        let len = self.rng.random_range(2..6);
        let mut body = self.block(2, len);
        body.push(Stmt::Return(self.expr(1)));
        Func { name, params, body }
    }
}

fn c_expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Var(v) => out.push_str(v),
        Expr::Num(n) => {
            let _ = write!(out, "{n}");
        }
        Expr::Bin(op, l, r) => {
            out.push('(');
            c_expr(l, out);
            let _ = write!(out, " {op} ");
            c_expr(r, out);
            out.push(')');
        }
        Expr::Call(f, args) => {
            let _ = write!(out, "{f}(");
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                c_expr(a, out);
            }
            out.push(')');
        }
    }
}

fn c_block(body: &[Stmt], indent: usize, out: &mut String) {
    let pad = "    ".repeat(indent);
    for s in body {
        out.push_str(&pad);
        match s {
            Stmt::Let(v, e) => {
                let _ = write!(out, "int {v} = ");
                c_expr(e, out);
                out.push_str(";\n");
            }
            Stmt::Set(v, e) => {
                let _ = write!(out, "{v} = ");
                c_expr(e, out);
                out.push_str(";\n");
            }
            Stmt::If(c, b) | Stmt::While(c, b) => {
                let kw = if matches!(s, Stmt::If(..)) { "if" } else { "while" };
                let _ = write!(out, "{kw} (");
                c_expr(&c.1, out);
                let _ = write!(out, " {} ", c.0);
                c_expr(&c.2, out);
                out.push_str(") {\n");
                c_block(b, indent + 1, out);
                out.push_str(&pad);
                out.push_str("}\n");
            }
            Stmt::Return(e) => {
                out.push_str("return ");
                c_expr(e, out);
                out.push_str(";\n");
            }
            Stmt::Comment(text) => {
                let _ = writeln!(out, "// {text}");
            }
        }
    }
}

fn lisp_expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Var(v) => out.push_str(v),
        Expr::Num(n) => {
            let _ = write!(out, "{n}");
        }
        Expr::Bin(op, l, r) => {
            let _ = write!(out, "({op} ");
            lisp_expr(l, out);
            out.push(' ');
            lisp_expr(r, out);
            out.push(')');
        }
        Expr::Call(f, args) => {
            let _ = write!(out, "({f}");
            for a in args {
                out.push(' ');
                lisp_expr(a, out);
            }
            out.push(')');
        }
    }
}

fn lisp_block(body: &[Stmt], indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    for s in body {
        out.push_str(&pad);
        match s {
            Stmt::Let(v, e) | Stmt::Set(v, e) => {
                let kw = if matches!(s, Stmt::Let(..)) { "define" } else { "set!" };
                let _ = write!(out, "({kw} {v} ");
                lisp_expr(e, out);
                out.push_str(")\n");
            }
            Stmt::If(c, b) | Stmt::While(c, b) => {
                let kw = if matches!(s, Stmt::If(..)) { "when" } else { "while" };
                let _ = write!(out, "({kw} ({} ", c.0);
                lisp_expr(&c.1, out);
                out.push(' ');
                lisp_expr(&c.2, out);
                out.push_str(")\n");
                lisp_block(b, indent + 1, out);
                out.push_str(&pad);
                out.push_str(")\n");
            }
            Stmt::Return(e) => {
                lisp_expr(e, out);
                out.push('\n');
            }
            Stmt::Comment(text) => {
                let _ = writeln!(out, "; {text}");
            }
        }
    }
}

fn render(grammar: Grammar, funcs: &[Func]) -> String {
    let mut out = String::new();
    for f in funcs {
        match grammar {
            Grammar::CLike => {
                let params: Vec<String> = f.params.iter().map(|p| format!("int {p}")).collect();
                let _ = writeln!(out, "int {}({}) {{", f.name, params.join(", "));
                c_block(&f.body, 1, &mut out);
                out.push_str("}\n\n");
            }
            Grammar::LispLike => {
                let _ = writeln!(out, "(define ({} {})", f.name, f.params.join(" "));
                lisp_block(&f.body, 1, &mut out);
                out.push_str(")\n\n");
            }
        }
    }
    out
}

/// `files` source texts named `file0000.<ext>`, ... Each file holds two to
/// four functions. The same seed always yields the same texts.
pub fn generate_files(grammar: Grammar, files: usize, seed: u64) -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..files)
        .map(|i| {
            let mut gen = Gen { rng: &mut rng };
            let n = gen.rng.random_range(2..5);
            let funcs: Vec<Func> = (0..n).map(|_| gen.func()).collect();
            (format!("file{i:04}.{}", grammar.file_extension()), render(grammar, &funcs))
        })
        .collect()
}

pub fn generate_corpus(language: LanguageId, grammar: Grammar, files: usize, seed: u64) -> LanguageCorpus {
    LanguageCorpus::from_texts(language, generate_files(grammar, files, seed))
}

/// Writes generated files into `dir`, creating it if needed.
pub fn write_files(dir: &Path, files: &[(String, String)]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, text) in files {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
