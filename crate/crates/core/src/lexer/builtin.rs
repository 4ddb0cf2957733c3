use super::LexerSpec;

const BUILTIN: &[(&str, &str)] = &[
    ("c", include_str!("../../specs/c.lex")),
    ("cobol", include_str!("../../specs/cobol.lex")),
    ("cpp", include_str!("../../specs/cpp.lex")),
    ("emacs-lisp", include_str!("../../specs/emacs-lisp.lex")),
    ("fortran", include_str!("../../specs/fortran.lex")),
    ("go", include_str!("../../specs/go.lex")),
    ("html", include_str!("../../specs/html.lex")),
    ("java", include_str!("../../specs/java.lex")),
    ("javascript", include_str!("../../specs/javascript.lex")),
    ("lisp", include_str!("../../specs/lisp.lex")),
    ("python", include_str!("../../specs/python.lex")),
    ("ruby", include_str!("../../specs/ruby.lex")),
];

/// Names of the curated specs shipped with the crate, sorted.
pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN.iter().map(|(name, _)| *name).collect()
}

pub fn builtin(name: &str) -> Option<LexerSpec> {
    let name = match name {
        "c++" => "cpp",
        "js" => "javascript",
        "elisp" => "emacs-lisp",
        other => other,
    };
    BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| LexerSpec::parse(text).expect("built-in lexer spec is valid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_parses_and_names_itself() {
        for name in builtin_names() {
            let spec = builtin(name).unwrap();
            assert_eq!(spec.language.as_str(), name);
        }
        assert_eq!(builtin("c++").unwrap().language.as_str(), "cpp");
        assert!(builtin("brainfuck").is_none());
    }
}
