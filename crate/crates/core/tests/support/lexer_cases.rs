//! Hand-written token streams for every shipped lexer spec, shared by the
//! snippet tests and the acceptance run.

use std::cell::RefCell;
use std::collections::BTreeMap;

use plsim_core::lexer::{builtin, Lexer, Unterminated};
use plsim_core::TokenKind;

thread_local! {
    static CHECKED: RefCell<BTreeMap<String, usize>> = const { RefCell::new(BTreeMap::new()) };
}

fn kind(code: &str) -> TokenKind {
    match code {
        "I" => TokenKind::Identifier,
        "N" => TokenKind::Number,
        "S" => TokenKind::String,
        "O" => TokenKind::Operator,
        "C" => TokenKind::Comment,
        "X" => TokenKind::Other,
        _ => panic!("bad kind code {code}"),
    }
}

/// Lexes `src`, compares against `expected` and checks that the tokens
/// tile the source with only whitespace between them.
fn check(spec: &str, src: &str, expected: &[(&str, &str)]) -> Vec<Unterminated> {
    let lexer = Lexer::new(builtin(spec).unwrap()).unwrap();
    let lexed = lexer.tokenize(src);
    let got: Vec<(String, TokenKind)> = lexed.tokens.iter().map(|t| (t.lexeme.clone(), t.kind)).collect();
    let want: Vec<(String, TokenKind)> = expected.iter().map(|(l, k)| (l.to_string(), kind(k))).collect();
    assert_eq!(got, want, "{spec}: {src:?}");

    let mut cursor = 0;
    for t in &lexed.tokens {
        assert!(src[cursor..t.start].chars().all(char::is_whitespace), "{spec}: gap before {t:?}");
        assert_eq!(&src[t.start..t.end], t.lexeme);
        cursor = t.end;
    }
    assert!(src[cursor..].chars().all(char::is_whitespace));
    CHECKED.with(|c| *c.borrow_mut().entry(spec.to_string()).or_insert(0) += 1);
    lexed.diagnostics.iter().map(|d| d.kind).collect()
}

pub const SUITES: &[(&str, fn())] = &[
    ("c", c_snippets),
    ("cpp", cpp_snippets),
    ("python", python_snippets),
    ("go", go_snippets),
    ("java", java_snippets),
    ("javascript", javascript_snippets),
    ("lisp", lisp_snippets),
    ("emacs-lisp", emacs_lisp_snippets),
    ("fortran", fortran_snippets),
    ("ruby", ruby_snippets),
    ("html", html_snippets),
    ("cobol", cobol_snippets),
];

/// Snippets checked so far on this thread, per spec.
pub fn checked_counts() -> BTreeMap<String, usize> {
    CHECKED.with(|c| c.borrow().clone())
}

pub fn c_snippets() {
    check("c", "int x; // hi", &[("int", "I"), ("x", "I"), (";", "O"), ("// hi", "C")]);
    check(
        "c",
        r#"char *s = "// not a comment";"#,
        &[
            ("char", "I"),
            ("*", "O"),
            ("s", "I"),
            ("=", "O"),
            (r#""// not a comment""#, "S"),
            (";", "O"),
        ],
    );
    let diags = check("c", "a = b /* open", &[("a", "I"), ("=", "O"), ("b", "I"), ("/* open", "C")]);
    assert_eq!(diags, vec![Unterminated::BlockComment]);
    check(
        "c",
        "x<<=2;y->z++",
        &[
            ("x", "I"),
            ("<<=", "O"),
            ("2", "N"),
            (";", "O"),
            ("y", "I"),
            ("->", "O"),
            ("z", "I"),
            ("++", "O"),
        ],
    );
    check(
        "c",
        r#"f(1.5e-3, 'c', "a\"b")"#,
        &[
            ("f", "I"),
            ("(", "O"),
            ("1.5e-3", "N"),
            (",", "O"),
            ("'c'", "S"),
            (",", "O"),
            (r#""a\"b""#, "S"),
            (")", "O"),
        ],
    );
    check("c", "/* a */ /* b */ @", &[("/* a */", "C"), ("/* b */", "C"), ("@", "X")]);
}

pub fn cpp_snippets() {
    check(
        "cpp",
        "std::vector<int> v; // c",
        &[
            ("std", "I"),
            ("::", "O"),
            ("vector", "I"),
            ("<", "O"),
            ("int", "I"),
            (">", "O"),
            ("v", "I"),
            (";", "O"),
            ("// c", "C"),
        ],
    );
    check("cpp", "a <=> b", &[("a", "I"), ("<=>", "O"), ("b", "I")]);
    check("cpp", "p->*m", &[("p", "I"), ("->*", "O"), ("m", "I")]);
    check(
        "cpp",
        r#"auto s = "/* x */";"#,
        &[("auto", "I"), ("s", "I"), ("=", "O"), (r#""/* x */""#, "S"), (";", "O")],
    );
    let diags = check("cpp", "x /* y\nz", &[("x", "I"), ("/* y\nz", "C")]);
    assert_eq!(diags, vec![Unterminated::BlockComment]);
}

pub fn python_snippets() {
    check("python", r##"x = "# no"  # yes"##, &[("x", "I"), ("=", "O"), (r##""# no""##, "S"), ("# yes", "C")]);
    check(
        "python",
        "def f(a, b=2):\n    return a**b",
        &[
            ("def", "I"),
            ("f", "I"),
            ("(", "O"),
            ("a", "I"),
            (",", "O"),
            ("b", "I"),
            ("=", "O"),
            ("2", "N"),
            (")", "O"),
            (":", "O"),
            ("return", "I"),
            ("a", "I"),
            ("**", "O"),
            ("b", "I"),
        ],
    );
    check(
        "python",
        "s = \"\"\"multi\n# line\"\"\"",
        &[("s", "I"), ("=", "O"), ("\"\"\"multi\n# line\"\"\"", "S")],
    );
    let diags = check("python", "'''unterminated", &[("'''unterminated", "S")]);
    assert_eq!(diags, vec![Unterminated::String]);
    check("python", "x //= 3 # floor", &[("x", "I"), ("//=", "O"), ("3", "N"), ("# floor", "C")]);
    check("python", "ünï = 1", &[("ünï", "I"), ("=", "O"), ("1", "N")]);
}

pub fn go_snippets() {
    check("go", "s := `raw\\n // x`", &[("s", "I"), (":=", "O"), ("`raw\\n // x`", "S")]);
    check("go", "x &^= y // clear", &[("x", "I"), ("&^=", "O"), ("y", "I"), ("// clear", "C")]);
    check("go", "ch <- v", &[("ch", "I"), ("<-", "O"), ("v", "I")]);
    let diags = check("go", "/* never closed", &[("/* never closed", "C")]);
    assert_eq!(diags, vec![Unterminated::BlockComment]);
    check(
        "go",
        "a := []int{1, 2}",
        &[
            ("a", "I"),
            (":=", "O"),
            ("[", "O"),
            ("]", "O"),
            ("int", "I"),
            ("{", "O"),
            ("1", "N"),
            (",", "O"),
            ("2", "N"),
            ("}", "O"),
        ],
    );
}

pub fn java_snippets() {
    check(
        "java",
        r#"String s = "/* no */";"#,
        &[("String", "I"), ("s", "I"), ("=", "O"), (r#""/* no */""#, "S"), (";", "O")],
    );
    check("java", "x >>>= 2;", &[("x", "I"), (">>>=", "O"), ("2", "N"), (";", "O")]);
    check(
        "java",
        "@Override void m() {}",
        &[
            ("@", "O"),
            ("Override", "I"),
            ("void", "I"),
            ("m", "I"),
            ("(", "O"),
            (")", "O"),
            ("{", "O"),
            ("}", "O"),
        ],
    );
    let diags = check(
        "java",
        "int a = 0; /* tail",
        &[("int", "I"), ("a", "I"), ("=", "O"), ("0", "N"), (";", "O"), ("/* tail", "C")],
    );
    assert_eq!(diags, vec![Unterminated::BlockComment]);
    check(
        "java",
        "list.stream().map(Foo::bar)",
        &[
            ("list", "I"),
            (".", "O"),
            ("stream", "I"),
            ("(", "O"),
            (")", "O"),
            (".", "O"),
            ("map", "I"),
            ("(", "O"),
            ("Foo", "I"),
            ("::", "O"),
            ("bar", "I"),
            (")", "O"),
        ],
    );
}

pub fn javascript_snippets() {
    check(
        "javascript",
        "const s = '// nope'; // yes",
        &[("const", "I"), ("s", "I"), ("=", "O"), ("'// nope'", "S"), (";", "O"), ("// yes", "C")],
    );
    check(
        "javascript",
        "a ??= b?.c ?? d",
        &[("a", "I"), ("??=", "O"), ("b", "I"), ("?.", "O"), ("c", "I"), ("??", "O"), ("d", "I")],
    );
    check("javascript", "x === y !== z", &[("x", "I"), ("===", "O"), ("y", "I"), ("!==", "O"), ("z", "I")]);
    check("javascript", "`tpl ${a}`", &[("`tpl ${a}`", "S")]);
    check(
        "javascript",
        "f = (a) => a ** 2",
        &[
            ("f", "I"),
            ("=", "O"),
            ("(", "O"),
            ("a", "I"),
            (")", "O"),
            ("=>", "O"),
            ("a", "I"),
            ("**", "O"),
            ("2", "N"),
        ],
    );
}

pub fn lisp_snippets() {
    check(
        "lisp",
        "(defun f (x) (+ x 1)) ; done",
        &[
            ("(", "O"),
            ("defun", "I"),
            ("f", "I"),
            ("(", "O"),
            ("x", "I"),
            (")", "O"),
            ("(", "O"),
            ("+", "I"),
            ("x", "I"),
            ("1", "N"),
            (")", "O"),
            (")", "O"),
            ("; done", "C"),
        ],
    );
    check("lisp", r#""; not a comment""#, &[(r#""; not a comment""#, "S")]);
    check(
        "lisp",
        "#| outer #| inner |# still |# x",
        &[("#| outer #| inner |# still |#", "C"), ("x", "I")],
    );
    let diags = check("lisp", "#| open #| nested |#", &[("#| open #| nested |#", "C")]);
    assert_eq!(diags, vec![Unterminated::BlockComment]);
    check(
        "lisp",
        "'(a . b)",
        &[("'", "O"), ("(", "O"), ("a", "I"), (".", "I"), ("b", "I"), (")", "O")],
    );
    check("lisp", "#'car ,@xs", &[("#'", "O"), ("car", "I"), (",@", "O"), ("xs", "I")]);
}

pub fn emacs_lisp_snippets() {
    check(
        "emacs-lisp",
        r#"(setq x "a;b") ; c"#,
        &[("(", "O"), ("setq", "I"), ("x", "I"), (r#""a;b""#, "S"), (")", "O"), ("; c", "C")],
    );
    check("emacs-lisp", "?a", &[("?", "O"), ("a", "I")]);
    check("emacs-lisp", "(1+ n)", &[("(", "O"), ("1", "N"), ("+", "I"), ("n", "I"), (")", "O")]);
    check("emacs-lisp", "#'ignore", &[("#'", "O"), ("ignore", "I")]);
    let diags = check("emacs-lisp", "\"open ; x", &[("\"open ; x", "S")]);
    assert_eq!(diags, vec![Unterminated::String]);
}

pub fn fortran_snippets() {
    check(
        "fortran",
        "x = 'it''s' ! note",
        &[("x", "I"), ("=", "O"), ("'it'", "S"), ("'s'", "S"), ("! note", "C")],
    );
    check(
        "fortran",
        r#"print *, "! not comment""#,
        &[("print", "I"), ("*", "O"), (",", "O"), (r#""! not comment""#, "S")],
    );
    check("fortran", "a = b ** 2", &[("a", "I"), ("=", "O"), ("b", "I"), ("**", "O"), ("2", "N")]);
    check(
        "fortran",
        "real :: y(10)",
        &[("real", "I"), ("::", "O"), ("y", "I"), ("(", "O"), ("10", "N"), (")", "O")],
    );
    check(
        "fortran",
        "if (a /= b) then",
        &[("if", "I"), ("(", "O"), ("a", "I"), ("/=", "O"), ("b", "I"), (")", "O"), ("then", "I")],
    );
}

pub fn ruby_snippets() {
    check("ruby", r##"puts "# no" # yes"##, &[("puts", "I"), (r##""# no""##, "S"), ("# yes", "C")]);
    check("ruby", "@count += 1", &[("@count", "I"), ("+=", "O"), ("1", "N")]);
    check("ruby", "a <=> b", &[("a", "I"), ("<=>", "O"), ("b", "I")]);
    check("ruby", "x = y&.z", &[("x", "I"), ("=", "O"), ("y", "I"), ("&.", "O"), ("z", "I")]);
    check(
        "ruby",
        "(1..10).each { |i| p i }",
        &[
            ("(", "O"),
            ("1", "N"),
            ("..", "O"),
            ("10", "N"),
            (")", "O"),
            (".", "O"),
            ("each", "I"),
            ("{", "O"),
            ("|", "O"),
            ("i", "I"),
            ("|", "O"),
            ("p", "I"),
            ("i", "I"),
            ("}", "O"),
        ],
    );
}

pub fn html_snippets() {
    check(
        "html",
        r#"<p class="x">hi</p>"#,
        &[
            ("<", "O"),
            ("p", "I"),
            ("class", "I"),
            ("=", "O"),
            (r#""x""#, "S"),
            (">", "O"),
            ("hi", "I"),
            ("</", "O"),
            ("p", "I"),
            (">", "O"),
        ],
    );
    check("html", "<!-- c --><br/>", &[("<!-- c -->", "C"), ("<", "O"), ("br", "I"), ("/>", "O")]);
    check(
        "html",
        r#"<a title="<!-- no -->">"#,
        &[("<", "O"), ("a", "I"), ("title", "I"), ("=", "O"), (r#""<!-- no -->""#, "S"), (">", "O")],
    );
    let diags = check("html", "<!-- open", &[("<!-- open", "C")]);
    assert_eq!(diags, vec![Unterminated::BlockComment]);
    check("html", "&amp; x", &[("&", "O"), ("amp", "I"), (";", "O"), ("x", "I")]);
}

pub fn cobol_snippets() {
    check(
        "cobol",
        "MOVE 'A*>B' TO WS-X. *> note",
        &[
            ("MOVE", "I"),
            ("'A*>B'", "S"),
            ("TO", "I"),
            ("WS-X", "I"),
            (".", "O"),
            ("*> note", "C"),
        ],
    );
    check(
        "cobol",
        "COMPUTE Y = X ** 2",
        &[("COMPUTE", "I"), ("Y", "I"), ("=", "O"), ("X", "I"), ("**", "O"), ("2", "N")],
    );
    check("cobol", "IF A <> B", &[("IF", "I"), ("A", "I"), ("<>", "O"), ("B", "I")]);
    check("cobol", r#"DISPLAY "HELLO""#, &[("DISPLAY", "I"), (r#""HELLO""#, "S")]);
    check(
        "cobol",
        "PERFORM P-1 UNTIL N >= 10.",
        &[
            ("PERFORM", "I"),
            ("P-1", "I"),
            ("UNTIL", "I"),
            ("N", "I"),
            (">=", "O"),
            ("10", "N"),
            (".", "O"),
        ],
    );
}
