use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn plsim(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_plsim")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "plsim {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn lex_prints_tsv_and_strips_comments() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("a.c");
    fs::write(&src, "x = \"a b\"; // c\n").unwrap();
    let out = plsim(&["lex", "--spec", "c", s(&src)]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(
        text,
        "IDENTIFIER\t0\t1\tx\nOPERATOR\t2\t3\t=\nSTRING\t4\t9\t\"a b\"\nOPERATOR\t9\t10\t;\nCOMMENT\t11\t15\t// c\n"
    );
    let out = plsim(&["lex", "--spec", "c", "--strip-comments", s(&src)]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 4);
}

#[test]
fn unknown_grammar_is_an_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_plsim"))
        .args(["synth", "--grammar", "cobol-like", "--out", "x"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

/// ingest -> vocab -> common -> train -> embed -> sim -> selfsim -> report
#[test]
fn staged_pipeline_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = |name: &str| d.join(name);

    for (lang, grammar, seed, spec) in [("a", "c-like", "1", "c"), ("b", "lisp-like", "2", "lisp")] {
        let src = p(&format!("{lang}-src"));
        let corpus = p(&format!("{lang}-corpus"));
        plsim(&["synth", "--grammar", grammar, "--files", "24", "--seed", seed, "--out", s(&src)]);
        plsim(&["ingest", "--language", lang, "--root", s(&src), "--out", s(&corpus)]);
        assert!(corpus.join("manifest.txt").exists());
        let stats = plsim(&["stats", "--corpus", s(&corpus), "--spec", spec]);
        assert!(String::from_utf8(stats.stdout).unwrap().contains("\"file_count\": 24"));
        plsim(&["vocab", "--corpus", s(&corpus), "--spec", spec, "--out", s(&p(&format!("{lang}.vocab")))]);
    }
    plsim(&["common", "--vocab", s(&p("a.vocab")), s(&p("b.vocab")), "--out", s(&p("common.tsv"))]);
    let common = fs::read_to_string(p("common.tsv")).unwrap();
    assert!(common.starts_with("#plsim-common v1"));

    let config = p("enc.toml");
    fs::write(
        &config,
        "dim = 16\nheads = 2\nff_dim = 32\nmax_positions = 24\nleft_context = 6\nright_context = 6\nsubword_vocab_size = 128\nbatch_size = 4\n",
    )
    .unwrap();
    for (lang, spec) in [("a", "c"), ("b", "lisp")] {
        let corpus = p(&format!("{lang}-corpus"));
        let ck = p(&format!("{lang}.json"));
        plsim(&["train", "--corpus", s(&corpus), "--spec", spec, "--config", s(&config), "--steps", "5", "--out", s(&ck)]);
        let samples = p(&format!("{lang}.samples"));
        plsim(&[
            "embed", "--encoder", s(&ck), "--corpus", s(&corpus), "--spec", spec, "--tokens", s(&p("common.tsv")),
            "--samples", "4", "--seed", "3", "--export-samples", s(&samples), "--out", s(&p(&format!("{lang}.lrep"))),
        ]);
        assert!(fs::read_to_string(&samples).unwrap().starts_with(&format!("#plsim-samples v1 language={lang}")));

        // embedding the exported samples reproduces the archive
        let again = p(&format!("{lang}-again.lrep"));
        plsim(&["embed", "--encoder", s(&ck), "--from-samples", s(&samples), "--out", s(&again)]);
        assert_eq!(fs::read(&again).unwrap(), fs::read(p(&format!("{lang}.lrep"))).unwrap());
    }

    let ck = p("a.json");
    plsim(&[
        "train", "--corpus", s(&p("b-corpus")), "--spec", "lisp", "--config", s(&config), "--steps", "3", "--init",
        s(&ck), "--out", s(&p("ft.json")),
    ]);
    assert!(fs::read_to_string(p("ft.json")).unwrap().contains("+ft/b"));

    let (a_rep, b_rep) = (p("a.lrep"), p("b.lrep"));
    for (extra, out) in [(None, "m"), (Some("--oracle"), "m-oracle"), (Some("--strict-fp"), "m-strict")] {
        let mut args = vec!["sim", "--archives", s(&a_rep), s(&b_rep), "--out"];
        let out_dir = p(out);
        args.push(s(&out_dir));
        args.extend(extra);
        plsim(&args);
    }
    let directed = fs::read_to_string(p("m").join("directed.csv")).unwrap();
    assert_eq!(directed.lines().count(), 3);
    let grid = |dir: &str| {
        fs::read_to_string(p(dir).join("symmetrized.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .flat_map(|l| l.split(',').skip(1).map(|x| x.parse::<f64>().unwrap()).collect::<Vec<_>>())
            .collect::<Vec<_>>()
    };
    for (x, y) in grid("m").iter().zip(grid("m-oracle")) {
        assert!((x - y).abs() <= 1e-6);
    }
    assert!((grid("m")[0] - 1.0).abs() <= 1e-6);

    for lang in ["a", "b"] {
        plsim(&["selfsim", "--archive", s(&p(&format!("{lang}.lrep"))), "--out", s(&p(&format!("{lang}.selfsim")))]);
    }
    plsim(&[
        "report", "--matrix", s(&p("m")), "--self", s(&p("a.selfsim")), s(&p("b.selfsim")), "--sort", "input",
        "--abs-scale", "--out", s(&p("report")),
    ]);
    for f in ["symmetrized.csv", "directed.csv", "heatmap.svg", "selfsim.tsv"] {
        assert!(p("report").join(f).exists(), "{f}");
    }
}

#[test]
fn run_executes_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        r#"
seed = 1
max_samples = 4
strict_fp = true

[encoder]
dim = 16
heads = 2
ff_dim = 32
max_positions = 24
left_context = 6
right_context = 6
subword_vocab_size = 128
batch_size = 4
steps = 5

[[languages]]
id = "a"
spec = "c"
synth = { grammar = "c-like", files = 20, seed = 1 }

[[languages]]
id = "b"
spec = "lisp"
synth = { grammar = "lisp-like", files = 20, seed = 2 }
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    plsim(&["run", "--config", s(&config), "--out", s(&out)]);
    for f in ["common.tsv", "archives/a.lrep", "matrix/symmetrized.csv", "report/heatmap.svg"] {
        assert!(out.join(f).exists(), "{f}");
    }
}
