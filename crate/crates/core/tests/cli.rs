use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn i2v(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_i2v"))
        .args(args)
        .output()
        .expect("spawn i2v")
}

fn ok(args: &[&str]) -> String {
    let out = i2v(args);
    assert!(
        out.status.success(),
        "i2v {}: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Self {
            dir: tempfile::tempdir().unwrap(),
        };
        std::fs::write(
            ws.p("engine.cfg"),
            "d_bow = 96\nd_pq = 32\nd_fk = 4\nseed = 3\n",
        )
        .unwrap();
        ok(&[
            "synth",
            "--out",
            &ws.p("corpus"),
            "--videos",
            "12",
            "--frames",
            "4",
            "--queries",
            "5",
            "--distractors",
            "5",
            "--global-features",
            "10",
            "--seed",
            "3",
        ]);
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn p(&self, name: &str) -> String {
        self.path(name).to_string_lossy().into_owned()
    }

    fn train(&self, out: &str, extra: &[&str]) {
        let mut args = vec!["--config".to_string(), self.p("engine.cfg"), "train".into()];
        args.extend([
            "--features".into(),
            self.p("corpus/reference"),
            "--out".into(),
            self.p(out),
        ]);
        args.extend(extra.iter().map(|s| s.to_string()));
        ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    }
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn top_n_one_gives_one_line_per_query() {
    let ws = Workspace::new();
    ws.train("cb.bin", &[]);
    ok(&[
        "index-global",
        "--features",
        &ws.p("corpus/reference"),
        "--codebooks",
        &ws.p("cb.bin"),
        "--out",
        &ws.p("g.idx"),
    ]);
    ok(&[
        "query-global",
        "--index",
        &ws.p("g.idx"),
        "--codebooks",
        &ws.p("cb.bin"),
        "--query",
        &ws.p("corpus/queries"),
        "--top-n",
        "1",
        "--out",
        &ws.p("g.run"),
    ]);
    let run = lines(&ws.path("g.run"));
    assert_eq!(run.len(), 5);
    for l in &run {
        let fields: Vec<&str> = l.split('\t').collect();
        assert_eq!(fields.len(), 4);
        assert_eq!(fields[2], "1");
    }
}

#[test]
fn mismatched_codebooks_are_rejected() {
    let ws = Workspace::new();
    ws.train("a.bin", &[]);
    ws.train("b.bin", &["--d-fk", "2"]);
    ok(&[
        "index-global",
        "--features",
        &ws.p("corpus/reference"),
        "--codebooks",
        &ws.p("a.bin"),
        "--out",
        &ws.p("g.idx"),
    ]);
    let out = i2v(&[
        "query-global",
        "--index",
        &ws.p("g.idx"),
        "--codebooks",
        &ws.p("b.bin"),
        "--query",
        &ws.p("corpus/queries"),
        "--out",
        &ws.p("g.run"),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: "), "{err}");
    assert!(err.contains("codebook"), "{err}");
    assert!(!ws.path("g.run").exists());
}

#[test]
fn empty_input_directory_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let out = i2v(&[
        "train",
        "--features",
        empty.to_str().unwrap(),
        "--out",
        dir.path().join("cb.bin").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no input files"), "{err}");
}

#[test]
fn training_is_reproducible_for_a_seed() {
    let ws = Workspace::new();
    ws.train("a.bin", &[]);
    ws.train("b.bin", &[]);
    assert_eq!(
        std::fs::read(ws.path("a.bin")).unwrap(),
        std::fs::read(ws.path("b.bin")).unwrap()
    );
}

#[test]
fn synth_output_is_fixed_by_seed() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        ok(&[
            "synth",
            "--out",
            dir.path().join(name).to_str().unwrap(),
            "--videos",
            "5",
            "--frames",
            "2",
            "--queries",
            "3",
            "--seed",
            "9",
        ]);
    }
    for f in [
        "reference/local.ldsc",
        "reference/global.gdsc",
        "queries/local.ldsc",
        "queries/global.gdsc",
        "gt.tsv",
        "transforms.tsv",
    ] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn full_pipeline_and_eval_report() {
    let ws = Workspace::new();
    ws.train("cb.bin", &[]);
    let cfg = ws.p("engine.cfg");
    let c = |rest: &[&str]| {
        let mut args = vec!["--config", cfg.as_str()];
        args.extend_from_slice(rest);
        ok(&args)
    };
    c(&[
        "index-local",
        "--features",
        &ws.p("corpus/reference"),
        "--codebooks",
        &ws.p("cb.bin"),
        "--out",
        &ws.p("l.idx"),
    ]);
    c(&[
        "index-global",
        "--features",
        &ws.p("corpus/reference"),
        "--codebooks",
        &ws.p("cb.bin"),
        "--out",
        &ws.p("g.idx"),
    ]);
    c(&[
        "query-local",
        "--index",
        &ws.p("l.idx"),
        "--codebooks",
        &ws.p("cb.bin"),
        "--query",
        &ws.p("corpus/queries"),
        "--out",
        &ws.p("l.run"),
    ]);
    c(&[
        "query-global",
        "--index",
        &ws.p("g.idx"),
        "--codebooks",
        &ws.p("cb.bin"),
        "--query",
        &ws.p("corpus/queries"),
        "--out",
        &ws.p("g.run"),
    ]);
    c(&[
        "fuse",
        "--local",
        &ws.p("l.run"),
        "--global",
        &ws.p("g.run"),
        "--out",
        &ws.p("f.run"),
    ]);
    let report = c(&[
        "eval",
        "--run",
        &ws.p("f.run"),
        "--gt",
        &ws.p("corpus/gt.tsv"),
    ]);
    let keys: Vec<&str> = report
        .lines()
        .map(|l| l.split('=').next().unwrap())
        .collect();
    assert_eq!(keys, ["mAP", "mAP@1", "queries"]);
    let map: f64 = report.lines().next().unwrap()["mAP=".len()..]
        .parse()
        .unwrap();
    assert!((0.0..=1.0).contains(&map));
    assert!(report.contains("queries=5"));
}

#[test]
fn bad_run_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("bad.run");
    std::fs::write(&run, "1\t2\t1\t0.5\n1\t3\t3\t0.4\n").unwrap();
    let gt = dir.path().join("gt.tsv");
    std::fs::write(&gt, "1\t2\n").unwrap();
    let out = i2v(&[
        "eval",
        "--run",
        run.to_str().unwrap(),
        "--gt",
        gt.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
}
