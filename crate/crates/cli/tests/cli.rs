use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn xmodal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xmodal"))
        .args(args)
        .env("XMODAL_THREADS", "2")
        .output()
        .expect("spawn xmodal")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(dir: &Path) {
    let out = dir.display().to_string();
    let o = xmodal(&["synth", "--out", &out, "--classes", "5", "--dim", "16", "--templates", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn help_exits_zero() {
    assert!(xmodal(&["--help"]).status.success());
    assert!(xmodal(&["train", "--help"]).status.success());
}

#[test]
fn unknown_flag_exits_one() {
    let o = xmodal(&["train", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("xmodal: "));
}

#[test]
fn missing_store_reports_kind() {
    let o = xmodal(&["store", "inspect", "/nonexistent/store.xmf"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error["), "{}", stderr(&o));
}

#[test]
fn invalid_config_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let img = tmp.path().join("image.xmf").display().to_string();
    let o = xmodal(&["train", "--features", &img, "--lr0=-1", "--out", &tmp.path().join("o").display().to_string()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error[InvalidConfig]"), "{}", stderr(&o));
}

#[test]
fn zero_iterations_reproduce_zero_shot() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let p = |s: &str| tmp.path().join(s).display().to_string();
    let zs = xmodal(&["zeroshot", "--features", &p("image.xmf"), "--text", &p("text.xmf"), "--text-views", "all", "--out", &p("zs")]);
    assert!(zs.status.success(), "{}", stderr(&zs));
    let tr = xmodal(&[
        "train", "--features", &p("image.xmf"), "--text", &p("text.xmf"), "--text-views", "all", "--init", "text",
        "--modalities", "image", "--max-iters", "0", "--out", &p("tr"),
    ]);
    assert!(tr.status.success(), "{}", stderr(&tr));
    let mean = |dir: &str| {
        let report = fs::read_to_string(tmp.path().join(dir).join("report.csv")).unwrap();
        report.lines().nth(1).unwrap().split(',').nth(3).unwrap().to_string()
    };
    assert_eq!(mean("zs"), mean("tr"));
}

#[test]
fn replay_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let p = |s: &str| tmp.path().join(s).display().to_string();
    let o = xmodal(&[
        "sweep", "--features", &p("image.xmf"), "--text", &p("text.xmf"), "--shots", "2", "--seeds", "1,2", "--max-iters",
        "60", "--out", &p("a"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = xmodal(&["replay", &p("a/runspec.json"), "--out", &p("b")]);
    assert!(r.status.success(), "{}", stderr(&r));
    for f in ["rows.csv", "report.md", "seed-1/checkpoint.xmck", "seed-2/best-config.json"] {
        assert_eq!(fs::read(tmp.path().join("a").join(f)).unwrap(), fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn report_merges_row_files() {
    let tmp = tempfile::tempdir().unwrap();
    synth(tmp.path());
    let p = |s: &str| tmp.path().join(s).display().to_string();
    for (dir, seed) in [("x", "1"), ("y", "2")] {
        let o = xmodal(&["train", "--features", &p("image.xmf"), "--seeds", seed, "--max-iters", "20", "--out", &p(dir)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let o = xmodal(&["report", "--rows", &p("x/rows.csv"), "--rows", &p("y/rows.csv"), "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(text.lines().count(), 2, "{text}");
}
