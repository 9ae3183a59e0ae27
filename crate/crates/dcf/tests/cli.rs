use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use deform_dcf::results::read_results;
use deform_dcf::sequence::read_groundtruth;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deform-dcf")).args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().unwrap_or(-1)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn demo(dir: &Path, kind: &str, frames: &str) -> std::path::PathBuf {
    let out = dir.join(kind);
    assert_eq!(code(&["demo", "--kind", kind, "--frames", frames, "--out", s(&out)]), 0);
    out
}

#[test]
fn single_frame_track_returns_init_box() {
    let dir = tempfile::tempdir().unwrap();
    let seq = demo(dir.path(), "translate", "1");
    let out = dir.path().join("r.txt");
    assert_eq!(code(&["track", "--sequence", s(&seq), "--init", "5,5,10,10", "--output", s(&out)]), 0);
    let rows = read_results(&out).unwrap();
    assert_eq!(rows.len(), 1);
    let b = rows[0].bbox;
    assert_eq!((b.x, b.y, b.w, b.h), (5.0, 5.0, 10.0, 10.0));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("0, 5.000000, 5.000000, 10.000000, 10.000000, "), "{text}");
}

#[test]
fn track_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let seq = demo(dir.path(), "translate", "2");
    let out = dir.path().join("r.txt");
    assert_eq!(code(&["track", "--sequence", s(&seq), "--init", "5,5,10", "--output", s(&out)]), 2);
    assert_eq!(code(&["track", "--sequence", s(&seq), "--init", "a,b,c,d", "--output", s(&out)]), 2);
    let missing = dir.path().join("nowhere");
    assert_eq!(code(&["track", "--sequence", s(&missing), "--init", "5,5,10,10", "--output", s(&out)]), 2);
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(code(&["track", "--sequence", s(&empty), "--init", "5,5,10,10", "--output", s(&out)]), 2);
    assert_eq!(code(&["track", "--sequence", s(&seq), "--init", "5,5,10,10", "--output", s(&out), "--set", "scales=4"]), 2);
    assert!(!out.exists());
}

#[test]
fn unreadable_frame_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let seq = demo(dir.path(), "translate", "3");
    fs::write(seq.join("00001.png"), b"not a png").unwrap();
    let out = dir.path().join("r.txt");
    let o = run(&["track", "--sequence", s(&seq), "--groundtruth", s(&seq.join("groundtruth.txt")), "--output", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("frame 1"));
}

#[test]
fn eval_reports_op_and_auc() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.txt");
    fs::write(&gt, "0,0,10,10\n20,20,10,10\n").unwrap();
    let same = dir.path().join("same.txt");
    fs::write(&same, "0, 0, 0, 10, 10, 0.5, 1, 0, 0, 1\n1, 20, 20, 10, 10, 0.5, 1, 0, 0, 1\n").unwrap();
    let far = dir.path().join("far.txt");
    fs::write(&far, "0, 50, 50, 10, 10, 0.5, 1, 0, 0, 1\n1, 90, 90, 10, 10, 0.5, 1, 0, 0, 1\n").unwrap();
    let short = dir.path().join("short.txt");
    fs::write(&short, "0, 0, 0, 10, 10, 0.5, 1, 0, 0, 1\n").unwrap();

    let o = run(&["eval", "--results", s(&same), "--groundtruth", s(&gt)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "OP=1.0000 AUC=0.9524");
    let o = run(&["eval", "--results", s(&far), "--groundtruth", s(&gt)]);
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "OP=0.0000 AUC=0.0000");
    assert_eq!(code(&["eval", "--results", s(&short), "--groundtruth", s(&gt)]), 4);

    let curve = dir.path().join("curve.csv");
    assert_eq!(code(&["eval", "--results", s(&same), "--groundtruth", s(&gt), "--curve", s(&curve)]), 0);
    let lines: Vec<String> = fs::read_to_string(&curve).unwrap().lines().map(String::from).collect();
    assert_eq!(lines.len(), 21);
    assert_eq!(lines[0], "0.00,1.000000");
    assert_eq!(lines[20], "1.00,0.000000");
}

#[test]
fn demo_output() {
    let dir = tempfile::tempdir().unwrap();
    let one = demo(dir.path(), "rotate", "1");
    assert!(one.join("00000.png").exists());
    assert!(!one.join("00001.png").exists());
    assert_eq!(read_groundtruth(one.join("groundtruth.txt")).unwrap().len(), 1);

    let tr = demo(dir.path(), "translate", "4");
    let gt = read_groundtruth(tr.join("groundtruth.txt")).unwrap();
    for w in gt.windows(2) {
        assert_eq!(w[1].x - w[0].x, 2.0);
    }
    assert_eq!(code(&["demo", "--kind", "spin", "--frames", "2", "--out", s(&dir.path().join("x"))]), 2);
}

#[test]
fn demo_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let render = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        assert_eq!(code(&["demo", "--kind", "articulate", "--frames", "2", "--seed", seed, "--out", s(&out)]), 0);
        fs::read(out.join("00001.png")).unwrap()
    };
    assert_eq!(render("a", "3"), render("b", "3"));
    assert_ne!(render("a", "3"), render("c", "4"));
}

#[test]
fn overrides_beat_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let seq = demo(dir.path(), "translate", "2");
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# bad on purpose\nscales = 4\n").unwrap();
    let out = dir.path().join("r.txt");
    let base = ["track", "--sequence", s(&seq), "--init", "20,48,24,24", "--output", s(&out), "--config", s(&cfg)];
    assert_eq!(code(&base), 2);
    let mut fixed = base.to_vec();
    fixed.extend(["--set", "scales=3"]);
    assert_eq!(code(&fixed), 0);
    assert_eq!(read_results(&out).unwrap().len(), 2);
}

#[test]
fn render_writes_one_image_per_frame() {
    let dir = tempfile::tempdir().unwrap();
    let seq = demo(dir.path(), "translate", "3");
    let (out, vis) = (dir.path().join("r.txt"), dir.path().join("vis"));
    let gt = seq.join("groundtruth.txt");
    assert_eq!(code(&["track", "--sequence", s(&seq), "--groundtruth", s(&gt), "--output", s(&out), "--render", s(&vis)]), 0);
    for i in 0..3 {
        assert!(vis.join(format!("{i:05}.png")).exists());
    }
}
