use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddgrasp")).args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn label_and_decode(dir: &Path, ann: &str, extra: &[&str]) -> Output {
    write(dir, "img.txt", ann);
    let o = run(&["label", "img.txt", "--format", "jacquard", "--size", "128x128", "--out", "img.ddhm"], dir);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut args = vec!["decode", "--maps", "img.ddhm", "--out", "img.pred"];
    args.extend_from_slice(extra);
    run(&args, dir)
}

fn pred_lines(dir: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(dir.join("img.pred"))
        .unwrap()
        .lines()
        .map(|l| l.split_whitespace().skip(1).map(|t| t.parse().unwrap()).collect())
        .collect()
}

#[test]
fn single_grasp_is_recovered_through_files() {
    let d = TempDir::new().unwrap();
    let o = label_and_decode(d.path(), "50;60;90;20;10\n", &[]);
    assert_eq!(o.status.code(), Some(0));
    let lines = pred_lines(d.path());
    assert_eq!(lines.len(), 1);
    let v = &lines[0];
    let (a, b) = ((v[0], v[1]), (v[2], v[3]));
    let want = [(50.0, 50.0), (50.0, 70.0)];
    assert!((a == want[0] && b == want[1]) || (a == want[1] && b == want[0]), "{v:?}");
    assert_eq!(v[4], 3.0);
    assert!(stdout(&o).starts_with("best "));
}

#[test]
fn two_grasps_without_cross_pairs() {
    let d = TempDir::new().unwrap();
    let o = label_and_decode(d.path(), "30;30;0;20;8\n100;90;60;24;8\n", &[]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(pred_lines(d.path()).len(), 2);
}

#[test]
fn empty_annotation_gives_empty_record() {
    let d = TempDir::new().unwrap();
    let o = label_and_decode(d.path(), "# nothing\n", &["--id", "img0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(d.path().join("img.pred")).unwrap(), "img0\n");
    assert!(stdout(&o).contains("no grasp"));
}

#[test]
fn bad_inputs_exit_two() {
    let d = TempDir::new().unwrap();
    write(d.path(), "a.txt", "1;2;3;4;5\n");
    let o = run(&["label", "a.txt", "--format", "xml", "--size", "8x8", "--out", "x"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("possible values"));

    write(d.path(), "bad.ddhm", "NOPE0000000000000000000000000");
    let o = run(&["decode", "--maps", "bad.ddhm"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("magic"));

    write(d.path(), "broken.txt", "1;2;3;4\n");
    let o = run(&["label", "broken.txt", "--format", "jacquard", "--size", "8x8", "--out", "x"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1"));

    assert_eq!(run(&["sim", "--seeds", "3..3", "--oracle"], d.path()).status.code(), Some(2));
    assert_eq!(run(&["roundtrip", "--seeds", "9..2"], d.path()).status.code(), Some(2));
    assert_eq!(run(&["decode", "--bogus"], d.path()).status.code(), Some(2));
    assert_eq!(run(&["--help"], d.path()).status.code(), Some(0));
}

#[test]
fn out_of_map_annotation_exits_three() {
    let d = TempDir::new().unwrap();
    write(d.path(), "a.txt", "10;10;0;4;2\n500;10;0;20;10\n");
    let o = run(&["label", "a.txt", "--format", "jacquard", "--size", "64x64", "--out", "a.ddhm"], d.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("grasp 1"), "{}", stderr(&o));
    assert!(!d.path().join("a.ddhm").exists());
}

fn eval_fixture(dir: &Path) {
    // Ten images, one axis-aligned ground truth each; seven predictions hit.
    let mut preds = String::new();
    for i in 0..10 {
        write(dir, &format!("img{i}.txt"), "50;50;0;20;10\n");
        let x = if i < 7 { 40.0 } else { 140.0 };
        preds.push_str(&format!("img{i} {x:.6} 50.000000 {:.6} 50.000000 1.000000\n", x + 20.0));
    }
    write(dir, "preds.txt", &preds);
}

fn gt_args(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("img{i}.txt")).collect()
}

#[test]
fn eval_reports_accuracy() {
    let d = TempDir::new().unwrap();
    eval_fixture(d.path());
    let gts = gt_args(10);
    let mut args = vec!["eval", "--pred", "preds.txt", "--format", "jacquard", "--gt"];
    args.extend(gts.iter().map(String::as_str));
    let o = run(&args, d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("accuracy=0.700000"));

    // A prediction id without ground truth.
    let mut args = vec!["eval", "--pred", "preds.txt", "--format", "jacquard", "--gt"];
    args.extend(gts[..9].iter().map(String::as_str));
    assert_eq!(run(&args, d.path()).status.code(), Some(2));
}

#[test]
fn eval_perfect_predictions() {
    let d = TempDir::new().unwrap();
    write(d.path(), "a.txt", "50;50;30;20;10\n");
    let o = label_and_decode(d.path(), "50;50;30;20;10\n", &["--id", "a"]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["eval", "--pred", "img.pred", "--format", "jacquard", "--gt", "a.txt"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("accuracy=1.000000"));
}

#[test]
fn sim_oracle_and_predictions() {
    let d = TempDir::new().unwrap();
    let o = run(&["sim", "--seeds", "0..20", "--oracle", "--export-dir", "scenes"], d.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("success_rate=1.000000"));
    assert!(stdout(&o).contains("mu=0.400000"));
    assert!(d.path().join("scenes/scene_19.txt").exists());
    assert_eq!(stdout(&o), stdout(&run(&["sim", "--seeds", "0..20", "--oracle"], d.path())));

    write(d.path(), "empty.txt", "");
    let o = run(&["sim", "--seeds", "0..5", "--preds", "empty.txt"], d.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("success_rate=0.000000"));
    assert!(stdout(&o).contains("outcome=no_prediction"));
}

#[test]
fn roundtrip_report_is_deterministic() {
    let d = TempDir::new().unwrap();
    let a = run(&["roundtrip", "--seeds", "0..10"], d.path());
    assert_eq!(a.status.code(), Some(0));
    assert!(stdout(&a).contains("recovery_rate=1.000000"));
    assert_eq!(stdout(&a), stdout(&run(&["roundtrip", "--seeds", "0..10"], d.path())));
}

#[test]
fn render_svg() {
    let d = TempDir::new().unwrap();
    write(d.path(), "zero.txt", "");
    assert_eq!(
        run(&["label", "zero.txt", "--format", "jacquard", "--size", "16x16", "--out", "z.ddhm"], d.path())
            .status
            .code(),
        Some(0)
    );
    assert_eq!(run(&["render", "--maps", "z.ddhm", "--svg", "z.svg"], d.path()).status.code(), Some(0));
    let svg = std::fs::read_to_string(d.path().join("z.svg")).unwrap();
    assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
    assert!(!svg.contains("<line"));

    write(d.path(), "p.txt", "a 10.000000 10.000000 30.000000 10.000000 1.000000\n");
    run(&["sim", "--seeds", "0..1", "--oracle", "--export-dir", "."], d.path());
    let args = ["render", "--preds", "p.txt", "--scene", "scene_0.txt", "--svg", "g.svg"];
    assert_eq!(run(&args, d.path()).status.code(), Some(0));
    let first = std::fs::read(d.path().join("g.svg")).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert_eq!(text.matches("<line").count(), 1);
    assert_eq!(text.matches("<path").count(), 1);
    run(&args, d.path());
    assert_eq!(std::fs::read(d.path().join("g.svg")).unwrap(), first);
    assert_eq!(run(&["render", "--svg", "n.svg"], d.path()).status.code(), Some(2));
}
