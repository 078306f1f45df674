use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn demo_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../demos/desk_scale")
}

/// Copy of the demo problem with a shorter run, written into `dir`.
fn write_problem(dir: &Path, max_iters: usize) -> PathBuf {
    let text = fs::read_to_string(demo_dir().join("problem.toml")).unwrap();
    let text = text.replace("max_iters = 300", &format!("max_iters = {max_iters}"));
    assert!(text.contains(&format!("max_iters = {max_iters}")));
    fs::copy(demo_dir().join("target.txt"), dir.join("target.txt")).unwrap();
    let path = dir.join("problem.toml");
    fs::write(&path, text).unwrap();
    path
}

fn morphsynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morphsynth")).args(args).output().unwrap()
}

fn synth(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["synth", config.to_str().unwrap(), "-o", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = morphsynth(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o
}

fn report_value(dir: &Path, key: &str) -> String {
    let text = fs::read_to_string(dir.join("report.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")).map(str::to_string))
        .unwrap_or_else(|| panic!("{key} missing from report"))
}

#[test]
fn same_seed_gives_identical_logs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_problem(tmp.path(), 15);
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    synth(&cfg, &a, &[]);
    synth(&cfg, &b, &[]);
    synth(&cfg, &c, &["--seed", "99"]);
    let read = |d: &Path, f: &str| fs::read(d.join(f)).unwrap();
    assert_eq!(read(&a, "iterations.csv"), read(&b, "iterations.csv"));
    assert_eq!(read(&a, "best_design.txt"), read(&b, "best_design.txt"));
    assert_ne!(read(&a, "iterations.csv"), read(&c, "iterations.csv"));
    assert!(fs::read_to_string(c.join("manifest.txt")).unwrap().contains("seed = 99"));
}

#[test]
fn zero_iterations_report_the_initial_design() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_problem(tmp.path(), 0);
    let out = tmp.path().join("run");
    synth(&cfg, &out, &["--frames-every", "5"]);
    let csv = fs::read_to_string(out.join("iterations.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(fs::read(out.join("best_design.txt")).unwrap(), fs::read(out.join("initial_design.txt")).unwrap());
    assert_eq!(report_value(&out, "objective"), report_value(&out, "initial_objective"));
    let frames: Vec<_> = fs::read_dir(out.join("frames")).unwrap().collect();
    assert_eq!(frames.len(), 1);
    for f in ["material.txt", "curve_actual.txt", "curve_desired.txt", "contact_report.txt", "final.svg", "config.toml"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn replay_reproduces_the_best_objective() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_problem(tmp.path(), 20);
    let run = tmp.path().join("run");
    synth(&cfg, &run, &[]);
    let best: f64 = report_value(&run, "objective").parse().unwrap();

    let again = tmp.path().join("again");
    let best_design = run.join("best_design.txt");
    let o = morphsynth(&["replay", best_design.to_str().unwrap(), cfg.to_str().unwrap(), "-o", again.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let printed: f64 = stdout.split_whitespace().nth(1).unwrap().trim_end_matches(';').parse().unwrap();
    assert!((printed - best).abs() <= 1e-12 * best.abs().max(1.0), "{printed} vs {best}");
    let replayed: f64 = report_value(&again, "objective").parse().unwrap();
    assert_eq!(replayed, printed);
    assert_eq!(fs::read(run.join("curve_actual.txt")).unwrap(), fs::read(again.join("curve_actual.txt")).unwrap());

    // the stored configuration is self-contained enough to replay from
    let copy = tmp.path().join("copy");
    let o = morphsynth(&["replay", best_design.to_str().unwrap(), run.join("config.toml").to_str().unwrap(), "-o", copy.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    // a different force gives a different answer
    let text = fs::read_to_string(&best_design).unwrap();
    let force_line = text.lines().find(|l| l.starts_with('F')).unwrap();
    let force: f64 = force_line.split_whitespace().nth(1).unwrap().parse().unwrap();
    let perturbed = tmp.path().join("perturbed.txt");
    fs::write(&perturbed, text.replace(force_line, &format!("F {:e}", force * 1.05 + 1.0))).unwrap();
    let out = tmp.path().join("perturbed");
    let o = morphsynth(&["replay", perturbed.to_str().unwrap(), cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success());
    let other: f64 = report_value(&out, "objective").parse().unwrap();
    assert_ne!(other, best);
}

#[test]
fn invalid_configuration_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_problem(tmp.path(), 5);
    let text = fs::read_to_string(&cfg).unwrap().replace("edge_length = 2.0", "edge_length = -2.0");
    fs::write(&cfg, text).unwrap();
    let out = tmp.path().join("run");
    let o = morphsynth(&["synth", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("edge_length"), "{err}");
    assert!(!out.join("iterations.csv").exists());

    let o = morphsynth(&["synth", tmp.path().join("nope.toml").to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn mesh_dump_lists_nodes_and_elements() {
    let o = morphsynth(&["mesh-dump", demo_dir().join("problem.toml").to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let elements: Vec<&str> = text.lines().filter(|l| l.starts_with("E ")).collect();
    assert_eq!(elements.len(), 80);
    assert!(elements.iter().all(|l| l.split_whitespace().count() == 8));
    let nodes = text.lines().filter(|l| l.starts_with("N ")).count();
    // each cell adds four vertices, plus two per column and one per row boundary
    assert!(nodes > 2 * 80 && nodes < 6 * 80);
}
