use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 5
n_particles = 24
dims = 2
t_steps = 60

[manifold]
kind = "lattice"
vertices = [[0.5, 0.5], [1.0, 1.0]]
per_edge = 5
stdev = 0.02

[objectives]
benchmark = "two_anchor"

[guidance]
method = "PROUD"
"#;

fn proud(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_proud"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn run_writes_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SMALL);
    let out = tmp.path().join("run");
    let o = proud(&["run", "--config", &cfg, "--out", &s(&out), "--trace"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["samples.csv", "metrics.csv", "trace.jsonl", "steps.csv", "config.toml"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("label,method,seed,m,"));
}

#[test]
fn thread_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(proud(&["--threads", "1", "run", "-c", &cfg, "-o", &s(&a)]).status.success());
    assert!(proud(&["--threads", "3", "run", "-c", &cfg, "-o", &s(&b)]).status.success());
    for f in ["samples.csv", "metrics.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn rerun_from_echoed_config_is_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(proud(&["run", "-c", &cfg, "-o", &s(&a), "--seed", "99"]).status.success());
    let echoed = s(&a.join("config.toml"));
    assert!(proud(&["run", "-c", &echoed, "-o", &s(&b)]).status.success());
    assert_eq!(
        fs::read(a.join("samples.csv")).unwrap(),
        fs::read(b.join("samples.csv")).unwrap()
    );
    let metrics = fs::read_to_string(b.join("metrics.csv")).unwrap();
    assert!(metrics.lines().nth(1).unwrap().starts_with("PROUD,PROUD,99,"));
}

#[test]
fn w_sweep_makes_eleven_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL.replace("method = \"PROUD\"", "method = \"DM_SINGLE\"")
        + "\n[sweep]\n\"guidance.w\" = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]\n";
    let cfg = write_config(tmp.path(), "c.toml", &text);
    let out = tmp.path().join("sweep");
    let o = proud(&["sweep", "-c", &cfg, "-o", &s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut dirs: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    dirs.sort();
    assert_eq!(dirs.len(), 11);
    assert_eq!(dirs[0], "000_w=0.0");
    assert_eq!(dirs[10], "010_w=1.0");
}

#[test]
fn compare_aggregates_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL.to_string() + "\n[sweep]\nseed = [1, 2, 3]\n";
    let cfg = write_config(tmp.path(), "c.toml", &text);
    let out = tmp.path().join("seeds");
    assert!(proud(&["sweep", "-c", &cfg, "-o", &s(&out)]).status.success());
    let dirs: Vec<String> = (0..3)
        .map(|i| s(&out.join(format!("{i:03}_seed={}", i + 1))))
        .collect();
    let mut args = vec!["compare"];
    args.extend(dirs.iter().map(String::as_str));
    let o = proud(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = String::from_utf8(o.stdout).unwrap();
    assert_eq!(table.lines().filter(|l| l.starts_with("run,")).count(), 3);
    let agg: Vec<&str> = table.lines().filter(|l| l.starts_with("aggregate,")).collect();
    assert_eq!(agg.len(), 1);
    assert!(agg[0].starts_with("aggregate,PROUD,PROUD,n=3,2,"), "{}", agg[0]);
    assert!(agg[0].contains('±'));
}

#[test]
fn compare_reports_missing_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let o = proud(&["compare", &s(&tmp.path().join("absent"))]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("metrics.csv"));
}

#[test]
fn bad_config_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        &SMALL.replace("method = \"PROUD\"", "method = \"PROUD\"\ne_threshold = -1.0"),
    );
    let o = proud(&["run", "-c", &cfg, "-o", &s(&tmp.path().join("x"))]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("guidance.e_threshold"), "{err}");

    let cfg = write_config(tmp.path(), "d.toml", &SMALL.replace("seed = 5\n", ""));
    let o = proud(&["run", "-c", &cfg, "-o", &s(&tmp.path().join("y"))]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn oracle_verb_passes() {
    let o = proud(&["oracle"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 8, "{text}");
}
