use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(name)
}

fn probpga(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_probpga")).args(args).output().expect("binary runs")
}

fn path(name: &str) -> String {
    data(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn biased_coin_equals_fair_loop() {
    let o = probpga(&["equiv", &path("biased_coin.pga"), &path("fair_coin_loop.pga"), "--mode", "bisim"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn analyze_prints_exact_masses() {
    let o = probpga(&["analyze", &path("biased_coin.pga"), "--env", &path("default_true.env"), "--depth", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("a;! : 2/3 (0.666667)"), "{out}");
    assert!(out.contains("b;! : 1/3 (0.333333)"), "{out}");
    assert!(out.contains("termination: 1/1"), "{out}");
}

#[test]
fn parse_errors_have_positions() {
    let o = probpga(&["parse", &path("malformed.pga")]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("2:5"), "{err}");
}

#[test]
fn usage_errors() {
    assert_eq!(probpga(&["bogus"]).status.code(), Some(1));
    assert_eq!(probpga(&["simulate", &path("biased_coin.pga"), "--runs", "0"]).status.code(), Some(1));
    assert_eq!(probpga(&["--help"]).status.code(), Some(0));
    assert_eq!(probpga(&["project", &path("choice.pga"), "--passes", "services,units"]).status.code(), Some(2));
    assert_eq!(probpga(&["analyze", &path("nope.pga")]).status.code(), Some(2));
}

#[test]
fn inequivalence_is_exit_three() {
    let o = probpga(&["equiv", &path("geometric_jump.pga"), &path("geometric_ladder.pga")]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("Mass mismatch"), "{}", stdout(&o));
    let o = probpga(&["equiv", &path("geometric_jump.pga"), &path("geometric_ladder.pga"), "--mode", "trace", "--depth", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = probpga(&["equiv", &path("deterministic.pga"), &path("biased_coin.pga"), "--mode", "trace"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn project_reports_on_stderr() {
    let o = probpga(&["project", &path("choice.pga")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "+random(1/3).get;#2;#3;a;#2;b");
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("desugar: in=4 out=4 gadgets=1"), "{err}");
    let o = probpga(&["project", &path("choice.pga"), "--service-style", "single"]);
    assert_eq!(stdout(&o).trim(), "+random.get(1/3);#2;#3;a;#2;b");
}

/// Projecting and comparing traces with the original succeeds on every golden program.
#[test]
fn projection_round_trip_on_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let mut n = 0;
    for entry in std::fs::read_dir(data("")).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_none_or(|e| e != "pga") || p.file_name().unwrap() == "malformed.pga" {
            continue;
        }
        n += 1;
        let file = p.to_string_lossy().into_owned();
        for extra in [&[][..], &["--passes", "desugar,units,normalize,jumps-unbounded,jumps-bounded,fair-coin,services"][..]] {
            let mut args = vec!["project", file.as_str()];
            args.extend_from_slice(extra);
            let o = probpga(&args);
            assert_eq!(o.status.code(), Some(0), "{file}");
            let out = dir.path().join("projected.pga");
            std::fs::write(&out, &o.stdout).unwrap();
            let o = probpga(&["equiv", &file, &out.to_string_lossy(), "--mode", "trace", "--depth", "6"]);
            assert_eq!(o.status.code(), Some(0), "{file}: {}", stdout(&o));
        }
    }
    assert!(n >= 10);
}

#[test]
fn simulation_is_reproducible() {
    let args = ["simulate", &path("biased_coin.pga"), "--runs", "20000", "--seed", "11"];
    let (a, b) = (probpga(&args), probpga(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let out = stdout(&a);
    let count: u64 = out
        .lines()
        .find(|l| l.starts_with("a;! : "))
        .and_then(|l| l["a;! : ".len()..].split_whitespace().next())
        .and_then(|c| c.parse().ok())
        .expect("a;! line");
    assert!((count as f64 / 20000.0 - 2.0 / 3.0).abs() < 0.02, "{out}");
}

#[test]
fn registry_file_drives_replies() {
    let dir = tempfile::tempdir().unwrap();
    let reg = dir.path().join("reg.txt");
    std::fs::write(&reg, "c = constant false\na = constant true\nb = constant true\n").unwrap();
    let o = probpga(&["simulate", &path("deterministic.pga"), "--registry", &reg.to_string_lossy(), "--runs", "5"]);
    assert_eq!(stdout(&o).trim(), "c;a;! : 5 (1.000000)");
}

#[test]
fn normalize_and_random_assign() {
    let o = probpga(&["normalize", &path("nested_choice.pga")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!stdout(&o).contains('['));
    let o = probpga(&["random-assign", "x", "3"]);
    assert_eq!(stdout(&o).trim(), "#H{3};[x.set_1;#3];[x.set_2;#2];[x.set_3;#1]");
    assert_eq!(probpga(&["random-assign", "x", "0"]).status.code(), Some(2));
}
