mod common;

use std::path::Path;

use common::{cli, corpus_dir, validate};

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn buildfname() -> String {
    corpus_dir().join("buildfname.mc").to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const TRIVIAL: &str = "int main(int argc, char **argv)\n{\n  char b[4];\n  char *s;\n  s = argv[1];\n  strcpy(b, s);\n  return 0;\n}\n";

#[test]
fn analyze_buildfname() {
    let d = tempfile::tempdir().unwrap();
    let json = d.path().join("a.json");
    let (code, out, _) = cli(&["analyze", &buildfname(), "--json", p(&json)]);
    assert_eq!(code, 0);
    assert!(out.starts_with("vulnerable statements: 8, 13, 16\n"), "{out}");
    assert!(out.contains("  <21,5,13,8>\n") && out.contains("  <22,8,10,11,8>\n"));
    let v = read_json(&json);
    validate("analyze.schema.json", &v).unwrap();
    assert_eq!(v["taint"]["21"]["gecos"], serde_json::json!([[21]]));
}

#[test]
fn analyze_taint_free_and_malformed() {
    let d = tempfile::tempdir().unwrap();
    let clean = d.path().join("clean.mc");
    std::fs::write(&clean, "void f(char *s)\n{\n  char b[4];\n  b[0] = 'x';\n}\n").unwrap();
    let (code, out, _) = cli(&["analyze", p(&clean)]);
    assert_eq!(code, 0);
    assert!(out.contains("no dangerous paths"), "{out}");
    assert!(out.contains("line 4: not input-reachable"));

    let bad = d.path().join("bad.mc");
    std::fs::write(&bad, "void f(char *s\n").unwrap();
    let (code, _, err) = cli(&["analyze", p(&bad)]);
    assert_eq!(code, 2);
    assert!(err.contains("syntax error at 2:1"), "{err}");

    let (code, _, err) = cli(&["analyze", p(&d.path().join("missing.mc"))]);
    assert_eq!(code, 1, "{err}");
}

#[test]
fn fuzz_buildfname_writes_valid_artifacts() {
    let d = tempfile::tempdir().unwrap();
    let (json, report) = (d.path().join("m.json"), d.path().join("r.json"));
    let (code, out, err) = cli(&[
        "fuzz", &buildfname(), "--target", "8", "--seed", "3", "--json", p(&json), "--report", p(&report),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("Malicious inputs:\n"), "{out}");
    assert!(out.contains("Overflow of buf[512] at line 8"), "{out}");
    assert!(out.contains("Severity: "));
    let m = read_json(&json);
    validate("manifest.schema.json", &m).unwrap();
    assert_eq!(m["target"], 8);
    assert_eq!(m["rng_seed"], 3);
    assert_eq!(m["outcome"]["status"], "crash");
    let r = read_json(&report);
    validate("crash_report.schema.json", &r).unwrap();
    assert_eq!(r, m["outcome"]["crash_report"]);
}

#[test]
fn fuzz_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let trivial = d.path().join("trivial.mc");
    std::fs::write(&trivial, TRIVIAL).unwrap();
    let (code, out, _) = cli(&["fuzz", p(&trivial), "--method", "random", "--seed", "0"]);
    assert_eq!(code, 0);
    assert!(out.contains("crash found in generation 0"), "{out}");

    let unreachable = d.path().join("u.mc");
    std::fs::write(&unreachable, "int main(int argc, char **argv)\n{\n  char b[4];\n  char *s;\n  s = argv[1];\n  b[0] = 'x';\n  return 0;\n}\n").unwrap();
    assert_eq!(cli(&["fuzz", p(&unreachable), "--seed", "0"]).0, 4);
    assert_eq!(cli(&["fuzz", p(&unreachable), "--target", "6", "--seed", "0"]).0, 4);
    assert_eq!(cli(&["fuzz", p(&trivial), "--target", "5", "--seed", "0"]).0, 2);
    assert_eq!(cli(&["fuzz", p(&trivial), "--method", "hill-climb"]).0, 2);

    // guarded by a condition no input satisfies
    let infeasible = d.path().join("inf.mc");
    std::fs::write(&infeasible, "int main(int argc, char **argv)\n{\n  char b[4];\n  char *s;\n  int n;\n  s = argv[1];\n  n = strlen(s);\n  if (n > 100 && n < 50) {\n    strcpy(b, s);\n  }\n  return 0;\n}\n").unwrap();
    let cfg = d.path().join("ga.toml");
    std::fs::write(&cfg, "population_size = 8\nmax_generations = 3\n").unwrap();
    let json = d.path().join("m.json");
    let (code, out, _) = cli(&["fuzz", p(&infeasible), "--config", p(&cfg), "--seed", "1", "--json", p(&json)]);
    assert_eq!(code, 3);
    assert!(out.contains("no crash after 3 generations"), "{out}");
    let m = read_json(&json);
    validate("manifest.schema.json", &m).unwrap();
    assert_eq!(m["outcome"]["crash_report"], serde_json::Value::Null);
    assert_eq!(m["config"]["population_size"], 8);

    let bad_cfg = d.path().join("bad.toml");
    std::fs::write(&bad_cfg, "population_size = 0\n").unwrap();
    assert_eq!(cli(&["fuzz", p(&trivial), "--config", p(&bad_cfg)]).0, 2);
}

#[test]
fn seed_from_environment() {
    let d = tempfile::tempdir().unwrap();
    let trivial = d.path().join("trivial.mc");
    std::fs::write(&trivial, TRIVIAL).unwrap();
    let json = d.path().join("m.json");
    std::env::set_var(tdsfuzz::cli::SEED_ENV, "42");
    let (code, _, _) = cli(&["fuzz", p(&trivial), "--json", p(&json)]);
    std::env::remove_var(tdsfuzz::cli::SEED_ENV);
    assert_eq!(code, 0);
    assert_eq!(read_json(&json)["rng_seed"], 42);
}

#[test]
fn replay_reproduces_and_detects_edits() {
    let d = tempfile::tempdir().unwrap();
    let prog = d.path().join("ftpls.mc");
    std::fs::copy(corpus_dir().join("ftpls.mc"), &prog).unwrap();
    let json = d.path().join("m.json");
    let (code, _, _) = cli(&["fuzz", p(&prog), "--method", "coverage-ga", "--seed", "5", "--json", p(&json)]);
    let (again, out, err) = cli(&["replay", p(&json)]);
    assert_eq!(again, code, "{err}");
    assert!(out.starts_with("replay reproduced the recorded outcome\n"), "{out}");

    let mut m = read_json(&json);
    m["outcome"]["generation"] = serde_json::json!(999_999);
    std::fs::write(&json, m.to_string()).unwrap();
    let (code, _, err) = cli(&["replay", p(&json)]);
    assert_eq!(code, 1);
    assert!(err.contains("diverged"), "{err}");

    std::fs::write(&prog, TRIVIAL).unwrap();
    let (code, _, err) = cli(&["replay", p(&json)]);
    assert_eq!(code, 1);
    assert!(err.contains("changed"), "{err}");
}

#[test]
fn compare_single_run() {
    let d = tempfile::tempdir().unwrap();
    let (json, csv) = (d.path().join("c.json"), d.path().join("c.csv"));
    let dir = corpus_dir();
    let (code, out, err) = cli(&["compare", p(&dir), "--runs", "1", "--seed", "4", "--json", p(&json), "--csv", p(&csv)]);
    assert_eq!(code, 0, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "| case | constraints | TDS+GA | coverage+GA | random |");
    assert_eq!(lines.iter().filter(|l| l.starts_with("| ") && !l.starts_with("| case")).count(), 3);
    assert!(out.contains("not statistically meaningful"));
    let v = read_json(&json);
    validate("compare.schema.json", &v).unwrap();
    assert_eq!(v[0]["stats"][0]["outcomes"][0]["seed"], 4);
    let csv = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(csv.lines().count(), 4);

    let empty = tempfile::tempdir().unwrap();
    let (code, _, err) = cli(&["compare", p(empty.path())]);
    assert_ne!(code, 0);
    assert!(err.contains("no benchmark cases"), "{err}");
}

#[test]
fn help_and_version() {
    let (code, out, _) = cli(&["--help"]);
    assert_eq!(code, 0);
    for sub in ["analyze", "fuzz", "compare", "replay"] {
        assert!(out.contains(sub));
    }
    assert_eq!(cli(&["frobnicate"]).0, 2);
}
