//! End-to-end runs of the frobdens binary against the shipped scenario
//! files: frozen predict outputs, exit codes, determinism across thread
//! counts, and the sieve cache.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frobdens"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn run_scenario(cmd: &str, name: &str) -> Output {
    run(&[cmd, scenario(name).to_str().unwrap()])
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn predict_outputs_are_frozen() {
    let cases = [
        ("tower_split.json", "1/2"),
        ("cubic_split.json", "1/3"),
        ("cubic_all_split.json", "1/6"),
        ("cubic_mixed.json", "1/2"),
        ("cubic_inert.json", "1/3"),
        ("cross_field.json", "1/2"),
        ("cross_same.json", "1/1"),
        ("cross_mismatch.json", "0/1"),
        ("cross_disjoint.json", "1/2"),
        ("negative_control.json", "1/2"), // prediction ignores the wrong expectation
    ];
    for (name, want) in cases {
        let out = run_scenario("predict", name);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", stderr_of(&out));
        assert_eq!(stdout_of(&out), format!("{want}\n"), "{name}");
    }
}

#[test]
fn predict_weighted_by_a_point_mass() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pm.json");
    std::fs::write(
        &path,
        r#"{"field": {"abelian": {"m": 15, "u": [11]}},
            "set": {"congruence": {"modulus": 15, "residues": [2]}},
            "x": 2, "psi": {"point_mass": 2}}"#,
    )
    .unwrap();
    let out = run(&["predict", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    assert_eq!(stdout_of(&out), "1/2\n");
}

#[test]
fn verify_reports_the_honest_failure() {
    // the counting gate passes; the weighted value at the last finite s is
    // still dominated by its smallest primes, so the combined verdict fails
    let out = run_scenario("verify", "tower_split.json");
    assert_eq!(out.status.code(), Some(1));
    let text = stdout_of(&out);
    assert!(text.contains("# verdict: fail"), "{text}");
    let counting_row = text
        .lines()
        .find(|l| l.starts_with("counting"))
        .expect("counting row present");
    assert!(counting_row.ends_with("pass"), "{counting_row}");
    let last_weighted = text
        .lines()
        .filter(|l| l.starts_with("weighted"))
        .next_back()
        .unwrap();
    assert!(last_weighted.ends_with("fail"), "{last_weighted}");
}

#[test]
fn verify_rejects_a_wrong_expectation() {
    let out = run_scenario("verify", "negative_control.json");
    assert_eq!(out.status.code(), Some(1));
    let text = stdout_of(&out);
    assert!(text.contains("# verdict: fail"), "{text}");
    let counting_row = text.lines().find(|l| l.starts_with("counting")).unwrap();
    assert!(counting_row.ends_with("fail"), "{counting_row}");
}

#[test]
fn estimate_emits_the_tsv_contract() {
    let out = run_scenario("estimate", "tower_split.json");
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(
        text.contains("estimator\ts\tX\tnumer\tdenom\tvalue\texpected\tabs_err\tpass"),
        "{text}"
    );
    assert_eq!(text.lines().filter(|l| l.starts_with("weighted")).count(), 4);
    assert_eq!(text.lines().filter(|l| l.starts_with("counting")).count(), 1);
    assert!(text.contains("# stderr_proxy (counting):"), "{text}");
}

#[test]
fn estimate_is_deterministic_across_thread_counts() {
    let file = scenario("tower_split.json");
    let one = run(&["--threads", "1", "estimate", file.to_str().unwrap()]);
    let four = run(&["--threads", "4", "estimate", file.to_str().unwrap()]);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(four.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
    assert!(!one.stdout.is_empty());
}

#[test]
fn cache_directory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let file = scenario("lprobe.json");
    let plain = run(&["lprobe", file.to_str().unwrap()]);
    assert_eq!(plain.status.code(), Some(0), "{}", stderr_of(&plain));
    let cached = |label: &str| -> Output {
        let out = Command::new(env!("CARGO_BIN_EXE_frobdens"))
            .env("FROBDENS_CACHE_DIR", dir.path())
            .args(["lprobe", file.to_str().unwrap()])
            .output()
            .expect("binary spawns");
        assert_eq!(out.status.code(), Some(0), "{label}: {}", stderr_of(&out));
        out
    };
    let first = cached("cold cache");
    let entries = std::fs::read_dir(dir.path()).unwrap().count();
    assert!(entries > 0, "cache directory stays empty");
    let second = cached("warm cache");
    assert_eq!(first.stdout, plain.stdout);
    assert_eq!(second.stdout, plain.stdout);
}

#[test]
fn group_describes_both_shapes() {
    let tower = run_scenario("group", "tower_split.json");
    assert_eq!(tower.status.code(), Some(0));
    let text = stdout_of(&tower);
    assert!(text.contains("kernel order 2"), "{text}");
    assert!(text.contains("multiplicity"), "{text}");
    assert!(text.contains("spot-check (seed 1)"), "{text}");
    assert!(text.trim_end().ends_with("ok"), "{text}");

    let cross = run_scenario("group", "cross_disjoint.json");
    assert_eq!(cross.status.code(), Some(0));
    let text = stdout_of(&cross);
    assert!(text.contains("cross pair joined over"), "{text}");
    assert!(text.trim_end().ends_with("ok"), "{text}");
}

#[test]
fn lemma_sweep_table() {
    let out = run(&["lemma", "--d", "4", "--p", "5", "--chi", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    assert!(text.contains("psi_gen\tord_psi\tverdict"), "{text}");
    assert!(text.contains("1\t1\ttrue"), "{text}");
    assert!(text.contains("2\t4\toutside_hypothesis"), "{text}");
    assert!(text.contains("4\t2\ttrue"), "{text}");
}

#[test]
fn lprobe_rows_follow_the_requested_s_values() {
    let out = run_scenario("lprobe", "lprobe.json");
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    assert!(text.contains("s\tlog_product\tmodel"), "{text}");
    for s in ["0.600000", "0.550000", "0.520000"] {
        assert!(
            text.lines().any(|l| l.starts_with(s)),
            "missing row for s = {s} in {text}"
        );
    }
}

#[test]
fn bad_inputs_exit_two() {
    // a command that needs a tower gets a cross pair
    let out = run_scenario("estimate", "cross_same.json");
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("tower scenario"), "{}", stderr_of(&out));

    // missing file
    let out = run(&["predict", "/nonexistent/frobdens.json"]);
    assert_eq!(out.status.code(), Some(2));

    // malformed json and unknown keys
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{").unwrap();
    let out = run(&["predict", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let unknown = dir.path().join("unknown.json");
    std::fs::write(
        &unknown,
        r#"{"field": {"abelian": {"m": 15}}, "x": 2, "surprise": 1}"#,
    )
    .unwrap();
    let out = run(&["predict", unknown.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    // zero worker threads
    let file = scenario("tower_split.json");
    let out = run(&["--threads", "0", "predict", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unpredictable_scenarios_exit_three() {
    let dir = tempfile::tempdir().unwrap();

    let huge = dir.path().join("huge.json");
    std::fs::write(
        &huge,
        r#"{"field": {"abelian": {"m": 15, "u": [11]}},
            "set": {"congruence": {"modulus": 1000003, "residues": [1]}},
            "x": 2}"#,
    )
    .unwrap();
    let out = run(&["predict", huge.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("no exact prediction"), "{}", stderr_of(&out));

    let mixed = dir.path().join("mixed.json");
    std::fs::write(
        &mixed,
        r#"{"field": {"sn": {"f": [-2, 0, 0, 1], "h": "alternating"}},
            "set": {"congruence": {"modulus": 4, "residues": [1]}},
            "x": "identity"}"#,
    )
    .unwrap();
    let out = run(&["predict", mixed.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr_of(&out));
}
