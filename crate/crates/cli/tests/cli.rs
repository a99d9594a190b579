use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cba(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cba"))
        .args(args)
        .output()
        .expect("spawn cba")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn run_writes_one_row_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    let o = cba(&[
        "run", "--n", "64", "--t", "21", "--adversary", "coinkiller", "--trials", "200",
        "--seed", "7", "--las-vegas", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("# c="), "config echo missing");
    assert!(text.contains("# seed=7"));
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(
        header,
        "trial,seed,n,t,q,adversary,phases,rounds,agreement,validity,violations"
    );
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 200);
    for row in rows {
        let cols: Vec<_> = row.split(',').collect();
        assert_eq!(cols.len(), 11, "{row}");
        assert_eq!(cols[8], "true", "{row}");
        let phases: u32 = cols[6].parse().unwrap();
        let rounds: u32 = cols[7].parse().unwrap();
        assert_eq!(rounds, 2 * phases);
    }
    // Summary goes to stderr.
    assert!(String::from_utf8_lossy(&o.stderr).contains("200 trials"));
}

#[test]
fn same_seed_same_output() {
    let args = ["run", "--n", "32", "--adversary", "splitworld", "--trials", "20", "--seed", "3", "--las-vegas"];
    let a = cba(&args);
    let b = cba(&[&args[..], &["--serial"]].concat());
    assert!(a.status.success() && b.status.success());
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn resilience_violation_exits_nonzero_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never.csv");
    let o = cba(&["run", "--n", "30", "--t", "10", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    assert!(String::from_utf8_lossy(&o.stderr).contains("t < n/3"));
}

#[test]
fn unwritable_output_fails_before_running() {
    let o = cba(&["run", "--n", "16", "--out", "/nonexistent-dir/r.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_adversary_is_an_error() {
    let o = cba(&["run", "--n", "16", "--adversary", "telepath"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn coin_test_meets_floor() {
    let o = cba(&["coin-test", "--n", "100", "--trials", "100000", "--seed", "1"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert_eq!(text.matches(" OK").count(), 2, "{text}");
}

#[test]
fn coin_test_fails_when_the_adversary_is_too_strong() {
    // f = n/2 leaves the honest sum no room to escape.
    let o = cba(&["coin-test", "--n", "64", "--f", "32", "--trials", "20000"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
}

#[test]
fn verify_prints_exact_moments() {
    let o = cba(&["verify", "--trials", "20000"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("E[X^4] g=16: 736 == 736 OK"), "{text}");
    assert!(text.contains("E[X^2] g=16: 16 == 16 OK"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(
        &cfg,
        "n = 16\nt = 5\ntrials = 9\nseed = 4\nadversary = \"crash:per_phase=1\"\nlas_vegas = true\n",
    )
    .unwrap();
    let o = cba(&["--config", cfg.to_str().unwrap(), "run", "--trials", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("# trials=4"));
    assert!(text.contains("# seed=4"));
    assert!(text.contains("# adversary=crash"));
    assert_eq!(data_rows(&text).len(), 4);
}

#[test]
fn bad_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "nodes = 16\n").unwrap();
    let o = cba(&["--config", cfg.to_str().unwrap(), "run", "--n", "16"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn jsonl_and_trace_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.jsonl");
    let o = cba(&[
        "run", "--n", "8", "--t", "2", "--trials", "2", "--format", "jsonl", "--record-trace",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0]["config"]["n"] == "8");
    assert!(lines[1]["trace"].is_null());
    assert_eq!(lines[1]["n"], 8);

    let trace = Path::new(&format!("{}.trace.jsonl", out.display())).to_path_buf();
    let records: Vec<serde_json::Value> = fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!records.is_empty());
    let sent: u64 = lines[1..].iter().map(|r| r["messages_sent"].as_u64().unwrap()).sum();
    assert_eq!(records.len() as u64, sent);
}

#[test]
fn sweep_covers_the_grid() {
    let o = cba(&[
        "sweep", "--n", "16,32", "--adversary", "null", "--adversary", "coinkiller:spend=1",
        "--trials", "3", "--las-vegas",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().any(|r| r.contains(",32,10,") && r.contains("coinkiller")));
}

#[test]
fn strict_turns_missed_agreement_into_exit_one() {
    // Fixed-round mode with c = 11 committees: the coin killer can
    // spoil every coin, so nobody finishes inside the cap.
    let args = [
        "run", "--n", "64", "--t", "21", "--alpha", "1", "--adversary", "coinkiller",
        "--trials", "20", "--inputs", "half",
    ];
    let lax = cba(&args);
    assert!(lax.status.success());
    assert!(data_rows(&stdout(&lax)).iter().all(|r| r.contains(",false,")));
    let strict = cba(&[&args[..], &["--strict"]].concat());
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn curves_csv() {
    let o = cba(&["curves", "--n", "1024", "--x-max", "32", "--points", "5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let last = data_rows(&text).pop().unwrap().to_string();
    let cols: Vec<f64> = last.split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(cols[0], 32.0);
    assert!((cols[1] - 3.2).abs() < 1e-9, "{last}");
}
