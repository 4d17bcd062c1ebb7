use std::path::Path;
use std::process::{Command, Output};

fn bdmec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bdmec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn run_preset_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = bdmec(&["run", "--preset", "speed-gain", "--repetitions", "2", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["results.csv", "summary.csv", "manifest.toml", "ledger_seed2024.tsv", "assessments_seed2025.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let results = read(&dir.path().join("results.csv"));
    assert!(results.starts_with("scenario,mode,seed,iteration,speed_gain\n"));
    assert_eq!(results.lines().count(), 1 + 2 * 2 * 5);
}

#[test]
fn iterations_override_gives_single_iteration_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = bdmec(&[
        "run", "--preset", "speed-gain", "--iterations", "1", "--repetitions", "2", "--out", out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let results = read(&dir.path().join("results.csv"));
    assert!(results.lines().skip(1).all(|l| l.split(',').nth(3) == Some("1")));
}

#[test]
fn manifest_rerun_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let o = bdmec(&["run", "--preset", "malicious", "--repetitions", "2", "--out", a.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = a.path().join("manifest.toml");
    let o = bdmec(&[
        "run",
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        b.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["results.csv", "summary.csv", "manifest.toml", "ledger_seed2025.tsv"] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f}");
    }
}

#[test]
fn verify_accepts_clean_and_rejects_tampered_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let o = bdmec(&[
        "run", "--preset", "speed-gain", "--repetitions", "1", "--iterations", "2", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ledger = dir.path().join("ledger_seed2024.tsv");
    let o = bdmec(&["verify", "--ledger", ledger.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("ok"));

    let text = read(&ledger);
    let lines: Vec<&str> = text.lines().collect();

    // Dropping a whole block keeps every line self-consistent; only the
    // chain check can object.
    let dropped: Vec<&str> = lines.iter().enumerate().filter(|(i, _)| *i != 2).map(|(_, l)| *l).collect();
    std::fs::write(&ledger, dropped.join("\n") + "\n").unwrap();
    let o = bdmec(&["verify", "--ledger", ledger.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error kind=tampered"), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("violation channel=delegator"));

    // Editing a payload in place breaks the line's own digest.
    let mut edited: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
    let mut fields: Vec<String> = edited[2].split('\t').map(str::to_string).collect();
    let payload = fields[5].clone();
    let last = if payload.ends_with('0') { "1" } else { "0" };
    fields[5] = format!("{}{last}", &payload[..payload.len() - 1]);
    edited[2] = fields.join("\t");
    std::fs::write(&ledger, edited.join("\n") + "\n").unwrap();
    let o = bdmec(&["verify", "--ledger", ledger.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error kind=ledger"), "{}", stderr(&o));
}

#[test]
fn privacy_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = bdmec(&[
        "privacy",
        "--epsilon-list",
        "0.01,0.1,0.5,1,2",
        "--trials",
        "500",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(&dir.path().join("privacy.csv"));
    assert!(csv.starts_with("epsilon,worker_id,mean_R_percent,P_percent,trials,seed\n"));
    assert_eq!(csv.lines().count(), 1 + 5 * 2);
}

#[test]
fn failures_exit_nonzero_with_error_line() {
    let o = bdmec(&["run", "--preset", "no-such-preset"]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error kind=unknown-preset message="), "{}", stderr(&o));

    let o = bdmec(&["verify", "--ledger", "/nonexistent/ledger.tsv"]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error kind=io"), "{}", stderr(&o));

    let o = bdmec(&["privacy", "--epsilon-list", "0,1"]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error kind=config"), "{}", stderr(&o));

    let o = bdmec(&["frobnicate"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("error kind=usage"));
}

#[test]
fn bare_scenario_config_replaces_preset_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.toml");
    std::fs::write(
        &cfg,
        r#"
iterations = 2
mode = "bdmec"
ledger_query_overhead_s = 0.0

[delegator]
device_id = "d"
processing_rate = 1.0
bandwidth_bps = 1e9

[[workers]]
device_id = "w"
processing_rate = 1.0
bandwidth_bps = 1e9

[generator]
n_jobs = 20
payload_bytes = [0, 0]
compute_cost = [1.0, 1.0]
steal_chunk_size = 1
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = bdmec(&[
        "run", "--preset", "speed-gain", "--config", cfg.to_str().unwrap(), "--repetitions", "2", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let results = read(&out.join("results.csv"));
    assert_eq!(results.lines().count(), 1 + 2 * 2 * 2);
}
