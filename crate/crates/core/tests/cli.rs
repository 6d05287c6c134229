use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn obfusim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_obfusim"))
        .args(args)
        .output()
        .unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn simulate_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let config = scenario("default.toml");
    let o = obfusim(&["simulate", "--config", config.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    for f in [
        "default_medium.json",
        "default_medium_decisions.csv",
        "default_medium_usage.csv",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert!(!dir.path().join("tradeoff.csv").exists());

    let o = obfusim(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out,
        "--scenarios",
        "low,high",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let curve = std::fs::read_to_string(dir.path().join("tradeoff.csv")).unwrap();
    assert!(curve.starts_with("scenario,disruption_pct,relevance,U_T,C,R_c_bytes,R_p_pct,R_b_pct"));
    assert_eq!(curve.lines().count(), 3);
}

#[test]
fn simulate_json_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenario("overnight_low.toml");
    let o = obfusim(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rows: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rows[0]["scenario"], "overnight_low:low");
}

#[test]
fn missing_config_names_the_path() {
    let o = obfusim(&[
        "simulate",
        "--config",
        "/nonexistent/scenario.toml",
        "--out",
        "/tmp/unused",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("/nonexistent/scenario.toml"));
}

#[test]
fn recommend_prints_top_k_without_gambling() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenario("default.toml");
    let o = obfusim(&[
        "recommend",
        "--config",
        config.to_str().unwrap(),
        "--top",
        "3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let stdout = text(&o.stdout);
    assert_eq!(stdout.lines().count(), 3);
    assert!(!stdout.contains("gambling"));
    assert!(stdout.starts_with("1,skype,communication,"));
    assert!(dir.path().join("plan.json").exists());
}

#[test]
fn recommend_without_eligible_apps_fails() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("s.toml");
    std::fs::write(
        &config,
        r#"
name = "none"
[catalog]
categories = [{ id = "gambling", name = "Gambling" }]
apps = [
  { id = "poker", category = "gambling", keywords = ["poker"], refresh_rate_s = 20 },
  { id = "slots", category = "gambling", keywords = ["slots"], refresh_rate_s = 20 },
]
[user]
installed = ["poker"]
[privacy]
private_app_categories = ["gambling"]
"#,
    )
    .unwrap();
    let o = obfusim(&[
        "recommend",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", text(&o.stderr));
    assert!(text(&o.stderr).contains("no eligible"), "{}", text(&o.stderr));
}

#[test]
fn validate_lists_every_problem() {
    let o = obfusim(&["validate", "--config", scenario("default.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let bad = std::fs::read_to_string(scenario("default.toml"))
        .unwrap()
        .replace(
            "path = \"catalog.toml\"",
            &format!("path = {:?}", scenario("catalog.toml").to_str().unwrap()),
        )
        .replace(
            "installed = [\"poker_stars\", \"youtube\", \"chrome\", \"viber\", \"amazon_kindle\"]",
            "installed = []",
        )
        .replace(
            "usage = { poker_stars = 0.5, youtube = 0.25, chrome = 0.15, viber = 0.1 }",
            "",
        )
        + "\n[traffic.refresh]\nvalues = [20, 30]\nprobabilities = [0.5, 0.4]\n";
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, bad).unwrap();
    let o = obfusim(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let stdout = text(&o.stdout);
    assert!(stdout.contains("n(K_a) >= 1"), "{stdout}");
    assert!(stdout.contains("traffic.refresh.probabilities"), "{stdout}");
}
