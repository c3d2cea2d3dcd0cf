mod common;

use std::path::Path;

use common::{bin, fixture_persona, run, scenario, stdout, Daemon};
use serde_json::Value;

#[test]
fn persona_gen_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let gen = run(&["persona", "gen", "--seed", "3", "--out", "p.json"], dir.path());
    assert_eq!(gen.status.code(), Some(0), "{gen:?}");
    let val = run(&["persona", "validate", "p.json"], dir.path());
    assert_eq!(val.status.code(), Some(0));
    assert!(stdout(&val).contains(": ok"));
}

#[test]
fn persona_gen_to_stdout_is_the_saved_file() {
    let dir = tempfile::tempdir().unwrap();
    let printed = run(&["persona", "gen", "--seed", "11"], dir.path());
    run(&["persona", "gen", "--seed", "11", "--out", "p.json"], dir.path());
    let saved = std::fs::read_to_string(dir.path().join("p.json")).unwrap();
    assert_eq!(stdout(&printed).trim_end(), saved.trim_end());
}

#[test]
fn implausible_fixture_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture_persona("nightshift-morning");
    let out = run(&["persona", "validate", f.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("R1"));

    let json = run(&["--json", "persona", "validate", f.to_str().unwrap()], dir.path());
    assert_eq!(json.status.code(), Some(2));
    let report: Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(report["ok"], false);
    let rules: Vec<&str> = report["violations"].as_array().unwrap().iter().map(|v| v["rule_id"].as_str().unwrap()).collect();
    assert_eq!(rules, ["R1"]);
}

#[test]
fn exit_codes_by_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(run(&["--help"], p).status.code(), Some(0));
    assert_eq!(run(&["--version"], p).status.code(), Some(0));
    assert_eq!(run(&["frobnicate"], p).status.code(), Some(1));
    assert_eq!(run(&["persona", "gen", "--fitness", "extreme"], p).status.code(), Some(1));
    assert_eq!(run(&["persona", "gen", "--template", "--llm"], p).status.code(), Some(1));
    assert_eq!(run(&["persona", "gen", "--age", "200"], p).status.code(), Some(2));
    // Missing input file is a runtime failure.
    assert_eq!(run(&["persona", "validate", "nope.json"], p).status.code(), Some(3));

    std::fs::write(p.join("bad.json"), r#"{"persona_id":"x","trace":{"file":"t.jsonl"},"app_suite":[]}"#).unwrap();
    assert_eq!(run(&["session", "run", "--config", "bad.json"], p).status.code(), Some(2));

    let cfg = scenario("rideshare_toronto");
    let unreachable = run(&["session", "run", "--config", cfg.to_str().unwrap(), "--agent", "127.0.0.1:1"], p);
    assert_eq!(unreachable.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&unreachable.stderr).contains("unreachable"));
}

fn persona_id(args: &[&str], envs: &[(&str, &str)], cwd: &Path) -> String {
    let mut c = bin();
    c.args(["--json", "persona", "gen", "--out", "p.json"]).args(args).current_dir(cwd);
    for (k, v) in envs {
        c.env(k, v);
    }
    let out = c.output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    v["id"].as_str().unwrap().to_string()
}

#[test]
fn flags_beat_env_beat_settings_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("settings.json"), r#"{"seed": 7}"#).unwrap();
    let base = persona_id(&[], &[], p);
    assert!(base.ends_with("-0"), "{base}");
    assert!(persona_id(&["--settings", "settings.json"], &[], p).ends_with("-7"));
    assert!(persona_id(&[], &[("SANDBOX_SETTINGS", "settings.json")], p).ends_with("-7"));
    assert!(persona_id(&["--settings", "settings.json"], &[("SANDBOX_SEED", "9")], p).ends_with("-9"));
    assert!(persona_id(&["--settings", "settings.json", "--seed", "5"], &[("SANDBOX_SEED", "9")], p).ends_with("-5"));
}

#[test]
fn out_dir_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("settings.json"), r#"{"out_dir": "from-file"}"#).unwrap();
    let cfg = scenario("rideshare_toronto");
    let cfg = cfg.to_str().unwrap();

    let o = run(&["--settings", "settings.json", "session", "run", "--config", cfg], p);
    assert_eq!(o.status.code(), Some(0));
    assert!(p.join("from-file").is_dir());

    let o = bin()
        .args(["--settings", "settings.json", "session", "run", "--config", cfg])
        .env("SANDBOX_OUT_DIR", "from-env")
        .current_dir(p)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(p.join("from-env").is_dir());

    let o = bin()
        .args(["--settings", "settings.json", "session", "run", "--config", cfg, "--out-dir", "from-flag"])
        .env("SANDBOX_OUT_DIR", "from-env-2")
        .current_dir(p)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(p.join("from-flag").is_dir());
    assert!(!p.join("from-env-2").exists());
}

#[test]
fn trace_synth_is_deterministic_and_honours_rates() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    run(&["persona", "gen", "--seed", "2", "--out", "p.json"], p);
    let args = |out: &str| {
        vec![
            "--seed".to_string(), "4".into(), "trace".into(), "synth".into(), "--persona".into(), "p.json".into(),
            "--start".into(), "2026-03-02T07:00:00+01:00".into(), "--duration".into(), "5m".into(),
            "--rate".into(), "gps_location=0.5".into(), "--out".into(), out.into(),
        ]
    };
    for out in ["a.jsonl", "b.jsonl"] {
        let o = bin().args(args(out)).current_dir(p).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{o:?}");
    }
    let a = std::fs::read(p.join("a.jsonl")).unwrap();
    assert_eq!(a, std::fs::read(p.join("b.jsonl")).unwrap());
    let header: Value = serde_json::from_str(String::from_utf8_lossy(&a).lines().next().unwrap()).unwrap();
    assert_eq!(header["seed"], 4);
    assert_eq!(header["sample_rates"]["gps_location"], 0.5);

    let bad = run(&["trace", "synth", "--persona", "p.json", "--start", "yesterday", "--duration", "5m"], p);
    assert_eq!(bad.status.code(), Some(1));
    let bad = run(&["trace", "synth", "--persona", "p.json", "--start", "2026-03-02T07:00:00Z", "--duration", "5 fortnights"], p);
    assert_eq!(bad.status.code(), Some(1));
}

fn report_json(out_dir: &Path, p: &Path) -> (String, String) {
    let cfg = scenario("shop_region");
    let run_out = run(
        &["--json", "session", "run", "--config", cfg.to_str().unwrap(), "--out-dir", out_dir.to_str().unwrap()],
        p,
    );
    assert_eq!(run_out.status.code(), Some(0), "{run_out:?}");
    let summary: Value = serde_json::from_str(&stdout(&run_out)).unwrap();
    let dir = summary["dir"].as_str().unwrap().to_string();
    let shown = run(&["--json", "report", "show", &dir], p);
    assert_eq!(shown.status.code(), Some(0));
    (dir, stdout(&shown))
}

#[test]
fn report_show_json_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let (dir_a, a) = report_json(&p.join("a"), p);
    let (_, b) = report_json(&p.join("b"), p);
    assert_eq!(a, b);
    assert!(!a.is_empty());

    // A single file prints exactly its stored bytes; a directory lists them all.
    let all: Value = serde_json::from_str(&a).unwrap();
    let files: Vec<&str> = all.as_array().unwrap().iter().map(|r| r["file"].as_str().unwrap()).collect();
    assert_eq!(files.len(), std::fs::read_dir(Path::new(&dir_a).join("reports")).unwrap().count());
    for f in files {
        let file = Path::new(&dir_a).join(f);
        let single = run(&["--json", "report", "show", file.to_str().unwrap()], p);
        assert_eq!(single.stdout, std::fs::read(&file).unwrap());
    }
}

#[test]
fn report_show_human_lists_changes_and_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let cfg = scenario("rideshare_toronto");
    run(&["session", "run", "--config", cfg.to_str().unwrap(), "--out-dir", "out"], p);
    let session = std::fs::read_dir(p.join("out")).unwrap().next().unwrap().unwrap().path();
    let shown = stdout(&run(&["report", "show", session.to_str().unwrap()], p));
    assert!(shown.contains("verdict adapted"));
    assert!(shown.contains("attributed to: gps_location"));
    assert!(shown.contains("\"18.40 USD\" -> \"25.02 CAD\""));
}

#[test]
fn tcp_agent_matches_embedded_agent() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let agent = Daemon::spawn(&["agent", "run", "--listen", "127.0.0.1:0"], p, "agent listening on ");
    let cfg = scenario("weather_night");
    let cfg = cfg.to_str().unwrap();
    let tcp = run(&["session", "run", "--config", cfg, "--agent", &agent.addr, "--out-dir", "tcp"], p);
    assert_eq!(tcp.status.code(), Some(0), "{tcp:?}");
    let emb = run(&["session", "run", "--config", cfg, "--out-dir", "emb"], p);
    assert_eq!(emb.status.code(), Some(0));

    // Session ids differ (agent is part of the config), report bytes do not.
    let reports = |root: &str| {
        let session = std::fs::read_dir(p.join(root)).unwrap().next().unwrap().unwrap().path();
        let mut files: Vec<_> = std::fs::read_dir(session.join("reports")).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        files.iter().map(|f| (f.file_name().unwrap().to_owned(), std::fs::read(f).unwrap())).collect::<Vec<_>>()
    };
    assert_eq!(reports("tcp"), reports("emb"));
}

#[test]
fn agent_fault_injection_aborts_the_session() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let agent = Daemon::spawn(
        &["agent", "run", "--listen", "127.0.0.1:0", "--drop-after-frames", "3"],
        p,
        "agent listening on ",
    );
    let cfg = scenario("fitness_badge");
    let out = run(&["--json", "session", "run", "--config", cfg.to_str().unwrap(), "--agent", &agent.addr], p);
    assert_eq!(out.status.code(), Some(3));
    let summary: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["status"], "aborted");
}
