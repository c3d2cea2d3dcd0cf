//! Bundled scenario configs reproduce their expected adaptations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sandbox_core::analysis::{ChangeKind, DiffReport, Verdict};
use sandbox_core::session::{
    load_record, load_reports, run_configured_session, session_dir, DiffPair, EventKind, SessionConfig,
    SessionControl, SessionStatus,
};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[derive(serde::Deserialize)]
struct Expect {
    app_id: String,
    verdict: Verdict,
    changes: BTreeMap<String, ChangeKind>,
    #[serde(default)]
    gps_only: Option<Verdict>,
}

fn run(name: &str) -> (Vec<DiffReport>, Vec<(DiffPair, DiffReport)>, Expect, f64) {
    let dir = scenarios();
    let config = SessionConfig::load(&dir.join(format!("{name}.json"))).unwrap();
    let expect: Expect =
        serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{name}.expect.json"))).unwrap()).unwrap();
    let out = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let record = run_configured_session(&config, &dir, out.path(), &SessionControl::default()).unwrap();
    let secs = started.elapsed().as_secs_f64();
    assert_eq!(record.status(), SessionStatus::Completed);
    let sdir = session_dir(out.path(), &config);
    let reloaded = load_record(&sdir.join("record.jsonl")).unwrap();
    assert!(reloaded.truncation.is_none());
    assert_eq!(reloaded.record, record);
    let reports = load_reports(&sdir, &record).unwrap();
    let pairs: Vec<DiffPair> = record
        .events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::DiffEmitted { pair, .. } => Some(*pair),
            _ => None,
        })
        .collect();
    let tagged = pairs.into_iter().zip(reports.iter().cloned()).collect();
    (reports, tagged, expect, secs)
}

fn check(name: &str) {
    let (_, tagged, expect, secs) = run(name);
    let fin = &tagged.iter().rev().find(|(p, _)| *p == DiffPair::BaselineLatest).unwrap().1;
    assert_eq!(fin.app_id, expect.app_id);
    assert_eq!(fin.change_set(), expect.changes, "{name}: {}", fin.to_json());
    assert_eq!(fin.verdict, expect.verdict);
    assert!(secs < 10.0, "{name} took {secs:.2}s");
    if let Some(v) = expect.gps_only {
        let first = &tagged.iter().find(|(p, _)| *p == DiffPair::Consecutive).unwrap().1;
        assert!(first.attributes(sandbox_core::sensor_synth::Channel::GpsLocation));
        assert_eq!(first.verdict, v);
    }
}

#[test]
fn fitness_badge() {
    check("fitness_badge");
}

#[test]
fn weather_night() {
    check("weather_night");
}

#[test]
fn rideshare_toronto() {
    check("rideshare_toronto");
}

#[test]
fn rideshare_rome() {
    check("rideshare_rome");
}

#[test]
fn shop_region() {
    check("shop_region");
}
