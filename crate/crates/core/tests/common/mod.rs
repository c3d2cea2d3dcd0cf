//! Shared test support: independent oracles, fixture builders and random
//! generators. Oracles here are written against the documented rules and
//! formulas, never against library internals.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use sandbox_core::device_link::{
    encode_frame, AppAction, AppLaunch, ElementKind, FrameType, Hello, Payload, ProtocolFrame, SnapshotReq, UiElement,
    UiSnapshot,
};
use sandbox_core::persona::{generate_persona, FitnessLevel, Persona, PersonaRequest, RuleId, ShiftType};
use sandbox_core::sensor_synth::{Channel, SensorFrame, SensorValues, TracePlan};

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

/// Compares `actual` with a golden file. `UPDATE_GOLDEN=1` rewrites it.
pub fn assert_golden(path: &Path, actual: &str) {
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "golden mismatch for {}", path.display());
}

// ---------------------------------------------------------------------------
// Persona rule oracle

const MEAN_EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Great-circle distance via the 3D chord between unit vectors.
fn chord_distance_m(a: (f64, f64), b: (f64, f64)) -> f64 {
    let v = |(lat, lon): (f64, f64)| {
        let (lat, lon) = (lat.to_radians(), lon.to_radians());
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    };
    let (p, q) = (v(a), v(b));
    let chord = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
    2.0 * MEAN_EARTH_RADIUS_M * (chord / 2.0).min(1.0).asin()
}

fn f(v: &Value, path: &str) -> f64 {
    v.pointer(path).and_then(Value::as_f64).unwrap_or(f64::NAN)
}

fn u(v: &Value, path: &str) -> i64 {
    v.pointer(path).and_then(Value::as_i64).unwrap_or(-1)
}

fn s<'a>(v: &'a Value, path: &str) -> &'a str {
    v.pointer(path).and_then(Value::as_str).unwrap_or("")
}

fn point_ok(lat: f64, lon: f64) -> bool {
    lat.is_finite() && lon.is_finite() && lat.abs() <= 90.0 && lon.abs() <= 180.0
}

fn window_ok(w: &Value) -> bool {
    let (a, b) = (u(w, "/start"), u(w, "/end"));
    (0..24).contains(&a) && (0..24).contains(&b) && a != b
}

/// Rules a persona breaks, restated from the rule table: night mornings
/// (R1), commute speed (R2), sleep schedule (R3), step band (R4) and field
/// ranges (R5). Warnings count as flags.
pub fn oracle_rules(p: &Value) -> BTreeSet<RuleId> {
    let mut out = BTreeSet::new();
    let sp = &p["sensor_profile"];
    let l = &p["lifestyle"];

    // R5
    let mut r5 = u(p, "/schema") != 1
        || s(p, "/id").trim().is_empty()
        || s(p, "/name").trim().is_empty()
        || !(13..=100).contains(&u(p, "/age"))
        || !point_ok(f(p, "/location/lat"), f(p, "/location/lon"));
    let mob = f(l, "/daily_mobility_km");
    r5 |= !(mob >= 0.0 && mob <= 500.0);
    r5 |= u(l, "/exercise_freq_per_week") > 14;
    let ind = f(l, "/indoor_fraction");
    r5 |= !(ind >= 0.0 && ind <= 1.0);
    let (wake, sleep) = (u(l, "/wake_hour"), u(l, "/sleep_hour"));
    let hours_ok = (0..24).contains(&wake) && (0..24).contains(&sleep) && wake != sleep;
    r5 |= !hours_ok;
    for key in ["exercise_hours", "screen_time_windows"] {
        r5 |= l[key].as_array().map(|ws| ws.iter().any(|w| !window_ok(w))).unwrap_or(true);
    }
    let cad = f(sp, "/walking_cadence_hz");
    r5 |= !(cad >= 0.5 && cad <= 3.5);
    let vmax = f(sp, "/max_speed_mps");
    r5 |= !(vmax > 0.0 && vmax <= 70.0);
    let mag = f(sp, "/mag_field_ut");
    r5 |= !(mag >= 20.0 && mag <= 70.0);
    let weights: Vec<f64> = sp["active_hour_weights"]
        .as_array()
        .map(|a| a.iter().map(|x| x.as_f64().unwrap_or(f64::NAN)).collect())
        .unwrap_or_default();
    r5 |= weights.len() != 24 || weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || weights.iter().sum::<f64>() <= 0.0;
    r5 |= sp["activity_by_hour"].as_array().map(|a| a.len()).unwrap_or(0) != 24;
    for key in ["rest", "light", "moderate", "vigorous"] {
        let x = f(sp, &format!("/accel_variance_by_activity/{key}"));
        r5 |= !(x >= 0.0 && x.is_finite());
    }
    let drift = f(sp, "/accel_drift_rate");
    r5 |= !(drift >= 0.0 && drift.is_finite());
    let lc = &sp["light_curve"];
    let (rise, set) = (f(lc, "/sunrise_hour"), f(lc, "/sunset_hour"));
    r5 |= !(f(lc, "/peak_lux") >= 0.0
        && f(lc, "/night_lux") >= 0.0
        && f(lc, "/indoor_clamp_lux") >= 0.0
        && (0.0..=1.0).contains(&f(lc, "/indoor_fraction"))
        && (0.0..24.0).contains(&rise)
        && (0.0..24.0).contains(&set)
        && rise != set);
    let home = (f(sp, "/home/lat"), f(sp, "/home/lon"));
    let work = (f(sp, "/work/lat"), f(sp, "/work/lon"));
    let anchors_ok = point_ok(home.0, home.1) && point_ok(work.0, work.1);
    r5 |= !anchors_ok;
    r5 |= s(sp, "/timezone").parse::<chrono_tz::Tz>().is_err();
    r5 |= !window_ok(&sp["sleep_window"]);
    if r5 {
        out.insert(RuleId::R5);
    }

    // R1
    if s(l, "/shift_type") == "night" && weights.len() == 24 {
        let peak = weights.iter().copied().fold(0.0, f64::max);
        if peak > 0.0 && (5..10).any(|h| weights[h] / peak > 0.25) {
            out.insert(RuleId::R1);
        }
    }

    // R2
    let mode = s(l, "/commute_mode");
    let minutes = u(l, "/commute_minutes");
    let mode_cap = match mode {
        "bike" => 12.0,
        "transit" | "car" => 70.0,
        _ => 3.0,
    };
    let cap = f64::min(vmax, mode_cap);
    if mode == "none" {
        if minutes > 0 {
            out.insert(RuleId::R2);
        }
    } else if anchors_ok {
        let d = chord_distance_m(home, work);
        let too_fast = if minutes == 0 { d > 50.0 } else { d / (minutes as f64 * 60.0) > cap };
        let plan_fast = sp["commute"].is_object() && f(sp, "/commute/speed_mps") > cap;
        if too_fast || plan_fast {
            out.insert(RuleId::R2);
        }
    }

    // R3
    if hours_ok {
        let awake = (sleep - wake).rem_euclid(24);
        let mut bad = !(12..=20).contains(&awake);
        match s(l, "/shift_type") {
            "day" => bad |= !(4..=11).contains(&wake) || !(sleep >= 20 || sleep <= 3),
            "night" => bad |= !(12..=20).contains(&wake) || !(3..=11).contains(&sleep),
            _ => {}
        }
        bad |= u(sp, "/sleep_window/start") != sleep || u(sp, "/sleep_window/end") != wake;
        if bad {
            out.insert(RuleId::R3);
        }
    }

    // R4: steps/day band by workouts per week.
    let freq = u(l, "/exercise_freq_per_week");
    let (lo, hi) = match freq {
        i64::MIN..=0 => (2000, 5000),
        1..=2 => (4000, 7000),
        3..=4 => (6000, 10000),
        _ => (9000, 14000),
    };
    let target = u(sp, "/daily_step_target");
    if target < lo || target > hi {
        out.insert(RuleId::R4);
    }
    out
}

pub fn as_value(p: &Persona) -> Value {
    serde_json::to_value(p).unwrap()
}

pub fn day_persona() -> Persona {
    generate_persona(&PersonaRequest::template(0), None).unwrap()
}

pub fn night_persona() -> Persona {
    let mut r = PersonaRequest::template(1);
    r.hints.shift = Some(ShiftType::Night);
    generate_persona(&r, None).unwrap()
}

/// A persona that breaks exactly `rule`, derived from a clean one.
pub fn one_violation(rule: RuleId) -> Persona {
    match rule {
        RuleId::R1 => {
            let mut p = night_persona();
            let w = &mut p.sensor_profile.active_hour_weights;
            let peak = w.iter().copied().fold(0.0, f64::max);
            w[7] = peak;
            p.id = "nightshift-morning".into();
            p
        }
        RuleId::R2 => {
            let mut p = day_persona();
            p.lifestyle.commute_mode = sandbox_core::persona::CommuteMode::Walk;
            p.lifestyle.commute_minutes = 20;
            p.sensor_profile.max_speed_mps = 3.0;
            p.sensor_profile.work = sandbox_core::geo::destination(p.sensor_profile.home, 0.7, 40_000.0);
            if let Some(c) = &mut p.sensor_profile.commute {
                c.speed_mps = 1.4;
            }
            p.id = "walk-40km".into();
            p
        }
        RuleId::R3 => {
            let mut p = day_persona();
            p.lifestyle.wake_hour = 14;
            p.lifestyle.sleep_hour = 2;
            p.sensor_profile.sleep_window = sandbox_core::persona::HourWindow::new(2, 14);
            p.id = "day-shift-late-riser".into();
            p
        }
        RuleId::R4 => {
            let mut p = day_persona();
            p.lifestyle.exercise_freq_per_week = 0;
            p.id = "sedentary-high-steps".into();
            p
        }
        RuleId::R5 => {
            let mut p = day_persona();
            p.age = 7;
            p.id = "underage".into();
            p
        }
    }
}

/// Randomly perturbs a clean persona; each field edit may or may not break
/// a rule. The oracle decides which.
pub fn mutate_persona(base: &Persona, rng: &mut ChaCha8Rng) -> Persona {
    let mut p = base.clone();
    let edits = rng.random_range(1..=4);
    for _ in 0..edits {
        match rng.random_range(0..16) {
            0 => p.age = rng.random_range(5..110),
            1 => {
                let h = rng.random_range(0..24);
                p.sensor_profile.active_hour_weights[h] = rng.random_range(0.0..2.0);
            }
            2 => p.lifestyle.commute_minutes = rng.random_range(0..90),
            3 => {
                let d = rng.random_range(0.0..80_000.0);
                p.sensor_profile.work = sandbox_core::geo::destination(p.sensor_profile.home, rng.random_range(0.0..6.28), d);
            }
            4 => p.lifestyle.wake_hour = rng.random_range(0..24),
            5 => p.lifestyle.sleep_hour = rng.random_range(0..24),
            6 => p.sensor_profile.daily_step_target = rng.random_range(0..20_000),
            7 => p.lifestyle.exercise_freq_per_week = rng.random_range(0..16),
            8 => p.sensor_profile.walking_cadence_hz = rng.random_range(0.0..4.5),
            9 => p.sensor_profile.mag_field_ut = rng.random_range(10.0..80.0),
            10 => p.sensor_profile.max_speed_mps = rng.random_range(0.5..80.0),
            11 => {
                use sandbox_core::persona::CommuteMode::*;
                p.lifestyle.commute_mode = [Walk, Bike, Transit, Car, None][rng.random_range(0..5)];
            }
            12 => {
                p.lifestyle.shift_type = [ShiftType::Day, ShiftType::Night, ShiftType::Rotating][rng.random_range(0..3)];
            }
            13 => p.lifestyle.indoor_fraction = rng.random_range(-0.2..1.2),
            14 => {
                let (a, b) = (rng.random_range(0..24), rng.random_range(0..24));
                p.sensor_profile.sleep_window = sandbox_core::persona::HourWindow::new(a, b);
            }
            _ => {
                if let Some(c) = &mut p.sensor_profile.commute {
                    c.speed_mps = rng.random_range(0.5..20.0);
                }
            }
        }
    }
    p
}

/// A varied, clean-or-not persona drawn from the template generator.
pub fn random_persona(rng: &mut ChaCha8Rng) -> Persona {
    let mut req = PersonaRequest::template(rng.random());
    if rng.random_bool(0.4) {
        req.hints.shift = Some([ShiftType::Day, ShiftType::Night, ShiftType::Rotating][rng.random_range(0..3)]);
    }
    if rng.random_bool(0.4) {
        req.hints.fitness = Some(
            [FitnessLevel::Sedentary, FitnessLevel::Low, FitnessLevel::Moderate, FitnessLevel::ModerateHigh, FitnessLevel::High]
                [rng.random_range(0..5)],
        );
    }
    generate_persona(&req, None).unwrap()
}

// ---------------------------------------------------------------------------
// Trace invariants

/// Human-readable invariant violations in a trace, empty when clean.
pub fn trace_violations(plan: &TracePlan, max_speed_mps: f64) -> Vec<String> {
    let mut out = Vec::new();
    let mut last_counter: Option<(u64, f64)> = None;
    let mut detector_times: Vec<u64> = Vec::new();
    let mut counter_pts: Vec<(u64, f64)> = Vec::new();
    let mut last_fix: Option<(u64, f64, f64)> = None;
    for fr in &plan.frames {
        let v = match &fr.values {
            SensorValues::Vector(v) => v.as_slice(),
            SensorValues::Text(_) => continue,
        };
        match fr.channel {
            Channel::StepCounter => {
                if let Some((t0, c0)) = last_counter {
                    if v[0] < c0 {
                        out.push(format!("step counter fell from {c0} at {t0} to {} at {}", v[0], fr.t));
                    }
                }
                last_counter = Some((fr.t, v[0]));
                counter_pts.push((fr.t, v[0]));
            }
            Channel::StepDetector => detector_times.push(fr.t),
            Channel::RotationVector => {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if (1.0 - n).abs() >= 1e-6 {
                    out.push(format!("quaternion norm {n} at {}", fr.t));
                }
            }
            Channel::AmbientLight => {
                if !(v[0] >= 0.0) {
                    out.push(format!("negative lux {} at {}", v[0], fr.t));
                }
            }
            Channel::GpsLocation => {
                if let Some((t0, lat0, lon0)) = last_fix {
                    let dt = (fr.t - t0) as f64 / 1000.0;
                    let d = chord_distance_m((lat0, lon0), (v[0], v[1]));
                    if dt > 0.0 && d / dt > max_speed_mps * (1.0 + 1e-9) + 1e-9 {
                        out.push(format!("gps speed {:.3} m/s over {max_speed_mps} at {}", d / dt, fr.t));
                    }
                }
                last_fix = Some((fr.t, v[0], v[1]));
            }
            _ => {}
        }
    }
    // Every counter reading equals a fixed base plus the detector events so far.
    let mut base: Option<f64> = None;
    for (t, c) in counter_pts {
        let seen = detector_times.partition_point(|d| *d <= t) as f64;
        match base {
            None => base = Some(c - seen),
            Some(b) if (c - seen - b).abs() > 0.0 => {
                out.push(format!("counter {c} at {t} disagrees with {seen} detector events over base {b}"));
                break;
            }
            _ => {}
        }
    }
    out
}

// ---------------------------------------------------------------------------
// UI trees

const KINDS: [ElementKind; 7] = [
    ElementKind::Banner,
    ElementKind::Card,
    ElementKind::Notification,
    ElementKind::Badge,
    ElementKind::Price,
    ElementKind::ModeFlag,
    ElementKind::Message,
];

pub fn random_element(rng: &mut ChaCha8Rng, depth: usize) -> UiElement {
    let mut el = UiElement::new(KINDS[rng.random_range(0..KINDS.len())], format!("t{}", rng.random_range(0..4)));
    if rng.random_bool(0.3) {
        el = el.attr("k", format!("{}", rng.random_range(0..3)));
    }
    if depth < 4 {
        for _ in 0..rng.random_range(0..3) {
            el = el.child(random_element(rng, depth + 1));
        }
    }
    el
}

pub fn random_tree(rng: &mut ChaCha8Rng) -> Vec<UiElement> {
    (0..rng.random_range(0..5)).map(|_| random_element(rng, 1)).collect()
}

fn mutate_children(children: &mut Vec<UiElement>, rng: &mut ChaCha8Rng, depth: usize) {
    for c in children.iter_mut() {
        mutate_element(c, rng, depth + 1);
    }
    if rng.random_bool(0.15) && !children.is_empty() {
        let i = rng.random_range(0..children.len());
        children.remove(i);
    }
    if rng.random_bool(0.15) && depth < 4 {
        let i = rng.random_range(0..=children.len());
        children.insert(i, random_element(rng, depth + 1));
    }
}

fn mutate_element(el: &mut UiElement, rng: &mut ChaCha8Rng, depth: usize) {
    match rng.random_range(0..10) {
        0 => el.text = format!("t{}", rng.random_range(0..4)),
        1 => el.kind = KINDS[rng.random_range(0..KINDS.len())],
        2 => {
            el.attrs.insert("k".into(), format!("{}", rng.random_range(0..3)));
        }
        3 => {
            el.attrs.clear();
        }
        _ => {}
    }
    mutate_children(&mut el.children, rng, depth);
}

/// A pair `(before, after)` where `after` is `before` with random edits (or
/// none at all).
pub fn random_pair(rng: &mut ChaCha8Rng) -> (UiSnapshot, UiSnapshot) {
    let before = random_tree(rng);
    let mut after = before.clone();
    if rng.random_bool(0.8) {
        mutate_children(&mut after, rng, 0);
    }
    let t0 = rng.random_range(0..1000);
    (
        UiSnapshot::new("fitness", t0, before),
        UiSnapshot::new("fitness", t0 + rng.random_range(1..1000), after),
    )
}

fn flatten(els: &[UiElement], prefix: &str, out: &mut BTreeMap<String, (ElementKind, String, Vec<(String, String)>)>) {
    for (i, e) in els.iter().enumerate() {
        let path = format!("{prefix}/{i}");
        out.insert(
            path.clone(),
            (e.kind, e.text.clone(), e.attrs.iter().map(|(k, v)| (k.clone(), v.clone())).collect()),
        );
        flatten(&e.children, &path, out);
    }
}

/// Brute force: flatten both trees to `path -> node` maps and compare keys.
pub fn oracle_changes(before: &UiSnapshot, after: &UiSnapshot) -> BTreeMap<String, &'static str> {
    let (mut a, mut b) = (BTreeMap::new(), BTreeMap::new());
    flatten(&before.ui_state, "", &mut a);
    flatten(&after.ui_state, "", &mut b);
    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    keys.into_iter()
        .filter_map(|k| match (a.get(k), b.get(k)) {
            (Some(x), Some(y)) if x != y => Some((k.clone(), "modified")),
            (Some(_), None) => Some((k.clone(), "removed")),
            (None, Some(_)) => Some((k.clone(), "added")),
            _ => None,
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Wire frames

/// One frame of every type, plus the interesting payload variants.
pub fn golden_frames() -> Vec<ProtocolFrame> {
    let p = |payload| ProtocolFrame::new(payload);
    vec![
        p(Payload::Hello(Hello { role: "orchestrator".into(), versions: vec![1], apps: vec!["fitness".into(), "weather".into()] })),
        p(Payload::Hello(Hello { role: "agent".into(), versions: vec![1], apps: vec![] })),
        p(Payload::Spoof(SensorFrame::vector(0, Channel::StepCounter, vec![1532.0]))),
        p(Payload::Spoof(SensorFrame::vector(200, Channel::RotationVector, vec![0.0, 0.0, 0.3826834323650898, 0.9238795325112867]))),
        p(Payload::Spoof(SensorFrame::vector(5000, Channel::GpsLocation, vec![43.6532, -79.3832, 5.0, 0.0]))),
        p(Payload::Spoof(SensorFrame { t: 7, channel: Channel::TimeZone, values: SensorValues::Text("Europe/Rome".into()) })),
        p(Payload::AppLaunch(AppLaunch { app_id: "fitness".into(), action: None })),
        p(Payload::AppLaunch(AppLaunch { app_id: "shop".into(), action: Some(AppAction::SelectRegion { region: "IT".into() }) })),
        p(Payload::SnapshotReq(SnapshotReq { app_id: "fitness".into(), t: 5000 })),
        p(Payload::Snapshot(UiSnapshot::new(
            "fitness",
            5000,
            vec![
                UiElement::new(ElementKind::Banner, "Daily activity"),
                UiElement::new(ElementKind::Card, "Achievements")
                    .child(UiElement::new(ElementKind::Badge, "10k steps").attr("threshold", "10000")),
            ],
        ))),
        ProtocolFrame::ack(FrameType::Spoof, Some(5000)),
        ProtocolFrame::ack(FrameType::AppLaunch, None),
        ProtocolFrame::error("arity_mismatch", "values do not match the arity of step_counter"),
    ]
}

pub fn golden_text() -> String {
    golden_frames().iter().map(|f| String::from_utf8(encode_frame(f)).unwrap()).collect()
}

/// Random byte-level edits: flips, inserts, deletes, truncation, duplication, swaps.
pub fn mutate_bytes(line: &[u8], rng: &mut rand_chacha::ChaCha8Rng) -> Vec<u8> {
    let mut b = line.to_vec();
    for _ in 0..rng.random_range(1..4) {
        if b.is_empty() {
            b.push(b'{');
        }
        let i = rng.random_range(0..b.len());
        match rng.random_range(0..7) {
            0 => b[i] = rng.random(),
            1 => b[i] ^= 1 << rng.random_range(0..8),
            2 => {
                b.remove(i);
            }
            3 => {
                let alphabet = b"{}[],:\"0-e.9 \\u\n";
                b.insert(i, alphabet[rng.random_range(0..alphabet.len())]);
            }
            4 => b.truncate(i),
            5 => {
                let j = rng.random_range(i..b.len());
                let chunk = b[i..=j.min(b.len() - 1)].to_vec();
                b.splice(i..i, chunk);
            }
            _ if !b.is_empty() => {
                let j = rng.random_range(0..b.len());
                let k = i.min(b.len() - 1);
                b.swap(k, j);
            }
            _ => {}
        }
    }
    b
}
