//! Plausibility rules. Rule ids are stable strings so reports can be diffed
//! across versions of the rule set.
//!
//! | id | checks |
//! |----|--------|
//! | R1 | night-shift personas have low activity between 05:00 and 10:00 |
//! | R2 | commute speeds implied by home/work anchors respect the mode and profile caps |
//! | R3 | wake/sleep hours fit the shift type and match the profile's sleep window |
//! | R4 | daily step target sits in the band for the weekly exercise frequency |
//! | R5 | field ranges (age, coordinates, cadence, magnetic field, weights, ...) |

use serde::{Deserialize, Serialize};

use super::derive::{step_band, MappingTable};
use super::{CommuteMode, Persona, ShiftType, PERSONA_SCHEMA};
use crate::geo::haversine_m;

pub const RULESET_VERSION: &str = "plausibility-v1";

/// Morning activity on a night-shift persona may not exceed this fraction of
/// the persona's peak hourly weight.
pub const NIGHT_MORNING_MAX_RATIO: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleId {
    R1,
    R2,
    R3,
    R4,
    R5,
}

impl RuleId {
    pub const ALL: [RuleId; 5] = [RuleId::R1, RuleId::R2, RuleId::R3, RuleId::R4, RuleId::R5];

    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::R1 => "R1",
            RuleId::R2 => "R2",
            RuleId::R3 => "R3",
            RuleId::R4 => "R4",
            RuleId::R5 => "R5",
        }
    }
}

impl std::fmt::Display for RuleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule_id: RuleId,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ruleset: String,
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn rules_flagged(&self) -> Vec<RuleId> {
        let mut ids: Vec<RuleId> = self.violations.iter().map(|v| v.rule_id).collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn error(&mut self, rule_id: RuleId, message: impl Into<String>) {
        self.0.push(Violation {
            rule_id,
            severity: Severity::Error,
            message: message.into(),
        });
    }

    fn warn(&mut self, rule_id: RuleId, message: impl Into<String>) {
        self.0.push(Violation {
            rule_id,
            severity: Severity::Warning,
            message: message.into(),
        });
    }
}

/// Checks every rule and reports all violations. Never fails: malformed
/// values show up as R5 violations.
pub fn validate_persona(p: &Persona) -> ValidationReport {
    let mut c = Collector(Vec::new());
    check_ranges(p, &mut c);
    check_night_morning(p, &mut c);
    check_commute_speed(p, &mut c);
    check_sleep_schedule(p, &mut c);
    check_step_target(p, &mut c);
    let ok = !c.0.iter().any(|v| v.severity == Severity::Error);
    ValidationReport {
        ruleset: RULESET_VERSION.to_string(),
        ok,
        violations: c.0,
    }
}

fn check_night_morning(p: &Persona, c: &mut Collector) {
    if p.lifestyle.shift_type != ShiftType::Night {
        return;
    }
    let weights = &p.sensor_profile.active_hour_weights;
    if weights.len() != 24 {
        return;
    }
    let peak = weights.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return;
    }
    for hour in 5..10 {
        let ratio = weights[hour] / peak;
        if ratio > NIGHT_MORNING_MAX_RATIO {
            c.error(
                RuleId::R1,
                format!(
                    "night-shift persona has activity weight {:.2} at {hour:02}:00 ({:.0}% of peak)",
                    weights[hour],
                    ratio * 100.0
                ),
            );
            return;
        }
    }
}

fn check_commute_speed(p: &Persona, c: &mut Collector) {
    let l = &p.lifestyle;
    let sp = &p.sensor_profile;
    let cap = sp.max_speed_mps.min(l.commute_mode.speed_cap_mps());
    if l.commute_mode == CommuteMode::None {
        if l.commute_minutes > 0 {
            c.warn(RuleId::R2, "commute_minutes set but commute_mode is none");
        }
        return;
    }
    if !(sp.home.is_valid() && sp.work.is_valid()) {
        return;
    }
    let distance = haversine_m(sp.home, sp.work);
    if l.commute_minutes == 0 {
        if distance > 50.0 {
            c.error(
                RuleId::R2,
                format!("home and work are {distance:.0} m apart with a zero-minute commute"),
            );
        }
    } else {
        let implied = distance / (f64::from(l.commute_minutes) * 60.0);
        if implied > cap {
            c.error(
                RuleId::R2,
                format!(
                    "commute of {:.1} km in {} min implies {implied:.1} m/s, cap is {cap:.1} m/s",
                    distance / 1000.0,
                    l.commute_minutes
                ),
            );
        }
    }
    if let Some(plan) = &sp.commute {
        if plan.speed_mps > cap {
            c.error(
                RuleId::R2,
                format!("commute speed {:.1} m/s exceeds cap {cap:.1} m/s", plan.speed_mps),
            );
        }
    }
}

fn in_hours(h: u8, lo: u8, hi: u8) -> bool {
    (lo..=hi).contains(&h)
}

fn check_sleep_schedule(p: &Persona, c: &mut Collector) {
    let l = &p.lifestyle;
    if l.wake_hour >= 24 || l.sleep_hour >= 24 || l.wake_hour == l.sleep_hour {
        return;
    }
    let awake = (l.sleep_hour + 24 - l.wake_hour) % 24;
    if !(12..=20).contains(&awake) {
        c.error(RuleId::R3, format!("awake span of {awake} h is outside 12-20 h"));
    }
    match l.shift_type {
        ShiftType::Day => {
            if !in_hours(l.wake_hour, 4, 11) {
                c.error(RuleId::R3, format!("day-shift wake hour {:02}:00 outside 04-11", l.wake_hour));
            }
            if !(l.sleep_hour >= 20 || l.sleep_hour <= 3) {
                c.error(RuleId::R3, format!("day-shift sleep hour {:02}:00 outside 20-03", l.sleep_hour));
            }
        }
        ShiftType::Night => {
            if !in_hours(l.wake_hour, 12, 20) {
                c.error(RuleId::R3, format!("night-shift wake hour {:02}:00 outside 12-20", l.wake_hour));
            }
            if !in_hours(l.sleep_hour, 3, 11) {
                c.error(RuleId::R3, format!("night-shift sleep hour {:02}:00 outside 03-11", l.sleep_hour));
            }
        }
        ShiftType::Rotating => {}
    }
    let sw = p.sensor_profile.sleep_window;
    if sw.start != l.sleep_hour || sw.end != l.wake_hour {
        c.error(
            RuleId::R3,
            format!(
                "sensor sleep window {:02}-{:02} does not match lifestyle sleep {:02} / wake {:02}",
                sw.start, sw.end, l.sleep_hour, l.wake_hour
            ),
        );
    }
}

fn check_step_target(p: &Persona, c: &mut Collector) {
    let band = step_band(&MappingTable::default(), p.lifestyle.exercise_freq_per_week);
    let target = p.sensor_profile.daily_step_target;
    if target < band.low || target > band.high {
        c.error(
            RuleId::R4,
            format!(
                "daily step target {target} outside {}-{} for {} workouts/week",
                band.low, band.high, p.lifestyle.exercise_freq_per_week
            ),
        );
    }
}

fn check_ranges(p: &Persona, c: &mut Collector) {
    let mut bad = |m: String| c.error(RuleId::R5, m);
    if p.schema != PERSONA_SCHEMA {
        bad(format!("schema {} is not {PERSONA_SCHEMA}", p.schema));
    }
    if p.id.trim().is_empty() || p.name.trim().is_empty() {
        bad("id and name must be non-empty".into());
    }
    if !(13..=100).contains(&p.age) {
        bad(format!("age {} outside 13-100", p.age));
    }
    if !p.location.point().is_valid() {
        bad(format!("location ({}, {}) out of range", p.location.lat, p.location.lon));
    }
    let l = &p.lifestyle;
    if !(l.daily_mobility_km.is_finite() && (0.0..=500.0).contains(&l.daily_mobility_km)) {
        bad(format!("daily_mobility_km {} outside 0-500", l.daily_mobility_km));
    }
    if l.exercise_freq_per_week > 14 {
        bad(format!("exercise_freq_per_week {} above 14", l.exercise_freq_per_week));
    }
    if !(l.indoor_fraction.is_finite() && (0.0..=1.0).contains(&l.indoor_fraction)) {
        bad(format!("indoor_fraction {} outside 0-1", l.indoor_fraction));
    }
    if l.wake_hour >= 24 || l.sleep_hour >= 24 || l.wake_hour == l.sleep_hour {
        bad(format!("wake {} / sleep {} must be distinct hours below 24", l.wake_hour, l.sleep_hour));
    }
    for w in l.exercise_hours.iter().chain(&l.screen_time_windows) {
        if !w.is_well_formed() {
            bad(format!("hour window {}-{} malformed", w.start, w.end));
        }
    }

    let s = &p.sensor_profile;
    if !(0.5..=3.5).contains(&s.walking_cadence_hz) {
        bad(format!("walking cadence {} Hz outside 0.5-3.5", s.walking_cadence_hz));
    }
    if !(s.max_speed_mps > 0.0 && s.max_speed_mps <= 70.0) {
        bad(format!("max speed {} m/s outside (0, 70]", s.max_speed_mps));
    }
    if !(20.0..=70.0).contains(&s.mag_field_ut) {
        bad(format!("magnetic field {} uT outside 20-70", s.mag_field_ut));
    }
    if s.active_hour_weights.len() != 24
        || s.active_hour_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
        || s.active_hour_weights.iter().sum::<f64>() <= 0.0
    {
        bad("active_hour_weights must be 24 non-negative values with positive sum".into());
    }
    if s.activity_by_hour.len() != 24 {
        bad("activity_by_hour must have 24 entries".into());
    }
    let v = s.accel_variance_by_activity;
    if [v.rest, v.light, v.moderate, v.vigorous, s.accel_drift_rate]
        .iter()
        .any(|x| !(x.is_finite() && *x >= 0.0))
    {
        bad("accelerometer variance and drift must be non-negative".into());
    }
    let lc = s.light_curve;
    let hours_ok = |h: f64| (0.0..24.0).contains(&h);
    if !(lc.peak_lux >= 0.0
        && lc.night_lux >= 0.0
        && lc.indoor_clamp_lux >= 0.0
        && (0.0..=1.0).contains(&lc.indoor_fraction)
        && hours_ok(lc.sunrise_hour)
        && hours_ok(lc.sunset_hour)
        && lc.sunrise_hour != lc.sunset_hour)
    {
        bad("light curve parameters out of range".into());
    }
    if !(s.home.is_valid() && s.work.is_valid()) {
        bad("home/work anchors out of range".into());
    }
    if s.timezone.parse::<chrono_tz::Tz>().is_err() {
        bad(format!("unknown timezone {}", s.timezone));
    }
    if !s.sleep_window.is_well_formed() {
        bad("sleep window malformed".into());
    }
}
