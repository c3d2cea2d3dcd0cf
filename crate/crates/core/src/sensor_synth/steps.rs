//! Step process and per-minute activity timeline.
//!
//! The window is cut into one-minute bouts. Each bout walks with a
//! probability chosen so the expected daily count equals the profile's step
//! target; a walking bout emits steps at the hour's cadence. Step times come
//! from a continuous phase accumulator, so an uninterrupted walk of `d`
//! seconds at cadence `c` yields exactly `floor(c * d + 0.5)` steps.

use chrono::{Offset, TimeZone};
use chrono_tz::Tz;

use super::kernels::mix64;
use crate::persona::{ActivityLevel, SensorProfile};

pub const BOUT_MS: u64 = 60_000;
const HOUR_MS: f64 = 3_600_000.0;
const DAY_MS: i64 = 86_400_000;

/// Relative share of the day's walking that falls in an hour at this level.
pub fn step_weight(level: ActivityLevel) -> f64 {
    match level {
        ActivityLevel::Rest => 0.0,
        ActivityLevel::Light => 1.0,
        ActivityLevel::Moderate => 4.0,
        ActivityLevel::Vigorous => 10.0,
    }
}

/// Steps per second while moving; vigorous hours run.
pub fn cadence_for(profile: &SensorProfile, level: ActivityLevel) -> f64 {
    match level {
        ActivityLevel::Vigorous => (profile.walking_cadence_hz * 1.4).min(3.5),
        _ => profile.walking_cadence_hz,
    }
}

/// Probability that a bout in each local hour is spent walking.
pub fn walk_probabilities(profile: &SensorProfile) -> [f64; 24] {
    let mut p = [0.0; 24];
    let denom: f64 = (0..24u8)
        .map(|h| {
            let level = profile.activity_at(h);
            step_weight(level) * cadence_for(profile, level)
        })
        .sum();
    if denom <= 0.0 {
        return p;
    }
    let k = f64::from(profile.daily_step_target) / (3600.0 * denom);
    for (h, slot) in p.iter_mut().enumerate() {
        *slot = (k * step_weight(profile.activity_at(h as u8))).min(1.0);
    }
    p
}

/// Expected steps from local midnight to a fractional local hour.
pub fn expected_steps_since_midnight(profile: &SensorProfile, hour: f64) -> f64 {
    let p = walk_probabilities(profile);
    let hour = hour.clamp(0.0, 24.0);
    let whole = hour.floor() as usize;
    let rate = |h: usize| 3600.0 * p[h] * cadence_for(profile, profile.activity_at(h as u8));
    let full: f64 = (0..whole.min(24)).map(rate).sum();
    let part = if whole < 24 { (hour - whole as f64) * rate(whole) } else { 0.0 };
    full + part
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Bout {
    start: u64,
    end: u64,
    offset_ms: i64,
    level: ActivityLevel,
}

/// Per-minute view of the window: local clock, activity level, step events.
#[derive(Debug, Clone)]
pub struct ActivityTimeline {
    start_epoch_ms: i64,
    bouts: Vec<Bout>,
    /// Active (non-rest) milliseconds before each bout.
    active_prefix_ms: Vec<u64>,
    step_times: Vec<u64>,
    base_steps: u64,
}

fn utc_offset_ms(tz: &Tz, epoch_ms: i64) -> i64 {
    match tz.timestamp_millis_opt(epoch_ms).single() {
        Some(dt) => i64::from(dt.offset().fix().local_minus_utc()) * 1000,
        None => 0,
    }
}

fn hour_of(epoch_ms: i64, offset_ms: i64) -> f64 {
    (epoch_ms + offset_ms).rem_euclid(DAY_MS) as f64 / HOUR_MS
}

impl ActivityTimeline {
    pub fn build(profile: &SensorProfile, tz: &Tz, start_epoch_ms: i64, duration_ms: u64, seed: u64) -> Self {
        let probabilities = walk_probabilities(profile);
        let mut bouts = Vec::with_capacity((duration_ms / BOUT_MS + 1) as usize);
        let mut active_prefix_ms = Vec::with_capacity(bouts.capacity());
        let mut step_times = Vec::new();
        let mut active = 0u64;
        let mut phase = 0.0f64;
        let mut next_step = 1u64;
        let mut start = 0u64;
        let mut index = 0u64;
        while start < duration_ms {
            let end = (start + BOUT_MS).min(duration_ms);
            let offset_ms = utc_offset_ms(tz, start_epoch_ms + start as i64);
            let hour = hour_of(start_epoch_ms + start as i64, offset_ms);
            let level = profile.activity_at(hour.floor() as u8);
            active_prefix_ms.push(active);
            if level != ActivityLevel::Rest {
                active += end - start;
            }
            let draw = (mix64(seed ^ mix64(0x57e9_0000_0000_0000 ^ index)) >> 11) as f64 / (1u64 << 53) as f64;
            if draw < probabilities[hour.floor() as usize % 24] {
                let cadence = cadence_for(profile, level);
                let span_s = (end - start) as f64 / 1000.0;
                let phase_end = phase + cadence * span_s;
                while (next_step as f64 - 0.5) <= phase_end {
                    let dt = ((next_step as f64 - 0.5 - phase) / cadence * 1000.0).floor().max(0.0) as u64;
                    step_times.push((start + dt).min(end - 1));
                    next_step += 1;
                }
                phase = phase_end;
            }
            bouts.push(Bout {
                start,
                end,
                offset_ms,
                level,
            });
            start = end;
            index += 1;
        }
        let first_offset = utc_offset_ms(tz, start_epoch_ms);
        let base_steps = expected_steps_since_midnight(profile, hour_of(start_epoch_ms, first_offset)).floor() as u64;
        Self {
            start_epoch_ms,
            bouts,
            active_prefix_ms,
            step_times,
            base_steps,
        }
    }

    fn bout_index(&self, t: u64) -> usize {
        ((t / BOUT_MS) as usize).min(self.bouts.len().saturating_sub(1))
    }

    pub fn epoch_ms(&self, t: u64) -> i64 {
        self.start_epoch_ms + t as i64
    }

    pub fn utc_offset_ms(&self, t: u64) -> i64 {
        self.bouts.get(self.bout_index(t)).map(|b| b.offset_ms).unwrap_or(0)
    }

    pub fn local_hour(&self, t: u64) -> f64 {
        hour_of(self.epoch_ms(t), self.utc_offset_ms(t))
    }

    pub fn level(&self, t: u64) -> ActivityLevel {
        self.bouts
            .get(self.bout_index(t))
            .map(|b| b.level)
            .unwrap_or(ActivityLevel::Rest)
    }

    pub fn active_hours(&self, t: u64) -> f64 {
        let i = self.bout_index(t);
        let Some(b) = self.bouts.get(i) else { return 0.0 };
        let partial = if b.level != ActivityLevel::Rest {
            t.clamp(b.start, b.end) - b.start
        } else {
            0
        };
        (self.active_prefix_ms[i] + partial) as f64 / HOUR_MS
    }

    /// Counter value at `t`: the expected count since local midnight at the
    /// window start plus every step detected at or before `t`.
    pub fn steps_at(&self, t: u64) -> u64 {
        self.base_steps + self.step_times.partition_point(|&s| s <= t) as u64
    }

    pub fn base_steps(&self) -> u64 {
        self.base_steps
    }

    pub fn step_times(&self) -> &[u64] {
        &self.step_times
    }
}
