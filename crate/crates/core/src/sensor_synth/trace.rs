//! Trace assembly and the JSONL trace file.
//!
//! A trace file is one header object followed by one frame per line, sorted
//! by `(t, channel)` with channel declaration order breaking ties.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use super::channel::{Cadence, Channel, SensorFrame, SensorValues};
use super::kernels::{cell_for, sample_channel, sample_state, SampleInstant};
use super::route::{commute_route, DEFAULT_GPS_ACCURACY_M};
use super::steps::ActivityTimeline;
use super::SynthError;
use crate::persona::{Persona, SensorProfile};

pub const TRACE_SCHEMA: u32 = 1;
pub const MAX_WINDOW_MS: u64 = 7 * 86_400_000;
pub const MIN_RATE_HZ: f64 = 0.1;
pub const MAX_RATE_HZ: f64 = 100.0;
/// Upper bound on frames in one trace; keeps a week at high rates from
/// exhausting memory.
pub const MAX_FRAMES: u64 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceWindow {
    /// Window start, ms since the Unix epoch (UTC).
    pub start_ms: i64,
    pub duration_ms: u64,
}

impl TraceWindow {
    pub fn new(start_ms: i64, duration_ms: u64) -> Self {
        Self {
            start_ms,
            duration_ms,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.duration_ms == 0 {
            return Err(SynthError::InvalidWindow("duration must be positive".into()));
        }
        if self.duration_ms > MAX_WINDOW_MS {
            return Err(SynthError::InvalidWindow(format!(
                "duration {} ms exceeds the 7 day limit",
                self.duration_ms
            )));
        }
        Ok(())
    }
}

/// Sampling rates in Hz for the sampled channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SampleRates(pub BTreeMap<Channel, f64>);

impl Default for SampleRates {
    fn default() -> Self {
        let mut m = BTreeMap::new();
        for c in Channel::ALL {
            let hz = match c {
                Channel::AmbientLight | Channel::StepCounter => 1.0,
                Channel::GpsLocation => 0.2,
                _ if c.cadence() == Cadence::Sampled => 10.0,
                _ => continue,
            };
            m.insert(c, hz);
        }
        SampleRates(m)
    }
}

impl SampleRates {
    /// Defaults with the given overrides applied.
    pub fn with_overrides(overrides: &BTreeMap<Channel, f64>) -> Self {
        let mut rates = Self::default();
        for (c, hz) in overrides {
            rates.0.insert(*c, *hz);
        }
        rates
    }

    pub fn get(&self, channel: Channel) -> Option<f64> {
        self.0.get(&channel).copied()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        for (&channel, &hz) in &self.0 {
            if channel.cadence() == Cadence::OnEvent
                || !hz.is_finite()
                || !(MIN_RATE_HZ..=MAX_RATE_HZ).contains(&hz)
            {
                return Err(SynthError::InvalidRate { channel, hz });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub kind: String,
    pub schema: u32,
    pub persona_id: String,
    pub seed: u64,
    pub window: TraceWindow,
    pub clock_scale: f64,
    pub sample_rates: SampleRates,
    pub frame_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePlan {
    pub persona_id: String,
    pub seed: u64,
    pub window: TraceWindow,
    pub clock_scale: f64,
    pub sample_rates: SampleRates,
    pub frames: Vec<SensorFrame>,
}

fn check_profile(profile: &SensorProfile) -> Result<Tz, SynthError> {
    let tz: Tz = profile
        .timezone
        .parse()
        .map_err(|_| SynthError::InvalidProfile(format!("unknown time zone {:?}", profile.timezone)))?;
    if profile.active_hour_weights.len() != 24 || profile.activity_by_hour.len() != 24 {
        return Err(SynthError::InvalidProfile("hourly tables must have 24 entries".into()));
    }
    if !(profile.walking_cadence_hz.is_finite() && profile.walking_cadence_hz > 0.0) {
        return Err(SynthError::InvalidProfile("walking cadence must be positive".into()));
    }
    if !profile.home.is_valid() || !profile.work.is_valid() {
        return Err(SynthError::InvalidProfile("anchor coordinates out of range".into()));
    }
    if let Some(plan) = profile.commute {
        if plan.speed_mps > profile.max_speed_mps {
            return Err(SynthError::SpeedViolatesProfile {
                speed_mps: plan.speed_mps,
                max_speed_mps: profile.max_speed_mps,
            });
        }
    }
    Ok(tz)
}

fn sample_times(rate_hz: f64, duration_ms: u64) -> impl Iterator<Item = u64> {
    (0u64..)
        .map(move |k| (k as f64 * 1000.0 / rate_hz).round() as u64)
        .take_while(move |&t| t < duration_ms)
}

/// Builds a trace for a sensor profile. Output depends only on the arguments.
pub fn synthesize_trace(
    profile: &SensorProfile,
    persona_id: &str,
    window: TraceWindow,
    seed: u64,
    rates: &SampleRates,
) -> Result<TracePlan, SynthError> {
    window.validate()?;
    rates.validate()?;
    let tz = check_profile(profile)?;

    let projected: f64 = rates
        .0
        .values()
        .map(|hz| hz * window.duration_ms as f64 / 1000.0)
        .sum();
    if projected > MAX_FRAMES as f64 {
        return Err(SynthError::InvalidWindow(format!(
            "window and rates would produce about {projected:.0} frames, limit is {MAX_FRAMES}"
        )));
    }

    let timeline = ActivityTimeline::build(profile, &tz, window.start_ms, window.duration_ms, seed);
    let route = commute_route(
        profile,
        &tz,
        window.start_ms,
        window.start_ms + window.duration_ms as i64,
        seed,
        DEFAULT_GPS_ACCURACY_M,
    );
    let instant = |t: u64| SampleInstant {
        t,
        epoch_ms: timeline.epoch_ms(t),
        local_hour: timeline.local_hour(t),
        active_hours: timeline.active_hours(t),
        steps: timeline.steps_at(t),
        gps: Some(route.position_at(timeline.epoch_ms(t))),
    };

    let mut frames = Vec::with_capacity(projected as usize + 16);
    for (&channel, &hz) in &rates.0 {
        for t in sample_times(hz, window.duration_ms) {
            frames.push(sample_channel(profile, channel, &instant(t), sample_state(seed, channel, t))?);
        }
    }

    for &t in timeline.step_times() {
        frames.push(SensorFrame::vector(t, Channel::StepDetector, vec![1.0]));
    }

    // Wall clock at the start and on every minute boundary.
    let first_boundary = (60_000 - window.start_ms.rem_euclid(60_000)) % 60_000;
    frames.push(SensorFrame::vector(0, Channel::SystemTime, vec![window.start_ms as f64]));
    let mut t = first_boundary as u64;
    while t < window.duration_ms {
        if t > 0 {
            frames.push(SensorFrame::vector(t, Channel::SystemTime, vec![timeline.epoch_ms(t) as f64]));
        }
        t += 60_000;
    }

    frames.push(SensorFrame {
        t: 0,
        channel: Channel::TimeZone,
        values: SensorValues::Text(profile.timezone.clone()),
    });

    // Cell handover whenever the nearest anchor changes, checked at the GPS
    // cadence (or once a minute when GPS is not sampled).
    let probe_hz = rates.get(Channel::GpsLocation).unwrap_or(1.0 / 60.0);
    let mut last_cell: Option<[f64; 3]> = None;
    for t in sample_times(probe_hz, window.duration_ms) {
        let cell = cell_for(profile, route.position_at(timeline.epoch_ms(t)).point);
        if last_cell != Some(cell) {
            frames.push(SensorFrame::vector(t, Channel::CellTower, cell.to_vec()));
            last_cell = Some(cell);
        }
    }

    frames.sort_by_key(|f| (f.t, f.channel));
    Ok(TracePlan {
        persona_id: persona_id.to_string(),
        seed,
        window,
        clock_scale: 1.0,
        sample_rates: rates.clone(),
        frames,
    })
}

pub fn synthesize_for_persona(
    persona: &Persona,
    window: TraceWindow,
    seed: u64,
    rates: &SampleRates,
) -> Result<TracePlan, SynthError> {
    synthesize_trace(&persona.sensor_profile, &persona.id, window, seed, rates)
}

impl TracePlan {
    pub fn header(&self) -> TraceHeader {
        TraceHeader {
            kind: "trace".into(),
            schema: TRACE_SCHEMA,
            persona_id: self.persona_id.clone(),
            seed: self.seed,
            window: self.window,
            clock_scale: self.clock_scale,
            sample_rates: self.sample_rates.clone(),
            frame_count: self.frames.len() as u64,
        }
    }

    pub fn frames_for(&self, channel: Channel) -> impl Iterator<Item = &SensorFrame> {
        self.frames.iter().filter(move |f| f.channel == channel)
    }

    pub fn write_jsonl<W: Write>(&self, w: W) -> Result<(), SynthError> {
        let mut w = BufWriter::new(w);
        serde_json::to_writer(&mut w, &self.header())?;
        w.write_all(b"\n")?;
        for f in &self.frames {
            serde_json::to_writer(&mut w, f)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: Read>(r: R) -> Result<Self, SynthError> {
        let mut lines = BufReader::new(r).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| SynthError::Parse { line: 1, message: "empty trace file".into() })??;
        let header: TraceHeader = serde_json::from_str(&header_line)
            .map_err(|e| SynthError::Parse { line: 1, message: e.to_string() })?;
        if header.kind != "trace" || header.schema != TRACE_SCHEMA {
            return Err(SynthError::Parse {
                line: 1,
                message: format!("not a schema {TRACE_SCHEMA} trace header"),
            });
        }
        let mut frames = Vec::with_capacity(header.frame_count.min(MAX_FRAMES) as usize);
        let mut prev: Option<(u64, Channel)> = None;
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let frame: SensorFrame = serde_json::from_str(&line)
                .map_err(|e| SynthError::Parse { line: lineno, message: e.to_string() })?;
            if !frame.arity_ok() {
                return Err(SynthError::Parse {
                    line: lineno,
                    message: format!("value shape does not match channel {}", frame.channel),
                });
            }
            let key = (frame.t, frame.channel);
            if prev.is_some_and(|p| p > key) {
                return Err(SynthError::Parse { line: lineno, message: "frames out of order".into() });
            }
            prev = Some(key);
            frames.push(frame);
        }
        if frames.len() as u64 != header.frame_count {
            return Err(SynthError::Parse {
                line: frames.len() + 1,
                message: format!("header promises {} frames, found {}", header.frame_count, frames.len()),
            });
        }
        Ok(Self {
            persona_id: header.persona_id,
            seed: header.seed,
            window: header.window,
            clock_scale: header.clock_scale,
            sample_rates: header.sample_rates,
            frames,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), SynthError> {
        self.write_jsonl(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        Self::read_jsonl(std::fs::File::open(path)?)
    }
}
