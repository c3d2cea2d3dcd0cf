//! Session configuration and trace sources.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::DateTime;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SessionError;
use crate::device_link::{AppAction, AppId};
use crate::persona::{generate_persona, Persona, PersonaRequest};
use crate::sensor_synth::{synthesize_for_persona, Channel, SampleRates, SensorFrame, SensorValues, TracePlan, TraceWindow};

pub const EMBEDDED_AGENT: &str = "embedded";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnapshotPolicy {
    /// Delay from an app's launch to its first snapshot.
    pub base_delay_ms: u64,
    /// First snapshots land uniformly in `base ± jitter`.
    pub jitter_ms: u64,
    /// Spacing of the periodic snapshots after the first; 0 disables them.
    pub interval_ms: u64,
}

impl Default for SnapshotPolicy {
    fn default() -> Self {
        Self {
            base_delay_ms: 5_000,
            jitter_ms: 1_000,
            interval_ms: 60_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduledAction {
    pub t: u64,
    pub app_id: String,
    pub action: AppAction,
}

/// Synthesize the trace from a persona at session start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSource {
    /// Persona file; the template persona for `template_seed` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persona: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_seed: Option<u64>,
    /// RFC 3339 start instant.
    pub start: String,
    pub duration_ms: u64,
    /// Rate overrides on top of the defaults.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub rates: BTreeMap<Channel, f64>,
}

/// One scripted stimulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptEvent {
    /// A single frame.
    Frame {
        at_ms: u64,
        channel: Channel,
        values: SensorValues,
    },
    /// `step_counter` readings rising linearly from `start` at `per_second`.
    Ramp {
        ramp: Channel,
        from_ms: u64,
        to_ms: u64,
        every_ms: u64,
        start: f64,
        per_second: f64,
    },
    /// `system_time` readings following the window clock.
    Clock { clock_every_ms: u64 },
}

/// Hand-written stimulus stream, the way an operator would spoof a device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceScript {
    pub start: String,
    pub duration_ms: u64,
    pub events: Vec<ScriptEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceSource {
    /// Trace JSONL file.
    File(PathBuf),
    Synth(SynthSource),
    Script(TraceScript),
}

fn parse_start(s: &str) -> Result<i64, SessionError> {
    DateTime::parse_from_rfc3339(s)
        .map(|d| d.timestamp_millis())
        .map_err(|e| SessionError::InvalidConfig(format!("bad start time {s:?}: {e}")))
}

impl TraceScript {
    pub fn build(&self, persona_id: &str, seed: u64) -> Result<TracePlan, SessionError> {
        let window = TraceWindow::new(parse_start(&self.start)?, self.duration_ms);
        window.validate()?;
        let mut frames = Vec::new();
        for ev in &self.events {
            match ev {
                ScriptEvent::Frame { at_ms, channel, values } => frames.push(SensorFrame {
                    t: *at_ms,
                    channel: *channel,
                    values: values.clone(),
                }),
                ScriptEvent::Ramp {
                    ramp,
                    from_ms,
                    to_ms,
                    every_ms,
                    start,
                    per_second,
                } => {
                    if *every_ms == 0 || to_ms < from_ms {
                        return Err(SessionError::InvalidConfig("ramp needs every_ms > 0 and from_ms <= to_ms".into()));
                    }
                    let mut t = *from_ms;
                    while t <= *to_ms {
                        let v = (start + per_second * (t - from_ms) as f64 / 1000.0).floor();
                        frames.push(SensorFrame::vector(t, *ramp, vec![v]));
                        t += every_ms;
                    }
                }
                ScriptEvent::Clock { clock_every_ms } => {
                    if *clock_every_ms == 0 {
                        return Err(SessionError::InvalidConfig("clock_every_ms must be positive".into()));
                    }
                    let mut t = 0;
                    while t < self.duration_ms {
                        frames.push(SensorFrame::vector(t, Channel::SystemTime, vec![(window.start_ms + t as i64) as f64]));
                        t += clock_every_ms;
                    }
                }
            }
        }
        if let Some(bad) = frames.iter().find(|f| !f.arity_ok() || f.t >= self.duration_ms) {
            return Err(SessionError::InvalidConfig(format!(
                "scripted {} frame at {} ms is malformed or outside the window",
                bad.channel, bad.t
            )));
        }
        frames.sort_by_key(|f| (f.t, f.channel));
        Ok(TracePlan {
            persona_id: persona_id.to_string(),
            seed,
            window,
            clock_scale: 1.0,
            sample_rates: SampleRates(BTreeMap::new()),
            frames,
        })
    }
}

impl TraceSource {
    /// Loads or builds the trace. Relative paths resolve against `base`.
    pub fn resolve(&self, persona_id: &str, seed: u64, base: &Path) -> Result<TracePlan, SessionError> {
        match self {
            TraceSource::File(p) => Ok(TracePlan::load(&base.join(p))?),
            TraceSource::Script(s) => s.build(persona_id, seed),
            TraceSource::Synth(s) => {
                let persona = match &s.persona {
                    Some(p) => Persona::load(&base.join(p))?,
                    None => generate_persona(&PersonaRequest::template(s.template_seed.unwrap_or(seed)), None)?,
                };
                let window = TraceWindow::new(parse_start(&s.start)?, s.duration_ms);
                Ok(synthesize_for_persona(&persona, window, seed, &SampleRates::with_overrides(&s.rates))?)
            }
        }
    }
}

fn default_agent() -> String {
    EMBEDDED_AGENT.into()
}

fn default_spacing() -> u64 {
    1_000
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub persona_id: String,
    pub trace: TraceSource,
    /// `host:port` of a device agent, or `embedded` for an in-process one.
    #[serde(default = "default_agent")]
    pub agent: String,
    pub app_suite: Vec<String>,
    /// Apps under study; reporting metadata only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<String>,
    #[serde(default)]
    pub snapshot_policy: SnapshotPolicy,
    /// Gap between consecutive app launches.
    #[serde(default = "default_spacing")]
    pub launch_spacing_ms: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub actions: Vec<ScheduledAction>,
    #[serde(default = "default_scale")]
    pub clock_scale: f64,
    #[serde(default)]
    pub seed: u64,
    /// Session length; the trace window when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<u64>,
}

impl SessionConfig {
    pub fn from_json(text: &str) -> Result<Self, SessionError> {
        let cfg: SessionConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SessionError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        let bad = |m: String| Err(SessionError::InvalidConfig(m));
        if self.app_suite.is_empty() {
            return bad("app_suite must not be empty".into());
        }
        for app in self.app_suite.iter().chain(&self.targets) {
            if app.parse::<AppId>().is_err() {
                return bad(format!("unknown app {app:?}"));
            }
        }
        if let Some(t) = self.targets.iter().find(|t| !self.app_suite.contains(t)) {
            return bad(format!("target {t:?} is not in app_suite"));
        }
        if let Some(a) = self.actions.iter().find(|a| !self.app_suite.contains(&a.app_id)) {
            return bad(format!("action for {:?}, which is not in app_suite", a.app_id));
        }
        let p = self.snapshot_policy;
        if p.jitter_ms > 0 && p.jitter_ms >= p.base_delay_ms {
            return bad("snapshot jitter must be smaller than the base delay".into());
        }
        if !(self.clock_scale.is_finite() && self.clock_scale > 0.0) {
            return bad("clock_scale must be a positive number".into());
        }
        if self.duration_ms == Some(0) {
            return bad("duration_ms must be positive".into());
        }
        Ok(())
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical config JSON, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn session_id(&self) -> String {
        format!("s-{}", &self.digest()[..12])
    }
}
