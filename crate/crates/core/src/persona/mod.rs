//! Persona data model, generation, plausibility validation and the
//! lifestyle-to-sensor mapping.
//!
//! A persona is both a readable profile and the parameter set that drives
//! trace synthesis: [`SensorProfile`] is what the synthesizer consumes.

mod catalog;
mod derive;
mod generate;
mod validate;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geo::GeoPoint;

pub use catalog::{lookup_place, Archetype, Place, ARCHETYPES, PLACES};
pub use derive::{derive_sensor_profile, step_band, Demographics, MappingTable};
pub use generate::{
    generate_persona, prompt_template, FitnessLevel, GeneratorKind, PersonaHints, PersonaRequest,
    MAX_LLM_ATTEMPTS,
};
pub use validate::{validate_persona, RuleId, Severity, ValidationReport, Violation, RULESET_VERSION};

/// Persona file schema version.
pub const PERSONA_SCHEMA: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum PersonaError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("generation failed after {attempts} attempt(s): {reason}")]
    GenerationFailed { attempts: u32, reason: String },
    #[error("invalid lifestyle: {0}")]
    InvalidLifestyle(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("persona json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub schema: u32,
    pub id: String,
    pub name: String,
    pub age: u32,
    pub gender: String,
    pub location: Location,
    pub occupation: String,
    pub income_bracket: IncomeBracket,
    pub lifestyle: LifestyleProfile,
    pub sensor_profile: SensorProfile,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub portrait_ref: Option<String>,
}

impl Persona {
    /// Canonical serialization: pretty JSON in declaration order, LF line
    /// endings, trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("persona serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, PersonaError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), PersonaError> {
        std::fs::write(path, self.to_canonical_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PersonaError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn demographics(&self) -> Demographics {
        Demographics {
            age: self.age,
            gender: self.gender.clone(),
            occupation: self.occupation.clone(),
            income_bracket: self.income_bracket,
            location: self.location.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub place: String,
    pub lat: f64,
    pub lon: f64,
    /// IANA zone identifier, e.g. `America/Chicago`.
    pub timezone: String,
}

impl Location {
    pub fn point(&self) -> GeoPoint {
        GeoPoint::new(self.lat, self.lon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncomeBracket {
    Low,
    LowerMiddle,
    Middle,
    UpperMiddle,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommuteMode {
    Walk,
    Bike,
    Transit,
    Car,
    None,
}

impl CommuteMode {
    /// Hard plausibility ceiling for implied travel speed, m/s.
    pub fn speed_cap_mps(self) -> f64 {
        match self {
            CommuteMode::Walk | CommuteMode::None => 3.0,
            CommuteMode::Bike => 12.0,
            CommuteMode::Transit | CommuteMode::Car => 70.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftType {
    Day,
    Night,
    Rotating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Environment {
    Urban,
    Rural,
}

/// Half-open window of local hours `[start, end)`. `start > end` wraps past
/// midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HourWindow {
    pub start: u8,
    pub end: u8,
}

impl HourWindow {
    pub const fn new(start: u8, end: u8) -> Self {
        Self { start, end }
    }

    pub fn is_well_formed(&self) -> bool {
        self.start < 24 && self.end < 24 && self.start != self.end
    }

    pub fn contains(&self, hour: u8) -> bool {
        if self.start < self.end {
            (self.start..self.end).contains(&hour)
        } else {
            hour >= self.start || hour < self.end
        }
    }

    /// Fractional-hour variant of [`contains`](Self::contains).
    pub fn contains_f(&self, hour: f64) -> bool {
        let (s, e) = (f64::from(self.start), f64::from(self.end));
        if s < e {
            hour >= s && hour < e
        } else {
            hour >= s || hour < e
        }
    }

    pub fn len_hours(&self) -> u8 {
        (self.end + 24 - self.start) % 24
    }

    pub fn shifted(&self, hours: u8) -> Self {
        Self::new((self.start + hours) % 24, (self.end + hours) % 24)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifestyleProfile {
    pub commute_mode: CommuteMode,
    /// One-way commute duration budget.
    pub commute_minutes: u32,
    pub daily_mobility_km: f64,
    pub exercise_freq_per_week: u32,
    pub exercise_hours: Vec<HourWindow>,
    pub wake_hour: u8,
    pub sleep_hour: u8,
    pub screen_time_windows: Vec<HourWindow>,
    pub shift_type: ShiftType,
    pub environment: Environment,
    pub indoor_fraction: f64,
}

impl LifestyleProfile {
    pub fn awake_window(&self) -> HourWindow {
        HourWindow::new(self.wake_hour, self.sleep_hour)
    }

    pub fn is_awake(&self, hour: u8) -> bool {
        self.awake_window().contains(hour)
    }

    /// The same routine moved `hours` later on the clock.
    pub fn rotated(&self, hours: u8) -> Self {
        let mut out = self.clone();
        out.wake_hour = (self.wake_hour + hours) % 24;
        out.sleep_hour = (self.sleep_hour + hours) % 24;
        out.exercise_hours = self.exercise_hours.iter().map(|w| w.shifted(hours)).collect();
        out.screen_time_windows = self
            .screen_time_windows
            .iter()
            .map(|w| w.shifted(hours))
            .collect();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityLevel {
    Rest,
    Light,
    Moderate,
    Vigorous,
}

/// Accelerometer noise variance per activity level, (m/s²)².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelVariance {
    pub rest: f64,
    pub light: f64,
    pub moderate: f64,
    pub vigorous: f64,
}

impl AccelVariance {
    pub fn get(&self, level: ActivityLevel) -> f64 {
        match level {
            ActivityLevel::Rest => self.rest,
            ActivityLevel::Light => self.light,
            ActivityLevel::Moderate => self.moderate,
            ActivityLevel::Vigorous => self.vigorous,
        }
    }
}

/// Diurnal light exposure model. `sunrise_hour`/`sunset_hour` are the
/// persona's experienced daylight window (rotated for night-shift workers).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightCurve {
    pub peak_lux: f64,
    pub sunrise_hour: f64,
    pub sunset_hour: f64,
    pub night_lux: f64,
    pub indoor_clamp_lux: f64,
    pub indoor_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommutePlan {
    pub speed_mps: f64,
    pub depart_home_hour: u8,
    pub depart_work_hour: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorProfile {
    pub accel_variance_by_activity: AccelVariance,
    /// m/s² per hour of active time.
    pub accel_drift_rate: f64,
    pub daily_step_target: u32,
    pub walking_cadence_hz: f64,
    pub light_curve: LightCurve,
    pub mag_field_ut: f64,
    pub max_speed_mps: f64,
    pub home: GeoPoint,
    pub work: GeoPoint,
    pub timezone: String,
    /// 24 non-negative weights indexed by local hour.
    pub active_hour_weights: Vec<f64>,
    /// 24 activity levels indexed by local hour.
    pub activity_by_hour: Vec<ActivityLevel>,
    pub sleep_window: HourWindow,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commute: Option<CommutePlan>,
}

impl SensorProfile {
    pub fn activity_at(&self, hour: u8) -> ActivityLevel {
        self.activity_by_hour
            .get(usize::from(hour))
            .copied()
            .unwrap_or(ActivityLevel::Rest)
    }

    pub fn is_asleep(&self, hour: f64) -> bool {
        self.sleep_window.contains_f(hour)
    }

    /// Hour with the largest activity weight; ties resolve to the earliest.
    pub fn peak_hour(&self) -> usize {
        let mut best = 0;
        for (h, w) in self.active_hour_weights.iter().enumerate() {
            if *w > self.active_hour_weights[best] {
                best = h;
            }
        }
        best
    }
}
