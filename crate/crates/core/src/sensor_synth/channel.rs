use std::fmt;

use serde::{Deserialize, Serialize};

/// The closed set of spoofable channels. Declaration order is the canonical
/// tie-break order for frames sharing a timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Accelerometer,
    Gyroscope,
    LinearAcceleration,
    AmbientLight,
    StepCounter,
    StepDetector,
    RotationVector,
    Gravity,
    MagneticField,
    Orientation,
    GpsLocation,
    CellTower,
    SystemTime,
    TimeZone,
}

/// Shape of a channel's value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Numeric(usize),
    Text,
}

/// How a channel is scheduled by the synthesizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cadence {
    /// Sampled at a configurable rate.
    Sampled,
    /// Emitted only when something happens (a step, a clock or cell change).
    OnEvent,
}

impl Channel {
    pub const ALL: [Channel; 14] = [
        Channel::Accelerometer,
        Channel::Gyroscope,
        Channel::LinearAcceleration,
        Channel::AmbientLight,
        Channel::StepCounter,
        Channel::StepDetector,
        Channel::RotationVector,
        Channel::Gravity,
        Channel::MagneticField,
        Channel::Orientation,
        Channel::GpsLocation,
        Channel::CellTower,
        Channel::SystemTime,
        Channel::TimeZone,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Accelerometer => "accelerometer",
            Channel::Gyroscope => "gyroscope",
            Channel::LinearAcceleration => "linear_acceleration",
            Channel::AmbientLight => "ambient_light",
            Channel::StepCounter => "step_counter",
            Channel::StepDetector => "step_detector",
            Channel::RotationVector => "rotation_vector",
            Channel::Gravity => "gravity",
            Channel::MagneticField => "magnetic_field",
            Channel::Orientation => "orientation",
            Channel::GpsLocation => "gps_location",
            Channel::CellTower => "cell_tower",
            Channel::SystemTime => "system_time",
            Channel::TimeZone => "time_zone",
        }
    }

    pub fn arity(self) -> Arity {
        match self {
            Channel::Accelerometer
            | Channel::Gyroscope
            | Channel::LinearAcceleration
            | Channel::Gravity
            | Channel::MagneticField
            | Channel::Orientation
            | Channel::CellTower => Arity::Numeric(3),
            Channel::AmbientLight
            | Channel::StepCounter
            | Channel::StepDetector
            | Channel::SystemTime => Arity::Numeric(1),
            Channel::RotationVector | Channel::GpsLocation => Arity::Numeric(4),
            Channel::TimeZone => Arity::Text,
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Channel::Accelerometer | Channel::LinearAcceleration | Channel::Gravity => "m/s^2",
            Channel::Gyroscope => "rad/s",
            Channel::AmbientLight => "lux",
            Channel::StepCounter => "steps",
            Channel::StepDetector => "event",
            Channel::RotationVector => "unit quaternion (x, y, z, w)",
            Channel::MagneticField => "uT",
            Channel::Orientation => "deg (azimuth, pitch, roll)",
            Channel::GpsLocation => "deg, deg, m, m/s (lat, lon, accuracy, speed)",
            Channel::CellTower => "mcc, mnc, cell id",
            Channel::SystemTime => "ms since unix epoch",
            Channel::TimeZone => "IANA zone id",
        }
    }

    pub fn cadence(self) -> Cadence {
        match self {
            Channel::StepDetector | Channel::CellTower | Channel::SystemTime | Channel::TimeZone => {
                Cadence::OnEvent
            }
            _ => Cadence::Sampled,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Channel::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown channel {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SensorValues {
    Vector(Vec<f64>),
    Text(String),
}

impl SensorValues {
    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            SensorValues::Vector(v) => Some(v),
            SensorValues::Text(_) => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            SensorValues::Text(s) => Some(s),
            SensorValues::Vector(_) => None,
        }
    }

    /// First numeric component, if any.
    pub fn scalar(&self) -> Option<f64> {
        self.as_vector().and_then(|v| v.first().copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    /// Milliseconds since the trace window start.
    pub t: u64,
    pub channel: Channel,
    pub values: SensorValues,
}

impl SensorFrame {
    pub fn vector(t: u64, channel: Channel, values: Vec<f64>) -> Self {
        Self {
            t,
            channel,
            values: SensorValues::Vector(values),
        }
    }

    /// True when the value shape matches the channel and every number is
    /// finite.
    pub fn arity_ok(&self) -> bool {
        match (self.channel.arity(), &self.values) {
            (Arity::Numeric(n), SensorValues::Vector(v)) => {
                v.len() == n && v.iter().all(|x| x.is_finite())
            }
            (Arity::Text, SensorValues::Text(s)) => !s.is_empty(),
            _ => false,
        }
    }
}
