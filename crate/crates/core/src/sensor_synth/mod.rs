//! Seeded multi-channel sensor traces from a persona's sensor profile.

pub mod channel;
pub mod kernels;
pub mod route;
pub mod steps;
pub mod trace;

pub use channel::{Arity, Cadence, Channel, SensorFrame, SensorValues};
pub use kernels::{exposure_lux, outdoor_lux, sample_channel, NIGHT_LUX_THRESHOLD};
pub use route::{plan_gps_route, Route};
pub use trace::{synthesize_for_persona, synthesize_trace, SampleRates, TraceHeader, TracePlan, TraceWindow};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("invalid rate {hz} Hz for {channel}")]
    InvalidRate { channel: Channel, hz: f64 },
    #[error("invalid sensor profile: {0}")]
    InvalidProfile(String),
    #[error("{0} needs context the caller did not supply")]
    MissingContext(Channel),
    #[error("speed {speed_mps} m/s exceeds the profile maximum of {max_speed_mps} m/s")]
    SpeedViolatesProfile { speed_mps: f64, max_speed_mps: f64 },
    #[error("invalid route: {0}")]
    InvalidRoute(String),
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
