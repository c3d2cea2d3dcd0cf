//! Per-channel sampling kernels. Formulas are written out in
//! `docs/kernels.md`; the tests there and here evaluate them independently.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::channel::{Channel, SensorFrame, SensorValues};
use super::SynthError;
use crate::device_link::region::RegionTable;
use crate::geo::{haversine_m, GeoPoint};
use crate::persona::{ActivityLevel, LightCurve, SensorProfile};

pub const STANDARD_GRAVITY: f64 = 9.81;
/// Outdoor lux below which a reading counts as night.
pub const NIGHT_LUX_THRESHOLD: f64 = 10.0;

/// Outdoor illuminance at a fractional local hour: a raised-cosine hump
/// between sunrise and sunset on top of the night floor.
pub fn outdoor_lux(curve: &LightCurve, hour: f64) -> f64 {
    let day_len = (curve.sunset_hour - curve.sunrise_hour).rem_euclid(24.0);
    let since_sunrise = (hour - curve.sunrise_hour).rem_euclid(24.0);
    if day_len <= 0.0 || since_sunrise >= day_len {
        return curve.night_lux.max(0.0);
    }
    let phase = since_sunrise / day_len;
    let hump = (std::f64::consts::PI * phase).sin().powi(2);
    (curve.night_lux + (curve.peak_lux - curve.night_lux) * hump).max(0.0)
}

/// Light the phone actually sees: the indoor share of the day under room
/// lighting (lights off while asleep), the rest outdoors.
pub fn exposure_lux(curve: &LightCurve, hour: f64, asleep: bool) -> f64 {
    let outdoor = outdoor_lux(curve, hour);
    let f = curve.indoor_fraction.clamp(0.0, 1.0);
    if asleep {
        // Dark room; a little daylight leaks through the curtains.
        return (0.05 * (1.0 - f) * outdoor + curve.night_lux).max(0.0);
    }
    (f * curve.indoor_clamp_lux + (1.0 - f) * outdoor).max(0.0)
}

/// SplitMix64 finalizer, used to derive independent per-sample RNG states.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// RNG state for one sample of one channel.
pub fn sample_state(seed: u64, channel: Channel, t: u64) -> u64 {
    mix64(seed ^ mix64((channel.index() as u64) << 56 ^ t))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsFix {
    pub point: GeoPoint,
    pub accuracy_m: f64,
    pub speed_mps: f64,
}

/// Everything a kernel may look at besides the profile. Stateful quantities
/// (step count, accumulated drift time, position) are computed by the
/// synthesizer and passed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleInstant {
    /// Milliseconds since window start.
    pub t: u64,
    pub epoch_ms: i64,
    /// Fractional local hour in [0, 24).
    pub local_hour: f64,
    /// Hours spent above rest level since window start.
    pub active_hours: f64,
    pub steps: u64,
    pub gps: Option<GpsFix>,
}

impl SampleInstant {
    pub fn at(t: u64, epoch_ms: i64, local_hour: f64) -> Self {
        Self {
            t,
            epoch_ms,
            local_hour,
            active_hours: 0.0,
            steps: 0,
            gps: None,
        }
    }
}

fn level_at(profile: &SensorProfile, hour: f64) -> ActivityLevel {
    profile.activity_at((hour.floor() as i64).rem_euclid(24) as u8)
}

/// Noise variance at an hour: the level's variance scaled by how active the
/// hour is relative to the persona's peak (between 0.5x and 1x).
pub fn accel_variance_at(profile: &SensorProfile, hour: f64) -> f64 {
    let h = (hour.floor() as i64).rem_euclid(24) as usize;
    let peak = profile.active_hour_weights.iter().copied().fold(0.0, f64::max);
    let w = profile.active_hour_weights.get(h).copied().unwrap_or(0.0);
    let intensity = if peak > 0.0 { w / peak } else { 0.0 };
    profile
        .accel_variance_by_activity
        .get(level_at(profile, hour))
        * (0.5 + 0.5 * intensity)
}

fn tilt_sd(level: ActivityLevel) -> f64 {
    match level {
        ActivityLevel::Rest => 0.05,
        ActivityLevel::Light => 0.15,
        ActivityLevel::Moderate => 0.35,
        ActivityLevel::Vigorous => 0.6,
    }
}

fn normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sd).expect("finite sd").sample(rng)
}

/// Mobile country / network code for the region an anchor falls in.
fn mcc_mnc(p: GeoPoint) -> (f64, f64) {
    match RegionTable::bundled().lookup(p.lat, p.lon) {
        "US" => (310.0, 260.0),
        "CA" => (302.0, 610.0),
        "IT" => (222.0, 10.0),
        _ => (901.0, 1.0),
    }
}

/// Static cell table: one cell per anchor, id hashed from its coordinates.
pub fn cell_for(profile: &SensorProfile, position: GeoPoint) -> [f64; 3] {
    let anchor = if haversine_m(position, profile.home) <= haversine_m(position, profile.work) {
        profile.home
    } else {
        profile.work
    };
    let (mcc, mnc) = mcc_mnc(anchor);
    let id = mix64(anchor.lat.to_bits() ^ anchor.lon.to_bits().rotate_left(17)) & 0x0fff_ffff;
    [mcc, mnc, id as f64]
}

/// Samples one channel at one instant. Pure in its arguments.
pub fn sample_channel(
    profile: &SensorProfile,
    channel: Channel,
    at: &SampleInstant,
    rng_state: u64,
) -> Result<SensorFrame, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_state);
    let hour = at.local_hour;
    let level = level_at(profile, hour);
    let sd = accel_variance_at(profile, hour).sqrt();
    let values: Vec<f64> = match channel {
        Channel::Accelerometer => {
            let drift = profile.accel_drift_rate * at.active_hours;
            vec![
                normal(&mut rng, sd) + drift,
                normal(&mut rng, sd),
                STANDARD_GRAVITY + normal(&mut rng, sd),
            ]
        }
        Channel::LinearAcceleration => {
            let drift = profile.accel_drift_rate * at.active_hours;
            vec![normal(&mut rng, sd) + drift, normal(&mut rng, sd), normal(&mut rng, sd)]
        }
        Channel::Gyroscope => {
            let g = 0.3 * sd;
            vec![normal(&mut rng, g), normal(&mut rng, g), normal(&mut rng, g)]
        }
        Channel::Gravity => {
            let roll = normal(&mut rng, tilt_sd(level));
            let pitch = normal(&mut rng, tilt_sd(level));
            vec![
                STANDARD_GRAVITY * pitch.cos() * roll.sin(),
                -STANDARD_GRAVITY * pitch.sin(),
                STANDARD_GRAVITY * pitch.cos() * roll.cos(),
            ]
        }
        Channel::RotationVector => {
            let yaw: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let pitch = normal(&mut rng, tilt_sd(level));
            let roll = normal(&mut rng, tilt_sd(level));
            let (cy, sy) = ((yaw / 2.0).cos(), (yaw / 2.0).sin());
            let (cp, sp) = ((pitch / 2.0).cos(), (pitch / 2.0).sin());
            let (cr, sr) = ((roll / 2.0).cos(), (roll / 2.0).sin());
            let q = [
                sr * cp * cy - cr * sp * sy,
                cr * sp * cy + sr * cp * sy,
                cr * cp * sy - sr * sp * cy,
                cr * cp * cy + sr * sp * sy,
            ];
            let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
            q.iter().map(|c| c / n).collect()
        }
        Channel::Orientation => {
            let azimuth: f64 = rng.random_range(0.0..360.0);
            let pitch = normal(&mut rng, tilt_sd(level)).to_degrees().clamp(-180.0, 180.0);
            let roll = normal(&mut rng, tilt_sd(level)).to_degrees().clamp(-90.0, 90.0);
            vec![azimuth, pitch, roll]
        }
        Channel::MagneticField => {
            let magnitude = (profile.mag_field_ut + normal(&mut rng, 0.5)).clamp(20.0, 70.0);
            let yaw: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let incl = 60f64.to_radians();
            vec![
                magnitude * incl.cos() * yaw.sin(),
                magnitude * incl.cos() * yaw.cos(),
                -magnitude * incl.sin(),
            ]
        }
        Channel::AmbientLight => {
            let base = exposure_lux(&profile.light_curve, hour, profile.is_asleep(hour));
            vec![(base * (1.0 + normal(&mut rng, 0.03))).max(0.0)]
        }
        Channel::StepCounter => vec![at.steps as f64],
        Channel::StepDetector => vec![1.0],
        Channel::GpsLocation => {
            let fix = at.gps.ok_or(SynthError::MissingContext(channel))?;
            vec![fix.point.lat, fix.point.lon, fix.accuracy_m, fix.speed_mps]
        }
        Channel::CellTower => {
            let position = at.gps.map(|g| g.point).unwrap_or(profile.home);
            cell_for(profile, position).to_vec()
        }
        Channel::SystemTime => vec![at.epoch_ms as f64],
        Channel::TimeZone => {
            return Ok(SensorFrame {
                t: at.t,
                channel,
                values: SensorValues::Text(profile.timezone.clone()),
            })
        }
    };
    Ok(SensorFrame::vector(at.t, channel, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persona::{generate_persona, PersonaRequest};

    fn profile() -> SensorProfile {
        generate_persona(&PersonaRequest::template(0), None)
            .unwrap()
            .sensor_profile
    }

    fn curve() -> LightCurve {
        LightCurve {
            peak_lux: 30_000.0,
            sunrise_hour: 6.0,
            sunset_hour: 20.0,
            night_lux: 2.0,
            indoor_clamp_lux: 300.0,
            indoor_fraction: 0.7,
        }
    }

    /// Direct evaluation of the documented curve:
    /// lux(h) = night + (peak - night) * sin^2(pi * (h - sunrise) / (sunset - sunrise))
    /// inside [sunrise, sunset), night otherwise.
    fn reference_outdoor(h: f64) -> f64 {
        let (sunrise, sunset, peak, night) = (6.0, 20.0, 30_000.0, 2.0);
        if h < sunrise || h >= sunset {
            night
        } else {
            let x = std::f64::consts::PI * (h - sunrise) / (sunset - sunrise);
            night + (peak - night) * x.sin() * x.sin()
        }
    }

    #[test]
    fn light_curve_matches_reference() {
        for tenth in 0..240 {
            let h = f64::from(tenth) / 10.0;
            assert!((outdoor_lux(&curve(), h) - reference_outdoor(h)).abs() < 1e-6, "h={h}");
        }
        let at_one = outdoor_lux(&curve(), 1.0);
        assert!(at_one < NIGHT_LUX_THRESHOLD, "{at_one}");
        assert!((outdoor_lux(&curve(), 13.0) - 30_000.0).abs() < 1e-6);
    }

    #[test]
    fn wrapped_light_window() {
        let mut c = curve();
        c.sunrise_hour = 18.0;
        c.sunset_hour = 8.0;
        assert!(outdoor_lux(&c, 1.0) > 1000.0);
        assert!(outdoor_lux(&c, 13.0) < NIGHT_LUX_THRESHOLD);
    }

    #[test]
    fn magnetic_field_magnitude_in_range() {
        let p = profile();
        for t in 0..200u64 {
            let at = SampleInstant::at(t * 100, 0, 12.0);
            let f = sample_channel(&p, Channel::MagneticField, &at, sample_state(1, Channel::MagneticField, t)).unwrap();
            let v = f.values.as_vector().unwrap();
            let m = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            assert!((20.0..=70.0).contains(&m), "{m}");
        }
    }

    #[test]
    fn time_zone_passthrough() {
        let mut p = profile();
        p.timezone = "Europe/Rome".into();
        let f = sample_channel(&p, Channel::TimeZone, &SampleInstant::at(5, 0, 3.0), 9).unwrap();
        assert_eq!(f.values.as_text(), Some("Europe/Rome"));
    }

    #[test]
    fn rotation_vector_is_unit() {
        let p = profile();
        for t in 0..500u64 {
            let hour = (t % 24) as f64;
            let f = sample_channel(&p, Channel::RotationVector, &SampleInstant::at(t, 0, hour), mix64(t)).unwrap();
            let q = f.values.as_vector().unwrap();
            let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn kernels_are_pure() {
        let p = profile();
        let at = SampleInstant::at(1234, 1_700_000_000_000, 7.5);
        for c in Channel::ALL {
            if c == Channel::GpsLocation {
                assert!(matches!(sample_channel(&p, c, &at, 3), Err(SynthError::MissingContext(_))));
                continue;
            }
            let a = sample_channel(&p, c, &at, 77).unwrap();
            assert_eq!(a, sample_channel(&p, c, &at, 77).unwrap());
            assert!(a.arity_ok(), "{c}");
        }
    }

    #[test]
    fn sleeping_rooms_are_dark() {
        let c = curve();
        assert!(exposure_lux(&c, 2.0, true) < NIGHT_LUX_THRESHOLD);
        assert!(exposure_lux(&c, 22.0, false) > 100.0);
    }
}
