//! Lifestyle → sensor-parameter mapping.
//!
//! The numbers in [`MappingTable::default`] are configuration, not
//! measurements. They only have to move in the documented direction
//! (more exercise ⇒ more steps, urban ⇒ more time indoors, night shift ⇒
//! rotated light window, ...). The full table is written out in
//! `docs/mapping.md`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    AccelVariance, ActivityLevel, CommuteMode, CommutePlan, Environment, HourWindow, IncomeBracket,
    LifestyleProfile, LightCurve, Location, PersonaError, SensorProfile, ShiftType,
};
use crate::geo::{destination, GeoPoint};

/// The demographic half of a persona, as consumed by the mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct Demographics {
    pub age: u32,
    pub gender: String,
    pub occupation: String,
    pub income_bracket: IncomeBracket,
    pub location: Location,
}

/// Step-target band: applies from `min_exercise_freq` upward until the next
/// band starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepBand {
    pub min_exercise_freq: u32,
    pub low: u32,
    pub high: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingTable {
    pub step_bands: Vec<StepBand>,
    /// Mobility (km/day) at which the step target reaches the top of its band.
    pub mobility_for_band_top_km: f64,
    pub base_accel_variance: AccelVariance,
    /// Variance multiplier gained per weekly workout (capped at 7).
    pub fitness_variance_gain: f64,
    pub base_drift_rate: f64,
    pub drift_per_workout: f64,
    pub base_cadence_hz: f64,
    pub cadence_per_workout: f64,
    pub cadence_loss_per_year_over_40: f64,
    pub peak_lux_urban: f64,
    pub peak_lux_rural: f64,
    pub urban_indoor_bonus: f64,
    pub sunrise_hour: f64,
    pub sunset_hour: f64,
    pub night_lux: f64,
    pub indoor_lux: f64,
    pub mag_field_urban_ut: f64,
    pub mag_field_rural_ut: f64,
    pub mag_jitter_ut: f64,
    pub awake_weight: f64,
    pub screen_weight: f64,
    pub exercise_weight: f64,
    pub exercise_weight_per_workout: f64,
    pub active_commute_weight: f64,
    pub passive_commute_weight: f64,
    /// Fraction of the commute budget actually spent moving.
    pub commute_fill: f64,
}

impl Default for MappingTable {
    fn default() -> Self {
        Self {
            step_bands: vec![
                StepBand { min_exercise_freq: 0, low: 2000, high: 5000 },
                StepBand { min_exercise_freq: 1, low: 4000, high: 7000 },
                StepBand { min_exercise_freq: 3, low: 6000, high: 10000 },
                StepBand { min_exercise_freq: 5, low: 9000, high: 14000 },
            ],
            mobility_for_band_top_km: 20.0,
            base_accel_variance: AccelVariance {
                rest: 0.003,
                light: 0.15,
                moderate: 1.2,
                vigorous: 4.0,
            },
            fitness_variance_gain: 0.08,
            base_drift_rate: 0.002,
            drift_per_workout: 0.004,
            base_cadence_hz: 1.55,
            cadence_per_workout: 0.04,
            cadence_loss_per_year_over_40: 0.004,
            peak_lux_urban: 25_000.0,
            peak_lux_rural: 40_000.0,
            urban_indoor_bonus: 0.1,
            sunrise_hour: 6.0,
            sunset_hour: 20.0,
            night_lux: 2.0,
            indoor_lux: 320.0,
            mag_field_urban_ut: 48.0,
            mag_field_rural_ut: 51.0,
            mag_jitter_ut: 4.0,
            awake_weight: 1.0,
            screen_weight: 0.8,
            exercise_weight: 1.0,
            exercise_weight_per_workout: 0.15,
            active_commute_weight: 0.6,
            passive_commute_weight: 0.3,
            commute_fill: 0.75,
        }
    }
}

/// Step-target band for a weekly exercise frequency.
pub fn step_band(table: &MappingTable, exercise_freq: u32) -> StepBand {
    table
        .step_bands
        .iter()
        .filter(|b| b.min_exercise_freq <= exercise_freq)
        .max_by_key(|b| b.min_exercise_freq)
        .copied()
        .unwrap_or(table.step_bands[0])
}

fn typical_speed_mps(mode: CommuteMode) -> f64 {
    match mode {
        CommuteMode::Walk => 1.4,
        CommuteMode::Bike => 4.5,
        CommuteMode::Transit => 9.0,
        CommuteMode::Car => 13.0,
        CommuteMode::None => 0.0,
    }
}

fn max_speed_for(mode: CommuteMode) -> f64 {
    match mode {
        CommuteMode::Walk | CommuteMode::None => 3.0,
        CommuteMode::Bike => 12.0,
        CommuteMode::Transit => 35.0,
        CommuteMode::Car => 40.0,
    }
}

fn check_lifestyle(l: &LifestyleProfile) -> Result<(), PersonaError> {
    let bad = |m: &str| Err(PersonaError::InvalidLifestyle(m.to_string()));
    if l.wake_hour >= 24 || l.sleep_hour >= 24 || l.wake_hour == l.sleep_hour {
        return bad("wake/sleep hours must be distinct local hours in [0,24)");
    }
    if !(l.daily_mobility_km.is_finite() && (0.0..=500.0).contains(&l.daily_mobility_km)) {
        return bad("daily_mobility_km must be in [0, 500]");
    }
    if !(l.indoor_fraction.is_finite() && (0.0..=1.0).contains(&l.indoor_fraction)) {
        return bad("indoor_fraction must be in [0, 1]");
    }
    if l
        .exercise_hours
        .iter()
        .chain(&l.screen_time_windows)
        .any(|w| !w.is_well_formed())
    {
        return bad("hour windows must have start != end, both < 24");
    }
    Ok(())
}

/// Maps a lifestyle onto sensor parameters. Pure in its inputs.
pub fn derive_sensor_profile(
    lifestyle: &LifestyleProfile,
    demographics: &Demographics,
    seed: u64,
    table: &MappingTable,
) -> Result<SensorProfile, PersonaError> {
    check_lifestyle(lifestyle)?;
    if demographics.location.timezone.parse::<chrono_tz::Tz>().is_err() {
        return Err(PersonaError::InvalidLifestyle(format!(
            "unknown timezone {}",
            demographics.location.timezone
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5e45_0a11_u64);
    let freq = lifestyle.exercise_freq_per_week;
    let workouts = f64::from(freq.min(7));

    // Steps: position inside the band from mobility plus a small seeded nudge.
    let band = step_band(table, freq);
    let mobility_frac = (lifestyle.daily_mobility_km / table.mobility_for_band_top_km).clamp(0.0, 1.0);
    let nudge: f64 = rng.random_range(0.0..1.0);
    let frac = (0.8 * mobility_frac + 0.2 * nudge).clamp(0.0, 1.0);
    let daily_step_target = band.low + (frac * f64::from(band.high - band.low)).round() as u32;

    let gain = 1.0 + table.fitness_variance_gain * workouts;
    let base = table.base_accel_variance;
    let accel_variance_by_activity = AccelVariance {
        rest: base.rest,
        light: base.light * gain,
        moderate: base.moderate * gain,
        vigorous: base.vigorous * gain,
    };
    let accel_drift_rate = table.base_drift_rate + table.drift_per_workout * workouts;

    let age_penalty =
        table.cadence_loss_per_year_over_40 * f64::from(demographics.age.saturating_sub(40));
    let walking_cadence_hz =
        (table.base_cadence_hz + table.cadence_per_workout * workouts - age_penalty).clamp(0.8, 2.6);

    let (peak_lux, indoor_fraction) = match lifestyle.environment {
        Environment::Urban => (
            table.peak_lux_urban,
            (lifestyle.indoor_fraction + table.urban_indoor_bonus).min(1.0),
        ),
        Environment::Rural => (table.peak_lux_rural, lifestyle.indoor_fraction),
    };
    let rotation = if lifestyle.shift_type == ShiftType::Night { 12.0 } else { 0.0 };
    let light_curve = LightCurve {
        peak_lux,
        sunrise_hour: (table.sunrise_hour + rotation) % 24.0,
        sunset_hour: (table.sunset_hour + rotation) % 24.0,
        night_lux: table.night_lux,
        indoor_clamp_lux: table.indoor_lux,
        indoor_fraction,
    };

    let mag_base = match lifestyle.environment {
        Environment::Urban => table.mag_field_urban_ut,
        Environment::Rural => table.mag_field_rural_ut,
    };
    let mag_field_ut =
        (mag_base + rng.random_range(-table.mag_jitter_ut..=table.mag_jitter_ut)).clamp(25.0, 65.0);

    let home = jitter_point(demographics.location.point(), &mut rng, 1500.0);
    let commute = commute_plan(lifestyle);
    let work = match &commute {
        Some(plan) => {
            let budget_m = plan.speed_mps * f64::from(lifestyle.commute_minutes) * 60.0 * table.commute_fill;
            let distance = budget_m.min(lifestyle.daily_mobility_km * 500.0);
            let bearing = rng.random_range(0.0..std::f64::consts::TAU);
            destination(home, bearing, distance)
        }
        None => home,
    };

    let (active_hour_weights, activity_by_hour) = hourly_pattern(lifestyle, commute.as_ref(), table);

    Ok(SensorProfile {
        accel_variance_by_activity,
        accel_drift_rate,
        daily_step_target,
        walking_cadence_hz,
        light_curve,
        mag_field_ut,
        max_speed_mps: max_speed_for(lifestyle.commute_mode),
        home,
        work,
        timezone: demographics.location.timezone.clone(),
        active_hour_weights,
        activity_by_hour,
        sleep_window: HourWindow::new(lifestyle.sleep_hour, lifestyle.wake_hour),
        commute,
    })
}

fn jitter_point(p: GeoPoint, rng: &mut ChaCha8Rng, radius_m: f64) -> GeoPoint {
    let bearing = rng.random_range(0.0..std::f64::consts::TAU);
    let r = radius_m * rng.random_range(0.0..1.0f64).sqrt();
    let q = destination(p, bearing, r);
    GeoPoint::new(round6(q.lat), round6(q.lon))
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Departure hours: day/rotating workers leave an hour after waking and
/// return nine hours later; night workers leave ten hours before bed and
/// return an hour before it.
fn commute_plan(l: &LifestyleProfile) -> Option<CommutePlan> {
    if l.commute_mode == CommuteMode::None || l.commute_minutes == 0 {
        return None;
    }
    let (out, back) = match l.shift_type {
        ShiftType::Night => ((l.sleep_hour + 14) % 24, (l.sleep_hour + 23) % 24),
        ShiftType::Day | ShiftType::Rotating => ((l.wake_hour + 1) % 24, (l.wake_hour + 10) % 24),
    };
    Some(CommutePlan {
        speed_mps: typical_speed_mps(l.commute_mode),
        depart_home_hour: out,
        depart_work_hour: back,
    })
}

fn hourly_pattern(
    l: &LifestyleProfile,
    commute: Option<&CommutePlan>,
    t: &MappingTable,
) -> (Vec<f64>, Vec<ActivityLevel>) {
    let workouts = f64::from(l.exercise_freq_per_week.min(7));
    let active_commute = matches!(l.commute_mode, CommuteMode::Walk | CommuteMode::Bike);
    let mut weights = vec![0.0; 24];
    let mut levels = vec![ActivityLevel::Rest; 24];
    for hour in 0..24u8 {
        let h = usize::from(hour);
        if !l.is_awake(hour) {
            continue;
        }
        let mut w = t.awake_weight;
        let mut level = ActivityLevel::Light;
        if l.screen_time_windows.iter().any(|win| win.contains(hour)) {
            w += t.screen_weight;
        }
        if let Some(plan) = commute {
            if hour == plan.depart_home_hour || hour == plan.depart_work_hour {
                if active_commute {
                    w += t.active_commute_weight;
                    level = ActivityLevel::Moderate;
                } else {
                    w += t.passive_commute_weight;
                }
            }
        }
        if l.exercise_hours.iter().any(|win| win.contains(hour)) {
            w += t.exercise_weight + t.exercise_weight_per_workout * workouts;
            level = ActivityLevel::Vigorous;
        }
        weights[h] = w;
        levels[h] = level;
    }
    (weights, levels)
}
