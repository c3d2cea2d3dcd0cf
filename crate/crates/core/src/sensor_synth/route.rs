//! GPS routes: dwell and great-circle travel segments with per-anchor jitter.
//!
//! Jitter is a fixed offset per anchor coordinate (seeded), so a device that
//! sits still reports a constant position and a repeated anchor produces no
//! movement at all. Travel runs between the jittered endpoints at exactly the
//! mode speed, so sampled chord speeds never exceed it.

use chrono::{Duration, NaiveDate, TimeZone};
use chrono_tz::Tz;

use super::channel::{Channel, SensorFrame};
use super::kernels::{mix64, GpsFix};
use super::SynthError;
use crate::geo::{destination, haversine_m, interpolate, GeoPoint};
use crate::persona::SensorProfile;

pub const DEFAULT_GPS_ACCURACY_M: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Segment {
    Dwell {
        start: i64,
        at: GeoPoint,
    },
    Travel {
        start: i64,
        end: i64,
        from: GeoPoint,
        to: GeoPoint,
        speed_mps: f64,
    },
}

impl Segment {
    fn start(&self) -> i64 {
        match self {
            Segment::Dwell { start, .. } | Segment::Travel { start, .. } => *start,
        }
    }
}

/// Offset applied to an anchor, within 0.9 × accuracy of it.
pub fn jittered_anchor(anchor: GeoPoint, seed: u64, accuracy_m: f64) -> GeoPoint {
    let h = mix64(seed ^ anchor.lat.to_bits() ^ anchor.lon.to_bits().rotate_left(29));
    let u1 = (h >> 11) as f64 / (1u64 << 53) as f64;
    let u2 = (mix64(h) >> 11) as f64 / (1u64 << 53) as f64;
    let radius = 0.9 * accuracy_m * u1.sqrt();
    destination(anchor, u2 * std::f64::consts::TAU, radius)
}

/// A piecewise itinerary on an absolute millisecond axis.
#[derive(Debug, Clone)]
pub struct Route {
    segments: Vec<Segment>,
    accuracy_m: f64,
    seed: u64,
    cursor: i64,
    end: i64,
}

impl Route {
    pub fn starting_at(anchor: GeoPoint, t0: i64, seed: u64, accuracy_m: f64) -> Self {
        let at = jittered_anchor(anchor, seed, accuracy_m);
        Self {
            segments: vec![Segment::Dwell { start: t0, at }],
            accuracy_m,
            seed,
            cursor: t0,
            end: t0,
        }
    }

    fn position(&self) -> GeoPoint {
        match self.segments.last().expect("route has a segment") {
            Segment::Dwell { at, .. } => *at,
            Segment::Travel { to, .. } => *to,
        }
    }

    /// Stay put until `t`. A no-op if the route is already past `t`.
    pub fn dwell_until(&mut self, t: i64) {
        self.cursor = self.cursor.max(t);
        self.end = self.end.max(self.cursor);
    }

    /// Travel from the current position to `anchor` at `speed_mps`.
    pub fn travel_to(&mut self, anchor: GeoPoint, speed_mps: f64) {
        let from = self.position();
        let to = jittered_anchor(anchor, self.seed, self.accuracy_m);
        let distance = haversine_m(from, to);
        if distance < 1e-9 || speed_mps <= 0.0 {
            return;
        }
        let duration_ms = (distance / speed_mps * 1000.0).ceil() as i64;
        let start = self.cursor;
        let end = start + duration_ms.max(1);
        self.segments.push(Segment::Travel {
            start,
            end,
            from,
            to,
            speed_mps,
        });
        self.segments.push(Segment::Dwell { start: end, at: to });
        self.cursor = end;
        self.end = end;
    }

    pub fn end_ms(&self) -> i64 {
        self.end
    }

    pub fn position_at(&self, t: i64) -> GpsFix {
        let idx = self
            .segments
            .partition_point(|s| s.start() <= t)
            .saturating_sub(1);
        let (point, speed_mps) = match self.segments[idx] {
            Segment::Dwell { at, .. } => (at, 0.0),
            Segment::Travel {
                start,
                end,
                from,
                to,
                speed_mps,
            } => {
                if t >= end {
                    (to, 0.0)
                } else {
                    let f = (t - start) as f64 / (end - start) as f64;
                    (interpolate(from, to, f), speed_mps)
                }
            }
        };
        GpsFix {
            point,
            accuracy_m: self.accuracy_m,
            speed_mps,
        }
    }
}

/// Plans a route through `anchors`, dwelling `dwell_ms[i]` at anchor `i`,
/// and samples it every `period_ms` from t = 0 to the end of the last dwell.
pub fn plan_gps_route(
    anchors: &[GeoPoint],
    speed_mps: f64,
    max_speed_mps: f64,
    dwell_ms: &[u64],
    period_ms: u64,
    accuracy_m: f64,
    seed: u64,
) -> Result<Vec<SensorFrame>, SynthError> {
    if anchors.is_empty() {
        return Err(SynthError::InvalidRoute("at least one anchor is required".into()));
    }
    if anchors.iter().any(|a| !a.is_valid()) {
        return Err(SynthError::InvalidRoute("anchor out of range".into()));
    }
    if dwell_ms.len() != anchors.len() {
        return Err(SynthError::InvalidRoute("one dwell time per anchor".into()));
    }
    if period_ms == 0 || !(accuracy_m.is_finite() && accuracy_m >= 0.0) {
        return Err(SynthError::InvalidRoute("period must be positive, accuracy non-negative".into()));
    }
    if !(speed_mps.is_finite() && speed_mps > 0.0) {
        return Err(SynthError::InvalidRoute("speed must be positive".into()));
    }
    if speed_mps > max_speed_mps {
        return Err(SynthError::SpeedViolatesProfile {
            speed_mps,
            max_speed_mps,
        });
    }
    let mut route = Route::starting_at(anchors[0], 0, seed, accuracy_m);
    route.dwell_until(dwell_ms[0] as i64);
    for (anchor, dwell) in anchors.iter().zip(dwell_ms).skip(1) {
        route.travel_to(*anchor, speed_mps);
        let arrived = route.end_ms();
        route.dwell_until(arrived + *dwell as i64);
    }
    let end = route.end_ms().max(0) as u64;
    let mut frames = Vec::new();
    let mut t = 0u64;
    while t <= end {
        frames.push(gps_frame(t, route.position_at(t as i64)));
        t += period_ms;
    }
    Ok(frames)
}

pub(crate) fn gps_frame(t: u64, fix: GpsFix) -> SensorFrame {
    SensorFrame::vector(
        t,
        Channel::GpsLocation,
        vec![fix.point.lat, fix.point.lon, fix.accuracy_m, fix.speed_mps],
    )
}

fn local_instant(tz: &Tz, date: NaiveDate, hour: u8) -> i64 {
    let naive = date.and_hms_opt(u32::from(hour), 0, 0).expect("hour < 24");
    match tz.from_local_datetime(&naive).earliest() {
        Some(dt) => dt.timestamp_millis(),
        // Inside a DST gap: use the instant an hour later.
        None => tz
            .from_local_datetime(&(naive + Duration::hours(1)))
            .earliest()
            .map(|dt| dt.timestamp_millis())
            .unwrap_or_else(|| naive.and_utc().timestamp_millis()),
    }
}

/// Daily home → work → home itinerary covering `[start_ms, end_ms]` on the
/// absolute epoch axis.
pub fn commute_route(
    profile: &SensorProfile,
    tz: &Tz,
    start_ms: i64,
    end_ms: i64,
    seed: u64,
    accuracy_m: f64,
) -> Route {
    let first_day = tz
        .timestamp_millis_opt(start_ms)
        .single()
        .map(|d| d.date_naive())
        .unwrap_or_default()
        - Duration::days(1);
    let origin = local_instant(tz, first_day, 0);
    let mut route = Route::starting_at(profile.home, origin, seed, accuracy_m);
    let Some(plan) = profile.commute else {
        route.dwell_until(end_ms);
        return route;
    };
    let mut day = first_day;
    loop {
        let leave_home = local_instant(tz, day, plan.depart_home_hour);
        if leave_home > end_ms {
            break;
        }
        let back_day = if plan.depart_work_hour > plan.depart_home_hour {
            day
        } else {
            day + Duration::days(1)
        };
        let leave_work = local_instant(tz, back_day, plan.depart_work_hour);
        route.dwell_until(leave_home);
        route.travel_to(profile.work, plan.speed_mps);
        route.dwell_until(leave_work);
        route.travel_to(profile.home, plan.speed_mps);
        day += Duration::days(1);
    }
    route.dwell_until(end_ms);
    route
}
