//! Deterministic mock apps. Each app is a pure state machine over sensor
//! frames (and explicit in-app actions) plus a render function producing its
//! visible UI tree.

use std::fmt;
use std::str::FromStr;

use chrono::{TimeZone, Timelike};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use super::protocol::AppAction;
use super::region::{RegionTable, UNKNOWN_REGION};
use super::ui::{ElementKind, UiElement};
use crate::sensor_synth::{Channel, SensorFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppId {
    Fitness,
    Weather,
    Rideshare,
    Shop,
    SocialFeed,
}

impl AppId {
    pub const ALL: [AppId; 5] = [AppId::Fitness, AppId::Weather, AppId::Rideshare, AppId::Shop, AppId::SocialFeed];

    pub fn as_str(self) -> &'static str {
        match self {
            AppId::Fitness => "fitness",
            AppId::Weather => "weather",
            AppId::Rideshare => "rideshare",
            AppId::Shop => "shop",
            AppId::SocialFeed => "social_feed",
        }
    }

    /// Channels whose frames can change this app's state.
    pub fn consumes(self, channel: Channel) -> bool {
        match self {
            AppId::Fitness => channel == Channel::StepCounter,
            AppId::Weather => matches!(channel, Channel::SystemTime | Channel::TimeZone | Channel::GpsLocation),
            AppId::Rideshare => channel == Channel::GpsLocation,
            AppId::Shop | AppId::SocialFeed => false,
        }
    }
}

impl fmt::Display for AppId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AppId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AppId::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown app {s:?}"))
    }
}

/// Tunable mock-app behavior. Defaults reproduce the documented scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppRules {
    /// Step totals at which the fitness app awards a badge, ascending.
    pub badge_thresholds: Vec<u64>,
    /// Local hour at which the weather app switches to day mode.
    pub day_start_hour: u8,
    /// Local hour at which it switches to night mode.
    pub night_start_hour: u8,
    /// Region the device account is registered in before any spoofing.
    pub account_region: String,
    /// Zone the device clock uses before a time_zone frame arrives.
    pub default_timezone: String,
    /// Regions where the rideshare service operates.
    pub rideshare_regions: Vec<String>,
    /// Base fare in USD before currency conversion.
    pub base_fare_usd: f64,
}

impl Default for AppRules {
    fn default() -> Self {
        Self {
            badge_thresholds: vec![5_000, 10_000, 20_000],
            day_start_hour: 6,
            night_start_hour: 20,
            account_region: "US".into(),
            default_timezone: "America/Chicago".into(),
            rideshare_regions: vec!["US".into(), "CA".into()],
            base_fare_usd: 18.40,
        }
    }
}

impl AppRules {
    pub fn validate(&self) -> Result<(), String> {
        if self.badge_thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err("badge thresholds must be strictly ascending".into());
        }
        if self.day_start_hour > 23 || self.night_start_hour > 23 || self.day_start_hour == self.night_start_hour {
            return Err("day/night hours must be distinct hours in 0..24".into());
        }
        if self.default_timezone.parse::<Tz>().is_err() {
            return Err(format!("unknown time zone {:?}", self.default_timezone));
        }
        if !(self.base_fare_usd.is_finite() && self.base_fare_usd > 0.0) {
            return Err("base fare must be positive".into());
        }
        Ok(())
    }

    fn is_day(&self, local_hour: u32) -> bool {
        let (a, b) = (u32::from(self.day_start_hour), u32::from(self.night_start_hour));
        if a < b {
            (a..b).contains(&local_hour)
        } else {
            local_hour >= a || local_hour < b
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayMode {
    Day,
    Night,
}

impl DayMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DayMode::Day => "day",
            DayMode::Night => "night",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "app_id", rename_all = "snake_case")]
pub enum MockAppState {
    Fitness {
        step_total: u64,
        badges: Vec<u64>,
    },
    Weather {
        mode: DayMode,
        forecast_region: String,
        epoch_ms: Option<i64>,
        timezone: String,
    },
    Rideshare {
        region: String,
        currency: Option<String>,
        available: bool,
    },
    Shop {
        locale_region: String,
    },
    SocialFeed,
}

fn currency_for(regions: &RegionTable, region: &str) -> String {
    regions
        .get(region)
        .map(|r| r.currency.clone())
        .unwrap_or_else(|| "USD".into())
}

fn fx_from_usd(currency: &str) -> f64 {
    match currency {
        "CAD" => 1.36,
        "EUR" => 0.92,
        _ => 1.0,
    }
}

fn money(amount: f64, currency: &str) -> String {
    format!("{:.2} {currency}", amount * fx_from_usd(currency))
}

impl MockAppState {
    pub fn app_id(&self) -> AppId {
        match self {
            MockAppState::Fitness { .. } => AppId::Fitness,
            MockAppState::Weather { .. } => AppId::Weather,
            MockAppState::Rideshare { .. } => AppId::Rideshare,
            MockAppState::Shop { .. } => AppId::Shop,
            MockAppState::SocialFeed => AppId::SocialFeed,
        }
    }

    /// State before any frame has been applied.
    pub fn baseline(app: AppId, rules: &AppRules, regions: &RegionTable) -> Self {
        match app {
            AppId::Fitness => MockAppState::Fitness {
                step_total: 0,
                badges: Vec::new(),
            },
            AppId::Weather => MockAppState::Weather {
                mode: DayMode::Day,
                forecast_region: rules.account_region.clone(),
                epoch_ms: None,
                timezone: rules.default_timezone.clone(),
            },
            AppId::Rideshare => {
                let available = rules.rideshare_regions.contains(&rules.account_region);
                MockAppState::Rideshare {
                    region: rules.account_region.clone(),
                    currency: available.then(|| currency_for(regions, &rules.account_region)),
                    available,
                }
            }
            AppId::Shop => MockAppState::Shop {
                locale_region: rules.account_region.clone(),
            },
            AppId::SocialFeed => MockAppState::SocialFeed,
        }
    }

    fn weather_mode(rules: &AppRules, epoch_ms: Option<i64>, timezone: &str, current: DayMode) -> DayMode {
        let (Some(ms), Ok(tz)) = (epoch_ms, timezone.parse::<Tz>()) else {
            return current;
        };
        match tz.timestamp_millis_opt(ms).single() {
            Some(local) if rules.is_day(local.hour()) => DayMode::Day,
            Some(_) => DayMode::Night,
            None => current,
        }
    }

    /// Applies one sensor frame. Channels the app does not consume leave the
    /// state untouched.
    pub fn transition(&self, frame: &SensorFrame, rules: &AppRules, regions: &RegionTable) -> Self {
        let mut next = self.clone();
        match &mut next {
            MockAppState::Fitness { step_total, badges } => {
                if frame.channel == Channel::StepCounter {
                    if let Some(v) = frame.values.scalar() {
                        if v.is_finite() && v >= 0.0 {
                            *step_total = (*step_total).max(v as u64);
                        }
                    }
                    for &th in &rules.badge_thresholds {
                        if *step_total >= th && !badges.contains(&th) {
                            badges.push(th);
                        }
                    }
                }
            }
            MockAppState::Weather {
                mode,
                forecast_region,
                epoch_ms,
                timezone,
            } => match frame.channel {
                Channel::SystemTime => {
                    if let Some(v) = frame.values.scalar() {
                        *epoch_ms = Some(v as i64);
                        *mode = Self::weather_mode(rules, *epoch_ms, timezone, *mode);
                    }
                }
                Channel::TimeZone => {
                    if let Some(tz) = frame.values.as_text() {
                        if tz.parse::<Tz>().is_ok() {
                            *timezone = tz.to_string();
                            *mode = Self::weather_mode(rules, *epoch_ms, timezone, *mode);
                        }
                    }
                }
                Channel::GpsLocation => {
                    if let Some(v) = frame.values.as_vector() {
                        *forecast_region = regions.lookup(v[0], v[1]).to_string();
                    }
                }
                _ => {}
            },
            MockAppState::Rideshare {
                region,
                currency,
                available,
            } => {
                if frame.channel == Channel::GpsLocation {
                    if let Some(v) = frame.values.as_vector() {
                        *region = regions.lookup(v[0], v[1]).to_string();
                        *available = rules.rideshare_regions.contains(region);
                        *currency = available.then(|| currency_for(regions, region));
                    }
                }
            }
            MockAppState::Shop { .. } | MockAppState::SocialFeed => {}
        }
        next
    }

    /// Applies an explicit in-app action. Only the shop reacts.
    pub fn apply_action(&self, action: &AppAction, regions: &RegionTable) -> Self {
        match (self, action) {
            (MockAppState::Shop { .. }, AppAction::SelectRegion { region }) if regions.get(region).is_some() => {
                MockAppState::Shop {
                    locale_region: region.clone(),
                }
            }
            _ => self.clone(),
        }
    }

    pub fn render(&self, rules: &AppRules, regions: &RegionTable, seed: u64) -> Vec<UiElement> {
        match self {
            MockAppState::Fitness { step_total, badges } => {
                let mut achievements = UiElement::new(ElementKind::Card, "Achievements");
                for b in badges {
                    achievements = achievements.child(
                        UiElement::new(ElementKind::Badge, format!("{}k steps", b / 1000)).attr("threshold", b.to_string()),
                    );
                }
                let mut ui = vec![
                    UiElement::new(ElementKind::Banner, "Daily activity"),
                    UiElement::new(ElementKind::Card, format!("{step_total} steps today")).attr("steps", step_total.to_string()),
                    achievements,
                ];
                if let Some(top) = badges.iter().max() {
                    ui.push(
                        UiElement::new(
                            ElementKind::Notification,
                            format!("Congratulations! You passed {top} steps and earned a new badge."),
                        )
                        .attr("threshold", top.to_string()),
                    );
                }
                ui
            }
            MockAppState::Weather {
                mode,
                forecast_region,
                ..
            } => {
                let place = if forecast_region == UNKNOWN_REGION {
                    "your location"
                } else {
                    regions.display_name(forecast_region)
                };
                vec![
                    UiElement::new(ElementKind::ModeFlag, mode.as_str()).attr("mode", mode.as_str()),
                    UiElement::new(ElementKind::Banner, format!("Forecast for {place}")).attr("region", forecast_region.as_str()),
                    UiElement::new(ElementKind::Card, forecast_text(forecast_region, *mode))
                        .attr("region", forecast_region.as_str())
                        .attr("mode", mode.as_str()),
                ]
            }
            MockAppState::Rideshare {
                region,
                currency,
                available,
            } => {
                let eta = 2 + seed % 6;
                let mut ui = vec![UiElement::new(ElementKind::Banner, "Where to?")];
                match (available, currency) {
                    (true, Some(cur)) => {
                        ui.push(UiElement::new(ElementKind::Card, format!("Economy ride, {eta} min away")));
                        ui.push(
                            UiElement::new(ElementKind::Price, money(rules.base_fare_usd, cur)).attr("currency", cur.as_str()),
                        );
                    }
                    _ => {
                        let place = if region == UNKNOWN_REGION { "this area" } else { regions.display_name(region) };
                        ui.push(
                            UiElement::new(ElementKind::Message, format!("Service is not available in {place}"))
                                .attr("region", region.as_str()),
                        );
                    }
                }
                ui
            }
            MockAppState::Shop { locale_region } => {
                let cur = currency_for(regions, locale_region);
                let (greeting, product) = match locale_region.as_str() {
                    "IT" => ("Offerte del giorno", "Moka pot, 6 tazze"),
                    "CA" => ("Deals of the day", "Insulated winter mitts"),
                    _ => ("Deals of the day", "Stainless travel mug"),
                };
                vec![
                    UiElement::new(ElementKind::Banner, greeting).attr("locale", locale_region.as_str()),
                    UiElement::new(ElementKind::Card, product)
                        .child(UiElement::new(ElementKind::Price, money(24.0, &cur)).attr("currency", cur)),
                ]
            }
            MockAppState::SocialFeed => vec![
                UiElement::new(ElementKind::Banner, "Your feed"),
                UiElement::new(ElementKind::Card, "Posts from people you follow"),
            ],
        }
    }
}

fn forecast_text(region: &str, mode: DayMode) -> String {
    let base = match region {
        "US" => ("Sunny, high 27°C", "Clear night, low 16°C"),
        "CA" => ("Partly cloudy, high 21°C", "Cool night, low 9°C"),
        "IT" => ("Sunny, high 29°C", "Warm night, low 19°C"),
        _ => ("Forecast unavailable", "Forecast unavailable"),
    };
    match mode {
        DayMode::Day => base.0.to_string(),
        DayMode::Night => base.1.to_string(),
    }
}

/// Pure transition function over the bundled region table.
pub fn mock_transition(state: &MockAppState, frame: &SensorFrame, rules: &AppRules) -> MockAppState {
    state.transition(frame, rules, RegionTable::bundled())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor_synth::SensorValues;

    fn gps(lat: f64, lon: f64) -> SensorFrame {
        SensorFrame::vector(0, Channel::GpsLocation, vec![lat, lon, 5.0, 0.0])
    }

    fn base(app: AppId) -> MockAppState {
        MockAppState::baseline(app, &AppRules::default(), RegionTable::bundled())
    }

    #[test]
    fn rideshare_currency_and_fallback() {
        let r = AppRules::default();
        let toronto = mock_transition(&base(AppId::Rideshare), &gps(43.6532, -79.3832), &r);
        assert!(matches!(&toronto, MockAppState::Rideshare { currency: Some(c), available: true, .. } if c == "CAD"));
        let rome = mock_transition(&base(AppId::Rideshare), &gps(41.8902, 12.4922), &r);
        assert!(matches!(rome, MockAppState::Rideshare { available: false, currency: None, .. }));
        let ui = rome.render(&r, RegionTable::bundled(), 0);
        assert!(ui.iter().any(|e| e.kind == ElementKind::Message));
    }

    #[test]
    fn shop_ignores_gps() {
        let r = AppRules::default();
        let s = base(AppId::Shop);
        assert_eq!(mock_transition(&s, &gps(41.8902, 12.4922), &r), s);
        let it = s.apply_action(&AppAction::SelectRegion { region: "IT".into() }, RegionTable::bundled());
        assert_eq!(it, MockAppState::Shop { locale_region: "IT".into() });
    }

    #[test]
    fn fitness_is_monotone_and_awards_badges() {
        let r = AppRules::default();
        let s = MockAppState::Fitness { step_total: 100, badges: vec![] };
        let s2 = mock_transition(&s, &SensorFrame::vector(0, Channel::StepCounter, vec![90.0]), &r);
        assert_eq!(s2, s);
        let s3 = mock_transition(&s, &SensorFrame::vector(0, Channel::StepCounter, vec![10_250.0]), &r);
        assert_eq!(s3, MockAppState::Fitness { step_total: 10_250, badges: vec![5_000, 10_000] });
    }

    #[test]
    fn weather_night_in_rome() {
        let r = AppRules::default();
        let mut s = base(AppId::Weather);
        // 2024-06-12T22:30:00Z: 17:30 in Chicago, 00:30 in Rome.
        let t = SensorFrame::vector(0, Channel::SystemTime, vec![1_718_231_400_000.0]);
        s = mock_transition(&s, &t, &r);
        assert!(matches!(s, MockAppState::Weather { mode: DayMode::Day, .. }));
        let tz = SensorFrame { t: 0, channel: Channel::TimeZone, values: SensorValues::Text("Europe/Rome".into()) };
        s = mock_transition(&s, &tz, &r);
        s = mock_transition(&s, &gps(41.8902, 12.4922), &r);
        assert!(matches!(&s, MockAppState::Weather { mode: DayMode::Night, forecast_region, .. } if forecast_region == "IT"));
    }

    #[test]
    fn irrelevant_channels_are_identity() {
        let r = AppRules::default();
        for app in AppId::ALL {
            let s = base(app);
            for c in Channel::ALL {
                if app.consumes(c) {
                    continue;
                }
                let f = match c.arity() {
                    crate::sensor_synth::Arity::Numeric(n) => SensorFrame::vector(0, c, vec![45.0; n]),
                    crate::sensor_synth::Arity::Text => {
                        SensorFrame { t: 0, channel: c, values: SensorValues::Text("Asia/Tokyo".into()) }
                    }
                };
                assert_eq!(mock_transition(&s, &f, &r), s, "{app} {c}");
            }
        }
    }
}
