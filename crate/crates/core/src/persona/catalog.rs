//! Built-in places and occupation archetypes for the template generator.

use super::{CommuteMode, Environment, HourWindow, IncomeBracket, LifestyleProfile, ShiftType};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Place {
    pub name: &'static str,
    pub lat: f64,
    pub lon: f64,
    pub timezone: &'static str,
    pub environment: Environment,
}

pub const PLACES: &[Place] = &[
    place("Chicago", 41.8781, -87.6298, "America/Chicago", Environment::Urban),
    place("Austin", 30.2672, -97.7431, "America/Chicago", Environment::Urban),
    place("Boston", 42.3601, -71.0589, "America/New_York", Environment::Urban),
    place("New York", 40.7128, -74.0060, "America/New_York", Environment::Urban),
    place("Los Angeles", 34.0522, -118.2437, "America/Los_Angeles", Environment::Urban),
    place("Denver", 39.7392, -104.9903, "America/Denver", Environment::Urban),
    place("Ames", 42.0308, -93.6319, "America/Chicago", Environment::Rural),
    place("Toronto", 43.6532, -79.3832, "America/Toronto", Environment::Urban),
    place("Vancouver", 49.2827, -123.1207, "America/Vancouver", Environment::Urban),
    place("Rome", 41.8902, 12.4922, "Europe/Rome", Environment::Urban),
    place("Milan", 45.4642, 9.1900, "Europe/Rome", Environment::Urban),
];

const fn place(
    name: &'static str,
    lat: f64,
    lon: f64,
    timezone: &'static str,
    environment: Environment,
) -> Place {
    Place {
        name,
        lat,
        lon,
        timezone,
        environment,
    }
}

/// Case-insensitive lookup by place name.
pub fn lookup_place(name: &str) -> Option<&'static Place> {
    let needle = name.trim();
    PLACES.iter().find(|p| p.name.eq_ignore_ascii_case(needle))
}

/// A lifestyle template keyed by occupation. Named archetypes carry a fixed
/// identity; the rest draw names from the pools below.
#[derive(Debug, Clone, Copy)]
pub struct Archetype {
    pub occupation: &'static str,
    pub name: Option<&'static str>,
    pub gender: Option<&'static str>,
    pub age: u32,
    pub place: &'static str,
    pub income: IncomeBracket,
    pub exercise_freq: u32,
    pub shift: ShiftType,
    pub commute_mode: CommuteMode,
    pub commute_minutes: u32,
    pub mobility_km: f64,
    pub exercise_hours: &'static [HourWindow],
    pub wake: u8,
    pub sleep: u8,
    pub screen: &'static [HourWindow],
    pub indoor_fraction: f64,
    pub blurb: &'static str,
}

impl Archetype {
    pub fn lifestyle(&self, exercise_freq: u32) -> LifestyleProfile {
        let environment = lookup_place(self.place)
            .map(|p| p.environment)
            .unwrap_or(Environment::Urban);
        LifestyleProfile {
            commute_mode: self.commute_mode,
            commute_minutes: self.commute_minutes,
            daily_mobility_km: self.mobility_km,
            exercise_freq_per_week: exercise_freq,
            exercise_hours: if exercise_freq == 0 {
                Vec::new()
            } else {
                self.exercise_hours.to_vec()
            },
            wake_hour: self.wake,
            sleep_hour: self.sleep,
            screen_time_windows: self.screen.to_vec(),
            shift_type: self.shift,
            environment,
            indoor_fraction: self.indoor_fraction,
        }
    }
}

const fn w(start: u8, end: u8) -> HourWindow {
    HourWindow::new(start, end)
}

pub const ARCHETYPES: &[Archetype] = &[
    Archetype {
        occupation: "community organizer",
        name: Some("Lila Rodriguez"),
        gender: Some("female"),
        age: 27,
        place: "Chicago",
        income: IncomeBracket::LowerMiddle,
        exercise_freq: 5,
        shift: ShiftType::Day,
        commute_mode: CommuteMode::Bike,
        commute_minutes: 25,
        mobility_km: 12.0,
        exercise_hours: &[w(6, 7), w(19, 20)],
        wake: 6,
        sleep: 22,
        screen: &[w(12, 13), w(20, 22)],
        indoor_fraction: 0.6,
        blurb: "tracks morning runs, bikes or walks to work, practices yoga in the evening and browses sustainable-living content and local farmers' markets",
    },
    Archetype {
        occupation: "software developer",
        name: Some("Carlos Ramirez"),
        gender: Some("male"),
        age: 25,
        place: "Austin",
        income: IncomeBracket::UpperMiddle,
        exercise_freq: 0,
        shift: ShiftType::Day,
        commute_mode: CommuteMode::Car,
        commute_minutes: 20,
        mobility_km: 15.0,
        exercise_hours: &[],
        wake: 9,
        sleep: 1,
        screen: &[w(13, 14), w(19, 1)],
        indoor_fraction: 0.92,
        blurb: "spends long hours at a screen, rarely exercises and is most active on the phone late in the evening",
    },
    Archetype {
        occupation: "nurse",
        name: Some("Linda Johnson"),
        gender: Some("female"),
        age: 45,
        place: "Boston",
        income: IncomeBracket::Middle,
        exercise_freq: 3,
        shift: ShiftType::Day,
        commute_mode: CommuteMode::Car,
        commute_minutes: 25,
        mobility_km: 20.0,
        exercise_hours: &[w(5, 6)],
        wake: 5,
        sleep: 21,
        screen: &[w(12, 13), w(18, 20)],
        indoor_fraction: 0.7,
        blurb: "starts early with a morning workout, works hospital day shifts and uses the phone mostly during daytime breaks",
    },
    Archetype {
        occupation: "warehouse associate",
        name: None,
        gender: None,
        age: 34,
        place: "Denver",
        income: IncomeBracket::LowerMiddle,
        exercise_freq: 2,
        shift: ShiftType::Night,
        commute_mode: CommuteMode::Car,
        commute_minutes: 20,
        mobility_km: 18.0,
        exercise_hours: &[w(15, 16)],
        wake: 14,
        sleep: 5,
        screen: &[w(16, 18), w(1, 2)],
        indoor_fraction: 0.9,
        blurb: "works overnight shifts on the warehouse floor and sleeps through the morning",
    },
    Archetype {
        occupation: "bakery owner",
        name: None,
        gender: None,
        age: 41,
        place: "Milan",
        income: IncomeBracket::Middle,
        exercise_freq: 2,
        shift: ShiftType::Day,
        commute_mode: CommuteMode::Walk,
        commute_minutes: 15,
        mobility_km: 6.0,
        exercise_hours: &[w(16, 17)],
        wake: 4,
        sleep: 20,
        screen: &[w(14, 15), w(18, 19)],
        indoor_fraction: 0.8,
        blurb: "is up before dawn for early deliveries and closes the shop in the afternoon",
    },
    Archetype {
        occupation: "graduate student",
        name: None,
        gender: None,
        age: 24,
        place: "Toronto",
        income: IncomeBracket::Low,
        exercise_freq: 3,
        shift: ShiftType::Day,
        commute_mode: CommuteMode::Bike,
        commute_minutes: 15,
        mobility_km: 8.0,
        exercise_hours: &[w(17, 18)],
        wake: 8,
        sleep: 1,
        screen: &[w(11, 12), w(21, 1)],
        indoor_fraction: 0.8,
        blurb: "bikes to campus, studies late and streams music most evenings",
    },
    Archetype {
        occupation: "delivery driver",
        name: None,
        gender: None,
        age: 38,
        place: "Los Angeles",
        income: IncomeBracket::LowerMiddle,
        exercise_freq: 1,
        shift: ShiftType::Rotating,
        commute_mode: CommuteMode::Car,
        commute_minutes: 30,
        mobility_km: 120.0,
        exercise_hours: &[w(18, 19)],
        wake: 7,
        sleep: 23,
        screen: &[w(13, 14), w(20, 22)],
        indoor_fraction: 0.5,
        blurb: "drives rotating routes across the city and checks navigation and ride apps constantly",
    },
    Archetype {
        occupation: "retired teacher",
        name: None,
        gender: None,
        age: 68,
        place: "Ames",
        income: IncomeBracket::Middle,
        exercise_freq: 4,
        shift: ShiftType::Day,
        commute_mode: CommuteMode::None,
        commute_minutes: 0,
        mobility_km: 4.0,
        exercise_hours: &[w(8, 9)],
        wake: 6,
        sleep: 21,
        screen: &[w(10, 11), w(19, 20)],
        indoor_fraction: 0.65,
        blurb: "takes long morning walks on country roads and reads the news on a tablet in the evening",
    },
];

pub(crate) const FIRST_NAMES_F: &[&str] = &[
    "Maya", "Aisha", "Sofia", "Grace", "Elena", "Priya", "Hannah", "Chloe", "Nadia", "Rosa",
];
pub(crate) const FIRST_NAMES_M: &[&str] = &[
    "Marcus", "Daniel", "Omar", "Kenji", "Luca", "Samuel", "Andre", "Victor", "Ethan", "Ravi",
];
pub(crate) const LAST_NAMES: &[&str] = &[
    "Nguyen", "Okafor", "Bianchi", "Kowalski", "Patel", "Hughes", "Moreau", "Tanaka", "Silva",
    "Carter",
];

pub fn archetype_for_occupation(occupation: &str) -> Option<&'static Archetype> {
    let needle = occupation.trim();
    ARCHETYPES
        .iter()
        .find(|a| a.occupation.eq_ignore_ascii_case(needle))
}
