//! Persona generation: a deterministic template generator and an LLM-backed
//! generator that is coerced into the same schema and re-validated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::catalog::{
    archetype_for_occupation, lookup_place, Archetype, ARCHETYPES, FIRST_NAMES_F, FIRST_NAMES_M,
    LAST_NAMES,
};
use super::derive::{derive_sensor_profile, Demographics, MappingTable};
use super::validate::{validate_persona, Severity};
use super::{
    HourWindow, IncomeBracket, LifestyleProfile, Location, Persona, PersonaError, SensorProfile,
    ShiftType, PERSONA_SCHEMA,
};
use crate::llm::{extract_json_object, LlmClient, LlmRequest};

/// LLM attempts before giving up.
pub const MAX_LLM_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    #[default]
    Template,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessLevel {
    Sedentary,
    Low,
    Moderate,
    ModerateHigh,
    High,
}

impl FitnessLevel {
    pub fn exercise_freq(self) -> u32 {
        match self {
            FitnessLevel::Sedentary => 0,
            FitnessLevel::Low => 1,
            FitnessLevel::Moderate => 3,
            FitnessLevel::ModerateHigh => 5,
            FitnessLevel::High => 6,
        }
    }
}

impl std::str::FromStr for FitnessLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "sedentary" => Ok(FitnessLevel::Sedentary),
            "low" => Ok(FitnessLevel::Low),
            "moderate" => Ok(FitnessLevel::Moderate),
            "moderate_high" => Ok(FitnessLevel::ModerateHigh),
            "high" => Ok(FitnessLevel::High),
            other => Err(format!("unknown fitness level {other:?}")),
        }
    }
}

/// Archetype hints. Every field is optional; unset fields come from the
/// archetype selected by occupation or seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersonaHints {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occupation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitness: Option<FitnessLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<ShiftType>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaRequest {
    pub seed: u64,
    #[serde(default)]
    pub hints: PersonaHints,
    #[serde(default)]
    pub generator: GeneratorKind,
}

impl PersonaRequest {
    pub fn template(seed: u64) -> Self {
        Self {
            seed,
            hints: PersonaHints::default(),
            generator: GeneratorKind::Template,
        }
    }
}

fn check_hints(h: &PersonaHints) -> Result<(), PersonaError> {
    let bad = |m: String| Err(PersonaError::InvalidRequest(m));
    if let Some(age) = h.age {
        if !(13..=100).contains(&age) {
            return bad(format!("age {age} outside 13-100"));
        }
    }
    for (field, value) in [("name", &h.name), ("gender", &h.gender), ("occupation", &h.occupation)] {
        if matches!(value, Some(v) if v.trim().is_empty()) {
            return bad(format!("{field} hint is empty"));
        }
    }
    if let Some(loc) = &h.location {
        if lookup_place(loc).is_none() {
            return bad(format!("unknown location {loc:?}"));
        }
    }
    Ok(())
}

/// Generates a persona. The template path ignores `llm`; the LLM path
/// requires it.
pub fn generate_persona(
    request: &PersonaRequest,
    llm: Option<&dyn LlmClient>,
) -> Result<Persona, PersonaError> {
    check_hints(&request.hints)?;
    match request.generator {
        GeneratorKind::Template => {
            let persona = template_persona(request.seed, &request.hints)?;
            let report = validate_persona(&persona);
            if !report.ok {
                return Err(PersonaError::GenerationFailed {
                    attempts: 1,
                    reason: format!("template output failed validation: {:?}", report.rules_flagged()),
                });
            }
            Ok(persona)
        }
        GeneratorKind::Llm => {
            let llm = llm.ok_or_else(|| {
                PersonaError::InvalidRequest("llm generator selected but no client configured".into())
            })?;
            llm_persona(request, llm)
        }
    }
}

fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    out.trim_end_matches('-').to_string()
}

fn persona_id(name: &str, seed: u64) -> String {
    format!("{}-{seed}", slug(name))
}

fn location_for(place_name: &str) -> Location {
    let p = lookup_place(place_name).expect("catalog place");
    Location {
        place: p.name.to_string(),
        lat: p.lat,
        lon: p.lon,
        timezone: p.timezone.to_string(),
    }
}

const NIGHT_ROUTINE: usize = 3;

fn template_persona(seed: u64, hints: &PersonaHints) -> Result<Persona, PersonaError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let by_occupation = hints.occupation.as_deref().and_then(archetype_for_occupation);
    let base: &Archetype = match by_occupation {
        Some(a) => a,
        None => &ARCHETYPES[(seed % ARCHETYPES.len() as u64) as usize],
    };
    let custom_occupation = by_occupation.is_none() && hints.occupation.is_some();

    let gender = hints
        .gender
        .clone()
        .or_else(|| base.gender.filter(|_| !custom_occupation).map(str::to_owned))
        .unwrap_or_else(|| if rng.random_bool(0.5) { "female" } else { "male" }.to_string());
    let name = match (&hints.name, base.name) {
        (Some(n), _) => n.trim().to_string(),
        (None, Some(n)) if !custom_occupation => n.to_string(),
        _ => {
            let firsts = if gender == "male" { FIRST_NAMES_M } else { FIRST_NAMES_F };
            format!(
                "{} {}",
                firsts[rng.random_range(0..firsts.len())],
                LAST_NAMES[rng.random_range(0..LAST_NAMES.len())]
            )
        }
    };
    let age = hints.age.unwrap_or_else(|| {
        if base.name.is_some() && !custom_occupation {
            base.age
        } else {
            (base.age as i64 + rng.random_range(-5..=5)).clamp(18, 90) as u32
        }
    });
    let location = location_for(hints.location.as_deref().unwrap_or(base.place));
    let occupation = hints
        .occupation
        .as_deref()
        .map(|o| o.trim().to_string())
        .unwrap_or_else(|| base.occupation.to_string());

    let exercise_freq = hints.fitness.map(FitnessLevel::exercise_freq).unwrap_or(base.exercise_freq);
    let mut lifestyle = base.lifestyle(exercise_freq);
    if exercise_freq > 0 && lifestyle.exercise_hours.is_empty() {
        lifestyle.exercise_hours = vec![HourWindow::new(18, 19)];
    }
    if let Some(shift) = hints.shift {
        apply_shift(&mut lifestyle, shift);
    }
    lifestyle.environment = lookup_place(&location.place)
        .map(|p| p.environment)
        .unwrap_or(lifestyle.environment);
    if lifestyle.commute_minutes > 0 {
        let delta: i64 = rng.random_range(-4..=4);
        lifestyle.commute_minutes = (lifestyle.commute_minutes as i64 + delta).max(5) as u32;
    }
    lifestyle.daily_mobility_km = round2(lifestyle.daily_mobility_km * rng.random_range(0.85..1.15));
    lifestyle.indoor_fraction = round2((lifestyle.indoor_fraction + rng.random_range(-0.05..0.05)).clamp(0.0, 1.0));

    let demographics = Demographics {
        age,
        gender: gender.clone(),
        occupation: occupation.clone(),
        income_bracket: base.income,
        location: location.clone(),
    };
    let sensor_profile = derive_sensor_profile(&lifestyle, &demographics, seed, &MappingTable::default())?;
    let blurb = if custom_occupation {
        generic_blurb(&lifestyle)
    } else {
        base.blurb.to_string()
    };
    let summary = format!(
        "{name} is a {age}-year-old {occupation} in {} who {blurb}.",
        location.place
    );
    Ok(Persona {
        schema: PERSONA_SCHEMA,
        id: persona_id(&name, seed),
        name,
        age,
        gender,
        location,
        occupation,
        income_bracket: base.income,
        lifestyle,
        sensor_profile,
        summary,
        portrait_ref: None,
    })
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn apply_shift(l: &mut LifestyleProfile, shift: ShiftType) {
    if l.shift_type == shift {
        return;
    }
    match shift {
        ShiftType::Night => {
            let night = &ARCHETYPES[NIGHT_ROUTINE];
            l.wake_hour = night.wake;
            l.sleep_hour = night.sleep;
            l.screen_time_windows = night.screen.to_vec();
            if !l.exercise_hours.is_empty() {
                l.exercise_hours = night.exercise_hours.to_vec();
            }
        }
        ShiftType::Day if l.shift_type == ShiftType::Night => {
            l.wake_hour = 7;
            l.sleep_hour = 23;
            l.screen_time_windows = vec![HourWindow::new(12, 13), HourWindow::new(20, 22)];
            if !l.exercise_hours.is_empty() {
                l.exercise_hours = vec![HourWindow::new(18, 19)];
            }
        }
        _ => {}
    }
    l.shift_type = shift;
}

fn generic_blurb(l: &LifestyleProfile) -> String {
    let shift = match l.shift_type {
        ShiftType::Day => "day",
        ShiftType::Night => "night",
        ShiftType::Rotating => "rotating",
    };
    format!(
        "keeps a {shift}-shift routine, exercises {} times a week and commutes by {}",
        l.exercise_freq_per_week,
        serde_json::to_value(l.commute_mode)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default()
    )
}

/// What the model is asked to return. `sensor_profile` is optional: when the
/// model omits it the local mapping table derives one.
#[derive(Debug, Deserialize)]
struct PersonaDraft {
    name: String,
    age: u32,
    gender: String,
    location: Location,
    occupation: String,
    income_bracket: IncomeBracket,
    lifestyle: LifestyleProfile,
    summary: String,
    #[serde(default)]
    sensor_profile: Option<SensorProfile>,
}

/// Builds the structured generation prompt. Feedback from a rejected
/// previous attempt is appended verbatim.
pub fn prompt_template(hints: &PersonaHints, seed: u64, feedback: &[String]) -> LlmRequest {
    let hints_json = serde_json::to_string(hints).unwrap_or_else(|_| "{}".into());
    let mut prompt = format!(
        "Create one realistic synthetic smartphone user (variation seed {seed}).\n\
         Constraints from the operator: {hints_json}\n\n\
         Cover four categories:\n\
         1. Demographics: age, gender, location (place, lat, lon, IANA timezone), occupation, income_bracket \
            (low | lower_middle | middle | upper_middle | high).\n\
         2. Lifestyle patterns: commute_mode (walk | bike | transit | car | none), commute_minutes (one way), \
            daily_mobility_km, exercise_freq_per_week, exercise_hours, wake_hour, sleep_hour, screen_time_windows.\n\
         3. Sensor behaviour parameters: optional sensor_profile; omit it to let the sandbox derive one.\n\
         4. Environmental context: shift_type (day | night | rotating), environment (urban | rural), indoor_fraction in [0,1].\n\n\
         Hour windows are objects {{\"start\": h, \"end\": h}} with local hours 0-23 and start != end.\n\
         Keep the persona internally consistent: night-shift workers are asleep in the morning, \
         commutes must be physically possible for the chosen mode.\n\
         Reply with a single JSON object with keys: name, age, gender, location, occupation, income_bracket, \
         lifestyle, summary, sensor_profile (optional)."
    );
    if !feedback.is_empty() {
        prompt.push_str("\n\nYour previous answer was rejected:\n");
        for line in feedback {
            prompt.push_str("- ");
            prompt.push_str(line);
            prompt.push('\n');
        }
    }
    LlmRequest {
        system: "You generate synthetic personas for a mobile privacy research sandbox. Answer with JSON only."
            .to_string(),
        prompt,
        image_ref: None,
    }
}

fn coerce_draft(draft: PersonaDraft, request: &PersonaRequest) -> Result<Persona, String> {
    let hints = &request.hints;
    let mut location = draft.location;
    if let Some(place) = &hints.location {
        location = location_for(place);
    }
    let age = hints.age.unwrap_or(draft.age);
    let occupation = hints.occupation.clone().unwrap_or(draft.occupation);
    let demographics = Demographics {
        age,
        gender: draft.gender.clone(),
        occupation: occupation.clone(),
        income_bracket: draft.income_bracket,
        location: location.clone(),
    };
    let sensor_profile = match draft.sensor_profile {
        Some(sp) => sp,
        None => derive_sensor_profile(&draft.lifestyle, &demographics, request.seed, &MappingTable::default())
            .map_err(|e| e.to_string())?,
    };
    Ok(Persona {
        schema: PERSONA_SCHEMA,
        id: persona_id(&draft.name, request.seed),
        name: draft.name,
        age,
        gender: draft.gender,
        location,
        occupation,
        income_bracket: draft.income_bracket,
        lifestyle: draft.lifestyle,
        sensor_profile,
        summary: draft.summary,
        portrait_ref: None,
    })
}

fn llm_persona(request: &PersonaRequest, llm: &dyn LlmClient) -> Result<Persona, PersonaError> {
    let mut feedback: Vec<String> = Vec::new();
    let mut last_reason = String::new();
    for _ in 0..MAX_LLM_ATTEMPTS {
        let prompt = prompt_template(&request.hints, request.seed, &feedback);
        feedback.clear();
        let reply = match llm.complete(&prompt) {
            Ok(r) => r,
            Err(e) => {
                last_reason = e.to_string();
                continue;
            }
        };
        let Some(json) = extract_json_object(&reply) else {
            last_reason = "reply contained no JSON object".into();
            feedback.push(last_reason.clone());
            continue;
        };
        let draft: PersonaDraft = match serde_json::from_str(json) {
            Ok(d) => d,
            Err(e) => {
                last_reason = format!("reply did not match the persona schema: {e}");
                feedback.push(last_reason.clone());
                continue;
            }
        };
        let persona = match coerce_draft(draft, request) {
            Ok(p) => p,
            Err(e) => {
                last_reason = e;
                feedback.push(last_reason.clone());
                continue;
            }
        };
        let report = validate_persona(&persona);
        if report.ok {
            return Ok(persona);
        }
        for v in report.violations.iter().filter(|v| v.severity == Severity::Error) {
            feedback.push(format!("{}: {}", v.rule_id, v.message));
        }
        last_reason = format!("validation failed: {:?}", report.rules_flagged());
    }
    Err(PersonaError::GenerationFailed {
        attempts: MAX_LLM_ATTEMPTS,
        reason: last_reason,
    })
}
