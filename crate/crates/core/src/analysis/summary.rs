//! Snapshot summaries.
//!
//! The structural summarizer walks the UI tree and ranks elements by a fixed
//! salience table discounted by depth. The vision summarizer asks an LLM
//! client for the same shape and coerces its reply.

use serde::{Deserialize, Serialize};

use super::diff::SnapshotRef;
use crate::device_link::{ElementKind, UiSnapshot};
use crate::llm::{extract_json_object, LlmClient, LlmRequest};

pub const MAX_VISION_ATTEMPTS: u32 = 3;
const DEPTH_DISCOUNT: f64 = 0.9;
const NARRATIVE_ITEMS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummarizerId {
    StructuralStub,
    VisionLlm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryElement {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub path: String,
    pub kind: ElementKind,
    pub text: String,
    pub salience: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UiSummary {
    pub app_id: String,
    pub snapshot: SnapshotRef,
    pub elements: Vec<SummaryElement>,
    pub narrative: String,
    pub summarizer_id: SummarizerId,
}

#[derive(Debug, thiserror::Error)]
pub enum SummaryError {
    #[error("summarizer unavailable: {0}")]
    SummarizerUnavailable(String),
    #[error("could not coerce summarizer output after {attempts} attempts: {reason}")]
    CoercionFailure { attempts: u32, reason: String },
}

/// Base salience per element kind.
pub fn base_salience(kind: ElementKind) -> f64 {
    match kind {
        ElementKind::Notification => 1.0,
        ElementKind::Message => 0.9,
        ElementKind::Badge => 0.8,
        ElementKind::ModeFlag => 0.7,
        ElementKind::Price => 0.6,
        ElementKind::Banner => 0.5,
        ElementKind::Card => 0.3,
    }
}

fn depth_of(path: &str) -> i32 {
    path.matches('/').count() as i32
}

fn narrative(app_id: &str, elements: &[SummaryElement]) -> String {
    if elements.is_empty() {
        return "no visible content".into();
    }
    let top: Vec<String> = elements
        .iter()
        .take(NARRATIVE_ITEMS)
        .map(|e| format!("{} \"{}\"", e.kind.as_str(), e.text))
        .collect();
    format!("{app_id} shows {}", top.join("; "))
}

/// Most salient first; ties keep document order.
pub fn summarize_structural(s: &UiSnapshot) -> UiSummary {
    let mut elements: Vec<SummaryElement> = s
        .elements()
        .into_iter()
        .map(|(path, el)| SummaryElement {
            salience: base_salience(el.kind) * DEPTH_DISCOUNT.powi(depth_of(&path) - 1),
            path,
            kind: el.kind,
            text: el.text.clone(),
        })
        .collect();
    elements.sort_by(|a, b| b.salience.total_cmp(&a.salience));
    UiSummary {
        app_id: s.app_id.clone(),
        snapshot: SnapshotRef { t: s.t },
        narrative: narrative(&s.app_id, &elements),
        elements,
        summarizer_id: SummarizerId::StructuralStub,
    }
}

pub enum Summarizer<'a> {
    StructuralStub,
    VisionLlm(&'a dyn LlmClient),
}

const VISION_SYSTEM: &str = "You describe mobile app screenshots for a privacy audit. Reply with JSON only.";

/// Prompt sent with each screenshot.
pub fn vision_prompt(s: &UiSnapshot, feedback: Option<&str>) -> String {
    let mut p = format!(
        "Summarize the visible content of this {app} screenshot.\n\
         Return one JSON object: {{\"elements\": [{{\"kind\": one of banner|card|notification|badge|price|mode_flag|message, \
         \"text\": visible text, \"salience\": number in [0,1]}}], \"narrative\": one sentence}}.\n\
         List banners, product cards, notifications, badges, prices, day/night indicators and service messages.",
        app = s.app_id
    );
    if let Some(f) = feedback {
        p.push_str("\nYour previous reply was rejected: ");
        p.push_str(f);
    }
    p
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VisionReply {
    elements: Vec<VisionElement>,
    narrative: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VisionElement {
    kind: ElementKind,
    text: String,
    salience: f64,
}

fn coerce(s: &UiSnapshot, reply: &str) -> Result<UiSummary, String> {
    let json = extract_json_object(reply).ok_or("no JSON object in reply")?;
    let parsed: VisionReply = serde_json::from_str(json).map_err(|e| e.to_string())?;
    let mut elements = Vec::with_capacity(parsed.elements.len());
    for e in parsed.elements {
        if !(0.0..=1.0).contains(&e.salience) {
            return Err(format!("salience {} outside [0, 1]", e.salience));
        }
        elements.push(SummaryElement {
            path: String::new(),
            kind: e.kind,
            text: e.text,
            salience: e.salience,
        });
    }
    elements.sort_by(|a, b| b.salience.total_cmp(&a.salience));
    let narrative = if elements.is_empty() {
        "no visible content".to_string()
    } else {
        parsed.narrative
    };
    Ok(UiSummary {
        app_id: s.app_id.clone(),
        snapshot: SnapshotRef { t: s.t },
        elements,
        narrative,
        summarizer_id: SummarizerId::VisionLlm,
    })
}

pub fn summarize_snapshot(s: &UiSnapshot, summarizer: Summarizer<'_>) -> Result<UiSummary, SummaryError> {
    let client = match summarizer {
        Summarizer::StructuralStub => return Ok(summarize_structural(s)),
        Summarizer::VisionLlm(c) => c,
    };
    let Some(image) = &s.raw_image_ref else {
        return Err(SummaryError::SummarizerUnavailable("snapshot has no raw image reference".into()));
    };
    let mut feedback: Option<String> = None;
    for _ in 0..MAX_VISION_ATTEMPTS {
        let req = LlmRequest {
            system: VISION_SYSTEM.into(),
            prompt: vision_prompt(s, feedback.as_deref()),
            image_ref: Some(image.clone()),
        };
        match client.complete(&req) {
            Ok(text) => match coerce(s, &text) {
                Ok(summary) => return Ok(summary),
                Err(reason) => feedback = Some(reason),
            },
            Err(e) => feedback = Some(e.to_string()),
        }
    }
    Err(SummaryError::CoercionFailure {
        attempts: MAX_VISION_ATTEMPTS,
        reason: feedback.unwrap_or_default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device_link::UiElement;
    use crate::llm::ScriptedLlm;

    fn fitness() -> UiSnapshot {
        UiSnapshot::new(
            "fitness",
            42,
            vec![
                UiElement::new(ElementKind::Banner, "Daily activity"),
                UiElement::new(ElementKind::Card, "10250 steps today"),
                UiElement::new(ElementKind::Card, "Achievements").child(UiElement::new(ElementKind::Badge, "10k steps")),
            ],
        )
    }

    #[test]
    fn badge_ranks_first_without_notification() {
        let s = summarize_structural(&fitness());
        assert_eq!(s.elements[0].kind, ElementKind::Badge);
        assert_eq!(s, summarize_structural(&fitness()));
        assert!(s.narrative.starts_with("fitness shows badge"));
    }

    #[test]
    fn empty_tree() {
        let s = summarize_structural(&UiSnapshot::new("shop", 0, vec![]));
        assert!(s.elements.is_empty());
        assert_eq!(s.narrative, "no visible content");
    }

    #[test]
    fn vision_needs_image_and_retries() {
        let llm = ScriptedLlm::new([
            "not json",
            r#"{"elements":[{"kind":"badge","text":"10k","salience":0.9}],"narrative":"A badge."}"#,
        ]);
        assert!(matches!(
            summarize_snapshot(&fitness(), Summarizer::VisionLlm(&llm)),
            Err(SummaryError::SummarizerUnavailable(_))
        ));
        let mut snap = fitness();
        snap.raw_image_ref = Some("shot-1.png".into());
        let s = summarize_snapshot(&snap, Summarizer::VisionLlm(&llm)).unwrap();
        assert_eq!(s.summarizer_id, SummarizerId::VisionLlm);
        assert_eq!(s.elements.len(), 1);
        let bad = ScriptedLlm::new(["{}", "{}", "{}"]);
        assert!(matches!(
            summarize_snapshot(&snap, Summarizer::VisionLlm(&bad)),
            Err(SummaryError::CoercionFailure { attempts: 3, .. })
        ));
    }
}
