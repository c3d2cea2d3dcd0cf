//! Snapshot diffing by ordinal path with channel attribution.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::device_link::{ElementKind, UiElement, UiSnapshot};
use crate::sensor_synth::Channel;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    Added,
    Removed,
    Modified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Change {
    pub path: String,
    pub change: ChangeKind,
    /// Element kind after the change (before it, for removals).
    pub element: ElementKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub before: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub after: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NoChange,
    Adapted,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::NoChange => "no_change",
            Verdict::Adapted => "adapted",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotRef {
    pub t: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffReport {
    pub schema: u32,
    pub app_id: String,
    pub before: SnapshotRef,
    pub after: SnapshotRef,
    pub changes: Vec<Change>,
    /// Channels with frames sent in `(before.t, after.t]`, in channel order.
    pub attribution: Vec<Channel>,
    /// In-app actions performed in the same interval.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub triggers: Vec<String>,
    pub verdict: Verdict,
}

#[derive(Debug, thiserror::Error)]
pub enum DiffError {
    #[error("cannot diff snapshots of different apps ({before} vs {after})")]
    AppMismatch { before: String, after: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Everything injected between two snapshots: `(t, channel)` for frames and
/// `(t, label)` for in-app actions.
#[derive(Debug, Clone, Copy, Default)]
pub struct Stimuli<'a> {
    pub frames: &'a [(u64, Channel)],
    pub actions: &'a [(u64, String)],
}

fn diff_level(before: &[UiElement], after: &[UiElement], prefix: &str, out: &mut Vec<Change>) {
    for i in 0..before.len().max(after.len()) {
        let path = format!("{prefix}/{i}");
        match (before.get(i), after.get(i)) {
            (Some(b), Some(a)) => {
                if !b.same_node(a) {
                    out.push(Change {
                        path: path.clone(),
                        change: ChangeKind::Modified,
                        element: a.kind,
                        before: Some(b.text.clone()),
                        after: Some(a.text.clone()),
                    });
                }
                diff_level(&b.children, &a.children, &path, out);
            }
            (Some(b), None) => subtree(b, &path, ChangeKind::Removed, out),
            (None, Some(a)) => subtree(a, &path, ChangeKind::Added, out),
            (None, None) => unreachable!(),
        }
    }
}

fn subtree(el: &UiElement, path: &str, kind: ChangeKind, out: &mut Vec<Change>) {
    let text = Some(el.text.clone());
    out.push(Change {
        path: path.to_string(),
        change: kind,
        element: el.kind,
        before: if kind == ChangeKind::Removed { text.clone() } else { None },
        after: if kind == ChangeKind::Added { text } else { None },
    });
    for (i, c) in el.children.iter().enumerate() {
        subtree(c, &format!("{path}/{i}"), kind, out);
    }
}

/// Changes from `before` to `after`, every affected path listed in document
/// order (an added subtree lists each of its nodes).
pub fn tree_changes(before: &UiSnapshot, after: &UiSnapshot) -> Vec<Change> {
    let mut out = Vec::new();
    diff_level(&before.ui_state, &after.ui_state, "", &mut out);
    out
}

pub fn diff_snapshots(before: &UiSnapshot, after: &UiSnapshot, stimuli: Stimuli<'_>) -> Result<DiffReport, DiffError> {
    if before.app_id != after.app_id {
        return Err(DiffError::AppMismatch {
            before: before.app_id.clone(),
            after: after.app_id.clone(),
        });
    }
    let (lo, hi) = (before.t, after.t);
    let in_window = |t: u64| t > lo && t <= hi;
    let attribution: BTreeSet<Channel> = stimuli
        .frames
        .iter()
        .filter(|(t, _)| in_window(*t))
        .map(|(_, c)| *c)
        .collect();
    let triggers: BTreeSet<String> = stimuli
        .actions
        .iter()
        .filter(|(t, _)| in_window(*t))
        .map(|(_, a)| a.clone())
        .collect();
    let changes = tree_changes(before, after);
    let verdict = if changes.is_empty() {
        Verdict::NoChange
    } else if attribution.is_empty() && triggers.is_empty() {
        Verdict::Inconclusive
    } else {
        Verdict::Adapted
    };
    Ok(DiffReport {
        schema: REPORT_SCHEMA,
        app_id: after.app_id.clone(),
        before: SnapshotRef { t: before.t },
        after: SnapshotRef { t: after.t },
        changes,
        attribution: attribution.into_iter().collect(),
        triggers: triggers.into_iter().collect(),
        verdict,
    })
}

impl DiffReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), DiffError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DiffError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// `(path, change)` pairs, handy for set comparisons.
    pub fn change_set(&self) -> BTreeMap<String, ChangeKind> {
        self.changes.iter().map(|c| (c.path.clone(), c.change)).collect()
    }

    pub fn attributes(&self, channel: Channel) -> bool {
        self.attribution.contains(&channel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weather(mode: &str, t: u64) -> UiSnapshot {
        UiSnapshot::new(
            "weather",
            t,
            vec![
                UiElement::new(ElementKind::ModeFlag, mode).attr("mode", mode),
                UiElement::new(ElementKind::Banner, "Forecast for United States"),
            ],
        )
    }

    #[test]
    fn night_mode_switch() {
        let frames = [(50, Channel::SystemTime), (200, Channel::GpsLocation)];
        let r = diff_snapshots(&weather("day", 10), &weather("night", 100), Stimuli { frames: &frames, actions: &[] }).unwrap();
        assert_eq!(r.changes.len(), 1);
        assert_eq!(r.changes[0].path, "/0");
        assert_eq!(r.changes[0].change, ChangeKind::Modified);
        assert_eq!(r.attribution, vec![Channel::SystemTime]);
        assert_eq!(r.verdict, Verdict::Adapted);
    }

    #[test]
    fn identity_and_mismatch() {
        let s = weather("day", 5);
        let r = diff_snapshots(&s, &s, Stimuli::default()).unwrap();
        assert_eq!(r.verdict, Verdict::NoChange);
        assert!(r.changes.is_empty());
        let mut other = s.clone();
        other.app_id = "shop".into();
        assert!(matches!(diff_snapshots(&s, &other, Stimuli::default()), Err(DiffError::AppMismatch { .. })));
    }

    #[test]
    fn unexplained_change_is_inconclusive() {
        let r = diff_snapshots(&weather("day", 0), &weather("night", 10), Stimuli::default()).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn added_subtree_lists_every_node() {
        let before = UiSnapshot::new("fitness", 0, vec![UiElement::new(ElementKind::Card, "A")]);
        let after = UiSnapshot::new(
            "fitness",
            1,
            vec![
                UiElement::new(ElementKind::Card, "A"),
                UiElement::new(ElementKind::Card, "B").child(UiElement::new(ElementKind::Badge, "10k")),
            ],
        );
        let r = diff_snapshots(&before, &after, Stimuli { frames: &[(1, Channel::StepCounter)], actions: &[] }).unwrap();
        let paths: Vec<_> = r.changes.iter().map(|c| c.path.as_str()).collect();
        assert_eq!(paths, ["/1", "/1/0"]);
    }
}
