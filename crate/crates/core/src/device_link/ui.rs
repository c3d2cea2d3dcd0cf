//! Structured UI snapshots: a forest of typed elements addressed by ordinal
//! paths such as `/1/0`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const MAX_UI_DEPTH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Banner,
    Card,
    Notification,
    Badge,
    Price,
    ModeFlag,
    Message,
}

impl ElementKind {
    pub const ALL: [ElementKind; 7] = [
        ElementKind::Banner,
        ElementKind::Card,
        ElementKind::Notification,
        ElementKind::Badge,
        ElementKind::Price,
        ElementKind::ModeFlag,
        ElementKind::Message,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ElementKind::Banner => "banner",
            ElementKind::Card => "card",
            ElementKind::Notification => "notification",
            ElementKind::Badge => "badge",
            ElementKind::Price => "price",
            ElementKind::ModeFlag => "mode_flag",
            ElementKind::Message => "message",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UiElement {
    pub kind: ElementKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<UiElement>,
}

impl UiElement {
    pub fn new(kind: ElementKind, text: impl Into<String>) -> Self {
        Self {
            kind,
            text: text.into(),
            attrs: BTreeMap::new(),
            children: Vec::new(),
        }
    }

    pub fn attr(mut self, key: &str, value: impl Into<String>) -> Self {
        self.attrs.insert(key.to_string(), value.into());
        self
    }

    pub fn child(mut self, child: UiElement) -> Self {
        self.children.push(child);
        self
    }

    /// Same kind, text and attributes; children are not compared.
    pub fn same_node(&self, other: &UiElement) -> bool {
        self.kind == other.kind && self.text == other.text && self.attrs == other.attrs
    }

    fn depth(&self) -> usize {
        1 + self.children.iter().map(UiElement::depth).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UiSnapshot {
    pub app_id: String,
    /// Simulated ms since the session epoch.
    pub t: u64,
    pub ui_state: Vec<UiElement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_image_ref: Option<String>,
}

impl UiSnapshot {
    pub fn new(app_id: impl Into<String>, t: u64, ui_state: Vec<UiElement>) -> Self {
        Self {
            app_id: app_id.into(),
            t,
            ui_state,
            raw_image_ref: None,
        }
    }

    /// Depth of the deepest element; 0 for an empty tree.
    pub fn depth(&self) -> usize {
        self.ui_state.iter().map(UiElement::depth).max().unwrap_or(0)
    }

    pub fn is_well_formed(&self) -> bool {
        !self.app_id.is_empty() && self.depth() <= MAX_UI_DEPTH
    }

    /// Every element with its ordinal path, depth first in document order.
    pub fn elements(&self) -> Vec<(String, &UiElement)> {
        let mut out = Vec::new();
        walk(&self.ui_state, String::new(), &mut out);
        out
    }

    pub fn find(&self, path: &str) -> Option<&UiElement> {
        let mut level = &self.ui_state;
        let mut found = None;
        for part in path.strip_prefix('/')?.split('/') {
            let i: usize = part.parse().ok()?;
            let el = level.get(i)?;
            found = Some(el);
            level = &el.children;
        }
        found
    }

    pub fn count_kind(&self, kind: ElementKind) -> usize {
        self.elements().iter().filter(|(_, e)| e.kind == kind).count()
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }
}

fn walk<'a>(level: &'a [UiElement], prefix: String, out: &mut Vec<(String, &'a UiElement)>) {
    for (i, el) in level.iter().enumerate() {
        let path = format!("{prefix}/{i}");
        out.push((path.clone(), el));
        walk(&el.children, path, out);
    }
}
