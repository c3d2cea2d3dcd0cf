//! Snapshot summaries and snapshot-pair diffs.

pub mod diff;
pub mod summary;

pub use diff::{diff_snapshots, tree_changes, Change, ChangeKind, DiffError, DiffReport, SnapshotRef, Stimuli, Verdict};
pub use summary::{summarize_snapshot, summarize_structural, Summarizer, SummaryError, UiSummary};
