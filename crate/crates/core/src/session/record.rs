//! Append-only session record.
//!
//! Layout: one `header` line, one `event` line per event, and an `end` line
//! once the session has finished. Every line is flushed as it is written, so
//! a crash can only lose the line being written.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::SessionConfig;
use crate::analysis::Verdict;
use crate::device_link::{AppAction, UiSnapshot};
use crate::sensor_synth::Channel;

pub const RECORD_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Running,
    Completed,
    Aborted,
}

impl SessionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionStatus::Running => "running",
            SessionStatus::Completed => "completed",
            SessionStatus::Aborted => "aborted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffPair {
    Consecutive,
    BaselineLatest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub schema: u32,
    pub session_id: String,
    pub config_digest: String,
    pub config: SessionConfig,
    pub started_ms: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Launch {
        app_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        action: Option<AppAction>,
    },
    FrameSent {
        index: u64,
        channel: Channel,
    },
    SnapshotTaken {
        snapshot: UiSnapshot,
    },
    DiffEmitted {
        app_id: String,
        pair: DiffPair,
        /// Report file, relative to the session directory.
        report: String,
        verdict: Verdict,
    },
    Warning {
        message: String,
    },
    Error {
        message: String,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Launch { .. } => "launch",
            EventKind::FrameSent { .. } => "frame_sent",
            EventKind::SnapshotTaken { .. } => "snapshot_taken",
            EventKind::DiffEmitted { .. } => "diff_emitted",
            EventKind::Warning { .. } => "warning",
            EventKind::Error { .. } => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    /// Simulated ms since the session epoch.
    pub t: u64,
    /// Wall-clock ms since the session started.
    pub wall_ms: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordFooter {
    pub status: SessionStatus,
    pub ended_ms: i64,
    pub frames_sent: u64,
    pub frames_planned: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "line", rename_all = "snake_case")]
pub enum RecordLine {
    Header(RecordHeader),
    Event(SessionEvent),
    End(RecordFooter),
}

impl RecordLine {
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("record line serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub header: RecordHeader,
    pub events: Vec<SessionEvent>,
    pub footer: Option<RecordFooter>,
}

impl SessionRecord {
    pub fn session_id(&self) -> &str {
        &self.header.session_id
    }

    pub fn status(&self) -> SessionStatus {
        self.footer.map(|f| f.status).unwrap_or(SessionStatus::Running)
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &UiSnapshot> {
        self.events.iter().filter_map(|e| match &e.kind {
            EventKind::SnapshotTaken { snapshot } => Some(snapshot),
            _ => None,
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = RecordLine::Header(self.header.clone()).to_line();
        for e in &self.events {
            s.push_str(&RecordLine::Event(e.clone()).to_line());
        }
        if let Some(f) = self.footer {
            s.push_str(&RecordLine::End(f).to_line());
        }
        s
    }

    /// Copy with wall-clock fields zeroed, for run-to-run comparison.
    pub fn normalized(&self) -> Self {
        let mut r = self.clone();
        r.header.started_ms = 0;
        for e in &mut r.events {
            e.wall_ms = 0;
        }
        if let Some(f) = &mut r.footer {
            f.ended_ms = 0;
        }
        r
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("record line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Where a record file stopped short.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Truncation {
    /// 1-based line number of the incomplete line.
    pub line: usize,
    /// Byte offset at which the incomplete line starts.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedRecord {
    pub record: SessionRecord,
    pub truncation: Option<Truncation>,
}

pub fn persist_record(r: &SessionRecord, path: &Path) -> Result<(), RecordError> {
    std::fs::write(path, r.to_jsonl())?;
    Ok(())
}

/// Parses a record. A final line with no LF is treated as lost in a crash:
/// it is dropped and reported as a truncation rather than an error.
pub fn parse_record(bytes: &[u8]) -> Result<LoadedRecord, RecordError> {
    let mut header = None;
    let mut events = Vec::new();
    let mut footer = None;
    let mut truncation = None;
    let mut offset = 0;
    for (i, raw) in bytes.split_inclusive(|&b| b == b'\n').enumerate() {
        let lineno = i + 1;
        let parse_err = |message: String| RecordError::Parse { line: lineno, message };
        if raw.last() != Some(&b'\n') {
            truncation = Some(Truncation { line: lineno, offset });
            break;
        }
        offset += raw.len();
        let text = std::str::from_utf8(&raw[..raw.len() - 1]).map_err(|_| parse_err("invalid UTF-8".into()))?;
        let line: RecordLine = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        match (line, header.is_some(), footer.is_some()) {
            (RecordLine::Header(h), false, _) => {
                if h.schema != RECORD_SCHEMA {
                    return Err(parse_err(format!("unsupported record schema {}", h.schema)));
                }
                header = Some(h);
            }
            (RecordLine::Header(_), true, _) => return Err(parse_err("second header".into())),
            (_, false, _) => return Err(parse_err("missing header".into())),
            (_, true, true) => return Err(parse_err("content after end line".into())),
            (RecordLine::Event(e), true, false) => {
                if let Some(prev) = events.last() {
                    let prev: &SessionEvent = prev;
                    if e.t < prev.t || e.seq != prev.seq + 1 {
                        return Err(parse_err("events out of order".into()));
                    }
                }
                events.push(e);
            }
            (RecordLine::End(f), true, false) => footer = Some(f),
        }
    }
    let header = header.ok_or(RecordError::Parse {
        line: 1,
        message: "missing header".into(),
    })?;
    Ok(LoadedRecord {
        record: SessionRecord { header, events, footer },
        truncation,
    })
}

pub fn read_record<R: Read>(mut r: R) -> Result<LoadedRecord, RecordError> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    parse_record(&buf)
}

pub fn load_record(path: &Path) -> Result<LoadedRecord, RecordError> {
    read_record(File::open(path)?)
}

/// Appends lines to a record file, flushing after each one.
pub struct RecordWriter {
    file: File,
}

impl RecordWriter {
    pub fn create(path: &Path, header: &RecordHeader) -> Result<Self, RecordError> {
        let mut w = Self { file: File::create(path)? };
        w.append(&RecordLine::Header(header.clone()))?;
        Ok(w)
    }

    pub fn append(&mut self, line: &RecordLine) -> Result<(), RecordError> {
        self.file.write_all(line.to_line().as_bytes())?;
        self.file.flush()?;
        Ok(())
    }
}

/// Complete lines of a record file starting at byte `from`, with the offset
/// just past the last complete line. Used to tail a live record.
pub fn read_complete_lines(path: &Path, from: u64) -> Result<(Vec<String>, u64), RecordError> {
    use std::io::{Seek, SeekFrom};
    let mut f = File::open(path)?;
    f.seek(SeekFrom::Start(from))?;
    let mut reader = BufReader::new(f);
    let mut lines = Vec::new();
    let mut pos = from;
    loop {
        let mut buf = Vec::new();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 || buf.last() != Some(&b'\n') {
            break;
        }
        pos += n as u64;
        buf.pop();
        lines.push(String::from_utf8_lossy(&buf).into_owned());
    }
    Ok((lines, pos))
}
