//! Audit sessions: launch apps on a device agent, stream a trace, take
//! scheduled snapshots and keep an append-only record of it all.

pub mod config;
pub mod record;
pub mod runner;
pub mod schedule;

pub use config::{ScheduledAction, SessionConfig, SnapshotPolicy, TraceScript, TraceSource, EMBEDDED_AGENT};
pub use record::{
    load_record, parse_record, persist_record, DiffPair, EventKind, LoadedRecord, RecordError, SessionEvent,
    SessionRecord, SessionStatus, Truncation,
};
pub use runner::{
    connect_agent, load_reports, run_configured_session, run_session, session_dir, AgentLink, EmbeddedLink,
    SessionControl, TcpLink, RECORD_FILE, REPORTS_DIR,
};
pub use schedule::{launch_times, schedule_snapshots, PlannedSnapshot, ScheduleError, SnapshotKind};

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("agent at {endpoint} is unreachable: {source}")]
    AgentUnreachable {
        endpoint: String,
        source: std::io::Error,
    },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Trace(#[from] crate::sensor_synth::SynthError),
    #[error(transparent)]
    Persona(#[from] crate::persona::PersonaError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Diff(#[from] crate::analysis::DiffError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
