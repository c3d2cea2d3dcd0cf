//! Session execution.
//!
//! All session activity is merged into one deadline-ordered queue: app
//! launches, in-app actions, trace frames and snapshot requests. At equal
//! simulated times launches go first, then actions, then frames, then
//! snapshots. Each item is sent once its wall-clock deadline
//! (`t / clock_scale`) has passed.

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::config::{SessionConfig, EMBEDDED_AGENT};
use super::record::{
    DiffPair, EventKind, RecordFooter, RecordHeader, RecordLine, RecordWriter, SessionEvent, SessionRecord,
    SessionStatus, RECORD_SCHEMA,
};
use super::schedule::{launch_times, schedule_snapshots};
use super::SessionError;
use crate::analysis::{diff_snapshots, DiffReport, Stimuli};
use crate::device_link::{
    read_frame, write_frame, AgentConfig, AppAction, AppLaunch, Hello, LinkError, Payload, ProtocolFrame, SimDevice, SnapshotReq,
    UiSnapshot, PROTOCOL_VERSION,
};

use crate::sensor_synth::{Channel, TracePlan};

pub const RECORD_FILE: &str = "record.jsonl";
pub const REPORTS_DIR: &str = "reports";

/// One request/response exchange with a device agent.
pub trait AgentLink: Send {
    fn exchange(&mut self, frame: &ProtocolFrame) -> Result<ProtocolFrame, LinkError>;
}

pub struct TcpLink {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl TcpLink {
    pub fn connect(endpoint: &str) -> Result<Self, SessionError> {
        let unreachable = |source: std::io::Error| SessionError::AgentUnreachable {
            endpoint: endpoint.to_string(),
            source,
        };
        let stream = TcpStream::connect(endpoint).map_err(unreachable)?;
        let _ = stream.set_nodelay(true);
        Ok(Self {
            reader: BufReader::new(stream.try_clone().map_err(unreachable)?),
            writer: BufWriter::new(stream),
        })
    }
}

impl AgentLink for TcpLink {
    fn exchange(&mut self, frame: &ProtocolFrame) -> Result<ProtocolFrame, LinkError> {
        write_frame(&mut self.writer, frame)?;
        read_frame(&mut self.reader)
    }
}

/// In-process agent; frames still go through the wire codec.
pub struct EmbeddedLink {
    device: SimDevice,
    closed: bool,
}

impl EmbeddedLink {
    pub fn new(config: &AgentConfig) -> Result<Self, SessionError> {
        Ok(Self {
            device: SimDevice::from_config(config).map_err(|e| SessionError::InvalidConfig(e.to_string()))?,
            closed: false,
        })
    }
}

impl AgentLink for EmbeddedLink {
    fn exchange(&mut self, frame: &ProtocolFrame) -> Result<ProtocolFrame, LinkError> {
        if self.closed {
            return Err(LinkError::Closed);
        }
        let wire = crate::device_link::encode_frame(frame);
        let decoded = crate::device_link::decode_frame(&wire)?;
        let (reply, keep) = self.device.handle(&decoded);
        self.closed = !keep;
        Ok(crate::device_link::decode_frame(&crate::device_link::encode_frame(&reply))?)
    }
}

/// Opens the link named by `config.agent`.
pub fn connect_agent(config: &SessionConfig) -> Result<Box<dyn AgentLink>, SessionError> {
    if config.agent == EMBEDDED_AGENT {
        let agent = AgentConfig {
            seed: config.seed,
            ..AgentConfig::default()
        };
        Ok(Box::new(EmbeddedLink::new(&agent)?))
    } else {
        Ok(Box::new(TcpLink::connect(&config.agent)?))
    }
}

/// Cooperative abort flag shared with whoever started the session.
#[derive(Debug, Clone, Default)]
pub struct SessionControl {
    abort: Arc<AtomicBool>,
}

impl SessionControl {
    pub fn abort(&self) {
        self.abort.store(true, Ordering::SeqCst);
    }

    pub fn is_aborted(&self) -> bool {
        self.abort.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Step {
    Launch(usize),
    Action(usize),
    Frame(usize),
    Snapshot(usize),
    TraceEnd,
}

fn now_ms() -> i64 {
    chrono::Utc::now().timestamp_millis()
}

pub fn session_dir(out_dir: &Path, config: &SessionConfig) -> PathBuf {
    out_dir.join(config.session_id())
}

struct Recorder {
    writer: RecordWriter,
    events: Vec<SessionEvent>,
    started: Instant,
    last_t: u64,
}

impl Recorder {
    fn push(&mut self, t: u64, kind: EventKind) -> Result<(), SessionError> {
        self.last_t = self.last_t.max(t);
        let event = SessionEvent {
            seq: self.events.len() as u64,
            t: self.last_t,
            wall_ms: self.started.elapsed().as_millis() as u64,
            kind,
        };
        self.writer.append(&RecordLine::Event(event.clone()))?;
        self.events.push(event);
        Ok(())
    }
}

fn handshake(link: &mut dyn AgentLink, config: &SessionConfig) -> Result<(), SessionError> {
    let hello = ProtocolFrame::new(Payload::Hello(Hello {
        role: "orchestrator".into(),
        versions: vec![PROTOCOL_VERSION],
        apps: config.app_suite.clone(),
    }));
    let reply = link
        .exchange(&hello)
        .map_err(|e| SessionError::Protocol(format!("handshake failed: {e}")))?;
    match reply.payload {
        Payload::Hello(h) => {
            if let Some(missing) = config.app_suite.iter().find(|a| !h.apps.contains(a)) {
                return Err(SessionError::Protocol(format!("agent does not host app {missing:?}")));
            }
            Ok(())
        }
        Payload::Error(e) => Err(SessionError::Protocol(format!("agent refused handshake: {}", e.message))),
        other => Err(SessionError::Protocol(format!(
            "expected hello, got {}",
            other.frame_type().as_str()
        ))),
    }
}

/// Runs a session against an open link, writing the record and diff reports
/// under `dir`. Mid-session failures end in an aborted record, not an error.
pub fn run_session(
    config: &SessionConfig,
    trace: &TracePlan,
    link: &mut dyn AgentLink,
    dir: &Path,
    control: &SessionControl,
) -> Result<SessionRecord, SessionError> {
    config.validate()?;
    let window_ms = config.duration_ms.unwrap_or(trace.window.duration_ms);
    let launches = launch_times(config);
    let snapshots = schedule_snapshots(config, window_ms)?;
    handshake(link, config)?;

    std::fs::create_dir_all(dir.join(REPORTS_DIR))?;
    let header = RecordHeader {
        schema: RECORD_SCHEMA,
        session_id: config.session_id(),
        config_digest: config.digest(),
        config: config.clone(),
        started_ms: now_ms(),
    };
    let mut rec = Recorder {
        writer: RecordWriter::create(&dir.join(RECORD_FILE), &header)?,
        events: Vec::new(),
        started: Instant::now(),
        last_t: 0,
    };

    let mut queue: Vec<(u64, Step)> = Vec::new();
    queue.extend(launches.iter().enumerate().map(|(i, (_, t))| (*t, Step::Launch(i))));
    queue.extend(config.actions.iter().enumerate().map(|(i, a)| (a.t, Step::Action(i))));
    let planned: Vec<usize> = (0..trace.frames.len()).filter(|&i| trace.frames[i].t <= window_ms).collect();
    queue.extend(planned.iter().map(|&i| (trace.frames[i].t, Step::Frame(i))));
    queue.extend(snapshots.iter().enumerate().map(|(i, s)| (s.t, Step::Snapshot(i))));
    if window_ms > trace.window.duration_ms {
        queue.push((trace.window.duration_ms, Step::TraceEnd));
    }
    queue.sort();

    let mut sent: Vec<(u64, Channel)> = Vec::new();
    let mut actions_done: Vec<(u64, String)> = Vec::new();
    let mut by_app: BTreeMap<String, Vec<UiSnapshot>> = BTreeMap::new();
    let mut report_count = 0usize;
    let mut failure: Option<(u64, String)> = None;

    let mut emit_diff = |rec: &mut Recorder,
                         t: u64,
                         before: &UiSnapshot,
                         after: &UiSnapshot,
                         pair: DiffPair,
                         sent: &[(u64, Channel)],
                         actions: &[(u64, String)]|
     -> Result<(), SessionError> {
        let report: DiffReport = diff_snapshots(before, after, Stimuli { frames: sent, actions })?;
        let name = format!(
            "{REPORTS_DIR}/{:04}-{}-{}.json",
            report_count,
            after.app_id,
            match pair {
                DiffPair::Consecutive => "consecutive",
                DiffPair::BaselineLatest => "baseline-latest",
            }
        );
        report_count += 1;
        report.save(&dir.join(&name))?;
        rec.push(
            t,
            EventKind::DiffEmitted {
                app_id: after.app_id.clone(),
                pair,
                report: name,
                verdict: report.verdict,
            },
        )
    };

    for (t, step) in queue {
        if control.is_aborted() {
            failure = Some((t, "aborted by operator".into()));
            break;
        }
        let deadline = Duration::from_secs_f64(t as f64 / 1000.0 / config.clock_scale);
        if let Some(wait) = deadline.checked_sub(rec.started.elapsed()) {
            std::thread::sleep(wait);
        }
        let outcome: Result<(), String> = match step {
            Step::Launch(i) | Step::Action(i) => {
                let (app_id, action): (String, Option<AppAction>) = match step {
                    Step::Launch(_) => (launches[i].0.clone(), None),
                    _ => (config.actions[i].app_id.clone(), Some(config.actions[i].action.clone())),
                };
                let frame = ProtocolFrame::new(Payload::AppLaunch(AppLaunch {
                    app_id: app_id.clone(),
                    action: action.clone(),
                }));
                match link.exchange(&frame) {
                    Ok(ProtocolFrame { payload: Payload::Ack(_), .. }) => {
                        if let Some(a) = &action {
                            actions_done.push((t, a.label()));
                        }
                        rec.push(t, EventKind::Launch { app_id, action })?;
                        Ok(())
                    }
                    Ok(other) => Err(unexpected(&other)),
                    Err(e) => Err(format!("agent link failed: {e}")),
                }
            }
            Step::Frame(i) => {
                let f = &trace.frames[i];
                match link.exchange(&ProtocolFrame::new(Payload::Spoof(f.clone()))) {
                    Ok(ProtocolFrame { payload: Payload::Ack(_), .. }) => {
                        sent.push((f.t, f.channel));
                        rec.push(t, EventKind::FrameSent { index: i as u64, channel: f.channel })?;
                        Ok(())
                    }
                    Ok(other) => Err(unexpected(&other)),
                    Err(e) => Err(format!("agent link failed: {e}")),
                }
            }
            Step::Snapshot(i) => {
                let plan = &snapshots[i];
                let req = ProtocolFrame::new(Payload::SnapshotReq(SnapshotReq { app_id: plan.app_id.clone(), t }));
                match link.exchange(&req) {
                    Ok(ProtocolFrame { payload: Payload::Snapshot(snap), .. }) if snap.app_id == plan.app_id => {
                        rec.push(t, EventKind::SnapshotTaken { snapshot: snap.clone() })?;
                        let history = by_app.entry(plan.app_id.clone()).or_default();
                        if let Some(prev) = history.last() {
                            emit_diff(&mut rec, t, prev, &snap, DiffPair::Consecutive, &sent, &actions_done)?;
                        }
                        history.push(snap);
                        Ok(())
                    }
                    Ok(other) => Err(unexpected(&other)),
                    Err(e) => Err(format!("agent link failed: {e}")),
                }
            }
            Step::TraceEnd => {
                rec.push(
                    t,
                    EventKind::Warning {
                        message: format!("trace exhausted at {t} ms, before the {window_ms} ms session window ended"),
                    },
                )?;
                Ok(())
            }
        };
        if let Err(message) = outcome {
            failure = Some((t, message));
            break;
        }
    }

    let status = match failure {
        Some((t, message)) => {
            rec.push(t, EventKind::Error { message })?;
            SessionStatus::Aborted
        }
        None => {
            let t = rec.last_t;
            for history in by_app.values() {
                if let (Some(first), Some(last)) = (history.first(), history.last()) {
                    if history.len() >= 2 {
                        emit_diff(&mut rec, t, first, last, DiffPair::BaselineLatest, &sent, &actions_done)?;
                    }
                }
            }
            SessionStatus::Completed
        }
    };
    let footer = RecordFooter {
        status,
        ended_ms: now_ms(),
        frames_sent: sent.len() as u64,
        frames_planned: planned.len() as u64,
    };
    rec.writer.append(&RecordLine::End(footer))?;
    Ok(SessionRecord {
        header,
        events: rec.events,
        footer: Some(footer),
    })
}

fn unexpected(frame: &ProtocolFrame) -> String {
    match &frame.payload {
        Payload::Error(e) => format!("agent error {}: {}", e.code, e.message),
        p => format!("unexpected {} reply", p.frame_type().as_str()),
    }
}

/// Loads the config's trace, connects to its agent and runs the session
/// into `out_dir/<session_id>/`.
pub fn run_configured_session(
    config: &SessionConfig,
    base_dir: &Path,
    out_dir: &Path,
    control: &SessionControl,
) -> Result<SessionRecord, SessionError> {
    config.validate()?;
    let trace = config.trace.resolve(&config.persona_id, config.seed, base_dir)?;
    let mut link = connect_agent(config)?;
    run_session(config, &trace, link.as_mut(), &session_dir(out_dir, config), control)
}

/// Every diff report a session wrote, in emission order.
pub fn load_reports(dir: &Path, record: &SessionRecord) -> Result<Vec<DiffReport>, SessionError> {
    let mut out = Vec::new();
    for e in &record.events {
        if let EventKind::DiffEmitted { report, .. } = &e.kind {
            out.push(DiffReport::load(&dir.join(report))?);
        }
    }
    Ok(out)
}
