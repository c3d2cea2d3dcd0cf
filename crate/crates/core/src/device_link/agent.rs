//! The simulated device agent.
//!
//! [`SimDevice`] is the protocol state machine: it answers one incoming frame
//! with one outgoing frame. [`run_sim_agent`] serves it over TCP, one
//! orchestrator connection at a time, with fresh device state per connection.

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};

use super::apps::{AppId, AppRules, MockAppState};
use super::protocol::{read_frame, write_frame, Hello, LinkError, Payload, ProtocolFrame, PROTOCOL_VERSION};
use super::region::{RegionTable, RegionTableError};
use super::ui::UiSnapshot;
use crate::sensor_synth::{Channel, SensorFrame};

fn default_endpoint() -> String {
    "127.0.0.1:7878".into()
}

fn default_apps() -> Vec<AppId> {
    AppId::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    #[serde(default = "default_endpoint")]
    pub endpoint: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_apps")]
    pub apps: Vec<AppId>,
    #[serde(default)]
    pub rules: AppRules,
    /// Alternative region polygon table; the bundled one when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_table: Option<PathBuf>,
    /// Fault injection: drop each connection after this many spoof frames.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_after_frames: Option<u64>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            endpoint: default_endpoint(),
            seed: 0,
            apps: default_apps(),
            rules: AppRules::default(),
            region_table: None,
            drop_after_frames: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("cannot bind {endpoint}: {source}")]
    Bind {
        endpoint: String,
        source: std::io::Error,
    },
    #[error("invalid agent config: {0}")]
    Config(String),
    #[error(transparent)]
    Regions(#[from] RegionTableError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl AgentConfig {
    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let mut cfg: AgentConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if let (Some(table), Some(dir)) = (&cfg.region_table, path.parent()) {
            if table.is_relative() {
                cfg.region_table = Some(dir.join(table));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.apps.is_empty() {
            return Err(AgentError::Config("at least one app must be installed".into()));
        }
        self.rules.validate().map_err(AgentError::Config)
    }

    pub fn regions(&self) -> Result<Arc<RegionTable>, AgentError> {
        Ok(Arc::new(match &self.region_table {
            Some(p) => RegionTable::load(p)?,
            None => RegionTable::bundled().clone(),
        }))
    }
}

/// Device-wide context last set by spoof frames.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SensorRegistry {
    pub latest: BTreeMap<Channel, SensorFrame>,
    pub frames_applied: u64,
}

/// Protocol state machine for one connection.
#[derive(Debug, Clone)]
pub struct SimDevice {
    seed: u64,
    rules: AppRules,
    regions: Arc<RegionTable>,
    apps: BTreeMap<AppId, MockAppState>,
    registry: SensorRegistry,
    greeted: bool,
    foreground: Option<AppId>,
}

impl SimDevice {
    pub fn new(config: &AgentConfig, regions: Arc<RegionTable>) -> Self {
        let apps = config
            .apps
            .iter()
            .map(|&a| (a, MockAppState::baseline(a, &config.rules, &regions)))
            .collect();
        Self {
            seed: config.seed,
            rules: config.rules.clone(),
            regions,
            apps,
            registry: SensorRegistry::default(),
            greeted: false,
            foreground: None,
        }
    }

    pub fn from_config(config: &AgentConfig) -> Result<Self, AgentError> {
        config.validate()?;
        Ok(Self::new(config, config.regions()?))
    }

    pub fn installed(&self) -> Vec<AppId> {
        self.apps.keys().copied().collect()
    }

    pub fn state(&self, app: AppId) -> Option<&MockAppState> {
        self.apps.get(&app)
    }

    pub fn registry(&self) -> &SensorRegistry {
        &self.registry
    }

    pub fn foreground(&self) -> Option<AppId> {
        self.foreground
    }

    pub fn snapshot(&self, app: AppId, t: u64) -> Option<UiSnapshot> {
        let state = self.apps.get(&app)?;
        Some(UiSnapshot::new(app.as_str(), t, state.render(&self.rules, &self.regions, self.seed)))
    }

    fn resolve(&self, app_id: &str) -> Result<AppId, ProtocolFrame> {
        match app_id.parse::<AppId>() {
            Ok(a) if self.apps.contains_key(&a) => Ok(a),
            _ => Err(ProtocolFrame::error("unknown_app", format!("app {app_id:?} is not installed"))),
        }
    }

    /// Handles one frame. The boolean is false when the connection must be
    /// dropped after sending the reply.
    pub fn handle(&mut self, frame: &ProtocolFrame) -> (ProtocolFrame, bool) {
        if !self.greeted {
            return match &frame.payload {
                Payload::Hello(h) if h.versions.contains(&PROTOCOL_VERSION) => {
                    self.greeted = true;
                    let reply = Hello {
                        role: "agent".into(),
                        versions: vec![PROTOCOL_VERSION],
                        apps: self.apps.keys().map(|a| a.as_str().to_string()).collect(),
                    };
                    (ProtocolFrame::new(Payload::Hello(reply)), true)
                }
                Payload::Hello(_) => (ProtocolFrame::error("bad_version", "no common protocol version"), false),
                _ => (ProtocolFrame::error("protocol_violation", "expected hello first"), false),
            };
        }
        let kind = frame.frame_type();
        match &frame.payload {
            Payload::Spoof(sf) => {
                for state in self.apps.values_mut() {
                    if state.app_id().consumes(sf.channel) {
                        *state = state.transition(sf, &self.rules, &self.regions);
                    }
                }
                self.registry.latest.insert(sf.channel, sf.clone());
                self.registry.frames_applied += 1;
                (ProtocolFrame::ack(kind, Some(sf.t)), true)
            }
            Payload::AppLaunch(launch) => match self.resolve(&launch.app_id) {
                Ok(app) => {
                    if let Some(action) = &launch.action {
                        let next = self.apps[&app].apply_action(action, &self.regions);
                        self.apps.insert(app, next);
                    }
                    self.foreground = Some(app);
                    (ProtocolFrame::ack(kind, None), true)
                }
                Err(e) => (e, true),
            },
            Payload::SnapshotReq(req) => match self.resolve(&req.app_id) {
                Ok(app) => {
                    let snap = self.snapshot(app, req.t).expect("resolved app is installed");
                    (ProtocolFrame::new(Payload::Snapshot(snap)), true)
                }
                Err(e) => (e, true),
            },
            Payload::Hello(_) => (ProtocolFrame::error("protocol_violation", "duplicate hello"), false),
            Payload::Snapshot(_) | Payload::Ack(_) | Payload::Error(_) => (
                ProtocolFrame::error("protocol_violation", format!("{} is agent-to-orchestrator only", kind.as_str())),
                false,
            ),
        }
    }
}

/// Running TCP agent.
pub struct AgentHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    active: Arc<Mutex<Option<TcpStream>>>,
    thread: Option<JoinHandle<()>>,
}

impl AgentHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn endpoint(&self) -> String {
        self.addr.to_string()
    }

    /// Severs the current connection, if any, without stopping the agent.
    pub fn kill_connection(&self) {
        if let Some(s) = self.active.lock().expect("agent lock").as_ref() {
            let _ = s.shutdown(Shutdown::Both);
        }
    }

    pub fn shutdown(mut self) {
        self.stop_inner();
    }

    fn stop_inner(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        self.kill_connection();
        // Unblock accept().
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for AgentHandle {
    fn drop(&mut self) {
        if self.thread.is_some() {
            self.stop_inner();
        }
    }
}

fn serve_connection(stream: TcpStream, config: &AgentConfig, regions: &Arc<RegionTable>) -> Result<(), LinkError> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let mut device = SimDevice::new(config, Arc::clone(regions));
    loop {
        let frame = match read_frame(&mut reader) {
            Ok(f) => f,
            Err(LinkError::Closed) => return Ok(()),
            Err(LinkError::Decode(e)) => {
                let _ = write_frame(&mut writer, &ProtocolFrame::error(e.code(), e.to_string()));
                return Err(e.into());
            }
            Err(e) => return Err(e),
        };
        let (reply, keep) = device.handle(&frame);
        write_frame(&mut writer, &reply)?;
        if !keep {
            return Ok(());
        }
        if let Some(limit) = config.drop_after_frames {
            if device.registry().frames_applied >= limit {
                return Ok(());
            }
        }
    }
}

/// Binds the configured endpoint and serves connections on a background
/// thread until the handle is shut down or dropped.
pub fn run_sim_agent(config: AgentConfig) -> Result<AgentHandle, AgentError> {
    config.validate()?;
    let regions = config.regions()?;
    let listener = TcpListener::bind(&config.endpoint).map_err(|source| AgentError::Bind {
        endpoint: config.endpoint.clone(),
        source,
    })?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let active: Arc<Mutex<Option<TcpStream>>> = Arc::new(Mutex::new(None));
    let thread = {
        let stop = Arc::clone(&stop);
        let active = Arc::clone(&active);
        std::thread::Builder::new()
            .name(format!("sim-agent-{addr}"))
            .spawn(move || {
                for conn in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = conn else { continue };
                    let _ = stream.set_nodelay(true);
                    if let Ok(clone) = stream.try_clone() {
                        *active.lock().expect("agent lock") = Some(clone);
                    }
                    let _ = serve_connection(stream, &config, &regions);
                    *active.lock().expect("agent lock") = None;
                }
            })?
    };
    Ok(AgentHandle {
        addr,
        stop,
        active,
        thread: Some(thread),
    })
}
