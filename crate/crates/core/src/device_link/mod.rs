//! Spoof-injection protocol, the simulated device agent and its mock apps.

pub mod agent;
pub mod apps;
pub mod protocol;
pub mod region;
pub mod ui;

pub use agent::{run_sim_agent, AgentConfig, AgentError, AgentHandle, SimDevice};
pub use apps::{mock_transition, AppId, AppRules, DayMode, MockAppState};
pub use protocol::{
    decode_frame, encode_frame, read_frame, write_frame, Ack, AppAction, AppLaunch, DecodeError, ErrorBody, FrameType, LinkError, Payload,
    Hello, ProtocolFrame, SnapshotReq, PROTOCOL_VERSION,
};
pub use region::{region_lookup, RegionTable, UNKNOWN_REGION};
pub use ui::{ElementKind, UiElement, UiSnapshot, MAX_UI_DEPTH};
