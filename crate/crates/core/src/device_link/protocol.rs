//! Spoof-injection wire protocol.
//!
//! Each frame is one UTF-8 JSON object terminated by a single LF:
//!
//! ```text
//! {"v":1,"type":"spoof","payload":{"t":0,"channel":"step_counter","values":[1532.0]}}
//! ```
//!
//! The decoder is total: any byte sequence yields either a frame or a
//! [`DecodeError`].

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::sensor_synth::{Channel, SensorFrame};

use super::ui::UiSnapshot;

pub const PROTOCOL_VERSION: u32 = 1;
/// Longest line the stream reader accepts, terminator included.
pub const MAX_LINE_BYTES: usize = 4 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameType {
    Hello,
    Spoof,
    SnapshotReq,
    Snapshot,
    AppLaunch,
    Ack,
    Error,
}

impl FrameType {
    pub fn as_str(self) -> &'static str {
        match self {
            FrameType::Hello => "hello",
            FrameType::Spoof => "spoof",
            FrameType::SnapshotReq => "snapshot_req",
            FrameType::Snapshot => "snapshot",
            FrameType::AppLaunch => "app_launch",
            FrameType::Ack => "ack",
            FrameType::Error => "error",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            FrameType::Hello,
            FrameType::Spoof,
            FrameType::SnapshotReq,
            FrameType::Snapshot,
            FrameType::AppLaunch,
            FrameType::Ack,
            FrameType::Error,
        ]
        .into_iter()
        .find(|t| t.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hello {
    /// `orchestrator` or `agent`.
    pub role: String,
    /// Versions the sender speaks; the agent answers with the one it chose.
    pub versions: Vec<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub apps: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotReq {
    pub app_id: String,
    pub t: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AppAction {
    /// Explicit store/account region choice made inside the app.
    SelectRegion { region: String },
}

impl AppAction {
    pub fn label(&self) -> String {
        match self {
            AppAction::SelectRegion { region } => format!("select_region:{region}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppLaunch {
    pub app_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<AppAction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ack {
    /// Type of the frame being acknowledged.
    pub of: FrameType,
    /// Sim time of the acknowledged frame, when it carried one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Hello(Hello),
    Spoof(SensorFrame),
    SnapshotReq(SnapshotReq),
    Snapshot(UiSnapshot),
    AppLaunch(AppLaunch),
    Ack(Ack),
    Error(ErrorBody),
}

impl Payload {
    pub fn frame_type(&self) -> FrameType {
        match self {
            Payload::Hello(_) => FrameType::Hello,
            Payload::Spoof(_) => FrameType::Spoof,
            Payload::SnapshotReq(_) => FrameType::SnapshotReq,
            Payload::Snapshot(_) => FrameType::Snapshot,
            Payload::AppLaunch(_) => FrameType::AppLaunch,
            Payload::Ack(_) => FrameType::Ack,
            Payload::Error(_) => FrameType::Error,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolFrame {
    pub v: u32,
    pub payload: Payload,
}

impl ProtocolFrame {
    pub fn new(payload: Payload) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            payload,
        }
    }

    pub fn frame_type(&self) -> FrameType {
        self.payload.frame_type()
    }

    pub fn error(code: &str, message: impl Into<String>) -> Self {
        Self::new(Payload::Error(ErrorBody {
            code: code.to_string(),
            message: message.into(),
        }))
    }

    pub fn ack(of: FrameType, t: Option<u64>) -> Self {
        Self::new(Payload::Ack(Ack { of, t }))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DecodeError {
    #[error("truncated frame")]
    Truncated,
    #[error("unknown frame type {0:?}")]
    UnknownType(String),
    #[error("unsupported protocol version {0}")]
    BadVersion(String),
    #[error("values do not match the arity of {0}")]
    ArityMismatch(Channel),
    #[error("malformed frame: {0}")]
    Malformed(String),
}

impl DecodeError {
    /// Stable code used in `error` frames.
    pub fn code(&self) -> &'static str {
        match self {
            DecodeError::Truncated => "truncated",
            DecodeError::UnknownType(_) => "unknown_type",
            DecodeError::BadVersion(_) => "bad_version",
            DecodeError::ArityMismatch(_) => "arity_mismatch",
            DecodeError::Malformed(_) => "malformed",
        }
    }
}

#[derive(Serialize)]
struct Wire<'a, P: Serialize> {
    v: u32,
    #[serde(rename = "type")]
    kind: FrameType,
    payload: &'a P,
}

fn wire<P: Serialize>(v: u32, kind: FrameType, payload: &P) -> Vec<u8> {
    let mut out = serde_json::to_vec(&Wire { v, kind, payload }).expect("frame serializes");
    out.push(b'\n');
    out
}

/// One LF-terminated JSON record.
pub fn encode_frame(f: &ProtocolFrame) -> Vec<u8> {
    let kind = f.frame_type();
    match &f.payload {
        Payload::Hello(p) => wire(f.v, kind, p),
        Payload::Spoof(p) => wire(f.v, kind, p),
        Payload::SnapshotReq(p) => wire(f.v, kind, p),
        Payload::Snapshot(p) => wire(f.v, kind, p),
        Payload::AppLaunch(p) => wire(f.v, kind, p),
        Payload::Ack(p) => wire(f.v, kind, p),
        Payload::Error(p) => wire(f.v, kind, p),
    }
}

fn body<T: DeserializeOwned>(v: Value) -> Result<T, DecodeError> {
    serde_json::from_value(v).map_err(|e| DecodeError::Malformed(e.to_string()))
}

/// Decodes exactly one LF-terminated frame.
pub fn decode_frame(bytes: &[u8]) -> Result<ProtocolFrame, DecodeError> {
    let Some((&b'\n', line)) = bytes.split_last() else {
        return Err(DecodeError::Truncated);
    };
    if line.contains(&b'\n') {
        return Err(DecodeError::Malformed("more than one line".into()));
    }
    let text = std::str::from_utf8(line).map_err(|_| DecodeError::Malformed("invalid UTF-8".into()))?;
    let value: Value = serde_json::from_str(text).map_err(|e| {
        if e.is_eof() {
            DecodeError::Truncated
        } else {
            DecodeError::Malformed(e.to_string())
        }
    })?;
    let Value::Object(mut obj) = value else {
        return Err(DecodeError::Malformed("frame is not an object".into()));
    };
    let version = obj.remove("v").ok_or_else(|| DecodeError::Malformed("missing v".into()))?;
    let v = match version.as_u64() {
        Some(v) if v == u64::from(PROTOCOL_VERSION) => PROTOCOL_VERSION,
        _ => return Err(DecodeError::BadVersion(version.to_string())),
    };
    let kind = match obj.remove("type") {
        Some(Value::String(s)) => FrameType::parse(&s).ok_or(DecodeError::UnknownType(s))?,
        Some(other) => return Err(DecodeError::UnknownType(other.to_string())),
        None => return Err(DecodeError::Malformed("missing type".into())),
    };
    let payload = obj.remove("payload").ok_or_else(|| DecodeError::Malformed("missing payload".into()))?;
    if let Some(extra) = obj.keys().next() {
        return Err(DecodeError::Malformed(format!("unexpected field {extra:?}")));
    }
    let payload = match kind {
        FrameType::Hello => Payload::Hello(body(payload)?),
        FrameType::Spoof => {
            let frame: SensorFrame = body(payload)?;
            if !frame.arity_ok() {
                return Err(DecodeError::ArityMismatch(frame.channel));
            }
            Payload::Spoof(frame)
        }
        FrameType::SnapshotReq => Payload::SnapshotReq(body(payload)?),
        FrameType::Snapshot => {
            let snap: UiSnapshot = body(payload)?;
            if !snap.is_well_formed() {
                return Err(DecodeError::Malformed("snapshot tree too deep or unnamed".into()));
            }
            Payload::Snapshot(snap)
        }
        FrameType::AppLaunch => Payload::AppLaunch(body(payload)?),
        FrameType::Ack => Payload::Ack(body(payload)?),
        FrameType::Error => Payload::Error(body(payload)?),
    };
    Ok(ProtocolFrame { v, payload })
}

#[derive(Debug, thiserror::Error)]
pub enum LinkError {
    #[error("connection closed")]
    Closed,
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_frame<W: Write>(w: &mut W, f: &ProtocolFrame) -> std::io::Result<()> {
    w.write_all(&encode_frame(f))?;
    w.flush()
}

/// Reads the next frame from a stream. A clean EOF before any byte is
/// `Closed`; EOF mid-line is `Truncated`.
pub fn read_frame<R: BufRead>(r: &mut R) -> Result<ProtocolFrame, LinkError> {
    let mut buf = Vec::new();
    loop {
        let available = r.fill_buf()?;
        if available.is_empty() {
            return Err(if buf.is_empty() {
                LinkError::Closed
            } else {
                DecodeError::Truncated.into()
            });
        }
        let (chunk, done) = match available.iter().position(|&b| b == b'\n') {
            Some(i) => (&available[..=i], true),
            None => (available, false),
        };
        if buf.len() + chunk.len() > MAX_LINE_BYTES {
            return Err(DecodeError::Malformed("line too long".into()).into());
        }
        buf.extend_from_slice(chunk);
        let used = chunk.len();
        r.consume(used);
        if done {
            return Ok(decode_frame(&buf)?);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device_link::ui::{ElementKind, UiElement};
    use crate::sensor_synth::SensorValues;

    #[test]
    fn spoof_step_counter_round_trip() {
        let f = ProtocolFrame::new(Payload::Spoof(SensorFrame::vector(0, Channel::StepCounter, vec![1532.0])));
        let bytes = encode_frame(&f);
        assert_eq!(
            std::str::from_utf8(&bytes).unwrap(),
            "{\"v\":1,\"type\":\"spoof\",\"payload\":{\"t\":0,\"channel\":\"step_counter\",\"values\":[1532.0]}}\n"
        );
        assert_eq!(decode_frame(&bytes).unwrap(), f);
    }

    #[test]
    fn version_gate() {
        let b = b"{\"v\":2,\"type\":\"ack\",\"payload\":{\"of\":\"spoof\"}}\n";
        assert!(matches!(decode_frame(b), Err(DecodeError::BadVersion(_))));
    }

    #[test]
    fn error_classes() {
        assert_eq!(decode_frame(b"{\"v\":1"), Err(DecodeError::Truncated));
        assert_eq!(decode_frame(b"{\"v\":1,\n"), Err(DecodeError::Truncated));
        assert!(matches!(
            decode_frame(b"{\"v\":1,\"type\":\"bogus\",\"payload\":{}}\n"),
            Err(DecodeError::UnknownType(_))
        ));
        assert_eq!(
            decode_frame(b"{\"v\":1,\"type\":\"spoof\",\"payload\":{\"t\":0,\"channel\":\"gyroscope\",\"values\":[1.0]}}\n"),
            Err(DecodeError::ArityMismatch(Channel::Gyroscope))
        );
        assert!(matches!(decode_frame(b"[1]\n"), Err(DecodeError::Malformed(_))));
        assert!(matches!(decode_frame(b"\xff\n"), Err(DecodeError::Malformed(_))));
    }

    #[test]
    fn every_type_round_trips() {
        let frames = vec![
            ProtocolFrame::new(Payload::Hello(Hello { role: "orchestrator".into(), versions: vec![1], apps: vec![] })),
            ProtocolFrame::new(Payload::Spoof(SensorFrame {
                t: 9,
                channel: Channel::TimeZone,
                values: SensorValues::Text("Europe/Rome".into()),
            })),
            ProtocolFrame::new(Payload::SnapshotReq(SnapshotReq { app_id: "weather".into(), t: 5 })),
            ProtocolFrame::new(Payload::Snapshot(UiSnapshot::new(
                "weather",
                5,
                vec![UiElement::new(ElementKind::ModeFlag, "night").attr("mode", "night")],
            ))),
            ProtocolFrame::new(Payload::AppLaunch(AppLaunch {
                app_id: "shop".into(),
                action: Some(AppAction::SelectRegion { region: "IT".into() }),
            })),
            ProtocolFrame::ack(FrameType::Spoof, Some(3)),
            ProtocolFrame::error("unknown_app", "no such app"),
        ];
        for f in frames {
            assert_eq!(decode_frame(&encode_frame(&f)).unwrap(), f);
        }
    }

    #[test]
    fn stream_reader() {
        let a = encode_frame(&ProtocolFrame::ack(FrameType::Hello, None));
        let mut data = a.clone();
        data.extend_from_slice(&a);
        data.extend_from_slice(b"{\"v\":1");
        let mut r = std::io::Cursor::new(data);
        assert!(read_frame(&mut r).is_ok());
        assert!(read_frame(&mut r).is_ok());
        assert!(matches!(read_frame(&mut r), Err(LinkError::Decode(DecodeError::Truncated))));
        assert!(matches!(read_frame(&mut r), Err(LinkError::Closed)));
    }
}
