//! Wire messages. Control traffic is JSON text; frames are binary:
//! u32 frame id, u16 width, u16 height, u8 format, then the payload
//! (little-endian).

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum ClientMessage {
    LoadScene {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        path: Option<String>,
    },
    Camera {
        pos: [f64; 3],
        target: [f64; 3],
        #[serde(default)]
        up: Option<[f64; 3]>,
        fov: f64,
        #[serde(default)]
        width: Option<u32>,
        #[serde(default)]
        height: Option<u32>,
    },
    /// RenderParams fields, either inline or under `"params"`. Missing
    /// fields keep their current value.
    Params(Map<String, Value>),
    RequestFrame,
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quality {
    Moving,
    Still,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum ServerMessage {
    #[serde(rename_all = "camelCase")]
    Stats {
        frame_id: u32,
        render_ms: f64,
        voxel_steps: u64,
        tests: u64,
        quality: Quality,
        width: u32,
        height: u32,
        /// Camera/params generation the frame was rendered with.
        epoch: u64,
        neighbors: bool,
    },
    #[serde(rename_all = "camelCase")]
    SceneLoaded { name: String, dims: [u32; 3], segments: usize },
    #[serde(rename_all = "camelCase")]
    Error {
        message: String,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        frame_id: Option<u32>,
    },
}

impl ServerMessage {
    pub fn error(message: impl Into<String>) -> Self {
        Self::Error { message: message.into(), frame_id: None }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum FrameFormat {
    Rgba8 = 0,
    Png = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub frame_id: u32,
    pub width: u16,
    pub height: u16,
    pub format: FrameFormat,
}

pub const FRAME_HEADER_BYTES: usize = 9;

pub fn encode_frame(header: FrameHeader, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(FRAME_HEADER_BYTES + payload.len());
    out.extend_from_slice(&header.frame_id.to_le_bytes());
    out.extend_from_slice(&header.width.to_le_bytes());
    out.extend_from_slice(&header.height.to_le_bytes());
    out.push(header.format as u8);
    out.extend_from_slice(payload);
    out
}

pub fn decode_frame(bytes: &[u8]) -> Option<(FrameHeader, &[u8])> {
    if bytes.len() < FRAME_HEADER_BYTES {
        return None;
    }
    let format = match bytes[8] {
        0 => FrameFormat::Rgba8,
        1 => FrameFormat::Png,
        _ => return None,
    };
    let header = FrameHeader {
        frame_id: u32::from_le_bytes(bytes[0..4].try_into().unwrap()),
        width: u16::from_le_bytes(bytes[4..6].try_into().unwrap()),
        height: u16::from_le_bytes(bytes[6..8].try_into().unwrap()),
        format,
    };
    Some((header, &bytes[FRAME_HEADER_BYTES..]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_client_messages() {
        assert_eq!(
            ClientMessage::parse(r#"{"type":"loadScene","name":"tornado"}"#).unwrap(),
            ClientMessage::LoadScene { name: Some("tornado".into()), path: None }
        );
        assert_eq!(ClientMessage::parse(r#"{"type":"requestFrame"}"#).unwrap(), ClientMessage::RequestFrame);
        let cam = ClientMessage::parse(r#"{"type":"camera","pos":[1,2,3],"target":[0,0,0],"up":[0,0,1],"fov":45}"#).unwrap();
        assert!(matches!(cam, ClientMessage::Camera { fov, .. } if fov == 45.0));
        let ClientMessage::Params(map) = ClientMessage::parse(r#"{"type":"params","base_opacity":0.5}"#).unwrap() else { panic!() };
        assert_eq!(map["base_opacity"], 0.5);
        assert!(ClientMessage::parse(r#"{"type":"teleport"}"#).is_err());
    }

    #[test]
    fn frame_header_roundtrip() {
        let h = FrameHeader { frame_id: 7, width: 640, height: 360, format: FrameFormat::Png };
        let bytes = encode_frame(h, &[1, 2, 3]);
        assert_eq!(bytes.len(), 12);
        assert_eq!(decode_frame(&bytes), Some((h, &[1u8, 2, 3][..])));
        assert_eq!(decode_frame(&bytes[..5]), None);
    }

    #[test]
    fn stats_field_names() {
        let m = ServerMessage::Stats {
            frame_id: 1,
            render_ms: 2.0,
            voxel_steps: 3,
            tests: 4,
            quality: Quality::Still,
            width: 8,
            height: 6,
            epoch: 1,
            neighbors: true,
        };
        let v: Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["type"], "stats");
        assert_eq!(v["frameId"], 1);
        assert_eq!(v["renderMs"], 2.0);
        assert_eq!(v["voxelSteps"], 3);
        assert_eq!(v["quality"], "still");
    }
}
