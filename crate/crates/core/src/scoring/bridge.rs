//! Client side of the scorer bridge wire protocol.
//!
//! Newline-delimited JSON over a local stream. Each request is one
//! [`ScoreRequest`] line; the bridge answers with exactly one line, either
//! `{"sim_pos": number, "sim_neg": number}` or `{"error": string}`. The stream
//! is strictly request/response ordered, so the connection is held under a
//! lock for the duration of one exchange.

use super::session::{BackendError, ScoreRequest, ScorerBackend, Similarities};
use serde::Deserialize;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::sync::Mutex;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum BridgeResponse {
    Scores { sim_pos: f64, sim_neg: f64 },
    Error { error: String },
}

struct Connection {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
}

pub struct BridgeBackend {
    conn: Mutex<Connection>,
}

impl BridgeBackend {
    pub fn from_streams(
        reader: impl BufRead + Send + 'static,
        writer: impl Write + Send + 'static,
    ) -> Self {
        BridgeBackend {
            conn: Mutex::new(Connection {
                reader: Box::new(reader),
                writer: Box::new(writer),
            }),
        }
    }

    pub fn connect_tcp(addr: &str) -> std::io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok(BridgeBackend::from_streams(reader, stream))
    }

    #[cfg(unix)]
    pub fn connect_unix(path: &str) -> std::io::Result<Self> {
        let stream = std::os::unix::net::UnixStream::connect(path)?;
        let reader = BufReader::new(stream.try_clone()?);
        Ok(BridgeBackend::from_streams(reader, stream))
    }

    /// Connects to `tcp://host:port` or `unix:///path/to/socket`.
    pub fn connect(endpoint: &str) -> std::io::Result<Self> {
        if let Some(addr) = endpoint.strip_prefix("tcp://") {
            return BridgeBackend::connect_tcp(addr);
        }
        #[cfg(unix)]
        if let Some(path) = endpoint.strip_prefix("unix://") {
            return BridgeBackend::connect_unix(path);
        }
        Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            format!("unsupported bridge endpoint '{endpoint}'"),
        ))
    }

    fn exchange(&self, request: &ScoreRequest) -> Result<String, BackendError> {
        let mut line = serde_json::to_string(request).map_err(|e| BackendError(e.to_string()))?;
        line.push('\n');
        let mut conn = self
            .conn
            .lock()
            .map_err(|_| BackendError("bridge connection poisoned".into()))?;
        conn.writer
            .write_all(line.as_bytes())
            .and_then(|_| conn.writer.flush())
            .map_err(|e| BackendError(format!("bridge write failed: {e}")))?;
        let mut reply = String::new();
        let n = conn
            .reader
            .read_line(&mut reply)
            .map_err(|e| BackendError(format!("bridge read failed: {e}")))?;
        if n == 0 {
            return Err(BackendError("bridge closed the connection".into()));
        }
        Ok(reply)
    }
}

impl ScorerBackend for BridgeBackend {
    fn score(&self, request: &ScoreRequest) -> Result<Similarities, BackendError> {
        let reply = self.exchange(request)?;
        match serde_json::from_str::<BridgeResponse>(reply.trim()) {
            Ok(BridgeResponse::Scores { sim_pos, sim_neg }) => {
                Ok(Similarities { sim_pos, sim_neg })
            }
            Ok(BridgeResponse::Error { error }) => Err(BackendError(error)),
            Err(e) => Err(BackendError(format!("malformed bridge response: {e}"))),
        }
    }
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;
    use crate::exec::Execution;
    use crate::model::{load_prompt_catalog, GazeArea, SessionManifest, StateChangeKind};
    use crate::scoring::{score_session, FramePolicy, ScoreOptions};
    use serde_json::{json, Value};
    use std::os::unix::net::UnixStream;
    use std::thread;

    /// In-process stand-in for the bridge: similarity is a deterministic
    /// function of the text, frames named `bad*` fail.
    fn spawn_fake_bridge() -> (BridgeBackend, thread::JoinHandle<usize>) {
        let (client, server) = UnixStream::pair().unwrap();
        let handle = thread::spawn(move || {
            let reader = BufReader::new(server.try_clone().unwrap());
            let mut writer = server;
            let mut served = 0;
            for line in reader.lines() {
                let req: Value = serde_json::from_str(&line.unwrap()).unwrap();
                let frame = req["frame"].as_str().unwrap();
                let reply = if frame.starts_with("bad") {
                    json!({"error": format!("cannot decode {frame}")})
                } else if frame == "garbage" {
                    json!({"unexpected": true})
                } else {
                    let score = |s: &str| s.len() as f64 / 100.0 + frame.len() as f64 / 1000.0;
                    let crop_bonus = if req.get("crop").is_some() { 0.5 } else { 0.0 };
                    json!({
                        "sim_pos": score(req["positive"].as_str().unwrap()) + crop_bonus,
                        "sim_neg": score(req["negative"].as_str().unwrap()) + crop_bonus,
                    })
                };
                writeln!(writer, "{reply}").unwrap();
                served += 1;
            }
            served
        });
        let reader = BufReader::new(client.try_clone().unwrap());
        (BridgeBackend::from_streams(reader, client), handle)
    }

    fn request(frame: &str, pos: &str, neg: &str) -> ScoreRequest {
        ScoreRequest {
            frame: frame.into(),
            positive: pos.into(),
            negative: neg.into(),
            crop: None,
        }
    }

    #[test]
    fn round_trip_and_swap() {
        let (bridge, handle) = spawn_fake_bridge();
        let a = bridge
            .score(&request("f0.png", "Boiling water", "Not boiling water"))
            .unwrap();
        let b = bridge
            .score(&request("f0.png", "Not boiling water", "Boiling water"))
            .unwrap();
        assert_eq!((a.sim_pos, a.sim_neg), (b.sim_neg, b.sim_pos));
        let again = bridge
            .score(&request("f0.png", "Boiling water", "Not boiling water"))
            .unwrap();
        assert_eq!(a, again);
        drop(bridge);
        assert_eq!(handle.join().unwrap(), 3);
    }

    #[test]
    fn error_responses_surface_as_backend_errors() {
        let (bridge, _h) = spawn_fake_bridge();
        let err = bridge.score(&request("bad.png", "a", "b")).unwrap_err();
        assert_eq!(err.0, "cannot decode bad.png");
        let err = bridge.score(&request("garbage", "a", "b")).unwrap_err();
        assert!(err.0.starts_with("malformed bridge response"));
        // the stream stays usable after a protocol error
        assert!(bridge.score(&request("ok.png", "a", "b")).is_ok());
    }

    #[test]
    fn drives_score_session_concurrently() {
        let (bridge, _h) = spawn_fake_bridge();
        let manifest = SessionManifest {
            session_id: "live".into(),
            state_change_kind: StateChangeKind::Melting,
            heat_power: "same".into(),
            annotation_time: None,
            score_source: "unix:///tmp/bridge.sock".into(),
            gaze_area: GazeArea::EntireVessel,
        };
        let frames: Vec<String> = (0..12)
            .map(|i| {
                if i == 7 {
                    "bad7.png".into()
                } else {
                    format!("f{i}.png")
                }
            })
            .collect();
        let pairs = load_prompt_catalog(StateChangeKind::Melting);
        let mut opts = ScoreOptions::new(2.0);
        opts.policy = FramePolicy::SkipFrame;
        opts.execution = Execution::Parallel;
        let out = score_session(&manifest, &frames, &pairs, &bridge, &opts).unwrap();
        assert_eq!(out.len(), 8);
        assert!(out.values().all(|s| s.samples.len() == 11));
        assert!(out.values().all(|s| s.samples.iter().all(|x| x.t != 14.0)));
    }

    #[test]
    fn unsupported_endpoint() {
        assert!(BridgeBackend::connect("http://localhost").is_err());
    }
}
