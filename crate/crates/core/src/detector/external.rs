//! Client side of the adapter protocol: newline-delimited JSON over the
//! adapter's stdin/stdout.
//!
//! ```text
//! adapter -> {"ready":true,"protocol":1}
//! client  -> {"id":1,"image_path":"/abs/view.png"}
//! adapter -> {"id":1,"detections":[{"bbox_xywh":[x,y,w,h],"score":s,"label":"building"}]}
//!         |  {"id":1,"error":"..."}
//! ```
//!
//! One request is in flight at a time. The adapter's stderr is inherited.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use image::RgbImage;
use serde::Deserialize;
use serde_json::Value;

use super::{Detection, Detector, ExternalSpec, DEFAULT_LABEL};
use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: u64 = 1;

const SHUTDOWN_GRACE: Duration = Duration::from_secs(2);

#[derive(Deserialize)]
struct WireDetection {
    bbox_xywh: [f64; 4],
    score: f64,
    #[serde(default = "default_label")]
    label: String,
}

fn default_label() -> String {
    DEFAULT_LABEL.to_string()
}

pub struct ExternalDetector {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    next_id: u64,
    dead: bool,
    scratch: Option<tempfile::TempDir>,
}

impl ExternalDetector {
    /// Spawns the adapter and waits up to the configured timeout for its ready line.
    pub fn launch(spec: &ExternalSpec) -> Result<Self> {
        let (program, args) = spec
            .command
            .split_first()
            .ok_or_else(|| Error::DetectorLaunchError("empty command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::DetectorLaunchError(format!("{program}: {e}")))?;

        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });

        let mut det = Self {
            stdin: child.stdin.take(),
            child,
            lines: rx,
            timeout: spec.timeout,
            next_id: 1,
            dead: false,
            scratch: None,
        };
        let ready = det.read_message()?.ok_or_else(|| {
            Error::DetectorLaunchError("adapter exited before its ready line".into())
        })?;
        if ready.get("ready") != Some(&Value::Bool(true)) {
            return Err(Error::ProtocolError(format!(
                "expected ready line, got {ready}"
            )));
        }
        match ready.get("protocol").and_then(Value::as_u64) {
            Some(PROTOCOL_VERSION) => Ok(det),
            other => Err(Error::ProtocolError(format!(
                "unsupported protocol version {other:?}"
            ))),
        }
    }

    /// Next non-blank line as JSON; `None` once the adapter closes stdout.
    fn read_message(&mut self) -> Result<Option<Value>> {
        if self.dead {
            return Err(Error::ProtocolError("adapter already terminated".into()));
        }
        let deadline = Instant::now() + self.timeout;
        loop {
            let remaining = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(remaining) {
                Ok(Ok(line)) if line.trim().is_empty() => continue,
                Ok(Ok(line)) => {
                    return serde_json::from_str(&line).map(Some).map_err(|e| {
                        Error::ProtocolError(format!("malformed JSON line {line:?}: {e}"))
                    })
                }
                Ok(Err(e)) => return Err(Error::ProtocolError(format!("reading adapter: {e}"))),
                Err(RecvTimeoutError::Timeout) => {
                    self.terminate();
                    return Err(Error::DetectorTimeout);
                }
                Err(RecvTimeoutError::Disconnected) => {
                    self.dead = true;
                    return Ok(None);
                }
            }
        }
    }

    fn terminate(&mut self) {
        self.dead = true;
        self.stdin = None;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    /// Sends one request for an image already on disk and validates the
    /// answer against that image's dimensions.
    pub fn request(&mut self, image_path: &Path) -> Result<Vec<Detection>> {
        let abs = std::path::absolute(image_path)?;
        let (width, height) = image::image_dimensions(&abs)?;
        let id = self.next_id;
        self.next_id += 1;

        let line = serde_json::json!({ "id": id, "image_path": abs.to_string_lossy() });
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| Error::ProtocolError("adapter already terminated".into()))?;
        writeln!(stdin, "{line}")
            .and_then(|_| stdin.flush())
            .map_err(|e| Error::ProtocolError(format!("writing request: {e}")))?;

        let resp = self
            .read_message()?
            .ok_or_else(|| Error::ProtocolError("adapter closed its stdout".into()))?;
        let resp_id = resp.get("id").and_then(Value::as_u64);
        if resp_id != Some(id) {
            return Err(Error::ProtocolError(format!(
                "response id {resp_id:?} does not match request id {id}"
            )));
        }
        if let Some(err) = resp.get("error") {
            return Err(Error::ProtocolError(format!(
                "adapter reported error: {err}"
            )));
        }
        let raw = resp
            .get("detections")
            .cloned()
            .ok_or_else(|| Error::ProtocolError("response lacks detections".into()))?;
        let wire: Vec<WireDetection> = serde_json::from_value(raw)
            .map_err(|e| Error::ProtocolError(format!("bad detections: {e}")))?;
        wire.into_iter()
            .map(|d| {
                Detection {
                    bbox_xywh: d.bbox_xywh,
                    score: d.score,
                    label: d.label,
                }
                .clamped(width, height)
            })
            .collect()
    }
}

impl Detector for ExternalDetector {
    fn detect(&mut self, image: &RgbImage) -> Result<Vec<Detection>> {
        if self.scratch.is_none() {
            self.scratch = Some(tempfile::tempdir()?);
        }
        let path = self
            .scratch
            .as_ref()
            .expect("scratch dir")
            .path()
            .join(format!("request-{}.png", self.next_id));
        crate::raster::save_png(image, &path)?;
        let result = self.request(&path);
        let _ = std::fs::remove_file(&path);
        result
    }
}

impl Drop for ExternalDetector {
    fn drop(&mut self) {
        // closing stdin asks the adapter to exit
        self.stdin = None;
        let deadline = Instant::now() + SHUTDOWN_GRACE;
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Launches the adapter, performs a single request and shuts it down.
pub fn external_round_trip(image_path: &Path, spec: &ExternalSpec) -> Result<Vec<Detection>> {
    ExternalDetector::launch(spec)?.request(image_path)
}
