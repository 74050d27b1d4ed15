//! Stand-in detector process: speaks the detector protocol on stdio and
//! answers requests from a JSON file of canned responses.
//!
//! The file holds an array; request `n` (0-based, in arrival order) gets
//! element `min(n, len - 1)`. An element is either an array of detections or
//! an object `{"error": "..."}`. Requests naming a file that does not exist
//! are answered with an error regardless.

use std::io::{BufRead, Write};
use std::process::ExitCode;

use serde_json::{json, Value};

fn main() -> ExitCode {
    let Some(path) = std::env::args_os().nth(1) else {
        eprintln!("usage: panoview-replay-detector RESPONSES.json");
        return ExitCode::from(64);
    };
    let canned: Vec<Value> = match std::fs::read(&path)
        .map_err(|e| e.to_string())
        .and_then(|b| serde_json::from_slice(&b).map_err(|e| e.to_string()))
    {
        Ok(v) => v,
        Err(e) => {
            eprintln!(
                "replay-detector: cannot load {}: {e}",
                path.to_string_lossy()
            );
            return ExitCode::from(1);
        }
    };
    if canned.is_empty() {
        eprintln!("replay-detector: no canned responses");
        return ExitCode::from(1);
    }

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let send =
        |out: &mut std::io::StdoutLock, v: Value| writeln!(out, "{v}").and_then(|_| out.flush());
    if send(&mut out, json!({"ready": true, "protocol": 1})).is_err() {
        return ExitCode::from(1);
    }

    for (n, line) in std::io::stdin().lock().lines().enumerate() {
        let Ok(line) = line else { break };
        let request: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("replay-detector: bad request: {e}");
                continue;
            }
        };
        let id = request.get("id").cloned().unwrap_or(Value::Null);
        let exists = request
            .get("image_path")
            .and_then(Value::as_str)
            .is_some_and(|p| std::path::Path::new(p).is_file());
        let reply = if !exists {
            json!({"id": id, "error": "image not found"})
        } else {
            match &canned[n.min(canned.len() - 1)] {
                Value::Object(o) if o.contains_key("error") => {
                    json!({"id": id, "error": o["error"]})
                }
                detections => json!({"id": id, "detections": detections}),
            }
        };
        if send(&mut out, reply).is_err() {
            break;
        }
    }
    ExitCode::SUCCESS
}
