//! Line-delimited JSON trace files.
//!
//! Line 1 is a header object; each following line is one event in seq
//! order, e.g. `{"seq":3,"type":"probe","probe":"m.cc:1:19","frame":2,"value":6}`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::trace::{check_bracketing, Trace, TraceEvent, TraceScope, TraceStatus};
use crate::lang::eval::RuntimeError;

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("malformed trace at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    run_id: String,
    example_id: String,
    scope: TraceScope,
    status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<RuntimeError>,
    traced_duration_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base_duration_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    output: Vec<String>,
}

pub fn write_trace(trace: &Trace, mut out: impl Write) -> std::io::Result<()> {
    let header = Header {
        run_id: trace.run_id.clone(),
        example_id: trace.example_id.clone(),
        scope: trace.scope.clone(),
        status: trace.status.label().to_string(),
        error: match &trace.status {
            TraceStatus::Failed { error } => Some(error.clone()),
            _ => None,
        },
        traced_duration_ms: trace.traced_duration_ms,
        base_duration_ms: trace.base_duration_ms,
        output: trace.output.clone(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for event in &trace.events {
        serde_json::to_writer(&mut out, event)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn to_jsonl_string(trace: &Trace) -> String {
    let mut buf = Vec::new();
    write_trace(trace, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Reads and validates a trace. Bracketing violations are rejected, never
/// repaired.
pub fn read_trace(input: impl BufRead) -> Result<Trace, JsonlError> {
    let mut lines = input.lines().enumerate();
    let header: Header = loop {
        match lines.next() {
            None => {
                return Err(JsonlError::Malformed {
                    line: 1,
                    reason: "missing header".to_string(),
                })
            }
            Some((_, line)) if line.as_ref().is_ok_and(|l| l.trim().is_empty()) => continue,
            Some((n, line)) => {
                break serde_json::from_str(&line?).map_err(|e| JsonlError::Malformed {
                    line: n + 1,
                    reason: format!("invalid header: {e}"),
                })?
            }
        }
    };
    let status = match (header.status.as_str(), header.error) {
        ("completed", None) => TraceStatus::Completed,
        ("overflowed", None) => TraceStatus::Overflowed,
        ("failed", Some(error)) => TraceStatus::Failed { error },
        (other, _) => {
            return Err(JsonlError::Malformed {
                line: 1,
                reason: format!("invalid status `{other}`"),
            })
        }
    };
    let mut events = Vec::new();
    let mut line_of_seq = Vec::new();
    for (n, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: TraceEvent = serde_json::from_str(&line).map_err(|e| JsonlError::Malformed {
            line: n + 1,
            reason: format!("invalid event: {e}"),
        })?;
        events.push(event);
        line_of_seq.push(n + 1);
    }
    check_bracketing(&events).map_err(|e| JsonlError::Malformed {
        line: line_of_seq
            .get((e.seq as usize).saturating_sub(1))
            .copied()
            .unwrap_or(line_of_seq.last().copied().unwrap_or(1)),
        reason: e.reason,
    })?;
    Ok(Trace {
        run_id: header.run_id,
        example_id: header.example_id,
        scope: header.scope,
        events,
        status,
        base_duration_ms: header.base_duration_ms,
        traced_duration_ms: header.traced_duration_ms,
        output: header.output,
    })
}

pub fn from_jsonl_str(text: &str) -> Result<Trace, JsonlError> {
    read_trace(text.as_bytes())
}
