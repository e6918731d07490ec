//! Line-delimited trace records.
//!
//! Every record is one JSON object per line with the fields `t` (simulation
//! time in seconds), `kind` (one of `state-snapshot`, `plan`,
//! `belief-update`, `prune`, `collision`, `warning`) and `payload` (an
//! object whose keys are emitted in sorted order).

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    StateSnapshot,
    Plan,
    BeliefUpdate,
    Prune,
    Collision,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: f64,
    pub kind: EventKind,
    pub payload: Value,
}

impl TraceEvent {
    pub fn new(t: f64, kind: EventKind, payload: Value) -> Self {
        Self { t, kind, payload }
    }
}

pub fn write_jsonl<W: Write>(events: &[TraceEvent], mut out: W) -> io::Result<()> {
    for event in events {
        serde_json::to_writer(&mut out, event)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_jsonl<R: BufRead>(input: R) -> io::Result<Vec<TraceEvent>> {
    let mut events = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line)?);
    }
    Ok(events)
}
