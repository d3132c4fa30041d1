//! Step records, events and the line-delimited trace file format.
//!
//! A trace file is one header line followed by one [`TraceRecord`] per line.
//! The header carries the initial configuration, which replay needs and which
//! is not part of any step record.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::kernel::choice::ScheduleChoice;
use crate::kernel::config::{Configuration, Layer};
use crate::kernel::digest::Digest;
use crate::kernel::message::{Message, Origin, Payload};

pub const TRACE_FORMAT: &str = "snapstab-trace/1";

/// Everything observable that happened inside one step. Process fields are
/// process indices, not slots.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Event {
    Send {
        from: usize,
        to: usize,
        message: Message,
        /// The channel was full and the message was lost.
        dropped: bool,
    },
    ReceiveBrd {
        at: usize,
        from: usize,
        payload: Payload,
        /// Computation id carried by the triggering message.
        cid: Option<u64>,
        origin: Origin,
    },
    ReceiveFck {
        at: usize,
        from: usize,
        payload: Payload,
        /// Computation whose broadcast produced the acknowledged feedback.
        feedback_for: Option<u64>,
        origin: Origin,
    },
    Start {
        at: usize,
        layer: Layer,
        cid: u64,
        payload: Option<Payload>,
    },
    Decide {
        at: usize,
        layer: Layer,
        cid: Option<u64>,
    },
    CsEnter {
        at: usize,
        cid: Option<u64>,
    },
    CsExit {
        at: usize,
        cid: Option<u64>,
    },
    Request {
        at: usize,
        layer: Layer,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u64,
    pub choice: ScheduleChoice,
    /// Message removed by a deliver or lose step.
    pub message: Option<Message>,
    pub events: Vec<Event>,
    /// Digest of the configuration after the step.
    pub digest: Digest,
}

/// Why a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunEnd {
    /// Nothing enabled any more.
    Quiescent,
    /// Stop condition reached (every request served) before quiescence.
    Goal,
    /// Hit the step bound.
    Truncated,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub end: RunEnd,
    pub initial: Configuration,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub initial: Configuration,
    pub records: Vec<TraceRecord>,
    pub end: RunEnd,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn digests(&self) -> Vec<Digest> {
        self.records.iter().map(|r| r.digest).collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), Error> {
        let header = TraceHeader {
            format: TRACE_FORMAT.to_string(),
            end: self.end,
            initial: self.initial.clone(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Trace, Error> {
        let mut lines = r.lines();
        let first = lines.next().ok_or_else(|| Error::Trace("empty trace file".into()))??;
        let header: TraceHeader =
            serde_json::from_str(&first).map_err(|e| Error::Trace(format!("line 1: bad header: {e}")))?;
        if header.format != TRACE_FORMAT {
            return Err(Error::Trace(format!("unsupported trace format {:?}", header.format)));
        }
        header.initial.validate()?;
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TraceRecord =
                serde_json::from_str(&line).map_err(|e| Error::Trace(format!("line {}: {e}", i + 2)))?;
            records.push(rec);
        }
        Ok(Trace {
            initial: header.initial,
            records,
            end: header.end,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), Error> {
        let f = std::fs::File::create(path)?;
        self.write_jsonl(std::io::BufWriter::new(f))
    }

    pub fn load(path: &std::path::Path) -> Result<Trace, Error> {
        let f = std::fs::File::open(path)?;
        Trace::read_jsonl(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::choice::Action;
    use crate::kernel::config::{Setup, Stack};

    #[test]
    fn record_keys_in_canonical_order() {
        let rec = TraceRecord {
            step: 3,
            choice: ScheduleChoice::fire(0, Action::PifA1),
            message: None,
            events: vec![],
            digest: Digest(0xff),
        };
        let line = serde_json::to_string(&rec).unwrap();
        let keys: Vec<usize> = ["\"step\"", "\"choice\"", "\"message\"", "\"events\"", "\"digest\""]
            .iter()
            .map(|k| line.find(k).unwrap())
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]), "{line}");
        assert!(line.contains("\"digest\":\"00000000000000ff\""));
    }

    #[test]
    fn jsonl_round_trip() {
        let trace = Trace {
            initial: Configuration::clean(Setup::new(2, Stack::Pif, 1)).unwrap(),
            records: vec![TraceRecord {
                step: 0,
                choice: ScheduleChoice::ExternalRequest { process: 1, layer: Layer::Pif },
                message: None,
                events: vec![Event::Request { at: 1, layer: Layer::Pif }],
                digest: Digest(7),
            }],
            end: RunEnd::Truncated,
        };
        let text = trace.to_jsonl();
        assert_eq!(text.lines().count(), 2);
        assert!(text.ends_with('\n'));
        let back = Trace::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, trace);
    }
}
