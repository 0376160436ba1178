use std::fs;
use std::io::Write;
use std::path::Path;

use super::{BehaviorEvent, BehaviorKind};
use crate::error::{Error, Result};

/// Reads a tab-separated behavior log: `user<TAB>question<TAB>kind<TAB>timestamp`.
pub fn parse_log(path: impl AsRef<Path>) -> Result<Vec<BehaviorEvent>> {
    let text = fs::read_to_string(path)?;
    parse_log_str(&text)
}

pub fn parse_log_str(text: &str) -> Result<Vec<BehaviorEvent>> {
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        let err = |message: String| Error::Parse { line, message };
        if fields.len() != 4 {
            return Err(err(format!("expected 4 tab-separated fields, found {}", fields.len())));
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(err("empty user or question id".into()));
        }
        let kind: BehaviorKind = fields[2]
            .parse()
            .map_err(|_| err(format!("unknown behavior kind {:?}", fields[2])))?;
        let timestamp: u64 = fields[3]
            .parse()
            .map_err(|_| err(format!("timestamp {:?} is not a non-negative integer", fields[3])))?;
        events.push(BehaviorEvent {
            user: fields[0].to_string(),
            question: fields[1].to_string(),
            kind,
            timestamp,
        });
    }
    Ok(events)
}

pub fn format_log(events: &[BehaviorEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", e.user, e.question, e.kind, e.timestamp));
    }
    out
}

pub fn write_log(path: impl AsRef<Path>, events: &[BehaviorEvent]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(format_log(events).as_bytes())?;
    Ok(())
}
