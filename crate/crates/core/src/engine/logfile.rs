//! On-disk formats: the event log, the rejection journal and the snapshot.
//!
//! Each log line holds one record: its canonical `path=value` fields joined
//! by tabs (values never contain raw control characters), followed by
//! `hash=<hex>`. The hash covers the newline-joined canonical encoding. A
//! line must also be byte-identical to the re-encoding of what it decodes
//! to, so alternative spellings of the same record are rejected.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;

use crate::canonical::{self, EncodingError, Fields};
use crate::domain::{sha256, CommunityState, Digest, Event, RuleId};

use super::replay::audit_prefix;
use super::{verify_chain, AuditReport, EngineError, RejectedAction};

const SEP: char = '\t';

fn with_hash(fields: &Fields, hash: &Digest) -> String {
    let mut line = canonical::render(fields, SEP);
    line.push(SEP);
    line.push_str("hash=");
    line.push_str(&hash.to_hex());
    line
}

pub fn encode_line(event: &Event) -> Result<String, EncodingError> {
    Ok(with_hash(&event.fields()?, &event.hash))
}

fn split_line(line: &str) -> Result<(Fields, Digest), String> {
    let mut fields = canonical::parse_fields(line.split(SEP)).map_err(|e| e.to_string())?;
    let (name, hex) = fields.pop().ok_or("empty record")?;
    if name != "hash" {
        return Err("record does not end with its hash".into());
    }
    let hash = Digest::from_hex(&hex).map_err(|e| e.to_string())?;
    Ok((fields, hash))
}

/// Decodes one line, checking canonical form and the recorded hash.
pub fn decode_line(line: &str) -> Result<Event, String> {
    let (fields, hash) = split_line(line)?;
    let event = Event::from_fields(fields, hash).map_err(|e| e.to_string())?;
    let again = encode_line(&event).map_err(|e| e.to_string())?;
    if again != line {
        return Err("record is not in canonical form".into());
    }
    if event.compute_hash().map_err(|e| e.to_string())? != hash {
        return Err("hash does not match the record".into());
    }
    Ok(event)
}

/// Events parsed up to the first bad line, with the position and reason of that line.
pub struct ParsedLog {
    pub events: Vec<Event>,
    pub bad_line: Option<(u64, String)>,
}

fn lines(bytes: &[u8]) -> impl Iterator<Item = &[u8]> {
    let body = bytes.strip_suffix(b"\n").unwrap_or(bytes);
    let empty = body.is_empty();
    body.split(|b| *b == b'\n').filter(move |_| !empty)
}

pub fn parse_log(bytes: &[u8]) -> ParsedLog {
    let mut events = Vec::new();
    for (i, raw) in lines(bytes).enumerate() {
        let decoded = std::str::from_utf8(raw).map_err(|_| "record is not UTF-8".to_string()).and_then(decode_line);
        match decoded {
            Ok(e) => events.push(e),
            Err(reason) => return ParsedLog { events, bad_line: Some((i as u64, reason)) },
        }
    }
    if !bytes.is_empty() && !bytes.ends_with(b"\n") {
        let n = events.len() as u64;
        return ParsedLog { events, bad_line: Some((n.saturating_sub(1), "missing final newline".into())) };
    }
    ParsedLog { events, bad_line: None }
}

/// Strict read: any bad line or broken link is a `CorruptLog` error.
pub fn read_log_bytes(bytes: &[u8]) -> Result<Vec<Event>, EngineError> {
    let parsed = parse_log(bytes);
    verify_chain(&parsed.events)?;
    if let Some((seq, reason)) = parsed.bad_line {
        return Err(EngineError::CorruptLog { first_break_seq: seq, reason });
    }
    Ok(parsed.events)
}

pub fn read_log(path: &Path) -> Result<Vec<Event>, EngineError> {
    read_log_bytes(&std::fs::read(path)?)
}

/// Audit of raw log bytes; never fails.
pub fn audit_bytes(bytes: &[u8]) -> AuditReport {
    let parsed = parse_log(bytes);
    audit_prefix(&parsed.events, parsed.bad_line)
}

pub fn render_log(events: &[Event]) -> Result<String, EncodingError> {
    let mut out = String::new();
    for e in events {
        out.push_str(&encode_line(e)?);
        out.push('\n');
    }
    Ok(out)
}

fn append_text(path: &Path, text: &str) -> std::io::Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(text.as_bytes())?;
    f.sync_data()
}

pub fn append_events(path: &Path, events: &[Event]) -> Result<(), EngineError> {
    append_text(path, &render_log(events)?)?;
    Ok(())
}

pub fn write_log(path: &Path, events: &[Event]) -> Result<(), EngineError> {
    let mut f = File::create(path)?;
    f.write_all(render_log(events)?.as_bytes())?;
    f.sync_data()?;
    Ok(())
}

/// A rejection as recorded in the journal, itself hash-chained.
#[derive(Debug, Clone, PartialEq)]
pub struct JournalEntry {
    pub seq: u64,
    pub rejected: RejectedAction,
    pub parent_hash: Digest,
    pub hash: Digest,
}

/// Journal fields: the attempted event's fields with `violations` inserted
/// before `parent_hash`.
fn journal_fields(seq: u64, r: &RejectedAction, parent: &Digest) -> Result<Fields, EncodingError> {
    let c = &r.command;
    let mut fields = crate::domain::event_fields(seq, c.at, &c.kind, &c.actor, parent)?;
    let tail = fields.pop().expect("parent_hash is always last");
    canonical::flatten("violations", &canonical::to_value(&r.violations)?, &mut fields)?;
    fields.push(tail);
    Ok(fields)
}

pub fn journal_entry(seq: u64, parent: Digest, rejected: RejectedAction) -> Result<JournalEntry, EncodingError> {
    let fields = journal_fields(seq, &rejected, &parent)?;
    let hash = sha256(canonical::render(&fields, '\n').as_bytes());
    Ok(JournalEntry { seq, rejected, parent_hash: parent, hash })
}

pub fn encode_journal_line(e: &JournalEntry) -> Result<String, EncodingError> {
    Ok(with_hash(&journal_fields(e.seq, &e.rejected, &e.parent_hash)?, &e.hash))
}

fn decode_journal_line(line: &str) -> Result<JournalEntry, String> {
    let (mut fields, hash) = split_line(line)?;
    let pos = fields.iter().position(|(k, _)| k == "violations").ok_or("missing violations")?;
    let (k, v) = fields.remove(pos);
    let canonical::Node::Branch(mut tree) = canonical::tree_from_fields(vec![(k, v)]).map_err(|e| e.to_string())?
    else {
        return Err("bad violations field".into());
    };
    let node = tree.shift_remove("violations").ok_or("bad violations field")?;
    let violations: Vec<RuleId> = serde::Deserialize::deserialize(node).map_err(|e: EncodingError| e.to_string())?;
    let event = Event::from_fields(fields, Digest::ZERO).map_err(|e| e.to_string())?;
    let rejected = RejectedAction { at: event.at, violations, command: event.command() };
    let entry = journal_entry(event.seq, event.parent_hash, rejected).map_err(|e| e.to_string())?;
    if entry.hash != hash || encode_journal_line(&entry).map_err(|e| e.to_string())? != line {
        return Err("journal record does not match its hash".into());
    }
    Ok(entry)
}

/// Parses and verifies the rejection journal.
pub fn read_journal_bytes(bytes: &[u8]) -> Result<Vec<JournalEntry>, EngineError> {
    let mut out: Vec<JournalEntry> = Vec::new();
    for (i, raw) in lines(bytes).enumerate() {
        let corrupt = |reason: String| EngineError::CorruptLog { first_break_seq: i as u64, reason };
        let line = std::str::from_utf8(raw).map_err(|_| corrupt("record is not UTF-8".into()))?;
        let entry = decode_journal_line(line).map_err(corrupt)?;
        let parent = out.last().map_or(Digest::ZERO, |e| e.hash);
        if entry.seq != i as u64 || entry.parent_hash != parent {
            return Err(corrupt("journal chain is broken".into()));
        }
        out.push(entry);
    }
    Ok(out)
}

pub fn read_journal(path: &Path) -> Result<Vec<JournalEntry>, EngineError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    read_journal_bytes(&std::fs::read(path)?)
}

/// Appends rejections after the journal's current head.
pub fn append_rejections(path: &Path, rejected: &[RejectedAction]) -> Result<Vec<JournalEntry>, EngineError> {
    let existing = read_journal(path)?;
    let mut parent = existing.last().map_or(Digest::ZERO, |e| e.hash);
    let mut text = String::new();
    let mut out = Vec::new();
    for (seq, r) in (existing.len() as u64..).zip(rejected) {
        let entry = journal_entry(seq, parent, r.clone())?;
        text.push_str(&encode_journal_line(&entry)?);
        text.push('\n');
        parent = entry.hash;
        out.push(entry);
    }
    append_text(path, &text)?;
    Ok(out)
}

/// Canonical encoding of the state (which carries its own head hash).
pub fn encode_snapshot(state: &CommunityState) -> Result<Vec<u8>, EncodingError> {
    let mut bytes = canonical::encode(state)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<CommunityState, EncodingError> {
    let text = std::str::from_utf8(bytes).map_err(|_| EncodingError::Malformed("snapshot is not UTF-8".into()))?;
    canonical::decode(text.strip_suffix('\n').unwrap_or(text))
}

pub fn write_snapshot(path: &Path, state: &CommunityState) -> Result<(), EngineError> {
    std::fs::write(path, encode_snapshot(state)?)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<CommunityState, EngineError> {
    Ok(decode_snapshot(&std::fs::read(path)?)?)
}
