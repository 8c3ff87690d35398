//! Line-delimited JSON gateway. One request object per line:
//!
//! ```text
//! {"id":"1","method":"act","params":{"as":"root","at":3,"action":"grant-role role=mod member=alice"}}
//! {"id":"1","ok":true,"result":{"hash":"…","seq":7,"events":1}}
//! ```
//!
//! Methods: `act`, `sign`, `delegate`, `tally`, `audit`, `state`, `triggers`.
//! Errors come back as `{"id":…,"ok":false,"error":{"code":…,"message":…}}`.
//! Requests run in arrival order; every write goes through one locked
//! [`Community`].

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use voicegov_core::domain::{MemberId, ProposalId, Tick};

use crate::community::{audit_dir, Community};
use crate::error::CliError;
use crate::grammar::{parse_action, tokenize};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireRequest {
    pub id: String,
    pub method: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Debug, Serialize)]
pub struct WireError {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Serialize)]
pub struct WireResponse {
    pub id: Value,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<WireError>,
}

impl WireResponse {
    fn ok(id: Value, result: Value) -> Self {
        WireResponse { id, ok: true, result: Some(result), error: None }
    }

    fn err(id: Value, code: &str, message: impl Into<String>) -> Self {
        WireResponse { id, ok: false, result: None, error: Some(WireError { code: code.into(), message: message.into() }) }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ActParams {
    #[serde(rename = "as")]
    actor: Option<MemberId>,
    at: Option<Tick>,
    action: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SignParams {
    #[serde(rename = "as")]
    actor: MemberId,
    at: Option<Tick>,
    petition: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DelegateParams {
    #[serde(rename = "as")]
    actor: MemberId,
    at: Option<Tick>,
    to: String,
    topic: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TallyParams {
    proposal: ProposalId,
    now: Option<Tick>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TriggerParams {
    now: Tick,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoParams {}

fn params<T: for<'de> Deserialize<'de>>(v: Value) -> Result<T, CliError> {
    let v = if v.is_null() { json!({}) } else { v };
    serde_json::from_value(v).map_err(|e| CliError::Usage(format!("params: {e}")))
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize to JSON")
}

/// Applies one action line. The CLI's `act` goes through here too.
pub fn act_line(c: &mut Community, actor: Option<&MemberId>, at: Option<Tick>, line: &[String]) -> Result<Value, CliError> {
    let at = at.unwrap_or_else(|| c.now());
    let cmd = parse_action(line, actor, at)?;
    let applied = c.act(cmd)?;
    Ok(json!({ "hash": applied.hash.to_hex(), "seq": applied.seq, "events": applied.events.len() }))
}

/// Dispatches one request against the community.
pub fn dispatch(c: &mut Community, method: &str, p: Value) -> Result<Value, CliError> {
    match method {
        "act" => {
            let p: ActParams = params(p)?;
            act_line(c, p.actor.as_ref(), p.at, &tokenize(&p.action))
        }
        "sign" => {
            let p: SignParams = params(p)?;
            act_line(c, Some(&p.actor), p.at, &["sign".into(), format!("petition={}", p.petition)])
        }
        "delegate" => {
            let p: DelegateParams = params(p)?;
            let mut line = vec!["delegate".to_owned(), format!("to={}", p.to)];
            line.extend(p.topic.map(|t| format!("topic={t}")));
            act_line(c, Some(&p.actor), p.at, &line)
        }
        "tally" => {
            let p: TallyParams = params(p)?;
            let (report, _) = c.tally(&p.proposal, p.now)?;
            Ok(to_json(&report))
        }
        "triggers" => {
            let p: TriggerParams = params(p)?;
            let events = c.advance(p.now)?;
            Ok(json!({ "events": events.len(), "head_hash": c.state().head_hash.to_hex() }))
        }
        "audit" => {
            let _: NoParams = params(p)?;
            Ok(to_json(&audit_dir(c.dir())?))
        }
        "state" => {
            let _: NoParams = params(p)?;
            Ok(to_json(&c.summary()))
        }
        other => Err(CliError::Usage(format!("unknown method `{other}`"))),
    }
}

/// Handles one raw line. Never fails: problems become error responses.
pub fn handle_line(community: &Mutex<Community>, line: &str) -> WireResponse {
    let raw: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return WireResponse::err(Value::Null, "parse", e.to_string()),
    };
    let id = raw.get("id").cloned().unwrap_or(Value::Null);
    let req: WireRequest = match serde_json::from_value(raw) {
        Ok(r) => r,
        Err(e) => return WireResponse::err(id, "invalid_request", e.to_string()),
    };
    let mut c = community.lock().unwrap_or_else(|p| p.into_inner());
    match dispatch(&mut c, &req.method, req.params) {
        Ok(result) => WireResponse::ok(id, result),
        Err(e) => WireResponse::err(id, e.code(), e.to_string()),
    }
}

/// Request loop over any line reader and writer; returns at end of input.
pub fn serve_lines(community: &Mutex<Community>, input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = handle_line(community, &line);
        serde_json::to_writer(&mut output, &resp)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

pub fn serve_stdio(dir: &Path) -> Result<(), CliError> {
    let community = Mutex::new(Community::open(dir)?);
    let stdin = std::io::stdin();
    serve_lines(&community, stdin.lock(), std::io::stdout().lock())?;
    Ok(())
}

/// Accepts connections on a unix socket, one thread each. Writes still
/// happen one at a time, in the order the lock is taken.
#[cfg(unix)]
pub fn serve_socket(dir: &Path, socket: &Path) -> Result<(), CliError> {
    use std::os::unix::net::UnixListener;

    let community = Arc::new(Mutex::new(Community::open(dir)?));
    let listener = UnixListener::bind(socket)?;
    for stream in listener.incoming() {
        let stream = stream?;
        let community = Arc::clone(&community);
        std::thread::spawn(move || {
            let Ok(reader) = stream.try_clone() else { return };
            let _ = serve_lines(&community, BufReader::new(reader), stream);
        });
    }
    Ok(())
}

#[cfg(not(unix))]
pub fn serve_socket(_dir: &Path, _socket: &Path) -> Result<(), CliError> {
    Err(CliError::Usage("socket transport needs a unix platform".into()))
}
