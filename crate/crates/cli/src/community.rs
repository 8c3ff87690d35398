//! A community directory on disk and the verbs that operate on it.
//!
//! ```text
//! DIR/events.log       hash-chained event log, one record per line
//! DIR/rejections.log   hash-chained journal of refused actions
//! DIR/config           the setup file `init` was given, verbatim
//! DIR/snapshot         canonical encoding of the current state
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use voicegov_core::canonical;
use voicegov_core::config::ConfigError;
use voicegov_core::domain::{
    validate_ruleset, AmendmentPolicy, Command, CommunityState, Digest, Event, EventKind, Founder, GovernanceMode,
    MemberId, ProposalId, ProposalStatus, RoleDef, Rule, RuleSet, TallyResult, Tick, TriggerSpec,
};
use voicegov_core::engine::{self, logfile, AuditReport, Engine, EngineError};

use crate::error::CliError;

pub const EVENTS: &str = "events.log";
pub const REJECTIONS: &str = "rejections.log";
pub const CONFIG: &str = "config";
pub const SNAPSHOT: &str = "snapshot";

/// The setup file given to `init`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommunitySetup {
    pub mode: GovernanceMode,
    pub roles: Vec<RoleDef>,
    pub founders: Vec<Founder>,
    /// Members who join at tick 0 after founding.
    pub members: Vec<MemberId>,
    pub rules: Vec<Rule>,
    pub amendment_policy: AmendmentPolicy,
    pub triggers: Vec<TriggerSpec>,
}

fn config_err(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError { path: path.into(), message: message.into() }
}

impl CommunitySetup {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let setup: CommunitySetup = toml::from_str(text).map_err(|e| config_err("", e.message().to_owned()))?;
        setup.validate()?;
        Ok(setup)
    }

    fn ruleset(&self) -> RuleSet {
        RuleSet { version: 0, rules: self.rules.clone(), amendment_policy: self.amendment_policy }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.mode.validate().map_err(|m| config_err("mode", m))?;
        if let Err(violations) = validate_ruleset(&self.ruleset()) {
            let v = &violations[0];
            let path = match v.rule.as_ref().and_then(|id| self.rules.iter().position(|r| &r.id == id)) {
                Some(i) => format!("rules[{i}]"),
                None => "rules".into(),
            };
            return Err(config_err(path, v.message.clone()));
        }
        for (i, f) in self.founders.iter().enumerate() {
            if let Some(r) = f.roles.iter().find(|r| !self.roles.iter().any(|d| &d.id == *r)) {
                return Err(config_err(format!("founders[{i}].roles"), format!("undeclared role `{r}`")));
            }
        }
        Ok(())
    }

    /// Genesis commands: the founding, then one join per listed member.
    pub fn genesis(&self) -> Vec<Command> {
        let founding = EventKind::CommunityFounded {
            mode: self.mode.clone(),
            ruleset: self.ruleset(),
            roles: self.roles.clone(),
            founders: self.founders.clone(),
            triggers: self.triggers.clone(),
        };
        std::iter::once(Command::system(0, founding))
            .chain(self.members.iter().map(|m| Command::system(0, EventKind::MemberJoined { member: m.clone() })))
            .collect()
    }
}

/// What an applied action produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Applied {
    /// Hash of the submitted action's own event.
    pub hash: Digest,
    pub seq: u64,
    /// Every event appended, follow-ups included.
    pub events: Vec<Event>,
}

/// Rendering of a proposal's tally.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TallyReport {
    pub proposal: ProposalId,
    pub status: ProposalStatus,
    pub closes_at: Tick,
    /// False while the proposal is still open; the tally is then provisional.
    pub closed: bool,
    pub tally: TallyResult,
}

impl TallyReport {
    pub fn render(&self) -> Result<String, CliError> {
        render(self)
    }
}

/// Short state summary for `state`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateSummary {
    pub head_hash: Digest,
    pub event_count: u64,
    pub last_tick: Option<Tick>,
    pub mode: GovernanceMode,
    pub ruleset_version: u64,
    pub active_members: u64,
    pub open_proposals: Vec<ProposalId>,
}

pub struct Community {
    dir: PathBuf,
    engine: Engine,
}

fn encoding(e: impl std::fmt::Display) -> CliError {
    CliError::Invalid(e.to_string())
}

impl Community {
    /// Creates a community in `dir`, which must be missing or empty.
    pub fn init(dir: &Path, setup_text: &str) -> Result<Self, CliError> {
        if dir.exists() && (!dir.is_dir() || std::fs::read_dir(dir)?.next().is_some()) {
            return Err(CliError::PathExists(dir.display().to_string()));
        }
        let setup = CommunitySetup::from_toml(setup_text)?;
        let mut engine = Engine::new();
        for cmd in setup.genesis() {
            engine.submit(cmd).map_err(|e| match e {
                EngineError::Rejected(r) => CliError::Config(config_err(
                    "members",
                    format!("genesis rejected by {}", r.violations.iter().map(|v| v.as_str()).collect::<Vec<_>>().join(",")),
                )),
                other => CliError::Config(config_err("", other.to_string())),
            })?;
        }
        std::fs::create_dir_all(dir)?;
        logfile::write_log(&dir.join(EVENTS), engine.log())?;
        std::fs::write(dir.join(REJECTIONS), "")?;
        std::fs::write(dir.join(CONFIG), setup_text)?;
        logfile::write_snapshot(&dir.join(SNAPSHOT), engine.state())?;
        Ok(Community { dir: dir.to_owned(), engine })
    }

    /// Opens a community, verifying the log chain, its replay and the journal.
    pub fn open(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(EVENTS);
        if !path.is_file() {
            return Err(CliError::NotFound(format!("no community at {}", dir.display())));
        }
        let events = logfile::read_log(&path)?;
        let engine = engine::replay(&events)?;
        logfile::read_journal(&dir.join(REJECTIONS))?;
        Ok(Community { dir: dir.to_owned(), engine })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn state(&self) -> &CommunityState {
        self.engine.state()
    }

    pub fn log(&self) -> &[Event] {
        self.engine.log()
    }

    /// Default tick for a new action: the last recorded one.
    pub fn now(&self) -> Tick {
        self.state().last_tick.unwrap_or(0)
    }

    fn persist(&self, events: &[Event]) -> Result<(), CliError> {
        if !events.is_empty() {
            logfile::append_events(&self.dir.join(EVENTS), events)?;
            logfile::write_snapshot(&self.dir.join(SNAPSHOT), self.state())?;
        }
        Ok(())
    }

    /// Authorizes and applies one command. Refusals go to the journal.
    pub fn act(&mut self, cmd: Command) -> Result<Applied, CliError> {
        match self.engine.submit(cmd) {
            Ok(events) => {
                self.persist(&events)?;
                let root = &events[0];
                Ok(Applied { hash: root.hash, seq: root.seq, events })
            }
            Err(EngineError::Rejected(r)) => {
                logfile::append_rejections(&self.dir.join(REJECTIONS), std::slice::from_ref(&r))?;
                Err(CliError::Rejected(r.violations))
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Closes `id` if it is due at `now`, then renders its result. Running it
    /// again on a closed proposal renders the same result and appends nothing.
    pub fn tally(&mut self, id: &ProposalId, now: Option<Tick>) -> Result<(TallyReport, Vec<Event>), CliError> {
        let now = now.unwrap_or_else(|| self.now());
        if !self.state().proposals.contains_key(id) {
            return Err(CliError::NotFound(format!("proposal `{id}`")));
        }
        let events = self.engine.close(id, now.max(self.now()))?;
        self.persist(&events)?;
        let p = &self.state().proposals[id];
        let report = match &p.result {
            Some(result) => TallyReport {
                proposal: id.clone(),
                status: p.status,
                closes_at: p.spec.closes_at,
                closed: true,
                tally: result.clone(),
            },
            None => {
                let (_, tally) = self.engine.preview_close(id, now)?;
                TallyReport { proposal: id.clone(), status: p.status, closes_at: p.spec.closes_at, closed: false, tally }
            }
        };
        Ok((report, events))
    }

    /// Tick advance: closes due proposals and fires triggers.
    pub fn advance(&mut self, now: Tick) -> Result<Vec<Event>, CliError> {
        let events = self.engine.advance(now)?;
        self.persist(&events)?;
        Ok(events)
    }

    pub fn summary(&self) -> StateSummary {
        let s = self.state();
        StateSummary {
            head_hash: s.head_hash,
            event_count: s.event_count,
            last_tick: s.last_tick,
            mode: s.mode.clone(),
            ruleset_version: s.ruleset.version,
            active_members: s.active_count(),
            open_proposals: s.open_proposals().map(|p| p.id().clone()).collect(),
        }
    }
}

/// Lenient audit straight from the bytes on disk.
pub fn audit_dir(dir: &Path) -> Result<AuditReport, CliError> {
    let path = dir.join(EVENTS);
    if !path.is_file() {
        return Err(CliError::NotFound(format!("no community at {}", dir.display())));
    }
    Ok(logfile::audit_bytes(&std::fs::read(path)?))
}

/// Strict replay of the log on disk; returns the recomputed head hash.
pub fn replay_dir(dir: &Path) -> Result<(Digest, u64), CliError> {
    let c = Community::open(dir)?;
    let snapshot = logfile::read_snapshot(&dir.join(SNAPSHOT)).map_err(encoding)?;
    if snapshot != *c.state() {
        return Err(CliError::Invalid("snapshot does not match the replayed log".into()));
    }
    Ok((c.state().head_hash, c.state().event_count))
}

/// Canonical `path=value` text for any serializable value, newline-terminated.
pub fn render<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut text = String::from_utf8(canonical::encode(value).map_err(encoding)?).expect("canonical encoding is UTF-8");
    text.push('\n');
    Ok(text)
}
