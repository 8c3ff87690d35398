//! The event-sourced state machine: validation, authorization, append,
//! fold, replay and audit.

mod authorize;
mod derive;
mod fold;
pub mod logfile;
mod replay;
mod validate;

use thiserror::Error;

use crate::canonical::EncodingError;
use crate::domain::{
    Command, CommunityState, Digest, Event, EventKind, MemberId, ProposalId, ProposalStatus, RuleId,
    TallyResult, Tick,
};
use crate::lifecycle;
use crate::mechanisms::MechanismError;

pub use authorize::{action_kind, authorize, Authorization};
pub use derive::compute_close;
pub use fold::{fold, fold_all};
pub use replay::{audit, is_root, replay, replay_state, verify_chain, AuditReport, ModerationRecord};

/// A command refused by a Hard rule or by mode authorization.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedAction {
    pub command: Command,
    pub violations: Vec<RuleId>,
    pub at: Tick,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown actor `{0}`")]
    UnknownActor(MemberId),
    #[error("tick {at} precedes the last recorded tick {last}")]
    TickOrder { last: Tick, at: Tick },
    #[error("corrupt log at seq {first_break_seq}: {reason}")]
    CorruptLog { first_break_seq: u64, reason: String },
    #[error("invalid action: {0}")]
    Invalid(String),
    #[error("rejected by {}", join_ids(&.0.violations))]
    Rejected(Box<RejectedAction>),
    #[error("not found: {0}")]
    NotFound(String),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

fn join_ids(ids: &[RuleId]) -> String {
    ids.iter().map(|r| r.as_str()).collect::<Vec<_>>().join(", ")
}

pub(crate) fn invalid(msg: impl Into<String>) -> EngineError {
    EngineError::Invalid(msg.into())
}

/// Single-writer engine holding the materialized state and the in-memory log.
#[derive(Debug, Clone, Default)]
pub struct Engine {
    state: CommunityState,
    log: Vec<Event>,
    rejections: Vec<RejectedAction>,
}

impl Engine {
    pub fn new() -> Self {
        Engine::default()
    }

    pub fn state(&self) -> &CommunityState {
        &self.state
    }

    pub fn log(&self) -> &[Event] {
        &self.log
    }

    pub fn rejections(&self) -> &[RejectedAction] {
        &self.rejections
    }

    pub fn head_hash(&self) -> Digest {
        self.state.head_hash
    }

    pub fn into_log(self) -> Vec<Event> {
        self.log
    }

    pub fn authorize(&self, cmd: &Command) -> Result<Authorization, EngineError> {
        authorize(&self.state, cmd)
    }

    /// Validates, authorizes and applies `cmd`, returning every event it
    /// appended: the action itself, any `ViolationFlagged` events, then the
    /// system-actored consequences (jury draws, promotions, effects).
    pub fn submit(&mut self, cmd: Command) -> Result<Vec<Event>, EngineError> {
        if let Some(last) = self.state.last_tick {
            if cmd.at < last {
                return Err(EngineError::TickOrder { last, at: cmd.at });
            }
        }
        validate::validate(&self.state, &cmd)?;
        let flags = match authorize(&self.state, &cmd)? {
            Authorization::Allowed => Vec::new(),
            Authorization::FlagOnly(rules) => rules,
            Authorization::Denied(violations) => {
                let rejected = RejectedAction { at: cmd.at, violations, command: cmd };
                self.rejections.push(rejected.clone());
                return Err(EngineError::Rejected(Box::new(rejected)));
            }
        };
        let start = self.log.len();
        let at = cmd.at;
        let actor = cmd.actor.member().cloned();
        let root = self.append(cmd)?;
        if let Some(actor) = actor {
            for rule in flags {
                let kind = EventKind::ViolationFlagged { rule, actor: actor.clone(), event_seq: root.seq };
                self.append(Command::system(at, kind))?;
            }
        }
        self.derive_from(&root)?;
        Ok(self.log[start..].to_vec())
    }

    fn append(&mut self, cmd: Command) -> Result<Event, EngineError> {
        let event = Event::seal(self.state.next_seq(), self.state.head_hash, cmd)?;
        fold(&mut self.state, &event);
        self.log.push(event.clone());
        Ok(event)
    }

    fn derive_from(&mut self, event: &Event) -> Result<(), EngineError> {
        for kind in derive::follow_ups(&self.state, event) {
            let next = self.append(Command::system(event.at, kind))?;
            self.derive_from(&next)?;
        }
        Ok(())
    }

    /// Result the proposal would close with at `now`, without applying it.
    pub fn preview_close(&self, id: &ProposalId, now: Tick) -> Result<(ProposalStatus, TallyResult), EngineError> {
        let p = self.state.proposals.get(id).ok_or_else(|| EngineError::NotFound(format!("proposal `{id}`")))?;
        Ok(compute_close(&self.state, p, now))
    }

    /// Closes one proposal if it is open and due; a no-op otherwise.
    pub fn close(&mut self, id: &ProposalId, now: Tick) -> Result<Vec<Event>, EngineError> {
        let p = self.state.proposals.get(id).ok_or_else(|| EngineError::NotFound(format!("proposal `{id}`")))?;
        if p.status.is_terminal() || now < p.spec.closes_at {
            return Ok(Vec::new());
        }
        let (status, tally) = compute_close(&self.state, p, now);
        self.submit(Command::system(now, EventKind::ProposalClosed { proposal: id.clone(), status, tally }))
    }

    /// Closes every open proposal due at `now`, in id order.
    pub fn close_due(&mut self, now: Tick) -> Result<Vec<Event>, EngineError> {
        let due: Vec<ProposalId> =
            self.state.open_proposals().filter(|p| p.spec.closes_at <= now).map(|p| p.id().clone()).collect();
        let mut out = Vec::new();
        for id in due {
            out.extend(self.close(&id, now)?);
        }
        Ok(out)
    }

    /// Fires every trigger whose condition holds at `now`.
    pub fn fire_triggers(&mut self, now: Tick) -> Result<Vec<Event>, EngineError> {
        let mut out = Vec::new();
        for kind in lifecycle::check_triggers(&self.state, now) {
            out.extend(self.submit(Command::system(now, kind))?);
        }
        Ok(out)
    }

    /// Tick advance: close due proposals, then evaluate triggers.
    pub fn advance(&mut self, now: Tick) -> Result<Vec<Event>, EngineError> {
        let mut out = self.close_due(now)?;
        out.extend(self.fire_triggers(now)?);
        Ok(out)
    }
}
