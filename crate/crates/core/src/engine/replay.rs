use crate::domain::{
    Actor, Basis, CommunityState, Digest, Event, EventKind, ExitReason, MemberId, ModerationKind, RuleId, Tick,
};

use super::{authorize, fold, Authorization, Engine, EngineError};

/// One-pass chain check: sequence numbers, parent links, hashes and tick order.
pub fn verify_chain(events: &[Event]) -> Result<(), EngineError> {
    let mut parent = Digest::ZERO;
    let mut last_at: Option<Tick> = None;
    for (i, e) in events.iter().enumerate() {
        let i = i as u64;
        let fail = |reason: String| Err(EngineError::CorruptLog { first_break_seq: i, reason });
        if e.seq != i {
            return fail(format!("expected seq {i}, found {}", e.seq));
        }
        if e.parent_hash != parent {
            return fail("parent hash does not match the previous event".into());
        }
        match e.compute_hash() {
            Ok(h) if h == e.hash => {}
            Ok(_) => return fail("hash does not match the event contents".into()),
            Err(err) => return fail(format!("event cannot be encoded: {err}")),
        }
        if last_at.is_some_and(|t| e.at < t) {
            return fail("tick regression".into());
        }
        parent = e.hash;
        last_at = Some(e.at);
    }
    Ok(())
}

/// Events a member or the system submits directly; everything else is
/// produced by the engine as a consequence of one of these.
pub fn is_root(e: &Event) -> bool {
    match &e.kind {
        EventKind::ViolationFlagged { .. }
        | EventKind::PetitionPromoted { .. }
        | EventKind::JuryDrawn { .. }
        | EventKind::ModeChanged { .. }
        | EventKind::RuleAmended { .. }
        | EventKind::PolicySet { .. } => false,
        EventKind::ProposalOpened { .. }
        | EventKind::RoleGranted { .. }
        | EventKind::RoleRevoked { .. }
        | EventKind::ModerationAction { .. } => !e.actor.is_system(),
        _ => true,
    }
}

/// Verifies the chain, then re-executes every root event through a fresh
/// engine and requires it to reproduce the log exactly.
pub fn replay(events: &[Event]) -> Result<Engine, EngineError> {
    verify_chain(events)?;
    let mut engine = Engine::new();
    let mut i = 0usize;
    while i < events.len() {
        let produced = engine.submit(events[i].command()).map_err(|err| EngineError::CorruptLog {
            first_break_seq: i as u64,
            reason: format!("event does not re-execute: {err}"),
        })?;
        for (k, p) in produced.iter().enumerate() {
            if events.get(i + k).map(|e| e.hash) != Some(p.hash) {
                return Err(EngineError::CorruptLog {
                    first_break_seq: (i + k) as u64,
                    reason: "log diverges from re-execution".into(),
                });
            }
        }
        i += produced.len();
    }
    Ok(engine)
}

pub fn replay_state(events: &[Event]) -> Result<CommunityState, EngineError> {
    replay(events).map(|e| e.state().clone())
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ModerationRecord {
    pub seq: u64,
    pub at: Tick,
    pub actor: Actor,
    pub action: ModerationKind,
    pub target: MemberId,
    pub basis: Basis,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AuditReport {
    pub chain_valid: bool,
    pub first_break_seq: Option<u64>,
    pub break_reason: Option<String>,
    /// `(rule, seq of the flagged action)` for every `ViolationFlagged` event.
    pub soft_violations: Vec<(RuleId, u64)>,
    pub moderation: Vec<ModerationRecord>,
    /// Root events that the authorizer denies against their preceding state.
    pub unauthorized: Vec<u64>,
    /// Set when the verified prefix does not re-execute to itself.
    pub replay_error: Option<String>,
    pub head_hash: Digest,
    pub event_count: u64,
}

/// Audit of an in-memory log. Never fails: corruption is reported.
pub fn audit(events: &[Event]) -> AuditReport {
    audit_prefix(events, None)
}

/// Audits `events`, which are known to be valid up to an externally
/// detected break (for example an undecodable line in a file).
pub(crate) fn audit_prefix(events: &[Event], external_break: Option<(u64, String)>) -> AuditReport {
    let (valid, brk) = match verify_chain(events) {
        Ok(()) => (events, external_break),
        Err(EngineError::CorruptLog { first_break_seq, reason }) => {
            (&events[..first_break_seq as usize], Some((first_break_seq, reason)))
        }
        Err(other) => (&events[..0], Some((0, other.to_string()))),
    };
    let mut state = CommunityState::default();
    let mut report = AuditReport {
        chain_valid: brk.is_none(),
        first_break_seq: brk.as_ref().map(|b| b.0),
        break_reason: brk.map(|b| b.1),
        soft_violations: Vec::new(),
        moderation: Vec::new(),
        unauthorized: Vec::new(),
        replay_error: None,
        head_hash: Digest::ZERO,
        event_count: valid.len() as u64,
    };
    for e in valid {
        if is_root(e) && !e.actor.is_system() {
            match authorize(&state, &e.command()) {
                Ok(Authorization::Denied(_)) | Err(_) => report.unauthorized.push(e.seq),
                _ => {}
            }
        }
        match &e.kind {
            EventKind::ViolationFlagged { rule, event_seq, .. } => report.soft_violations.push((rule.clone(), *event_seq)),
            EventKind::ModerationAction { action, target, basis } => report.moderation.push(ModerationRecord {
                seq: e.seq,
                at: e.at,
                actor: e.actor.clone(),
                action: *action,
                target: target.clone(),
                basis: basis.clone(),
            }),
            EventKind::MemberExited { member, reason: ExitReason::Removed, basis } => {
                report.moderation.push(ModerationRecord {
                    seq: e.seq,
                    at: e.at,
                    actor: e.actor.clone(),
                    action: ModerationKind::Ban,
                    target: member.clone(),
                    basis: basis.clone(),
                })
            }
            _ => {}
        }
        fold(&mut state, e);
    }
    report.head_hash = state.head_hash;
    if let Err(err) = replay(valid) {
        report.replay_error = Some(err.to_string());
    }
    report
}
