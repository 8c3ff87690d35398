//! Authorization of member actions against the current mode and rule set.
//! Only `state` is consulted; holding a role never bypasses a rule.

use crate::domain::{
    ActionKind, Actor, Basis, Command, CommunityState, Enforcement, EventKind, ExitReason, GovernanceMode,
    MemberId, ModeKind, ModerationKind, PowerKind, ProposalKind, ProposalStatus, ProposalSubject, Requirement,
    RuleId, TallyMethod,
};

use super::EngineError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Authorization {
    Allowed,
    /// Only Soft rules were violated; the action goes through and is flagged.
    FlagOnly(Vec<RuleId>),
    /// A Hard rule, the mode, or a missing power forbids the action.
    Denied(Vec<RuleId>),
}

/// The rule-scoping category of a member-submitted event.
pub fn action_kind(kind: &EventKind) -> Option<ActionKind> {
    Some(match kind {
        EventKind::MemberJoined { .. } => ActionKind::MemberJoined,
        EventKind::MemberExited { reason: ExitReason::Voluntary, .. } => ActionKind::MemberExited,
        EventKind::MemberExited { reason: ExitReason::Removed, .. } => ActionKind::MemberRemoved,
        EventKind::ContributionRecorded { .. } => ActionKind::ContributionRecorded,
        EventKind::ProposalOpened { .. } => ActionKind::ProposalOpened,
        EventKind::BallotCast { .. } => ActionKind::BallotCast,
        EventKind::DelegationSet { .. } => ActionKind::DelegationSet,
        EventKind::DelegationRevoked { .. } => ActionKind::DelegationRevoked,
        EventKind::PetitionOpened { .. } => ActionKind::PetitionOpened,
        EventKind::PetitionSigned { .. } => ActionKind::PetitionSigned,
        EventKind::RoleGranted { .. } => ActionKind::RoleGranted,
        EventKind::RoleRevoked { .. } => ActionKind::RoleRevoked,
        EventKind::ModerationAction { action, .. } => action.action_kind(),
        EventKind::BlocDeclared { .. } => ActionKind::BlocDeclared,
        _ => return None,
    })
}

fn target_of(kind: &EventKind) -> Option<&MemberId> {
    match kind {
        EventKind::MemberExited { member, .. }
        | EventKind::ContributionRecorded { member, .. }
        | EventKind::RoleGranted { member, .. }
        | EventKind::RoleRevoked { member, .. } => Some(member),
        EventKind::ModerationAction { target, .. } => Some(target),
        EventKind::DelegationSet { delegate, .. } => Some(delegate),
        _ => None,
    }
}

fn basis_of(kind: &EventKind) -> &Basis {
    match kind {
        EventKind::MemberExited { basis, .. }
        | EventKind::RoleGranted { basis, .. }
        | EventKind::RoleRevoked { basis, .. }
        | EventKind::ModerationAction { basis, .. } => basis,
        _ => &None,
    }
}

/// The moderation a removal or moderation action amounts to, if any.
fn moderation_of(kind: &EventKind) -> Option<(ModerationKind, &MemberId)> {
    match kind {
        EventKind::ModerationAction { action, target, .. } => Some((*action, target)),
        EventKind::MemberExited { member, reason: ExitReason::Removed, .. } => Some((ModerationKind::Ban, member)),
        _ => None,
    }
}

/// Whether `basis` names an adopted proposal of `kind`. Appeals must also
/// match the moderation being carried out, and `jury` requires the appeal
/// to have been decided by a jury verdict.
fn basis_holds(state: &CommunityState, basis: &Basis, kind: ProposalKind, cmd: &EventKind, jury: bool) -> bool {
    let Some(p) = basis.as_ref().and_then(|id| state.proposals.get(id)) else {
        return false;
    };
    if p.status != ProposalStatus::Adopted || p.kind() != kind {
        return false;
    }
    if let ProposalSubject::ModerationAppeal { action, target } = &p.spec.subject {
        let Some((done, on)) = moderation_of(cmd) else {
            return false;
        };
        if *action != done || target != on {
            return false;
        }
        if jury && !matches!(p.spec.method, TallyMethod::JuryVerdict { .. }) {
            return false;
        }
    }
    true
}

fn mode_id(mode: ModeKind) -> RuleId {
    let name = serde_json::to_value(mode).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
    RuleId::from(format!("mode:{name}"))
}

fn power_id(power: PowerKind) -> RuleId {
    let name = serde_json::to_value(power).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
    RuleId::from(format!("power:{name}"))
}

/// Denials that follow from the governance mode and the actor's powers.
fn mode_violations(state: &CommunityState, actor: &MemberId, kind: &EventKind) -> Vec<RuleId> {
    let mode = state.mode.kind();
    let mut out = Vec::new();
    let has = |p: PowerKind| state.has_power(actor, p);

    if let Some((action, target)) = moderation_of(kind) {
        let power = action.required_power();
        if !has(power) {
            out.push(power_id(power));
        }
        let basis = basis_of(kind);
        let needs_appeal = match mode {
            ModeKind::AdminOnly | ModeKind::Representative => false,
            ModeKind::Oligarchy => action == ModerationKind::Ban && state.is_power_holder(target),
            ModeKind::DirectDemocracy | ModeKind::Consensus => action == ModerationKind::Ban,
            ModeKind::JuryMode => true,
        };
        let jury = mode == ModeKind::JuryMode;
        if needs_appeal && !basis_holds(state, basis, ProposalKind::ModerationAppeal, kind, jury) {
            out.push(mode_id(mode));
        }
        return out;
    }

    match kind {
        EventKind::RoleGranted { .. } | EventKind::RoleRevoked { .. } => {
            if !matches!(mode, ModeKind::AdminOnly | ModeKind::Oligarchy) {
                out.push(mode_id(mode));
            } else if !has(PowerKind::ManageRoles) {
                out.push(power_id(PowerKind::ManageRoles));
            }
        }
        EventKind::ProposalOpened { proposal, .. } => {
            let kind = proposal.kind();
            let allowed = match mode {
                ModeKind::AdminOnly | ModeKind::Oligarchy => state.is_power_holder(actor),
                ModeKind::Representative => {
                    state.is_power_holder(actor) || matches!(kind, ProposalKind::RoleElection | ProposalKind::Recall)
                }
                ModeKind::DirectDemocracy | ModeKind::Consensus | ModeKind::JuryMode => true,
            };
            if !allowed {
                out.push(mode_id(mode));
            }
            match (&state.mode, proposal.method) {
                (GovernanceMode::Consensus { threshold }, TallyMethod::Referendum { approval, .. })
                    if approval < *threshold =>
                {
                    out.push(mode_id(mode));
                }
                (GovernanceMode::JuryMode { .. }, method)
                    if kind == ProposalKind::ModerationAppeal && !matches!(method, TallyMethod::JuryVerdict { .. }) =>
                {
                    out.push(mode_id(mode));
                }
                _ => {}
            }
            if kind == ProposalKind::Amendment {
                let policy = &state.ruleset.amendment_policy;
                let meets = matches!(proposal.method, TallyMethod::Referendum { quorum, approval }
                    if quorum >= policy.quorum && approval >= policy.approval_threshold);
                if !meets {
                    out.push(RuleId::from("policy:amendment"));
                }
            }
        }
        EventKind::PetitionOpened { .. } if mode == ModeKind::AdminOnly && !state.is_power_holder(actor) => {
            out.push(mode_id(mode));
        }
        _ => {}
    }
    out.dedup();
    out
}

fn requirement_holds(state: &CommunityState, actor: &MemberId, kind: &EventKind, req: &Requirement) -> bool {
    match req {
        Requirement::ActorHasRole(role) => state.holds_role(actor, role),
        Requirement::ActorHasPower(power) => state.has_power(actor, *power),
        Requirement::TargetLacksRole(role) => target_of(kind).is_none_or(|t| !state.holds_role(t, role)),
        Requirement::TargetNotActor => target_of(kind).is_none_or(|t| t != actor),
        Requirement::AdoptedProposal(pk) => basis_holds(state, basis_of(kind), *pk, kind, false),
    }
}

/// Evaluates a proposed command against `state`.
///
/// System-actored commands carry no actor to bind and are always allowed;
/// which system commands may be submitted at all is a validation concern.
pub fn authorize(state: &CommunityState, cmd: &Command) -> Result<Authorization, EngineError> {
    let Actor::Member(actor) = &cmd.actor else {
        return Ok(Authorization::Allowed);
    };
    if !state.members.contains_key(actor) {
        return Err(EngineError::UnknownActor(actor.clone()));
    }
    let mut denied = mode_violations(state, actor, &cmd.kind);
    let mut flagged = Vec::new();
    if let Some(action) = action_kind(&cmd.kind) {
        let mode = state.mode.kind();
        for rule in &state.ruleset.rules {
            let c = &rule.constraint;
            let in_scope =
                (c.actions.is_empty() || c.actions.contains(&action)) && (c.modes.is_empty() || c.modes.contains(&mode));
            if !in_scope || c.requires.iter().all(|r| requirement_holds(state, actor, &cmd.kind, r)) {
                continue;
            }
            match rule.enforcement {
                Enforcement::Hard => denied.push(rule.id.clone()),
                Enforcement::Soft => flagged.push(rule.id.clone()),
            }
        }
    }
    Ok(if !denied.is_empty() {
        Authorization::Denied(denied)
    } else if !flagged.is_empty() {
        Authorization::FlagOnly(flagged)
    } else {
        Authorization::Allowed
    })
}
