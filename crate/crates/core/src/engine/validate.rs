//! Structural checks: does the command make sense against the current
//! state, independent of who is allowed to do it.

use std::collections::BTreeSet;

use crate::domain::{
    check_identifier, validate_rules, validate_ruleset, Actor, BlocOrigin, Choice, Command, CommunityState,
    EventKind, ExitReason, MemberId, PetitionStatus, ProposalId, ProposalKind, ProposalOrigin, ProposalSpec,
    ProposalSubject, TallyMethod, Tick, TriggerKind, Weighting,
};
use crate::lifecycle;
use crate::mechanisms::sign_petition;

use super::derive::{compute_close, jury_exclusions};
use super::{invalid, EngineError};

/// Kinds the system may submit directly; the rest of its events are derived.
fn system_root(kind: &EventKind) -> bool {
    matches!(
        kind,
        EventKind::CommunityFounded { .. }
            | EventKind::MemberJoined { .. }
            | EventKind::ContributionRecorded { .. }
            | EventKind::ProposalClosed { .. }
            | EventKind::TriggerFired { .. }
            | EventKind::BlocDeclared { .. }
    )
}

fn member_root(kind: &EventKind) -> bool {
    matches!(
        kind,
        EventKind::MemberExited { .. }
            | EventKind::ContributionRecorded { .. }
            | EventKind::ProposalOpened { .. }
            | EventKind::BallotCast { .. }
            | EventKind::DelegationSet { .. }
            | EventKind::DelegationRevoked { .. }
            | EventKind::PetitionOpened { .. }
            | EventKind::PetitionSigned { .. }
            | EventKind::RoleGranted { .. }
            | EventKind::RoleRevoked { .. }
            | EventKind::ModerationAction { .. }
            | EventKind::BlocDeclared { .. }
    )
}

fn id_ok(what: &str, id: &str) -> Result<(), EngineError> {
    check_identifier(id).map_err(|e| invalid(format!("{what}: {e}")))
}

fn active(state: &CommunityState, m: &MemberId) -> Result<(), EngineError> {
    match state.member(m) {
        None => Err(invalid(format!("unknown member `{m}`"))),
        Some(x) if !x.active => Err(invalid(format!("`{m}` is not an active member"))),
        Some(_) => Ok(()),
    }
}

fn basis_exists(state: &CommunityState, basis: &Option<ProposalId>) -> Result<(), EngineError> {
    match basis {
        Some(id) if !state.proposals.contains_key(id) => Err(invalid(format!("basis `{id}` is not a proposal"))),
        _ => Ok(()),
    }
}

/// Whether `id` is taken by a proposal or promised to a collecting petition
/// (other than `except`).
fn proposal_id_taken(state: &CommunityState, id: &ProposalId, at: Tick, except: Option<&crate::domain::PetitionId>) -> bool {
    state.proposals.contains_key(id)
        || state.petitions.values().any(|p| {
            Some(p.id()) != except && p.status_at(at) == PetitionStatus::Collecting && &p.spec.target.id == id
        })
}

/// Checks a proposal as it would be opened at `at` by `opener`.
pub(crate) fn check_spec(
    state: &CommunityState,
    spec: &ProposalSpec,
    at: Tick,
    opener: &Actor,
    except: Option<&crate::domain::PetitionId>,
) -> Result<(), EngineError> {
    id_ok("proposal id", spec.id.as_str())?;
    id_ok("topic", spec.topic.as_str())?;
    if proposal_id_taken(state, &spec.id, at, except) {
        return Err(invalid(format!("proposal id `{}` is already in use", spec.id)));
    }
    if spec.closes_at <= at {
        return Err(invalid(format!("closes_at {} must be after the opening tick {at}", spec.closes_at)));
    }
    let kind = spec.kind();
    let compatible = match spec.method {
        TallyMethod::Plurality | TallyMethod::Approval => kind == ProposalKind::RoleElection,
        TallyMethod::Referendum { .. } => kind != ProposalKind::RoleElection,
        TallyMethod::JuryVerdict { .. } => kind == ProposalKind::ModerationAppeal,
    };
    if !compatible {
        return Err(invalid(format!("{kind:?} proposals cannot be decided by {:?}", spec.method)));
    }
    match spec.method {
        TallyMethod::Referendum { approval, .. } if !approval.exceeds_half() => {
            return Err(invalid(format!("referendum approval {approval} must exceed 1/2")));
        }
        TallyMethod::JuryVerdict { jury_size } => {
            if jury_size == 0 {
                return Err(invalid("jury size must be at least 1"));
            }
            if spec.delegation || spec.weighting != Weighting::Unit {
                return Err(invalid("jury verdicts use unit weights without delegation"));
            }
            let exclusions = jury_exclusions(spec, opener);
            let pool = state
                .eligible_members(&spec.eligibility, at)
                .into_iter()
                .filter(|m| !exclusions.contains(m))
                .count();
            if pool < jury_size as usize {
                return Err(invalid(format!("jury of {jury_size} cannot be drawn from {pool} eligible members")));
            }
        }
        _ => {}
    }
    if let Some(role) = &spec.eligibility.required_role {
        if !state.roles.contains_key(role) {
            return Err(invalid(format!("unknown role `{role}` in eligibility")));
        }
    }
    match &spec.subject {
        ProposalSubject::PolicyChange { key, .. } => {
            if key.is_empty() {
                return Err(invalid("policy key must not be empty"));
            }
        }
        ProposalSubject::Amendment { rules, amendment_policy } => {
            validate_rules(rules, amendment_policy).map_err(|v| {
                invalid(v.iter().map(|x| x.message.clone()).collect::<Vec<_>>().join("; "))
            })?;
        }
        ProposalSubject::RoleElection { role, seats, candidates } => {
            let Some(r) = state.roles.get(role) else {
                return Err(invalid(format!("unknown role `{role}`")));
            };
            if *seats == 0 || r.seats.is_some_and(|s| *seats > s) {
                return Err(invalid(format!("role `{role}` cannot seat {seats}")));
            }
            if let Some(c) = candidates {
                if let Some(m) = c.iter().find(|m| !state.members.contains_key(*m)) {
                    return Err(invalid(format!("unknown candidate `{m}`")));
                }
            }
        }
        ProposalSubject::Recall { role, member } => {
            if !state.holds_role(member, role) {
                return Err(invalid(format!("`{member}` does not hold `{role}`")));
            }
        }
        ProposalSubject::ModeChange { to } => to.validate().map_err(invalid)?,
        ProposalSubject::ModerationAppeal { target, .. } => {
            if !state.members.contains_key(target) {
                return Err(invalid(format!("unknown member `{target}`")));
            }
        }
    }
    Ok(())
}

fn check_choice(method: TallyMethod, choice: &Choice) -> Result<(), EngineError> {
    let ok = match (method, choice) {
        (_, Choice::Abstain) => true,
        (TallyMethod::Referendum { .. } | TallyMethod::JuryVerdict { .. }, c) => matches!(c, Choice::Yes | Choice::No),
        (TallyMethod::Plurality, c) => matches!(c, Choice::Pick(_)),
        (TallyMethod::Approval, Choice::Approve(set)) => !set.is_empty(),
        (TallyMethod::Approval, c) => matches!(c, Choice::Pick(_)),
    };
    if ok {
        Ok(())
    } else {
        Err(invalid(format!("choice {choice:?} is not valid for {method:?}")))
    }
}

fn check_founding(state: &CommunityState, cmd: &Command) -> Result<(), EngineError> {
    let EventKind::CommunityFounded { mode, ruleset, roles, founders, triggers } = &cmd.kind else {
        unreachable!("caller matched the kind");
    };
    if state.founded || state.event_count > 0 {
        return Err(invalid("the community is already founded"));
    }
    if !cmd.actor.is_system() {
        return Err(invalid("only the system founds a community"));
    }
    mode.validate().map_err(invalid)?;
    validate_ruleset(ruleset)
        .map_err(|v| invalid(v.iter().map(|x| x.message.clone()).collect::<Vec<_>>().join("; ")))?;
    if ruleset.version != 0 {
        return Err(invalid("a founding rule set starts at version 0"));
    }
    let mut role_ids = BTreeSet::new();
    for r in roles {
        id_ok("role id", r.id.as_str())?;
        if !role_ids.insert(&r.id) {
            return Err(invalid(format!("duplicate role `{}`", r.id)));
        }
        if r.seats == Some(0) {
            return Err(invalid(format!("role `{}` needs at least one seat", r.id)));
        }
    }
    let mut seen = BTreeSet::new();
    for f in founders {
        id_ok("founder id", f.member.as_str())?;
        if !seen.insert(&f.member) {
            return Err(invalid(format!("duplicate founder `{}`", f.member)));
        }
        if let Some(r) = f.roles.iter().find(|r| !role_ids.contains(r)) {
            return Err(invalid(format!("founder `{}` holds unknown role `{r}`", f.member)));
        }
    }
    for r in roles {
        let holders = founders.iter().filter(|f| f.roles.contains(&r.id)).count();
        if r.seats.is_some_and(|s| holders > s as usize) {
            return Err(invalid(format!("role `{}` has more founders than seats", r.id)));
        }
    }
    let mut trigger_ids = BTreeSet::new();
    for t in triggers {
        id_ok("trigger id", t.id.as_str())?;
        if !trigger_ids.insert(&t.id) {
            return Err(invalid(format!("duplicate trigger `{}`", t.id)));
        }
        if let TriggerKind::GrowthThreshold { alternative, .. } = &t.kind {
            alternative.validate().map_err(invalid)?;
        }
    }
    Ok(())
}

pub(crate) fn validate(state: &CommunityState, cmd: &Command) -> Result<(), EngineError> {
    if let EventKind::CommunityFounded { .. } = cmd.kind {
        return check_founding(state, cmd);
    }
    if !state.founded {
        return Err(invalid("the community has not been founded"));
    }
    let name = cmd.kind.name();
    let actor = match &cmd.actor {
        Actor::System => {
            if !system_root(&cmd.kind) {
                return Err(invalid(format!("{name} cannot be submitted by the system")));
            }
            None
        }
        Actor::Member(m) => {
            let Some(member) = state.member(m) else {
                return Err(EngineError::UnknownActor(m.clone()));
            };
            if !member.active {
                return Err(invalid(format!("`{m}` is not an active member")));
            }
            if !member_root(&cmd.kind) {
                return Err(invalid(format!("{name} cannot be submitted by a member")));
            }
            Some(m)
        }
    };
    let at = cmd.at;
    match &cmd.kind {
        EventKind::CommunityFounded { .. } => unreachable!("handled above"),
        EventKind::MemberJoined { member } => {
            id_ok("member id", member.as_str())?;
            if state.members.contains_key(member) {
                return Err(invalid(format!("member id `{member}` is already taken")));
            }
        }
        EventKind::MemberExited { member, reason, basis } => {
            active(state, member)?;
            basis_exists(state, basis)?;
            let actor = actor.expect("member-only kind");
            match reason {
                ExitReason::Voluntary if member != actor || basis.is_some() => {
                    return Err(invalid("a voluntary exit is made by the member, without basis"));
                }
                ExitReason::Removed if member == actor => {
                    return Err(invalid("members leave voluntarily rather than removing themselves"));
                }
                _ => {}
            }
        }
        EventKind::ContributionRecorded { member, amount } => {
            active(state, member)?;
            if *amount == 0 {
                return Err(invalid("contribution amount must be positive"));
            }
            if actor.is_some_and(|a| a != member) {
                return Err(invalid("members record only their own contributions"));
            }
        }
        EventKind::ProposalOpened { proposal, origin } => {
            if *origin != ProposalOrigin::Direct {
                return Err(invalid("members open proposals directly"));
            }
            check_spec(state, proposal, at, &cmd.actor, None)?;
        }
        EventKind::BallotCast { proposal, choice } => {
            let Some(p) = state.proposals.get(proposal) else {
                return Err(invalid(format!("unknown proposal `{proposal}`")));
            };
            if p.status.is_terminal() || at >= p.spec.closes_at {
                return Err(invalid(format!("proposal `{proposal}` is not open for ballots")));
            }
            let voter = actor.expect("member-only kind");
            if !p.electorate.contains(voter) {
                return Err(invalid(format!("`{voter}` is not in the electorate of `{proposal}`")));
            }
            check_choice(p.spec.method, choice)?;
        }
        EventKind::DelegationSet { delegate, topic } => {
            id_ok("topic", topic.as_str())?;
            active(state, delegate)?;
            if Some(delegate) == actor {
                return Err(invalid("members cannot delegate to themselves"));
            }
        }
        EventKind::DelegationRevoked { topic } => {
            let from = actor.expect("member-only kind");
            if !state.delegations.get(from).is_some_and(|e| e.contains_key(topic)) {
                return Err(invalid(format!("`{from}` has no delegation for topic `{topic}`")));
            }
        }
        EventKind::PetitionOpened { petition } => {
            id_ok("petition id", petition.id.as_str())?;
            if state.petitions.contains_key(&petition.id) {
                return Err(invalid(format!("petition id `{}` is already in use", petition.id)));
            }
            if petition.threshold == crate::domain::Fraction::ZERO {
                return Err(invalid("petition threshold must be positive"));
            }
            if petition.expires_at < at {
                return Err(invalid("petition expires before it opens"));
            }
            let opener = actor.expect("member-only kind");
            if !state.is_eligible(opener, &petition.eligibility, at) {
                return Err(invalid(format!("`{opener}` is not eligible to open this petition")));
            }
            if petition.target.period == 0 {
                return Err(invalid("petition target needs a positive voting period"));
            }
            check_spec(state, &petition.target.open_at(at), at, &Actor::System, None)?;
        }
        EventKind::PetitionSigned { petition } => {
            let Some(p) = state.petitions.get(petition) else {
                return Err(invalid(format!("unknown petition `{petition}`")));
            };
            let signer = actor.expect("member-only kind");
            let outcome = sign_petition(state, p, signer, at)?;
            if outcome.promoted {
                check_spec(state, &p.spec.target.open_at(at), at, &Actor::System, Some(petition))?;
            }
        }
        EventKind::RoleGranted { role, member, basis } | EventKind::RoleRevoked { role, member, basis } => {
            let Some(r) = state.roles.get(role) else {
                return Err(invalid(format!("unknown role `{role}`")));
            };
            active(state, member)?;
            basis_exists(state, basis)?;
            if let EventKind::RoleGranted { .. } = cmd.kind {
                if r.holders.contains(member) {
                    return Err(invalid(format!("`{member}` already holds `{role}`")));
                }
                if r.is_full() {
                    return Err(invalid(format!("role `{role}` has no free seat")));
                }
            } else if !r.holders.contains(member) {
                return Err(invalid(format!("`{member}` does not hold `{role}`")));
            }
        }
        EventKind::ModerationAction { target, basis, .. } => {
            active(state, target)?;
            basis_exists(state, basis)?;
        }
        EventKind::BlocDeclared { bloc } => {
            id_ok("bloc id", bloc.id.as_str())?;
            if bloc.members.is_empty() {
                return Err(invalid("a bloc needs members"));
            }
            if let Some(m) = bloc.members.iter().find(|m| !state.members.contains_key(*m)) {
                return Err(invalid(format!("unknown member `{m}`")));
            }
            match actor {
                Some(a) => {
                    if bloc.origin != BlocOrigin::Declared || !bloc.members.contains(a) {
                        return Err(invalid("members declare blocs they belong to"));
                    }
                    if state.blocs.contains_key(&bloc.id) {
                        return Err(invalid(format!("bloc id `{}` is already in use", bloc.id)));
                    }
                }
                None if bloc.origin != BlocOrigin::Detected => {
                    return Err(invalid("system blocs are detected blocs"));
                }
                None => {}
            }
        }
        EventKind::ProposalClosed { proposal, status, tally } => {
            let Some(p) = state.proposals.get(proposal) else {
                return Err(invalid(format!("unknown proposal `{proposal}`")));
            };
            if p.status.is_terminal() {
                return Err(invalid(format!("proposal `{proposal}` is already closed")));
            }
            if at < p.spec.closes_at {
                return Err(invalid(format!("proposal `{proposal}` closes at {}", p.spec.closes_at)));
            }
            let (expected_status, expected) = compute_close(state, p, at);
            if *status != expected_status || *tally != expected {
                return Err(invalid(format!("close of `{proposal}` does not match its tally")));
            }
        }
        EventKind::TriggerFired { .. } => {
            if !lifecycle::check_triggers(state, at).contains(&cmd.kind) {
                return Err(invalid("trigger condition does not hold"));
            }
            if let EventKind::TriggerFired { proposals, .. } = &cmd.kind {
                for spec in proposals {
                    check_spec(state, spec, at, &Actor::System, None)?;
                }
            }
        }
        EventKind::PetitionPromoted { .. }
        | EventKind::ModeChanged { .. }
        | EventKind::RuleAmended { .. }
        | EventKind::PolicySet { .. }
        | EventKind::ViolationFlagged { .. }
        | EventKind::JuryDrawn { .. } => unreachable!("rejected as non-root above"),
    }
    Ok(())
}
