use std::collections::BTreeSet;

use crate::domain::{
    Actor, Ballot, CommunityState, DelegationEdge, Event, EventKind, Member, MemberId,
    ModerationKind, Petition, PetitionStatus, Proposal, ProposalStatus, Role, RuleSet, TallyMethod,
    TriggerKind, TriggerState,
};

fn exit_member(state: &mut CommunityState, id: &MemberId) {
    let Some(member) = state.members.get_mut(id) else {
        return;
    };
    member.active = false;
    for role in std::mem::take(&mut member.roles) {
        if let Some(r) = state.roles.get_mut(&role) {
            r.holders.remove(id);
        }
    }
    state.delegations.remove(id);
}

/// Applies one event to the state. Events are assumed to have been
/// validated when they were appended; folding never fails.
pub fn fold(state: &mut CommunityState, event: &Event) {
    let at = event.at;
    match &event.kind {
        EventKind::CommunityFounded { mode, ruleset, roles, founders, triggers } => {
            state.founded = true;
            state.mode = mode.clone();
            state.ruleset = ruleset.clone();
            for def in roles {
                state.roles.insert(
                    def.id.clone(),
                    Role { id: def.id.clone(), powers: def.powers.clone(), holders: BTreeSet::new(), seats: def.seats },
                );
            }
            for f in founders {
                let mut m = Member::joined(f.member.clone(), at);
                m.roles = f.roles.clone();
                for role in &f.roles {
                    if let Some(r) = state.roles.get_mut(role) {
                        r.holders.insert(f.member.clone());
                    }
                }
                state.members.insert(m.id.clone(), m);
            }
            for spec in triggers {
                state.triggers.insert(
                    spec.id.clone(),
                    TriggerState {
                        spec: spec.clone(),
                        armed_at: at,
                        pending: BTreeSet::new(),
                        fired_count: 0,
                        below_threshold_seen: false,
                    },
                );
            }
        }
        EventKind::MemberJoined { member } => {
            state.members.insert(member.clone(), Member::joined(member.clone(), at));
        }
        EventKind::MemberExited { member, .. } => exit_member(state, member),
        EventKind::ContributionRecorded { member, amount } => {
            if let Some(m) = state.members.get_mut(member) {
                m.contributions = m.contributions.saturating_add(*amount);
            }
        }
        EventKind::ProposalOpened { proposal, origin } => {
            let electorate = match proposal.method {
                TallyMethod::JuryVerdict { .. } => BTreeSet::new(),
                _ => state.eligible_members(&proposal.eligibility, at),
            };
            state.proposals.insert(
                proposal.id.clone(),
                Proposal {
                    spec: proposal.clone(),
                    opened_at: at,
                    opened_by: event.actor.clone(),
                    origin: origin.clone(),
                    status: ProposalStatus::Open,
                    electorate,
                    ballots: Default::default(),
                    jury: None,
                    result: None,
                    closed_at: None,
                },
            );
        }
        EventKind::BallotCast { proposal, choice } => {
            if let (Some(p), Actor::Member(voter)) = (state.proposals.get_mut(proposal), &event.actor) {
                p.ballots.insert(
                    voter.clone(),
                    Ballot { proposal: proposal.clone(), voter: voter.clone(), choice: choice.clone(), cast_at: at },
                );
            }
        }
        EventKind::DelegationSet { delegate, topic } => {
            if let Actor::Member(from) = &event.actor {
                state.delegations.entry(from.clone()).or_default().insert(
                    topic.clone(),
                    DelegationEdge { delegator: from.clone(), delegate: delegate.clone(), topic: topic.clone(), set_at: at },
                );
            }
        }
        EventKind::DelegationRevoked { topic } => {
            if let Actor::Member(from) = &event.actor {
                if let Some(edges) = state.delegations.get_mut(from) {
                    edges.remove(topic);
                    if edges.is_empty() {
                        state.delegations.remove(from);
                    }
                }
            }
        }
        EventKind::PetitionOpened { petition } => {
            if let Actor::Member(opener) = &event.actor {
                state.petitions.insert(
                    petition.id.clone(),
                    Petition {
                        spec: petition.clone(),
                        opened_at: at,
                        opened_by: opener.clone(),
                        signatures: [opener.clone()].into_iter().collect(),
                        status: PetitionStatus::Collecting,
                    },
                );
            }
        }
        EventKind::PetitionSigned { petition } => {
            if let (Some(p), Actor::Member(signer)) = (state.petitions.get_mut(petition), &event.actor) {
                p.signatures.insert(signer.clone());
            }
        }
        EventKind::PetitionPromoted { petition, .. } => {
            if let Some(p) = state.petitions.get_mut(petition) {
                p.status = PetitionStatus::Promoted;
            }
        }
        EventKind::ProposalClosed { proposal, status, tally } => {
            if let Some(p) = state.proposals.get_mut(proposal) {
                p.status = *status;
                p.result = Some(tally.clone());
                p.closed_at = Some(at);
            }
            for t in state.triggers.values_mut() {
                if t.pending.remove(proposal) && t.pending.is_empty() {
                    t.armed_at = at;
                }
            }
        }
        EventKind::RoleGranted { role, member, .. } => {
            if let Some(r) = state.roles.get_mut(role) {
                r.holders.insert(member.clone());
            }
            if let Some(m) = state.members.get_mut(member) {
                m.roles.insert(role.clone());
            }
        }
        EventKind::RoleRevoked { role, member, .. } => {
            if let Some(r) = state.roles.get_mut(role) {
                r.holders.remove(member);
            }
            if let Some(m) = state.members.get_mut(member) {
                m.roles.remove(role);
            }
        }
        EventKind::ModeChanged { to, .. } => state.mode = to.clone(),
        EventKind::RuleAmended { new_version, rules, amendment_policy, .. } => {
            state.ruleset = RuleSet { version: *new_version, rules: rules.clone(), amendment_policy: *amendment_policy };
        }
        EventKind::PolicySet { key, value, .. } => {
            state.policies.insert(key.clone(), value.clone());
        }
        EventKind::ModerationAction { action, target, .. } => {
            if *action == ModerationKind::Ban {
                exit_member(state, target);
            }
        }
        EventKind::ViolationFlagged { .. } => {}
        EventKind::TriggerFired { trigger, proposals } => {
            if let Some(t) = state.triggers.get_mut(trigger) {
                t.fired_count += 1;
                t.pending = proposals.iter().map(|p| p.id.clone()).collect();
                t.below_threshold_seen = false;
            }
        }
        EventKind::JuryDrawn { proposal, members, .. } => {
            if let Some(p) = state.proposals.get_mut(proposal) {
                p.electorate = members.iter().cloned().collect();
                p.jury = Some(members.clone());
            }
        }
        EventKind::BlocDeclared { bloc } => {
            state.blocs.insert(bloc.id.clone(), bloc.clone());
        }
    }
    if let Actor::Member(m) = &event.actor {
        if let Some(member) = state.members.get_mut(m) {
            member.last_active_at = member.last_active_at.max(at);
        }
    }
    let active = state.active_count();
    for t in state.triggers.values_mut() {
        if let TriggerKind::GrowthThreshold { member_count, .. } = t.spec.kind {
            if active < member_count {
                t.below_threshold_seen = true;
            }
        }
    }
    state.event_count = event.seq + 1;
    state.last_tick = Some(at);
    state.head_hash = event.hash;
}

/// Folds a whole log from the empty state, without verification.
pub fn fold_all<'a>(events: impl IntoIterator<Item = &'a Event>) -> CommunityState {
    let mut state = CommunityState::default();
    for e in events {
        fold(&mut state, e);
    }
    state
}

