//! System-actored consequences of accepted events: jury draws, petition
//! promotion, proposal closing and adoption effects.

use std::collections::{BTreeMap, BTreeSet};

use crate::domain::{
    Actor, Choice, CommunityState, Decision, Event, EventKind, MemberId, PetitionId, PetitionStatus, Proposal, ProposalKind,
    ProposalOrigin, ProposalSpec, ProposalStatus, ProposalSubject, TallyMethod, TallyResult, Tick, Weighting,
};
use crate::lifecycle;
use crate::mechanisms::{
    draw_jury, promotion_threshold, referendum_outcome, reputation_weight, resolve_with, run_election,
    tally_resolved, DelegationGraph, ElectionMethod, Resolved,
};

/// Members eligible to be counted when a proposal closes: its frozen
/// electorate (or jury) restricted to members still active.
fn counted(state: &CommunityState, p: &Proposal) -> BTreeSet<MemberId> {
    p.electorate.iter().filter(|m| state.is_active(m)).cloned().collect()
}

/// Deterministic close of `p` under the method fixed when it opened.
pub fn compute_close(state: &CommunityState, p: &Proposal, _now: Tick) -> (ProposalStatus, TallyResult) {
    let eligible = counted(state, p);
    let ballots: BTreeMap<MemberId, Choice> = p
        .ballots
        .iter()
        .filter(|(m, _)| eligible.contains(*m))
        .map(|(m, b)| (m.clone(), b.choice.clone()))
        .collect();
    let resolved: BTreeMap<MemberId, Resolved> = if p.spec.delegation {
        let edges = state.all_edges();
        let graph = DelegationGraph::new(&edges).expect("state keeps one edge per delegator and topic");
        resolve_with(&graph, &ballots, &p.spec.topic, &eligible)
    } else {
        ballots
            .into_iter()
            .map(|(m, choice)| (m.clone(), Resolved::Ballot { choice, terminal: m }))
            .collect()
    };
    let weight = |m: &MemberId| match p.spec.weighting {
        Weighting::Unit => 1.0,
        Weighting::Reputation => reputation_weight(state.member(m).map_or(0, |x| x.contributions)),
    };
    let (totals, turnout, by_cycle) = tally_resolved(&resolved, weight);
    let n = eligible.len() as u64;
    let mut result = match p.spec.method {
        TallyMethod::Referendum { quorum, approval } => referendum_outcome(totals, turnout, by_cycle, n, quorum, approval),
        TallyMethod::JuryVerdict { jury_size } => {
            let yes = totals.get("yes").copied().unwrap_or(0.0);
            let decision = if yes * 2.0 > f64::from(jury_size) { Decision::Adopted } else { Decision::Rejected };
            TallyResult {
                totals,
                turnout,
                abstained_by_cycle: by_cycle,
                eligible: n,
                quorum_required: 0,
                binding: true,
                decision,
                winners: Vec::new(),
            }
        }
        TallyMethod::Plurality | TallyMethod::Approval => {
            let method = match p.spec.method {
                TallyMethod::Approval => ElectionMethod::Approval,
                _ => ElectionMethod::Plurality,
            };
            let seats = match &p.spec.subject {
                ProposalSubject::RoleElection { seats, .. } => *seats as usize,
                _ => 1,
            };
            let candidates: Vec<MemberId> = match &p.spec.subject {
                ProposalSubject::RoleElection { candidates: Some(c), .. } => {
                    c.iter().filter(|m| state.is_active(m)).cloned().collect()
                }
                _ => state.active_members().map(|m| m.id.clone()).collect(),
            };
            let votes = resolved.iter().filter_map(|(m, r)| r.choice().map(|c| (c, weight(m))));
            let winners = run_election(&candidates, votes, method, seats).unwrap_or_default();
            TallyResult {
                totals,
                turnout,
                abstained_by_cycle: by_cycle,
                eligible: n,
                quorum_required: 0,
                binding: true,
                decision: if winners.is_empty() { Decision::NoDecision } else { Decision::Adopted },
                winners: winners.into_iter().map(|w| w.as_str().to_owned()).collect(),
            }
        }
    };
    if p.kind() == ProposalKind::Amendment
        && result.decision == Decision::Adopted
        && lifecycle::check_amendment_tally(state, &result).is_err()
    {
        result.decision = Decision::Rejected;
    }
    let status = match result.decision {
        Decision::Adopted => ProposalStatus::Adopted,
        Decision::Rejected => ProposalStatus::Rejected,
        Decision::NoDecision => ProposalStatus::Lapsed,
    };
    (status, result)
}

/// Members kept out of a jury: the appeal's target and the opener.
pub fn jury_exclusions(spec: &ProposalSpec, opener: &Actor) -> BTreeSet<MemberId> {
    let mut out = BTreeSet::new();
    if let ProposalSubject::ModerationAppeal { target, .. } = &spec.subject {
        out.insert(target.clone());
    }
    if let Actor::Member(m) = opener {
        out.insert(m.clone());
    }
    out
}

/// Draw seed: the first eight bytes of the opening event's hash, big-endian.
pub fn jury_seed(opened: &Event) -> u64 {
    let mut b = [0u8; 8];
    b.copy_from_slice(&opened.hash.0[..8]);
    u64::from_be_bytes(b)
}

fn adoption_effects(state: &CommunityState, p: &Proposal) -> Vec<EventKind> {
    let basis = p.id().clone();
    match &p.spec.subject {
        ProposalSubject::PolicyChange { key, value } => {
            vec![EventKind::PolicySet { key: key.clone(), value: value.clone(), basis }]
        }
        ProposalSubject::Amendment { .. } => lifecycle::apply_amendment(state, p).into_iter().collect(),
        ProposalSubject::ModeChange { .. } => lifecycle::transition_mode(state, p).into_iter().collect(),
        ProposalSubject::RoleElection { role, .. } => {
            let winners: Vec<MemberId> = p
                .result
                .as_ref()
                .map(|r| r.winners.iter().map(|w| MemberId::from(w.as_str())).collect())
                .unwrap_or_default();
            let holders = state.roles.get(role).map(|r| r.holders.clone()).unwrap_or_default();
            let mut out: Vec<EventKind> = holders
                .iter()
                .filter(|h| !winners.contains(h))
                .map(|h| EventKind::RoleRevoked { role: role.clone(), member: h.clone(), basis: Some(basis.clone()) })
                .collect();
            out.extend(winners.iter().filter(|w| !holders.contains(*w)).map(|w| EventKind::RoleGranted {
                role: role.clone(),
                member: w.clone(),
                basis: Some(basis.clone()),
            }));
            out
        }
        ProposalSubject::Recall { role, member } => {
            if state.holds_role(member, role) {
                vec![EventKind::RoleRevoked { role: role.clone(), member: member.clone(), basis: Some(basis) }]
            } else {
                Vec::new()
            }
        }
        ProposalSubject::ModerationAppeal { action, target } => {
            vec![EventKind::ModerationAction { action: *action, target: target.clone(), basis: Some(basis) }]
        }
    }
}

/// System events that must immediately follow `event` (already folded).
pub(crate) fn follow_ups(state: &CommunityState, event: &Event) -> Vec<EventKind> {
    match &event.kind {
        EventKind::ProposalOpened { proposal, .. } => {
            let TallyMethod::JuryVerdict { jury_size } = proposal.method else {
                return Vec::new();
            };
            let pool: Vec<MemberId> = state.eligible_members(&proposal.eligibility, event.at).into_iter().collect();
            let exclusions = jury_exclusions(proposal, &event.actor);
            let seed = jury_seed(event);
            let subject = match &proposal.subject {
                ProposalSubject::ModerationAppeal { target, .. } => Some(target),
                _ => None,
            };
            let members = draw_jury(&pool, jury_size as usize, seed, &exclusions, subject)
                .expect("jury pool size is checked before the proposal is accepted");
            vec![EventKind::JuryDrawn { proposal: proposal.id.clone(), members, seed, exclusions }]
        }
        EventKind::PetitionOpened { petition } => promotion(state, &petition.id, event.at),
        EventKind::PetitionSigned { petition } => promotion(state, petition, event.at),
        EventKind::PetitionPromoted { petition, .. } => {
            let Some(p) = state.petitions.get(petition) else {
                return Vec::new();
            };
            vec![EventKind::ProposalOpened {
                proposal: p.spec.target.open_at(event.at),
                origin: ProposalOrigin::Petition(petition.clone()),
            }]
        }
        EventKind::ProposalClosed { proposal, status: ProposalStatus::Adopted, .. } => {
            state.proposals.get(proposal).map(|p| adoption_effects(state, p)).unwrap_or_default()
        }
        EventKind::TriggerFired { trigger, proposals } => proposals
            .iter()
            .map(|spec| EventKind::ProposalOpened {
                proposal: spec.clone(),
                origin: ProposalOrigin::Trigger(trigger.clone()),
            })
            .collect(),
        _ => Vec::new(),
    }
}

fn promotion(state: &CommunityState, id: &PetitionId, now: Tick) -> Vec<EventKind> {
    let Some(p) = state.petitions.get(id) else {
        return Vec::new();
    };
    if p.status != PetitionStatus::Collecting {
        return Vec::new();
    }
    let eligible = state.eligible_members(&p.spec.eligibility, now).len() as u64;
    if (p.signatures.len() as u64) < promotion_threshold(p.spec.threshold, eligible) {
        return Vec::new();
    }
    vec![EventKind::PetitionPromoted { petition: id.clone(), proposal: p.spec.target.id.clone() }]
}
