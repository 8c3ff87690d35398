//! Community evolution: trigger events, mode transitions and amendments.

use thiserror::Error;

use crate::domain::{
    CommunityState, Decision, EligibilityFilter, EventKind, Fraction, PowerKind, Proposal, ProposalId,
    ProposalSpec, ProposalStatus, ProposalSubject, TallyMethod, Tick, TopicId, TriggerKind, TriggerState,
    Weighting,
};
use crate::mechanisms::quorum_required;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LifecycleError {
    #[error("proposal `{0}` was not adopted")]
    NotAdopted(ProposalId),
    #[error("proposal `{0}` has the wrong kind")]
    WrongKind(ProposalId),
    #[error("amendment policy violated: {0}")]
    PolicyViolation(String),
}

/// Quorum of the mandatory referendum opened by a growth trigger.
pub fn growth_quorum() -> Fraction {
    Fraction::new(3, 10).expect("constant")
}

/// Simple majority strictly above one half.
pub fn growth_approval() -> Fraction {
    Fraction::new(500_001, 1_000_000).expect("constant")
}

/// Latest tick of activity that counts against an abandonment trigger.
pub fn moderator_activity(state: &CommunityState, trigger: &TriggerState) -> Tick {
    state
        .roles
        .values()
        .filter(|r| r.powers.contains(&PowerKind::ModerateContent))
        .flat_map(|r| r.holders.iter())
        .filter_map(|m| state.member(m).filter(|m| m.active))
        .map(|m| m.last_active_at)
        .fold(trigger.armed_at, Tick::max)
}

fn spec(id: String, subject: ProposalSubject, now: Tick, period: Tick, method: TallyMethod) -> ProposalSpec {
    ProposalSpec {
        id: ProposalId::from(id),
        subject,
        closes_at: now + period.max(1),
        method,
        eligibility: EligibilityFilter::default(),
        topic: TopicId::wildcard(),
        delegation: false,
        weighting: Weighting::Unit,
    }
}

/// Triggers that fire at `now`, as `TriggerFired` payloads in trigger-id order.
///
/// A trigger with consequent proposals still open is disarmed. Abandonment
/// fires when no `ModerateContent` holder has acted for more than the
/// configured number of ticks since arming, and opens one election per
/// such role. Growth fires when the active count reaches the threshold
/// after having been below it, and opens a mode referendum.
pub fn check_triggers(state: &CommunityState, now: Tick) -> Vec<EventKind> {
    let mut out = Vec::new();
    for (id, t) in &state.triggers {
        if !t.pending.is_empty() {
            continue;
        }
        let n = t.fired_count + 1;
        let proposals = match &t.spec.kind {
            TriggerKind::Abandonment { inactivity_ticks } => {
                let roles: Vec<_> = state
                    .roles
                    .values()
                    .filter(|r| r.powers.contains(&PowerKind::ModerateContent))
                    .collect();
                if roles.is_empty() || now.saturating_sub(moderator_activity(state, t)) <= *inactivity_ticks {
                    continue;
                }
                roles
                    .into_iter()
                    .map(|r| {
                        let seats = r.seats.unwrap_or_else(|| (r.holders.len() as u32).max(1));
                        spec(
                            format!("{id}-{n}-{}", r.id),
                            ProposalSubject::RoleElection { role: r.id.clone(), seats, candidates: None },
                            now,
                            t.spec.voting_period,
                            TallyMethod::Plurality,
                        )
                    })
                    .collect()
            }
            TriggerKind::GrowthThreshold { member_count, alternative } => {
                if !t.below_threshold_seen || state.active_count() < *member_count {
                    continue;
                }
                vec![spec(
                    format!("{id}-{n}"),
                    ProposalSubject::ModeChange { to: alternative.clone() },
                    now,
                    t.spec.voting_period,
                    TallyMethod::Referendum { quorum: growth_quorum(), approval: growth_approval() },
                )]
            }
        };
        out.push(EventKind::TriggerFired { trigger: id.clone(), proposals });
    }
    out
}

/// The `ModeChanged` effect of an adopted mode referendum.
pub fn transition_mode(state: &CommunityState, proposal: &Proposal) -> Result<EventKind, LifecycleError> {
    let ProposalSubject::ModeChange { to } = &proposal.spec.subject else {
        return Err(LifecycleError::WrongKind(proposal.id().clone()));
    };
    if proposal.status != ProposalStatus::Adopted {
        return Err(LifecycleError::NotAdopted(proposal.id().clone()));
    }
    Ok(EventKind::ModeChanged { from: state.mode.clone(), to: to.clone(), basis: proposal.id().clone() })
}

/// The `RuleAmended` effect of an adopted amendment.
///
/// The tally is re-checked against the amendment policy in force now, so a
/// proposal cannot lower the bar it has to clear.
pub fn apply_amendment(state: &CommunityState, proposal: &Proposal) -> Result<EventKind, LifecycleError> {
    let ProposalSubject::Amendment { rules, amendment_policy } = &proposal.spec.subject else {
        return Err(LifecycleError::WrongKind(proposal.id().clone()));
    };
    if proposal.status != ProposalStatus::Adopted {
        return Err(LifecycleError::NotAdopted(proposal.id().clone()));
    }
    let Some(tally) = &proposal.result else {
        return Err(LifecycleError::NotAdopted(proposal.id().clone()));
    };
    check_amendment_tally(state, tally)?;
    crate::domain::validate_rules(rules, amendment_policy).map_err(|v| {
        LifecycleError::PolicyViolation(v.iter().map(|x| x.message.clone()).collect::<Vec<_>>().join("; "))
    })?;
    let old = state.ruleset.version;
    Ok(EventKind::RuleAmended {
        old_version: old,
        new_version: old + 1,
        rules: rules.clone(),
        amendment_policy: *amendment_policy,
        basis: proposal.id().clone(),
    })
}

/// Quorum and supermajority under the current amendment policy.
pub fn check_amendment_tally(
    state: &CommunityState,
    tally: &crate::domain::TallyResult,
) -> Result<(), LifecycleError> {
    let policy = &state.ruleset.amendment_policy;
    let required = quorum_required(tally.eligible, policy.quorum);
    if tally.turnout < required {
        return Err(LifecycleError::PolicyViolation(format!(
            "turnout {} below amendment quorum {required}",
            tally.turnout
        )));
    }
    let (yes, no) = (tally.weight("yes"), tally.weight("no"));
    if tally.decision != Decision::Adopted || !policy.approval_threshold.is_met_by(yes, yes + no) {
        return Err(LifecycleError::PolicyViolation(format!(
            "approval {yes}/{} below {}",
            yes + no,
            policy.approval_threshold
        )));
    }
    Ok(())
}
