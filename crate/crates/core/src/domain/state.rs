use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{
    Bloc, BlocId, Choice, Digest, EligibilityFilter, GovernanceMode, Member, MemberId, Petition,
    PetitionId, PowerKind, Proposal, ProposalId, Role, RoleId, RuleSet, Tick, TopicId, TriggerId,
    TriggerState,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelegationEdge {
    pub delegator: MemberId,
    pub delegate: MemberId,
    pub topic: TopicId,
    pub set_at: Tick,
}

/// Materialized governance state: a pure fold over the event log.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CommunityState {
    pub founded: bool,
    pub members: BTreeMap<MemberId, Member>,
    pub roles: BTreeMap<RoleId, Role>,
    pub ruleset: RuleSet,
    pub mode: GovernanceMode,
    pub proposals: BTreeMap<ProposalId, Proposal>,
    pub petitions: BTreeMap<PetitionId, Petition>,
    /// Outgoing edges keyed by delegator, then topic.
    pub delegations: BTreeMap<MemberId, BTreeMap<TopicId, DelegationEdge>>,
    pub blocs: BTreeMap<BlocId, Bloc>,
    pub triggers: BTreeMap<TriggerId, TriggerState>,
    pub policies: BTreeMap<String, String>,
    pub event_count: u64,
    pub last_tick: Option<Tick>,
    pub head_hash: Digest,
}

impl CommunityState {
    pub fn member(&self, id: &MemberId) -> Option<&Member> {
        self.members.get(id)
    }

    pub fn is_active(&self, id: &MemberId) -> bool {
        self.members.get(id).is_some_and(|m| m.active)
    }

    pub fn active_members(&self) -> impl Iterator<Item = &Member> {
        self.members.values().filter(|m| m.active)
    }

    pub fn active_count(&self) -> u64 {
        self.active_members().count() as u64
    }

    pub fn powers_of(&self, id: &MemberId) -> BTreeSet<PowerKind> {
        let Some(member) = self.members.get(id) else {
            return BTreeSet::new();
        };
        member
            .roles
            .iter()
            .filter_map(|r| self.roles.get(r))
            .flat_map(|r| r.powers.iter().copied())
            .collect()
    }

    pub fn has_power(&self, id: &MemberId, power: PowerKind) -> bool {
        self.powers_of(id).contains(&power)
    }

    /// Holds at least one role that carries any power.
    pub fn is_power_holder(&self, id: &MemberId) -> bool {
        !self.powers_of(id).is_empty()
    }

    pub fn holds_role(&self, id: &MemberId, role: &RoleId) -> bool {
        self.members.get(id).is_some_and(|m| m.roles.contains(role))
    }

    pub fn is_eligible(&self, id: &MemberId, filter: &EligibilityFilter, now: Tick) -> bool {
        let Some(m) = self.members.get(id) else {
            return false;
        };
        m.active
            && now.saturating_sub(m.joined_at) >= filter.min_tenure
            && m.contributions >= filter.min_contributions
            && filter.required_role.as_ref().is_none_or(|r| m.roles.contains(r))
    }

    pub fn eligible_members(&self, filter: &EligibilityFilter, now: Tick) -> BTreeSet<MemberId> {
        self.members
            .keys()
            .filter(|id| self.is_eligible(id, filter, now))
            .cloned()
            .collect()
    }

    pub fn all_edges(&self) -> Vec<DelegationEdge> {
        self.delegations.values().flat_map(|m| m.values().cloned()).collect()
    }

    pub fn open_proposals(&self) -> impl Iterator<Item = &Proposal> {
        self.proposals.values().filter(|p| !p.status.is_terminal())
    }

    /// Ballot history of every proposal, for agreement analysis.
    pub fn ballot_history(&self) -> BTreeMap<ProposalId, BTreeMap<MemberId, Choice>> {
        self.proposals
            .iter()
            .map(|(id, p)| (id.clone(), p.direct_ballots()))
            .collect()
    }

    pub fn next_seq(&self) -> u64 {
        self.event_count
    }
}
