use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize, Serializer};

use super::{
    Actor, AmendmentPolicy, BlocId, Fraction, GovernanceMode, MemberId, ModerationKind, PetitionId,
    ProposalId, ProposalKind, RoleId, Rule, Tick, TopicId, TriggerId,
};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Choice {
    Yes,
    No,
    Abstain,
    Pick(String),
    Approve(BTreeSet<String>),
}

impl Choice {
    /// Tally keys this choice contributes weight to.
    pub fn keys(&self) -> Vec<String> {
        match self {
            Choice::Yes => vec!["yes".into()],
            Choice::No => vec!["no".into()],
            Choice::Abstain => vec!["abstain".into()],
            Choice::Pick(c) => vec![format!("pick:{c}")],
            Choice::Approve(set) => set.iter().map(|c| format!("pick:{c}")).collect(),
        }
    }
}

impl std::str::FromStr for Choice {
    type Err = String;

    /// `yes`, `no`, `abstain`, `pick:<id>` or `approve:<id>,<id>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "yes" => Ok(Choice::Yes),
            "no" => Ok(Choice::No),
            "abstain" => Ok(Choice::Abstain),
            _ => {
                if let Some(c) = s.strip_prefix("pick:") {
                    if c.is_empty() {
                        return Err("empty pick".into());
                    }
                    Ok(Choice::Pick(c.to_owned()))
                } else if let Some(list) = s.strip_prefix("approve:") {
                    let set: BTreeSet<String> =
                        list.split(',').filter(|x| !x.is_empty()).map(str::to_owned).collect();
                    Ok(Choice::Approve(set))
                } else {
                    Err(format!("unknown choice `{s}`"))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TallyMethod {
    Plurality,
    Approval,
    Referendum { quorum: Fraction, approval: Fraction },
    JuryVerdict { jury_size: u32 },
}

/// Who may take part. All conditions apply to active members only.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EligibilityFilter {
    #[serde(default)]
    pub min_tenure: Tick,
    #[serde(default)]
    pub min_contributions: u64,
    #[serde(default)]
    pub required_role: Option<RoleId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Weighting {
    #[default]
    Unit,
    Reputation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProposalSubject {
    PolicyChange { key: String, value: String },
    Amendment { rules: Vec<Rule>, amendment_policy: AmendmentPolicy },
    RoleElection { role: RoleId, seats: u32, candidates: Option<BTreeSet<MemberId>> },
    Recall { role: RoleId, member: MemberId },
    ModeChange { to: GovernanceMode },
    ModerationAppeal { action: ModerationKind, target: MemberId },
}

impl ProposalSubject {
    pub fn kind(&self) -> ProposalKind {
        match self {
            ProposalSubject::PolicyChange { .. } => ProposalKind::PolicyChange,
            ProposalSubject::Amendment { .. } => ProposalKind::Amendment,
            ProposalSubject::RoleElection { .. } => ProposalKind::RoleElection,
            ProposalSubject::Recall { .. } => ProposalKind::Recall,
            ProposalSubject::ModeChange { .. } => ProposalKind::ModeChange,
            ProposalSubject::ModerationAppeal { .. } => ProposalKind::ModerationAppeal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposalSpec {
    pub id: ProposalId,
    pub subject: ProposalSubject,
    pub closes_at: Tick,
    pub method: TallyMethod,
    pub eligibility: EligibilityFilter,
    pub topic: TopicId,
    pub delegation: bool,
    pub weighting: Weighting,
}

impl ProposalSpec {
    pub fn kind(&self) -> ProposalKind {
        self.subject.kind()
    }
}

/// A proposal whose opening tick is not yet known (petition targets).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposalDraft {
    pub id: ProposalId,
    pub subject: ProposalSubject,
    pub period: Tick,
    pub method: TallyMethod,
    pub eligibility: EligibilityFilter,
    pub topic: TopicId,
    pub delegation: bool,
    pub weighting: Weighting,
}

impl ProposalDraft {
    pub fn open_at(&self, at: Tick) -> ProposalSpec {
        ProposalSpec {
            id: self.id.clone(),
            subject: self.subject.clone(),
            closes_at: at.saturating_add(self.period),
            method: self.method,
            eligibility: self.eligibility.clone(),
            topic: self.topic.clone(),
            delegation: self.delegation,
            weighting: self.weighting,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProposalOrigin {
    Direct,
    Petition(PetitionId),
    Trigger(TriggerId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProposalStatus {
    Open,
    Adopted,
    Rejected,
    Lapsed,
}

impl ProposalStatus {
    pub fn is_terminal(self) -> bool {
        !matches!(self, ProposalStatus::Open)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ballot {
    pub proposal: ProposalId,
    pub voter: MemberId,
    pub choice: Choice,
    pub cast_at: Tick,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub spec: ProposalSpec,
    pub opened_at: Tick,
    pub opened_by: Actor,
    pub origin: ProposalOrigin,
    pub status: ProposalStatus,
    /// Members eligible when the proposal opened (the jury, once drawn).
    pub electorate: BTreeSet<MemberId>,
    pub ballots: BTreeMap<MemberId, Ballot>,
    pub jury: Option<Vec<MemberId>>,
    pub result: Option<TallyResult>,
    pub closed_at: Option<Tick>,
}

impl Proposal {
    pub fn id(&self) -> &ProposalId {
        &self.spec.id
    }

    pub fn kind(&self) -> ProposalKind {
        self.spec.kind()
    }

    pub fn direct_ballots(&self) -> BTreeMap<MemberId, Choice> {
        self.ballots.iter().map(|(m, b)| (m.clone(), b.choice.clone())).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PetitionSpec {
    pub id: PetitionId,
    pub target: ProposalDraft,
    pub threshold: Fraction,
    pub eligibility: EligibilityFilter,
    pub expires_at: Tick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PetitionStatus {
    Collecting,
    Promoted,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Petition {
    pub spec: PetitionSpec,
    pub opened_at: Tick,
    pub opened_by: MemberId,
    pub signatures: BTreeSet<MemberId>,
    pub status: PetitionStatus,
}

impl Petition {
    pub fn id(&self) -> &PetitionId {
        &self.spec.id
    }

    /// Status as observed at `now`; collecting petitions past expiry read as expired.
    pub fn status_at(&self, now: Tick) -> PetitionStatus {
        match self.status {
            PetitionStatus::Collecting if now > self.spec.expires_at => PetitionStatus::Expired,
            s => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlocOrigin {
    Declared,
    Detected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bloc {
    pub id: BlocId,
    pub members: BTreeSet<MemberId>,
    pub origin: BlocOrigin,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Adopted,
    Rejected,
    NoDecision,
}

fn finite_totals<S: Serializer>(totals: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
    if let Some((k, v)) = totals.iter().find(|(_, v)| !v.is_finite()) {
        return Err(serde::ser::Error::custom(format!("non-finite weight {v} for `{k}`")));
    }
    totals.serialize(s)
}

/// Outcome of counting a set of resolved ballots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TallyResult {
    #[serde(serialize_with = "finite_totals")]
    pub totals: BTreeMap<String, f64>,
    pub turnout: u64,
    pub abstained_by_cycle: u64,
    pub eligible: u64,
    pub quorum_required: u64,
    pub binding: bool,
    pub decision: Decision,
    pub winners: Vec<String>,
}

impl TallyResult {
    pub fn weight(&self, key: &str) -> f64 {
        self.totals.get(key).copied().unwrap_or(0.0)
    }

    pub fn total_weight(&self) -> f64 {
        self.totals.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TriggerKind {
    Abandonment { inactivity_ticks: Tick },
    GrowthThreshold { member_count: u64, alternative: GovernanceMode },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriggerSpec {
    pub id: TriggerId,
    pub kind: TriggerKind,
    #[serde(default = "default_voting_period")]
    pub voting_period: Tick,
}

fn default_voting_period() -> Tick {
    7
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerState {
    pub spec: TriggerSpec,
    pub armed_at: Tick,
    /// Consequent proposals still open; the trigger is disarmed while non-empty.
    pub pending: BTreeSet<ProposalId>,
    pub fired_count: u64,
    /// Growth triggers re-arm only after membership has been below the threshold.
    pub below_threshold_seen: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn choice_parsing() {
        assert_eq!("yes".parse::<Choice>().unwrap(), Choice::Yes);
        assert_eq!("pick:alpha".parse::<Choice>().unwrap(), Choice::Pick("alpha".into()));
        let approve: Choice = "approve:b,a".parse().unwrap();
        assert_eq!(approve.keys(), vec!["pick:a".to_string(), "pick:b".to_string()]);
        assert!("maybe".parse::<Choice>().is_err());
    }

    #[test]
    fn nan_weight_cannot_be_encoded() {
        let tally = TallyResult {
            totals: [("yes".to_string(), f64::NAN)].into_iter().collect(),
            turnout: 1,
            abstained_by_cycle: 0,
            eligible: 1,
            quorum_required: 0,
            binding: true,
            decision: Decision::NoDecision,
            winners: vec![],
        };
        assert!(crate::canonical::encode(&tally).is_err());
    }
}
