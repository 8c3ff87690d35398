use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Fraction, MemberId, ProposalId, RoleId, RuleId, Tick};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub id: MemberId,
    pub joined_at: Tick,
    pub contributions: u64,
    pub roles: BTreeSet<RoleId>,
    pub active: bool,
    pub last_active_at: Tick,
}

impl Member {
    pub fn joined(id: MemberId, at: Tick) -> Self {
        Member {
            id,
            joined_at: at,
            contributions: 0,
            roles: BTreeSet::new(),
            active: true,
            last_active_at: at,
        }
    }
}

// Variants are declared in lexicographic order so that sets of them
// serialize sorted by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PowerKind {
    EditRules,
    ManageRoles,
    ModerateContent,
    PinContent,
    RemoveMember,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Role {
    pub id: RoleId,
    pub powers: BTreeSet<PowerKind>,
    pub holders: BTreeSet<MemberId>,
    /// `None` means unbounded.
    pub seats: Option<u32>,
}

impl Role {
    pub fn is_full(&self) -> bool {
        self.seats.is_some_and(|s| self.holders.len() >= s as usize)
    }
}

/// A role as declared at founding, before anyone holds it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleDef {
    pub id: RoleId,
    pub powers: BTreeSet<PowerKind>,
    #[serde(default)]
    pub seats: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GovernanceMode {
    #[default]
    AdminOnly,
    Oligarchy,
    Representative,
    DirectDemocracy,
    Consensus { threshold: Fraction },
    JuryMode { jury_size: u32 },
}

impl GovernanceMode {
    pub fn kind(&self) -> ModeKind {
        match self {
            GovernanceMode::AdminOnly => ModeKind::AdminOnly,
            GovernanceMode::Oligarchy => ModeKind::Oligarchy,
            GovernanceMode::Representative => ModeKind::Representative,
            GovernanceMode::DirectDemocracy => ModeKind::DirectDemocracy,
            GovernanceMode::Consensus { .. } => ModeKind::Consensus,
            GovernanceMode::JuryMode { .. } => ModeKind::JuryMode,
        }
    }

    /// Parameter checks: consensus threshold in (1/2, 1], jury size at least 1.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            GovernanceMode::Consensus { threshold } if !threshold.exceeds_half() => {
                Err(format!("consensus threshold {threshold} must exceed 1/2"))
            }
            GovernanceMode::JuryMode { jury_size: 0 } => Err("jury size must be at least 1".into()),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModeKind {
    AdminOnly,
    Consensus,
    DirectDemocracy,
    JuryMode,
    Oligarchy,
    Representative,
}

/// Action categories that rules can scope over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    BallotCast,
    Ban,
    BlocDeclared,
    ContributionRecorded,
    DelegationRevoked,
    DelegationSet,
    MemberExited,
    MemberJoined,
    MemberRemoved,
    Mute,
    PetitionOpened,
    PetitionSigned,
    PinContent,
    ProposalOpened,
    RemoveContent,
    RoleGranted,
    RoleRevoked,
    Warn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModerationKind {
    Ban,
    Mute,
    PinContent,
    RemoveContent,
    Warn,
}

impl ModerationKind {
    pub fn required_power(self) -> PowerKind {
        match self {
            ModerationKind::Ban => PowerKind::RemoveMember,
            ModerationKind::PinContent => PowerKind::PinContent,
            ModerationKind::Mute | ModerationKind::RemoveContent | ModerationKind::Warn => {
                PowerKind::ModerateContent
            }
        }
    }

    pub fn action_kind(self) -> ActionKind {
        match self {
            ModerationKind::Ban => ActionKind::Ban,
            ModerationKind::Mute => ActionKind::Mute,
            ModerationKind::PinContent => ActionKind::PinContent,
            ModerationKind::RemoveContent => ActionKind::RemoveContent,
            ModerationKind::Warn => ActionKind::Warn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProposalKind {
    Amendment,
    ModeChange,
    ModerationAppeal,
    PolicyChange,
    Recall,
    RoleElection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Enforcement {
    Hard,
    Soft,
}

/// One conjunct of a rule's requirement list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Requirement {
    ActorHasRole(RoleId),
    ActorHasPower(PowerKind),
    /// Target protection: the action's target must not hold this role.
    TargetLacksRole(RoleId),
    TargetNotActor,
    /// The action must cite an adopted proposal of this kind as its basis.
    AdoptedProposal(ProposalKind),
}

/// A closed structured predicate. The rule is in scope when the action kind
/// and current mode match (empty sets match everything); an in-scope action
/// violates the rule when any requirement fails.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleConstraint {
    #[serde(default)]
    pub actions: BTreeSet<ActionKind>,
    #[serde(default)]
    pub modes: BTreeSet<ModeKind>,
    #[serde(default)]
    pub requires: Vec<Requirement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub id: RuleId,
    pub constraint: RuleConstraint,
    pub enforcement: Enforcement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmendmentPolicy {
    pub approval_threshold: Fraction,
    pub quorum: Fraction,
}

impl Default for AmendmentPolicy {
    fn default() -> Self {
        AmendmentPolicy {
            approval_threshold: Fraction::new(2, 3).expect("2/3 is a valid fraction"),
            quorum: Fraction::ZERO,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSet {
    #[serde(default)]
    pub version: u64,
    #[serde(default)]
    pub rules: Vec<Rule>,
    #[serde(default)]
    pub amendment_policy: AmendmentPolicy,
}

/// Reserved prefixes for violation ids produced by mode, policy and power checks.
pub const RESERVED_RULE_PREFIXES: [&str; 3] = ["mode:", "policy:", "power:"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSetViolation {
    pub message: String,
    pub rule: Option<RuleId>,
}

impl std::fmt::Display for RuleSetViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

/// Structural checks over a rule set; returns every violation found.
pub fn validate_ruleset(ruleset: &RuleSet) -> Result<(), Vec<RuleSetViolation>> {
    validate_rules(&ruleset.rules, &ruleset.amendment_policy)
}

pub fn validate_rules(rules: &[Rule], policy: &AmendmentPolicy) -> Result<(), Vec<RuleSetViolation>> {
    let mut out = Vec::new();
    if !policy.approval_threshold.exceeds_half() {
        out.push(RuleSetViolation {
            message: format!(
                "amendment approval threshold must exceed 1/2 (got {})",
                policy.approval_threshold
            ),
            rule: None,
        });
    }
    let mut seen: BTreeMap<&RuleId, usize> = BTreeMap::new();
    for rule in rules {
        *seen.entry(&rule.id).or_default() += 1;
        if !rule.id.is_valid() {
            out.push(RuleSetViolation { message: "rule id is not a valid identifier".into(), rule: None });
        } else if RESERVED_RULE_PREFIXES.iter().any(|p| rule.id.as_str().starts_with(p)) {
            out.push(RuleSetViolation {
                message: format!("rule id `{}` uses a reserved prefix", rule.id),
                rule: Some(rule.id.clone()),
            });
        }
    }
    for (id, count) in seen {
        if count > 1 {
            out.push(RuleSetViolation {
                message: format!("duplicate rule id `{id}`"),
                rule: Some(id.clone()),
            });
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Basis reference carried by effect events.
pub type Basis = Option<ProposalId>;
