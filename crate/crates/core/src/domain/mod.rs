//! Governance domain types, validation, and canonical hashing.

mod event;
mod fraction;
mod ids;
mod proposal;
mod state;
mod types;

use thiserror::Error;

pub use event::{event_fields, sha256, Command, Event, EventKind, ExitReason, Founder};
pub use fraction::Fraction;
pub use ids::{
    check_identifier, Actor, BlocId, Digest, MemberId, PetitionId, ProposalId, RoleId, RuleId, TopicId,
    TriggerId,
};
pub use proposal::{
    Ballot, Bloc, BlocOrigin, Choice, Decision, EligibilityFilter, Petition, PetitionSpec, PetitionStatus,
    Proposal, ProposalDraft, ProposalOrigin, ProposalSpec, ProposalStatus, ProposalSubject, TallyMethod,
    TallyResult, TriggerKind, TriggerSpec, TriggerState, Weighting,
};
pub use state::{CommunityState, DelegationEdge};
pub use types::{
    validate_rules, validate_ruleset, ActionKind, AmendmentPolicy, Basis, Enforcement, GovernanceMode,
    Member, ModeKind, ModerationKind, PowerKind, ProposalKind, Requirement, Role, RoleDef, Rule,
    RuleConstraint, RuleSet, RuleSetViolation, RESERVED_RULE_PREFIXES,
};

/// Abstract, non-negative time unit.
pub type Tick = u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("invalid identifier: {0}")]
    InvalidId(String),
    #[error("invalid fraction `{0}`")]
    InvalidFraction(String),
    #[error("invalid digest `{0}`")]
    InvalidDigest(String),
}
