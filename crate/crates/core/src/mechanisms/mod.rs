//! Effective-voice algorithms. Everything here is a pure function over
//! immutable inputs.

pub mod blocs;
pub mod delegation;
pub mod election;
pub mod petition;
pub mod quorum;
pub mod reputation;
pub mod sortition;

use thiserror::Error;

use crate::domain::{MemberId, PetitionId};

pub use blocs::{agreement_matrix, agreement_matrix_with, detect_blocs, AgreementMatrix};
pub use delegation::{resolve_delegations, resolve_with, tally_liquid, tally_resolved, DelegationGraph, Resolved};
pub use election::{run_election, ElectionMethod};
pub use petition::{promotion_threshold, sign_petition, SignOutcome};
pub use quorum::{quorum_required, referendum_outcome, tally_referendum, tally_referendum_counts};
pub use reputation::{reputation_weight, reputation_weight_capped, DEFAULT_MAX_WEIGHT};
pub use sortition::{draw_jury, SplitMix64};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MechanismError {
    #[error("delegation graph invariant violated: {0}")]
    GraphInvariant(String),
    #[error("election has no candidates")]
    NoCandidates,
    #[error("jury needs {needed} members but only {available} are available")]
    InsufficientJurors { needed: usize, available: usize },
    #[error("`{0}` is the subject of the appeal and must be excluded")]
    Conflict(MemberId),
    #[error("`{0}` already signed")]
    DuplicateSignature(MemberId),
    #[error("petition `{0}` has expired")]
    PetitionExpired(PetitionId),
    #[error("petition `{0}` is no longer collecting")]
    PetitionClosed(PetitionId),
    #[error("`{0}` is not eligible")]
    Ineligible(MemberId),
}
