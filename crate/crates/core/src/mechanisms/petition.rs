use crate::domain::{CommunityState, Fraction, MemberId, Petition, PetitionStatus, Tick};

use super::MechanismError;

/// Signatures needed to promote: `ceil(threshold * eligible)`.
pub fn promotion_threshold(threshold: Fraction, eligible: u64) -> u64 {
    threshold.ceil_mul(eligible)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignOutcome {
    pub petition: Petition,
    pub promoted: bool,
    pub required: u64,
}

/// Adds `signer` and reports whether the petition crossed its threshold.
/// The eligible count is taken from `state` at signature time.
pub fn sign_petition(
    state: &CommunityState,
    petition: &Petition,
    signer: &MemberId,
    now: Tick,
) -> Result<SignOutcome, MechanismError> {
    match petition.status_at(now) {
        PetitionStatus::Collecting => {}
        PetitionStatus::Expired => return Err(MechanismError::PetitionExpired(petition.id().clone())),
        PetitionStatus::Promoted => return Err(MechanismError::PetitionClosed(petition.id().clone())),
    }
    if !state.is_eligible(signer, &petition.spec.eligibility, now) {
        return Err(MechanismError::Ineligible(signer.clone()));
    }
    if petition.signatures.contains(signer) {
        return Err(MechanismError::DuplicateSignature(signer.clone()));
    }
    let eligible = state.eligible_members(&petition.spec.eligibility, now).len() as u64;
    let required = promotion_threshold(petition.spec.threshold, eligible);
    let mut updated = petition.clone();
    updated.signatures.insert(signer.clone());
    let promoted = updated.signatures.len() as u64 >= required;
    if promoted {
        updated.status = PetitionStatus::Promoted;
    }
    Ok(SignOutcome { petition: updated, promoted, required })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::domain::{
        EligibilityFilter, Member, PetitionSpec, ProposalDraft, ProposalSubject, TallyMethod, TopicId, Weighting,
    };

    fn state_with(n: usize) -> CommunityState {
        let mut s = CommunityState::default();
        for i in 0..n {
            let m = Member::joined(MemberId::from(format!("m{i:05}")), 0);
            s.members.insert(m.id.clone(), m);
        }
        s
    }

    fn petition(threshold: &str) -> Petition {
        Petition {
            spec: PetitionSpec {
                id: "pet".into(),
                target: ProposalDraft {
                    id: "prop".into(),
                    subject: ProposalSubject::PolicyChange { key: "k".into(), value: "v".into() },
                    period: 5,
                    method: TallyMethod::Referendum { quorum: Fraction::ZERO, approval: "0.51".parse().unwrap() },
                    eligibility: EligibilityFilter::default(),
                    topic: TopicId::wildcard(),
                    delegation: false,
                    weighting: Weighting::Unit,
                },
                threshold: threshold.parse().unwrap(),
                eligibility: EligibilityFilter::default(),
                expires_at: 100,
            },
            opened_at: 0,
            opened_by: "m00000".into(),
            signatures: BTreeSet::new(),
            status: PetitionStatus::Collecting,
        }
    }

    fn signer(i: usize) -> MemberId {
        MemberId::from(format!("m{i:05}"))
    }

    #[test]
    fn one_percent_of_hundred_promotes_on_first_signature() {
        let s = state_with(100);
        let out = sign_petition(&s, &petition("0.01"), &signer(0), 1).unwrap();
        assert!(out.promoted);
        assert_eq!(out.required, 1);
        assert_eq!(out.petition.status, PetitionStatus::Promoted);
    }

    #[test]
    fn five_percent_of_sixty_needs_three() {
        let s = state_with(60);
        let mut p = petition("0.05");
        for i in 0..2 {
            let out = sign_petition(&s, &p, &signer(i), 1).unwrap();
            assert!(!out.promoted);
            p = out.petition;
        }
        let out = sign_petition(&s, &p, &signer(2), 1).unwrap();
        assert!(out.promoted);
        assert_eq!(out.required, 3);
    }

    #[test]
    fn error_paths() {
        let s = state_with(10);
        let p = petition("0.5");
        let signed = sign_petition(&s, &p, &signer(0), 1).unwrap().petition;
        assert!(matches!(sign_petition(&s, &signed, &signer(0), 1), Err(MechanismError::DuplicateSignature(_))));
        assert!(matches!(sign_petition(&s, &p, &signer(1), 101), Err(MechanismError::PetitionExpired(_))));
        assert!(matches!(sign_petition(&s, &p, &"ghost".into(), 1), Err(MechanismError::Ineligible(_))));
    }
}
