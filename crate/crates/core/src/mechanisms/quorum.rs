use std::collections::BTreeMap;

use crate::domain::{Choice, Decision, Fraction, TallyResult};

/// Minimum turnout for a binding vote: `ceil(quorum * eligible)`.
pub fn quorum_required(eligible: u64, quorum: Fraction) -> u64 {
    quorum.ceil_mul(eligible)
}

/// Applies quorum and approval to already-aggregated referendum totals.
///
/// Binding iff `turnout >= quorum_required`; adopted iff binding and
/// `yes / (yes + no) >= approval`. Abstain weight counts toward turnout only
/// through the ballots that carried it.
pub fn referendum_outcome(
    totals: BTreeMap<String, f64>,
    turnout: u64,
    abstained_by_cycle: u64,
    eligible: u64,
    quorum: Fraction,
    approval: Fraction,
) -> TallyResult {
    let required = quorum_required(eligible, quorum);
    let binding = turnout >= required;
    let yes = totals.get("yes").copied().unwrap_or(0.0);
    let no = totals.get("no").copied().unwrap_or(0.0);
    let decision = if !binding {
        Decision::NoDecision
    } else if approval.is_met_by(yes, yes + no) {
        Decision::Adopted
    } else {
        Decision::Rejected
    };
    TallyResult {
        totals,
        turnout,
        abstained_by_cycle,
        eligible,
        quorum_required: required,
        binding,
        decision,
        winners: Vec::new(),
    }
}

/// Unit-weight referendum over explicit ballots. Non yes/no/abstain choices are ignored.
pub fn tally_referendum<'a>(
    ballots: impl IntoIterator<Item = &'a Choice>,
    eligible: u64,
    quorum: Fraction,
    approval: Fraction,
) -> TallyResult {
    let (mut yes, mut no, mut abstain) = (0u64, 0u64, 0u64);
    for b in ballots {
        match b {
            Choice::Yes => yes += 1,
            Choice::No => no += 1,
            Choice::Abstain => abstain += 1,
            _ => {}
        }
    }
    tally_referendum_counts(yes, no, abstain, eligible, quorum, approval)
}

/// Same as [`tally_referendum`] from pre-counted ballots.
pub fn tally_referendum_counts(
    yes: u64,
    no: u64,
    abstain: u64,
    eligible: u64,
    quorum: Fraction,
    approval: Fraction,
) -> TallyResult {
    let mut totals = BTreeMap::new();
    for (k, v) in [("yes", yes), ("no", no), ("abstain", abstain)] {
        if v > 0 {
            totals.insert(k.to_string(), v as f64);
        }
    }
    referendum_outcome(totals, yes + no + abstain, 0, eligible, quorum, approval)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frac(s: &str) -> Fraction {
        s.parse().unwrap()
    }

    #[test]
    fn quorum_examples() {
        assert_eq!(quorum_required(200_000_000, frac("0.30")), 60_000_000);
        assert_eq!(quorum_required(12345, Fraction::ZERO), 0);
        assert_eq!(quorum_required(100, frac("0.011")), 2);
    }

    #[test]
    fn low_turnout_is_not_binding() {
        let r = tally_referendum_counts(600_000, 0, 0, 200_000_000, frac("0.30"), frac("0.51"));
        assert!(!r.binding);
        assert_eq!(r.decision, Decision::NoDecision);
        assert_eq!(r.quorum_required, 60_000_000);
    }

    #[test]
    fn unanimous_full_turnout_adopts() {
        let ballots = [Choice::Yes, Choice::Yes, Choice::Yes];
        let r = tally_referendum(&ballots, 3, Fraction::ONE, frac("0.66"));
        assert!(r.binding);
        assert_eq!(r.decision, Decision::Adopted);
    }

    #[test]
    fn tie_fails_supermajority() {
        let ballots = [Choice::Yes, Choice::Yes, Choice::No, Choice::No];
        let r = tally_referendum(&ballots, 4, Fraction::ONE, frac("500001/1000000"));
        assert!(r.binding);
        assert_eq!(r.decision, Decision::Rejected);
    }

    #[test]
    fn explicit_abstain_counts_toward_turnout_only() {
        let ballots = [Choice::Yes, Choice::Abstain];
        let r = tally_referendum(&ballots, 4, Fraction::HALF, frac("0.9"));
        assert_eq!(r.turnout, 2);
        assert!(r.binding);
        assert_eq!(r.decision, Decision::Adopted);
        let r = tally_referendum(&[Choice::Yes], 4, Fraction::HALF, frac("0.9"));
        assert!(!r.binding);
    }
}
