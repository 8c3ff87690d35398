use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::domain::{Choice, MemberId};

use super::MechanismError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElectionMethod {
    Plurality,
    Approval,
}

/// Top-`seats` candidates by weight, ties broken by the smaller id.
///
/// Plurality counts `Pick` ballots; approval counts every candidate in an
/// `Approve` set (a `Pick` is read as a one-element approval). Candidates
/// that received no weight are never elected.
pub fn run_election<'a>(
    candidates: &[MemberId],
    ballots: impl IntoIterator<Item = (&'a Choice, f64)>,
    method: ElectionMethod,
    seats: usize,
) -> Result<Vec<MemberId>, MechanismError> {
    if candidates.is_empty() {
        return Err(MechanismError::NoCandidates);
    }
    let mut weights: BTreeMap<&str, f64> = candidates.iter().map(|c| (c.as_str(), 0.0)).collect();
    for (choice, w) in ballots {
        let picks: Vec<&str> = match (method, choice) {
            (_, Choice::Pick(c)) => vec![c.as_str()],
            (ElectionMethod::Approval, Choice::Approve(set)) => set.iter().map(String::as_str).collect(),
            _ => continue,
        };
        for p in picks {
            if let Some(total) = weights.get_mut(p) {
                *total += w;
            }
        }
    }
    let mut ranked: Vec<(&str, f64)> = weights.into_iter().filter(|(_, w)| *w > 0.0).collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(b.0)));
    Ok(ranked.into_iter().take(seats).map(|(c, _)| MemberId::from(c)).collect())
}
