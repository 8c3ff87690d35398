//! Liquid-democracy resolution: direct ballots override delegation, edges
//! are followed transitively, cycles resolve to abstention.

use std::collections::{BTreeMap, BTreeSet};

use crate::domain::{Choice, Decision, DelegationEdge, MemberId, TallyResult, TopicId};

use super::MechanismError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolved {
    /// The member's vote lands on `terminal`'s direct ballot.
    Ballot { choice: Choice, terminal: MemberId },
    /// No ballot reached; `cycle` marks chains that loop.
    Abstain { cycle: bool },
}

impl Resolved {
    pub fn choice(&self) -> Option<&Choice> {
        match self {
            Resolved::Ballot { choice, .. } => Some(choice),
            Resolved::Abstain { .. } => None,
        }
    }
}

/// Outgoing edge per (delegator, topic), validated.
pub struct DelegationGraph<'a> {
    edges: BTreeMap<(&'a MemberId, &'a TopicId), &'a MemberId>,
}

impl<'a> DelegationGraph<'a> {
    pub fn new(edges: &'a [DelegationEdge]) -> Result<Self, MechanismError> {
        let mut map = BTreeMap::new();
        for e in edges {
            if e.delegator == e.delegate {
                return Err(MechanismError::GraphInvariant(format!("`{}` delegates to itself", e.delegator)));
            }
            if map.insert((&e.delegator, &e.topic), &e.delegate).is_some() {
                return Err(MechanismError::GraphInvariant(format!(
                    "`{}` has more than one edge for topic `{}`",
                    e.delegator, e.topic
                )));
            }
        }
        Ok(DelegationGraph { edges: map })
    }

    /// Topic-specific edge, falling back to the wildcard edge.
    pub fn next(&self, member: &MemberId, topic: &TopicId) -> Option<&'a MemberId> {
        if let Some(d) = self.edges.get(&(member, topic)) {
            return Some(d);
        }
        let wildcard = TopicId::wildcard();
        self.edges.get(&(member, &wildcard)).copied()
    }

    pub fn members(&self) -> BTreeSet<MemberId> {
        self.edges
            .iter()
            .flat_map(|((from, _), to)| [(*from).clone(), (*to).clone()])
            .collect()
    }
}

/// Resolves every member that appears in the graph or has a ballot.
pub fn resolve_delegations(
    edges: &[DelegationEdge],
    ballots: &BTreeMap<MemberId, Choice>,
    topic: &TopicId,
) -> Result<BTreeMap<MemberId, Resolved>, MechanismError> {
    let graph = DelegationGraph::new(edges)?;
    let mut voters = graph.members();
    voters.extend(ballots.keys().cloned());
    Ok(resolve_with(&graph, ballots, topic, &voters))
}

/// Resolves the given voters. Each member is visited a constant number of
/// times: walks stop at the first already-resolved node.
pub fn resolve_with(
    graph: &DelegationGraph<'_>,
    ballots: &BTreeMap<MemberId, Choice>,
    topic: &TopicId,
    voters: &BTreeSet<MemberId>,
) -> BTreeMap<MemberId, Resolved> {
    let mut memo: BTreeMap<MemberId, Resolved> = BTreeMap::new();
    for start in voters {
        if memo.contains_key(start) {
            continue;
        }
        let mut path: Vec<MemberId> = Vec::new();
        let mut on_path: BTreeSet<MemberId> = BTreeSet::new();
        let mut cursor = start.clone();
        let result = loop {
            if let Some(r) = memo.get(&cursor) {
                break r.clone();
            }
            if let Some(choice) = ballots.get(&cursor) {
                let r = Resolved::Ballot { choice: choice.clone(), terminal: cursor.clone() };
                memo.insert(cursor.clone(), r.clone());
                break r;
            }
            if !on_path.insert(cursor.clone()) {
                break Resolved::Abstain { cycle: true };
            }
            path.push(cursor.clone());
            match graph.next(&cursor, topic) {
                Some(next) => cursor = next.clone(),
                None => break Resolved::Abstain { cycle: false },
            }
        };
        for m in path {
            memo.insert(m, result.clone());
        }
    }
    memo.retain(|m, _| voters.contains(m));
    memo
}

/// Aggregates resolved votes with per-member weights.
pub fn tally_resolved(
    resolved: &BTreeMap<MemberId, Resolved>,
    weight: impl Fn(&MemberId) -> f64,
) -> (BTreeMap<String, f64>, u64, u64) {
    let mut totals: BTreeMap<String, f64> = BTreeMap::new();
    let (mut turnout, mut by_cycle) = (0u64, 0u64);
    for (member, r) in resolved {
        match r {
            Resolved::Ballot { choice, .. } => {
                turnout += 1;
                let w = weight(member);
                for key in choice.keys() {
                    *totals.entry(key).or_insert(0.0) += w;
                }
            }
            Resolved::Abstain { cycle: true } => by_cycle += 1,
            Resolved::Abstain { cycle: false } => {}
        }
    }
    (totals, turnout, by_cycle)
}

/// Raw liquid tally: each resolved member adds `weight_fn(member)` to its
/// terminal ballot's choice. No quorum is applied, so the result is
/// non-binding aggregation with `decision = NoDecision`.
pub fn tally_liquid(
    edges: &[DelegationEdge],
    ballots: &BTreeMap<MemberId, Choice>,
    topic: &TopicId,
    weight_fn: impl Fn(&MemberId) -> f64,
) -> Result<TallyResult, MechanismError> {
    let resolved = resolve_delegations(edges, ballots, topic)?;
    let eligible = resolved.len() as u64;
    let (totals, turnout, abstained_by_cycle) = tally_resolved(&resolved, weight_fn);
    Ok(TallyResult {
        totals,
        turnout,
        abstained_by_cycle,
        eligible,
        quorum_required: 0,
        binding: true,
        decision: Decision::NoDecision,
        winners: Vec::new(),
    })
}
