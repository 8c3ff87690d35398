//! Agreement analysis over public ballots and single-linkage bloc detection.

use std::collections::{BTreeMap, BTreeSet};

use crate::domain::{Bloc, BlocId, BlocOrigin, Choice, MemberId, ProposalId};
use crate::par::{self, Execution};

/// Pairwise agreement over shared proposals, row-major over `members`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementMatrix {
    pub members: Vec<MemberId>,
    /// `None` when the pair shares fewer than `min_shared` proposals.
    pub agreement: Vec<Option<f64>>,
    /// Number of shared proposals per pair.
    pub support: Vec<u32>,
}

impl AgreementMatrix {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn index_of(&self, m: &MemberId) -> Option<usize> {
        self.members.binary_search(m).ok()
    }

    pub fn at(&self, i: usize, j: usize) -> Option<f64> {
        self.agreement[i * self.members.len() + j]
    }

    pub fn support_at(&self, i: usize, j: usize) -> u32 {
        self.support[i * self.members.len() + j]
    }

    pub fn get(&self, a: &MemberId, b: &MemberId) -> Option<f64> {
        self.at(self.index_of(a)?, self.index_of(b)?)
    }
}

pub fn agreement_matrix(
    history: &BTreeMap<ProposalId, BTreeMap<MemberId, Choice>>,
    min_shared: u32,
) -> AgreementMatrix {
    agreement_matrix_with(history, min_shared, Execution::default())
}

/// Builds the matrix; rows are computed independently under `exec`.
pub fn agreement_matrix_with(
    history: &BTreeMap<ProposalId, BTreeMap<MemberId, Choice>>,
    min_shared: u32,
    exec: Execution,
) -> AgreementMatrix {
    let mut by_member: BTreeMap<&MemberId, BTreeMap<&ProposalId, &Choice>> = BTreeMap::new();
    for (pid, ballots) in history {
        for (m, c) in ballots {
            by_member.entry(m).or_default().insert(pid, c);
        }
    }
    let members: Vec<MemberId> = by_member.keys().map(|m| (*m).clone()).collect();
    let votes: Vec<&BTreeMap<&ProposalId, &Choice>> = by_member.values().collect();
    let n = members.len();
    let rows = par::map_range(exec, n, |i| {
        let mut agreement = Vec::with_capacity(n);
        let mut support = Vec::with_capacity(n);
        for j in 0..n {
            let (mut shared, mut same) = (0u32, 0u32);
            for (pid, ci) in votes[i] {
                if let Some(cj) = votes[j].get(pid) {
                    shared += 1;
                    if ci == cj {
                        same += 1;
                    }
                }
            }
            support.push(shared);
            let entry = if i == j {
                Some(1.0)
            } else if shared >= min_shared.max(1) {
                Some(f64::from(same) / f64::from(shared))
            } else {
                None
            };
            agreement.push(entry);
        }
        (agreement, support)
    });
    let (mut agreement, mut support) = (Vec::with_capacity(n * n), Vec::with_capacity(n * n));
    for (a, s) in rows {
        agreement.extend(a);
        support.extend(s);
    }
    AgreementMatrix { members, agreement, support }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Connected components of the graph joining pairs with agreement `>= threshold`,
/// kept when they have at least `min_size` members. Ordered by smallest member id.
pub fn detect_blocs(matrix: &AgreementMatrix, threshold: f64, min_size: usize) -> Vec<Bloc> {
    let n = matrix.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if matrix.at(i, j).is_some_and(|a| a >= threshold) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<MemberId>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().insert(matrix.members[i].clone());
    }
    groups
        .into_values()
        .filter(|g| g.len() >= min_size.max(1))
        .map(|members| {
            let first = members.iter().next().expect("groups are non-empty");
            Bloc {
                id: BlocId::from(format!("detected:{first}")),
                label: format!("{} members agreeing at >= {threshold}", members.len()),
                members,
                origin: BlocOrigin::Detected,
            }
        })
        .collect()
}
