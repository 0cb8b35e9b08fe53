//! Exact maximum-weight plans by exhaustive search, for small candidate sets.
//!
//! Shares nothing with the bitset packer: conflicts come from
//! [`CandidatePair::conflicts_with`], and every subset is explored through a
//! depth-first include/exclude search that tries each subnet for every
//! included pair.

use super::{candidates, AllocError, CandidatePair, Circuit, CircuitPlan, Provenance};
use crate::topology::MeshConfig;
use crate::traffic::TrafficProfile;

/// Largest candidate count the exhaustive search accepts.
pub const ORACLE_PAIR_LIMIT: usize = 20;

struct Search<'a> {
    pairs: &'a [CandidatePair],
    conflict: Vec<Vec<bool>>,
    suffix: Vec<u64>,
    k: usize,
    assign: Vec<Vec<usize>>,
    weight: u64,
    best_weight: u64,
    best: Vec<Vec<usize>>,
}

impl Search<'_> {
    fn run(&mut self, i: usize) {
        if self.weight > self.best_weight {
            self.best_weight = self.weight;
            self.best = self.assign.clone();
        }
        if i == self.pairs.len() || self.weight + self.suffix[i] <= self.best_weight {
            return;
        }
        // Subnets are interchangeable, so opening more than one new subnet
        // at a time only revisits symmetric assignments.
        let used = self.assign.iter().filter(|s| !s.is_empty()).count();
        for s in 0..self.k.min(used + 1) {
            if self.assign[s].iter().all(|&j| !self.conflict[i][j]) {
                self.assign[s].push(i);
                self.weight += self.pairs[i].weight;
                self.run(i + 1);
                self.weight -= self.pairs[i].weight;
                self.assign[s].pop();
            }
        }
        self.run(i + 1);
    }
}

/// Best plan over all subsets of the profile's candidates.
pub fn enumerate_oracle(
    profile: &TrafficProfile,
    mesh: &MeshConfig,
    k: usize,
    max_pairs: usize,
) -> Result<CircuitPlan, AllocError> {
    if k == 0 {
        return Err(AllocError::NoSubnets);
    }
    let limit = max_pairs.min(ORACLE_PAIR_LIMIT);
    let pairs = candidates(profile, mesh)?;
    if pairs.len() > limit {
        return Err(AllocError::TooManyCandidates {
            count: pairs.len(),
            max: limit,
        });
    }
    let n = pairs.len();
    let conflict = (0..n)
        .map(|i| (0..n).map(|j| pairs[i].conflicts_with(&pairs[j], profile.granularity())).collect())
        .collect();
    let mut suffix = vec![0u64; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + pairs[i].weight;
    }
    let mut search = Search {
        pairs: &pairs,
        conflict,
        suffix,
        k,
        assign: vec![Vec::new(); k],
        weight: 0,
        best_weight: 0,
        best: vec![Vec::new(); k],
    };
    search.run(0);

    let mut plan = CircuitPlan::empty(profile.granularity(), k);
    plan.provenance = Provenance::Oracle;
    for (s, members) in search.best.iter().enumerate() {
        plan.subnets[s] = members
            .iter()
            .map(|&i| Circuit {
                src: pairs[i].src,
                dst: pairs[i].dst,
            })
            .collect();
    }
    Ok(plan)
}
