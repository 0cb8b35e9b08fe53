//! First-fit packing of candidates into subnets, backed by bitsets.

use fixedbitset::FixedBitSet;

use super::{candidates, AllocError, CandidatePair, Circuit, CircuitPlan, Provenance};
use crate::topology::{Granularity, MeshConfig};
use crate::traffic::TrafficProfile;

/// Ranked candidates with precomputed resource masks.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub granularity: Granularity,
    pub pairs: Vec<CandidatePair>,
    links: Vec<FixedBitSet>,
    /// Candidates that may not share a subnet with each candidate.
    conflicts: Vec<FixedBitSet>,
    link_slots: usize,
    endpoints: usize,
}

impl CandidateSet {
    pub fn from_profile(profile: &TrafficProfile, mesh: &MeshConfig) -> Result<Self, AllocError> {
        let pairs = candidates(profile, mesh)?;
        Ok(Self::new(profile.granularity(), pairs, mesh))
    }

    pub fn new(granularity: Granularity, pairs: Vec<CandidatePair>, mesh: &MeshConfig) -> Self {
        let link_slots = mesh.link_slots();
        let links: Vec<FixedBitSet> = pairs
            .iter()
            .map(|p| {
                let mut bits = FixedBitSet::with_capacity(link_slots);
                for l in &p.path.links {
                    bits.insert(l.slot());
                }
                bits
            })
            .collect();
        let n = pairs.len();
        let conflicts = (0..n)
            .map(|i| {
                let mut bits = FixedBitSet::with_capacity(n);
                for j in (0..n).filter(|&j| j != i) {
                    let (a, b) = (&pairs[i], &pairs[j]);
                    let shared_end = granularity == Granularity::EndToEnd && (a.src == b.src || a.dst == b.dst);
                    if shared_end || !links[i].is_disjoint(&links[j]) {
                        bits.insert(j);
                    }
                }
                bits
            })
            .collect();
        let endpoints = match granularity {
            Granularity::EndToEnd => mesh.ni_count(),
            Granularity::RouterToRouter => mesh.router_count(),
        };
        Self {
            granularity,
            pairs,
            links,
            conflicts,
            link_slots,
            endpoints,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub(crate) fn packer(&self, k: usize) -> Packer<'_> {
        Packer {
            set: self,
            subnets: (0..k)
                .map(|_| SubnetUse {
                    links: FixedBitSet::with_capacity(self.link_slots),
                    srcs: FixedBitSet::with_capacity(self.endpoints),
                    dsts: FixedBitSet::with_capacity(self.endpoints),
                })
                .collect(),
        }
    }

    /// Builds a plan from `(candidate index, subnet)` placements.
    pub(crate) fn plan_from(
        &self,
        k: usize,
        placements: &[(usize, usize)],
        provenance: Provenance,
    ) -> CircuitPlan {
        let mut plan = CircuitPlan::empty(self.granularity, k);
        plan.provenance = provenance;
        for &(i, s) in placements {
            let p = &self.pairs[i];
            plan.subnets[s].push(Circuit { src: p.src, dst: p.dst });
        }
        plan
    }
}

struct SubnetUse {
    links: FixedBitSet,
    srcs: FixedBitSet,
    dsts: FixedBitSet,
}

pub(crate) struct Packer<'a> {
    set: &'a CandidateSet,
    subnets: Vec<SubnetUse>,
}

impl Packer<'_> {
    /// Places candidate `i` in the first subnet with no conflict.
    pub fn try_place(&mut self, i: usize) -> Option<usize> {
        let pair = &self.set.pairs[i];
        let links = &self.set.links[i];
        let (src, dst) = (pair.src as usize, pair.dst as usize);
        let ends = self.set.granularity == Granularity::EndToEnd;
        let slot = self.subnets.iter().position(|s| {
            !(ends && (s.srcs.contains(src) || s.dsts.contains(dst))) && s.links.is_disjoint(links)
        })?;
        let s = &mut self.subnets[slot];
        s.links.union_with(links);
        s.srcs.insert(src);
        s.dsts.insert(dst);
        Some(slot)
    }
}

/// First-fit over the selected candidates in rank order.
pub(crate) fn first_fit(
    set: &CandidateSet,
    k: usize,
    selected: impl Iterator<Item = usize>,
) -> Vec<(usize, usize)> {
    let mut packer = set.packer(k);
    selected
        .filter_map(|i| packer.try_place(i).map(|s| (i, s)))
        .collect()
}

/// Packs the selected candidates in rank order. A candidate that fits no
/// subnet directly is placed by a Kempe-chain swap when one exists: the
/// circuits of subnets `a` and `b` connected to its conflicts in `a` trade
/// subnets, which frees `a` unless the chain also reaches a conflict in `b`.
/// Candidates that still do not fit are dropped.
pub(crate) fn kempe_fit(
    set: &CandidateSet,
    k: usize,
    selected: impl Iterator<Item = usize>,
) -> Vec<(usize, usize)> {
    let n = set.len();
    let mut members: Vec<FixedBitSet> = (0..k).map(|_| FixedBitSet::with_capacity(n)).collect();
    let mut placed = Vec::new();
    for i in selected {
        let conf = &set.conflicts[i];
        if let Some(s) = members.iter().position(|m| m.is_disjoint(conf)) {
            members[s].insert(i);
            placed.push(i);
            continue;
        }
        'search: for a in 0..k {
            'pair: for b in (0..k).filter(|&b| b != a) {
                let mut chain = FixedBitSet::with_capacity(n);
                let mut stack: Vec<usize> = members[a].intersection(conf).collect();
                chain.extend(stack.iter().copied());
                while let Some(v) = stack.pop() {
                    if members[b].contains(v) && conf.contains(v) {
                        continue 'pair;
                    }
                    for w in set.conflicts[v].ones() {
                        if !chain.contains(w) && (members[a].contains(w) || members[b].contains(w)) {
                            chain.insert(w);
                            stack.push(w);
                        }
                    }
                }
                for v in chain.ones() {
                    members[a].toggle(v);
                    members[b].toggle(v);
                }
                members[a].insert(i);
                placed.push(i);
                break 'search;
            }
        }
    }
    placed
        .into_iter()
        .map(|i| (i, members.iter().position(|m| m.contains(i)).expect("placed")))
        .collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::topology::{enumerate_pairs, RouterId};

    fn weight(set: &CandidateSet, placed: &[(usize, usize)]) -> u64 {
        placed.iter().map(|&(i, _)| set.pairs[i].weight).sum()
    }

    #[test]
    fn kempe_swap_places_what_first_fit_drops() {
        // Ranked (0,1) (3,0) (0,2) (3,2): the last conflicts with the second
        // and third, which first-fit put in different subnets.
        let mesh = MeshConfig::uniform(2, 2).unwrap();
        let mut p = TrafficProfile::new(Granularity::EndToEnd);
        p.add(0, 1, 100, 1);
        p.add(3, 0, 40, 2);
        p.add(0, 2, 60, 1);
        p.add(3, 2, 50, 1);
        let set = CandidateSet::from_profile(&p, &mesh).unwrap();
        assert_eq!(first_fit(&set, 2, 0..4).len(), 3);
        let placed = kempe_fit(&set, 2, 0..4);
        assert_eq!(placed.len(), 4);
        let plan = set.plan_from(2, &placed, Provenance::Manual);
        plan.validate(&mesh).unwrap();
        assert_eq!(weight(&set, &placed), 290);
    }

    proptest! {
        #[test]
        fn kempe_packing_is_conflict_free(seed in 0u64..500, k in 1usize..4, keep in 0.2f64..1.0) {
            use rand::{Rng, SeedableRng};
            let mesh = MeshConfig::uniform(3, 3).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut p = TrafficProfile::new(Granularity::RouterToRouter);
            for (s, d) in enumerate_pairs(&mesh, Granularity::RouterToRouter) {
                if rng.gen_bool(keep) {
                    p.add(s, d, rng.gen_range(1..100), mesh.manhattan(RouterId(s), RouterId(d)));
                }
            }
            let set = CandidateSet::from_profile(&p, &mesh).unwrap();
            let placed = kempe_fit(&set, k, 0..set.len());
            set.plan_from(k, &placed, Provenance::Manual).validate(&mesh).unwrap();
            if k == 1 {
                prop_assert_eq!(placed, first_fit(&set, 1, 0..set.len()));
            }
        }
    }
}
