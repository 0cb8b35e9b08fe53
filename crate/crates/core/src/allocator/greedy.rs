use super::packing::{first_fit, CandidateSet};
use super::{AllocError, CircuitPlan, Provenance};
use crate::topology::MeshConfig;
use crate::traffic::TrafficProfile;

/// Sweeps the candidates heaviest first and puts each one in the first of the
/// `k` subnets where it fits; candidates that fit nowhere are discarded.
pub fn greedy_allocate(
    profile: &TrafficProfile,
    mesh: &MeshConfig,
    k: usize,
) -> Result<CircuitPlan, AllocError> {
    if k == 0 {
        return Err(AllocError::NoSubnets);
    }
    let set = CandidateSet::from_profile(profile, mesh)?;
    Ok(greedy_plan(&set, k, None))
}

/// Greedy sweep over `set`, optionally skipping one candidate index.
pub(crate) fn greedy_plan(set: &CandidateSet, k: usize, skip: Option<usize>) -> CircuitPlan {
    let placed = first_fit(set, k, (0..set.len()).filter(|&i| Some(i) != skip));
    set.plan_from(k, &placed, Provenance::Greedy)
}

pub(crate) fn greedy_selection(set: &CandidateSet, k: usize, skip: Option<usize>) -> Vec<bool> {
    let mut bits = vec![false; set.len()];
    for (i, _) in first_fit(set, k, (0..set.len()).filter(|&i| Some(i) != skip)) {
        bits[i] = true;
    }
    bits
}
