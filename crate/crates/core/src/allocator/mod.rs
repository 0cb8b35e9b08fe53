//! Circuit allocation: pick source/destination pairs whose X-Y routes can be
//! reserved as circuits and pack them into the `k` circuit-switched subnets.
//!
//! Two circuits in the same subnet conflict when they share a directed link,
//! a source endpoint (its injection port into the subnet) or a destination
//! endpoint (its ejection port). Circuits in different subnets never conflict
//! since they occupy disjoint wires.

mod genetic;
mod greedy;
mod oracle;
mod packing;

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{endpoint_routers, links_conflict, xy_route, Granularity, MeshConfig, Path, RouterId, TopologyError};
use crate::traffic::TrafficProfile;

pub use genetic::{decode, ga_allocate, ga_search, Chromosome, GaOutcome, GaParams};
pub use greedy::greedy_allocate;
pub use oracle::{enumerate_oracle, ORACLE_PAIR_LIMIT};
pub use packing::CandidateSet;

#[derive(Debug, Error)]
pub enum AllocError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("at least one circuit-switched subnet is required")]
    NoSubnets,
    #[error("{count} candidate pairs exceed the exhaustive-search limit of {max}")]
    TooManyCandidates { count: usize, max: usize },
    #[error("pair {src}->{dst} is not in the profile")]
    MissingPair { src: u32, dst: u32 },
    #[error("circuits {a:?} and {b:?} conflict in subnet {subnet}")]
    Conflict {
        subnet: usize,
        a: (u32, u32),
        b: (u32, u32),
    },
    #[error("pair {0:?} appears more than once in the plan")]
    DuplicatePair((u32, u32)),
    #[error("circuit {0:?} starts and ends at the same router")]
    ZeroHopCircuit((u32, u32)),
    #[error("invalid GA parameters: {0}")]
    InvalidParams(String),
    #[error("plan file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A profiled pair eligible for a circuit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePair {
    pub src: u32,
    pub dst: u32,
    /// Hops times flits.
    pub weight: u64,
    pub path: Path,
}

impl CandidatePair {
    /// Independent, path-based form of the circuit conflict rule. End-to-end
    /// circuits also own their NIs' injection and ejection channels; the end
    /// routers of router-to-router circuits still route and arbitrate, so
    /// only mesh links are exclusive there.
    pub fn conflicts_with(&self, other: &CandidatePair, granularity: Granularity) -> bool {
        let endpoints = granularity == Granularity::EndToEnd && (self.src == other.src || self.dst == other.dst);
        endpoints || links_conflict(&self.path, &other.path)
    }
}

/// Pairs of `profile` with positive weight, heaviest first, ties broken by
/// ascending `(src, dst)`.
pub fn candidates(profile: &TrafficProfile, mesh: &MeshConfig) -> Result<Vec<CandidatePair>, AllocError> {
    let granularity = profile.granularity();
    profile
        .ranked()
        .into_iter()
        .filter(|(_, s)| s.weight() > 0)
        .map(|((src, dst), stats)| {
            let (rs, rd) = endpoint_routers(mesh, granularity, src, dst)?;
            Ok(CandidatePair {
                src,
                dst,
                weight: stats.weight(),
                path: xy_route(rs, rd, mesh)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Greedy,
    Ga,
    Oracle,
    Manual,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Greedy => "greedy",
            Provenance::Ga => "ga",
            Provenance::Oracle => "oracle",
            Provenance::Manual => "manual",
        })
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "greedy" => Ok(Provenance::Greedy),
            "ga" => Ok(Provenance::Ga),
            "oracle" => Ok(Provenance::Oracle),
            "manual" => Ok(Provenance::Manual),
            other => Err(format!("unknown provenance `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Circuit {
    pub src: u32,
    pub dst: u32,
}

/// Circuits assigned to each CS subnet. `subnets[i]` is CS subnet `i`
/// (physical subnet `i + 1`, subnet 0 being the VC subnet).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitPlan {
    pub granularity: Granularity,
    pub subnets: Vec<Vec<Circuit>>,
    pub provenance: Provenance,
}

impl CircuitPlan {
    pub fn empty(granularity: Granularity, k: usize) -> Self {
        Self {
            granularity,
            subnets: vec![Vec::new(); k],
            provenance: Provenance::Manual,
        }
    }

    pub fn circuit_count(&self) -> usize {
        self.subnets.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.circuit_count() == 0
    }

    /// `(subnet, circuit)` for every circuit.
    pub fn circuits(&self) -> impl Iterator<Item = (usize, Circuit)> + '_ {
        self.subnets
            .iter()
            .enumerate()
            .flat_map(|(s, cs)| cs.iter().map(move |c| (s, *c)))
    }

    /// Subnet-independent identity of the plan's assignments.
    pub fn assignments(&self) -> BTreeSet<(usize, u32, u32)> {
        self.circuits().map(|(s, c)| (s, c.src, c.dst)).collect()
    }

    pub fn contains_pair(&self, src: u32, dst: u32) -> bool {
        self.circuits().any(|(_, c)| c.src == src && c.dst == dst)
    }

    /// Checks endpoints against the mesh, that no pair repeats, and that no two
    /// circuits of a subnet conflict. The check rebuilds every route and does
    /// not reuse the allocators' packing state.
    pub fn validate(&self, mesh: &MeshConfig) -> Result<(), AllocError> {
        let mut seen = HashSet::new();
        for (subnet, circuits) in self.subnets.iter().enumerate() {
            let mut placed: Vec<CandidatePair> = Vec::new();
            for c in circuits {
                if !seen.insert((c.src, c.dst)) {
                    return Err(AllocError::DuplicatePair((c.src, c.dst)));
                }
                let (rs, rd) =
                    endpoint_routers(mesh, self.granularity, c.src, c.dst)?;
                if rs == rd {
                    return Err(AllocError::ZeroHopCircuit((c.src, c.dst)));
                }
                let cand = CandidatePair {
                    src: c.src,
                    dst: c.dst,
                    weight: 0,
                    path: xy_route(rs, rd, mesh)?,
                };
                if let Some(other) = placed.iter().find(|p| p.conflicts_with(&cand, self.granularity)) {
                    return Err(AllocError::Conflict {
                        subnet,
                        a: (other.src, other.dst),
                        b: (c.src, c.dst),
                    });
                }
                placed.push(cand);
            }
        }
        Ok(())
    }

    /// Routers at both ends of a circuit.
    pub fn circuit_routers(&self, mesh: &MeshConfig, c: Circuit) -> Result<(RouterId, RouterId), TopologyError> {
        endpoint_routers(mesh, self.granularity, c.src, c.dst)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "granularity={} subnets={}", self.granularity, self.subnets.len())?;
        writeln!(w, "# provenance={}", self.provenance)?;
        for (s, c) in self.circuits() {
            writeln!(w, "{s},{},{}", c.src, c.dst)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(reader: R) -> Result<CircuitPlan, AllocError> {
        let mut header: Option<(Granularity, usize)> = None;
        let mut provenance = Provenance::Manual;
        let mut rows = Vec::new();
        for (i, text) in reader.lines().enumerate() {
            let line = i + 1;
            let text = text?;
            let text = text.trim();
            let parse_err = |message: String| AllocError::Parse { line, message };
            if let Some(comment) = text.strip_prefix('#') {
                if let Some(p) = comment.trim().strip_prefix("provenance=") {
                    provenance = p.parse().map_err(parse_err)?;
                }
                continue;
            }
            if text.is_empty() {
                continue;
            }
            if header.is_none() {
                let mut granularity = None;
                let mut subnets = None;
                for token in text.split_whitespace() {
                    match token.split_once('=') {
                        Some(("granularity", g)) => granularity = Some(g.parse().map_err(parse_err)?),
                        Some(("subnets", k)) => {
                            subnets = Some(k.parse::<usize>().map_err(|e| parse_err(e.to_string()))?)
                        }
                        _ => return Err(parse_err(format!("unexpected header token `{token}`"))),
                    }
                }
                match (granularity, subnets) {
                    (Some(g), Some(k)) => header = Some((g, k)),
                    _ => {
                        return Err(parse_err(
                            "header must be `granularity=<e2e|r2r> subnets=<k>`".into(),
                        ))
                    }
                }
                continue;
            }
            let fields: Vec<&str> = text.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(parse_err("expected subnet_index,src,dst".into()));
            }
            let mut nums = [0u32; 3];
            for (slot, f) in nums.iter_mut().zip(&fields) {
                *slot = f
                    .parse()
                    .map_err(|_| parse_err(format!("`{f}` is not a non-negative integer")))?;
            }
            rows.push((line, nums));
        }
        let (granularity, k) = header.ok_or(AllocError::Parse {
            line: 0,
            message: "missing header".into(),
        })?;
        let mut plan = CircuitPlan {
            granularity,
            subnets: vec![Vec::new(); k],
            provenance,
        };
        for (line, [s, src, dst]) in rows {
            let slot = plan.subnets.get_mut(s as usize).ok_or(AllocError::Parse {
                line,
                message: format!("subnet index {s} is not below {k}"),
            })?;
            slot.push(Circuit { src, dst });
        }
        Ok(plan)
    }
}

/// Sum of the profile weights of every circuit in the plan.
pub fn plan_weight(plan: &CircuitPlan, profile: &TrafficProfile) -> Result<u64, AllocError> {
    plan.circuits().try_fold(0u64, |acc, (_, c)| {
        let stats = profile
            .get(c.src, c.dst)
            .ok_or(AllocError::MissingPair { src: c.src, dst: c.dst })?;
        Ok(acc + stats.weight())
    })
}
