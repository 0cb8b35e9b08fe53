use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{flits_for_packet, TrafficError, TrafficEvent};
use crate::topology::{endpoint_routers, Granularity, MeshConfig};

/// Aggregate traffic of one ordered endpoint pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairStats {
    /// Flits at full link width.
    pub flit_count: u64,
    /// X-Y distance between the endpoints' routers.
    pub hop_count: u32,
}

impl PairStats {
    /// Link occupancy: hops times flits.
    pub fn weight(&self) -> u64 {
        self.hop_count as u64 * self.flit_count
    }
}

/// Per-pair flit counts at a given granularity, keyed by `(src, dst)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrafficProfile {
    granularity: Granularity,
    entries: BTreeMap<(u32, u32), PairStats>,
}

impl TrafficProfile {
    pub fn new(granularity: Granularity) -> Self {
        Self {
            granularity,
            entries: BTreeMap::new(),
        }
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, src: u32, dst: u32) -> Option<PairStats> {
        self.entries.get(&(src, dst)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((u32, u32), PairStats)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }

    /// Adds `flits` to the pair, creating it with `hop_count` if absent.
    pub fn add(&mut self, src: u32, dst: u32, flits: u64, hop_count: u32) {
        self.entries
            .entry((src, dst))
            .or_insert(PairStats {
                flit_count: 0,
                hop_count,
            })
            .flit_count += flits;
    }

    pub fn total_flits(&self) -> u64 {
        self.entries.values().map(|p| p.flit_count).sum()
    }

    pub fn total_weight(&self) -> u64 {
        self.entries.values().map(PairStats::weight).sum()
    }

    /// Pairs ordered by descending weight, ties by ascending `(src, dst)`.
    pub fn ranked(&self) -> Vec<((u32, u32), PairStats)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_by(|a, b| b.1.weight().cmp(&a.1.weight()).then(a.0.cmp(&b.0)));
        v
    }

    /// The `n` heaviest pairs.
    pub fn top_pairs(&self, n: usize) -> TrafficProfile {
        Self {
            granularity: self.granularity,
            entries: self.ranked().into_iter().take(n).collect(),
        }
    }

    /// Multiplies every flit count by `factor`.
    pub fn scaled(&self, factor: u64) -> TrafficProfile {
        Self {
            granularity: self.granularity,
            entries: self
                .entries
                .iter()
                .map(|(k, v)| {
                    (
                        *k,
                        PairStats {
                            flit_count: v.flit_count * factor,
                            hop_count: v.hop_count,
                        },
                    )
                })
                .collect(),
        }
    }

    /// `src,dst,flit_count,hop_count` per line after a granularity comment.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# granularity={}", self.granularity)?;
        for ((s, d), p) in &self.entries {
            writeln!(w, "{s},{d},{},{}", p.flit_count, p.hop_count)?;
        }
        Ok(())
    }

    /// Parses a profile file. A `# granularity=..` comment, when present,
    /// overrides `default_granularity`. Hop counts must match the mesh.
    pub fn read_from<R: BufRead>(
        reader: R,
        mesh: &MeshConfig,
        default_granularity: Granularity,
    ) -> Result<TrafficProfile, TrafficError> {
        let mut profile = TrafficProfile::new(default_granularity);
        let mut rows = Vec::new();
        for (i, text) in reader.lines().enumerate() {
            let line = i + 1;
            let text = text?;
            let text = text.trim();
            if let Some(comment) = text.strip_prefix('#') {
                if let Some(g) = comment.trim().strip_prefix("granularity=") {
                    profile.granularity = g
                        .parse()
                        .map_err(|message| TrafficError::Parse { line, message })?;
                }
                continue;
            }
            if text.is_empty() {
                continue;
            }
            let fields: Vec<&str> = text.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(TrafficError::Parse {
                    line,
                    message: "expected src,dst,flit_count,hop_count".into(),
                });
            }
            let mut nums = [0u64; 4];
            for (slot, f) in nums.iter_mut().zip(&fields) {
                *slot = f.parse().map_err(|_| TrafficError::Parse {
                    line,
                    message: format!("`{f}` is not a non-negative integer"),
                })?;
            }
            rows.push((line, nums));
        }
        for (line, [s, d, flits, hops]) in rows {
            let (s, d) = (s as u32, d as u32);
            if s == d {
                return Err(TrafficError::SameEndpoints { line, node: s });
            }
            let (rs, rd) = endpoint_routers(mesh, profile.granularity, s, d)
                .map_err(|source| TrafficError::Topology { line, source })?;
            let expected = mesh.manhattan(rs, rd);
            if hops != expected as u64 {
                return Err(TrafficError::Parse {
                    line,
                    message: format!("hop_count {hops} differs from the X-Y distance {expected}"),
                });
            }
            profile.add(s, d, flits, expected);
        }
        Ok(profile)
    }
}

/// Aggregates `events` per pair. Flits are counted at `link_width_bits`
/// (normally the full link width); hops are router-to-router X-Y distances.
/// At router granularity, packets between two NIs of the same router are
/// dropped since they never leave the router.
pub fn profile(
    events: &[TrafficEvent],
    mesh: &MeshConfig,
    granularity: Granularity,
    link_width_bits: u32,
) -> Result<TrafficProfile, TrafficError> {
    let mut out = TrafficProfile::new(granularity);
    for e in events {
        let rs = mesh.router_of(e.src)?;
        let rd = mesh.router_of(e.dst)?;
        let flits = flits_for_packet(e.class, link_width_bits)? as u64;
        let hops = mesh.manhattan(rs, rd);
        match granularity {
            Granularity::EndToEnd => out.add(e.src.0, e.dst.0, flits, hops),
            Granularity::RouterToRouter if rs != rd => out.add(rs.0, rd.0, flits, hops),
            Granularity::RouterToRouter => {}
        }
    }
    Ok(out)
}
