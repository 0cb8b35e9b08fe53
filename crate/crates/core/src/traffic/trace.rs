//! Text trace files: `inject_cycle,src_ni,dst_ni,class` per line, `#` comments.

use std::io::{BufRead, Write};

use log::warn;

use super::{PacketKind, PacketSizes, TrafficError, TrafficEvent};
use crate::topology::{MeshConfig, NodeId};

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub events: Vec<TrafficEvent>,
    pub warnings: Vec<String>,
}

fn field<'a>(
    parts: &mut impl Iterator<Item = &'a str>,
    line: usize,
    name: &str,
) -> Result<&'a str, TrafficError> {
    parts
        .next()
        .map(str::trim)
        .ok_or_else(|| TrafficError::Parse {
            line,
            message: format!("missing {name}"),
        })
}

fn number<T: std::str::FromStr>(text: &str, line: usize, name: &str) -> Result<T, TrafficError> {
    text.parse().map_err(|_| TrafficError::Parse {
        line,
        message: format!("{name} `{text}` is not a non-negative integer"),
    })
}

/// Reads a trace, validating every node against `mesh`. Events come back
/// sorted by injection cycle; packet ids follow line order.
pub fn ingest<R: BufRead>(
    reader: R,
    mesh: &MeshConfig,
    sizes: PacketSizes,
) -> Result<Ingested, TrafficError> {
    let mut out = Ingested::default();
    let mut last_cycle = 0u64;
    let mut sorted = true;
    for (i, text) in reader.lines().enumerate() {
        let line = i + 1;
        let text = text?;
        let text = text.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let mut parts = text.split(',');
        let cycle: u64 = number(field(&mut parts, line, "inject_cycle")?, line, "inject_cycle")?;
        let src: u32 = number(field(&mut parts, line, "src")?, line, "src")?;
        let dst: u32 = number(field(&mut parts, line, "dst")?, line, "dst")?;
        let kind: PacketKind = field(&mut parts, line, "class")?
            .parse()
            .map_err(|message| TrafficError::Parse { line, message })?;
        if parts.next().is_some() {
            return Err(TrafficError::Parse {
                line,
                message: "expected exactly four fields".into(),
            });
        }
        for node in [src, dst] {
            mesh.router_of(NodeId(node))
                .map_err(|source| TrafficError::Topology { line, source })?;
        }
        if src == dst {
            return Err(TrafficError::SameEndpoints { line, node: src });
        }
        if cycle < last_cycle {
            sorted = false;
        }
        last_cycle = last_cycle.max(cycle);
        out.events.push(TrafficEvent {
            inject_cycle: cycle,
            src: NodeId(src),
            dst: NodeId(dst),
            class: sizes.class(kind),
            packet_id: out.events.len() as u64,
        });
    }
    if !sorted {
        let msg = "trace cycles are not monotone; events were reordered by inject_cycle".to_string();
        warn!("{msg}");
        out.warnings.push(msg);
        out.events.sort_by_key(|e| e.inject_cycle);
    }
    Ok(out)
}

pub fn write_trace<W: Write>(mut w: W, events: &[TrafficEvent]) -> std::io::Result<()> {
    writeln!(w, "# inject_cycle,src_ni,dst_ni,class")?;
    for e in events {
        writeln!(w, "{},{},{},{}", e.inject_cycle, e.src.0, e.dst.0, e.class.kind)?;
    }
    Ok(())
}
