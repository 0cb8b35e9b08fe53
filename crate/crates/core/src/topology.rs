//! 2D mesh geometry, X-Y routing and link-level conflict tests.
//!
//! Routers are numbered row-major: router `y * width + x` sits at column `x`
//! and row `y`. Network interfaces (NIs) are numbered consecutively, router by
//! router, so the NIs of router 0 come first.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("mesh dimensions must be positive, got {width}x{height}")]
    EmptyMesh { width: u32, height: u32 },
    #[error("ni_per_router lists {got} routers but the mesh has {expected}")]
    NiListLength { got: usize, expected: usize },
    #[error("router {0} is outside the mesh")]
    RouterOutOfRange(u32),
    #[error("node {0} is outside the mesh")]
    NodeOutOfRange(u32),
    #[error("source and destination are both router {0}, the route would be empty")]
    EmptyPath(u32),
}

/// Index of a network interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

/// Row-major index of a router.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RouterId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RouterId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ni{}", self.0)
    }
}

impl fmt::Display for RouterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// Which endpoints a pair, profile entry or circuit refers to.
///
/// `EndToEnd` pairs are network interfaces, `RouterToRouter` pairs are routers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Granularity {
    #[serde(rename = "e2e", alias = "ni")]
    EndToEnd,
    #[serde(rename = "r2r", alias = "router")]
    RouterToRouter,
}

impl Granularity {
    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::EndToEnd => "e2e",
            Granularity::RouterToRouter => "r2r",
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "e2e" | "ni" => Ok(Granularity::EndToEnd),
            "r2r" | "router" => Ok(Granularity::RouterToRouter),
            other => Err(format!("unknown granularity `{other}` (expected e2e or r2r)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    /// +x
    East,
    /// -x
    West,
    /// +y
    North,
    /// -y
    South,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::East,
        Direction::West,
        Direction::North,
        Direction::South,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::East => Direction::West,
            Direction::West => Direction::East,
            Direction::North => Direction::South,
            Direction::South => Direction::North,
        }
    }

    fn step(self) -> (i64, i64) {
        match self {
            Direction::East => (1, 0),
            Direction::West => (-1, 0),
            Direction::North => (0, 1),
            Direction::South => (0, -1),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Direction::East => "E",
            Direction::West => "W",
            Direction::North => "N",
            Direction::South => "S",
        };
        f.write_str(c)
    }
}

/// A unidirectional channel between two adjacent routers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DirectedLink {
    pub from: RouterId,
    pub to: RouterId,
    pub direction: Direction,
}

impl DirectedLink {
    /// Dense index in `0..mesh.link_slots()`, keyed by source router and direction.
    pub fn slot(&self) -> usize {
        self.from.index() * 4 + self.direction.index()
    }
}

/// An X-Y route between two distinct routers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Path {
    pub src_router: RouterId,
    pub dst_router: RouterId,
    pub links: Vec<DirectedLink>,
}

impl Path {
    pub fn hops(&self) -> usize {
        self.links.len()
    }

    /// Routers visited in order, both endpoints included.
    pub fn routers(&self) -> impl Iterator<Item = RouterId> + '_ {
        std::iter::once(self.src_router).chain(self.links.iter().map(|l| l.to))
    }
}

/// Mesh geometry plus the attachment of network interfaces to routers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeshConfig {
    width: u32,
    height: u32,
    ni_per_router: Vec<u32>,
    ni_router: Vec<RouterId>,
    first_ni: Vec<u32>,
}

impl MeshConfig {
    pub fn new(width: u32, height: u32, ni_per_router: Vec<u32>) -> Result<Self, TopologyError> {
        if width == 0 || height == 0 {
            return Err(TopologyError::EmptyMesh { width, height });
        }
        let routers = (width * height) as usize;
        if ni_per_router.len() != routers {
            return Err(TopologyError::NiListLength {
                got: ni_per_router.len(),
                expected: routers,
            });
        }
        let mut ni_router = Vec::new();
        let mut first_ni = Vec::with_capacity(routers);
        for (r, &count) in ni_per_router.iter().enumerate() {
            first_ni.push(ni_router.len() as u32);
            ni_router.extend(std::iter::repeat(RouterId(r as u32)).take(count as usize));
        }
        Ok(Self {
            width,
            height,
            ni_per_router,
            ni_router,
            first_ni,
        })
    }

    /// One network interface per router.
    pub fn uniform(width: u32, height: u32) -> Result<Self, TopologyError> {
        Self::new(width, height, vec![1; (width as usize) * (height as usize)])
    }

    /// 4x4 mesh with 51 interfaces: a core, an L2 bank and a directory on every
    /// router, plus two DMA controllers and one I/O controller on routers 0, 3
    /// and 12.
    pub fn cmp16_51ni() -> Self {
        let mut nis = vec![3u32; 16];
        for r in [0usize, 3, 12] {
            nis[r] += 1;
        }
        Self::new(4, 4, nis).expect("static mesh profile is valid")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn router_count(&self) -> usize {
        self.ni_per_router.len()
    }

    pub fn ni_count(&self) -> usize {
        self.ni_router.len()
    }

    pub fn ni_per_router(&self) -> &[u32] {
        &self.ni_per_router
    }

    /// Size of the dense directed-link index space (four slots per router,
    /// edge slots unused).
    pub fn link_slots(&self) -> usize {
        self.router_count() * 4
    }

    pub fn router_of(&self, node: NodeId) -> Result<RouterId, TopologyError> {
        self.ni_router
            .get(node.index())
            .copied()
            .ok_or(TopologyError::NodeOutOfRange(node.0))
    }

    /// NIs attached to `router`, in increasing order.
    pub fn nodes_of(&self, router: RouterId) -> std::ops::Range<u32> {
        let first = self.first_ni[router.index()];
        first..first + self.ni_per_router[router.index()]
    }

    /// Position of `node` among the NIs of its router.
    pub fn local_index(&self, node: NodeId) -> Result<usize, TopologyError> {
        let r = self.router_of(node)?;
        Ok((node.0 - self.first_ni[r.index()]) as usize)
    }

    pub fn check_router(&self, router: RouterId) -> Result<(), TopologyError> {
        if router.index() < self.router_count() {
            Ok(())
        } else {
            Err(TopologyError::RouterOutOfRange(router.0))
        }
    }

    pub fn coords(&self, router: RouterId) -> (u32, u32) {
        (router.0 % self.width, router.0 / self.width)
    }

    pub fn router_at(&self, x: u32, y: u32) -> RouterId {
        RouterId(y * self.width + x)
    }

    /// Neighbour of `router` in `dir`, if the mesh has one.
    pub fn neighbor(&self, router: RouterId, dir: Direction) -> Option<RouterId> {
        let (x, y) = self.coords(router);
        let (dx, dy) = dir.step();
        let nx = x as i64 + dx;
        let ny = y as i64 + dy;
        if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
            None
        } else {
            Some(self.router_at(nx as u32, ny as u32))
        }
    }

    pub fn manhattan(&self, a: RouterId, b: RouterId) -> u32 {
        let (ax, ay) = self.coords(a);
        let (bx, by) = self.coords(b);
        ax.abs_diff(bx) + ay.abs_diff(by)
    }

    /// First output direction of the X-Y route from `at` toward `dst`, or
    /// `None` once `at == dst`.
    pub fn xy_next(&self, at: RouterId, dst: RouterId) -> Option<Direction> {
        let (x, y) = self.coords(at);
        let (dx, dy) = self.coords(dst);
        if dx > x {
            Some(Direction::East)
        } else if dx < x {
            Some(Direction::West)
        } else if dy > y {
            Some(Direction::North)
        } else if dy < y {
            Some(Direction::South)
        } else {
            None
        }
    }

    /// Number of existing directed links.
    pub fn directed_link_count(&self) -> usize {
        let (w, h) = (self.width as usize, self.height as usize);
        2 * ((w - 1) * h + (h - 1) * w)
    }
}

/// Dimension-ordered route: all X steps, then all Y steps.
pub fn xy_route(src: RouterId, dst: RouterId, mesh: &MeshConfig) -> Result<Path, TopologyError> {
    mesh.check_router(src)?;
    mesh.check_router(dst)?;
    if src == dst {
        return Err(TopologyError::EmptyPath(src.0));
    }
    let mut links = Vec::with_capacity(mesh.manhattan(src, dst) as usize);
    let mut at = src;
    while let Some(direction) = mesh.xy_next(at, dst) {
        let to = mesh
            .neighbor(at, direction)
            .expect("X-Y step stays inside the mesh");
        links.push(DirectedLink {
            from: at,
            to,
            direction,
        });
        at = to;
    }
    Ok(Path {
        src_router: src,
        dst_router: dst,
        links,
    })
}

/// All ordered pairs of distinct endpoints (NIs for `EndToEnd`, routers for
/// `RouterToRouter`), sorted by `(src, dst)`.
pub fn enumerate_pairs(mesh: &MeshConfig, granularity: Granularity) -> Vec<(u32, u32)> {
    let n = match granularity {
        Granularity::EndToEnd => mesh.ni_count(),
        Granularity::RouterToRouter => mesh.router_count(),
    } as u32;
    let mut pairs = Vec::with_capacity((n as usize) * (n.saturating_sub(1) as usize));
    for s in 0..n {
        for d in 0..n {
            if s != d {
                pairs.push((s, d));
            }
        }
    }
    pairs
}

/// Routers hosting a pair of endpoints: NIs at `EndToEnd`, the routers
/// themselves at `RouterToRouter`.
pub fn endpoint_routers(
    mesh: &MeshConfig,
    granularity: Granularity,
    src: u32,
    dst: u32,
) -> Result<(RouterId, RouterId), TopologyError> {
    match granularity {
        Granularity::EndToEnd => Ok((mesh.router_of(NodeId(src))?, mesh.router_of(NodeId(dst))?)),
        Granularity::RouterToRouter => {
            mesh.check_router(RouterId(src))?;
            mesh.check_router(RouterId(dst))?;
            Ok((RouterId(src), RouterId(dst)))
        }
    }
}

/// True iff the two routes share a directed link.
///
/// Under X-Y routing two routes that enter (or leave) a router through the
/// same port necessarily share the link feeding (or leaving) that port, so
/// link sharing covers the inter-router port conflicts as well. Endpoint
/// injection/ejection sharing is checked by the allocator, which knows the
/// granularity.
pub fn links_conflict(a: &Path, b: &Path) -> bool {
    a.links.iter().any(|la| b.links.contains(la))
}
