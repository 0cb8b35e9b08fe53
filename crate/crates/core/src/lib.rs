//! Hybrid circuit/packet switched network-on-chip toolkit.
//!
//! Every physical link of a 2D mesh is split by wires into one buffered
//! virtual-channel subnet and `k` bufferless circuit-switched subnets. The
//! crate profiles traffic, chooses conflict-free circuits for the CS subnets
//! (greedy, genetic or exhaustive), simulates the result flit by flit, and
//! turns event counts into energy-per-flit figures.
//!
//! Modules, bottom up:
//!
//! - [`topology`]: mesh geometry, X-Y routes, link conflicts
//! - [`traffic`]: synthetic generators, trace files, per-pair profiles
//! - [`allocator`]: circuit selection and packing
//! - [`sim`]: the cycle-driven network model and injection sweeps
//! - [`energy`]: event-based energy accounting
//! - [`orchestrator`]: baseline, static and adaptive experiments

pub mod allocator;
pub mod energy;
pub mod orchestrator;
pub mod sim;
pub mod topology;
pub mod traffic;
