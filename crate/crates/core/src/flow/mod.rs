//! Compactified flow: integration, separatrix skeleton, counts and signatures.

pub mod cycles;
pub mod integrator;
pub mod orbit;
pub mod probe;
pub mod signature;
pub mod skeleton;

pub use cycles::{limit_cycle_scan, LimitCycleReport};
pub use orbit::{integrate, integrate_chart, integrate_plane, Direction, FlowConfig, NodeId, Orbit, Termination};
pub use probe::{sector_probe, ProbeConfig, ProbeError, SectorKind};
pub use skeleton::{count_sr, trace_separatrices, Skeleton, SkeletonError};
pub use signature::{equivalence, signature, signatures_equivalent, TopoSignature, Variant};
