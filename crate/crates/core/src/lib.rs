//! Kinetic Monte Carlo laboratory for the (multicolor) totally asymmetric
//! simple exclusion process.
//!
//! The crate simulates colored exclusion dynamics driven by reproducible
//! Poisson clocks, checks exact finite-time identities relating second-class
//! particle positions to counting functions of the single-color process,
//! traces backwards geodesics of the height function, and probes the
//! large-time (KPZ) statistics of all of the above at desk scale. A
//! uniformization oracle provides exact transient laws on micro systems, and
//! [`harness`] packages everything into deterministic, file-emitting
//! experiments.

pub mod asymptotics;
pub mod geodesics;
pub mod harness;
pub mod identities;
pub mod kinetics;
pub mod lattice;
pub mod multicolor;
pub mod oracle;
pub mod rng;
pub mod stats;

pub use kinetics::{EventClass, EventRecord, PoissonField, SimState, TrajectoryLog};
pub use lattice::{
    Color, ColorConfig, HeightState, InitialKind, LatticeError, LeftBoundary, RightBoundary, Site,
    INF,
};
pub use rng::Stream;
