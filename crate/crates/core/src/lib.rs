//! Exact linear-region analysis for piecewise-linear feedforward networks.
//!
//! * [`net`]: network model, forward pass, activation patterns
//! * [`regions`]: exact region enumeration and a grid-based oracle
//! * [`bounds`]: closed-form region-count bounds
//! * [`constructions`]: witness networks with predicted counts
//! * [`linmap`]: per-input affine maps of hidden units

pub mod affine;
pub mod bounds;
pub mod constructions;
pub mod error;
pub mod io;
pub mod linmap;
pub mod lp;
pub mod net;
pub mod polygons;
pub mod regions;
pub mod report;
pub mod rng;
pub mod verify;

pub use nalgebra;

pub use affine::AffineMap;
pub use bounds::BoundReport;
pub use error::{Error, Result};
pub use lp::Halfspace;
pub use net::{ActivationKind, ActivationPattern, Layer, LayerShape, Network, NetworkStructure};
pub use regions::{
    check_general_position, count_regions, enumerate_regions, oracle_count_by_grid,
    FeasibilityConfig, Region, RegionSet,
};
