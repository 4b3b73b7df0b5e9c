//! Witness networks with their predicted region counts.

mod identification;
mod maxout;
mod sawtooth;

pub use identification::identification_check;
pub use maxout::{
    build_catalan_layer, build_maxout_cones, build_maxout_cones_with, build_maxout_parallel,
    build_rank2_maxout_as_rectifier, build_shi_layer, envelope_unit, Rank2Simulation,
    DEFAULT_ROTATION,
};
pub use sawtooth::{
    build_abs_net, build_folding_rectifier_net, build_sawtooth_group, build_sawtooth_net,
    build_sawtooth_readout, sawtooth_value, SawtoothGroup,
};

use num_bigint::BigUint;
use serde::Serialize;

use crate::net::Network;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    SawtoothGroup,
    FoldingRectifierNet,
    AbsNet,
    MaxoutParallel,
    MaxoutCones,
    Rank2MaxoutAsRectifier,
    ShiLayer,
    CatalanLayer,
}

/// Construction parameters; fields that do not apply to a kind are omitted.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct WitnessParams {
    pub n0: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub widths: Vec<usize>,
    /// Units per folding group, per folding layer.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub fold_counts: Vec<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub units: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessSpec {
    pub kind: WitnessKind,
    pub params: WitnessParams,
    /// Decimal string: counts can exceed machine integers.
    #[serde(serialize_with = "as_decimal")]
    pub predicted_count: BigUint,
    /// True when the count is exactly the prediction, false for a lower bound.
    pub exact: bool,
    /// Formula the prediction comes from.
    pub provenance: String,
}

fn as_decimal<S: serde::Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

#[derive(Debug, Clone)]
pub struct Witness {
    pub network: Network,
    pub spec: WitnessSpec,
}
