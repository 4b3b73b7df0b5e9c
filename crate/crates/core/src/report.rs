//! JSON region report.

use serde::Serialize;

use crate::affine::AffineJson;
use crate::error::Result;
use crate::regions::RegionSet;

#[derive(Debug, Clone, Serialize)]
pub struct RegionEntry {
    pub pattern: String,
    pub witness: Vec<f64>,
    pub affine: AffineJson,
    /// `[normal..., offset]` rows meaning `normal·x < offset`.
    pub constraints: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionReport {
    pub count: usize,
    #[serde(rename = "box")]
    pub box_halfwidth: f64,
    pub regions: Vec<RegionEntry>,
}

impl RegionReport {
    pub fn new(rs: &RegionSet) -> Self {
        Self {
            count: rs.len(),
            box_halfwidth: rs.box_halfwidth,
            regions: rs
                .regions
                .iter()
                .map(|r| RegionEntry {
                    pattern: r.pattern.code(),
                    witness: r.witness.iter().copied().collect(),
                    affine: r.affine.to_json(),
                    constraints: r.constraints.iter().map(|h| h.to_row()).collect(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| crate::Error::Structure(format!("report serialization: {e}")))?;
        s.push('\n');
        Ok(s)
    }
}
