//! JSON network files.
//!
//! ```json
//! {"input_dim": 2,
//!  "layers": [{"activation": "maxout", "rank": 3, "width": 1,
//!              "weights": [[...], [...], [...]], "bias": [...]}]}
//! ```
//!
//! Rows are unit-major: unit `j`, branch `t` is row `j·k + t`. Numbers are
//! written with 17 significant digits so that a save/load cycle is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::net::{ActivationKind, Layer, Network};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    input_dim: usize,
    layers: Vec<RawLayer>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    activation: String,
    #[serde(default)]
    rank: Option<usize>,
    width: usize,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

fn parse_err(context: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        context: context.into(),
        message: message.into(),
    }
}

pub fn network_from_json(text: &str) -> Result<Network> {
    let raw: RawNetwork = serde_json::from_str(text).map_err(|e| {
        parse_err(
            format!("line {}, column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    if raw.input_dim == 0 {
        return Err(parse_err("input_dim", "must be positive"));
    }
    if raw.layers.is_empty() {
        return Err(parse_err("layers", "at least one layer is required"));
    }
    let mut prev = raw.input_dim;
    let mut layers = Vec::with_capacity(raw.layers.len());
    for (idx, rl) in raw.layers.into_iter().enumerate() {
        let ctx = format!("layer {}", idx + 1);
        let activation = match (rl.activation.as_str(), rl.rank) {
            ("rectifier", None) => ActivationKind::Rectifier,
            ("rectifier", Some(_)) => {
                return Err(parse_err(ctx, "rank not allowed on a rectifier layer"))
            }
            ("maxout", Some(rank)) if rank >= 2 => ActivationKind::Maxout { rank },
            ("maxout", Some(rank)) => {
                return Err(parse_err(ctx, format!("maxout rank must be >= 2, got {rank}")))
            }
            ("maxout", None) => return Err(parse_err(ctx, "maxout layer requires a rank")),
            (other, _) => {
                return Err(parse_err(ctx, format!("unknown activation {other:?}")));
            }
        };
        if rl.width == 0 {
            return Err(parse_err(ctx, "width must be positive"));
        }
        let rows = rl.width * activation.rows_per_unit();
        if rl.weights.len() != rows {
            return Err(parse_err(
                ctx,
                format!(
                    "expected {rows} weight rows for width {} ({activation}), found {}",
                    rl.width,
                    rl.weights.len()
                ),
            ));
        }
        if rl.bias.len() != rows {
            return Err(parse_err(
                ctx,
                format!("expected {rows} bias entries, found {}", rl.bias.len()),
            ));
        }
        if let Some((r, row)) = rl.weights.iter().enumerate().find(|(_, r)| r.len() != prev) {
            return Err(parse_err(
                format!("{ctx}, weight row {}", r + 1),
                format!("expected length {prev}, found {}", row.len()),
            ));
        }
        let flat: Vec<f64> = rl.weights.iter().flatten().copied().collect();
        let weights = DMatrix::from_row_slice(rows, prev, &flat);
        let layer = Layer::new(activation, weights, DVector::from_vec(rl.bias))
            .map_err(|e| parse_err(ctx.clone(), e.to_string()))?;
        prev = layer.width;
        layers.push(layer);
    }
    Network::new(raw.input_dim, layers)
}

fn push_number(out: &mut String, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::Structure(format!("cannot serialize non-finite value {v}")));
    }
    write!(out, "{v:.16e}").expect("write to string");
    Ok(())
}

pub fn network_to_json(net: &Network) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "{{\n  \"input_dim\": {},\n  \"layers\": [", net.input_dim).unwrap();
    for (li, layer) in net.layers.iter().enumerate() {
        out.push_str("    {\n");
        match layer.activation {
            ActivationKind::Rectifier => out.push_str("      \"activation\": \"rectifier\",\n"),
            ActivationKind::Maxout { rank } => {
                out.push_str("      \"activation\": \"maxout\",\n");
                writeln!(out, "      \"rank\": {rank},").unwrap();
            }
        }
        writeln!(out, "      \"width\": {},", layer.width).unwrap();
        out.push_str("      \"weights\": [\n");
        for r in 0..layer.weights.nrows() {
            out.push_str("        [");
            for c in 0..layer.weights.ncols() {
                if c > 0 {
                    out.push_str(", ");
                }
                push_number(&mut out, layer.weights[(r, c)])?;
            }
            out.push(']');
            if r + 1 < layer.weights.nrows() {
                out.push(',');
            }
            out.push('\n');
        }
        out.push_str("      ],\n      \"bias\": [");
        for (i, &b) in layer.bias.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            push_number(&mut out, b)?;
        }
        out.push_str("]\n    }");
        if li + 1 < net.layers.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push_str("  ]\n}\n");
    Ok(out)
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let text = std::fs::read_to_string(path)?;
    network_from_json(&text)
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, network_to_json(net)?)?;
    Ok(())
}
