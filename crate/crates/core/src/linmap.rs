//! Affine maps realized by single hidden units around given inputs.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::affine::{AffineJson, AffineMap};
use crate::error::{Error, Result};
use crate::net::Network;

fn check_unit(net: &Network, layer: usize, unit: usize) -> Result<()> {
    if layer >= net.depth() {
        return Err(Error::Index(format!(
            "layer {layer} out of range (network has {} layers)",
            net.depth()
        )));
    }
    if unit >= net.layers[layer].width {
        return Err(Error::Index(format!(
            "unit {unit} out of range (layer {layer} has {} units)",
            net.layers[layer].width
        )));
    }
    Ok(())
}

/// The 1 × n0 affine map `u·x + c` that unit `unit` of layer `layer` (both
/// 0-based) computes on the region of `x`. Inactive rectifiers give the zero map.
pub fn unit_linear_map(net: &Network, layer: usize, unit: usize, x: &DVector<f64>) -> Result<AffineMap> {
    check_unit(net, layer, unit)?;
    let pattern = net.pattern_at(x)?;
    let mut map = AffineMap::identity(net.input_dim);
    for (l, states) in pattern.0.iter().enumerate().take(layer + 1) {
        let (m, d) = net.layers[l].fixed_map(states);
        map = map.then(&m, &d);
    }
    Ok(map.row(unit))
}

fn activation(net: &Network, layer: usize, unit: usize, x: &DVector<f64>) -> Result<f64> {
    Ok(net.forward(x)?[layer][unit])
}

/// Distance from `x` to the nearest switching hyperplane of any unit, using
/// the local affine maps; infinite if no unit can switch.
pub fn boundary_distance(net: &Network, x: &DVector<f64>) -> Result<f64> {
    let pattern = net.pattern_at(x)?;
    let mut map = AffineMap::identity(net.input_dim);
    let mut best = f64::INFINITY;
    for (layer, states) in net.layers.iter().zip(&pattern.0) {
        let pre = map.then(&layer.weights, &layer.bias);
        let k = layer.activation.rows_per_unit();
        let value = |r: usize| (pre.matrix.row(r) * x)[0] + pre.offset[r];
        for j in 0..layer.width {
            // Rectifier: the single row against zero; maxout: chosen branch
            // against every other branch.
            let chosen = if k == 1 { j } else { j * k + states[j] as usize };
            let rivals: Vec<Option<usize>> = if k == 1 {
                vec![None]
            } else {
                (j * k..(j + 1) * k).filter(|&r| r != chosen).map(Some).collect()
            };
            for rival in rivals {
                let (g, v) = match rival {
                    None => (pre.matrix.row(chosen).into_owned(), value(chosen)),
                    Some(r) => (
                        pre.matrix.row(chosen) - pre.matrix.row(r),
                        value(chosen) - value(r),
                    ),
                };
                let n = g.norm();
                if n > crate::lp::DEGENERATE_NORM {
                    best = best.min(v.abs() / n);
                }
            }
        }
        let (m, d) = layer.fixed_map(states);
        map = map.then(&m, &d);
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentifiedPair {
    pub first: Vec<f64>,
    pub adjusted: Vec<f64>,
    pub first_map: AffineJson,
    pub adjusted_map: AffineJson,
    pub activation: f64,
    pub adjusted_activation: f64,
    /// Both points already share one activation pattern.
    pub same_region: bool,
}

const NEWTON_STEPS: usize = 8;

/// Moves `x2` along its local gradient until unit `(layer, unit)` has the same
/// activation as at `x1`, keeping `x2`'s activation pattern.
pub fn find_identified_pair(
    net: &Network,
    layer: usize,
    unit: usize,
    x1: &DVector<f64>,
    x2: &DVector<f64>,
    target_tol: f64,
) -> Result<IdentifiedPair> {
    check_unit(net, layer, unit)?;
    let map1 = unit_linear_map(net, layer, unit, x1)?;
    let target = activation(net, layer, unit, x1)?;
    let report = |adjusted: &DVector<f64>, same: bool| -> Result<IdentifiedPair> {
        Ok(IdentifiedPair {
            first: x1.iter().copied().collect(),
            adjusted: adjusted.iter().copied().collect(),
            first_map: map1.to_json(),
            adjusted_map: unit_linear_map(net, layer, unit, adjusted)?.to_json(),
            activation: target,
            adjusted_activation: activation(net, layer, unit, adjusted)?,
            same_region: same,
        })
    };
    let p2 = net.pattern_at(x2)?;
    let same = net.pattern_at(x1)? == p2;
    let map2 = unit_linear_map(net, layer, unit, x2)?;
    let u = map2.matrix.row(0).transpose();
    let norm2 = u.norm_squared();
    if norm2 == 0.0 || target <= 0.0 {
        return Err(Error::NoIdentifiedPair(
            "unit is inactive or constant at one of the points".into(),
        ));
    }
    let mut x = x2.clone();
    for _ in 0..NEWTON_STEPS {
        let current = activation(net, layer, unit, &x)?;
        if (current - target).abs() <= target_tol {
            return report(&x, same);
        }
        let next = &x + &u * ((target - current) / norm2);
        if net.pattern_at(&next)? != p2 {
            return Err(Error::NoIdentifiedPair(format!(
                "activation pattern changes before reaching {target}"
            )));
        }
        x = next;
    }
    let current = activation(net, layer, unit, &x)?;
    if (current - target).abs() <= target_tol {
        report(&x, same)
    } else {
        Err(Error::NoIdentifiedPair(format!(
            "residual {} above tolerance {target_tol}",
            (current - target).abs()
        )))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitPiece {
    pub map: AffineJson,
    pub representative: Vec<f64>,
    pub activation: f64,
    #[serde(skip)]
    pub affine: AffineMap,
}

const DEDUP_TOL: f64 = 1e-8;

/// Distinct affine responses of a unit over `samples`, restricted to samples
/// with positive activation, sorted by coefficients. The representative of a
/// piece is its first sample in input order.
pub fn enumerate_unit_pieces(
    net: &Network,
    layer: usize,
    unit: usize,
    samples: &[DVector<f64>],
) -> Result<Vec<UnitPiece>> {
    check_unit(net, layer, unit)?;
    let responses: Vec<Option<(AffineMap, f64)>> = samples
        .par_iter()
        .map(|x| {
            let a = activation(net, layer, unit, x)?;
            if a > 0.0 {
                Ok(Some((unit_linear_map(net, layer, unit, x)?, a)))
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;
    let mut pieces: Vec<UnitPiece> = Vec::new();
    for (x, r) in samples.iter().zip(responses) {
        let Some((map, a)) = r else { continue };
        if pieces.iter().any(|p| p.affine.max_abs_diff(&map) <= DEDUP_TOL) {
            continue;
        }
        pieces.push(UnitPiece {
            map: map.to_json(),
            representative: x.iter().copied().collect(),
            activation: a,
            affine: map,
        });
    }
    pieces.sort_by(|a, b| {
        a.affine
            .coefficients()
            .iter()
            .zip(b.affine.coefficients().iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(pieces)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{build_abs_net, build_sawtooth_readout};
    use approx::assert_abs_diff_eq;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    #[test]
    fn sawtooth_folded_piece() {
        let net = build_sawtooth_readout(3, 0.0).unwrap();
        let m = unit_linear_map(&net, 1, 0, &v(&[1.5])).unwrap();
        assert_abs_diff_eq!(m.matrix[(0, 0)], -1.0);
        assert_abs_diff_eq!(m.offset[0], 2.0);
    }

    #[test]
    fn inactive_gives_zero_map() {
        let net = build_abs_net().network;
        let m = unit_linear_map(&net, 0, 0, &v(&[-1.0, 0.5])).unwrap();
        assert_eq!(m, AffineMap::zero(1, 2));
        assert!(unit_linear_map(&net, 2, 0, &v(&[0.0, 0.0])).is_err());
        assert!(unit_linear_map(&net, 1, 5, &v(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn abs_pair() {
        let net = build_abs_net().network;
        let r = find_identified_pair(&net, 1, 0, &v(&[0.7, 0.2]), &v(&[-0.9, 0.2]), 1e-10).unwrap();
        assert_abs_diff_eq!(r.adjusted[0], -0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(r.adjusted[1], 0.2, epsilon = 1e-12);
        assert!((r.activation - r.adjusted_activation).abs() <= 1e-10);
        assert!(!r.same_region);
        let same = find_identified_pair(&net, 1, 0, &v(&[0.7, 0.2]), &v(&[0.7, 0.2]), 1e-10).unwrap();
        assert!(same.same_region);
        assert_eq!(same.adjusted, vec![0.7, 0.2]);
    }

    #[test]
    fn folding_pair() {
        // h̃ = 2 - x on (1, 2)
        let net = build_sawtooth_readout(2, 0.0).unwrap();
        let r = find_identified_pair(&net, 1, 0, &v(&[0.3]), &v(&[1.9]), 1e-12).unwrap();
        assert_abs_diff_eq!(r.adjusted[0], 1.7, epsilon = 1e-12);
    }

    #[test]
    fn pattern_change_is_reported() {
        // relu(x) from 1.5 up to 2.5 crosses the third unit's breakpoint at 2
        let net = build_sawtooth_readout(3, 0.0).unwrap();
        let err = find_identified_pair(&net, 0, 0, &v(&[2.5]), &v(&[1.5]), 1e-10).unwrap_err();
        assert!(matches!(err, Error::NoIdentifiedPair(_)), "{err}");
    }

    #[test]
    fn pieces_of_sawtooth_and_abs() {
        let net = build_sawtooth_readout(3, 0.0).unwrap();
        let pts: Vec<_> = [0.5, 1.5, 2.5].iter().map(|&x| v(&[x])).collect();
        let pieces = enumerate_unit_pieces(&net, 1, 0, &pts).unwrap();
        let mut slopes: Vec<f64> = pieces.iter().map(|p| p.affine.matrix[(0, 0)]).collect();
        slopes.sort_by(f64::total_cmp);
        assert_eq!(slopes, vec![-1.0, 1.0, 1.0]);
        assert_eq!(pieces.len(), 3);

        let abs = build_abs_net().network;
        let grid: Vec<_> = (0..21)
            .flat_map(|i| (0..21).map(move |j| v(&[-1.0 + 0.1 * i as f64, -1.0 + 0.1 * j as f64])))
            .collect();
        let pieces = enumerate_unit_pieces(&abs, 1, 0, &grid).unwrap();
        assert_eq!(pieces.len(), 2);
        let zero = crate::net::Network::new(
            1,
            vec![crate::net::Layer::rectifier(
                nalgebra::DMatrix::zeros(1, 1),
                DVector::zeros(1),
            )
            .unwrap()],
        )
        .unwrap();
        assert!(enumerate_unit_pieces(&zero, 0, 0, &pts).unwrap().is_empty());
    }

    #[test]
    fn boundary_distance_on_abs() {
        let net = build_abs_net().network;
        assert_abs_diff_eq!(boundary_distance(&net, &v(&[0.3, -0.6])).unwrap(), 0.3, epsilon = 1e-12);
    }
}
