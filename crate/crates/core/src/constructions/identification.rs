use nalgebra::DVector;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::net::Network;
use crate::rng;

const MATCH_TOL: f64 = 1e-8;

/// Checks that the network identifies the given input boxes: every probe in
/// the first box has a counterpart in each other box with the same output
/// (within `1e-8`). Counterparts come from inverting the affine map the
/// network computes at each box center.
pub fn identification_check(
    net: &Network,
    boxes: &[Vec<(f64, f64)>],
    probe_count: usize,
    seed: u64,
) -> Result<bool> {
    let n0 = net.input_dim;
    if boxes.len() < 2 {
        return Err(Error::Structure("identification needs at least two boxes".into()));
    }
    if let Some(b) = boxes.iter().find(|b| b.len() != n0 || b.iter().any(|(lo, hi)| !(lo < hi))) {
        return Err(Error::Structure(format!("invalid box {b:?} for input dimension {n0}")));
    }
    let maps = boxes
        .iter()
        .map(|b| {
            let center = DVector::from_fn(n0, |i, _| (b[i].0 + b[i].1) / 2.0);
            net.pattern_at(&center).map(|p| net.pattern_affine(&p))
        })
        .collect::<Result<Vec<_>>>()?;
    let inside = |b: &[(f64, f64)], z: &DVector<f64>| {
        z.iter().zip(b).all(|(&v, &(lo, hi))| {
            let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
            v > lo - slack && v < hi + slack
        })
    };
    let mut rng = rng::stream(seed, 0x6964_656e);
    for _ in 0..probe_count {
        let x = DVector::from_fn(n0, |i, _| {
            let (lo, hi) = boxes[0][i];
            rng.random_range(lo..hi)
        });
        let target = net.output(&x)?;
        for (b, map) in boxes.iter().zip(&maps).skip(1) {
            let rhs = &target - &map.offset;
            let Ok(z) = map.matrix.clone().svd(true, true).solve(&rhs, 1e-12) else {
                return Ok(false);
            };
            if !inside(b, &z) {
                return Ok(false);
            }
            if (net.output(&z)? - &target).amax() > MATCH_TOL {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{build_abs_net, build_sawtooth_readout};

    #[test]
    fn abs_net_quadrants() {
        let net = build_abs_net().network;
        let quadrants = vec![
            vec![(0.0, 1.0), (0.0, 1.0)],
            vec![(-1.0, 0.0), (0.0, 1.0)],
            vec![(-1.0, 0.0), (-1.0, 0.0)],
            vec![(0.0, 1.0), (-1.0, 0.0)],
        ];
        assert!(identification_check(&net, &quadrants, 50, 1).unwrap());
        let same_region = vec![vec![(0.1, 0.3), (0.1, 0.3)], vec![(0.5, 0.7), (0.5, 0.7)]];
        assert!(!identification_check(&net, &same_region, 10, 1).unwrap());
    }

    #[test]
    fn sawtooth_intervals() {
        let net = build_sawtooth_readout(3, 0.0).unwrap();
        let intervals = vec![vec![(0.0, 1.0)], vec![(1.0, 2.0)], vec![(2.0, 3.0)]];
        assert!(identification_check(&net, &intervals, 50, 2).unwrap());
    }

    #[test]
    fn bad_boxes_rejected() {
        let net = build_abs_net().network;
        assert!(identification_check(&net, &[vec![(0.0, 1.0), (0.0, 1.0)]], 1, 0).is_err());
        assert!(identification_check(&net, &[vec![(0.0, 1.0)], vec![(0.0, 1.0)]], 1, 0).is_err());
    }
}
