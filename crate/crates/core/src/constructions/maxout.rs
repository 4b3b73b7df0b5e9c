use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use num_bigint::BigUint;
use rand::Rng as _;

use super::{Witness, WitnessKind, WitnessParams, WitnessSpec};
use crate::affine::AffineMap;
use crate::bounds::{binomial, deep_maxout_lower};
use crate::error::{Error, Result};
use crate::lp::{self, Halfspace};
use crate::net::{ActivationKind, Layer, Network};
use crate::regions::{count_regions, FeasibilityConfig};
use crate::rng;

/// Default rotation angle (radians) between consecutive units of a cone layer.
pub const DEFAULT_ROTATION: f64 = 1e-2;

/// Rank-`k` unit whose upper envelope, as a function of `z = direction·x + shift`,
/// switches from branch `t-1` to branch `t` at `z = breakpoints[t-1]`.
/// Slopes are `t - (k-1)/2`, so the branches are symmetric around zero; for
/// `k = 2` the two branches are exact negatives of each other.
pub fn envelope_unit(
    direction: &DVector<f64>,
    shift: f64,
    breakpoints: &[f64],
) -> (DMatrix<f64>, DVector<f64>) {
    let k = breakpoints.len() + 1;
    let mut sorted = breakpoints.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut offsets = Vec::with_capacity(k);
    offsets.push(sorted.iter().sum::<f64>() / 2.0);
    for b in &sorted {
        offsets.push(offsets.last().unwrap() - b);
    }
    let mut w = DMatrix::zeros(k, direction.len());
    let mut bias = DVector::zeros(k);
    for t in 0..k {
        let s = t as f64 - (k - 1) as f64 / 2.0;
        w.set_row(t, &(direction * s).transpose());
        bias[t] = s * shift + offsets[t];
    }
    (w, bias)
}

fn stack_units(rank: usize, units: Vec<(DMatrix<f64>, DVector<f64>)>) -> Result<Layer> {
    let in_dim = units[0].0.ncols();
    let rows = units.len() * rank;
    let mut w = DMatrix::zeros(rows, in_dim);
    let mut b = DVector::zeros(rows);
    for (j, (uw, ub)) in units.into_iter().enumerate() {
        w.rows_mut(j * rank, rank).copy_from(&uw);
        b.rows_mut(j * rank, rank).copy_from(&ub);
    }
    Layer::maxout(rank, w, b)
}

fn basis(n: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 })
}

/// One maxout layer of `m` rank-`k` units on `R^n`; unit `j` cuts coordinate
/// `j mod n` at `1, …, k-1`.
pub fn build_maxout_parallel(n: usize, m: usize, k: usize) -> Result<Witness> {
    if n == 0 || m == 0 || k < 2 {
        return Err(Error::Structure(format!(
            "parallel maxout layer needs n, m >= 1 and k >= 2 (got n = {n}, m = {m}, k = {k})"
        )));
    }
    let cuts: Vec<f64> = (1..k).map(|s| s as f64).collect();
    let units = (0..m)
        .map(|j| envelope_unit(&basis(n, j % n), 0.0, &cuts))
        .collect();
    let network = Network::new(n, vec![stack_units(k, units)?])?;
    Ok(Witness {
        network,
        spec: WitnessSpec {
            kind: WitnessKind::MaxoutParallel,
            params: WitnessParams {
                n0: n,
                depth: Some(1),
                widths: vec![m],
                rank: Some(k),
                ..Default::default()
            },
            predicted_count: BigUint::from(k).pow(n.min(m) as u32),
            exact: true,
            provenance: "k^min(n,m): k-1 parallel cuts on each of min(n,m) coordinates".into(),
        },
    })
}

fn pair_layer(n: usize, cuts: &[f64]) -> Result<Network> {
    if n < 2 {
        return Err(Error::Structure(format!("arrangement layer needs n >= 2, got {n}")));
    }
    let units = (0..n)
        .tuple_combinations()
        .map(|(i, j)| envelope_unit(&(basis(n, i) - basis(n, j)), 0.0, cuts))
        .collect();
    Network::new(n, vec![stack_units(cuts.len() + 1, units)?])
}

/// Rank-3 unit per pair `i < j` cutting at `x_i - x_j ∈ {0, 1}`.
pub fn build_shi_layer(n: usize) -> Result<Witness> {
    let network = pair_layer(n, &[0.0, 1.0])?;
    Ok(Witness {
        network,
        spec: WitnessSpec {
            kind: WitnessKind::ShiLayer,
            params: WitnessParams {
                n0: n,
                depth: Some(1),
                widths: vec![n * (n - 1) / 2],
                rank: Some(3),
                ..Default::default()
            },
            predicted_count: BigUint::from(n + 1).pow(n as u32 - 1),
            exact: true,
            provenance: "(n+1)^(n-1) regions of the arrangement x_i - x_j in {0, 1}".into(),
        },
    })
}

/// Rank-4 unit per pair `i < j` cutting at `x_i - x_j ∈ {-1, 0, 1}`.
pub fn build_catalan_layer(n: usize) -> Result<Witness> {
    let network = pair_layer(n, &[-1.0, 0.0, 1.0])?;
    let factorial: BigUint = (1..=n as u64).map(BigUint::from).product();
    let catalan = binomial(2 * n as u64, n as u64) / BigUint::from(n as u64 + 1);
    Ok(Witness {
        network,
        spec: WitnessSpec {
            kind: WitnessKind::CatalanLayer,
            params: WitnessParams {
                n0: n,
                depth: Some(1),
                widths: vec![n * (n - 1) / 2],
                rank: Some(4),
                ..Default::default()
            },
            predicted_count: factorial * catalan,
            exact: true,
            provenance: "n! * C_n regions of the arrangement x_i - x_j in {-1, 0, 1}".into(),
        },
    })
}

/// Product of planar rotations by `angle` in the planes `(e_0,e_1)`, `(e_1,e_2)`, ….
fn rotation(n: usize, angle: f64) -> DMatrix<f64> {
    let mut q = DMatrix::identity(n, n);
    for p in 0..n.saturating_sub(1) {
        let mut g = DMatrix::identity(n, n);
        let (s, c) = angle.sin_cos();
        g[(p, p)] = c;
        g[(p, p + 1)] = -s;
        g[(p + 1, p)] = s;
        g[(p + 1, p + 1)] = c;
        q = g * q;
    }
    q
}

/// Branch gradients of every unit of a cone layer. Rank 2 uses `±e_j` for
/// unit `j`; higher ranks use the seeds `e_0, -e_0, e_1, -e_1, …` (zero past
/// `2·n0`) rotated by `Q^j`.
fn cone_gradients(n0: usize, k: usize, angle: f64) -> Vec<Vec<DVector<f64>>> {
    if k == 2 {
        return (0..n0)
            .map(|j| vec![basis(n0, j), -basis(n0, j)])
            .collect();
    }
    let seeds: Vec<DVector<f64>> = (0..k)
        .map(|t| {
            if t < 2 * n0 {
                let e = basis(n0, t / 2);
                if t % 2 == 0 {
                    e
                } else {
                    -e
                }
            } else {
                DVector::zeros(n0)
            }
        })
        .collect();
    let q = rotation(n0, angle);
    let mut qj = DMatrix::identity(n0, n0);
    let mut out = Vec::with_capacity(n0);
    for _ in 0..n0 {
        out.push(seeds.iter().map(|g| &qj * g).collect());
        qj = &q * qj;
    }
    out
}

/// Branch choices whose images are intersected: every sign pattern for rank
/// 2, otherwise the patterns where all units agree.
fn identified_choices(n0: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 2 {
        (0..n0).map(|_| 0..2).multi_cartesian_product().collect()
    } else {
        (0..k).map(|t| vec![t; n0]).collect()
    }
}

/// Cone layer `y ↦ (max_t g_{j,t}·(y - center)/radius)_j` and the region `T`
/// that all identified pieces of `domain` are mapped onto.
fn cone_layer(
    grads: &[Vec<DVector<f64>>],
    center: &DVector<f64>,
    radius: f64,
    domain: &[Halfspace],
) -> Result<(Layer, Vec<Halfspace>)> {
    let n0 = center.len();
    let k = grads[0].len();
    let units = grads
        .iter()
        .map(|gs| {
            let w = DMatrix::from_fn(k, n0, |t, c| gs[t][c] / radius);
            let b = DVector::from_fn(k, |t, _| -gs[t].dot(center) / radius);
            (w, b)
        })
        .collect();
    let layer = stack_units(k, units)?;

    let mut image = Vec::new();
    for choice in identified_choices(n0, k) {
        let r = DMatrix::from_fn(n0, n0, |j, c| grads[j][choice[j]][c]);
        let Some(r_inv) = r.clone().try_inverse() else {
            continue;
        };
        let mut piece: Vec<Halfspace> = domain.to_vec();
        for (j, gs) in grads.iter().enumerate() {
            for (_, g) in gs.iter().enumerate().filter(|&(s, _)| s != choice[j]) {
                let normal = g - &gs[choice[j]];
                let offset = normal.dot(center);
                piece.push(Halfspace::new(normal, offset));
            }
        }
        // x = center + radius · R⁻¹ y
        let back = r_inv.transpose() * radius;
        for h in piece {
            if h.normal.norm() <= lp::DEGENERATE_NORM {
                continue;
            }
            let normal = &back * &h.normal;
            image.push(Halfspace::new(normal, h.offset - h.normal.dot(center)));
        }
    }
    Ok((layer, image))
}

/// Deep maxout network of width `n0` with [`DEFAULT_ROTATION`]; the angle is
/// doubled (up to four times) until the enumerated count reaches the bound.
pub fn build_maxout_cones(n0: usize, depth: usize, k: usize) -> Result<Witness> {
    let mut angle = DEFAULT_ROTATION;
    let mut last = None;
    for _ in 0..5 {
        match build_maxout_cones_with(n0, depth, k, angle) {
            Ok(w) => return Ok(w),
            Err(e @ Error::Verification { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
        if k == 2 {
            break;
        }
        angle *= 2.0;
    }
    Err(last.expect("at least one attempt"))
}

/// Single attempt at a fixed rotation angle. Every layer but the last maps
/// its identified cones onto a common region `T`; the next layer is centered
/// at the largest ball inside `T`, and the last layer cuts a cube inscribed in
/// that ball into `k^n0` cells.
pub fn build_maxout_cones_with(n0: usize, depth: usize, k: usize, angle: f64) -> Result<Witness> {
    let predicted = deep_maxout_lower(n0 as u64, depth as u64, k as u64)?;
    let grads = cone_gradients(n0, k, angle);
    let mut domain = lp::cube_halfspaces(&vec![-1.0; n0], &vec![1.0; n0]);
    let mut center = DVector::zeros(n0);
    let mut radius = 1.0;
    let mut layers = Vec::with_capacity(depth);
    for _ in 1..depth {
        let (layer, image) = cone_layer(&grads, &center, radius, &domain)?;
        layers.push(layer);
        let ball = lp::chebyshev_center(n0, &image).map_err(|message| Error::Lp {
            pattern: "cone image".into(),
            message,
        })?;
        if !(ball.slack > 0.0) {
            return Err(Error::Verification {
                delta: angle,
                counted: 0,
                expected: predicted.to_string(),
            });
        }
        domain = image;
        center = ball.center;
        radius = ball.slack;
    }
    let half = radius / (n0 as f64).sqrt();
    let cuts: Vec<f64> = (1..k).map(|s| -1.0 + 2.0 * s as f64 / k as f64).collect();
    let units = (0..n0)
        .map(|j| envelope_unit(&(basis(n0, j) / half), -center[j] / half, &cuts))
        .collect();
    layers.push(stack_units(k, units)?);
    let network = Network::new(n0, layers)?;

    let counted = count_regions(&network, &FeasibilityConfig::default())?;
    if BigUint::from(counted) < predicted {
        return Err(Error::Verification {
            delta: angle,
            counted,
            expected: predicted.to_string(),
        });
    }
    Ok(Witness {
        network,
        spec: WitnessSpec {
            kind: WitnessKind::MaxoutCones,
            params: WitnessParams {
                n0,
                depth: Some(depth),
                widths: vec![n0; depth],
                rank: Some(k),
                rotation: (k > 2).then_some(angle),
                ..Default::default()
            },
            predicted_count: predicted,
            exact: false,
            provenance: "k^(L-1) * k^n0: each earlier layer identifies k cones".into(),
        },
    })
}

/// Rank-2 maxout network rewritten with rectifiers, via
/// `max(a, b) = (a+b)/2 + relu((a-b)/2) + relu((b-a)/2)`.
#[derive(Debug, Clone)]
pub struct Rank2Simulation {
    pub maxout: Witness,
    pub rectifier: Network,
    /// Maps the rectifier net's last activations to the maxout net's.
    pub readout: AffineMap,
    /// Largest deviation over the seeded certificate points.
    pub max_difference: f64,
    pub certificate_points: usize,
}

const CERTIFICATE_POINTS: usize = 1000;

fn maxout_to_rectifier(net: &Network) -> Result<(Network, AffineMap)> {
    let mut layers = Vec::with_capacity(net.depth());
    // Linear map from the previous rectifier layer's outputs to the
    // corresponding maxout layer outputs.
    let mut combine = DMatrix::<f64>::identity(net.input_dim, net.input_dim);
    for layer in &net.layers {
        if layer.activation != (ActivationKind::Maxout { rank: 2 }) {
            return Err(Error::Structure("simulation needs rank-2 maxout layers".into()));
        }
        let w = &layer.weights * &combine;
        let in_dim = w.ncols();
        let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
        let mut next_combine: Vec<Vec<(usize, f64)>> = Vec::new();
        for j in 0..layer.width {
            let (a, b) = (w.row(2 * j).transpose(), w.row(2 * j + 1).transpose());
            let (ab, bb) = (layer.bias[2 * j], layer.bias[2 * j + 1]);
            let d = (&a - &b) / 2.0;
            let dc = (ab - bb) / 2.0;
            let m = (&a + &b) / 2.0;
            let mc = (ab + bb) / 2.0;
            let mut terms = vec![(rows.len(), 1.0), (rows.len() + 1, 1.0)];
            rows.push((d.clone(), dc));
            rows.push((-d, -dc));
            if m.amax() != 0.0 || mc != 0.0 {
                terms.push((rows.len(), 1.0));
                terms.push((rows.len() + 1, -1.0));
                rows.push((m.clone(), mc));
                rows.push((-m, -mc));
            }
            next_combine.push(terms);
        }
        let wr = DMatrix::from_fn(rows.len(), in_dim, |r, c| rows[r].0[c]);
        let br = DVector::from_fn(rows.len(), |r, _| rows[r].1);
        layers.push(Layer::rectifier(wr, br)?);
        combine = DMatrix::zeros(layer.width, rows.len());
        for (j, terms) in next_combine.iter().enumerate() {
            for &(r, s) in terms {
                combine[(j, r)] = s;
            }
        }
    }
    let readout = AffineMap::new(combine.clone(), DVector::zeros(combine.nrows()));
    Ok((Network::new(net.input_dim, layers)?, readout))
}

/// Rank-2 cone network of width `n0` and depth `depth` together with an
/// equivalent rectifier network of twice the width.
pub fn build_rank2_maxout_as_rectifier(n0: usize, depth: usize) -> Result<Rank2Simulation> {
    let mut maxout = build_maxout_cones(n0, depth, 2)?;
    let (rectifier, readout) = maxout_to_rectifier(&maxout.network)?;
    let mut rng = rng::stream(0, 0x7261_6e6b);
    let mut max_difference: f64 = 0.0;
    for _ in 0..CERTIFICATE_POINTS {
        let x = DVector::from_fn(n0, |_, _| rng.random_range(-2.0..2.0));
        let want = maxout.network.output(&x)?;
        let got = readout.apply(&rectifier.output(&x)?);
        max_difference = max_difference.max((want - got).amax());
    }
    maxout.spec.kind = WitnessKind::Rank2MaxoutAsRectifier;
    maxout.spec.predicted_count = BigUint::from(2u32).pow((n0 * depth) as u32);
    maxout.spec.exact = true;
    maxout.spec.provenance =
        "2^(n0 (L-1)) identified regions times 2^n0: 2^(n0 L)".into();
    Ok(Rank2Simulation {
        maxout,
        rectifier,
        readout,
        max_difference,
        certificate_points: CERTIFICATE_POINTS,
    })
}
