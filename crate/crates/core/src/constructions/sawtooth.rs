use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::{Witness, WitnessKind, WitnessParams, WitnessSpec};
use crate::bounds::{self, fold_group_sizes};
use crate::error::{Error, Result};
use crate::lp::{cube_halfspaces, Halfspace};
use crate::net::{Layer, Network};
use crate::regions::{check_general_position, enumerate_regions_in, FeasibilityConfig};
use crate::rng;

/// `p` rectifiers whose alternating sum folds each of `(0,1), …, (p-1,p)` of
/// one input coordinate onto `(0,1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SawtoothGroup {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    /// `(1, -1, 1, …)`, to be absorbed into the next layer.
    pub mixing: DVector<f64>,
}

fn slope(t: usize) -> f64 {
    if t == 0 {
        1.0
    } else {
        2.0
    }
}

/// Group acting on the scalar `row·x` (`row` spans the layer input).
fn group_on(p: usize, row: &DVector<f64>) -> SawtoothGroup {
    let mut weights = DMatrix::zeros(p, row.len());
    for t in 0..p {
        weights.set_row(t, &(row * slope(t)).transpose());
    }
    SawtoothGroup {
        weights,
        bias: DVector::from_fn(p, |t, _| -2.0 * t as f64),
        mixing: DVector::from_fn(p, |t, _| if t % 2 == 0 { 1.0 } else { -1.0 }),
    }
}

/// Sawtooth group with `p` units on input coordinate `coord` (0-based) of `R^n0`.
pub fn build_sawtooth_group(p: usize, coord: usize, n0: usize) -> Result<SawtoothGroup> {
    if p == 0 || coord >= n0 {
        return Err(Error::Structure(format!(
            "sawtooth group needs p >= 1 and coordinate < n0 (got p = {p}, coordinate {coord}, n0 = {n0})"
        )));
    }
    let mut row = DVector::zeros(n0);
    row[coord] = 1.0;
    Ok(group_on(p, &row))
}

/// Closed form of the folded value `x + 2 Σ_{i<p} (-1)^i relu(x - i)`, written
/// as the alternating sum of the group's responses.
pub fn sawtooth_value(p: usize, x: f64) -> f64 {
    (0..p)
        .map(|t| {
            let r = (slope(t) * x - 2.0 * t as f64).max(0.0);
            if t % 2 == 0 {
                r
            } else {
                -r
            }
        })
        .sum()
}

/// One-layer network on `R^1` made of a single sawtooth group.
pub fn build_sawtooth_net(p: usize) -> Result<Network> {
    let g = build_sawtooth_group(p, 0, 1)?;
    Network::new(1, vec![Layer::rectifier(g.weights, g.bias)?])
}

/// Sawtooth group followed by one rectifier computing `relu(h̃(x) + bias)`.
/// With `bias = 0` the second unit reports the folded value itself on `(0, p)`.
pub fn build_sawtooth_readout(p: usize, bias: f64) -> Result<Network> {
    let g = build_sawtooth_group(p, 0, 1)?;
    let readout = DMatrix::from_row_slice(1, p, g.mixing.as_slice());
    Network::new(
        1,
        vec![
            Layer::rectifier(g.weights, g.bias)?,
            Layer::rectifier(readout, DVector::from_element(1, bias))?,
        ],
    )
}

/// `(|x1|, |x2|)` from four rectifiers `±x1, ±x2` with the sums absorbed into
/// a second layer.
pub fn build_abs_net() -> Witness {
    #[rustfmt::skip]
    let first = DMatrix::from_row_slice(4, 2, &[
        1.0, 0.0,
        -1.0, 0.0,
        0.0, 1.0,
        0.0, -1.0,
    ]);
    #[rustfmt::skip]
    let second = DMatrix::from_row_slice(2, 4, &[
        1.0, 1.0, 0.0, 0.0,
        0.0, 0.0, 1.0, 1.0,
    ]);
    let network = Network::new(
        2,
        vec![
            Layer::rectifier(first, DVector::zeros(4)).expect("valid"),
            Layer::rectifier(second, DVector::zeros(2)).expect("valid"),
        ],
    )
    .expect("valid");
    Witness {
        network,
        spec: WitnessSpec {
            kind: WitnessKind::AbsNet,
            params: WitnessParams {
                n0: 2,
                depth: Some(2),
                widths: vec![4, 2],
                fold_counts: vec![vec![2, 2]],
                ..Default::default()
            },
            predicted_count: 4u32.into(),
            exact: true,
            provenance: "absolute value folds each axis once: 2 x 2 quadrants".into(),
        },
    }
}

const MAX_ARRANGEMENT_DRAWS: usize = 200;

/// Hyperplanes `a·y = o` in general position whose full arrangement lies in
/// `(0,1)^n0`.
fn cube_arrangement(n0: usize, count: usize, seed: u64) -> Result<Vec<Halfspace>> {
    let mut rng = rng::stream(seed, 0x666f_6c64);
    let want = bounds::shallow_max_regions(n0 as u64, count as u64);
    let cube = cube_halfspaces(&vec![0.0; n0], &vec![1.0; n0]);
    let cfg = FeasibilityConfig::default();
    for _ in 0..MAX_ARRANGEMENT_DRAWS {
        let planes: Vec<Halfspace> = (0..count)
            .map(|_| {
                let a = DVector::from_fn(n0, |_, _| StandardNormal.sample(&mut rng));
                let q = DVector::from_fn(n0, |_, _| rng.random_range(0.3..0.7));
                let o = a.dot(&q);
                Halfspace::new(a, o)
            })
            .collect();
        if !check_general_position(&planes, n0) {
            continue;
        }
        let w = DMatrix::from_fn(count, n0, |r, c| planes[r].normal[c]);
        let b = DVector::from_fn(count, |r, _| -planes[r].offset);
        let shallow = Network::new(n0, vec![Layer::rectifier(w, b)?])?;
        let got = enumerate_regions_in(&shallow, cube.clone(), &cfg)?.len();
        if want == got.into() {
            return Ok(planes);
        }
    }
    Err(Error::Hypothesis(format!(
        "no general-position arrangement of {count} hyperplanes filling the unit cube after {MAX_ARRANGEMENT_DRAWS} draws"
    )))
}

/// Folding rectifier network: every layer but the last folds each input
/// coordinate with a sawtooth group, and the last layer places an arrangement
/// in general position inside the unit cube that all folds map onto.
/// `refined` distributes the remainder units over the last groups; otherwise
/// they get zero weights.
pub fn build_folding_rectifier_net(
    n0: usize,
    widths: &[usize],
    refined: bool,
    seed: u64,
) -> Result<Witness> {
    let structure = crate::net::NetworkStructure::rectifier(n0, widths)?;
    let predicted = if refined {
        bounds::deep_rectifier_lower_refined(&structure)?
    } else {
        bounds::deep_rectifier_lower(&structure)?
    };
    let (last_width, folding) = widths.split_last().expect("validated non-empty");

    let mut layers = Vec::with_capacity(widths.len());
    let mut fold_counts = Vec::new();
    // Row over the current layer input giving folded coordinate i.
    let mut coords: Vec<DVector<f64>> = (0..n0)
        .map(|i| DVector::from_fn(n0, |r, _| if r == i { 1.0 } else { 0.0 }))
        .collect();
    for (l, &width) in folding.iter().enumerate() {
        let sizes = fold_group_sizes(width, n0, refined);
        let in_dim = coords[0].len();
        let mut w = DMatrix::zeros(width, in_dim);
        let mut b = DVector::zeros(width);
        let mut next = Vec::with_capacity(n0);
        let mut start = 0;
        for (i, &p) in sizes.iter().enumerate() {
            // Later layers see the folded value in (0,1); stretch it to (0,p).
            let scale = if l == 0 { 1.0 } else { p as f64 };
            let g = group_on(p, &(&coords[i] * scale));
            w.rows_mut(start, p).copy_from(&g.weights);
            b.rows_mut(start, p).copy_from(&g.bias);
            let mut mix = DVector::zeros(width);
            mix.rows_mut(start, p).copy_from(&g.mixing);
            next.push(mix);
            start += p;
        }
        layers.push(Layer::rectifier(w, b)?);
        fold_counts.push(sizes.iter().map(|&p| p as u64).collect());
        coords = next;
    }

    let planes = cube_arrangement(n0, *last_width, seed)?;
    let in_dim = coords[0].len();
    let mut w = DMatrix::zeros(*last_width, in_dim);
    let mut b = DVector::zeros(*last_width);
    for (k, h) in planes.iter().enumerate() {
        let row = coords
            .iter()
            .zip(h.normal.iter())
            .fold(DVector::zeros(in_dim), |acc, (c, &a)| acc + c * a);
        w.set_row(k, &row.transpose());
        b[k] = -h.offset;
    }
    layers.push(Layer::rectifier(w, b)?);

    let provenance = if refined {
        "prod_l floor(n_l/n0)^(n0-m_l) (floor(n_l/n0)+1)^m_l * sum_{j<=n0} C(n_L, j), m_l = n_l mod n0"
    } else {
        "prod_l floor(n_l/n0)^n0 * sum_{j<=n0} C(n_L, j)"
    };
    Ok(Witness {
        network: Network::new(n0, layers)?,
        spec: WitnessSpec {
            kind: WitnessKind::FoldingRectifierNet,
            params: WitnessParams {
                n0,
                depth: Some(widths.len()),
                widths: widths.to_vec(),
                fold_counts,
                seed: Some(seed),
                ..Default::default()
            },
            predicted_count: predicted,
            exact: false,
            provenance: provenance.into(),
        },
    })
}
