//! Network data model, forward evaluation and activation patterns.
//!
//! Only the hidden stack is modeled. A rectifier layer of width `n` has `n`
//! pre-activation rows; a rank-`k` maxout layer has `k·n` rows, grouped
//! unit-major so that unit `j` owns rows `j·k .. (j+1)·k`.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::affine::AffineMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ActivationKind {
    Rectifier,
    Maxout { rank: usize },
}

impl ActivationKind {
    /// Number of pre-activation rows per unit.
    pub fn rows_per_unit(self) -> usize {
        match self {
            ActivationKind::Rectifier => 1,
            ActivationKind::Maxout { rank } => rank,
        }
    }

    /// Number of discrete states a unit can take in a pattern.
    pub fn states(self) -> usize {
        match self {
            ActivationKind::Rectifier => 2,
            ActivationKind::Maxout { rank } => rank,
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            ActivationKind::Maxout { rank } if rank < 2 => Err(Error::Structure(format!(
                "maxout rank must be at least 2, got {rank}"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActivationKind::Rectifier => write!(f, "rectifier"),
            ActivationKind::Maxout { rank } => write!(f, "maxout(k={rank})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub activation: ActivationKind,
    pub width: usize,
    /// `(k·width) × input_dim`
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Layer {
    pub fn new(activation: ActivationKind, weights: DMatrix<f64>, bias: DVector<f64>) -> Result<Self> {
        activation.validate()?;
        let k = activation.rows_per_unit();
        if weights.nrows() == 0 || weights.nrows() % k != 0 {
            return Err(Error::Structure(format!(
                "{} weight rows is not a positive multiple of {k}",
                weights.nrows()
            )));
        }
        if bias.len() != weights.nrows() {
            return Err(Error::Structure(format!(
                "bias length {} does not match {} weight rows",
                bias.len(),
                weights.nrows()
            )));
        }
        let width = weights.nrows() / k;
        Ok(Self {
            activation,
            width,
            weights,
            bias,
        })
    }

    pub fn rectifier(weights: DMatrix<f64>, bias: DVector<f64>) -> Result<Self> {
        Self::new(ActivationKind::Rectifier, weights, bias)
    }

    pub fn maxout(rank: usize, weights: DMatrix<f64>, bias: DVector<f64>) -> Result<Self> {
        Self::new(ActivationKind::Maxout { rank }, weights, bias)
    }

    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn pre_activation(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.weights * x + &self.bias
    }

    /// Discrete state of every unit for the given pre-activation vector.
    /// Ties resolve to "inactive" for rectifiers and to the lowest branch for maxout.
    pub fn select(&self, pre: &DVector<f64>) -> Vec<u32> {
        match self.activation {
            ActivationKind::Rectifier => pre.iter().map(|&z| u32::from(z > 0.0)).collect(),
            ActivationKind::Maxout { rank } => (0..self.width)
                .map(|j| {
                    let mut best = 0;
                    for t in 1..rank {
                        if pre[j * rank + t] > pre[j * rank + best] {
                            best = t;
                        }
                    }
                    best as u32
                })
                .collect(),
        }
    }

    pub fn activate(&self, pre: &DVector<f64>) -> DVector<f64> {
        match self.activation {
            ActivationKind::Rectifier => pre.map(|z| z.max(0.0)),
            ActivationKind::Maxout { rank } => DVector::from_iterator(
                self.width,
                (0..self.width).map(|j| {
                    pre.rows(j * rank, rank)
                        .iter()
                        .copied()
                        .fold(f64::NEG_INFINITY, f64::max)
                }),
            ),
        }
    }

    /// The affine layer map `x -> M x + d` obtained by fixing each unit's state.
    pub fn fixed_map(&self, states: &[u32]) -> (DMatrix<f64>, DVector<f64>) {
        let n_in = self.input_dim();
        let mut m = DMatrix::zeros(self.width, n_in);
        let mut d = DVector::zeros(self.width);
        for (j, &s) in states.iter().enumerate() {
            let row = match self.activation {
                ActivationKind::Rectifier if s == 0 => continue,
                ActivationKind::Rectifier => j,
                ActivationKind::Maxout { rank } => j * rank + s as usize,
            };
            m.row_mut(j).copy_from(&self.weights.row(row));
            d[j] = self.bias[row];
        }
        (m, d)
    }
}

/// Hidden stack `x -> g_L(W_L ... g_1(W_1 x + b_1) ... + b_L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub input_dim: usize,
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Structure("input dimension must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::Structure("network needs at least one hidden layer".into()));
        }
        let mut prev = input_dim;
        for (l, layer) in layers.iter().enumerate() {
            if layer.input_dim() != prev {
                return Err(Error::Structure(format!(
                    "layer {} expects input dimension {}, previous dimension is {prev}",
                    l + 1,
                    layer.input_dim()
                )));
            }
            prev = layer.width;
        }
        Ok(Self { input_dim, layers })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, |l| l.width)
    }

    pub fn total_units(&self) -> usize {
        self.layers.iter().map(|l| l.width).sum()
    }

    pub fn structure(&self) -> NetworkStructure {
        NetworkStructure {
            input_dim: self.input_dim,
            layers: self
                .layers
                .iter()
                .map(|l| LayerShape {
                    width: l.width,
                    activation: l.activation,
                })
                .collect(),
        }
    }

    fn check_input(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Activations `x_1, ..., x_L` of every hidden layer.
    pub fn forward(&self, x: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        self.check_input(x)?;
        let mut out = Vec::with_capacity(self.depth());
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.activate(&layer.pre_activation(&cur));
            out.push(cur.clone());
        }
        Ok(out)
    }

    /// Final hidden activation.
    pub fn output(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.forward(x)?.pop().expect("at least one layer"))
    }

    pub fn pattern_at(&self, x: &DVector<f64>) -> Result<ActivationPattern> {
        self.check_input(x)?;
        let mut states = Vec::with_capacity(self.depth());
        let mut cur = x.clone();
        for layer in &self.layers {
            let pre = layer.pre_activation(&cur);
            states.push(layer.select(&pre));
            cur = layer.activate(&pre);
        }
        Ok(ActivationPattern(states))
    }

    /// The affine map of the first `pattern.depth()` layers with every unit's state fixed.
    pub fn pattern_affine(&self, pattern: &ActivationPattern) -> AffineMap {
        let mut map = AffineMap::identity(self.input_dim);
        for (layer, states) in self.layers.iter().zip(&pattern.0) {
            let (m, d) = layer.fixed_map(states);
            map = map.then(&m, &d);
        }
        map
    }

    /// Returns a copy with every weight and bias entry transformed by `f`.
    pub fn map_parameters(&self, mut f: impl FnMut(f64) -> f64) -> Network {
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                activation: l.activation,
                width: l.width,
                weights: l.weights.map(&mut f),
                bias: l.bias.map(&mut f),
            })
            .collect();
        Network {
            input_dim: self.input_dim,
            layers,
        }
    }
}

/// Per-layer, per-unit discrete state. Rectifier: 1 = active. Maxout: argmax branch.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ActivationPattern(pub Vec<Vec<u32>>);

impl ActivationPattern {
    pub fn depth(&self) -> usize {
        self.0.len()
    }

    /// Compact code: one base-36 digit per unit, layers separated by `|`.
    pub fn code(&self) -> String {
        self.0
            .iter()
            .map(|layer| {
                layer
                    .iter()
                    .map(|&s| match char::from_digit(s, 36) {
                        Some(c) => c.to_string(),
                        None => format!("({s})"),
                    })
                    .collect::<String>()
            })
            .collect::<Vec<_>>()
            .join("|")
    }
}

impl PartialOrd for ActivationPattern {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ActivationPattern {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl fmt::Display for ActivationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub width: usize,
    pub activation: ActivationKind,
}

/// Widths and activation kinds without weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkStructure {
    pub input_dim: usize,
    pub layers: Vec<LayerShape>,
}

impl NetworkStructure {
    pub fn new(input_dim: usize, layers: Vec<LayerShape>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Structure("input dimension must be positive".into()));
        }
        if layers.is_empty() {
            return Err(Error::Structure("structure needs at least one hidden layer".into()));
        }
        for (l, s) in layers.iter().enumerate() {
            if s.width == 0 {
                return Err(Error::Structure(format!("layer {} has width 0", l + 1)));
            }
            s.activation.validate()?;
        }
        Ok(Self { input_dim, layers })
    }

    pub fn rectifier(input_dim: usize, widths: &[usize]) -> Result<Self> {
        Self::new(
            input_dim,
            widths
                .iter()
                .map(|&width| LayerShape {
                    width,
                    activation: ActivationKind::Rectifier,
                })
                .collect(),
        )
    }

    pub fn maxout(input_dim: usize, widths: &[usize], rank: usize) -> Result<Self> {
        Self::new(
            input_dim,
            widths
                .iter()
                .map(|&width| LayerShape {
                    width,
                    activation: ActivationKind::Maxout { rank },
                })
                .collect(),
        )
    }

    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.width).collect()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn total_units(&self) -> usize {
        self.layers.iter().map(|l| l.width).sum()
    }

    pub fn is_rectifier(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.activation == ActivationKind::Rectifier)
    }

    /// Number of weight and bias entries: `Σ k_l · n_l · (n_{l-1} + 1)`.
    pub fn parameter_count(&self) -> u64 {
        let mut prev = self.input_dim as u64;
        let mut total = 0u64;
        for l in &self.layers {
            let k = l.activation.rows_per_unit() as u64;
            total += k * l.width as u64 * (prev + 1);
            prev = l.width as u64;
        }
        total
    }
}

pub fn parameter_count(s: &NetworkStructure) -> u64 {
    s.parameter_count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    #[test]
    fn zero_network_outputs_zero() {
        let layer1 = Layer::rectifier(DMatrix::zeros(3, 2), DVector::zeros(3)).unwrap();
        let layer2 = Layer::maxout(2, DMatrix::zeros(4, 3), DVector::zeros(4)).unwrap();
        let net = Network::new(2, vec![layer1, layer2]).unwrap();
        for x in [dv(&[1.0, -4.0]), dv(&[100.0, 3.0])] {
            for a in net.forward(&x).unwrap() {
                assert!(a.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn negative_orthant_is_all_inactive() {
        let w = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, 0.0, 2.0, 3.0, 1.0]);
        let net = Network::new(2, vec![Layer::rectifier(w, DVector::zeros(3)).unwrap()]).unwrap();
        let p = net.pattern_at(&dv(&[-50.0, -70.0])).unwrap();
        assert_eq!(p.0, vec![vec![0, 0, 0]]);
    }

    #[test]
    fn maxout_tie_picks_lowest_branch() {
        let w = DMatrix::from_row_slice(3, 1, &[1.0, 1.0, -1.0]);
        let layer = Layer::maxout(3, w, DVector::zeros(3)).unwrap();
        assert_eq!(layer.select(&dv(&[2.0, 2.0, -2.0])), vec![0]);
        assert_eq!(layer.select(&dv(&[0.0, 0.0, 0.0])), vec![0]);
        assert_eq!(layer.select(&dv(&[-1.0, 0.0, 1.0])), vec![2]);
    }

    #[test]
    fn rectifier_zero_preactivation_is_inactive() {
        let layer = Layer::rectifier(DMatrix::from_row_slice(1, 1, &[1.0]), dv(&[0.0])).unwrap();
        assert_eq!(layer.select(&dv(&[0.0])), vec![0]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let net = Network::new(
            2,
            vec![Layer::rectifier(DMatrix::zeros(1, 2), DVector::zeros(1)).unwrap()],
        )
        .unwrap();
        assert!(matches!(
            net.forward(&dv(&[1.0])),
            Err(Error::Dimension { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn chaining_is_validated() {
        let l1 = Layer::rectifier(DMatrix::zeros(3, 2), DVector::zeros(3)).unwrap();
        let l2 = Layer::rectifier(DMatrix::zeros(1, 2), DVector::zeros(1)).unwrap();
        assert!(Network::new(2, vec![l1, l2]).is_err());
        assert!(Network::new(2, vec![]).is_err());
        assert!(Layer::maxout(1, DMatrix::zeros(1, 1), DVector::zeros(1)).is_err());
        assert!(Layer::maxout(3, DMatrix::zeros(4, 1), DVector::zeros(4)).is_err());
    }

    #[test]
    fn parameter_counts() {
        let s = NetworkStructure::rectifier(2, &[4, 4]).unwrap();
        assert_eq!(parameter_count(&s), 4 * 3 + 4 * 5);
        assert_eq!(parameter_count(&NetworkStructure::rectifier(1, &[1]).unwrap()), 2);
        assert_eq!(parameter_count(&NetworkStructure::maxout(2, &[2], 3).unwrap()), 18);
        assert!(NetworkStructure::rectifier(1, &[0]).is_err());
        assert!(NetworkStructure::rectifier(1, &[]).is_err());
    }

    #[test]
    fn parameter_count_linear_in_depth() {
        let (n0, n) = (3u64, 5usize);
        for depth in 1..8 {
            let s = NetworkStructure::rectifier(n0 as usize, &vec![n; depth]).unwrap();
            let n = n as u64;
            let expected = n * (n0 + 1) + (depth as u64 - 1) * n * (n + 1);
            assert_eq!(s.parameter_count(), expected);
        }
    }

    #[test]
    fn pattern_code_is_compact() {
        let p = ActivationPattern(vec![vec![1, 0, 1], vec![2, 11]]);
        assert_eq!(p.code(), "101|2b");
    }
}
