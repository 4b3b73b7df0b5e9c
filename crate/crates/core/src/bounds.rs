//! Closed-form region-count bounds, in exact integer and rational arithmetic.

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::net::{ActivationKind, NetworkStructure};

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Maximal number of regions of `n1` hyperplanes in `R^n0`: `Σ_{j<=n0} C(n1, j)`.
pub fn shallow_max_regions(n0: u64, n1: u64) -> BigUint {
    (0..=n0).map(|j| binomial(n1, j)).sum()
}

fn require_rectifier(s: &NetworkStructure) -> Result<()> {
    if !s.is_rectifier() {
        return Err(Error::Hypothesis("bound applies to rectifier structures only".into()));
    }
    Ok(())
}

/// `2^N` with `N` the total number of hidden units.
pub fn rectifier_upper_bound(s: &NetworkStructure) -> Result<BigUint> {
    require_rectifier(s)?;
    Ok(BigUint::one() << s.total_units())
}

fn require_wide(s: &NetworkStructure) -> Result<()> {
    require_rectifier(s)?;
    let n0 = s.input_dim;
    if let Some((l, w)) = s.widths().iter().enumerate().find(|(_, &w)| w < n0) {
        return Err(Error::Hypothesis(format!(
            "deep rectifier bound requires n_l >= n0 for every layer; layer {} has width {w} < n0 = {n0}",
            l + 1
        )));
    }
    Ok(())
}

/// `(Π_{l<L} ⌊n_l/n0⌋^{n0}) · Σ_{j<=n0} C(n_L, j)`.
pub fn deep_rectifier_lower(s: &NetworkStructure) -> Result<BigUint> {
    require_wide(s)?;
    let n0 = s.input_dim as u64;
    let widths = s.widths();
    let (last, hidden) = widths.split_last().expect("non-empty");
    let mut acc = shallow_max_regions(n0, *last as u64);
    for &w in hidden {
        acc *= BigUint::from(w as u64 / n0).pow(n0 as u32);
    }
    Ok(acc)
}

/// Remainder-aware version: with `q = ⌊n_l/n0⌋`, `m = n_l mod n0`, each layer
/// contributes `q^{n0-m} (q+1)^m`.
pub fn deep_rectifier_lower_refined(s: &NetworkStructure) -> Result<BigUint> {
    require_wide(s)?;
    let n0 = s.input_dim as u64;
    let widths = s.widths();
    let (last, hidden) = widths.split_last().expect("non-empty");
    let mut acc = shallow_max_regions(n0, *last as u64);
    for &w in hidden {
        let (q, m) = (w as u64).div_rem(&n0);
        acc *= BigUint::from(q).pow((n0 - m) as u32) * BigUint::from(q + 1).pow(m as u32);
    }
    Ok(acc)
}

/// Group sizes `p_{l,i}` of the folding construction for one layer: the last
/// `m` groups receive one extra unit when `refined`, otherwise the remainder
/// is dropped.
pub fn fold_group_sizes(width: usize, n0: usize, refined: bool) -> Vec<usize> {
    let (q, m) = width.div_rem(&n0);
    (0..n0)
        .map(|i| if refined && i >= n0 - m { q + 1 } else { q })
        .collect()
}

/// Lower and upper bound for one rank-`k` maxout layer with `n` inputs and `m`
/// units: `k^{min(n,m)}` and `min(Σ_{j<=n} C(k²m, j), k^m)`.
pub fn maxout_layer_bounds(n: u64, m: u64, k: u64) -> Result<(BigUint, BigUint)> {
    if n == 0 || m == 0 || k < 2 {
        return Err(Error::Hypothesis(format!(
            "maxout layer bounds need n, m >= 1 and k >= 2 (got n = {n}, m = {m}, k = {k})"
        )));
    }
    let lower = BigUint::from(k).pow(n.min(m) as u32);
    let arrangement = shallow_max_regions(n, k * k * m);
    let product = BigUint::from(k).pow(m as u32);
    Ok((lower, arrangement.min(product)))
}

/// `k^{L-1} · k^{n0}` for `L` maxout layers of width `n0`.
pub fn deep_maxout_lower(n0: u64, depth: u64, k: u64) -> Result<BigUint> {
    if depth == 0 || k < 2 || n0 == 0 {
        return Err(Error::Hypothesis(format!(
            "deep maxout bound needs L >= 1, k >= 2, n0 >= 1 (got L = {depth}, k = {k}, n0 = {n0})"
        )));
    }
    Ok(BigUint::from(k).pow((depth - 1 + n0) as u32))
}

/// `Π_l Π_i p_{l,i}`: the number of input neighborhoods mapped onto the same
/// cube by the folding layers.
pub fn identified_region_count(fold_counts: &[Vec<u64>]) -> Result<BigUint> {
    let mut acc = BigUint::one();
    for layer in fold_counts {
        for &p in layer {
            if p == 0 {
                return Err(Error::Hypothesis("fold counts must be at least 1".into()));
            }
            acc *= p;
        }
    }
    Ok(acc)
}

fn ratio(num: &BigUint, den: u64) -> BigRational {
    BigRational::new(num.clone().into(), BigUint::from(den).into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionsPerParameter {
    pub deep_regions: BigUint,
    pub deep_params: u64,
    pub shallow_regions: BigUint,
    pub shallow_params: u64,
    pub deep: BigRational,
    pub shallow: BigRational,
    /// Set when the widths are not all equal.
    pub note: Option<String>,
}

/// Deep lower bound per parameter next to the best shallow network with the
/// same number of hidden units.
pub fn regions_per_parameter(s: &NetworkStructure) -> Result<RegionsPerParameter> {
    let deep_regions = deep_rectifier_lower(s)?;
    let deep_params = s.parameter_count();
    let units = s.total_units();
    let shallow = NetworkStructure::rectifier(s.input_dim, &[units])?;
    let shallow_regions = shallow_max_regions(s.input_dim as u64, units as u64);
    let shallow_params = shallow.parameter_count();
    let widths = s.widths();
    let note = widths
        .iter()
        .any(|&w| w != widths[0])
        .then(|| "widths differ; comparison assumes constant width".to_string());
    Ok(RegionsPerParameter {
        deep: ratio(&deep_regions, deep_params),
        shallow: ratio(&shallow_regions, shallow_params),
        deep_regions,
        deep_params,
        shallow_regions,
        shallow_params,
        note,
    })
}

/// Every bound that applies to a structure. Integers are rendered as decimal
/// strings in JSON so that large values stay exact.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub structure: NetworkStructure,
    pub total_units: usize,
    pub params: u64,
    /// Best one-hidden-layer rectifier network with the same number of units.
    pub shallow_max: Option<String>,
    pub upper_2n: Option<String>,
    pub deep_rectifier_lower: Option<String>,
    pub deep_rectifier_lower_refined: Option<String>,
    pub maxout_lower: Option<String>,
    pub maxout_upper: Option<String>,
    pub regions_per_param_deep: Option<String>,
    pub regions_per_param_shallow: Option<String>,
    pub notes: Vec<String>,
}

fn uniform_maxout_rank(s: &NetworkStructure) -> Option<usize> {
    let mut rank = None;
    for l in &s.layers {
        match l.activation {
            ActivationKind::Maxout { rank: k } if rank.is_none() || rank == Some(k) => {
                rank = Some(k)
            }
            _ => return None,
        }
    }
    rank
}

pub fn bound_report(s: &NetworkStructure) -> BoundReport {
    let mut notes = Vec::new();
    let keep = |r: Result<BigUint>, notes: &mut Vec<String>| match r {
        Ok(v) => Some(v.to_string()),
        Err(e) => {
            notes.push(e.to_string());
            None
        }
    };
    let rect = s.is_rectifier();
    let (mut shallow_max, mut upper, mut lower, mut refined) = (None, None, None, None);
    let (mut rpp_deep, mut rpp_shallow) = (None, None);
    if rect {
        shallow_max = Some(shallow_max_regions(s.input_dim as u64, s.total_units() as u64).to_string());
        upper = keep(rectifier_upper_bound(s), &mut notes);
        lower = keep(deep_rectifier_lower(s), &mut notes);
        refined = deep_rectifier_lower_refined(s).ok().map(|v| v.to_string());
        if let Ok(r) = regions_per_parameter(s) {
            rpp_deep = Some(r.deep.to_string());
            rpp_shallow = Some(r.shallow.to_string());
            notes.extend(r.note);
        }
    }
    let (mut mo_lower, mut mo_upper) = (None, None);
    if let Some(k) = uniform_maxout_rank(s) {
        let n0 = s.input_dim as u64;
        if s.depth() == 1 {
            if let Ok((lo, up)) = maxout_layer_bounds(n0, s.layers[0].width as u64, k as u64) {
                mo_lower = Some(lo.to_string());
                mo_upper = Some(up.to_string());
            }
        } else if s.layers.iter().all(|l| l.width == s.input_dim) {
            mo_lower = keep(deep_maxout_lower(n0, s.depth() as u64, k as u64), &mut notes);
        } else {
            notes.push("deep maxout lower bound needs every layer to have width n0".into());
        }
    } else if !rect {
        notes.push("mixed activation kinds: no closed-form bound applies".into());
    }
    BoundReport {
        structure: s.clone(),
        total_units: s.total_units(),
        params: s.parameter_count(),
        shallow_max,
        upper_2n: upper,
        deep_rectifier_lower: lower,
        deep_rectifier_lower_refined: refined,
        maxout_lower: mo_lower,
        maxout_upper: mo_upper,
        regions_per_param_deep: rpp_deep,
        regions_per_param_shallow: rpp_shallow,
        notes,
    }
}

impl BoundReport {
    /// Aligned two-column plain-text table.
    pub fn to_text(&self) -> String {
        let widths: Vec<String> = self.structure.widths().iter().map(|w| w.to_string()).collect();
        let kinds: Vec<String> = self.structure.layers.iter().map(|l| l.activation.to_string()).collect();
        let mut rows: Vec<(&str, String)> = vec![
            ("n0", self.structure.input_dim.to_string()),
            ("widths", widths.join(",")),
            ("activations", kinds.join(",")),
            ("total_units", self.total_units.to_string()),
            ("params", self.params.to_string()),
        ];
        let opt = |v: &Option<String>| v.clone().unwrap_or_else(|| "-".into());
        rows.push(("shallow_max", opt(&self.shallow_max)));
        rows.push(("upper_2N", opt(&self.upper_2n)));
        rows.push(("deep_rectifier_lower", opt(&self.deep_rectifier_lower)));
        rows.push(("deep_rectifier_lower_refined", opt(&self.deep_rectifier_lower_refined)));
        rows.push(("maxout_lower", opt(&self.maxout_lower)));
        rows.push(("maxout_upper", opt(&self.maxout_upper)));
        rows.push(("regions_per_param_deep", opt(&self.regions_per_param_deep)));
        rows.push(("regions_per_param_shallow", opt(&self.regions_per_param_shallow)));
        let key_w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            out.push_str(&format!("{k:<key_w$}  {v}\n"));
        }
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    fn rect(n0: usize, w: &[usize]) -> NetworkStructure {
        NetworkStructure::rectifier(n0, w).unwrap()
    }

    #[test]
    fn binomials_match_pascal() {
        for n in 0..30u64 {
            for k in 1..n {
                assert_eq!(binomial(n, k), binomial(n - 1, k - 1) + binomial(n - 1, k));
            }
        }
        assert_eq!(binomial(3, 5), big(0));
    }

    #[test]
    fn shallow_values() {
        assert_eq!(shallow_max_regions(2, 3), big(7));
        assert_eq!(shallow_max_regions(2, 0), big(1));
        assert_eq!(shallow_max_regions(2, 20), big(1 + 20 + 190));
    }

    #[test]
    fn upper_values() {
        assert_eq!(rectifier_upper_bound(&rect(2, &[3])).unwrap(), big(8));
        assert_eq!(rectifier_upper_bound(&rect(2, &[1])).unwrap(), big(2));
        assert_eq!(rectifier_upper_bound(&rect(2, &[10, 10])).unwrap(), big(1_048_576));
        let huge = rectifier_upper_bound(&rect(2, &[100, 100])).unwrap();
        assert_eq!(huge, BigUint::one() << 200u32);
    }

    #[test]
    fn deep_lower_values() {
        assert_eq!(deep_rectifier_lower(&rect(1, &[2, 2])).unwrap(), big(6));
        assert_eq!(deep_rectifier_lower(&rect(2, &[4, 4, 4])).unwrap(), big(176));
        assert_eq!(deep_rectifier_lower(&rect(2, &[2, 2])).unwrap(), big(4));
        let err = deep_rectifier_lower(&rect(3, &[2, 4])).unwrap_err();
        assert!(err.to_string().contains("n_l >= n0"));
    }

    #[test]
    fn refined_values() {
        assert_eq!(deep_rectifier_lower_refined(&rect(2, &[5, 3])).unwrap(), big(42));
        assert_eq!(deep_rectifier_lower_refined(&rect(2, &[4, 4])).unwrap(), big(44));
        assert_eq!(deep_rectifier_lower_refined(&rect(3, &[7, 3])).unwrap(), big(96));
        assert_eq!(fold_group_sizes(5, 2, true), vec![2, 3]);
        assert_eq!(fold_group_sizes(5, 2, false), vec![2, 2]);
        assert_eq!(fold_group_sizes(7, 3, true), vec![2, 2, 3]);
    }

    #[test]
    fn maxout_values() {
        assert_eq!(maxout_layer_bounds(2, 3, 2).unwrap(), (big(4), big(8)));
        assert_eq!(maxout_layer_bounds(1, 1, 2).unwrap(), (big(2), big(2)));
        assert_eq!(maxout_layer_bounds(3, 2, 3).unwrap(), (big(9), big(9)));
        assert_eq!(shallow_max_regions(2, 12), big(79));
        assert_eq!(shallow_max_regions(3, 18), big(988));
        assert_eq!(deep_maxout_lower(2, 3, 3).unwrap(), big(81));
        assert_eq!(deep_maxout_lower(1, 1, 2).unwrap(), big(2));
        // rank 2: k^{L-1} k^{n0} = 2^{n0 L}
        assert_eq!(deep_maxout_lower(2, 2, 2).unwrap(), big(8));
        assert!(maxout_layer_bounds(2, 2, 1).is_err());
    }

    #[test]
    fn identified_products() {
        assert_eq!(identified_region_count(&[vec![2, 2]]).unwrap(), big(4));
        assert_eq!(identified_region_count(&[vec![1, 1, 1]]).unwrap(), big(1));
        assert_eq!(identified_region_count(&[vec![2, 3], vec![3, 2]]).unwrap(), big(36));
        assert!(identified_region_count(&[vec![0]]).is_err());
    }

    #[test]
    fn regions_per_parameter_small_case() {
        // deep: n0 = 1, widths (2, 2): 2·2 + 2·3 = 10 parameters, bound 6
        // shallow: 4 units on 1 input: 4·2 = 8 parameters, 1 + 4 = 5 regions
        let r = regions_per_parameter(&rect(1, &[2, 2])).unwrap();
        assert_eq!((r.deep_params, r.shallow_params), (10, 8));
        assert_eq!(r.deep_regions, big(6));
        assert_eq!(r.shallow_regions, big(5));
        assert_eq!(r.deep, BigRational::new(3.into(), 5.into()));
        assert_eq!(r.shallow, BigRational::new(5.into(), 8.into()));
        assert!(r.note.is_none());
    }

    #[test]
    fn single_layer_ratios_coincide() {
        for n in 2..7 {
            let r = regions_per_parameter(&rect(2, &[n])).unwrap();
            assert_eq!(r.deep, r.shallow);
        }
    }

    #[test]
    fn deep_ratio_increases_with_depth() {
        let ratios: Vec<BigRational> = (1..=6)
            .map(|l| regions_per_parameter(&rect(2, &vec![4; l])).unwrap().deep)
            .collect();
        assert!(ratios.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn report_for_cli_examples() {
        let r = bound_report(&rect(2, &[4, 4, 4]));
        assert_eq!(r.deep_rectifier_lower.as_deref(), Some("176"));
        let r = bound_report(&rect(2, &[3]));
        assert_eq!(r.shallow_max.as_deref(), Some("7"));
        let r = bound_report(&rect(1, &[1]));
        assert_eq!(r.upper_2n.as_deref(), Some("2"));
        assert_eq!(r.deep_rectifier_lower.as_deref(), Some("2"));
        let m = bound_report(&NetworkStructure::maxout(2, &[3], 2).unwrap());
        assert_eq!(m.maxout_lower.as_deref(), Some("4"));
        assert_eq!(m.maxout_upper.as_deref(), Some("8"));
        assert!(m.to_text().contains("maxout_upper"));
    }
}
