//! Exact enumeration of full-dimensional linear regions.
//!
//! Regions are refined layer by layer and, inside a layer, unit by unit. Every
//! candidate child is a polyhedron given by strict inequalities; it is kept iff
//! the max-slack LP certifies a ball of radius greater than `eps_feas` inside it.
//! A rectifier splits a region along one hyperplane; a rank-`k` maxout unit
//! yields up to `k` children, child `t` being the set where branch `t` strictly
//! dominates the other `k - 1` branches.

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::affine::AffineMap;
use crate::error::{Error, Result};
use crate::lp::{self, Halfspace, DEGENERATE_NORM};
use crate::net::{ActivationKind, ActivationPattern, Layer, Network};

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityConfig {
    /// Regions are clipped to `(-B, B)^n0`.
    pub box_halfwidth: f64,
    /// A child is full-dimensional iff its max slack exceeds this.
    pub eps_feas: f64,
    pub normalize_rows: bool,
    /// Re-check borderline LPs (`|t*| <= 10·eps_feas`) in rational arithmetic.
    pub exact_rational: bool,
    pub region_cap: usize,
}

impl Default for FeasibilityConfig {
    fn default() -> Self {
        Self {
            box_halfwidth: 1e3,
            eps_feas: 1e-7,
            normalize_rows: true,
            exact_rational: false,
            region_cap: 1_000_000,
        }
    }
}

impl FeasibilityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.box_halfwidth > 0.0) || !(self.eps_feas > 0.0) {
            return Err(Error::Structure(
                "box half-width and feasibility tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// An open polyhedron on which the processed layers are affine.
#[derive(Debug, Clone)]
pub struct Region {
    /// `normal·x < offset`, unit-normalized unless disabled in the config.
    pub constraints: Vec<Halfspace>,
    /// Input → output of the last processed layer.
    pub affine: AffineMap,
    pub pattern: ActivationPattern,
    pub witness: DVector<f64>,
    /// Minimum slack of the witness over all constraints.
    pub clearance: f64,
    /// Unscaled copies of the constraints, kept only for the rational re-check.
    exact_rows: Vec<Halfspace>,
}

impl Region {
    /// True if `x` lies in the closure, up to `tol`.
    pub fn contains_closure(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.constraints.iter().all(|h| h.slack(x) >= -tol)
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.constraints.iter().all(|h| h.slack(x) > 0.0)
    }
}

#[derive(Debug, Clone)]
pub struct RegionSet {
    pub regions: Vec<Region>,
    pub box_halfwidth: f64,
    pub layers_processed: usize,
}

impl RegionSet {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn find(&self, pattern: &ActivationPattern) -> Option<&Region> {
        self.regions
            .binary_search_by(|r| r.pattern.cmp(pattern))
            .ok()
            .map(|i| &self.regions[i])
    }
}

/// Intermediate state while splitting inside one layer.
#[derive(Clone)]
struct Partial {
    constraints: Vec<Halfspace>,
    witness: DVector<f64>,
    clearance: f64,
    states: Vec<u32>,
    exact_rows: Vec<Halfspace>,
}

struct Splitter<'a> {
    cfg: &'a FeasibilityConfig,
    dim: usize,
}

impl Splitter<'_> {
    fn prepare(&self, h: Halfspace) -> Halfspace {
        if self.cfg.normalize_rows {
            h.normalized().expect("degenerate rows are filtered before")
        } else {
            h
        }
    }

    /// Max-slack test for `parent ∧ extra`. `Ok(None)` if not full-dimensional.
    fn child(&self, parent: &Partial, extra: Vec<Halfspace>, state: u32) -> Result<Option<Partial>> {
        let mut states = parent.states.clone();
        states.push(state);
        if extra.is_empty() {
            return Ok(Some(Partial {
                states,
                ..parent.clone()
            }));
        }
        let mut exact_rows = Vec::new();
        if self.cfg.exact_rational {
            // Normalizing in floating point would move exactly concurrent
            // hyperplanes apart, so the rational check sees the raw rows.
            exact_rows = parent.exact_rows.clone();
            exact_rows.extend(extra.iter().cloned());
        }
        let mut constraints = parent.constraints.clone();
        constraints.extend(extra.into_iter().map(|h| self.prepare(h)));
        let sol = lp::max_slack(self.dim, &constraints).map_err(|message| Error::Lp {
            pattern: format!("{:?}", states),
            message,
        })?;
        let mut keep = sol.slack > self.cfg.eps_feas;
        let mut witness = sol.center;
        let mut clearance = sol.slack;
        if self.cfg.exact_rational && sol.slack.abs() <= 10.0 * self.cfg.eps_feas {
            if let Some((x, t)) = lp::max_slack_exact(self.dim, &exact_rows) {
                keep = t > num_rational::BigRational::from_integer(0.into());
                witness = DVector::from_iterator(self.dim, x.iter().map(lp::rational_to_f64));
                clearance = constraints
                    .iter()
                    .map(|h| h.slack(&witness))
                    .fold(f64::INFINITY, f64::min);
            }
        }
        Ok(keep.then_some(Partial {
            constraints,
            witness,
            clearance,
            states,
            exact_rows,
        }))
    }
}

/// Splits `region` by every unit of `layer`; children are returned in
/// lexicographic order of the new layer's states.
fn refine_layer(
    layer: &Layer,
    region: &Region,
    cfg: &FeasibilityConfig,
) -> Result<Vec<Region>> {
    let dim = region.witness.len();
    let splitter = Splitter { cfg, dim };
    // Pre-activations as affine functions of the input on this region.
    let pre_m: DMatrix<f64> = &layer.weights * &region.affine.matrix;
    let pre_c: DVector<f64> = &layer.weights * &region.affine.offset + &layer.bias;
    let row = |r: usize| -> DVector<f64> { pre_m.row(r).transpose() };

    let mut partials = vec![Partial {
        constraints: region.constraints.clone(),
        witness: region.witness.clone(),
        clearance: region.clearance,
        states: Vec::with_capacity(layer.width),
        exact_rows: region.exact_rows.clone(),
    }];

    for j in 0..layer.width {
        let mut next = Vec::with_capacity(partials.len() * 2);
        match layer.activation {
            ActivationKind::Rectifier => {
                let a = row(j);
                let b = pre_c[j];
                let degenerate = a.norm() <= DEGENERATE_NORM;
                for p in &partials {
                    if degenerate {
                        // Constant pre-activation; exact zero counts as inactive.
                        let state = u32::from(b > DEGENERATE_NORM);
                        next.extend(splitter.child(p, vec![], state)?);
                        continue;
                    }
                    // inactive: a·x + b < 0
                    next.extend(splitter.child(p, vec![Halfspace::new(a.clone(), -b)], 0)?);
                    // active: a·x + b > 0
                    next.extend(splitter.child(p, vec![Halfspace::new(-a.clone(), b)], 1)?);
                }
            }
            ActivationKind::Maxout { rank } => {
                for p in &partials {
                    for t in 0..rank {
                        let at = row(j * rank + t);
                        let bt = pre_c[j * rank + t];
                        let mut extra = Vec::with_capacity(rank - 1);
                        let mut possible = true;
                        for s in (0..rank).filter(|&s| s != t) {
                            // branch t beats s: (a_s - a_t)·x < b_t - b_s
                            let normal = row(j * rank + s) - &at;
                            let offset = bt - pre_c[j * rank + s];
                            if normal.norm() <= DEGENERATE_NORM {
                                let wins = offset > DEGENERATE_NORM
                                    || (offset.abs() <= DEGENERATE_NORM && t < s);
                                if !wins {
                                    possible = false;
                                    break;
                                }
                            } else {
                                extra.push(Halfspace::new(normal, offset));
                            }
                        }
                        if possible {
                            next.extend(splitter.child(p, extra, t as u32)?);
                        }
                    }
                }
            }
        }
        partials = next;
    }

    Ok(partials
        .into_iter()
        .map(|p| {
            let (m, d) = layer.fixed_map(&p.states);
            let mut pattern = region.pattern.clone();
            pattern.0.push(p.states);
            Region {
                constraints: p.constraints,
                affine: region.affine.then(&m, &d),
                pattern,
                witness: p.witness,
                clearance: p.clearance,
                exact_rows: p.exact_rows,
            }
        })
        .collect())
}

fn root_region(net: &Network, domain: Vec<Halfspace>, cfg: &FeasibilityConfig) -> Result<Region> {
    let dim = net.input_dim;
    let exact_rows = if cfg.exact_rational { domain.clone() } else { Vec::new() };
    let constraints: Vec<Halfspace> = if cfg.normalize_rows {
        domain
            .into_iter()
            .map(|h| {
                h.normalized()
                    .ok_or_else(|| Error::Structure("degenerate domain constraint".into()))
            })
            .collect::<Result<_>>()?
    } else {
        domain
    };
    let sol = lp::max_slack(dim, &constraints).map_err(|message| Error::Lp {
        pattern: "root".into(),
        message,
    })?;
    if sol.slack <= cfg.eps_feas {
        return Err(Error::Structure("domain has empty interior".into()));
    }
    Ok(Region {
        constraints,
        affine: AffineMap::identity(dim),
        pattern: ActivationPattern::default(),
        witness: sol.center,
        clearance: sol.slack,
        exact_rows,
    })
}

/// All regions of `net` inside `(-B, B)^n0`, sorted by activation pattern.
pub fn enumerate_regions(net: &Network, cfg: &FeasibilityConfig) -> Result<RegionSet> {
    cfg.validate()?;
    enumerate_regions_in(net, lp::box_halfspaces(net.input_dim, cfg.box_halfwidth), cfg)
}

/// Like [`enumerate_regions`] but over an arbitrary polyhedral domain.
pub fn enumerate_regions_in(
    net: &Network,
    domain: Vec<Halfspace>,
    cfg: &FeasibilityConfig,
) -> Result<RegionSet> {
    cfg.validate()?;
    let mut regions = vec![root_region(net, domain, cfg)?];
    for layer in &net.layers {
        let children: Vec<Vec<Region>> = regions
            .par_iter()
            .map(|r| refine_layer(layer, r, cfg))
            .collect::<Result<_>>()?;
        regions = children.into_iter().flatten().collect();
        if regions.len() > cfg.region_cap {
            return Err(Error::RegionBudget {
                partial: regions.len(),
                cap: cfg.region_cap,
            });
        }
    }
    regions.sort_by(|a, b| a.pattern.cmp(&b.pattern));
    Ok(RegionSet {
        regions,
        box_halfwidth: cfg.box_halfwidth,
        layers_processed: net.depth(),
    })
}

/// Number of regions, computed depth-first without keeping the geometry of
/// finished regions.
pub fn count_regions(net: &Network, cfg: &FeasibilityConfig) -> Result<usize> {
    cfg.validate()?;
    count_regions_in(net, lp::box_halfspaces(net.input_dim, cfg.box_halfwidth), cfg)
}

pub fn count_regions_in(
    net: &Network,
    domain: Vec<Halfspace>,
    cfg: &FeasibilityConfig,
) -> Result<usize> {
    let root = root_region(net, domain, cfg)?;
    let seen = AtomicUsize::new(0);
    let total = count_subtree(net, 0, &root, cfg, &seen)?;
    Ok(total)
}

fn count_subtree(
    net: &Network,
    layer: usize,
    region: &Region,
    cfg: &FeasibilityConfig,
    seen: &AtomicUsize,
) -> Result<usize> {
    if layer == net.depth() {
        let n = seen.fetch_add(1, Ordering::Relaxed) + 1;
        if n > cfg.region_cap {
            return Err(Error::RegionBudget {
                partial: n,
                cap: cfg.region_cap,
            });
        }
        return Ok(1);
    }
    let children = refine_layer(&net.layers[layer], region, cfg)?;
    children
        .par_iter()
        .map(|c| count_subtree(net, layer + 1, c, cfg, seen))
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

/// Returns true if any unit sits exactly on a decision boundary at `x`.
fn on_boundary(net: &Network, x: &DVector<f64>) -> bool {
    let mut cur = x.clone();
    // Input-space Jacobian of the current layer input; a tie only marks a
    // boundary where the competing pre-activations differ in slope.
    let mut jac = DMatrix::<f64>::identity(x.len(), x.len());
    for layer in &net.layers {
        let pre = layer.pre_activation(&cur);
        let grad = &layer.weights * &jac;
        let tie = 1e-12 * (1.0 + pre.amax());
        let varies = |r: usize, s: Option<usize>| {
            let g = match s {
                Some(s) => grad.row(r) - grad.row(s),
                None => grad.row(r).into_owned(),
            };
            g.norm() > DEGENERATE_NORM
        };
        match layer.activation {
            ActivationKind::Rectifier => {
                if (0..pre.len()).any(|r| pre[r].abs() <= tie && varies(r, None)) {
                    return true;
                }
            }
            ActivationKind::Maxout { rank } => {
                for j in 0..layer.width {
                    let mut idx: Vec<usize> = (j * rank..(j + 1) * rank).collect();
                    idx.sort_by(|&a, &b| pre[b].total_cmp(&pre[a]));
                    let top = idx[0];
                    if idx[1..]
                        .iter()
                        .any(|&s| pre[top] - pre[s] <= tie && varies(top, Some(s)))
                    {
                        return true;
                    }
                }
            }
        }
        let (m, _) = layer.fixed_map(&layer.select(&pre));
        jac = m * jac;
        cur = layer.activate(&pre);
    }
    false
}

/// Brute-force oracle: the number of distinct activation patterns on a regular
/// grid of `resolution` points per axis over `bounds` (`n0 <= 2`). Grid points
/// lying exactly on a boundary belong to no open region and are skipped.
pub fn oracle_count_by_grid(net: &Network, bounds: &[(f64, f64)], resolution: usize) -> Result<usize> {
    let n0 = net.input_dim;
    if n0 > 2 || bounds.len() != n0 {
        return Err(Error::Structure(format!(
            "grid oracle needs n0 <= 2 and one interval per input, got n0 = {n0}, {} intervals",
            bounds.len()
        )));
    }
    if resolution < 2 {
        return Err(Error::Structure("grid resolution must be at least 2".into()));
    }
    let coord = |axis: usize, i: usize| {
        let (lo, hi) = bounds[axis];
        lo + (hi - lo) * i as f64 / (resolution - 1) as f64
    };
    let points: Box<dyn Iterator<Item = DVector<f64>>> = if n0 == 1 {
        Box::new((0..resolution).map(move |i| DVector::from_element(1, coord(0, i))))
    } else {
        Box::new(
            (0..resolution)
                .cartesian_product(0..resolution)
                .map(move |(i, j)| DVector::from_vec(vec![coord(0, i), coord(1, j)])),
        )
    };
    let mut seen = HashSet::new();
    for x in points {
        if on_boundary(net, &x) {
            continue;
        }
        seen.insert(net.pattern_at(&x)?);
    }
    Ok(seen.len())
}

/// General position test for hyperplanes `normal·x = offset` in `R^n0`:
/// any `s <= n0` normals have rank `s` and any `n0 + 1` hyperplanes have an
/// empty common intersection. Rank decisions use singular values of
/// unit-normalized rows against `1e-8`.
pub fn check_general_position(hyperplanes: &[Halfspace], n0: usize) -> bool {
    const TOL: f64 = 1e-8;
    let mut rows = Vec::with_capacity(hyperplanes.len());
    for h in hyperplanes {
        if h.normal.len() != n0 {
            return false;
        }
        match h.normalized() {
            Some(n) => rows.push(n),
            None => return false,
        }
    }
    let min_singular = |subset: &[&Halfspace], augmented: bool| -> f64 {
        let cols = n0 + usize::from(augmented);
        let m = DMatrix::from_fn(subset.len(), cols, |r, c| {
            if c < n0 {
                subset[r].normal[c]
            } else {
                subset[r].offset
            }
        });
        let sv = m.svd(false, false).singular_values;
        sv.iter().copied().fold(f64::INFINITY, f64::min)
    };
    for s in 1..=n0.min(rows.len()) {
        for subset in rows.iter().combinations(s) {
            if min_singular(&subset, false) <= TOL {
                return false;
            }
        }
    }
    if rows.len() > n0 {
        for subset in rows.iter().combinations(n0 + 1) {
            // normals have rank n0 here; empty intersection iff [N | o] has rank n0 + 1
            let norm_rows: Vec<Halfspace> = subset
                .iter()
                .map(|h| {
                    let mut v = h.to_row();
                    let len = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                    v.iter_mut().for_each(|a| *a /= len);
                    Halfspace::new(DVector::from_row_slice(&v[..n0]), v[n0])
                })
                .collect();
            let refs: Vec<&Halfspace> = norm_rows.iter().collect();
            if min_singular(&refs, true) <= TOL {
                return false;
            }
        }
    }
    true
}
