//! Maximum-slack (Chebyshev-center) LPs over systems of strict linear inequalities.
//!
//! For unit-normalized rows `n_i·x < o_i` the program
//!
//! ```text
//! maximize t  subject to  n_i·x + t <= o_i
//! ```
//!
//! returns a point `x*` whose distance to every bounding hyperplane is at least
//! `t*`. The system is strictly feasible iff `t* > 0`.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::DVector;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Normals shorter than this are treated as constant constraints.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Strict inequality `normal · x < offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub normal: DVector<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: DVector<f64>, offset: f64) -> Self {
        Self { normal, offset }
    }

    /// Rescales so that `‖normal‖₂ = 1`. Returns `None` for a degenerate normal.
    pub fn normalized(&self) -> Option<Halfspace> {
        let norm = self.normal.norm();
        if norm <= DEGENERATE_NORM || !norm.is_finite() {
            return None;
        }
        Some(Halfspace::new(&self.normal / norm, self.offset / norm))
    }

    /// `offset - normal·x`; positive inside.
    pub fn slack(&self, x: &DVector<f64>) -> f64 {
        self.offset - self.normal.dot(x)
    }

    /// `[normal..., offset]`
    pub fn to_row(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.normal.iter().copied().collect();
        v.push(self.offset);
        v
    }
}

/// The axis-aligned box `(-b, b)^dim` as `2·dim` halfspaces.
pub fn box_halfspaces(dim: usize, b: f64) -> Vec<Halfspace> {
    cube_halfspaces(&vec![-b; dim], &vec![b; dim])
}

pub fn cube_halfspaces(lower: &[f64], upper: &[f64]) -> Vec<Halfspace> {
    let dim = lower.len();
    let mut out = Vec::with_capacity(2 * dim);
    for i in 0..dim {
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        out.push(Halfspace::new(-e.clone(), -lower[i]));
        out.push(Halfspace::new(e, upper[i]));
    }
    out
}

#[derive(Debug, Clone)]
pub struct SlackSolution {
    pub center: DVector<f64>,
    pub slack: f64,
}

/// Variables get finite bounds of this many times the largest offset: the
/// solver loses accuracy on free variables, and on very wide bounds.
const BOUND_FACTOR: f64 = 16.0;

/// Solves the max-slack LP in floating point. Rows are used as given; callers
/// normalize them beforehand when a geometric radius is wanted.
pub fn max_slack(dim: usize, rows: &[Halfspace]) -> Result<SlackSolution, String> {
    let scale = rows.iter().fold(1.0_f64, |m, h| m.max(h.offset.abs()));
    let bound = BOUND_FACTOR * scale;
    let mut pb = Problem::new(OptimizationDirection::Maximize);
    let xs: Vec<_> = (0..dim)
        .map(|_| pb.add_var(0.0, (-bound, bound)))
        .collect();
    let t = pb.add_var(1.0, (-bound, bound));
    for h in rows {
        let mut expr: Vec<_> = xs
            .iter()
            .zip(h.normal.iter())
            .filter(|(_, &c)| c != 0.0)
            .map(|(&v, &c)| (v, c))
            .collect();
        expr.push((t, 1.0));
        pb.add_constraint(expr.as_slice(), ComparisonOp::Le, h.offset);
    }
    let sol = pb.solve().map_err(|e| e.to_string())?;
    let center = DVector::from_iterator(dim, xs.iter().map(|&v| sol[v]));
    // The slack actually achieved at the returned center certifies the result.
    let slack = rows
        .iter()
        .map(|h| h.slack(&center))
        .fold(sol[t], f64::min);
    if !slack.is_finite() || center.iter().any(|v| !v.is_finite()) {
        return Err("non-finite LP solution".into());
    }
    Ok(SlackSolution { center, slack })
}

/// Largest ball inside `{x : n_i·x < o_i}` after row normalization.
/// Rows with a degenerate normal are dropped when satisfied (`offset > 0`);
/// an unsatisfiable one yields slack `-inf`.
pub fn chebyshev_center(dim: usize, rows: &[Halfspace]) -> Result<SlackSolution, String> {
    let mut normalized = Vec::with_capacity(rows.len());
    for h in rows {
        match h.normalized() {
            Some(n) => normalized.push(n),
            None if h.offset > 0.0 => {}
            None => {
                return Ok(SlackSolution {
                    center: DVector::zeros(dim),
                    slack: f64::NEG_INFINITY,
                })
            }
        }
    }
    max_slack(dim, &normalized)
}

/// Exact decision of strict feasibility: maximizes `t` subject to
/// `n_i·x + t <= o_i`, `t <= 1`, in rational arithmetic. Every finite `f64`
/// converts exactly. Returns the optimal point and `t*`; the system is
/// strictly feasible iff `t* > 0`.
pub fn max_slack_exact(dim: usize, rows: &[Halfspace]) -> Option<(Vec<BigRational>, BigRational)> {
    let q = |v: f64| BigRational::from_float(v).expect("finite input");
    // Variables: x+ (dim), x- (dim), t+, t-; all >= 0.
    let nvars = 2 * dim + 2;
    let mut a = Vec::with_capacity(rows.len() + 1);
    let mut b = Vec::with_capacity(rows.len() + 1);
    for h in rows {
        let mut row = vec![BigRational::zero(); nvars];
        for i in 0..dim {
            row[i] = q(h.normal[i]);
            row[dim + i] = -q(h.normal[i]);
        }
        row[2 * dim] = BigRational::one();
        row[2 * dim + 1] = -BigRational::one();
        a.push(row);
        b.push(q(h.offset));
    }
    let mut cap = vec![BigRational::zero(); nvars];
    cap[2 * dim] = BigRational::one();
    cap[2 * dim + 1] = -BigRational::one();
    a.push(cap);
    b.push(BigRational::one());

    let mut c = vec![BigRational::zero(); nvars];
    c[2 * dim] = BigRational::one();
    c[2 * dim + 1] = -BigRational::one();

    match simplex::maximize(&a, &b, &c) {
        simplex::Outcome::Optimal { point, value } => {
            let x = (0..dim).map(|i| &point[i] - &point[dim + i]).collect();
            Some((x, value))
        }
        // t is free below, so the program is always feasible; with the
        // t <= 1 cap it can only be unbounded through x, which cannot raise t.
        _ => None,
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Dense two-phase tableau simplex with Bland's rule over exact rationals:
/// maximize `c·z` subject to `A z <= b`, `z >= 0`.
mod simplex {
    use super::*;

    pub enum Outcome {
        Optimal {
            point: Vec<BigRational>,
            value: BigRational,
        },
        Infeasible,
        Unbounded,
    }

    struct Tableau {
        rows: Vec<Vec<BigRational>>, // each row: coefficients + rhs
        basis: Vec<usize>,
        ncols: usize,
    }

    impl Tableau {
        fn pivot(&mut self, r: usize, col: usize) {
            let p = self.rows[r][col].clone();
            for v in self.rows[r].iter_mut() {
                *v = &*v / &p;
            }
            let pivot_row = self.rows[r].clone();
            for (i, row) in self.rows.iter_mut().enumerate() {
                if i == r || row[col].is_zero() {
                    continue;
                }
                let f = row[col].clone();
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    if !pv.is_zero() {
                        *v = &*v - &f * pv;
                    }
                }
            }
            self.basis[r] = col;
        }

        /// Runs Bland's rule for objective `obj` restricted to `allowed` columns.
        fn optimize(&mut self, obj: &[BigRational], allowed: &dyn Fn(usize) -> bool) -> bool {
            loop {
                let mut entering = None;
                for j in 0..self.ncols {
                    if !allowed(j) || self.basis.contains(&j) {
                        continue;
                    }
                    let mut r = obj[j].clone();
                    for (i, &bi) in self.basis.iter().enumerate() {
                        if !obj[bi].is_zero() && !self.rows[i][j].is_zero() {
                            r -= &obj[bi] * &self.rows[i][j];
                        }
                    }
                    if r.is_positive() {
                        entering = Some(j);
                        break;
                    }
                }
                let Some(col) = entering else { return true };
                let rhs = self.ncols;
                let mut leave: Option<(usize, BigRational)> = None;
                for i in 0..self.rows.len() {
                    let a = &self.rows[i][col];
                    if !a.is_positive() {
                        continue;
                    }
                    let ratio = &self.rows[i][rhs] / a;
                    let better = match &leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
                match leave {
                    Some((r, _)) => self.pivot(r, col),
                    None => return false,
                }
            }
        }

        fn value(&self, obj: &[BigRational]) -> BigRational {
            let rhs = self.ncols;
            self.basis
                .iter()
                .enumerate()
                .fold(BigRational::zero(), |acc, (i, &bi)| acc + &obj[bi] * &self.rows[i][rhs])
        }
    }

    pub fn maximize(a: &[Vec<BigRational>], b: &[BigRational], c: &[BigRational]) -> Outcome {
        let m = a.len();
        let n = c.len();
        let n_art = b.iter().filter(|v| v.is_negative()).count();
        let ncols = n + m + n_art;
        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut art = n + m;
        for i in 0..m {
            let mut row = vec![BigRational::zero(); ncols + 1];
            let neg = b[i].is_negative();
            let sign = if neg { -BigRational::one() } else { BigRational::one() };
            for j in 0..n {
                row[j] = &a[i][j] * &sign;
            }
            row[n + i] = sign.clone();
            row[ncols] = &b[i] * &sign;
            if neg {
                row[art] = BigRational::one();
                basis.push(art);
                art += 1;
            } else {
                basis.push(n + i);
            }
            rows.push(row);
        }
        let mut tab = Tableau { rows, basis, ncols };

        if n_art > 0 {
            let mut phase1 = vec![BigRational::zero(); ncols];
            for v in phase1.iter_mut().skip(n + m) {
                *v = -BigRational::one();
            }
            tab.optimize(&phase1, &|_| true);
            if tab.value(&phase1).is_negative() {
                return Outcome::Infeasible;
            }
            // Drive zero-level artificials out of the basis.
            let mut i = 0;
            while i < tab.rows.len() {
                if tab.basis[i] >= n + m {
                    match (0..n + m).find(|&j| !tab.rows[i][j].is_zero()) {
                        Some(j) => tab.pivot(i, j),
                        None => {
                            tab.rows.remove(i);
                            tab.basis.remove(i);
                            continue;
                        }
                    }
                }
                i += 1;
            }
        }

        let mut obj = vec![BigRational::zero(); ncols];
        obj[..n].clone_from_slice(c);
        if !tab.optimize(&obj, &|j| j < n + m) {
            return Outcome::Unbounded;
        }
        let mut point = vec![BigRational::zero(); n];
        for (i, &bi) in tab.basis.iter().enumerate() {
            if bi < n {
                point[bi] = tab.rows[i][ncols].clone();
            }
        }
        let value = tab.value(&obj);
        Outcome::Optimal { point, value }
    }

    #[allow(dead_code)]
    pub fn int(v: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hs(n: &[f64], o: f64) -> Halfspace {
        Halfspace::new(DVector::from_row_slice(n), o)
    }

    #[test]
    fn unit_square_center() {
        let rows = cube_halfspaces(&[0.0, 0.0], &[1.0, 1.0]);
        let s = chebyshev_center(2, &rows).unwrap();
        assert!((s.slack - 0.5).abs() < 1e-9);
        assert!((s.center[0] - 0.5).abs() < 1e-9 && (s.center[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn infeasible_strip_has_negative_slack() {
        let mut rows = box_halfspaces(1, 10.0);
        rows.push(hs(&[1.0], 0.0)); // x < 0
        rows.push(hs(&[-1.0], -1.0)); // x > 1
        let s = chebyshev_center(1, &rows).unwrap();
        assert!(s.slack < 0.0);
    }

    #[test]
    fn degenerate_rows_are_constants() {
        let mut rows = box_halfspaces(1, 1.0);
        rows.push(hs(&[0.0], 1.0));
        assert!(chebyshev_center(1, &rows).unwrap().slack > 0.9);
        rows.push(hs(&[0.0], -1.0));
        assert_eq!(chebyshev_center(1, &rows).unwrap().slack, f64::NEG_INFINITY);
    }

    #[test]
    fn slack_certifies_thin_regions() {
        // strip 0 < x < 2e-6 inside the box: slack 1e-6
        let mut rows = box_halfspaces(2, 1e3);
        rows.push(hs(&[-1.0, 0.0], 0.0));
        rows.push(hs(&[1.0, 0.0], 2e-6));
        let s = chebyshev_center(2, &rows).unwrap();
        assert!((s.slack - 1e-6).abs() < 1e-12, "{}", s.slack);
    }

    #[test]
    fn exact_simplex_agrees_on_square_and_touching_strip() {
        let rows = cube_halfspaces(&[0.0, 0.0], &[1.0, 1.0]);
        let (_, t) = max_slack_exact(2, &rows).unwrap();
        assert_eq!(t, BigRational::new(BigInt::from(1), BigInt::from(2)));

        // x < 0 and x > 0: only the boundary point, so t* = 0 exactly.
        let mut rows = box_halfspaces(1, 5.0);
        rows.push(hs(&[1.0], 0.0));
        rows.push(hs(&[-1.0], 0.0));
        let (_, t) = max_slack_exact(1, &rows).unwrap();
        assert!(t.is_zero());
    }

    #[test]
    fn exact_simplex_handles_negative_rhs() {
        // 1 < x < 3, 2 < y < 3 ; unnormalized rows give t* = 1/2
        let rows = cube_halfspaces(&[1.0, 2.0], &[3.0, 3.0]);
        let (x, t) = max_slack_exact(2, &rows).unwrap();
        assert_eq!(t, BigRational::new(BigInt::from(1), BigInt::from(2)));
        assert!(x[1] > simplex::int(2) && x[1] < simplex::int(3));
    }
}
