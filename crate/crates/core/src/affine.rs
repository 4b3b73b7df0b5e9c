//! Affine maps `x -> A x + c` from input space.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// The affine function a network (or a single unit) computes on one region.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub matrix: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl AffineMap {
    pub fn new(matrix: DMatrix<f64>, offset: DVector<f64>) -> Self {
        assert_eq!(matrix.nrows(), offset.len(), "affine map rows/offset mismatch");
        Self { matrix, offset }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim), DVector::zeros(dim))
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        Self::new(DMatrix::zeros(rows, cols), DVector::zeros(rows))
    }

    pub fn input_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x + &self.offset
    }

    /// Returns `outer ∘ self`, i.e. `x -> M (A x + c) + d`.
    pub fn then(&self, outer_matrix: &DMatrix<f64>, outer_offset: &DVector<f64>) -> AffineMap {
        AffineMap::new(
            outer_matrix * &self.matrix,
            outer_matrix * &self.offset + outer_offset,
        )
    }

    /// Single output row as a 1 × n0 map.
    pub fn row(&self, i: usize) -> AffineMap {
        AffineMap::new(
            self.matrix.rows(i, 1).into_owned(),
            DVector::from_element(1, self.offset[i]),
        )
    }

    pub fn max_abs_diff(&self, other: &AffineMap) -> f64 {
        if self.matrix.shape() != other.matrix.shape() {
            return f64::INFINITY;
        }
        let m = (&self.matrix - &other.matrix).amax();
        let o = (&self.offset - &other.offset).amax();
        m.max(o)
    }

    /// Flattened coefficients `[row0..., offset0, row1..., offset1, ...]`,
    /// used for canonical ordering of maps.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.matrix.len() + self.offset.len());
        for i in 0..self.output_dim() {
            out.extend(self.matrix.row(i).iter().copied());
            out.push(self.offset[i]);
        }
        out
    }

    pub fn to_json(&self) -> AffineJson {
        AffineJson {
            matrix: (0..self.output_dim())
                .map(|i| self.matrix.row(i).iter().copied().collect())
                .collect(),
            offset: self.offset.iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AffineJson {
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_matches_sequential_application() {
        let inner = AffineMap::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -1.0, 0.5]),
            DVector::from_vec(vec![0.25, -1.0]),
        );
        let outer_m = DMatrix::from_row_slice(1, 2, &[3.0, -2.0]);
        let outer_c = DVector::from_vec(vec![0.5]);
        let composed = inner.then(&outer_m, &outer_c);
        let x = DVector::from_vec(vec![0.3, -0.7]);
        let direct = &outer_m * inner.apply(&x) + &outer_c;
        assert!((composed.apply(&x) - direct).amax() < 1e-15);
    }

    #[test]
    fn row_extracts_single_output() {
        let m = AffineMap::new(
            DMatrix::from_row_slice(2, 1, &[4.0, 5.0]),
            DVector::from_vec(vec![1.0, 2.0]),
        );
        let r = m.row(1);
        assert_eq!(r.matrix[(0, 0)], 5.0);
        assert_eq!(r.offset[0], 2.0);
        assert_eq!(r.coefficients(), vec![5.0, 2.0]);
    }
}
