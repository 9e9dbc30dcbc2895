use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::{self, Deserializer};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense complex matrix with finite entries, stored row-major in the JSON
/// encoding `[[ [re, im], ... ], ...]`.
///
/// This is the concrete carrier for every operator in the crate: effects,
/// states, isometries, Kraus operators, and plain vectors (as `d`-by-1
/// columns).
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    data: DMatrix<Complex64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, rejecting NaN and infinities.
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(
                "matrix must have at least one row and one column".into(),
            ));
        }
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if !entries.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        // nalgebra stores column-major; transpose the row-major input.
        let data = DMatrix::from_row_slice(rows, cols, &entries);
        Ok(ComplexMatrix { data })
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        let complex: Vec<Complex64> = entries.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::new(rows, cols, complex)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            data: DMatrix::zeros(rows, cols),
        }
    }

    pub fn identity(n: usize) -> Self {
        ComplexMatrix {
            data: DMatrix::identity(n, n),
        }
    }

    /// Column vector from a slice of amplitudes.
    pub fn column_vector(entries: &[Complex64]) -> Result<Self> {
        Self::new(entries.len(), 1, entries.to_vec())
    }

    /// Rank-1 operator `|u><v|` built from two column vectors.
    pub fn dyad(u: &ComplexMatrix, v: &ComplexMatrix) -> Self {
        debug_assert_eq!(u.cols(), 1);
        debug_assert_eq!(v.cols(), 1);
        ComplexMatrix {
            data: &u.data * v.data.adjoint(),
        }
    }

    pub(crate) fn from_na(data: DMatrix<Complex64>) -> Self {
        debug_assert!(
            data.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
            "non-finite entries produced by an internal operation"
        );
        ComplexMatrix { data }
    }

    pub(crate) fn na(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[(row, col)]
    }

    /// Entries in row-major order.
    pub fn entries_row_major(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for r in 0..self.rows() {
            for c in 0..self.cols() {
                out.push(self.data[(r, c)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        ComplexMatrix {
            data: self.data.adjoint(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        debug_assert!(self.is_square());
        self.data.diagonal().sum()
    }

    pub fn scale(&self, factor: f64) -> Self {
        ComplexMatrix {
            data: &self.data * Complex64::new(factor, 0.0),
        }
    }

    pub fn scale_complex(&self, factor: Complex64) -> Self {
        ComplexMatrix {
            data: &self.data * factor,
        }
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        if self.data.iter().all(|z| z.norm_sqr() == 0.0) {
            return 0.0;
        }
        self.data
            .clone()
            .singular_values()
            .iter()
            .fold(0.0, |acc, &s| acc.max(s))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.norm()
    }

    /// Operator-norm distance `‖A − A*‖`.
    pub fn hermiticity_residual(&self) -> f64 {
        debug_assert!(self.is_square());
        ComplexMatrix::from_na(&self.data - self.data.adjoint()).operator_norm()
    }

    pub fn is_hermitian(&self, herm_tol: f64) -> bool {
        self.is_square() && self.hermiticity_residual() <= herm_tol * (1.0 + self.operator_norm())
    }

    /// Hermitian part `(A + A*)/2`.
    pub fn hermitian_part(&self) -> Self {
        ComplexMatrix {
            data: (&self.data + self.data.adjoint()) * Complex64::new(0.5, 0.0),
        }
    }

    pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> Self {
        ComplexMatrix {
            data: &a.data * &b.data - &b.data * &a.data,
        }
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows(), self.cols())?;
        for r in 0..self.rows() {
            write!(f, "  ")?;
            for c in 0..self.cols() {
                let z = self.data[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.data[idx]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::from_na(&self.data + &rhs.data)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::from_na(&self.data - &rhs.data)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::from_na(&self.data * &rhs.data)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix::from_na(-&self.data)
    }
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut rows = serializer.serialize_seq(Some(self.rows()))?;
        for r in 0..self.rows() {
            let row: Vec<[f64; 2]> = (0..self.cols())
                .map(|c| {
                    let z = self.data[(r, c)];
                    [z.re, z.im]
                })
                .collect();
            rows.serialize_element(&row)?;
        }
        rows.end()
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(deserializer)?;
        if rows.is_empty() {
            return Err(de::Error::custom("matrix must have at least one row"));
        }
        let cols = rows[0].len();
        if cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(de::Error::custom(
                "matrix rows must be nonempty and equally long",
            ));
        }
        let entries: Vec<Complex64> = rows
            .iter()
            .flatten()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        ComplexMatrix::new(rows.len(), cols, entries).map_err(|e| de::Error::custom(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_entries() {
        let bad = vec![Complex64::new(f64::NAN, 0.0)];
        assert!(matches!(
            ComplexMatrix::new(1, 1, bad),
            Err(Error::NonFinite)
        ));
    }

    #[test]
    fn row_major_layout() {
        let m = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.get(0, 1).re, 2.0);
        assert_eq!(m.get(1, 0).re, 3.0);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = ComplexMatrix::new(
            2,
            2,
            vec![
                Complex64::new(0.1 + 0.2, -1.0 / 3.0),
                Complex64::new(f64::MIN_POSITIVE, 1e300),
                Complex64::new(-0.0, 2.2e-16),
                Complex64::new(1.0, 0.0),
            ],
        )
        .unwrap();
        let text = serde_json::to_string(&m).unwrap();
        let back: ComplexMatrix = serde_json::from_str(&text).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert_eq!(m.get(r, c).re.to_bits(), back.get(r, c).re.to_bits());
                assert_eq!(m.get(r, c).im.to_bits(), back.get(r, c).im.to_bits());
            }
        }
    }

    #[test]
    fn operator_norm_of_projection_is_one() {
        let p = ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((p.operator_norm() - 1.0).abs() < 1e-12);
    }
}
