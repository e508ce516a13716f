//! The lift frame `F` and the coordinate maps between `R^{nr-r}` and lifts.
//!
//! `F` is block diagonal with `r` blocks of size `(n-1) x n`. Block `i` holds
//! the Gram-Schmidt orthonormalization, against `phi_i`, of the standard-basis
//! rows `e_j^T` with `j != argmax |phi_i|`, taken in increasing `j`.
//!
//! The Gram-Schmidt rows have a closed form, so `F` is never materialized.
//! Write `p` for the pivot index, `o_0 < o_1 < ...` for the remaining indices
//! and `R_k = phi_p^2 + sum_{l >= k} phi_{o_l}^2`. Row `k` has
//! `sqrt(R_{k+1} / R_k)` at `o_k`, `-phi_{o_k} phi_m / sqrt(R_k R_{k+1})` at
//! every later index `m` (the `o_l` with `l > k`, and `p`), and zeros before.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::pod::StiefelBasis;

/// Squared row norm below which a Gram-Schmidt step counts as a breakdown.
const BREAKDOWN_TOL: f64 = 1e-12;

/// Largest `|phi_i^T z_i|` accepted as horizontal on input.
pub const HORIZONTAL_TOL: f64 = 1e-6;

/// A horizontal lift `Z` (`n x r`), with `phi_i^T z_i = 0` for every column.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizontalLift(pub DMatrix<f64>);

/// Frame coordinates `y` in `R^{nr-r}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentCoordinates(pub DVector<f64>);

impl HorizontalLift {
    pub fn zeros(n: usize, r: usize) -> Self {
        Self(DMatrix::zeros(n, r))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

impl TangentCoordinates {
    pub fn zeros(m: usize) -> Self {
        Self(DVector::zeros(m))
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Block {
    pivot: usize,
    /// Indices other than the pivot, ascending.
    order: Vec<usize>,
    diag: Vec<f64>,
    coupling: Vec<f64>,
}

impl Block {
    fn build(phi: &[f64], block: usize) -> Result<Self> {
        let n = phi.len();
        let mut pivot = 0;
        for (i, v) in phi.iter().enumerate() {
            if v.abs() > phi[pivot].abs() {
                pivot = i;
            }
        }
        let order: Vec<usize> = (0..n).filter(|&j| j != pivot).collect();
        let mut diag = vec![0.0; n - 1];
        let mut coupling = vec![0.0; n - 1];
        let mut after = phi[pivot] * phi[pivot];
        for k in (0..n - 1).rev() {
            let x = phi[order[k]];
            let before = after + x * x;
            let d2 = after / before;
            if !(d2 >= BREAKDOWN_TOL) {
                return Err(Error::GramSchmidtBreakdown { block, row: k });
            }
            diag[k] = d2.sqrt();
            coupling[k] = x / (before * after).sqrt();
            after = before;
        }
        Ok(Self { pivot, order, diag, coupling })
    }

    /// `out = F_block z`.
    fn apply(&self, phi: &[f64], z: &[f64], out: &mut [f64]) {
        let mut tail = phi[self.pivot] * z[self.pivot];
        for k in (0..self.order.len()).rev() {
            let j = self.order[k];
            out[k] = self.diag[k] * z[j] - self.coupling[k] * tail;
            tail += phi[j] * z[j];
        }
    }

    /// `out = F_block^T y`.
    fn apply_transpose(&self, phi: &[f64], y: &[f64], out: &mut [f64]) {
        let mut head = 0.0;
        for (k, &j) in self.order.iter().enumerate() {
            out[j] = self.diag[k] * y[k] - phi[j] * head;
            head += self.coupling[k] * y[k];
        }
        out[self.pivot] = -phi[self.pivot] * head;
    }
}

/// The frame `F` attached to a basepoint basis `Phi`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftFrame {
    basepoint: StiefelBasis,
    blocks: Vec<Block>,
}

/// Builds the frame for `phi`; deterministic in `phi`.
pub fn build_lift_frame(phi: &StiefelBasis) -> Result<LiftFrame> {
    let blocks = phi
        .matrix()
        .column_iter()
        .enumerate()
        .map(|(i, col)| Block::build(col.as_slice(), i))
        .collect::<Result<_>>()?;
    Ok(LiftFrame { basepoint: phi.clone(), blocks })
}

impl LiftFrame {
    pub fn basepoint(&self) -> &StiefelBasis {
        &self.basepoint
    }

    pub fn n(&self) -> usize {
        self.basepoint.n()
    }

    pub fn r(&self) -> usize {
        self.basepoint.r()
    }

    /// Coordinate dimension `nr - r`.
    pub fn dim(&self) -> usize {
        self.r() * (self.n() - 1)
    }

    /// `F v` for `v` of length `nr`.
    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let (n, r) = (self.n(), self.r());
        if v.len() != n * r {
            return Err(Error::DimensionMismatch(format!("frame expects a vector of length {}, got {}", n * r, v.len())));
        }
        let mut out = DVector::zeros(self.dim());
        let phi = self.basepoint.matrix();
        for (i, block) in self.blocks.iter().enumerate() {
            let z = &v.as_slice()[i * n..(i + 1) * n];
            let y = &mut out.as_mut_slice()[i * (n - 1)..(i + 1) * (n - 1)];
            block.apply(phi.column(i).as_slice(), z, y);
        }
        Ok(out)
    }

    /// `F^T y` for `y` of length `nr - r`.
    pub fn apply_transpose(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let (n, r) = (self.n(), self.r());
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "frame expects coordinates of length {}, got {}",
                self.dim(),
                y.len()
            )));
        }
        let mut out = DVector::zeros(n * r);
        let phi = self.basepoint.matrix();
        for (i, block) in self.blocks.iter().enumerate() {
            let yi = &y.as_slice()[i * (n - 1)..(i + 1) * (n - 1)];
            let z = &mut out.as_mut_slice()[i * n..(i + 1) * n];
            block.apply_transpose(phi.column(i).as_slice(), yi, z);
        }
        Ok(out)
    }

    /// The explicit `(nr-r) x nr` matrix. Memory grows as `n^2 r^2`; meant
    /// for small instances and tests.
    pub fn dense(&self) -> DMatrix<f64> {
        let nr = self.n() * self.r();
        let mut f = DMatrix::zeros(self.dim(), nr);
        let mut e = DVector::zeros(nr);
        for j in 0..nr {
            e[j] = 1.0;
            let col = self.apply(&e).expect("length matches");
            f.set_column(j, &col);
            e[j] = 0.0;
        }
        f
    }

    /// `P1`: `Z = Mat_{n,r}(F^T y)`.
    pub fn to_lift(&self, y: &TangentCoordinates) -> Result<HorizontalLift> {
        let v = self.apply_transpose(&y.0)?;
        Ok(HorizontalLift(DMatrix::from_column_slice(self.n(), self.r(), v.as_slice())))
    }

    /// Inverse of `P1` on horizontal lifts: `y = F vec(Z)`.
    pub fn to_coords(&self, z: &HorizontalLift) -> Result<TangentCoordinates> {
        let phi = self.basepoint.matrix();
        if z.0.shape() != phi.shape() {
            return Err(Error::DimensionMismatch(format!(
                "lift is {}x{}, basepoint is {}x{}",
                z.0.nrows(),
                z.0.ncols(),
                phi.nrows(),
                phi.ncols()
            )));
        }
        let residual = diagonal_horizontality_defect(phi, &z.0);
        if !(residual <= HORIZONTAL_TOL) {
            return Err(Error::NotHorizontal { residual });
        }
        let v = DVector::from_column_slice(z.0.as_slice());
        self.apply(&v).map(TangentCoordinates)
    }
}

/// `max_i |phi_i^T z_i|`.
pub fn diagonal_horizontality_defect(phi: &DMatrix<f64>, z: &DMatrix<f64>) -> f64 {
    phi.column_iter().zip(z.column_iter()).map(|(p, q)| p.dot(&q).abs()).fold(0.0, f64::max)
}

pub fn coords_to_lift(frame: &LiftFrame, y: &TangentCoordinates) -> Result<HorizontalLift> {
    frame.to_lift(y)
}

pub fn lift_to_coords(frame: &LiftFrame, z: &HorizontalLift) -> Result<TangentCoordinates> {
    frame.to_coords(z)
}
