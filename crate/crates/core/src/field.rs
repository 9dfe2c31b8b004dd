//! DoF storage for scalar and vector DG fields.
//!
//! Layout: cell-major, then DoF, then component:
//! `data[(cell * ndof + l) * ncomp + c]`, with cells ordered x-fastest and
//! DoFs in the l1-fastest tensor order.

use crate::SpdgError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Staggering {
    Primal,
    Dual,
}

impl Staggering {
    pub fn opposite(self) -> Self {
        match self {
            Staggering::Primal => Staggering::Dual,
            Staggering::Dual => Staggering::Primal,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Staggering::Primal => 0,
            Staggering::Dual => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgField {
    staggering: Staggering,
    ncomp: usize,
    ncells: usize,
    ndof: usize,
    data: Vec<f64>,
}

impl DgField {
    pub fn zeros(staggering: Staggering, ncomp: usize, ncells: usize, ndof: usize) -> Self {
        Self {
            staggering,
            ncomp,
            ncells,
            ndof,
            data: vec![0.0; ncells * ndof * ncomp],
        }
    }

    pub fn from_data(
        staggering: Staggering,
        ncomp: usize,
        ncells: usize,
        ndof: usize,
        data: Vec<f64>,
    ) -> Result<Self, SpdgError> {
        if data.len() != ncells * ndof * ncomp {
            return Err(SpdgError::InvalidArgument(format!(
                "field data length {} does not match {ncells} cells x {ndof} dofs x {ncomp} components",
                data.len()
            )));
        }
        Ok(Self {
            staggering,
            ncomp,
            ncells,
            ndof,
            data,
        })
    }

    /// Same shape, zero data.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.staggering, self.ncomp, self.ncells, self.ndof)
    }

    pub fn staggering(&self) -> Staggering {
        self.staggering
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn ncells(&self) -> usize {
        self.ncells
    }

    pub fn ndof(&self) -> usize {
        self.ndof
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// All DoFs of one cell, `ndof * ncomp` values.
    pub fn cell(&self, cell: usize) -> &[f64] {
        let n = self.ndof * self.ncomp;
        &self.data[cell * n..(cell + 1) * n]
    }

    pub fn cell_mut(&mut self, cell: usize) -> &mut [f64] {
        let n = self.ndof * self.ncomp;
        &mut self.data[cell * n..(cell + 1) * n]
    }

    pub fn get(&self, cell: usize, l: usize, c: usize) -> f64 {
        self.data[(cell * self.ndof + l) * self.ncomp + c]
    }

    pub fn set(&mut self, cell: usize, l: usize, c: usize, v: f64) {
        self.data[(cell * self.ndof + l) * self.ncomp + c] = v;
    }

    pub fn same_shape(&self, other: &DgField) -> bool {
        self.staggering == other.staggering
            && self.ncomp == other.ncomp
            && self.ncells == other.ncells
            && self.ndof == other.ndof
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &DgField) {
        debug_assert!(self.same_shape(x));
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            *s += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    pub fn linf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Nodal maximum of the absolute value of component `c`.
    pub fn component_linf(&self, c: usize) -> f64 {
        self.data
            .iter()
            .skip(c)
            .step_by(self.ncomp)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
