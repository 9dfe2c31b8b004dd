//! Periodic corner-staggered Cartesian topology.
//!
//! Indices are zero-based. Primal cell `i` spans `[x_min + i·Δx, x_min + (i+1)·Δx]`;
//! dual cell `j` is centred on the primal corner `x_min + (j+1)·Δx`, so it spans
//! `[x_min + (j+½)·Δx, x_min + (j+3/2)·Δx]`.
//!
//! Corner offsets `m ∈ {−1,+1}³` are enumerated by `id = b1 + 2·b2 + 4·b3`
//! with `b_d = 1` iff `m_d = +1`; id 0 is `(−,−,−)` and id 7 is `(+,+,+)`.

use crate::basis::NodalBasis;
use crate::field::Staggering;
use crate::SpdgError;

/// One of the eight corners of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CornerOffset {
    pub m: [i8; 3],
}

impl CornerOffset {
    pub const ALL: [CornerOffset; 8] = {
        let mut all = [CornerOffset { m: [0; 3] }; 8];
        let mut id = 0;
        while id < 8 {
            all[id] = CornerOffset::from_id(id);
            id += 1;
        }
        all
    };

    pub const fn from_id(id: usize) -> Self {
        let mut m = [-1i8; 3];
        let mut d = 0;
        while d < 3 {
            if (id >> d) & 1 == 1 {
                m[d] = 1;
            }
            d += 1;
        }
        CornerOffset { m }
    }

    pub fn id(self) -> usize {
        (0..3).map(|d| usize::from(self.m[d] > 0) << d).sum()
    }

    pub fn neg(self) -> Self {
        CornerOffset {
            m: [-self.m[0], -self.m[1], -self.m[2]],
        }
    }
}

/// A cell on either grid, with unwrapped indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellRef {
    pub staggering: Staggering,
    pub index: [i64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredGrid {
    lower: [f64; 3],
    upper: [f64; 3],
    counts: [usize; 3],
    spacing: [f64; 3],
}

impl StaggeredGrid {
    pub fn new(lower: [f64; 3], upper: [f64; 3], counts: [usize; 3]) -> Result<Self, SpdgError> {
        let mut spacing = [0.0; 3];
        for d in 0..3 {
            if counts[d] == 0 {
                return Err(SpdgError::InvalidArgument("cell counts must be positive".into()));
            }
            if !(upper[d] > lower[d]) || !lower[d].is_finite() || !upper[d].is_finite() {
                return Err(SpdgError::InvalidArgument(format!(
                    "bounds in direction {d} must be finite with upper > lower"
                )));
            }
            spacing[d] = (upper[d] - lower[d]) / counts[d] as f64;
        }
        Ok(Self {
            lower,
            upper,
            counts,
            spacing,
        })
    }

    /// Cube `[lo, hi]³` with `n³` cells.
    pub fn cube(lo: f64, hi: f64, n: usize) -> Result<Self, SpdgError> {
        Self::new([lo; 3], [hi; 3], [n; 3])
    }

    pub fn lower(&self) -> [f64; 3] {
        self.lower
    }

    pub fn upper(&self) -> [f64; 3] {
        self.upper
    }

    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn domain_volume(&self) -> f64 {
        (0..3).map(|d| self.upper[d] - self.lower[d]).product()
    }

    pub fn n_cells(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn h_min(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn h_max(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    pub fn wrap(&self, index: [i64; 3]) -> [usize; 3] {
        let mut w = [0; 3];
        for d in 0..3 {
            w[d] = index[d].rem_euclid(self.counts[d] as i64) as usize;
        }
        w
    }

    /// Linear storage id of a wrapped index, x fastest.
    pub fn cell_id(&self, index: [usize; 3]) -> usize {
        index[0] + self.counts[0] * (index[1] + self.counts[1] * index[2])
    }

    pub fn cell_index(&self, id: usize) -> [usize; 3] {
        let [nx, ny, _] = self.counts;
        [id % nx, (id / nx) % ny, id / (nx * ny)]
    }

    /// Physical position of the low corner of `cell`'s reference cube.
    pub fn cell_origin(&self, cell: CellRef) -> [f64; 3] {
        let shift = match cell.staggering {
            Staggering::Primal => 0.0,
            Staggering::Dual => 0.5,
        };
        let mut o = [0.0; 3];
        for d in 0..3 {
            o[d] = self.lower[d] + (cell.index[d] as f64 + shift) * self.spacing[d];
        }
        o
    }

    /// Affine map to `cell`'s reference cube. Points outside the cell map
    /// outside `[0,1]³`.
    pub fn ref_coords(&self, cell: CellRef, x: [f64; 3]) -> [f64; 3] {
        let o = self.cell_origin(cell);
        let mut xi = [0.0; 3];
        for d in 0..3 {
            xi[d] = (x[d] - o[d]) / self.spacing[d];
        }
        xi
    }

    pub fn physical(&self, cell: CellRef, xi: [f64; 3]) -> [f64; 3] {
        let o = self.cell_origin(cell);
        let mut x = [0.0; 3];
        for d in 0..3 {
            x[d] = o[d] + xi[d] * self.spacing[d];
        }
        x
    }

    /// Opposite-staggering cell sharing the corner `m` of `cell`. The result
    /// is wrapped into range.
    pub fn corner_neighbor(&self, cell: CellRef, m: CornerOffset) -> CellRef {
        let mut idx = [0i64; 3];
        for d in 0..3 {
            let md = m.m[d] as i64;
            idx[d] = match cell.staggering {
                Staggering::Primal => cell.index[d] + (md - 1) / 2,
                Staggering::Dual => cell.index[d] + (md + 1) / 2,
            };
        }
        let w = self.wrap(idx);
        CellRef {
            staggering: cell.staggering.opposite(),
            index: [w[0] as i64, w[1] as i64, w[2] as i64],
        }
    }

    pub fn node_location(&self, cell: CellRef, basis: &NodalBasis, l: usize) -> [f64; 3] {
        self.physical(cell, basis.node_coords(l))
    }

    /// For every cell id, the ids of its eight corner neighbours, ordered by
    /// corner id. Identical for both staggerings up to the index shift, so
    /// it is tabulated per staggering of the *target*.
    pub fn neighbor_table(&self, target: Staggering) -> Vec<[usize; 8]> {
        (0..self.n_cells())
            .map(|id| {
                let idx = self.cell_index(id);
                let cell = CellRef {
                    staggering: target,
                    index: [idx[0] as i64, idx[1] as i64, idx[2] as i64],
                };
                let mut out = [0usize; 8];
                for m in CornerOffset::ALL {
                    let n = self.corner_neighbor(cell, m);
                    out[m.id()] = self.cell_id(self.wrap(n.index));
                }
                out
            })
            .collect()
    }
}
