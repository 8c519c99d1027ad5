//! Discrete geometry for the two-continuum model: the matrix fine grid, the
//! lower-dimensional fracture mesh, their embedded-fracture coupling data, and
//! the coarse grid with oversampled local domains.
//!
//! Everything here is immutable after construction and safe to share across
//! worker threads.

mod coarse;
mod coupling;
mod fine;
mod fracture;

pub use coarse::{build_coarse_grid, oversample, CoarseCell, CoarseGrid, LocalNetwork, OversampledRegion};
pub use coupling::{compute_coupling, Coupling, CouplingMap};
pub use fine::{build_fine_mesh, Face, FineMesh};
pub use fracture::{build_fracture_mesh, FractureAdjacency, FractureCell, FractureMesh, Segment};

use crate::error::Result;

/// Matrix mesh, fracture mesh, and their coupling, bundled for assembly.
///
/// The stacked degree-of-freedom vector is ordered matrix cells first, then
/// fracture cells.
pub struct Geometry {
    pub fine: FineMesh,
    pub fractures: FractureMesh,
    pub coupling: CouplingMap,
}

impl Geometry {
    pub fn new(fine: FineMesh, fractures: FractureMesh) -> Result<Self> {
        let coupling = compute_coupling(&fine, &fractures)?;
        Ok(Self {
            fine,
            fractures,
            coupling,
        })
    }

    /// Total stacked dof count (matrix cells + fracture cells).
    pub fn n_dofs(&self) -> usize {
        self.fine.n_cells() + self.fractures.n_cells()
    }

    /// Global dof of a fracture cell in the stacked vector.
    pub fn fracture_dof(&self, l: usize) -> usize {
        self.fine.n_cells() + l
    }
}
