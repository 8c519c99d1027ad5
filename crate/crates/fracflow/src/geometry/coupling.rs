use super::fine::FineMesh;
use super::fracture::FractureMesh;
use crate::error::{Error, Result};

/// Matrix-fracture intersection data for one fracture cell.
#[derive(Debug, Clone, Copy)]
pub struct Coupling {
    pub matrix_cell: usize,
    pub fracture_cell: usize,
    /// Intersection length |γ_il|; equals the fracture cell length because
    /// fracture cells conform to matrix cells.
    pub intersection_length: f64,
    /// Distance θ_il between matrix centroid and fracture midpoint, clamped
    /// below by h/4 to avoid the zero-distance singularity of a fracture
    /// passing through the centroid.
    pub distance: f64,
}

impl Coupling {
    /// Connectivity index C_il = |γ_il| / θ_il.
    pub fn connectivity_index(&self) -> f64 {
        self.intersection_length / self.distance
    }
}

/// One coupling pair per fracture cell, indexed by fracture cell.
#[derive(Debug, Clone, Default)]
pub struct CouplingMap {
    pairs: Vec<Coupling>,
}

impl CouplingMap {
    pub fn pairs(&self) -> &[Coupling] {
        &self.pairs
    }

    pub fn pair(&self, l: usize) -> &Coupling {
        &self.pairs[l]
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Pair every fracture cell with its containing matrix cell.
pub fn compute_coupling(fm: &FineMesh, fr: &FractureMesh) -> Result<CouplingMap> {
    let clamp = 0.25 * fm.hx().min(fm.hy());
    let tol = 1e-9 * (fm.hx() * fm.hx() + fm.hy() * fm.hy()).sqrt();
    let mut pairs = Vec::with_capacity(fr.n_cells());
    for (l, cell) in fr.cells().iter().enumerate() {
        let i = fm.cell_containing(cell.midpoint.0, cell.midpoint.1);
        let (ix, iy) = fm.cell_coords(i);
        let (x_lo, y_lo) = (ix as f64 * fm.hx(), iy as f64 * fm.hy());
        let (x_hi, y_hi) = (x_lo + fm.hx(), y_lo + fm.hy());
        for p in [cell.start, cell.end] {
            if p.0 < x_lo - tol || p.0 > x_hi + tol || p.1 < y_lo - tol || p.1 > y_hi + tol {
                return Err(Error::InvalidFracture(format!(
                    "fracture cell {} straddles matrix cells",
                    l
                )));
            }
        }
        let centroid = fm.centroid(i);
        let raw = ((centroid.0 - cell.midpoint.0).powi(2)
            + (centroid.1 - cell.midpoint.1).powi(2))
        .sqrt();
        pairs.push(Coupling {
            matrix_cell: i,
            fracture_cell: l,
            intersection_length: cell.length,
            distance: raw.max(clamp),
        });
    }
    Ok(CouplingMap { pairs })
}
