use std::collections::HashMap;

use super::fine::FineMesh;
use super::fracture::FractureMesh;
use crate::error::{Error, Result};

/// Connected piece of a fracture network restricted to one coarse cell.
/// Each piece carries its own coarse degree of freedom.
#[derive(Debug, Clone)]
pub struct LocalNetwork {
    /// Member fracture cells, ascending.
    pub fracture_cells: Vec<usize>,
    /// Total length |γ_j^(l)|.
    pub length: f64,
}

#[derive(Debug, Clone)]
pub struct CoarseCell {
    /// Member fine matrix cells, ascending.
    pub fine_cells: Vec<usize>,
    /// Area |K_j|.
    pub area: f64,
    /// Local fracture networks, ordered by smallest member cell.
    pub networks: Vec<LocalNetwork>,
}

/// Coarse grid over the fine mesh with one matrix dof per coarse cell plus
/// one fracture dof per (cell, local network) pair.
///
/// Dof enumeration: matrix dofs first in row-major coarse-cell order, then
/// fracture dofs ordered by (cell, local network id).
#[derive(Debug, Clone)]
pub struct CoarseGrid {
    nx: usize,
    ny: usize,
    block_nx: usize,
    block_ny: usize,
    fine_nx: usize,
    cells: Vec<CoarseCell>,
    /// Global fracture dof -> (coarse cell, local network id).
    fracture_dofs: Vec<(usize, usize)>,
    /// Coarse cell -> its global fracture dof ids (by local network id).
    cell_fracture_dofs: Vec<Vec<usize>>,
    /// Fine fracture cell -> global fracture dof.
    fracture_cell_dof: Vec<usize>,
}

impl CoarseGrid {
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Total coarse dof count N_c + sum of L_j.
    pub fn n_dofs(&self) -> usize {
        self.n_cells() + self.fracture_dofs.len()
    }

    pub fn cell(&self, j: usize) -> &CoarseCell {
        &self.cells[j]
    }

    pub fn cells(&self) -> &[CoarseCell] {
        &self.cells
    }

    pub fn cell_index(&self, cx: usize, cy: usize) -> usize {
        debug_assert!(cx < self.nx && cy < self.ny);
        cy * self.nx + cx
    }

    pub fn cell_coords(&self, j: usize) -> (usize, usize) {
        (j % self.nx, j / self.nx)
    }

    /// Coarse cell containing a fine matrix cell.
    pub fn coarse_of_fine(&self, fine: usize) -> usize {
        let ix = fine % self.fine_nx;
        let iy = fine / self.fine_nx;
        self.cell_index(ix / self.block_nx, iy / self.block_ny)
    }

    pub fn fracture_dofs(&self) -> &[(usize, usize)] {
        &self.fracture_dofs
    }

    /// Global fracture dof ids of one coarse cell, by local network id.
    pub fn cell_fracture_dofs(&self, j: usize) -> &[usize] {
        &self.cell_fracture_dofs[j]
    }

    /// Global fracture dof of a fine fracture cell.
    pub fn fracture_dof_of_cell(&self, l: usize) -> usize {
        self.fracture_cell_dof[l]
    }
}

/// Assign fine cells to coarse cells by containment and split each coarse
/// cell's fracture cells into endpoint-connected local networks.
pub fn build_coarse_grid(
    fm: &FineMesh,
    fr: &FractureMesh,
    nx: usize,
    ny: usize,
) -> Result<CoarseGrid> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidMesh("coarse cell counts must be positive".into()));
    }
    if fm.nx() % nx != 0 || fm.ny() % ny != 0 {
        return Err(Error::InvalidMesh(format!(
            "fine grid {}x{} not divisible by coarse grid {}x{}",
            fm.nx(),
            fm.ny(),
            nx,
            ny
        )));
    }
    let block_nx = fm.nx() / nx;
    let block_ny = fm.ny() / ny;
    let n_coarse = nx * ny;

    let mut fine_members: Vec<Vec<usize>> = vec![Vec::with_capacity(block_nx * block_ny); n_coarse];
    for i in 0..fm.n_cells() {
        let (ix, iy) = fm.cell_coords(i);
        let j = (iy / block_ny) * nx + ix / block_nx;
        fine_members[j].push(i);
    }

    // coarse cell of each fracture cell follows from its containing matrix cell
    let frac_home: Vec<usize> = fr
        .cells()
        .iter()
        .map(|c| {
            let i = fm.cell_containing(c.midpoint.0, c.midpoint.1);
            let (ix, iy) = fm.cell_coords(i);
            (iy / block_ny) * nx + ix / block_nx
        })
        .collect();

    // local networks: connected components of the adjacency restricted to one
    // coarse cell
    let mut parent: Vec<usize> = (0..fr.n_cells()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for adj in fr.adjacency() {
        let (a, b) = adj.cells;
        if frac_home[a] == frac_home[b] {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut networks_by_cell: Vec<Vec<LocalNetwork>> = vec![Vec::new(); n_coarse];
    let mut root_to_slot: HashMap<usize, (usize, usize)> = HashMap::new();
    for l in 0..fr.n_cells() {
        let root = find(&mut parent, l);
        let j = frac_home[l];
        let slot = *root_to_slot.entry(root).or_insert_with(|| {
            networks_by_cell[j].push(LocalNetwork {
                fracture_cells: Vec::new(),
                length: 0.0,
            });
            (j, networks_by_cell[j].len() - 1)
        });
        networks_by_cell[slot.0][slot.1].fracture_cells.push(l);
        networks_by_cell[slot.0][slot.1].length += fr.cell(l).length;
    }

    let mut cells = Vec::with_capacity(n_coarse);
    for j in 0..n_coarse {
        let area = fine_members[j].len() as f64 * fm.cell_area(0);
        cells.push(CoarseCell {
            fine_cells: std::mem::take(&mut fine_members[j]),
            area,
            networks: std::mem::take(&mut networks_by_cell[j]),
        });
    }

    let mut fracture_dofs = Vec::new();
    let mut cell_fracture_dofs = vec![Vec::new(); n_coarse];
    let mut fracture_cell_dof = vec![usize::MAX; fr.n_cells()];
    for (j, cell) in cells.iter().enumerate() {
        for (m, network) in cell.networks.iter().enumerate() {
            let dof = fracture_dofs.len();
            fracture_dofs.push((j, m));
            cell_fracture_dofs[j].push(dof);
            for &l in &network.fracture_cells {
                fracture_cell_dof[l] = dof;
            }
        }
    }

    Ok(CoarseGrid {
        nx,
        ny,
        block_nx,
        block_ny,
        fine_nx: fm.nx(),
        cells,
        fracture_dofs,
        cell_fracture_dofs,
        fracture_cell_dof,
    })
}

/// Oversampled local domain K_i^+: all coarse cells within Chebyshev
/// distance S of the center cell, clipped to the grid.
#[derive(Debug, Clone)]
pub struct OversampledRegion {
    pub center: usize,
    pub layers: usize,
    /// Member coarse cells, ascending.
    pub coarse_cells: Vec<usize>,
    /// Induced fine matrix cells, ascending.
    pub matrix_cells: Vec<usize>,
    /// Induced fracture cells, ascending.
    pub fracture_cells: Vec<usize>,
}

impl OversampledRegion {
    pub fn local_matrix_index(&self, global: usize) -> Option<usize> {
        self.matrix_cells.binary_search(&global).ok()
    }

    pub fn local_fracture_index(&self, global: usize) -> Option<usize> {
        self.fracture_cells.binary_search(&global).ok()
    }

    pub fn contains_coarse(&self, j: usize) -> bool {
        self.coarse_cells.binary_search(&j).is_ok()
    }

    /// Flow unknowns of the local problem (matrix part then fracture part).
    pub fn n_flow_dofs(&self) -> usize {
        self.matrix_cells.len() + self.fracture_cells.len()
    }
}

/// Grow the S-layer neighborhood of coarse cell `center`.
pub fn oversample(cg: &CoarseGrid, center: usize, layers: usize) -> Result<OversampledRegion> {
    if layers == 0 {
        return Err(Error::InvalidParameter(
            "oversampling needs at least one layer".into(),
        ));
    }
    if center >= cg.n_cells() {
        return Err(Error::InvalidParameter(format!(
            "coarse cell {} out of range",
            center
        )));
    }
    let (cx, cy) = cg.cell_coords(center);
    let s = layers as isize;
    let x_lo = (cx as isize - s).max(0) as usize;
    let x_hi = ((cx as isize + s) as usize).min(cg.nx() - 1);
    let y_lo = (cy as isize - s).max(0) as usize;
    let y_hi = ((cy as isize + s) as usize).min(cg.ny() - 1);

    let mut coarse_cells = Vec::with_capacity((x_hi - x_lo + 1) * (y_hi - y_lo + 1));
    let mut matrix_cells = Vec::new();
    let mut fracture_cells = Vec::new();
    for gy in y_lo..=y_hi {
        for gx in x_lo..=x_hi {
            let j = cg.cell_index(gx, gy);
            coarse_cells.push(j);
            matrix_cells.extend_from_slice(&cg.cell(j).fine_cells);
            for network in &cg.cell(j).networks {
                fracture_cells.extend_from_slice(&network.fracture_cells);
            }
        }
    }
    matrix_cells.sort_unstable();
    fracture_cells.sort_unstable();

    Ok(OversampledRegion {
        center,
        layers,
        coarse_cells,
        matrix_cells,
        fracture_cells,
    })
}
