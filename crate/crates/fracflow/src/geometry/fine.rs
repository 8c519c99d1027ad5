use crate::error::{Error, Result};

/// Interior face between two matrix cells; boundary faces are never stored
/// (the outer boundary is no-flux and never assembled).
#[derive(Debug, Clone, Copy)]
pub struct Face {
    /// Neighbor cell pair, lower index first.
    pub cells: (usize, usize),
    /// Facet length |E_ij|.
    pub length: f64,
    /// Distance between cell centroids d_ij.
    pub distance: f64,
}

/// Uniform rectangular-cell mesh over `[0, lx] x [0, ly]`.
///
/// Cells are indexed row-major with x fastest: `i = iy * nx + ix`.
#[derive(Debug, Clone)]
pub struct FineMesh {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    hx: f64,
    hy: f64,
    faces: Vec<Face>,
}

/// Build a uniform mesh with `nx * ny` rectangular cells.
pub fn build_fine_mesh(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<FineMesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidMesh(format!(
            "cell counts must be positive, got {}x{}",
            nx, ny
        )));
    }
    if !(lx > 0.0) || !(ly > 0.0) {
        return Err(Error::InvalidMesh(format!(
            "domain extents must be positive, got {} x {}",
            lx, ly
        )));
    }
    let hx = lx / nx as f64;
    let hy = ly / ny as f64;
    let mut faces = Vec::with_capacity((nx - 1) * ny + nx * (ny - 1));
    // vertical facets between x-neighbors, then horizontal facets between
    // y-neighbors; the order fixes the face enumeration
    for iy in 0..ny {
        for ix in 0..nx - 1 {
            let i = iy * nx + ix;
            faces.push(Face {
                cells: (i, i + 1),
                length: hy,
                distance: hx,
            });
        }
    }
    for iy in 0..ny - 1 {
        for ix in 0..nx {
            let i = iy * nx + ix;
            faces.push(Face {
                cells: (i, i + nx),
                length: hx,
                distance: hy,
            });
        }
    }
    Ok(FineMesh {
        nx,
        ny,
        lx,
        ly,
        hx,
        hy,
        faces,
    })
}

impl FineMesh {
    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    /// Cell area |ς_i| (uniform).
    pub fn cell_area(&self, _i: usize) -> f64 {
        self.hx * self.hy
    }

    pub fn domain_area(&self) -> f64 {
        self.lx * self.ly
    }

    pub fn cell_index(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.nx && iy < self.ny);
        iy * self.nx + ix
    }

    pub fn cell_coords(&self, i: usize) -> (usize, usize) {
        (i % self.nx, i / self.nx)
    }

    pub fn centroid(&self, i: usize) -> (f64, f64) {
        let (ix, iy) = self.cell_coords(i);
        ((ix as f64 + 0.5) * self.hx, (iy as f64 + 0.5) * self.hy)
    }

    /// Cell containing a point; points on a shared edge go to the higher
    /// cell, points on the outer boundary are clamped inward.
    pub fn cell_containing(&self, x: f64, y: f64) -> usize {
        let ix = ((x / self.hx).floor() as isize).clamp(0, self.nx as isize - 1) as usize;
        let iy = ((y / self.hy).floor() as isize).clamp(0, self.ny as isize - 1) as usize;
        self.cell_index(ix, iy)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let tol = 1e-12 * self.lx.max(self.ly);
        (-tol..=self.lx + tol).contains(&x) && (-tol..=self.ly + tol).contains(&y)
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }
}
