//! Finite-volume assembly of the coupled matrix-fracture flow system.
//!
//! Per time layer the system reads `M (p^{n+1}-p^n)/tau + (A^n + Q^n) p^{n+1} = F`
//! over the stacked dof vector (matrix pressures, then fracture pressures).
//! The face coefficients factor into a linear transmissibility (Z, X, Y) and
//! a velocity-dependent damping factor `1 / (1 + rho*beta*k*|u|/mu)` lagged
//! from the previous layer.

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::sparse::{SparseMatrix, TripletBuffer};

/// Per-cell media properties of both continua.
#[derive(Debug, Clone)]
pub struct MediumParams {
    /// Permeability per matrix cell, positive.
    pub k_matrix: Vec<f64>,
    /// Forchheimer coefficient per matrix cell, nonnegative.
    pub beta_matrix: Vec<f64>,
    /// Permeability per fracture cell, positive.
    pub k_fracture: Vec<f64>,
    /// Forchheimer coefficient per fracture cell, nonnegative.
    pub beta_fracture: Vec<f64>,
    /// Matrix compressibility c_m, positive.
    pub c_matrix: f64,
    /// Fracture compressibility c_f, positive.
    pub c_fracture: f64,
}

impl MediumParams {
    pub fn new(
        k_matrix: Vec<f64>,
        beta_matrix: Vec<f64>,
        k_fracture: Vec<f64>,
        beta_fracture: Vec<f64>,
        c_matrix: f64,
        c_fracture: f64,
    ) -> Result<Self> {
        if k_matrix.len() != beta_matrix.len() || k_fracture.len() != beta_fracture.len() {
            return Err(Error::DimensionMismatch(
                "permeability and Forchheimer fields must have equal lengths".into(),
            ));
        }
        if k_matrix.iter().chain(&k_fracture).any(|&k| !(k > 0.0)) {
            return Err(Error::InvalidParameter("permeability must be positive".into()));
        }
        if beta_matrix.iter().chain(&beta_fracture).any(|&b| !(b >= 0.0)) {
            return Err(Error::InvalidParameter(
                "Forchheimer coefficient must be nonnegative".into(),
            ));
        }
        if !(c_matrix > 0.0) || !(c_fracture > 0.0) {
            return Err(Error::InvalidParameter("compressibility must be positive".into()));
        }
        Ok(Self {
            k_matrix,
            beta_matrix,
            k_fracture,
            beta_fracture,
            c_matrix,
            c_fracture,
        })
    }

    /// Derive the Forchheimer fields as `beta = scale / k` in both continua.
    pub fn from_forchheimer_scale(
        k_matrix: Vec<f64>,
        k_fracture: Vec<f64>,
        forchheimer_scale: f64,
        c_matrix: f64,
        c_fracture: f64,
    ) -> Result<Self> {
        if !(forchheimer_scale >= 0.0) {
            return Err(Error::InvalidParameter(
                "Forchheimer scale must be nonnegative".into(),
            ));
        }
        let beta_matrix = k_matrix.iter().map(|k| forchheimer_scale / k).collect();
        let beta_fracture = k_fracture.iter().map(|k| forchheimer_scale / k).collect();
        Self::new(
            k_matrix,
            beta_matrix,
            k_fracture,
            beta_fracture,
            c_matrix,
            c_fracture,
        )
    }

    /// True when the model degenerates to pure Darcy flow.
    pub fn is_linear(&self) -> bool {
        self.beta_matrix.iter().all(|&b| b == 0.0) && self.beta_fracture.iter().all(|&b| b == 0.0)
    }

    fn check_dims(&self, geom: &Geometry) -> Result<()> {
        if self.k_matrix.len() != geom.fine.n_cells()
            || self.k_fracture.len() != geom.fractures.n_cells()
        {
            return Err(Error::DimensionMismatch(format!(
                "media fields sized {}/{} vs geometry {}/{}",
                self.k_matrix.len(),
                self.k_fracture.len(),
                geom.fine.n_cells(),
                geom.fractures.n_cells()
            )));
        }
        Ok(())
    }
}

/// Fluid constants.
#[derive(Debug, Clone, Copy)]
pub struct FluidParams {
    pub viscosity: f64,
    pub density: f64,
}

impl FluidParams {
    pub fn new(viscosity: f64, density: f64) -> Result<Self> {
        if !(viscosity > 0.0) || !(density > 0.0) {
            return Err(Error::InvalidParameter(
                "viscosity and density must be positive".into(),
            ));
        }
        Ok(Self { viscosity, density })
    }
}

/// Cell-wise source rates; the right-hand side multiplies them by cell
/// measures.
#[derive(Debug, Clone)]
pub struct Sources {
    pub matrix: Vec<f64>,
    pub fracture: Vec<f64>,
}

impl Sources {
    pub fn zeros(geom: &Geometry) -> Self {
        Self {
            matrix: vec![0.0; geom.fine.n_cells()],
            fracture: vec![0.0; geom.fractures.n_cells()],
        }
    }
}

/// Velocity magnitudes |u| per matrix face, fracture adjacency, and coupling
/// pair, all nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceVelocities {
    pub matrix: Vec<f64>,
    pub fracture: Vec<f64>,
    pub coupling: Vec<f64>,
}

impl FaceVelocities {
    pub fn zeros(geom: &Geometry) -> Self {
        Self {
            matrix: vec![0.0; geom.fine.faces().len()],
            fracture: vec![0.0; geom.fractures.adjacency().len()],
            coupling: vec![0.0; geom.coupling.len()],
        }
    }

    fn check_dims(&self, geom: &Geometry) -> Result<()> {
        if self.matrix.len() != geom.fine.faces().len()
            || self.fracture.len() != geom.fractures.adjacency().len()
            || self.coupling.len() != geom.coupling.len()
        {
            return Err(Error::DimensionMismatch(
                "face velocities not dimensioned to geometry".into(),
            ));
        }
        Ok(())
    }
}

/// Linear face coefficients: Z per matrix face, X per fracture adjacency,
/// Y per coupling pair.
#[derive(Debug, Clone)]
pub struct Transmissibilities {
    pub matrix: Vec<f64>,
    pub fracture: Vec<f64>,
    pub coupling: Vec<f64>,
}

/// Assembled blocks of the stacked system.
#[derive(Debug, Clone)]
pub struct SystemBlocks {
    /// Diagonal mass block with entries c_m|cell| and c_f|cell|.
    pub mass: SparseMatrix,
    /// Flow block A^n (matrix and fracture sub-blocks).
    pub flow: SparseMatrix,
    /// Matrix-fracture transfer block Q^n.
    pub transfer: SparseMatrix,
    /// Source vector F.
    pub source: Vec<f64>,
}

/// Harmonic pairing 2/(1/a + 1/b) of two positive scalars.
pub fn harmonic_pair(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "harmonic pair needs positive arguments, got {} and {}",
            a, b
        )));
    }
    Ok(2.0 / (1.0 / a + 1.0 / b))
}

/// Harmonic pairing extended to nonnegative arguments: zero if either side
/// is zero (used for the Forchheimer fields, which vanish in the Darcy case).
fn harmonic_nonneg(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        2.0 / (1.0 / a + 1.0 / b)
    }
}

/// Velocity damping factor `1 / (1 + rho*beta*k*|u|/mu)`, in (0, 1].
pub fn forchheimer_factor(rho: f64, beta: f64, k: f64, u_abs: f64, mu: f64) -> Result<f64> {
    if !(rho >= 0.0) || !(beta >= 0.0) || !(u_abs >= 0.0) {
        return Err(Error::InvalidParameter(
            "Forchheimer factor needs nonnegative inputs".into(),
        ));
    }
    if !(mu > 0.0) || !(k > 0.0) {
        return Err(Error::InvalidParameter(
            "Forchheimer factor needs positive viscosity and permeability".into(),
        ));
    }
    Ok(1.0 / (1.0 + rho * beta * k * u_abs / mu))
}

/// Z_ij = k_ij |E_ij| / (mu d_ij), X = k / (mu d^f), Y = k* |gamma| / (mu theta),
/// with harmonic permeability pairs.
pub fn linear_transmissibilities(
    geom: &Geometry,
    params: &MediumParams,
    fluid: &FluidParams,
) -> Result<Transmissibilities> {
    params.check_dims(geom)?;
    let mu = fluid.viscosity;
    let mut matrix = Vec::with_capacity(geom.fine.faces().len());
    for face in geom.fine.faces() {
        let (i, j) = face.cells;
        let k = harmonic_pair(params.k_matrix[i], params.k_matrix[j])?;
        matrix.push(k * face.length / (mu * face.distance));
    }
    let mut fracture = Vec::with_capacity(geom.fractures.adjacency().len());
    for adj in geom.fractures.adjacency() {
        let (l, e) = adj.cells;
        let k = harmonic_pair(params.k_fracture[l], params.k_fracture[e])?;
        fracture.push(k / (mu * adj.distance));
    }
    let mut coupling = Vec::with_capacity(geom.coupling.len());
    for pair in geom.coupling.pairs() {
        let k = harmonic_pair(
            params.k_matrix[pair.matrix_cell],
            params.k_fracture[pair.fracture_cell],
        )?;
        coupling.push(k * pair.intersection_length / (mu * pair.distance));
    }
    Ok(Transmissibilities {
        matrix,
        fracture,
        coupling,
    })
}

/// Damping coefficients g = rho * beta_pair * k_pair / mu so that the face
/// factor is 1/(1 + g |u|).
fn damping_coefficients(
    geom: &Geometry,
    params: &MediumParams,
    fluid: &FluidParams,
) -> Transmissibilities {
    let scale = fluid.density / fluid.viscosity;
    let matrix = geom
        .fine
        .faces()
        .iter()
        .map(|face| {
            let (i, j) = face.cells;
            let beta = harmonic_nonneg(params.beta_matrix[i], params.beta_matrix[j]);
            let k = 2.0 / (1.0 / params.k_matrix[i] + 1.0 / params.k_matrix[j]);
            scale * beta * k
        })
        .collect();
    let fracture = geom
        .fractures
        .adjacency()
        .iter()
        .map(|adj| {
            let (l, e) = adj.cells;
            let beta = harmonic_nonneg(params.beta_fracture[l], params.beta_fracture[e]);
            let k = 2.0 / (1.0 / params.k_fracture[l] + 1.0 / params.k_fracture[e]);
            scale * beta * k
        })
        .collect();
    let coupling = geom
        .coupling
        .pairs()
        .iter()
        .map(|pair| {
            let beta = harmonic_nonneg(
                params.beta_matrix[pair.matrix_cell],
                params.beta_fracture[pair.fracture_cell],
            );
            let k = 2.0
                / (1.0 / params.k_matrix[pair.matrix_cell]
                    + 1.0 / params.k_fracture[pair.fracture_cell]);
            scale * beta * k
        })
        .collect();
    Transmissibilities {
        matrix,
        fracture,
        coupling,
    }
}

/// Assemble M, A^n, Q^n, F. `velocities: None` selects the pure Darcy path
/// with no damping factors; with velocities present the factors are computed
/// from the given (lagged) magnitudes.
pub fn assemble_blocks(
    geom: &Geometry,
    params: &MediumParams,
    fluid: &FluidParams,
    velocities: Option<&FaceVelocities>,
    sources: &Sources,
) -> Result<SystemBlocks> {
    params.check_dims(geom)?;
    if let Some(v) = velocities {
        v.check_dims(geom)?;
    }
    if sources.matrix.len() != geom.fine.n_cells()
        || sources.fracture.len() != geom.fractures.n_cells()
    {
        return Err(Error::DimensionMismatch(
            "sources not dimensioned to geometry".into(),
        ));
    }

    let n_m = geom.fine.n_cells();
    let n = geom.n_dofs();
    let trans = linear_transmissibilities(geom, params, fluid)?;
    let damping = velocities.map(|_| damping_coefficients(geom, params, fluid));

    let factor = |idx: usize, field: fn(&Transmissibilities) -> &Vec<f64>,
                  vel: fn(&FaceVelocities) -> &Vec<f64>| {
        match (&damping, velocities) {
            (Some(g), Some(v)) => 1.0 / (1.0 + field(g)[idx] * vel(v)[idx]),
            _ => 1.0,
        }
    };

    let mut flow = TripletBuffer::with_capacity(
        n,
        n,
        4 * (trans.matrix.len() + trans.fracture.len()),
    );
    for (idx, face) in geom.fine.faces().iter().enumerate() {
        let t = trans.matrix[idx] * factor(idx, |t| &t.matrix, |v| &v.matrix);
        let (i, j) = face.cells;
        flow.push(i, i, t);
        flow.push(j, j, t);
        flow.push(i, j, -t);
        flow.push(j, i, -t);
    }
    for (idx, adj) in geom.fractures.adjacency().iter().enumerate() {
        let w = trans.fracture[idx] * factor(idx, |t| &t.fracture, |v| &v.fracture);
        let (l, e) = (n_m + adj.cells.0, n_m + adj.cells.1);
        flow.push(l, l, w);
        flow.push(e, e, w);
        flow.push(l, e, -w);
        flow.push(e, l, -w);
    }

    let mut transfer = TripletBuffer::with_capacity(n, n, 4 * trans.coupling.len());
    for (idx, pair) in geom.coupling.pairs().iter().enumerate() {
        let sigma = trans.coupling[idx] * factor(idx, |t| &t.coupling, |v| &v.coupling);
        let i = pair.matrix_cell;
        let l = n_m + pair.fracture_cell;
        transfer.push(i, i, sigma);
        transfer.push(l, l, sigma);
        transfer.push(i, l, -sigma);
        transfer.push(l, i, -sigma);
    }

    let mut mass_diag = Vec::with_capacity(n);
    let mut source = Vec::with_capacity(n);
    for i in 0..n_m {
        let area = geom.fine.cell_area(i);
        mass_diag.push(params.c_matrix * area);
        source.push(sources.matrix[i] * area);
    }
    for l in 0..geom.fractures.n_cells() {
        let length = geom.fractures.cell(l).length;
        mass_diag.push(params.c_fracture * length);
        source.push(sources.fracture[l] * length);
    }

    Ok(SystemBlocks {
        mass: SparseMatrix::diagonal(&mass_diag),
        flow: flow.finalize(),
        transfer: transfer.finalize(),
        source,
    })
}

/// Lagged-factor velocity magnitudes from a pressure state:
/// `|u|_ij = factor(prev)_ij * (k_ij/mu) * |p_i - p_j| / d_ij` per matrix
/// face, and the analogous expressions on fracture adjacencies (X geometry)
/// and coupling pairs (k*, theta).
pub fn compute_face_velocities(
    geom: &Geometry,
    params: &MediumParams,
    fluid: &FluidParams,
    pressures: &[f64],
    previous: &FaceVelocities,
) -> Result<FaceVelocities> {
    params.check_dims(geom)?;
    previous.check_dims(geom)?;
    if pressures.len() != geom.n_dofs() {
        return Err(Error::DimensionMismatch(format!(
            "pressure vector length {} vs {} dofs",
            pressures.len(),
            geom.n_dofs()
        )));
    }
    let n_m = geom.fine.n_cells();
    let mu = fluid.viscosity;
    let damping = damping_coefficients(geom, params, fluid);

    let mut matrix = Vec::with_capacity(geom.fine.faces().len());
    for (idx, face) in geom.fine.faces().iter().enumerate() {
        let (i, j) = face.cells;
        let k = 2.0 / (1.0 / params.k_matrix[i] + 1.0 / params.k_matrix[j]);
        let rho_factor = 1.0 / (1.0 + damping.matrix[idx] * previous.matrix[idx]);
        matrix.push(rho_factor * (k / mu) * (pressures[i] - pressures[j]).abs() / face.distance);
    }
    let mut fracture = Vec::with_capacity(geom.fractures.adjacency().len());
    for (idx, adj) in geom.fractures.adjacency().iter().enumerate() {
        let (l, e) = adj.cells;
        let k = 2.0 / (1.0 / params.k_fracture[l] + 1.0 / params.k_fracture[e]);
        let w_factor = 1.0 / (1.0 + damping.fracture[idx] * previous.fracture[idx]);
        fracture.push(
            w_factor * (k / mu) * (pressures[n_m + l] - pressures[n_m + e]).abs() / adj.distance,
        );
    }
    let mut coupling = Vec::with_capacity(geom.coupling.len());
    for (idx, pair) in geom.coupling.pairs().iter().enumerate() {
        let k = 2.0
            / (1.0 / params.k_matrix[pair.matrix_cell]
                + 1.0 / params.k_fracture[pair.fracture_cell]);
        let d_factor = 1.0 / (1.0 + damping.coupling[idx] * previous.coupling[idx]);
        let dp = (pressures[pair.matrix_cell] - pressures[n_m + pair.fracture_cell]).abs();
        coupling.push(d_factor * (k / mu) * dp / pair.distance);
    }
    Ok(FaceVelocities {
        matrix,
        fracture,
        coupling,
    })
}
