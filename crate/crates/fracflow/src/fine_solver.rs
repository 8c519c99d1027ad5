//! Backward-Euler time stepping of the coupled fine-grid system, producing
//! the reference solution.
//!
//! Each layer solves `(M/tau + A^n + Q^n) p^{n+1} = F + M p^n / tau` with the
//! damping factors lagged to the previous layer's face velocities; the first
//! step starts from zero velocities and is therefore pure Darcy. No Picard
//! sub-iteration is performed inside a step.

use crate::assembly::{
    assemble_blocks, compute_face_velocities, FaceVelocities, FluidParams, MediumParams, Sources,
    SystemBlocks,
};
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::sparse::{Factorization, SparseMatrix};

/// Uniform time grid with step `tau` and `n_steps` layers.
#[derive(Debug, Clone, Copy)]
pub struct TimeGrid {
    pub tau: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(tau: f64, n_steps: usize) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter("time step must be positive".into()));
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter("need at least one time layer".into()));
        }
        Ok(Self { tau, n_steps })
    }

    pub fn t_max(&self) -> f64 {
        self.tau * self.n_steps as f64
    }
}

/// Stacked pressure vector (matrix cells, then fracture cells) at one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureState {
    pub layer: usize,
    pub time: f64,
    pub values: Vec<f64>,
}

impl PressureState {
    pub fn initial(values: Vec<f64>) -> Self {
        Self {
            layer: 0,
            time: 0.0,
            values,
        }
    }

    pub fn matrix_part<'a>(&'a self, geom: &Geometry) -> &'a [f64] {
        &self.values[..geom.fine.n_cells()]
    }

    pub fn fracture_part<'a>(&'a self, geom: &Geometry) -> &'a [f64] {
        &self.values[geom.fine.n_cells()..]
    }
}

/// Advance one backward-Euler layer; returns the new state and the face
/// velocities recomputed from it.
pub fn step(
    state: &PressureState,
    velocities: &FaceVelocities,
    tau: f64,
    geom: &Geometry,
    params: &MediumParams,
    fluid: &FluidParams,
    sources: &Sources,
) -> Result<(PressureState, FaceVelocities)> {
    let blocks = assemble_blocks(geom, params, fluid, Some(velocities), sources)?;
    let factorization = Factorization::new(time_step_system(&blocks, tau)?)?;
    advance(state, velocities, tau, geom, params, fluid, &blocks, &factorization, true)
}

/// `M/tau + A + Q`.
fn time_step_system(blocks: &SystemBlocks, tau: f64) -> Result<SparseMatrix> {
    SparseMatrix::linear_combination(&[
        (1.0 / tau, &blocks.mass),
        (1.0, &blocks.flow),
        (1.0, &blocks.transfer),
    ])
}

#[allow(clippy::too_many_arguments)]
fn advance(
    state: &PressureState,
    velocities: &FaceVelocities,
    tau: f64,
    geom: &Geometry,
    params: &MediumParams,
    fluid: &FluidParams,
    blocks: &SystemBlocks,
    factorization: &Factorization,
    update_velocities: bool,
) -> Result<(PressureState, FaceVelocities)> {
    if state.values.len() != geom.n_dofs() {
        return Err(Error::DimensionMismatch(format!(
            "state length {} vs {} dofs",
            state.values.len(),
            geom.n_dofs()
        )));
    }
    let mut rhs = blocks.mass.matvec(&state.values);
    for (r, f) in rhs.iter_mut().zip(&blocks.source) {
        *r = *r / tau + f;
    }
    let (values, _report) = factorization.solve(&rhs)?;
    let new_state = PressureState {
        layer: state.layer + 1,
        time: state.time + tau,
        values,
    };
    let new_velocities = if update_velocities {
        compute_face_velocities(geom, params, fluid, &new_state.values, velocities)?
    } else {
        velocities.clone()
    };
    Ok((new_state, new_velocities))
}

/// Options for a multi-layer run.
#[derive(Debug, Clone)]
pub struct FineRunOptions {
    pub initial: Vec<f64>,
    pub time: TimeGrid,
    /// Layers to record (0 = initial state).
    pub snapshot_layers: Vec<usize>,
    /// When false the damping-factor code path is skipped entirely and the
    /// scheme is pure Darcy regardless of the Forchheimer fields.
    pub forchheimer_enabled: bool,
}

impl FineRunOptions {
    pub fn new(initial: Vec<f64>, time: TimeGrid) -> Self {
        Self {
            initial,
            time,
            snapshot_layers: Vec::new(),
            forchheimer_enabled: true,
        }
    }

    pub fn snapshots_at(mut self, layers: Vec<usize>) -> Self {
        self.snapshot_layers = layers;
        self
    }

    pub fn all_snapshots(mut self) -> Self {
        self.snapshot_layers = (0..=self.time.n_steps).collect();
        self
    }

    pub fn forchheimer(mut self, enabled: bool) -> Self {
        self.forchheimer_enabled = enabled;
        self
    }
}

/// Result of a fine-grid run.
#[derive(Debug, Clone)]
pub struct FineRun {
    pub snapshots: Vec<PressureState>,
    pub final_state: PressureState,
    /// Per-step mass balance defect |1^T M (p^{n+1}-p^n)/tau - 1^T F|.
    pub conservation_defects: Vec<f64>,
}

/// Run the time loop from zero initial velocities.
///
/// When the model is linear (Forchheimer disabled or all beta zero) the
/// system matrix is constant and factored once; the per-layer solutions are
/// identical to the general path, which re-assembles every layer.
pub fn run(
    geom: &Geometry,
    params: &MediumParams,
    fluid: &FluidParams,
    sources: &Sources,
    opts: &FineRunOptions,
) -> Result<FineRun> {
    if opts.initial.len() != geom.n_dofs() {
        return Err(Error::DimensionMismatch(format!(
            "initial state length {} vs {} dofs",
            opts.initial.len(),
            geom.n_dofs()
        )));
    }
    let tau = opts.time.tau;
    let nonlinear = opts.forchheimer_enabled && !params.is_linear();

    let mut state = PressureState::initial(opts.initial.clone());
    let mut velocities = FaceVelocities::zeros(geom);
    let mut snapshots = Vec::new();
    if opts.snapshot_layers.contains(&0) {
        snapshots.push(state.clone());
    }
    let mut conservation_defects = Vec::with_capacity(opts.time.n_steps);

    let linear_cache: Option<(SystemBlocks, Factorization)> = if nonlinear {
        None
    } else {
        let blocks = assemble_blocks(geom, params, fluid, None, sources)?;
        let factorization = Factorization::new(time_step_system(&blocks, tau)?)?;
        Some((blocks, factorization))
    };

    let total_source: f64 = sources
        .matrix
        .iter()
        .enumerate()
        .map(|(i, f)| f * geom.fine.cell_area(i))
        .chain(
            sources
                .fracture
                .iter()
                .enumerate()
                .map(|(l, f)| f * geom.fractures.cell(l).length),
        )
        .sum();

    for _ in 0..opts.time.n_steps {
        let fresh = match &linear_cache {
            Some(_) => None,
            None => {
                let blocks = assemble_blocks(geom, params, fluid, Some(&velocities), sources)?;
                let factorization = Factorization::new(time_step_system(&blocks, tau)?)?;
                Some((blocks, factorization))
            }
        };
        let (blocks, factorization) = linear_cache
            .as_ref()
            .or(fresh.as_ref())
            .map(|(b, f)| (b, f))
            .expect("either the cache or the fresh system exists");

        let (new_state, new_velocities) = advance(
            &state,
            &velocities,
            tau,
            geom,
            params,
            fluid,
            blocks,
            factorization,
            opts.forchheimer_enabled,
        )?;

        let delta: Vec<f64> = new_state
            .values
            .iter()
            .zip(&state.values)
            .map(|(a, b)| a - b)
            .collect();
        let mass_change: f64 = blocks.mass.matvec(&delta).iter().sum::<f64>() / tau;
        conservation_defects.push((mass_change - total_source).abs());

        state = new_state;
        velocities = new_velocities;
        if opts.snapshot_layers.contains(&state.layer) {
            snapshots.push(state.clone());
        }
    }

    Ok(FineRun {
        snapshots,
        final_state: state,
        conservation_defects,
    })
}
