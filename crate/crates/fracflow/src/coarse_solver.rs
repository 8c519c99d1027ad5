//! Time stepping of the projected coarse system.
//!
//! Each layer rebuilds the nonlinear fine-grid blocks from face velocities of
//! the downscaled previous coarse solution, projects them with R, solves the
//! small system, and downscales the result. In the linear case the projected
//! blocks are computed once and reused; the trajectories are identical.

use crate::assembly::{
    assemble_blocks, compute_face_velocities, FaceVelocities, FluidParams, MediumParams, Sources,
    SystemBlocks,
};
use crate::basis::ProjectionMatrix;
use crate::error::{Error, Result};
use crate::fine_solver::TimeGrid;
use crate::geometry::{CoarseGrid, Geometry};
use crate::metrics::coarse_average;
use crate::sparse::{triple_product, Factorization, SparseMatrix};

/// Projected blocks of the coarse system.
#[derive(Debug, Clone)]
pub struct CoarseBlocks {
    pub mass: SparseMatrix,
    pub flow: SparseMatrix,
    pub transfer: SparseMatrix,
    pub source: Vec<f64>,
}

/// Galerkin projection of all blocks: X_bar = R X R^T, F_bar = R F.
pub fn project_blocks(r: &ProjectionMatrix, blocks: &SystemBlocks) -> Result<CoarseBlocks> {
    Ok(CoarseBlocks {
        mass: triple_product(r.matrix(), &blocks.mass)?,
        flow: triple_product(r.matrix(), &blocks.flow)?,
        transfer: triple_product(r.matrix(), &blocks.transfer)?,
        source: r.project(&blocks.source),
    })
}

/// Coarse solution at one layer with its downscaled fine-grid field and the
/// face velocities derived from it.
#[derive(Debug, Clone)]
pub struct CoarseState {
    pub layer: usize,
    pub time: f64,
    /// Coarse dof vector p_bar.
    pub coarse: Vec<f64>,
    /// Downscaled field p_ms = R^T p_bar.
    pub downscaled: Vec<f64>,
    pub velocities: FaceVelocities,
}

/// Lightweight per-layer record kept by a run.
#[derive(Debug, Clone)]
pub struct CoarseSnapshot {
    pub layer: usize,
    pub time: f64,
    pub coarse: Vec<f64>,
    pub downscaled: Vec<f64>,
}

impl CoarseState {
    /// Initial state from a fine-grid field: coarse dofs are its
    /// measure-weighted means, velocities start at zero.
    pub fn initial(
        initial_fine: &[f64],
        geom: &Geometry,
        cg: &CoarseGrid,
        r: &ProjectionMatrix,
    ) -> Result<Self> {
        let coarse = coarse_average(initial_fine, cg, geom)?;
        let downscaled = r.downscale(&coarse);
        Ok(Self {
            layer: 0,
            time: 0.0,
            coarse,
            downscaled,
            velocities: FaceVelocities::zeros(geom),
        })
    }
}

/// Advance one coarse layer, reassembling and reprojecting the nonlinear
/// blocks from the downscaled previous solution.
pub fn coarse_step(
    state: &CoarseState,
    tau: f64,
    geom: &Geometry,
    params: &MediumParams,
    fluid: &FluidParams,
    sources: &Sources,
    r: &ProjectionMatrix,
) -> Result<CoarseState> {
    let blocks = assemble_blocks(geom, params, fluid, Some(&state.velocities), sources)?;
    let projected = project_blocks(r, &blocks)?;
    let factorization = Factorization::new(coarse_system(&projected, tau)?)?;
    advance(state, tau, geom, params, fluid, r, &projected, &factorization, true)
}

fn coarse_system(projected: &CoarseBlocks, tau: f64) -> Result<SparseMatrix> {
    SparseMatrix::linear_combination(&[
        (1.0 / tau, &projected.mass),
        (1.0, &projected.flow),
        (1.0, &projected.transfer),
    ])
}

#[allow(clippy::too_many_arguments)]
fn advance(
    state: &CoarseState,
    tau: f64,
    geom: &Geometry,
    params: &MediumParams,
    fluid: &FluidParams,
    r: &ProjectionMatrix,
    projected: &CoarseBlocks,
    factorization: &Factorization,
    update_velocities: bool,
) -> Result<CoarseState> {
    if state.coarse.len() != r.n_coarse_dofs() {
        return Err(Error::DimensionMismatch(format!(
            "coarse state length {} vs {} coarse dofs",
            state.coarse.len(),
            r.n_coarse_dofs()
        )));
    }
    let mut rhs = projected.mass.matvec(&state.coarse);
    for (v, f) in rhs.iter_mut().zip(&projected.source) {
        *v = *v / tau + f;
    }
    let (coarse, _report) = factorization.solve(&rhs)?;
    let downscaled = r.downscale(&coarse);
    let velocities = if update_velocities {
        compute_face_velocities(geom, params, fluid, &downscaled, &state.velocities)?
    } else {
        state.velocities.clone()
    };
    Ok(CoarseState {
        layer: state.layer + 1,
        time: state.time + tau,
        coarse,
        downscaled,
        velocities,
    })
}

/// Options for a coarse run.
#[derive(Debug, Clone)]
pub struct CoarseRunOptions {
    pub initial_fine: Vec<f64>,
    pub time: TimeGrid,
    pub snapshot_layers: Vec<usize>,
    pub forchheimer_enabled: bool,
}

impl CoarseRunOptions {
    pub fn new(initial_fine: Vec<f64>, time: TimeGrid) -> Self {
        Self {
            initial_fine,
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

/// Result of a coarse run.
#[derive(Debug, Clone)]
pub struct CoarseRun {
    pub snapshots: Vec<CoarseSnapshot>,
    pub final_state: CoarseState,
    /// Downscaled mass-change diagnostic per step,
    /// |1^T M (p_ms^{n+1}-p_ms^n)/tau - 1^T F| (reported, not asserted:
    /// coarse conservation through R is not exact).
    pub downscale_mass_defects: Vec<f64>,
}

/// Run the coarse time loop.
pub fn run_ms(
    geom: &Geometry,
    cg: &CoarseGrid,
    params: &MediumParams,
    fluid: &FluidParams,
    sources: &Sources,
    r: &ProjectionMatrix,
    opts: &CoarseRunOptions,
) -> Result<CoarseRun> {
    let tau = opts.time.tau;
    let nonlinear = opts.forchheimer_enabled && !params.is_linear();

    let mut state = CoarseState::initial(&opts.initial_fine, geom, cg, r)?;
    let mut snapshots = Vec::new();
    if opts.snapshot_layers.contains(&0) {
        snapshots.push(snapshot_of(&state));
    }

    let fine_mass = assemble_blocks(geom, params, fluid, None, sources)?;
    let total_source: f64 = fine_mass.source.iter().sum();

    let linear_cache: Option<(CoarseBlocks, Factorization)> = if nonlinear {
        None
    } else {
        let projected = project_blocks(r, &fine_mass)?;
        let factorization = Factorization::new(coarse_system(&projected, tau)?)?;
        Some((projected, factorization))
    };

    let mut defects = Vec::with_capacity(opts.time.n_steps);
    for _ in 0..opts.time.n_steps {
        let fresh = match &linear_cache {
            Some(_) => None,
            None => {
                let blocks =
                    assemble_blocks(geom, params, fluid, Some(&state.velocities), sources)?;
                let projected = project_blocks(r, &blocks)?;
                let factorization = Factorization::new(coarse_system(&projected, tau)?)?;
                Some((projected, factorization))
            }
        };
        let (projected, factorization) = linear_cache
            .as_ref()
            .or(fresh.as_ref())
            .map(|(p, f)| (p, f))
            .expect("either the cache or the fresh system exists");

        let new_state = advance(
            &state,
            tau,
            geom,
            params,
            fluid,
            r,
            projected,
            factorization,
            opts.forchheimer_enabled,
        )?;

        let delta: Vec<f64> = new_state
            .downscaled
            .iter()
            .zip(&state.downscaled)
            .map(|(a, b)| a - b)
            .collect();
        let mass_change: f64 = fine_mass.mass.matvec(&delta).iter().sum::<f64>() / tau;
        defects.push((mass_change - total_source).abs());

        state = new_state;
        if opts.snapshot_layers.contains(&state.layer) {
            snapshots.push(snapshot_of(&state));
        }
    }

    Ok(CoarseRun {
        snapshots,
        final_state: state,
        downscale_mass_defects: defects,
    })
}

fn snapshot_of(state: &CoarseState) -> CoarseSnapshot {
    CoarseSnapshot {
        layer: state.layer,
        time: state.time,
        coarse: state.coarse.clone(),
        downscaled: state.downscaled.clone(),
    }
}
