//! Batch harness reproducing the error-versus-oversampling and
//! error-versus-nonlinearity studies: one fine reference run per Forchheimer
//! scale, one multiscale run per (grid, S, C) cell, per-layer error series,
//! and summary tables.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::basis::{build_basis_set, build_projection, ProjectionMatrix};
use crate::coarse_solver::{run_ms, CoarseRunOptions};
use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::fine_solver::{run, FineRunOptions, PressureState};
use crate::geometry::CoarseGrid;
use crate::io::{read_error_series, write_error_series, write_summary, SummaryRow};
use crate::metrics::{l2_errors, ErrorRecord, ErrorScope};

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Oversampling layer counts, e.g. 3..=7.
    pub layers: Vec<usize>,
    /// Forchheimer scales C, e.g. [0, 10, 1e2, 1e3, 1e4].
    pub scales: Vec<f64>,
    /// Recompute cells whose outputs already exist.
    pub force: bool,
}

/// Format a Forchheimer scale for file names (1e4 -> "10000").
pub fn scale_label(c: f64) -> String {
    if c == c.trunc() && c.abs() < 1e15 {
        format!("{}", c as i64)
    } else {
        format!("{}", c)
    }
}

fn series_path(dir: &Path, grid: (usize, usize), s: usize, c: f64) -> PathBuf {
    dir.join(format!(
        "errors_{}x{}_S{}_C{}.csv",
        grid.0,
        grid.1,
        s,
        scale_label(c)
    ))
}

/// Run the sweep; emits per-cell error series and one summary per C under
/// `<out_dir>/sweep/`. Existing cells are reused unless `force` is set.
pub fn run_sweep(scenario: &Scenario, opts: &SweepOptions) -> Result<PathBuf> {
    if opts.layers.is_empty() {
        return Err(Error::Config("sweep needs a nonempty list of oversampling layers".into()));
    }
    if opts.scales.is_empty() {
        return Err(Error::Config("sweep needs a nonempty list of Forchheimer scales".into()));
    }
    let dir = scenario.config.out_dir.join("sweep");
    std::fs::create_dir_all(&dir)?;

    let mut grids: Vec<(&CoarseGrid, (usize, usize))> = vec![(
        &scenario.coarse,
        (scenario.config.coarse_nx, scenario.config.coarse_ny),
    )];
    if let Some(cg2) = &scenario.coarse2 {
        let dims = scenario.config.coarse2.expect("grid dims accompany the grid");
        grids.push((cg2, dims));
    }

    let time = scenario.config.time_grid()?;
    let all_layers: Vec<usize> = (1..=time.n_steps).collect();

    // bases depend only on geometry and permeability; share them across C
    let mut projections: HashMap<(usize, usize), ProjectionMatrix> = HashMap::new();

    for &c in &opts.scales {
        let params = scenario.medium_params(c)?;
        let any_needed = grids.iter().any(|(_, dims)| {
            opts.layers
                .iter()
                .any(|&s| opts.force || !series_path(&dir, *dims, s, c).exists())
        });

        let fine_states: Option<Vec<PressureState>> = if !any_needed {
            None
        } else {
            let fine = run(
                &scenario.geom,
                &params,
                &scenario.fluid,
                &scenario.sources,
                &FineRunOptions::new(scenario.initial_state(), time)
                    .snapshots_at(all_layers.clone()),
            )?;
            Some(fine.snapshots)
        };

        let mut rows: Vec<SummaryRow> = Vec::new();
        for &s in &opts.layers {
            let mut row = SummaryRow {
                layers: s,
                errors: Vec::new(),
            };
            for (gi, (cg, dims)) in grids.iter().enumerate() {
                let path = series_path(&dir, *dims, s, c);
                let records = if !opts.force && path.exists() {
                    read_error_series(&path)?
                } else {
                    let projection = match projections.get(&(gi, s)) {
                        Some(p) => p,
                        None => {
                            let set = build_basis_set(
                                &scenario.geom,
                                cg,
                                &params,
                                &scenario.fluid,
                                s,
                            )?;
                            let r = build_projection(&set, cg, &scenario.geom)?;
                            projections.entry((gi, s)).or_insert(r)
                        }
                    };
                    let coarse_run = run_ms(
                        &scenario.geom,
                        cg,
                        &params,
                        &scenario.fluid,
                        &scenario.sources,
                        projection,
                        &CoarseRunOptions::new(scenario.initial_state(), time)
                            .snapshots_at(all_layers.clone()),
                    )?;
                    let fine_states = fine_states
                        .as_ref()
                        .expect("fine reference exists when a cell is computed");
                    let records: Result<Vec<ErrorRecord>> = fine_states
                        .iter()
                        .zip(&coarse_run.snapshots)
                        .map(|(fine_state, ms)| {
                            debug_assert_eq!(fine_state.layer, ms.layer);
                            l2_errors(
                                &fine_state.values,
                                &ms.downscaled,
                                cg,
                                &scenario.geom,
                                fine_state.layer,
                                ErrorScope::Full,
                            )
                        })
                        .collect();
                    let records = records?;
                    write_error_series(&path, &records)?;
                    records
                };
                let last = records.last().ok_or_else(|| Error::FileFormat {
                    path: path.display().to_string(),
                    message: "empty error series".into(),
                })?;
                row.errors.push((last.fine_l2, last.coarse_avg_l2));
            }
            rows.push(row);
        }
        let dims: Vec<(usize, usize)> = grids.iter().map(|(_, d)| *d).collect();
        write_summary(
            &dir.join(format!("summary_C{}.csv", scale_label(c))),
            &dims,
            &rows,
        )?;
    }
    Ok(dir)
}
