//! Relative L2 comparison norms between reference and multiscale solutions,
//! on the fine grid and on coarse-cell averages.

use crate::error::{Error, Result};
use crate::geometry::{CoarseGrid, Geometry};

/// Which continua enter the norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorScope {
    /// Matrix and fracture cells, measure-weighted (default).
    Full,
    /// Matrix cells only (sensitivity checks).
    MatrixOnly,
}

/// Per-layer relative errors.
#[derive(Debug, Clone, Copy)]
pub struct ErrorRecord {
    pub layer: usize,
    /// Fine-grid relative L2 error.
    pub fine_l2: f64,
    /// Coarse-average relative L2 error.
    pub coarse_avg_l2: f64,
}

/// Measure-weighted averages per coarse dof: cell means over |K_j| for the
/// matrix continuum and network means over |γ_j^(m)| for fractures.
pub fn coarse_average(p: &[f64], cg: &CoarseGrid, geom: &Geometry) -> Result<Vec<f64>> {
    if p.len() != geom.n_dofs() {
        return Err(Error::DimensionMismatch(format!(
            "field length {} vs {} fine dofs",
            p.len(),
            geom.n_dofs()
        )));
    }
    let n_m = geom.fine.n_cells();
    let mut out = Vec::with_capacity(cg.n_dofs());
    for cell in cg.cells() {
        let mut acc = 0.0;
        for &i in &cell.fine_cells {
            acc += p[i] * geom.fine.cell_area(i);
        }
        out.push(acc / cell.area);
    }
    for &(j, m) in cg.fracture_dofs() {
        let network = &cg.cell(j).networks[m];
        let mut acc = 0.0;
        for &l in &network.fracture_cells {
            acc += p[n_m + l] * geom.fractures.cell(l).length;
        }
        out.push(acc / network.length);
    }
    Ok(out)
}

/// Relative L2 errors of a multiscale field against a reference field, on
/// the fine grid and on coarse averages.
pub fn l2_errors(
    reference: &[f64],
    multiscale: &[f64],
    cg: &CoarseGrid,
    geom: &Geometry,
    layer: usize,
    scope: ErrorScope,
) -> Result<ErrorRecord> {
    if reference.len() != geom.n_dofs() || multiscale.len() != geom.n_dofs() {
        return Err(Error::DimensionMismatch(
            "error norms need fields over all fine dofs".into(),
        ));
    }
    let n_m = geom.fine.n_cells();
    let fine_weight = |i: usize| -> f64 {
        if i < n_m {
            geom.fine.cell_area(i)
        } else {
            geom.fractures.cell(i - n_m).length
        }
    };
    let fine_dofs = match scope {
        ErrorScope::Full => geom.n_dofs(),
        ErrorScope::MatrixOnly => n_m,
    };
    let mut diff = 0.0;
    let mut norm = 0.0;
    for i in 0..fine_dofs {
        let w = fine_weight(i);
        diff += w * (reference[i] - multiscale[i]).powi(2);
        norm += w * reference[i] * reference[i];
    }
    if norm <= 0.0 {
        return Err(Error::InvalidParameter(
            "reference field has zero norm".into(),
        ));
    }
    let fine_l2 = (diff / norm).sqrt();

    let ref_avg = coarse_average(reference, cg, geom)?;
    let ms_avg = coarse_average(multiscale, cg, geom)?;
    let coarse_weight = |q: usize| -> f64 {
        if q < cg.n_cells() {
            cg.cell(q).area
        } else {
            let (j, m) = cg.fracture_dofs()[q - cg.n_cells()];
            cg.cell(j).networks[m].length
        }
    };
    let coarse_dofs = match scope {
        ErrorScope::Full => cg.n_dofs(),
        ErrorScope::MatrixOnly => cg.n_cells(),
    };
    let mut cdiff = 0.0;
    let mut cnorm = 0.0;
    for q in 0..coarse_dofs {
        let w = coarse_weight(q);
        cdiff += w * (ref_avg[q] - ms_avg[q]).powi(2);
        cnorm += w * ref_avg[q] * ref_avg[q];
    }
    if cnorm <= 0.0 {
        return Err(Error::InvalidParameter(
            "coarse-averaged reference has zero norm".into(),
        ));
    }
    let coarse_avg_l2 = (cdiff / cnorm).sqrt();

    Ok(ErrorRecord {
        layer,
        fine_l2,
        coarse_avg_l2,
    })
}
