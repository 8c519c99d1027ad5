//! File formats: permeability fields, fracture geometry, solution snapshots
//! (CSV and legacy VTK), error tables, and basis exports.
//!
//! All numeric output is printed with 17 significant digits so files
//! round-trip exactly and rerunning a configuration reproduces them
//! bit-for-bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::geometry::{Geometry, Segment};
use crate::metrics::ErrorRecord;

fn format_error(path: &Path, message: impl Into<String>) -> Error {
    Error::FileFormat {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Read a cell-centered field: header `nx ny`, then nx*ny values row-major.
pub fn read_field_file(path: &Path, nx: usize, ny: usize) -> Result<Vec<f64>> {
    let file = File::open(path).map_err(|e| format_error(path, e.to_string()))?;
    let mut tokens = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        let data = line.split('#').next().unwrap_or("");
        tokens.extend(data.split_whitespace().map(str::to_string));
    }
    if tokens.len() < 2 {
        return Err(format_error(path, "missing `nx ny` header"));
    }
    let fnx: usize = tokens[0]
        .parse()
        .map_err(|_| format_error(path, "bad nx in header"))?;
    let fny: usize = tokens[1]
        .parse()
        .map_err(|_| format_error(path, "bad ny in header"))?;
    if fnx != nx || fny != ny {
        return Err(format_error(
            path,
            format!("field sized {}x{}, mesh needs {}x{}", fnx, fny, nx, ny),
        ));
    }
    if tokens.len() != 2 + nx * ny {
        return Err(format_error(
            path,
            format!("expected {} values, found {}", nx * ny, tokens.len() - 2),
        ));
    }
    tokens[2..]
        .iter()
        .map(|t| {
            t.parse()
                .map_err(|_| format_error(path, format!("bad value `{}`", t)))
        })
        .collect()
}

pub fn write_field_file(path: &Path, nx: usize, ny: usize, values: &[f64]) -> Result<()> {
    if values.len() != nx * ny {
        return Err(Error::DimensionMismatch(format!(
            "field has {} values for a {}x{} grid",
            values.len(),
            nx,
            ny
        )));
    }
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{} {}", nx, ny)?;
    for row in values.chunks(nx) {
        let line: Vec<String> = row.iter().map(|v| format!("{:.16e}", v)).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Read fracture segments: `x1 y1 x2 y2` per line, `#` comments allowed.
pub fn read_fracture_file(path: &Path) -> Result<Vec<Segment>> {
    let file = File::open(path).map_err(|e| format_error(path, e.to_string()))?;
    let mut segments = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let data = line.split('#').next().unwrap_or("").trim();
        if data.is_empty() {
            continue;
        }
        let nums: Vec<f64> = data
            .split_whitespace()
            .map(|t| {
                t.parse().map_err(|_| {
                    format_error(path, format!("line {}: bad coordinate `{}`", lineno + 1, t))
                })
            })
            .collect::<Result<_>>()?;
        if nums.len() != 4 {
            return Err(format_error(
                path,
                format!("line {}: expected `x1 y1 x2 y2`", lineno + 1),
            ));
        }
        segments.push(Segment::new((nums[0], nums[1]), (nums[2], nums[3])));
    }
    Ok(segments)
}

pub fn write_fracture_file(path: &Path, segments: &[Segment]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# fracture segments: x1 y1 x2 y2")?;
    for s in segments {
        writeln!(
            out,
            "{:.16e} {:.16e} {:.16e} {:.16e}",
            s.start.0, s.start.1, s.end.0, s.end.1
        )?;
    }
    Ok(())
}

/// Solution snapshot format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionFormat {
    Csv,
    Vtk,
}

/// Write a stacked solution vector. CSV holds both continua in one file;
/// VTK produces a structured-points file for the matrix plus a polydata
/// file (suffix `_fractures`) for the fracture segments.
pub fn write_solution(
    values: &[f64],
    geom: &Geometry,
    path: &Path,
    format: SolutionFormat,
) -> Result<()> {
    if values.len() != geom.n_dofs() {
        return Err(Error::DimensionMismatch(format!(
            "solution has {} values for {} dofs",
            values.len(),
            geom.n_dofs()
        )));
    }
    match format {
        SolutionFormat::Csv => write_solution_csv(values, geom, path),
        SolutionFormat::Vtk => {
            write_matrix_vtk(values, geom, path)?;
            write_fracture_vtk(values, geom, &sibling(path, "_fractures"))
        }
    }
}

fn sibling(path: &Path, suffix: &str) -> std::path::PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("vtk");
    path.with_file_name(format!("{}{}.{}", stem, suffix, ext))
}

fn write_solution_csv(values: &[f64], geom: &Geometry, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "cell_type,index,x,y,value")?;
    for i in 0..geom.fine.n_cells() {
        let (x, y) = geom.fine.centroid(i);
        writeln!(out, "m,{},{:.16e},{:.16e},{:.16e}", i, x, y, values[i])?;
    }
    for l in 0..geom.fractures.n_cells() {
        let c = geom.fractures.cell(l);
        writeln!(
            out,
            "f,{},{:.16e},{:.16e},{:.16e}",
            l,
            c.midpoint.0,
            c.midpoint.1,
            values[geom.fine.n_cells() + l]
        )?;
    }
    Ok(())
}

/// Parse a solution CSV back into a stacked vector.
pub fn read_solution_csv(path: &Path, geom: &Geometry) -> Result<Vec<f64>> {
    let file = File::open(path).map_err(|e| format_error(path, e.to_string()))?;
    let mut values = vec![f64::NAN; geom.n_dofs()];
    let mut seen = 0usize;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if lineno == 0 {
            if line.trim() != "cell_type,index,x,y,value" {
                return Err(format_error(path, "bad csv header"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(format_error(path, format!("line {}: bad record", lineno + 1)));
        }
        let index: usize = fields[1]
            .parse()
            .map_err(|_| format_error(path, format!("line {}: bad index", lineno + 1)))?;
        let value: f64 = fields[4]
            .parse()
            .map_err(|_| format_error(path, format!("line {}: bad value", lineno + 1)))?;
        let dof = match fields[0] {
            "m" => index,
            "f" => geom.fine.n_cells() + index,
            other => {
                return Err(format_error(
                    path,
                    format!("line {}: bad cell type `{}`", lineno + 1, other),
                ))
            }
        };
        if dof >= values.len() {
            return Err(format_error(path, format!("line {}: index out of range", lineno + 1)));
        }
        values[dof] = value;
        seen += 1;
    }
    if seen != values.len() {
        return Err(format_error(
            path,
            format!("{} records for {} dofs", seen, values.len()),
        ));
    }
    Ok(values)
}

/// Legacy VTK structured points; cell-centered values are attached to the
/// points of a grid whose origin sits at the first cell center.
fn write_matrix_vtk(values: &[f64], geom: &Geometry, path: &Path) -> Result<()> {
    let fm = &geom.fine;
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "matrix pressure")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET STRUCTURED_POINTS")?;
    writeln!(out, "DIMENSIONS {} {} 1", fm.nx(), fm.ny())?;
    writeln!(out, "ORIGIN {:.16e} {:.16e} 0", fm.hx() / 2.0, fm.hy() / 2.0)?;
    writeln!(out, "SPACING {:.16e} {:.16e} 1", fm.hx(), fm.hy())?;
    writeln!(out, "POINT_DATA {}", fm.n_cells())?;
    writeln!(out, "SCALARS pressure double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in &values[..fm.n_cells()] {
        writeln!(out, "{:.16e}", v)?;
    }
    Ok(())
}

/// Legacy VTK polydata: one line cell per fracture cell with its pressure.
fn write_fracture_vtk(values: &[f64], geom: &Geometry, path: &Path) -> Result<()> {
    let fr = &geom.fractures;
    let n = fr.n_cells();
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "fracture pressure")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET POLYDATA")?;
    writeln!(out, "POINTS {} double", 2 * n)?;
    for cell in fr.cells() {
        writeln!(out, "{:.16e} {:.16e} 0", cell.start.0, cell.start.1)?;
        writeln!(out, "{:.16e} {:.16e} 0", cell.end.0, cell.end.1)?;
    }
    writeln!(out, "LINES {} {}", n, 3 * n)?;
    for l in 0..n {
        writeln!(out, "2 {} {}", 2 * l, 2 * l + 1)?;
    }
    writeln!(out, "CELL_DATA {}", n)?;
    writeln!(out, "SCALARS pressure double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for l in 0..n {
        writeln!(out, "{:.16e}", values[geom.fine.n_cells() + l])?;
    }
    Ok(())
}

/// Error time series: `layer,e_l2,ebar_l2`.
pub fn write_error_series(path: &Path, records: &[ErrorRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "layer,e_l2,ebar_l2")?;
    for r in records {
        writeln!(out, "{},{:.16e},{:.16e}", r.layer, r.fine_l2, r.coarse_avg_l2)?;
    }
    Ok(())
}

pub fn read_error_series(path: &Path) -> Result<Vec<ErrorRecord>> {
    let file = File::open(path).map_err(|e| format_error(path, e.to_string()))?;
    let mut records = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if lineno == 0 {
            if line.trim() != "layer,e_l2,ebar_l2" {
                return Err(format_error(path, "bad error series header"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(format_error(path, format!("line {}: bad record", lineno + 1)));
        }
        records.push(ErrorRecord {
            layer: fields[0]
                .parse()
                .map_err(|_| format_error(path, "bad layer"))?,
            fine_l2: fields[1]
                .parse()
                .map_err(|_| format_error(path, "bad e_l2"))?,
            coarse_avg_l2: fields[2]
                .parse()
                .map_err(|_| format_error(path, "bad ebar_l2"))?,
        });
    }
    Ok(records)
}

/// One summary row: final errors per coarse grid at one S.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub layers: usize,
    /// (e_l2, ebar_l2) per configured coarse grid, primary first.
    pub errors: Vec<(f64, f64)>,
}

/// Summary table mirroring the error-versus-oversampling layout: one row per
/// S, two error columns per coarse grid.
pub fn write_summary(path: &Path, grids: &[(usize, usize)], rows: &[SummaryRow]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let mut header = String::from("S");
    for (nx, ny) in grids {
        header.push_str(&format!(",e_l2_{0}x{1},ebar_l2_{0}x{1}", nx, ny));
    }
    writeln!(out, "{}", header)?;
    for row in rows {
        let mut line = format!("{}", row.layers);
        for (e, ebar) in &row.errors {
            line.push_str(&format!(",{:.16e},{:.16e}", e, ebar));
        }
        writeln!(out, "{}", line)?;
    }
    Ok(())
}

/// Export every basis as `dof_index value` pairs under a header naming its
/// coarse cell, continuum, and oversampling layers.
pub fn export_basis_set(dir: &Path, set: &BasisSet, geom: &Geometry) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for cell in &set.cells {
        let n_matrix_local = cell.region.matrix_cells.len();
        for basis in &cell.bases {
            let name = format!("basis_c{:04}_l{}.txt", basis.coarse_cell, basis.continuum);
            let mut out = BufWriter::new(File::create(dir.join(name))?);
            writeln!(
                out,
                "# coarse_cell={} continuum={} layers={}",
                basis.coarse_cell, basis.continuum, set.layers
            )?;
            for (local, v) in basis.values.iter().enumerate() {
                let dof = if local < n_matrix_local {
                    cell.region.matrix_cells[local]
                } else {
                    geom.fine.n_cells() + cell.region.fracture_cells[local - n_matrix_local]
                };
                writeln!(out, "{} {:.16e}", dof, v)?;
            }
        }
    }
    Ok(())
}
