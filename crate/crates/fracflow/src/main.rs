use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fracflow::basis::{build_basis_set, build_projection};
use fracflow::coarse_solver::{run_ms, CoarseRunOptions};
use fracflow::config::{parse_config, FieldSource, RunConfig, Scenario};
use fracflow::error::{Error, Result};
use fracflow::fine_solver::{run, FineRunOptions};
use fracflow::io::{
    export_basis_set, read_solution_csv, write_error_series, write_field_file,
    write_fracture_file, write_solution, SolutionFormat,
};
use fracflow::metrics::{l2_errors, ErrorScope};
use fracflow::sweep::{run_sweep, scale_label, SweepOptions};
use fracflow::testcase::generate_testcase;

/// Darcy-Forchheimer flow in fractured media: fine-grid reference solver and
/// non-local multi-continuum coarse solver.
#[derive(Parser)]
#[command(name = "fracflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's generator seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the generated permeability field and fracture geometry files.
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Fine-grid reference run with snapshot output.
    Fine {
        #[command(flatten)]
        common: Common,
        /// Override the Forchheimer scale C.
        #[arg(long)]
        forchheimer: Option<f64>,
    },
    /// Build multiscale basis functions and export them for inspection.
    Basis {
        #[command(flatten)]
        common: Common,
        /// Override the number of oversampling layers S.
        #[arg(long)]
        layers: Option<usize>,
    },
    /// Multiscale run; snapshots hold the downscaled fine-grid field.
    Nlmc {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        layers: Option<usize>,
        #[arg(long)]
        forchheimer: Option<f64>,
    },
    /// Error tables from two snapshot directories (reference, multiscale).
    Compare {
        #[command(flatten)]
        common: Common,
        /// Directory with reference layer_NNNN.csv snapshots.
        reference: PathBuf,
        /// Directory with multiscale layer_NNNN.csv snapshots.
        multiscale: PathBuf,
        /// Compare the matrix continuum only.
        #[arg(long)]
        matrix_only: bool,
    },
    /// Full study over oversampling layers and Forchheimer scales.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated S values (default 3,4,5,6,7).
        #[arg(long)]
        layers: Option<String>,
        /// Comma-separated C values (default 0,10,100,1000,10000).
        #[arg(long)]
        forchheimer: Option<String>,
        /// Recompute cells whose outputs already exist.
        #[arg(long)]
        force: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::FAILURE
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut config = parse_config(&common.config)?;
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        match &mut config.field_source {
            FieldSource::Generated { seed: s, .. } => *s = seed,
            FieldSource::Files { .. } => {
                return Err(Error::Config(
                    "--seed needs a generator configuration, this one uses field files".into(),
                ))
            }
        }
    }
    Ok(config)
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Gen { common } => gen_cmd(&common),
        Command::Fine { common, forchheimer } => fine_cmd(&common, forchheimer),
        Command::Basis { common, layers } => basis_cmd(&common, layers),
        Command::Nlmc {
            common,
            layers,
            forchheimer,
        } => nlmc_cmd(&common, layers, forchheimer),
        Command::Compare {
            common,
            reference,
            multiscale,
            matrix_only,
        } => compare_cmd(&common, &reference, &multiscale, matrix_only),
        Command::Sweep {
            common,
            layers,
            forchheimer,
            force,
        } => sweep_cmd(&common, layers, forchheimer, force),
    }
}

fn gen_cmd(common: &Common) -> Result<()> {
    let config = load_config(common)?;
    let (seed, kind) = match &config.field_source {
        FieldSource::Generated { seed, kind } => (*seed, *kind),
        FieldSource::Files { .. } => {
            return Err(Error::Config(
                "gen needs a generator configuration (seed + testcase)".into(),
            ))
        }
    };
    let fm = fracflow::geometry::build_fine_mesh(
        config.fine_nx,
        config.fine_ny,
        config.domain_lx,
        config.domain_ly,
    )?;
    let case = generate_testcase(seed, kind, &fm);
    std::fs::create_dir_all(&config.out_dir)?;
    let k_path = config.out_dir.join("k_m.txt");
    let f_path = config.out_dir.join("fractures.txt");
    write_field_file(&k_path, config.fine_nx, config.fine_ny, &case.k_matrix)?;
    write_fracture_file(&f_path, &case.segments)?;
    println!("{}", k_path.display());
    println!("{}", f_path.display());
    Ok(())
}

fn snapshot_dir(base: &Path, name: &str) -> Result<PathBuf> {
    let dir = base.join(name);
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_snapshots<'a>(
    dir: &Path,
    geom: &fracflow::geometry::Geometry,
    states: impl Iterator<Item = (usize, &'a [f64])>,
) -> Result<()> {
    for (layer, values) in states {
        let csv = dir.join(format!("layer_{:04}.csv", layer));
        write_solution(values, geom, &csv, SolutionFormat::Csv)?;
        let vtk = dir.join(format!("layer_{:04}.vtk", layer));
        write_solution(values, geom, &vtk, SolutionFormat::Vtk)?;
    }
    Ok(())
}

fn fine_cmd(common: &Common, forchheimer: Option<f64>) -> Result<()> {
    let mut config = load_config(common)?;
    if let Some(c) = forchheimer {
        config.forchheimer_scale = c;
    }
    let snapshots = config.snapshot_layers();
    let scale = config.forchheimer_scale;
    let scenario = Scenario::from_config(config)?;
    let params = scenario.medium_params(scale)?;
    let result = run(
        &scenario.geom,
        &params,
        &scenario.fluid,
        &scenario.sources,
        &FineRunOptions::new(scenario.initial_state(), scenario.config.time_grid()?)
            .snapshots_at(snapshots),
    )?;
    let dir = snapshot_dir(
        &scenario.config.out_dir,
        &format!("fine_C{}", scale_label(scale)),
    )?;
    write_snapshots(
        &dir,
        &scenario.geom,
        result
            .snapshots
            .iter()
            .map(|s| (s.layer, s.values.as_slice())),
    )?;
    let worst = result
        .conservation_defects
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    println!("{}", dir.display());
    println!(
        "final layer {} at t = {}",
        result.final_state.layer, result.final_state.time
    );
    println!("max conservation defect {:.3e}", worst);
    Ok(())
}

fn basis_cmd(common: &Common, layers: Option<usize>) -> Result<()> {
    let mut config = load_config(common)?;
    if let Some(s) = layers {
        config.oversampling_layers = s;
    }
    let s = config.oversampling_layers;
    let scenario = Scenario::from_config(config)?;
    let params = scenario.medium_params(0.0)?;
    let set = build_basis_set(&scenario.geom, &scenario.coarse, &params, &scenario.fluid, s)?;
    let dir = scenario.config.out_dir.join(format!("basis_S{}", s));
    export_basis_set(&dir, &set, &scenario.geom)?;
    let n_bases: usize = set.cells.iter().map(|c| c.bases.len()).sum();
    println!("{}", dir.display());
    println!(
        "{} bases over {} coarse cells",
        n_bases,
        scenario.coarse.n_cells()
    );
    Ok(())
}

fn nlmc_cmd(common: &Common, layers: Option<usize>, forchheimer: Option<f64>) -> Result<()> {
    let mut config = load_config(common)?;
    if let Some(s) = layers {
        config.oversampling_layers = s;
    }
    if let Some(c) = forchheimer {
        config.forchheimer_scale = c;
    }
    let snapshots = config.snapshot_layers();
    let scale = config.forchheimer_scale;
    let s = config.oversampling_layers;
    let scenario = Scenario::from_config(config)?;
    let params = scenario.medium_params(scale)?;
    let set = build_basis_set(&scenario.geom, &scenario.coarse, &params, &scenario.fluid, s)?;
    let projection = build_projection(&set, &scenario.coarse, &scenario.geom)?;
    let result = run_ms(
        &scenario.geom,
        &scenario.coarse,
        &params,
        &scenario.fluid,
        &scenario.sources,
        &projection,
        &CoarseRunOptions::new(scenario.initial_state(), scenario.config.time_grid()?)
            .snapshots_at(snapshots),
    )?;
    let dir = snapshot_dir(
        &scenario.config.out_dir,
        &format!("ms_S{}_C{}", s, scale_label(scale)),
    )?;
    write_snapshots(
        &dir,
        &scenario.geom,
        result
            .snapshots
            .iter()
            .map(|s| (s.layer, s.downscaled.as_slice())),
    )?;
    println!("{}", dir.display());
    println!(
        "coarse system size {} over {} fine dofs",
        projection.n_coarse_dofs(),
        scenario.geom.n_dofs()
    );
    Ok(())
}

fn compare_cmd(
    common: &Common,
    reference: &Path,
    multiscale: &Path,
    matrix_only: bool,
) -> Result<()> {
    let config = load_config(common)?;
    let scenario = Scenario::from_config(config)?;
    let scope = if matrix_only {
        ErrorScope::MatrixOnly
    } else {
        ErrorScope::Full
    };
    let mut layers: Vec<usize> = Vec::new();
    for entry in std::fs::read_dir(reference)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(layer) = name
            .strip_prefix("layer_")
            .and_then(|s| s.strip_suffix(".csv"))
            .and_then(|s| s.parse::<usize>().ok())
        {
            if multiscale.join(name.as_ref()).exists() {
                layers.push(layer);
            }
        }
    }
    layers.sort_unstable();
    if layers.is_empty() {
        return Err(Error::Config(
            "no matching layer_NNNN.csv snapshots in the two directories".into(),
        ));
    }
    let mut records = Vec::with_capacity(layers.len());
    for layer in layers {
        let name = format!("layer_{:04}.csv", layer);
        let ref_values = read_solution_csv(&reference.join(&name), &scenario.geom)?;
        let ms_values = read_solution_csv(&multiscale.join(&name), &scenario.geom)?;
        if ref_values.iter().all(|v| *v == 0.0) {
            // an all-zero reference layer (typically the initial condition)
            // has no relative error
            continue;
        }
        records.push(l2_errors(
            &ref_values,
            &ms_values,
            &scenario.coarse,
            &scenario.geom,
            layer,
            scope,
        )?);
    }
    std::fs::create_dir_all(&scenario.config.out_dir)?;
    let out = scenario.config.out_dir.join("compare_errors.csv");
    write_error_series(&out, &records)?;
    println!("{}", out.display());
    if let Some(last) = records.last() {
        println!(
            "final layer {}: e_l2 {:.6e}, ebar_l2 {:.6e}",
            last.layer, last.fine_l2, last.coarse_avg_l2
        );
    }
    Ok(())
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|_| Error::Config(format!("invalid {} `{}`", what, t)))
        })
        .collect()
}

fn sweep_cmd(
    common: &Common,
    layers: Option<String>,
    forchheimer: Option<String>,
    force: bool,
) -> Result<()> {
    let config = load_config(common)?;
    let layers = match layers {
        Some(text) => parse_list(&text, "oversampling layer count")?,
        None => vec![3, 4, 5, 6, 7],
    };
    let scales = match forchheimer {
        Some(text) => parse_list(&text, "Forchheimer scale")?,
        None => vec![0.0, 10.0, 100.0, 1000.0, 10000.0],
    };
    let scenario = Scenario::from_config(config)?;
    let dir = run_sweep(
        &scenario,
        &SweepOptions {
            layers,
            scales,
            force,
        },
    )?;
    println!("{}", dir.display());
    Ok(())
}
