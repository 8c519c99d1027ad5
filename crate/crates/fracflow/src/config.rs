//! Run configuration: a flat key-value text file, strictly validated, plus
//! the machinery that turns a config into a ready-to-run scenario.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::assembly::{FluidParams, MediumParams, Sources};
use crate::error::{Error, Result};
use crate::fine_solver::TimeGrid;
use crate::geometry::{
    build_coarse_grid, build_fine_mesh, build_fracture_mesh, CoarseGrid, Geometry,
};
use crate::io;
use crate::testcase::{generate_testcase, TestCaseKind};

/// Where the permeability field and fracture geometry come from.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSource {
    Files { k_matrix: PathBuf, fractures: PathBuf },
    Generated { seed: u64, kind: TestCaseKind },
}

/// Which layers get written out.
#[derive(Debug, Clone, PartialEq)]
pub enum SnapshotSpec {
    FinalOnly,
    All,
    Layers(Vec<usize>),
}

/// Fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub fine_nx: usize,
    pub fine_ny: usize,
    pub domain_lx: f64,
    pub domain_ly: f64,
    pub coarse_nx: usize,
    pub coarse_ny: usize,
    /// Second coarse grid for two-grid sweeps.
    pub coarse2: Option<(usize, usize)>,
    pub oversampling_layers: usize,
    pub forchheimer_scale: f64,
    pub viscosity: f64,
    pub density: f64,
    pub c_matrix: f64,
    pub c_fracture: f64,
    pub k_fracture: f64,
    pub tau: f64,
    pub n_steps: usize,
    pub initial_pressure: f64,
    pub field_source: FieldSource,
    /// Well coarse-cell indices; `None` picks the fractured coarse cells
    /// nearest the opposite domain corners.
    pub well_a: Option<usize>,
    pub well_b: Option<usize>,
    pub rate_a: f64,
    pub rate_b: f64,
    /// Rescale the production rate so the total source is exactly zero;
    /// a closed no-flux domain only admits a steady regime with balanced
    /// wells.
    pub balance_wells: bool,
    pub out_dir: PathBuf,
    pub snapshots: SnapshotSpec,
}

const KNOWN_KEYS: &[&str] = &[
    "fine_nx",
    "fine_ny",
    "domain_lx",
    "domain_ly",
    "coarse_nx",
    "coarse_ny",
    "coarse_nx2",
    "coarse_ny2",
    "oversampling_layers",
    "forchheimer_c",
    "mu",
    "rho",
    "c_m",
    "c_f",
    "k_f",
    "tau",
    "n_steps",
    "initial_pressure",
    "k_m_file",
    "fracture_file",
    "seed",
    "testcase",
    "well_a",
    "well_b",
    "f_a",
    "f_b",
    "balance_wells",
    "out_dir",
    "snapshot_layers",
];

/// Parse and validate a config file; unknown keys are rejected.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!(
        "cannot read {}: {}",
        path.display(),
        e
    )))?;
    let mut map: HashMap<String, String> = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        let key = key.trim().to_string();
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown key `{}`", key)));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!("duplicate key `{}`", key)));
        }
    }
    build_config(&map, path)
}

fn build_config(map: &HashMap<String, String>, path: &Path) -> Result<RunConfig> {
    let get = |key: &str| -> Result<&str> {
        map.get(key)
            .map(|s| s.as_str())
            .ok_or_else(|| Error::Config(format!("missing required key `{}`", key)))
    };
    let parse_usize = |key: &str, v: &str| -> Result<usize> {
        v.parse()
            .map_err(|_| Error::Config(format!("key `{}`: invalid count `{}`", key, v)))
    };
    let parse_f64 = |key: &str, v: &str| -> Result<f64> {
        v.parse()
            .map_err(|_| Error::Config(format!("key `{}`: invalid number `{}`", key, v)))
    };
    let required_usize = |key: &str| -> Result<usize> { parse_usize(key, get(key)?) };
    let required_f64 = |key: &str| -> Result<f64> { parse_f64(key, get(key)?) };
    let optional_f64 = |key: &str, default: f64| -> Result<f64> {
        match map.get(key) {
            Some(v) => parse_f64(key, v),
            None => Ok(default),
        }
    };
    let optional_usize = |key: &str| -> Result<Option<usize>> {
        match map.get(key) {
            Some(v) => Ok(Some(parse_usize(key, v)?)),
            None => Ok(None),
        }
    };

    let positive = |key: &str, v: f64| -> Result<f64> {
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::Config(format!("key `{}` must be positive, got {}", key, v)))
        }
    };

    let fine_nx = required_usize("fine_nx")?;
    let fine_ny = required_usize("fine_ny")?;
    let coarse_nx = required_usize("coarse_nx")?;
    let coarse_ny = required_usize("coarse_ny")?;
    let coarse2 = match (optional_usize("coarse_nx2")?, optional_usize("coarse_ny2")?) {
        (Some(nx), Some(ny)) => Some((nx, ny)),
        (None, None) => None,
        _ => {
            return Err(Error::Config(
                "coarse_nx2 and coarse_ny2 must be given together".into(),
            ))
        }
    };
    let oversampling_layers = match optional_usize("oversampling_layers")? {
        Some(s) if s >= 1 => s,
        Some(s) => {
            return Err(Error::Config(format!(
                "key `oversampling_layers` must be at least 1, got {}",
                s
            )))
        }
        None => 4,
    };
    let forchheimer_scale = optional_f64("forchheimer_c", 0.0)?;
    if forchheimer_scale < 0.0 {
        return Err(Error::Config(
            "key `forchheimer_c` must be nonnegative".into(),
        ));
    }
    let viscosity = positive("mu", required_f64("mu")?)?;
    let density = positive("rho", required_f64("rho")?)?;
    let c_matrix = positive("c_m", required_f64("c_m")?)?;
    let c_fracture = positive("c_f", required_f64("c_f")?)?;
    let k_fracture = positive("k_f", required_f64("k_f")?)?;
    let tau = positive("tau", required_f64("tau")?)?;
    let n_steps = required_usize("n_steps")?;
    if n_steps == 0 {
        return Err(Error::Config("key `n_steps` must be at least 1".into()));
    }
    let initial_pressure = optional_f64("initial_pressure", 0.0)?;
    let domain_lx = positive("domain_lx", optional_f64("domain_lx", 1.0)?)?;
    let domain_ly = positive("domain_ly", optional_f64("domain_ly", 1.0)?)?;

    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |v: &str| -> PathBuf {
        let p = PathBuf::from(v);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };
    let field_source = match (map.get("k_m_file"), map.get("fracture_file")) {
        (Some(k), Some(f)) => {
            if map.contains_key("seed") || map.contains_key("testcase") {
                return Err(Error::Config(
                    "give either field files or a generator seed, not both".into(),
                ));
            }
            FieldSource::Files {
                k_matrix: resolve(k),
                fractures: resolve(f),
            }
        }
        (None, None) => {
            let seed = match map.get("seed") {
                Some(v) => v
                    .parse()
                    .map_err(|_| Error::Config(format!("key `seed`: invalid seed `{}`", v)))?,
                None => {
                    return Err(Error::Config(
                        "need `k_m_file` + `fracture_file` or `seed` + `testcase`".into(),
                    ))
                }
            };
            let kind: TestCaseKind = get("testcase")?.parse()?;
            FieldSource::Generated { seed, kind }
        }
        _ => {
            return Err(Error::Config(
                "k_m_file and fracture_file must be given together".into(),
            ))
        }
    };

    let well_a = optional_usize("well_a")?;
    let well_b = optional_usize("well_b")?;
    if let (Some(a), Some(b)) = (well_a, well_b) {
        if a == b {
            return Err(Error::Config(
                "well_a and well_b must be different coarse cells".into(),
            ));
        }
    }
    let rate_a = optional_f64("f_a", 1e-3)?;
    let rate_b = optional_f64("f_b", -1e-3)?;
    let balance_wells = match map.get("balance_wells").map(|s| s.as_str()) {
        None | Some("true") => true,
        Some("false") => false,
        Some(other) => {
            return Err(Error::Config(format!(
                "key `balance_wells`: expected true or false, got `{}`",
                other
            )))
        }
    };

    let out_dir = resolve(map.get("out_dir").map(|s| s.as_str()).unwrap_or("out"));
    let snapshots = match map.get("snapshot_layers").map(|s| s.as_str()) {
        None | Some("final") => SnapshotSpec::FinalOnly,
        Some("all") => SnapshotSpec::All,
        Some(list) => {
            let layers: Result<Vec<usize>> = list
                .split(',')
                .map(|t| {
                    t.trim().parse().map_err(|_| {
                        Error::Config(format!("key `snapshot_layers`: invalid layer `{}`", t))
                    })
                })
                .collect();
            SnapshotSpec::Layers(layers?)
        }
    };

    Ok(RunConfig {
        fine_nx,
        fine_ny,
        domain_lx,
        domain_ly,
        coarse_nx,
        coarse_ny,
        coarse2,
        oversampling_layers,
        forchheimer_scale,
        viscosity,
        density,
        c_matrix,
        c_fracture,
        k_fracture,
        tau,
        n_steps,
        initial_pressure,
        field_source,
        well_a,
        well_b,
        rate_a,
        rate_b,
        balance_wells,
        out_dir,
        snapshots,
    })
}

impl RunConfig {
    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.tau, self.n_steps)
    }

    pub fn snapshot_layers(&self) -> Vec<usize> {
        match &self.snapshots {
            SnapshotSpec::FinalOnly => vec![self.n_steps],
            SnapshotSpec::All => (0..=self.n_steps).collect(),
            SnapshotSpec::Layers(layers) => layers.clone(),
        }
    }
}

/// A config realized into geometry, parameters, and sources.
pub struct Scenario {
    pub config: RunConfig,
    pub geom: Geometry,
    pub coarse: CoarseGrid,
    pub coarse2: Option<CoarseGrid>,
    pub k_matrix: Vec<f64>,
    pub fluid: FluidParams,
    pub well_a: usize,
    pub well_b: usize,
    pub sources: Sources,
}

impl Scenario {
    pub fn from_config(config: RunConfig) -> Result<Self> {
        let fm = build_fine_mesh(
            config.fine_nx,
            config.fine_ny,
            config.domain_lx,
            config.domain_ly,
        )?;
        let (k_matrix, segments) = match &config.field_source {
            FieldSource::Files {
                k_matrix,
                fractures,
            } => {
                let field = io::read_field_file(k_matrix, config.fine_nx, config.fine_ny)?;
                let segments = io::read_fracture_file(fractures)?;
                (field, segments)
            }
            FieldSource::Generated { seed, kind } => {
                let case = generate_testcase(*seed, *kind, &fm);
                (case.k_matrix, case.segments)
            }
        };
        if k_matrix.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::Config(
                "permeability field must be positive everywhere".into(),
            ));
        }
        let fractures = build_fracture_mesh(&segments, &fm)?;
        if fractures.n_cells() == 0 {
            return Err(Error::Config("the scenario has no fracture cells".into()));
        }
        let coarse = build_coarse_grid(&fm, &fractures, config.coarse_nx, config.coarse_ny)?;
        let coarse2 = match config.coarse2 {
            Some((nx, ny)) => Some(build_coarse_grid(&fm, &fractures, nx, ny)?),
            None => None,
        };
        let geom = Geometry::new(fm, fractures)?;
        let fluid = FluidParams::new(config.viscosity, config.density)?;

        let well_a = match config.well_a {
            Some(a) => a,
            None => nearest_fractured_cell(&coarse, &geom, (0.0, 0.0))?,
        };
        let well_b = match config.well_b {
            Some(b) => b,
            None => {
                let far = (config.domain_lx, config.domain_ly);
                let candidate = nearest_fractured_cell(&coarse, &geom, far)?;
                if candidate == well_a {
                    return Err(Error::Config(
                        "default well placement collapsed to one cell; set well_a/well_b".into(),
                    ));
                }
                candidate
            }
        };
        if well_a >= coarse.n_cells() || well_b >= coarse.n_cells() {
            return Err(Error::Config(format!(
                "well cells {}/{} outside the {}x{} coarse grid",
                well_a,
                well_b,
                coarse.nx(),
                coarse.ny()
            )));
        }

        let well_length = |j: usize| -> f64 {
            coarse.cell(j).networks.iter().map(|n| n.length).sum()
        };
        let (len_a, len_b) = (well_length(well_a), well_length(well_b));
        if len_a == 0.0 || len_b == 0.0 {
            return Err(Error::Config(format!(
                "well coarse cells {} / {} contain no fracture cells",
                well_a, well_b
            )));
        }
        let rate_b = if config.balance_wells {
            -config.rate_a * len_a / len_b
        } else {
            config.rate_b
        };
        let mut sources = Sources::zeros(&geom);
        for (j, rate) in [(well_a, config.rate_a), (well_b, rate_b)] {
            for network in &coarse.cell(j).networks {
                for &l in &network.fracture_cells {
                    sources.fracture[l] = rate;
                }
            }
        }

        Ok(Self {
            config,
            geom,
            coarse,
            coarse2,
            k_matrix,
            fluid,
            well_a,
            well_b,
            sources,
        })
    }

    /// Media parameters for a given Forchheimer scale C (beta = C/k).
    pub fn medium_params(&self, forchheimer_scale: f64) -> Result<MediumParams> {
        MediumParams::from_forchheimer_scale(
            self.k_matrix.clone(),
            vec![self.config.k_fracture; self.geom.fractures.n_cells()],
            forchheimer_scale,
            self.config.c_matrix,
            self.config.c_fracture,
        )
    }

    pub fn initial_state(&self) -> Vec<f64> {
        vec![self.config.initial_pressure; self.geom.n_dofs()]
    }
}

/// Fractured coarse cell whose center is nearest to a corner point.
fn nearest_fractured_cell(
    cg: &CoarseGrid,
    geom: &Geometry,
    point: (f64, f64),
) -> Result<usize> {
    let (lx, ly) = (geom.fine.lx(), geom.fine.ly());
    let mut best: Option<(f64, usize)> = None;
    for (j, cell) in cg.cells().iter().enumerate() {
        if cell.networks.is_empty() {
            continue;
        }
        let (cx, cy) = cg.cell_coords(j);
        let center = (
            (cx as f64 + 0.5) * lx / cg.nx() as f64,
            (cy as f64 + 0.5) * ly / cg.ny() as f64,
        );
        let d2 = (center.0 - point.0).powi(2) + (center.1 - point.1).powi(2);
        if best.map(|(bd, _)| d2 < bd).unwrap_or(true) {
            best = Some((d2, j));
        }
    }
    best.map(|(_, j)| j)
        .ok_or_else(|| Error::Config("no coarse cell contains fractures".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("case.cfg");
        std::fs::write(&path, body).unwrap();
        path
    }

    fn tempdir() -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "fracflow-config-{}-{:?}",
            std::process::id(),
            std::thread::current().id()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    const PAPER_DEFAULTS: &str = "\
# reference experiment configuration
fine_nx = 200
fine_ny = 200
coarse_nx = 20
coarse_ny = 20
oversampling_layers = 4
forchheimer_c = 1e4
mu = 8.0
rho = 1.0
c_m = 1.0
c_f = 1.0
k_f = 1e9
tau = 12500
n_steps = 100
seed = 2024
testcase = test1
";

    #[test]
    fn paper_defaults_parse() {
        let dir = tempdir();
        let path = write_config(&dir, PAPER_DEFAULTS);
        let cfg = parse_config(&path).unwrap();
        assert_eq!(cfg.viscosity, 8.0);
        assert_eq!(cfg.density, 1.0);
        assert_eq!(cfg.c_matrix, 1.0);
        assert_eq!(cfg.c_fracture, 1.0);
        assert_eq!(cfg.k_fracture, 1e9);
        assert_eq!(cfg.tau, 12500.0);
        assert_eq!(cfg.n_steps, 100);
        assert_eq!(cfg.forchheimer_scale, 1e4);
        assert_eq!(cfg.time_grid().unwrap().t_max(), 1.25e6);
        assert_eq!(cfg.oversampling_layers, 4);
        assert!(matches!(cfg.field_source, FieldSource::Generated { seed: 2024, .. }));
    }

    #[test]
    fn linear_case_is_valid() {
        let dir = tempdir();
        let path = write_config(&dir, &PAPER_DEFAULTS.replace("forchheimer_c = 1e4", "forchheimer_c = 0"));
        let cfg = parse_config(&path).unwrap();
        assert_eq!(cfg.forchheimer_scale, 0.0);
    }

    #[test]
    fn negative_viscosity_rejected_with_key_name() {
        let dir = tempdir();
        let path = write_config(&dir, &PAPER_DEFAULTS.replace("mu = 8.0", "mu = -3"));
        let err = parse_config(&path).unwrap_err();
        assert!(err.to_string().contains("mu"), "{}", err);
    }

    #[test]
    fn unknown_key_rejected() {
        let dir = tempdir();
        let path = write_config(&dir, &format!("{}mystery = 1\n", PAPER_DEFAULTS));
        let err = parse_config(&path).unwrap_err();
        assert!(err.to_string().contains("mystery"), "{}", err);
    }

    #[test]
    fn missing_required_key_rejected() {
        let dir = tempdir();
        let path = write_config(&dir, &PAPER_DEFAULTS.replace("tau = 12500\n", ""));
        let err = parse_config(&path).unwrap_err();
        assert!(err.to_string().contains("tau"), "{}", err);
    }

    #[test]
    fn generator_and_files_are_mutually_exclusive() {
        let dir = tempdir();
        let body = format!("{}k_m_file = k.txt\nfracture_file = f.txt\n", PAPER_DEFAULTS);
        let path = write_config(&dir, &body);
        assert!(parse_config(&path).is_err());
    }

    #[test]
    fn snapshot_specs_parse() {
        let dir = tempdir();
        let all = write_config(&dir, &format!("{}snapshot_layers = all\n", PAPER_DEFAULTS));
        assert_eq!(parse_config(&all).unwrap().snapshots, SnapshotSpec::All);
        let listed = write_config(&dir, &format!("{}snapshot_layers = 0, 30, 60\n", PAPER_DEFAULTS));
        assert_eq!(
            parse_config(&listed).unwrap().snapshots,
            SnapshotSpec::Layers(vec![0, 30, 60])
        );
        let final_only = write_config(&dir, PAPER_DEFAULTS);
        assert_eq!(
            parse_config(&final_only).unwrap().snapshots,
            SnapshotSpec::FinalOnly
        );
    }

    #[test]
    fn scenario_places_wells_in_fractured_cells() {
        let dir = tempdir();
        let body = PAPER_DEFAULTS
            .replace("fine_nx = 200", "fine_nx = 40")
            .replace("fine_ny = 200", "fine_ny = 40")
            .replace("coarse_nx = 20", "coarse_nx = 4")
            .replace("coarse_ny = 20", "coarse_ny = 4");
        let path = write_config(&dir, &body);
        let cfg = parse_config(&path).unwrap();
        let scenario = Scenario::from_config(cfg).unwrap();
        assert_ne!(scenario.well_a, scenario.well_b);
        assert!(!scenario.coarse.cell(scenario.well_a).networks.is_empty());
        assert!(!scenario.coarse.cell(scenario.well_b).networks.is_empty());
        let injected: f64 = scenario.sources.fracture.iter().filter(|&&f| f > 0.0).sum();
        assert!(injected > 0.0);
    }
}
