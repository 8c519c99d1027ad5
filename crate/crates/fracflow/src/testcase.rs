//! Seeded synthetic test cases: heterogeneous permeability fields and random
//! fracture networks, deterministic per seed.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::geometry::{FineMesh, Segment};

/// Heterogeneity style.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestCaseKind {
    /// Smooth lognormal-style field with contrast ~1e2.
    Test1,
    /// Channelized field with contrast >= 1e4 inside single coarse cells.
    Test2,
}

impl std::str::FromStr for TestCaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "test1" => Ok(TestCaseKind::Test1),
            "test2" => Ok(TestCaseKind::Test2),
            other => Err(Error::Config(format!(
                "key `testcase`: expected `test1` or `test2`, got `{}`",
                other
            ))),
        }
    }
}

pub struct GeneratedCase {
    pub k_matrix: Vec<f64>,
    pub segments: Vec<Segment>,
}

/// Deterministic field + fracture generator.
pub fn generate_testcase(seed: u64, kind: TestCaseKind, fm: &FineMesh) -> GeneratedCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let smooth = smooth_field(&mut rng, fm);
    let k_matrix = match kind {
        TestCaseKind::Test1 => {
            // map the unit field onto [1e-1, 1e1]: contrast exactly 1e2
            smooth.iter().map(|g| 10f64.powf(2.0 * g - 1.0)).collect()
        }
        TestCaseKind::Test2 => {
            // low-permeability background [1e-3, 1e-2] cut by channels in
            // [1e1, 1e2]: contrast >= 1e4, large jumps inside coarse cells
            let mut field: Vec<f64> = smooth.iter().map(|g| 10f64.powf(g - 3.0)).collect();
            let n_channels = 4 + (rng.random::<u32>() % 3) as usize;
            for _ in 0..n_channels {
                carve_channel(&mut rng, fm, &mut field);
            }
            field
        }
    };
    let n_fractures = 10 + (rng.random::<u32>() % 11) as usize;
    let mut segments = Vec::new();
    for _ in 0..n_fractures {
        random_polyline(&mut rng, fm, &mut segments);
    }
    GeneratedCase { k_matrix, segments }
}

/// Bilinear interpolation of lattice noise, normalized to [0, 1].
fn smooth_field(rng: &mut ChaCha8Rng, fm: &FineMesh) -> Vec<f64> {
    let lattice = 25usize;
    let noise: Vec<f64> = (0..lattice * lattice)
        .map(|_| rng.random::<f64>() * 2.0 - 1.0)
        .collect();
    let mut field = Vec::with_capacity(fm.n_cells());
    for i in 0..fm.n_cells() {
        let (x, y) = fm.centroid(i);
        let gx = (x / fm.lx()) * (lattice - 1) as f64;
        let gy = (y / fm.ly()) * (lattice - 1) as f64;
        let (ix, iy) = (
            (gx.floor() as usize).min(lattice - 2),
            (gy.floor() as usize).min(lattice - 2),
        );
        let (fx, fy) = (gx - ix as f64, gy - iy as f64);
        let at = |a: usize, b: usize| noise[b * lattice + a];
        let v = at(ix, iy) * (1.0 - fx) * (1.0 - fy)
            + at(ix + 1, iy) * fx * (1.0 - fy)
            + at(ix, iy + 1) * (1.0 - fx) * fy
            + at(ix + 1, iy + 1) * fx * fy;
        field.push(v);
    }
    let lo = field.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = field.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    field.iter().map(|v| (v - lo) / span).collect()
}

/// High-permeability band following a horizontal random walk.
fn carve_channel(rng: &mut ChaCha8Rng, fm: &FineMesh, field: &mut [f64]) {
    let mut iy = (rng.random::<f64>() * fm.ny() as f64) as usize % fm.ny();
    let magnitude = 10f64.powf(1.0 + rng.random::<f64>());
    let width = 1 + (rng.random::<u32>() % 2) as usize;
    for ix in 0..fm.nx() {
        for w in 0..width {
            let row = (iy + w).min(fm.ny() - 1);
            field[row * fm.nx() + ix] = magnitude;
        }
        // drift up or down one row at a time
        match rng.random::<u32>() % 3 {
            0 if iy + width < fm.ny() - 1 => iy += 1,
            1 if iy > 0 => iy -= 1,
            _ => {}
        }
    }
}

/// Connected polyline of 1..=3 segments, resampled until every vertex lies
/// inside the domain margins (clamping could fold pieces onto each other).
fn random_polyline(rng: &mut ChaCha8Rng, fm: &FineMesh, segments: &mut Vec<Segment>) {
    let margin = 0.02 * fm.lx().min(fm.ly());
    let inside = |p: (f64, f64)| -> bool {
        (margin..=fm.lx() - margin).contains(&p.0) && (margin..=fm.ly() - margin).contains(&p.1)
    };
    for _attempt in 0..64 {
        let n_pieces = 1 + (rng.random::<u32>() % 3) as usize;
        // short fractures, a few coarse cells each: a network must fit inside
        // the oversampled region of every cell it crosses, or its conductor
        // tail is truncated at the region boundary with no room to decay
        let total_length = (0.025 + 0.025 * rng.random::<f64>()) * fm.lx().min(fm.ly());
        let piece_length = total_length / n_pieces as f64;
        let mut angle = rng.random::<f64>() * std::f64::consts::TAU;
        let start = (
            margin + rng.random::<f64>() * (fm.lx() - 2.0 * margin),
            margin + rng.random::<f64>() * (fm.ly() - 2.0 * margin),
        );
        let mut points = vec![start];
        for _ in 0..n_pieces {
            let last = *points.last().unwrap();
            points.push((
                last.0 + piece_length * angle.cos(),
                last.1 + piece_length * angle.sin(),
            ));
            angle += rng.random::<f64>() * 0.8 - 0.4;
        }
        if points.iter().all(|&p| inside(p)) {
            for pair in points.windows(2) {
                segments.push(Segment::new(pair[0], pair[1]));
            }
            return;
        }
    }
    // pathological margins; place a short centered diagonal instead
    let center = (fm.lx() / 2.0, fm.ly() / 2.0);
    let step = 0.1 * fm.lx().min(fm.ly());
    segments.push(Segment::new(
        (center.0 - step, center.1 - step),
        (center.0 + step, center.1 + step),
    ));
}
