use std::collections::BTreeSet;

use super::fine::FineMesh;
use crate::error::{Error, Result};

/// Input fracture segment in domain coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: (f64, f64),
    pub end: (f64, f64),
}

impl Segment {
    pub fn new(start: (f64, f64), end: (f64, f64)) -> Self {
        Self { start, end }
    }

    pub fn length(&self) -> f64 {
        let dx = self.end.0 - self.start.0;
        let dy = self.end.1 - self.start.1;
        (dx * dx + dy * dy).sqrt()
    }
}

/// One fracture cell ι_l, lying inside a single matrix cell.
#[derive(Debug, Clone, Copy)]
pub struct FractureCell {
    pub start: (f64, f64),
    pub end: (f64, f64),
    pub midpoint: (f64, f64),
    pub length: f64,
    /// Connected component of the endpoint-sharing graph.
    pub network: usize,
}

/// Pair of fracture cells sharing an endpoint.
#[derive(Debug, Clone, Copy)]
pub struct FractureAdjacency {
    /// Cell pair, lower index first.
    pub cells: (usize, usize),
    /// Distance between cell midpoints d^f.
    pub distance: f64,
}

/// One-dimensional fracture mesh conforming to the matrix cells.
#[derive(Debug, Clone, Default)]
pub struct FractureMesh {
    cells: Vec<FractureCell>,
    adjacency: Vec<FractureAdjacency>,
    n_networks: usize,
}

impl FractureMesh {
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[FractureCell] {
        &self.cells
    }

    pub fn cell(&self, l: usize) -> &FractureCell {
        &self.cells[l]
    }

    pub fn adjacency(&self) -> &[FractureAdjacency] {
        &self.adjacency
    }

    pub fn n_networks(&self) -> usize {
        self.n_networks
    }

    pub fn total_length(&self) -> f64 {
        self.cells.iter().map(|c| c.length).sum()
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = i;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Subdivide input segments at every matrix-cell boundary crossing so that
/// each fracture cell lies inside exactly one matrix cell, then build the
/// endpoint-sharing adjacency and label connected networks.
pub fn build_fracture_mesh(segments: &[Segment], mesh: &FineMesh) -> Result<FractureMesh> {
    let mut cells: Vec<FractureCell> = Vec::new();
    let diag = (mesh.hx() * mesh.hx() + mesh.hy() * mesh.hy()).sqrt();

    for (s_idx, seg) in segments.iter().enumerate() {
        if seg.length() == 0.0 {
            return Err(Error::InvalidFracture(format!(
                "segment {} is degenerate (zero length)",
                s_idx
            )));
        }
        if !mesh.contains(seg.start.0, seg.start.1) || !mesh.contains(seg.end.0, seg.end.1) {
            return Err(Error::InvalidFracture(format!(
                "segment {} lies outside the domain",
                s_idx
            )));
        }
        for piece in subdivide(seg, mesh) {
            cells.push(piece);
        }
    }

    // endpoint clustering: exact coordinate match within 1e-12 of the cell
    // diagonal defines a shared endpoint
    let tol = 1e-12 * diag;
    let mut endpoints: Vec<(f64, f64, usize)> = Vec::with_capacity(2 * cells.len());
    for (l, c) in cells.iter().enumerate() {
        endpoints.push((c.start.0, c.start.1, l));
        endpoints.push((c.end.0, c.end.1, l));
    }
    let order = {
        let mut idx: Vec<usize> = (0..endpoints.len()).collect();
        idx.sort_by(|&a, &b| {
            let (pa, pb) = (&endpoints[a], &endpoints[b]);
            (pa.0, pa.1).partial_cmp(&(pb.0, pb.1)).unwrap()
        });
        idx
    };
    let mut point_groups = UnionFind::new(endpoints.len());
    for (rank, &a) in order.iter().enumerate() {
        for &b in order[rank + 1..].iter() {
            if endpoints[b].0 - endpoints[a].0 > tol {
                break;
            }
            let dy = endpoints[b].1 - endpoints[a].1;
            let dx = endpoints[b].0 - endpoints[a].0;
            if (dx * dx + dy * dy).sqrt() <= tol {
                point_groups.union(a, b);
            }
        }
    }

    // adjacency pairs and network components follow from shared endpoints
    let mut by_group: Vec<(usize, usize)> = (0..endpoints.len())
        .map(|e| (point_groups.find(e), endpoints[e].2))
        .collect();
    by_group.sort_unstable();
    let mut networks = UnionFind::new(cells.len());
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut g = 0;
    while g < by_group.len() {
        let mut h = g;
        while h < by_group.len() && by_group[h].0 == by_group[g].0 {
            h += 1;
        }
        let members: Vec<usize> = by_group[g..h].iter().map(|&(_, l)| l).collect();
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                let (a, b) = (members[i].min(members[j]), members[i].max(members[j]));
                if a != b {
                    pairs.insert((a, b));
                    networks.union(a, b);
                }
            }
        }
        g = h;
    }

    let mut adjacency = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let (ma, mb) = (cells[a].midpoint, cells[b].midpoint);
        let distance = ((ma.0 - mb.0).powi(2) + (ma.1 - mb.1).powi(2)).sqrt();
        if distance <= 0.0 {
            return Err(Error::InvalidFracture(format!(
                "fracture cells {} and {} have coincident midpoints",
                a, b
            )));
        }
        adjacency.push(FractureAdjacency {
            cells: (a, b),
            distance,
        });
    }

    // relabel components in order of first appearance over the cell index
    let mut label_of_root = std::collections::HashMap::new();
    let mut n_networks = 0;
    for l in 0..cells.len() {
        let root = networks.find(l);
        let label = *label_of_root.entry(root).or_insert_with(|| {
            let next = n_networks;
            n_networks += 1;
            next
        });
        cells[l].network = label;
    }

    Ok(FractureMesh {
        cells,
        adjacency,
        n_networks,
    })
}

/// Split one segment at interior grid-line crossings.
fn subdivide(seg: &Segment, mesh: &FineMesh) -> Vec<FractureCell> {
    let (x0, y0) = seg.start;
    let (x1, y1) = seg.end;
    let mut ts = vec![0.0, 1.0];
    collect_crossings(x0, x1, mesh.hx(), mesh.nx(), &mut ts);
    collect_crossings(y0, y1, mesh.hy(), mesh.ny(), &mut ts);
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut pieces = Vec::with_capacity(ts.len() - 1);
    for w in ts.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        if tb - ta < 1e-12 {
            continue;
        }
        let pa = (x0 + ta * (x1 - x0), y0 + ta * (y1 - y0));
        let pb = (x0 + tb * (x1 - x0), y0 + tb * (y1 - y0));
        let length = ((pb.0 - pa.0).powi(2) + (pb.1 - pa.1).powi(2)).sqrt();
        if length == 0.0 {
            continue;
        }
        pieces.push(FractureCell {
            start: pa,
            end: pb,
            midpoint: ((pa.0 + pb.0) / 2.0, (pa.1 + pb.1) / 2.0),
            length,
            network: usize::MAX,
        });
    }
    pieces
}

fn collect_crossings(c0: f64, c1: f64, h: f64, n: usize, ts: &mut Vec<f64>) {
    if (c1 - c0).abs() < f64::EPSILON {
        return;
    }
    let (lo, hi) = if c0 < c1 { (c0, c1) } else { (c1, c0) };
    let first = (lo / h).ceil() as isize;
    let last = (hi / h).floor() as isize;
    for k in first..=last {
        if k <= 0 || k >= n as isize {
            continue;
        }
        let x = k as f64 * h;
        if x > lo && x < hi {
            ts.push((x - c0) / (c1 - c0));
        }
    }
}
