//! Latitude–longitude "web" grid with optional halving of the per-band cell
//! count toward the poles.
//!
//! Bands are uniform in latitude. Every cell is a coordinate rectangle
//! `[λ1, λ2] × [φ1, φ2]`; where a band has half as many cells as its
//! equator-side neighbour, the coarse cell's equator-side boundary is split
//! into two edges and the cell has five sides. Cells touching a pole have a
//! zero-length pole side, kept as a degenerate edge with no right cell.
//!
//! Edge endpoints are stored in the order the edge's *left* cell traverses
//! its boundary (counterclockwise seen from outside the sphere). The left
//! cell of a `λ = const` edge is the one at smaller `λ`; the left cell of a
//! `φ = const` edge is the one at smaller `φ`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::io::{self, Write};

use thiserror::Error;

use crate::geometry::{wrap_lambda, SpherePoint};

pub type CellId = usize;
pub type EdgeId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("n_lat must be even and at least 4, got {0}")]
    BadLatitudeCount(usize),
    #[error("n_lon_equator must be at least 4, got {0}")]
    BadLongitudeCount(usize),
    #[error("reduction threshold must be in (0, 1], got {0}")]
    BadThreshold(f64),
    #[error("band {band} (phi in [{phi1:.6}, {phi2:.6}]) needs halving but its cell count {count} is odd")]
    Indivisible {
        band: usize,
        phi1: f64,
        phi2: f64,
        count: usize,
    },
}

/// Pole-ward reduction of the per-band cell count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reduction {
    None,
    /// Halve the count when `cos(φ_mid) < threshold × count / n_lon_equator`.
    Halving { threshold: f64 },
}

/// Default halving threshold. Low enough thresholds leave fine bands at
/// high latitude, where the `λ` wave speed `∝ tan φ` forces tiny steps.
pub const DEFAULT_THRESHOLD: f64 = 0.9;

impl Default for Reduction {
    fn default() -> Self {
        Reduction::Halving {
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    /// Runs along a latitude circle (`φ = const`); crossed in the φ direction.
    Lambda,
    /// Runs along a meridian (`λ = const`); crossed in the λ direction.
    Phi,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeKind::Lambda => f.write_str("lambda"),
            EdgeKind::Phi => f.write_str("phi"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub phi1: f64,
    pub phi2: f64,
    pub n_cells: usize,
    /// Id of the band's first cell; cells of a band are contiguous.
    pub first_cell: CellId,
}

impl Band {
    pub fn phi_mid(&self) -> f64 {
        0.5 * (self.phi1 + self.phi2)
    }

    pub fn dlambda(&self) -> f64 {
        TAU / self.n_cells as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub lambda1: f64,
    pub lambda2: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub area: f64,
    /// Boundary edges in counterclockwise order with the orientation sign
    /// (+1 when this cell is the edge's left cell, −1 otherwise).
    pub edges: Vec<(EdgeId, f64)>,
    pub band_index: usize,
    pub cell_index: usize,
}

impl Cell {
    pub fn lambda_center(&self) -> f64 {
        0.5 * (self.lambda1 + self.lambda2)
    }

    pub fn phi_center(&self) -> f64 {
        0.5 * (self.phi1 + self.phi2)
    }

    pub fn center(&self) -> SpherePoint {
        SpherePoint::new(self.lambda_center(), self.phi_center()).expect("cell center on sphere")
    }

    pub fn dlambda(&self) -> f64 {
        self.lambda2 - self.lambda1
    }

    pub fn dphi(&self) -> f64 {
        self.phi2 - self.phi1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub kind: EdgeKind,
    /// Start point of the left cell's counterclockwise traversal.
    pub p1: SpherePoint,
    pub p2: SpherePoint,
    pub midpoint: SpherePoint,
    pub length: f64,
    pub left: CellId,
    /// `None` only for the zero-length pole sides.
    pub right: Option<CellId>,
}

impl Edge {
    pub fn is_degenerate(&self) -> bool {
        self.right.is_none()
    }

    /// The cell on the other side of the edge from `cell`.
    pub fn neighbor_of(&self, cell: CellId) -> Option<CellId> {
        if cell == self.left {
            self.right
        } else if Some(cell) == self.right {
            Some(self.left)
        } else {
            None
        }
    }
}

/// Exact area of the coordinate rectangle `[λ1, λ2] × [φ1, φ2]`.
pub fn cell_area(lambda1: f64, lambda2: f64, phi1: f64, phi2: f64) -> f64 {
    (lambda2 - lambda1) * (phi2.sin() - phi1.sin())
}

/// Longitude of the `i`-th of `n` equal subdivisions of `[0, 2π]`.
///
/// Written as `2π·i/n` so that `(2i, 2n)` rounds to exactly the same value
/// as `(i, n)`; coarse and fine bands then share bit-identical vertices.
fn lon(i: usize, n: usize) -> f64 {
    TAU * i as f64 / n as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n_lat: usize,
    n_lon_equator: usize,
    reduction: Reduction,
    bands: Vec<Band>,
    cells: Vec<Cell>,
    edges: Vec<Edge>,
    total_area: f64,
}

impl Grid {
    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id]
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_lat(&self) -> usize {
        self.n_lat
    }

    pub fn n_lon_equator(&self) -> usize {
        self.n_lon_equator
    }

    pub fn reduction(&self) -> Reduction {
        self.reduction
    }

    pub fn total_area(&self) -> f64 {
        self.total_area
    }

    pub fn areas(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.area).collect()
    }

    /// Cell of band `band` whose λ-range contains `lambda`.
    pub fn cell_in_band_at(&self, band: usize, lambda: f64) -> CellId {
        let b = &self.bands[band];
        let i = ((wrap_lambda(lambda) / TAU) * b.n_cells as f64).floor() as usize;
        b.first_cell + i.min(b.n_cells - 1)
    }

    /// Cell containing the point `(λ, φ)`; boundary points go to the
    /// northern / eastern cell.
    pub fn locate(&self, lambda: f64, phi: f64) -> CellId {
        let band = (((phi + FRAC_PI_2) / PI) * self.n_lat as f64).floor() as isize;
        let band = band.clamp(0, self.n_lat as isize - 1) as usize;
        self.cell_in_band_at(band, lambda)
    }

    /// Cells of `cell` across its `φ = const` sides, split into (south, north).
    pub fn lat_neighbors(&self, cell: CellId) -> (Vec<CellId>, Vec<CellId>) {
        let mut south = Vec::new();
        let mut north = Vec::new();
        for &(e, sign) in &self.cells[cell].edges {
            let edge = &self.edges[e];
            if edge.kind != EdgeKind::Lambda {
                continue;
            }
            if let Some(nb) = edge.neighbor_of(cell) {
                // this cell is the left (southern) cell of its northern sides
                if sign > 0.0 {
                    north.push(nb);
                } else {
                    south.push(nb);
                }
            }
        }
        (south, north)
    }

    /// Western and eastern neighbours within the band (periodic).
    pub fn lon_neighbors(&self, cell: CellId) -> (CellId, CellId) {
        let c = &self.cells[cell];
        let b = &self.bands[c.band_index];
        let n = b.n_cells;
        let i = c.cell_index;
        (b.first_cell + (i + n - 1) % n, b.first_cell + (i + 1) % n)
    }

    /// Writes `cell_id,band,lambda1,lambda2,phi1,phi2,area`.
    pub fn write_cells_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "cell_id,band,lambda1,lambda2,phi1,phi2,area")?;
        for (id, c) in self.cells.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                id, c.band_index, c.lambda1, c.lambda2, c.phi1, c.phi2, c.area
            )?;
        }
        Ok(())
    }

    /// Writes `edge_id,kind,l1,p1,l2,p2,left,right`; `right` is empty for
    /// degenerate pole edges.
    pub fn write_edges_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "edge_id,kind,l1,p1,l2,p2,left,right")?;
        for (id, e) in self.edges.iter().enumerate() {
            let right = e.right.map(|r| r.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                id, e.kind, e.p1.lambda, e.p1.phi, e.p2.lambda, e.p2.phi, e.left, right
            )?;
        }
        Ok(())
    }
}

/// Per-band cell counts, south to north.
fn band_counts(n_lat: usize, n_lon_equator: usize, reduction: Reduction) -> Result<Vec<usize>, GridError> {
    let half = n_lat / 2;
    let dphi = PI / n_lat as f64;
    // northern hemisphere, equator outward
    let mut north = Vec::with_capacity(half);
    let mut count = n_lon_equator;
    for k in 0..half {
        if let Reduction::Halving { threshold } = reduction {
            let phi_mid = (k as f64 + 0.5) * dphi;
            let ratio = count as f64 / n_lon_equator as f64;
            // at most one halving per band keeps every transition at ratio 2
            if k > 0 && phi_mid.cos() < threshold * ratio {
                if !count.is_multiple_of(2) {
                    let band = half + k;
                    return Err(GridError::Indivisible {
                        band,
                        phi1: k as f64 * dphi,
                        phi2: (k + 1) as f64 * dphi,
                        count,
                    });
                }
                count /= 2;
            }
        }
        north.push(count);
    }
    let mut counts: Vec<usize> = north.iter().rev().copied().collect();
    counts.extend(north);
    Ok(counts)
}

fn band_boundary(k: usize, n_lat: usize) -> f64 {
    if k == 0 {
        -FRAC_PI_2
    } else if k == n_lat {
        FRAC_PI_2
    } else {
        (k as f64 - (n_lat / 2) as f64) * (PI / n_lat as f64)
    }
}

fn point(lambda: f64, phi: f64) -> SpherePoint {
    SpherePoint::new(lambda, phi).expect("grid vertex on sphere")
}

/// Builds the web grid. `n_lat` uniform latitude bands; the two bands at the
/// equator carry `n_lon_equator` cells each.
pub fn build_grid(
    n_lat: usize,
    n_lon_equator: usize,
    reduction: Reduction,
) -> Result<Grid, GridError> {
    if n_lat < 4 || !n_lat.is_multiple_of(2) {
        return Err(GridError::BadLatitudeCount(n_lat));
    }
    if n_lon_equator < 4 {
        return Err(GridError::BadLongitudeCount(n_lon_equator));
    }
    if let Reduction::Halving { threshold } = reduction {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(GridError::BadThreshold(threshold));
        }
    }
    let counts = band_counts(n_lat, n_lon_equator, reduction)?;

    let mut bands = Vec::with_capacity(n_lat);
    let mut cells = Vec::new();
    for (b, &n) in counts.iter().enumerate() {
        let phi1 = band_boundary(b, n_lat);
        let phi2 = band_boundary(b + 1, n_lat);
        bands.push(Band {
            phi1,
            phi2,
            n_cells: n,
            first_cell: cells.len(),
        });
        for i in 0..n {
            let (lambda1, lambda2) = (lon(i, n), lon(i + 1, n));
            cells.push(Cell {
                lambda1,
                lambda2,
                phi1,
                phi2,
                area: cell_area(lambda1, lambda2, phi1, phi2),
                edges: Vec::new(),
                band_index: b,
                cell_index: i,
            });
        }
    }

    // Boundary pieces collected per cell side, then assembled in
    // counterclockwise order: bottom (λ ascending), east, top (λ descending), west.
    let n_cells = cells.len();
    let mut bottom: Vec<Vec<(EdgeId, f64)>> = vec![Vec::new(); n_cells];
    let mut top: Vec<Vec<(EdgeId, f64)>> = vec![Vec::new(); n_cells];
    let mut east: Vec<Option<(EdgeId, f64)>> = vec![None; n_cells];
    let mut west: Vec<Option<(EdgeId, f64)>> = vec![None; n_cells];
    let mut edges: Vec<Edge> = Vec::new();

    // meridian edges inside each band
    for band in &bands {
        let n = band.n_cells;
        for i in 0..n {
            let lambda = lon(i, n);
            let left = band.first_cell + (i + n - 1) % n;
            let right = band.first_cell + i;
            let id = edges.len();
            edges.push(Edge {
                kind: EdgeKind::Phi,
                p1: point(lambda, band.phi1),
                p2: point(lambda, band.phi2),
                midpoint: point(lambda, band.phi_mid()),
                length: band.phi2 - band.phi1,
                left,
                right: Some(right),
            });
            east[left] = Some((id, 1.0));
            west[right] = Some((id, -1.0));
        }
    }

    // south pole sides: traversed eastward
    let b0 = bands[0];
    for i in 0..b0.n_cells {
        let c = b0.first_cell + i;
        let (l1, l2) = (lon(i, b0.n_cells), lon(i + 1, b0.n_cells));
        let id = edges.len();
        edges.push(Edge {
            kind: EdgeKind::Lambda,
            p1: point(l1, -FRAC_PI_2),
            p2: point(l2, -FRAC_PI_2),
            midpoint: point(0.5 * (l1 + l2), -FRAC_PI_2),
            length: 0.0,
            left: c,
            right: None,
        });
        bottom[c].push((id, 1.0));
    }

    // latitude circles between bands
    for k in 1..n_lat {
        let below = bands[k - 1];
        let above = bands[k];
        let phi = below.phi2;
        let n_fine = below.n_cells.max(above.n_cells);
        for j in 0..n_fine {
            let (la, lb) = (lon(j, n_fine), lon(j + 1, n_fine));
            let left = below.first_cell + j * below.n_cells / n_fine;
            let right = above.first_cell + j * above.n_cells / n_fine;
            let id = edges.len();
            edges.push(Edge {
                kind: EdgeKind::Lambda,
                // top side of the southern cell runs westward
                p1: point(lb, phi),
                p2: point(la, phi),
                midpoint: point(0.5 * (la + lb), phi),
                length: (lb - la) * phi.cos(),
                left,
                right: Some(right),
            });
            top[left].push((id, 1.0));
            bottom[right].push((id, -1.0));
        }
    }

    // north pole sides: traversed westward
    let bn = bands[n_lat - 1];
    for i in 0..bn.n_cells {
        let c = bn.first_cell + i;
        let (l1, l2) = (lon(i, bn.n_cells), lon(i + 1, bn.n_cells));
        let id = edges.len();
        edges.push(Edge {
            kind: EdgeKind::Lambda,
            p1: point(l2, FRAC_PI_2),
            p2: point(l1, FRAC_PI_2),
            midpoint: point(0.5 * (l1 + l2), FRAC_PI_2),
            length: 0.0,
            left: c,
            right: None,
        });
        top[c].push((id, 1.0));
    }

    for (c, cell) in cells.iter_mut().enumerate() {
        let mut list = Vec::with_capacity(5);
        list.extend(bottom[c].iter().copied());
        list.push(east[c].expect("east side"));
        list.extend(top[c].iter().rev().copied());
        list.push(west[c].expect("west side"));
        cell.edges = list;
    }

    let total_area = cells.iter().map(|c| c.area).sum();
    Ok(Grid {
        n_lat,
        n_lon_equator,
        reduction,
        bands,
        cells,
        edges,
        total_area,
    })
}

/// A failed grid invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum GridViolation {
    CellArea { cell: CellId, stored: f64, expected: f64 },
    TotalArea { sum: f64 },
    EdgeLength { edge: EdgeId, stored: f64, expected: f64 },
    MissingNeighbor { edge: EdgeId },
    Orientation { edge: EdgeId, cell: CellId, detail: String },
    Tiling { band: usize, detail: String },
    SideCount { cell: CellId, count: usize },
}

impl fmt::Display for GridViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridViolation::CellArea { cell, stored, expected } => {
                write!(f, "cell {cell}: area {stored} != {expected}")
            }
            GridViolation::TotalArea { sum } => write!(f, "total area {sum} != 4pi"),
            GridViolation::EdgeLength { edge, stored, expected } => {
                write!(f, "edge {edge}: length {stored} != {expected}")
            }
            GridViolation::MissingNeighbor { edge } => {
                write!(f, "edge {edge}: non-degenerate edge without right cell")
            }
            GridViolation::Orientation { edge, cell, detail } => {
                write!(f, "edge {edge}, cell {cell}: {detail}")
            }
            GridViolation::Tiling { band, detail } => write!(f, "band {band}: {detail}"),
            GridViolation::SideCount { cell, count } => {
                write!(f, "cell {cell}: {count} sides")
            }
        }
    }
}

/// Checks every grid invariant; an empty list means the grid is valid.
pub fn validate_grid(grid: &Grid) -> Vec<GridViolation> {
    let mut out = Vec::new();

    for (id, c) in grid.cells.iter().enumerate() {
        let expected = cell_area(c.lambda1, c.lambda2, c.phi1, c.phi2);
        if (c.area - expected).abs() > 1e-14 {
            out.push(GridViolation::CellArea {
                cell: id,
                stored: c.area,
                expected,
            });
        }
        if !(4..=5).contains(&c.edges.len()) {
            out.push(GridViolation::SideCount {
                cell: id,
                count: c.edges.len(),
            });
        }
    }
    let sum: f64 = grid.cells.iter().map(|c| c.area).sum();
    if (sum - 4.0 * PI).abs() > 1e-10 {
        out.push(GridViolation::TotalArea { sum });
    }

    for (id, e) in grid.edges.iter().enumerate() {
        let expected = match e.kind {
            EdgeKind::Lambda => {
                if e.p1.is_pole() {
                    0.0
                } else {
                    // p1 is the eastern end of every non-pole latitude edge
                    let span = wrap_lambda(e.p1.lambda - e.p2.lambda);
                    let span = if span == 0.0 { TAU } else { span };
                    span * e.p1.phi.cos()
                }
            }
            EdgeKind::Phi => e.p2.phi - e.p1.phi,
        };
        if (e.length - expected).abs() > 1e-14 {
            out.push(GridViolation::EdgeLength {
                edge: id,
                stored: e.length,
                expected,
            });
        }
        let lists = |cell: CellId, sign: f64| {
            grid.cells
                .get(cell)
                .map(|c| c.edges.iter().any(|&(eid, s)| eid == id && s == sign))
                .unwrap_or(false)
        };
        if !lists(e.left, 1.0) {
            out.push(GridViolation::Orientation {
                edge: id,
                cell: e.left,
                detail: "left cell does not list the edge with sign +1".into(),
            });
        }
        match e.right {
            Some(r) => {
                if !lists(r, -1.0) {
                    out.push(GridViolation::Orientation {
                        edge: id,
                        cell: r,
                        detail: "right cell does not list the edge with sign -1".into(),
                    });
                }
            }
            None => {
                if e.length != 0.0 {
                    out.push(GridViolation::MissingNeighbor { edge: id });
                }
            }
        }
    }

    // every (edge, sign) a cell lists must be backed by the edge itself
    for (id, c) in grid.cells.iter().enumerate() {
        for &(eid, sign) in &c.edges {
            let ok = grid.edges.get(eid).is_some_and(|e| {
                (sign > 0.0 && e.left == id) || (sign < 0.0 && e.right == Some(id))
            });
            if !ok {
                out.push(GridViolation::Orientation {
                    edge: eid,
                    cell: id,
                    detail: format!("cell lists the edge with sign {sign} but is not on that side"),
                });
            }
        }
    }

    for (b, band) in grid.bands.iter().enumerate() {
        let cells = &grid.cells[band.first_cell..band.first_cell + band.n_cells];
        if cells[0].lambda1 != 0.0 {
            out.push(GridViolation::Tiling {
                band: b,
                detail: format!("first cell starts at {}", cells[0].lambda1),
            });
        }
        for w in cells.windows(2) {
            if (w[0].lambda2 - w[1].lambda1).abs() > 1e-12 {
                out.push(GridViolation::Tiling {
                    band: b,
                    detail: format!("gap/overlap at lambda {}", w[0].lambda2),
                });
            }
        }
        let last = cells[cells.len() - 1].lambda2;
        if (last - TAU).abs() > 1e-12 {
            out.push(GridViolation::Tiling {
                band: b,
                detail: format!("last cell ends at {last}"),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cell_area_formula() {
        assert!((cell_area(0.0, PI / 2.0, 0.0, PI / 2.0) - PI / 2.0).abs() < 1e-15);
        assert!((cell_area(0.0, TAU, -FRAC_PI_2, FRAC_PI_2) - 4.0 * PI).abs() < 1e-14);
        let a = cell_area(0.0, 0.1, 0.2, 0.3);
        assert_eq!(a, 0.1 * ((0.3f64).sin() - (0.2f64).sin()));
    }

    #[test]
    fn tensor_grid_4x8() {
        let g = build_grid(4, 8, Reduction::None).unwrap();
        assert_eq!(g.n_cells(), 32);
        assert!(g.cells().iter().all(|c| c.edges.len() == 4));
        let pole_cells = g
            .cells()
            .iter()
            .filter(|c| c.edges.iter().any(|&(e, _)| g.edge(e).length == 0.0))
            .count();
        assert_eq!(pole_cells, 16); // 8 at each pole
        assert_eq!(g.edges().iter().filter(|e| e.is_degenerate()).count(), 16);
        assert!((g.total_area() - 4.0 * PI).abs() < 1e-10);
        assert!(validate_grid(&g).is_empty());
    }

    #[test]
    fn halving_rule_on_60_by_256() {
        let g = build_grid(60, 256, Reduction::Halving { threshold: 0.5 }).unwrap();
        let dphi = PI / 60.0;
        // independent enumeration of the rule on the northern bands
        let mut count = 256usize;
        for k in 0..30 {
            let phi_mid = (k as f64 + 0.5) * dphi;
            if k > 0 && phi_mid.cos() < 0.5 * count as f64 / 256.0 {
                count /= 2;
            }
            assert_eq!(g.bands()[30 + k].n_cells, count, "band {}", 30 + k);
            assert_eq!(g.bands()[29 - k].n_cells, count, "band {}", 29 - k);
        }
        assert_eq!(g.bands()[30].n_cells, 256);
        // first band with cos(phi_mid) < 0.5 has 128 cells
        let first = g
            .bands()
            .iter()
            .skip(30)
            .find(|b| b.phi_mid().cos() < 0.5)
            .unwrap();
        assert_eq!(first.n_cells, 128);
        assert!(validate_grid(&g).is_empty());
    }

    #[test]
    fn five_sided_cells_sit_at_reductions() {
        let g = build_grid(24, 64, Reduction::Halving { threshold: 0.5 }).unwrap();
        let half = g.n_lat() / 2;
        for (id, c) in g.cells().iter().enumerate() {
            let b = c.band_index;
            let equatorward = if b > half {
                Some(b - 1)
            } else if b + 1 < half {
                Some(b + 1)
            } else {
                None
            };
            let reduced = equatorward
                .is_some_and(|q| g.bands()[q].n_cells == 2 * g.bands()[b].n_cells);
            assert_eq!(c.edges.len() == 5, reduced, "cell {id} in band {b}");
            if reduced {
                // the split side covers exactly the coarse cell's λ-extent
                let (south, north) = g.lat_neighbors(id);
                let fine = if b >= half { south } else { north };
                assert_eq!(fine.len(), 2);
                let f0 = g.cell(fine[0]);
                let f1 = g.cell(fine[1]);
                assert_eq!(f0.lambda1.min(f1.lambda1), c.lambda1);
                assert_eq!(f0.lambda2.max(f1.lambda2), c.lambda2);
            }
        }
        assert!(g.cells().iter().any(|c| c.edges.len() == 5));
    }

    #[test]
    fn indivisible_count_is_reported() {
        let err = build_grid(60, 12, Reduction::Halving { threshold: 0.5 }).unwrap_err();
        match err {
            GridError::Indivisible { count, .. } => assert_eq!(count, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("band"));
        assert!(build_grid(5, 16, Reduction::None).is_err());
        assert!(build_grid(4, 3, Reduction::None).is_err());
        assert!(build_grid(4, 8, Reduction::Halving { threshold: 0.0 }).is_err());
    }

    #[test]
    fn corrupted_area_is_one_violation() {
        let mut g = build_grid(8, 16, Reduction::default()).unwrap();
        g.cells[5].area *= 1.001;
        let v = validate_grid(&g);
        // the total-area check also notices, but exactly one cell is named
        let cells: Vec<_> = v
            .iter()
            .filter_map(|x| match x {
                GridViolation::CellArea { cell, .. } => Some(*cell),
                _ => None,
            })
            .collect();
        assert_eq!(cells, vec![5]);
    }

    #[test]
    fn missing_twin_is_one_topology_violation() {
        let mut g = build_grid(8, 16, Reduction::default()).unwrap();
        let e = 3;
        let r = g.edges[e].right.unwrap();
        g.cells[r].edges.retain(|&(id, _)| id != e);
        let v = validate_grid(&g);
        let topo: Vec<_> = v
            .iter()
            .filter(|x| matches!(x, GridViolation::Orientation { .. }))
            .collect();
        assert_eq!(topo.len(), 1, "{v:?}");
    }

    #[test]
    fn edge_geometry() {
        let g = build_grid(12, 32, Reduction::default()).unwrap();
        for e in g.edges() {
            match e.kind {
                EdgeKind::Lambda => {
                    assert_eq!(e.p1.phi, e.p2.phi);
                    assert_eq!(e.midpoint.phi, e.p1.phi);
                }
                EdgeKind::Phi => {
                    assert_eq!(e.p1.lambda, e.p2.lambda);
                    assert!((e.midpoint.phi - 0.5 * (e.p1.phi + e.p2.phi)).abs() < 1e-15);
                    assert!(e.p2.phi > e.p1.phi);
                }
            }
        }
    }

    #[test]
    fn dumps_have_one_row_per_item() {
        let g = build_grid(4, 8, Reduction::None).unwrap();
        let mut cells = Vec::new();
        g.write_cells_csv(&mut cells).unwrap();
        let text = String::from_utf8(cells).unwrap();
        assert_eq!(text.lines().count(), 33);
        assert!(text.starts_with("cell_id,band,lambda1,lambda2,phi1,phi2,area\n"));
        let mut edges = Vec::new();
        g.write_edges_csv(&mut edges).unwrap();
        let text = String::from_utf8(edges).unwrap();
        assert_eq!(text.lines().count(), g.edges().len() + 1);
        assert!(text.lines().any(|l| l.ends_with(',')));
    }

    #[test]
    fn locate_finds_containing_cell() {
        let g = build_grid(24, 64, Reduction::default()).unwrap();
        for (id, c) in g.cells().iter().enumerate() {
            assert_eq!(g.locate(c.lambda_center(), c.phi_center()), id);
        }
    }

    proptest! {
        #[test]
        fn areas_partition_the_sphere(half in 2usize..40, pow in 2u32..8, mult in 1usize..4, halving in any::<bool>(), thr in 0.3f64..1.0) {
            let n_lon = mult * (1 << pow);
            let red = if halving { Reduction::Halving { threshold: thr } } else { Reduction::None };
            if let Ok(g) = build_grid(2 * half, n_lon, red) {
                prop_assert!((g.total_area() - 4.0 * PI).abs() < 1e-10);
                let v = validate_grid(&g);
                prop_assert!(v.is_empty(), "{:?}", v);
            }
        }
    }
}
