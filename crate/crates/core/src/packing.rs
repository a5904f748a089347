//! Stable polyomino packing of disconnected components.
//!
//! Each component layout is rasterized to a polyomino mask on a grid of
//! `cell_size` layout units, and masks are placed on an unbounded shared
//! grid by integer offsets. A placement at offset `(dc, dr)` shifts the
//! component by `(dc, dr) · cell_size` in layout units.
//!
//! [`pack`] is the incremental step: components placed last tick try to keep
//! their offset and otherwise take the nearest free offset around it.
//! [`refresh_pack`] recompacts from scratch around the origin, in the spirit
//! of the classic polyomino packer.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use thiserror::Error;

use crate::geom::{self, Point};
use crate::layout::ComponentLayout;

/// `(col, row)` grid coordinates.
pub type Cell = (i64, i64);

/// Cell size used when no component has a positive diameter.
pub const FALLBACK_CELL_SIZE: f64 = 0.1;

// shrink applied to the half-open cell so a shape touching only its
// right/top edge does not claim it
const HALF_OPEN_EPS: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum PackError {
    #[error("component id `{0}` appears more than once")]
    DuplicateComponent(String),
    #[error("mask cell sizes differ ({0} vs {1})")]
    CellSizeMismatch(f64, f64),
}

/// Rasterized footprint of one component.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyominoMask {
    cell_size: f64,
    /// Relative to `origin`; the minimum column and row are both 0.
    cells: BTreeSet<Cell>,
    /// Absolute layout-grid cell of the mask's `(0, 0)`.
    origin: Cell,
}

impl PolyominoMask {
    /// Builds a mask from absolute layout-grid cells.
    pub fn from_absolute_cells(cell_size: f64, cells: impl IntoIterator<Item = Cell>) -> Self {
        let abs: BTreeSet<Cell> = cells.into_iter().collect();
        let origin = match (abs.iter().map(|c| c.0).min(), abs.iter().map(|c| c.1).min()) {
            (Some(c), Some(r)) => (c, r),
            _ => (0, 0),
        };
        PolyominoMask {
            cell_size,
            cells: abs.iter().map(|&(c, r)| (c - origin.0, r - origin.1)).collect(),
            origin,
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Cells relative to the mask's own origin.
    pub fn cells(&self) -> &BTreeSet<Cell> {
        &self.cells
    }

    pub fn origin(&self) -> Cell {
        self.origin
    }

    /// Layout-unit position of the corner of cell `(0, 0)`.
    pub fn anchor(&self) -> Point {
        Point::new(
            self.origin.0 as f64 * self.cell_size,
            self.origin.1 as f64 * self.cell_size,
        )
    }

    pub fn absolute_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let (oc, or) = self.origin;
        self.cells.iter().map(move |&(c, r)| (c + oc, r + or))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Mean absolute cell coordinate.
    fn centroid(&self) -> Point {
        geom::centroid(self.absolute_cells().map(|(c, r)| Point::new(c as f64, r as f64)))
            .unwrap_or(Point::ORIGIN)
    }
}

/// All grid cells meeting the convex hull of the node positions dilated by
/// `margin`. Cells are treated as half-open squares `[c, c+1) × [r, r+1)`.
pub fn rasterize(layout: &ComponentLayout, cell_size: f64, margin: f64) -> PolyominoMask {
    assert!(cell_size > 0.0, "cell size must be positive");
    assert!(margin >= 0.0, "margin must be non-negative");
    let scaled: Vec<Point> = layout
        .positions
        .values()
        .map(|p| Point::new(p.x / cell_size, p.y / cell_size))
        .collect();
    if scaled.is_empty() {
        return PolyominoMask::from_absolute_cells(cell_size, []);
    }
    let hull = geom::convex_hull(&scaled);
    let m = margin / cell_size;
    let min_x = hull.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) - m;
    let max_x = hull.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) + m;
    let min_y = hull.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) - m;
    let max_y = hull.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) + m;

    let mut cells = Vec::new();
    for c in (min_x.floor() as i64 - 1)..=(max_x.floor() as i64 + 1) {
        for r in (min_y.floor() as i64 - 1)..=(max_y.floor() as i64 + 1) {
            let lo = Point::new(c as f64, r as f64);
            let hi = Point::new(c as f64 + 1.0 - HALF_OPEN_EPS, r as f64 + 1.0 - HALF_OPEN_EPS);
            if hull_rect_distance(&hull, lo, hi) <= m {
                cells.push((c, r));
            }
        }
    }
    PolyominoMask::from_absolute_cells(cell_size, cells)
}

fn point_rect_distance(p: Point, lo: Point, hi: Point) -> f64 {
    let dx = (lo.x - p.x).max(0.0).max(p.x - hi.x);
    let dy = (lo.y - p.y).max(0.0).max(p.y - hi.y);
    dx.hypot(dy)
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o = |p: Point, q: Point, r: Point| q.sub(p).cross(r.sub(p));
    let (d1, d2, d3, d4) = (o(c, d, a), o(c, d, b), o(a, b, c), o(a, b, d));
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Distance between a convex hull (point, segment or CCW polygon) and the
/// closed rectangle `[lo, hi]`.
fn hull_rect_distance(hull: &[Point], lo: Point, hi: Point) -> f64 {
    if hull.iter().any(|&p| point_rect_distance(p, lo, hi) == 0.0) {
        return 0.0;
    }
    let corners = [lo, Point::new(hi.x, lo.y), hi, Point::new(lo.x, hi.y)];
    if hull.len() >= 3 {
        let inside = |q: Point| {
            (0..hull.len()).all(|i| hull[(i + 1) % hull.len()].sub(hull[i]).cross(q.sub(hull[i])) >= 0.0)
        };
        if corners.iter().any(|&q| inside(q)) {
            return 0.0;
        }
    }
    let edges: Vec<(Point, Point)> = match hull.len() {
        1 => return point_rect_distance(hull[0], lo, hi),
        2 => vec![(hull[0], hull[1])],
        n => (0..n).map(|i| (hull[i], hull[(i + 1) % n])).collect(),
    };
    let mut best = f64::INFINITY;
    for &(a, b) in &edges {
        for i in 0..4 {
            let (c, d) = (corners[i], corners[(i + 1) % 4]);
            if segments_intersect(a, b, c, d) {
                return 0.0;
            }
        }
        best = best.min(point_rect_distance(a, lo, hi)).min(point_rect_distance(b, lo, hi));
        for &q in &corners {
            best = best.min(geom::point_segment_dist(q, a, b));
        }
    }
    best
}

/// Where one component sits on the shared grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    pub offset: Cell,
    /// Absolute layout-grid cells of the mask, before the offset.
    pub mask_cells: Vec<Cell>,
}

impl Placement {
    pub fn occupied_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let (dc, dr) = self.offset;
        self.mask_cells.iter().map(move |&(c, r)| (c + dc, r + dr))
    }

    pub fn cell_count(&self) -> usize {
        self.mask_cells.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackingState {
    pub placements: BTreeMap<String, Placement>,
    /// Owner of every occupied cell.
    pub occupied: BTreeMap<Cell, String>,
    pub cell_size: f64,
    pub ticks_since_refresh: u64,
}

impl PackingState {
    pub fn empty(cell_size: f64) -> Self {
        PackingState {
            placements: BTreeMap::new(),
            occupied: BTreeMap::new(),
            cell_size,
            ticks_since_refresh: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.placements.is_empty()
    }

    pub fn offset(&self, id: &str) -> Option<Cell> {
        self.placements.get(id).map(|p| p.offset)
    }

    /// Translation in layout units for a component.
    pub fn translation(&self, id: &str) -> Option<Point> {
        self.offset(id).map(|(c, r)| {
            Point::new(c as f64 * self.cell_size, r as f64 * self.cell_size)
        })
    }

    fn from_placements(
        placements: BTreeMap<String, Placement>,
        cell_size: f64,
        ticks_since_refresh: u64,
    ) -> Self {
        let mut occupied = BTreeMap::new();
        for (id, p) in &placements {
            for cell in p.occupied_cells() {
                let prev = occupied.insert(cell, id.clone());
                debug_assert!(prev.is_none(), "cell {cell:?} claimed twice");
            }
        }
        PackingState {
            placements,
            occupied,
            cell_size,
            ticks_since_refresh,
        }
    }
}

/// One step of a packing run, in processing order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementRecord {
    pub id: String,
    /// Offset the scan started from.
    pub target: Cell,
    pub offset: Cell,
}

/// Candidate offsets around a target, ordered by squared distance, then
/// column, then row. Unbounded.
pub struct ScanOrder {
    target: Cell,
    band: Vec<(i64, i64)>,
    pos: usize,
    radius: i64,
}

const SCAN_BAND: i64 = 8;

impl ScanOrder {
    pub fn new(target: Cell) -> Self {
        ScanOrder {
            target,
            band: Vec::new(),
            pos: 0,
            radius: 0,
        }
    }

    fn refill(&mut self) {
        // band covers squared distances in [lo², hi²)
        let (lo, hi) = (self.radius, self.radius + SCAN_BAND);
        let (lo2, hi2) = (lo * lo, hi * hi);
        self.band.clear();
        for dx in -hi..=hi {
            for dy in -hi..=hi {
                let d2 = dx * dx + dy * dy;
                if d2 >= lo2 && d2 < hi2 {
                    self.band.push((dx, dy));
                }
            }
        }
        self.band.sort_by_key(|&(dx, dy)| (dx * dx + dy * dy, dx, dy));
        self.pos = 0;
        self.radius = hi;
    }
}

impl Iterator for ScanOrder {
    type Item = Cell;

    fn next(&mut self) -> Option<Cell> {
        while self.pos >= self.band.len() {
            self.refill();
        }
        let (dx, dy) = self.band[self.pos];
        self.pos += 1;
        Some((self.target.0 + dx, self.target.1 + dy))
    }
}

struct Grid {
    occupied: HashSet<Cell>,
    bbox: Option<(Cell, Cell)>,
    sum: (f64, f64),
}

impl Grid {
    fn new() -> Self {
        Grid {
            occupied: HashSet::new(),
            bbox: None,
            sum: (0.0, 0.0),
        }
    }

    fn fits(&self, cells: &[Cell], cells_bbox: (Cell, Cell), offset: Cell) -> bool {
        let Some((lo, hi)) = self.bbox else {
            return true;
        };
        let (clo, chi) = cells_bbox;
        if clo.0 + offset.0 > hi.0 || chi.0 + offset.0 < lo.0 || clo.1 + offset.1 > hi.1 || chi.1 + offset.1 < lo.1 {
            return true;
        }
        cells
            .iter()
            .all(|&(c, r)| !self.occupied.contains(&(c + offset.0, r + offset.1)))
    }

    fn insert(&mut self, cells: &[Cell], offset: Cell) {
        for &(c, r) in cells {
            let cell = (c + offset.0, r + offset.1);
            self.occupied.insert(cell);
            self.sum.0 += cell.0 as f64;
            self.sum.1 += cell.1 as f64;
            self.bbox = Some(match self.bbox {
                None => (cell, cell),
                Some((lo, hi)) => (
                    (lo.0.min(cell.0), lo.1.min(cell.1)),
                    (hi.0.max(cell.0), hi.1.max(cell.1)),
                ),
            });
        }
    }

    fn centroid(&self) -> Option<Point> {
        let n = self.occupied.len();
        (n > 0).then(|| Point::new(self.sum.0 / n as f64, self.sum.1 / n as f64))
    }

    fn place(&mut self, cells: &[Cell], target: Cell) -> Cell {
        let bbox = cells_bbox(cells);
        let offset = ScanOrder::new(target)
            .find(|&o| self.fits(cells, bbox, o))
            .expect("scan order is unbounded");
        self.insert(cells, offset);
        offset
    }
}

fn cells_bbox(cells: &[Cell]) -> (Cell, Cell) {
    let mut lo = (i64::MAX, i64::MAX);
    let mut hi = (i64::MIN, i64::MIN);
    for &(c, r) in cells {
        lo = (lo.0.min(c), lo.1.min(r));
        hi = (hi.0.max(c), hi.1.max(r));
    }
    (lo, hi)
}

/// Offset that moves a mask's cell centroid onto `point` (rounded).
fn offset_to(mask: &PolyominoMask, point: Point) -> Cell {
    let c = mask.centroid();
    ((point.x - c.x).round() as i64, (point.y - c.y).round() as i64)
}

fn check_inputs(masks: &[(String, PolyominoMask)]) -> Result<Option<f64>, PackError> {
    let mut seen = HashSet::new();
    let mut size: Option<f64> = None;
    for (id, mask) in masks {
        if !seen.insert(id.as_str()) {
            return Err(PackError::DuplicateComponent(id.clone()));
        }
        match size {
            None => size = Some(mask.cell_size),
            Some(s) if s != mask.cell_size => return Err(PackError::CellSizeMismatch(s, mask.cell_size)),
            _ => {}
        }
    }
    Ok(size)
}

/// Incremental stable packing. See [`pack_traced`].
pub fn pack(masks: &[(String, PolyominoMask)], previous: &PackingState) -> Result<PackingState, PackError> {
    pack_traced(masks, previous).map(|(state, _)| state)
}

/// Incremental stable packing, also returning the placement log.
///
/// Components placed in `previous` go first, largest previous mask first
/// (ties by id); each scans outward from its previous offset and takes the
/// first collision-free one. New components follow, largest first (ties by
/// id), scanning outward from the offset that centers them on the cells
/// placed so far (or on the origin).
pub fn pack_traced(
    masks: &[(String, PolyominoMask)],
    previous: &PackingState,
) -> Result<(PackingState, Vec<PlacementRecord>), PackError> {
    let cell_size = check_inputs(masks)?.unwrap_or(previous.cell_size);
    let mut old: Vec<(&String, &PolyominoMask, &Placement)> = Vec::new();
    let mut new: Vec<(&String, &PolyominoMask)> = Vec::new();
    for (id, mask) in masks {
        match previous.placements.get(id) {
            Some(p) => old.push((id, mask, p)),
            None => new.push((id, mask)),
        }
    }
    old.sort_by(|a, b| b.2.cell_count().cmp(&a.2.cell_count()).then(a.0.cmp(b.0)));
    new.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(b.0)));

    let mut grid = Grid::new();
    let mut placements = BTreeMap::new();
    let mut log = Vec::with_capacity(masks.len());
    for (id, mask, prev) in old {
        let cells: Vec<Cell> = mask.absolute_cells().collect();
        let target = prev.offset;
        let offset = grid.place(&cells, target);
        log.push(PlacementRecord { id: id.clone(), target, offset });
        placements.insert(id.clone(), Placement { offset, mask_cells: cells });
    }
    for (id, mask) in new {
        let cells: Vec<Cell> = mask.absolute_cells().collect();
        let target = offset_to(mask, grid.centroid().unwrap_or(Point::ORIGIN));
        let offset = grid.place(&cells, target);
        log.push(PlacementRecord { id: id.clone(), target, offset });
        placements.insert(id.clone(), Placement { offset, mask_cells: cells });
    }
    let state = PackingState::from_placements(placements, cell_size, previous.ticks_since_refresh + 1);
    Ok((state, log))
}

/// From-scratch compaction. See [`refresh_pack_traced`].
pub fn refresh_pack(masks: &[(String, PolyominoMask)]) -> Result<PackingState, PackError> {
    refresh_pack_traced(masks).map(|(state, _)| state)
}

/// From-scratch compaction ignoring previous placements: largest mask first
/// (ties by id), each scanning outward from the offset that centers it on
/// the origin. Resets the refresh counter.
pub fn refresh_pack_traced(
    masks: &[(String, PolyominoMask)],
) -> Result<(PackingState, Vec<PlacementRecord>), PackError> {
    let cell_size = check_inputs(masks)?.unwrap_or(FALLBACK_CELL_SIZE);
    let mut order: Vec<&(String, PolyominoMask)> = masks.iter().collect();
    order.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(&b.0)));
    let mut grid = Grid::new();
    let mut placements = BTreeMap::new();
    let mut log = Vec::with_capacity(masks.len());
    for (id, mask) in order {
        let cells: Vec<Cell> = mask.absolute_cells().collect();
        let target = offset_to(mask, Point::ORIGIN);
        let offset = grid.place(&cells, target);
        log.push(PlacementRecord { id: id.clone(), target, offset });
        placements.insert(id.clone(), Placement { offset, mask_cells: cells });
    }
    Ok((PackingState::from_placements(placements, cell_size, 0), log))
}

/// Occupied cells over the area of their bounding box; 0 when empty.
pub fn utilization(state: &PackingState) -> f64 {
    let mut cells = state.occupied.keys();
    let Some(&first) = cells.next() else {
        return 0.0;
    };
    let (mut lo, mut hi) = (first, first);
    for &(c, r) in cells {
        lo = (lo.0.min(c), lo.1.min(r));
        hi = (hi.0.max(c), hi.1.max(r));
    }
    let area = ((hi.0 - lo.0 + 1) * (hi.1 - lo.1 + 1)) as f64;
    state.occupied.len() as f64 / area
}

/// Mean offset change, in cells, over component ids present in both states.
pub fn packing_displacement(prev: &PackingState, cur: &PackingState) -> f64 {
    let moves: Vec<f64> = cur
        .placements
        .iter()
        .filter_map(|(id, p)| {
            prev.placements.get(id).map(|q| {
                let (dc, dr) = ((p.offset.0 - q.offset.0) as f64, (p.offset.1 - q.offset.1) as f64);
                dc.hypot(dr)
            })
        })
        .collect();
    if moves.is_empty() {
        0.0
    } else {
        moves.iter().sum::<f64>() / moves.len() as f64
    }
}

/// Largest pairwise node distance.
pub fn diameter(layout: &ComponentLayout) -> f64 {
    let pts: Vec<Point> = layout.positions.values().copied().collect();
    let mut best: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            best = best.max(pts[i].dist(pts[j]));
        }
    }
    best
}

/// A tenth of the median positive component diameter, or
/// [`FALLBACK_CELL_SIZE`] when every component is a single point.
pub fn auto_cell_size<'a>(layouts: impl IntoIterator<Item = &'a ComponentLayout>) -> f64 {
    let mut d: Vec<f64> = layouts.into_iter().map(diameter).filter(|&d| d > 0.0).collect();
    if d.is_empty() {
        return FALLBACK_CELL_SIZE;
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let median = if d.len() % 2 == 1 { d[mid] } else { (d[mid - 1] + d[mid]) / 2.0 };
    median / 10.0
}
