//! Country polygons, colors and frame composition.
//!
//! A country is the union of the Voronoi cells of its cluster's nodes. A
//! square lattice of filler sites bounds the diagram so that no node cell
//! is unbounded; filler cells belong to no country.

mod color;
mod frame;
mod svg;

pub use color::{assign_colors, ColorState, Palette, PaletteError};
pub use frame::{
    compose_frame, frame_positions, validate_wire, ComposeError, FrameEdge, FrameMetrics, FrameNode, MapFrame,
    NodeInfo, SchemaError,
};
pub use svg::render_svg;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{self, Point};

/// Vertices are rounded to this grid.
pub const VERTEX_PRECISION: f64 = 1e-6;

/// Upper bound on filler sites; the lattice pitch grows to respect it.
pub const MAX_FILLERS: usize = 200_000;

/// Pitch used when no nearest-neighbor distance is available.
pub const FALLBACK_PITCH: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("node `{0}` has a non-finite position")]
    NonFinitePosition(String),
    #[error("cluster member `{0}` has no position")]
    MissingPosition(String),
    #[error("node `{0}` belongs to more than one cluster")]
    OverlappingClusters(String),
    #[error("node `{0}` belongs to no cluster")]
    Unclustered(String),
}

/// One topic region, already in wire shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Country {
    pub cluster_id: String,
    /// `#RRGGBB`; empty until colored.
    pub color: String,
    pub label: Vec<String>,
    /// Closed rings (first vertex repeated last), largest first.
    pub rings: Vec<Vec<[f64; 2]>>,
}

impl Country {
    pub fn ring_points(&self) -> Vec<Vec<Point>> {
        self.rings
            .iter()
            .map(|r| r.iter().map(|&[x, y]| Point::new(x, y)).collect())
            .collect()
    }

    /// Inside the ring union, or within `tolerance` of its boundary.
    pub fn contains(&self, p: Point, tolerance: f64) -> bool {
        let rings = self.ring_points();
        geom::point_in_rings(p, &rings) || geom::dist_to_rings(p, &rings) <= tolerance
    }
}

/// Input to [`generate_countries`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    pub id: String,
    pub members: Vec<String>,
    pub label: Vec<String>,
}

fn round_coord(v: f64) -> f64 {
    let r = (v / VERTEX_PRECISION).round() * VERTEX_PRECISION;
    // avoid emitting -0
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { (v[mid - 1] + v[mid]) / 2.0 })
}

/// Twice the median nearest-neighbor distance between distinct positions.
pub fn lattice_pitch(points: &[Point]) -> f64 {
    let nn: Vec<f64> = points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| {
            points
                .iter()
                .enumerate()
                .filter(|&(j, q)| j != i && q != p)
                .map(|(_, q)| p.dist(*q))
                .min_by(f64::total_cmp)
        })
        .collect();
    match median(nn) {
        Some(m) if m > 0.0 && m.is_finite() => 2.0 * m,
        _ => FALLBACK_PITCH,
    }
}

/// Lattice points covering the bounding box dilated by two pitches, minus
/// those closer than one pitch to a node.
fn filler_sites(nodes: &[Point], mut pitch: f64) -> Vec<Point> {
    let (mut lo, mut hi) = (nodes[0], nodes[0]);
    for p in nodes {
        lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let count = |pitch: f64| {
        let cols = ((hi.x - lo.x) / pitch).ceil() as usize + 5;
        let rows = ((hi.y - lo.y) / pitch).ceil() as usize + 5;
        (cols, rows)
    };
    let (mut cols, mut rows) = count(pitch);
    if cols * rows > MAX_FILLERS {
        pitch *= ((cols * rows) as f64 / MAX_FILLERS as f64).sqrt();
        (cols, rows) = count(pitch);
    }
    // bucket nodes by pitch-sized cells for the proximity filter
    let key = |p: Point| (((p.x - lo.x) / pitch).floor() as i64, ((p.y - lo.y) / pitch).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<Point>> = HashMap::new();
    for &p in nodes {
        buckets.entry(key(p)).or_default().push(p);
    }
    let mut out = Vec::with_capacity(cols * rows);
    for i in 0..cols {
        for j in 0..rows {
            let f = Point::new(lo.x + (i as f64 - 2.0) * pitch, lo.y + (j as f64 - 2.0) * pitch);
            let (kx, ky) = key(f);
            let near = (-1..=1).any(|dx| {
                (-1..=1).any(|dy| {
                    buckets
                        .get(&(kx + dx, ky + dy))
                        .is_some_and(|b| b.iter().any(|p| p.dist(f) < pitch))
                })
            });
            if !near {
                out.push(f);
            }
        }
    }
    out
}

fn square_ring(c: Point, side: f64) -> Vec<[f64; 2]> {
    let h = side / 2.0;
    let pts = [
        (c.x - h, c.y - h),
        (c.x + h, c.y - h),
        (c.x + h, c.y + h),
        (c.x - h, c.y + h),
        (c.x - h, c.y - h),
    ];
    pts.iter().map(|&(x, y)| [round_coord(x), round_coord(y)]).collect()
}

fn check_partition(positions: &BTreeMap<String, Point>, clusters: &[ClusterSpec]) -> Result<(), MapError> {
    for (id, p) in positions {
        if !p.is_finite() {
            return Err(MapError::NonFinitePosition(id.clone()));
        }
    }
    let mut seen = HashSet::new();
    for c in clusters {
        for m in &c.members {
            if !positions.contains_key(m) {
                return Err(MapError::MissingPosition(m.clone()));
            }
            if !seen.insert(m.as_str()) {
                return Err(MapError::OverlappingClusters(m.clone()));
            }
        }
    }
    if let Some(id) = positions.keys().find(|id| !seen.contains(id.as_str())) {
        return Err(MapError::Unclustered(id.clone()));
    }
    Ok(())
}

/// Builds one uncolored country per cluster, in input order.
///
/// When every node sits on the same point the diagram is undefined; each
/// country then becomes a square of side one lattice pitch around it.
/// Nodes sharing an exact position share the first such node's cell.
pub fn generate_countries(
    positions: &BTreeMap<String, Point>,
    clusters: &[ClusterSpec],
) -> Result<Vec<Country>, MapError> {
    check_partition(positions, clusters)?;
    let uncolored = |c: &ClusterSpec, rings| Country {
        cluster_id: c.id.clone(),
        color: String::new(),
        label: c.label.clone(),
        rings,
    };
    if positions.is_empty() {
        return Ok(clusters.iter().map(|c| uncolored(c, Vec::new())).collect());
    }

    // distinct sites in id order; duplicates map onto the first
    let mut sites: Vec<Point> = Vec::new();
    let mut site_of_pos: HashMap<(u64, u64), usize> = HashMap::new();
    let mut site_of_node: HashMap<&str, usize> = HashMap::new();
    for (id, &p) in positions {
        let k = (p.x.to_bits(), p.y.to_bits());
        let s = *site_of_pos.entry(k).or_insert_with(|| {
            sites.push(p);
            sites.len() - 1
        });
        site_of_node.insert(id.as_str(), s);
    }
    let pitch = lattice_pitch(&sites);

    if sites.len() == 1 && positions.len() > 1 {
        let ring = square_ring(sites[0], pitch);
        return Ok(clusters.iter().map(|c| uncolored(c, vec![ring.clone()])).collect());
    }

    let node_sites = sites.len();
    sites.extend(filler_sites(&sites, pitch));
    let (cells, centers) = voronoi_cells(&sites, node_sites);

    // which cluster owns each node site (first node at a position wins)
    let mut owner: Vec<Option<usize>> = vec![None; node_sites];
    let cluster_of: HashMap<&str, usize> = clusters
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| c.members.iter().map(move |m| (m.as_str(), ci)))
        .collect();
    for id in positions.keys() {
        let s = site_of_node[id.as_str()];
        if owner[s].is_none() {
            owner[s] = Some(cluster_of[id.as_str()]);
        }
    }

    Ok(clusters
        .iter()
        .enumerate()
        .map(|(ci, c)| {
            let member_cells: Vec<&VoronoiCell> = (0..node_sites)
                .filter(|&s| owner[s] == Some(ci))
                .filter_map(|s| cells[s].as_ref())
                .collect();
            uncolored(c, trace_union(&member_cells, &centers))
        })
        .collect())
}

/// Voronoi cell as a CCW cycle of Voronoi vertices, each identified by its
/// Delaunay triangle.
struct VoronoiCell {
    vertices: Vec<usize>,
}

fn circumcenter(a: Point, b: Point, c: Point) -> Point {
    let (bx, by) = (b.x - a.x, b.y - a.y);
    let (cx, cy) = (c.x - a.x, c.y - a.y);
    let bl = bx * bx + by * by;
    let cl = cx * cx + cy * cy;
    let d = 0.5 / (bx * cy - by * cx);
    Point::new(a.x + (cy * bl - by * cl) * d, a.y + (bx * cl - cx * bl) * d)
}

/// Cells of the first `wanted` sites (`None` for a site on the hull or one
/// the triangulation dropped), plus the circumcenter of every triangle.
fn voronoi_cells(sites: &[Point], wanted: usize) -> (Vec<Option<VoronoiCell>>, Vec<Point>) {
    let pts: Vec<delaunator::Point> = sites.iter().map(|p| delaunator::Point { x: p.x, y: p.y }).collect();
    let tri = delaunator::triangulate(&pts);
    let next = |e: usize| if e % 3 == 2 { e - 2 } else { e + 1 };

    let centers: Vec<Point> = tri
        .triangles
        .chunks_exact(3)
        .map(|t| circumcenter(sites[t[0]], sites[t[1]], sites[t[2]]))
        .collect();

    // an incoming halfedge for every site
    let mut incoming = vec![delaunator::EMPTY; sites.len()];
    for e in 0..tri.triangles.len() {
        let end = tri.triangles[next(e)];
        if incoming[end] == delaunator::EMPTY || tri.halfedges[e] == delaunator::EMPTY {
            incoming[end] = e;
        }
    }

    let cells: Vec<Option<VoronoiCell>> = (0..wanted)
        .map(|s| {
            let start = incoming[s];
            if start == delaunator::EMPTY || tri.halfedges[start] == delaunator::EMPTY {
                return None;
            }
            let mut vertices = Vec::new();
            let mut e = start;
            loop {
                vertices.push(e / 3);
                let opposite = tri.halfedges[next(e)];
                if opposite == delaunator::EMPTY {
                    return None;
                }
                e = opposite;
                if e == start {
                    break;
                }
            }
            let ring: Vec<Point> = vertices.iter().map(|&t| centers[t]).collect();
            if geom::signed_area(&ring) < 0.0 {
                vertices.reverse();
            }
            Some(VoronoiCell { vertices })
        })
        .collect();
    (cells, centers)
}

/// Boundary rings of a union of cells, found by cancelling edges shared by
/// two member cells and chaining the rest.
fn trace_union(cells: &[&VoronoiCell], centers: &[Point]) -> Vec<Vec<[f64; 2]>> {
    let mut directed: HashSet<(usize, usize)> = HashSet::new();
    for c in cells {
        let n = c.vertices.len();
        for i in 0..n {
            directed.insert((c.vertices[i], c.vertices[(i + 1) % n]));
        }
    }
    let mut next_of: BTreeMap<usize, usize> = BTreeMap::new();
    for &(u, v) in &directed {
        if !directed.contains(&(v, u)) {
            next_of.insert(u, v);
        }
    }
    let mut rings: Vec<(f64, Vec<[f64; 2]>)> = Vec::new();
    while let Some((&start, _)) = next_of.iter().next() {
        let mut ring: Vec<[f64; 2]> = Vec::new();
        let mut u = start;
        while let Some(v) = next_of.remove(&u) {
            let p = centers[u];
            let q = [round_coord(p.x), round_coord(p.y)];
            if ring.last() != Some(&q) {
                ring.push(q);
            }
            u = v;
            if u == start {
                break;
            }
        }
        while ring.len() > 1 && ring.first() == ring.last() {
            ring.pop();
        }
        if ring.len() < 3 {
            continue;
        }
        ring.push(ring[0]);
        let pts: Vec<Point> = ring.iter().map(|&[x, y]| Point::new(x, y)).collect();
        rings.push((geom::signed_area(&pts), ring));
    }
    // outer (CCW, positive) rings first, largest first
    rings.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal)));
    rings.into_iter().map(|(_, r)| r).collect()
}
