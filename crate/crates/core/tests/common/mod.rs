//! Brute-force reference implementations shared by the integration tests.
//! Nothing here calls into the library code it is used to check.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use streammap_core::geom::Point;
use streammap_core::packing::{Cell, PackingState, PlacementRecord, PolyominoMask};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

// ---------------------------------------------------------------- packing

/// Connected polyomino of exactly `size` cells grown from `start`.
pub fn random_polyomino(rng: &mut ChaCha8Rng, size: usize, start: Cell) -> Vec<Cell> {
    let mut cells = vec![start];
    let mut set: HashSet<Cell> = cells.iter().copied().collect();
    while cells.len() < size {
        let (c, r) = cells[rng.random_range(0..cells.len())];
        let (dc, dr) = [(1, 0), (-1, 0), (0, 1), (0, -1)][rng.random_range(0..4)];
        let n = (c + dc, r + dr);
        if set.insert(n) {
            cells.push(n);
        }
    }
    cells.sort();
    cells
}

pub fn mask(cells: &[Cell]) -> PolyominoMask {
    PolyominoMask::from_absolute_cells(1.0, cells.iter().copied())
}

/// Cells claimed by more than one placement, recounted from the placements
/// alone, plus any disagreement with the state's own occupancy map.
pub fn overlap_report(state: &PackingState) -> (usize, bool) {
    let mut owners: HashMap<Cell, usize> = HashMap::new();
    for p in state.placements.values() {
        let (dc, dr) = p.offset;
        for &(c, r) in &p.mask_cells {
            *owners.entry((c + dc, r + dr)).or_default() += 1;
        }
    }
    let overlaps = owners.values().filter(|&&n| n > 1).count();
    let claimed: BTreeSet<Cell> = owners.keys().copied().collect();
    let recorded: BTreeSet<Cell> = state.occupied.keys().copied().collect();
    (overlaps, claimed == recorded)
}

fn scan_key(target: Cell, o: Cell) -> (i64, i64, i64) {
    let (dx, dy) = (o.0 - target.0, o.1 - target.1);
    (dx * dx + dy * dy, dx, dy)
}

/// Every offset strictly before `chosen` in the scan around `target`,
/// by enumerating the enclosing square and sorting.
pub fn offsets_before(target: Cell, chosen: Cell) -> Vec<Cell> {
    let key = scan_key(target, chosen);
    let r = (key.0 as f64).sqrt().ceil() as i64 + 1;
    let mut out: Vec<Cell> = (-r..=r)
        .flat_map(|dx| (-r..=r).map(move |dy| (target.0 + dx, target.1 + dy)))
        .filter(|&o| scan_key(target, o) < key)
        .collect();
    out.sort_by_key(|&o| scan_key(target, o));
    out
}

/// Replays a placement log against the final state and reports every
/// placement that skipped an earlier feasible offset or took an infeasible
/// one.
pub fn greedy_violations(state: &PackingState, log: &[PlacementRecord]) -> Vec<String> {
    let mut occupied: HashSet<Cell> = HashSet::new();
    let mut bad = Vec::new();
    for rec in log {
        let cells = &state.placements[&rec.id].mask_cells;
        let fits = |o: Cell, occ: &HashSet<Cell>| cells.iter().all(|&(c, r)| !occ.contains(&(c + o.0, r + o.1)));
        if !fits(rec.offset, &occupied) {
            bad.push(format!("{} placed on occupied cells at {:?}", rec.id, rec.offset));
        }
        if let Some(o) = offsets_before(rec.target, rec.offset).into_iter().find(|&o| fits(o, &occupied)) {
            bad.push(format!("{} skipped feasible {:?} before {:?}", rec.id, o, rec.offset));
        }
        for &(c, r) in cells {
            occupied.insert((c + rec.offset.0, r + rec.offset.1));
        }
    }
    bad
}

// ---------------------------------------------------------------- geometry

pub fn rigid(angle: f64, reflect: bool, t: Point, p: Point) -> Point {
    let y = if reflect { -p.y } else { p.y };
    let (s, c) = angle.sin_cos();
    Point::new(c * p.x - s * y + t.x, s * p.x + c * y + t.y)
}

/// Best RMS residual over 3600 rotation angles, with and without reflection,
/// each with its optimal translation.
pub fn brute_force_procrustes(pairs: &[(Point, Point)]) -> f64 {
    let n = pairs.len() as f64;
    let mean = |f: &dyn Fn(&(Point, Point)) -> Point| {
        let s = pairs.iter().map(f).fold(Point::new(0.0, 0.0), |a, b| Point::new(a.x + b.x, a.y + b.y));
        Point::new(s.x / n, s.y / n)
    };
    let cn = mean(&|p| p.0);
    let co = mean(&|p| p.1);
    let mut best = f64::INFINITY;
    for reflect in [false, true] {
        for step in 0..3600 {
            let angle = (step as f64) * std::f64::consts::TAU / 3600.0;
            let rc = rigid(angle, reflect, Point::new(0.0, 0.0), cn);
            let t = Point::new(co.x - rc.x, co.y - rc.y);
            let ss: f64 = pairs
                .iter()
                .map(|&(a, b)| {
                    let q = rigid(angle, reflect, t, a);
                    (q.x - b.x).powi(2) + (q.y - b.y).powi(2)
                })
                .sum();
            best = best.min((ss / n).sqrt());
        }
    }
    best
}

/// `Σ_{i<j} d⁻² (‖x_i − x_j‖ − d)²`, term by term.
pub fn stress_oracle(x: &[Point], d: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dist = ((x[i].x - x[j].x).powi(2) + (x[i].y - x[j].y).powi(2)).sqrt();
            s += (dist - d[i][j]).powi(2) / (d[i][j] * d[i][j]);
        }
    }
    s
}

pub fn floyd_warshall(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for &(a, b, w) in edges {
        d[a][b] = d[a][b].min(w);
        d[b][a] = d[b][a].min(w);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

// ---------------------------------------------------------------- graphs

/// Random connected weighted graph: a random spanning tree plus extra edges.
pub fn random_connected_graph(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> Vec<(usize, usize, f64)> {
    let mut edges: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.insert((u, v), rng.random_range(0.3..=1.0));
    }
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            edges.insert((a.min(b), a.max(b)), rng.random_range(0.3..=1.0));
        }
    }
    edges.into_iter().map(|((a, b), w)| (a, b, w)).collect()
}

/// Components by iterative depth-first search, each sorted, ordered by
/// smallest member.
pub fn dfs_components(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(v) = stack.pop() {
            comp.push(v);
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        comp.sort();
        out.push(comp);
    }
    out
}

/// Newman modularity from the adjacency-matrix definition
/// `Q = 1/2m Σ_ij (A_ij − k_i k_j / 2m) δ(c_i, c_j)`.
pub fn modularity_oracle(n: usize, edges: &[(usize, usize, f64)], labels: &[usize]) -> f64 {
    let mut a = vec![vec![0.0; n]; n];
    for &(x, y, w) in edges {
        a[x][y] += w;
        a[y][x] += w;
    }
    let k: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    let two_m: f64 = k.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                q += a[i][j] - k[i] * k[j] / two_m;
            }
        }
    }
    q / two_m
}

/// All set partitions of `n` elements as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn go(i: usize, n: usize, cur: &mut Vec<usize>, max: usize, out: &mut Vec<Vec<usize>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..=max + 1 {
            if i == 0 && b > 0 {
                break;
            }
            cur.push(b);
            go(i + 1, n, cur, if i == 0 { 0 } else { max.max(b) }, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, &mut Vec::new(), 0, &mut out);
    out
}

/// Partition as sorted blocks of sorted members.
pub fn blocks(labels: &[usize]) -> BTreeSet<Vec<usize>> {
    let mut by: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by.entry(l).or_default().push(i);
    }
    by.into_values().collect()
}
