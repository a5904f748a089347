use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::Country;
use crate::geom::Point;
use crate::layout::ComponentLayout;
use crate::packing::PackingState;
use crate::semantics::SimilarityGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameNode {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub cluster_id: String,
    pub text: String,
    pub ts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameEdge {
    pub src: String,
    pub dst: String,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameMetrics {
    pub stress: f64,
    pub node_disp: f64,
    pub pack_disp: f64,
    pub utilization: f64,
}

/// The published per-tick artifact. Field names are the wire format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFrame {
    pub seq: u64,
    pub ts: u64,
    pub countries: Vec<Country>,
    pub nodes: Vec<FrameNode>,
    pub edges: Vec<FrameEdge>,
    pub metrics: FrameMetrics,
}

impl MapFrame {
    pub fn empty(seq: u64, ts: u64) -> Self {
        MapFrame {
            seq,
            ts,
            countries: Vec::new(),
            nodes: Vec::new(),
            edges: Vec::new(),
            metrics: FrameMetrics::default(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("frames contain only finite numbers and strings")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Cross-reference checks: node clusters name countries, edge endpoints
    /// are present nodes, rings are closed, numbers are finite.
    pub fn check_invariants(&self) -> Result<(), ComposeError> {
        let countries: HashSet<&str> = self.countries.iter().map(|c| c.cluster_id.as_str()).collect();
        let mut nodes = HashSet::new();
        for n in &self.nodes {
            if !countries.contains(n.cluster_id.as_str()) {
                return Err(ComposeError::UnknownCluster(n.id.clone(), n.cluster_id.clone()));
            }
            if !(n.x.is_finite() && n.y.is_finite()) {
                return Err(ComposeError::NonFinite(n.id.clone()));
            }
            if !nodes.insert(n.id.as_str()) {
                return Err(ComposeError::DuplicateNode(n.id.clone()));
            }
        }
        for e in &self.edges {
            for end in [&e.src, &e.dst] {
                if !nodes.contains(end.as_str()) {
                    return Err(ComposeError::DanglingEdge(end.clone()));
                }
            }
        }
        for c in &self.countries {
            if c.rings.iter().any(|r| r.len() < 4 || r.first() != r.last()) {
                return Err(ComposeError::OpenRing(c.cluster_id.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ComposeError {
    #[error("node `{0}` names unknown cluster `{1}`")]
    UnknownCluster(String, String),
    #[error("edge endpoint `{0}` is not a node of the frame")]
    DanglingEdge(String),
    #[error("node `{0}` appears twice")]
    DuplicateNode(String),
    #[error("node `{0}` has a non-finite coordinate")]
    NonFinite(String),
    #[error("country `{0}` has an open or degenerate ring")]
    OpenRing(String),
    #[error("node `{0}` has no layout position")]
    MissingPosition(String),
    #[error("component `{0}` has no placement")]
    Unplaced(String),
}

/// Per-node payload carried into the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeInfo {
    pub id: String,
    pub cluster_id: String,
    pub text: String,
    pub ts: u64,
}

/// Layout positions translated by each component's packing offset.
pub fn frame_positions(
    layouts: &[ComponentLayout],
    packing: &PackingState,
) -> Result<BTreeMap<String, Point>, ComposeError> {
    let mut out = BTreeMap::new();
    for l in layouts {
        let t = packing
            .translation(&l.component_id)
            .ok_or_else(|| ComposeError::Unplaced(l.component_id.clone()))?;
        for (id, p) in &l.positions {
            out.insert(id.clone(), Point::new(p.x + t.x, p.y + t.y));
        }
    }
    Ok(out)
}

/// Assembles a frame and checks its invariants.
pub fn compose_frame(
    seq: u64,
    ts: u64,
    countries: Vec<Country>,
    layouts: &[ComponentLayout],
    packing: &PackingState,
    graph: &SimilarityGraph,
    nodes: &[NodeInfo],
    metrics: FrameMetrics,
) -> Result<MapFrame, ComposeError> {
    let positions = frame_positions(layouts, packing)?;
    let nodes = nodes
        .iter()
        .map(|n| {
            let p = positions
                .get(&n.id)
                .ok_or_else(|| ComposeError::MissingPosition(n.id.clone()))?;
            Ok(FrameNode {
                id: n.id.clone(),
                x: p.x,
                y: p.y,
                cluster_id: n.cluster_id.clone(),
                text: n.text.clone(),
                ts: n.ts,
            })
        })
        .collect::<Result<Vec<_>, ComposeError>>()?;
    let edges = graph
        .edges()
        .iter()
        .map(|e| FrameEdge {
            src: graph.nodes()[e.a].clone(),
            dst: graph.nodes()[e.b].clone(),
            w: e.weight,
        })
        .collect();
    let frame = MapFrame {
        seq,
        ts,
        countries,
        nodes,
        edges,
        metrics,
    };
    frame.check_invariants()?;
    Ok(frame)
}

#[derive(Debug, Error, PartialEq)]
#[error("{path}: {reason}")]
pub struct SchemaError {
    pub path: String,
    pub reason: String,
}

fn fail<T>(path: &str, reason: impl Into<String>) -> Result<T, SchemaError> {
    Err(SchemaError {
        path: path.to_string(),
        reason: reason.into(),
    })
}

fn object<'a>(
    v: &'a Value,
    path: &str,
    keys: &[&str],
) -> Result<&'a serde_json::Map<String, Value>, SchemaError> {
    let Some(obj) = v.as_object() else {
        return fail(path, "expected object");
    };
    for k in keys {
        if !obj.contains_key(*k) {
            return fail(path, format!("missing key `{k}`"));
        }
    }
    if let Some(extra) = obj.keys().find(|k| !keys.contains(&k.as_str())) {
        return fail(path, format!("unexpected key `{extra}`"));
    }
    Ok(obj)
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, SchemaError> {
    v.as_array().map_or_else(|| fail(path, "expected array"), Ok)
}

fn uint(v: &Value, path: &str) -> Result<(), SchemaError> {
    if v.is_u64() {
        Ok(())
    } else {
        fail(path, "expected non-negative integer")
    }
}

fn num(v: &Value, path: &str) -> Result<(), SchemaError> {
    if v.is_number() {
        Ok(())
    } else {
        fail(path, "expected number")
    }
}

fn string(v: &Value, path: &str) -> Result<(), SchemaError> {
    if v.is_string() {
        Ok(())
    } else {
        fail(path, "expected string")
    }
}

/// Structural check of a frame against the wire schema: exact key sets and
/// value types at every level.
pub fn validate_wire(v: &Value) -> Result<(), SchemaError> {
    let top = object(v, "$", &["seq", "ts", "countries", "nodes", "edges", "metrics"])?;
    uint(&top["seq"], "$.seq")?;
    uint(&top["ts"], "$.ts")?;

    for (i, c) in array(&top["countries"], "$.countries")?.iter().enumerate() {
        let p = format!("$.countries[{i}]");
        let c = object(c, &p, &["cluster_id", "color", "label", "rings"])?;
        string(&c["cluster_id"], &format!("{p}.cluster_id"))?;
        let color = c["color"].as_str().unwrap_or_default();
        if color.len() != 7 || !color.starts_with('#') || !color[1..].chars().all(|ch| ch.is_ascii_hexdigit()) {
            return fail(&format!("{p}.color"), "expected #RRGGBB");
        }
        for (j, t) in array(&c["label"], &format!("{p}.label"))?.iter().enumerate() {
            string(t, &format!("{p}.label[{j}]"))?;
        }
        for (j, ring) in array(&c["rings"], &format!("{p}.rings"))?.iter().enumerate() {
            for (k, pt) in array(ring, &format!("{p}.rings[{j}]"))?.iter().enumerate() {
                let pp = format!("{p}.rings[{j}][{k}]");
                let xy = array(pt, &pp)?;
                if xy.len() != 2 {
                    return fail(&pp, "expected [x, y]");
                }
                num(&xy[0], &pp)?;
                num(&xy[1], &pp)?;
            }
        }
    }
    for (i, n) in array(&top["nodes"], "$.nodes")?.iter().enumerate() {
        let p = format!("$.nodes[{i}]");
        let n = object(n, &p, &["id", "x", "y", "cluster_id", "text", "ts"])?;
        string(&n["id"], &format!("{p}.id"))?;
        num(&n["x"], &format!("{p}.x"))?;
        num(&n["y"], &format!("{p}.y"))?;
        string(&n["cluster_id"], &format!("{p}.cluster_id"))?;
        string(&n["text"], &format!("{p}.text"))?;
        uint(&n["ts"], &format!("{p}.ts"))?;
    }
    for (i, e) in array(&top["edges"], "$.edges")?.iter().enumerate() {
        let p = format!("$.edges[{i}]");
        let e = object(e, &p, &["src", "dst", "w"])?;
        string(&e["src"], &format!("{p}.src"))?;
        string(&e["dst"], &format!("{p}.dst"))?;
        num(&e["w"], &format!("{p}.w"))?;
    }
    let m = object(&top["metrics"], "$.metrics", &["stress", "node_disp", "pack_disp", "utilization"])?;
    for k in ["stress", "node_disp", "pack_disp", "utilization"] {
        num(&m[k], &format!("$.metrics.{k}"))?;
    }
    Ok(())
}
