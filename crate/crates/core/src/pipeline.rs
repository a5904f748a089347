//! Per-tick orchestration, configuration and batch replay.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{self, Group, IdAllocator};
use crate::geom::Point;
use crate::ingest::{self, IngestError, Message, Query, Window};
use crate::layout::{self, ComponentLayout, LayoutError, LayoutParams};
use crate::mapgen::{self, ClusterSpec, ColorState, ComposeError, FrameMetrics, MapError, MapFrame, NodeInfo, Palette, PaletteError};
use crate::packing::{self, PackError, PackingState, PolyominoMask};
use crate::semantics::{self, SimilarityGraph, StopWords};
use crate::stability;

pub const METRICS_HEADER: &str = "seq,ts,node_disp,pack_disp,stress,utilization";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub tick_ms: u64,
    /// Similarity threshold θ.
    pub theta: f64,
    /// Neighbors kept per node before the union.
    pub k: usize,
    pub window_capacity: usize,
    pub window_max_age_ms: Option<u64>,
    /// Fixed grid cell size; unset means a tenth of the median component
    /// diameter, recomputed at each refresh.
    pub cell_size: Option<f64>,
    /// Dilation of each mask, in cells.
    pub margin_cells: f64,
    pub refresh_min_utilization: f64,
    pub refresh_max_ticks: u64,
    /// Ticks after a refresh during which low utilization alone does not
    /// trigger another one.
    pub refresh_min_interval: u64,
    pub seed: u64,
    pub layout_tolerance: f64,
    pub layout_max_iterations: usize,
    pub palette_path: Option<PathBuf>,
    pub stopwords_path: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            tick_ms: 2000,
            theta: 0.3,
            k: 10,
            window_capacity: ingest::DEFAULT_WINDOW_CAPACITY,
            window_max_age_ms: None,
            cell_size: None,
            margin_cells: 1.0,
            refresh_min_utilization: 0.25,
            refresh_max_ticks: 300,
            refresh_min_interval: 10,
            seed: 1,
            layout_tolerance: 1e-4,
            layout_max_iterations: 200,
            palette_path: None,
            stopwords_path: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("`{0}` must be positive")]
    NotPositive(&'static str),
    #[error("`theta` must lie in (0, 1], got {0}")]
    ThetaRange(f64),
    #[error("`refresh_min_utilization` must lie in (0, 1], got {0}")]
    UtilizationRange(f64),
    #[error("config file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot read config `{path}`: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("stop words `{path}`: {source}")]
    StopWords { path: PathBuf, source: io::Error },
    #[error("palette `{path}`: {source}")]
    Palette { path: PathBuf, source: PaletteError },
}

impl PipelineConfig {
    /// Parses the TOML config format; absent keys take their defaults.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive_int = [
            ("tick_ms", self.tick_ms),
            ("k", self.k as u64),
            ("window_capacity", self.window_capacity as u64),
            ("refresh_max_ticks", self.refresh_max_ticks),
            ("refresh_min_interval", self.refresh_min_interval),
            ("layout_max_iterations", self.layout_max_iterations as u64),
        ];
        for (name, v) in positive_int {
            if v == 0 {
                return Err(ConfigError::NotPositive(name));
            }
        }
        if self.window_max_age_ms == Some(0) {
            return Err(ConfigError::NotPositive("window_max_age_ms"));
        }
        let positive_real = [
            ("cell_size", self.cell_size.unwrap_or(1.0)),
            ("margin_cells", self.margin_cells),
            ("layout_tolerance", self.layout_tolerance),
        ];
        for (name, v) in positive_real {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::NotPositive(name));
            }
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(ConfigError::ThetaRange(self.theta));
        }
        if !(self.refresh_min_utilization > 0.0 && self.refresh_min_utilization <= 1.0) {
            return Err(ConfigError::UtilizationRange(self.refresh_min_utilization));
        }
        Ok(())
    }

    pub fn layout_params(&self) -> LayoutParams {
        LayoutParams {
            tolerance: self.layout_tolerance,
            max_iterations: self.layout_max_iterations,
            ..LayoutParams::default()
        }
    }

    pub fn window(&self) -> Result<Window, IngestError> {
        Window::new(self.window_capacity, self.window_max_age_ms)
    }
}

/// Data files named by the config, loaded once.
#[derive(Debug, Clone)]
pub struct Resources {
    pub stop_words: StopWords,
    pub palette: Palette,
}

impl Resources {
    pub fn builtin() -> Self {
        Resources {
            stop_words: StopWords::builtin(),
            palette: Palette::builtin(),
        }
    }

    pub fn load(config: &PipelineConfig) -> Result<Self, ConfigError> {
        let stop_words = match &config.stopwords_path {
            Some(p) => StopWords::load(p).map_err(|source| ConfigError::StopWords {
                path: p.clone(),
                source,
            })?,
            None => StopWords::builtin(),
        };
        let palette = match &config.palette_path {
            Some(p) => Palette::load(p).map_err(|source| ConfigError::Palette {
                path: p.clone(),
                source,
            })?,
            None => Palette::builtin(),
        };
        Ok(Resources { stop_words, palette })
    }
}

/// Everything a tick carries over to the next one.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineState {
    /// Sequence number of the last frame produced.
    pub seq: u64,
    pub components: Vec<Group>,
    pub clusters: Vec<Group>,
    /// Aligned layouts by component id, in each component's own space.
    pub layouts: BTreeMap<String, ComponentLayout>,
    /// Induced similarity subgraph each layout was computed from.
    pub component_graphs: BTreeMap<String, SimilarityGraph>,
    pub packing: PackingState,
    pub colors: ColorState,
    /// Frame coordinates of every node in the last frame.
    pub positions: BTreeMap<String, Point>,
    pub component_ids: IdAllocator,
    pub cluster_ids: IdAllocator,
}

impl Default for PipelineState {
    fn default() -> Self {
        PipelineState {
            seq: 0,
            components: Vec::new(),
            clusters: Vec::new(),
            layouts: BTreeMap::new(),
            component_graphs: BTreeMap::new(),
            packing: PackingState::empty(packing::FALLBACK_CELL_SIZE),
            colors: ColorState::default(),
            positions: BTreeMap::new(),
            component_ids: IdAllocator::new("c"),
            cluster_ids: IdAllocator::new("k"),
        }
    }
}

/// Wall-clock time spent in each stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageDurations {
    pub semantics: Duration,
    pub cluster: Duration,
    pub layout: Duration,
    pub align: Duration,
    pub pack: Duration,
    pub mapgen: Duration,
}

impl StageDurations {
    pub fn total(&self) -> Duration {
        self.semantics + self.cluster + self.layout + self.align + self.pack + self.mapgen
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TickReport {
    pub seq: u64,
    pub durations: StageDurations,
    pub message_count: usize,
    pub component_count: usize,
    pub cluster_count: usize,
    pub refreshed: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum TickError {
    #[error("layout: {0}")]
    Layout(#[from] LayoutError),
    #[error("packing: {0}")]
    Pack(#[from] PackError),
    #[error("countries: {0}")]
    Map(#[from] MapError),
    #[error("frame composition: {0}")]
    Compose(#[from] ComposeError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub frame: MapFrame,
    pub state: PipelineState,
    pub report: TickReport,
}

fn timed<T>(slot: &mut Duration, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot += start.elapsed();
    out
}

fn masks_for(layouts: &[ComponentLayout], cell_size: f64, margin_cells: f64) -> Vec<(String, PolyominoMask)> {
    layouts
        .par_iter()
        .map(|l| (l.component_id.clone(), packing::rasterize(l, cell_size, margin_cells * cell_size)))
        .collect()
}

/// Mean distance moved by nodes present in both position maps.
pub fn node_displacement(prev: &BTreeMap<String, Point>, cur: &BTreeMap<String, Point>) -> f64 {
    let moves: Vec<f64> = cur
        .iter()
        .filter_map(|(id, p)| prev.get(id).map(|q| p.dist(*q)))
        .collect();
    if moves.is_empty() {
        0.0
    } else {
        moves.iter().sum::<f64>() / moves.len() as f64
    }
}

/// One pipeline step over a window snapshot.
///
/// Messages are tokenized, filtered by `query`, and carried through
/// similarity, clustering, warm-started layout, alignment, packing and
/// country generation. The result depends only on the arguments.
pub fn tick(
    snapshot: &[Message],
    query: &Query,
    ts: u64,
    previous: &PipelineState,
    config: &PipelineConfig,
    resources: &Resources,
) -> Result<TickOutput, TickError> {
    let mut d = StageDurations::default();
    let seq = previous.seq + 1;

    let (messages, vectors, graph) = timed(&mut d.semantics, || {
        let mut messages: Vec<Message> = snapshot.to_vec();
        semantics::tokenize_all(&mut messages, &resources.stop_words);
        messages.retain(|m| ingest::matches(m, query));
        let vectors = semantics::tfidf(&messages);
        let graph = semantics::build_graph(&vectors, config.theta, config.k);
        (messages, vectors, graph)
    });

    let mut component_ids = previous.component_ids.clone();
    let mut cluster_ids = previous.cluster_ids.clone();
    let (components, clusters) = timed(&mut d.cluster, || {
        let comps = clustering::connected_components(&graph);
        let members: Vec<Vec<String>> = comps.iter().map(|c| c.members.clone()).collect();
        let ids = clustering::assign_stable_ids(&members, &previous.components, &mut component_ids);
        let components: Vec<Group> = members
            .into_iter()
            .zip(ids)
            .map(|(members, id)| Group { id, members })
            .collect();

        let raw: Vec<Vec<String>> = components
            .par_iter()
            .flat_map_iter(|c| {
                clustering::cluster_component(&graph.subgraph(&c.members))
                    .into_iter()
                    .map(|k| k.group.members)
            })
            .collect();
        let ids = clustering::assign_stable_ids(&raw, &previous.clusters, &mut cluster_ids);
        let mut clusters: Vec<(Group, Vec<String>)> = raw
            .into_iter()
            .zip(ids)
            .map(|(members, id)| {
                let label = clustering::label_cluster(&members, &vectors);
                (Group { id, members }, label)
            })
            .collect();
        clusters.sort_by(|a, b| a.0.id.cmp(&b.0.id));
        (components, clusters)
    });

    let params = config.layout_params();
    let layout_seed = config.seed.wrapping_add(seq);
    let subgraphs: Vec<SimilarityGraph> = components.iter().map(|c| graph.subgraph(&c.members)).collect();
    // a component whose subgraph is unchanged keeps its layout as is; rerunning
    // from a layout that stopped at the iteration cap would move it further
    let unchanged = |c: &Group, sub: &SimilarityGraph| {
        previous.component_graphs.get(&c.id) == Some(sub) && previous.layouts.contains_key(&c.id)
    };
    let runs: Vec<Option<ComponentLayout>> = timed(&mut d.layout, || {
        components
            .par_iter()
            .zip(subgraphs.par_iter())
            .map(|(c, sub)| {
                if unchanged(c, sub) {
                    return Ok(None);
                }
                let distances = layout::target_distances(sub);
                let warm = previous.layouts.get(&c.id).map(|l| &l.positions);
                layout::layout_component(&c.id, sub, &distances, warm, layout_seed, &params).map(|r| Some(r.layout))
            })
            .collect::<Result<Vec<_>, LayoutError>>()
    })?;

    let layouts: Vec<ComponentLayout> = timed(&mut d.align, || {
        runs.into_par_iter()
            .zip(components.par_iter())
            .map(|(run, c)| match (run, previous.layouts.get(&c.id)) {
                (None, Some(prev)) => prev.clone(),
                (Some(l), Some(prev)) => stability::align_to_previous(&l, &prev.positions).layout,
                (Some(l), None) => l,
                (None, None) => unreachable!("reuse requires a previous layout"),
            })
            .collect()
    });

    let (packing, refreshed) = timed(&mut d.pack, || -> Result<_, PackError> {
        let fresh_size = || config.cell_size.unwrap_or_else(|| packing::auto_cell_size(&layouts));
        if !previous.packing.is_empty() {
            let masks = masks_for(&layouts, previous.packing.cell_size, config.margin_cells);
            let state = packing::pack(&masks, &previous.packing)?;
            // a refresh on an unchanged input would move a map that should be still
            let changed = state.placements.len() != previous.packing.placements.len()
                || state.placements.iter().any(|(id, p)| {
                    previous.packing.placements.get(id).is_none_or(|q| q.mask_cells != p.mask_cells)
                });
            let stale = state.ticks_since_refresh >= config.refresh_max_ticks;
            let sparse = state.ticks_since_refresh >= config.refresh_min_interval
                && packing::utilization(&state) < config.refresh_min_utilization;
            if !(changed && (stale || sparse)) {
                return Ok((state, false));
            }
        }
        let masks = masks_for(&layouts, fresh_size(), config.margin_cells);
        Ok((packing::refresh_pack(&masks)?, true))
    })?;

    let (frame, positions, colors) = timed(&mut d.mapgen, || -> Result<_, TickError> {
        let positions = mapgen::frame_positions(&layouts, &packing)?;
        let specs: Vec<ClusterSpec> = clusters
            .iter()
            .map(|(g, label)| ClusterSpec {
                id: g.id.clone(),
                members: g.members.clone(),
                label: label.clone(),
            })
            .collect();
        let mut countries = mapgen::generate_countries(&positions, &specs)?;
        let colors = mapgen::assign_colors(&mut countries, &previous.colors, &resources.palette, seq);

        let cluster_of: BTreeMap<&str, &str> = clusters
            .iter()
            .flat_map(|(g, _)| g.members.iter().map(move |m| (m.as_str(), g.id.as_str())))
            .collect();
        let by_id: BTreeMap<&str, &Message> = messages.iter().map(|m| (m.id.as_str(), m)).collect();
        let infos: Vec<NodeInfo> = graph
            .nodes()
            .iter()
            .map(|id| NodeInfo {
                id: id.clone(),
                cluster_id: cluster_of[id.as_str()].to_string(),
                text: by_id[id.as_str()].text.clone(),
                ts: by_id[id.as_str()].ts,
            })
            .collect();
        let metrics = FrameMetrics {
            stress: layouts.iter().map(|l| l.stress).sum(),
            node_disp: node_displacement(&previous.positions, &positions),
            pack_disp: packing::packing_displacement(&previous.packing, &packing),
            utilization: packing::utilization(&packing),
        };
        let frame = mapgen::compose_frame(seq, ts, countries, &layouts, &packing, &graph, &infos, metrics)?;
        Ok((frame, positions, colors))
    })?;

    let report = TickReport {
        seq,
        durations: d,
        message_count: messages.len(),
        component_count: components.len(),
        cluster_count: clusters.len(),
        refreshed,
    };
    let component_graphs = components.iter().map(|c| c.id.clone()).zip(subgraphs).collect();
    let state = PipelineState {
        seq,
        components,
        component_graphs,
        clusters: clusters.into_iter().map(|(g, _)| g).collect(),
        layouts: layouts.into_iter().map(|l| (l.component_id.clone(), l)).collect(),
        packing,
        colors,
        positions,
        component_ids,
        cluster_ids,
    };
    Ok(TickOutput { frame, state, report })
}

/// A query-bound pipeline that keeps its state and last good frame.
#[derive(Debug, Clone)]
pub struct Pipeline {
    query: Query,
    config: PipelineConfig,
    resources: Resources,
    state: PipelineState,
    latest: Option<MapFrame>,
}

impl Pipeline {
    pub fn new(query: Query, config: PipelineConfig, resources: Resources) -> Self {
        Pipeline {
            query,
            config,
            resources,
            state: PipelineState::default(),
            latest: None,
        }
    }

    pub fn query(&self) -> &Query {
        &self.query
    }

    pub fn state(&self) -> &PipelineState {
        &self.state
    }

    pub fn latest(&self) -> Option<&MapFrame> {
        self.latest.as_ref()
    }

    /// Runs one tick. On error the state and latest frame stay as they were.
    pub fn step(&mut self, snapshot: &[Message], ts: u64) -> Result<(&MapFrame, TickReport), TickError> {
        let out = tick(snapshot, &self.query, ts, &self.state, &self.config, &self.resources)?;
        self.state = out.state;
        self.latest = Some(out.frame);
        Ok((self.latest.as_ref().expect("just set"), out.report))
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("writing `{path}`: {source}")]
    Write { path: PathBuf, source: io::Error },
}

/// Outcome of a batch run.
#[derive(Debug, Clone, Default)]
pub struct ReplayRun {
    pub frames: usize,
    pub failed_ticks: usize,
    pub malformed: usize,
    pub duplicates: usize,
    /// One line per frame, without the header.
    pub metrics_rows: Vec<String>,
    pub reports: Vec<TickReport>,
}

impl ReplayRun {
    pub fn metrics_csv(&self) -> String {
        let mut s = String::from(METRICS_HEADER);
        s.push('\n');
        for r in &self.metrics_rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }
}

pub fn metrics_row(frame: &MapFrame) -> String {
    let m = &frame.metrics;
    let mut s = String::new();
    let _ = write!(
        s,
        "{},{},{},{},{},{}",
        frame.seq, frame.ts, m.node_disp, m.pack_disp, m.stress, m.utilization
    );
    s
}

/// Unpaced replay of time-ordered messages.
///
/// Ticks fall at `t0, t0 + tick_ms, …` where `t0` is the first message's
/// timestamp; before each tick every message with `ts` at or below the tick
/// time enters the window. The run ends with the tick that ingested the last
/// message. `on_frame` sees every successful frame in order.
pub fn replay_messages(
    messages: &[Message],
    config: &PipelineConfig,
    resources: &Resources,
    mut on_frame: impl FnMut(&MapFrame, &TickReport) -> Result<(), ReplayError>,
) -> Result<ReplayRun, ReplayError> {
    let mut run = ReplayRun::default();
    let mut window = config.window()?;
    let mut pipeline = Pipeline::new(Query::match_all(), config.clone(), resources.clone());
    let Some(first) = messages.first() else {
        return Ok(run);
    };
    let mut t = first.ts;
    let mut next = 0;
    while next < messages.len() {
        while next < messages.len() && messages[next].ts <= t {
            if let Err(e) = window.push(messages[next].clone()) {
                log::warn!("skipping message: {e}");
                run.duplicates += 1;
            }
            next += 1;
        }
        match pipeline.step(&window.snapshot(), t) {
            Ok((frame, report)) => {
                on_frame(frame, &report)?;
                run.frames += 1;
                run.metrics_rows.push(metrics_row(frame));
                run.reports.push(report);
            }
            Err(e) => {
                log::error!("tick at {t} failed: {e}");
                run.failed_ticks += 1;
            }
        }
        t += config.tick_ms;
    }
    Ok(run)
}

fn write_file(path: PathBuf, contents: &str) -> Result<(), ReplayError> {
    fs::write(&path, contents).map_err(|source| ReplayError::Write { path, source })
}

/// Replays `input` and writes `frame-NNNN.json`, `frame-NNNN.svg` and
/// `metrics.csv` into `out_dir`.
pub fn run_replay(input: &Path, config: &PipelineConfig, out_dir: &Path) -> Result<ReplayRun, ReplayError> {
    config.validate()?;
    let resources = Resources::load(config)?;
    let replay = ingest::read_replay(input)?;
    fs::create_dir_all(out_dir).map_err(|source| ReplayError::Write {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut run = replay_messages(&replay.messages, config, &resources, |frame, _| {
        let stem = format!("frame-{:04}", frame.seq);
        write_file(out_dir.join(format!("{stem}.json")), &(frame.to_json() + "\n"))?;
        write_file(out_dir.join(format!("{stem}.svg")), &mapgen::render_svg(frame))
    })?;
    run.malformed = replay.malformed;
    write_file(out_dir.join("metrics.csv"), &run.metrics_csv())?;
    Ok(run)
}

/// Replays `input` in memory; the metrics CSV and per-tick timings are in
/// the returned run.
pub fn bench(input: &Path, config: &PipelineConfig) -> Result<ReplayRun, ReplayError> {
    config.validate()?;
    let resources = Resources::load(config)?;
    let replay = ingest::read_replay(input)?;
    let mut run = replay_messages(&replay.messages, config, &resources, |_, _| Ok(()))?;
    run.malformed = replay.malformed;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msgs(items: &[(&str, u64, &str)]) -> Vec<Message> {
        items.iter().map(|&(id, ts, text)| Message::new(id, ts, text)).collect()
    }

    #[test]
    fn default_config_round_trips() {
        let cfg = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(PipelineConfig::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(matches!(PipelineConfig::from_toml("tick_ms = 0"), Err(ConfigError::NotPositive("tick_ms"))));
        assert!(matches!(PipelineConfig::from_toml("theta = 1.5"), Err(ConfigError::ThetaRange(_))));
        assert!(matches!(PipelineConfig::from_toml("cell_size = -1.0"), Err(ConfigError::NotPositive("cell_size"))));
        assert!(matches!(PipelineConfig::from_toml("bogus = 1"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn empty_snapshot_gives_empty_frame() {
        let out = tick(
            &[],
            &Query::match_all(),
            0,
            &PipelineState::default(),
            &PipelineConfig::default(),
            &Resources::builtin(),
        )
        .unwrap();
        assert_eq!(out.frame, MapFrame::empty(1, 0));
        assert_eq!(out.report.message_count, 0);
    }

    #[test]
    fn query_filters_nodes() {
        let snapshot = msgs(&[
            ("1", 1, "rust graphs layout"),
            ("2", 2, "rust compiler speed"),
            ("3", 3, "weather today"),
        ]);
        let q = Query::parse("rust").unwrap();
        let out = tick(&snapshot, &q, 3, &PipelineState::default(), &PipelineConfig::default(), &Resources::builtin()).unwrap();
        let ids: Vec<&str> = out.frame.nodes.iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, ["1", "2"]);
    }

    #[test]
    fn replay_schedule_counts_ticks() {
        let messages = msgs(&[("a", 100, "x y"), ("b", 1500, "x z"), ("c", 4100, "y z")]);
        let cfg = PipelineConfig {
            tick_ms: 1000,
            ..PipelineConfig::default()
        };
        let run = replay_messages(&messages, &cfg, &Resources::builtin(), |_, _| Ok(())).unwrap();
        // ticks at 100, 1100, 2100, 3100, 4100
        assert_eq!(run.frames, 5);
        assert_eq!(run.reports.iter().map(|r| r.message_count).collect::<Vec<_>>(), [1, 1, 2, 2, 3]);
    }
}
