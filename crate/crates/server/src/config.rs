//! Pipeline configuration from a TOML file plus command-line overrides.

use std::path::PathBuf;

use clap::Args;
use streammap_core::pipeline::{ConfigError, PipelineConfig};

/// Environment variable naming the configuration file.
pub const CONFIG_ENV: &str = "STREAMMAP_CONFIG";

/// Flags shared by every subcommand. Each one overrides the file value.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Configuration file (TOML).
    #[arg(long, env = CONFIG_ENV, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Milliseconds between ticks.
    #[arg(long)]
    pub tick_ms: Option<u64>,
    /// Minimum cosine similarity for an edge.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Nearest neighbors kept per message.
    #[arg(long)]
    pub k: Option<usize>,
    /// Maximum number of messages in the window.
    #[arg(long)]
    pub window_capacity: Option<usize>,
    /// Drop messages older than this relative to the newest one.
    #[arg(long)]
    pub window_max_age_ms: Option<u64>,
    /// Packing grid cell size in layout units (automatic when unset).
    #[arg(long)]
    pub cell_size: Option<f64>,
    /// Mask margin in cells.
    #[arg(long)]
    pub margin_cells: Option<f64>,
    /// Recompact when utilization drops below this.
    #[arg(long)]
    pub refresh_min_utilization: Option<f64>,
    /// Recompact at least this often, in ticks.
    #[arg(long)]
    pub refresh_max_ticks: Option<u64>,
    /// Ticks that must pass before a low-utilization recompaction.
    #[arg(long)]
    pub refresh_min_interval: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Relative stress improvement below which layout stops.
    #[arg(long)]
    pub layout_tolerance: Option<f64>,
    #[arg(long)]
    pub layout_max_iterations: Option<usize>,
    /// Palette file, one RRGGBB color per line.
    #[arg(long, value_name = "PATH")]
    pub palette: Option<PathBuf>,
    /// Stop-word file, one term per line.
    #[arg(long, value_name = "PATH")]
    pub stopwords: Option<PathBuf>,
}

impl ConfigArgs {
    /// Reads the file (if any), applies the flags and validates the result.
    pub fn resolve(&self) -> Result<PipelineConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = self.$field.clone() { cfg.$target = v; })*
            };
        }
        set!(
            tick_ms => tick_ms,
            theta => theta,
            k => k,
            window_capacity => window_capacity,
            refresh_min_utilization => refresh_min_utilization,
            refresh_max_ticks => refresh_max_ticks,
            refresh_min_interval => refresh_min_interval,
            seed => seed,
            layout_tolerance => layout_tolerance,
            layout_max_iterations => layout_max_iterations,
            margin_cells => margin_cells,
        );
        if let Some(v) = self.window_max_age_ms {
            cfg.window_max_age_ms = Some(v);
        }
        if let Some(v) = self.cell_size {
            cfg.cell_size = Some(v);
        }
        if let Some(p) = &self.palette {
            cfg.palette_path = Some(p.clone());
        }
        if let Some(p) = &self.stopwords {
            cfg.stopwords_path = Some(p.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
