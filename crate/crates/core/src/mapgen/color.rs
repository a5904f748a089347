use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Country;
use crate::geom;

const BUILTIN_PALETTE: &str = include_str!("../../data/palette-v1.txt");

#[derive(Debug, Error)]
pub enum PaletteError {
    #[error("line {line}: `{text}` is not an RRGGBB color")]
    BadColor { line: usize, text: String },
    #[error("palette is empty")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ordered list of `#rrggbb` colors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette(Vec<String>);

impl Palette {
    /// The 12-color qualitative palette in `data/palette-v1.txt`.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_PALETTE).expect("bundled palette is valid")
    }

    /// One `RRGGBB` hex triple per line, `#` comments.
    pub fn parse(text: &str) -> Result<Self, PaletteError> {
        let mut colors = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.len() != 6 || !line.chars().all(|c| c.is_ascii_hexdigit()) {
                return Err(PaletteError::BadColor {
                    line: i + 1,
                    text: line.to_string(),
                });
            }
            colors.push(format!("#{}", line.to_ascii_lowercase()));
        }
        if colors.is_empty() {
            return Err(PaletteError::Empty);
        }
        Ok(Palette(colors))
    }

    pub fn load(path: &Path) -> Result<Self, PaletteError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn colors(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Cluster→palette-slot map of the last frame, plus when each slot was last
/// on screen.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorState {
    pub assigned: BTreeMap<String, usize>,
    pub last_used: BTreeMap<usize, u64>,
}

/// Colors countries in place and returns the state for the next frame.
///
/// Surviving cluster ids keep their slot. New clusters, in id order, take the
/// least recently displayed slot not on screen (never-used slots first, then
/// lowest index); once every slot is on screen, the slot is
/// `hash(cluster id) mod palette size`.
pub fn assign_colors(countries: &mut [Country], previous: &ColorState, palette: &Palette, tick: u64) -> ColorState {
    let n = palette.len();
    let mut assigned: BTreeMap<String, usize> = BTreeMap::new();
    let mut fresh: Vec<String> = Vec::new();
    for c in countries.iter() {
        match previous.assigned.get(&c.cluster_id) {
            Some(&slot) if slot < n => {
                assigned.insert(c.cluster_id.clone(), slot);
            }
            _ => fresh.push(c.cluster_id.clone()),
        }
    }
    fresh.sort();
    let mut displayed: BTreeSet<usize> = assigned.values().copied().collect();
    for id in fresh {
        let free = (0..n)
            .filter(|s| !displayed.contains(s))
            .min_by_key(|s| (previous.last_used.get(s).map_or(0, |&t| t + 1), *s));
        let slot = free.unwrap_or_else(|| (geom::stable_hash(&id) % n as u64) as usize);
        displayed.insert(slot);
        assigned.insert(id, slot);
    }
    for c in countries.iter_mut() {
        c.color = palette.colors()[assigned[&c.cluster_id]].clone();
    }
    let mut last_used = previous.last_used.clone();
    for &slot in &displayed {
        last_used.insert(slot, tick);
    }
    ColorState { assigned, last_used }
}
