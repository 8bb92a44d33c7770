//! On-disk dataset description written by `synth`.
//!
//! Paths are relative to the manifest's directory so a dataset can be moved
//! and so two runs into different directories produce the same bytes.

use std::path::{Path, PathBuf};

use rectilens::synthesis::{DistortionGroup, GroupItem};
use rectilens::{DistortionModel, ModelKind, WarpResult};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::{load_mask, load_png};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub size: usize,
    pub models: Vec<DistortionModel>,
    pub groups: Vec<GroupEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEntry {
    pub index: usize,
    /// File name of the normal image the group was synthesized from.
    pub source: String,
    pub normal_path: String,
    pub items: Vec<ItemEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemEntry {
    pub model: ModelKind,
    pub slot: u8,
    pub k_raw: f64,
    pub k_norm: f64,
    pub image_path: String,
    pub mask_path: String,
}

impl Manifest {
    /// Models indexed like [`ModelKind::index`]; absent ones keep default ranges.
    pub fn model_array(&self) -> [DistortionModel; 3] {
        ModelKind::ALL.map(|kind| {
            self.models.iter().copied().find(|m| m.kind == kind).unwrap_or_else(|| DistortionModel::with_default_range(kind))
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.groups.is_empty() {
            return Err(CliError::Usage("manifest lists no groups".into()));
        }
        for g in &self.groups {
            for it in &g.items {
                if !(it.slot == 1 || it.slot == 2) {
                    return Err(CliError::Usage(format!("group {}: slot must be 1 or 2, got {}", g.index, it.slot)));
                }
                if !self.models.iter().any(|m| m.kind == it.model) {
                    return Err(CliError::Usage(format!("group {}: model {} has no range", g.index, it.model)));
                }
            }
        }
        Ok(())
    }
}

pub fn load_manifest(path: &Path) -> CliResult<Manifest> {
    let manifest: Manifest = crate::io::read_json(path)?;
    manifest.validate()?;
    Ok(manifest)
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    base.join(rel)
}

/// Reads a group's images back from disk.
pub fn load_group(base: &Path, manifest: &Manifest, entry: &GroupEntry) -> CliResult<DistortionGroup> {
    let normal = load_png(&resolve(base, &entry.normal_path))?;
    let mut items = Vec::with_capacity(entry.items.len());
    for it in &entry.items {
        let image = load_png(&resolve(base, &it.image_path))?;
        let mask = load_mask(&resolve(base, &it.mask_path))?;
        if !mask.matches(&image) {
            return Err(CliError::Usage(format!("{}: mask size differs from image", it.mask_path)));
        }
        items.push(GroupItem { model: it.model, slot: it.slot, k_true: it.k_raw, image: WarpResult { image, mask } });
    }
    Ok(DistortionGroup { normal, models: manifest.model_array(), items })
}
