//! JSON Lines dataset manifests.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::io::json::{render_line, to_value, KeyOrder};
use crate::ontology::Ontology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// One image-mask-description triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_path: String,
    pub mask_path: String,
    pub object_type: String,
    pub modality: String,
    pub site: String,
    #[serde(default)]
    pub description: String,
    pub group_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    /// Fields this schema does not know, kept for round trips.
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl ManifestEntry {
    pub fn new(
        image_path: impl Into<String>,
        mask_path: impl Into<String>,
        object_type: impl Into<String>,
        group_id: impl Into<String>,
    ) -> Self {
        Self {
            image_path: image_path.into(),
            mask_path: mask_path.into(),
            object_type: object_type.into(),
            modality: String::new(),
            site: String::new(),
            description: String::new(),
            group_id: group_id.into(),
            split: None,
            extra: Map::new(),
        }
    }

    fn check(&self) -> std::result::Result<(), &'static str> {
        if self.image_path.is_empty() {
            return Err("empty image_path");
        }
        if self.mask_path.is_empty() {
            return Err("empty mask_path");
        }
        Ok(())
    }
}

/// Parses JSONL text; blank lines are skipped. Errors carry `context:line`.
pub fn parse_manifest(text: &str, context: &str) -> Result<Vec<ManifestEntry>> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = format!("{context}:{}", i + 1);
        let entry: ManifestEntry = serde_json::from_str(line).map_err(|e| Error::format(&at, e.to_string()))?;
        entry.check().map_err(|msg| Error::format(&at, msg))?;
        entries.push(entry);
    }
    Ok(entries)
}

pub fn render_manifest(entries: &[ManifestEntry]) -> Result<String> {
    let mut out = String::new();
    for entry in entries {
        out.push_str(&render_line(&to_value(entry)?, KeyOrder::AsIs));
        out.push('\n');
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let bytes = super::read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    parse_manifest(&text, &path.display().to_string())
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    super::write_atomic(path, render_manifest(entries)?.as_bytes())
}

/// Every entry's object type must be known to `ontology`.
pub fn check_object_types(entries: &[ManifestEntry], ontology: &Ontology) -> Result<()> {
    match entries.iter().position(|e| !ontology.is_object_type(&e.object_type)) {
        Some(i) => Err(Error::UnknownObjectType(format!(
            "{} (manifest entry {})",
            entries[i].object_type,
            i + 1
        ))),
        None => Ok(()),
    }
}
