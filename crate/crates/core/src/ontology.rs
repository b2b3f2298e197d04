//! Three-layer object ontology (category, meta type, object type) and
//! resolution of `"[object] in [site] [modality]"` prompts.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::json::{render, to_value, KeyOrder};

/// Root categories, in canonical order.
pub const CATEGORIES: [&str; 3] = ["histology", "organ", "abnormality"];

/// Catch-all label for dataset annotation. Never produced by resolution.
pub const OTHER: &str = "other";

/// Words that may trail the modality in a prompt ("... pathology image").
const FILLER_WORDS: [&str; 4] = ["image", "images", "scan", "scans"];

const SHIPPED: &str = include_str!("../data/ontology.json");

/// Lowercase, fold hyphens to spaces, collapse whitespace and trim
/// surrounding punctuation.
pub fn normalize(text: &str) -> String {
    let folded: String = text
        .to_lowercase()
        .chars()
        .map(|c| match c {
            '-' | '\u{2010}'..='\u{2015}' => ' ',
            c => c,
        })
        .collect();
    let collapsed = folded.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocCategory {
    name: String,
    meta_types: Vec<DocMeta>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocMeta {
    name: String,
    object_types: Vec<DocObject>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocObject {
    name: String,
    #[serde(default)]
    synonyms: Vec<String>,
    sites: Vec<String>,
    modalities: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    provisional: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    categories: Vec<DocCategory>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaType {
    pub name: String,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectType {
    pub name: String,
    pub meta_type: String,
    /// Extra surfaces as written in the document, excluding the name.
    pub synonyms: Vec<String>,
    /// Normalized site ids.
    pub sites: Vec<String>,
    /// Modality display names.
    pub modalities: Vec<String>,
    /// Leaf not attested by a published source.
    pub provisional: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptResolution {
    pub object_type: String,
    pub site: Option<String>,
    pub modality: Option<String>,
    pub matched_surface: String,
}

/// Immutable after load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ontology {
    meta_types: Vec<MetaType>,
    object_types: Vec<ObjectType>,
    synonyms: BTreeMap<String, usize>,
    sites: BTreeSet<String>,
    /// normalized key -> display name
    modalities: BTreeMap<String, String>,
    site_modality_index: BTreeMap<(String, String), Vec<usize>>,
}

fn load_error(node: &str, message: impl std::fmt::Display) -> Error {
    Error::Ontology(format!("{node}: {message}"))
}

impl Ontology {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(text).map_err(|e| load_error("document", e))?;
        Self::from_document(doc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Ontology(msg) => Error::Ontology(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// The reference ontology bundled with the crate.
    pub fn shipped() -> Self {
        Self::from_json(SHIPPED).expect("bundled ontology is valid")
    }

    fn from_document(doc: Document) -> Result<Self> {
        let names: BTreeSet<&str> = doc.categories.iter().map(|c| c.name.as_str()).collect();
        let expected: BTreeSet<&str> = CATEGORIES.into_iter().collect();
        if doc.categories.len() != 3 || names != expected {
            return Err(load_error(
                "categories",
                format!(
                    "expected exactly {CATEGORIES:?}, found {:?}",
                    doc.categories.iter().map(|c| &c.name).collect::<Vec<_>>()
                ),
            ));
        }

        let mut meta_types = Vec::new();
        let mut object_types = Vec::new();
        let mut synonyms = BTreeMap::new();
        let mut sites = BTreeSet::new();
        let mut modalities: BTreeMap<String, String> = BTreeMap::new();
        let mut index: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
        let mut meta_names = BTreeSet::new();

        for category in doc.categories {
            for meta in category.meta_types {
                let meta_name = normalize(&meta.name);
                if meta_name.is_empty() {
                    return Err(load_error(
                        &format!("category {:?}", category.name),
                        "meta type with empty name",
                    ));
                }
                if !meta_names.insert(meta_name.clone()) {
                    return Err(load_error(&format!("meta type {meta_name:?}"), "duplicate name"));
                }
                if meta.object_types.is_empty() {
                    return Err(load_error(&format!("meta type {meta_name:?}"), "has no object types"));
                }
                for object in meta.object_types {
                    let id = object_types.len();
                    let name = normalize(&object.name);
                    let node = format!("object type {:?}", object.name);
                    if name.is_empty() {
                        return Err(load_error(
                            &format!("meta type {meta_name:?}"),
                            "object type with empty name",
                        ));
                    }
                    if object.sites.is_empty() || object.modalities.is_empty() {
                        return Err(load_error(&node, "needs at least one site and one modality"));
                    }
                    let mut extra = Vec::new();
                    for surface in std::iter::once(&object.name).chain(&object.synonyms) {
                        let key = normalize(surface);
                        if key.is_empty() {
                            return Err(load_error(&node, "empty synonym"));
                        }
                        if key == OTHER {
                            return Err(load_error(&node, format!("{OTHER:?} is reserved")));
                        }
                        match synonyms.get(&key) {
                            Some(&owner) if owner == id => continue,
                            Some(&owner) => {
                                let owner: &ObjectType = &object_types[owner];
                                return Err(load_error(
                                    &node,
                                    format!("synonym {key:?} already belongs to {:?}", owner.name),
                                ));
                            }
                            None => {
                                synonyms.insert(key.clone(), id);
                            }
                        }
                        if key != name {
                            extra.push(key);
                        }
                    }
                    let mut object_sites = Vec::new();
                    for site in &object.sites {
                        let site = normalize(site);
                        if site.is_empty() {
                            return Err(load_error(&node, "empty site"));
                        }
                        object_sites.push(site);
                    }
                    let mut object_modalities = Vec::new();
                    for modality in &object.modalities {
                        let key = normalize(modality);
                        if key.is_empty() {
                            return Err(load_error(&node, "empty modality"));
                        }
                        let display = modalities.entry(key).or_insert_with(|| modality.trim().to_string());
                        object_modalities.push(display.clone());
                    }
                    object_sites.sort();
                    object_sites.dedup();
                    object_modalities.sort();
                    object_modalities.dedup();
                    extra.sort();
                    extra.dedup();
                    for modality in &object_modalities {
                        for site in &object_sites {
                            index.entry((normalize(modality), site.clone())).or_default().push(id);
                        }
                    }
                    sites.extend(object_sites.iter().cloned());
                    object_types.push(ObjectType {
                        name,
                        meta_type: meta_name.clone(),
                        synonyms: extra,
                        sites: object_sites,
                        modalities: object_modalities,
                        provisional: object.provisional,
                    });
                }
                meta_types.push(MetaType {
                    name: meta_name,
                    category: category.name.clone(),
                });
            }
        }

        Ok(Ontology {
            meta_types,
            object_types,
            synonyms,
            sites,
            modalities,
            site_modality_index: index,
        })
    }

    pub fn categories(&self) -> [&'static str; 3] {
        CATEGORIES
    }

    pub fn meta_types(&self) -> &[MetaType] {
        &self.meta_types
    }

    pub fn object_types(&self) -> &[ObjectType] {
        &self.object_types
    }

    pub fn object_type(&self, name: &str) -> Option<&ObjectType> {
        let key = normalize(name);
        self.object_types.iter().find(|o| o.name == key)
    }

    /// True for any object type id, including the catch-all.
    pub fn is_object_type(&self, name: &str) -> bool {
        normalize(name) == OTHER || self.object_type(name).is_some()
    }

    /// Normalized surface -> object type name.
    pub fn synonyms(&self) -> impl Iterator<Item = (&str, &str)> {
        self.synonyms
            .iter()
            .map(|(surface, &id)| (surface.as_str(), self.object_types[id].name.as_str()))
    }

    pub fn sites(&self) -> impl Iterator<Item = &str> {
        self.sites.iter().map(String::as_str)
    }

    pub fn modalities(&self) -> impl Iterator<Item = &str> {
        self.modalities.values().map(String::as_str)
    }

    pub fn site(&self, text: &str) -> Option<&str> {
        self.sites.get(&normalize(text)).map(String::as_str)
    }

    pub fn modality(&self, text: &str) -> Option<&str> {
        self.modalities.get(&normalize(text)).map(String::as_str)
    }

    /// Object type for an exact (normalized) synonym surface.
    pub fn lookup(&self, phrase: &str) -> Option<&ObjectType> {
        self.synonyms.get(&normalize(phrase)).map(|&id| &self.object_types[id])
    }

    /// Object types indexed under `modality`, optionally restricted to one
    /// site. A missing or empty site yields the union over all sites.
    pub fn candidates_for(&self, modality: &str, site: Option<&str>) -> Result<Vec<&str>> {
        let modality_key = normalize(modality);
        if !self.modalities.contains_key(&modality_key) {
            return Err(Error::UnknownModality(modality.to_string()));
        }
        let site_key = site.map(normalize).filter(|s| !s.is_empty());
        if let Some(site_key) = &site_key {
            if !self.sites.contains(site_key) {
                return Err(Error::UnknownSite(site_key.clone()));
            }
        }
        let mut out: Vec<&str> = self
            .site_modality_index
            .iter()
            .filter(|((m, s), _)| *m == modality_key && site_key.as_ref().is_none_or(|k| k == s))
            .flat_map(|(_, ids)| ids.iter().map(|&id| self.object_types[id].name.as_str()))
            .collect();
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Split `tail` into (site, modality). Trailing filler words are dropped
    /// and the longest matching modality suffix wins.
    fn parse_tail(&self, tail: &str) -> Option<(Option<String>, Option<String>)> {
        let mut tokens: Vec<&str> = tail.split(' ').filter(|t| !t.is_empty()).collect();
        while tokens.last().is_some_and(|t| FILLER_WORDS.contains(t)) {
            tokens.pop();
        }
        if tokens.is_empty() {
            return None;
        }
        for k in (1..=tokens.len()).rev() {
            let split = tokens.len() - k;
            let candidate = tokens[split..].join(" ");
            if let Some(display) = self.modalities.get(&candidate) {
                let site = tokens[..split].join(" ");
                if site.is_empty() {
                    return Some((None, Some(display.clone())));
                }
                return self.sites.get(&site).map(|s| (Some(s.clone()), Some(display.clone())));
            }
        }
        let site = tokens.join(" ");
        self.sites.get(&site).map(|s| (Some(s.clone()), None))
    }

    pub fn resolve_prompt(&self, text: &str) -> Result<PromptResolution> {
        let prompt = normalize(text);
        let whole = |surface: &str| {
            self.synonyms.get(surface).map(|&id| PromptResolution {
                object_type: self.object_types[id].name.clone(),
                site: None,
                modality: None,
                matched_surface: surface.to_string(),
            })
        };
        let Some(pos) = prompt.rfind(" in ") else {
            return whole(&prompt).ok_or(Error::UnknownObjectType(prompt));
        };
        let phrase = prompt[..pos].trim();
        let tail = &prompt[pos + 4..];
        let object = self.synonyms.get(phrase);
        let slots = self.parse_tail(tail);
        match (object, slots) {
            (Some(&id), Some((site, modality))) => Ok(PromptResolution {
                object_type: self.object_types[id].name.clone(),
                site,
                modality,
                matched_surface: phrase.to_string(),
            }),
            (object, slots) => {
                // An object surface may itself contain " in ".
                if let Some(found) = whole(&prompt) {
                    return Ok(found);
                }
                if object.is_none() {
                    Err(Error::UnknownObjectType(phrase.to_string()))
                } else if slots.is_none() && tail.split(' ').any(|t| self.modalities.contains_key(t)) {
                    Err(Error::UnknownSite(tail.to_string()))
                } else {
                    Err(Error::UnknownModality(tail.to_string()))
                }
            }
        }
    }

    fn to_document(&self) -> Document {
        let categories = CATEGORIES
            .iter()
            .map(|&category| {
                let mut metas: Vec<&MetaType> = self.meta_types.iter().filter(|m| m.category == category).collect();
                metas.sort_by(|a, b| a.name.cmp(&b.name));
                DocCategory {
                    name: category.to_string(),
                    meta_types: metas
                        .into_iter()
                        .map(|meta| {
                            let mut objects: Vec<&ObjectType> =
                                self.object_types.iter().filter(|o| o.meta_type == meta.name).collect();
                            objects.sort_by(|a, b| a.name.cmp(&b.name));
                            DocMeta {
                                name: meta.name.clone(),
                                object_types: objects
                                    .into_iter()
                                    .map(|o| DocObject {
                                        name: o.name.clone(),
                                        synonyms: o.synonyms.clone(),
                                        sites: o.sites.clone(),
                                        modalities: o.modalities.clone(),
                                        provisional: o.provisional,
                                    })
                                    .collect(),
                            }
                        })
                        .collect(),
                }
            })
            .collect();
        Document { categories }
    }

    /// Canonical serialization: fixed category order, everything else sorted.
    pub fn to_json(&self) -> Result<String> {
        Ok(render(&to_value(&self.to_document())?, KeyOrder::Sorted))
    }
}
