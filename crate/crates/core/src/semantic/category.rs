use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::MapFeature;

/// The seven life categories every location type collapses into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Home,
    School,
    Shop,
    Workplace,
    Recreation,
    Travel,
    Others,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Home,
        Category::School,
        Category::Shop,
        Category::Workplace,
        Category::Recreation,
        Category::Travel,
        Category::Others,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Home => "home",
            Category::School => "school",
            Category::Shop => "shop",
            Category::Workplace => "workplace",
            Category::Recreation => "recreation",
            Category::Travel => "travel",
            Category::Others => "others",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        Category::ALL.into_iter().find(|c| c.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapProvenance {
    Llm,
    Human,
    Custom,
}

/// Static lookup from OSM location type to life category.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryMap {
    entries: BTreeMap<String, Category>,
    provenance: MapProvenance,
}

const HUMAN_MAP: &str = include_str!("../../data/category_map_human.csv");
const LLM_MAP: &str = include_str!("../../data/category_map_llm.csv");

/// Zero-shot prompt that produced the LLM map. Kept for reference; nothing calls a model.
pub const CATEGORIZATION_PROMPT: &str = "Please classify {location_type} into one of the following groups: \
home, school, shop, workplace, recreation, travel, and others. Respond with only the group name";

impl CategoryMap {
    /// Human-labelled map shipped with the crate; the default for pipelines.
    pub fn human() -> Self {
        Self::parse(HUMAN_MAP).expect("shipped human map is valid")
    }

    /// LLM-bootstrapped map shipped with the crate.
    pub fn llm() -> Self {
        Self::parse(LLM_MAP).expect("shipped LLM map is valid")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses `location_type,category` lines. `#` starts a comment line; a
    /// `# provenance: llm|human` comment sets the provenance tag.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut provenance = MapProvenance::Custom;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(p) = comment.trim().strip_prefix("provenance:") {
                    provenance = match p.trim() {
                        "llm" => MapProvenance::Llm,
                        "human" => MapProvenance::Human,
                        _ => MapProvenance::Custom,
                    };
                }
                continue;
            }
            let (ty, cat) = line.split_once(',').ok_or(Error::MalformedMapLine { line: line_no })?;
            let (ty, cat) = (ty.trim(), cat.trim());
            if ty.is_empty() {
                return Err(Error::MalformedMapLine { line: line_no });
            }
            let category = cat.parse::<Category>().map_err(|_| Error::UnknownCategory {
                line: line_no,
                category: cat.to_string(),
            })?;
            if let Some(prev) = entries.insert(ty.to_string(), category) {
                log::warn!("category map line {line_no}: duplicate key {ty:?} ({prev} replaced by {category})");
            }
        }
        Ok(CategoryMap { entries, provenance })
    }

    pub fn provenance(&self) -> MapProvenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get(&self, location_type: &str) -> Option<Category> {
        self.entries.get(location_type).copied()
    }

    /// Total lookup: unmapped types fall through to `others`.
    pub fn categorize(&self, location_type: &str) -> Category {
        match self.entries.get(location_type) {
            Some(c) => *c,
            None => {
                static SEEN: OnceLock<Mutex<HashSet<String>>> = OnceLock::new();
                let seen = SEEN.get_or_init(|| Mutex::new(HashSet::new()));
                if seen.lock().map(|mut s| s.insert(location_type.to_string())).unwrap_or(false) {
                    log::info!("unmapped location type {location_type:?} treated as others");
                }
                Category::Others
            }
        }
    }

    /// Keys on which the two maps disagree. Both maps must share one key set.
    pub fn disagreements(&self, other: &CategoryMap) -> Result<Vec<String>> {
        let a: BTreeSet<&String> = self.entries.keys().collect();
        let b: BTreeSet<&String> = other.entries.keys().collect();
        if a != b {
            let diff = a.symmetric_difference(&b).map(|s| s.to_string()).collect();
            return Err(Error::KeySetMismatch(diff));
        }
        Ok(self
            .entries
            .iter()
            .filter(|(k, v)| other.entries[*k] != **v)
            .map(|(k, _)| k.clone())
            .collect())
    }
}

/// Fraction of shared keys both maps assign to the same category.
pub fn map_agreement(a: &CategoryMap, b: &CategoryMap) -> Result<f64> {
    let diff = a.disagreements(b)?;
    if a.is_empty() {
        return Ok(1.0);
    }
    Ok((a.len() - diff.len()) as f64 / a.len() as f64)
}

/// `<number> <type>` when the feature has a house number, otherwise `@<id> <type>`.
pub fn address_identity(feature: &MapFeature) -> String {
    match &feature.address_number {
        Some(n) => format!("{n} {}", feature.location_type),
        None => format!("@{} {}", feature.feature_id, feature.location_type),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_lines() {
        let m = CategoryMap::parse("dormitory,home\npub,recreation\n").unwrap();
        assert_eq!(m.categorize("dormitory"), Category::Home);
        assert_eq!(m.categorize("pub"), Category::Recreation);
    }

    #[test]
    fn unknown_category_names_line() {
        match CategoryMap::parse("# header\ndormitory,home\noffice,workspace\n") {
            Err(Error::UnknownCategory { line, category }) => {
                assert_eq!(line, 3);
                assert_eq!(category, "workspace");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_key_last_wins() {
        let m = CategoryMap::parse("bench,others\nbench,recreation\n").unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.categorize("bench"), Category::Recreation);
    }

    #[test]
    fn shipped_maps() {
        let human = CategoryMap::human();
        let llm = CategoryMap::llm();
        assert_eq!(human.len(), 103);
        assert_eq!(llm.len(), 103);
        assert_eq!(human.provenance(), MapProvenance::Human);
        assert_eq!(llm.provenance(), MapProvenance::Llm);
        assert_eq!(human.categorize("university"), Category::School);
        assert_eq!(human.categorize("zzz_unknown"), Category::Others);
        assert_eq!(human.categorize("bridge"), Category::Travel);
        assert_eq!(llm.categorize("bridge"), Category::Others);
        assert_eq!(human.categorize("dormitory"), Category::Home);
        assert_eq!(llm.categorize("pub"), Category::Recreation);
    }

    #[test]
    fn agreement_counts() {
        let human = CategoryMap::human();
        assert_eq!(map_agreement(&human, &human).unwrap(), 1.0);
        let mut one_off = human.clone();
        one_off.entries.insert("bench".into(), Category::Others);
        assert_eq!(map_agreement(&human, &one_off).unwrap(), 102.0 / 103.0);
        assert_eq!(map_agreement(&CategoryMap::llm(), &human).unwrap(), 94.0 / 103.0);
    }

    #[test]
    fn key_mismatch_lists_difference() {
        let a = CategoryMap::parse("a,home\nb,home\n").unwrap();
        let b = CategoryMap::parse("b,home\nc,home\n").unwrap();
        match map_agreement(&a, &b) {
            Err(Error::KeySetMismatch(d)) => assert_eq!(d, vec!["a".to_string(), "c".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn identities() {
        let mut f = MapFeature {
            feature_id: "n77".into(),
            lat: 0.0,
            lon: 0.0,
            location_type: "bench".into(),
            address_number: None,
        };
        assert_eq!(address_identity(&f), "@n77 bench");
        f.address_number = Some("10".into());
        f.location_type = "apartments".into();
        assert_eq!(address_identity(&f), "10 apartments");

        let g = MapFeature { feature_id: "n78".into(), address_number: None, ..f.clone() };
        let h = MapFeature { feature_id: "w79".into(), address_number: None, ..f };
        assert_ne!(address_identity(&g), address_identity(&h));
    }
}
