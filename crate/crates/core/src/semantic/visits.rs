use serde::{Deserialize, Serialize};

use super::{address_identity, Category, CategoryMap};
use crate::error::{Error, Result};
use crate::geo::{GpsFix, MapIndex, DEFAULT_RADIUS_M};

/// Identity given to fixes that geocode to nothing.
pub const NOWHERE: &str = "@nowhere";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitConfig {
    pub radius_m: f64,
    /// Upper bound on the dwell a single fix can claim, in seconds.
    pub gap_cap_s: i64,
    /// Sampling interval credited to the last fix of a stream, in seconds.
    pub nominal_interval_s: i64,
}

impl Default for VisitConfig {
    fn default() -> Self {
        VisitConfig { radius_m: DEFAULT_RADIUS_M, gap_cap_s: 40 * 60, nominal_interval_s: 20 * 60 }
    }
}

/// A dwell interval `[start, end)` at one address identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticVisit {
    pub user_id: String,
    pub category: Category,
    pub address_identity: String,
    pub start: i64,
    pub end: i64,
}

impl SemanticVisit {
    pub fn duration(&self) -> i64 {
        self.end - self.start
    }
}

/// Geocodes each fix and turns the stream into merged dwell visits.
///
/// Each fix claims `min(next.ts - ts, gap_cap)`; the last fix claims the
/// nominal interval. Contiguous claims at the same identity merge.
pub fn fixes_to_visits(
    user_id: &str,
    fixes: &[GpsFix],
    index: &MapIndex,
    map: &CategoryMap,
    cfg: &VisitConfig,
) -> Result<Vec<SemanticVisit>> {
    if let Some(i) = fixes.windows(2).position(|w| w[1].timestamp < w[0].timestamp) {
        return Err(Error::UnsortedFixes(i + 1));
    }
    let mut segments = Vec::with_capacity(fixes.len());
    for (i, fix) in fixes.iter().enumerate() {
        let dwell = match fixes.get(i + 1) {
            Some(next) => (next.timestamp - fix.timestamp).min(cfg.gap_cap_s),
            None => cfg.nominal_interval_s,
        };
        if dwell <= 0 {
            continue;
        }
        let (category, identity) = match index.reverse_geocode(fix.lat, fix.lon, cfg.radius_m) {
            Some(f) => (map.categorize(&f.location_type), address_identity(f)),
            None => (Category::Others, NOWHERE.to_string()),
        };
        segments.push(SemanticVisit {
            user_id: user_id.to_string(),
            category,
            address_identity: identity,
            start: fix.timestamp,
            end: fix.timestamp + dwell,
        });
    }
    Ok(merge_visits(segments))
}

/// Merges neighbouring visits that share an identity and touch in time.
pub fn merge_visits(visits: Vec<SemanticVisit>) -> Vec<SemanticVisit> {
    let mut out: Vec<SemanticVisit> = Vec::with_capacity(visits.len());
    for v in visits {
        match out.last_mut() {
            Some(last)
                if last.address_identity == v.address_identity
                    && last.category == v.category
                    && last.end == v.start =>
            {
                last.end = v.end;
            }
            _ => out.push(v),
        }
    }
    out
}
