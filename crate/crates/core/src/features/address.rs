use std::collections::HashSet;

use super::names::ADDRESS;
use crate::semantic::{SemanticVisit, NOWHERE};

fn revisits<'a>(visits: impl Iterator<Item = &'a SemanticVisit>) -> (usize, usize) {
    let mut seen = HashSet::new();
    let mut instances = 0;
    for v in visits.filter(|v| v.address_identity != NOWHERE) {
        instances += 1;
        seen.insert(v.address_identity.as_str());
    }
    (seen.len(), instances - seen.len())
}

/// Distinct identities today, revisits today, revisits over the ISO week.
///
/// Unmatched (`@nowhere`) time is not an address and is ignored.
pub fn address_features(day: &[SemanticVisit], week: &[SemanticVisit]) -> Vec<(&'static str, f64)> {
    let (distinct, daily_rep) = revisits(day.iter());
    let (_, weekly_rep) = revisits(week.iter());
    vec![
        (ADDRESS[0], distinct as f64),
        (ADDRESS[1], daily_rep as f64),
        (ADDRESS[2], weekly_rep as f64),
    ]
}
