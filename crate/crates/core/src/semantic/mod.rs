//! Semantic location encoding: location types to life categories, address
//! identities, and dwell visits built from geocoded fix streams.

mod category;
mod visits;

pub use category::{
    address_identity, map_agreement, Category, CategoryMap, MapProvenance, CATEGORIZATION_PROMPT,
};
pub use visits::{fixes_to_visits, merge_visits, SemanticVisit, VisitConfig, NOWHERE};
