//! Offline geocoding: OSM extract ingestion, haversine distance and a grid index
//! answering nearest-feature queries in-process.

mod distance;
mod index;
mod osm;

pub use distance::{haversine, GeoPoint, EARTH_RADIUS_M};
pub use index::{MapIndex, DEFAULT_RADIUS_M};
pub use osm::{parse_osm, MapFeature, OsmParseOutput, HOUSE_NUMBER_TAG, TYPE_TAG_PRIORITY};

/// A single GPS sample.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GpsFix {
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
}

impl GpsFix {
    pub fn point(&self) -> GeoPoint {
        GeoPoint { lat: self.lat, lon: self.lon }
    }
}
