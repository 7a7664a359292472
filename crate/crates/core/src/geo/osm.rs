//! Minimal OSM XML reader: `<node>` and `<way>` elements with `<tag>` and `<nd>` children.

use std::collections::HashMap;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};

use super::GeoPoint;
use crate::error::{Error, Result};

/// Tag keys consulted for the location type, highest priority first.
pub const TYPE_TAG_PRIORITY: [&str; 8] = [
    "amenity", "shop", "leisure", "tourism", "office", "building", "highway", "landuse",
];

pub const HOUSE_NUMBER_TAG: &str = "addr:housenumber";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapFeature {
    pub feature_id: String,
    pub lat: f64,
    pub lon: f64,
    pub location_type: String,
    pub address_number: Option<String>,
}

impl MapFeature {
    pub fn point(&self) -> GeoPoint {
        GeoPoint { lat: self.lat, lon: self.lon }
    }
}

#[derive(Debug, Clone, Default)]
pub struct OsmParseOutput {
    pub features: Vec<MapFeature>,
    /// Ways dropped because they referenced a node not seen earlier in the stream.
    pub skipped_ways: usize,
}

enum Pending {
    None,
    Node { id: String, point: GeoPoint, tags: Vec<(String, String)> },
    Way { id: String, refs: Vec<String>, tags: Vec<(String, String)> },
}

pub fn parse_osm(xml: &str) -> Result<OsmParseOutput> {
    let mut reader = Reader::from_str(xml);
    reader.config_mut().check_end_names = true;

    let line_at = |pos: u64| -> usize {
        let end = (pos as usize).min(xml.len());
        xml.as_bytes()[..end].iter().filter(|&&b| b == b'\n').count() + 1
    };

    let mut nodes: HashMap<String, GeoPoint> = HashMap::new();
    let mut out = OsmParseOutput::default();
    let mut pending = Pending::None;
    let mut depth = 0usize;

    loop {
        let pos = reader.buffer_position();
        let event = reader.read_event().map_err(|e| Error::OsmParse {
            line: line_at(reader.error_position().max(pos)),
            message: e.to_string(),
        })?;
        let err = |message: String| Error::OsmParse { line: line_at(pos), message };
        match event {
            Event::Start(e) => {
                depth += 1;
                handle_open(&e, &mut pending, &mut nodes, &err)?;
            }
            Event::Empty(e) => {
                handle_open(&e, &mut pending, &mut nodes, &err)?;
                // a self-closing node or way has no children
                if matches!(e.name().as_ref(), b"node" | b"way") {
                    finish(&mut pending, &nodes, &mut out);
                }
            }
            Event::End(e) => {
                depth = depth.saturating_sub(1);
                if matches!(e.name().as_ref(), b"node" | b"way") {
                    finish(&mut pending, &nodes, &mut out);
                }
            }
            Event::Eof => {
                if depth != 0 {
                    return Err(Error::OsmParse {
                        line: line_at(pos),
                        message: "unexpected end of document".into(),
                    });
                }
                break;
            }
            _ => {}
        }
    }
    if out.skipped_ways > 0 {
        log::warn!("{} way(s) referenced unknown nodes and were skipped", out.skipped_ways);
    }
    Ok(out)
}

fn attrs(e: &BytesStart<'_>, err: &dyn Fn(String) -> Error) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for a in e.attributes() {
        let a = a.map_err(|x| err(x.to_string()))?;
        let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
        let value = a.unescape_value().map_err(|x| err(x.to_string()))?.into_owned();
        map.insert(key, value);
    }
    Ok(map)
}

fn handle_open(
    e: &BytesStart<'_>,
    pending: &mut Pending,
    nodes: &mut HashMap<String, GeoPoint>,
    err: &dyn Fn(String) -> Error,
) -> Result<()> {
    match e.name().as_ref() {
        b"node" => {
            let a = attrs(e, err)?;
            let id = a.get("id").ok_or_else(|| err("node without id".into()))?.clone();
            let coord = |k: &str| -> Result<f64> {
                a.get(k)
                    .ok_or_else(|| err(format!("node {id} without {k}")))?
                    .parse::<f64>()
                    .map_err(|_| err(format!("node {id}: bad {k}")))
            };
            let (lat, lon) = (coord("lat")?, coord("lon")?);
            let point = GeoPoint::new(lat, lon).map_err(|x| err(x.to_string()))?;
            nodes.insert(id.clone(), point);
            *pending = Pending::Node { id, point, tags: Vec::new() };
        }
        b"way" => {
            let a = attrs(e, err)?;
            let id = a.get("id").ok_or_else(|| err("way without id".into()))?.clone();
            *pending = Pending::Way { id, refs: Vec::new(), tags: Vec::new() };
        }
        b"tag" => {
            let a = attrs(e, err)?;
            if let (Some(k), Some(v)) = (a.get("k"), a.get("v")) {
                match pending {
                    Pending::Node { tags, .. } | Pending::Way { tags, .. } => {
                        tags.push((k.clone(), v.clone()))
                    }
                    Pending::None => {}
                }
            }
        }
        b"nd" => {
            let a = attrs(e, err)?;
            if let (Pending::Way { refs, .. }, Some(r)) = (pending, a.get("ref")) {
                refs.push(r.clone());
            }
        }
        _ => {}
    }
    Ok(())
}

fn finish(pending: &mut Pending, nodes: &HashMap<String, GeoPoint>, out: &mut OsmParseOutput) {
    match std::mem::replace(pending, Pending::None) {
        Pending::None => {}
        Pending::Node { id, point, tags } => {
            if let Some(location_type) = location_type(&tags) {
                out.features.push(MapFeature {
                    feature_id: format!("n{id}"),
                    lat: point.lat,
                    lon: point.lon,
                    location_type,
                    address_number: house_number(&tags),
                });
            }
        }
        Pending::Way { id, mut refs, tags } => {
            let Some(location_type) = location_type(&tags) else { return };
            // closed rings repeat their first node
            if refs.len() > 1 && refs.first() == refs.last() {
                refs.pop();
            }
            let mut points = Vec::with_capacity(refs.len());
            for r in &refs {
                match nodes.get(r) {
                    Some(p) => points.push(*p),
                    None => {
                        out.skipped_ways += 1;
                        return;
                    }
                }
            }
            if points.is_empty() {
                out.skipped_ways += 1;
                return;
            }
            let n = points.len() as f64;
            let lat = points.iter().map(|p| p.lat).sum::<f64>() / n;
            let lon = points.iter().map(|p| p.lon).sum::<f64>() / n;
            out.features.push(MapFeature {
                feature_id: format!("w{id}"),
                lat,
                lon,
                location_type,
                address_number: house_number(&tags),
            });
        }
    }
}

fn location_type(tags: &[(String, String)]) -> Option<String> {
    TYPE_TAG_PRIORITY.iter().find_map(|key| {
        tags.iter()
            .find(|(k, v)| k == key && !v.trim().is_empty())
            .map(|(_, v)| v.trim().to_string())
    })
}

fn house_number(tags: &[(String, String)]) -> Option<String> {
    tags.iter()
        .find(|(k, v)| k == HOUSE_NUMBER_TAG && !v.trim().is_empty())
        .map(|(_, v)| v.trim().to_string())
}
