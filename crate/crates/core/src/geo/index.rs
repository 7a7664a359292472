use std::collections::HashMap;
use std::io::{Read, Write};

use super::{haversine, GeoPoint, MapFeature, EARTH_RADIUS_M};
use crate::error::{Error, Result};

/// Default matching radius for reverse geocoding, in meters.
pub const DEFAULT_RADIUS_M: f64 = 75.0;

const MAGIC: &[u8; 4] = b"GPIX";
const FORMAT_VERSION: u16 = 1;

/// Uniform lat/lon grid over a fixed feature set. Immutable once built.
#[derive(Debug, Clone)]
pub struct MapIndex {
    features: Vec<MapFeature>,
    cell_deg: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl MapIndex {
    pub fn build(features: Vec<MapFeature>, cell_deg: f64) -> Result<Self> {
        if !(cell_deg.is_finite() && cell_deg > 0.0) {
            return Err(Error::InvalidCellSize(cell_deg));
        }
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, f) in features.iter().enumerate() {
            if !f.point().is_valid() {
                return Err(Error::InvalidCoordinate { lat: f.lat, lon: f.lon });
            }
            cells.entry(cell_of(f.lat, f.lon, cell_deg)).or_default().push(i);
        }
        Ok(MapIndex { features, cell_deg, cells })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn cell_deg(&self) -> f64 {
        self.cell_deg
    }

    pub fn features(&self) -> &[MapFeature] {
        &self.features
    }

    /// All features within `radius_m` of the query point, in ingestion order.
    pub fn within_radius(&self, at: GeoPoint, radius_m: f64) -> Vec<&MapFeature> {
        let mut hits: Vec<usize> = self
            .candidates(at, radius_m)
            .into_iter()
            .filter(|&i| haversine(at, self.features[i].point()) <= radius_m)
            .collect();
        hits.sort_unstable();
        hits.into_iter().map(|i| &self.features[i]).collect()
    }

    /// Nearest feature within `radius_m`; ties go to the smallest feature id.
    pub fn reverse_geocode(&self, lat: f64, lon: f64, radius_m: f64) -> Option<&MapFeature> {
        if !(radius_m > 0.0) {
            return None;
        }
        let at = GeoPoint { lat, lon };
        let mut best: Option<(f64, &MapFeature)> = None;
        for i in self.candidates(at, radius_m) {
            let f = &self.features[i];
            let d = haversine(at, f.point());
            if d > radius_m {
                continue;
            }
            best = match best {
                Some((bd, bf)) if bd < d || (bd == d && bf.feature_id <= f.feature_id) => {
                    Some((bd, bf))
                }
                _ => Some((d, f)),
            };
        }
        best.map(|(_, f)| f)
    }

    fn candidates(&self, at: GeoPoint, radius_m: f64) -> Vec<usize> {
        if self.features.is_empty() {
            return Vec::new();
        }
        let dlat = (radius_m / EARTH_RADIUS_M).to_degrees();
        let lat_lo = at.lat - dlat;
        let lat_hi = at.lat + dlat;
        let max_abs_lat = lat_lo.abs().max(lat_hi.abs());
        // near the poles the longitude window degenerates; fall back to a full scan
        if max_abs_lat >= 89.0 {
            return (0..self.features.len()).collect();
        }
        let dlon = dlat / max_abs_lat.to_radians().cos();
        if dlon >= 180.0 {
            return (0..self.features.len()).collect();
        }
        let mut lon_ranges = vec![(at.lon - dlon, at.lon + dlon)];
        if at.lon - dlon < -180.0 {
            lon_ranges.push((at.lon - dlon + 360.0, 180.0));
        }
        if at.lon + dlon > 180.0 {
            lon_ranges.push((-180.0, at.lon + dlon - 360.0));
        }

        let y0 = (lat_lo / self.cell_deg).floor() as i64;
        let y1 = (lat_hi / self.cell_deg).floor() as i64;
        let mut out = Vec::new();
        for (lo, hi) in lon_ranges {
            let x0 = (lo.max(-180.0) / self.cell_deg).floor() as i64;
            let x1 = (hi.min(180.0) / self.cell_deg).floor() as i64;
            let span = (y1 - y0 + 1) as usize * (x1 - x0 + 1) as usize;
            if span > self.cells.len() {
                // sparse index: walking the occupied cells is cheaper
                for (&(y, x), ids) in &self.cells {
                    if (y0..=y1).contains(&y) && (x0..=x1).contains(&x) {
                        out.extend_from_slice(ids);
                    }
                }
            } else {
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        if let Some(ids) = self.cells.get(&(y, x)) {
                            out.extend_from_slice(ids);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&self.cell_deg.to_le_bytes())?;
        w.write_all(&(self.features.len() as u64).to_le_bytes())?;
        for f in &self.features {
            write_str(&mut w, &f.feature_id)?;
            w.write_all(&f.lat.to_le_bytes())?;
            w.write_all(&f.lon.to_le_bytes())?;
            write_str(&mut w, &f.location_type)?;
            match &f.address_number {
                Some(n) => {
                    w.write_all(&[1])?;
                    write_str(&mut w, n)?;
                }
                None => w.write_all(&[0])?,
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::IndexFormat("bad magic header".into()));
        }
        let version = u16::from_le_bytes(read_array(&mut r)?);
        if version != FORMAT_VERSION {
            return Err(Error::IndexFormat(format!("unsupported version {version}")));
        }
        let cell_deg = f64::from_le_bytes(read_array(&mut r)?);
        let n = u64::from_le_bytes(read_array(&mut r)?) as usize;
        let mut features = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let feature_id = read_str(&mut r)?;
            let lat = f64::from_le_bytes(read_array(&mut r)?);
            let lon = f64::from_le_bytes(read_array(&mut r)?);
            let location_type = read_str(&mut r)?;
            let [flag] = read_array::<_, 1>(&mut r)?;
            let address_number = match flag {
                0 => None,
                1 => Some(read_str(&mut r)?),
                _ => return Err(Error::IndexFormat("bad address flag".into())),
            };
            features.push(MapFeature { feature_id, lat, lon, location_type, address_number });
        }
        MapIndex::build(features, cell_deg)
    }
}

fn cell_of(lat: f64, lon: f64, cell: f64) -> (i64, i64) {
    ((lat / cell).floor() as i64, (lon / cell).floor() as i64)
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = u32::from_le_bytes(read_array(r)?) as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::IndexFormat("non-UTF-8 string".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn feature(id: &str, lat: f64, lon: f64) -> MapFeature {
        MapFeature {
            feature_id: id.into(),
            lat,
            lon,
            location_type: "cafe".into(),
            address_number: None,
        }
    }

    fn brute_force(fs: &[MapFeature], lat: f64, lon: f64, r: f64) -> Option<&MapFeature> {
        let at = GeoPoint { lat, lon };
        let mut best: Option<(f64, &MapFeature)> = None;
        for f in fs {
            let d = haversine(at, f.point());
            if d > r {
                continue;
            }
            let better = match best {
                None => true,
                Some((bd, bf)) => d < bd || (d == bd && f.feature_id < bf.feature_id),
            };
            if better {
                best = Some((d, f));
            }
        }
        best.map(|(_, f)| f)
    }

    #[test]
    fn empty_index_answers_nothing() {
        let idx = MapIndex::build(Vec::new(), 0.01).unwrap();
        assert!(idx.is_empty());
        assert!(idx.reverse_geocode(43.7, -72.3, 75.0).is_none());
        assert!(idx.within_radius(GeoPoint { lat: 0.0, lon: 0.0 }, 1e7).is_empty());
    }

    #[test]
    fn zero_cell_size_rejected() {
        assert!(matches!(MapIndex::build(Vec::new(), 0.0), Err(Error::InvalidCellSize(_))));
        assert!(MapIndex::build(Vec::new(), -1.0).is_err());
    }

    #[test]
    fn exhaustive_self_lookup() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let fs: Vec<_> = (0..1000)
            .map(|i| feature(&format!("f{i:04}"), rng.random_range(43.6..43.8), rng.random_range(-72.4..-72.2)))
            .collect();
        let idx = MapIndex::build(fs.clone(), 0.01).unwrap();
        assert_eq!(idx.len(), 1000);
        for f in &fs {
            // co-located duplicates resolve to the smallest id; none are expected here
            let hit = idx.reverse_geocode(f.lat, f.lon, 1.0).unwrap();
            assert_eq!(hit, f);
        }
    }

    #[test]
    fn far_query_finds_nothing() {
        let idx = MapIndex::build(vec![feature("a", 43.70, -72.29)], 0.01).unwrap();
        // ~10 km north
        assert!(idx.reverse_geocode(43.79, -72.29, DEFAULT_RADIUS_M).is_none());
    }

    #[test]
    fn matches_linear_scan_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let fs: Vec<_> = (0..50)
                .map(|i| feature(&format!("x{i}"), rng.random_range(0.0..0.01), rng.random_range(0.0..0.01)))
                .collect();
            let idx = MapIndex::build(fs.clone(), 0.002).unwrap();
            for _ in 0..50 {
                let (lat, lon) = (rng.random_range(-0.002..0.012), rng.random_range(-0.002..0.012));
                assert_eq!(idx.reverse_geocode(lat, lon, 150.0), brute_force(&fs, lat, lon, 150.0));
            }
        }
    }

    #[test]
    fn ties_go_to_smallest_id() {
        let fs = vec![feature("b", 0.0, 0.0005), feature("a", 0.0, -0.0005), feature("c", 0.0, 0.0005)];
        let idx = MapIndex::build(fs, 0.01).unwrap();
        assert_eq!(idx.reverse_geocode(0.0, 0.0, 100.0).unwrap().feature_id, "a");
    }

    #[test]
    fn antimeridian_neighbours() {
        let fs = vec![feature("east", 10.0, 179.9999), feature("west", 10.0, -179.9995)];
        let idx = MapIndex::build(fs, 0.01).unwrap();
        assert_eq!(idx.reverse_geocode(10.0, -179.9999, 75.0).unwrap().feature_id, "east");
    }

    #[test]
    fn binary_round_trip() {
        let mut fs = vec![feature("n1", 1.0, 2.0), feature("w2", -3.5, 100.25)];
        fs[1].address_number = Some("10".into());
        let idx = MapIndex::build(fs, 0.05).unwrap();
        let mut buf = Vec::new();
        idx.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], MAGIC);
        let back = MapIndex::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.features(), idx.features());
        assert_eq!(back.cell_deg(), 0.05);

        buf[0] = b'X';
        assert!(matches!(MapIndex::read_from(buf.as_slice()), Err(Error::IndexFormat(_))));
    }
}
