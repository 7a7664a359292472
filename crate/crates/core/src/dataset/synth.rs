//! Synthetic cohorts with planted behavioural effects.
//!
//! Each user gets a unique home, a unique class enrolment and personal
//! habits. A latent daily stress value drives both behaviour (less
//! recreation, little or no work when stressed) and the EMA label through a
//! logistic link.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use chrono::{Datelike, Duration, NaiveDate};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{RawBundle, TermInfo};
use crate::error::{Error, Result};
use crate::features::{local_midnight, ClassMeeting, DAY_S};
use crate::geo::GpsFix;
use crate::labeling::{raw_code_for_level, EmaResponse};
use crate::learners::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub n_users: usize,
    pub n_weeks: usize,
    /// Share of users drawn from the stressed archetype.
    pub stressed_share: f64,
    pub center_lat: f64,
    pub center_lon: f64,
    /// Probability that a day has any EMA response.
    pub response_rate: f64,
    pub term_start: NaiveDate,
    pub origin_week: i64,
    pub utc_offset_s: i64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            n_users: 30,
            n_weeks: 9,
            stressed_share: 0.5,
            center_lat: 43.7022,
            center_lon: -72.2896,
            response_rate: 0.75,
            term_start: NaiveDate::from_ymd_opt(2013, 3, 25).expect("valid date"),
            origin_week: 13,
            utc_offset_s: -4 * 3600,
        }
    }
}

/// Slope of the logistic link from latent stress to a stressed label.
pub const LABEL_SLOPE: f64 = 2.0;
/// Latent stress mean of each archetype.
pub const ARCHETYPE_MEAN: [f64; 2] = [-0.7, 0.7];
const AR_COEF: f64 = 0.5;
const AR_NOISE: f64 = 0.85;
const DEADLINE_BUMP: f64 = 0.5;
const FIX_INTERVAL_S: i64 = 1200;
const DROPOUT: f64 = 0.04;
const TRAVEL_S: i64 = 15 * 60;
const JITTER_M: f64 = 8.0;
const GRID_M: f64 = 300.0;
const N_CLASSES: usize = 14;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    pub bundle: RawBundle,
    pub osm_xml: String,
    /// Latent stress per user-day.
    pub latent: BTreeMap<(String, NaiveDate), f64>,
    /// Archetype per user: `true` for the stressed archetype.
    pub stressed_archetype: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Home,
    School,
    Shop,
    Work,
    Recreation,
    Travel,
}

#[derive(Debug, Clone)]
struct Place {
    kind: Kind,
    lat: f64,
    lon: f64,
    key: &'static str,
    value: &'static str,
    number: Option<u32>,
}

const SHOPS: [(&str, &str); 8] = [
    ("shop", "supermarket"),
    ("shop", "convenience"),
    ("shop", "clothes"),
    ("shop", "bakery"),
    ("shop", "books"),
    ("amenity", "cafe"),
    ("amenity", "restaurant"),
    ("amenity", "bank"),
];
const WORKPLACES: [(&str, &str); 5] = [
    ("office", "insurance"),
    ("office", "estate_agent"),
    ("amenity", "post_office"),
    ("shop", "hairdresser"),
    ("amenity", "townhall"),
];
const RECREATION: [(&str, &str); 6] = [
    ("leisure", "pitch"),
    ("leisure", "sports_centre"),
    ("tourism", "museum"),
    ("amenity", "theatre"),
    ("amenity", "arts_centre"),
    ("leisure", "golf_course"),
];
const HOMES: [&str; 3] = ["house", "apartments", "dormitory"];
const N_BUS_STOPS: usize = 4;

struct CityMap {
    places: Vec<Place>,
    /// Points far from every place; fixes there geocode to nothing.
    open_ground: Vec<(f64, f64)>,
}

impl CityMap {
    fn of(&self, kind: Kind) -> Vec<usize> {
        (0..self.places.len()).filter(|&i| self.places[i].kind == kind).collect()
    }
}

fn build_map(spec: &CohortSpec, rng: &mut ChaCha8Rng) -> CityMap {
    let mut wanted: Vec<(Kind, &'static str, &'static str)> = Vec::new();
    for i in 0..spec.n_users {
        wanted.push((Kind::Home, "building", HOMES[i % HOMES.len()]));
    }
    wanted.push((Kind::School, "amenity", "university"));
    wanted.extend(SHOPS.iter().map(|&(k, v)| (Kind::Shop, k, v)));
    wanted.extend(WORKPLACES.iter().map(|&(k, v)| (Kind::Work, k, v)));
    wanted.extend(RECREATION.iter().map(|&(k, v)| (Kind::Recreation, k, v)));
    wanted.extend((0..N_BUS_STOPS).map(|_| (Kind::Travel, "highway", "bus_stop")));

    let side = ((wanted.len() as f64).sqrt().ceil() as usize).max(2);
    let dlat = GRID_M / 111_195.0;
    let dlon = GRID_M / (111_195.0 * spec.center_lat.to_radians().cos());
    let origin = (spec.center_lat - dlat * side as f64 / 2.0, spec.center_lon - dlon * side as f64 / 2.0);
    let mut cells: Vec<(usize, usize)> = (0..side).flat_map(|i| (0..side).map(move |j| (i, j))).collect();
    cells.shuffle(rng);

    let mut house_numbers: Vec<u32> = (1..=spec.n_users as u32 * 3).collect();
    house_numbers.shuffle(rng);
    let mut places = Vec::with_capacity(wanted.len());
    for (n, ((kind, key, value), (i, j))) in wanted.into_iter().zip(cells).enumerate() {
        places.push(Place {
            kind,
            lat: origin.0 + dlat * i as f64,
            lon: origin.1 + dlon * j as f64,
            key,
            value,
            number: (kind == Kind::Home).then(|| 10 + 2 * house_numbers[n]),
        });
    }
    let open_ground = (0..side - 1)
        .flat_map(|i| (0..side - 1).map(move |j| (i, j)))
        .map(|(i, j)| (origin.0 + dlat * (i as f64 + 0.5), origin.1 + dlon * (j as f64 + 0.5)))
        .collect();
    CityMap { places, open_ground }
}

fn osm_xml(map: &CityMap) -> String {
    let mut s = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\" generator=\"geopriv synth\">\n");
    let mut next_id = 1_000_000u64;
    for (i, p) in map.places.iter().enumerate() {
        let mut tags = format!("    <tag k=\"{}\" v=\"{}\"/>\n", p.key, p.value);
        if let Some(n) = p.number {
            let _ = writeln!(tags, "    <tag k=\"addr:housenumber\" v=\"{n}\"/>");
        }
        if p.kind == Kind::School {
            // campus footprint as a closed way around the centre
            let h = 0.0002;
            let corners = [(-h, -h), (-h, h), (h, h), (h, -h)];
            let mut ids = Vec::new();
            for (a, b) in corners {
                next_id += 1;
                let _ = writeln!(s, "  <node id=\"{next_id}\" lat=\"{:.7}\" lon=\"{:.7}\"/>", p.lat + a, p.lon + b);
                ids.push(next_id);
            }
            ids.push(ids[0]);
            let _ = writeln!(s, "  <way id=\"{}\">", i + 1);
            for id in ids {
                let _ = writeln!(s, "    <nd ref=\"{id}\"/>");
            }
            s.push_str(&tags);
            s.push_str("  </way>\n");
        } else {
            let _ = writeln!(s, "  <node id=\"{}\" lat=\"{:.7}\" lon=\"{:.7}\">", i + 1, p.lat, p.lon);
            s.push_str(&tags);
            s.push_str("  </node>\n");
        }
    }
    s.push_str("</osm>\n");
    s
}

fn classes(rng: &mut ChaCha8Rng) -> Vec<Vec<ClassMeeting>> {
    const STARTS: [i64; 6] = [9 * 60, 10 * 60 + 10, 11 * 60 + 15, 12 * 60 + 30, 14 * 60, 15 * 60 + 30];
    const PATTERNS: [&[u32]; 2] = [&[1, 3, 5], &[2, 4]];
    // distinct lengths keep timetables from different enrolments apart
    const MINUTES: [i64; N_CLASSES] = [50, 75, 55, 80, 60, 90, 65, 100, 70, 110, 85, 120, 95, 150];
    (0..N_CLASSES)
        .map(|c| {
            let (days, minutes) = (PATTERNS[c % PATTERNS.len()], MINUTES[c]);
            let start = STARTS.choose(rng).expect("nonempty") * 60;
            days.iter()
                .map(|&d| ClassMeeting {
                    class_id: format!("C{:02}", c + 1),
                    weekday: d,
                    start_s: start,
                    end_s: start + minutes * 60,
                    location_hint: "university".into(),
                })
                .collect()
        })
        .collect()
}

struct Persona {
    user: String,
    home: usize,
    work: usize,
    shops: Vec<usize>,
    recreation: Vec<usize>,
    classes: Vec<usize>,
    stressed: bool,
    leave_s: f64,
    recreation_h: f64,
    work_prob: f64,
    phase_s: i64,
}

#[derive(Debug, Clone, Copy)]
enum Spot {
    Place(usize),
    Open(f64, f64),
}

fn personas(spec: &CohortSpec, map: &CityMap, rng: &mut ChaCha8Rng) -> Vec<Persona> {
    let homes = map.of(Kind::Home);
    let shops = map.of(Kind::Shop);
    let works = map.of(Kind::Work);
    let recs = map.of(Kind::Recreation);
    let mut enrolments: BTreeSet<Vec<usize>> = BTreeSet::new();
    let n_stressed = (spec.stressed_share * spec.n_users as f64).round() as usize;
    let mut archetypes: Vec<bool> = (0..spec.n_users).map(|i| i < n_stressed).collect();
    archetypes.shuffle(rng);

    (0..spec.n_users)
        .map(|u| {
            let mut classes: Vec<usize> = Vec::new();
            for _ in 0..1000 {
                let k = rng.random_range(2..=4);
                let mut c = rand::seq::index::sample(rng, N_CLASSES, k).into_vec();
                c.sort_unstable();
                if !enrolments.contains(&c) {
                    classes = c;
                    break;
                }
                classes = c;
            }
            enrolments.insert(classes.clone());
            let n_shops = rng.random_range(1..=4);
            let n_recs = rng.random_range(1..=3);
            Persona {
                user: format!("u{u:02}"),
                home: homes[u],
                work: *works.choose(rng).expect("workplaces"),
                shops: shops.choose_multiple(rng, n_shops).copied().collect(),
                recreation: recs.choose_multiple(rng, n_recs).copied().collect(),
                classes,
                stressed: archetypes[u],
                leave_s: rng.random_range(7.5..10.0) * 3600.0,
                recreation_h: 2.0 * rng.random_range(0.85..1.15),
                work_prob: rng.random_range(0.3..0.6),
                phase_s: rng.random_range(0..FIX_INTERVAL_S),
            }
        })
        .collect()
}

fn overlaps(busy: &[(i64, i64, Spot)], a: i64, b: i64) -> bool {
    busy.iter().any(|&(s, e, _)| a < e + TRAVEL_S && s < b + TRAVEL_S)
}

/// Earliest start at or after `from` (10-minute steps) for a block of `len` seconds.
fn fit(busy: &[(i64, i64, Spot)], from: i64, len: i64, latest_end: i64) -> Option<i64> {
    let mut t = from;
    while t + len <= latest_end {
        if !overlaps(busy, t, t + len) {
            return Some(t);
        }
        t += 600;
    }
    None
}

/// Local-time itinerary `(start, end, spot)` covering `[0, DAY_S)`.
fn plan_day(
    rng: &mut ChaCha8Rng,
    p: &Persona,
    map: &CityMap,
    school: usize,
    lectures: &[(i64, i64)],
    stress: f64,
    errands: f64,
) -> Vec<(i64, i64, Spot)> {
    let s = sigmoid(3.0 * stress);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut leave = (p.leave_s + 1800.0 * normal.sample(rng)).clamp(6.0 * 3600.0, 12.0 * 3600.0) as i64;
    let mut busy: Vec<(i64, i64, Spot)> = Vec::new();
    for &(a, b) in lectures {
        if rng.random::<f64>() < 0.92 - 0.25 * s {
            leave = leave.min(a - 2 * TRAVEL_S);
            // back-to-back lectures: stay on campus
            match busy.last_mut() {
                Some(last) if a < last.1 + TRAVEL_S => last.1 = last.1.max(b),
                _ => busy.push((a, b, Spot::Place(school))),
            }
        }
    }
    let latest = 23 * 3600 + 30 * 60;
    let mut flex: Vec<(Spot, i64, i64)> = Vec::new();
    if rng.random::<f64>() < p.work_prob * (1.0 - s) * 2.0 {
        let len = rng.random_range(1.5..3.0) * 3600.0;
        flex.push((Spot::Place(p.work), len as i64, rng.random_range(leave..16 * 3600)));
    }
    let rec_h = p.recreation_h * (1.0 - 0.5 * s) * (0.3 * normal.sample(rng)).exp();
    let blocks = if rec_h > 1.5 { 2 } else { 1 };
    for _ in 0..blocks {
        let venue = *p.recreation.choose(rng).expect("venues");
        let len = rec_h * 3600.0 / blocks as f64;
        flex.push((Spot::Place(venue), len as i64, rng.random_range(leave..20 * 3600)));
    }
    let n_shop = (0..3).filter(|_| rng.random::<f64>() < errands).count();
    for _ in 0..n_shop {
        let shop = *p.shops.choose(rng).expect("shops");
        let len = rng.random_range(20..50) * 60;
        flex.push((Spot::Place(shop), len, rng.random_range(leave..21 * 3600)));
    }
    if rng.random::<f64>() < 0.5 {
        let len = rng.random_range(0.5..2.5) * 3600.0;
        flex.push((Spot::Place(school), len as i64, rng.random_range(leave..18 * 3600)));
    }
    flex.shuffle(rng);
    for (spot, len, prefer) in flex {
        let start = fit(&busy, prefer, len, latest).or_else(|| fit(&busy, leave, len, latest));
        if let Some(t) = start {
            busy.push((t, t + len, spot));
        }
    }
    busy.sort_by_key(|b| b.0);

    let bus = map.of(Kind::Travel);
    let travel = |rng: &mut ChaCha8Rng| {
        if rng.random::<f64>() < 0.5 {
            Spot::Place(*bus.choose(rng).expect("bus stops"))
        } else {
            let &(a, b) = map.open_ground.choose(rng).expect("open ground");
            Spot::Open(a, b)
        }
    };
    let home = Spot::Place(p.home);
    let mut out = Vec::new();
    let mut cursor = 0;
    let mut at_home = true;
    for &(a, b, spot) in &busy {
        let gap = a - cursor;
        if at_home {
            out.push((cursor, a - TRAVEL_S, home));
            out.push((a - TRAVEL_S, a, travel(rng)));
        } else if gap >= 90 * 60 {
            out.push((cursor, cursor + TRAVEL_S, travel(rng)));
            out.push((cursor + TRAVEL_S, a - TRAVEL_S, home));
            out.push((a - TRAVEL_S, a, travel(rng)));
        } else if gap > 0 {
            out.push((cursor, a, travel(rng)));
        }
        out.push((a, b, spot));
        cursor = b;
        at_home = false;
    }
    if !at_home {
        out.push((cursor, cursor + TRAVEL_S, travel(rng)));
        cursor += TRAVEL_S;
    }
    out.push((cursor, DAY_S, home));
    out.retain(|(a, b, _)| b > a);
    out
}

fn jitter(rng: &mut ChaCha8Rng, lat: f64, lon: f64) -> (f64, f64) {
    let n = Normal::new(0.0, JITTER_M / 111_195.0).expect("valid sd");
    let dlat = n.sample(rng);
    let dlon = n.sample(rng) / lat.to_radians().cos();
    (lat + dlat, lon + dlon)
}

struct UserStreams {
    fixes: Vec<GpsFix>,
    ema: Vec<EmaResponse>,
    deadlines: BTreeMap<NaiveDate, u32>,
    latent: Vec<(NaiveDate, f64)>,
}

fn deadline_calendar(spec: &CohortSpec, class_ids: &[usize]) -> BTreeMap<NaiveDate, u32> {
    let mut out = BTreeMap::new();
    let days = (spec.n_weeks * 7) as i64;
    for &c in class_ids {
        // every class has something due every other week, on a class-specific day
        let offset = (c as i64 * 3) % 14 + 4;
        let mut d = offset;
        while d < days {
            *out.entry(spec.term_start + Duration::days(d)).or_insert(0) += 1;
            d += 14;
        }
    }
    out
}

fn simulate_user(spec: &CohortSpec, map: &CityMap, cls: &[Vec<ClassMeeting>], p: &Persona, seed: u64, stream: u64) -> UserStreams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let school = map.of(Kind::School)[0];
    let deadlines = deadline_calendar(spec, &p.classes);
    let noise = Normal::new(0.0, AR_NOISE).expect("valid sd");
    let mu = ARCHETYPE_MEAN[usize::from(p.stressed)];
    let mut u = noise.sample(&mut rng) / (1.0 - AR_COEF * AR_COEF).sqrt();

    let mut fixes = Vec::new();
    let mut ema = Vec::new();
    let mut latent = Vec::new();
    let mut errands = 0.0;
    for day in 0..(spec.n_weeks * 7) as i64 {
        if day % 7 == 0 {
            // some weeks are full of errands, some are not
            errands = rng.random::<f64>();
        }
        let date = spec.term_start + Duration::days(day);
        let due_soon = (0..=2).any(|k| deadlines.contains_key(&(date + Duration::days(k))));
        u = AR_COEF * u + noise.sample(&mut rng);
        let z = mu + u + if due_soon { DEADLINE_BUMP } else { 0.0 };
        latent.push((date, z));

        let wd = date.weekday().number_from_monday();
        let mut lectures: Vec<(i64, i64)> = p
            .classes
            .iter()
            .flat_map(|&c| cls[c].iter())
            .filter(|m| m.weekday == wd)
            .map(|m| (m.start_s, m.end_s))
            .collect();
        lectures.sort_unstable();
        let plan = plan_day(&mut rng, p, map, school, &lectures, z, errands);

        let midnight = local_midnight(date, spec.utc_offset_s);
        let mut t = p.phase_s;
        let mut seg = 0;
        while t < DAY_S {
            while plan[seg].1 <= t {
                seg += 1;
            }
            let ts = midnight + t + rng.random_range(-30..=30);
            let (lat, lon) = match plan[seg].2 {
                Spot::Place(i) => (map.places[i].lat, map.places[i].lon),
                Spot::Open(a, b) => (a, b),
            };
            let (lat, lon) = jitter(&mut rng, lat, lon);
            if rng.random::<f64>() >= DROPOUT {
                fixes.push(GpsFix { timestamp: ts, lat, lon });
            }
            t += FIX_INTERVAL_S;
        }

        if rng.random::<f64>() < spec.response_rate {
            let stressed = rng.random::<f64>() < sigmoid(LABEL_SLOPE * z);
            let n = rng.random_range(1..=3);
            for _ in 0..n {
                let level: u8 = if stressed { rng.random_range(3..=5) } else { rng.random_range(1..=2) };
                let at = midnight + rng.random_range(9 * 3600..22 * 3600);
                ema.push(EmaResponse {
                    user_id: p.user.clone(),
                    timestamp: at,
                    raw_code: raw_code_for_level(level).expect("level in range"),
                });
            }
        }
    }
    UserStreams { fixes, ema, deadlines, latent }
}

/// Deterministic cohort for `(spec, seed)`.
pub fn generate_cohort(spec: &CohortSpec, seed: u64) -> Result<SyntheticCohort> {
    if spec.n_users == 0 || spec.n_weeks == 0 {
        return Err(Error::InvalidInput("cohort needs at least one user and one week".into()));
    }
    if !(0.0..=1.0).contains(&spec.stressed_share) || !(0.0..=1.0).contains(&spec.response_rate) {
        return Err(Error::InvalidInput("shares must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let map = build_map(spec, &mut rng);
    let cls = classes(&mut rng);
    let people = personas(spec, &map, &mut rng);
    let streams: Vec<UserStreams> = people
        .par_iter()
        .enumerate()
        .map(|(i, p)| simulate_user(spec, &map, &cls, p, seed, i as u64 + 1))
        .collect();

    let mut bundle = RawBundle {
        term: Some(TermInfo { term_start: spec.term_start, origin_week: spec.origin_week, utc_offset_s: spec.utc_offset_s }),
        ..Default::default()
    };
    for (c, meetings) in cls.into_iter().enumerate() {
        bundle.classes.insert(format!("C{:02}", c + 1), meetings);
    }
    let mut latent = BTreeMap::new();
    let mut stressed_archetype = BTreeMap::new();
    for (p, s) in people.iter().zip(streams) {
        bundle.fixes.insert(p.user.clone(), s.fixes);
        bundle.enrollment.insert(p.user.clone(), p.classes.iter().map(|c| format!("C{:02}", c + 1)).collect());
        bundle.deadlines.insert(p.user.clone(), s.deadlines);
        bundle.ema.extend(s.ema);
        for (d, z) in s.latent {
            latent.insert((p.user.clone(), d), z);
        }
        stressed_archetype.insert(p.user.clone(), p.stressed);
    }
    bundle.normalize();
    Ok(SyntheticCohort { bundle, osm_xml: osm_xml(&map), latent, stressed_archetype })
}
