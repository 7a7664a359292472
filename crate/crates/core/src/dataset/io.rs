//! CSV bundle layout, a StudentLife adapter, and dataset export.
//!
//! Bundle directory:
//!
//! | file | columns |
//! |---|---|
//! | `gps.csv` | `user_id,timestamp,lat,lon` (unix seconds) |
//! | `enrollment.csv` | `user_id,class_id` |
//! | `class_info.csv` | `class_id,weekday,start,end,location_hint` (ISO weekday or day name, `HH:MM` local) |
//! | `deadlines.csv` | `user_id,date,count` (`YYYY-MM-DD`) |
//! | `ema.csv` | `user_id,timestamp,raw_code` |
//! | `term.csv` | `term_start,origin_week,utc_offset_s` (one row) |

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{NaiveDate, NaiveTime, Timelike};

use super::{LabeledDataset, LabeledRow, RawBundle, TermInfo};
use crate::error::{Error, Result};
use crate::features::{all_feature_names, ClassMeeting, DailyFeatureRow};
use crate::geo::{GeoPoint, GpsFix};
use crate::labeling::{binarize, transform_level, DailyLabel, EmaResponse};

pub const BUNDLE_FILES: [&str; 6] = ["gps.csv", "enrollment.csv", "class_info.csv", "deadlines.csv", "ema.csv", "term.csv"];

fn open(dir: &Path, name: &str) -> Result<csv::Reader<File>> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(Error::MissingFile(path));
    }
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?)
}

/// Parses every record with `f`; malformed records are counted and skipped.
fn each_record<T>(
    dir: &Path,
    name: &str,
    mut f: impl FnMut(&csv::StringRecord) -> Option<T>,
) -> Result<Vec<T>> {
    let mut reader = open(dir, name)?;
    let mut out = Vec::new();
    let mut skipped = 0usize;
    for rec in reader.records() {
        match rec.ok().and_then(|r| f(&r)) {
            Some(v) => out.push(v),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("{name}: skipped {skipped} malformed rows");
    }
    if out.is_empty() {
        log::warn!("{name}: no rows");
    }
    log::info!("{name}: {} rows", out.len());
    Ok(out)
}

fn field<T: std::str::FromStr>(r: &csv::StringRecord, i: usize) -> Option<T> {
    r.get(i)?.parse().ok()
}

pub(crate) fn parse_weekday(s: &str) -> Option<u32> {
    if let Ok(n) = s.parse::<u32>() {
        return (1..=7).contains(&n).then_some(n);
    }
    let lower = s.to_ascii_lowercase();
    ["mon", "tue", "wed", "thu", "fri", "sat", "sun"]
        .iter()
        .position(|d| lower.starts_with(d))
        .map(|i| i as u32 + 1)
}

/// `HH:MM` (24 h) or `H:MMAM`/`H:MM PM` to seconds after midnight.
pub(crate) fn parse_clock(s: &str) -> Option<i64> {
    let s = s.trim();
    let t = NaiveTime::parse_from_str(s, "%H:%M")
        .or_else(|_| NaiveTime::parse_from_str(&s.to_ascii_uppercase().replace(' ', ""), "%I:%M%p"))
        .ok()?;
    Some(i64::from(t.num_seconds_from_midnight()))
}

fn clock(s: i64) -> String {
    format!("{:02}:{:02}", s / 3600, (s % 3600) / 60)
}

pub fn load_bundle(dir: &Path) -> Result<RawBundle> {
    for name in BUNDLE_FILES {
        if !dir.join(name).is_file() {
            return Err(Error::MissingFile(dir.join(name)));
        }
    }
    let mut b = RawBundle::default();

    for (user, fix) in each_record(dir, "gps.csv", |r| {
        let fix = GpsFix { timestamp: field(r, 1)?, lat: field(r, 2)?, lon: field(r, 3)? };
        GeoPoint::new(fix.lat, fix.lon).ok()?;
        Some((r.get(0)?.to_string(), fix))
    })? {
        b.fixes.entry(user).or_default().push(fix);
    }
    for (user, class) in each_record(dir, "enrollment.csv", |r| Some((r.get(0)?.to_string(), r.get(1)?.to_string())))? {
        b.enrollment.entry(user).or_default().push(class);
    }
    for m in each_record(dir, "class_info.csv", |r| {
        let m = ClassMeeting {
            class_id: r.get(0)?.to_string(),
            weekday: parse_weekday(r.get(1)?)?,
            start_s: parse_clock(r.get(2)?)?,
            end_s: parse_clock(r.get(3)?)?,
            location_hint: r.get(4).unwrap_or("").to_string(),
        };
        (m.end_s > m.start_s).then_some(m)
    })? {
        b.classes.entry(m.class_id.clone()).or_default().push(m);
    }
    for (user, date, count) in each_record(dir, "deadlines.csv", |r| {
        let count: i64 = field(r, 2)?;
        let count = u32::try_from(count).ok()?;
        Some((r.get(0)?.to_string(), NaiveDate::parse_from_str(r.get(1)?, "%Y-%m-%d").ok()?, count))
    })? {
        *b.deadlines.entry(user).or_default().entry(date).or_insert(0) += count;
    }
    b.ema = each_record(dir, "ema.csv", |r| {
        let e = EmaResponse { user_id: r.get(0)?.to_string(), timestamp: field(r, 1)?, raw_code: field(r, 2)? };
        transform_level(e.raw_code).ok()?;
        Some(e)
    })?;
    let terms = each_record(dir, "term.csv", |r| {
        Some(TermInfo {
            term_start: NaiveDate::parse_from_str(r.get(0)?, "%Y-%m-%d").ok()?,
            origin_week: field(r, 1)?,
            utc_offset_s: field(r, 2)?,
        })
    })?;
    b.term = Some(*terms.first().ok_or_else(|| Error::InvalidInput("term.csv has no valid row".into()))?);
    b.normalize();
    log::info!("bundle: {} users, {} fixes, {} EMA responses", b.users.len(), b.n_fixes(), b.ema.len());
    Ok(b)
}

pub fn write_bundle(b: &RawBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("gps.csv"))?;
    w.write_record(["user_id", "timestamp", "lat", "lon"])?;
    for (u, fixes) in &b.fixes {
        for f in fixes {
            w.write_record([u.as_str(), &f.timestamp.to_string(), &f.lat.to_string(), &f.lon.to_string()])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("enrollment.csv"))?;
    w.write_record(["user_id", "class_id"])?;
    for (u, classes) in &b.enrollment {
        for c in classes {
            w.write_record([u, c])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("class_info.csv"))?;
    w.write_record(["class_id", "weekday", "start", "end", "location_hint"])?;
    for meetings in b.classes.values() {
        for m in meetings {
            w.write_record([&m.class_id, &m.weekday.to_string(), &clock(m.start_s), &clock(m.end_s), &m.location_hint])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("deadlines.csv"))?;
    w.write_record(["user_id", "date", "count"])?;
    for (u, days) in &b.deadlines {
        for (d, c) in days {
            w.write_record([u, &d.to_string(), &c.to_string()])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("ema.csv"))?;
    w.write_record(["user_id", "timestamp", "raw_code"])?;
    for e in &b.ema {
        w.write_record([&e.user_id, &e.timestamp.to_string(), &e.raw_code.to_string()])?;
    }
    w.flush()?;

    let term = b.term()?;
    let mut w = csv::Writer::from_path(dir.join("term.csv"))?;
    w.write_record(["term_start", "origin_week", "utc_offset_s"])?;
    w.write_record([term.term_start.to_string(), term.origin_week.to_string(), term.utc_offset_s.to_string()])?;
    w.flush()?;
    Ok(())
}

fn user_from_stem(path: &Path, prefix: &str) -> Option<String> {
    let stem = path.file_stem()?.to_str()?;
    stem.strip_prefix(prefix).map(String::from)
}

fn sorted_entries(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut v: Vec<_> = std::fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
    v.sort();
    Ok(v)
}

/// Reads a StudentLife dataset copy laid out as distributed:
/// `sensing/gps/gps_<uid>.csv`, `EMA/response/Stress/Stress_<uid>.json`, and
/// optionally `education/class.csv` (uid followed by class ids),
/// `education/class_info.json` (class id to `periods` of `day`/`start`/`end`
/// plus `location`) and `education/deadlines.csv` (uid then one count column per date).
pub fn load_studentlife(root: &Path, term: TermInfo) -> Result<RawBundle> {
    let mut b = RawBundle { term: Some(term), ..Default::default() };

    let gps_dir = root.join("sensing").join("gps");
    if !gps_dir.is_dir() {
        return Err(Error::MissingFile(gps_dir));
    }
    for path in sorted_entries(&gps_dir)? {
        let Some(user) = user_from_stem(&path, "gps_") else { continue };
        let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_path(&path)?;
        let headers = reader.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let (Some(t), Some(la), Some(lo)) = (col("time"), col("latitude"), col("longitude")) else {
            log::warn!("{}: missing time/latitude/longitude columns", path.display());
            continue;
        };
        let mut skipped = 0;
        let fixes = b.fixes.entry(user).or_default();
        for rec in reader.records() {
            let fix = rec.ok().and_then(|r| {
                let f = GpsFix { timestamp: field(&r, t)?, lat: field(&r, la)?, lon: field(&r, lo)? };
                f.point().is_valid().then_some(f)
            });
            match fix {
                Some(f) => fixes.push(f),
                None => skipped += 1,
            }
        }
        if skipped > 0 {
            log::warn!("{}: skipped {skipped} rows", path.display());
        }
    }

    let ema_dir = root.join("EMA").join("response").join("Stress");
    if !ema_dir.is_dir() {
        return Err(Error::MissingFile(ema_dir));
    }
    for path in sorted_entries(&ema_dir)? {
        let Some(user) = user_from_stem(&path, "Stress_") else { continue };
        let items: Vec<serde_json::Value> = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
        for item in items {
            let num = |k: &str| match item.get(k) {
                Some(serde_json::Value::Number(n)) => n.as_i64(),
                Some(serde_json::Value::String(s)) => s.trim().parse().ok(),
                _ => None,
            };
            if let (Some(ts), Some(code)) = (num("resp_time"), num("level")) {
                if transform_level(code).is_ok() {
                    b.ema.push(EmaResponse { user_id: user.clone(), timestamp: ts, raw_code: code });
                }
            }
        }
    }

    let edu = root.join("education");
    let class_csv = edu.join("class.csv");
    if class_csv.is_file() {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_path(&class_csv)?;
        for rec in reader.records().flatten() {
            let mut it = rec.iter();
            if let Some(user) = it.next() {
                b.enrollment.entry(user.to_string()).or_default().extend(it.filter(|c| !c.is_empty()).map(String::from));
            }
        }
    } else {
        log::warn!("{} not found; no class enrollment", class_csv.display());
    }
    let info = edu.join("class_info.json");
    if info.is_file() {
        let v: BTreeMap<String, serde_json::Value> = serde_json::from_str(&std::fs::read_to_string(&info)?)?;
        for (class, spec) in v {
            let hint = spec.get("location").and_then(|l| l.as_str()).unwrap_or("").to_string();
            for p in spec.get("periods").and_then(|p| p.as_array()).into_iter().flatten() {
                let s = |k: &str| p.get(k).and_then(|x| x.as_str());
                let m = (|| {
                    Some(ClassMeeting {
                        class_id: class.clone(),
                        weekday: parse_weekday(s("day")?)?,
                        start_s: parse_clock(s("start")?)?,
                        end_s: parse_clock(s("end")?)?,
                        location_hint: hint.clone(),
                    })
                })();
                match m {
                    Some(m) if m.end_s > m.start_s => b.classes.entry(class.clone()).or_default().push(m),
                    _ => log::warn!("{class}: unparseable period {p}"),
                }
            }
        }
    } else {
        log::warn!("{} not found; no class schedule", info.display());
    }
    let dl = edu.join("deadlines.csv");
    if dl.is_file() {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(&dl)?;
        let dates: Vec<Option<NaiveDate>> =
            reader.headers()?.iter().map(|h| NaiveDate::parse_from_str(h, "%Y-%m-%d").ok()).collect();
        for rec in reader.records().flatten() {
            let Some(user) = rec.get(0) else { continue };
            for (i, v) in rec.iter().enumerate().skip(1) {
                if let (Some(Some(d)), Ok(c)) = (dates.get(i), v.parse::<u32>()) {
                    if c > 0 {
                        b.deadlines.entry(user.to_string()).or_default().insert(*d, c);
                    }
                }
            }
        }
    } else {
        log::warn!("{} not found; no deadlines", dl.display());
    }
    b.normalize();
    log::info!("StudentLife: {} users, {} fixes, {} EMA responses", b.users.len(), b.n_fixes(), b.ema.len());
    Ok(b)
}

const LEAD_COLUMNS: [&str; 6] = ["user_id", "date", "ordered_level", "binary", "semantic_complete", "raw_complete"];

/// Wide CSV: identifying columns then every feature in canonical order.
pub fn write_dataset_csv(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let names = all_feature_names();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(LEAD_COLUMNS.iter().copied().chain(names.iter().copied()))?;
    for r in &ds.rows {
        let mut rec = vec![
            r.label.user_id.clone(),
            r.label.date.to_string(),
            r.label.ordered_level.to_string(),
            r.label.binary.to_string(),
            u8::from(r.features.semantic_complete).to_string(),
            u8::from(r.features.raw_complete).to_string(),
        ];
        for n in &names {
            rec.push(r.features.get(n).ok_or_else(|| Error::MissingFeature(n.to_string()))?.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv(path: &Path) -> Result<LabeledDataset> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().take(LEAD_COLUMNS.len()).ne(LEAD_COLUMNS.iter().copied()) {
        return Err(Error::InvalidInput(format!("{}: unexpected header", path.display())));
    }
    let bad = |what: &str| Error::InvalidInput(format!("{}: bad {what}", path.display()));
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let user = rec[0].to_string();
        let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d").map_err(|_| bad("date"))?;
        let ordered_level: f64 = rec[2].parse().map_err(|_| bad("ordered_level"))?;
        let binary: u8 = rec[3].parse().map_err(|_| bad("binary"))?;
        if binary != binarize(ordered_level) {
            return Err(bad("label (binary disagrees with level)"));
        }
        let mut features = DailyFeatureRow::new(user.clone(), date);
        features.semantic_complete = &rec[4] == "1";
        features.raw_complete = &rec[5] == "1";
        for (name, v) in headers.iter().zip(rec.iter()).skip(LEAD_COLUMNS.len()) {
            features.values.insert(name.to_string(), v.parse().map_err(|_| bad(name))?);
        }
        rows.push(LabeledRow { features, label: DailyLabel { user_id: user, date, ordered_level, binary } });
    }
    Ok(LabeledDataset { rows })
}

/// One JSON object per row, carrying completeness flags.
pub fn write_dataset_jsonl(ds: &LabeledDataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in &ds.rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) {
        std::fs::write(dir.join(name), body).unwrap();
    }

    fn fixture(dir: &Path) {
        write(dir, "gps.csv", "user_id,timestamp,lat,lon\nu1,86400,43.7,-72.29\nu1,90000,43.7,-72.29\nu1,172800,43.7,-72.29\nu1,259200,43.7,-72.29\nu2,86400,43.71,-72.28\nu2,172800,43.71,-72.28\nu2,259200,43.71,-72.28\nu2,bad,1,1\nu2,1,95,0\n");
        write(dir, "enrollment.csv", "user_id,class_id\nu1,cs1\n");
        write(dir, "class_info.csv", "class_id,weekday,start,end,location_hint\ncs1,Mon,10:00,11:05,hall\ncs1,3,10:00,11:05,hall\n");
        write(dir, "deadlines.csv", "user_id,date,count\nu1,1970-01-03,2\nu1,1970-01-04,-1\n");
        write(dir, "ema.csv", "user_id,timestamp,raw_code\nu1,90000,4\nu2,90000,9\n");
        write(dir, "term.csv", "term_start,origin_week,utc_offset_s\n1970-01-01,1,0\n");
    }

    #[test]
    fn loads_fixture_and_skips_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        let b = load_bundle(dir.path()).unwrap();
        assert_eq!(b.users, vec!["u1", "u2"]);
        assert_eq!(b.fixes["u1"].len(), 4);
        assert_eq!(b.fixes["u2"].len(), 3);
        // 2 users x 3 days
        assert_eq!(b.candidate_days().unwrap().len(), 6);
        assert_eq!(b.deadlines["u1"].len(), 1, "negative count skipped");
        assert_eq!(b.ema.len(), 1, "invalid code skipped");
        assert_eq!(b.classes["cs1"].iter().map(|m| m.weekday).collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(b.classes["cs1"][0].end_s, 11 * 3600 + 5 * 60);
    }

    #[test]
    fn missing_file_is_named() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        std::fs::remove_file(dir.path().join("ema.csv")).unwrap();
        match load_bundle(dir.path()) {
            Err(Error::MissingFile(p)) => assert!(p.ends_with("ema.csv")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_gps_gives_zero_fixes() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        write(dir.path(), "gps.csv", "user_id,timestamp,lat,lon\n");
        assert_eq!(load_bundle(dir.path()).unwrap().n_fixes(), 0);
    }

    #[test]
    fn bundle_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        fixture(dir.path());
        let b = load_bundle(dir.path()).unwrap();
        let out = tempfile::tempdir().unwrap();
        write_bundle(&b, out.path()).unwrap();
        assert_eq!(load_bundle(out.path()).unwrap(), b);
    }

    #[test]
    fn clock_formats() {
        assert_eq!(parse_clock("09:05"), Some(9 * 3600 + 300));
        assert_eq!(parse_clock("1:35PM"), Some(13 * 3600 + 35 * 60));
        assert_eq!(parse_clock("12:30 am"), Some(30 * 60));
        assert_eq!(parse_clock("25:00"), None);
        assert_eq!(parse_weekday("Thursday"), Some(4));
        assert_eq!(parse_weekday("8"), None);
    }

    #[test]
    fn studentlife_layout() {
        let root = tempfile::tempdir().unwrap();
        let r = root.path();
        std::fs::create_dir_all(r.join("sensing/gps")).unwrap();
        std::fs::create_dir_all(r.join("EMA/response/Stress")).unwrap();
        std::fs::create_dir_all(r.join("education")).unwrap();
        write(r, "sensing/gps/gps_u00.csv", "time,provider,network_type,accuracy,latitude,longitude,altitude,bearing,speed,travelstate\n1364356000,network,wifi,20,43.70,-72.29,0,0,0,stationary\n");
        write(r, "EMA/response/Stress/Stress_u00.json", r#"[{"level": "2", "resp_time": 1364356900}, {"null": "x"}, {"level": 3, "resp_time": 1364357000}]"#);
        write(r, "education/class.csv", "u00,COSC 065,COSC 089\n");
        write(r, "education/class_info.json", r#"{"COSC 065": {"location": "Kemeny", "periods": [{"day": "Monday", "start": "12:30PM", "end": "1:35PM"}]}}"#);
        write(r, "education/deadlines.csv", "uid,2013-03-27,2013-03-28\nu00,0,2\n");
        let term = TermInfo { term_start: NaiveDate::from_ymd_opt(2013, 3, 25).unwrap(), origin_week: 13, utc_offset_s: -4 * 3600 };
        let b = load_studentlife(r, term).unwrap();
        assert_eq!(b.fixes["u00"].len(), 1);
        assert_eq!(b.ema.len(), 2);
        assert_eq!(b.enrollment["u00"], vec!["COSC 065", "COSC 089"]);
        assert_eq!(b.classes["COSC 065"][0].start_s, 12 * 3600 + 30 * 60);
        assert_eq!(b.deadlines["u00"].len(), 1);
    }
}
