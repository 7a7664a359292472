//! Raw stream bundles, the feature/label join, and synthetic cohorts.

mod io;
mod synth;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use io::{
    load_bundle, load_studentlife, read_dataset_csv, write_bundle, write_dataset_csv, write_dataset_jsonl,
    BUNDLE_FILES,
};
pub use synth::{generate_cohort, CohortSpec, SyntheticCohort};

use crate::error::{Error, Result};
use crate::features::{
    academic_features, address_features, attendance_rate, local_date, local_midnight, location_function_features, Daytime,
    raw_gps_features, scheduled_intervals, time_features, AcademicContext, ClassMeeting, DailyFeatureRow, FeatureSet,
    DAY_S,
};
use crate::geo::{GpsFix, MapIndex};
use crate::labeling::{daily_label, DailyLabel, EmaResponse};
use crate::matrix::Matrix;
use crate::semantic::{fixes_to_visits, CategoryMap, SemanticVisit, VisitConfig};

/// Term calendar and clock settings shared by every user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermInfo {
    pub term_start: NaiveDate,
    /// Week number assigned to the week containing `term_start`.
    pub origin_week: i64,
    /// Local time minus UTC, in seconds.
    pub utc_offset_s: i64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawBundle {
    /// Every user id appearing in any stream, sorted.
    pub users: Vec<String>,
    /// Time-sorted fixes per user.
    pub fixes: BTreeMap<String, Vec<GpsFix>>,
    pub enrollment: BTreeMap<String, Vec<String>>,
    /// Weekly meetings per class id.
    pub classes: BTreeMap<String, Vec<ClassMeeting>>,
    pub deadlines: BTreeMap<String, BTreeMap<NaiveDate, u32>>,
    pub ema: Vec<EmaResponse>,
    pub term: Option<TermInfo>,
}

impl RawBundle {
    /// Recomputes the roster and orders streams canonically.
    pub fn normalize(&mut self) {
        let mut users: BTreeSet<String> = BTreeSet::new();
        users.extend(self.fixes.keys().cloned());
        users.extend(self.enrollment.keys().cloned());
        users.extend(self.deadlines.keys().cloned());
        users.extend(self.ema.iter().map(|e| e.user_id.clone()));
        self.users = users.into_iter().collect();
        for f in self.fixes.values_mut() {
            f.sort_by_key(|x| x.timestamp);
        }
        for c in self.enrollment.values_mut() {
            c.sort();
            c.dedup();
        }
        self.ema.sort_by(|a, b| (&a.user_id, a.timestamp, a.raw_code).cmp(&(&b.user_id, b.timestamp, b.raw_code)));
    }

    pub fn term(&self) -> Result<TermInfo> {
        self.term.ok_or_else(|| Error::InvalidInput("bundle has no term calendar".into()))
    }

    pub fn n_fixes(&self) -> usize {
        self.fixes.values().map(Vec::len).sum()
    }

    /// Weekly meetings of every class the user is enrolled in.
    pub fn meetings_for(&self, user: &str) -> Vec<ClassMeeting> {
        let Some(classes) = self.enrollment.get(user) else {
            return Vec::new();
        };
        classes
            .iter()
            .filter_map(|c| {
                let m = self.classes.get(c);
                if m.is_none() {
                    log::warn!("user {user} enrolled in unknown class {c}");
                }
                m
            })
            .flatten()
            .cloned()
            .collect()
    }

    /// (user, local date) pairs that have at least one fix.
    pub fn candidate_days(&self) -> Result<BTreeSet<(String, NaiveDate)>> {
        let term = self.term()?;
        Ok(self
            .fixes
            .iter()
            .flat_map(|(u, fx)| fx.iter().map(move |f| (u.clone(), local_date(f.timestamp, term.utc_offset_s))))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRow {
    pub features: DailyFeatureRow,
    pub label: DailyLabel,
}

/// One labelled row per user-day, sorted by (user, date).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDataset {
    pub rows: Vec<LabeledRow>,
}

/// Model-ready view of a dataset restricted to one feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub x: Matrix,
    pub y: Vec<usize>,
    /// Dataset row index of each design row.
    pub row_ids: Vec<usize>,
    /// Index into `users` per design row.
    pub user_idx: Vec<usize>,
    pub users: Vec<String>,
    pub feature_names: Vec<&'static str>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn day_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for r in &self.rows {
            *out.entry(r.label.user_id.clone()).or_insert(0) += 1;
        }
        out
    }

    pub fn users(&self) -> Vec<String> {
        self.day_counts().into_keys().collect()
    }

    /// Count of rows per binary label.
    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.rows.iter().filter(|r| r.label.binary == 1).count();
        [self.rows.len() - ones, ones]
    }

    /// Rows usable for `set`, as a matrix. RAW skips rows without fixes;
    /// semantic sets skip nothing (empty days carry zeros).
    pub fn design(&self, set: FeatureSet) -> Result<Design> {
        let names = set.names();
        let users = self.users();
        let mut x = Matrix::with_cols(names.len());
        let (mut y, mut row_ids, mut user_idx) = (Vec::new(), Vec::new(), Vec::new());
        for (i, r) in self.rows.iter().enumerate() {
            if set == FeatureSet::RAW && !r.features.raw_complete {
                continue;
            }
            x.push_row(&crate::features::select_features(&r.features, set)?)?;
            y.push(usize::from(r.label.binary));
            row_ids.push(i);
            user_idx.push(users.binary_search(&r.label.user_id).expect("user in roster"));
        }
        Ok(Design { x, y, row_ids, user_idx, users, feature_names: names })
    }

    /// Copy with the binary labels permuted across rows (a no-signal control).
    pub fn with_permuted_labels(&self, seed: u64) -> LabeledDataset {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut labels: Vec<(f64, u8)> = self.rows.iter().map(|r| (r.label.ordered_level, r.label.binary)).collect();
        labels.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let mut out = self.clone();
        for (r, (lvl, b)) in out.rows.iter_mut().zip(labels) {
            r.label.ordered_level = lvl;
            r.label.binary = b;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub visits: VisitConfig,
    pub daytime: Daytime,
}

/// Cuts visits at local midnights and files the pieces under their dates.
fn visits_by_date(visits: &[SemanticVisit], utc_offset_s: i64) -> BTreeMap<NaiveDate, Vec<SemanticVisit>> {
    let mut out: BTreeMap<NaiveDate, Vec<SemanticVisit>> = BTreeMap::new();
    for v in visits {
        let mut start = v.start;
        while start < v.end {
            let date = local_date(start, utc_offset_s);
            let next_midnight = local_midnight(date, utc_offset_s) + DAY_S;
            let end = v.end.min(next_midnight);
            out.entry(date).or_default().push(SemanticVisit { start, end, ..v.clone() });
            start = end;
        }
    }
    out
}

struct UserContext {
    by_date: BTreeMap<NaiveDate, Vec<SemanticVisit>>,
    fixes_by_date: BTreeMap<NaiveDate, Vec<GpsFix>>,
    academic: AcademicContext,
}

fn user_context(
    bundle: &RawBundle,
    user: &str,
    index: &MapIndex,
    map: &CategoryMap,
    cfg: &DatasetConfig,
    term: TermInfo,
) -> Result<UserContext> {
    let fixes = bundle.fixes.get(user).map(Vec::as_slice).unwrap_or(&[]);
    let visits = fixes_to_visits(user, fixes, index, map, &cfg.visits)?;
    let by_date = visits_by_date(&visits, term.utc_offset_s);
    let mut fixes_by_date: BTreeMap<NaiveDate, Vec<GpsFix>> = BTreeMap::new();
    for f in fixes {
        fixes_by_date.entry(local_date(f.timestamp, term.utc_offset_s)).or_default().push(*f);
    }
    let meetings = bundle.meetings_for(user);
    let mut attendance = BTreeMap::new();
    for date in fixes_by_date.keys() {
        let scheduled = scheduled_intervals(&meetings, *date, term.utc_offset_s);
        let day = by_date.get(date).map(Vec::as_slice).unwrap_or(&[]);
        if let Some(rate) = attendance_rate(day, &scheduled) {
            attendance.insert(*date, rate);
        }
    }
    let academic = AcademicContext {
        meetings,
        deadlines: bundle.deadlines.get(user).cloned().unwrap_or_default(),
        attendance,
    };
    Ok(UserContext { by_date, fixes_by_date, academic })
}

/// Features for one user-day, semantic and raw.
fn feature_row(user: &str, date: NaiveDate, ctx: &UserContext, term: TermInfo, daytime: Daytime) -> Result<DailyFeatureRow> {
    let day = ctx.by_date.get(&date).map(Vec::as_slice).unwrap_or(&[]);
    let iso = date.iso_week();
    let week: Vec<SemanticVisit> = ctx
        .by_date
        .range(date - chrono::Duration::days(6)..=date + chrono::Duration::days(6))
        .filter(|(d, _)| d.iso_week() == iso)
        .flat_map(|(_, v)| v.iter().cloned())
        .collect();
    let mut row = DailyFeatureRow::new(user, date);
    row.extend(location_function_features(day, date, term.utc_offset_s, daytime));
    row.extend(address_features(day, &week));
    row.extend(time_features(date, term.term_start, term.origin_week)?);
    row.extend(academic_features(date, &ctx.academic, term.utc_offset_s));
    row.semantic_complete = !day.is_empty();
    let fixes = ctx.fixes_by_date.get(&date).map(Vec::as_slice).unwrap_or(&[]);
    match raw_gps_features(fixes) {
        Some(raw) => {
            row.extend(raw);
            row.raw_complete = true;
        }
        None => {
            row.extend(crate::features::names::RAW_GPS.iter().map(|n| (*n, 0.0)));
        }
    }
    Ok(row)
}

/// Joins daily features with daily labels. Keeps user-days that have at least
/// one EMA response and at least one fix.
pub fn build_dataset(bundle: &RawBundle, index: &MapIndex, map: &CategoryMap, cfg: &DatasetConfig) -> Result<LabeledDataset> {
    let term = bundle.term()?;
    if bundle.ema.is_empty() {
        log::warn!("bundle has no EMA responses; dataset is empty");
        return Ok(LabeledDataset::default());
    }
    let mut codes: BTreeMap<(String, NaiveDate), Vec<i64>> = BTreeMap::new();
    for e in &bundle.ema {
        codes.entry((e.user_id.clone(), local_date(e.timestamp, term.utc_offset_s))).or_default().push(e.raw_code);
    }
    let labelled_users: BTreeSet<&String> = codes.keys().map(|(u, _)| u).collect();
    let contexts: BTreeMap<&String, UserContext> = labelled_users
        .into_par_iter()
        .map(|u| Ok((u, user_context(bundle, u, index, map, cfg, term)?)))
        .collect::<Result<_>>()?;

    let rows: Vec<Option<LabeledRow>> = codes
        .par_iter()
        .map(|((user, date), raw)| {
            let ctx = &contexts[user];
            if !ctx.fixes_by_date.contains_key(date) {
                return Ok(None);
            }
            let Some(label) = daily_label(user, *date, raw)? else {
                return Ok(None);
            };
            Ok(Some(LabeledRow { features: feature_row(user, *date, ctx, term, cfg.daytime)?, label }))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<LabeledRow> = rows.into_iter().flatten().collect();
    log::info!("built {} labelled user-days from {} labelled candidates", rows.len(), codes.len());
    Ok(LabeledDataset { rows })
}
