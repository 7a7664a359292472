use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use super::location::local_midnight;
use super::names::{ACADEMIC, SKIP_LAGS};
use crate::semantic::{Category, SemanticVisit};

/// Attendance below this rate marks a potential skipped class day.
pub const SKIP_THRESHOLD: f64 = 0.7;

/// One weekly class meeting in local time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMeeting {
    pub class_id: String,
    /// ISO weekday, 1 = Monday.
    pub weekday: u32,
    /// Seconds after local midnight.
    pub start_s: i64,
    pub end_s: i64,
    pub location_hint: String,
}

/// Per-user academic calendar inputs.
#[derive(Debug, Clone, Default)]
pub struct AcademicContext {
    pub meetings: Vec<ClassMeeting>,
    /// Deadlines due per date.
    pub deadlines: BTreeMap<NaiveDate, u32>,
    /// Attendance on days that had scheduled classes and observed GPS.
    pub attendance: BTreeMap<NaiveDate, f64>,
}

/// Scheduled class intervals for `date` as sorted, non-overlapping UTC ranges.
pub fn scheduled_intervals(meetings: &[ClassMeeting], date: NaiveDate, utc_offset_s: i64) -> Vec<(i64, i64)> {
    let midnight = local_midnight(date, utc_offset_s);
    let wd = date.weekday().number_from_monday();
    let mut iv: Vec<(i64, i64)> = meetings
        .iter()
        .filter(|m| m.weekday == wd && m.end_s > m.start_s)
        .map(|m| (midnight + m.start_s, midnight + m.end_s))
        .collect();
    union(&mut iv)
}

fn union(iv: &mut Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    iv.sort_unstable();
    let mut out: Vec<(i64, i64)> = Vec::with_capacity(iv.len());
    for &(a, b) in iv.iter() {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Share of scheduled class time covered by school-category dwell.
/// `None` when nothing is scheduled.
pub fn attendance_rate(visits: &[SemanticVisit], scheduled: &[(i64, i64)]) -> Option<f64> {
    let total: i64 = scheduled.iter().map(|(a, b)| b - a).sum();
    if total == 0 {
        return None;
    }
    let mut school: Vec<(i64, i64)> = visits
        .iter()
        .filter(|v| v.category == Category::School)
        .map(|v| (v.start, v.end))
        .collect();
    let school = union(&mut school);
    let mut covered = 0;
    for &(a, b) in scheduled {
        for &(c, d) in &school {
            covered += (b.min(d) - a.max(c)).max(0);
        }
    }
    Some(covered as f64 / total as f64)
}

/// The 11 academic values for one user-day, in [`ACADEMIC`] order.
pub fn academic_features(date: NaiveDate, ctx: &AcademicContext, utc_offset_s: i64) -> Vec<(&'static str, f64)> {
    let scheduled = scheduled_intervals(&ctx.meetings, date, utc_offset_s);
    let class_seconds: i64 = scheduled.iter().map(|(a, b)| b - a).sum();
    let attendance = if class_seconds == 0 { 1.0 } else { ctx.attendance.get(&date).copied().unwrap_or(0.0) };

    let mut out = Vec::with_capacity(11);
    out.push((ACADEMIC[0], class_seconds as f64));
    out.push((ACADEMIC[1], attendance));
    for (i, lag) in SKIP_LAGS.iter().enumerate() {
        let d = date - Duration::days(*lag);
        let skipped = ctx.attendance.get(&d).is_some_and(|&a| a < SKIP_THRESHOLD);
        out.push((ACADEMIC[2 + i], f64::from(u8::from(skipped))));
    }
    let due = |k: i64| f64::from(ctx.deadlines.get(&(date + Duration::days(k))).copied().unwrap_or(0));
    out.push((ACADEMIC[7], due(0)));
    out.push((ACADEMIC[8], due(1)));
    out.push((ACADEMIC[9], due(2)));
    out.push((ACADEMIC[10], due(3)));
    out
}
