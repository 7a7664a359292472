use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::names::{category_prefix, LOCATION_FUNCTION};
use crate::semantic::{Category, SemanticVisit};
use crate::{Error, Result};

pub const DAYTIME_START_S: i64 = 6 * 3600;
pub const DAYTIME_END_S: i64 = 18 * 3600;
pub const DAY_S: i64 = 24 * 3600;

/// Local-time window counted as daytime, in seconds after midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Daytime {
    pub start_s: i64,
    pub end_s: i64,
}

impl Default for Daytime {
    fn default() -> Self {
        Daytime { start_s: DAYTIME_START_S, end_s: DAYTIME_END_S }
    }
}

impl Daytime {
    pub fn new(start_s: i64, end_s: i64) -> Result<Self> {
        if !(0 <= start_s && start_s < end_s && end_s <= DAY_S) {
            return Err(Error::InvalidInput(format!("daytime window {start_s}..{end_s} s is not inside one day")));
        }
        Ok(Daytime { start_s, end_s })
    }
}

/// UTC timestamp of local midnight starting `date`.
pub fn local_midnight(date: NaiveDate, utc_offset_s: i64) -> i64 {
    date.and_hms_opt(0, 0, 0).expect("midnight exists").and_utc().timestamp() - utc_offset_s
}

/// Local calendar date of a UTC timestamp.
pub fn local_date(ts: i64, utc_offset_s: i64) -> NaiveDate {
    let local = ts + utc_offset_s;
    chrono::DateTime::from_timestamp(local.div_euclid(DAY_S) * DAY_S, 0)
        .expect("timestamp in range")
        .date_naive()
}

/// Splits `[start, end)` at every daytime boundary. Each piece is tagged
/// `true` when it lies inside the daytime window of `date`.
pub fn split_day_night(
    start: i64,
    end: i64,
    date: NaiveDate,
    utc_offset_s: i64,
    daytime: Daytime,
) -> Vec<(i64, i64, bool)> {
    let midnight = local_midnight(date, utc_offset_s);
    let (day_lo, day_hi) = (midnight + daytime.start_s, midnight + daytime.end_s);
    let mut cuts = vec![start];
    for b in [day_lo, day_hi] {
        if b > start && b < end {
            cuts.push(b);
        }
    }
    cuts.push(end);
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1], w[0] >= day_lo && w[1] <= day_hi))
        .collect()
}

fn population_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// The 38 location-function values for one user-day, in [`LOCATION_FUNCTION`] order.
///
/// Durations are in seconds. Per category: 24 h total, daytime total,
/// nighttime total, and the std of visit-piece durations in each window.
pub fn location_function_features(
    visits: &[SemanticVisit],
    date: NaiveDate,
    utc_offset_s: i64,
    daytime: Daytime,
) -> Vec<(&'static str, f64)> {
    let mut day_pieces: [Vec<f64>; 7] = Default::default();
    let mut night_pieces: [Vec<f64>; 7] = Default::default();
    for v in visits {
        let c = v.category.index();
        for (a, b, is_day) in split_day_night(v.start, v.end, date, utc_offset_s, daytime) {
            let d = (b - a) as f64;
            if is_day {
                day_pieces[c].push(d);
            } else {
                night_pieces[c].push(d);
            }
        }
    }

    let mut out = Vec::with_capacity(38);
    let mut totals = [0.0; 7];
    let mut day_totals = [0.0; 7];
    let mut night_totals = [0.0; 7];
    for c in Category::ALL {
        let i = c.index();
        day_totals[i] = day_pieces[i].iter().sum();
        night_totals[i] = night_pieces[i].iter().sum();
        totals[i] = day_totals[i] + night_totals[i];
        let p = category_prefix(c);
        debug_assert_eq!(LOCATION_FUNCTION[i * 5], format!("{p}_time"));
        out.push((LOCATION_FUNCTION[i * 5], totals[i]));
        out.push((LOCATION_FUNCTION[i * 5 + 1], day_totals[i]));
        out.push((LOCATION_FUNCTION[i * 5 + 2], night_totals[i]));
        out.push((LOCATION_FUNCTION[i * 5 + 3], population_std(&day_pieces[i])));
        out.push((LOCATION_FUNCTION[i * 5 + 4], population_std(&night_pieces[i])));
    }
    let home = Category::Home.index();
    let school = Category::School.index();
    let off: f64 = totals.iter().enumerate().filter(|(i, _)| *i != home && *i != school).map(|(_, t)| t).sum();
    out.push((LOCATION_FUNCTION[35], off));
    out.push((LOCATION_FUNCTION[36], day_totals[home] - night_totals[home]));
    out.push((LOCATION_FUNCTION[37], day_totals[school] - night_totals[school]));
    out
}
