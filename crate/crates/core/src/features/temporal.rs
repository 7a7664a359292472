use chrono::{Datelike, NaiveDate};

use super::names::TIME;
use crate::error::{Error, Result};

/// ISO weekday (1 = Monday) and term week index counted from `origin_week`.
pub fn time_features(date: NaiveDate, term_start: NaiveDate, origin_week: i64) -> Result<Vec<(&'static str, f64)>> {
    let days = (date - term_start).num_days();
    if days < 0 {
        return Err(Error::BeforeTermStart { date: date.to_string(), term_start: term_start.to_string() });
    }
    let week = days.div_euclid(7) + origin_week;
    Ok(vec![
        (TIME[0], f64::from(date.weekday().number_from_monday())),
        (TIME[1], week as f64),
    ])
}
