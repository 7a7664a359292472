//! EMA stress responses to ordered levels and binary daily labels.
//!
//! Raw StudentLife codes run 1 = "a little stressed", 2 = "definitely
//! stressed", 3 = "stressed out", 4 = "feeling good", 5 = "feeling great".
//! The ordered scale puts them on a monotone axis from 1 (great) to 5
//! (stressed out).

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered levels at or above this value are labelled stressed.
pub const STRESS_THRESHOLD: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmaResponse {
    pub user_id: String,
    pub timestamp: i64,
    pub raw_code: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyLabel {
    pub user_id: String,
    pub date: NaiveDate,
    /// Median ordered level; fractional when an even number of responses straddle.
    pub ordered_level: f64,
    pub binary: u8,
}

pub fn transform_level(raw_code: i64) -> Result<u8> {
    match raw_code {
        1 => Ok(3),
        2 => Ok(4),
        3 => Ok(5),
        4 => Ok(2),
        5 => Ok(1),
        other => Err(Error::InvalidEmaCode(other)),
    }
}

/// Inverse of [`transform_level`].
pub fn raw_code_for_level(level: u8) -> Result<i64> {
    match level {
        3 => Ok(1),
        4 => Ok(2),
        5 => Ok(3),
        2 => Ok(4),
        1 => Ok(5),
        other => Err(Error::InvalidEmaCode(other as i64)),
    }
}

pub fn binarize(ordered_level: f64) -> u8 {
    u8::from(ordered_level >= STRESS_THRESHOLD)
}

/// Median-then-binarize over one user-day. `None` when there are no responses.
pub fn daily_label(user_id: &str, date: NaiveDate, raw_codes: &[i64]) -> Result<Option<DailyLabel>> {
    if raw_codes.is_empty() {
        return Ok(None);
    }
    let mut levels = raw_codes
        .iter()
        .map(|&c| transform_level(c))
        .collect::<Result<Vec<_>>>()?;
    levels.sort_unstable();
    let n = levels.len();
    let median = if n % 2 == 1 {
        levels[n / 2] as f64
    } else {
        (levels[n / 2 - 1] as f64 + levels[n / 2] as f64) / 2.0
    };
    Ok(Some(DailyLabel {
        user_id: user_id.to_string(),
        date,
        ordered_level: median,
        binary: binarize(median),
    }))
}
