//! Daily feature rows: 38 location-function, 3 address, 11 academic and 2
//! time features, plus the 10-value raw-GPS baseline.

mod academic;
mod address;
mod location;
pub mod names;
mod raw;
mod temporal;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

pub use academic::{
    academic_features, attendance_rate, scheduled_intervals, AcademicContext, ClassMeeting, SKIP_THRESHOLD,
};
pub use address::address_features;
pub use location::{
    local_date, local_midnight, location_function_features, split_day_night, Daytime, DAYTIME_END_S,
    DAYTIME_START_S, DAY_S,
};
pub use names::{all_feature_names, FeatureSet};
pub use raw::{quantile_sorted, raw_gps_features};
pub use temporal::time_features;

use crate::error::{Error, Result};

/// One user-day of named feature values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyFeatureRow {
    pub user_id: String,
    pub date: NaiveDate,
    pub values: BTreeMap<String, f64>,
    /// At least one visit went into the semantic features.
    pub semantic_complete: bool,
    /// At least one fix went into the raw-GPS features.
    pub raw_complete: bool,
}

impl DailyFeatureRow {
    pub fn new(user_id: impl Into<String>, date: NaiveDate) -> Self {
        DailyFeatureRow {
            user_id: user_id.into(),
            date,
            values: BTreeMap::new(),
            semantic_complete: false,
            raw_complete: false,
        }
    }

    pub fn extend<'a>(&mut self, values: impl IntoIterator<Item = (&'a str, f64)>) {
        for (k, v) in values {
            self.values.insert(k.to_string(), v);
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }
}

/// Values of `set` in its canonical order.
pub fn select_features(row: &DailyFeatureRow, set: FeatureSet) -> Result<Vec<f64>> {
    set.names()
        .into_iter()
        .map(|n| row.get(n).ok_or_else(|| Error::MissingFeature(n.to_string())))
        .collect()
}
