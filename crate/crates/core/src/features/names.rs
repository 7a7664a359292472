use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::semantic::Category;

/// Feature-name prefix for each category, indexed by [`Category::index`].
pub const CATEGORY_PREFIX: [&str; 7] = [
    "home",
    "school",
    "shopping",
    "working",
    "recreational_activities",
    "travel",
    "others",
];

pub fn category_prefix(c: Category) -> &'static str {
    CATEGORY_PREFIX[c.index()]
}

/// Location-function features: five per category, then the off-time and the
/// two day-vs-night differences.
pub const LOCATION_FUNCTION: [&str; 38] = [
    "home_time",
    "home_time_daytime",
    "home_time_nighttime",
    "home_time_daytime_std",
    "home_time_nighttime_std",
    "school_time",
    "school_time_daytime",
    "school_time_nighttime",
    "school_time_daytime_std",
    "school_time_nighttime_std",
    "shopping_time",
    "shopping_time_daytime",
    "shopping_time_nighttime",
    "shopping_time_daytime_std",
    "shopping_time_nighttime_std",
    "working_time",
    "working_time_daytime",
    "working_time_nighttime",
    "working_time_daytime_std",
    "working_time_nighttime_std",
    "recreational_activities_time",
    "recreational_activities_time_daytime",
    "recreational_activities_time_nighttime",
    "recreational_activities_time_daytime_std",
    "recreational_activities_time_nighttime_std",
    "travel_time",
    "travel_time_daytime",
    "travel_time_nighttime",
    "travel_time_daytime_std",
    "travel_time_nighttime_std",
    "others_time",
    "others_time_daytime",
    "others_time_nighttime",
    "others_time_daytime_std",
    "others_time_nighttime_std",
    "School_and_home_off_time",
    "home_time_day_vs_night",
    "school_time_day_vs_night",
];

pub const ADDRESS: [&str; 3] = ["number_of_location_visited", "daily_repetition", "weekly_repetition"];

pub const TIME: [&str; 2] = ["week_date", "week"];

pub const ACADEMIC: [&str; 11] = [
    "class_schedule",
    "attendance_rate",
    "skip_class",
    "1_day_after_skip_class",
    "2_days_after_skip_class",
    "3_days_after_skip_class",
    "7_days_after_skip_class",
    "deadline",
    "1_day_to_DL",
    "2_day_to_DL",
    "3_day_to_DL",
];

/// Lag in days behind each skip indicator, aligned with `ACADEMIC[2..7]`.
pub const SKIP_LAGS: [i64; 5] = [0, 1, 2, 3, 7];

pub const RAW_GPS: [&str; 10] = [
    "lat_mean", "lat_max", "lat_min", "lat_std", "lat_iqr", "lon_mean", "lon_max", "lon_min", "lon_std",
    "lon_iqr",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureSet {
    /// All 54 semantic features.
    AF,
    /// Privacy-aware: AF without address and academic features.
    PA,
    /// Location-function only.
    LF,
    /// Academic only.
    AO,
    LFAO,
    /// Daily lat/lon statistics.
    RAW,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 6] =
        [FeatureSet::AF, FeatureSet::PA, FeatureSet::LF, FeatureSet::AO, FeatureSet::LFAO, FeatureSet::RAW];

    /// Canonical ordered name list.
    pub fn names(self) -> Vec<&'static str> {
        let groups: &[&[&'static str]] = match self {
            FeatureSet::AF => &[&LOCATION_FUNCTION, &ADDRESS, &TIME, &ACADEMIC],
            FeatureSet::PA => &[&LOCATION_FUNCTION, &TIME],
            FeatureSet::LF => &[&LOCATION_FUNCTION],
            FeatureSet::AO => &[&ACADEMIC],
            FeatureSet::LFAO => &[&LOCATION_FUNCTION, &ACADEMIC],
            FeatureSet::RAW => &[&RAW_GPS],
        };
        groups.iter().flat_map(|g| g.iter().copied()).collect()
    }

    pub fn len(self) -> usize {
        self.names().len()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::AF => "AF",
            FeatureSet::PA => "PA",
            FeatureSet::LF => "LF",
            FeatureSet::AO => "AO",
            FeatureSet::LFAO => "LFAO",
            FeatureSet::RAW => "RAW",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        FeatureSet::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownFeatureSet(s.to_string()))
    }
}

/// The 54 semantic names followed by the 10 raw-GPS names.
pub fn all_feature_names() -> Vec<&'static str> {
    let mut v = FeatureSet::AF.names();
    v.extend(RAW_GPS);
    v
}
