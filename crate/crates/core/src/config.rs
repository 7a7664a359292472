//! Run configuration.
//!
//! One TOML file records every choice a run depends on. All tables and keys
//! are optional; an omitted key takes the default shown below.
//!
//! ```toml
//! seed = 1
//!
//! [input]
//! # bundle = "cohort/"        # CSV bundle; default: the synthetic cohort in the output dir
//! # studentlife = "dataset/"  # StudentLife checkout, read through the adapter
//! # osm = "map.osm"           # default: the map written by `synth`
//! category_map = "human"      # "human", "llm" or a `location_type,category` CSV
//!
//! [synth]                     # synthetic cohort
//! n_users = 30
//! n_weeks = 9
//! stressed_share = 0.5
//! response_rate = 0.75
//!
//! [extract]
//! radius_m = 75.0
//! gap_cap_min = 40
//! interval_min = 20
//! daytime = ["06:00", "18:00"]
//! cell_deg = 0.01
//!
//! [eval]
//! sets = ["AF", "PA"]
//! models = ["rf", "xgb"]
//! regimes = ["split", "kfold", "loso"]
//! folds = 10
//! min_days = 10
//! # balance = "smoteenn"      # overrides each regime's own balancing
//!
//! [attack]
//! sets = ["RAW", "AF", "PA"]
//! scenarios = ["rich", "moderate", "limited"]
//! mi_bins = 10
//!
//! [analyze]
//! set = "AF"
//!
//! [forest]                    # random forest
//! n_estimators = 70
//!
//! [boost]                     # gradient boosting, also the re-identification attacker
//! n_stages = 100
//! ```
//!
//! The StudentLife adapter takes its term calendar from `[input.term]`
//! (`term_start`, `origin_week`, `utc_offset_s`), defaulting to the
//! synthetic cohort's calendar.

use std::path::{Path, PathBuf};

use chrono::NaiveTime;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{CohortSpec, DatasetConfig, TermInfo};
use crate::error::{Error, Result};
use crate::evaluation::{EvalOptions, Regime};
use crate::features::{Daytime, FeatureSet, DAY_S};
use crate::learners::{BoostParams, ForestParams, ModelSpec};
use crate::privacy::{AttackScenario, DEFAULT_MI_BINS};
use crate::resampling::Balance;
use crate::geo::DEFAULT_RADIUS_M;
use crate::semantic::{CategoryMap, VisitConfig};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub input: InputConfig,
    pub synth: CohortSpec,
    pub extract: ExtractConfig,
    pub eval: EvalConfig,
    pub attack: AttackConfig,
    pub analyze: AnalyzeConfig,
    pub forest: ForestParams,
    pub boost: BoostParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub bundle: Option<PathBuf>,
    pub studentlife: Option<PathBuf>,
    pub osm: Option<PathBuf>,
    pub category_map: String,
    pub term: Option<TermInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractConfig {
    pub radius_m: f64,
    pub gap_cap_min: i64,
    pub interval_min: i64,
    /// Local `HH:MM` bounds of daytime; `24:00` is accepted as the end.
    pub daytime: [String; 2],
    pub cell_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub sets: Vec<FeatureSet>,
    pub models: Vec<String>,
    pub regimes: Vec<Regime>,
    pub folds: usize,
    pub min_days: usize,
    pub balance: Option<Balance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub sets: Vec<FeatureSet>,
    pub scenarios: Vec<AttackScenario>,
    pub mi_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeConfig {
    pub set: FeatureSet,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            input: InputConfig::default(),
            synth: CohortSpec::default(),
            extract: ExtractConfig::default(),
            eval: EvalConfig::default(),
            attack: AttackConfig::default(),
            analyze: AnalyzeConfig::default(),
            forest: ForestParams::default(),
            boost: BoostParams::default(),
        }
    }
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig { bundle: None, studentlife: None, osm: None, category_map: "human".into(), term: None }
    }
}

impl Default for ExtractConfig {
    fn default() -> Self {
        let v = VisitConfig::default();
        ExtractConfig {
            radius_m: DEFAULT_RADIUS_M,
            gap_cap_min: v.gap_cap_s / 60,
            interval_min: v.nominal_interval_s / 60,
            daytime: ["06:00".into(), "18:00".into()],
            cell_deg: 0.01,
        }
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        let o = EvalOptions::default();
        EvalConfig {
            sets: vec![FeatureSet::AF, FeatureSet::PA],
            models: vec!["rf".into(), "xgb".into()],
            regimes: Regime::ALL.to_vec(),
            folds: o.folds,
            min_days: o.min_days,
            balance: o.balance,
        }
    }
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            sets: vec![FeatureSet::RAW, FeatureSet::AF, FeatureSet::PA],
            scenarios: AttackScenario::ALL.to_vec(),
            mi_bins: DEFAULT_MI_BINS,
        }
    }
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig { set: FeatureSet::AF }
    }
}

fn clock(s: &str) -> Result<i64> {
    if s.trim() == "24:00" {
        return Ok(DAY_S);
    }
    let t = NaiveTime::parse_from_str(s.trim(), "%H:%M")
        .map_err(|_| Error::Config(format!("daytime bound {s:?} is not HH:MM")))?;
    Ok(i64::from(chrono::Timelike::num_seconds_from_midnight(&t)))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical TOML form, hex encoded.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Checks values and that every referenced input file exists.
    pub fn validate(&self) -> Result<()> {
        for path in [&self.input.bundle, &self.input.studentlife, &self.input.osm].into_iter().flatten() {
            if !path.exists() {
                return Err(Error::MissingFile(path.clone()));
            }
        }
        if self.input.bundle.is_some() && self.input.studentlife.is_some() {
            return Err(Error::Config("set at most one of input.bundle and input.studentlife".into()));
        }
        self.category_map()?;
        self.dataset_config()?;
        if !(self.extract.cell_deg > 0.0) {
            return Err(Error::InvalidCellSize(self.extract.cell_deg));
        }
        self.models()?;
        if self.eval.folds < 2 {
            return Err(Error::Config(format!("eval.folds must be at least 2, got {}", self.eval.folds)));
        }
        if self.attack.mi_bins < 2 {
            return Err(Error::Config(format!("attack.mi_bins must be at least 2, got {}", self.attack.mi_bins)));
        }
        Ok(())
    }

    pub fn category_map(&self) -> Result<CategoryMap> {
        match self.input.category_map.as_str() {
            "human" => Ok(CategoryMap::human()),
            "llm" => Ok(CategoryMap::llm()),
            path => CategoryMap::load(Path::new(path)),
        }
    }

    pub fn dataset_config(&self) -> Result<DatasetConfig> {
        let e = &self.extract;
        if !(e.radius_m > 0.0) || e.gap_cap_min <= 0 || e.interval_min <= 0 {
            return Err(Error::Config("radius, gap cap and interval must be positive".into()));
        }
        Ok(DatasetConfig {
            visits: VisitConfig { radius_m: e.radius_m, gap_cap_s: e.gap_cap_min * 60, nominal_interval_s: e.interval_min * 60 },
            daytime: Daytime::new(clock(&e.daytime[0])?, clock(&e.daytime[1])?)?,
        })
    }

    pub fn models(&self) -> Result<Vec<ModelSpec>> {
        self.eval.models.iter().map(|m| self.model(m)).collect()
    }

    /// Named model carrying this config's hyperparameters.
    pub fn model(&self, name: &str) -> Result<ModelSpec> {
        Ok(match name.parse::<ModelSpec>()? {
            ModelSpec::RandomForest(_) => ModelSpec::RandomForest(self.forest),
            ModelSpec::Boosted(_) => ModelSpec::Boosted(self.boost),
        })
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions { folds: self.eval.folds, min_days: self.eval.min_days, balance: self.eval.balance }
    }

    pub fn term(&self) -> TermInfo {
        self.input.term.unwrap_or(TermInfo {
            term_start: self.synth.term_start,
            origin_week: self.synth.origin_week,
            utc_offset_s: self.synth.utc_offset_s,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
        assert_eq!(c.dataset_config().unwrap(), DatasetConfig::default());
    }

    #[test]
    fn round_trip_and_hash() {
        let mut c = RunConfig::default();
        c.seed = 9;
        c.eval.sets = vec![FeatureSet::PA];
        c.eval.balance = Some(Balance::None);
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash().unwrap(), c.hash().unwrap());
        assert_eq!(c.hash().unwrap().len(), 64);
        assert_ne!(c.hash().unwrap(), RunConfig::default().hash().unwrap());
    }

    #[test]
    fn partial_tables() {
        let c = RunConfig::from_toml(
            "seed = 3\n[synth]\nn_users = 12\n[extract]\ndaytime = [\"08:00\", \"24:00\"]\n[boost]\nn_stages = 10\n[attack]\nscenarios = [\"limited\"]\n",
        )
        .unwrap();
        assert_eq!(c.synth.n_users, 12);
        assert_eq!(c.synth.n_weeks, 9);
        assert_eq!(c.boost.n_stages, 10);
        assert_eq!(c.boost.eta, BoostParams::default().eta);
        assert_eq!(c.attack.scenarios, vec![AttackScenario::Limited]);
        assert_eq!(c.dataset_config().unwrap().daytime, Daytime { start_s: 8 * 3600, end_s: DAY_S });
        assert_eq!(c.model("xgb").unwrap(), ModelSpec::Boosted(c.boost));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml("sede = 3").is_err());
        assert!(RunConfig::from_toml("[eval]\nsets = [\"XX\"]").is_err());
        let bad = |t: &str| RunConfig::from_toml(t).unwrap().validate().is_err();
        assert!(bad("[input]\nbundle = \"/definitely/not/here\""));
        assert!(bad("[input]\ncategory_map = \"/no/such/map.csv\""));
        assert!(bad("[eval]\nmodels = [\"svm\"]"));
        assert!(bad("[extract]\ndaytime = [\"18:00\", \"06:00\"]"));
        assert!(bad("[extract]\ndaytime = [\"6am\", \"18:00\"]"));
        assert!(bad("[eval]\nfolds = 1"));
    }
}
