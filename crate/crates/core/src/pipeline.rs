//! Artifact layout and the stages behind each CLI command.
//!
//! Every stage reads and writes under one output directory:
//!
//! | path | written by |
//! |---|---|
//! | `cohort/*.csv`, `cohort/map.osm` | `synth` |
//! | `index.bin` | `ingest-osm` |
//! | `dataset.csv`, `dataset.jsonl` | `extract` |
//! | `models/<set>_<model>.json` | `train` |
//! | `eval/<regime>_<set>_<model>.json` | `eval` |
//! | `attack/<set>_<scenario>.json`, `attack/<set>_<scenario>_topk.csv`, `attack/mi_<set>.json` | `attack` |
//! | `analysis/screen_<set>.json` | `analyze` |
//! | `reports/*.csv` | `report` |
//! | `configs/<hash>.toml`, `manifest.json` | every stage |
//!
//! The manifest maps each artifact to the command that wrote it, its
//! SHA-256 and the hash of the effective configuration. Outputs carry no
//! timestamps or absolute paths, so identical configs give identical bytes.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{screen_features, FeatureStat};
use crate::config::RunConfig;
use crate::dataset::{
    build_dataset, generate_cohort, load_bundle, load_studentlife, read_dataset_csv, write_bundle, write_dataset_csv,
    write_dataset_jsonl, LabeledDataset, RawBundle, BUNDLE_FILES,
};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_with, EvalReport, Regime};
use crate::features::FeatureSet;
use crate::geo::{parse_osm, MapIndex};
use crate::learners::{Model, ModelSpec};
use crate::privacy::{mi_ranking, reid_attack, AttackReport, FeatureLeakage};
use crate::resampling::{balance, Balance, TrainMatrix};

/// Paths of every artifact under one output directory.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn cohort_dir(&self) -> PathBuf {
        self.root.join("cohort")
    }

    pub fn cohort_osm(&self) -> PathBuf {
        self.cohort_dir().join("map.osm")
    }

    pub fn index(&self) -> PathBuf {
        self.root.join("index.bin")
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset.csv")
    }

    pub fn model(&self, set: FeatureSet, model: &ModelSpec) -> PathBuf {
        let m = model.short_name().to_ascii_lowercase();
        self.root.join("models").join(format!("{set}_{m}.json"))
    }

    pub fn eval(&self, regime: Regime, set: FeatureSet, model: &ModelSpec) -> PathBuf {
        let m = model.short_name().to_ascii_lowercase();
        self.root.join("eval").join(format!("{regime}_{set}_{m}.json"))
    }

    pub fn attack(&self, set: FeatureSet, scenario: crate::privacy::AttackScenario) -> PathBuf {
        self.root.join("attack").join(format!("{set}_{scenario}.json"))
    }

    pub fn mi(&self, set: FeatureSet) -> PathBuf {
        self.root.join("attack").join(format!("mi_{set}.json"))
    }

    pub fn screen(&self, set: FeatureSet) -> PathBuf {
        self.root.join("analysis").join(format!("screen_{set}.json"))
    }

    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    fn relative(&self, path: &Path) -> String {
        let rel = path.strip_prefix(&self.root).unwrap_or(path);
        rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub command: String,
    pub sha256: String,
    pub bytes: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifacts: BTreeMap<String, ArtifactEntry>,
}

impl Manifest {
    pub fn load(ws: &Workspace) -> Result<Self> {
        let path = ws.manifest();
        if !path.exists() {
            return Ok(Manifest::default());
        }
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Records `paths` as written by `command` under `cfg`, then saves.
    fn record(ws: &Workspace, command: &str, cfg: &RunConfig, mut paths: Vec<PathBuf>) -> Result<()> {
        let hash = cfg.hash()?;
        let cfg_path = ws.root.join("configs").join(format!("{hash}.toml"));
        write_text(&cfg_path, &cfg.to_toml()?)?;
        paths.push(cfg_path);
        let mut m = Manifest::load(ws)?;
        for p in paths {
            let bytes = fs::read(&p)?;
            m.artifacts.insert(
                ws.relative(&p),
                ArtifactEntry {
                    command: command.to_string(),
                    sha256: sha256_hex(&bytes),
                    bytes: bytes.len() as u64,
                    config_hash: hash.clone(),
                },
            );
        }
        write_json(&ws.manifest(), &m)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn read_json<T: DeserializeOwned>(path: &Path, producer: &'static str) -> Result<T> {
    require(path, producer)?;
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

fn require(path: &Path, producer: &'static str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact { path: path.to_path_buf(), producer })
    }
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    ensure_parent(path)?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the synthetic cohort bundle and its OSM extract.
pub fn synth(cfg: &RunConfig, ws: &Workspace) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let cohort = generate_cohort(&cfg.synth, cfg.seed)?;
    let dir = ws.cohort_dir();
    write_bundle(&cohort.bundle, &dir)?;
    write_text(&ws.cohort_osm(), &cohort.osm_xml)?;
    let mut paths: Vec<PathBuf> = BUNDLE_FILES.iter().map(|f| dir.join(f)).collect();
    paths.push(ws.cohort_osm());
    log::info!("synthetic cohort: {} users, {} fixes", cohort.bundle.users.len(), cohort.bundle.n_fixes());
    Manifest::record(ws, "synth", cfg, paths.clone())?;
    Ok(paths)
}

fn osm_source(cfg: &RunConfig, ws: &Workspace) -> Result<PathBuf> {
    match &cfg.input.osm {
        Some(p) => Ok(p.clone()),
        None if cfg.input.bundle.is_some() || cfg.input.studentlife.is_some() => {
            Err(Error::Config("an external bundle needs input.osm to name its map extract".into()))
        }
        None => {
            let p = ws.cohort_osm();
            require(&p, "synth")?;
            Ok(p)
        }
    }
}

/// Parses the OSM extract and writes the spatial index.
pub fn ingest_osm(cfg: &RunConfig, ws: &Workspace) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let src = osm_source(cfg, ws)?;
    let parsed = parse_osm(&fs::read_to_string(&src)?)?;
    if parsed.skipped_ways > 0 {
        log::warn!("{} ways referenced unseen nodes and were skipped", parsed.skipped_ways);
    }
    let index = MapIndex::build(parsed.features, cfg.extract.cell_deg)?;
    log::info!("indexed {} map features", index.len());
    let out = ws.index();
    ensure_parent(&out)?;
    let mut w = BufWriter::new(File::create(&out)?);
    index.write_to(&mut w)?;
    w.flush()?;
    Manifest::record(ws, "ingest-osm", cfg, vec![out.clone()])?;
    Ok(vec![out])
}

fn load_input(cfg: &RunConfig, ws: &Workspace) -> Result<RawBundle> {
    if let Some(dir) = &cfg.input.bundle {
        return load_bundle(dir);
    }
    if let Some(root) = &cfg.input.studentlife {
        return load_studentlife(root, cfg.term());
    }
    let dir = ws.cohort_dir();
    for f in BUNDLE_FILES {
        require(&dir.join(f), "synth")?;
    }
    load_bundle(&dir)
}

/// Builds the labelled daily feature table.
pub fn extract(cfg: &RunConfig, ws: &Workspace) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let bundle = load_input(cfg, ws)?;
    require(&ws.index(), "ingest-osm")?;
    let index = MapIndex::read_from(std::io::BufReader::new(File::open(ws.index())?))?;
    let ds = build_dataset(&bundle, &index, &cfg.category_map()?, &cfg.dataset_config()?)?;
    let counts = ds.class_counts();
    log::info!("{} labelled days ({} calm, {} stressed)", ds.len(), counts[0], counts[1]);
    let csv = ws.dataset();
    let jsonl = ws.root.join("dataset.jsonl");
    write_dataset_csv(&ds, &csv)?;
    write_dataset_jsonl(&ds, &jsonl)?;
    let paths = vec![csv, jsonl];
    Manifest::record(ws, "extract", cfg, paths.clone())?;
    Ok(paths)
}

pub fn load_dataset(ws: &Workspace) -> Result<LabeledDataset> {
    require(&ws.dataset(), "extract")?;
    read_dataset_csv(&ws.dataset())
}

/// A classifier fitted on every labelled day, with what it expects as input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub feature_set: FeatureSet,
    pub feature_names: Vec<String>,
    pub balance: Balance,
    pub n_rows: usize,
    pub n_fit: usize,
    pub seed: u64,
    pub model: Model,
}

/// Fits each configured model on the full dataset.
pub fn train(cfg: &RunConfig, ws: &Workspace) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let ds = load_dataset(ws)?;
    let how = cfg.eval.balance.unwrap_or(Regime::Split.balancing());
    let mut paths = Vec::new();
    for &set in &cfg.eval.sets {
        let d = ds.design(set)?;
        let tm = TrainMatrix::new(d.x.clone(), d.y.clone(), &d.row_ids)?;
        let fit = balance(&tm, how, cfg.seed)?;
        for name in &cfg.eval.models {
            let spec = cfg.model(name)?;
            let trained = TrainedModel {
                feature_set: set,
                feature_names: d.feature_names.iter().map(|s| s.to_string()).collect(),
                balance: how,
                n_rows: d.y.len(),
                n_fit: fit.len(),
                seed: cfg.seed,
                model: spec.fit(&fit.x, &fit.y, 2, cfg.seed)?,
            };
            let out = ws.model(set, &spec);
            write_json(&out, &trained)?;
            paths.push(out);
        }
    }
    Manifest::record(ws, "train", cfg, paths.clone())?;
    Ok(paths)
}

/// Runs every configured (regime, set, model) evaluation.
pub fn eval(cfg: &RunConfig, ws: &Workspace) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let ds = load_dataset(ws)?;
    let opts = cfg.eval_options();
    let mut paths = Vec::new();
    for &regime in &cfg.eval.regimes {
        for &set in &cfg.eval.sets {
            for name in &cfg.eval.models {
                let spec = cfg.model(name)?;
                let r = evaluate_with(&ds, regime, set, &spec, &opts, cfg.seed)?;
                log::info!("{regime} {set} {spec}: acc {:.1} f1 {:.1}", r.accuracy_mean, r.f1_mean);
                let out = ws.eval(regime, set, &spec);
                write_json(&out, &r)?;
                paths.push(out);
            }
        }
    }
    Manifest::record(ws, "eval", cfg, paths.clone())?;
    Ok(paths)
}

/// Re-identification attacks plus the per-feature identity leakage.
pub fn attack(cfg: &RunConfig, ws: &Workspace) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let ds = load_dataset(ws)?;
    let mut paths = Vec::new();
    for &set in &cfg.attack.sets {
        for &scenario in &cfg.attack.scenarios {
            let r = reid_attack(&ds, set, scenario, &cfg.boost, cfg.seed)?;
            log::info!("attack {set} {scenario}: top-1 {:.1} top-5 {:.1}", r.top1, r.top5);
            let out = ws.attack(set, scenario);
            write_json(&out, &r)?;
            let curve = out.with_file_name(format!("{set}_{scenario}_topk.csv"));
            write_csv(
                &curve,
                &["k", "accuracy"],
                r.curve.iter().enumerate().map(|(k, a)| vec![(k + 1).to_string(), format!("{a:.6}")]),
            )?;
            paths.extend([out, curve]);
        }
        let mi = ws.mi(set);
        write_json(&mi, &mi_ranking(&ds, set, cfg.attack.mi_bins)?)?;
        paths.push(mi);
    }
    Manifest::record(ws, "attack", cfg, paths.clone())?;
    Ok(paths)
}

/// Univariate screening of the configured feature set.
pub fn analyze(cfg: &RunConfig, ws: &Workspace) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let ds = load_dataset(ws)?;
    let out = ws.screen(cfg.analyze.set);
    write_json(&out, &screen_features(&ds, cfg.analyze.set)?)?;
    Manifest::record(ws, "analyze", cfg, vec![out.clone()])?;
    Ok(vec![out])
}

/// JSON files in `dir`, sorted by name; empty when the directory is absent.
fn json_files(dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut out: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".json") && name.starts_with(prefix)
        })
        .collect();
    out.sort();
    Ok(out)
}

fn pct(v: f64) -> String {
    format!("{v:.2}")
}

/// Aggregates stage outputs into table-shaped CSVs under `reports/`.
pub fn report(cfg: &RunConfig, ws: &Workspace) -> Result<Vec<PathBuf>> {
    let evals: Vec<EvalReport> = json_files(&ws.root.join("eval"), "")?
        .iter()
        .map(|p| read_json(p, "eval"))
        .collect::<Result<_>>()?;
    let attacks: Vec<AttackReport> = json_files(&ws.root.join("attack"), "")?
        .into_iter()
        .filter(|p| !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("mi_")))
        .map(|p| read_json(&p, "attack"))
        .collect::<Result<_>>()?;
    if evals.is_empty() && attacks.is_empty() {
        return Err(Error::MissingArtifact { path: ws.root.join("eval"), producer: "eval" });
    }
    let dir = ws.reports();
    let mut paths = Vec::new();

    let mut evals = evals;
    evals.sort_by(|a, b| (a.regime, a.feature_set, &a.model).cmp(&(b.regime, b.feature_set, &b.model)));
    let header = EvalReport::CSV_HEADER;
    let utility = dir.join("utility.csv");
    write_csv(&utility, &header, evals.iter().filter(|r| r.regime != Regime::Loso).map(EvalReport::csv_record))?;
    let loso = dir.join("loso.csv");
    write_csv(&loso, &header, evals.iter().filter(|r| r.regime == Regime::Loso).map(EvalReport::csv_record))?;
    let folds = dir.join("loso_subjects.csv");
    write_csv(
        &folds,
        &["feature_set", "model", "subject", "n_test", "accuracy", "f1"],
        evals.iter().filter(|r| r.regime == Regime::Loso).flat_map(|r| {
            r.folds.iter().map(move |f| {
                vec![
                    r.feature_set.to_string(),
                    r.model.clone(),
                    f.fold.clone(),
                    f.n_test.to_string(),
                    pct(100.0 * f.accuracy),
                    pct(100.0 * f.f1),
                ]
            })
        }),
    )?;
    paths.extend([utility, loso, folds]);

    let mut attacks = attacks;
    attacks.sort_by_key(|r| (r.feature_set, r.scenario));
    let reid = dir.join("reid.csv");
    write_csv(
        &reid,
        &["feature_set", "scenario", "top1", "top5", "n_users", "n_train", "n_test", "seed"],
        attacks.iter().map(|r| {
            vec![
                r.feature_set.to_string(),
                r.scenario.to_string(),
                pct(r.top1),
                pct(r.top5),
                r.n_users.to_string(),
                r.n_train.to_string(),
                r.n_test.to_string(),
                r.seed.to_string(),
            ]
        }),
    )?;
    let curves = dir.join("topk_curves.csv");
    write_csv(
        &curves,
        &["feature_set", "scenario", "k", "accuracy"],
        attacks.iter().flat_map(|r| {
            r.curve.iter().enumerate().map(move |(k, a)| {
                vec![r.feature_set.to_string(), r.scenario.to_string(), (k + 1).to_string(), format!("{a:.6}")]
            })
        }),
    )?;
    paths.extend([reid, curves]);

    let af: Vec<&str> = FeatureSet::AF.names();
    let pa: Vec<&str> = FeatureSet::PA.names();
    let mark = |set: &[&str], f: &str| if set.contains(&f) { "1" } else { "0" }.to_string();
    for set in FeatureSet::ALL {
        let path = ws.mi(set);
        if !path.exists() {
            continue;
        }
        let ranking: Vec<FeatureLeakage> = read_json(&path, "attack")?;
        let out = dir.join(format!("mi_{set}.csv"));
        write_csv(
            &out,
            &["feature", "mutual_information", "AF", "PA"],
            ranking.iter().map(|l| vec![l.feature.clone(), format!("{:.6}", l.mi), mark(&af, &l.feature), mark(&pa, &l.feature)]),
        )?;
        paths.push(out);
    }
    for set in FeatureSet::ALL {
        let screen = ws.screen(set);
        if !screen.exists() {
            continue;
        }
        let stats: Vec<FeatureStat> = read_json(&screen, "analyze")?;
        let out = dir.join(format!("screening_{set}.csv"));
        write_csv(
            &out,
            &["feature", "p_value", "r_value"],
            stats.iter().map(|s| vec![s.feature.clone(), format!("{:.6e}", s.p_value), format!("{:.4}", s.r_value)]),
        )?;
        paths.push(out);
    }
    Manifest::record(ws, "report", cfg, paths.clone())?;
    Ok(paths)
}

/// Every stage in order; the synthetic cohort is generated unless the config
/// names an external bundle.
pub fn run_all(cfg: &RunConfig, ws: &Workspace) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let mut paths = Vec::new();
    if cfg.input.bundle.is_none() && cfg.input.studentlife.is_none() {
        paths.extend(synth(cfg, ws)?);
    }
    paths.extend(ingest_osm(cfg, ws)?);
    paths.extend(extract(cfg, ws)?);
    paths.extend(train(cfg, ws)?);
    paths.extend(eval(cfg, ws)?);
    paths.extend(attack(cfg, ws)?);
    paths.extend(analyze(cfg, ws)?);
    paths.extend(report(cfg, ws)?);
    Ok(paths)
}
