use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use geopriv::config::RunConfig;
use geopriv::pipeline::{self, Manifest, Workspace};
use geopriv::Error;

fn small() -> RunConfig {
    RunConfig::from_toml(
        r#"
seed = 5
[synth]
n_users = 8
n_weeks = 3
[eval]
folds = 3
min_days = 5
[forest]
n_estimators = 10
[boost]
n_stages = 8
"#,
    )
    .unwrap()
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn full_run_is_byte_identical_and_manifested() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = small();
    pipeline::run_all(&cfg, &Workspace::new(a.path())).unwrap();
    pipeline::run_all(&cfg, &Workspace::new(b.path())).unwrap();
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (k, v) in &ta {
        assert!(v == &tb[k], "{k} differs between runs");
    }
    for expected in ["reports/utility.csv", "reports/loso.csv", "reports/reid.csv", "reports/topk_curves.csv", "reports/mi_AF.csv", "reports/screening_AF.csv", "models/AF_rf.json", "eval/loso_PA_xgb.json", "attack/RAW_limited_topk.csv", "index.bin"] {
        assert!(ta.contains_key(expected), "missing {expected}");
    }

    let m = Manifest::load(&Workspace::new(a.path())).unwrap();
    let hash = cfg.hash().unwrap();
    for (path, bytes) in &ta {
        if path == "manifest.json" {
            continue;
        }
        let e = m.artifacts.get(path).unwrap_or_else(|| panic!("{path} not in manifest"));
        assert_eq!(e.config_hash, hash);
        assert_eq!(e.sha256, pipeline::sha256_hex(bytes));
    }
    assert_eq!(m.artifacts["reports/reid.csv"].command, "report");
    assert!(ta.contains_key(&format!("configs/{hash}.toml")));

    let reid = String::from_utf8(ta["reports/reid.csv"].clone()).unwrap();
    assert_eq!(reid.lines().count(), 1 + 9);
    assert!(reid.starts_with("feature_set,scenario,top1,top5"));
    let mi = String::from_utf8(ta["reports/mi_AF.csv"].clone()).unwrap();
    assert_eq!(mi.lines().count(), 1 + 54);
}

#[test]
fn missing_upstream_names_the_producer() {
    let dir = tempfile::tempdir().unwrap();
    let ws = Workspace::new(dir.path());
    let cfg = small();
    let producer = |r: geopriv::Result<Vec<std::path::PathBuf>>| match r {
        Err(Error::MissingArtifact { producer, .. }) => producer,
        other => panic!("expected a missing artifact, got {other:?}"),
    };
    assert_eq!(producer(pipeline::ingest_osm(&cfg, &ws)), "synth");
    assert_eq!(producer(pipeline::extract(&cfg, &ws)), "synth");
    assert_eq!(producer(pipeline::eval(&cfg, &ws)), "extract");
    assert_eq!(producer(pipeline::attack(&cfg, &ws)), "extract");
    assert_eq!(producer(pipeline::report(&cfg, &ws)), "eval");
    pipeline::synth(&cfg, &ws).unwrap();
    assert_eq!(producer(pipeline::extract(&cfg, &ws)), "ingest-osm");
    let msg = pipeline::extract(&cfg, &ws).unwrap_err().to_string();
    assert!(msg.contains("geopriv ingest-osm"), "{msg}");
}

#[test]
fn stages_match_the_one_shot_run() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut cfg = small();
    cfg.eval.regimes = vec![geopriv::evaluation::Regime::Split];
    cfg.attack.sets = vec![geopriv::features::FeatureSet::PA];
    pipeline::run_all(&cfg, &Workspace::new(a.path())).unwrap();
    let ws = Workspace::new(b.path());
    pipeline::synth(&cfg, &ws).unwrap();
    pipeline::ingest_osm(&cfg, &ws).unwrap();
    pipeline::extract(&cfg, &ws).unwrap();
    // a second extract over the same inputs is idempotent
    let before = fs::read(ws.dataset()).unwrap();
    pipeline::extract(&cfg, &ws).unwrap();
    assert_eq!(before, fs::read(ws.dataset()).unwrap());
    pipeline::train(&cfg, &ws).unwrap();
    pipeline::eval(&cfg, &ws).unwrap();
    pipeline::attack(&cfg, &ws).unwrap();
    pipeline::analyze(&cfg, &ws).unwrap();
    pipeline::report(&cfg, &ws).unwrap();
    assert_eq!(tree(a.path()), tree(b.path()));
}
