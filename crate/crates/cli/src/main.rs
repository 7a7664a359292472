//! `geopriv`: semantic GPS features, stress classifiers and privacy analysis.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use geopriv::config::RunConfig;
use geopriv::evaluation::Regime;
use geopriv::features::FeatureSet;
use geopriv::pipeline::{self, Workspace};
use geopriv::privacy::AttackScenario;
use geopriv::resampling::Balance;

#[derive(Parser)]
#[command(name = "geopriv", version, about = "Privacy-aware semantic location features for stress recognition")]
struct Cli {
    /// TOML run configuration; flags given here override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory holding every artifact and the manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Seed for every random draw in the run.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort bundle and its map extract.
    Synth {
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        weeks: Option<usize>,
    },
    /// Parse an OSM extract into the spatial index.
    IngestOsm {
        /// OSM XML file; defaults to the synthetic cohort's map.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        cell_deg: Option<f64>,
    },
    /// Build the labelled daily feature table.
    Extract {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Fit each model on every labelled day.
    Train {
        #[command(flatten)]
        sel: ModelArgs,
    },
    /// Score models under the split, k-fold or leave-one-subject-out regimes.
    Eval {
        #[command(flatten)]
        sel: ModelArgs,
        #[arg(long, value_parser = parse::<Regime>)]
        regime: Vec<Regime>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        min_days: Option<usize>,
    },
    /// Re-identification attacks and per-feature identity leakage.
    Attack {
        #[arg(long, value_parser = parse::<FeatureSet>)]
        set: Vec<FeatureSet>,
        #[arg(long, value_parser = parse::<AttackScenario>)]
        scenario: Vec<AttackScenario>,
        #[arg(long)]
        mi_bins: Option<usize>,
    },
    /// Univariate F-test and point-biserial screening against the label.
    Analyze {
        #[arg(long, value_parser = parse::<FeatureSet>)]
        set: Option<FeatureSet>,
    },
    /// Collect stage outputs into table-shaped CSVs.
    Report,
    /// Every stage in order.
    Run {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Print the effective configuration and its hash.
    Config,
}

#[derive(Args)]
struct InputArgs {
    /// CSV bundle directory to use instead of the synthetic cohort.
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// StudentLife dataset root, read through the adapter.
    #[arg(long)]
    studentlife: Option<PathBuf>,
    /// OSM extract matching an external bundle.
    #[arg(long)]
    osm: Option<PathBuf>,
    /// `human`, `llm` or a category map CSV.
    #[arg(long)]
    category_map: Option<String>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_parser = parse::<FeatureSet>)]
    set: Vec<FeatureSet>,
    /// `rf` or `xgb`.
    #[arg(long)]
    model: Vec<String>,
    #[arg(long, value_parser = parse::<Balance>)]
    balance: Option<Balance>,
}

fn parse<T: std::str::FromStr<Err = geopriv::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: geopriv::Error| e.to_string())
}

fn apply_input(cfg: &mut RunConfig, a: InputArgs) {
    if a.bundle.is_some() {
        cfg.input.bundle = a.bundle;
    }
    if a.studentlife.is_some() {
        cfg.input.studentlife = a.studentlife;
    }
    if a.osm.is_some() {
        cfg.input.osm = a.osm;
    }
    if let Some(m) = a.category_map {
        cfg.input.category_map = m;
    }
}

fn apply_models(cfg: &mut RunConfig, a: ModelArgs) {
    if !a.set.is_empty() {
        cfg.eval.sets = a.set;
    }
    if !a.model.is_empty() {
        cfg.eval.models = a.model;
    }
    if a.balance.is_some() {
        cfg.eval.balance = a.balance;
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let ws = Workspace::new(&cli.out);

    let written = match cli.command {
        Command::Synth { users, weeks } => {
            if let Some(n) = users {
                cfg.synth.n_users = n;
            }
            if let Some(n) = weeks {
                cfg.synth.n_weeks = n;
            }
            pipeline::synth(&cfg, &ws)?
        }
        Command::IngestOsm { input, cell_deg } => {
            if input.is_some() {
                cfg.input.osm = input;
            }
            if let Some(c) = cell_deg {
                cfg.extract.cell_deg = c;
            }
            pipeline::ingest_osm(&cfg, &ws)?
        }
        Command::Extract { input } => {
            apply_input(&mut cfg, input);
            pipeline::extract(&cfg, &ws)?
        }
        Command::Train { sel } => {
            apply_models(&mut cfg, sel);
            pipeline::train(&cfg, &ws)?
        }
        Command::Eval { sel, regime, folds, min_days } => {
            apply_models(&mut cfg, sel);
            if !regime.is_empty() {
                cfg.eval.regimes = regime;
            }
            if let Some(k) = folds {
                cfg.eval.folds = k;
            }
            if let Some(d) = min_days {
                cfg.eval.min_days = d;
            }
            pipeline::eval(&cfg, &ws)?
        }
        Command::Attack { set, scenario, mi_bins } => {
            if !set.is_empty() {
                cfg.attack.sets = set;
            }
            if !scenario.is_empty() {
                cfg.attack.scenarios = scenario;
            }
            if let Some(b) = mi_bins {
                cfg.attack.mi_bins = b;
            }
            pipeline::attack(&cfg, &ws)?
        }
        Command::Analyze { set } => {
            if let Some(s) = set {
                cfg.analyze.set = s;
            }
            pipeline::analyze(&cfg, &ws)?
        }
        Command::Report => pipeline::report(&cfg, &ws)?,
        Command::Run { input } => {
            apply_input(&mut cfg, input);
            pipeline::run_all(&cfg, &ws)?
        }
        Command::Config => {
            cfg.validate()?;
            print!("# config hash {}\n{}", cfg.hash()?, cfg.to_toml()?);
            return Ok(());
        }
    };
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}
