//! Command-line interface. Exit codes: 0 success, 1 validation or domain
//! failure, 2 I/O or configuration failure (including usage errors).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use mealrec_core::numeric::fixed;
use mealrec_core::recommend::{RandomRecommender, SequentialRecommender};
use mealrec_core::{
    bandit_train, dataset_stats, default_day_config, score_plan, BanditConfig, BanditState, Error,
    ExperimentSpec, Horizon, LoadMode, MealPlan, PlanEnv, ProfileView, RecipeDataset, Recommender,
    RecommenderKind, ScoreReport, UserProfile,
};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dataset::{load_dataset, load_or_fixture, LoadError, Loaded};
use crate::experiment::run_experiment_parallel;
use crate::model::{load_model, save_model};
use crate::report::{
    emit_report, emit_stats, sha256_hex, DatasetInfo, ReportFormat, RunManifest, StatsFormat,
};
use crate::service::{AppState, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "mealrec", version, about = "Long-horizon meal plan recommender")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a recipe file against the schema and dataset rules.
    Validate {
        path: PathBuf,
        /// Allow recipes without instruction steps.
        #[arg(long)]
        metadata_only: bool,
    },
    /// Per-category flag percentages and recipe counts.
    Stats {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = StatsFormat::Table)]
        format: StatsFormat,
        /// Only these categories (repeatable).
        #[arg(long)]
        category: Vec<String>,
    },
    /// Run the population x horizon x algorithm grid and write reports.
    Simulate {
        /// ExperimentSpec JSON; defaults to the standard 27-cell grid.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for results.csv, results.json and manifest.json.
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated subset of random, sequential, bandit.
        #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
        algorithms: Option<Vec<RecommenderKind>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<u32>,
        #[arg(long)]
        episodes: Option<u32>,
        /// Recipe file; the bundled fixture when absent.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Format of the table printed to stdout.
        #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
        format: ReportFormat,
    },
    /// Generate one plan for a profile and print it with its scores.
    Recommend {
        /// UserProfile JSON.
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
        days: u8,
        #[arg(long, value_parser = parse_kind)]
        algo: RecommenderKind,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Bandit model file: loaded when it exists, written after training
        /// otherwise.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Training episodes when no model is available.
        #[arg(long, default_value_t = 200)]
        episodes: u32,
        /// Bandit: sample with the model's exploration rate instead of
        /// planning greedily.
        #[arg(long)]
        explore: bool,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        format: OutputFormat,
    },
    /// Run the HTTP service.
    Serve {
        /// TOML service config; MEALREC_* variables override it.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Text,
}

fn parse_kind(s: &str) -> Result<RecommenderKind, String> {
    s.parse()
}

/// A failed command and its exit-code class.
#[derive(Debug)]
pub enum Failure {
    /// Exit 1: invalid data, profile or plan.
    Domain(anyhow::Error),
    /// Exit 2: unreadable files, bad configuration, startup failures.
    Io(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Io(_) => 2,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Domain(e) | Failure::Io(e) => e,
        }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        if e.is_io() {
            Failure::Io(e.into())
        } else {
            Failure::Domain(e.into())
        }
    }
}

fn domain(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Domain(e.into())
}

fn io(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Io(e.into())
}

type CmdResult = Result<(), Failure>;

pub fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Validate {
            path,
            metadata_only,
        } => validate(&path, metadata_only),
        Command::Stats {
            path,
            format,
            category,
        } => stats(&path, format, &category),
        Command::Simulate {
            config,
            out,
            algorithms,
            seed,
            replications,
            episodes,
            dataset,
            threads,
            format,
        } => {
            let mut spec = read_spec(config.as_deref(), seed)?;
            if let Some(a) = algorithms {
                spec.algorithms = a;
            }
            if let Some(r) = replications {
                spec.replications = r;
            }
            if let Some(e) = episodes {
                spec.bandit_episodes = e;
            }
            simulate(spec, &out, dataset.as_deref(), threads, format)
        }
        Command::Recommend {
            profile,
            days,
            algo,
            seed,
            dataset,
            model,
            episodes,
            explore,
            format,
        } => recommend(RecommendArgs {
            profile: &profile,
            days,
            algo,
            seed,
            dataset: dataset.as_deref(),
            model: model.as_deref(),
            episodes,
            explore,
            format,
        }),
        Command::Serve { config } => serve(config.as_deref()),
    }
}

fn validate(path: &Path, metadata_only: bool) -> CmdResult {
    let mode = if metadata_only {
        LoadMode::MetadataOnly
    } else {
        LoadMode::Full
    };
    match load_dataset(path, mode) {
        Ok(Loaded { dataset, warnings }) => {
            for w in warnings {
                eprintln!("warning: {w}");
            }
            println!("{} recipes OK", dataset.len());
            Ok(())
        }
        Err(LoadError::Invalid {
            origin,
            source: Error::Schema(violations),
        }) => {
            for v in &violations {
                println!("{v}");
            }
            Err(domain(anyhow!(
                "{origin}: {} violation{}",
                violations.len(),
                if violations.len() == 1 { "" } else { "s" }
            )))
        }
        Err(e) => Err(e.into()),
    }
}

fn stats(path: &Path, format: StatsFormat, categories: &[String]) -> CmdResult {
    let loaded = load_dataset(path, LoadMode::MetadataOnly)?;
    let mut rows = dataset_stats(&loaded.dataset).map_err(domain)?;
    if !categories.is_empty() {
        rows.retain(|r| categories.contains(&r.category));
        if rows.is_empty() {
            return Err(domain(anyhow!(
                "no category matches {categories:?} (available: {})",
                loaded.dataset.categories().join(", ")
            )));
        }
    }
    print!("{}", emit_stats(&rows, format));
    Ok(())
}

fn entropy_seed(what: &str) -> u64 {
    let seed = rand::rng().next_u64();
    eprintln!("{what}: no --seed given, using seed {seed}");
    seed
}

/// The experiment file (or the default grid) with the seed resolved: `--seed`
/// wins, then a `base_seed` in the file, then a fresh seed that is printed.
pub fn read_spec(path: Option<&Path>, seed: Option<u64>) -> Result<ExperimentSpec, Failure> {
    let (mut spec, has_seed) = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("cannot read {}", p.display()))
                .map_err(io)?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .with_context(|| format!("{} is not valid JSON", p.display()))
                .map_err(io)?;
            let has_seed = value.get("base_seed").is_some();
            let spec: ExperimentSpec = serde_json::from_value(value)
                .with_context(|| format!("{} is not a valid experiment spec", p.display()))
                .map_err(io)?;
            (spec, has_seed)
        }
        None => (ExperimentSpec::default(), false),
    };
    spec.base_seed = match seed {
        Some(s) => s,
        None if has_seed => spec.base_seed,
        None => entropy_seed("simulate"),
    };
    Ok(spec)
}

fn dataset_info(path: Option<&Path>, ds: &RecipeDataset) -> Result<DatasetInfo, Failure> {
    let (source, bytes) = match path {
        Some(p) => (
            p.display().to_string(),
            fs::read(p).with_context(|| format!("cannot read {}", p.display())).map_err(io)?,
        ),
        None => ("<fixture>".to_string(), crate::dataset::FIXTURE_JSON.as_bytes().to_vec()),
    };
    Ok(DatasetInfo {
        source,
        recipes: ds.len(),
        sha256: sha256_hex(&bytes),
    })
}

pub fn simulate(
    spec: ExperimentSpec,
    out: &Path,
    dataset: Option<&Path>,
    threads: Option<usize>,
    format: ReportFormat,
) -> CmdResult {
    spec.validate().map_err(|e| io(anyhow!("invalid experiment spec: {e}")))?;
    let loaded = load_or_fixture(dataset, LoadMode::MetadataOnly)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let ds = loaded.dataset;
    let cfg = default_day_config();
    let rows = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(io)?
            .install(|| run_experiment_parallel(&spec, &ds, &cfg)),
        None => run_experiment_parallel(&spec, &ds, &cfg),
    }
    .map_err(domain)?;

    fs::create_dir_all(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .map_err(io)?;
    let outputs = ["results.csv", "results.json", "manifest.json"];
    let csv = emit_report(&rows, ReportFormat::Csv).map_err(domain)?;
    let json = emit_report(&rows, ReportFormat::Json).map_err(domain)?;
    let manifest = RunManifest::new(
        dataset_info(dataset, &ds)?,
        spec,
        rows.len(),
        outputs.iter().map(|s| s.to_string()).collect(),
    );
    let mut manifest_json = serde_json::to_string_pretty(&manifest).map_err(io)?;
    manifest_json.push('\n');
    for (name, body) in outputs.iter().zip([csv, json, manifest_json]) {
        let path = out.join(name);
        fs::write(&path, body)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(io)?;
    }
    print!("{}", emit_report(&rows, format).map_err(domain)?);
    Ok(())
}

struct RecommendArgs<'a> {
    profile: &'a Path,
    days: u8,
    algo: RecommenderKind,
    seed: Option<u64>,
    dataset: Option<&'a Path>,
    model: Option<&'a Path>,
    episodes: u32,
    explore: bool,
    format: OutputFormat,
}

#[derive(Serialize)]
struct RecommendOutput<'a> {
    algorithm: RecommenderKind,
    seed: u64,
    plan: &'a MealPlan,
    scores: &'a ScoreReport,
}

fn recommend(a: RecommendArgs<'_>) -> CmdResult {
    let text = fs::read_to_string(a.profile)
        .with_context(|| format!("cannot read {}", a.profile.display()))
        .map_err(io)?;
    let profile: UserProfile = serde_json::from_str(&text)
        .with_context(|| format!("{} is not a valid profile", a.profile.display()))
        .map_err(domain)?;
    let loaded = load_or_fixture(a.dataset, LoadMode::MetadataOnly)?;
    let ds = loaded.dataset;
    let view = ProfileView::new(&profile, ds.flag_names()).map_err(domain)?;
    let cfg = default_day_config();
    let env = PlanEnv::new(&ds, &cfg).map_err(domain)?;
    let horizon = Horizon::new(i64::from(a.days)).map_err(domain)?;
    let seed = a.seed.unwrap_or_else(|| entropy_seed("recommend"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let plan = match a.algo {
        RecommenderKind::Random => RandomRecommender.recommend(&env, &view, horizon, &mut rng),
        RecommenderKind::Sequential => {
            SequentialRecommender::default().recommend(&env, &view, horizon, &mut rng)
        }
        RecommenderKind::Bandit => {
            let state = bandit_state(&a, &env, &view, horizon, seed)?;
            if a.explore {
                state.plan(&env, &view, horizon, state.epsilon(), &mut rng)
            } else {
                state.greedy_plan(&env, &view, horizon)
            }
        }
    }
    .map_err(domain)?;
    let scores = score_plan(&plan, &ds, &cfg, &view).map_err(domain)?;

    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    match a.format {
        OutputFormat::Json => {
            let doc = RecommendOutput {
                algorithm: a.algo,
                seed,
                plan: &plan,
                scores: &scores,
            };
            let s = serde_json::to_string_pretty(&doc).map_err(io)?;
            writeln!(w, "{s}").map_err(io)?;
        }
        OutputFormat::Text => write_plan_text(&mut w, &plan, &scores, &ds).map_err(io)?,
    }
    Ok(())
}

fn bandit_state(
    a: &RecommendArgs<'_>,
    env: &PlanEnv<'_>,
    view: &ProfileView,
    horizon: Horizon,
    seed: u64,
) -> Result<BanditState, Failure> {
    if let Some(path) = a.model.filter(|p| p.exists()) {
        let state = load_model(path).map_err(io)?;
        eprintln!(
            "loaded bandit model {} ({} episodes)",
            path.display(),
            state.episodes()
        );
        return Ok(state);
    }
    let mut state =
        BanditState::new(BanditConfig::default(), env.schema().clone(), seed).map_err(domain)?;
    bandit_train(&mut state, env, std::slice::from_ref(view), a.episodes, horizon)
        .map_err(domain)?;
    eprintln!("trained bandit for {} episodes", state.episodes());
    if let Some(path) = a.model {
        save_model(path, &state).map_err(io)?;
        eprintln!("saved bandit model to {}", path.display());
    }
    Ok(state)
}

fn write_plan_text(
    w: &mut impl Write,
    plan: &MealPlan,
    scores: &ScoreReport,
    ds: &RecipeDataset,
) -> std::io::Result<()> {
    let cfg = default_day_config();
    for (d, day) in plan.days.iter().enumerate() {
        writeln!(w, "Day {}", d + 1)?;
        for (meal, spec) in day.meals.iter().zip(&cfg.meals) {
            let items: Vec<String> = meal
                .items
                .iter()
                .zip(&spec.slots)
                .map(|(id, role)| {
                    let name = ds.get(id).map_or(id.as_str(), |r| r.name.as_str());
                    format!("{role}: {name}")
                })
                .collect();
            writeln!(w, "  {:<9} {}", meal.meal.as_str(), items.join(" | "))?;
        }
    }
    let c = &scores.combos;
    writeln!(w)?;
    for (name, v) in [
        ("dm", scores.dm),
        ("mc", scores.mc),
        ("uc", scores.uc),
        ("G", scores.goodness),
        ("uc_dm_mc", c.uc_dm_mc),
        ("uc_dm", c.uc_dm),
        ("uc_mc", c.uc_mc),
        ("dm_mc", c.dm_mc),
    ] {
        writeln!(w, "{name:<9} {}", fixed(v, 4))?;
    }
    Ok(())
}

fn serve(config: Option<&Path>) -> CmdResult {
    let config = ServiceConfig::load(config).map_err(io)?;
    let state = AppState::new(config).map_err(io)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(io)?;
    runtime
        .block_on(crate::service::serve(Arc::new(state)))
        .map_err(io)
}
