//! Synthetic user populations and the config x horizon x algorithm grid.
//!
//! Every random choice derives from the experiment's base seed mixed with
//! the coordinates of the unit of work, so grid cells and replications can
//! run in any order (or in parallel) and still produce identical rows.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{DayConfig, Horizon, Preference, ProfileView, UserProfile};
use crate::error::Error;
use crate::metrics::{score_plan, Combos};
use crate::numeric::mix_seed;
use crate::recipe::RecipeDataset;
use crate::recommend::{
    bandit_train, BanditConfig, BanditState, PlanEnv, RandomRecommender, Recommender,
    RecommenderKind, SequentialRecommender,
};

/// Users with a negative and a positive preference for one flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagCounts {
    pub n_neg: usize,
    pub n_pos: usize,
}

fn default_users() -> usize {
    24
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub name: String,
    #[serde(default = "default_users")]
    pub n_users: usize,
    /// Counts applied to every flag not listed in `per_flag`.
    pub counts: FlagCounts,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_flag: BTreeMap<String, FlagCounts>,
    #[serde(default)]
    pub seed: u64,
}

impl PopulationConfig {
    pub fn uniform(name: &str, n_neg: usize, n_pos: usize) -> Self {
        Self {
            name: name.to_string(),
            n_users: default_users(),
            counts: FlagCounts { n_neg, n_pos },
            per_flag: BTreeMap::new(),
            seed: 0,
        }
    }

    /// 12 negative / 0 neutral / 12 positive per flag.
    pub fn c1() -> Self {
        Self::uniform("c1", 12, 12)
    }

    /// 8 / 8 / 8 per flag.
    pub fn c2() -> Self {
        Self::uniform("c2", 8, 8)
    }

    /// 2 / 20 / 2 per flag.
    pub fn c3() -> Self {
        Self::uniform("c3", 2, 2)
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "c1" => Some(Self::c1()),
            "c2" => Some(Self::c2()),
            "c3" => Some(Self::c3()),
            _ => None,
        }
    }

    pub fn counts_for(&self, flag: &str) -> FlagCounts {
        self.per_flag.get(flag).copied().unwrap_or(self.counts)
    }

    fn validate(&self, flag_names: &[String]) -> Result<(), Error> {
        let invalid = |reason: String| Error::InvalidPopulation {
            name: self.name.clone(),
            reason,
        };
        if self.n_users == 0 {
            return Err(invalid("n_users must be positive".into()));
        }
        for flag in self.per_flag.keys() {
            if !flag_names.contains(flag) {
                return Err(invalid(format!("unknown flag `{flag}`")));
            }
        }
        for flag in flag_names {
            let c = self.counts_for(flag);
            if c.n_neg + c.n_pos > self.n_users {
                return Err(invalid(format!(
                    "{flag}: n_neg + n_pos = {} exceeds n_users = {}",
                    c.n_neg + c.n_pos,
                    self.n_users
                )));
            }
        }
        Ok(())
    }
}

/// For every flag independently, exactly `n_neg` users avoid it and `n_pos`
/// prefer it, chosen uniformly without replacement; everyone else is
/// neutral. Goodness weights are equal and missing positives are not
/// penalized.
pub fn generate_population(
    pc: &PopulationConfig,
    flag_names: &[String],
    rng: &mut dyn RngCore,
) -> Result<Vec<UserProfile>, Error> {
    pc.validate(flag_names)?;
    let mut users: Vec<UserProfile> = (0..pc.n_users)
        .map(|i| UserProfile::neutral(format!("{}-u{:02}", pc.name, i), flag_names))
        .collect();
    let mut order: Vec<usize> = (0..pc.n_users).collect();
    for flag in flag_names {
        let c = pc.counts_for(flag);
        order.sort_unstable();
        order.shuffle(rng);
        for (k, &u) in order.iter().enumerate() {
            let pref = if k < c.n_neg {
                Preference::Avoid
            } else if k < c.n_neg + c.n_pos {
                Preference::Prefer
            } else {
                Preference::Neutral
            };
            users[u].prefs.insert(flag.clone(), pref);
        }
    }
    Ok(users)
}

fn default_horizons() -> Vec<u8> {
    vec![1, 3, 5]
}

fn default_algorithms() -> Vec<RecommenderKind> {
    RecommenderKind::ALL.to_vec()
}

fn default_replications() -> u32 {
    10
}

fn default_episodes() -> u32 {
    200
}

fn default_populations() -> Vec<PopulationConfig> {
    vec![PopulationConfig::c1(), PopulationConfig::c2(), PopulationConfig::c3()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(default = "default_populations")]
    pub populations: Vec<PopulationConfig>,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<u8>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<RecommenderKind>,
    #[serde(default = "default_replications")]
    pub replications: u32,
    #[serde(default = "default_episodes")]
    pub bandit_episodes: u32,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub bandit: BanditConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            populations: default_populations(),
            horizons: default_horizons(),
            algorithms: default_algorithms(),
            replications: default_replications(),
            bandit_episodes: default_episodes(),
            base_seed: 0,
            bandit: BanditConfig::default(),
        }
    }
}

/// One coordinate of the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub population: usize,
    pub horizon: Horizon,
    pub algorithm: RecommenderKind,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: &str| Err(Error::InvalidExperiment(m.to_string()));
        if self.populations.is_empty() || self.horizons.is_empty() || self.algorithms.is_empty() {
            return bad("populations, horizons and algorithms must be non-empty");
        }
        if self.replications == 0 {
            return bad("replications must be positive");
        }
        if self.bandit_episodes == 0 {
            return bad("bandit_episodes must be positive");
        }
        for &h in &self.horizons {
            Horizon::new(i64::from(h))?;
        }
        self.bandit.validate()
    }

    /// Grid cells in population, horizon, algorithm order.
    pub fn cells(&self) -> Result<Vec<Cell>, Error> {
        self.validate()?;
        let mut out = Vec::new();
        for population in 0..self.populations.len() {
            for &h in &self.horizons {
                for &algorithm in &self.algorithms {
                    out.push(Cell {
                        population,
                        horizon: Horizon::new(i64::from(h))?,
                        algorithm,
                    });
                }
            }
        }
        Ok(out)
    }

    fn population_seed(&self, population: usize, replication: u32) -> u64 {
        let pc = &self.populations[population];
        mix_seed(&[self.base_seed, pc.seed, population as u64, u64::from(replication)])
    }

    fn user_seed(&self, cell: &Cell, replication: u32, user: usize) -> u64 {
        mix_seed(&[
            self.base_seed,
            cell.population as u64,
            cell.horizon.days() as u64,
            cell.algorithm as u64,
            u64::from(replication),
            user as u64,
        ])
    }
}

/// Base metrics of one evaluated plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanScores {
    pub uc: f64,
    pub dm: f64,
    pub mc: f64,
}

/// One row of the results table; every metric is the mean over users and
/// replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub config: String,
    pub horizon: u8,
    pub algorithm: RecommenderKind,
    pub uc: f64,
    pub dm: f64,
    pub mc: f64,
    pub uc_dm_mc: f64,
    pub uc_dm: f64,
    pub uc_mc: f64,
    pub dm_mc: f64,
}

impl ResultRow {
    /// Metric columns in table order.
    pub const COLUMNS: [&'static str; 7] = ["uc", "dm", "mc", "uc_dm_mc", "uc_dm", "uc_mc", "dm_mc"];

    pub fn values(&self) -> [f64; 7] {
        [
            self.uc,
            self.dm,
            self.mc,
            self.uc_dm_mc,
            self.uc_dm,
            self.uc_mc,
            self.dm_mc,
        ]
    }
}

/// Population for one replication of a population config; shared by every
/// horizon and algorithm so that methods are compared on the same users.
pub fn replication_population(
    spec: &ExperimentSpec,
    population: usize,
    replication: u32,
    flag_names: &[String],
) -> Result<Vec<UserProfile>, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.population_seed(population, replication));
    generate_population(&spec.populations[population], flag_names, &mut rng)
}

/// Evaluate one replication of one cell: build the population, train the
/// bandit per user when needed, generate one plan per user and score it.
pub fn run_replication(
    spec: &ExperimentSpec,
    cell: &Cell,
    replication: u32,
    env: &PlanEnv<'_>,
) -> Result<Vec<PlanScores>, Error> {
    let ds = env.dataset();
    let users = replication_population(spec, cell.population, replication, ds.flag_names())?;
    // Sequential rotation continues across the users of a replication.
    let mut sequential = SequentialRecommender::default();
    let mut out = Vec::with_capacity(users.len());
    for (u, profile) in users.iter().enumerate() {
        let view = ProfileView::new(profile, ds.flag_names())?;
        let seed = spec.user_seed(cell, replication, u);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plan = match cell.algorithm {
            RecommenderKind::Random => {
                RandomRecommender.recommend(env, &view, cell.horizon, &mut rng)?
            }
            RecommenderKind::Sequential => {
                sequential.recommend(env, &view, cell.horizon, &mut rng)?
            }
            RecommenderKind::Bandit => {
                let mut state =
                    BanditState::new(spec.bandit, env.schema().clone(), mix_seed(&[seed, 1]))?;
                bandit_train(
                    &mut state,
                    env,
                    core::slice::from_ref(&view),
                    spec.bandit_episodes,
                    cell.horizon,
                )?;
                state.recommend(env, &view, cell.horizon, &mut rng)?
            }
        };
        let report = score_plan(&plan, ds, env.day_config(), &view)?;
        out.push(PlanScores {
            uc: report.uc,
            dm: report.dm,
            mc: report.mc,
        });
    }
    Ok(out)
}

/// Average the replications of one cell into a row.
pub fn aggregate(spec: &ExperimentSpec, cell: &Cell, replications: &[Vec<PlanScores>]) -> ResultRow {
    let (mut uc, mut dm, mut mc, mut n) = (0.0, 0.0, 0.0, 0usize);
    for rep in replications {
        for s in rep {
            uc += s.uc;
            dm += s.dm;
            mc += s.mc;
            n += 1;
        }
    }
    let n = n.max(1) as f64;
    let (uc, dm, mc) = (uc / n, dm / n, mc / n);
    let combos = Combos::of(dm, mc, uc);
    ResultRow {
        config: spec.populations[cell.population].name.clone(),
        horizon: cell.horizon.days() as u8,
        algorithm: cell.algorithm,
        uc,
        dm,
        mc,
        uc_dm_mc: combos.uc_dm_mc,
        uc_dm: combos.uc_dm,
        uc_mc: combos.uc_mc,
        dm_mc: combos.dm_mc,
    }
}

/// Stable sort by (config, horizon, algorithm).
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        (&a.config, a.horizon, a.algorithm).cmp(&(&b.config, b.horizon, b.algorithm))
    });
}

/// Run the whole grid on the calling thread.
pub fn run_experiment(
    spec: &ExperimentSpec,
    ds: &RecipeDataset,
    cfg: &DayConfig,
) -> Result<Vec<ResultRow>, Error> {
    let env = PlanEnv::new(ds, cfg)?;
    let mut rows = Vec::new();
    for cell in spec.cells()? {
        let reps = (0..spec.replications)
            .map(|r| run_replication(spec, &cell, r, &env))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(aggregate(spec, &cell, &reps));
    }
    sort_rows(&mut rows);
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags() -> Vec<String> {
        vec!["hasDairy".into(), "hasMeat".into(), "hasNuts".into()]
    }

    fn split(users: &[UserProfile], flag: &str) -> (usize, usize, usize) {
        let count = |p| users.iter().filter(|u| u.prefs[flag] == p).count();
        (
            count(Preference::Avoid),
            count(Preference::Neutral),
            count(Preference::Prefer),
        )
    }

    #[test]
    fn presets_have_exact_splits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c1 = generate_population(&PopulationConfig::c1(), &flags(), &mut rng).unwrap();
        let c3 = generate_population(&PopulationConfig::c3(), &flags(), &mut rng).unwrap();
        for f in flags() {
            assert_eq!(split(&c1, &f), (12, 0, 12));
            assert_eq!(split(&c3, &f), (2, 20, 2));
        }
        assert!(c1.iter().all(|u| !u.penalize_missing_positive));
    }

    #[test]
    fn population_is_seeded() {
        let gen = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            generate_population(&PopulationConfig::c2(), &flags(), &mut rng).unwrap()
        };
        assert_eq!(gen(9), gen(9));
        assert_ne!(gen(9), gen(10));
    }

    #[test]
    fn oversubscribed_population_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pc = PopulationConfig::uniform("bad", 13, 12);
        assert!(matches!(
            generate_population(&pc, &flags(), &mut rng),
            Err(Error::InvalidPopulation { .. })
        ));
    }

    #[test]
    fn default_grid_has_27_cells() {
        assert_eq!(ExperimentSpec::default().cells().unwrap().len(), 27);
        let spec = ExperimentSpec {
            horizons: vec![6],
            ..ExperimentSpec::default()
        };
        assert_eq!(spec.cells(), Err(Error::InvalidHorizon(6)));
    }
}
