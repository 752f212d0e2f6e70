//! Plan generators: uniform random, sequential rotation, and an
//! epsilon-greedy contextual bandit whose reward model is a boosted stump
//! ensemble over slot-context and recipe features.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boost::{fit_stump_grouped, RewardModel};
use crate::domain::{DayConfig, DayPlan, Horizon, MealAssignment, MealPlan, MealSlotSpec, ProfileView};
use crate::error::Error;
use crate::features::{ArmFeatures, FeatureSchema, SlotContext};
use crate::metrics::meal_constraint_score;
use crate::numeric::mix_seed;
use crate::recipe::{Recipe, RecipeDataset, Role};

/// A dataset and day layout checked for plan generation, with per-role
/// candidate lists and precomputed arm features.
#[derive(Debug, Clone)]
pub struct PlanEnv<'a> {
    ds: &'a RecipeDataset,
    cfg: &'a DayConfig,
    schema: FeatureSchema,
    /// Dataset positions of role-eligible recipes, sorted by recipe id.
    eligible: [Vec<usize>; 4],
    arms: Vec<ArmFeatures>,
}

impl<'a> PlanEnv<'a> {
    pub fn new(ds: &'a RecipeDataset, cfg: &'a DayConfig) -> Result<Self, Error> {
        let violations = cfg.validate();
        if !violations.is_empty() {
            return Err(Error::InvalidDayConfig(violations));
        }
        let eligible = Role::ALL.map(|role| {
            let mut idx: Vec<usize> = (0..ds.len())
                .filter(|&i| ds.recipes()[i].has_role(role))
                .collect();
            idx.sort_by(|&a, &b| ds.recipes()[a].id.cmp(&ds.recipes()[b].id));
            idx
        });
        if let Some(role) = cfg
            .roles_used()
            .into_iter()
            .find(|r| eligible[r.index()].is_empty())
        {
            return Err(Error::MissingRole(role));
        }
        let schema = FeatureSchema::for_dataset(ds);
        let arms = ds.recipes().iter().map(|r| schema.arm_features(r)).collect();
        Ok(Self {
            ds,
            cfg,
            schema,
            eligible,
            arms,
        })
    }

    pub fn dataset(&self) -> &'a RecipeDataset {
        self.ds
    }

    pub fn day_config(&self) -> &'a DayConfig {
        self.cfg
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn eligible(&self, role: Role) -> &[usize] {
        &self.eligible[role.index()]
    }

    pub fn recipe(&self, pos: usize) -> &'a Recipe {
        &self.ds.recipes()[pos]
    }

    /// Full model input for placing recipe `pos` in the given slot.
    pub fn sample_features(&self, ctx: &SlotContext<'_>, pos: usize) -> Vec<f64> {
        let mut v = ctx.encode();
        v.extend_from_slice(self.arms[pos].as_slice());
        v
    }

    fn assemble(
        &self,
        user_id: &str,
        horizon: Horizon,
        mut pick: impl FnMut(usize, &MealSlotSpec, Role) -> usize,
    ) -> MealPlan {
        let days = (0..horizon.days())
            .map(|day| DayPlan {
                meals: self
                    .cfg
                    .meals
                    .iter()
                    .map(|spec| MealAssignment {
                        meal: spec.meal,
                        items: spec
                            .slots
                            .iter()
                            .map(|&role| self.recipe(pick(day, spec, role)).id.clone())
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        MealPlan {
            user_id: String::from(user_id),
            days,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecommenderKind {
    Random,
    Sequential,
    Bandit,
}

impl RecommenderKind {
    pub const ALL: [RecommenderKind; 3] = [
        RecommenderKind::Random,
        RecommenderKind::Sequential,
        RecommenderKind::Bandit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RecommenderKind::Random => "random",
            RecommenderKind::Sequential => "sequential",
            RecommenderKind::Bandit => "bandit",
        }
    }
}

impl fmt::Display for RecommenderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecommenderKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(RecommenderKind::Random),
            "sequential" => Ok(RecommenderKind::Sequential),
            "bandit" => Ok(RecommenderKind::Bandit),
            other => Err(alloc::format!(
                "unknown algorithm `{other}` (expected random, sequential or bandit)"
            )),
        }
    }
}

pub trait Recommender {
    fn kind(&self) -> RecommenderKind;

    fn recommend(
        &mut self,
        env: &PlanEnv<'_>,
        profile: &ProfileView,
        horizon: Horizon,
        rng: &mut dyn RngCore,
    ) -> Result<MealPlan, Error>;
}

/// Every slot drawn uniformly from the role-eligible recipes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RandomRecommender;

impl Recommender for RandomRecommender {
    fn kind(&self) -> RecommenderKind {
        RecommenderKind::Random
    }

    fn recommend(
        &mut self,
        env: &PlanEnv<'_>,
        profile: &ProfileView,
        horizon: Horizon,
        rng: &mut dyn RngCore,
    ) -> Result<MealPlan, Error> {
        Ok(env.assemble(&profile.user_id, horizon, |_, _, role| {
            let pool = env.eligible(role);
            pool[rng.random_range(0..pool.len())]
        }))
    }
}

/// Rotates through the dataset in file order with one cursor shared by all
/// meals and days, skipping recipes that lack the slot's role.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequentialRecommender {
    pub cursor: usize,
}

impl SequentialRecommender {
    pub fn starting_at(cursor: usize) -> Self {
        Self { cursor }
    }

    fn next(&mut self, env: &PlanEnv<'_>, role: Role) -> usize {
        let n = env.dataset().len();
        let start = self.cursor % n;
        let pos = (0..n)
            .map(|k| (start + k) % n)
            .find(|&i| env.recipe(i).has_role(role))
            .expect("PlanEnv guarantees an eligible recipe per used role");
        self.cursor = (pos + 1) % n;
        pos
    }
}

impl Recommender for SequentialRecommender {
    fn kind(&self) -> RecommenderKind {
        RecommenderKind::Sequential
    }

    fn recommend(
        &mut self,
        env: &PlanEnv<'_>,
        profile: &ProfileView,
        horizon: Horizon,
        _rng: &mut dyn RngCore,
    ) -> Result<MealPlan, Error> {
        Ok(env.assemble(&profile.user_id, horizon, |_, _, role| self.next(env, role)))
    }
}

/// Per-slot training signal: half for filling the slot's role, half for the
/// single-item user-constraint score.
pub fn slot_reward(recipe: &Recipe, slot_role: Role, profile: &ProfileView) -> f64 {
    let role_match = if recipe.has_role(slot_role) { 1.0 } else { 0.0 };
    0.5 * role_match + 0.5 * meal_constraint_score(&[recipe], profile)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BanditConfig {
    pub epsilon0: f64,
    /// Multiplicative decay applied once per training episode.
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub learning_rate: f64,
    pub max_stumps: usize,
    pub stumps_per_round: usize,
    pub buffer_capacity: usize,
}

impl Default for BanditConfig {
    fn default() -> Self {
        Self {
            epsilon0: 0.3,
            epsilon_decay: 0.995,
            epsilon_min: 0.02,
            learning_rate: 0.1,
            max_stumps: 400,
            stumps_per_round: 5,
            buffer_capacity: 10_000,
        }
    }
}

impl BanditConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: &str| Err(Error::InvalidBanditConfig(String::from(m)));
        if !(0.0..=1.0).contains(&self.epsilon_min)
            || !(self.epsilon_min..=1.0).contains(&self.epsilon0)
        {
            return bad("need 0 <= epsilon_min <= epsilon0 <= 1");
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return bad("epsilon_decay must lie in (0, 1]");
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return bad("learning_rate must be positive");
        }
        if self.max_stumps == 0 || self.buffer_capacity == 0 {
            return bad("max_stumps and buffer_capacity must be positive");
        }
        Ok(())
    }
}

/// Ring buffer of `(context ++ arm, reward)` samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayBuffer {
    dim: usize,
    capacity: usize,
    rows: Vec<f64>,
    rewards: Vec<f64>,
    next: usize,
    // Derived from the samples and the model; rebuilt after deserialization.
    #[serde(skip)]
    groups: Groups,
}

/// Samples with identical feature rows, merged. Boosting only needs each
/// distinct row's sample count, reward sum and current model score.
#[derive(Debug, Clone, Default)]
struct Groups {
    index: BTreeMap<Vec<u64>, usize>,
    rows: Vec<f64>,
    counts: Vec<f64>,
    reward_sums: Vec<f64>,
    scores: Vec<f64>,
    member: Vec<usize>,
}

impl Groups {
    fn add(&mut self, row: &[f64], reward: f64, model: &RewardModel) -> usize {
        let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
        let g = *self.index.entry(key).or_insert_with(|| {
            self.rows.extend_from_slice(row);
            self.counts.push(0.0);
            self.reward_sums.push(0.0);
            self.scores.push(model.raw_score(row));
            self.counts.len() - 1
        });
        self.counts[g] += 1.0;
        self.reward_sums[g] += reward;
        g
    }

    fn remove(&mut self, g: usize, reward: f64) {
        self.counts[g] -= 1.0;
        if self.counts[g] == 0.0 {
            self.reward_sums[g] = 0.0;
        } else {
            self.reward_sums[g] -= reward;
        }
    }
}

impl PartialEq for ReplayBuffer {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.capacity == other.capacity
            && self.rows == other.rows
            && self.rewards == other.rewards
            && self.next == other.next
    }
}

impl ReplayBuffer {
    fn new(dim: usize, capacity: usize) -> Self {
        Self {
            dim,
            capacity,
            rows: Vec::new(),
            rewards: Vec::new(),
            next: 0,
            groups: Groups::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn reward(&self, i: usize) -> f64 {
        self.rewards[i]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    fn sync(&mut self, model: &RewardModel) {
        if self.groups.member.len() == self.rewards.len() {
            return;
        }
        let mut groups = Groups::default();
        for i in 0..self.len() {
            let g = groups.add(self.row(i), self.rewards[i], model);
            groups.member.push(g);
        }
        self.groups = groups;
    }

    fn push(&mut self, row: &[f64], reward: f64, model: &RewardModel) {
        self.sync(model);
        let g = self.groups.add(row, reward, model);
        if self.rewards.len() < self.capacity {
            self.rows.extend_from_slice(row);
            self.rewards.push(reward);
            self.groups.member.push(g);
        } else {
            let i = self.next;
            self.groups.remove(self.groups.member[i], self.rewards[i]);
            self.rows[i * self.dim..(i + 1) * self.dim].copy_from_slice(row);
            self.rewards[i] = reward;
            self.groups.member[i] = g;
            self.next = (i + 1) % self.capacity;
        }
    }
}

/// Everything the bandit learns for one user (or one population): the
/// reward model, the exploration schedule, and the replay buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditState {
    config: BanditConfig,
    schema: FeatureSchema,
    seed: u64,
    epsilon: f64,
    episodes: u64,
    version: u64,
    model: RewardModel,
    buffer: ReplayBuffer,
}

impl BanditState {
    pub fn new(config: BanditConfig, schema: FeatureSchema, seed: u64) -> Result<Self, Error> {
        config.validate()?;
        let dim = schema.dim();
        Ok(Self {
            epsilon: config.epsilon0,
            model: RewardModel::new(config.learning_rate, config.max_stumps),
            buffer: ReplayBuffer::new(dim, config.buffer_capacity),
            config,
            schema,
            seed,
            episodes: 0,
            version: 0,
        })
    }

    /// Replace the reward model, e.g. with one loaded or built by hand.
    pub fn with_model(mut self, model: RewardModel) -> Self {
        self.model = model;
        self.buffer.groups = Groups::default();
        self
    }

    pub fn config(&self) -> &BanditConfig {
        &self.config
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    /// Bumped on every training round and feedback update.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn model(&self) -> &RewardModel {
        &self.model
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    fn check_env(&self, env: &PlanEnv<'_>) -> Result<(), Error> {
        if self.schema != *env.schema() {
            return Err(Error::FeatureSchemaMismatch);
        }
        Ok(())
    }

    /// Epsilon-greedy choice for one slot. Greedy picks maximize the
    /// unclamped score (clamping is monotone, so this only refines ties
    /// among saturated arms); exact ties go to the lowest recipe id.
    fn select(
        &self,
        env: &PlanEnv<'_>,
        context: &[f64],
        role: Role,
        epsilon: f64,
        rng: &mut dyn RngCore,
    ) -> usize {
        let pool = env.eligible(role);
        if epsilon > 0.0 && rng.random::<f64>() < epsilon {
            return pool[rng.random_range(0..pool.len())];
        }
        let mut best = pool[0];
        let mut best_score = self.model.raw_score_split(context, env.arms[best].as_slice());
        for &pos in &pool[1..] {
            let s = self.model.raw_score_split(context, env.arms[pos].as_slice());
            if s > best_score {
                best = pos;
                best_score = s;
            }
        }
        best
    }

    /// Clamped model estimate for placing recipe `pos` in a slot.
    pub fn predict(&self, env: &PlanEnv<'_>, ctx: &SlotContext<'_>, pos: usize) -> f64 {
        self.model
            .raw_score_split(&ctx.encode(), env.arms[pos].as_slice())
            .clamp(0.0, 1.0)
    }

    /// A plan under an explicit exploration rate (0 for purely greedy).
    pub fn plan(
        &self,
        env: &PlanEnv<'_>,
        profile: &ProfileView,
        horizon: Horizon,
        epsilon: f64,
        rng: &mut dyn RngCore,
    ) -> Result<MealPlan, Error> {
        self.check_env(env)?;
        Ok(env.assemble(&profile.user_id, horizon, |day, spec, role| {
            let ctx = SlotContext {
                prefs: &profile.prefs,
                role,
                meal: spec.meal,
                day,
                horizon,
            };
            self.select(env, &ctx.encode(), role, epsilon, rng)
        }))
    }

    pub fn greedy_plan(
        &self,
        env: &PlanEnv<'_>,
        profile: &ProfileView,
        horizon: Horizon,
    ) -> Result<MealPlan, Error> {
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        self.plan(env, profile, horizon, 0.0, &mut unused)
    }

    /// Append one observed sample to the replay buffer.
    pub fn observe(&mut self, row: &[f64], reward: f64) -> Result<(), Error> {
        if row.len() != self.buffer.dim {
            return Err(Error::DimensionMismatch {
                expected: self.buffer.dim,
                found: row.len(),
            });
        }
        self.buffer.push(row, reward, &self.model);
        Ok(())
    }

    /// Fit up to `stumps_per_round` stumps to the buffer's residuals.
    /// Returns how many were added.
    pub fn boost_round(&mut self) -> Result<usize, Error> {
        if self.buffer.len() < 2 {
            return Ok(0);
        }
        self.buffer.sync(&self.model);
        let lr = self.model.learning_rate();
        let dim = self.buffer.dim;
        let groups = &mut self.buffer.groups;
        let mut added = 0;
        let mut residuals = Vec::with_capacity(groups.counts.len());
        while added < self.config.stumps_per_round && !self.model.is_full() {
            residuals.clear();
            residuals.extend(
                groups
                    .reward_sums
                    .iter()
                    .zip(&groups.counts)
                    .zip(&groups.scores)
                    .map(|((r, c), s)| r - c * s),
            );
            let stump = fit_stump_grouped(&groups.rows, dim, &groups.counts, &residuals)?;
            for (g, score) in groups.scores.iter_mut().enumerate() {
                *score += lr * stump.predict(&groups.rows[g * dim..(g + 1) * dim]);
            }
            self.model.push(stump);
            added += 1;
        }
        Ok(added)
    }

    /// Play one plan for `profile` with the current exploration rate and
    /// record every slot's reward.
    fn play(
        &mut self,
        env: &PlanEnv<'_>,
        profile: &ProfileView,
        horizon: Horizon,
        rng: &mut dyn RngCore,
    ) -> Result<(), Error> {
        let mut samples: Vec<(Vec<f64>, f64)> = Vec::new();
        let epsilon = self.epsilon;
        let this = &*self;
        env.assemble(&profile.user_id, horizon, |day, spec, role| {
            let ctx = SlotContext {
                prefs: &profile.prefs,
                role,
                meal: spec.meal,
                day,
                horizon,
            };
            let context = ctx.encode();
            let pos = this.select(env, &context, role, epsilon, rng);
            let mut row = context;
            row.extend_from_slice(env.arms[pos].as_slice());
            samples.push((row, slot_reward(env.recipe(pos), role, profile)));
            pos
        });
        for (row, reward) in samples {
            self.observe(&row, reward)?;
        }
        Ok(())
    }

    /// Append externally observed rewards (e.g. accept = 1, reject = 0) and
    /// run one boosting round. A full ensemble is compacted first so that
    /// feedback can still move the model. Returns the new version.
    pub fn learn_from_feedback(&mut self, samples: &[(Vec<f64>, f64)]) -> Result<u64, Error> {
        for (row, reward) in samples {
            self.observe(row, *reward)?;
        }
        if self.model.is_full() {
            self.model.compact();
        }
        self.boost_round()?;
        self.version += 1;
        Ok(self.version)
    }
}

impl Recommender for BanditState {
    fn kind(&self) -> RecommenderKind {
        RecommenderKind::Bandit
    }

    fn recommend(
        &mut self,
        env: &PlanEnv<'_>,
        profile: &ProfileView,
        horizon: Horizon,
        rng: &mut dyn RngCore,
    ) -> Result<MealPlan, Error> {
        self.plan(env, profile, horizon, self.epsilon, rng)
    }
}

/// Train for `episodes` episodes. Each episode plays one plan per profile,
/// records every slot's reward, and fits a boosting round after each
/// profile; epsilon decays once per episode. Episode randomness derives from
/// the state's seed and episode counter, so training resumes
/// deterministically after a reload.
pub fn bandit_train(
    state: &mut BanditState,
    env: &PlanEnv<'_>,
    profiles: &[ProfileView],
    episodes: u32,
    horizon: Horizon,
) -> Result<(), Error> {
    if profiles.is_empty() {
        return Err(Error::NoProfiles);
    }
    state.check_env(env)?;
    for _ in 0..episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[state.seed, state.episodes]));
        for profile in profiles {
            state.play(env, profile, horizon, &mut rng)?;
            state.boost_round()?;
        }
        state.epsilon = (state.epsilon * state.config.epsilon_decay).max(state.config.epsilon_min);
        state.episodes += 1;
        state.version += 1;
    }
    Ok(())
}

/// Per-kind generator state.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum RecommenderState {
    Random(RandomRecommender),
    Sequential(SequentialRecommender),
    Bandit(BanditState),
}

impl Recommender for RecommenderState {
    fn kind(&self) -> RecommenderKind {
        match self {
            RecommenderState::Random(r) => r.kind(),
            RecommenderState::Sequential(r) => r.kind(),
            RecommenderState::Bandit(r) => r.kind(),
        }
    }

    fn recommend(
        &mut self,
        env: &PlanEnv<'_>,
        profile: &ProfileView,
        horizon: Horizon,
        rng: &mut dyn RngCore,
    ) -> Result<MealPlan, Error> {
        match self {
            RecommenderState::Random(r) => r.recommend(env, profile, horizon, rng),
            RecommenderState::Sequential(r) => r.recommend(env, profile, horizon, rng),
            RecommenderState::Bandit(r) => r.recommend(env, profile, horizon, rng),
        }
    }
}

pub fn recommend(
    state: &mut RecommenderState,
    env: &PlanEnv<'_>,
    profile: &ProfileView,
    horizon: Horizon,
    rng: &mut dyn RngCore,
) -> Result<MealPlan, Error> {
    state.recommend(env, profile, horizon, rng)
}
