//! Long-horizon meal plan generation over structured recipe data.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. It contains
//! the recipe model and its validator, the meal configuration vocabulary,
//! the duplicate / coverage / user-constraint goodness metrics, three plan
//! generators (random, sequential, and an epsilon-greedy contextual bandit
//! backed by gradient-boosted regression stumps), and the synthetic-user
//! experiment grid. File formats, the CLI and the HTTP service live in the
//! `mealrec` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod boost;
pub mod domain;
mod error;
pub mod features;
pub mod metrics;
pub mod numeric;
pub mod recipe;
pub mod recommend;
pub mod sim;

pub use error::{Error, Violation};

pub use boost::{fit_stump, RewardModel, Stump};
pub use domain::{
    default_day_config, horizon_bounds, validate_plan, Condition, DayConfig, DayPlan,
    GoodnessWeights, Horizon, MealAssignment, MealKind, MealPlan, MealSlotSpec, Preference,
    ProfileView, RoleWeights, UserProfile,
};
pub use metrics::{score_plan, Combos, MealScore, ScoreReport};
pub use recipe::{
    dataset_stats, validate_recipe, CategoryStats, Ingredient, InstructionStep, LoadMode,
    RawDataset, RawRecipe, Recipe, RecipeDataset, Role,
};
pub use recommend::{
    bandit_train, recommend, slot_reward, BanditConfig, BanditState, PlanEnv, Recommender,
    RecommenderKind, RecommenderState,
};
pub use sim::{run_experiment, ExperimentSpec, PopulationConfig, ResultRow};
