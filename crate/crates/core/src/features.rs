//! Feature encoding for the bandit's reward model.
//!
//! A sample is the slot context followed by the arm (recipe) features:
//!
//! ```text
//! context: prefs[F] | slot role one-hot[4] | meal one-hot[3] | day / horizon
//! arm:     flags[F] | role indicators[4]   | category one-hot[C]
//! ```

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{Horizon, MealKind, Preference};
use crate::recipe::{Recipe, RecipeDataset, Role};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub flag_names: Vec<String>,
    pub categories: Vec<String>,
}

impl FeatureSchema {
    pub fn for_dataset(ds: &RecipeDataset) -> Self {
        Self {
            flag_names: ds.flag_names().to_vec(),
            categories: ds.categories(),
        }
    }

    pub fn context_dim(&self) -> usize {
        self.flag_names.len() + Role::ALL.len() + MealKind::ALL.len() + 1
    }

    pub fn arm_dim(&self) -> usize {
        self.flag_names.len() + Role::ALL.len() + self.categories.len()
    }

    pub fn dim(&self) -> usize {
        self.context_dim() + self.arm_dim()
    }

    pub fn arm_features(&self, recipe: &Recipe) -> ArmFeatures {
        let mut v = Vec::with_capacity(self.arm_dim());
        v.extend(recipe.flags.iter().map(|&f| indicator(f)));
        v.extend(Role::ALL.iter().map(|&r| indicator(recipe.has_role(r))));
        v.extend(self.categories.iter().map(|c| indicator(*c == recipe.category)));
        ArmFeatures(v)
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Everything the policy knows about a slot before choosing an item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotContext<'a> {
    pub prefs: &'a [Preference],
    pub role: Role,
    pub meal: MealKind,
    /// 0-based day within the plan.
    pub day: usize,
    pub horizon: Horizon,
}

impl SlotContext<'_> {
    pub fn encode(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.prefs.len() + 8);
        v.extend(self.prefs.iter().map(|p| f64::from(p.value())));
        v.extend(Role::ALL.iter().map(|&r| indicator(r == self.role)));
        v.extend(MealKind::ALL.iter().map(|&m| indicator(m == self.meal)));
        v.push(self.day as f64 / self.horizon.days() as f64);
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmFeatures(pub Vec<f64>);

impl ArmFeatures {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}
