//! Meal configurations, user profiles and meal plans.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Violation};
use crate::recipe::{RecipeDataset, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MealKind {
    Breakfast,
    Lunch,
    Dinner,
}

impl MealKind {
    pub const ALL: [MealKind; 3] = [MealKind::Breakfast, MealKind::Lunch, MealKind::Dinner];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MealKind::Breakfast => "breakfast",
            MealKind::Lunch => "lunch",
            MealKind::Dinner => "dinner",
        }
    }
}

impl fmt::Display for MealKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MealSlotSpec {
    pub meal: MealKind,
    pub slots: Vec<Role>,
}

/// Per-day slot structure: Breakfast, Lunch and Dinner, each exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayConfig {
    pub meals: Vec<MealSlotSpec>,
}

impl DayConfig {
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let kinds: Vec<MealKind> = self.meals.iter().map(|m| m.meal).collect();
        for kind in MealKind::ALL {
            let n = kinds.iter().filter(|&&k| k == kind).count();
            if n != 1 {
                out.push(Violation::new(
                    "meals",
                    format!("{kind} must appear exactly once, found {n}"),
                ));
            }
        }
        for spec in &self.meals {
            if spec.slots.is_empty() {
                out.push(Violation::new(
                    format!("meals.{}", spec.meal),
                    "slots must be non-empty",
                ));
            }
            for role in Role::ALL {
                if spec.slots.iter().filter(|&&r| r == role).count() > 1 {
                    out.push(Violation::new(
                        format!("meals.{}", spec.meal),
                        format!("role `{role}` appears more than once"),
                    ));
                }
            }
        }
        out
    }

    pub fn slots_per_day(&self) -> usize {
        self.meals.iter().map(|m| m.slots.len()).sum()
    }

    /// Roles used by at least one slot.
    pub fn roles_used(&self) -> Vec<Role> {
        Role::ALL
            .into_iter()
            .filter(|r| self.meals.iter().any(|m| m.slots.contains(r)))
            .collect()
    }
}

impl Default for DayConfig {
    fn default() -> Self {
        default_day_config()
    }
}

/// Breakfast(Main, Beverage), Lunch(Main, Side, Beverage),
/// Dinner(Main, Side, Dessert, Beverage).
pub fn default_day_config() -> DayConfig {
    use Role::*;
    DayConfig {
        meals: alloc::vec![
            MealSlotSpec {
                meal: MealKind::Breakfast,
                slots: alloc::vec![Main, Beverage],
            },
            MealSlotSpec {
                meal: MealKind::Lunch,
                slots: alloc::vec![Main, Side, Beverage],
            },
            MealSlotSpec {
                meal: MealKind::Dinner,
                slots: alloc::vec![Main, Side, Dessert, Beverage],
            },
        ],
    }
}

pub const MIN_HORIZON_DAYS: u8 = 1;
pub const MAX_HORIZON_DAYS: u8 = 5;

pub fn horizon_bounds() -> (u8, u8) {
    (MIN_HORIZON_DAYS, MAX_HORIZON_DAYS)
}

/// Number of planned days, always within [`horizon_bounds`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "u8")]
pub struct Horizon(u8);

impl Horizon {
    pub fn new(days: i64) -> Result<Self, Error> {
        if (i64::from(MIN_HORIZON_DAYS)..=i64::from(MAX_HORIZON_DAYS)).contains(&days) {
            Ok(Self(days as u8))
        } else {
            Err(Error::InvalidHorizon(days))
        }
    }

    pub fn days(self) -> usize {
        usize::from(self.0)
    }
}

impl TryFrom<i64> for Horizon {
    type Error = Error;
    fn try_from(days: i64) -> Result<Self, Error> {
        Horizon::new(days)
    }
}

impl From<Horizon> for u8 {
    fn from(h: Horizon) -> u8 {
        h.0
    }
}

/// Tri-state ingredient preference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i8")]
pub enum Preference {
    Avoid,
    #[default]
    Neutral,
    Prefer,
}

impl Preference {
    pub fn value(self) -> i8 {
        match self {
            Preference::Avoid => -1,
            Preference::Neutral => 0,
            Preference::Prefer => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceOutOfRange(pub i64);

impl fmt::Display for PreferenceOutOfRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "preference must be -1, 0, or +1 (got {})", self.0)
    }
}

impl TryFrom<i64> for Preference {
    type Error = PreferenceOutOfRange;
    fn try_from(v: i64) -> Result<Self, Self::Error> {
        match v {
            -1 => Ok(Preference::Avoid),
            0 => Ok(Preference::Neutral),
            1 => Ok(Preference::Prefer),
            other => Err(PreferenceOutOfRange(other)),
        }
    }
}

impl From<Preference> for i8 {
    fn from(p: Preference) -> i8 {
        p.value()
    }
}

/// Stored and echoed; no metric reads it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    #[default]
    Healthy,
    Diabetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoleWeights {
    pub main: f64,
    pub side: f64,
    pub dessert: f64,
    pub beverage: f64,
}

impl Default for RoleWeights {
    fn default() -> Self {
        Self {
            main: 1.0,
            side: 1.0,
            dessert: 1.0,
            beverage: 1.0,
        }
    }
}

impl RoleWeights {
    pub fn get(&self, role: Role) -> f64 {
        match role {
            Role::Main => self.main,
            Role::Side => self.side,
            Role::Dessert => self.dessert,
            Role::Beverage => self.beverage,
        }
    }

    pub fn set(&mut self, role: Role, w: f64) {
        match role {
            Role::Main => self.main = w,
            Role::Side => self.side = w,
            Role::Dessert => self.dessert = w,
            Role::Beverage => self.beverage = w,
        }
    }
}

/// Weights of dm, mc and uc in the goodness score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodnessWeights {
    pub dm: f64,
    pub mc: f64,
    pub uc: f64,
}

impl Default for GoodnessWeights {
    fn default() -> Self {
        Self {
            dm: 1.0 / 3.0,
            mc: 1.0 / 3.0,
            uc: 1.0 / 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub prefs: BTreeMap<String, Preference>,
    #[serde(default)]
    pub role_weights: RoleWeights,
    #[serde(default)]
    pub goodness_weights: GoodnessWeights,
    #[serde(default)]
    pub penalize_missing_positive: bool,
    #[serde(default)]
    pub condition: Condition,
}

impl UserProfile {
    /// A profile with every flag neutral and default weights.
    pub fn neutral(user_id: impl Into<String>, flag_names: &[String]) -> Self {
        Self {
            user_id: user_id.into(),
            prefs: flag_names
                .iter()
                .map(|n| (n.clone(), Preference::Neutral))
                .collect(),
            role_weights: RoleWeights::default(),
            goodness_weights: GoodnessWeights::default(),
            penalize_missing_positive: false,
            condition: Condition::Healthy,
        }
    }

    pub fn with_pref(mut self, flag: &str, pref: Preference) -> Self {
        self.prefs.insert(flag.into(), pref);
        self
    }

    pub fn validate(&self, flag_names: &[String]) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.user_id.trim().is_empty() {
            out.push(Violation::new("user_id", "user_id must be non-empty"));
        }
        for name in flag_names {
            if !self.prefs.contains_key(name) {
                out.push(Violation::new(
                    format!("prefs.{name}"),
                    "missing preference for flag",
                ));
            }
        }
        for name in self.prefs.keys() {
            if !flag_names.contains(name) {
                out.push(Violation::new(format!("prefs.{name}"), "unknown flag"));
            }
        }
        for role in Role::ALL {
            let w = self.role_weights.get(role);
            if !w.is_finite() || w < 0.0 {
                out.push(Violation::new(
                    format!("role_weights.{role}"),
                    "role weight must be a non-negative number",
                ));
            }
        }
        let g = self.goodness_weights;
        if [g.dm, g.mc, g.uc].iter().any(|w| !w.is_finite() || *w < 0.0) {
            out.push(Violation::new(
                "goodness_weights",
                "goodness_weights must be non-negative",
            ));
        }
        let sum = g.dm + g.mc + g.uc;
        if !sum.is_finite() || (sum - 1.0).abs() > 1e-9 {
            out.push(Violation::new(
                "goodness_weights",
                "goodness_weights must sum to 1",
            ));
        }
        out
    }
}

/// A profile validated against a dataset, with preferences aligned to the
/// dataset's flag order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileView {
    pub user_id: String,
    pub prefs: Vec<Preference>,
    pub role_weights: RoleWeights,
    pub goodness_weights: GoodnessWeights,
    pub penalize_missing_positive: bool,
}

impl ProfileView {
    pub fn new(profile: &UserProfile, flag_names: &[String]) -> Result<Self, Error> {
        let violations = profile.validate(flag_names);
        if !violations.is_empty() {
            return Err(Error::InvalidProfile(violations));
        }
        Ok(Self {
            user_id: profile.user_id.clone(),
            prefs: flag_names.iter().map(|n| profile.prefs[n]).collect(),
            role_weights: profile.role_weights,
            goodness_weights: profile.goodness_weights,
            penalize_missing_positive: profile.penalize_missing_positive,
        })
    }

    pub fn is_requested(&self, role: Role) -> bool {
        self.role_weights.get(role) > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MealAssignment {
    pub meal: MealKind,
    /// Recipe ids aligned with the meal's slots.
    pub items: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayPlan {
    pub meals: Vec<MealAssignment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MealPlan {
    pub user_id: String,
    pub days: Vec<DayPlan>,
}

impl MealPlan {
    pub fn meals(&self) -> impl Iterator<Item = (usize, &MealAssignment)> {
        self.days
            .iter()
            .enumerate()
            .flat_map(|(d, day)| day.meals.iter().map(move |m| (d, m)))
    }

    pub fn item_count(&self) -> usize {
        self.meals().map(|(_, m)| m.items.len()).sum()
    }
}

/// Referential and shape checks of a plan against a dataset and day layout.
pub fn validate_plan(plan: &MealPlan, ds: &RecipeDataset, cfg: &DayConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = plan.days.len();
    if !(usize::from(MIN_HORIZON_DAYS)..=usize::from(MAX_HORIZON_DAYS)).contains(&n) {
        out.push(Violation::new(
            "days",
            format!("plan covers {n} days, expected 1 to 5"),
        ));
    }
    for (d, day) in plan.days.iter().enumerate() {
        if day.meals.len() != cfg.meals.len() {
            out.push(Violation::new(
                format!("days[{d}].meals"),
                format!(
                    "shape mismatch: {} meals, expected {}",
                    day.meals.len(),
                    cfg.meals.len()
                ),
            ));
        }
        for (m, (meal, spec)) in day.meals.iter().zip(&cfg.meals).enumerate() {
            if meal.meal != spec.meal {
                out.push(Violation::new(
                    format!("days[{d}].meals[{m}].meal"),
                    format!("shape mismatch: expected {}, found {}", spec.meal, meal.meal),
                ));
            }
            if meal.items.len() != spec.slots.len() {
                out.push(Violation::new(
                    format!("days[{d}].meals[{m}].items"),
                    format!(
                        "shape mismatch: {} items for {} slots",
                        meal.items.len(),
                        spec.slots.len()
                    ),
                ));
            }
        }
        for (m, meal) in day.meals.iter().enumerate() {
            for (s, id) in meal.items.iter().enumerate() {
                if ds.position(id).is_none() {
                    out.push(Violation::new(
                        format!("days[{d}].meals[{m}].items[{s}]"),
                        format!("unknown recipe id `{id}`"),
                    ));
                }
            }
        }
    }
    out
}
