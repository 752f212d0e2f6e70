//! Recipe model, structural validation and per-category statistics.
//!
//! Documents are deserialized into the loosely typed [`RawDataset`] /
//! [`RawRecipe`] shapes first so that every rule violation can be reported
//! with its recipe id and field name, instead of failing on the first
//! type error. [`RecipeDataset::from_raw`] then produces the validated,
//! strongly typed dataset.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Violation};
use crate::numeric::round_half_up;

/// The function an item plays in a meal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Main,
    Side,
    Dessert,
    Beverage,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Main, Role::Side, Role::Dessert, Role::Beverage];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Main => "main",
            Role::Side => "side",
            Role::Dessert => "dessert",
            Role::Beverage => "beverage",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownRole(pub String);

impl fmt::Display for UnknownRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unknown role `{}` (expected main, side, dessert or beverage)",
            self.0
        )
    }
}

impl FromStr for Role {
    type Err = UnknownRole;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "main" => Ok(Role::Main),
            "side" => Ok(Role::Side),
            "dessert" => Ok(Role::Dessert),
            "beverage" => Ok(Role::Beverage),
            other => Err(UnknownRole(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ingredient {
    pub name: String,
    pub amount: f64,
    pub unit: String,
}

/// One atomic preparation step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionStep {
    pub index: u32,
    pub action: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_seconds: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tools: Option<Vec<String>>,
    /// Opaque URIs; never dereferenced.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_refs: Option<Vec<String>>,
}

/// A validated recipe. `flags` is aligned with the owning dataset's
/// `flag_names`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recipe {
    pub id: String,
    pub name: String,
    pub category: String,
    pub ingredients: Vec<Ingredient>,
    pub steps: Vec<InstructionStep>,
    pub roles: Vec<Role>,
    pub flags: Vec<bool>,
}

impl Recipe {
    pub fn has_role(&self, role: Role) -> bool {
        self.roles.contains(&role)
    }

    pub fn to_raw(&self, flag_names: &[String]) -> RawRecipe {
        RawRecipe {
            id: self.id.clone(),
            name: self.name.clone(),
            category: self.category.clone(),
            ingredients: self.ingredients.clone(),
            steps: self
                .steps
                .iter()
                .map(|s| RawStep {
                    index: i64::from(s.index),
                    action: s.action.clone(),
                    inputs: s.inputs.clone(),
                    outputs: s.outputs.clone(),
                    duration_seconds: s.duration_seconds.map(|d| d as i64),
                    tools: s.tools.clone(),
                    media_refs: s.media_refs.clone(),
                })
                .collect(),
            roles: self.roles.iter().map(|r| r.as_str().to_owned()).collect(),
            flags: flag_names
                .iter()
                .cloned()
                .zip(self.flags.iter().copied())
                .collect(),
        }
    }
}

/// Syntactically parsed recipe document, before rule checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRecipe {
    pub id: String,
    pub name: String,
    pub category: String,
    pub ingredients: Vec<Ingredient>,
    #[serde(default)]
    pub steps: Vec<RawStep>,
    pub roles: Vec<String>,
    pub flags: BTreeMap<String, bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawStep {
    pub index: i64,
    pub action: String,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_seconds: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tools: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_refs: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDataset {
    pub flag_names: Vec<String>,
    pub recipes: Vec<RawRecipe>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadMode {
    /// Every recipe must carry at least one instruction step.
    #[default]
    Full,
    /// Steps may be empty; nothing downstream of loading reads them.
    MetadataOnly,
}

fn blank(s: &str) -> bool {
    s.trim().is_empty()
}

/// Check every recipe, ingredient and step rule. Violations are returned,
/// never raised; an empty list means the recipe is valid.
pub fn validate_recipe(raw: &RawRecipe, flag_names: &[String], mode: LoadMode) -> Vec<Violation> {
    let mut out = Vec::new();
    if blank(&raw.id) {
        out.push(Violation::new("id", "id must be non-empty"));
    }
    if blank(&raw.name) {
        out.push(Violation::new("name", "name must be non-empty"));
    }
    if blank(&raw.category) {
        out.push(Violation::new("category", "category must be non-empty"));
    }

    for (i, ing) in raw.ingredients.iter().enumerate() {
        if blank(&ing.name) {
            out.push(Violation::new(
                format!("ingredients[{i}].name"),
                "name must be non-empty",
            ));
        }
        if blank(&ing.unit) {
            out.push(Violation::new(
                format!("ingredients[{i}].unit"),
                "unit must be non-empty",
            ));
        }
        if !ing.amount.is_finite() || ing.amount < 0.0 {
            out.push(Violation::new(
                format!("ingredients[{i}].amount"),
                "amount must be ≥ 0",
            ));
        }
    }

    if raw.steps.is_empty() && mode == LoadMode::Full {
        out.push(Violation::new(
            "steps",
            "steps must be non-empty in full mode",
        ));
    }
    if raw
        .steps
        .iter()
        .enumerate()
        .any(|(i, s)| s.index != i as i64 + 1)
    {
        out.push(Violation::new("steps", "steps not consecutive"));
    }
    for (i, step) in raw.steps.iter().enumerate() {
        if blank(&step.action) {
            out.push(Violation::new(
                format!("steps[{i}].action"),
                "action must be non-empty",
            ));
        }
        if step.inputs.iter().any(|n| blank(n)) {
            out.push(Violation::new(
                format!("steps[{i}].inputs"),
                "entity names must be non-empty",
            ));
        }
        if step.outputs.iter().any(|n| blank(n)) {
            out.push(Violation::new(
                format!("steps[{i}].outputs"),
                "entity names must be non-empty",
            ));
        }
        if step.duration_seconds.is_some_and(|d| d < 0) {
            out.push(Violation::new(
                format!("steps[{i}].duration_seconds"),
                "duration must be ≥ 0",
            ));
        }
    }

    if raw.roles.is_empty() {
        out.push(Violation::new("roles", "roles must be non-empty"));
    }
    let mut seen = BTreeSet::new();
    for token in &raw.roles {
        match token.parse::<Role>() {
            Ok(role) => {
                if !seen.insert(role) {
                    out.push(Violation::new(
                        "roles",
                        format!("role `{role}` listed twice"),
                    ));
                }
            }
            Err(e) => out.push(Violation::new("roles", e.to_string())),
        }
    }

    for name in flag_names {
        if !raw.flags.contains_key(name) {
            out.push(Violation::new("flags", format!("missing flag `{name}`")));
        }
    }
    for name in raw.flags.keys() {
        if !flag_names.contains(name) {
            out.push(Violation::new("flags", format!("undeclared flag `{name}`")));
        }
    }
    out
}

/// An immutable, validated collection of recipes.
#[derive(Debug, Clone, PartialEq)]
pub struct RecipeDataset {
    flag_names: Vec<String>,
    recipes: Vec<Recipe>,
    by_id: BTreeMap<String, usize>,
}

impl RecipeDataset {
    /// Validate a parsed document. On success also returns warnings that do
    /// not prevent loading (currently: roles no recipe can fill).
    pub fn from_raw(raw: RawDataset, mode: LoadMode) -> Result<(Self, Vec<String>), Error> {
        let mut header = Vec::new();
        let mut names = BTreeSet::new();
        for (i, name) in raw.flag_names.iter().enumerate() {
            if blank(name) {
                header.push(Violation::new(
                    format!("flag_names[{i}]"),
                    "flag name must be non-empty",
                ));
            } else if !names.insert(name.as_str()) {
                header.push(Violation::new(
                    format!("flag_names[{i}]"),
                    format!("flag `{name}` declared twice"),
                ));
            }
        }
        if !header.is_empty() {
            return Err(Error::Schema(header));
        }

        let mut by_id = BTreeMap::new();
        let mut violations = Vec::new();
        for (pos, r) in raw.recipes.iter().enumerate() {
            if by_id.insert(r.id.clone(), pos).is_some() {
                return Err(Error::DuplicateId(r.id.clone()));
            }
            let label = if blank(&r.id) {
                format!("recipes[{pos}]")
            } else {
                format!("recipe `{}`", r.id)
            };
            for v in validate_recipe(r, &raw.flag_names, mode) {
                violations.push(Violation::new(format!("{label}.{}", v.field), v.rule));
            }
        }
        if !violations.is_empty() {
            return Err(Error::Schema(violations));
        }

        let recipes: Vec<Recipe> = raw
            .recipes
            .into_iter()
            .map(|r| Recipe {
                flags: raw.flag_names.iter().map(|n| r.flags[n]).collect(),
                roles: r.roles.iter().map(|t| t.parse().expect("validated")).collect(),
                steps: r
                    .steps
                    .into_iter()
                    .map(|s| InstructionStep {
                        index: s.index as u32,
                        action: s.action,
                        inputs: s.inputs,
                        outputs: s.outputs,
                        duration_seconds: s.duration_seconds.map(|d| d as u64),
                        tools: s.tools,
                        media_refs: s.media_refs,
                    })
                    .collect(),
                id: r.id,
                name: r.name,
                category: r.category,
                ingredients: r.ingredients,
            })
            .collect();

        let ds = Self {
            flag_names: raw.flag_names,
            recipes,
            by_id,
        };
        let warnings = ds
            .missing_roles()
            .into_iter()
            .map(|role| format!("no recipe can fill a `{role}` slot"))
            .collect();
        Ok((ds, warnings))
    }

    pub fn to_raw(&self) -> RawDataset {
        RawDataset {
            flag_names: self.flag_names.clone(),
            recipes: self
                .recipes
                .iter()
                .map(|r| r.to_raw(&self.flag_names))
                .collect(),
        }
    }

    pub fn flag_names(&self) -> &[String] {
        &self.flag_names
    }

    pub fn flag_index(&self, name: &str) -> Option<usize> {
        self.flag_names.iter().position(|n| n == name)
    }

    pub fn recipes(&self) -> &[Recipe] {
        &self.recipes
    }

    pub fn len(&self) -> usize {
        self.recipes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recipes.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Recipe> {
        self.position(id).map(|i| &self.recipes[i])
    }

    /// Roles that no recipe in the dataset carries.
    pub fn missing_roles(&self) -> Vec<Role> {
        Role::ALL
            .into_iter()
            .filter(|&role| !self.recipes.iter().any(|r| r.has_role(role)))
            .collect()
    }

    /// Categories in first-appearance order.
    pub fn categories(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.recipes {
            if !out.contains(&r.category) {
                out.push(r.category.clone());
            }
        }
        out
    }
}

/// One row of the per-category flag table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub category: String,
    /// `(flag name, percentage)` in dataset flag order, rounded to 2 decimals.
    pub flag_pct: Vec<(String, f64)>,
    pub count: usize,
}

impl CategoryStats {
    pub fn pct(&self, flag: &str) -> Option<f64> {
        self.flag_pct
            .iter()
            .find(|(name, _)| name == flag)
            .map(|&(_, p)| p)
    }
}

/// Percentage of recipes carrying each flag, per category.
pub fn dataset_stats(ds: &RecipeDataset) -> Result<Vec<CategoryStats>, Error> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(ds
        .categories()
        .into_iter()
        .map(|category| {
            let members: Vec<&Recipe> = ds
                .recipes()
                .iter()
                .filter(|r| r.category == category)
                .collect();
            let n = members.len();
            let flag_pct = ds
                .flag_names()
                .iter()
                .enumerate()
                .map(|(f, name)| {
                    let with = members.iter().filter(|r| r.flags[f]).count();
                    (name.clone(), round_half_up(100.0 * with as f64 / n as f64, 2))
                })
                .collect();
            CategoryStats {
                category,
                flag_pct,
                count: n,
            }
        })
        .collect())
}
