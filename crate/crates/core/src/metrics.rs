//! Plan goodness: duplicate (dm), meal coverage (mc) and user-constraint
//! (uc) scores, their averaged combinations, and the weighted score G.
//!
//! All three base metrics are per-meal scores averaged over every meal of
//! the plan (a 3-day plan averages 9 meals). Day-level repetition of an
//! item across meals does not enter dm; it is reported separately as
//! `role_dup_diag`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::domain::{validate_plan, DayConfig, MealKind, MealPlan, MealSlotSpec, Preference, ProfileView};
use crate::error::Error;
use crate::recipe::{Recipe, RecipeDataset};

/// Ratio of unique items to total items in one meal.
pub fn meal_duplicate_score<T: Ord>(items: &[T]) -> Result<f64, Error> {
    if items.is_empty() {
        return Err(Error::EmptyMeal);
    }
    let mut sorted: Vec<&T> = items.iter().collect();
    sorted.sort_unstable();
    sorted.dedup();
    Ok(sorted.len() as f64 / items.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuplicateScores {
    pub dm: f64,
    pub role_dup_diag: f64,
}

/// Mean per-meal duplicate score, plus the per-day unique ratio as a
/// diagnostic.
pub fn duplicate_metric(plan: &MealPlan) -> Result<DuplicateScores, Error> {
    if plan.days.is_empty() {
        return Err(Error::InvalidPlan(alloc::vec![crate::Violation::new(
            "days",
            "plan has no days"
        )]));
    }
    let mut meal_scores = Vec::new();
    let mut day_scores = Vec::with_capacity(plan.days.len());
    for day in &plan.days {
        let mut all = Vec::new();
        for meal in &day.meals {
            meal_scores.push(meal_duplicate_score(&meal.items)?);
            all.extend(meal.items.iter());
        }
        day_scores.push(meal_duplicate_score(&all)?);
    }
    Ok(DuplicateScores {
        dm: mean(&meal_scores),
        role_dup_diag: mean(&day_scores),
    })
}

fn violates_avoided(recipe: &Recipe, view: &ProfileView) -> bool {
    view.prefs
        .iter()
        .zip(&recipe.flags)
        .any(|(&p, &has)| has && p == Preference::Avoid)
}

/// Coverage of one meal: each requested slot earns +1 when filled by an item
/// carrying the slot's role and no avoided flag, and -1 otherwise. The sum
/// is clamped at 0 and divided by the number of requested slots (slots whose
/// role weight is positive). A meal with no requested slot scores 1.
pub fn meal_coverage_score(
    spec: &MealSlotSpec,
    assigned: &[&Recipe],
    view: &ProfileView,
) -> Result<f64, Error> {
    if assigned.len() != spec.slots.len() {
        return Err(Error::ShapeMismatch {
            expected: spec.slots.len(),
            found: assigned.len(),
        });
    }
    let mut requested = 0i64;
    let mut total = 0i64;
    for (&role, recipe) in spec.slots.iter().zip(assigned) {
        if !view.is_requested(role) {
            continue;
        }
        requested += 1;
        if recipe.has_role(role) && !violates_avoided(recipe, view) {
            total += 1;
        } else {
            total -= 1;
        }
    }
    if requested == 0 {
        return Ok(1.0);
    }
    Ok(total.max(0) as f64 / requested as f64)
}

/// Fraction of active preference checks a meal satisfies (1 when none are
/// active). A meal contains a flag if any of its items does.
pub fn meal_constraint_score(assigned: &[&Recipe], view: &ProfileView) -> f64 {
    let mut active = 0u32;
    let mut satisfied = 0u32;
    for (f, &pref) in view.prefs.iter().enumerate() {
        let contains = assigned.iter().any(|r| r.flags[f]);
        match pref {
            Preference::Neutral => {}
            Preference::Avoid => {
                active += 1;
                if !contains {
                    satisfied += 1;
                }
            }
            Preference::Prefer => {
                if contains {
                    active += 1;
                    satisfied += 1;
                } else if view.penalize_missing_positive {
                    active += 1;
                }
            }
        }
    }
    if active == 0 {
        1.0
    } else {
        f64::from(satisfied) / f64::from(active)
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Resolve every meal of a valid plan to its recipes.
fn resolve<'d>(
    plan: &MealPlan,
    ds: &'d RecipeDataset,
    cfg: &DayConfig,
) -> Result<Vec<Vec<&'d Recipe>>, Error> {
    let violations = validate_plan(plan, ds, cfg);
    if !violations.is_empty() {
        return Err(Error::InvalidPlan(violations));
    }
    Ok(plan
        .meals()
        .map(|(_, m)| {
            m.items
                .iter()
                .map(|id| ds.get(id).expect("validated"))
                .collect()
        })
        .collect())
}

pub fn coverage_metric(
    plan: &MealPlan,
    ds: &RecipeDataset,
    cfg: &DayConfig,
    view: &ProfileView,
) -> Result<f64, Error> {
    let meals = resolve(plan, ds, cfg)?;
    let specs = cfg.meals.iter().cycle();
    let scores = meals
        .iter()
        .zip(specs)
        .map(|(items, spec)| meal_coverage_score(spec, items, view))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(mean(&scores))
}

pub fn constraint_metric(
    plan: &MealPlan,
    ds: &RecipeDataset,
    cfg: &DayConfig,
    view: &ProfileView,
) -> Result<f64, Error> {
    let meals = resolve(plan, ds, cfg)?;
    let scores: Vec<f64> = meals
        .iter()
        .map(|items| meal_constraint_score(items, view))
        .collect();
    Ok(mean(&scores))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MealScore {
    pub day: usize,
    pub meal: MealKind,
    pub md: f64,
    pub cs: f64,
    pub uc: f64,
}

/// Averaged pairs and triple of the base metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Combos {
    pub uc_dm: f64,
    pub uc_mc: f64,
    pub dm_mc: f64,
    pub uc_dm_mc: f64,
}

impl Combos {
    pub fn of(dm: f64, mc: f64, uc: f64) -> Self {
        Self {
            uc_dm: (uc + dm) / 2.0,
            uc_mc: (uc + mc) / 2.0,
            dm_mc: (dm + mc) / 2.0,
            uc_dm_mc: (uc + dm + mc) / 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub per_meal: Vec<MealScore>,
    pub dm: f64,
    pub mc: f64,
    pub uc: f64,
    pub combos: Combos,
    #[serde(rename = "G")]
    pub goodness: f64,
    /// Day-level unique ratio; diagnostic only, not part of G.
    pub role_dup_diag: f64,
}

pub fn score_plan(
    plan: &MealPlan,
    ds: &RecipeDataset,
    cfg: &DayConfig,
    view: &ProfileView,
) -> Result<ScoreReport, Error> {
    let meals = resolve(plan, ds, cfg)?;
    let mut per_meal = Vec::with_capacity(meals.len());
    for ((day, assignment), (items, spec)) in plan
        .meals()
        .zip(meals.iter().zip(cfg.meals.iter().cycle()))
    {
        per_meal.push(MealScore {
            day,
            meal: assignment.meal,
            md: meal_duplicate_score(&assignment.items)?,
            cs: meal_coverage_score(spec, items, view)?,
            uc: meal_constraint_score(items, view),
        });
    }
    let dup = duplicate_metric(plan)?;
    let dm = mean(&per_meal.iter().map(|m| m.md).collect::<Vec<_>>());
    let mc = mean(&per_meal.iter().map(|m| m.cs).collect::<Vec<_>>());
    let uc = mean(&per_meal.iter().map(|m| m.uc).collect::<Vec<_>>());
    let w = view.goodness_weights;
    Ok(ScoreReport {
        per_meal,
        dm,
        mc,
        uc,
        combos: Combos::of(dm, mc, uc),
        goodness: w.dm * dm + w.mc * mc + w.uc * uc,
        role_dup_diag: dup.role_dup_diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{default_day_config, DayPlan, MealAssignment, RoleWeights, UserProfile};
    use crate::recipe::Role;
    use alloc::string::String;
    use alloc::vec;

    fn recipe(id: &str, roles: &[Role], flags: [bool; 3]) -> Recipe {
        Recipe {
            id: id.into(),
            name: id.into(),
            category: "X".into(),
            ingredients: vec![],
            steps: vec![],
            roles: roles.to_vec(),
            flags: flags.to_vec(),
        }
    }

    fn flag_names() -> Vec<String> {
        vec!["hasDairy".into(), "hasMeat".into(), "hasNuts".into()]
    }

    fn view(prefs: [i64; 3]) -> ProfileView {
        let mut p = UserProfile::neutral("u", &flag_names());
        for (name, v) in flag_names().iter().zip(prefs) {
            p.prefs.insert(name.clone(), Preference::try_from(v).unwrap());
        }
        ProfileView::new(&p, &flag_names()).unwrap()
    }

    #[test]
    fn duplicate_score_examples() {
        assert_eq!(meal_duplicate_score(&["A", "B", "C"]).unwrap(), 1.0);
        assert!((meal_duplicate_score(&["A", "A", "B"]).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(meal_duplicate_score(&["A", "A", "A", "A"]).unwrap(), 0.25);
        assert_eq!(meal_duplicate_score::<&str>(&[]), Err(Error::EmptyMeal));
    }

    fn day(b: [&str; 2], l: [&str; 3], d: [&str; 4]) -> MealPlan {
        let ids = |xs: &[&str]| xs.iter().map(|s| String::from(*s)).collect::<Vec<_>>();
        MealPlan {
            user_id: "u".into(),
            days: vec![DayPlan {
                meals: vec![
                    MealAssignment {
                        meal: MealKind::Breakfast,
                        items: ids(&b),
                    },
                    MealAssignment {
                        meal: MealKind::Lunch,
                        items: ids(&l),
                    },
                    MealAssignment {
                        meal: MealKind::Dinner,
                        items: ids(&d),
                    },
                ],
            }],
        }
    }

    #[test]
    fn duplicate_metric_examples() {
        let s = duplicate_metric(&day(["a", "b"], ["c", "d", "e"], ["f", "g", "h", "i"])).unwrap();
        assert_eq!((s.dm, s.role_dup_diag), (1.0, 1.0));

        let s = duplicate_metric(&day(["a", "b"], ["A", "A", "e"], ["f", "g", "h", "i"])).unwrap();
        assert!((s.dm - 8.0 / 9.0).abs() < 1e-12);

        let s = duplicate_metric(&day(["a", "B"], ["c", "d", "B"], ["f", "g", "h", "B"])).unwrap();
        assert_eq!(s.dm, 1.0);
        assert!((s.role_dup_diag - 7.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn coverage_examples() {
        let cfg = default_day_config();
        let main = recipe("m", &[Role::Main], [false; 3]);
        let bev = recipe("b", &[Role::Beverage], [false; 3]);
        let v = view([0, 0, 0]);
        assert_eq!(meal_coverage_score(&cfg.meals[0], &[&main, &bev], &v).unwrap(), 1.0);
        assert_eq!(meal_coverage_score(&cfg.meals[0], &[&main, &main], &v).unwrap(), 0.0);

        let side = recipe("s", &[Role::Side], [false; 3]);
        let nutty = recipe("n", &[Role::Dessert], [false, false, true]);
        let avoid_nuts = view([0, 0, -1]);
        let dinner = [&main, &side, &nutty, &bev];
        assert_eq!(meal_coverage_score(&cfg.meals[2], &dinner, &avoid_nuts).unwrap(), 0.5);

        assert_eq!(
            meal_coverage_score(&cfg.meals[2], &[&main], &v),
            Err(Error::ShapeMismatch {
                expected: 4,
                found: 1
            })
        );
    }

    #[test]
    fn zero_role_weight_drops_slot() {
        let cfg = default_day_config();
        let main = recipe("m", &[Role::Main], [false; 3]);
        let side = recipe("s", &[Role::Side], [false; 3]);
        let bev = recipe("b", &[Role::Beverage], [false; 3]);
        let mut v = view([0, 0, 0]);
        v.role_weights = RoleWeights {
            dessert: 0.0,
            ..RoleWeights::default()
        };
        // Dessert slot holds a main-only item, but the slot is not requested.
        let dinner = [&main, &side, &main, &bev];
        assert_eq!(meal_coverage_score(&cfg.meals[2], &dinner, &v).unwrap(), 1.0);
    }

    #[test]
    fn constraint_examples() {
        let meat = recipe("m", &[Role::Main], [false, true, false]);
        let plain = recipe("p", &[Role::Main], [false; 3]);
        assert_eq!(meal_constraint_score(&[&meat], &view([0, 0, 0])), 1.0);
        assert_eq!(meal_constraint_score(&[&meat, &plain], &view([0, -1, 0])), 0.0);
        // Dairy preferred but absent: skipped. Nuts avoided and absent: satisfied.
        assert_eq!(meal_constraint_score(&[&plain], &view([1, 0, -1])), 1.0);

        let mut strict = view([1, 0, -1]);
        strict.penalize_missing_positive = true;
        assert_eq!(meal_constraint_score(&[&plain], &strict), 0.5);
    }

    #[test]
    fn combos_are_means() {
        use crate::numeric::fixed;
        let c = Combos::of(0.890, 0.993, 0.875);
        assert_eq!(fixed(c.uc_dm, 3), "0.883");
        assert_eq!(fixed(c.uc_mc, 3), "0.934");
        assert_eq!(fixed(c.dm_mc, 3), "0.942");
        assert_eq!(fixed(c.uc_dm_mc, 3), "0.919");
    }
}
