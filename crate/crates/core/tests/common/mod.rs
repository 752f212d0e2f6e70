#![allow(dead_code)]

use mealrec_core::{LoadMode, RawDataset, RecipeDataset};

pub const FIXTURE: &str = include_str!("../../../mealrec/data/fixture_recipes.json");

pub fn fixture() -> RecipeDataset {
    let raw: RawDataset = serde_json::from_str(FIXTURE).expect("fixture parses");
    let (ds, warnings) = RecipeDataset::from_raw(raw, LoadMode::Full).expect("fixture is valid");
    assert!(warnings.is_empty(), "{warnings:?}");
    ds
}
