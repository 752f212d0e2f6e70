use std::fs;

use mealrec::dataset::{load_dataset, parse_dataset, to_json, LoadError, FIXTURE_JSON};
use mealrec_core::{Error, LoadMode, RawDataset, Role};
use serde_json::{json, Value};

const SCHEMA: &str = include_str!("../../../schema/recipe-dataset.schema.json");

fn fixture_value() -> Value {
    serde_json::from_str(FIXTURE_JSON).unwrap()
}

fn parse_value(v: &Value, mode: LoadMode) -> Result<mealrec::Loaded, LoadError> {
    parse_dataset(&v.to_string(), "test.json", mode)
}

#[test]
fn fixture_loads_in_full_mode() {
    let loaded = parse_dataset(FIXTURE_JSON, "fixture", LoadMode::Full).unwrap();
    assert_eq!(loaded.dataset.len(), 50);
    assert!(loaded.warnings.is_empty(), "{:?}", loaded.warnings);
    assert!(loaded.dataset.missing_roles().is_empty());
    assert_eq!(
        loaded.dataset.flag_names(),
        ["hasDairy", "hasMeat", "hasNuts"].map(String::from)
    );
}

#[test]
fn duplicate_id_is_named() {
    let mut v = fixture_value();
    let recipes = v["recipes"].as_array_mut().unwrap();
    let fries = recipes
        .iter()
        .find(|r| r["id"] == "mc_fries")
        .expect("fixture has mc_fries")
        .clone();
    recipes.push(fries);
    match parse_value(&v, LoadMode::Full) {
        Err(LoadError::Invalid {
            source: Error::DuplicateId(id),
            ..
        }) => assert_eq!(id, "mc_fries"),
        other => panic!("expected duplicate id, got {other:?}"),
    }
    let msg = parse_value(&v, LoadMode::Full).unwrap_err().to_string();
    assert!(msg.contains("mc_fries"), "{msg}");
}

#[test]
fn empty_roles_is_a_schema_violation() {
    let mut v = fixture_value();
    v["recipes"][3]["roles"] = json!([]);
    let id = v["recipes"][3]["id"].as_str().unwrap().to_string();
    let err = parse_value(&v, LoadMode::Full).unwrap_err();
    assert!(!err.is_io());
    let msg = err.to_string();
    assert!(msg.contains("roles must be non-empty"), "{msg}");
    assert!(msg.contains(&id), "{msg}");
    assert!(msg.contains("roles"), "{msg}");
}

#[test]
fn missing_steps_need_metadata_mode() {
    let mut v = fixture_value();
    v["recipes"][0].as_object_mut().unwrap().remove("steps");
    let err = parse_value(&v, LoadMode::Full).unwrap_err().to_string();
    assert!(err.contains("steps"), "{err}");
    let loaded = parse_value(&v, LoadMode::MetadataOnly).unwrap();
    assert_eq!(loaded.dataset.len(), 50);
}

#[test]
fn round_trip_is_lossless() {
    let ds = parse_dataset(FIXTURE_JSON, "fixture", LoadMode::Full)
        .unwrap()
        .dataset;
    let text = to_json(&ds);
    let again = parse_dataset(&text, "again", LoadMode::Full).unwrap().dataset;
    assert_eq!(ds, again);
    let a: RawDataset = serde_json::from_str(FIXTURE_JSON).unwrap();
    let b: RawDataset = serde_json::from_str(&text).unwrap();
    assert_eq!(a, b);
}

#[test]
fn parse_errors_carry_line_and_column() {
    let text = "{\n  \"flag_names\": [\"hasNuts\"],\n  \"recipes\": [ oops ]\n}";
    match parse_dataset(text, "broken.json", LoadMode::Full) {
        Err(LoadError::Parse {
            origin,
            line,
            column,
            message,
        }) => {
            assert_eq!(origin, "broken.json");
            assert_eq!(line, 3);
            assert!(column > 0);
            assert!(!message.contains(" at line "), "{message}");
        }
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn unknown_fields_are_rejected() {
    let mut v = fixture_value();
    v["recipes"][0]["Roles"] = json!(["main"]);
    assert!(matches!(
        parse_value(&v, LoadMode::Full),
        Err(LoadError::Parse { .. })
    ));
}

#[test]
fn missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_dataset(&dir.path().join("absent.json"), LoadMode::Full).unwrap_err();
    assert!(err.is_io());
}

#[test]
fn files_load_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    fs::write(&path, FIXTURE_JSON).unwrap();
    assert_eq!(load_dataset(&path, LoadMode::Full).unwrap().dataset.len(), 50);
}

fn validator() -> jsonschema::Validator {
    let schema: Value = serde_json::from_str(SCHEMA).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn field_names(v: &Value) -> Vec<String> {
    let mut k: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
    k.sort();
    k
}

#[test]
fn schema_matches_serde_fields() {
    let schema: Value = serde_json::from_str(SCHEMA).unwrap();
    let defs = &schema["$defs"];
    let v = fixture_value();
    assert_eq!(field_names(&schema["properties"]), field_names(&v));

    let mut recipe_keys = field_names(&defs["recipe"]["properties"]);
    recipe_keys.sort();
    let all_recipe_fields = {
        let mut keys = std::collections::BTreeSet::new();
        for r in v["recipes"].as_array().unwrap() {
            keys.extend(r.as_object().unwrap().keys().cloned());
        }
        keys.into_iter().collect::<Vec<_>>()
    };
    assert_eq!(recipe_keys, all_recipe_fields);

    let step_props = field_names(&defs["step"]["properties"]);
    for r in v["recipes"].as_array().unwrap() {
        for s in r["steps"].as_array().unwrap() {
            for k in field_names(s) {
                assert!(step_props.contains(&k), "step field {k} not in schema");
            }
        }
    }
    assert_eq!(
        field_names(&defs["ingredient"]["properties"]),
        ["amount", "name", "unit"]
    );

    let roles: Vec<&str> = defs["role"]["enum"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r.as_str().unwrap())
        .collect();
    let ours: Vec<&str> = Role::ALL.iter().map(|r| r.as_str()).collect();
    assert_eq!(roles, ours);
}

#[test]
fn fixture_conforms_to_schema() {
    let v = fixture_value();
    let errors: Vec<String> = validator().iter_errors(&v).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

/// Documents the schema rejects are rejected by the loader as well.
#[test]
fn schema_and_loader_agree_on_broken_documents() {
    type Mutation = fn(&mut Value);
    let cases: [(&str, Mutation); 9] = [
        ("empty roles", |v| v["recipes"][0]["roles"] = json!([])),
        ("unknown role", |v| v["recipes"][0]["roles"] = json!(["Main"])),
        ("repeated role", |v| v["recipes"][0]["roles"] = json!(["main", "main"])),
        ("negative amount", |v| {
            v["recipes"][0]["ingredients"][0]["amount"] = json!(-1.0)
        }),
        ("blank id", |v| v["recipes"][0]["id"] = json!("  ")),
        ("step index 0", |v| v["recipes"][0]["steps"][0]["index"] = json!(0)),
        ("extra field", |v| v["recipes"][0]["rating"] = json!(5)),
        ("flag as string", |v| v["recipes"][0]["flags"]["hasNuts"] = json!("no")),
        ("missing category", |v| {
            v["recipes"][0].as_object_mut().unwrap().remove("category");
        }),
    ];
    let schema = validator();
    for (name, mutate) in cases {
        let mut v = fixture_value();
        mutate(&mut v);
        assert!(!schema.is_valid(&v), "schema accepted {name}");
        assert!(
            parse_value(&v, LoadMode::Full).is_err(),
            "loader accepted {name}"
        );
    }
}
