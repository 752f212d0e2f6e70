use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use mealrec::dataset::fixture;
use mealrec::service::store::ProfileStore;
use mealrec::service::{router, AppState, ServiceConfig};
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

struct Api {
    app: Router,
    dir: TempDir,
}

fn config(episodes: u32) -> ServiceConfig {
    ServiceConfig {
        bandit_episodes: episodes,
        ..ServiceConfig::default()
    }
}

fn api_in(dir: TempDir, episodes: u32) -> Api {
    let store = ProfileStore::open(dir.path()).unwrap();
    let state = AppState::with_parts(config(episodes), fixture(), store);
    Api {
        app: router(Arc::new(state)),
        dir,
    }
}

fn api() -> Api {
    api_in(tempfile::tempdir().unwrap(), 40)
}

impl Api {
    async fn send(&self, method: Method, uri: &str, body: Option<String>) -> (StatusCode, Value) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(body.map_or_else(Body::empty, Body::from))
            .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or_else(|_| {
                Value::String(String::from_utf8_lossy(&bytes).into_owned())
            })
        };
        (status, value)
    }

    async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.send(Method::GET, uri, None).await
    }

    async fn put(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.send(Method::PUT, uri, Some(body.to_string())).await
    }

    async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.send(Method::POST, uri, Some(body.to_string())).await
    }

    async fn profile(&self, user: &str, prefs: Value) {
        let (st, body) = self
            .put(&format!("/profiles/{user}"), json!({ "prefs": prefs }))
            .await;
        assert_eq!(st, StatusCode::OK, "{body}");
    }
}

fn neutral() -> Value {
    json!({"hasDairy": 0, "hasMeat": 0, "hasNuts": 0})
}

fn assert_error(body: &Value, needle: &str) {
    let code = body["code"].as_str().expect("error code");
    assert!(!code.is_empty());
    let msg = body["message"].as_str().expect("error message");
    assert!(msg.contains(needle), "{msg:?} lacks {needle:?}");
}

#[tokio::test]
async fn health_and_config() {
    let api = api();
    let (st, h) = api.get("/health").await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(h["recipes"], 50);
    assert_eq!(h["missing_roles"], json!([]));
    let (st, c) = api.get("/config").await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(c["flag_names"], json!(["hasDairy", "hasMeat", "hasNuts"]));
    assert_eq!(c["horizon"], json!({"min": 1, "max": 5}));
    assert_eq!(c["algorithms"], json!(["random", "sequential", "bandit"]));
}

#[tokio::test]
async fn recipes_list_and_filters() {
    let api = api();
    let (st, all) = api.get("/recipes").await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(all.as_array().unwrap().len(), 50);

    let (_, bev) = api.get("/recipes?role=beverage").await;
    let bev = bev.as_array().unwrap();
    assert!(!bev.is_empty());
    assert!(bev
        .iter()
        .all(|r| r["roles"].as_array().unwrap().contains(&json!("beverage"))));
    let expected = all
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["roles"].as_array().unwrap().contains(&json!("beverage")))
        .count();
    assert_eq!(bev.len(), expected);

    let (_, meatless) = api.get("/recipes?flag=!hasMeat&category=TacoBell").await;
    for r in meatless.as_array().unwrap() {
        assert_eq!(r["flags"]["hasMeat"], false);
        assert_eq!(r["category"], "TacoBell");
    }
    let (st, body) = api.get("/recipes?role=snack").await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_error(&body, "snack");

    let (st, one) = api.get("/recipes/mc_fries").await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(one["id"], "mc_fries");
    let (st, body) = api.get("/recipes/ghost").await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_error(&body, "ghost");
}

#[tokio::test]
async fn profiles_are_versioned_and_validated() {
    let api = api();
    let (st, body) = api.get("/profiles/ann").await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_error(&body, "ann");

    let (st, body) = api
        .put("/profiles/ann", json!({"prefs": {"hasDairy": 2, "hasMeat": 0, "hasNuts": 0}}))
        .await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_error(&body, "preference must be -1, 0, or +1");

    let (st, body) = api
        .put(
            "/profiles/ann",
            json!({"prefs": neutral(), "goodness_weights": {"dm": 0.5, "mc": 0.5, "uc": 0.5}}),
        )
        .await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_error(&body, "goodness_weights must sum to 1");

    let (st, body) = api.put("/profiles/ann", json!({"prefs": {"hasDairy": 0}})).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_error(&body, "hasMeat");

    let (st, body) = api.put("/profiles/ann", json!({"prefs": neutral()})).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(body["version"], 1);
    assert_eq!(body["profile"]["user_id"], "ann");
    let (_, body) = api.put("/profiles/ann", json!({"prefs": neutral()})).await;
    assert_eq!(body["version"], 2);
    let (st, body) = api.get("/profiles/ann").await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(body["version"], 2);

    let (st, _) = api
        .put("/profiles/ann", json!({"user_id": "bob", "prefs": neutral()}))
        .await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = api.send(Method::PUT, "/profiles/ann", None).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = api.get("/profiles/..hidden").await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn plan_errors() {
    let api = api();
    let (st, body) = api
        .post("/plans", json!({"user_id": "nobody", "horizon": 2, "algorithm": "random"}))
        .await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_error(&body, "nobody");

    api.profile("ann", neutral()).await;
    for h in [0, 6, -1] {
        let (st, body) = api
            .post("/plans", json!({"user_id": "ann", "horizon": h, "algorithm": "random"}))
            .await;
        assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY, "horizon {h}");
        assert_eq!(body["code"], "invalid_horizon");
    }
    let (st, _) = api
        .post("/plans", json!({"user_id": "ann", "horizon": 2, "algorithm": "greedy"}))
        .await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn missing_role_gives_503() {
    let dir = tempfile::tempdir().unwrap();
    let mut raw = fixture().to_raw();
    raw.recipes
        .retain(|r| !r.roles.iter().any(|role| role == "dessert"));
    let (ds, _) = mealrec_core::RecipeDataset::from_raw(raw, mealrec_core::LoadMode::Full).unwrap();
    let store = ProfileStore::open(dir.path()).unwrap();
    let app = router(Arc::new(AppState::with_parts(config(10), ds, store)));
    let api = Api { app, dir };
    api.profile("ann", neutral()).await;
    let (st, body) = api
        .post("/plans", json!({"user_id": "ann", "horizon": 1, "algorithm": "random"}))
        .await;
    assert_eq!(st, StatusCode::SERVICE_UNAVAILABLE);
    assert_error(&body, "dessert");
    let (_, h) = api.get("/health").await;
    assert_eq!(h["missing_roles"], json!(["dessert"]));
}

#[tokio::test]
async fn seeded_random_plans_repeat() {
    let api = api();
    api.profile("ann", json!({"hasDairy": 0, "hasMeat": -1, "hasNuts": 1})).await;
    let req = json!({"user_id": "ann", "horizon": 5, "algorithm": "random", "seed": 42});
    let (st, a) = api.post("/plans", req.clone()).await;
    assert_eq!(st, StatusCode::OK, "{a}");
    let (_, b) = api.post("/plans", req).await;
    assert_eq!(a["plan"], b["plan"]);
    assert_ne!(a["plan_id"], b["plan_id"]);
    assert_eq!(a["plan"]["days"].as_array().unwrap().len(), 5);
    let scores = &a["scores"];
    for key in ["dm", "mc", "uc", "G"] {
        let v = scores[key].as_f64().unwrap_or_else(|| panic!("{key} in {scores}"));
        assert!((0.0..=1.0).contains(&v));
    }
    for key in ["uc_dm_mc", "uc_dm", "uc_mc", "dm_mc"] {
        assert!(scores["combos"][key].is_number(), "{key} in {scores}");
    }
}

#[tokio::test]
async fn sequential_plans_continue_per_user() {
    let api = api();
    api.profile("ann", neutral()).await;
    let req = json!({"user_id": "ann", "horizon": 1, "algorithm": "sequential"});
    let (_, a) = api.post("/plans", req.clone()).await;
    let (_, b) = api.post("/plans", req).await;
    let first = |v: &Value| v["plan"]["days"][0]["meals"][0]["items"].clone();
    assert_eq!(first(&a), json!(["mc_big_mac", "mc_vanilla_shake"]));
    assert!(b["scores"]["dm"].as_f64().unwrap() == 1.0);
}

#[tokio::test]
async fn feedback_errors() {
    let api = api();
    api.profile("ann", neutral()).await;

    let (st, _) = api.send(Method::POST, "/feedback", None).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = api.send(Method::POST, "/feedback", Some("{}".into())).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);

    let slot = json!({"day": 0, "meal": "breakfast", "slot": 0, "accept": false});
    let (st, body) = api
        .post("/feedback", json!({"plan_id": "plan-999", "slots": [slot]}))
        .await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_error(&body, "plan-999");

    let (_, random) = api
        .post("/plans", json!({"user_id": "ann", "horizon": 1, "algorithm": "random", "seed": 1}))
        .await;
    let (st, body) = api
        .post("/feedback", json!({"plan_id": random["plan_id"], "slots": [slot]}))
        .await;
    assert_eq!(st, StatusCode::CONFLICT);
    assert_error(&body, "feedback requires bandit plans");

    let (st, bandit) = api
        .post("/plans", json!({"user_id": "ann", "horizon": 1, "algorithm": "bandit"}))
        .await;
    assert_eq!(st, StatusCode::OK, "{bandit}");
    assert_eq!(bandit["model"]["trained_now"], true);
    let id = bandit["plan_id"].clone();
    let (st, _) = api.post("/feedback", json!({"plan_id": id, "slots": []})).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    for bad in [
        json!({"day": 1, "meal": "breakfast", "slot": 0, "accept": true}),
        json!({"day": 0, "meal": "breakfast", "slot": 2, "accept": true}),
        json!({"day": 0, "meal": "brunch", "slot": 0, "accept": true}),
    ] {
        let (st, _) = api.post("/feedback", json!({"plan_id": id, "slots": [bad]})).await;
        assert_eq!(st, StatusCode::BAD_REQUEST);
    }
    let (st, body) = api.post("/feedback", json!({"plan_id": id, "slots": [slot]})).await;
    assert_eq!(st, StatusCode::OK, "{body}");
    assert_eq!(body["applied"], 1);
    assert!(body["model_version"].as_u64().unwrap() > bandit["model"]["version"].as_u64().unwrap());
}

#[tokio::test]
async fn bandit_model_is_persisted_and_reused() {
    let api = api();
    api.profile("ann", json!({"hasDairy": 0, "hasMeat": -1, "hasNuts": 0})).await;
    let req = json!({"user_id": "ann", "horizon": 3, "algorithm": "bandit", "seed": 5});
    let (_, a) = api.post("/plans", req.clone()).await;
    assert_eq!(a["model"]["trained_now"], true);
    assert_eq!(a["model"]["episodes"], 40);
    let (_, b) = api.post("/plans", req.clone()).await;
    assert_eq!(b["model"]["trained_now"], false);
    assert_eq!(a["plan"], b["plan"]);

    // A fresh process over the same store reproduces the greedy plan.
    let Api { dir, .. } = api;
    let restarted = api_in(dir, 40);
    let (_, c) = restarted.post("/plans", req.clone()).await;
    assert_eq!(c["model"]["trained_now"], false);
    assert_eq!(a["plan"], c["plan"]);

    // New preferences invalidate the model.
    restarted
        .profile("ann", json!({"hasDairy": -1, "hasMeat": -1, "hasNuts": 0}))
        .await;
    let (_, d) = restarted.post("/plans", req).await;
    assert_eq!(d["model"]["trained_now"], true);
}

fn meat_items(plan: &Value, meat: &std::collections::HashSet<String>) -> usize {
    plan["days"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|d| d["meals"].as_array().unwrap())
        .flat_map(|m| m["items"].as_array().unwrap())
        .filter(|id| meat.contains(id.as_str().unwrap()))
        .count()
}

#[tokio::test]
async fn rejecting_meat_reduces_meat() {
    let api = api_in(tempfile::tempdir().unwrap(), 200);
    let (_, all) = api.get("/recipes?flag=hasMeat").await;
    let meat: std::collections::HashSet<String> = all
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["id"].as_str().unwrap().to_string())
        .collect();
    api.profile("ann", neutral()).await;

    let req = json!({"user_id": "ann", "horizon": 3, "algorithm": "bandit", "seed": 7});
    let mut counts = Vec::new();
    for _ in 0..=10 {
        let (st, resp) = api.post("/plans", req.clone()).await;
        assert_eq!(st, StatusCode::OK, "{resp}");
        counts.push(meat_items(&resp["plan"], &meat));
        let mut slots = Vec::new();
        for (d, day) in resp["plan"]["days"].as_array().unwrap().iter().enumerate() {
            for m in day["meals"].as_array().unwrap() {
                for (k, id) in m["items"].as_array().unwrap().iter().enumerate() {
                    slots.push(json!({
                        "day": d,
                        "meal": m["meal"],
                        "slot": k,
                        "accept": !meat.contains(id.as_str().unwrap()),
                    }));
                }
            }
        }
        let (st, fb) = api
            .post("/feedback", json!({"plan_id": resp["plan_id"], "slots": slots}))
            .await;
        assert_eq!(st, StatusCode::OK, "{fb}");
    }
    let (first, last) = (counts[0], counts[10]);
    assert!(first > 0, "{counts:?}");
    assert!(last < first, "meat items per round {counts:?}");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_plans_for_one_user_train_once() {
    let api = api();
    api.profile("ann", neutral()).await;
    let req = json!({"user_id": "ann", "horizon": 2, "algorithm": "bandit"}).to_string();
    let tasks: Vec<_> = (0..4)
        .map(|_| {
            let app = api.app.clone();
            let req = Request::post("/plans")
                .header("content-type", "application/json")
                .body(Body::from(req.clone()))
                .unwrap();
            tokio::spawn(async move {
                let resp = app.oneshot(req).await.unwrap();
                assert_eq!(resp.status(), StatusCode::OK);
                let bytes = resp.into_body().collect().await.unwrap().to_bytes();
                serde_json::from_slice::<Value>(&bytes).unwrap()
            })
        })
        .collect();
    let mut results = Vec::new();
    for t in tasks {
        results.push(t.await.unwrap());
    }
    let trained = results
        .iter()
        .filter(|v| v["model"]["trained_now"] == true)
        .count();
    assert_eq!(trained, 1);
    assert!(results.windows(2).all(|w| w[0]["plan"] == w[1]["plan"]));
}

#[tokio::test]
async fn static_files_are_served_when_configured() {
    let dir = tempfile::tempdir().unwrap();
    let web = tempfile::tempdir().unwrap();
    std::fs::write(web.path().join("index.html"), "<h1>mealrec</h1>").unwrap();
    let store = ProfileStore::open(dir.path()).unwrap();
    let cfg = ServiceConfig {
        static_dir: Some(web.path().to_path_buf()),
        ..config(10)
    };
    let api = Api {
        app: router(Arc::new(AppState::with_parts(cfg, fixture(), store))),
        dir,
    };
    let (st, body) = api.get("/index.html").await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(body, "<h1>mealrec</h1>");
    let (st, _) = api.get("/health").await;
    assert_eq!(st, StatusCode::OK);
}
