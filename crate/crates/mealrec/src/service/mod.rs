//! HTTP/JSON service over a loaded dataset and a file-backed profile store.

pub mod config;
pub mod store;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mealrec_core::features::SlotContext;
use mealrec_core::recommend::{RandomRecommender, SequentialRecommender};
use mealrec_core::{
    bandit_train, default_day_config, horizon_bounds, score_plan, BanditState, DayConfig, Error,
    Horizon, MealKind, MealPlan, PlanEnv, Preference, ProfileView, RawRecipe, RecipeDataset,
    Recommender, RecommenderKind, Role, ScoreReport, UserProfile,
};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tokio::sync::OwnedMutexGuard;

pub use config::ServiceConfig;
pub use store::{ProfileStore, StoredProfile};

use crate::dataset::{load_or_fixture, LoadError};

/// JSON error body: a stable machine-readable `code` and a message.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        tracing::error!("internal error: {e:#}");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }
}

impl From<anyhow::Error> for ApiError {
    fn from(e: anyhow::Error) -> Self {
        Self::internal(format!("{e:#}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.code.into(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error(transparent)]
    Dataset(#[from] LoadError),
    #[error("cannot open store {path}: {source}", path = .path.display())]
    Store {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
struct IssuedPlan {
    user_id: String,
    algorithm: RecommenderKind,
    horizon: Horizon,
    plan: MealPlan,
    prefs: Vec<Preference>,
}

pub struct AppState {
    config: ServiceConfig,
    dataset: RecipeDataset,
    day_config: DayConfig,
    store: ProfileStore,
    plans: Mutex<HashMap<String, IssuedPlan>>,
    cursors: Mutex<HashMap<String, usize>>,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
    next_plan: AtomicU64,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Result<Self, StartupError> {
        let loaded = load_or_fixture(config.dataset.as_deref(), config.load_mode)?;
        for w in &loaded.warnings {
            tracing::warn!("{w}");
        }
        let store = ProfileStore::open(&config.store_dir).map_err(|source| StartupError::Store {
            path: config.store_dir.clone(),
            source,
        })?;
        Ok(Self::with_parts(config, loaded.dataset, store))
    }

    pub fn with_parts(config: ServiceConfig, dataset: RecipeDataset, store: ProfileStore) -> Self {
        Self {
            config,
            dataset,
            day_config: default_day_config(),
            store,
            plans: Mutex::new(HashMap::new()),
            cursors: Mutex::new(HashMap::new()),
            locks: Mutex::new(HashMap::new()),
            next_plan: AtomicU64::new(1),
        }
    }

    pub fn dataset(&self) -> &RecipeDataset {
        &self.dataset
    }

    pub fn store(&self) -> &ProfileStore {
        &self.store
    }

    /// Serializes profile writes, plan generation and model updates for
    /// one user.
    async fn user_lock(&self, user: &str) -> OwnedMutexGuard<()> {
        let lock = self
            .locks
            .lock()
            .expect("lock table poisoned")
            .entry(user.to_string())
            .or_default()
            .clone();
        lock.lock_owned().await
    }

    fn env(&self) -> Result<PlanEnv<'_>, ApiError> {
        PlanEnv::new(&self.dataset, &self.day_config).map_err(|e| match e {
            Error::MissingRole(_) => {
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "dataset_incomplete", e.to_string())
            }
            other => ApiError::internal(other),
        })
    }

    fn profile(&self, user: &str) -> Result<StoredProfile, ApiError> {
        if !store::valid_user_id(user) {
            return Err(ApiError::bad_request("invalid_user_id", invalid_user_id_message(user)));
        }
        self.store
            .get(user)?
            .ok_or_else(|| ApiError::not_found("unknown_user", format!("no profile for `{user}`")))
    }

    /// The user's persisted bandit, or a freshly trained one (persisted
    /// before returning). Runs on the blocking pool.
    fn bandit_for(&self, view: &ProfileView, horizon: Horizon) -> anyhow::Result<(BanditState, bool)> {
        if let Some(state) = self.store.load_model(&view.user_id)? {
            return Ok((state, false));
        }
        let env = PlanEnv::new(&self.dataset, &self.day_config)?;
        let seed = mealrec_core::numeric::mix_seed(&[fnv1a(view.user_id.as_bytes())]);
        let mut state = BanditState::new(self.config.bandit, env.schema().clone(), seed)?;
        bandit_train(
            &mut state,
            &env,
            std::slice::from_ref(view),
            self.config.bandit_episodes,
            horizon,
        )?;
        self.store.save_model(&view.user_id, &state)?;
        Ok((state, true))
    }
}

fn invalid_user_id_message(user: &str) -> String {
    format!("user id `{user}` must be 1-64 characters of letters, digits, '-', '_' or '.'")
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes, code: &'static str) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Err(ApiError::bad_request(code, "request body is empty"));
    }
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(code, e.to_string()))
}

pub fn router(state: Arc<AppState>) -> Router {
    let cors = state.config.cors;
    let static_dir = state.config.static_dir.clone();
    let mut app = Router::new()
        .route("/health", get(health))
        .route("/config", get(service_info))
        .route("/recipes", get(list_recipes))
        .route("/recipes/{id}", get(get_recipe))
        .route("/profiles/{user_id}", get(get_profile).put(put_profile))
        .route("/plans", post(create_plan))
        .route("/feedback", post(feedback))
        .with_state(state);
    if let Some(dir) = static_dir {
        app = app.fallback_service(tower_http::services::ServeDir::new(dir));
    }
    if cors {
        app.layer(tower_http::cors::CorsLayer::permissive())
    } else {
        app
    }
}

#[derive(Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub recipes: usize,
    pub missing_roles: Vec<Role>,
    pub version: String,
}

async fn health(State(s): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        recipes: s.dataset.len(),
        missing_roles: s.dataset.missing_roles(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

#[derive(Serialize, Deserialize)]
pub struct HorizonBounds {
    pub min: u8,
    pub max: u8,
}

/// Static vocabulary a client needs to build forms.
#[derive(Serialize, Deserialize)]
pub struct ServiceInfo {
    pub flag_names: Vec<String>,
    pub categories: Vec<String>,
    pub roles: Vec<Role>,
    pub algorithms: Vec<RecommenderKind>,
    pub horizon: HorizonBounds,
    pub day_config: DayConfig,
}

async fn service_info(State(s): State<Arc<AppState>>) -> Json<ServiceInfo> {
    let (min, max) = horizon_bounds();
    Json(ServiceInfo {
        flag_names: s.dataset.flag_names().to_vec(),
        categories: s.dataset.categories(),
        roles: Role::ALL.to_vec(),
        algorithms: RecommenderKind::ALL.to_vec(),
        horizon: HorizonBounds { min, max },
        day_config: s.day_config.clone(),
    })
}

#[derive(Debug, Deserialize)]
struct RecipeFilter {
    role: Option<String>,
    flag: Option<String>,
    category: Option<String>,
}

/// `role` keeps recipes that can fill the role, `flag` those carrying the
/// flag (or lacking it, with a leading `!`), `category` an exact category.
async fn list_recipes(
    State(s): State<Arc<AppState>>,
    Query(q): Query<RecipeFilter>,
) -> ApiResult<Vec<RawRecipe>> {
    let role = q
        .role
        .as_deref()
        .map(str::parse::<Role>)
        .transpose()
        .map_err(|e| ApiError::bad_request("invalid_query", e.to_string()))?;
    let flag = match q.flag.as_deref() {
        None => None,
        Some(f) => {
            let (name, want) = match f.strip_prefix('!') {
                Some(rest) => (rest, false),
                None => (f, true),
            };
            let idx = s.dataset.flag_index(name).ok_or_else(|| {
                ApiError::bad_request("invalid_query", format!("unknown flag `{name}`"))
            })?;
            Some((idx, want))
        }
    };
    let flags = s.dataset.flag_names();
    Ok(Json(
        s.dataset
            .recipes()
            .iter()
            .filter(|r| role.is_none_or(|role| r.has_role(role)))
            .filter(|r| flag.is_none_or(|(i, want)| r.flags[i] == want))
            .filter(|r| q.category.as_deref().is_none_or(|c| r.category == c))
            .map(|r| r.to_raw(flags))
            .collect(),
    ))
}

async fn get_recipe(State(s): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<RawRecipe> {
    s.dataset
        .get(&id)
        .map(|r| Json(r.to_raw(s.dataset.flag_names())))
        .ok_or_else(|| ApiError::not_found("unknown_recipe", format!("no recipe `{id}`")))
}

async fn get_profile(
    State(s): State<Arc<AppState>>,
    Path(user): Path<String>,
) -> ApiResult<StoredProfile> {
    s.profile(&user).map(Json)
}

async fn put_profile(
    State(s): State<Arc<AppState>>,
    Path(user): Path<String>,
    body: Bytes,
) -> ApiResult<StoredProfile> {
    if !store::valid_user_id(&user) {
        return Err(ApiError::bad_request("invalid_user_id", invalid_user_id_message(&user)));
    }
    let mut doc: serde_json::Value = parse_body(&body, "invalid_profile")?;
    let obj = doc
        .as_object_mut()
        .ok_or_else(|| ApiError::bad_request("invalid_profile", "profile must be a JSON object"))?;
    match obj.get("user_id") {
        None => {
            obj.insert("user_id".into(), user.clone().into());
        }
        Some(id) if id.as_str() == Some(user.as_str()) => {}
        Some(id) => {
            return Err(ApiError::bad_request(
                "invalid_profile",
                format!("user_id {id} does not match path `{user}`"),
            ))
        }
    }
    let profile: UserProfile = serde_json::from_value(doc)
        .map_err(|e| ApiError::bad_request("invalid_profile", e.to_string()))?;
    let violations = profile.validate(s.dataset.flag_names());
    if !violations.is_empty() {
        let msg: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(ApiError::bad_request("invalid_profile", msg.join("; ")));
    }
    let _guard = s.user_lock(&user).await;
    Ok(Json(s.store.put(profile)?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanRequest {
    pub user_id: String,
    pub horizon: i64,
    #[serde(default = "default_algorithm")]
    pub algorithm: RecommenderKind,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Bandit only: sample with the model's current exploration rate
    /// instead of planning greedily.
    #[serde(default)]
    pub explore: bool,
}

fn default_algorithm() -> RecommenderKind {
    RecommenderKind::Bandit
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelInfo {
    pub version: u64,
    pub episodes: u64,
    pub epsilon: f64,
    pub trained_now: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PlanResponse {
    pub plan_id: String,
    pub algorithm: RecommenderKind,
    pub horizon: u8,
    pub seed: u64,
    pub plan: MealPlan,
    pub scores: ScoreReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelInfo>,
}

async fn create_plan(State(s): State<Arc<AppState>>, body: Bytes) -> ApiResult<PlanResponse> {
    let req: PlanRequest = parse_body(&body, "invalid_request")?;
    let horizon = Horizon::new(req.horizon).map_err(|e| {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_horizon", e.to_string())
    })?;
    let stored = s.profile(&req.user_id)?;
    let view = ProfileView::new(&stored.profile, s.dataset.flag_names())
        .map_err(|e| ApiError::new(StatusCode::CONFLICT, "stale_profile", e.to_string()))?;
    s.env()?;
    let seed = req.seed.unwrap_or_else(|| rand::rng().next_u64());
    let guard = s.user_lock(&req.user_id).await;

    let (plan, model) = match req.algorithm {
        RecommenderKind::Random => {
            let env = s.env()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (RandomRecommender.recommend(&env, &view, horizon, &mut rng).map_err(ApiError::internal)?, None)
        }
        RecommenderKind::Sequential => {
            let env = s.env()?;
            let mut cursors = s.cursors.lock().expect("cursor table poisoned");
            let cursor = cursors.entry(req.user_id.clone()).or_default();
            let mut seq = SequentialRecommender::starting_at(*cursor);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let plan = seq.recommend(&env, &view, horizon, &mut rng).map_err(ApiError::internal)?;
            *cursor = seq.cursor;
            (plan, None)
        }
        RecommenderKind::Bandit => {
            let st = s.clone();
            let v = view.clone();
            let explore = req.explore;
            let (plan, info) = tokio::task::spawn_blocking(move || -> anyhow::Result<_> {
                let (state, trained_now) = st.bandit_for(&v, horizon)?;
                let env = PlanEnv::new(&st.dataset, &st.day_config)?;
                let plan = if explore {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    state.plan(&env, &v, horizon, state.epsilon(), &mut rng)?
                } else {
                    state.greedy_plan(&env, &v, horizon)?
                };
                let info = ModelInfo {
                    version: state.version(),
                    episodes: state.episodes(),
                    epsilon: state.epsilon(),
                    trained_now,
                };
                Ok((plan, info))
            })
            .await
            .map_err(ApiError::internal)??;
            (plan, Some(info))
        }
    };
    drop(guard);

    let scores = score_plan(&plan, &s.dataset, &s.day_config, &view).map_err(ApiError::internal)?;
    let plan_id = format!("plan-{}", s.next_plan.fetch_add(1, Ordering::Relaxed));
    s.plans.lock().expect("plan table poisoned").insert(
        plan_id.clone(),
        IssuedPlan {
            user_id: req.user_id,
            algorithm: req.algorithm,
            horizon,
            plan: plan.clone(),
            prefs: view.prefs,
        },
    );
    Ok(Json(PlanResponse {
        plan_id,
        algorithm: req.algorithm,
        horizon: horizon.into(),
        seed,
        plan,
        scores,
        model,
    }))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotFeedback {
    /// 0-based day within the plan.
    pub day: usize,
    pub meal: MealKind,
    /// 0-based slot within the meal.
    pub slot: usize,
    pub accept: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackRequest {
    pub plan_id: String,
    pub slots: Vec<SlotFeedback>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FeedbackResponse {
    pub plan_id: String,
    pub applied: usize,
    pub model_version: u64,
}

async fn feedback(State(s): State<Arc<AppState>>, body: Bytes) -> ApiResult<FeedbackResponse> {
    let req: FeedbackRequest = parse_body(&body, "invalid_feedback")?;
    if req.slots.is_empty() {
        return Err(ApiError::bad_request("invalid_feedback", "no slots in feedback"));
    }
    let issued = s
        .plans
        .lock()
        .expect("plan table poisoned")
        .get(&req.plan_id)
        .cloned()
        .ok_or_else(|| ApiError::not_found("unknown_plan", format!("no plan `{}`", req.plan_id)))?;
    if issued.algorithm != RecommenderKind::Bandit {
        return Err(ApiError::new(
            StatusCode::CONFLICT,
            "not_bandit_plan",
            "feedback requires bandit plans",
        ));
    }

    // Resolve every slot reference before touching the model.
    let mut picks = Vec::with_capacity(req.slots.len());
    for (k, f) in req.slots.iter().enumerate() {
        let bad = |why: &str| ApiError::bad_request("invalid_feedback", format!("slots[{k}]: {why}"));
        let day = issued.plan.days.get(f.day).ok_or_else(|| bad("day out of range"))?;
        let (m, assignment) = day
            .meals
            .iter()
            .enumerate()
            .find(|(_, a)| a.meal == f.meal)
            .ok_or_else(|| bad("meal not in plan"))?;
        let id = assignment.items.get(f.slot).ok_or_else(|| bad("slot out of range"))?;
        let role = s.day_config.meals[m].slots[f.slot];
        let pos = s.dataset.position(id).ok_or_else(|| bad("unknown recipe"))?;
        picks.push((f.day, f.meal, role, pos, if f.accept { 1.0 } else { 0.0 }));
    }

    let _guard = s.user_lock(&issued.user_id).await;
    let st = s.clone();
    let version = tokio::task::spawn_blocking(move || -> Result<u64, ApiError> {
        let mut state = st.store.load_model(&issued.user_id)?.ok_or_else(|| {
            ApiError::not_found("unknown_model", "the plan's model no longer exists")
        })?;
        let env = st.env()?;
        let samples: Vec<(Vec<f64>, f64)> = picks
            .iter()
            .map(|&(day, meal, role, pos, reward)| {
                let ctx = SlotContext {
                    prefs: &issued.prefs,
                    role,
                    meal,
                    day,
                    horizon: issued.horizon,
                };
                (env.sample_features(&ctx, pos), reward)
            })
            .collect();
        let version = state.learn_from_feedback(&samples).map_err(ApiError::internal)?;
        st.store.save_model(&issued.user_id, &state)?;
        Ok(version)
    })
    .await
    .map_err(ApiError::internal)??;

    Ok(Json(FeedbackResponse {
        plan_id: req.plan_id,
        applied: req.slots.len(),
        model_version: version,
    }))
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutdown requested");
}

/// Bind, serve until SIGINT/SIGTERM, then sync the store.
pub async fn serve(state: Arc<AppState>) -> anyhow::Result<()> {
    let addr = format!("{}:{}", state.config.host, state.config.port);
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    tracing::info!(
        "listening on {} ({} recipes, store {})",
        listener.local_addr()?,
        state.dataset.len(),
        state.store.root().display()
    );
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(shutdown_signal())
        .await?;
    state.store.flush()?;
    tracing::info!("profile store flushed");
    Ok(())
}
