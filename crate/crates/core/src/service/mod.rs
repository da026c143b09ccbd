//! Learner-facing platform: the operations behind the HTTP API.
//!
//! [`Platform`] composes the registry (read-only), the solve store (single
//! writer behind a mutex) and the instance manager. [`http`] maps it onto
//! routes.

pub mod http;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::flagcheck::{verify_spec, Verdict};
use crate::registry::{category_stats, Category, CategoryStats, ChallengeManifest, EndpointKind, Filter, Registry};
use crate::sandbox::{compile_build_plan, BuildPlan, InstanceError, InstanceHandle, InstanceManager, InstanceState, PortBinding, WORKSPACE_MOUNT};
use crate::store::{AppendOutcome, SolveRecord, SolveStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiCode {
    NotFound,
    QuotaExceeded,
    BadRequest,
    DriverFailure,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, thiserror::Error)]
#[error("{status} {code:?}: {message}")]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: ApiCode,
    pub message: String,
}

impl ApiError {
    pub fn not_found(message: impl Into<String>) -> Self {
        ApiError {
            status: 404,
            code: ApiCode::NotFound,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: 400,
            code: ApiCode::BadRequest,
            message: message.into(),
        }
    }

    pub fn unauthorized() -> Self {
        ApiError {
            status: 401,
            code: ApiCode::BadRequest,
            message: "missing or unknown bearer token".into(),
        }
    }

    pub fn quota_exceeded(message: impl Into<String>) -> Self {
        ApiError {
            status: 409,
            code: ApiCode::QuotaExceeded,
            message: message.into(),
        }
    }

    pub fn driver_failure(message: impl Into<String>) -> Self {
        ApiError {
            status: 502,
            code: ApiCode::DriverFailure,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError {
            status: 500,
            code: ApiCode::Internal,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SubmitVerdict {
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubmitResponse {
    pub verdict: SubmitVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub platform_flag: Option<String>,
    pub first_solve: bool,
    pub solved_before: bool,
}

/// Public view of a challenge. Carries no flag material.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChallengeSummary {
    pub id: String,
    pub event: String,
    pub year: u16,
    pub category: Category,
    pub points: u64,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArtifactLink {
    pub path: String,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChallengeDetail {
    #[serde(flatten)]
    pub summary: ChallengeSummary,
    pub description: String,
    pub artifacts: Vec<ArtifactLink>,
    pub endpoints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EndpointPayload {
    pub kind: EndpointKind,
    pub host: String,
    pub port: u16,
    pub container_port: u16,
    pub hint: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstancePayload {
    pub id: String,
    pub challenge: String,
    pub state: InstanceState,
    pub endpoints: Vec<EndpointPayload>,
    pub persistent_workspace: bool,
    /// Container path of the per-(user, challenge) workspace.
    pub workspace_mount: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SolveEntry {
    pub challenge: String,
    pub timestamp: u64,
}

/// Connection hint for a bound endpoint, e.g. `nc 127.0.0.1 40001`.
pub fn connection_hint(binding: &PortBinding) -> String {
    let (host, port) = (&binding.host, binding.host_port);
    match binding.kind {
        EndpointKind::Tcp => format!("nc {host} {port}"),
        EndpointKind::Http => format!("http://{host}:{port}/"),
        EndpointKind::Ssh => format!("ssh -p {port} user@{host}"),
    }
}

impl From<&ChallengeManifest> for ChallengeSummary {
    fn from(m: &ChallengeManifest) -> Self {
        ChallengeSummary {
            id: m.id.clone(),
            event: m.event.clone(),
            year: m.year,
            category: m.category,
            points: m.points,
            title: m.title.clone(),
        }
    }
}

impl From<&InstanceHandle> for InstancePayload {
    fn from(h: &InstanceHandle) -> Self {
        InstancePayload {
            id: h.instance_id.clone(),
            challenge: h.challenge_id.clone(),
            state: h.state,
            endpoints: h
                .endpoints
                .iter()
                .map(|b| EndpointPayload {
                    kind: b.kind,
                    host: b.host.clone(),
                    port: b.host_port,
                    container_port: b.container_port,
                    hint: connection_hint(b),
                })
                .collect(),
            persistent_workspace: true,
            workspace_mount: WORKSPACE_MOUNT.to_string(),
        }
    }
}

type Clock = Box<dyn Fn() -> u64 + Send + Sync>;

fn system_clock() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub struct Platform {
    registry: Arc<Registry>,
    store: Mutex<SolveStore>,
    instances: InstanceManager,
    base_ref: String,
    plans: Mutex<HashMap<String, BuildPlan>>,
    clock: Clock,
}

impl Platform {
    pub fn new(registry: Registry, store: SolveStore, instances: InstanceManager, base_ref: impl Into<String>) -> Self {
        Platform {
            registry: Arc::new(registry),
            store: Mutex::new(store),
            instances,
            base_ref: base_ref.into(),
            plans: Mutex::new(HashMap::new()),
            clock: Box::new(system_clock),
        }
    }

    pub fn with_clock(mut self, clock: impl Fn() -> u64 + Send + Sync + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn instances(&self) -> &InstanceManager {
        &self.instances
    }

    /// Snapshot of the persisted solve records.
    pub fn solve_records(&self) -> Vec<SolveRecord> {
        self.store.lock().unwrap().log().records().to_vec()
    }

    pub fn list_challenges(&self, filter: &Filter) -> Vec<ChallengeSummary> {
        self.registry.query(filter).into_iter().map(ChallengeSummary::from).collect()
    }

    fn manifest(&self, id: &str) -> Result<&ChallengeManifest, ApiError> {
        self.registry
            .manifest(id)
            .ok_or_else(|| ApiError::not_found(format!("no challenge `{id}`")))
    }

    pub fn challenge_detail(&self, id: &str) -> Result<ChallengeDetail, ApiError> {
        let m = self.manifest(id)?;
        Ok(ChallengeDetail {
            summary: m.into(),
            description: m.description.clone(),
            artifacts: m
                .artifacts
                .iter()
                .map(|a| ArtifactLink {
                    path: a.clone(),
                    url: format!("/api/challenges/{}/artifacts/{a}", m.id),
                })
                .collect(),
            endpoints: m.endpoints.iter().map(|e| e.to_string()).collect(),
        })
    }

    /// Host path of a declared artifact. Files not listed in the manifest
    /// (server sources, flags) are never reachable.
    pub fn artifact_path(&self, id: &str, path: &str) -> Result<PathBuf, ApiError> {
        let entry = self
            .registry
            .get(id)
            .ok_or_else(|| ApiError::not_found(format!("no challenge `{id}`")))?;
        entry
            .manifest
            .artifacts
            .iter()
            .find(|a| a.as_str() == path)
            .map(|a| entry.dir.join(a))
            .ok_or_else(|| ApiError::not_found(format!("no artifact `{path}`")))
    }

    pub fn handle_submit(&self, user: &str, challenge: &str, submission: &str) -> Result<SubmitResponse, ApiError> {
        let m = self.manifest(challenge)?;
        let verdict = verify_spec(&m.flag_spec, submission);
        let mut store = self.store.lock().unwrap();
        let solved_before = store.has_solved(user, challenge);
        match verdict {
            Verdict::Reject => Ok(SubmitResponse {
                verdict: SubmitVerdict::Incorrect,
                platform_flag: None,
                first_solve: false,
                solved_before,
            }),
            Verdict::Accept { platform_flag } => {
                let outcome = store
                    .append_solve(SolveRecord::new(user, challenge, (self.clock)()))
                    .map_err(|e| ApiError::internal(e.to_string()))?;
                Ok(SubmitResponse {
                    verdict: SubmitVerdict::Correct,
                    platform_flag: Some(platform_flag),
                    first_solve: outcome == AppendOutcome::Appended,
                    solved_before,
                })
            }
        }
    }

    pub fn handle_stats(&self) -> CategoryStats {
        let store = self.store.lock().unwrap();
        category_stats(&self.registry, store.log().records())
    }

    pub fn user_solves(&self, user: &str) -> Vec<SolveEntry> {
        let store = self.store.lock().unwrap();
        store
            .log()
            .solves_by(user)
            .map(|r| SolveEntry {
                challenge: r.challenge_id.clone(),
                timestamp: r.timestamp,
            })
            .collect()
    }

    fn plan_for(&self, id: &str) -> Result<BuildPlan, ApiError> {
        if let Some(plan) = self.plans.lock().unwrap().get(id) {
            return Ok(plan.clone());
        }
        let entry = self
            .registry
            .get(id)
            .ok_or_else(|| ApiError::not_found(format!("no challenge `{id}`")))?;
        let plan = compile_build_plan(&entry.manifest, &entry.dir, &self.base_ref)
            .map_err(|e| ApiError::internal(e.to_string()))?;
        self.plans.lock().unwrap().insert(id.to_string(), plan.clone());
        Ok(plan)
    }

    pub fn handle_instance_create(&self, user: &str, challenge: &str) -> Result<InstancePayload, ApiError> {
        let plan = self.plan_for(challenge)?;
        let dir = &self.registry.get(challenge).expect("plan_for checked existence").dir;
        match self.instances.launch(&plan, dir, user) {
            Ok(handle) => Ok((&handle).into()),
            Err(InstanceError::QuotaExceeded { limit, .. }) => {
                let existing: Vec<_> = self
                    .instances
                    .active_for_user(user)
                    .into_iter()
                    .map(|h| format!("{} ({})", h.instance_id, h.challenge_id))
                    .collect();
                Err(ApiError::quota_exceeded(format!(
                    "instance limit of {limit} reached; stop {} first",
                    existing.join(", ")
                )))
            }
            Err(InstanceError::DriverFailure(e)) => Err(ApiError::driver_failure(e.to_string())),
            Err(InstanceError::BadUser(u)) => Err(ApiError::bad_request(format!("user id `{u}` is not usable"))),
            Err(e) => Err(ApiError::internal(e.to_string())),
        }
    }

    pub fn handle_instance_delete(&self, user: &str, instance_id: &str) -> Result<InstancePayload, ApiError> {
        match self.instances.stop_for_user(user, instance_id) {
            Ok(handle) => Ok((&handle).into()),
            // stopped and foreign instances look the same as missing ones
            Err(InstanceError::NotFound(_) | InstanceError::NotRunning(_)) => {
                Err(ApiError::not_found(format!("no running instance `{instance_id}`")))
            }
            Err(e) => Err(ApiError::internal(e.to_string())),
        }
    }
}
