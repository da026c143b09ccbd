use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::Serialize;

use super::driver::{DriverError, Mount, PortBinding, RuntimeDriver, RuntimeId};
use super::plan::BuildPlan;

pub const DEFAULT_QUOTA: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceState {
    Created,
    Running,
    Stopped,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("illegal transition {from:?} -> {to:?}")]
pub struct IllegalTransition {
    pub from: InstanceState,
    pub to: InstanceState,
}

#[derive(Debug, thiserror::Error)]
pub enum InstanceError {
    #[error(transparent)]
    DriverFailure(#[from] DriverError),
    #[error("user `{user}` already has {limit} running instance(s)")]
    QuotaExceeded { user: String, limit: usize },
    #[error("instance `{0}` is not running")]
    NotRunning(String),
    #[error("no instance `{0}`")]
    NotFound(String),
    #[error("user id `{0}` cannot be used as a workspace name")]
    BadUser(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstanceHandle {
    pub instance_id: String,
    pub challenge_id: String,
    pub user_id: String,
    pub state: InstanceState,
    pub endpoints: Vec<PortBinding>,
    pub workspace: PathBuf,
    #[serde(skip)]
    runtime: Option<RuntimeId>,
}

impl InstanceHandle {
    pub fn runtime_id(&self) -> Option<&RuntimeId> {
        self.runtime.as_ref()
    }

    fn mark_running(&mut self, runtime: RuntimeId, endpoints: Vec<PortBinding>) -> Result<(), IllegalTransition> {
        if self.state != InstanceState::Created {
            return Err(IllegalTransition {
                from: self.state,
                to: InstanceState::Running,
            });
        }
        self.state = InstanceState::Running;
        self.runtime = Some(runtime);
        self.endpoints = endpoints;
        Ok(())
    }

    fn mark_stopped(&mut self) -> Result<(), IllegalTransition> {
        if self.state != InstanceState::Running {
            return Err(IllegalTransition {
                from: self.state,
                to: InstanceState::Stopped,
            });
        }
        self.state = InstanceState::Stopped;
        self.endpoints.clear();
        Ok(())
    }
}

/// Workspace names are used as path segments.
pub fn is_safe_user_id(user: &str) -> bool {
    (1..=64).contains(&user.len())
        && user != "."
        && user != ".."
        && user
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'))
}

/// `<data_dir>/workspaces/<user>/<challenge_id>`.
pub fn workspace_path(data_dir: &Path, user: &str, challenge_id: &str) -> PathBuf {
    data_dir.join("workspaces").join(user).join(challenge_id)
}

#[derive(Default)]
struct Table {
    instances: HashMap<String, Arc<Mutex<InstanceHandle>>>,
    active_per_user: HashMap<String, usize>,
}

impl Table {
    fn release(&mut self, user: &str) {
        if let Some(n) = self.active_per_user.get_mut(user) {
            *n -= 1;
            if *n == 0 {
                self.active_per_user.remove(user);
            }
        }
    }
}

/// Owns instance lifecycles. Transitions on one instance are serialized by
/// that instance's lock; distinct instances proceed independently. Lock
/// order is always instance, then table.
pub struct InstanceManager {
    driver: Arc<dyn RuntimeDriver>,
    data_dir: PathBuf,
    quota: usize,
    table: Mutex<Table>,
}

impl InstanceManager {
    pub fn new(driver: Arc<dyn RuntimeDriver>, data_dir: impl Into<PathBuf>) -> Self {
        InstanceManager {
            driver,
            data_dir: data_dir.into(),
            quota: DEFAULT_QUOTA,
            table: Mutex::new(Table::default()),
        }
    }

    pub fn with_quota(mut self, quota: usize) -> Self {
        self.quota = quota;
        self
    }

    pub fn driver(&self) -> &dyn RuntimeDriver {
        self.driver.as_ref()
    }

    pub fn quota(&self) -> usize {
        self.quota
    }

    pub fn workspace(&self, user: &str, challenge_id: &str) -> PathBuf {
        workspace_path(&self.data_dir, user, challenge_id)
    }

    /// Builds and starts `plan` for `user`. The returned handle is Running;
    /// on driver failure no instance is recorded.
    pub fn launch(&self, plan: &BuildPlan, challenge_dir: &Path, user: &str) -> Result<InstanceHandle, InstanceError> {
        if !is_safe_user_id(user) {
            return Err(InstanceError::BadUser(user.to_string()));
        }
        let workspace = self.workspace(user, &plan.challenge_id);
        let instance_id = uuid::Uuid::new_v4().simple().to_string();
        let slot = Arc::new(Mutex::new(InstanceHandle {
            instance_id: instance_id.clone(),
            challenge_id: plan.challenge_id.clone(),
            user_id: user.to_string(),
            state: InstanceState::Created,
            endpoints: Vec::new(),
            workspace: workspace.clone(),
            runtime: None,
        }));

        {
            let mut table = self.table.lock().unwrap();
            let active = table.active_per_user.get(user).copied().unwrap_or(0);
            if active >= self.quota {
                return Err(InstanceError::QuotaExceeded {
                    user: user.to_string(),
                    limit: self.quota,
                });
            }
            *table.active_per_user.entry(user.to_string()).or_default() += 1;
            table.instances.insert(instance_id.clone(), slot.clone());
        }

        let mut handle = slot.lock().unwrap();
        let started = self.driver.build(plan, challenge_dir).and_then(|image| {
            self.driver.start(
                &image,
                &plan.exposed_ports,
                &[Mount {
                    host: workspace,
                    container: plan.workspace_mount.clone(),
                }],
            )
        });
        match started {
            Ok(started) => {
                handle
                    .mark_running(started.id, started.bindings)
                    .expect("fresh instance is Created");
                Ok(handle.clone())
            }
            Err(e) => {
                let mut table = self.table.lock().unwrap();
                table.instances.remove(&instance_id);
                table.release(user);
                Err(e.into())
            }
        }
    }

    /// Stops a Running instance. The workspace directory is left in place.
    pub fn stop(&self, instance_id: &str) -> Result<InstanceHandle, InstanceError> {
        let slot = self.slot(instance_id)?;
        let mut handle = slot.lock().unwrap();
        self.stop_locked(&mut handle)
    }

    /// Like [`stop`](Self::stop), but instances owned by someone else are
    /// reported as not found.
    pub fn stop_for_user(&self, user: &str, instance_id: &str) -> Result<InstanceHandle, InstanceError> {
        let slot = self.slot(instance_id)?;
        let mut handle = slot.lock().unwrap();
        if handle.user_id != user {
            return Err(InstanceError::NotFound(instance_id.to_string()));
        }
        self.stop_locked(&mut handle)
    }

    fn stop_locked(&self, handle: &mut InstanceHandle) -> Result<InstanceHandle, InstanceError> {
        if handle.state != InstanceState::Running {
            return Err(InstanceError::NotRunning(handle.instance_id.clone()));
        }
        if let Some(rt) = handle.runtime.clone() {
            if let Err(e) = self.driver.stop(&rt) {
                log::warn!("stopping {}: {e}", handle.instance_id);
            }
        }
        handle.mark_stopped().expect("checked Running above");
        self.table.lock().unwrap().release(&handle.user_id);
        Ok(handle.clone())
    }

    fn slot(&self, instance_id: &str) -> Result<Arc<Mutex<InstanceHandle>>, InstanceError> {
        self.table
            .lock()
            .unwrap()
            .instances
            .get(instance_id)
            .cloned()
            .ok_or_else(|| InstanceError::NotFound(instance_id.to_string()))
    }

    pub fn get(&self, instance_id: &str) -> Option<InstanceHandle> {
        let slot = self.slot(instance_id).ok()?;
        let handle = slot.lock().unwrap().clone();
        Some(handle)
    }

    /// The user's Created or Running instances.
    pub fn active_for_user(&self, user: &str) -> Vec<InstanceHandle> {
        let slots: Vec<_> = self.table.lock().unwrap().instances.values().cloned().collect();
        let mut out: Vec<_> = slots
            .iter()
            .map(|s| s.lock().unwrap().clone())
            .filter(|h| h.user_id == user && h.state != InstanceState::Stopped)
            .collect();
        out.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
        out
    }
}
