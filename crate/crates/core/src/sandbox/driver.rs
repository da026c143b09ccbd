use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::plan::BuildPlan;
use crate::registry::{EndpointKind, EndpointSpec};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ImageRef(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct RuntimeId(pub String);

impl fmt::Display for ImageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for RuntimeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mount {
    pub host: PathBuf,
    pub container: String,
}

/// A declared endpoint and the host address it was published on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PortBinding {
    pub kind: EndpointKind,
    pub container_port: u16,
    pub host: String,
    pub host_port: u16,
}

#[derive(Debug, Clone)]
pub struct Started {
    pub id: RuntimeId,
    pub bindings: Vec<PortBinding>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Liveness {
    Alive,
    Exited,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{driver} driver: {message}")]
pub struct DriverError {
    pub driver: &'static str,
    pub message: String,
}

impl DriverError {
    pub fn new(driver: &'static str, message: impl Into<String>) -> Self {
        DriverError {
            driver,
            message: message.into(),
        }
    }
}

/// Backend that turns build plans into running containers (or stand-ins).
///
/// The instance manager only relies on this contract, so its state machine
/// behaves the same whichever driver is plugged in.
pub trait RuntimeDriver: Send + Sync {
    fn name(&self) -> &'static str;

    /// Builds the plan's image. `challenge_dir` is the host directory the
    /// plan was compiled from; the build context is resolved against it.
    fn build(&self, plan: &BuildPlan, challenge_dir: &Path) -> Result<ImageRef, DriverError>;

    /// Starts the image, publishing each port on an ephemeral host port.
    fn start(
        &self,
        image: &ImageRef,
        ports: &[EndpointSpec],
        mounts: &[Mount],
    ) -> Result<Started, DriverError>;

    fn stop(&self, id: &RuntimeId) -> Result<(), DriverError>;

    fn status(&self, id: &RuntimeId) -> Result<Liveness, DriverError>;
}
