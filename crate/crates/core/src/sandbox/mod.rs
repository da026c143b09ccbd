//! Build plans, recipe rendering, runtime drivers and instance lifecycle.

mod driver;
mod instance;
mod local;
mod oci;
mod plan;

pub use driver::{DriverError, ImageRef, Liveness, Mount, PortBinding, RuntimeDriver, RuntimeId, Started};
pub use instance::{
    is_safe_user_id, workspace_path, IllegalTransition, InstanceError, InstanceHandle, InstanceManager,
    InstanceState, DEFAULT_QUOTA,
};
pub use local::{banner, BuildEvent, LocalDriver};
pub use oci::OciDriver;
pub use plan::{
    compile_build_plan, render_build_recipe, BuildPlan, BuildStep, PlanError, UpstreamRecipe, CHALLENGE_ROOT,
    UPSTREAM_RECIPE, WORKSPACE_MOUNT,
};
