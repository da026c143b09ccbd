use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::registry::{normalize_rel_path, ChallengeManifest, EndpointKind, EndpointSpec};

/// Container path that every instance mounts its persistent workspace on.
pub const WORKSPACE_MOUNT: &str = "/home/user";
/// Where challenge files land inside the image.
pub const CHALLENGE_ROOT: &str = "/challenge";
pub const UPSTREAM_RECIPE: &str = "src/Dockerfile";

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("path `{0}` resolves outside the challenge directory")]
    PathEscape(String),
    #[error("challenge `{0}` has no src/, no artifacts and no endpoints")]
    NoContent(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum BuildStep {
    CopyIn { src: String, dst: String },
    Run { command: String },
    Entrypoint { command: String },
}

/// An upstream build recipe shipped in `src/`, embedded verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct UpstreamRecipe {
    pub path: String,
    pub text: String,
}

/// Deterministic description of a challenge image: a shared tooling base
/// plus one thin challenge stage.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct BuildPlan {
    pub challenge_id: String,
    pub base_ref: String,
    pub stages: Vec<BuildStep>,
    pub upstream: Option<UpstreamRecipe>,
    pub exposed_ports: Vec<EndpointSpec>,
    pub workspace_mount: String,
}

impl BuildPlan {
    /// Build context relative to the challenge directory.
    pub fn context(&self) -> &'static str {
        if self.upstream.is_some() {
            "src"
        } else {
            "."
        }
    }

    pub fn entrypoint(&self) -> Option<&str> {
        match self.stages.last() {
            Some(BuildStep::Entrypoint { command }) => Some(command),
            _ => None,
        }
    }
}

fn copy_destination(rel: &str) -> String {
    let inside = rel.strip_prefix("dist/").unwrap_or(rel);
    format!("{CHALLENGE_ROOT}/{inside}")
}

fn serve_command(port: u16, target: &str) -> String {
    format!("socat TCP-LISTEN:{port},reuseaddr,fork EXEC:{target},stderr")
}

fn exists(path: &Path, want_dir: bool) -> Result<bool, PlanError> {
    match std::fs::metadata(path) {
        Ok(m) => Ok(if want_dir { m.is_dir() } else { m.is_file() }),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(false),
        Err(source) => Err(PlanError::Io {
            path: path.to_path_buf(),
            source,
        }),
    }
}

/// Compiles a manifest into a build plan.
///
/// When `src/Dockerfile` exists it becomes the challenge stage verbatim.
/// Otherwise artifacts (and `src/`, if present) are copied under
/// `/challenge`, and the first tcp endpoint gets an entrypoint that serves
/// the first artifact (or `src/run` when there are no artifacts).
///
/// Only the presence of `src/` and `src/Dockerfile` is read from `dir`; the
/// plan itself carries no host paths.
pub fn compile_build_plan(
    manifest: &ChallengeManifest,
    dir: &Path,
    base_ref: &str,
) -> Result<BuildPlan, PlanError> {
    let artifacts = manifest
        .artifacts
        .iter()
        .map(|a| normalize_rel_path(a).map_err(|_| PlanError::PathEscape(a.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    normalize_rel_path(&manifest.rehost_doc)
        .map_err(|_| PlanError::PathEscape(manifest.rehost_doc.clone()))?;

    let mut exposed_ports = manifest.endpoints.clone();
    exposed_ports.sort_by_key(|e| (e.port, e.kind));

    let recipe_path = dir.join("src").join("Dockerfile");
    if exists(&recipe_path, false)? {
        let text = std::fs::read_to_string(&recipe_path).map_err(|source| PlanError::Io {
            path: recipe_path.clone(),
            source,
        })?;
        return Ok(BuildPlan {
            challenge_id: manifest.id.clone(),
            base_ref: base_ref.to_string(),
            stages: Vec::new(),
            upstream: Some(UpstreamRecipe {
                path: UPSTREAM_RECIPE.to_string(),
                text: text.replace("\r\n", "\n"),
            }),
            exposed_ports,
            workspace_mount: WORKSPACE_MOUNT.to_string(),
        });
    }

    let has_src = exists(&dir.join("src"), true)?;
    if artifacts.is_empty() && manifest.endpoints.is_empty() && !has_src {
        return Err(PlanError::NoContent(manifest.id.clone()));
    }

    let mut stages: Vec<BuildStep> = artifacts
        .iter()
        .map(|a| BuildStep::CopyIn {
            src: a.clone(),
            dst: copy_destination(a),
        })
        .collect();
    if has_src {
        stages.push(BuildStep::CopyIn {
            src: "src".into(),
            dst: format!("{CHALLENGE_ROOT}/src"),
        });
    }

    let first_tcp = manifest
        .endpoints
        .iter()
        .find(|e| e.kind == EndpointKind::Tcp);
    let target = artifacts
        .first()
        .map(|a| copy_destination(a))
        .or_else(|| has_src.then(|| format!("{CHALLENGE_ROOT}/src/run")));
    if let (Some(ep), Some(target)) = (first_tcp, target) {
        stages.push(BuildStep::Entrypoint {
            command: serve_command(ep.port, &target),
        });
    }

    Ok(BuildPlan {
        challenge_id: manifest.id.clone(),
        base_ref: base_ref.to_string(),
        stages,
        upstream: None,
        exposed_ports,
        workspace_mount: WORKSPACE_MOUNT.to_string(),
    })
}

/// Renders a plan as a containerfile. The base stage is always first; the
/// challenge stage is named after the challenge id.
pub fn render_build_recipe(plan: &BuildPlan) -> String {
    let mut out = format!("FROM {} AS base\n", plan.base_ref);
    if let Some(up) = &plan.upstream {
        out.push_str(&format!("# challenge stage: {} (upstream, verbatim)\n", up.path));
        out.push_str(&up.text);
        if !up.text.ends_with('\n') {
            out.push('\n');
        }
        return out;
    }
    out.push_str(&format!("FROM base AS {}\n", plan.challenge_id));
    for step in &plan.stages {
        match step {
            BuildStep::CopyIn { src, dst } => out.push_str(&format!("COPY {src} {dst}\n")),
            BuildStep::Run { command } => out.push_str(&format!("RUN {command}\n")),
            BuildStep::Entrypoint { command } => out.push_str(&format!("ENTRYPOINT {command}\n")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::parse_manifest;
    use std::fs;

    const BASE: &str = "ghcr.io/example/ctf-base:1";

    fn manifest(extra: &str) -> ChallengeManifest {
        parse_manifest(&format!(
            "id: chall\nevent: E\nyear: 2020\ncategory: pwn\npoints: 1\nflag: flag{{x}}\n{extra}"
        ))
        .unwrap()
    }

    #[test]
    fn dist_artifact_with_tcp_endpoint() {
        let tmp = tempfile::tempdir().unwrap();
        let plan = compile_build_plan(&manifest("artifact: dist/chall\nendpoint: tcp/1337\n"), tmp.path(), BASE).unwrap();
        assert_eq!(
            plan.stages,
            vec![
                BuildStep::CopyIn {
                    src: "dist/chall".into(),
                    dst: "/challenge/chall".into()
                },
                BuildStep::Entrypoint {
                    command: "socat TCP-LISTEN:1337,reuseaddr,fork EXEC:/challenge/chall,stderr".into()
                },
            ]
        );
        assert_eq!(plan.exposed_ports, vec![EndpointSpec { kind: EndpointKind::Tcp, port: 1337 }]);
        assert_eq!(plan.workspace_mount, "/home/user");
        let recipe = render_build_recipe(&plan);
        assert!(recipe.contains("COPY dist/chall /challenge/chall\n"));
        assert_eq!(
            recipe,
            "FROM ghcr.io/example/ctf-base:1 AS base\nFROM base AS chall\nCOPY dist/chall /challenge/chall\nENTRYPOINT socat TCP-LISTEN:1337,reuseaddr,fork EXEC:/challenge/chall,stderr\n"
        );
    }

    #[test]
    fn no_content() {
        let tmp = tempfile::tempdir().unwrap();
        assert!(matches!(
            compile_build_plan(&manifest(""), tmp.path(), BASE),
            Err(PlanError::NoContent(_))
        ));
    }

    #[test]
    fn escaping_artifact_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let mut m = manifest("endpoint: tcp/1\n");
        m.artifacts.push("../../etc/passwd".into());
        assert!(matches!(compile_build_plan(&m, tmp.path(), BASE), Err(PlanError::PathEscape(_))));
        m.artifacts = vec!["/etc/passwd".into()];
        assert!(matches!(compile_build_plan(&m, tmp.path(), BASE), Err(PlanError::PathEscape(_))));
    }

    #[test]
    fn ports_sorted_and_src_copied() {
        let tmp = tempfile::tempdir().unwrap();
        fs::create_dir(tmp.path().join("src")).unwrap();
        let plan = compile_build_plan(&manifest("endpoint: tcp/9000\nendpoint: http/80\n"), tmp.path(), BASE).unwrap();
        assert_eq!(plan.exposed_ports.iter().map(|e| e.port).collect::<Vec<_>>(), vec![80, 9000]);
        assert_eq!(
            plan.stages,
            vec![
                BuildStep::CopyIn { src: "src".into(), dst: "/challenge/src".into() },
                BuildStep::Entrypoint {
                    command: "socat TCP-LISTEN:9000,reuseaddr,fork EXEC:/challenge/src/run,stderr".into()
                },
            ]
        );
    }

    #[test]
    fn http_only_has_no_entrypoint() {
        let tmp = tempfile::tempdir().unwrap();
        let plan = compile_build_plan(&manifest("artifact: dist/a\nendpoint: http/80\n"), tmp.path(), BASE).unwrap();
        assert_eq!(plan.entrypoint(), None);
    }

    #[test]
    fn upstream_recipe_is_wrapped_verbatim() {
        let tmp = tempfile::tempdir().unwrap();
        fs::create_dir(tmp.path().join("src")).unwrap();
        fs::write(tmp.path().join("src/Dockerfile"), "FROM ubuntu:20.04\r\nCOPY chal /chal\r\nCMD /chal").unwrap();
        let plan = compile_build_plan(&manifest("endpoint: tcp/1337\n"), tmp.path(), BASE).unwrap();
        assert!(plan.stages.is_empty());
        assert_eq!(plan.context(), "src");
        assert_eq!(
            render_build_recipe(&plan),
            "FROM ghcr.io/example/ctf-base:1 AS base\n# challenge stage: src/Dockerfile (upstream, verbatim)\nFROM ubuntu:20.04\nCOPY chal /chal\nCMD /chal\n"
        );
    }

    #[test]
    fn zero_step_plan_renders_two_lines() {
        let plan = BuildPlan {
            challenge_id: "x".into(),
            base_ref: BASE.into(),
            stages: vec![],
            upstream: None,
            exposed_ports: vec![],
            workspace_mount: WORKSPACE_MOUNT.into(),
        };
        let text = render_build_recipe(&plan);
        assert_eq!(text, "FROM ghcr.io/example/ctf-base:1 AS base\nFROM base AS x\n");
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn backslash_artifacts_compile_identically() {
        let tmp = tempfile::tempdir().unwrap();
        let mut m = manifest("endpoint: tcp/1\n");
        m.artifacts = vec!["dist\\sub\\a.bin".into()];
        let a = render_build_recipe(&compile_build_plan(&m, tmp.path(), BASE).unwrap());
        m.artifacts = vec!["dist/sub/a.bin".into()];
        let b = render_build_recipe(&compile_build_plan(&m, tmp.path(), BASE).unwrap());
        assert_eq!(a, b);
    }
}
