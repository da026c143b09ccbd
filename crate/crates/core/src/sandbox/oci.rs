//! Driver for Docker-compatible container CLIs (`docker`, `podman`).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use sha2::{Digest, Sha256};

use super::driver::{DriverError, ImageRef, Liveness, Mount, PortBinding, RuntimeDriver, RuntimeId, Started};
use super::plan::{render_build_recipe, BuildPlan};
use crate::registry::EndpointSpec;

const NAME: &str = "oci";

pub struct OciDriver {
    binary: PathBuf,
}

impl OciDriver {
    pub fn new(binary: impl Into<PathBuf>) -> Self {
        OciDriver {
            binary: binary.into(),
        }
    }

    fn run(&self, args: &[&str], stdin: Option<&str>) -> Result<String, DriverError> {
        let mut cmd = Command::new(&self.binary);
        cmd.args(args)
            .stdin(if stdin.is_some() { Stdio::piped() } else { Stdio::null() })
            .stdout(Stdio::piped())
            .stderr(Stdio::piped());
        log::debug!("{} {}", self.binary.display(), args.join(" "));
        let mut child = cmd
            .spawn()
            .map_err(|e| DriverError::new(NAME, format!("spawn {}: {e}", self.binary.display())))?;
        if let Some(input) = stdin {
            let mut pipe = child.stdin.take().expect("stdin is piped");
            pipe.write_all(input.as_bytes())
                .map_err(|e| DriverError::new(NAME, format!("write recipe: {e}")))?;
        }
        let out = child
            .wait_with_output()
            .map_err(|e| DriverError::new(NAME, e.to_string()))?;
        if !out.status.success() {
            return Err(DriverError::new(
                NAME,
                format!(
                    "`{} {}` exited with {}: {}",
                    self.binary.display(),
                    args.first().copied().unwrap_or_default(),
                    out.status,
                    String::from_utf8_lossy(&out.stderr).trim()
                ),
            ));
        }
        Ok(String::from_utf8_lossy(&out.stdout).trim().to_string())
    }
}

/// Parses `docker port` output such as `127.0.0.1:49153` or `[::1]:49153`.
fn parse_host_port(line: &str) -> Option<(String, u16)> {
    let (host, port) = line.trim().rsplit_once(':')?;
    let host = host.trim_start_matches('[').trim_end_matches(']');
    Some((host.to_string(), port.parse().ok()?))
}

impl RuntimeDriver for OciDriver {
    fn name(&self) -> &'static str {
        NAME
    }

    fn build(&self, plan: &BuildPlan, challenge_dir: &Path) -> Result<ImageRef, DriverError> {
        let recipe = render_build_recipe(plan);
        let hash = hex::encode(Sha256::digest(recipe.as_bytes()));
        let tag = format!("ctf-vault/{}:{}", plan.challenge_id, &hash[..12]);
        let context = challenge_dir.join(plan.context());
        let context = context.to_string_lossy();
        self.run(&["build", "-t", &tag, "-f", "-", &context], Some(&recipe))?;
        Ok(ImageRef(tag))
    }

    fn start(
        &self,
        image: &ImageRef,
        ports: &[EndpointSpec],
        mounts: &[Mount],
    ) -> Result<Started, DriverError> {
        let mut args: Vec<String> = vec!["run".into(), "-d".into(), "--rm".into()];
        for ep in ports {
            args.push("-p".into());
            args.push(format!("127.0.0.1::{}/tcp", ep.port));
        }
        for m in mounts {
            std::fs::create_dir_all(&m.host)
                .map_err(|e| DriverError::new(NAME, format!("mount {}: {e}", m.host.display())))?;
            args.push("-v".into());
            args.push(format!("{}:{}", m.host.display(), m.container));
        }
        args.push(image.0.clone());
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        let id = RuntimeId(self.run(&argv, None)?);

        let mut bindings = Vec::new();
        for ep in ports {
            let spec = format!("{}/tcp", ep.port);
            let out = self.run(&["port", &id.0, &spec], None).inspect_err(|_| {
                let _ = self.run(&["rm", "-f", &id.0], None);
            })?;
            let first = out.lines().next().unwrap_or_default();
            let (host, host_port) = parse_host_port(first)
                .ok_or_else(|| DriverError::new(NAME, format!("cannot parse port mapping `{first}`")))?;
            bindings.push(PortBinding {
                kind: ep.kind,
                container_port: ep.port,
                host,
                host_port,
            });
        }
        Ok(Started { id, bindings })
    }

    fn stop(&self, id: &RuntimeId) -> Result<(), DriverError> {
        self.run(&["rm", "-f", &id.0], None).map(|_| ())
    }

    fn status(&self, id: &RuntimeId) -> Result<Liveness, DriverError> {
        match self.run(&["inspect", "-f", "{{.State.Running}}", &id.0], None) {
            Ok(out) if out == "true" => Ok(Liveness::Alive),
            Ok(_) => Ok(Liveness::Exited),
            // removed containers (run --rm) no longer inspect
            Err(_) => Ok(Liveness::Exited),
        }
    }
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;
    use crate::registry::EndpointKind;
    use crate::sandbox::plan::WORKSPACE_MOUNT;
    use std::os::unix::fs::PermissionsExt;

    /// A fake container CLI that logs its argv and answers like docker.
    fn fake_cli(dir: &Path) -> PathBuf {
        let path = dir.join("fake-docker");
        let log = dir.join("calls.log");
        let script = format!(
            r#"#!/bin/sh
echo "$@" >> {log}
case "$1" in
  build) cat > {dir}/recipe.txt ;;
  run) echo cid-123 ;;
  port) echo 127.0.0.1:49153 ;;
  inspect) echo true ;;
  rm) ;;
  *) exit 1 ;;
esac
"#,
            log = log.display(),
            dir = dir.display()
        );
        std::fs::write(&path, script).unwrap();
        std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
        path
    }

    #[test]
    fn drives_cli_commands() {
        let tmp = tempfile::tempdir().unwrap();
        let driver = OciDriver::new(fake_cli(tmp.path()));
        let plan = BuildPlan {
            challenge_id: "chal".into(),
            base_ref: "base:1".into(),
            stages: vec![],
            upstream: None,
            exposed_ports: vec![EndpointSpec { kind: EndpointKind::Tcp, port: 1337 }],
            workspace_mount: WORKSPACE_MOUNT.into(),
        };
        let image = driver.build(&plan, Path::new("/archive/ev/chal")).unwrap();
        assert!(image.0.starts_with("ctf-vault/chal:"));
        assert_eq!(
            std::fs::read_to_string(tmp.path().join("recipe.txt")).unwrap(),
            render_build_recipe(&plan)
        );

        let ws = tmp.path().join("ws");
        let started = driver
            .start(&image, &plan.exposed_ports, &[Mount { host: ws.clone(), container: WORKSPACE_MOUNT.into() }])
            .unwrap();
        assert!(ws.is_dir());
        assert_eq!(started.id.0, "cid-123");
        assert_eq!(started.bindings[0].host_port, 49153);
        assert_eq!(driver.status(&started.id).unwrap(), Liveness::Alive);
        driver.stop(&started.id).unwrap();

        let calls = std::fs::read_to_string(tmp.path().join("calls.log")).unwrap();
        let lines: Vec<_> = calls.lines().collect();
        assert_eq!(lines[0], format!("build -t {} -f - /archive/ev/chal/.", image.0));
        assert_eq!(
            lines[1],
            format!("run -d --rm -p 127.0.0.1::1337/tcp -v {}:/home/user {}", ws.display(), image.0)
        );
        assert_eq!(lines[2], "port cid-123 1337/tcp");
        assert_eq!(lines[4], "rm -f cid-123");
    }

    #[test]
    fn failing_cli_is_driver_error() {
        let driver = OciDriver::new("/nonexistent/docker");
        let err = driver.stop(&RuntimeId("x".into())).unwrap_err();
        assert_eq!(err.driver, "oci");
    }

    #[test]
    fn port_parsing() {
        assert_eq!(parse_host_port("0.0.0.0:1234"), Some(("0.0.0.0".into(), 1234)));
        assert_eq!(parse_host_port("[::1]:80"), Some(("::1".into(), 80)));
        assert_eq!(parse_host_port("garbage"), None);
    }
}
