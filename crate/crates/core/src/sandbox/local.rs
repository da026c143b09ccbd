//! In-process driver for tests and desk-scale use: no container runtime.
//!
//! "Building" records the rendered recipe; "starting" binds one loopback
//! listener per declared endpoint. Each connection receives a banner line
//! naming the challenge and then gets its input echoed back.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use sha2::{Digest, Sha256};

use super::driver::{DriverError, ImageRef, Liveness, Mount, PortBinding, RuntimeDriver, RuntimeId, Started};
use super::plan::{render_build_recipe, BuildPlan};
use crate::registry::EndpointSpec;

const NAME: &str = "local";
const POLL: Duration = Duration::from_millis(5);

pub fn banner(challenge_id: &str) -> String {
    format!("== ctf-vault: {challenge_id} ==\n")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildEvent {
    pub challenge_id: String,
    pub image: ImageRef,
    pub recipe: String,
}

struct Running {
    stop: Arc<AtomicBool>,
}

#[derive(Default)]
pub struct LocalDriver {
    images: Mutex<HashMap<ImageRef, String>>,
    running: Mutex<HashMap<RuntimeId, Running>>,
    builds: Mutex<Vec<BuildEvent>>,
    ledger: Option<PathBuf>,
    next_id: AtomicU64,
    fail_build: AtomicBool,
    fail_start: AtomicBool,
}

impl LocalDriver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Also append one line per build to `path`, so separate processes can
    /// observe what was built.
    pub fn with_ledger(path: impl Into<PathBuf>) -> Self {
        LocalDriver {
            ledger: Some(path.into()),
            ..Self::default()
        }
    }

    pub fn builds(&self) -> Vec<BuildEvent> {
        self.builds.lock().unwrap().clone()
    }

    pub fn running_count(&self) -> usize {
        self.running.lock().unwrap().len()
    }

    /// Makes subsequent builds fail (for exercising error paths).
    pub fn set_fail_build(&self, fail: bool) {
        self.fail_build.store(fail, Ordering::SeqCst);
    }

    pub fn set_fail_start(&self, fail: bool) {
        self.fail_start.store(fail, Ordering::SeqCst);
    }
}

fn serve(listener: TcpListener, banner: String, stop: Arc<AtomicBool>) {
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let banner = banner.clone();
                let stop = stop.clone();
                thread::spawn(move || {
                    let _ = echo(stream, &banner, &stop);
                });
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                log::warn!("local driver: accept failed: {e}");
                break;
            }
        }
    }
}

fn echo(stream: TcpStream, banner: &str, stop: &AtomicBool) -> std::io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(Duration::from_millis(100)))?;
    let mut writer = stream.try_clone()?;
    writer.write_all(banner.as_bytes())?;
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    while !stop.load(Ordering::SeqCst) {
        match reader.read_line(&mut line) {
            Ok(0) => break,
            Ok(_) => {
                writer.write_all(line.as_bytes())?;
                line.clear();
            }
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(())
}

impl RuntimeDriver for LocalDriver {
    fn name(&self) -> &'static str {
        NAME
    }

    fn build(&self, plan: &BuildPlan, _challenge_dir: &Path) -> Result<ImageRef, DriverError> {
        if self.fail_build.load(Ordering::SeqCst) {
            return Err(DriverError::new(NAME, "build failed (injected)"));
        }
        let recipe = render_build_recipe(plan);
        let hash = hex::encode(Sha256::digest(recipe.as_bytes()));
        let image = ImageRef(format!("local/{}@{}", plan.challenge_id, &hash[..12]));
        if let Some(path) = &self.ledger {
            let line = format!("build {} {}\n", plan.challenge_id, image);
            path.parent()
                .map_or(Ok(()), std::fs::create_dir_all)
                .and_then(|_| std::fs::OpenOptions::new().create(true).append(true).open(path))
                .and_then(|mut f| f.write_all(line.as_bytes()))
                .map_err(|e| DriverError::new(NAME, format!("ledger {}: {e}", path.display())))?;
        }
        self.images
            .lock()
            .unwrap()
            .insert(image.clone(), plan.challenge_id.clone());
        self.builds.lock().unwrap().push(BuildEvent {
            challenge_id: plan.challenge_id.clone(),
            image: image.clone(),
            recipe,
        });
        Ok(image)
    }

    fn start(
        &self,
        image: &ImageRef,
        ports: &[EndpointSpec],
        mounts: &[Mount],
    ) -> Result<Started, DriverError> {
        if self.fail_start.load(Ordering::SeqCst) {
            return Err(DriverError::new(NAME, "start failed (injected)"));
        }
        let challenge = self
            .images
            .lock()
            .unwrap()
            .get(image)
            .cloned()
            .ok_or_else(|| DriverError::new(NAME, format!("unknown image {image}")))?;
        for m in mounts {
            std::fs::create_dir_all(&m.host)
                .map_err(|e| DriverError::new(NAME, format!("mount {}: {e}", m.host.display())))?;
        }

        let mut listeners = Vec::with_capacity(ports.len());
        for ep in ports {
            let listener = TcpListener::bind(("127.0.0.1", 0))
                .and_then(|l| l.set_nonblocking(true).map(|_| l))
                .map_err(|e| DriverError::new(NAME, format!("bind for {ep}: {e}")))?;
            let host_port = listener
                .local_addr()
                .map_err(|e| DriverError::new(NAME, e.to_string()))?
                .port();
            listeners.push((
                listener,
                PortBinding {
                    kind: ep.kind,
                    container_port: ep.port,
                    host: "127.0.0.1".into(),
                    host_port,
                },
            ));
        }

        let stop = Arc::new(AtomicBool::new(false));
        let mut bindings = Vec::with_capacity(listeners.len());
        for (listener, binding) in listeners {
            let (banner, stop) = (banner(&challenge), stop.clone());
            thread::spawn(move || serve(listener, banner, stop));
            bindings.push(binding);
        }

        let n = self.next_id.fetch_add(1, Ordering::SeqCst);
        let id = RuntimeId(format!("local-{n}"));
        self.running
            .lock()
            .unwrap()
            .insert(id.clone(), Running { stop });
        Ok(Started { id, bindings })
    }

    fn stop(&self, id: &RuntimeId) -> Result<(), DriverError> {
        let running = self
            .running
            .lock()
            .unwrap()
            .remove(id)
            .ok_or_else(|| DriverError::new(NAME, format!("no such runtime {id}")))?;
        running.stop.store(true, Ordering::SeqCst);
        Ok(())
    }

    fn status(&self, id: &RuntimeId) -> Result<Liveness, DriverError> {
        Ok(if self.running.lock().unwrap().contains_key(id) {
            Liveness::Alive
        } else {
            Liveness::Exited
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::EndpointKind;
    use crate::sandbox::plan::WORKSPACE_MOUNT;
    use std::io::Read;

    fn plan() -> BuildPlan {
        BuildPlan {
            challenge_id: "echo".into(),
            base_ref: "base".into(),
            stages: vec![],
            upstream: None,
            exposed_ports: vec![EndpointSpec { kind: EndpointKind::Tcp, port: 1337 }],
            workspace_mount: WORKSPACE_MOUNT.into(),
        }
    }

    #[test]
    fn tcp_endpoint_sends_banner_and_echoes() {
        let d = LocalDriver::new();
        let p = plan();
        let img = d.build(&p, Path::new(".")).unwrap();
        let started = d.start(&img, &p.exposed_ports, &[]).unwrap();
        assert_eq!(started.bindings.len(), 1);
        let b = &started.bindings[0];
        assert_eq!(b.container_port, 1337);

        let mut s = TcpStream::connect((b.host.as_str(), b.host_port)).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
        let mut reader = BufReader::new(s.try_clone().unwrap());
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        assert_eq!(line, banner("echo"));
        s.write_all(b"hello\n").unwrap();
        line.clear();
        reader.read_line(&mut line).unwrap();
        assert_eq!(line, "hello\n");

        assert_eq!(d.status(&started.id).unwrap(), Liveness::Alive);
        d.stop(&started.id).unwrap();
        assert_eq!(d.status(&started.id).unwrap(), Liveness::Exited);
        assert!(d.stop(&started.id).is_err());

        // the listener goes away shortly after stop
        thread::sleep(Duration::from_millis(50));
        let refused = TcpStream::connect((b.host.as_str(), b.host_port))
            .map(|mut s| {
                let mut buf = [0u8; 1];
                s.set_read_timeout(Some(Duration::from_millis(200))).unwrap();
                matches!(s.read(&mut buf), Ok(0) | Err(_))
            })
            .unwrap_or(true);
        assert!(refused);
    }

    #[test]
    fn ledger_records_builds() {
        let tmp = tempfile::tempdir().unwrap();
        let ledger = tmp.path().join("driver.log");
        let d = LocalDriver::with_ledger(&ledger);
        let img = d.build(&plan(), Path::new(".")).unwrap();
        assert_eq!(std::fs::read_to_string(&ledger).unwrap(), format!("build echo {img}\n"));
        assert_eq!(d.builds().len(), 1);
    }

    #[test]
    fn injected_failures_and_unknown_images() {
        let d = LocalDriver::new();
        d.set_fail_build(true);
        assert!(d.build(&plan(), Path::new(".")).is_err());
        d.set_fail_build(false);
        assert!(d.start(&ImageRef("nope".into()), &[], &[]).is_err());
    }
}
