mod common;

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use common::*;

fn vault(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_ctf-vault"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn validate_clean_archive_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    e2e_archive(tmp.path());
    let out = vault(&["validate", p(tmp.path())], "");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out), "");
}

#[test]
fn validate_reports_errors_and_warnings() {
    let tmp = tempfile::tempdir().unwrap();
    e2e_archive(tmp.path());
    write_challenge(
        tmp.path(),
        "other-2019/broken",
        "id: broken\nevent: Other\nyear: 2019\ncategory: pwn\npoints: 1\nartifact: dist/gone\nflag: f\n",
        &[],
    );
    write_challenge(tmp.path(), "other-2019/bad-cat", "id: x\nevent: E\nyear: 2019\ncategory: cooking\n", &[]);
    std::fs::create_dir_all(tmp.path().join("other-2019/empty")).unwrap();

    let out = vault(&["validate", p(tmp.path())], "");
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.iter().any(|l| l.starts_with("WARNING other-2019/empty NO_MANIFEST ")), "{text}");
    assert!(lines.iter().any(|l| l.starts_with("ERROR other-2019/bad-cat MANIFEST_INVALID")), "{text}");
    assert!(lines.iter().any(|l| l.starts_with("ERROR broken REHOST_MISSING")), "{text}");
    assert!(lines.iter().any(|l| l.starts_with("ERROR broken ARTIFACT_MISSING")), "{text}");
    assert!(lines.iter().any(|l| l.starts_with("WARNING broken EMPTY_DESCRIPTION")), "{text}");

    let json = vault(&["--json", "validate", p(tmp.path())], "");
    assert_eq!(json.status.code(), Some(1));
    for line in stdout(&json).lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["severity"] == "error" || v["severity"] == "warning", "{v}");
    }
}

#[test]
fn validate_unreadable_root_is_runtime_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vault(&["validate", p(&tmp.path().join("missing"))], "");
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(vault(&["frobnicate"], "").status.code(), Some(2));
    assert_eq!(vault(&["flagcheck-gen", "only-id"], "").status.code(), Some(2));
    assert_eq!(vault(&["--config", "/nonexistent/ctf-vault.toml", "validate"], "").status.code(), Some(2));
}

#[test]
fn flagcheck_gen_prints_record() {
    let out = vault(&["flagcheck-gen", "rsa-warmup", "vault{rsa}"], "flag{hello}\n");
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        stdout(&out),
        format!(
            "algorithm: sha256\nchallenge: rsa-warmup\ndigest: {}\nplatform_flag: vault{{rsa}}\n",
            oracle_sha256_hex(b"flag{hello}")
        )
    );

    let empty = vault(&["flagcheck-gen", "rsa-warmup", "vault{rsa}"], "\n");
    assert_eq!(empty.status.code(), Some(2));
    let bad_id = vault(&["flagcheck-gen", "Bad Id", "vault{rsa}"], "flag{x}");
    assert_eq!(bad_id.status.code(), Some(2));
}

#[test]
fn build_writes_recipe_and_runs_local_driver() {
    let tmp = tempfile::tempdir().unwrap();
    let archive = tmp.path().join("archive");
    e2e_archive(&archive);
    let data = tmp.path().join("data");
    let config = tmp.path().join("vault.toml");
    std::fs::write(
        &config,
        format!(
            "[archive]\nroot = {:?}\n[data]\ndir = {:?}\n[runtime]\ndriver = \"local\"\nbase_image = \"base:1\"\n",
            archive, data
        ),
    )
    .unwrap();
    let out_dir = tmp.path().join("out");

    let out = vault(&["--config", p(&config), "build", "rsa-warmup", "--out", p(&out_dir), "--run"], "");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let recipe = std::fs::read_to_string(out_dir.join("rsa-warmup.containerfile")).unwrap();
    assert_eq!(
        recipe,
        "FROM base:1 AS base\nFROM base AS rsa-warmup\nCOPY dist/chall.py /challenge/chall.py\n\
         ENTRYPOINT socat TCP-LISTEN:1337,reuseaddr,fork EXEC:/challenge/chall.py,stderr\n"
    );
    let ledger = std::fs::read_to_string(data.join("local-driver.log")).unwrap();
    assert_eq!(ledger.lines().count(), 1);
    assert!(ledger.starts_with("build rsa-warmup local/rsa-warmup@"), "{ledger}");

    let unknown = vault(&["--config", p(&config), "build", "nope", "--out", p(&out_dir)], "");
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn stats_counts_logged_solves() {
    let tmp = tempfile::tempdir().unwrap();
    let archive = tmp.path().join("archive");
    e2e_archive(&archive);
    let data = tmp.path().join("data");
    std::fs::create_dir_all(&data).unwrap();
    std::fs::write(
        data.join("solves.log"),
        "1700000000 alice rsa-warmup\n1700000001 bob rsa-warmup\n1700000002 alice rsa-warmup\n1700000003 bob ghost\n",
    )
    .unwrap();
    let out = vault(&["stats", "--root", p(&archive), "--data-dir", p(&data)], "");
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let crypto = text.lines().find(|l| l.starts_with("Cryptography")).unwrap();
    assert_eq!(crypto.split_whitespace().collect::<Vec<_>>(), ["Cryptography", "1", "2"]);
    let total = text.lines().find(|l| l.starts_with("Total")).unwrap();
    assert_eq!(total.split_whitespace().collect::<Vec<_>>(), ["Total", "2", "2"]);
    assert!(text.contains("1 solve(s) for challenges not in the archive"), "{text}");

    let json = vault(&["--json", "stats", "--root", p(&archive), "--data-dir", p(&data)], "");
    let v: serde_json::Value = serde_json::from_str(stdout(&json).trim()).unwrap();
    assert_eq!(v["total"]["solves"], 2);
    assert_eq!(v["rows"].as_array().unwrap().len(), 11);
}
