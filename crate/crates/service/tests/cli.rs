mod common;

use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use hitloop_core::sim::{MockAuthor, MockAuthorConfig};
use hitloop_service::mock_server;
use serde_json::{json, Value};

fn hitloop(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hitloop"))
        .arg("--store")
        .arg(store)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(store: &Path, args: &[&str]) -> String {
    let out = hitloop(store, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn simulate_report_export_import() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let config = dir.path().join("sim.json");
    std::fs::write(&config, json!({"loops": 2, "quota": 8, "seed_pairs": 15}).to_string()).unwrap();

    let table = ok(&store, &["simulate", "--config", config.to_str().unwrap(), "--unit", "cn"]);
    assert!(table.lines().next().unwrap().contains("V2") && table.contains("V3"));
    assert!(table.contains("Imbalance degree"));
    // A second run into the same store is refused.
    assert!(!hitloop(&store, &["simulate", "--config", config.to_str().unwrap()]).status.success());

    let report: Value = serde_json::from_str(&ok(&store, &["metrics", "report", "--version", "V3", "--format", "json"])).unwrap();
    assert_eq!(report["version"], "V3");
    assert_eq!(report["predecessors"], json!(["V1", "V2"]));
    let table = ok(&store, &["metrics", "report", "--version", "V2", "--version", "V3", "--unit", "hs"]);
    assert_eq!(table.lines().count(), 50);

    let listing = ok(&store, &["corpus", "list"]);
    assert_eq!(listing.lines().count(), 3);
    assert!(listing.lines().all(|l| l.contains("frozen")));

    let labeled = ok(&store, &["corpus", "export", "--version", "V3", "--format", "labeled"]);
    assert_eq!(labeled.lines().count(), 15 + 8 + 8);
    let jsonl = dir.path().join("v2.jsonl");
    ok(&store, &["corpus", "export", "--version", "V2", "--format", "jsonl", "--out", jsonl.to_str().unwrap()]);

    let other = dir.path().join("other");
    let created: Value = serde_json::from_str(&ok(&other, &["corpus", "import", "--file", jsonl.to_str().unwrap(), "--version", "B1"])).unwrap();
    assert_eq!(created["quota"], 8);
    assert_eq!(created["frozen"], false);
    ok(&other, &["corpus", "freeze", "--version", "B1"]);
    assert_eq!(ok(&other, &["corpus", "export", "--version", "B1"]).lines().count(), 8);

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\": \"x\"}\n").unwrap();
    let out = hitloop(&other, &["corpus", "import", "--file", bad.to_str().unwrap(), "--version", "B2"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn loop_commands_against_a_remote_author() {
    let url = common::spawn(mock_server::router(Arc::new(MockAuthor::new(MockAuthorConfig::default()))));
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let author = dir.path().join("author.json");
    std::fs::write(&author, json!({"url": url, "timeout_secs": 10, "retries": 0}).to_string()).unwrap();
    let pool = dir.path().join("pool.txt");
    std::fs::write(&pool, "muslims\tmosques are everywhere\njews\tthey control the banks\n").unwrap();

    let handle: Value = serde_json::from_str(&ok(
        &store,
        &["loop", "start", "--name", "V1", "--strategy", "sbf", "--quota", "3", "--pool", pool.to_str().unwrap(), "--admit-limit", "2"],
    ))
    .unwrap();
    assert_eq!(handle["config"]["strategy"], "SBF");
    assert_eq!(handle["config"]["chunk_admit_limit"], 2);

    let generated = ok(&store, &["loop", "generate", "--loop", "V1", "--chunks", "3", "--author-config", author.to_str().unwrap()]);
    assert_eq!(generated.lines().count(), 3);
    assert!(generated.lines().all(|l| l.contains("admitted 2")), "{generated}");

    // Nothing reviewed yet, so the quota is unmet.
    let out = hitloop(&store, &["loop", "close", "--loop", "V1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("quota"));

    let out = hitloop(&store, &["loop", "start", "--name", "V2", "--strategy", "sbf"]);
    assert!(!out.status.success(), "SBF without a pool must be refused");
}
