use std::fs;
use std::net::TcpListener;
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::thread::sleep;
use std::time::{Duration, Instant};

use baitmail_core::config::ServiceConfig;
use baitmail_core::orchestrator::Orchestrator;
use serde_json::{json, Value};

struct Daemon(Child);

impl Drop for Daemon {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn wait_for<T>(what: &str, mut probe: impl FnMut() -> Option<T>) -> T {
    let deadline = Instant::now() + Duration::from_secs(20);
    loop {
        if let Some(v) = probe() {
            return v;
        }
        assert!(Instant::now() < deadline, "timed out waiting for {what}");
        sleep(Duration::from_millis(100));
    }
}

#[test]
fn shipped_service_configs_build() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/service");
    for name in ["instance-a.toml", "instance-b.toml"] {
        let cfg = ServiceConfig::load(&dir.join(name)).unwrap();
        let orch = Orchestrator::new(
            cfg.orchestrator_config(),
            cfg.build_responders().unwrap(),
            cfg.build_provider().unwrap(),
        )
        .unwrap();
        assert_eq!(orch.responders().len(), 3);
    }
}

#[test]
fn daemon_ingests_reviews_and_baits() {
    let dir = tempfile::tempdir().unwrap();
    let reports = dir.path().join("reports");
    fs::create_dir_all(&reports).unwrap();
    fs::write(
        reports.join("r1.txt"),
        "From: lawyer@scam.test\nSubject: Unclaimed funds\n\nYou are the beneficiary of an unclaimed estate. Reply now.\n",
    )
    .unwrap();
    let config = dir.path().join("instance.toml");
    fs::write(
        &config,
        format!(
            "poll_interval_secs = 1\n\n[instance]\ndomain = \"bait.test\"\nmaster_seed = 3\ndata_dir = \"{}\"\n\n\
             [[responders]]\nid = \"classifier-template\"\nkind = \"classifier_template\"\n\n[provider]\nkind = \"loopback\"\n",
            dir.path().join("data").display()
        ),
    )
    .unwrap();
    let port = free_port();
    let base = format!("http://127.0.0.1:{port}");
    let _daemon = Daemon(
        Command::new(env!("CARGO_BIN_EXE_baitmaild"))
            .args(["--config", config.to_str().unwrap(), "--listen", &format!("127.0.0.1:{port}")])
            .args(["--reports", reports.to_str().unwrap(), "--token", "t0k"])
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .unwrap(),
    );
    let client = reqwest::blocking::Client::new();
    let get = |path: &str| -> Option<Value> {
        let resp = client.get(format!("{base}{path}")).bearer_auth("t0k").send().ok()?;
        resp.status().is_success().then(|| resp.json().unwrap())
    };

    let pending = wait_for("the crawled report", || {
        get("/api/targets?state=pending_review").filter(|v| v.as_array().is_some_and(|a| !a.is_empty()))
    });
    assert_eq!(pending[0]["address"], "lawyer@scam.test");
    assert_eq!(pending[0]["solicitation"]["subject"], "Unclaimed funds");

    let unauthorized = client.get(format!("{base}/api/targets")).send().unwrap();
    assert_eq!(unauthorized.status().as_u16(), 401);

    let approved = client
        .post(format!("{base}/api/targets/lawyer@scam.test/review"))
        .bearer_auth("t0k")
        .json(&json!({"decision": "approve", "note": "verified"}))
        .send()
        .unwrap();
    assert_eq!(approved.status().as_u16(), 200);

    let conv = wait_for("the bait", || {
        get("/api/conversations?state=baited").and_then(|v| v.as_array().and_then(|a| a.first().cloned()))
    });
    assert_eq!(conv["outbound"], 1);
    let persona = format!("{}@bait.test", conv["persona"]["mailname"].as_str().unwrap());

    let accepted = client
        .post(format!("{base}/inbound"))
        .json(&json!({"from": "lawyer@scam.test", "to": persona, "subject": "Re: Unclaimed funds",
                      "text": "Send your bank name and full address."}))
        .send()
        .unwrap();
    assert_eq!(accepted.status().as_u16(), 202);
    let id = conv["id"].as_str().unwrap().to_owned();
    let replied = wait_for("the reply", || {
        get(&format!("/api/conversations/{id}")).filter(|c| c["outbound"] == 2)
    });
    assert_eq!(replied["state"], "engaged");
    assert_eq!(replied["inbound"], 1);
    assert!(dir.path().join("data/events.jsonl").exists());
}
