use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use matshare::algebra::Matrix;
use matshare::cli::matrix_digest;
use matshare::files::Workspace;
use matshare::transport::Payload;

fn matshare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matshare"))
        .args(args)
        .env_remove("MATSHARE_SEED")
        .output()
        .expect("spawn matshare")
}

fn deal(ws: &Path, r: u32, k: u32, n: u32, seed: u64) -> Output {
    matshare(&[
        "deal",
        "--workspace",
        ws.to_str().unwrap(),
        "--r",
        &r.to_string(),
        "--k",
        &k.to_string(),
        "--n",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
    ])
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn recovered_in_transcript(ws: &Workspace) -> Vec<Matrix> {
    ws.read_transcript()
        .unwrap()
        .envelopes
        .into_iter()
        .filter_map(|e| match e.payload {
            Payload::Recovered(m) => Some(m),
            _ => None,
        })
        .collect()
}

#[test]
fn deal_writes_bulletin_and_one_share_per_participant() {
    let dir = tempfile::tempdir().unwrap();
    let o = deal(dir.path(), 8, 10, 4, 7);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let shares: Vec<_> = fs::read_dir(dir.path().join("shares")).unwrap().collect();
    assert_eq!(shares.len(), 4);
    let bulletin: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("bulletin.json")).unwrap()).unwrap();
    assert_eq!(bulletin["version"], 1);
    assert_eq!(bulletin["matrices"].as_array().unwrap().len(), 10);
    assert_eq!(bulletin["u_prime"].as_array().unwrap().len(), 4);
    let instance: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("instance.json")).unwrap()).unwrap();
    assert_eq!(instance["dealer_private"], true);
    assert_eq!(instance["sigma"].as_array().unwrap().len(), 4);
}

#[test]
fn deal_rejects_r_not_above_n() {
    let dir = tempfile::tempdir().unwrap();
    let o = deal(dir.path(), 4, 6, 4, 1);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("r > n required"), "{}", stderr(&o));
}

#[test]
fn seed_falls_back_to_environment() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    deal(a.path(), 5, 6, 3, 31);
    let o = Command::new(env!("CARGO_BIN_EXE_matshare"))
        .args(["deal", "-w", b.path().to_str().unwrap(), "--r", "5", "--k", "6", "--n", "3"])
        .env("MATSHARE_SEED", "31")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        fs::read(a.path().join("bulletin.json")).unwrap(),
        fs::read(b.path().join("bulletin.json")).unwrap()
    );
}

#[test]
fn honest_run_recovers_the_dealer_secret_without_instance_file() {
    let dir = tempfile::tempdir().unwrap();
    deal(dir.path(), 6, 8, 4, 11);
    let ws = Workspace::new(dir.path());
    let bulletin = ws.read_bulletin().unwrap();
    let secret = ws.read_instance(&bulletin).unwrap().unwrap().secret;
    fs::remove_file(ws.instance_path()).unwrap();

    let o = matshare(&["run", "-w", dir.path().to_str().unwrap(), "--start", "2", "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains(&matrix_digest(&secret)));
    assert_eq!(recovered_in_transcript(&ws), vec![secret.clone()]);

    // A second run appends to the same transcript.
    let o = matshare(&["run", "-w", dir.path().to_str().unwrap(), "--start", "4", "--seed", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(recovered_in_transcript(&ws), vec![secret.clone(), secret]);
}

#[test]
fn cheater_is_caught_before_reconstruction() {
    let dir = tempfile::tempdir().unwrap();
    deal(dir.path(), 6, 8, 4, 12);
    let o = matshare(&["run", "-w", dir.path().to_str().unwrap(), "--cheat", "3:99"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FORGERY DETECTED at verification"));

    let transcript = Workspace::new(dir.path()).read_transcript().unwrap();
    assert!(!transcript.envelopes.is_empty());
    assert!(transcript.envelopes.iter().all(|e| !matches!(
        e.payload,
        Payload::Reveal(_) | Payload::Handback(_) | Payload::Recovered(_)
    )));
}

#[test]
fn run_argument_errors() {
    let dir = tempfile::tempdir().unwrap();
    deal(dir.path(), 5, 6, 3, 13);
    let ws = dir.path().to_str().unwrap();
    assert_eq!(matshare(&["run", "-w", ws, "--start", "4"]).status.code(), Some(64));
    assert_eq!(matshare(&["run", "-w", ws, "--start", "0"]).status.code(), Some(64));
    assert_eq!(matshare(&["run", "-w", ws, "--t", "0"]).status.code(), Some(64));
    assert_eq!(matshare(&["run", "-w", ws, "--cheat", "9:1"]).status.code(), Some(64));

    let missing = dir.path().join("nowhere");
    let o = matshare(&["run", "-w", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn tampered_transcript_fails_the_audit() {
    let dir = tempfile::tempdir().unwrap();
    deal(dir.path(), 5, 6, 3, 14);
    let p = dir.path().to_str().unwrap();
    assert_eq!(matshare(&["run", "-w", p, "--seed", "1"]).status.code(), Some(0));

    let ws = Workspace::new(dir.path());
    let mut t: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.transcript_path()).unwrap()).unwrap();
    let reveal = t["events"]
        .as_array_mut()
        .unwrap()
        .iter_mut()
        .filter(|e| e["kind"] == "reveal")
        .nth(1)
        .unwrap();
    let entry = &mut reveal["payload"][0][0];
    let replacement = if entry == "0" { "1" } else { "0" };
    *entry = serde_json::Value::String(replacement.into());
    fs::write(ws.transcript_path(), serde_json::to_string_pretty(&t).unwrap()).unwrap();

    let o = matshare(&["run", "-w", p, "--seed", "2"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("integrity failure"));
}

#[test]
fn attack_lists_the_dealer_selection() {
    let dir = tempfile::tempdir().unwrap();
    deal(dir.path(), 4, 6, 3, 15);
    let ws = Workspace::new(dir.path());
    let sigma = ws
        .read_instance(&ws.read_bulletin().unwrap())
        .unwrap()
        .unwrap()
        .sigma;
    let p = dir.path().to_str().unwrap();
    assert_eq!(matshare(&["run", "-w", p, "--seed", "1"]).status.code(), Some(0));

    let o = matshare(&["attack", "-w", p, "--mode", "ordered-distinct"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = ws.read_report().unwrap();
    assert!(report.enumerated);
    assert_eq!(report.nodes_explored, 120);
    assert_eq!(report.space.multiset, "56");
    assert_eq!(report.space.ordered_distinct, "120");
    assert_eq!(report.space.ordered_rep, "216");
    assert!(report.solutions.contains(&sigma));
    assert_eq!(report.ratio_hits.len(), 2);
    for hit in &report.ratio_hits {
        assert_eq!(hit.matrix_index, Some(sigma[hit.position - 1]));
    }
}

#[test]
fn attack_guardrail_and_count_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = deal(dir.path(), 11, 20, 10, 16);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let p = dir.path().to_str().unwrap();

    let o = matshare(&["attack", "-w", p]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("20030010"), "{}", stderr(&o));

    let o = matshare(&["attack", "-w", p, "--count-only"]);
    assert_eq!(o.status.code(), Some(0));
    let report = Workspace::new(dir.path()).read_report().unwrap();
    assert!(!report.enumerated);
    assert!(report.solutions.is_empty());
    assert_eq!(report.space.multiset, "20030010");
    assert_eq!(report.space.ordered_distinct, "670442572800");
    assert_eq!(report.space.ordered_rep, "10240000000000");
}

#[test]
fn deal_and_run_are_byte_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        deal(dir.path(), 6, 9, 4, 21);
        let p = dir.path().to_str().unwrap();
        assert_eq!(matshare(&["run", "-w", p, "--start", "3", "--seed", "8"]).status.code(), Some(0));
    }
    for rel in ["bulletin.json", "instance.json", "transcript.json", "shares/P1.json", "shares/P4.json"] {
        assert_eq!(
            fs::read(a.path().join(rel)).unwrap(),
            fs::read(b.path().join(rel)).unwrap(),
            "{rel}"
        );
    }
}
