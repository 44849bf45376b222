//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on
//! any failure.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, ChildStdout, Command, Stdio};
use std::time::Instant;

use serde_json::Value;
use taskbot_ingest::{augmenters_by_name, load_documents, run_pipeline, PipelineReport};

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn check_ingestion() -> Outcome {
    let docs = load_documents(&common::fixtures().join("pages")).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    let mut reports: Vec<PipelineReport> = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let augmenters = augmenters_by_name(&["spoken", "media"], None)?;
        reports.push(run_pipeline(&docs, &augmenters, dir.path()).map_err(|e| e.to_string())?);
        outputs.push(dir);
    }
    let r = &reports[0];
    let counts = [
        r.read,
        r.parsed_structured,
        r.parsed_heuristic,
        r.skipped,
        r.dropped,
        r.written,
    ];
    if counts != [10, 6, 2, 2, 0, 8] {
        return Err(format!(
            "read {} structured {} heuristic {} skipped {} dropped {} written {}",
            counts[0], counts[1], counts[2], counts[3], counts[4], counts[5]
        ));
    }
    if reports[0] != reports[1] {
        return Err("reports differ between runs".into());
    }
    let mut names: Vec<String> = fs::read_dir(outputs[0].path())
        .map_err(|e| e.to_string())?
        .filter_map(Result::ok)
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    for name in &names {
        let a = fs::read(outputs[0].path().join(name)).map_err(|e| e.to_string())?;
        let b = fs::read(outputs[1].path().join(name)).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("{name} differs between runs"));
        }
    }
    Ok(format!(
        "10 read, 6+2 parsed, 2 skipped, 8 written, {} artifacts identical",
        names.len()
    ))
}

struct Server {
    child: Child,
    base: String,
    _stdout: BufReader<ChildStdout>,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn start_server(logs: &Path) -> Result<Server, String> {
    let fx = common::fixtures();
    let mut child = Command::new(env!("CARGO_BIN_EXE_taskbot"))
        .args(["serve", "--port", "0", "--gateway", "mock", "--decider", "pattern"])
        .arg("--corpus")
        .arg(fx.join("corpus"))
        .arg("--logs")
        .arg(logs)
        .arg("--canned")
        .arg(fx.join("mock/canned.jsonl"))
        .arg("--fixed-clock-ms")
        .arg(common::GOLDEN_CLOCK_MS.to_string())
        .env_remove("GATEWAY_BACKEND")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| format!("spawn: {e}"))?;
    let mut stdout = BufReader::new(child.stdout.take().ok_or("no stdout")?);
    let mut line = String::new();
    stdout.read_line(&mut line).map_err(|e| e.to_string())?;
    let base = line
        .trim()
        .strip_prefix("listening on ")
        .ok_or_else(|| format!("unexpected first line {line:?}"))?
        .to_string();
    Ok(Server {
        child,
        base,
        _stdout: stdout,
    })
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

fn call(response: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<(u16, Value), String> {
    let mut response = response.map_err(|e| e.to_string())?;
    let status = response.status().as_u16();
    let text = response.body_mut().read_to_string().map_err(|e| e.to_string())?;
    let body = serde_json::from_str(&text).map_err(|e| format!("{status}: {e}: {text}"))?;
    Ok((status, body))
}

fn post_turn(agent: &ureq::Agent, base: &str, id: &str, utterance: &str) -> Result<Value, String> {
    let (status, body) = call(
        agent
            .post(format!("{base}/v1/sessions/{id}/turns"))
            .send_json(serde_json::json!({ "utterance": utterance })),
    )?;
    if status != 200 {
        return Err(format!("turn {utterance:?} answered {status}: {body}"));
    }
    Ok(body)
}

fn check_crash_recovery() -> Outcome {
    let logs = tempfile::tempdir().map_err(|e| e.to_string())?;
    let script = common::golden_script();
    let golden = common::golden_lines();
    let agent = agent();

    let mut server = start_server(logs.path())?;
    let (status, created) = call(agent.post(format!("{}/v1/sessions", server.base)).send_empty())?;
    if status != 201 {
        return Err(format!("create answered {status}"));
    }
    let id = created["session_id"].as_str().ok_or("no session id")?.to_string();
    for utterance in &script[..6] {
        post_turn(&agent, &server.base, &id, utterance)?;
    }
    server.child.kill().map_err(|e| e.to_string())?;
    server.child.wait().map_err(|e| e.to_string())?;
    drop(server);

    let server = start_server(logs.path())?;
    let (status, history) = call(agent.get(format!("{}/v1/sessions/{id}/history", server.base)).call())?;
    let len = history.as_array().map_or(0, Vec::len);
    if status != 200 || len != 6 {
        return Err(format!("history after restart: status {status}, {len} turns"));
    }
    let log_path = logs.path().join(format!("{id}.jsonl"));
    let read_log = || -> Result<Vec<String>, String> {
        Ok(fs::read_to_string(&log_path)
            .map_err(|e| e.to_string())?
            .lines()
            .map(str::to_string)
            .collect())
    };
    let before = read_log()?;
    let state = |line: &str| serde_json::from_str::<Value>(line).map(|v| v["state"].clone()).ok();
    if before.len() != 6 || state(&before[5]).is_none() || state(&before[5]) != state(&golden[5]) {
        return Err("restored phase and cursor differ from the golden turn 6".into());
    }
    let reply = post_turn(&agent, &server.base, &id, &script[6])?;
    let want: Value = serde_json::from_str(&golden[6]).map_err(|e| e.to_string())?;
    if reply["response_text"] != want["system_response"] || reply["screen"] != want["screen"] {
        return Err(format!("turn 7 reply differs: {}", reply["response_text"]));
    }
    let after = read_log()?;
    if after.len() != 7 || after[6] != golden[6] {
        return Err("turn 7 log line differs from the golden".into());
    }
    Ok("6 turns restored after kill, turn 7 byte-identical".into())
}

fn main() {
    let criteria: [(&str, Check); 8] = [
        ("action-roundtrip", || common::check_action_roundtrip(10_000)),
        ("decision-determinism-and-scope", common::check_decision_safety),
        ("golden-replay", common::check_golden_replay),
        ("mutation-safety", || common::check_mutation_safety(10_000)),
        ("bm25-oracle", || common::check_retrieval_oracle(200, 200)),
        ("ingestion-report", check_ingestion),
        ("turn-latency", || common::check_latency(1000)),
        ("crash-recovery", check_crash_recovery),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = check();
        let elapsed = started.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{elapsed:.2?}]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{elapsed:.2?}]");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
