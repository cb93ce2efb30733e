//! Command behavior through the built binary.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use blockeye_testkit::fixture_path;
use blockeye_testkit::fixtures::fixture_code;
use blockeye_testkit::mock_rpc::{MockRpc, Reply};

fn cmd() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_blockeye"));
    c.env_remove("BLOCKEYE_CONFIG");
    c
}

fn blockeye(args: &[&str]) -> Output {
    cmd().args(args).output().unwrap()
}

fn config() -> String {
    fixture_path("blockeye.toml").display().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn hex(name: &str) -> String {
    fixture_code(name).iter().map(|b| format!("{b:02x}")).collect()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn analyze_exit_codes_follow_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [("f_emn", 2, "vulnerable"), ("f_pop", 0, "not_found"), ("f_loop", 3, "inconclusive")];
    for (name, code, verdict) in cases {
        let path = write(dir.path(), name, &hex(name));
        let o = blockeye(&["analyze", "--bytecode", &path, "--config", &config()]);
        assert_eq!(o.status.code(), Some(code), "{name}");
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["verdict"], verdict, "{name}");
    }
}

#[test]
fn analyze_empty_and_malformed_bytecode() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.hex", "");
    let o = blockeye(&["analyze", "--bytecode", &empty, "--config", &config()]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"], "not_found");

    for bad in ["0x6g", "0x600", "0x60016001fe"] {
        let path = write(dir.path(), "bad.hex", bad);
        let o = blockeye(&["analyze", "--bytecode", &path, "--config", &config()]);
        assert_eq!(o.status.code(), Some(1), "{bad}");
        assert!(o.stdout.is_empty());
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn analyze_config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let code = write(dir.path(), "f.hex", &hex("f_emn"));
    let bad = write(dir.path(), "bad.toml", "threshold_wei = \"x\"");
    assert_eq!(blockeye(&["analyze", "--bytecode", &code, "--config", &bad]).status.code(), Some(1));
    let missing = dir.path().join("nope.toml").display().to_string();
    assert_eq!(blockeye(&["analyze", "--bytecode", &code, "--config", &missing]).status.code(), Some(1));
    // usage errors must not look like a verdict
    assert_eq!(blockeye(&["analyze", "--config", &config()]).status.code(), Some(1));
    assert_eq!(blockeye(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(blockeye(&["--help"]).status.code(), Some(0));
}

#[test]
fn config_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let code = write(dir.path(), "f.hex", &hex("f_emn"));
    let o = cmd().args(["analyze", "--bytecode", &code]).env("BLOCKEYE_CONFIG", config()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(blockeye(&["analyze", "--bytecode", &code]).status.code(), Some(1));
}

#[test]
fn analyze_text_report_with_source_lines() {
    let dir = tempfile::tempdir().unwrap();
    let code = write(dir.path(), "f.hex", &hex("f_emn"));
    let map = write(dir.path(), "map.json", r#"{"0": 3, "38": 9, "105": 12}"#);
    let o = blockeye(&["analyze", "--bytecode", &code, "--config", &config(), "--source-map", &map, "--format", "text"]);
    assert_eq!(o.status.code(), Some(2));
    let text = stdout(&o);
    assert!(text.contains("verdict  vulnerable"), "{text}");
    assert!(text.contains("staticcall 0x0026 (line 9) -> call_argument 0x0069 (line 12)"), "{text}");

    let o = blockeye(&["analyze", "--bytecode", &code, "--config", &config(), "--source-map", &map]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["findings"][0]["source_line"], 9);
    assert_eq!(v["findings"][0]["sink_line"], 12);
}

#[test]
fn monitor_file_mode() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("alerts.jsonl");
    let o = blockeye(&["monitor", "--fixtures", &fixture_path("benign.jsonl").display().to_string(), "--config", &config(), "--out", &out.display().to_string()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(&out).unwrap(), b"");

    let o = blockeye(&["monitor", "--fixtures", &fixture_path("attack1.jsonl").display().to_string(), "--config", &config()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);

    let missing = dir.path().join("missing.jsonl").display().to_string();
    assert_eq!(blockeye(&["monitor", "--fixtures", &missing, "--config", &config()]).status.code(), Some(1));

    let text = std::fs::read_to_string(fixture_path("attack1.jsonl")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(0, 1);
    let shuffled = write(dir.path(), "shuffled.jsonl", &lines.join("\n"));
    let o = blockeye(&["monitor", "--fixtures", &shuffled, "--config", &config()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn report_tables() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.jsonl", "");
    let o = blockeye(&["report", "--alerts", &empty]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "latest alerts (0 of 0)\n\ntop attackers\n");

    let attack = blockeye(&["monitor", "--fixtures", &fixture_path("attack1.jsonl").display().to_string(), "--config", &config()]);
    let alerts = write(dir.path(), "attack.jsonl", &stdout(&attack));
    let o = blockeye(&["report", "--alerts", &alerts, "--top", "1"]);
    let text = stdout(&o);
    let rows: Vec<&str> = text.split("top attackers\n").nth(1).unwrap().lines().collect();
    assert_eq!(rows, ["    1. 0xa77ac0000000000000000000000000000000000a 1"]);

    let seven = fixture_path("alerts7.jsonl").display().to_string();
    let o = blockeye(&["report", "--alerts", &seven, "--latest", "2", "--top", "1"]);
    let text = stdout(&o);
    assert!(text.starts_with("latest alerts (2 of 7)\n"), "{text}");
    assert_eq!(text.lines().count(), 1 + 2 + 1 + 1 + 1);

    let bad = write(dir.path(), "bad.jsonl", "{\"rule\": \"burst\"}\n");
    let o = blockeye(&["report", "--alerts", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn disasm_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = blockeye(&["disasm", &write(dir.path(), "a.hex", "0x6001600101")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "0000  PUSH1 0x1\n0002  PUSH1 0x1\n0004  ADD\n");

    let o = blockeye(&["disasm", &write(dir.path(), "e.hex", "")]);
    assert_eq!((o.status.code(), o.stdout.len()), (Some(0), 0));

    let o = blockeye(&["disasm", &write(dir.path(), "b.hex", "6001fe01")]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o), "0000  PUSH1 0x1\n");
    assert!(String::from_utf8_lossy(&o.stderr).contains("offset 2"));
}

const SENDER: &str = "0x00000000000000000000000000000000000000aa";

/// Head at 16. Each block holds two transactions from one sender, so every
/// block trips the burst rule at min_burst 2.
fn chain(method: &str, params: &Value) -> Reply {
    match method {
        "eth_blockNumber" => Reply::Result(json!("0x10")),
        "eth_getBlockByNumber" => {
            let n = u64::from_str_radix(params[0].as_str().unwrap().trim_start_matches("0x"), 16).unwrap();
            let tx = |i: u64| {
                json!({"hash": format!("0x{:064x}", n * 16 + i), "from": SENDER, "to": null,
                       "value": "0x0", "transactionIndex": format!("{i:#x}"), "gasPrice": "0x1"})
            };
            Reply::Result(json!({"transactions": [tx(0), tx(1)]}))
        }
        "eth_getTransactionReceipt" => Reply::Result(json!({"status": "0x1", "gasUsed": "0x1"})),
        "eth_getCode" => Reply::Result(json!(format!("0x{}", hex("f_emn")))),
        _ => Reply::Error(-32601, "method not found"),
    }
}

fn burst_config(dir: &Path) -> String {
    write(dir, "burst.toml", "threshold_wei = \"1000\"\nmin_burst = 2\nconfirmation_depth = 6\n")
}

#[test]
fn rpc_monitor_flushes_pending_alerts_on_interrupt() {
    let server = MockRpc::start(chain);
    let dir = tempfile::tempdir().unwrap();
    let out: PathBuf = dir.path().join("live.jsonl");
    let mut child = cmd()
        .args(["monitor", "--rpc", &server.url, "--config", &burst_config(dir.path()), "--start-block", "9"])
        .args(["--poll-secs", "1", "--out", &out.display().to_string()])
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    // block 9 is evaluated once block 10 arrives; block 10 waits for a later block
    let deadline = Instant::now() + Duration::from_secs(20);
    while std::fs::read_to_string(&out).map(|s| s.lines().count()).unwrap_or(0) < 1 {
        assert!(Instant::now() < deadline, "no alert before the deadline");
        std::thread::sleep(Duration::from_millis(50));
    }
    while !server.methods().iter().filter(|m| *m == "eth_blockNumber").nth(3).is_some() {
        assert!(Instant::now() < deadline, "poller stalled");
        std::thread::sleep(Duration::from_millis(50));
    }
    let killed = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(killed.success());
    let status = child.wait().unwrap();
    let mut err = String::new();
    child.stderr.take().unwrap().read_to_string(&mut err).unwrap();
    assert_eq!(status.code(), Some(0), "{err}");

    let lines: Vec<String> = std::fs::read_to_string(&out).unwrap().lines().map(String::from).collect();
    let windows: Vec<Value> = lines.iter().map(|l| serde_json::from_str::<Value>(l).unwrap()["block_window"].clone()).collect();
    assert_eq!(windows, [json!([9, 9]), json!([10, 10])]);
    assert!(lines.iter().all(|l| l.contains("\"rule\":\"burst\"")));
    let blocks: Vec<Value> = server
        .calls()
        .into_iter()
        .filter(|(m, _)| m == "eth_getBlockByNumber")
        .map(|(_, p)| p[0].clone())
        .collect();
    assert_eq!(blocks, [json!("0x9"), json!("0xa")], "blocks past head minus confirmations were fetched");
}

#[cfg(feature = "fetch-code")]
#[test]
fn analyze_fetches_deployed_code() {
    let server = MockRpc::start(chain);
    let o = blockeye(&["analyze", "--fetch-code", SENDER, "--rpc", &server.url, "--config", &config()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(server.methods(), ["eth_getCode"]);
    assert_eq!(blockeye(&["analyze", "--fetch-code", SENDER, "--config", &config()]).status.code(), Some(1));
}
