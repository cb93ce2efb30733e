//! End-to-end acceptance checks. Prints one PASS or FAIL line per criterion
//! and exits nonzero if any fails.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::Value;

use blockeye_core::monitor::{parse_alert, ProfitLedger, Rule};
use blockeye_core::oracle::{analyze, SinkKind, Verdict};
use blockeye_core::sym::{feasible, ExploreConfig, Feasibility};
use blockeye_core::tx::load_dataset;
use blockeye_testkit::eval::brute_force_sat;
use blockeye_testkit::fixtures::{addr, book, fixture_code, CONTRACTS, NEGATIVE};
use blockeye_testkit::gen::{random_constraints, random_env, random_program, symbols};
use blockeye_testkit::soundness::{check, Check};
use blockeye_testkit::fixture_path;

/// Hand-simulated F-EMN witness: oracle STATICCALL at 38 through the DAI
/// transfer CALL at 105.
const F_EMN_WITNESS: [usize; 28] =
    [38, 39, 40, 43, 44, 46, 47, 48, 50, 51, 52, 55, 56, 61, 63, 64, 65, 67, 68, 70, 71, 73, 75, 77, 79, 81, 102, 105];
const F_EMN_BUDGET: Duration = Duration::from_secs(1);
const SOUNDNESS_PROGRAMS: usize = 1000;
const SOUNDNESS_INPUTS: usize = 3;
const FEASIBILITY_SETS: usize = 1000;
const COINBASE: &str = "0xc0ba5e0000000000000000000000000000000000";
const ATTACK_HASHES: [u64; 5] = [1, 2, 4, 5, 6];

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn blockeye(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockeye")).args(args).env_remove("BLOCKEYE_CONFIG").output().expect("spawn")
}

fn config() -> PathBuf {
    fixture_path("blockeye.toml")
}

/// Hex fixture file for an assembled contract.
fn hex_file(dir: &Path, name: &str) -> PathBuf {
    let p = dir.join(format!("{name}.hex"));
    let text: String = fixture_code(name).iter().map(|b| format!("{b:02x}")).collect();
    std::fs::write(&p, format!("0x{text}\n")).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn c1(dir: &Path) -> Outcome {
    let code = fixture_code("f_emn");
    let start = Instant::now();
    let r = analyze(&code, &book(), &ExploreConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(r.verdict == Verdict::Vulnerable, format!("verdict {:?}", r.verdict))?;
    ensure(r.findings.len() == 1, format!("{} findings", r.findings.len()))?;
    let f = &r.findings[0];
    ensure(f.sink_kind == SinkKind::CallArgument, format!("sink {:?}", f.sink_kind))?;
    ensure(f.witness_trace == F_EMN_WITNESS, format!("witness {:?}", f.witness_trace))?;
    ensure(elapsed < F_EMN_BUDGET, format!("took {elapsed:?}"))?;

    let out = dir.join("f_emn.json");
    let o = blockeye(&["analyze", "--bytecode", s(&hex_file(dir, "f_emn")), "--config", s(&config()), "--out", s(&out)]);
    ensure(o.status.code() == Some(2), format!("analyze exit {:?}", o.status.code()))?;
    let v: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).map_err(|e| e.to_string())?;
    ensure(v["findings"].as_array().map(Vec::len) == Some(1), "cli report finding count")?;
    Ok(format!("1 call_argument finding, source 38 sink 105, {} offsets, {elapsed:?}", F_EMN_WITNESS.len()))
}

fn c2(dir: &Path) -> Outcome {
    for name in NEGATIVE {
        let r = analyze(&fixture_code(name), &book(), &ExploreConfig::default()).map_err(|e| e.to_string())?;
        ensure(r.findings.is_empty(), format!("{name}: {} findings", r.findings.len()))?;
        let o = blockeye(&["analyze", "--bytecode", s(&hex_file(dir, name)), "--config", s(&config())]);
        ensure(matches!(o.status.code(), Some(0) | Some(3)), format!("{name}: exit {:?}", o.status.code()))?;
    }
    let r = analyze(&fixture_code("no_call"), &book(), &ExploreConfig::default()).map_err(|e| e.to_string())?;
    ensure(r.verdict == Verdict::NotFound, format!("no_call verdict {:?}", r.verdict))?;
    Ok(format!("0 findings across {} negative fixtures, no_call not_found", NEGATIVE.len()))
}

fn c3() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0003);
    let (mut covered, mut skipped) = (0, 0);
    for _ in 0..SOUNDNESS_PROGRAMS {
        let blocks = rng.gen_range(1..7);
        let code = random_program(&mut rng, blocks);
        for _ in 0..SOUNDNESS_INPUTS {
            match check(&code, &random_env(&mut rng)) {
                Check::Covered => covered += 1,
                Check::Skipped => skipped += 1,
                Check::Violation(why) => return Err(format!("violation on {code:02x?}: {why}")),
            }
        }
    }
    ensure(covered >= SOUNDNESS_PROGRAMS, format!("only {covered} runs covered"))?;
    Ok(format!("{SOUNDNESS_PROGRAMS} programs, {covered} runs covered, {skipped} skipped, 0 violations"))
}

fn c4() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0xfea5_0004);
    let (mut sat, mut infeasible) = (0, 0);
    for i in 0..FEASIBILITY_SETS {
        let n = if i % 4 == 0 { 2 } else { 1 };
        let count = rng.gen_range(1..5);
        let cs = random_constraints(&mut rng, &symbols(n), count);
        let verdict = feasible(&cs);
        if verdict == Feasibility::Infeasible {
            infeasible += 1;
        }
        if brute_force_sat(&cs, n).is_some() {
            sat += 1;
            ensure(verdict != Feasibility::Infeasible, format!("satisfiable set judged infeasible: {cs:?}"))?;
        }
    }
    Ok(format!("{FEASIBILITY_SETS} sets, {sat} satisfiable, {infeasible} judged infeasible, 0 violations"))
}

fn monitor_lines(dir: &Path, fixture: &str, cfg: &Path) -> Result<Vec<String>, String> {
    let out = dir.join(format!("{fixture}.alerts"));
    let o = blockeye(&["monitor", "--fixtures", s(&fixture_path(fixture)), "--config", s(cfg), "--out", s(&out)]);
    ensure(o.status.code() == Some(0), format!("monitor exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)))?;
    Ok(std::fs::read_to_string(&out).unwrap().lines().map(str::to_string).collect())
}

fn with_threshold(dir: &Path, t: u64) -> PathBuf {
    let text = std::fs::read_to_string(config()).unwrap().replace("threshold_wei = \"10\"", &format!("threshold_wei = \"{t}\""));
    let p = dir.join(format!("threshold{t}.toml"));
    std::fs::write(&p, text).unwrap();
    p
}

fn c5(dir: &Path) -> Outcome {
    let lines = monitor_lines(dir, "attack1.jsonl", &config())?;
    ensure(lines.len() == 1, format!("{} alert lines", lines.len()))?;
    let a = parse_alert(&lines[0]).map_err(|e| e.to_string())?;
    ensure(a.rule == Rule::ProfitThreshold, format!("rule {:?}", a.rule))?;
    ensure(a.profit_wei == BigInt::from(20), format!("profit {}", a.profit_wei))?;
    let expected: Vec<String> = ATTACK_HASHES.iter().map(|i| format!("0x{:032x}{i:032x}", 100)).collect();
    let got: Vec<String> = a.txs.iter().map(|h| h.to_string()).collect();
    ensure(got == expected, format!("dumped {got:?}"))?;
    let next_block = format!("0x{:032x}{:032x}", 101, 0);
    ensure(!got.contains(&next_block), "next-block transaction included")?;

    let quiet = monitor_lines(dir, "attack1.jsonl", &with_threshold(dir, 30))?;
    ensure(quiet.is_empty(), format!("{} alerts at threshold 30", quiet.len()))?;
    Ok("1 profit_threshold alert, profit 20, 5 hashes in order; 0 alerts at threshold 30".into())
}

fn c6() -> Outcome {
    let txs = load_dataset(&fixture_path("closed_block.jsonl")).map_err(|e| e.to_string())?;
    let coinbase = addr(COINBASE);
    let mut all = std::collections::BTreeSet::from([coinbase]);
    for t in &txs {
        all.insert(t.sender);
        all.extend(t.to);
        for x in &t.transfers {
            all.insert(x.from);
            all.insert(x.to);
        }
    }
    let cfg = blockeye_cli::Config::load(&config()).map_err(|e| e.to_string())?;
    let total: BigInt =
        all.iter().map(|a| ProfitLedger::for_address(*a, &txs, &cfg.valuation, Some(coinbase)).profit()).sum();
    ensure(total == BigInt::from(0), format!("sum {total}"))?;
    Ok(format!("sum over {} addresses = 0", all.len()))
}

fn c7(dir: &Path) -> Outcome {
    let mut runs = 0;
    for name in CONTRACTS {
        let hex = hex_file(dir, name);
        let a = blockeye(&["analyze", "--bytecode", s(&hex), "--config", s(&config())]);
        let b = blockeye(&["analyze", "--bytecode", s(&hex), "--config", s(&config())]);
        ensure(a.stdout == b.stdout && a.status == b.status, format!("analyze {name} differs"))?;
        ensure(!a.stdout.is_empty(), format!("analyze {name} printed nothing"))?;
        runs += 1;
    }
    for name in ["attack1.jsonl", "benign.jsonl", "closed_block.jsonl", "empty.jsonl"] {
        let a = blockeye(&["monitor", "--fixtures", s(&fixture_path(name)), "--config", s(&config())]);
        let b = blockeye(&["monitor", "--fixtures", s(&fixture_path(name)), "--config", s(&config())]);
        ensure(a.stdout == b.stdout && a.status.success() && b.status.success(), format!("monitor {name} differs"))?;
        runs += 1;
    }
    Ok(format!("{runs} fixtures byte-identical across two runs"))
}

fn c8() -> Outcome {
    let o = blockeye(&["report", "--alerts", s(&fixture_path("alerts7.jsonl")), "--top", "3"]);
    ensure(o.status.code() == Some(0), format!("report exit {:?}", o.status.code()))?;
    let text = String::from_utf8(o.stdout).unwrap();
    let (latest, top) = text.split_once("\n\ntop attackers\n").ok_or("missing attacker table")?;
    let rows: Vec<&str> = latest.lines().skip(1).collect();
    ensure(rows.len() == 5, format!("{} latest rows", rows.len()))?;
    let blocks: Vec<&str> = rows.iter().filter_map(|r| r.split(" blocks ").nth(1)?.split(' ').next()).collect();
    ensure(blocks == ["306-306", "305-305", "304-304", "303-303", "302-302"], format!("latest {blocks:?}"))?;
    let ranked: Vec<(String, String)> = top
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (f[1][40..].to_string(), f[2].to_string())
        })
        .collect();
    let want = [("a1", "3"), ("b2", "2"), ("c3", "2")].map(|(a, n)| (a.to_string(), n.to_string()));
    ensure(ranked == want, format!("top {ranked:?}"))?;
    Ok("5 latest of 7, top attackers a1:3, b2:2, c3:2".into())
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);
    let criteria: [Criterion; 8] = [
        ("oracle dependency, positive", Box::new(|| c1(d))),
        ("oracle dependency, negatives", Box::new(|| c2(d))),
        ("concrete soundness", Box::new(c3)),
        ("feasibility conservatism", Box::new(c4)),
        ("monitoring end to end", Box::new(|| c5(d))),
        ("conservation", Box::new(c6)),
        ("determinism", Box::new(|| c7(d))),
        ("report surface", Box::new(c8)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
