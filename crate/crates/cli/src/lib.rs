//! Command implementations behind the `blockeye` binary.
//!
//! Each command writes to caller-supplied streams and returns the process
//! exit code, so the whole surface can be driven in-process.

pub mod config;

use std::fs::File;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use blockeye_core::chain::{FileSource, RpcClient, RpcSource, StreamSource};
use blockeye_core::evm::{disassemble_prefix, parse_hex};
use blockeye_core::monitor::{parse_alert, top_attackers, Alert, Monitor};
use blockeye_core::oracle::{analyze, render_report, ReportFormat, SourceMap, Verdict};

pub use config::{Config, ConfigError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VULNERABLE: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "blockeye", version, about = "Oracle-dependency analysis and attack monitoring for EVM contracts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Find oracle-dependent state updates in contract bytecode.
    Analyze(AnalyzeArgs),
    /// Stream transactions and emit profit alerts as JSONL.
    Monitor(MonitorArgs),
    /// Summarize an alerts file: latest alerts and top attackers.
    Report(ReportArgs),
    /// Print one decoded instruction per line.
    Disasm(DisasmArgs),
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Text,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("input").required(true)))]
pub struct AnalyzeArgs {
    /// Hex bytecode file.
    #[arg(long, group = "input")]
    pub bytecode: Option<PathBuf>,
    /// Read the bytecode deployed at this address instead (needs --rpc).
    #[cfg(feature = "fetch-code")]
    #[arg(long, group = "input", requires = "rpc", value_name = "ADDRESS")]
    pub fetch_code: Option<String>,
    /// JSON-RPC endpoint for --fetch-code.
    #[cfg(feature = "fetch-code")]
    #[arg(long, value_name = "URL")]
    pub rpc: Option<String>,
    #[arg(long, env = "BLOCKEYE_CONFIG")]
    pub config: PathBuf,
    /// Report destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON object mapping bytecode offsets to source lines.
    #[arg(long)]
    pub source_map: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true)))]
pub struct MonitorArgs {
    /// JSONL transaction fixture, optionally gzip-compressed.
    #[arg(long, group = "source")]
    pub fixtures: Option<PathBuf>,
    /// JSON-RPC endpoint to poll.
    #[arg(long, group = "source", value_name = "URL")]
    pub rpc: Option<String>,
    #[arg(long, env = "BLOCKEYE_CONFIG")]
    pub config: PathBuf,
    /// Alert destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Transactions per batch in fixture mode.
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    /// First block to poll in rpc mode; defaults to the confirmed head.
    #[arg(long)]
    pub start_block: Option<u64>,
    /// Seconds between polls when no confirmed block is ready.
    #[arg(long, default_value_t = 12)]
    pub poll_secs: u64,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub alerts: PathBuf,
    /// Rows in the attacker table.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Alerts in the latest section.
    #[arg(long, default_value_t = 5)]
    pub latest: usize,
}

#[derive(Args, Debug)]
pub struct DisasmArgs {
    /// Hex bytecode file.
    pub path: PathBuf,
}

/// Runs a parsed command. `stop` is polled by `monitor` for a clean shutdown.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write, stop: &AtomicBool) -> i32 {
    let result = match cli.command {
        Command::Analyze(a) => cmd_analyze(&a, out),
        Command::Monitor(a) => cmd_monitor(&a, out, stop),
        Command::Report(a) => cmd_report(&a, out),
        Command::Disasm(a) => cmd_disasm(&a.path, out, err),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

type CmdResult = Result<i32, Box<dyn std::error::Error>>;

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn sink<'a>(path: Option<&Path>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>, String> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| format!("cannot write {}: {e}", p.display()))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(stdout)),
    }
}

fn bytecode(args: &AnalyzeArgs) -> Result<Vec<u8>, Box<dyn std::error::Error>> {
    #[cfg(feature = "fetch-code")]
    if let Some(addr) = &args.fetch_code {
        let address = addr.to_ascii_lowercase().parse().map_err(|e| format!("--fetch-code: {e}"))?;
        let url = args.rpc.as_deref().ok_or("--fetch-code needs --rpc")?;
        let policy = blockeye_core::chain::RetryPolicy { max_attempts: Some(5), ..Default::default() };
        let mut client = RpcClient::new(url).with_retry(policy, std::thread::sleep);
        return Ok(client.get_code(address)?);
    }
    let path = args.bytecode.as_deref().ok_or("--bytecode is required")?;
    Ok(parse_hex(&read(path)?)?)
}

pub fn cmd_analyze(args: &AnalyzeArgs, stdout: &mut dyn Write) -> CmdResult {
    let config = Config::load(&args.config)?;
    let code = bytecode(args)?;
    let map = match &args.source_map {
        Some(p) => Some(SourceMap::from_json(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?),
        None => None,
    };
    let report = analyze(&code, &config.book, &config.explore)?;
    let format = match args.format {
        Format::Json => ReportFormat::Json,
        Format::Text => ReportFormat::Text,
    };
    let mut out = sink(args.out.as_deref(), stdout)?;
    out.write_all(&render_report(&report, format, map.as_ref()))?;
    out.flush()?;
    Ok(match report.verdict {
        Verdict::NotFound => EXIT_OK,
        Verdict::Vulnerable => EXIT_VULNERABLE,
        Verdict::Inconclusive(_) => EXIT_INCONCLUSIVE,
    })
}

fn emit(out: &mut dyn Write, alerts: &[Alert]) -> io::Result<()> {
    for a in alerts {
        writeln!(out, "{}", a.to_jsonl())?;
    }
    Ok(())
}

/// Sleeps up to `total`, waking early when `stop` is set.
fn nap(total: Duration, stop: &AtomicBool) {
    let end = Instant::now() + total;
    while !stop.load(Ordering::SeqCst) {
        let now = Instant::now();
        if now >= end {
            break;
        }
        std::thread::sleep((end - now).min(Duration::from_millis(100)));
    }
}

pub fn cmd_monitor(args: &MonitorArgs, stdout: &mut dyn Write, stop: &AtomicBool) -> CmdResult {
    let config = Config::load(&args.config)?;
    let (mut source, live): (Box<dyn StreamSource>, bool) = match (&args.fixtures, &args.rpc) {
        (Some(path), _) => (Box::new(FileSource::open(path, args.batch_size)?), false),
        (None, Some(url)) => {
            (Box::new(RpcSource::new(RpcClient::new(url), args.start_block, config.confirmation_depth)), true)
        }
        (None, None) => return Err("one of --fixtures or --rpc is required".into()),
    };
    let mut monitor = Monitor::new(config.rules.clone(), config.valuation.clone());
    let mut out = sink(args.out.as_deref(), stdout)?;
    let result = (|| -> Result<(), Box<dyn std::error::Error>> {
        while !stop.load(Ordering::SeqCst) {
            let Some(batch) = source.next_batch()? else { break };
            if batch.is_empty() && live {
                nap(Duration::from_secs(args.poll_secs), stop);
            }
            for tx in batch {
                emit(&mut out, &monitor.push(tx)?)?;
            }
            out.flush()?;
        }
        Ok(())
    })();
    // pending targets are evaluated on a clean end and on interrupt alike
    if result.is_ok() {
        emit(&mut out, &monitor.finish())?;
    }
    out.flush()?;
    result.map(|_| EXIT_OK)
}

pub fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> CmdResult {
    let file = File::open(&args.alerts).map_err(|e| format!("cannot read {}: {e}", args.alerts.display()))?;
    let mut alerts = Vec::new();
    for (i, line) in io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        alerts.push(parse_alert(&line).map_err(|e| format!("line {}: {e}", i + 1))?);
    }
    write!(out, "{}", render_summary(&alerts, args.latest, args.top))?;
    Ok(EXIT_OK)
}

/// The two report tables. Latest alerts come newest first, by file order.
pub fn render_summary(alerts: &[Alert], latest: usize, top: usize) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let shown: Vec<&Alert> = alerts.iter().rev().take(latest).collect();
    let _ = writeln!(s, "latest alerts ({} of {})", shown.len(), alerts.len());
    for a in shown {
        let _ = writeln!(
            s,
            "  {:<16} {} blocks {}-{} profit_wei {} txs {}",
            a.rule.as_str(),
            a.sender,
            a.block_window.0,
            a.block_window.1,
            a.profit_wei,
            a.txs.len()
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "top attackers");
    for (rank, (addr, count)) in top_attackers(alerts, top).iter().enumerate() {
        let _ = writeln!(s, "  {:>3}. {} {}", rank + 1, addr, count);
    }
    s
}

pub fn cmd_disasm(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let code = parse_hex(&read(path)?)?;
    let (ins, failure) = disassemble_prefix(&code);
    for i in &ins {
        writeln!(out, "{:04x}  {}", i.offset, i)?;
    }
    out.flush()?;
    match failure {
        None => Ok(EXIT_OK),
        Some(e) => {
            writeln!(err, "error: {e}")?;
            Ok(EXIT_ERROR)
        }
    }
}
