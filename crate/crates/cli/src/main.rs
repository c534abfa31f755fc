use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use rvhpm::harness::{self, CorpusOptions, ImageFormat, ReportFormat, RunConfig};
use rvhpm::pipeline::SimHooks;

const EXIT_OK: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_FAIL: u8 = 2;

#[derive(Parser)]
#[command(name = "rvhpm", version, about = "RV32I pipeline simulator with a hardware performance monitor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a program and report its event counts and model validation.
    Run(RunArgs),
    /// Run a program on both the pipeline and the reference interpreter.
    Compare(CompareArgs),
    /// Differential test over seeded random programs.
    Corpus(CorpusArgs),
    /// Feed event totals (JSON) through the execution model.
    ReplayModel(ReplayArgs),
}

fn parse_u32(s: &str) -> Result<u32, String> {
    let r = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u32::from_str_radix(&h.replace('_', ""), 16),
        None => s.replace('_', "").parse(),
    };
    r.map_err(|e| e.to_string())
}

#[derive(Args, Default)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Program image; overrides the config.
    #[arg(short, long)]
    program: Option<PathBuf>,
    #[arg(long, value_parser = ["flat", "elf32"])]
    image_format: Option<String>,
    #[arg(long, value_parser = parse_u32)]
    mcounteren: Option<u32>,
    #[arg(long, value_parser = parse_u32)]
    mcountinhibit: Option<u32>,
    /// Selector codes for mhpmevent3 onwards, comma separated.
    #[arg(long, value_delimiter = ',')]
    mhpmevent: Option<Vec<u32>>,
    /// Cycle at which to raise the external interrupt line (repeatable).
    #[arg(long = "interrupt")]
    interrupts: Vec<u64>,
    #[arg(long)]
    max_cycles: Option<u64>,
    #[arg(long)]
    max_instret: Option<u64>,
    /// Simulate with exception cancellation of INSTRET disabled.
    #[arg(long, hide = true)]
    disable_cancellation: bool,
    /// Freeze the pipeline for one extra cycle at this cycle.
    #[arg(long, hide = true)]
    inject_stall_at: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.program {
            cfg.program.path = Some(p.clone());
        }
        if let Some(f) = &self.image_format {
            cfg.program.format = if f == "elf32" { ImageFormat::Elf32 } else { ImageFormat::Flat };
        }
        if let Some(v) = self.mcounteren {
            cfg.pmu.mcounteren = v;
        }
        if let Some(v) = self.mcountinhibit {
            cfg.pmu.mcountinhibit = v;
        }
        if let Some(v) = &self.mhpmevent {
            cfg.pmu.mhpmevent = v.clone();
        }
        if !self.interrupts.is_empty() {
            cfg.interrupts.external = self.interrupts.clone();
        }
        if let Some(v) = self.max_cycles {
            cfg.limits.max_cycles = v;
        }
        if let Some(v) = self.max_instret {
            cfg.limits.max_instret = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn hooks(&self) -> SimHooks {
        SimHooks { disable_cancellation: self.disable_cancellation, inject_stall_at: self.inject_stall_at }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Report format; overrides the config.
    #[arg(short, long)]
    report: Option<ReportFormat>,
    /// Write the report here instead of stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Write the per-cycle trace to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Write the reference interpreter trace to this file.
    #[arg(long)]
    oracle_trace: Option<PathBuf>,
    /// Print the diff as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CorpusArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    /// Upper bound on generated body items per program.
    #[arg(long, default_value_t = 2000)]
    max_items: usize,
    /// Write the full JSON report here.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// JSON file with event totals (a run report is accepted).
    totals: PathBuf,
    /// Config whose schedule to use.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(short, long, default_value = "table")]
    report: ReportFormat,
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => Ok(std::io::stdout().write_all(bytes)?),
    }
}

fn run(a: &RunArgs) -> Result<u8> {
    let mut cfg = a.cfg.resolve()?;
    if a.trace.is_some() {
        cfg.report.trace = true;
    }
    let format = a.report.unwrap_or(cfg.report.format);
    let img = harness::load_program(&cfg)?;
    let out = harness::run(&cfg, &img, a.cfg.hooks())?;
    if let (Some(p), Some(t)) = (&a.trace, &out.summary.trace) {
        let text: String = t.iter().map(|c| format!("{c}\n")).collect();
        write_out(Some(p), text.as_bytes())?;
    }
    write_out(a.out.as_deref(), &out.report(format))?;
    if !out.validation.pass {
        eprintln!(
            "model mismatch: measured {} predicted {} (delta {:+})",
            out.validation.measured, out.validation.predicted, out.validation.delta
        );
        return Ok(EXIT_FAIL);
    }
    Ok(EXIT_OK)
}

fn compare(a: &CompareArgs) -> Result<u8> {
    let cfg = a.cfg.resolve()?;
    let img = harness::load_program(&cfg)?;
    let c = harness::compare(&cfg, &img, a.cfg.hooks())?;
    if let Some(p) = &a.oracle_trace {
        write_out(Some(p), c.oracle.to_text().as_bytes())?;
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&c.diff)?);
    } else {
        println!("{}", c.diff.to_string().trim_end());
    }
    Ok(if c.diff.is_empty() { EXIT_OK } else { EXIT_FAIL })
}

fn corpus(a: &CorpusArgs) -> Result<u8> {
    let cfg = a.cfg.resolve()?;
    let opts = CorpusOptions { seed: a.seed, count: a.count, max_items: a.max_items };
    let r = harness::corpus(&cfg, opts)?;
    for e in r.failures() {
        println!("FAIL index={} seed={:#018x}", e.index, e.program_seed);
        if let Some(err) = &e.error {
            println!("  error: {err}");
        }
        for d in &e.diff.entries {
            println!("  {d}");
        }
        if let Some(i) = &e.intrusion {
            println!("  non-intrusion: {i}");
        }
    }
    let failed = r.failures().count();
    let instrs: u64 = r.entries.iter().map(|e| e.instructions).sum();
    println!(
        "corpus seed={} programs={} instructions={} passed={} failed={}",
        a.seed,
        r.entries.len(),
        instrs,
        r.entries.len() - failed,
        failed
    );
    if let Some(p) = &a.out {
        write_out(Some(p), serde_json::to_string_pretty(&r)?.as_bytes())?;
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAIL })
}

fn replay(a: &ReplayArgs) -> Result<u8> {
    let cfg = match &a.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let text = fs::read_to_string(&a.totals).with_context(|| format!("reading {}", a.totals.display()))?;
    let totals = harness::parse_totals(&text)?;
    let b = harness::replay_model(&totals, &cfg.schedule)?;
    let bytes = match a.report {
        ReportFormat::Csv => b.to_csv().into_bytes(),
        ReportFormat::Table => {
            let mut s = harness::report::table(&b);
            s.push_str(&format!("\npredicted cycles {}\n", b.total));
            s.into_bytes()
        }
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&b)?;
            s.push('\n');
            s.into_bytes()
        }
    };
    write_out(None, &bytes)?;
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { EXIT_OK });
        }
    };
    let r = match &cli.command {
        Command::Run(a) => run(a),
        Command::Compare(a) => compare(a),
        Command::Corpus(a) => corpus(a),
        Command::ReplayModel(a) => replay(a),
    };
    match r {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
