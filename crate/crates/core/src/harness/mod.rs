//! Batch orchestration: building machines from a [`RunConfig`], running
//! them, comparing against the oracle and driving random corpora.

pub mod config;
pub mod loader;
pub mod report;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::events::EventTotals;
use crate::hart::{HartState, MapError};
use crate::oracle::{self, gen, Diff, Oracle, OracleError, OracleTrace};
use crate::pipeline::{Limits, RunSummary, SimConfig, SimError, SimHooks, Simulator};
use crate::timing::{self, ModelBreakdown, ModelError, PenaltySchedule, ValidationReport};

pub use config::{ConfigError, ImageFormat, ReportFormat, RunConfig};
pub use loader::{LoadError, LoadedImage, Segment};
pub use report::{emit_report, JsonReport};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no program given")]
    NoProgram,
    #[error("the reference interpreter does not model interrupts; remove the interrupt schedule")]
    OracleInterrupts,
    #[error("cannot parse event totals: {0}")]
    Totals(String),
}

impl LoadedImage {
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.entry.to_le_bytes());
        for s in &self.segments {
            h.update(s.addr.to_le_bytes());
            h.update((s.bytes.len() as u64).to_le_bytes());
            h.update(&s.bytes);
        }
        hex::encode(h.finalize())
    }
}

/// Reads the program named by the config.
pub fn load_program(cfg: &RunConfig) -> Result<LoadedImage, HarnessError> {
    let path = cfg.program.path.as_deref().ok_or(HarnessError::NoProgram)?;
    Ok(LoadedImage::from_path(path, cfg.program.format, &cfg.memory_map())?)
}

/// Initial architectural state: image installed and the PMU configured as
/// the config asks, before the first cycle.
pub fn initial_hart(cfg: &RunConfig, img: &LoadedImage) -> Result<HartState, HarnessError> {
    let mut hart = HartState::new(cfg.memory_map())?;
    img.install(&mut hart)?;
    let hpm = &mut hart.csr.hpm;
    hpm.mcounteren = cfg.pmu.mcounteren;
    hpm.mcountinhibit = cfg.pmu.mcountinhibit;
    for i in 0..config::PROGRAMMABLE_COUNTERS {
        hpm.set_selector(i + 3, cfg.selector(i));
    }
    Ok(hart)
}

pub fn sim_config(cfg: &RunConfig, hooks: SimHooks) -> SimConfig {
    SimConfig {
        schedule: cfg.schedule,
        external_interrupts: cfg.interrupts.external.clone(),
        limits: cfg.limits,
        trace: cfg.report.trace,
        hooks,
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub validation: ValidationReport,
    pub program_digest: String,
}

impl RunOutcome {
    pub fn report(&self, format: ReportFormat) -> Vec<u8> {
        emit_report(&self.summary, &self.validation, &self.program_digest, format)
    }
}

pub fn run(cfg: &RunConfig, img: &LoadedImage, hooks: SimHooks) -> Result<RunOutcome, HarnessError> {
    let hart = initial_hart(cfg, img)?;
    let mut sim = Simulator::new(hart, img.entry, sim_config(cfg, hooks))?;
    let mut summary = sim.run()?;
    summary.config_digest = cfg.digest();
    let validation = timing::validate(&summary.totals, summary.cycles, &cfg.schedule)?;
    Ok(RunOutcome { summary, validation, program_digest: img.digest() })
}

pub fn run_oracle(cfg: &RunConfig, img: &LoadedImage) -> Result<OracleTrace, HarnessError> {
    if !cfg.interrupts.external.is_empty() {
        return Err(HarnessError::OracleInterrupts);
    }
    let hart = initial_hart(cfg, img)?;
    // every instruction costs at least one cycle
    let limits = Limits { max_instret: cfg.limits.max_instret.min(cfg.limits.max_cycles), ..cfg.limits };
    let mut trace = Oracle::new(hart, img.entry, cfg.schedule, limits).run()?;
    trace.config_digest = cfg.digest();
    Ok(trace)
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub oracle: OracleTrace,
    pub summary: RunSummary,
    pub diff: Diff,
}

pub fn compare(cfg: &RunConfig, img: &LoadedImage, hooks: SimHooks) -> Result<CompareOutcome, HarnessError> {
    let oracle = run_oracle(cfg, img)?;
    let summary = run(cfg, img, hooks)?.summary;
    let diff = oracle::compare(&oracle, &summary);
    Ok(CompareOutcome { oracle, summary, diff })
}

/// A PMU configuration differing from `cfg` in every selector, enable and
/// inhibit bit.
pub fn toggled_pmu(cfg: &RunConfig) -> RunConfig {
    let mut t = cfg.clone();
    t.pmu.mcounteren = !cfg.pmu.mcounteren;
    t.pmu.mcountinhibit = !cfg.pmu.mcountinhibit;
    t.pmu.mhpmevent = (0..config::PROGRAMMABLE_COUNTERS)
        .map(|i| if cfg.selector(i) == 0 { (i as u32 % 11) + 1 } else { 0 })
        .collect();
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CorpusOptions {
    pub seed: u64,
    pub count: usize,
    /// Upper bound on generated body items per program.
    pub max_items: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusEntry {
    pub index: usize,
    pub program_seed: u64,
    pub words: usize,
    pub instructions: u64,
    pub cycles: u64,
    pub diff: Diff,
    /// Set when a run under the toggled PMU configuration changed cycles,
    /// totals or architectural state.
    pub intrusion: Option<String>,
    pub error: Option<String>,
}

impl CorpusEntry {
    pub fn passed(&self) -> bool {
        self.diff.is_empty() && self.intrusion.is_none() && self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusReport {
    pub options: CorpusOptions,
    pub entries: Vec<CorpusEntry>,
}

impl CorpusReport {
    pub fn failures(&self) -> impl Iterator<Item = &CorpusEntry> {
        self.entries.iter().filter(|e| !e.passed())
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }
}

/// Seed of the `index`-th program of a corpus.
pub fn program_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn corpus_entry(cfg: &RunConfig, toggled: &RunConfig, index: usize, seed: u64, max_items: usize) -> CorpusEntry {
    let p = gen::generate(seed, max_items, &cfg.memory_map());
    let img = LoadedImage { entry: cfg.memory_map().rom.base, segments: vec![Segment { addr: cfg.memory_map().rom.base, bytes: p.image() }] };
    let mut e = CorpusEntry {
        index,
        program_seed: seed,
        words: p.words.len(),
        instructions: 0,
        cycles: 0,
        diff: Diff::default(),
        intrusion: None,
        error: None,
    };
    let base = match compare(cfg, &img, SimHooks::default()) {
        Ok(c) => c,
        Err(err) => {
            e.error = Some(err.to_string());
            return e;
        }
    };
    e.instructions = base.oracle.records.len() as u64;
    e.cycles = base.summary.cycles;
    e.diff = base.diff;
    match run(toggled, &img, SimHooks::default()) {
        Ok(t) => {
            let s = &t.summary;
            let b = &base.summary;
            let mut why = Vec::new();
            if s.cycles != b.cycles {
                why.push(format!("cycles {} -> {}", b.cycles, s.cycles));
            }
            if s.digest != b.digest {
                why.push("architectural digest changed".to_owned());
            }
            if s.totals != b.totals {
                why.push("event totals changed".to_owned());
            }
            if s.exit_code != b.exit_code || s.console != b.console {
                why.push("program output changed".to_owned());
            }
            if !why.is_empty() {
                e.intrusion = Some(why.join("; "));
            }
        }
        Err(err) => e.error = Some(format!("toggled run: {err}")),
    }
    e
}

/// Generates `count` programs from `seed` and checks each for oracle
/// equivalence and PMU non-intrusion. Programs run in parallel; the report
/// is ordered by index and depends only on the seed.
pub fn corpus(cfg: &RunConfig, opts: CorpusOptions) -> Result<CorpusReport, HarnessError> {
    if !cfg.interrupts.external.is_empty() {
        return Err(HarnessError::OracleInterrupts);
    }
    cfg.validate()?;
    let toggled = toggled_pmu(cfg);
    let entries = (0..opts.count)
        .into_par_iter()
        .map(|i| corpus_entry(cfg, &toggled, i, program_seed(opts.seed, i), opts.max_items))
        .collect();
    Ok(CorpusReport { options: opts, entries })
}

/// Parses event totals from JSON: either bare totals or a run report.
pub fn parse_totals(text: &str) -> Result<EventTotals, HarnessError> {
    let t: EventTotals = serde_json::from_str(text).map_err(|e| HarnessError::Totals(e.to_string()))?;
    t.check().map_err(HarnessError::Totals)?;
    Ok(t)
}

pub fn replay_model(totals: &EventTotals, schedule: &PenaltySchedule) -> Result<ModelBreakdown, HarnessError> {
    Ok(timing::breakdown(totals, schedule)?)
}
