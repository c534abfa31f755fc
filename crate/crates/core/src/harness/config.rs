//! Run configuration, read from TOML.
//!
//! ```toml
//! [program]
//! path = "quicksort64.bin"
//! format = "flat"          # or "elf32"
//!
//! [memory]
//! ram_size = 0x100000
//!
//! [schedule]
//! load_extra = 2
//!
//! [pmu]
//! mcounteren = 0xFFFFFFFF
//! mcountinhibit = 0
//! mhpmevent = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11]
//!
//! [interrupts]
//! external = [100, 2000]
//!
//! [limits]
//! max_cycles = 100000000
//!
//! [report]
//! format = "json"          # json, csv or table
//! trace = false
//! ```
//!
//! Every section and key is optional.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::events::EventKind;
use crate::hart::{MemoryMap, Region};
use crate::pipeline::Limits;
use crate::timing::PenaltySchedule;

/// Number of programmable counters (`mhpmcounter3..31`).
pub const PROGRAMMABLE_COUNTERS: usize = 29;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    #[default]
    Flat,
    Elf32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
    Table,
}

impl std::str::FromStr for ReportFormat {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "table" => Ok(ReportFormat::Table),
            other => Err(ConfigError::Invalid(format!("unknown report format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProgramSection {
    pub path: Option<PathBuf>,
    pub format: ImageFormat,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemorySection {
    pub rom_base: Option<u32>,
    pub rom_size: Option<u32>,
    pub ram_base: Option<u32>,
    pub ram_size: Option<u32>,
    pub mmio_base: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PmuSection {
    pub mcounteren: u32,
    pub mcountinhibit: u32,
    /// Selector codes for `mhpmevent3` onwards; missing entries are 0.
    pub mhpmevent: Vec<u32>,
}

impl Default for PmuSection {
    fn default() -> Self {
        PmuSection { mcounteren: 0xFFFF_FFFF, mcountinhibit: 0, mhpmevent: (1..=11).collect() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterruptSection {
    /// Cycles at which the external interrupt line is raised.
    pub external: Vec<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub format: ReportFormat,
    pub trace: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub program: ProgramSection,
    pub memory: MemorySection,
    pub schedule: PenaltySchedule,
    pub pmu: PmuSection,
    pub interrupts: InterruptSection,
    pub limits: Limits,
    pub report: ReportSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative program path is resolved against
    /// the file's directory.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        let mut cfg = Self::parse(&text)?;
        if let (Some(p), Some(dir)) = (&cfg.program.path, path.parent()) {
            if p.is_relative() {
                cfg.program.path = Some(dir.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.interrupts.external.windows(2).any(|w| w[0] >= w[1]) {
            return bad("interrupt cycles must be strictly increasing".into());
        }
        if self.pmu.mhpmevent.len() > PROGRAMMABLE_COUNTERS {
            return bad(format!("at most {PROGRAMMABLE_COUNTERS} mhpmevent selectors"));
        }
        if let Some(c) = self.pmu.mhpmevent.iter().find(|&&c| c != 0 && EventKind::from_selector(c).is_none()) {
            return bad(format!("selector code {c} is not an event"));
        }
        crate::pipeline::check_schedule(&self.schedule).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.memory_map().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    /// The memory map with overrides applied and latencies taken from the
    /// schedule.
    pub fn memory_map(&self) -> MemoryMap {
        let d = MemoryMap::default();
        let m = &self.memory;
        MemoryMap {
            rom: Region { base: m.rom_base.unwrap_or(d.rom.base), size: m.rom_size.unwrap_or(d.rom.size) },
            ram: Region { base: m.ram_base.unwrap_or(d.ram.base), size: m.ram_size.unwrap_or(d.ram.size) },
            mmio_base: m.mmio_base.unwrap_or(d.mmio_base),
            load_extra_cycles: self.schedule.load_extra.try_into().unwrap_or(u32::MAX),
            store_extra_cycles: self.schedule.store_extra.try_into().unwrap_or(u32::MAX),
        }
    }

    /// Selector for `mhpmevent{3 + i}`.
    pub fn selector(&self, i: usize) -> u32 {
        self.pmu.mhpmevent.get(i).copied().unwrap_or(0)
    }

    /// SHA-256 over the canonical JSON form of the configuration.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
