//! Per-cycle trace records.
//!
//! Text form, one line per cycle, fields in fixed order:
//!
//! ```text
//! cycle=7 IF=0x00000018 ID=0x00000014 EX=- MEM=~0x0000000c WB=0x00000008 counted=[CYCLE×1 INSTRET×1 FETCH×1] mcycle=7 minstret=2
//! ```
//!
//! A `~` prefix marks a killed slot; `-` is an empty slot or bubble.

use std::fmt;

use serde::Serialize;

use crate::events::{EventDelta, TriggeredEvents};

pub const STAGE_NAMES: [&str; 5] = ["IF", "ID", "EX", "MEM", "WB"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StageView {
    pub pc: u32,
    pub killed: bool,
}

/// A record handed to the counters, with the cycle its owner was in WB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CountedRecord {
    pub pc: u32,
    pub wb_cycle: u64,
    pub killed: bool,
    #[serde(serialize_with = "ser_events")]
    pub events: TriggeredEvents,
}

fn ser_events<S: serde::Serializer>(e: &TriggeredEvents, s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(e.iter().map(|(k, n)| (k.name(), n)))
}

fn ser_delta<S: serde::Serializer>(d: &EventDelta, s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(d.iter().map(|(k, n)| (k.name(), n)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleReport {
    pub cycle: u64,
    /// False for cycles in which the pipeline was frozen.
    pub advanced: bool,
    /// IF, ID, EX, MEM, WB occupants at the end of the cycle.
    pub stages: [Option<StageView>; 5],
    pub counted: Option<CountedRecord>,
    /// In-flight fetches accounted for when the run halts.
    pub settled_fetches: u32,
    /// Everything the counters received this cycle, CYCLE included.
    #[serde(serialize_with = "ser_delta")]
    pub delta: EventDelta,
    pub mcycle: u64,
    pub minstret: u64,
}

impl fmt::Display for CycleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cycle={}", self.cycle)?;
        for (name, s) in STAGE_NAMES.iter().zip(&self.stages) {
            match s {
                None => write!(f, " {name}=-")?,
                Some(v) if v.killed => write!(f, " {name}=~{:#010x}", v.pc)?,
                Some(v) => write!(f, " {name}={:#010x}", v.pc)?,
            }
        }
        f.write_str(" counted=[")?;
        for (i, (k, n)) in self.delta.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{k}×{n}")?;
        }
        write!(f, "] mcycle={} minstret={}", self.mcycle, self.minstret)
    }
}
