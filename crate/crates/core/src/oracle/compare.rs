//! Differential comparison of an oracle trace against a pipeline run.

use std::fmt;

use serde::Serialize;

use super::OracleTrace;
use crate::events::EventKind;
use crate::pipeline::RunSummary;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiffEntry {
    ConfigMismatch { oracle: String, simulator: String },
    Event { event: EventKind, oracle: u64, simulator: u64 },
    TrapBookkeeping { field: &'static str, oracle: u64, simulator: u64 },
    ExitCode { oracle: Option<u32>, simulator: Option<u32> },
    Digest { oracle: String, simulator: String },
    Cycles { predicted: u64, measured: u64 },
}

impl fmt::Display for DiffEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiffEntry::ConfigMismatch { oracle, simulator } => {
                write!(f, "config digest: oracle {oracle} simulator {simulator}")
            }
            DiffEntry::Event { event, oracle, simulator } => {
                let d = *simulator as i128 - *oracle as i128;
                write!(f, "{event}: oracle {oracle} simulator {simulator} ({d:+})")
            }
            DiffEntry::TrapBookkeeping { field, oracle, simulator } => {
                write!(f, "{field}: oracle {oracle} simulator {simulator}")
            }
            DiffEntry::ExitCode { oracle, simulator } => {
                write!(f, "exit code: oracle {oracle:?} simulator {simulator:?}")
            }
            DiffEntry::Digest { oracle, simulator } => {
                write!(f, "architectural digest: oracle {oracle} simulator {simulator}")
            }
            DiffEntry::Cycles { predicted, measured } => {
                let d = *measured as i128 - *predicted as i128;
                write!(f, "cycles: predicted {predicted} measured {measured} ({d:+})")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Diff {
    pub entries: Vec<DiffEntry>,
}

impl Diff {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn event(&self, kind: EventKind) -> Option<(u64, u64)> {
        self.entries.iter().find_map(|e| match e {
            DiffEntry::Event { event, oracle, simulator } if *event == kind => Some((*oracle, *simulator)),
            _ => None,
        })
    }
}

impl fmt::Display for Diff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return f.write_str("no differences");
        }
        for e in &self.entries {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

/// Every event total, the trap bookkeeping, the exit code, the architectural
/// digest and the cycle count must agree. Runs made under different
/// configurations are reported as such and not compared further.
pub fn compare(oracle: &OracleTrace, run: &RunSummary) -> Diff {
    let mut entries = Vec::new();
    if oracle.config_digest != run.config_digest {
        entries.push(DiffEntry::ConfigMismatch {
            oracle: oracle.config_digest.clone(),
            simulator: run.config_digest.clone(),
        });
        return Diff { entries };
    }
    for k in EventKind::ALL {
        let (o, s) = (oracle.totals.get(k), run.totals.get(k));
        if o != s {
            entries.push(DiffEntry::Event { event: k, oracle: o, simulator: s });
        }
    }
    let (ot, st) = (&oracle.totals, &run.totals);
    for (field, o, s) in [
        ("trap pairs", ot.trap_pairs, st.trap_pairs),
        ("back-to-back MRET traps", ot.back_to_back_mret_traps, st.back_to_back_mret_traps),
        ("unmatched trap entries", ot.unmatched_entries, st.unmatched_entries),
        ("unmatched trap exits", ot.unmatched_exits, st.unmatched_exits),
    ] {
        if o != s {
            entries.push(DiffEntry::TrapBookkeeping { field, oracle: o, simulator: s });
        }
    }
    if oracle.exit_code != run.exit_code {
        entries.push(DiffEntry::ExitCode { oracle: oracle.exit_code, simulator: run.exit_code });
    }
    if oracle.digest != run.digest {
        entries.push(DiffEntry::Digest { oracle: oracle.digest.clone(), simulator: run.digest.clone() });
    }
    if oracle.predicted_cycles != run.cycles {
        entries.push(DiffEntry::Cycles { predicted: oracle.predicted_cycles, measured: run.cycles });
    }
    Diff { entries }
}
