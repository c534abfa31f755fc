//! Cycle-accurate RV32I five-stage pipeline with a hardware performance
//! monitor that counts per-instruction event records one cycle after
//! write-back, plus an analytical cycle model and a sequential reference
//! interpreter for differential testing.

pub mod events;
pub mod harness;
pub mod hart;
pub mod isa;
pub mod timing;
pub mod oracle;
pub mod pipeline;
