#![allow(dead_code)]

use std::path::PathBuf;

use rvhpm::harness::{self, ImageFormat, LoadedImage, RunConfig};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Flat-image microbenchmarks, with the external interrupt schedule each
/// one needs.
pub const MICROBENCHMARKS: &[(&str, &[u64])] = &[
    ("access_faults", &[]),
    ("alu_chain", &[]),
    ("branch_loop", &[]),
    ("branch_mixed", &[]),
    ("branch_not_taken", &[]),
    ("byte_half", &[]),
    ("console_hello", &[]),
    ("csr_listing", &[]),
    ("csr_scratch", &[]),
    ("ebreak_trap", &[]),
    ("ecall_roundtrip", &[]),
    ("fence_wfi", &[]),
    ("illegal_third", &[]),
    ("irq_external", &[300]),
    ("irq_timer", &[]),
    ("jal_calls", &[]),
    ("jalr_table", &[]),
    ("load_independent", &[]),
    ("load_use", &[]),
    ("lui_auipc", &[]),
    ("misaligned_jump", &[]),
    ("misaligned_load", &[]),
    ("shifts_imm", &[]),
    ("store_burst", &[]),
    ("user_ecall", &[]),
];

pub fn config(file: &str, format: ImageFormat, interrupts: &[u64]) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.program.path = Some(fixture(file));
    cfg.program.format = format;
    cfg.interrupts.external = interrupts.to_vec();
    cfg
}

pub fn load(cfg: &RunConfig) -> LoadedImage {
    harness::load_program(cfg).unwrap()
}
