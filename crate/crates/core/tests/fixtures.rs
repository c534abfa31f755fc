mod common;

use common::{config, fixture, load, MICROBENCHMARKS};
use rvhpm::harness::{self, HarnessError, ImageFormat, LoadedImage, RunConfig};
use rvhpm::isa::{decode, disassemble};
use rvhpm::oracle::OracleError;
use rvhpm::pipeline::SimHooks;
use sha2::{Digest, Sha256};

#[test]
fn every_fixture_matches_the_model() {
    let mut names: Vec<(&str, &[u64])> = MICROBENCHMARKS.to_vec();
    names.push(("quicksort64", &[]));
    for (name, irq) in names {
        let cfg = config(&format!("{name}.bin"), ImageFormat::Flat, irq);
        let out = harness::run(&cfg, &load(&cfg), SimHooks::default()).unwrap();
        assert!(out.validation.pass, "{name}: delta {}", out.validation.delta);
        assert!(out.summary.exit_code.is_some(), "{name} did not exit");
    }
}

#[test]
fn interpreter_agrees_on_fixtures() {
    for (name, irq) in MICROBENCHMARKS.iter().chain([&("quicksort64", &[][..])]) {
        if !irq.is_empty() || name.starts_with("irq_") {
            continue;
        }
        let cfg = config(&format!("{name}.bin"), ImageFormat::Flat, irq);
        let c = harness::compare(&cfg, &load(&cfg), SimHooks::default()).unwrap();
        assert!(c.diff.is_empty(), "{name}:\n{}", c.diff);
    }
}

#[test]
fn interpreter_refuses_interrupt_fixtures() {
    let cfg = config("irq_timer.bin", ImageFormat::Flat, &[]);
    let e = harness::run_oracle(&cfg, &load(&cfg)).unwrap_err();
    assert!(matches!(e, HarnessError::Oracle(OracleError::InterruptsEnabled(_))), "{e}");

    let cfg = config("irq_external.bin", ImageFormat::Flat, &[300]);
    assert!(matches!(harness::run_oracle(&cfg, &load(&cfg)), Err(HarnessError::OracleInterrupts)));
}

#[test]
fn quicksort_elf_and_flat_agree() {
    let flat = config("quicksort64.bin", ImageFormat::Flat, &[]);
    let elf = config("quicksort64.elf", ImageFormat::Elf32, &[]);
    let a = harness::run(&flat, &load(&flat), SimHooks::default()).unwrap();
    let b = harness::run(&elf, &load(&elf), SimHooks::default()).unwrap();
    assert_eq!(a.summary.cycles, b.summary.cycles);
    assert_eq!(a.summary.totals, b.summary.totals);
    assert_eq!(a.summary.digest, b.summary.digest);
    assert_eq!(a.summary.exit_code, Some(0));
}

#[test]
fn ram_elf_matches_recorded_segments() {
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("ram_hello.json")).unwrap()).unwrap();
    let map = RunConfig::default().memory_map();
    let img = LoadedImage::from_path(&fixture("ram_hello.elf"), ImageFormat::Elf32, &map).unwrap();
    assert_eq!(img.entry as u64, meta["entry"].as_u64().unwrap());
    let segs = meta["segments"].as_array().unwrap();
    assert_eq!(img.segments.len(), segs.len());
    for (s, m) in img.segments.iter().zip(segs) {
        assert_eq!(s.addr as u64, m["vaddr"].as_u64().unwrap());
        assert_eq!(s.bytes.len() as u64, m["memsz"].as_u64().unwrap());
        assert_eq!(hex::encode(Sha256::digest(&s.bytes)), m["sha256"].as_str().unwrap());
    }

    let cfg = config("ram_hello.elf", ImageFormat::Elf32, &[]);
    let out = harness::run(&cfg, &img, SimHooks::default()).unwrap();
    assert_eq!(out.summary.console, "hi");
    assert_eq!(out.summary.exit_code, Some(7));
    assert!(out.validation.pass);
}

#[test]
fn console_output() {
    let cfg = config("console_hello.bin", ImageFormat::Flat, &[]);
    let out = harness::run(&cfg, &load(&cfg), SimHooks::default()).unwrap();
    assert_eq!(out.summary.console, "hello\n");
}

#[test]
fn assembler_vectors_disassemble_back() {
    let text = std::fs::read_to_string(fixture("isa_vectors.txt")).unwrap();
    let mut n = 0;
    for line in text.lines() {
        let (word, asm) = line.split_once('\t').unwrap();
        let word = u32::from_str_radix(word.trim_start_matches("0x"), 16).unwrap();
        let i = decode(word);
        assert!(!i.is_illegal(), "{asm}");
        assert_eq!(disassemble(&i), asm, "{word:#010x}");
        n += 1;
    }
    assert!(n >= 60);
}
