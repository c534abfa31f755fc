//! Sequential reference interpreter.
//!
//! Executes one instruction at a time and attributes events analytically:
//! it never models pipeline stages. Stall bubbles are found by replaying the
//! stall rules over the stream of slots (instructions, bubbles and killed
//! slots) in write-back order; wrong-path fetches come from control flow.
//! Only instruction decoding and the architectural state containers are
//! shared with the pipeline.
//!
//! Interrupts are not modelled.

pub mod compare;
pub mod gen;

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::events::{EventCounts, EventDelta, EventKind, EventTotals, TriggeredEvents};
use crate::hart::csr::{MIP_MEIP, MIP_MTIP, MSTATUS_MIE};
use crate::hart::{CsrOp, Exception, HartState, Privilege, StoreEffect};
use crate::isa::{decode, disassemble, Instr, InstrClass, Mnemonic};
use crate::pipeline::Limits;
use crate::timing::{predict, ModelError, PenaltySchedule};

pub use compare::{compare, Diff, DiffEntry};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("instruction limit of {0} exceeded")]
    LimitExceeded(u64),
    #[error("program enables interrupts at pc {0:#010x}; the interpreter has no interrupt timing")]
    InterruptsEnabled(u32),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Effect {
    None,
    Reg { rd: u8, value: u32 },
    Store { addr: u32, value: u32 },
    Trap { mcause: u32 },
    Return { to: u32 },
    Exit { code: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleRecord {
    pub pc: u32,
    #[serde(serialize_with = "ser_instr")]
    pub instr: Instr,
    #[serde(serialize_with = "ser_events")]
    pub events: TriggeredEvents,
    pub effect: Effect,
    /// Fetches that never reach write-back, caused by this instruction.
    pub wrong_path_fetches: u32,
}

fn ser_instr<S: serde::Serializer>(i: &Instr, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&disassemble(i))
}

fn ser_events<S: serde::Serializer>(e: &TriggeredEvents, s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(e.iter().map(|(k, n)| (k.name(), n)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleTrace {
    pub records: Vec<OracleRecord>,
    pub totals: EventTotals,
    pub predicted_cycles: u64,
    pub exit_code: Option<u32>,
    pub console: String,
    pub digest: String,
    pub config_digest: String,
}

impl OracleTrace {
    /// Line-oriented rendering, one record per line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (n, r) in self.records.iter().enumerate() {
            let _ = write!(s, "{n} pc={:#010x} {:<28} [{}]", r.pc, disassemble(&r.instr), r.events);
            if r.wrong_path_fetches > 0 {
                let _ = write!(s, " wrong_path_fetches={}", r.wrong_path_fetches);
            }
            match r.effect {
                Effect::None => {}
                Effect::Reg { rd, value } => {
                    let _ = write!(s, " x{rd}={value:#010x}");
                }
                Effect::Store { addr, value } => {
                    let _ = write!(s, " mem[{addr:#010x}]={value:#010x}");
                }
                Effect::Trap { mcause } => {
                    let _ = write!(s, " trap mcause={mcause:#x}");
                }
                Effect::Return { to } => {
                    let _ = write!(s, " return {to:#010x}");
                }
                Effect::Exit { code } => {
                    let _ = write!(s, " exit {code}");
                }
            }
            s.push('\n');
        }
        let _ = writeln!(s, "predicted_cycles={}", self.predicted_cycles);
        s
    }
}

/// Would `c` have to wait behind `ahead` (nearest first)?
fn waits(c: &Instr, ahead: &VecDeque<Option<Instr>>) -> bool {
    let is_csr = |i: &Instr| i.class() == InstrClass::Csr;
    for (dist, p) in ahead.iter().take(3).enumerate() {
        let Some(p) = p else { continue };
        let hit = match p.dest() {
            Some(rd) => c.reads(rd),
            None => false,
        };
        if hit && (is_csr(p) || is_csr(c) || (dist == 0 && p.class() == InstrClass::Load)) {
            return true;
        }
        if is_csr(p) && is_csr(c) && c.csr_writes() && p.csr == c.csr {
            return true;
        }
    }
    false
}

enum Outcome {
    Next(u32),
    Taken(u32),
    Fault(Exception, u32),
    Return(u32),
    Exit(u32),
}

pub struct Oracle {
    hart: HartState,
    pc: u32,
    schedule: PenaltySchedule,
    limits: Limits,
    ahead: VecDeque<Option<Instr>>,
}

impl Oracle {
    pub fn new(hart: HartState, entry: u32, schedule: PenaltySchedule, limits: Limits) -> Self {
        let ahead = VecDeque::from(vec![None; 3]);
        Oracle { hart, pc: entry, schedule, limits, ahead }
    }

    fn push_slot(&mut self, s: Option<Instr>) {
        self.ahead.push_front(s);
        self.ahead.truncate(3);
    }

    fn fetch(&self, pc: u32) -> Option<Instr> {
        self.hart.mem.fetch(pc).map(decode)
    }

    /// Slots fetched behind an instruction that empties the pipeline from
    /// WB: three, or two when the next instruction already waited once.
    fn drain_window(&self, pc: u32) -> u32 {
        match self.fetch(pc.wrapping_add(4)) {
            Some(next) if waits(&next, &self.ahead) => 2,
            _ => 3,
        }
    }

    fn rd_write(&mut self, rd: u8, v: u32) -> Effect {
        self.hart.gpr.write(rd, v);
        if rd == 0 {
            Effect::None
        } else {
            Effect::Reg { rd, value: v }
        }
    }

    fn csr(&mut self, i: &Instr) -> Result<u32, ()> {
        let src = if matches!(i.mnemonic, Mnemonic::Csrrwi | Mnemonic::Csrrsi | Mnemonic::Csrrci) {
            i.imm as u32
        } else {
            self.hart.gpr.read(i.rs1)
        };
        let op = match i.mnemonic {
            Mnemonic::Csrrw | Mnemonic::Csrrwi => CsrOp::Swap,
            Mnemonic::Csrrs | Mnemonic::Csrrsi => CsrOp::SetBits,
            _ => CsrOp::ClearBits,
        };
        let p = self.hart.privilege;
        let r = if i.csr_writes() { self.hart.csr.atomic_rw(i.csr, op, src, p) } else { self.hart.csr.read(i.csr, p) };
        r.map_err(|_| ())
    }

    fn interpret(&mut self, pc: u32, i: &Instr, ev: &mut TriggeredEvents, effect: &mut Effect) -> Outcome {
        use Mnemonic::*;
        let x = |r: u8| self.hart.gpr.read(r);
        let (a, b) = (x(i.rs1), x(i.rs2));
        let imm = i.imm as u32;
        let seq = pc.wrapping_add(4);
        let alu = |m: Mnemonic, a: u32, b: u32| -> u32 {
            match m {
                Add | Addi => a.wrapping_add(b),
                Sub => a.wrapping_sub(b),
                Sll | Slli => a.wrapping_shl(b),
                Slt | Slti => u32::from((a as i32) < (b as i32)),
                Sltu | Sltiu => u32::from(a < b),
                Xor | Xori => a ^ b,
                Srl | Srli => a.wrapping_shr(b),
                Sra | Srai => (a as i32).wrapping_shr(b) as u32,
                Or | Ori => a | b,
                And | Andi => a & b,
                _ => unreachable!(),
            }
        };
        match i.mnemonic {
            Illegal => Outcome::Fault(Exception::IllegalInstruction, i.raw),
            Lui => {
                *effect = self.rd_write(i.rd, imm);
                Outcome::Next(seq)
            }
            Auipc => {
                *effect = self.rd_write(i.rd, pc.wrapping_add(imm));
                Outcome::Next(seq)
            }
            Add | Sub | Sll | Slt | Sltu | Xor | Srl | Sra | Or | And => {
                *effect = self.rd_write(i.rd, alu(i.mnemonic, a, b));
                Outcome::Next(seq)
            }
            Addi | Slti | Sltiu | Xori | Ori | Andi | Slli | Srli | Srai => {
                *effect = self.rd_write(i.rd, alu(i.mnemonic, a, imm));
                Outcome::Next(seq)
            }
            Jal | Jalr => {
                let t = if i.mnemonic == Jal { pc.wrapping_add(imm) } else { a.wrapping_add(imm) & !1 };
                if t & 3 != 0 {
                    return Outcome::Fault(Exception::InstrAddressMisaligned, t);
                }
                ev.set(EventKind::UncondJump);
                *effect = self.rd_write(i.rd, seq);
                Outcome::Taken(t)
            }
            Beq | Bne | Blt | Bge | Bltu | Bgeu => {
                let (sa, sb) = (a as i32, b as i32);
                let cond = match i.mnemonic {
                    Beq => a == b,
                    Bne => a != b,
                    Blt => sa < sb,
                    Bge => sa >= sb,
                    Bltu => a < b,
                    _ => a >= b,
                };
                if !cond {
                    ev.set(EventKind::BranchNt);
                    return Outcome::Next(seq);
                }
                let t = pc.wrapping_add(imm);
                if t & 3 != 0 {
                    return Outcome::Fault(Exception::InstrAddressMisaligned, t);
                }
                ev.set(EventKind::Branch);
                Outcome::Taken(t)
            }
            Lb | Lh | Lw | Lbu | Lhu => {
                let addr = a.wrapping_add(imm);
                let (w, signed) = match i.mnemonic {
                    Lb => (1, true),
                    Lbu => (1, false),
                    Lh => (2, true),
                    Lhu => (2, false),
                    _ => (4, false),
                };
                match self.hart.mem.load(addr, w, signed) {
                    Ok((v, _)) => {
                        ev.set(EventKind::Load);
                        ev.set(EventKind::MemAccess);
                        *effect = self.rd_write(i.rd, v);
                        Outcome::Next(seq)
                    }
                    Err(f) => Outcome::Fault(f.into(), f.address()),
                }
            }
            Sb | Sh | Sw => {
                let addr = a.wrapping_add(imm);
                let w = match i.mnemonic {
                    Sb => 1,
                    Sh => 2,
                    _ => 4,
                };
                match self.hart.mem.store(addr, w, b) {
                    Ok((_, fx)) => {
                        ev.set(EventKind::Store);
                        ev.set(EventKind::MemAccess);
                        *effect = Effect::Store { addr, value: b };
                        match fx {
                            StoreEffect::Exit(code) => Outcome::Exit(code),
                            _ => Outcome::Next(seq),
                        }
                    }
                    Err(f) => Outcome::Fault(f.into(), f.address()),
                }
            }
            Csrrw | Csrrs | Csrrc | Csrrwi | Csrrsi | Csrrci => match self.csr(i) {
                Ok(old) => {
                    *effect = self.rd_write(i.rd, old);
                    Outcome::Next(seq)
                }
                Err(()) => Outcome::Fault(Exception::IllegalInstruction, i.raw),
            },
            Ecall => Outcome::Fault(Exception::ecall(self.hart.privilege), 0),
            Ebreak => Outcome::Fault(Exception::Breakpoint, pc),
            Mret if self.hart.privilege == Privilege::User => {
                Outcome::Fault(Exception::IllegalInstruction, i.raw)
            }
            Mret => Outcome::Return(self.hart.mret()),
            Fence | Wfi => Outcome::Next(seq),
        }
    }

    fn interrupts_enabled(&self) -> bool {
        let t = &self.hart.csr.trap;
        let globally = self.hart.privilege == Privilege::User || t.mstatus & MSTATUS_MIE != 0;
        globally && t.mie & (MIP_MEIP | MIP_MTIP) != 0
    }

    /// Runs to the exit store.
    pub fn run(mut self) -> Result<OracleTrace, OracleError> {
        let mut records = Vec::new();
        let mut counts = EventCounts::default();
        let mut exits = 0u64;
        let mut steps = 0u64;
        loop {
            steps += 1;
            if steps > self.limits.max_instret {
                return Err(OracleError::LimitExceeded(self.limits.max_instret));
            }
            let pc = self.pc;
            let fetched = self.fetch(pc);
            let instr = fetched.unwrap_or_else(|| decode(0));
            let mut ev = TriggeredEvents::default();
            ev.set(EventKind::Fetch);

            let mut bubbles = 0;
            while waits(&instr, &self.ahead) {
                self.push_slot(None);
                bubbles += 1;
            }
            ev.add(EventKind::Hazard, bubbles);
            self.push_slot(Some(instr));

            let mut effect = Effect::None;
            let outcome = match fetched {
                None if pc % 4 != 0 => Outcome::Fault(Exception::InstrAddressMisaligned, pc),
                None => Outcome::Fault(Exception::InstrAccessFault, pc),
                Some(_) => self.interpret(pc, &instr, &mut ev, &mut effect),
            };
            self.hart.csr.hpm.apply_cycle(&EventDelta::default());
            if self.interrupts_enabled() {
                return Err(OracleError::InterruptsEnabled(pc));
            }

            let mut wrong_path = 0;
            let mut done = false;
            match outcome {
                Outcome::Next(n) => {
                    ev.set(EventKind::Instret);
                    self.pc = n;
                }
                Outcome::Taken(t) => {
                    ev.set(EventKind::Instret);
                    wrong_path = 2;
                    self.push_slot(None);
                    self.push_slot(None);
                    self.pc = t;
                }
                Outcome::Fault(e, tval) => {
                    ev.set(EventKind::Exception);
                    effect = Effect::Trap { mcause: e.code() };
                    wrong_path = self.drain_window(pc);
                    self.pc = self.hart.take_exception(e, pc, tval);
                    self.ahead = VecDeque::from(vec![None; 3]);
                }
                Outcome::Return(to) => {
                    ev.set(EventKind::Instret);
                    effect = Effect::Return { to };
                    exits += 1;
                    wrong_path = self.drain_window(pc);
                    self.pc = to;
                    self.ahead = VecDeque::from(vec![None; 3]);
                }
                Outcome::Exit(code) => {
                    ev.set(EventKind::Instret);
                    effect = Effect::Exit { code };
                    wrong_path = self.drain_window(pc) + 1;
                    done = true;
                }
            }
            counts.add_record(&ev);
            counts[EventKind::Fetch] += wrong_path as u64;
            records.push(OracleRecord { pc, instr, events: ev, effect, wrong_path_fetches: wrong_path });
            if done {
                break;
            }
        }
        counts[EventKind::Cycle] = 0;
        let mut totals = EventTotals::from_counts(counts, exits, 0);
        let predicted = predict(&totals, &self.schedule)?;
        totals.events[EventKind::Cycle] = predicted;
        Ok(OracleTrace {
            records,
            totals,
            predicted_cycles: predicted,
            exit_code: self.hart.mem.exit_code,
            console: String::from_utf8_lossy(&self.hart.mem.console).into_owned(),
            digest: self.hart.digest(),
            config_digest: String::new(),
        })
    }
}
